"""Pick the kernel implementation at import time.

The compiled module is preferred. Set ``QCGATE_BACKEND=python`` to force
the numpy fallback (the benchmark and the backend-parity tests do this
per call through :func:`get_kernels`).
"""
import importlib
import os

_NAMES = {"cython": "qcgate._ckernels", "python": "qcgate._pykernels"}


def available_backends():
    found = []
    for name, module in _NAMES.items():
        try:
            importlib.import_module(module)
        except ImportError:
            continue
        found.append(name)
    return found


def get_kernels(name=None):
    """Return the kernel module called ``name`` (default: the active one)."""
    if name is None:
        return kernels
    if name not in _NAMES:
        raise ValueError(f"unknown backend {name!r}; choose from {sorted(_NAMES)}")
    return importlib.import_module(_NAMES[name])


def _select():
    wanted = os.environ.get("QCGATE_BACKEND", "").strip().lower()
    if wanted == "python":
        return "python", importlib.import_module(_NAMES["python"])
    try:
        return "cython", importlib.import_module(_NAMES["cython"])
    except ImportError:
        if wanted == "cython":
            raise
        return "python", importlib.import_module(_NAMES["python"])


BACKEND, kernels = _select()
