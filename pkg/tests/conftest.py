import numpy as np
import pytest


def random_hermitian(rng, d, scale=1.0):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (a + a.conj().T)


def random_density(rng, d, rank=None):
    rank = rank or d
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def distance_to_path(points, path):
    """Distance from each point to the polyline through ``path`` (both (N, 3))."""
    a, b = path[:-1], path[1:]
    ab = b - a
    out = []
    for p in points:
        denom = np.einsum("ij,ij->i", ab, ab)
        s = np.where(denom > 0, np.einsum("ij,ij->i", p - a, ab) / np.where(denom > 0, denom, 1), 0)
        proj = a + np.clip(s, 0, 1)[:, None] * ab
        out.append(np.min(np.linalg.norm(p - proj, axis=1)))
    return np.array(out)


ACCEPTANCE_NOTES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_NOTES:
        terminalreporter.section("acceptance measurements")
        for line in ACCEPTANCE_NOTES:
            terminalreporter.write_line(line)
