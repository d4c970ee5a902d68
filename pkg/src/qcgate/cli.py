"""``qcgate`` command line.

    qcgate SUBCOMMAND [--config FILE] [--output PATH] [--format csv|json] [--KEY=VALUE ...]

Exit status: 0 on success, 2 on a configuration error, 1 on a numerical
failure (the failing rows are listed on stderr) or an unwritable output.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, fields
from pathlib import Path

from . import __version__
from .config import ConfigError, ExperimentConfig, load_file, parse_overrides, resolve, valid_keys
from .experiments import BLOCH_HEADER, CSV_HEADER, BlochRecord, SweepRecord, run

SUBCOMMANDS = {
    "sweep-tau": "duration_sweep",
    "dynamical": "dynamical",
    "cost": "cost_sweep",
    "timing": "timing_sweep",
    "dephasing": "dephasing_sweep",
    "bloch": "bloch",
    "sequence": "sequence",
    "cz": "cz",
    "validate": None,
}

log = logging.getLogger("qcgate")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def render_csv(records) -> str:
    if isinstance(records[0], BlochRecord):
        header, cols = BLOCH_HEADER, [f.name for f in fields(BlochRecord)]
    else:
        header, cols = CSV_HEADER, CSV_HEADER.split(",")
    buf = io.StringIO()
    buf.write(header + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    for r in records:
        writer.writerow([_fmt(getattr(r, c)) for c in cols])
    return buf.getvalue()


def render_json(records, config: ExperimentConfig | None = None) -> str:
    doc = {
        "version": __version__,
        "config": None if config is None else {k: list(v) if isinstance(v, tuple) else v
                                               for k, v in config.as_dict().items()},
        "records": [asdict(r) for r in records],
    }
    return json.dumps(doc, indent=2, allow_nan=True) + "\n"


def read_json_records(text: str) -> list:
    """Inverse of :func:`render_json` for the record list."""
    out = []
    for item in json.loads(text)["records"]:
        cls = BlochRecord if "qubit" in item else SweepRecord
        out.append(cls(**item))
    return out


def write_output(records, fmt: str = "csv", path: str | Path = "-", config: ExperimentConfig | None = None) -> None:
    """Write records as CSV or JSON to ``path`` (``-`` for stdout)."""
    if not records:
        raise ValueError("refusing to write an empty record list")
    if fmt == "csv":
        text = render_csv(records)
    elif fmt == "json":
        text = render_json(records, config)
    else:
        raise ValueError(f"unknown output format {fmt!r}; choose csv|json")
    if str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qcgate",
        description="Simulate auxiliary-qubit gate protocols and export sweep data.",
        epilog="Any config key can be overridden inline as --key=value; valid keys: " + ", ".join(valid_keys()),
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("subcommand", choices=list(SUBCOMMANDS))
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--output", help="output path, '-' for stdout")
    p.add_argument("--format", choices=["csv", "json"], help="output format")
    p.add_argument("-q", "--quiet", action="store_true", help="suppress progress messages")
    return p


def _resolve(args, extra) -> ExperimentConfig:
    file_values = load_file(args.config) if args.config else {}
    overrides = parse_overrides(extra)
    if args.output is not None:
        overrides["output"] = args.output
    if args.format is not None:
        overrides["format"] = args.format
    scenario = SUBCOMMANDS[args.subcommand] or file_values.get("scenario", "duration_sweep")
    return resolve(scenario, file_values, overrides)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="qcgate: %(message)s", stream=sys.stderr)

    try:
        cfg = _resolve(args, extra)
    except ConfigError as exc:
        print(f"qcgate: config error: {exc}", file=sys.stderr)
        return 2

    if args.subcommand == "validate":
        sys.stdout.write(cfg.to_text())
        return 0

    try:
        records = run(cfg)
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"qcgate: {cfg.scenario} failed: {exc}", file=sys.stderr)
        return 1
    log.info("%s: %d records", cfg.scenario, len(records))

    try:
        write_output(records, cfg.format, cfg.output, cfg)
    except ValueError as exc:
        print(f"qcgate: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"qcgate: cannot write {cfg.output}: {exc}", file=sys.stderr)
        return 1

    failed = [r for r in records if getattr(r, "error", None)]
    for r in failed:
        print(f"qcgate: failed row protocol={r.protocol} ramp={r.ramp} {r.param}={r.value!r}: {r.error}",
              file=sys.stderr)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
