import csv
import json
import subprocess
import sys

import pytest

from qcgate import cli
from qcgate.experiments import CSV_HEADER, BlochRecord, SweepRecord


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_prints_resolved_config(capsys):
    code, out, _ = run_cli(capsys, "validate")
    assert code == 0
    assert "ratio = 200.0" in out and "norm = trace" in out


def test_sweep_tau_cd_csv(capsys):
    code, out, _ = run_cli(capsys, "sweep-tau", "--protocol=cd", "--ramp=linear", "-q")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == CSV_HEADER
    rows = list(csv.DictReader(lines))
    assert len(rows) == 40
    assert all(float(r["infidelity"]) < 1e-8 for r in rows)
    assert all(r["cost"] == "" for r in rows)


def test_unknown_ramp_exit_2(capsys):
    code, _, err = run_cli(capsys, "sweep-tau", "--ramp=cubic")
    assert code == 2
    assert "linear|polynomial|sinusoidal" in err and "ramp" in err


def test_unknown_key_exit_2(capsys):
    code, _, err = run_cli(capsys, "cost", "--colour=blue")
    assert code == 2 and "colour" in err and "valid keys" in err


def test_bad_subcommand_exit_2(capsys):
    code, _, _ = run_cli(capsys, "teleport")
    assert code == 2


def test_config_file_and_override(tmp_path, capsys):
    conf = tmp_path / "run.conf"
    conf.write_text("protocols = ie\ntau = 2.0\n")
    code, out, _ = run_cli(capsys, "validate", "--config", str(conf), "--tau=3.0")
    assert code == 0
    assert "tau = 3.0" in out and "protocols = ie" in out


def test_output_file_json_roundtrip(tmp_path, capsys):
    path = tmp_path / "cz.json"
    code, _, _ = run_cli(capsys, "cz", "--format", "json", "--output", str(path), "-q")
    assert code == 0
    text = path.read_text()
    doc = json.loads(text)
    assert doc["config"]["scenario"] == "cz" and doc["version"]
    records = cli.read_json_records(text)
    assert len(records) == 4 and all(isinstance(r, SweepRecord) for r in records)
    assert cli.read_json_records(cli.render_json(records)) == records


def test_csv_float_format():
    rec = SweepRecord("s", "cd", "linear", "tau", 0.1, 1 / 3, runtime_seconds=0.0)
    text = cli.render_csv([rec])
    assert text.splitlines()[1] == "s,cd,linear,tau,0.10000000000000001,0.33333333333333331,,0"
    assert float(text.splitlines()[1].split(",")[5]) == 1 / 3


def test_bloch_csv_header(capsys):
    code, out, _ = run_cli(capsys, "bloch", "-q")
    assert code == 0
    assert out.splitlines()[0] == "scenario,protocol,qubit,t,x,y,z"
    assert len(out.splitlines()) == 1 + 3 * 201


def test_empty_records_refused():
    with pytest.raises(ValueError, match="empty"):
        cli.write_output([], "csv", "-")


def test_unwritable_path_exit_1(tmp_path, capsys):
    code, _, err = run_cli(capsys, "cz", "--output", str(tmp_path / "missing" / "out.csv"), "-q")
    assert code == 1 and "cannot write" in err


def test_failed_row_exit_1(monkeypatch, capsys):
    import qcgate.experiments as E

    def boom(proto, spec, probes=None):
        raise RuntimeError("diverged")

    monkeypatch.setattr(E, "dynamical_infidelity", boom)
    code, out, err = run_cli(capsys, "sweep-tau", "--protocol=cd", "--tau_points=2", "-q")
    assert code == 1
    assert "failed row protocol=cd" in err and "tau=" in err and "diverged" in err


def test_deterministic_csv(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert cli.main(["timing", "--record_runtime=false", "--eps_max=0.1", "--output", str(p), "-q"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_parallel_merge_order_matches_serial(tmp_path, monkeypatch):
    outs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("QCG_THREADS", threads)
        p = tmp_path / f"t{threads}.csv"
        assert cli.main(["cost", "--record_runtime=false", "--tau_points=8", "--output", str(p), "-q"]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_every_subcommand_reachable():
    assert set(cli.SUBCOMMANDS) == {"sweep-tau", "dynamical", "cost", "timing", "dephasing", "bloch",
                                    "sequence", "cz", "validate"}
    assert len({v for v in cli.SUBCOMMANDS.values() if v}) == 8


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "qcgate.cli", "validate"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("scenario = duration_sweep")
