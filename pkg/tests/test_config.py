import pytest

from qcgate import config as C


def test_defaults_per_scenario():
    assert C.resolve("duration_sweep").protocols == ("uncontrolled", "cd", "fe", "ie")
    assert C.resolve("cost_sweep").tau_min == 0.05
    assert C.resolve("timing_sweep").protocols == ("ie",)
    assert C.resolve("cz").gate == "cz"
    assert C.resolve("duration_sweep").ratio == 200


def test_three_layer_precedence(tmp_path):
    f = tmp_path / "c.conf"
    f.write_text("# comment\ntau = 2.0   # inline comment\nratio = 50\nramp = polynomial\n")
    cfg = C.resolve("dynamical", C.load_file(f), C.parse_overrides(["--ratio=100"]))
    assert cfg.tau == 2.0          # file beats default
    assert cfg.ratio == 100.0      # override beats file
    assert cfg.ramp == "polynomial"
    assert cfg.norm == "trace"     # default survives


def test_alias_and_lists():
    o = C.parse_overrides(["--protocol=cd,ie", "record_runtime=false"])
    assert o == {"protocols": ("cd", "ie"), "record_runtime": False}


def test_unknown_key_lists_valid_keys():
    with pytest.raises(C.ConfigError) as e:
        C.parse_overrides(["--bogus=1"])
    assert e.value.key == "bogus"
    for k in C.valid_keys():
        assert k in str(e.value)


@pytest.mark.parametrize("item,key", [("ramp=cubic", "ramp"), ("tau=-1", "tau"), ("tau=abc", "tau"),
                                      ("protocols=cd,xx", "protocols"), ("norm=l1", "norm")])
def test_bad_values_name_the_key(item, key):
    with pytest.raises(C.ConfigError) as e:
        C.resolve("duration_sweep", overrides=C.parse_overrides([item]))
    assert e.value.key == key


def test_ramp_message_lists_choices():
    with pytest.raises(C.ConfigError, match="linear\\|polynomial\\|sinusoidal"):
        C.resolve("duration_sweep", overrides={"ramp": "cubic"})


def test_malformed_lines(tmp_path):
    f = tmp_path / "c.conf"
    f.write_text("tau 2\n")
    with pytest.raises(C.ConfigError, match="line 1"):
        C.load_file(f)
    with pytest.raises(C.ConfigError):
        C.load_file(tmp_path / "missing.conf")


def test_cross_field_checks():
    with pytest.raises(C.ConfigError):
        C.resolve("duration_sweep", overrides={"tau_min": 5.0, "tau_max": 1.0})
    with pytest.raises(C.ConfigError):
        C.resolve("bloch", overrides={"gate": "cz"})
    with pytest.raises(C.ConfigError):
        C.resolve("timing_sweep", overrides={"eps_max": 0.6})


def test_text_roundtrip():
    cfg = C.resolve("cost_sweep", overrides={"norm": "frobenius"})
    again = C.resolve("cost_sweep", C.parse_pairs(cfg.to_text().splitlines()))
    assert again == cfg
