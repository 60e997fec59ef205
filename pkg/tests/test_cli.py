import json

import pytest

from latgas.cli import ConfigError, main, validate_config

BOUNDARY = """\
[run]
seed = 7
[geometry]
alpha = 0.2
beta = 0.8
[lattice]
N = 20
t_end = 3
burn_in = 1
sample_interval = 0.5
[grid]
M = 64
"""

RING = """\
[run]
seed = 1
[model]
name = kmp
[geometry]
mass = 1.0
[grid]
M = 32
T = 0.1
dt = 0.01
[profile]
family = constant
value = 1.0
[phase]
q_min = 0
q_max = 12
n_q = 4
starts = 3
M = 32
"""


def _run(tmp_path, cmd, text, *extra):
    cfg = tmp_path / "run.ini"
    cfg.write_text(text)
    out = tmp_path / cmd
    code = main([cmd, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def test_reports_every_error_with_lines():
    text = "[geometry]\nalpha = 1.2\nbeta = 0.8\n[grid]\nM = 4\n[bogus]\nx = 1\n"
    with pytest.raises(ConfigError) as exc:
        validate_config(text, "free-energy")
    errs = exc.value.errors
    assert any("alpha must lie in (0,1)" in e and e.startswith("line 2") for e in errs)
    assert any("M must be at least 16" in e and e.startswith("line 5") for e in errs)
    assert any("unknown section" in e for e in errs)


def test_parse_error_has_line():
    with pytest.raises(ConfigError) as exc:
        validate_config("[run]\nseed = 1\nseed = 2\n", "simulate")
    assert "line" in exc.value.errors[0]


def test_missing_seed_warns():
    cfg = validate_config(BOUNDARY.replace("seed = 7", ""), "simulate")
    assert cfg.seed == 0 and any("seed" in w for w in cfg.warnings)


def test_bad_type_reported():
    with pytest.raises(ConfigError) as exc:
        validate_config(BOUNDARY.replace("N = 20", "N = many"), "simulate")
    assert any("N" in e for e in exc.value.errors)


def test_exit_code_validation(tmp_path, capsys):
    code, _ = _run(tmp_path, "free-energy", BOUNDARY.replace("0.2", "1.2"))
    assert code == 1
    assert "alpha must lie in (0,1)" in capsys.readouterr().err


def test_exit_code_missing_file(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "none.ini")]) == 1


def test_exit_code_numerical_failure(tmp_path):
    code, out = _run(tmp_path, "optimal-path", BOUNDARY + "T = 0.01\n")
    assert code == 2
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "numerical-failure" and "T too small" in man["error"]


def _check_manifest(out):
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "ok"
    written = {p.name for p in out.iterdir()} - {"manifest.json"}
    assert written == set(man["outputs"])
    return man


def test_stationary_check(tmp_path):
    code, out = _run(tmp_path, "stationary-check", BOUNDARY, "--replicas", "2")
    assert code == 0
    man = _check_manifest(out)
    assert man["config"]["replicas"] == 2 and man["replica_streams"] == [[7, 0], [7, 1]]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["mean_current_expected"] == pytest.approx(-0.3)
    assert (out / "correlations.csv").exists()


def test_free_energy(tmp_path):
    code, out = _run(tmp_path, "free-energy", BOUNDARY)
    assert code == 0
    _check_manifest(out)
    res = json.loads((out / "free_energy.json").read_text())
    assert res["F"] >= res["F0"] > 0
    assert res["gap_to_dynamical"] < 1e-2


def test_optimal_path_and_current_rate(tmp_path):
    assert _run(tmp_path, "optimal-path", BOUNDARY)[0] == 0
    code, out = _run(tmp_path, "current-rate", RING)
    assert code == 0
    _check_manifest(out)
    res = json.loads((out / "current_rate.json").read_text())
    assert res["cost"] == pytest.approx(res["closed_form"], rel=1e-9)


def test_phase_diagram(tmp_path):
    code, out = _run(tmp_path, "phase-diagram", RING)
    assert code == 0
    _check_manifest(out)
    rows = (out / "phase.csv").read_text().splitlines()
    assert rows[0] == "q,U,U_envelope,traveling_wave,class"
    assert rows[-1].endswith("traveling-wave")


def test_byte_identical_reruns(tmp_path):
    outs = []
    for k in range(2):
        (tmp_path / str(k)).mkdir()
        code, out = _run(tmp_path / str(k), "simulate", BOUNDARY, "--replicas", "2")
        assert code == 0
        outs.append(out)
    man = _check_manifest(outs[0])
    for name in man["outputs"]:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
