import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from herdlab.cli import main
from herdlab.config import ExperimentConfig, load_config
from herdlab.trajectory import read_binary, read_csv

JUMP = """\
model: jump-two-state
params: {sigma1: 0.5, sigma2: 0.5, h: 1.0, N: 50}
t_end: 400.0
sample_dt: 0.5
burn_in: 0.1
seed: 11
ensemble: 1
analysis: {psd_segment_len: 64, pdf_fit_range: [0.5, 20.0]}
"""

SDE = """\
model: sde-two-state-full
params: {eps1: 0.1, eps2: 1.5, alpha: 1.0}
t_end: 50.0
sample_dt: 0.01
integrator: {kappa: 0.05, max_dt: 0.01}
seed: 4
"""


def _write(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_yaml_round_trip(tmp_path):
    cfg = load_config(_write(tmp_path, SDE))
    again = ExperimentConfig.from_yaml(cfg.to_yaml())
    assert again == cfg
    assert again.to_yaml() == cfg.to_yaml()


@given(
    model=st.sampled_from(["sde-two-state-full", "sde-general-class", "jump-three-state"]),
    t_end=st.floats(1.0, 1e6),
    ensemble=st.integers(1, 64),
    seed=st.integers(0, 2**64 - 1),
    fmt=st.sampled_from(["csv", "binary"]),
    rng=st.none() | st.tuples(st.floats(1e-3, 1.0), st.floats(2.0, 1e3)),
)
@settings(max_examples=40)
def test_config_round_trip_property(model, t_end, ensemble, seed, fmt, rng):
    params = {
        "sde-two-state-full": {"eps1": 0.1, "eps2": 2.0},
        "sde-general-class": {"eta": 2.0, "lam": 3.0},
        "jump-three-state": {"eps_cf": 3.0, "eps_fc": 3.0, "eps_cc": 3.0, "H": 100.0, "N": 50},
    }[model]
    cfg = ExperimentConfig(model, params, t_end=t_end, ensemble=ensemble, seed=seed, format=fmt,
                           analysis={"psd_fit_range": rng})
    assert ExperimentConfig.from_yaml(cfg.to_yaml()) == cfg


def test_config_rejects_bad_input(tmp_path):
    with pytest.raises(ValueError):
        ExperimentConfig("nope", {})
    with pytest.raises(ValueError):
        ExperimentConfig.from_yaml(SDE + "colour: blue\n")
    with pytest.raises(ValueError):
        ExperimentConfig.from_yaml(SDE.replace("eps2: 1.5", "eps2: -1.0"))
    with pytest.raises(ValueError):
        ExperimentConfig.from_yaml(SDE.replace("kappa: 0.05", "kapa: 0.05"))
    assert main(["simulate", "--config", str(_write(tmp_path, "- a\n- b\n"))]) == 1


def test_simulate_is_deterministic(tmp_path, capsys):
    cfg = _write(tmp_path, SDE)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "run_0000.csv").read_bytes()
    assert a == (tmp_path / "b" / "run_0000.csv").read_bytes()
    tr = read_csv(tmp_path / "a" / "run_0000.csv")
    assert len(tr) == 5001 and tr.columns == ("y",)
    text = a.decode()
    assert "\r" not in text and text.startswith("#")
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["status"] == "ok" and man["seeds"] == [4]
    assert {"numpy", "herdlab"} <= set(man["versions"])


def test_seed_override_changes_output(tmp_path):
    cfg = _write(tmp_path, SDE)
    main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "18446744073709551615"])
    assert (tmp_path / "a" / "run_0000.csv").read_bytes() != (tmp_path / "b" / "run_0000.csv").read_bytes()
    with pytest.raises(SystemExit):
        main(["simulate", "--config", str(cfg), "--seed", "-1"])


def test_ensemble_parallel_matches_serial(tmp_path):
    cfg = _write(tmp_path, JUMP.replace("t_end: 400.0", "t_end: 100.0") + "format: binary\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "s"), "--ensemble", "8"]) == 0
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "p"), "--ensemble", "8",
                 "--jobs", "4"]) == 0
    man = json.loads((tmp_path / "s" / "manifest.json").read_text())
    assert [f["seed"] for f in man["files"]] == list(range(11, 19))
    runs = []
    for i in range(8):
        s = read_binary(tmp_path / "s" / f"run_{i:04d}.bin")
        p = read_binary(tmp_path / "p" / f"run_{i:04d}.bin")
        assert np.array_equal(s.values, p.values)
        runs.append(s.values)
    assert not all(np.array_equal(runs[0], r) for r in runs[1:])


def test_analyze_writes_fits(tmp_path):
    cfg = _write(tmp_path, JUMP)
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--ensemble", "2"]) == 0
    assert main(["analyze", "--config", str(cfg), "--out", str(out)]) == 0
    summary = json.loads((out / "analysis.json").read_text())
    assert summary["observable"] == "y" and summary["members"] == 2
    assert "exponent" in summary["pdf_fit"] and "exponent" in summary["psd_fit"]
    assert (out / "pdf.csv").exists() and (out / "psd.csv").exists()


def test_failed_simulation_still_writes_manifest(tmp_path, capsys):
    bad = SDE + "x0: [5000.0]\n"
    out = tmp_path / "bad"
    assert main(["simulate", "--config", str(_write(tmp_path, bad)), "--out", str(out)]) == 1
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "failed" and "boundaries" in man["error"]
    assert "error" in capsys.readouterr().err


def test_validate_exit_codes(tmp_path, capsys):
    assert main(["validate", "--check", "decomposition_round_trip", "--check", "estimator_oracles",
                 "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "validate_report.json").read_text())
    assert report["passed"] and len(report["checks"]) == 2
    assert "PASS decomposition_round_trip" in capsys.readouterr().out


@pytest.mark.parametrize("check", ["jump_vs_detailed_balance", "decomposition_round_trip", "estimator_oracles",
                                   "jump_vs_generator_three_state"])
def test_injected_fault_turns_check_red(check, capsys):
    assert main(["validate", "--check", check, "--inject-fault", check]) == 1
    assert f"FAIL {check}" in capsys.readouterr().out


def test_validate_rejects_unknown_fault():
    assert main(["validate", "--inject-fault", "no_such_check"]) == 1


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "herdlab", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("simulate", "analyze", "reproduce-fig1", "reproduce-fig3", "validate"):
        assert cmd in res.stdout


def test_jobs_from_environment(monkeypatch):
    from herdlab.cli import build_parser

    monkeypatch.setenv("HERDLAB_JOBS", "3")
    args = build_parser().parse_args(["validate"])
    assert args.jobs == 3
