from __future__ import annotations

import json

import pytest

from nlignite.cli import main
from nlignite.errors import ConfigurationError
from nlignite.pipeline import (DEFAULTS, EXPERIMENT_PRESETS, ExperimentConfig, _all_passed, claim,
                               dumps, expand_sweep, parse_value, set_path)

FAST = {"comparison.pairs": 2, "comparison.T": 1.0, "grid.window": [-40.0, 40.0], "grid.h": 0.1}


def fast_args(extra=()):
    out = []
    for k, v in FAST.items():
        out += ["--set", f"{k}={json.dumps(v)}"]
    return out + list(extra)


def test_defaults_resolve():
    cfg = ExperimentConfig.resolve()
    assert cfg["kernel"] == {"preset": "paper-example-2.1"}
    assert cfg.seed == 0
    assert len(cfg.hash()) == 64 and cfg.run_name().startswith("run-")


def test_merge_order_and_kernel_replacement():
    cfg = ExperimentConfig.resolve({"grid": {"h": 0.1}, "kernel": {"preset": "gaussian", "std": 0.5}},
                                   "both-positive", {"grid.h": 0.025, "seed": 7})
    # the file's kernel replaces the preset's kernel wholesale (no stray shift)
    assert cfg["kernel"] == {"preset": "gaussian", "std": 0.5}
    assert cfg["grid"]["h"] == 0.025 and cfg["grid"]["window"] == DEFAULTS["grid"]["window"]
    assert cfg.seed == 7 and cfg["preset"] == "both-positive"


def test_presets_build():
    for name in EXPERIMENT_PRESETS:
        cfg = ExperimentConfig.resolve(preset=name)
        cfg.kernel()
        cfg.reaction()


def test_hash_is_canonical():
    a = ExperimentConfig.resolve({"seed": 1, "grid": {"h": 0.1}})
    b = ExperimentConfig.resolve({"grid": {"h": 0.1}, "seed": 1})
    assert a.hash() == b.hash()
    assert a.hash() != ExperimentConfig.resolve({"seed": 2}).hash()


@pytest.mark.parametrize("over", [
    {"reaction.amplitude": 100.0, "reaction.fprime_max": None},
    {"grid.dt": 1.0},
    {"grid.h": -0.1},
    {"grid.window": [1.0, 5.0]},
    {"waves.residual_tol": 0.0},
    {"entire.n_list": [0, 5]},
    {"entire.case_expect": "d"},
])
def test_validation_errors(over):
    with pytest.raises(ConfigurationError):
        ExperimentConfig.resolve(overrides=over)


def test_unknown_preset():
    with pytest.raises(ConfigurationError):
        ExperimentConfig.resolve(preset="nope")


def test_set_path_and_parse_value():
    d = {"a": {"b": 1}}
    set_path(d, "a.c.d", 2)
    assert d == {"a": {"b": 1, "c": {"d": 2}}}
    with pytest.raises(ConfigurationError):
        set_path(d, "a.b.x", 1)
    assert parse_value("0.5") == 0.5 and parse_value("[1, 2]") == [1, 2]
    assert parse_value("null") is None and parse_value("gaussian") == "gaussian"


def test_claims_and_all_passed():
    c = claim(0.1, 0.2, True, "<=")
    assert set(c) == {"value", "tol", "relation", "passed"}
    assert _all_passed({"a": c, "b": [c, {"x": 1}]})
    assert not _all_passed({"a": c, "b": [claim(1, 0, False, "<=")]})


def test_dumps_is_sorted_and_plain():
    import numpy as np
    s = dumps({"b": np.float64(1.5), "a": [np.int64(2), np.bool_(True)], "c": float("inf")})
    assert s == '{\n  "a": [\n    2,\n    true\n  ],\n  "b": 1.5,\n  "c": "inf"\n}\n'


def test_expand_sweep():
    pts = expand_sweep({"seed": 1}, {"kernel.shift": [-1, 1], "grid.h": [0.1, 0.05]})
    assert len(pts) == 4 and all(p["seed"] == 1 for p in pts)
    assert {(p["kernel.shift"], p["grid.h"]) for p in pts} == {(-1, 0.1), (-1, 0.05), (1, 0.1), (1, 0.05)}


# ------------------------------------------------------------------ command line

def read(path):
    return json.loads(path.read_text())


def test_cli_kernel_check(tmp_path, capsys):
    assert main(["kernel-check", "--out", str(tmp_path), "--name", "k"]) == 0
    diag = read(tmp_path / "k" / "kernel" / "diagnostics.json")
    assert diag["mass"]["passed"] and diag["mass"]["tol"] == 1e-8
    man = read(tmp_path / "k" / "manifest.json")
    assert set(man["artifacts"]) == {"config.json", "kernel/spec.json", "kernel/diagnostics.json"}
    assert man["seed"] == 0 and len(man["config_hash"]) == 64
    assert json.loads(capsys.readouterr().out)["exit_code"] == 0


def test_cli_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("NLIGNITE_OUTPUT_ROOT", str(tmp_path / "env"))
    assert main(["kernel-check", "--name", "e"]) == 0
    assert (tmp_path / "env" / "e" / "manifest.json").exists()


def test_cli_wave_and_spectral_from_file(tmp_path, capsys):
    code = main(["wave", "--method", "newton", "--h", "0.1", "--window", "-40", "40",
                 "--out", str(tmp_path), "--name", "w"])
    assert code == 0
    summary = json.loads(capsys.readouterr().out)["summary"]
    assert summary["classification"] == "c_pos_chat_neg"
    assert summary["c"] > 0 > summary["c_hat"] and summary["identity_residual"] <= 1e-3
    assert (tmp_path / "w" / "waves" / "increasing_newton.csv").exists()
    code = main(["spectral", "--waves", str(tmp_path / "w" / "waves" / "waves.json"),
                 "--out", str(tmp_path), "--name", "s"])
    assert code == 0
    roots = read(tmp_path / "s" / "spectral" / "roots.json")
    assert roots["mu21"] < 0 < roots["mu1"]


def test_cli_exit_codes(tmp_path, capsys):
    # invalid configuration
    assert main(["pipeline", "--amplitude", "100", "--out", str(tmp_path)]) == 2
    assert main(["kernel-check", "--set", "kernel.preset=\"nope\"", "--out", str(tmp_path)]) == 2
    # numerical failure: the tracking window cannot hold the boundary margin
    assert main(["wave", "--method", "tracking", "--window", "-5", "5", "--out", str(tmp_path),
                 "--name", "bad"]) == 3
    man = read(tmp_path / "bad" / "manifest.json")
    assert man["stages"]["waves"]["status"] == "failed"
    assert man["stages"]["waves"]["error"]["type"] == "WindowError"
    # a claim tested against an impossible tolerance
    code = main(["wave", "--method", "newton", "--h", "0.1", "--window", "-40", "40",
                 "--set", "waves.identity_tol=1e-12", "--out", str(tmp_path), "--name", "strict"])
    assert code == 4
    diag = read(tmp_path / "strict" / "waves" / "diagnostics.json")
    assert diag["passed"] is False
    assert diag["newton"]["speed_identity"]["increasing"]["tol"] == 1e-12


def test_cli_pipeline_stops_after_failed_stage(tmp_path):
    code = main(["pipeline", *fast_args(), "--set", "grid.window=[-5, 5]", "--out", str(tmp_path),
                 "--name", "p"])
    assert code == 3
    stages = read(tmp_path / "p" / "manifest.json")["stages"]
    assert stages["kernel"]["passed"] and stages["comparison"]["passed"]
    assert stages["waves"]["status"] == "failed"
    assert stages["spectral"] == {"status": "skipped"} and stages["entire"] == {"status": "skipped"}


def test_cli_pipeline_until_spectral(tmp_path):
    code = main(["pipeline", *fast_args(), "--until", "spectral", "--out", str(tmp_path), "--name", "p"])
    assert code == 0
    man = read(tmp_path / "p" / "manifest.json")
    assert set(man["stages"]) == {"kernel", "comparison", "waves", "spectral"}
    assert "waves/plot_waves.py" in man["artifacts"]


def test_cli_entire_case_mismatch(tmp_path):
    code = main(["entire", *fast_args(), "--case-expect", "a", "--out", str(tmp_path), "--name", "x"])
    assert code == 2
    err = read(tmp_path / "x" / "entire" / "diagnostics.json")["error"]
    assert err["type"] == "ValidationError" and err["payload"]["c"] > 0


def test_cli_sweep(tmp_path, capsys):
    code = main(["sweep", "--vary", "kernel.shift=-1.0,1.0", "--until", "kernel", "--out", str(tmp_path),
                 "--name", "sw"])
    assert code == 0
    sweep = read(tmp_path / "sw" / "sweep.json")
    assert [p["overrides"]["kernel.shift"] for p in sweep["points"]] == [-1.0, 1.0]
    for p in sweep["points"]:
        assert (tmp_path / "sw" / p["run"] / "manifest.json").exists()


def test_cli_rejects_malformed_set(tmp_path):
    assert main(["kernel-check", "--set", "novalue", "--out", str(tmp_path)]) == 2


def test_cli_inline_kernel_json(tmp_path):
    kernel = '{"preset": "gaussian", "std": 1.0, "shift": 0.3}'
    assert main(["kernel-check", "--kernel", kernel, "--out", str(tmp_path), "--name", "g"]) == 0
    diag = read(tmp_path / "g" / "kernel" / "diagnostics.json")
    assert diag["report"]["m1"] == pytest.approx(0.3, abs=1e-8)
