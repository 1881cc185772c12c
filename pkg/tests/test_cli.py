from __future__ import annotations

import json

import numpy as np
import pytest

from mfbm_lan import acceptance, toeplitz
from mfbm_lan.cli import EXIT_ACCEPT, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_PARAM, TRACE_CSV, main
from mfbm_lan.errors import FactorizationError
from mfbm_lan.scores import scores
from mfbm_lan.simulate import mfbm_increments
from mfbm_lan.toeplitz import SamplingScheme, Theta, build_model


def _json(capsys):
    return json.loads(capsys.readouterr().out)


def test_constants(capsys):
    assert main(["constants", "--sigma", "1", "--H", "0.8"]) == 0
    doc = _json(capsys)
    assert doc["config"]["command"] == "constants"
    assert doc["result"]["regime"] == "supercritical"
    assert doc["result"]["Jperp"] == pytest.approx(34.1772, abs=1e-4)
    assert np.diag(doc["result"]["matrix"]) == pytest.approx([0.089748, 2.719732], abs=1e-6)


def test_spectral(capsys):
    assert main(["spectral", "--H", "0.3", "--lam", "0.5", "1.0", "--k", "0", "4"]) == 0
    res = _json(capsys)["result"]
    assert res["autocov"][0] == 1.0 and len(res["density"]) == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["constants", "--sigma", "1"],
        ["nope"],
        ["trace", "--sigma", "1", "--H", "0.8", "--n", "10", "--alpha", "0.3", "--format", "xml"],
        ["trace-sweep", "--sigma", "1", "--H", "0.8", "--alpha", "0.3", "--n-list", "64", "32"],
        ["lan-check", "--sigma", "1", "--H", "0.8", "--n", "64", "--alpha", "0.3", "--seed", "1",
         "--h", "1", "2", "3"],
    ],
)
def test_config_errors(argv, capsys):
    assert main(argv) == EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"sigma": 2.0, "H": 0.6}))
    assert main(["constants", "--config", str(cfg), "--H", "0.3"]) == 0
    doc = _json(capsys)
    assert doc["config"]["sigma"] == 2.0 and doc["config"]["H"] == 0.3
    assert doc["result"]["regime"] == "fbm_dominated"
    cfg.write_text(json.dumps({"sigma": 2.0, "bogus": 1}))
    assert main(["constants", "--config", str(cfg)]) == EXIT_CONFIG


@pytest.mark.parametrize("H", ["0.75", "0.5", "1.2"])
def test_parameter_errors(H, capsys):
    assert main(["constants", "--sigma", "1", "--H", H]) == EXIT_PARAM


def test_simulate_and_score_roundtrip(tmp_path, capsys):
    out = tmp_path / "run"
    argv = ["simulate", "--sigma", "1", "--H", "0.8", "--n", "128", "--alpha", "0.3",
            "--seed", "7", "--output-dir", str(out)]
    assert main(argv) == 0
    assert "seed=7" in capsys.readouterr().err
    text = (out / "increments.csv").read_text().splitlines()
    assert text[0].startswith("# {") and text[1] == "x"
    assert main(["score", "--input", str(out / "increments.csv")]) == 0
    res = _json(capsys)["result"]
    th, sc = Theta.of(1.0, 0.8), SamplingScheme(128, 0.3)
    ref = scores(build_model(th, sc), mfbm_increments(th, sc, 7).x)
    assert res["S_sigma"] == pytest.approx(ref.S_sigma, rel=1e-12)
    assert res["Xi"] == pytest.approx(ref.Xi, rel=1e-12)


def test_simulate_to_stdout(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(["simulate", "--sigma", "1", "--H", "0.3", "--n", "16", "--alpha", "0.3", "--seed", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1] == "x" and len(lines) == 18
    assert list(tmp_path.iterdir()) == []


def test_trace_csv(tmp_path, capsys):
    argv = ["trace", "--sigma", "1", "--H", "0.6", "--n", "64", "--alpha", "0.3", "--format", "csv",
            "--output-dir", str(tmp_path)]
    assert main(argv) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1] == ",".join(TRACE_CSV)
    assert (tmp_path / "trace.csv").exists()


def test_sweep_tables(tmp_path, capsys):
    argv = ["opf-sweep", "--sigma", "1", "--H", "0.8", "--alpha", "0.3", "--n-list", "64", "128",
            "--output-dir", str(tmp_path)]
    assert main(argv) == 0
    assert "slope_opC_frobC" in _json(capsys)["result"]["constants"]
    assert (tmp_path / "opf_sweep.csv").read_text().startswith("# {")


def test_mc_with_plot_files(tmp_path, capsys):
    argv = ["mc", "--sigma", "1", "--H", "0.8", "--n", "64", "--alpha", "0.3", "--R", "40",
            "--seed", "3", "--workers", "2", "--output-dir", str(tmp_path), "--dat"]
    assert main(argv) == 0
    res = _json(capsys)["result"]
    assert res["R"] == 40 and not res["reliable"]
    for name in ("mc_samples.csv", "mc_scatter.dat", "mc_target_ellipse.dat", "mc_exact_ellipse.dat", "mc.json"):
        assert (tmp_path / name).exists()


def test_degeneracy_and_lan(capsys):
    base = ["--sigma", "1", "--H", "0.8", "--n", "64", "--alpha", "0.3", "--seed", "2"]
    assert main(["degeneracy", *base, "--R", "30"]) == 0
    assert -1 <= _json(capsys)["result"]["sample_correlation"] <= 1
    assert main(["lan-check", *base, "--h", "0.5"]) == 0
    res = _json(capsys)["result"]
    assert res["h"] == [0.5, 0.5]
    assert res["gap"] == pytest.approx(res["llr_exact"] - res["llr_predicted"])
    assert main(["lan-check", *base[:3], "0.6", *base[4:], "--h", "1"]) == EXIT_PARAM


def test_numerical_failure_writes_diagnostic(tmp_path, monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise FactorizationError("not positive definite")

    monkeypatch.setattr(toeplitz, "build_model", boom)
    argv = ["trace", "--sigma", "1", "--H", "0.8", "--n", "64", "--alpha", "0.3", "--output-dir", str(tmp_path)]
    assert main(argv) == EXIT_NUMERICAL
    diag = json.loads((tmp_path / "diagnostic.json").read_text())
    assert diag["error"] == "FactorizationError"
    assert diag["config"]["n"] == 64


def test_accept_exit_codes(tmp_path, monkeypatch, capsys):
    assert main(["accept", "--criteria", "3", "--output-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("criterion 3 PASS")
    assert "1/1 criteria passed" in out
    assert (tmp_path / "acceptance.csv").exists()

    def failing(cache=None):
        res = acceptance.CriterionResult(99, "always fails")
        res.add("value", 1.0, "< 0", False)
        return res

    monkeypatch.setitem(acceptance.CRITERIA, 99, failing)
    assert main(["accept", "--criteria", "99"]) == EXIT_ACCEPT
    assert main(["accept", "--criteria", "100"]) == EXIT_CONFIG
