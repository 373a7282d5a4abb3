import json

import numpy as np
import pytest

from fsdiffusion.cli import main


@pytest.fixture(autouse=True)
def _cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def test_minimal_simulate():
    assert main(["simulate", "--T", "1"]) == 0
    with open("path.csv") as fh:
        assert fh.readline() == "time,value\n"
    meta = json.load(open("path.json"))
    assert meta["provenance"]["config"]["T"] == 1.0
    assert meta["provenance"]["version"]


def test_simulate_is_deterministic():
    main(["simulate", "--T", "2", "--out", "a"])
    main(["simulate", "--T", "2", "--out", "a2"])
    assert open("a.csv").read() == open("a2.csv").read()


def test_ensemble_manifest():
    assert main(["simulate", "--T", "1", "--n-paths", "3", "--out", "e", "--threads", "2"]) == 0
    manifest = json.load(open("e_manifest.json"))
    assert [p["file"] for p in manifest["paths"]] == ["e_0000.csv", "e_0001.csv", "e_0002.csv"]
    main(["simulate", "--T", "1", "--n-paths", "3", "--out", "f", "--threads", "1"])
    assert json.load(open("f_manifest.json"))["digest"] == manifest["digest"]


def test_config_file_and_override(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"T": 3.0, "params": {"alpha": 8.0}, "seed": 4}))
    assert main(["simulate", "--config", "c.json", "--seed", "5"]) == 0
    cfg = json.load(open("path.json"))["provenance"]["config"]
    assert cfg["T"] == 3.0 and cfg["seed"] == 5 and cfg["params"]["alpha"] == 8.0
    assert cfg["params"]["beta"] == 10.0


@pytest.mark.parametrize("doc", [{"bogus": 1}, {"params": {"lambda": 1}}])
def test_unknown_keys(tmp_path, doc, capsys):
    (tmp_path / "c.json").write_text(json.dumps(doc))
    assert main(["simulate", "--config", "c.json"]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_invalid_parameters(capsys):
    assert main(["simulate", "--alpha", "1.5"]) == 2
    assert "params" in capsys.readouterr().err


def test_missing_config_is_io_error():
    assert main(["simulate", "--config", "nope.json"]) == 1


def test_estimate_pipeline(capsys):
    main(["simulate", "--T", "10000", "--seed", "2024", "--out", "long"])
    assert main(["estimate", "long.csv", "--lag", "1", "--out", "est.json"]) == 0
    est = json.load(open("est.json"))
    got = [est["point_estimates"][k] for k in ("alpha", "beta", "kappa", "theta")]
    np.testing.assert_allclose(got, [6, 10, 2, 1], rtol=0.1)
    assert est["provenance"]["command"] == "estimate"


def test_estimate_fs_positive():
    main(["simulate", "--T", "2000", "--kappa", "1.25", "--out", "fs"])
    assert main(["estimate", "fs.csv", "--variant", "fs-positive", "--out", "e.json"]) == 0
    est = json.load(open("e.json"))
    assert est["variant"] == "PositiveMoments"
    b = est["point_estimates"]["beta"]
    assert est["point_estimates"]["kappa"] == pytest.approx(b / (b - 2))


def test_estimate_parse_error(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("time,value\n0,1\n1,2\n2,-3\n")
    assert main(["estimate", "bad.csv"]) == 1
    assert "line 4" in capsys.readouterr().err


def test_estimate_degenerate_exit_code(tmp_path):
    # mean below one makes the F-restricted map undefined
    rows = "\n".join(f"{i},{0.5 + 0.01 * (i % 3)}" for i in range(50))
    (tmp_path / "low.csv").write_text("time,value\n" + rows + "\n")
    assert main(["estimate", "low.csv", "--variant", "fs-inverse", "--lag", "1"]) == 3


def test_diagnose_window_violation(capsys):
    assert main(["diagnose", "clt", "--upsilon", "-1.7", "--mode", "discrete"]) == 2
    assert "alpha/4" in capsys.readouterr().err


def test_diagnose_tv_decay():
    assert main(["diagnose", "tv-decay", "--n-paths", "5000", "--out", "tv"]) == 0
    res = json.load(open("tv.json"))["result"]
    assert res["rate_hat"] > 0
    assert open("tv.csv").readline().strip() == "t,distance,in_fit"


def test_diagnose_drift():
    assert main(["diagnose", "drift", "--gamma", "1.5", "--delta", "4", "--out", "d"]) == 0
    assert json.load(open("d.json"))["result"]["holds"]
    main(["diagnose", "drift", "--gamma", "2.5", "--delta", "4", "--out", "d2"])
    res = json.load(open("d2.json"))["result"]
    assert not res["holds"] and res["tail"] == "left"


def test_diagnose_acf():
    main(["simulate", "--T", "2000", "--out", "p"])
    assert main(["diagnose", "acf", "--input", "p.csv", "--out", "a"]) == 0
    assert json.load(open("a.json"))["result"]["theta_hat"] > 0


def test_moments(capsys):
    assert main(["moments", "--upsilons=-4,1,2"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].endswith("diverges")
    assert float(out[1].split("\t")[1]) == pytest.approx(2.0)


def test_threads_env(monkeypatch):
    monkeypatch.setenv("FS_DIFFUSION_THREADS", "2")
    assert main(["simulate", "--T", "1", "--n-paths", "2"]) == 0
