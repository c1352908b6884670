import json
from pathlib import Path

import pytest

from monosync.cli import main


def run(args):
    return main(args)


def read_json(path):
    return json.loads(Path(path).read_text())


def test_check_splitting_verified(tmp_path):
    out = tmp_path / "a"
    code = run(["check-splitting", "--family", "cantor1d", "--m-max", "2", "--seed", "1", "--out", str(out)])
    assert code == 0
    doc = read_json(out / "splitting.json")
    assert doc["verified"] and doc["m"] == 1
    assert (out / "manifest.json").exists()


def test_check_splitting_unverified_exit_2(tmp_path):
    code = run(["check-splitting", "--family", "rot2d", "--m-max", "2", "--seed", "1", "--out", str(tmp_path / "b")])
    assert code == 2


def test_usage_errors_exit_1(tmp_path):
    assert run(["check-splitting", "--family", "nope", "--out", str(tmp_path / "c")]) == 1
    assert run(["check-splitting", "--no-such-flag", "1"]) == 1
    assert run(["no-such-command"]) == 1
    # a config produced by another command is rejected
    out = tmp_path / "d"
    run(["check-splitting", "--family", "cantor1d", "--out", str(out)])
    assert run(["sync-rate", "--config", str(out / "manifest.json"), "--out", str(tmp_path / "e")]) == 1


def test_check_monotone(tmp_path):
    assert run(["check-monotone", "--family", "cantor1d", "--seed", "2", "--out", str(tmp_path / "m")]) == 0
    assert run(["check-monotone", "--family", "rot2d", "--seed", "2", "--out", str(tmp_path / "r")]) == 2
    doc = read_json(tmp_path / "m" / "monotonicity.json")
    assert all(v["kind"] == "increasing" for v in doc["verdicts"])


def test_simulate_csv_header_carries_seed(tmp_path):
    out = tmp_path / "sim"
    assert run([
        "simulate", "--family", "cantor1d", "--n", "10", "--x0", "0.5",
        "--direction", "reverse", "--seed", "7", "--out", str(out),
    ]) == 0
    lines = (out / "orbit.csv").read_text().strip().split("\n")
    assert lines[0] == "# seed=7"
    assert lines[1].startswith("step,x_1")


def test_sync_rate_artifacts(tmp_path):
    out = tmp_path / "sync"
    assert run([
        "sync-rate", "--family", "cantor1d", "--n-max", "15", "--replicas", "16",
        "--seed", "3", "--out", str(out),
    ]) == 0
    fit = read_json(out / "rate_fit.json")
    assert 0.32 <= fit["r_hat"] <= 0.35
    assert fit["boundedness"]["bounded"] is True
    lines = (out / "diam_series.csv").read_text().strip().split("\n")
    assert lines[0] == "# seed=3"


def test_sigma_decay_command(tmp_path):
    out = tmp_path / "sig"
    assert run([
        "sigma-decay", "--family", "cantor1d", "--m", "1", "--x", "0.3333333333333333",
        "--s", "1", "--j-max", "4", "--replicas", "400", "--seed", "5", "--out", str(out),
    ]) == 0
    doc = read_json(out / "sigma_decay.json")
    assert doc["splitting"]["verified"]
    assert doc["lambda_from_masses"] == pytest.approx(0.5)


def test_stationary_command(tmp_path):
    out = tmp_path / "st"
    assert run([
        "stationary", "--family", "cantor1d", "--n-samples", "2000",
        "--seed", "11", "--out", str(out),
    ]) == 0
    doc = read_json(out / "stationary.json")
    assert abs(doc["mean"][0] - 0.5) < 0.05
    assert (out / "stationary.csv").exists()


def test_forward_gap_command(tmp_path):
    out = tmp_path / "gap"
    assert run([
        "forward-gap", "--family", "cantor1d", "--n", "8", "--x0", "0.5",
        "--seed", "2", "--out", str(out),
    ]) == 0
    lines = (out / "forward_gap.csv").read_text().strip().split("\n")
    assert lines[1] == "n,gap,image_diam_bound,pullback_depth"
    assert len(lines) == 2 + 8


def test_w1_decay_command(tmp_path):
    out = tmp_path / "w1"
    assert run([
        "w1-decay", "--family", "cantor1d", "--n-max", "6", "--n-particles", "1024",
        "--ref-size", "1024", "--initial-point", "0", "--seed", "4", "--out", str(out),
    ]) == 0
    doc = read_json(out / "w1_fit.json")
    assert doc["fit"] is not None
    assert doc["floor"] > 0


def test_clt_command(tmp_path):
    out = tmp_path / "clt"
    assert run([
        "clt", "--family", "cantor1d", "--observable", "coord:1", "--n", "1000",
        "--replicas", "500", "--mu-size", "1024", "--grid-size", "512",
        "--seed", "6", "--out", str(out),
    ]) == 0
    doc = read_json(out / "clt_report.json")
    assert doc["sigma2_mg"] == pytest.approx(0.25, rel=0.15)
    assert doc["seed"] == 6


def test_manifest_roundtrip_bytes(tmp_path):
    out_a = tmp_path / "A"
    out_b = tmp_path / "B"
    args = ["sync-rate", "--family", "cantor1d", "--n-max", "12", "--replicas", "8", "--seed", "9"]
    assert run(args + ["--out", str(out_a)]) == 0
    assert run(["sync-rate", "--config", str(out_a / "manifest.json"), "--out", str(out_b)]) == 0
    for name in ("manifest.json", "diam_series.csv", "rate_fit.json"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


def test_threads_do_not_change_artifacts(tmp_path):
    out_1 = tmp_path / "t1"
    out_8 = tmp_path / "t8"
    base = ["stationary", "--family", "cantor1d", "--n-samples", "3000", "--seed", "13"]
    assert run(base + ["--threads", "1", "--out", str(out_1)]) == 0
    assert run(base + ["--threads", "8", "--out", str(out_8)]) == 0
    for name in ("manifest.json", "stationary.csv", "stationary.json"):
        assert (out_1 / name).read_bytes() == (out_8 / name).read_bytes(), name
