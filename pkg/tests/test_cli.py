"""Command-line behavior: file contracts, exit codes, determinism, verify suites."""

import os

import numpy as np
import pytest

from simplexcode import fileio
from simplexcode import simplex as simplex_mod
from simplexcode.cli import main, run_verify_suite


def run(args):
    return main(args)


def test_generate_two_moons_contract(tmp_path):
    out = tmp_path / "moons"
    assert run(
        ["generate", "--dataset", "two-moons", "--n", "500", "--noise", "0.05",
         "--seed", "7", "--out", str(out)]
    ) == 0
    Y = fileio.read_data_csv(out / "data.csv")
    labels = fileio.read_labels_csv(out / "labels.csv")
    assert Y.shape == (2, 500) and labels.shape == (500,)
    cfg = fileio.read_config(out / "resolved_config.cfg")
    assert cfg["n"] == 500 and cfg["seed"] == 7


def test_generate_concentric_label_balance(tmp_path):
    out = tmp_path / "conc"
    assert run(
        ["generate", "--dataset", "concentric", "--n", "400", "--delta", "0.15",
         "--noise", "0", "--out", str(out)]
    ) == 0
    labels = fileio.read_labels_csv(out / "labels.csv")
    assert (labels == 0).sum() == 200 and (labels == 1).sum() == 200


def test_generate_delaunay_writes_truth(tmp_path):
    out = tmp_path / "del"
    cfgfile = tmp_path / "model.cfg"
    cfgfile.write_text("atoms_per_cluster = 5\nseparation = 9.0\nn = 120\nseed = 3\nnoise = 0.0\n")
    assert run(["generate", "--dataset", "delaunay", "--config", str(cfgfile), "--out", str(out)]) == 0
    Y = fileio.read_data_csv(out / "data.csv")
    X = fileio.read_codes_csv(out / "true_codes.csv")
    atoms = fileio.read_data_csv(out / "atoms.csv")
    assert Y.shape == (2, 120) and X.shape == (10, 120) and atoms.shape == (2, 10)
    np.testing.assert_allclose(atoms @ X, Y, atol=1e-12)


def test_generate_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run(["generate", "--dataset", "two-moons", "--n", "100", "--seed", "5",
                    "--out", str(out)]) == 0
    assert (a / "data.csv").read_text() == (b / "data.csv").read_text()


def test_fit_and_cluster_small_run(tmp_path):
    data_dir = tmp_path / "d"
    fit_dir = tmp_path / "f"
    clu_dir = tmp_path / "c"
    assert run(["generate", "--dataset", "two-moons", "--n", "400", "--noise", "0.05",
                "--seed", "0", "--out", str(data_dir)]) == 0
    assert run(["fit", "--data", str(data_dir / "data.csv"), "--m", "16", "--lambda", "5.0",
                "--T", "15", "--lr", "1e-3", "--epochs", "40", "--batch-size", "10000",
                "--seed", "0", "--out", str(fit_dir)]) == 0
    for name in ("atoms.csv", "codes.csv", "loss_history.csv", "metrics.json", "resolved_config.cfg"):
        assert (fit_dir / name).exists()
    cfg = fileio.read_config(fit_dir / "resolved_config.cfg")
    assert cfg["m"] == 16 and cfg["lambda"] == 5.0 and cfg["T"] == 15
    metrics = fileio.read_metrics(fit_dir / "metrics.json")
    assert metrics["mean_support"] <= 5.0
    assert run(["cluster", "--codes", str(fit_dir / "codes.csv"), "--k", "2",
                "--truth", str(data_dir / "labels.csv"), "--out", str(clu_dir)]) == 0
    metrics = fileio.read_metrics(clu_dir / "metrics.json")
    assert metrics["acc"] >= 0.95
    pred = fileio.read_labels_csv(clu_dir / "pred_labels.csv")
    assert pred.shape == (400 + 16,)  # data labels then atom labels


def test_fit_missing_file_exits_2(tmp_path):
    assert run(["fit", "--data", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o")]) == 2


def test_fit_divergence_exits_1(tmp_path):
    data_dir = tmp_path / "d"
    assert run(["generate", "--dataset", "two-moons", "--n", "60", "--seed", "2",
                "--out", str(data_dir)]) == 0
    assert run(["fit", "--data", str(data_dir / "data.csv"), "--m", "4", "--epochs", "300",
                "--lr", "1e7", "--T", "5", "--out", str(tmp_path / "f")]) == 1


def test_cluster_wrong_truth_length_exits_2(tmp_path):
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    codes = tmp_path / "codes.csv"
    fileio.write_codes_csv(codes, X)
    truth = tmp_path / "truth.csv"
    fileio.write_labels_csv(truth, [0, 1, 0])
    assert run(["cluster", "--codes", str(codes), "--k", "2", "--truth", str(truth),
                "--out", str(tmp_path / "o")]) == 2


def test_cluster_k_exceeds_atoms_exits_2(tmp_path):
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    codes = tmp_path / "codes.csv"
    fileio.write_codes_csv(codes, X)
    assert run(["cluster", "--codes", str(codes), "--k", "5", "--out", str(tmp_path / "o")]) == 2


def test_cluster_normalized_mode_flag(tmp_path):
    rng = np.random.default_rng(0)
    from simplexcode.simplex import project_simplex_batch

    X, _ = project_simplex_batch(rng.normal(0, 1, (5, 30)))
    codes = tmp_path / "codes.csv"
    fileio.write_codes_csv(codes, X)
    out = tmp_path / "o"
    assert run(["cluster", "--codes", str(codes), "--k", "2", "--mode", "normalized",
                "--out", str(out)]) == 0
    cfg = fileio.read_config(out / "resolved_config.cfg")
    assert cfg["mode"] == "normalized"


def test_config_file_with_flag_override(tmp_path):
    data_dir = tmp_path / "d"
    assert run(["generate", "--dataset", "two-moons", "--n", "200", "--seed", "1",
                "--out", str(data_dir)]) == 0
    cfgfile = tmp_path / "fit.cfg"
    cfgfile.write_text("m = 8\nepochs = 5\nlambda = 2.0\n")
    out = tmp_path / "f"
    assert run(["fit", "--data", str(data_dir / "data.csv"), "--config", str(cfgfile),
                "--m", "10", "--out", str(out)]) == 0
    cfg = fileio.read_config(out / "resolved_config.cfg")
    assert cfg["m"] == 10  # flag beats file
    assert cfg["lambda"] == 2.0 and cfg["epochs"] == 5  # file beats defaults
    # the resolved union round-trips
    assert fileio.parse_config(fileio.serialize_config(cfg)) == cfg


def test_benchmark_single_n_no_slopes(tmp_path):
    out = tmp_path / "bench"
    assert run(["benchmark", "--n-grid", "400", "--m", "8", "--train-n", "300",
                "--train-epochs", "5", "--seed", "0", "--out", str(out)]) == 0
    assert (out / "benchmark.csv").exists()
    assert not (out / "slopes.json").exists()
    assert (out / "timing.svg").exists() and (out / "timing_loglog.svg").exists()


def test_benchmark_three_points_fits_slopes(tmp_path):
    out = tmp_path / "bench3"
    assert run(["benchmark", "--n-grid", "300,600,1200", "--m", "8", "--train-n", "300",
                "--train-epochs", "5", "--seed", "0", "--out", str(out)]) == 0
    slopes = fileio.read_metrics(out / "slopes.json")
    assert "encode_slope" in slopes and "cluster_slope" in slopes
    lines = (out / "benchmark.csv").read_text().strip().splitlines()
    assert lines[0] == "n,m,t_encode_seconds,t_cluster_seconds,accuracy,seed"
    assert len(lines) == 4


def test_verify_all_passes():
    import time

    t0 = time.time()
    assert run(["verify"]) == 0
    assert time.time() - t0 <= 300


def test_verify_gradient_suite_catches_vjp_sign_error(monkeypatch):
    # mutation fixture: a sign-flipped projection Jacobian must fail the suite
    real = simplex_mod.projection_vjp_batch

    def flipped(active, g):
        return -real(active, g)

    monkeypatch.setattr(simplex_mod, "projection_vjp_batch", flipped)
    ok, msg = run_verify_suite("gradient", count=3, seed=0)
    assert not ok


def test_verify_exit_code_on_failure(monkeypatch):
    real = simplex_mod.projection_vjp_batch
    monkeypatch.setattr(simplex_mod, "projection_vjp_batch", lambda a, g: -real(a, g))
    assert run(["verify", "--suite", "gradient"]) == 1


def test_output_root_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("SIMPLEXCODE_OUT", str(tmp_path))
    assert run(["generate", "--dataset", "two-moons", "--n", "50", "--seed", "0"]) == 0
    assert (tmp_path / "generate" / "data.csv").exists()
