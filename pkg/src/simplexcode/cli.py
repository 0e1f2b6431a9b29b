"""Command-line interface: generate / fit / cluster / benchmark / verify.

Every command resolves its configuration from defaults, an optional flat
``key = value`` config file, and explicit flags (in increasing precedence),
and writes the resolved union next to its outputs.  Exit codes: 0 success,
1 numerical failure, 2 usage or I/O error.
"""

import argparse
import os
import sys
import time

import numpy as np

from . import datagen, fileio, oracle, spectral, trainer
from . import encoder as encoder_mod
from . import simplex as simplex_mod
from .encoder import EncoderParams
from .trainer import TrainConfig, TrainingDiverged

SUPPORT_THRESHOLD = 1e-3  # entries above this count toward a code's support


def _resolve(defaults, config_path, cli_overrides):
    resolved = dict(defaults)
    if config_path:
        resolved.update(fileio.read_config(config_path))
    resolved.update({k: v for k, v in cli_overrides.items() if v is not None})
    return resolved


def _outdir(args, command):
    out = args.out or os.path.join(fileio.default_output_root(), command)
    os.makedirs(out, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


def cmd_generate(args):
    out = _outdir(args, "generate")
    defaults = {
        "dataset": "two-moons",
        "n": 5000,
        "noise": 0.05,
        "delta": 0.15,
        "seed": 0,
        "atoms_per_cluster": 8,
        "separation": 8.0,
    }
    cfg = _resolve(
        defaults,
        args.config,
        {
            "dataset": args.dataset,
            "n": args.n,
            "noise": args.noise,
            "delta": args.delta,
            "seed": args.seed,
        },
    )
    dataset = cfg["dataset"]
    if dataset == "two-moons":
        Y, labels = datagen.gen_two_moons(cfg["n"], cfg["noise"], cfg["seed"])
    elif dataset == "concentric":
        Y, labels = datagen.gen_concentric_circles(
            cfg["n"], cfg["delta"], cfg["seed"], noise_sigma=cfg["noise"]
        )
    elif dataset == "circle":
        Y, labels = datagen.gen_concentric_circles(
            cfg["n"], 0.0, cfg["seed"], noise_sigma=cfg["noise"], circles=1
        )
    elif dataset == "delaunay":
        model = datagen.make_two_cluster_model(
            atoms_per_cluster=int(cfg["atoms_per_cluster"]),
            separation=float(cfg["separation"]),
            seed=cfg["seed"],
            noise_sigma=cfg["noise"],
        )
        Y, truth = datagen.sample_delaunay_model(model, cfg["n"], seed=cfg["seed"])
        labels = truth.labels
        fileio.write_codes_csv(os.path.join(out, "true_codes.csv"), truth.true_codes)
        fileio.write_data_csv(os.path.join(out, "atoms.csv"), model.atoms)
    else:
        raise UsageError(f"unknown dataset {dataset!r}")
    fileio.write_data_csv(os.path.join(out, "data.csv"), Y)
    fileio.write_labels_csv(os.path.join(out, "labels.csv"), labels)
    fileio.write_config(os.path.join(out, "resolved_config.cfg"), cfg)
    print(fileio.serialize_config(cfg), end="")
    print(f"wrote {Y.shape[1]} points to {out}")
    return 0


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def _mean_support(X, threshold=SUPPORT_THRESHOLD):
    return float((np.asarray(X) > threshold).sum(axis=0).mean())


def _fit_once(Y, cfg, out):
    enc = EncoderParams(
        lam=float(cfg["lambda"]),
        n_steps=int(cfg["T"]),
        step_size=None if cfg["alpha"] in (None, "auto") else float(cfg["alpha"]),
        learn_step_size=bool(cfg["learn_alpha"]),
        recurrence=str(cfg["recurrence"]),
    )
    config = TrainConfig(
        n_atoms=int(cfg["m"]),
        epochs=int(cfg["epochs"]),
        batch_size=int(cfg["batch_size"]),
        learning_rate=float(cfg["lr"]),
        seed=int(cfg["seed"]),
        encoder=enc,
        final_n_steps=None if cfg["final_T"] is None else int(cfg["final_T"]),
    )
    t0 = time.perf_counter()
    atoms, codes, history = trainer.train(Y, config)
    seconds = time.perf_counter() - t0
    os.makedirs(out, exist_ok=True)
    fileio.write_data_csv(os.path.join(out, "atoms.csv"), atoms)
    fileio.write_codes_csv(os.path.join(out, "codes.csv"), codes)
    fileio.write_loss_history(os.path.join(out, "loss_history.csv"), history)
    metrics = {
        "mean_support": _mean_support(codes),
        "epochs": int(cfg["epochs"]),
        "seconds_encode": seconds,
    }
    fileio.write_metrics(os.path.join(out, "metrics.json"), metrics)
    return metrics


def cmd_fit(args):
    if not os.path.exists(args.data):
        raise UsageError(f"data file not found: {args.data}")
    out = _outdir(args, "fit")
    defaults = {
        "m": 24,
        "lambda": 5.0,
        "T": 15,
        "alpha": None,
        "learn_alpha": False,
        "recurrence": "squared",
        "lr": 1e-3,
        "epochs": 1000,
        "batch_size": 10_000,
        "seed": 0,
        "preprocess": "none",
        "final_T": None,
    }
    cfg = _resolve(
        defaults,
        args.config,
        {
            "m": args.m,
            "lambda": args.lam,
            "T": args.T,
            "alpha": args.alpha,
            "learn_alpha": True if args.learn_alpha else None,
            "recurrence": args.recurrence,
            "lr": args.lr,
            "epochs": args.epochs,
            "batch_size": args.batch_size,
            "seed": args.seed,
            "preprocess": args.preprocess,
            "final_T": args.final_T,
        },
    )
    Y = fileio.read_data_csv(args.data)
    cfg["data"] = args.data
    fileio.write_config(os.path.join(out, "resolved_config.cfg"), cfg)
    print(fileio.serialize_config(cfg), end="")
    modes = (
        ["minmax", "standardize", "unitnorm"]
        if cfg["preprocess"] == "best"
        else [cfg["preprocess"]]
    )
    summary = {}
    for mode in modes:
        Yp = Y if mode == "none" else datagen.preprocess(Y, mode)
        subdir = out if len(modes) == 1 else os.path.join(out, mode)
        summary[mode] = _fit_once(Yp, cfg, subdir)
        print(f"[{mode}] mean_support={summary[mode]['mean_support']:.3f}")
    if len(modes) > 1:
        fileio.write_metrics(os.path.join(out, "metrics.json"), summary)
    return 0


# ---------------------------------------------------------------------------
# cluster
# ---------------------------------------------------------------------------


def cmd_cluster(args):
    if not os.path.exists(args.codes):
        raise UsageError(f"codes file not found: {args.codes}")
    out = _outdir(args, "cluster")
    defaults = {"k": 2, "mode": "quadratic", "replicates": 10, "seed": 0}
    cfg = _resolve(
        defaults,
        args.config,
        {"k": args.k, "mode": args.mode, "replicates": args.replicates, "seed": args.seed},
    )
    X = fileio.read_codes_csv(args.codes)
    atoms = fileio.read_data_csv(args.atoms) if args.atoms else None
    t0 = time.perf_counter()
    data_labels, atom_labels = spectral.cluster_pipeline(
        X,
        int(cfg["k"]),
        replicates=int(cfg["replicates"]),
        seed=int(cfg["seed"]),
        mode=str(cfg["mode"]),
        atoms=atoms,
    )
    seconds = time.perf_counter() - t0
    fileio.write_labels_csv(
        os.path.join(out, "pred_labels.csv"), np.concatenate([data_labels, atom_labels])
    )
    metrics = {"seconds_cluster": seconds}
    if args.truth:
        truth = fileio.read_labels_csv(args.truth)
        if truth.shape[0] != data_labels.shape[0]:
            raise UsageError(
                f"truth file has {truth.shape[0]} labels, codes have {data_labels.shape[0]} columns"
            )
        metrics["acc"] = spectral.clustering_accuracy(data_labels, truth)
        print(f"acc = {metrics['acc']:.4f}")
    fileio.write_metrics(os.path.join(out, "metrics.json"), metrics)
    fileio.write_config(os.path.join(out, "resolved_config.cfg"), cfg)
    return 0


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------


def _median_time(fn, repeats=3):
    fn()  # warmup, discarded
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def run_benchmark(
    n_grid,
    m=24,
    lam=5.0,
    n_steps=15,
    train_n=5000,
    train_epochs=300,
    noise=0.05,
    seed=0,
    replicates=10,
    repeats=3,
):
    """Scaling study: time encode-all and cluster separately across the n grid.

    Trains one dictionary on a fixed-size sample, then times both stages per n
    (one warmup run discarded, median of ``repeats``).  Returns the records and
    the fitted log-log slopes (None with fewer than 3 grid points).
    """
    enc = EncoderParams(lam=lam, n_steps=n_steps)
    Ytr, _ = datagen.gen_two_moons(train_n, noise, seed)
    atoms, _, _ = trainer.train(
        Ytr,
        TrainConfig(n_atoms=m, epochs=train_epochs, batch_size=train_n, seed=seed, encoder=enc),
    )
    records = []
    for n in n_grid:
        Y, labels = datagen.gen_two_moons(n, noise, seed)
        alpha = encoder_mod.default_step_size(atoms)
        params = EncoderParams(lam=lam, n_steps=n_steps, step_size=alpha)
        t_enc = _median_time(lambda: trainer._encode_all(atoms, Y, params), repeats)
        codes = trainer._encode_all(atoms, Y, params)
        t_clu = _median_time(
            lambda: spectral.cluster_pipeline(codes, 2, replicates=replicates, seed=seed),
            repeats,
        )
        data_labels, _ = spectral.cluster_pipeline(codes, 2, replicates=replicates, seed=seed)
        acc = spectral.clustering_accuracy(data_labels, labels)
        records.append(
            {
                "n": int(n),
                "m": int(m),
                "t_encode_seconds": t_enc,
                "t_cluster_seconds": t_clu,
                "accuracy": float(acc),
                "seed": int(seed),
            }
        )
    slopes = None
    if len(n_grid) >= 3:
        log_n = np.log([r["n"] for r in records])
        slopes = {
            "encode_slope": float(np.polyfit(log_n, np.log([r["t_encode_seconds"] for r in records]), 1)[0]),
            "cluster_slope": float(np.polyfit(log_n, np.log([r["t_cluster_seconds"] for r in records]), 1)[0]),
        }
    return records, slopes


def cmd_benchmark(args):
    out = _outdir(args, "benchmark")
    defaults = {
        "n_grid": "10000,20000,40000,80000",
        "m": 24,
        "lambda": 5.0,
        "T": 15,
        "train_n": 5000,
        "train_epochs": 300,
        "noise": 0.05,
        "seed": 0,
        "replicates": 10,
    }
    cfg = _resolve(
        defaults,
        args.config,
        {
            "n_grid": args.n_grid,
            "m": args.m,
            "lambda": args.lam,
            "T": args.T,
            "train_n": args.train_n,
            "train_epochs": args.train_epochs,
            "noise": args.noise,
            "seed": args.seed,
        },
    )
    n_grid = [int(v) for v in str(cfg["n_grid"]).split(",") if v.strip()]
    if not n_grid:
        raise UsageError("empty n grid")
    records, slopes = run_benchmark(
        n_grid,
        m=int(cfg["m"]),
        lam=float(cfg["lambda"]),
        n_steps=int(cfg["T"]),
        train_n=int(cfg["train_n"]),
        train_epochs=int(cfg["train_epochs"]),
        noise=float(cfg["noise"]),
        seed=int(cfg["seed"]),
        replicates=int(cfg["replicates"]),
    )
    with open(os.path.join(out, "benchmark.csv"), "w") as fh:
        fh.write("n,m,t_encode_seconds,t_cluster_seconds,accuracy,seed\n")
        for r in records:
            fh.write(
                f"{r['n']},{r['m']},{r['t_encode_seconds']!r},"
                f"{r['t_cluster_seconds']!r},{r['accuracy']!r},{r['seed']}\n"
            )
    ns = [r["n"] for r in records]
    series = {
        "encode": [r["t_encode_seconds"] for r in records],
        "cluster": [r["t_cluster_seconds"] for r in records],
    }
    fileio.write_timing_svg(os.path.join(out, "timing.svg"), ns, series, title="seconds vs n")
    fileio.write_timing_svg(
        os.path.join(out, "timing_loglog.svg"), ns, series, loglog=True, title="log-log seconds vs n"
    )
    if slopes is not None:
        fileio.write_metrics(os.path.join(out, "slopes.json"), slopes)
        print(f"encode slope {slopes['encode_slope']:.3f}, cluster slope {slopes['cluster_slope']:.3f}")
    else:
        print("fewer than 3 grid points; slope fit refused")
    fileio.write_config(os.path.join(out, "resolved_config.cfg"), cfg)
    for r in records:
        print(
            f"n={r['n']}: encode {r['t_encode_seconds']:.3f}s, "
            f"cluster {r['t_cluster_seconds']:.3f}s, acc {r['accuracy']:.3f}"
        )
    return 0


# ---------------------------------------------------------------------------
# verify: oracle cross-check suites
# ---------------------------------------------------------------------------


def make_theorem1_instance(seed, atoms_per_cluster=7, separation=8.0, points_per_triangle=20):
    """A sampled two-cluster model certified to satisfy the exact-recovery premises."""
    for attempt in range(10):
        model = datagen.make_two_cluster_model(
            atoms_per_cluster=atoms_per_cluster, separation=separation, seed=seed + 1000 * attempt
        )
        n = points_per_triangle * len(model.triangles)
        Y, truth = datagen.sample_delaunay_model(model, n, seed=seed + 1000 * attempt)
        stats = datagen.separation_stats(model, Y, truth)
        _, report = datagen.delaunay_connectivity(model, truth)
        if (
            stats.well_separated
            and all(report.cluster_connected.values())
            and not report.cross_cluster_path
        ):
            return model, Y, truth
    raise RuntimeError(f"could not build a premise-satisfying instance for seed {seed}")


def make_theorem2_instance(seed, home=5, foreign=5, separation=12.0):
    """Dictionary split into a home blob containing y and a distant foreign blob.

    Returns (D, y, epsilon, certificate_code); the certificate reconstructs y
    within epsilon using home atoms only, and the distance gap is certified.
    """
    rng = np.random.default_rng(seed)
    for _ in range(50):
        A = rng.uniform(-1.0, 1.0, size=(2, home))
        B = rng.uniform(-1.0, 1.0, size=(2, foreign)) + np.array([[separation], [0.0]])
        tri = rng.choice(home, size=3, replace=False)
        bary = rng.dirichlet((1.0, 1.0, 1.0))
        y = A[:, tri] @ bary
        eta = 0.01 * rng.standard_normal(2)
        y = y + eta
        cert = np.zeros(home + foreign)
        cert[tri] = bary
        D = np.concatenate([A, B], axis=1)
        resid = float(np.linalg.norm(y - D @ cert))
        epsilon = 1.5 * resid + 0.02
        d1, d2 = oracle.theorem2_deltas(A, B, y)
        if d2 > d1:
            return D, y, epsilon, cert, (home, foreign)
    raise RuntimeError(f"could not build a premise-satisfying instance for seed {seed}")


def _suite_projection(count=400, seed=0):
    rng = np.random.default_rng(seed)
    for i in range(count):
        m = int(rng.integers(1, 30))
        v = rng.normal(0, 3, m)
        p = simplex_mod.project_simplex(v)
        q = oracle.project_simplex_bisection(v)
        if np.abs(p - q).max() > 1e-9:
            return False, f"sort and bisection projections disagree on case {i}"
        if p.min() < 0 or abs(p.sum() - 1) > 1e-9:
            return False, f"projection output off the simplex on case {i}"
        p2 = simplex_mod.project_simplex(p)
        if np.abs(p2 - p).max() > 1e-12:
            return False, f"projection not idempotent on case {i}"
        u = rng.normal(0, 3, m)
        if np.linalg.norm(simplex_mod.project_simplex(u) - p) > np.linalg.norm(u - v) + 1e-12:
            return False, f"projection expansive on case {i}"
    return True, f"{count} random projections cross-checked"


def _suite_gradient(count=25, seed=0):
    rng = np.random.default_rng(seed)
    checked = 0
    attempts = 0
    while checked < count and attempts < count * 20:
        attempts += 1
        d = int(rng.integers(1, 5))
        m = int(rng.integers(2, 7))
        T = int(rng.choice([1, 3, 8]))
        lam = float(rng.choice([0.0, 0.5, 2.0]))
        A = rng.normal(0, 1, (d, m))
        y = rng.normal(0, 1, d)
        params = EncoderParams(lam=lam, n_steps=T)
        x, tape = encoder_mod.encode(A, y, params)
        if tape.near_boundary(1e-5):
            continue
        grad = trainer.grad_dictionary(A, y, tape, lam)

        def f(Aflat):
            Am = Aflat.reshape(d, m)
            alpha = tape.step_size  # freeze the step so only A varies
            p = EncoderParams(lam=lam, n_steps=T, step_size=alpha)
            xx, _ = encoder_mod.encode(Am, y, p, want_tape=False)
            from .encoder import loss

            return loss(Am, y, xx, lam)

        best = np.inf
        for h in (1e-4, 1e-5, 1e-6):
            fd = oracle.finite_diff_grad(f, A.ravel().copy(), h).reshape(d, m)
            denom = max(np.linalg.norm(fd), 1e-12)
            best = min(best, np.linalg.norm(grad - fd) / denom)
        if best > 1e-5:
            return False, f"gradient mismatch {best:.2e} on attempt {attempts}"
        checked += 1
    if checked < count:
        return False, f"only {checked} boundary-free instances found"
    return True, f"{checked} unrolled gradients matched finite differences"


def _suite_embedding(count=10, seed=0):
    rng = np.random.default_rng(seed)
    for i in range(count):
        m = int(rng.integers(4, 15))
        n = int(rng.integers(m, 80))
        k = int(rng.integers(1, min(4, m) + 1))
        X, _ = simplex_mod.project_simplex_batch(rng.normal(0, 1, (m, n)))
        emb = spectral.spectral_embed(X, k)
        L = oracle.full_bipartite_laplacian(X)
        Q = np.concatenate([emb.q_data, emb.q_atoms], axis=1)
        full_energy = float(np.trace(Q @ L @ Q.T))
        graph = spectral.reduced_adjacency(X)
        LA = spectral.schur_laplacian(graph)
        reduced_energy = float(np.trace(emb.q_atoms @ LA @ emb.q_atoms.T))
        if abs(full_energy - reduced_energy) > 1e-8 * max(1.0, abs(full_energy)):
            return False, f"energy mismatch {full_energy} vs {reduced_energy} on case {i}"
        naive = oracle.naive_embedding(X, k)
        if np.abs(np.sort(naive.eigenvalues) - np.sort(emb.eigenvalues)).max() > 1e-8:
            return False, f"eigenvalue mismatch on case {i}"
    return True, f"{count} spectral embeddings matched the dense elimination"


def _suite_theorem1(count=20, seed=0):
    for i in range(count):
        model, Y, truth = make_theorem1_instance(seed + i)
        labels, _ = spectral.cluster_pipeline(truth.true_codes, 2, seed=seed)
        acc = spectral.clustering_accuracy(labels, truth.labels)
        if acc != 1.0:
            return False, f"instance {i}: accuracy {acc} < 1.0"
    return True, f"{count} well-separated models clustered exactly"


def _suite_theorem2(count=20, seed=0):
    for i in range(count):
        D, y, epsilon, cert, parts = make_theorem2_instance(seed + i)
        home = parts[0]
        if np.linalg.norm(y - D @ cert) > epsilon:
            return False, f"instance {i}: certificate infeasible"
        x = oracle.solve_program_13(D, y, epsilon, parts)
        support = np.nonzero(x > 1e-12)[0]
        if (support >= home).any():
            return False, f"instance {i}: optimal support {support.tolist()} touches foreign atoms"
    return True, f"{count} constrained programs stayed on home-cluster support"


SUITES = {
    "projection": _suite_projection,
    "gradient": _suite_gradient,
    "embedding": _suite_embedding,
    "theorem1": _suite_theorem1,
    "theorem2": _suite_theorem2,
}


def run_verify_suite(name, **kwargs):
    """Run one named oracle cross-check suite; returns (ok, message)."""
    return SUITES[name](**kwargs)


def cmd_verify(args):
    names = list(SUITES) if args.suite == "all" else [args.suite]
    failed = False
    for name in names:
        ok, msg = run_verify_suite(name, seed=args.seed)
        status = "PASS" if ok else "FAIL"
        print(f"[{status}] {name}: {msg}")
        failed = failed or not ok
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# parser / entry point
# ---------------------------------------------------------------------------


class UsageError(Exception):
    pass


def build_parser():
    parser = argparse.ArgumentParser(
        prog="simplexcode",
        description="Simplex-constrained local dictionary learning and spectral clustering",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset")
    g.add_argument("--dataset", choices=["two-moons", "concentric", "circle", "delaunay"])
    g.add_argument("--n", type=int)
    g.add_argument("--noise", type=float)
    g.add_argument("--delta", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--out")
    g.add_argument("--config")
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="learn a dictionary and codes from a data CSV")
    f.add_argument("--data", required=True)
    f.add_argument("--m", type=int)
    f.add_argument("--lambda", dest="lam", type=float)
    f.add_argument("--T", type=int)
    f.add_argument("--alpha", type=float)
    f.add_argument("--learn-alpha", action="store_true")
    f.add_argument("--recurrence", choices=["squared", "printed"])
    f.add_argument("--lr", type=float)
    f.add_argument("--epochs", type=int)
    f.add_argument("--batch-size", type=int)
    f.add_argument("--seed", type=int)
    f.add_argument("--final-T", dest="final_T", type=int)
    f.add_argument(
        "--preprocess", choices=["none", "minmax", "standardize", "unitnorm", "best"]
    )
    f.add_argument("--out")
    f.add_argument("--config")
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("cluster", help="spectral clustering from a codes file")
    c.add_argument("--codes", required=True)
    c.add_argument("--k", type=int)
    c.add_argument("--mode", choices=["quadratic", "normalized"])
    c.add_argument("--replicates", type=int)
    c.add_argument("--seed", type=int)
    c.add_argument("--truth")
    c.add_argument("--atoms")
    c.add_argument("--out")
    c.add_argument("--config")
    c.set_defaults(func=cmd_cluster)

    b = sub.add_parser("benchmark", help="scaling study over an n grid")
    b.add_argument("--n-grid", dest="n_grid")
    b.add_argument("--m", type=int)
    b.add_argument("--lambda", dest="lam", type=float)
    b.add_argument("--T", type=int)
    b.add_argument("--train-n", dest="train_n", type=int)
    b.add_argument("--train-epochs", dest="train_epochs", type=int)
    b.add_argument("--noise", type=float)
    b.add_argument("--seed", type=int)
    b.add_argument("--out")
    b.add_argument("--config")
    b.set_defaults(func=cmd_benchmark)

    v = sub.add_parser("verify", help="run the oracle cross-check suites")
    v.add_argument("--suite", choices=["all", *SUITES], default="all")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TrainingDiverged, oracle.InfeasibleProgram, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
