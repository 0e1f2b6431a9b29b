"""Acceptance suite: one test per exit criterion, one printed pass line each.

Run with ``pytest -s tests/test_acceptance.py`` to see the per-criterion lines.
The slow end-to-end criteria (two moons, the m-sweep, the scaling study) train
real models; the whole module is sized to finish on a desktop-class machine.
"""

import itertools
import os
import time

import numpy as np

from simplexcode.cli import make_theorem1_instance, make_theorem2_instance, run_benchmark
from simplexcode.datagen import gen_concentric_circles, gen_two_moons
from simplexcode.encoder import EncoderParams, encode, loss
from simplexcode.oracle import (
    finite_diff_grad,
    full_bipartite_laplacian,
    oracle_encode,
    program13_support_values,
    solve_program_13,
)
from simplexcode.simplex import project_simplex, project_simplex_batch, projection_vjp
from simplexcode.spectral import (
    cluster_pipeline,
    clustering_accuracy,
    reduced_adjacency,
    schur_laplacian,
    spectral_embed,
)
from simplexcode.trainer import TrainConfig, grad_dictionary, train


def report(num, name, detail):
    print(f"[PASS] criterion {num}: {name} ({detail})")


def fit_and_cluster(Y, labels, m, lam, n_steps, lr, epochs, seed,
                    batch_size=10_000, final_n_steps=None):
    cfg = TrainConfig(
        n_atoms=m,
        epochs=epochs,
        batch_size=batch_size,
        learning_rate=lr,
        seed=seed,
        encoder=EncoderParams(lam=lam, n_steps=n_steps),
        final_n_steps=final_n_steps,
    )
    _, X, _ = train(Y, cfg)
    pred, _ = cluster_pipeline(X, 2, seed=seed)
    support = float((X > 1e-3).sum(axis=0).mean())
    return clustering_accuracy(pred, labels), support


def test_criterion_1_two_moons_accuracy():
    t0 = time.time()
    accs, supports = [], []
    for seed in range(4):
        Y, labels = gen_two_moons(5000, 0.05, seed)
        acc, support = fit_and_cluster(Y, labels, m=24, lam=5.0, n_steps=15, lr=1e-3,
                                       epochs=300, seed=seed)
        accs.append(acc)
        supports.append(support)
    passing = sum(a >= 0.99 for a in accs)
    assert passing >= 3, f"only {passing}/4 seeds reached 0.99: {accs}"
    # locality keeps the codes sparse: a handful of active atoms per point
    assert max(supports) <= 5.0, supports
    assert time.time() - t0 <= 300
    report(1, "two-moons clustering", f"accs={[round(a, 4) for a in accs]}")


def test_criterion_2_concentric_circles_m_sweep():
    # thin separation wants sharper codes during training than the moons run:
    # deeper unrolling, moderate locality weight, minibatch updates
    m_grid = (16, 32, 64)
    means = []
    for m in m_grid:
        accs = [
            fit_and_cluster(*gen_concentric_circles(4000, 0.15, seed=seed),
                            m=m, lam=2.0, n_steps=60, lr=1e-3, epochs=120, seed=seed,
                            batch_size=500, final_n_steps=500)[0]
            for seed in range(3)
        ]
        means.append(float(np.mean(accs)))
    assert means[0] <= means[1] + 1e-12 and means[1] <= means[2] + 1e-12, means
    assert means[-1] >= 0.95, means
    report(2, "concentric circles m-sweep", f"mean acc per m: {[round(v, 4) for v in means]}")


def test_criterion_3_scaling_slopes():
    t0 = time.time()
    records, slopes = run_benchmark(
        [10_000, 20_000, 40_000, 80_000],
        m=24,
        lam=5.0,
        n_steps=15,
        train_n=5000,
        train_epochs=200,
        seed=0,
        repeats=3,
    )
    assert slopes is not None
    assert 0.8 <= slopes["encode_slope"] <= 1.2, slopes
    assert slopes["cluster_slope"] <= 1.2, slopes
    assert time.time() - t0 <= 1200
    report(
        3,
        "scaling slopes",
        f"encode {slopes['encode_slope']:.3f}, cluster {slopes['cluster_slope']:.3f}",
    )


def test_criterion_4_gradient_correctness():
    t0 = time.time()
    rng = np.random.default_rng(2024)
    combos = list(itertools.product((1, 5, 20), (0.0, 0.5, 5.0)))
    checked = 0
    attempts = 0
    while checked < 50 and attempts < 1000:
        attempts += 1
        T, lam = combos[attempts % len(combos)]
        d, m = int(rng.integers(1, 5)), int(rng.integers(2, 7))
        A = rng.normal(0, 1, (d, m))
        y = rng.normal(0, 1, d)
        x, tape = encode(A, y, EncoderParams(lam=lam, n_steps=T))
        if tape.near_boundary(1e-6):
            continue  # boundary-degenerate instances are excluded
        g = grad_dictionary(A, y, tape, lam)

        def f(A_flat):
            Am = A_flat.reshape(d, m)
            p = EncoderParams(lam=lam, n_steps=T, step_size=tape.step_size)
            xx, _ = encode(Am, y, p, want_tape=False)
            return loss(Am, y, xx, lam)

        best = np.inf
        for h in (1e-4, 1e-5, 1e-6):
            fd = finite_diff_grad(f, A.ravel().copy(), h).reshape(d, m)
            best = min(best, np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12))
        assert best <= 1e-5, f"instance {attempts} (T={T}, lam={lam}): rel err {best:.2e}"
        checked += 1
    assert checked == 50
    assert time.time() - t0 <= 120
    report(4, "unrolled gradient vs finite differences", f"{checked} instances <= 1e-5")


def test_criterion_5_inner_solver_optimality():
    t0 = time.time()
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(50):
        d, m = int(rng.integers(2, 11)), int(rng.integers(3, 21))
        A = rng.normal(0, 1, (d, m))
        y = rng.normal(0, 1, d)
        lam = float(rng.uniform(0, 2))
        x_fast, _ = encode(A, y, EncoderParams(lam=lam, n_steps=1000), want_tape=False)
        x_slow = oracle_encode(A, y, lam, tol=1e-10)
        gap = loss(A, y, x_fast, lam) - loss(A, y, x_slow, lam)
        worst = max(worst, gap)
        assert gap <= 1e-6, f"gap {gap:.3e}"
    assert time.time() - t0 <= 120
    report(5, "encoder matches high-precision solver", f"worst loss gap {worst:.2e}")


def test_criterion_6_projection_correctness():
    t0 = time.time()
    rng = np.random.default_rng(5)

    # dense grid optimality at small m
    from test_simplex import grid_argmin

    for m in (2, 3, 4, 6):
        g = 40
        for _ in range(2):
            v = rng.normal(0, 1, m)
            assert np.linalg.norm(project_simplex(v) - grid_argmin(v, g)) <= np.sqrt(m) / g

    # bulk membership, idempotence, nonexpansiveness
    V = rng.normal(0, 4, (13, 10_000))
    P, _ = project_simplex_batch(V)
    assert P.min() >= 0.0 and np.abs(P.sum(axis=0) - 1.0).max() <= 1e-9
    P2, _ = project_simplex_batch(P)
    assert np.abs(P2 - P).max() <= 1e-12
    for _ in range(200):
        m = int(rng.integers(1, 20))
        u, v = rng.normal(0, 3, m), rng.normal(0, 3, m)
        assert np.linalg.norm(project_simplex(u) - project_simplex(v)) <= np.linalg.norm(u - v) + 1e-12

    # vjp against finite differences away from boundaries
    checked = 0
    while checked < 30:
        m = int(rng.integers(2, 10))
        v = rng.normal(0, 2, m)
        p = project_simplex(v)
        tau = (v - p)[p > 0][0]
        if np.abs(p[p > 0]).min() < 1e-4 or np.abs(v[p == 0] - tau).min(initial=np.inf) < 1e-4:
            continue
        gvec = rng.normal(0, 1, m)
        fd = np.zeros(m)
        h = 1e-6
        for i in range(m):
            e = np.zeros(m)
            e[i] = h
            fd[i] = gvec @ (project_simplex(v + e) - project_simplex(v - e)) / (2 * h)
        err = np.linalg.norm(projection_vjp(v, gvec) - fd) / max(np.linalg.norm(fd), 1e-12)
        assert err <= 1e-5
        checked += 1
    assert time.time() - t0 <= 60
    report(6, "projection correctness", "grid, membership, idempotence, vjp all within tolerance")


def test_criterion_7_fast_vs_naive_embedding():
    t0 = time.time()
    rng = np.random.default_rng(9)
    for case in range(20):
        m = int(rng.integers(5, 31))
        n = int(rng.integers(m, 501))
        k = int(rng.integers(1, 5))
        X, _ = project_simplex_batch(rng.normal(0, 1, (m, n)))
        emb = spectral_embed(X, k)
        L = full_bipartite_laplacian(X)
        Q = np.concatenate([emb.q_data, emb.q_atoms], axis=1)
        full = float(np.trace(Q @ L @ Q.T))
        LA = schur_laplacian(reduced_adjacency(X))
        reduced = float(np.trace(emb.q_atoms @ LA @ emb.q_atoms.T))
        assert abs(full - reduced) <= 1e-8 * max(1.0, abs(full)), f"case {case}"

    # identical block separation on a disconnected fixture
    X = np.zeros((8, 40))
    X[:4, :22], _ = project_simplex_batch(rng.normal(0, 1, (4, 22)))
    X[4:, 22:], _ = project_simplex_batch(rng.normal(0, 1, (4, 18)))
    from simplexcode.oracle import naive_embedding

    fast_labels, _ = cluster_pipeline(X, 2, seed=0)
    naive = naive_embedding(X, 2)
    naive_side = naive.q_data[1] > naive.q_data[1].mean()
    assert clustering_accuracy(fast_labels, naive_side.astype(int)) == 1.0
    assert time.time() - t0 <= 60
    report(7, "fast vs dense embedding", "20 trace equalities and block separation")


def test_criterion_8_theorem1_suite():
    t0 = time.time()
    from simplexcode.datagen import delaunay_connectivity, separation_stats

    for i in range(100):
        model, Y, truth = make_theorem1_instance(3000 + i)
        stats = separation_stats(model, Y, truth)
        _, conn = delaunay_connectivity(model, truth)
        assert stats.well_separated and all(conn.cluster_connected.values())
        labels, _ = cluster_pipeline(truth.true_codes, 2, seed=0)
        acc = clustering_accuracy(labels, truth.labels)
        assert acc == 1.0, f"instance {i}: acc {acc}"
    assert time.time() - t0 <= 120
    report(8, "exact recovery on separated models", "100/100 instances at accuracy 1.0")


def test_criterion_9_theorem2_suite():
    from simplexcode.oracle import theorem2_deltas

    t0 = time.time()
    for i in range(100):
        D, y, epsilon, cert, parts = make_theorem2_instance(9000 + i)
        home = parts[0]
        assert np.linalg.norm(y - D @ cert) <= epsilon  # constructive feasibility
        d1, d2 = theorem2_deltas(D[:, :home], D[:, home:], y)
        assert d2 > d1
        x = solve_program_13(D, y, epsilon, parts)
        support = np.nonzero(x > 1e-12)[0]
        assert (support < home).all(), f"instance {i}: support {support.tolist()}"
        # the executable inequality chain: home-supported values sit below the
        # near-distance bound, pure-foreign supports above the far one, and any
        # solution actually carrying foreign mass loses strictly
        records = program13_support_values(D, y, epsilon)
        home_vals = [v for s, v, _ in records if v is not None and all(j < home for j in s)]
        best_home = min(home_vals)
        assert best_home <= d1 + 1e-9
        for sup, val, xs in records:
            if val is None:
                continue
            if all(j >= home for j in sup):
                assert val >= d2 - 1e-9, f"instance {i}: pure-foreign value {val} < {d2}"
            if xs is not None and xs[home:].sum() > 1e-9:
                assert val > best_home + 1e-12, f"instance {i}: foreign mass did not lose"
    assert time.time() - t0 <= 120
    report(9, "support confinement in the constrained program", "100/100 instances")


def test_criterion_10_real_data_rows_not_reproduced():
    # hour-scale external-download experiments stay out of CI; a scripted
    # reproduction path ships for the handwritten-digit subset instead.
    script = os.path.join(os.path.dirname(__file__), "..", "scripts", "reproduce_digits.sh")
    assert os.path.exists(script)
    report(10, "real-data rows excluded from CI", "scripted path present, not run")
