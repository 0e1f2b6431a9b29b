"""Dataset generators, preprocessing, triangulation, and the generative model."""

import numpy as np
import pytest

from simplexcode.datagen import (
    delaunay_connectivity,
    delaunay_triangulate,
    gen_concentric_circles,
    gen_two_moons,
    incircle_value,
    make_two_cluster_model,
    preprocess,
    sample_delaunay_model,
    separation_stats,
)
from simplexcode.oracle import delaunay_brute_force

MOON_CENTERS = np.array([[0.0, 1.0], [0.0, 0.5]])  # centers of the two unit arcs


def test_moons_noiseless_on_unit_arcs():
    Y, labels = gen_two_moons(400, 0.0, seed=0)
    for i in range(400):
        c = MOON_CENTERS[:, labels[i]]
        assert abs(np.linalg.norm(Y[:, i] - c) - 1.0) <= 1e-12


def test_moons_label_balance():
    for n in (10, 11):
        _, labels = gen_two_moons(n, 0.05, seed=1)
        assert (labels == 0).sum() == (n + 1) // 2
        assert (labels == 1).sum() == n // 2


def test_moons_noise_scale():
    n = 100_000
    Y, labels = gen_two_moons(n, 0.05, seed=2)
    centers = MOON_CENTERS[:, labels]
    residuals = np.linalg.norm(Y - centers, axis=0) - 1.0
    assert abs(residuals.std() - 0.05) <= 0.05 * 0.05


def test_moons_deterministic():
    Y1, l1 = gen_two_moons(50, 0.05, seed=3)
    Y2, l2 = gen_two_moons(50, 0.05, seed=3)
    assert (Y1 == Y2).all() and (l1 == l2).all()


def test_concentric_radii():
    Y, labels = gen_concentric_circles(4000, 0.15, seed=0)
    r = np.linalg.norm(Y, axis=0)
    np.testing.assert_allclose(np.unique(np.round(r[labels == 0], 12)), 1.0)
    np.testing.assert_allclose(np.unique(np.round(r[labels == 1], 12)), 0.85)
    assert (labels == 0).sum() == 2000 and (labels == 1).sum() == 2000


def test_concentric_delta_one_collapses_inner():
    Y, labels = gen_concentric_circles(100, 1.0, seed=1)
    np.testing.assert_allclose(Y[:, labels == 1], 0.0, atol=1e-15)


def test_single_circle_mode():
    Y, labels = gen_concentric_circles(300, 0.5, seed=2, circles=1)
    assert (labels == 0).all()
    np.testing.assert_allclose(np.linalg.norm(Y, axis=0), 1.0, atol=1e-12)


def test_preprocess_minmax():
    Y = np.array([[0.0, 2.0], [1.0, 1.5]])
    out = preprocess(Y, "minmax")
    assert out.min() == 0.0 and out.max() == 1.0
    np.testing.assert_allclose(out[0], [0.0, 1.0])


def test_preprocess_standardize():
    rng = np.random.default_rng(3)
    Y = rng.normal(3, 2, (4, 500))
    out = preprocess(Y, "standardize")
    np.testing.assert_allclose(out.mean(axis=1), 0.0, atol=1e-12)
    np.testing.assert_allclose(out.std(axis=1), 1.0, atol=1e-12)


def test_preprocess_standardize_constant_coordinate():
    Y = np.array([[1.0, 1.0, 1.0], [0.0, 1.0, 2.0]])
    with pytest.raises(ValueError, match="coordinate 0"):
        preprocess(Y, "standardize")


def test_preprocess_unitnorm():
    rng = np.random.default_rng(4)
    Y = rng.normal(0, 1, (3, 50))
    out = preprocess(Y, "unitnorm")
    np.testing.assert_allclose(np.linalg.norm(out, axis=0), 1.0, atol=1e-12)


def test_preprocess_unitnorm_zero_column_flagged():
    Y = np.array([[0.0, 1.0], [0.0, 1.0]])
    with pytest.warns(UserWarning, match="zero column"):
        out = preprocess(Y, "unitnorm")
    np.testing.assert_allclose(out[:, 0], 0.0)


def test_preprocess_unknown_mode():
    with pytest.raises(ValueError):
        preprocess(np.eye(2), "whiten")


# --- triangulation -----------------------------------------------------------


def test_triangle_single():
    pts = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    assert delaunay_triangulate(pts) == [(0, 1, 2)]


def test_unit_square_tie_break():
    # co-circular corners: the tie-break must pick the diagonal through vertex 0
    pts = np.array([[0.0, 1.0, 1.0, 0.0], [0.0, 0.0, 1.0, 1.0]])
    assert delaunay_triangulate(pts) == [(0, 1, 2), (0, 2, 3)]


def test_unit_square_tie_break_relabeled():
    # rotating the labels moves the chosen diagonal with the lowest index
    pts = np.array([[1.0, 1.0, 0.0, 0.0], [0.0, 1.0, 1.0, 0.0]])
    tris = delaunay_triangulate(pts)
    assert len(tris) == 2
    shared = set(tris[0]) & set(tris[1])
    assert 0 in shared


def test_matches_brute_force_oracle_and_circumcircles_empty():
    # 200 random instances: the triangle sets match the O(m^4) enumeration and
    # every circumcircle is empty to tolerance
    rng = np.random.default_rng(5)
    for trial in range(200):
        m = int(rng.integers(4, 41))
        pts = rng.uniform(-1, 1, (2, m)) if trial % 2 else rng.normal(0, 2, (2, m))
        fast = delaunay_triangulate(pts)
        brute = delaunay_brute_force(pts)
        assert fast == brute, f"trial {trial}: mismatch"
        for tri in fast:
            a, b, c = (pts[:, v] for v in tri)
            for p in range(m):
                if p in tri:
                    continue
                assert incircle_value(a, b, c, pts[:, p]) <= 1e-9


def test_triangulate_rejects_degenerate_input():
    with pytest.raises(ValueError):
        delaunay_triangulate(np.array([[0.0, 1.0], [0.0, 0.0]]))  # too few
    with pytest.raises(ValueError, match="collinear"):
        delaunay_triangulate(np.array([[0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 2.0, 3.0]]))
    with pytest.raises(ValueError, match="duplicate"):
        delaunay_triangulate(np.array([[0.0, 1.0, 0.0], [0.0, 1.0, 0.0]]))


# --- generative model ---------------------------------------------------------


def test_model_samples_reconstruct_exactly():
    model = make_two_cluster_model(atoms_per_cluster=6, separation=8.0, seed=0)
    Y, truth = sample_delaunay_model(model, 200, seed=0)
    np.testing.assert_allclose(Y, model.atoms @ truth.true_codes, atol=1e-12)
    assert ((truth.true_codes > 0).sum(axis=0) <= 3).all()
    np.testing.assert_allclose(truth.true_codes.sum(axis=0), 1.0, atol=1e-12)


def test_model_labels_follow_triangles():
    model = make_two_cluster_model(atoms_per_cluster=5, separation=10.0, seed=1)
    Y, truth = sample_delaunay_model(model, 100, seed=1)
    for i in range(100):
        tri = model.triangles[truth.triangle_of_point[i]]
        assert truth.labels[i] == model.atom_cluster[tri[0]]


def test_model_validates():
    model = make_two_cluster_model(atoms_per_cluster=5, separation=9.0, seed=2)
    assert model.validate()


def test_connectivity_same_triangle_points_adjacent():
    model = make_two_cluster_model(atoms_per_cluster=4, separation=9.0, seed=3)
    Y, truth = sample_delaunay_model(model, 50, seed=3)
    adj, report = delaunay_connectivity(model, truth)
    same = truth.triangle_of_point[:, None] == truth.triangle_of_point[None, :]
    np.fill_diagonal(same, False)
    assert (adj[same]).all()
    assert not report.cross_cluster_path


def test_connectivity_fan_with_full_occupancy():
    # one point per triangle of a single blob: dual of a triangulation is connected
    rng = np.random.default_rng(7)
    pts = rng.uniform(-1, 1, (2, 9))
    tris = delaunay_triangulate(pts)
    from simplexcode.datagen import DelaunayModel, GroundTruth

    model = DelaunayModel(
        atoms=pts, triangles=tris, atom_cluster=np.zeros(9, dtype=np.int64)
    )
    n = len(tris)
    truth = GroundTruth(
        labels=np.zeros(n, dtype=np.int64),
        true_codes=np.zeros((9, n)),
        triangle_of_point=np.arange(n, dtype=np.int64),
    )
    _, report = delaunay_connectivity(model, truth)
    assert report.cluster_connected == {0: True}


def test_connectivity_rejects_unplaced_points():
    model = make_two_cluster_model(atoms_per_cluster=4, separation=9.0, seed=4)
    _, truth = sample_delaunay_model(model, 10, seed=4)
    truth.triangle_of_point[0] = len(model.triangles)
    with pytest.raises(ValueError):
        delaunay_connectivity(model, truth)


def test_separation_stats_hand_fixture():
    from simplexcode.datagen import DelaunayModel, GroundTruth

    h = np.sqrt(3) / 2
    t1 = np.array([[0.0, 1.0, 0.5], [0.0, 0.0, h]])
    t2 = t1 + np.array([[10.0], [0.0]])
    atoms = np.concatenate([t1, t2], axis=1)
    model = DelaunayModel(
        atoms=atoms,
        triangles=[(0, 1, 2), (3, 4, 5)],
        atom_cluster=np.array([0, 0, 0, 1, 1, 1]),
    )
    centroids = np.stack([t1.mean(axis=1), t2.mean(axis=1)], axis=1)
    codes = np.full((6, 2), 0.0)
    codes[:3, 0] = 1 / 3
    codes[3:, 1] = 1 / 3
    truth = GroundTruth(
        labels=np.array([0, 1]),
        true_codes=codes,
        triangle_of_point=np.array([0, 1]),
    )
    stats = separation_stats(model, centroids, truth)
    assert stats.min_cluster_separation == pytest.approx(10.0, abs=1e-12)
    assert stats.max_triangle_diameter == pytest.approx(1.0, abs=1e-12)
    assert stats.well_separated

    # scaling every coordinate doubles both statistics, verdict unchanged
    model2 = DelaunayModel(
        atoms=2 * atoms, triangles=model.triangles, atom_cluster=model.atom_cluster
    )
    stats2 = separation_stats(model2, 2 * centroids, truth)
    assert stats2.min_cluster_separation == pytest.approx(20.0, abs=1e-12)
    assert stats2.max_triangle_diameter == pytest.approx(2.0, abs=1e-12)
    assert stats2.well_separated == stats.well_separated


def test_separation_stats_single_cluster_errors():
    model = make_two_cluster_model(atoms_per_cluster=4, separation=9.0, seed=5)
    Y, truth = sample_delaunay_model(model, 30, seed=5)
    truth.labels[:] = 0
    with pytest.raises(ValueError):
        separation_stats(model, Y, truth)


def test_sampled_codes_recovered_by_encoder():
    # noiseless samples: small-lam encoding concentrates on the true vertices.
    # Deep unrolling matters here; shallow runs leave stray mass above the
    # 1e-4 threshold on neighboring atoms.
    from simplexcode.encoder import EncoderParams, encode_batch

    model = make_two_cluster_model(atoms_per_cluster=5, separation=9.0, seed=6)
    Y, truth = sample_delaunay_model(model, 15, seed=6)
    params = EncoderParams(lam=0.05, n_steps=60_000)
    X, _ = encode_batch(model.atoms, Y, params, want_tape=False)
    for i in range(15):
        support = set(np.nonzero(X[:, i] > 1e-4)[0].tolist())
        tri = set(model.triangles[truth.triangle_of_point[i]])
        assert support <= tri
