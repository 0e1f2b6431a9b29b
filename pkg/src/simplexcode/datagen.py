"""Synthetic data generators, preprocessing, and the 2-D triangulated generative model.

The generative model places atoms in the plane, triangulates them, and draws
data points as barycentric mixtures inside triangles, so every ground-truth
code has at most three nonzeros and reconstructs its point exactly in the
noiseless case.  Construction uses exact rational predicates with an
index-ordered symbolic perturbation, so co-circular inputs (four points on one
circle) resolve deterministically.
"""

import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "DelaunayModel",
    "GroundTruth",
    "ConnectivityReport",
    "SeparationStats",
    "gen_two_moons",
    "gen_concentric_circles",
    "preprocess",
    "delaunay_triangulate",
    "incircle_value",
    "delaunay_connectivity",
    "sample_delaunay_model",
    "separation_stats",
    "make_two_cluster_model",
]

COCIRCULAR_TOL = 1e-9
COLLINEAR_TOL = 1e-9


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def gen_two_moons(n, noise_sigma=0.05, seed=0):
    """Two interleaved unit semicircular arcs with isotropic Gaussian noise.

    The first ceil(n/2) points lie on the upper moon (label 0), the rest on
    the lower moon (label 1).
    """
    if n < 2:
        raise ValueError("need n >= 2")
    rng = np.random.default_rng(seed)
    n0 = (n + 1) // 2
    n1 = n - n0
    t0 = rng.uniform(0.0, np.pi, n0)
    t1 = rng.uniform(0.0, np.pi, n1)
    upper = np.stack([np.cos(t0), np.sin(t0)])
    lower = np.stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    Y = np.concatenate([upper, lower], axis=1)
    if noise_sigma > 0:
        Y = Y + noise_sigma * rng.standard_normal(Y.shape)
    labels = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    return Y, labels


def gen_concentric_circles(n, delta, seed=0, noise_sigma=0.0, circles=2):
    """Concentric circles of radii 1 and 1 - delta, half the mass on each.

    ``circles=1`` drops the inner circle and returns the plain unit circle
    with a single label.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    if circles not in (1, 2):
        raise ValueError("circles must be 1 or 2")
    if n < 1:
        raise ValueError("need n >= 1")
    rng = np.random.default_rng(seed)
    if circles == 1:
        theta = rng.uniform(0.0, 2 * np.pi, n)
        Y = np.stack([np.cos(theta), np.sin(theta)])
        labels = np.zeros(n, dtype=np.int64)
    else:
        n0 = (n + 1) // 2
        n1 = n - n0
        t0 = rng.uniform(0.0, 2 * np.pi, n0)
        t1 = rng.uniform(0.0, 2 * np.pi, n1)
        outer = np.stack([np.cos(t0), np.sin(t0)])
        inner = (1.0 - delta) * np.stack([np.cos(t1), np.sin(t1)])
        Y = np.concatenate([outer, inner], axis=1)
        labels = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    if noise_sigma > 0:
        Y = Y + noise_sigma * rng.standard_normal(Y.shape)
    return Y, labels


def preprocess(Y, mode):
    """Rescale data: global min-max to [0, 1], per-coordinate standardize, or unit-norm columns."""
    Y = np.asarray(Y, dtype=np.float64)
    if mode == "minmax":
        lo, hi = Y.min(), Y.max()
        if hi == lo:
            raise ValueError("min-max scaling undefined: all entries are equal")
        return (Y - lo) / (hi - lo)
    if mode == "standardize":
        mean = Y.mean(axis=1, keepdims=True)
        std = Y.std(axis=1, keepdims=True)
        degenerate = np.nonzero(std[:, 0] == 0.0)[0]
        if degenerate.size:
            raise ValueError(
                f"standardize undefined: coordinate {int(degenerate[0])} is constant"
            )
        return (Y - mean) / std
    if mode == "unitnorm":
        norms = np.linalg.norm(Y, axis=0, keepdims=True)
        zero = norms[0] == 0.0
        if zero.any():
            warnings.warn(
                f"unitnorm left {int(zero.sum())} zero column(s) unchanged", stacklevel=2
            )
        safe = np.where(zero, 1.0, norms)
        return Y / safe
    raise ValueError(f"unknown preprocessing mode {mode!r}")


# ---------------------------------------------------------------------------
# exact geometric predicates
# ---------------------------------------------------------------------------


def _orient2d_float(ax, ay, bx, by, cx, cy):
    p = (bx - ax) * (cy - ay)
    q = (by - ay) * (cx - ax)
    det = p - q
    mag = abs(p) + abs(q)
    return det, mag


def _orient2d_exact(ax, ay, bx, by, cx, cy):
    det = (Fraction(bx) - Fraction(ax)) * (Fraction(cy) - Fraction(ay)) - (
        Fraction(by) - Fraction(ay)
    ) * (Fraction(cx) - Fraction(ax))
    return det


def _orient_sign(pts, ia, ib, ic):
    det, mag = _orient2d_float(*pts[ia], *pts[ib], *pts[ic])
    if abs(det) > 1e-11 * mag:
        return 1 if det > 0 else -1
    det = _orient2d_exact(*pts[ia], *pts[ib], *pts[ic])
    return (det > 0) - (det < 0)


def _incircle_exact(pts, ia, ib, ic, ip):
    # 3x3 determinant of rows (x_i - x_p, y_i - y_p, |.|^2) in exact rationals
    px, py = Fraction(pts[ip][0]), Fraction(pts[ip][1])
    rows = []
    for i in (ia, ib, ic):
        u = Fraction(pts[i][0]) - px
        v = Fraction(pts[i][1]) - py
        rows.append((u, v, u * u + v * v))
    (a1, a2, a3), (b1, b2, b3), (c1, c2, c3) = rows
    return (
        a1 * (b2 * c3 - b3 * c2)
        - a2 * (b1 * c3 - b3 * c1)
        + a3 * (b1 * c2 - b2 * c1)
    )


def _incircle_sign(pts, ia, ib, ic, ip):
    """Sign of the in-circumcircle determinant for a CCW triangle (ia, ib, ic).

    Positive means point ``ip`` lies strictly inside.  Exact zeros are resolved
    by an index-ordered lifting perturbation: point i is pushed infinitesimally
    toward the paraboloid's inside, more strongly for lower indices, which
    picks a unique triangulation for co-circular inputs.
    """
    px, py = pts[ip]
    rows = []
    for i in (ia, ib, ic):
        u = pts[i][0] - px
        v = pts[i][1] - py
        rows.append((u, v, u * u + v * v))
    (a1, a2, a3), (b1, b2, b3), (c1, c2, c3) = rows
    t1 = a1 * (b2 * c3 - b3 * c2)
    t2 = a2 * (b1 * c3 - b3 * c1)
    t3 = a3 * (b1 * c2 - b2 * c1)
    det = t1 - t2 + t3
    mag = abs(t1) + abs(t2) + abs(t3)
    if abs(det) > 1e-11 * mag:
        return 1 if det > 0 else -1
    det = _incircle_exact(pts, ia, ib, ic, ip)
    if det != 0:
        return 1 if det > 0 else -1
    # co-circular: first point in index order with a nonzero lifting cofactor
    # decides; pushing its height down by eps changes the determinant by
    # -eps * cofactor.
    cof = {
        ia: _orient2d_exact(*pts[ib], *pts[ic], *pts[ip]),
        ib: -_orient2d_exact(*pts[ia], *pts[ic], *pts[ip]),
        ic: _orient2d_exact(*pts[ia], *pts[ib], *pts[ip]),
        ip: -_orient2d_exact(*pts[ia], *pts[ib], *pts[ic]),
    }
    for i in sorted(cof):
        if cof[i] != 0:
            return 1 if -cof[i] > 0 else -1
    raise ValueError("degenerate input: four collinear points in circumcircle test")


def incircle_value(a, b, c, p):
    """Scale-normalized in-circumcircle value of ``p`` against CCW triangle (a, b, c).

    Positive when ``p`` is inside; magnitude is comparable across scales, so a
    fixed tolerance like 1e-9 expresses "co-circular within 1e-9".
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    u = np.stack([a - p, b - p, c - p])
    z = (u * u).sum(axis=1)
    det = (
        u[0, 0] * (u[1, 1] * z[2] - z[1] * u[2, 1])
        - u[0, 1] * (u[1, 0] * z[2] - z[1] * u[2, 0])
        + z[0] * (u[1, 0] * u[2, 1] - u[1, 1] * u[2, 0])
    )
    orient = (u[1, 0] - u[0, 0]) * (u[2, 1] - u[0, 1]) - (u[1, 1] - u[0, 1]) * (u[2, 0] - u[0, 0])
    if orient < 0:
        det = -det
    scale = max(float(z.max()), 1e-300)
    return float(det) / (scale * scale)


def delaunay_triangulate(points):
    """Delaunay triangulation of 2-D points (columns), Bowyer-Watson insertion.

    Returns a lexicographically sorted list of ascending index triples.  Every
    returned triangle has an empty circumcircle under the perturbed exact
    predicate; for co-circular quadruples the diagonal through the
    lowest-index vertex is chosen.
    """
    P = np.asarray(points, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != 2:
        raise ValueError(f"expected points as a 2 x m matrix, got shape {P.shape}")
    m = P.shape[1]
    if m < 3:
        raise ValueError("need at least 3 points to triangulate")
    if not np.isfinite(P).all():
        raise ValueError("points contain non-finite entries")

    span = max(float(P[0].max() - P[0].min()), float(P[1].max() - P[1].min()))
    scale = max(span, 1e-300)
    # duplicates
    for i in range(m):
        d = np.abs(P[:, i + 1 :] - P[:, i : i + 1]).max(axis=0) if i + 1 < m else np.array([])
        if d.size and d.min() < 1e-12 * scale:
            j = i + 1 + int(np.argmin(d))
            raise ValueError(f"duplicate points at indices {i} and {j}")
    # global collinearity
    i0 = 0
    d0 = ((P - P[:, [i0]]) ** 2).sum(axis=0)
    i1 = int(np.argmax(d0))
    dirv = P[:, i1] - P[:, i0]
    nrm = np.linalg.norm(dirv)
    if nrm == 0:
        raise ValueError("all points coincide")
    perp = np.array([-dirv[1], dirv[0]]) / nrm
    offs = np.abs(perp @ (P - P[:, [i0]]))
    if offs.max() < COLLINEAR_TOL * scale:
        raise ValueError("points are collinear; triangulation undefined")

    center = P.mean(axis=1)
    R = 2.0**22 * scale
    pts = [(float(P[0, i]), float(P[1, i])) for i in range(m)]
    for ang in (0.5 * np.pi, 0.5 * np.pi + 2 * np.pi / 3, 0.5 * np.pi + 4 * np.pi / 3):
        pts.append((float(center[0] + R * np.cos(ang)), float(center[1] + R * np.sin(ang))))
    s0, s1, s2 = m, m + 1, m + 2

    def ccw(tri):
        ia, ib, ic = tri
        s = _orient_sign(pts, ia, ib, ic)
        if s == 0:
            raise ValueError("degenerate (collinear) triangle encountered")
        return tri if s > 0 else (ia, ic, ib)

    triangles = [ccw((s0, s1, s2))]
    for p in range(m):
        bad = [t for t in triangles if _incircle_sign(pts, *t, p) > 0]
        edge_count = {}
        for t in bad:
            for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                key = (min(e), max(e))
                edge_count[key] = edge_count.get(key, 0) + 1
        boundary = [e for e, cnt in edge_count.items() if cnt == 1]
        triangles = [t for t in triangles if t not in bad]
        for e in boundary:
            triangles.append(ccw((e[0], e[1], p)))

    out = [
        tuple(sorted(t))
        for t in triangles
        if all(v < m for v in t)
    ]
    return sorted(out)


# ---------------------------------------------------------------------------
# the generative model
# ---------------------------------------------------------------------------


@dataclass
class DelaunayModel:
    atoms: np.ndarray  # (2, m)
    triangles: list  # index triples, each within a single cluster
    atom_cluster: np.ndarray  # (m,) int
    noise_sigma: float = 0.0

    def validate(self, tol=COCIRCULAR_TOL, check_unique=False):
        """Empty-circumcircle check for every triangle against every atom.

        ``check_unique`` additionally flags any four atoms co-circular within
        ``tol`` (which would make the triangulation non-unique).
        """
        A = self.atoms
        m = A.shape[1]
        for tri in self.triangles:
            cl = {int(self.atom_cluster[v]) for v in tri}
            if len(cl) != 1:
                raise ValueError(f"triangle {tri} spans clusters {sorted(cl)}")
            for p in range(m):
                if p in tri:
                    continue
                if incircle_value(A[:, tri[0]], A[:, tri[1]], A[:, tri[2]], A[:, p]) > tol:
                    raise ValueError(f"atom {p} lies inside the circumcircle of {tri}")
        if check_unique:
            from itertools import combinations

            for (i, j, k, l) in combinations(range(m), 4):
                v = incircle_value(A[:, i], A[:, j], A[:, k], A[:, l])
                if abs(v) < tol:
                    raise ValueError(f"atoms {(i, j, k, l)} are co-circular within {tol}")
        return True


@dataclass
class GroundTruth:
    labels: np.ndarray  # (n,)
    true_codes: np.ndarray  # (m, n), barycentric, <= 3 nonzeros per column
    triangle_of_point: np.ndarray  # (n,) index into model.triangles


@dataclass
class ConnectivityReport:
    cluster_connected: dict  # cluster id -> bool
    cross_cluster_path: bool


@dataclass
class SeparationStats:
    min_cluster_separation: float  # min cross-cluster point distance
    max_triangle_diameter: float  # over triangles containing at least one point
    well_separated: bool  # separation > 2 * diameter


def make_two_cluster_model(atoms_per_cluster=8, separation=8.0, seed=0, noise_sigma=0.0):
    """Random two-cluster model: one unit-disk blob of atoms per cluster, triangulated per cluster."""
    if atoms_per_cluster < 3:
        raise ValueError("need at least 3 atoms per cluster")
    rng = np.random.default_rng(seed)

    def blob(center):
        r = np.sqrt(rng.uniform(0.05, 1.0, atoms_per_cluster))
        th = rng.uniform(0, 2 * np.pi, atoms_per_cluster)
        return np.stack([center[0] + r * np.cos(th), center[1] + r * np.sin(th)])

    for _ in range(64):
        a0 = blob((0.0, 0.0))
        a1 = blob((separation, 0.0))
        atoms = np.concatenate([a0, a1], axis=1)
        try:
            t0 = delaunay_triangulate(a0)
            t1 = delaunay_triangulate(a1)
        except ValueError:
            continue
        triangles = list(t0) + [tuple(v + atoms_per_cluster for v in t) for t in t1]
        cluster = np.concatenate(
            [np.zeros(atoms_per_cluster, dtype=np.int64), np.ones(atoms_per_cluster, dtype=np.int64)]
        )
        model = DelaunayModel(atoms=atoms, triangles=triangles, atom_cluster=cluster, noise_sigma=noise_sigma)
        try:
            model.validate()
        except ValueError:
            continue
        return model
    raise RuntimeError("failed to draw a valid two-cluster model; widen the separation")


def sample_delaunay_model(model, n, seed=0, triangle_weights="uniform"):
    """Draw points from the model: pick a triangle, mix its vertices barycentrically, add noise.

    Returns ``(Y, GroundTruth)``; with zero noise, Y equals atoms @ true_codes
    exactly up to floating-point rounding.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    tris = np.asarray(model.triangles, dtype=np.int64)
    if tris.ndim != 2 or tris.shape[1] != 3:
        raise ValueError("model has no valid triangle list")
    rng = np.random.default_rng(seed)
    n_tri = tris.shape[0]
    if triangle_weights == "uniform":
        probs = np.full(n_tri, 1.0 / n_tri)
    elif triangle_weights == "area":
        A = model.atoms
        v0, v1, v2 = A[:, tris[:, 0]], A[:, tris[:, 1]], A[:, tris[:, 2]]
        area = 0.5 * np.abs(
            (v1[0] - v0[0]) * (v2[1] - v0[1]) - (v1[1] - v0[1]) * (v2[0] - v0[0])
        )
        probs = area / area.sum()
    else:
        raise ValueError(f"unknown triangle_weights {triangle_weights!r}")
    which = rng.choice(n_tri, size=n, p=probs)
    bary = rng.dirichlet((1.0, 1.0, 1.0), size=n)  # uniform on the 2-simplex
    m = model.atoms.shape[1]
    codes = np.zeros((m, n))
    rows = tris[which]
    np.add.at(codes, (rows.ravel(), np.repeat(np.arange(n), 3)), bary.ravel())
    Y = model.atoms @ codes
    if model.noise_sigma > 0:
        Y = Y + model.noise_sigma * rng.standard_normal(Y.shape)
    labels = model.atom_cluster[tris[which, 0]].astype(np.int64)
    truth = GroundTruth(labels=labels, true_codes=codes, triangle_of_point=which.astype(np.int64))
    return Y, truth


def _triangle_adjacency(triangles):
    n_tri = len(triangles)
    adj = [set() for _ in range(n_tri)]
    edge_owner = {}
    for t_idx, tri in enumerate(triangles):
        for e in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(e), max(e))
            if key in edge_owner:
                other = edge_owner[key]
                adj[t_idx].add(other)
                adj[other].add(t_idx)
            else:
                edge_owner[key] = t_idx
    return adj


def delaunay_connectivity(model, truth):
    """Point graph of the generative model plus a per-cluster connectivity report.

    Two points are adjacent when their triangles are equal or share an edge.
    """
    tri_of = np.asarray(truth.triangle_of_point, dtype=np.int64)
    n_tri = len(model.triangles)
    if tri_of.min(initial=0) < 0 or (tri_of >= n_tri).any():
        raise ValueError("some points lie outside every triangle of the model")
    n = tri_of.shape[0]
    tri_adj = _triangle_adjacency(model.triangles)

    same_or_adjacent = np.zeros((n_tri, n_tri), dtype=bool)
    np.fill_diagonal(same_or_adjacent, True)
    for t, nbrs in enumerate(tri_adj):
        for o in nbrs:
            same_or_adjacent[t, o] = True
    adjacency = same_or_adjacent[np.ix_(tri_of, tri_of)]
    np.fill_diagonal(adjacency, False)

    # connectivity via BFS over occupied triangles
    occupied = np.unique(tri_of)
    occ_set = set(int(t) for t in occupied)

    def component(start, allowed):
        seen = {start}
        stack = [start]
        while stack:
            t = stack.pop()
            for o in tri_adj[t]:
                if o in allowed and o not in seen:
                    seen.add(o)
                    stack.append(o)
        return seen

    tri_cluster = {int(t): int(model.atom_cluster[model.triangles[t][0]]) for t in occupied}
    report_connected = {}
    for cl in sorted(set(tri_cluster.values())):
        own = {t for t, c in tri_cluster.items() if c == cl}
        first = next(iter(sorted(own)))
        report_connected[cl] = component(first, own) == own

    cross = False
    remaining = set(occ_set)
    while remaining:
        comp = component(next(iter(sorted(remaining))), occ_set)
        if len({tri_cluster[t] for t in comp}) > 1:
            cross = True
        remaining -= comp

    return adjacency, ConnectivityReport(cluster_connected=report_connected, cross_cluster_path=cross)


def separation_stats(model, Y, truth):
    """Minimum cross-cluster point distance and maximum occupied-triangle diameter."""
    Y = np.asarray(Y, dtype=np.float64)
    labels = np.asarray(truth.labels, dtype=np.int64)
    clusters = np.unique(labels)
    if clusters.size < 2:
        raise ValueError("separation undefined: need at least 2 clusters")
    delta = np.inf
    for a_idx in range(clusters.size):
        for b_idx in range(a_idx + 1, clusters.size):
            Ya = Y[:, labels == clusters[a_idx]]
            Yb = Y[:, labels == clusters[b_idx]]
            d2 = (
                (Ya * Ya).sum(axis=0)[:, None]
                + (Yb * Yb).sum(axis=0)[None, :]
                - 2.0 * Ya.T @ Yb
            )
            delta = min(delta, float(np.sqrt(max(d2.min(), 0.0))))
    occupied = np.unique(np.asarray(truth.triangle_of_point, dtype=np.int64))
    diam = 0.0
    for t in occupied:
        tri = model.triangles[int(t)]
        V = model.atoms[:, list(tri)]
        for i in range(3):
            for j in range(i + 1, 3):
                diam = max(diam, float(np.linalg.norm(V[:, i] - V[:, j])))
    return SeparationStats(
        min_cluster_separation=delta,
        max_triangle_diameter=diam,
        well_separated=delta > 2.0 * diam,
    )
