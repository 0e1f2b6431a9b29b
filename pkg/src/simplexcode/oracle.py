"""Independent reference implementations used by tests and the `verify` command.

Everything here favors being obviously correct over being fast, and none of it
calls the fast-path code it is used to check: the projection is recomputed by
bisection rather than sorting, the inner solver is plain monotone projected
gradient descent, the embedding builds the full bipartite Laplacian, and the
constrained-program solver enumerates supports with closed-form sub-solves.
"""

from collections import namedtuple
from itertools import combinations

import numpy as np

__all__ = [
    "InfeasibleProgram",
    "project_simplex_bisection",
    "oracle_encode",
    "finite_diff_grad",
    "full_bipartite_laplacian",
    "naive_embedding",
    "delaunay_brute_force",
    "program13_support_values",
    "solve_program_13",
    "theorem2_deltas",
]


class InfeasibleProgram(ValueError):
    """No simplex code reconstructs the point within the required radius."""


# ---------------------------------------------------------------------------
# projection and inner solver
# ---------------------------------------------------------------------------


def project_simplex_bisection(v, iters=200):
    """Simplex projection by bisection on the scalar shift b in relu(v + b)."""
    v = np.asarray(v, dtype=np.float64)
    lo = -float(v.max())  # sum of positive part = 0 here
    hi = 1.0 - float(v.min())  # sum >= 1 here
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.maximum(v + mid, 0.0).sum() < 1.0:
            lo = mid
        else:
            hi = mid
    return np.maximum(v + hi, 0.0)


def _kkt_residual(g, x):
    active = x > 0.0
    mu = g[active].mean()
    r = np.where(active, g - mu, np.minimum(g - mu, 0.0))
    return float(np.linalg.norm(r))


def oracle_encode(atoms, y, lam, tol=1e-10, max_iter=1_000_000):
    """High-precision minimizer of the coding loss by plain projected gradient descent.

    Monotone by construction (step 1/L).  Stops once the per-step loss decrease
    falls below tol * max(1, |loss|) and the simplex-tangent projected gradient
    norm falls below tol.
    """
    A = np.asarray(atoms, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if tol <= 0:
        raise ValueError("tol must be positive")
    G = A.T @ A
    lam_w = lam * ((y[:, None] - A) ** 2).sum(axis=0)
    Aty = A.T @ y
    L = float(np.linalg.eigvalsh(G).max())
    if L <= 0:
        raise ValueError("dictionary is all zeros")
    step = 1.0 / L
    yy = 0.5 * float(y @ y)

    def f(x):
        return 0.5 * float(x @ (G @ x)) - float(Aty @ x) + yy + float(lam_w @ x)

    x = project_simplex_bisection(np.zeros(A.shape[1]))
    prev = f(x)
    for _ in range(max_iter):
        g = G @ x - Aty + lam_w
        x = project_simplex_bisection(x - step * g)
        cur = f(x)
        if prev - cur < tol * max(1.0, abs(cur)):
            g = G @ x - Aty + lam_w
            if _kkt_residual(g, x) < tol:
                return x
        prev = cur
    raise RuntimeError(f"projected gradient did not meet tol={tol} within {max_iter} iterations")


def finite_diff_grad(f, x, h):
    """Central finite-difference gradient of a scalar function, any array shape."""
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp = x.copy()
        xm = x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2.0 * h)
    return g


# ---------------------------------------------------------------------------
# embedding by explicit elimination
# ---------------------------------------------------------------------------

NaiveEmbedding = namedtuple("NaiveEmbedding", ["q_atoms", "q_data", "eigenvalues"])


def full_bipartite_laplacian(X):
    """Dense Laplacian of the (n + m)-vertex point/atom graph, data block first."""
    X = np.asarray(X, dtype=np.float64)
    m, n = X.shape
    if n + m > 20_000:
        raise MemoryError(f"refusing to build a dense ({n + m})^2 Laplacian")
    L = np.zeros((n + m, n + m))
    L[:n, :n] = np.diag(X.sum(axis=0))
    L[n:, n:] = np.diag(X.sum(axis=1))
    L[:n, n:] = -X.T
    L[n:, :n] = -X
    return L


def naive_embedding(X, k):
    """Spectral embedding via the assembled dense Laplacian and explicit block elimination."""
    X = np.asarray(X, dtype=np.float64)
    m, n = X.shape
    if k > m:
        raise ValueError(f"requested k={k} eigenvectors but only {m} atoms")
    L = full_bipartite_laplacian(X)
    Lyy = L[:n, :n]
    Lya = L[:n, n:]
    Lay = L[n:, :n]
    Laa = L[n:, n:]
    dy = np.diag(Lyy)
    if (dy <= 0).any():
        raise ValueError("data vertex with nonpositive degree")
    schur = Laa - Lay @ np.diag(1.0 / dy) @ Lya
    schur = 0.5 * (schur + schur.T)
    vals, vecs = np.linalg.eigh(schur)
    vecs = vecs[:, :k].copy()
    for j in range(k):
        i = int(np.argmax(np.abs(vecs[:, j])))
        if vecs[i, j] < 0:
            vecs[:, j] = -vecs[:, j]
    q_atoms = vecs.T
    # harmonic at the data vertices: average of atom embeddings, degree-weighted
    q_data = (q_atoms @ X) / dy[None, :]
    return NaiveEmbedding(q_atoms=q_atoms, q_data=q_data, eigenvalues=vals[:k].copy())


# ---------------------------------------------------------------------------
# brute-force Delaunay
# ---------------------------------------------------------------------------


def delaunay_brute_force(points):
    """All triangles whose circumcircle strictly contains no other point; O(m^4).

    Intended for generic inputs (no co-circular quadruples).  The inner
    containment scan is vectorized over candidate points so 200-instance
    property sweeps stay cheap.
    """
    P = np.asarray(points, dtype=np.float64)
    m = P.shape[1]
    out = []
    for (i, j, k) in combinations(range(m), 3):
        a, b, c = P[:, i], P[:, j], P[:, k]
        orient = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if orient == 0.0:
            continue
        if orient < 0:
            b, c = c, b
        ua, ub, uc = a[:, None] - P, b[:, None] - P, c[:, None] - P
        za, zb, zc = (ua * ua).sum(axis=0), (ub * ub).sum(axis=0), (uc * uc).sum(axis=0)
        det = (
            ua[0] * (ub[1] * zc - zb * uc[1])
            - ua[1] * (ub[0] * zc - zb * uc[0])
            + za * (ub[0] * uc[1] - ub[1] * uc[0])
        )
        det[[i, j, k]] = 0.0
        if det.max() <= 0.0:
            out.append(tuple(sorted((i, j, k))))
    return sorted(out)


# ---------------------------------------------------------------------------
# the support-constrained linear program over the simplex-ball intersection
# ---------------------------------------------------------------------------


def _pair_min_recon(d0, d1, y):
    # min_t ||t d0 + (1-t) d1 - y|| over t in [0, 1]
    u = d0 - d1
    v = y - d1
    uu = float(u @ u)
    t = 0.0 if uu == 0 else float(u @ v) / uu
    t = min(max(t, 0.0), 1.0)
    return float(np.linalg.norm(t * u - v)), t


def _pair_value(d0, d1, y, c0, c1, epsilon):
    # minimize c0 t + c1 (1-t) subject to ||t d0 + (1-t) d1 - y|| <= epsilon, t in [0,1]
    u = d0 - d1
    v = y - d1
    uu = float(u @ u)
    if uu == 0:
        r = float(np.linalg.norm(v))
        if r > epsilon:
            return None
        t = 0.0 if c1 <= c0 else 1.0
        return (c0 * t + c1 * (1 - t), t)
    # ||t u - v||^2 <= eps^2  <=>  uu t^2 - 2 (u.v) t + v.v - eps^2 <= 0
    bq = float(u @ v)
    disc = bq * bq - uu * (float(v @ v) - epsilon * epsilon)
    if disc < 0:
        return None
    root = np.sqrt(disc)
    t_lo = max((bq - root) / uu, 0.0)
    t_hi = min((bq + root) / uu, 1.0)
    if t_lo > t_hi:
        return None
    t = t_lo if c0 >= c1 else t_hi  # linear objective: best at an interval end
    return (c0 * t + c1 * (1 - t), t)


def _triple_lagrange(Dsub, y, c, epsilon):
    # interior-of-face candidate with the ball constraint active
    d0, d1, d2 = Dsub[:, 0], Dsub[:, 1], Dsub[:, 2]
    Dt = np.stack([d0 - d2, d1 - d2], axis=1)  # (d, 2)
    yt = y - d2
    g = np.array([c[0] - c[2], c[1] - c[2]])
    M = Dt.T @ Dt
    if abs(np.linalg.det(M)) < 1e-14 * max(float(np.trace(M)) ** 2, 1e-300):
        return None  # collinear atoms; edge candidates cover this
    Minv = np.linalg.inv(M)
    # residual splits into a fixed out-of-column-space part and s * h along the gradient
    t_ls = Minv @ (Dt.T @ yt)
    r_perp = Dt @ t_ls - yt
    rp2 = float(r_perp @ r_perp)
    if rp2 > epsilon * epsilon:
        return None
    h = Dt @ (Minv @ g)
    h2 = float(h @ h)
    if h2 <= 0:
        return None  # objective constant on the face
    s = -np.sqrt(max(epsilon * epsilon - rp2, 0.0) / h2)  # multiplier sign fixes the root
    t = t_ls + s * (Minv @ g)
    x0, x1 = float(t[0]), float(t[1])
    x2 = 1.0 - x0 - x1
    if min(x0, x1, x2) < -1e-12:
        return None
    val = c[0] * x0 + c[1] * x1 + c[2] * x2
    return (val, np.array([x0, x1, x2]))


def _triple_min_recon(Dsub, y):
    d0, d1, d2 = Dsub[:, 0], Dsub[:, 1], Dsub[:, 2]
    Dt = np.stack([d0 - d2, d1 - d2], axis=1)
    yt = y - d2
    M = Dt.T @ Dt
    if abs(np.linalg.det(M)) > 1e-14 * max(float(np.trace(M)) ** 2, 1e-300):
        t = np.linalg.solve(M, Dt.T @ yt)
        x = np.array([t[0], t[1], 1.0 - t[0] - t[1]])
        if x.min() >= -1e-12:
            return float(np.linalg.norm(Dt @ t - yt)), np.maximum(x, 0.0)
    best = None
    for (i, j) in ((0, 1), (0, 2), (1, 2)):
        r, t = _pair_min_recon(Dsub[:, i], Dsub[:, j], y)
        if best is None or r < best[0]:
            x = np.zeros(3)
            x[i], x[j] = t, 1.0 - t
            best = (r, x)
    return best


def _generic_support_solve(Dsub, y, c, epsilon, tol=1e-8):
    """Minimize c.x over the support simplex inside the reconstruction ball.

    Faces-of-the-simplex KKT enumeration nested in a bisection on the ball
    multiplier.  Only used for supports larger than 3 (data dimension > 2).
    """
    s = Dsub.shape[1]
    G = Dsub.T @ Dsub
    reg = 1e-12 * (1.0 + float(np.abs(G).max()))

    def inner(mu):
        best = None
        for size in range(1, s + 1):
            for face in combinations(range(s), size):
                idx = list(face)
                H = mu * G[np.ix_(idx, idx)] + reg * np.eye(size)
                K = np.zeros((size + 1, size + 1))
                K[:size, :size] = H
                K[:size, size] = 1.0
                K[size, :size] = 1.0
                rhs = np.zeros(size + 1)
                rhs[:size] = mu * (Dsub[:, idx].T @ y) - c[idx]
                rhs[size] = 1.0
                try:
                    sol = np.linalg.solve(K, rhs)
                except np.linalg.LinAlgError:
                    continue
                xf = sol[:size]
                if xf.min() < -1e-10:
                    continue
                x = np.zeros(s)
                x[idx] = np.maximum(xf, 0.0)
                x /= x.sum()
                val = float(c @ x) + 0.5 * mu * float(np.sum((Dsub @ x - y) ** 2))
                if best is None or val < best[0]:
                    best = (val, x)
        return best[1]

    def recon(x):
        return float(np.linalg.norm(Dsub @ x - y))

    x0 = inner(0.0)
    if recon(x0) <= epsilon:
        return (float(c @ x0), x0)
    mu_hi = 1.0
    for _ in range(80):
        if recon(inner(mu_hi)) <= epsilon:
            break
        mu_hi *= 2.0
    else:
        return None
    mu_lo = 0.0
    for _ in range(100):
        mid = 0.5 * (mu_lo + mu_hi)
        if recon(inner(mid)) <= epsilon:
            mu_hi = mid
        else:
            mu_lo = mid
    x = inner(mu_hi)
    if recon(x) > epsilon * (1 + 1e-9) + 1e-12:
        return None
    return (float(c @ x), x)


def program13_support_values(D, y, epsilon):
    """Optimal value of the distance-weighted objective for every support of size <= d+1.

    Supports larger than d+1 are redundant: sliding along a reconstruction-null
    direction of the support reduces it without changing feasibility or
    increasing the objective.  Returns a list of (support, value, x) with
    value None when the support cannot reconstruct y within epsilon.
    """
    D = np.asarray(D, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d, m_total = D.shape
    if m_total > 12:
        raise ValueError("support enumeration limited to at most 12 atoms")
    c = ((D - y[:, None]) ** 2).sum(axis=0)
    max_size = min(d + 1, m_total)
    records = []
    for size in range(1, max_size + 1):
        for support in combinations(range(m_total), size):
            idx = list(support)
            Dsub = D[:, idx]
            if size == 1:
                r = float(np.linalg.norm(Dsub[:, 0] - y))
                if r <= epsilon:
                    x = np.zeros(m_total)
                    x[idx[0]] = 1.0
                    records.append((support, float(c[idx[0]]), x))
                else:
                    records.append((support, None, None))
            elif size == 2:
                res = _pair_value(Dsub[:, 0], Dsub[:, 1], y, c[idx[0]], c[idx[1]], epsilon)
                if res is None:
                    records.append((support, None, None))
                else:
                    val, t = res
                    x = np.zeros(m_total)
                    x[idx[0]], x[idx[1]] = t, 1.0 - t
                    records.append((support, float(val), x))
            elif size == 3 and d >= 2:
                # complete set of stationary candidates: vertices, edges, the
                # active-ball interior point, and the constant-objective case
                candidates = []
                for v in range(3):
                    if float(np.linalg.norm(Dsub[:, v] - y)) <= epsilon:
                        xloc = np.zeros(3)
                        xloc[v] = 1.0
                        candidates.append((float(c[idx[v]]), xloc))
                for (i, j) in ((0, 1), (0, 2), (1, 2)):
                    res = _pair_value(
                        Dsub[:, i], Dsub[:, j], y, c[idx[i]], c[idx[j]], epsilon
                    )
                    if res is not None:
                        val, t = res
                        xloc = np.zeros(3)
                        xloc[i], xloc[j] = t, 1.0 - t
                        candidates.append((float(val), xloc))
                lag = _triple_lagrange(Dsub, y, c[idx], epsilon)
                if lag is not None:
                    candidates.append(lag)
                if np.ptp(c[idx]) < 1e-15 * max(1.0, abs(c[idx[0]])):
                    r, xloc = _triple_min_recon(Dsub, y)
                    if r <= epsilon:
                        candidates.append((float(c[idx] @ xloc), xloc))
                if candidates:
                    val, xloc = min(candidates, key=lambda t: t[0])
                    x = np.zeros(m_total)
                    x[idx] = xloc
                    records.append((support, float(val), x))
                else:
                    records.append((support, None, None))
            else:
                res = _generic_support_solve(Dsub, y, c[idx], epsilon)
                if res is None:
                    records.append((support, None, None))
                else:
                    val, xloc = res
                    x = np.zeros(m_total)
                    x[idx] = xloc
                    records.append((support, float(val), x))
    return records


def solve_program_13(D, y, epsilon, part_sizes):
    """Global minimizer of sum_j x_j ||y - d_j||^2 over simplex codes with ||y - Dx|| <= epsilon.

    ``part_sizes = (m, p)`` declares how the dictionary splits into the home
    and foreign parts; it is validated against D.  Raises InfeasibleProgram
    when even the best-reconstructing simplex code misses the ball.
    """
    D = np.asarray(D, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    m, p = part_sizes
    if m + p != D.shape[1] or m < 0 or p < 0:
        raise ValueError(f"part sizes {part_sizes} do not match {D.shape[1]} dictionary columns")
    records = program13_support_values(D, y, epsilon)
    feasible = [(sup, val, x) for (sup, val, x) in records if val is not None]
    if not feasible:
        # distinguish "no support reconstructs within epsilon" explicitly
        raise InfeasibleProgram(
            f"no simplex code reconstructs y within epsilon={epsilon:.6g}"
        )
    best_val = min(val for (_, val, _) in feasible)
    tol = 1e-9 * max(1.0, abs(best_val))
    for sup, val, x in feasible:  # enumeration order: smallest support first, then lexicographic
        if val <= best_val + tol:
            return x
    raise AssertionError("unreachable")


def theorem2_deltas(home_atoms, foreign_atoms, y):
    """Max squared distance to the home atoms and min squared distance to the foreign ones."""
    A = np.asarray(home_atoms, dtype=np.float64)
    B = np.asarray(foreign_atoms, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if A.ndim != 2 or A.shape[1] < 1 or B.ndim != 2 or B.shape[1] < 1:
        raise ValueError("both atom sets must be nonempty d x k matrices")
    d1 = float(((A - y[:, None]) ** 2).sum(axis=0).max())
    d2 = float(((B - y[:, None]) ** 2).sum(axis=0).min())
    return d1, d2
