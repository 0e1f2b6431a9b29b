"""Exact Euclidean projection onto the probability simplex, and its vector-Jacobian product.

The projection is the nonlinearity of the unrolled encoder: it has the form
``relu(v + b * ones)`` for a data-dependent scalar shift ``b`` found by the
classic sort-and-threshold rule.
"""

import numpy as np

__all__ = [
    "project_simplex",
    "project_simplex_batch",
    "projection_vjp",
    "projection_vjp_batch",
]


def _validate(v, name):
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] == 0:
        raise ValueError(f"{name} must have at least one entry")
    if not np.isfinite(v).all():
        raise ValueError(f"{name} contains non-finite entries")
    return v


def project_simplex_batch(v):
    """Project each column of ``v`` (shape (m, B)) onto the probability simplex.

    Returns ``(out, shift)`` where ``out[:, i] = relu(v[:, i] + shift[i])`` and
    ``shift[i]`` is the scalar that makes the positive part sum to one.  The
    sort is stable so equal entries keep their index order.
    """
    v = _validate(v, "v")
    if v.ndim != 2:
        raise ValueError(f"expected a 2-d array of column vectors, got shape {v.shape}")
    m = v.shape[0]
    # Sort descending; stable sort on -v breaks ties by index.
    u = -np.sort(-v, axis=0, kind="stable")
    css = np.cumsum(u, axis=0) - 1.0
    ind = np.arange(1, m + 1, dtype=np.float64)[:, None]
    rho = np.count_nonzero(u - css / ind > 0.0, axis=0)  # >= 1 always
    tau = css[rho - 1, np.arange(v.shape[1])] / rho
    out = np.maximum(v - tau[None, :], 0.0)
    return out, -tau


def project_simplex(v):
    """Euclidean projection of a vector onto {x : x >= 0, sum(x) = 1}.

    Exact sort-based algorithm; idempotent up to roundoff and nonexpansive.
    """
    v = _validate(v, "v")
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {v.shape}")
    out, _ = project_simplex_batch(v[:, None])
    return out[:, 0]


def projection_vjp_batch(active, g):
    """Apply the projection's (transposed) Jacobian to each column of ``g``.

    ``active`` is the boolean support of the projection output.  On the active
    set the Jacobian is centering (I - 11^T/|active|); rows and columns off the
    support are zero.  The Jacobian is symmetric, so this is both J g and J^T g.
    """
    active = np.asarray(active, dtype=bool)
    g = np.asarray(g, dtype=np.float64)
    if active.shape != g.shape:
        raise ValueError(f"active set shape {active.shape} != cotangent shape {g.shape}")
    counts = active.sum(axis=0)
    counts = np.maximum(counts, 1)  # projection output always has support >= 1
    sums = np.where(active, g, 0.0).sum(axis=0)
    return np.where(active, g - sums / counts, 0.0)


def projection_vjp(v, g):
    """Vector-Jacobian product of ``project_simplex`` at ``v`` applied to ``g``.

    At points where an output coordinate is exactly zero the active set
    {i : project_simplex(v)_i > 0} selects one valid generalized Jacobian,
    consistent with how relu-style nonlinearities are treated in backprop.
    """
    v = _validate(v, "v")
    g = _validate(g, "g")
    if v.shape != g.shape:
        raise ValueError(f"shape mismatch: v {v.shape} vs g {g.shape}")
    p = project_simplex(v)
    return projection_vjp_batch((p > 0.0)[:, None], g[:, None])[:, 0]
