"""Simplex-coding loss, its gradient, and the unrolled accelerated projected-gradient encoder.

Given a dictionary ``A`` (columns are atoms) and a data point ``y``, the code of
``y`` is the minimizer over the probability simplex of

    0.5 * ||y - A x||^2  +  lam * sum_j x_j * ||y - a_j||^2

The encoder runs a fixed number of accelerated projected-gradient steps from a
zero start and records a tape so the training loop can backpropagate through
the whole unrolled computation.
"""

from dataclasses import dataclass

import numpy as np

from .simplex import project_simplex_batch, projection_vjp_batch

__all__ = [
    "EncoderParams",
    "EncoderTape",
    "atom_distances_sq",
    "loss",
    "loss_batch",
    "loss_grad_x",
    "default_step_size",
    "momentum_schedule",
    "encode",
    "encode_batch",
]

SIMPLEX_TOL = 1e-9  # membership tolerance used by the extended-value loss


@dataclass
class EncoderParams:
    """Hyperparameters of the unrolled encoder.

    ``step_size=None`` means automatic: 1 / sigma_max(A)^2, recomputed per call.
    ``recurrence`` selects the momentum schedule: "squared" is the standard
    accelerated-gradient recurrence; "printed" is a legacy variant without the
    square (kept behind this flag for comparison runs).
    """

    lam: float = 1.0
    n_steps: int = 15
    step_size: float | None = None
    learn_step_size: bool = False
    recurrence: str = "squared"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")
        self.n_steps = int(self.n_steps)
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.recurrence not in ("squared", "printed"):
            raise ValueError(f"unknown recurrence {self.recurrence!r}")


@dataclass
class EncoderTape:
    """Recorded state of one (batched) encoder forward pass.

    ``x_hist[t]`` is the iterate x^(t) for t = 0..T (x_hist[0] is the zero
    start), ``pre[t]`` the pre-projection vector of step t, and
    ``thresholds[t]`` the scalar shift applied by the projection at step t.
    The extrapolated iterates are recomputable from ``x_hist`` and ``gamma``.
    """

    x_hist: np.ndarray  # (T+1, m, B)
    pre: np.ndarray  # (T, m, B)
    thresholds: np.ndarray  # (T, B)
    gamma: np.ndarray  # (T,)
    step_size: float
    lam: float
    dim: int  # d of the data the tape was recorded for
    recurrence: str = "squared"

    @property
    def n_steps(self):
        return self.pre.shape[0]

    @property
    def n_atoms(self):
        return self.pre.shape[1]

    @property
    def batch(self):
        return self.pre.shape[2]

    def active_sets(self):
        """Boolean supports of x^(1)..x^(T), shape (T, m, B)."""
        return self.x_hist[1:] > 0.0

    def x_tilde(self, t):
        """Extrapolated iterate fed to gradient step ``t`` (same arithmetic as the forward pass)."""
        if t == 0:
            return np.zeros_like(self.x_hist[0])
        return self.x_hist[t] + self.gamma[t - 1] * (self.x_hist[t] - self.x_hist[t - 1])

    def near_boundary(self, tol=1e-6):
        """True if any coordinate of any iterate sits within ``tol`` of its activation threshold.

        Useful for excluding nondifferentiable configurations from gradient checks.
        """
        margins = self.pre - self.thresholds[:, None, :]
        return bool((np.abs(margins) < tol).any())

    def replay(self, atoms, y):
        """Re-run the forward pass from the recorded configuration; returns the final code.

        Identical inputs reproduce the recorded x^(T) bitwise.
        """
        atoms = np.asarray(atoms, dtype=np.float64)
        Y = np.asarray(y, dtype=np.float64)
        if Y.ndim == 1:
            Y = Y[:, None]
        params = EncoderParams(
            lam=self.lam,
            n_steps=self.n_steps,
            step_size=self.step_size,
            recurrence=self.recurrence,
        )
        codes, _ = encode_batch(atoms, Y, params, want_tape=False)
        return codes


def _as_dictionary(atoms):
    A = np.asarray(atoms, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError(f"dictionary must be a d x m matrix with d, m >= 1, got shape {A.shape}")
    if not np.isfinite(A).all():
        raise ValueError("dictionary contains non-finite entries")
    return A


def duplicate_atoms(atoms, tol=1e-12):
    """Index pairs (i, j), i < j, of atoms closer than ``tol`` in Euclidean norm."""
    A = _as_dictionary(atoms)
    m = A.shape[1]
    pairs = []
    for i in range(m):
        d = np.linalg.norm(A[:, i + 1 :] - A[:, i : i + 1], axis=0)
        for off in np.nonzero(d < tol)[0]:
            pairs.append((i, i + 1 + int(off)))
    return pairs


def atom_distances_sq(atoms, Y):
    """Squared distances ||y_i - a_j||^2 as an (m, B) array for Y of shape (d, B)."""
    A = np.asarray(atoms, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    gram = A.T @ Y
    w = (A * A).sum(axis=0)[:, None] + (Y * Y).sum(axis=0)[None, :] - 2.0 * gram
    return np.maximum(w, 0.0)


def loss(atoms, y, x, lam):
    """Reconstruction-plus-locality loss; +inf when ``x`` is off the simplex.

    Membership is checked to SIMPLEX_TOL; vectors failing it get the +inf
    sentinel of the extended-value definition rather than an error.
    """
    return float(loss_batch(atoms, np.asarray(y)[:, None], np.asarray(x)[:, None], lam)[0])


def loss_batch(atoms, Y, X, lam):
    """Per-column losses for codes X (m, B) against data Y (d, B)."""
    A = _as_dictionary(atoms)
    Y = np.asarray(Y, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if Y.shape[0] != A.shape[0]:
        raise ValueError(f"data dimension {Y.shape[0]} != dictionary dimension {A.shape[0]}")
    if X.shape[0] != A.shape[1]:
        raise ValueError(f"code length {X.shape[0]} != atom count {A.shape[1]}")
    if Y.shape[1] != X.shape[1]:
        raise ValueError(f"batch mismatch: {Y.shape[1]} data columns vs {X.shape[1]} codes")
    resid = Y - A @ X
    w = atom_distances_sq(A, Y)
    vals = 0.5 * (resid * resid).sum(axis=0) + lam * (X * w).sum(axis=0)
    off = (np.abs(X.sum(axis=0) - 1.0) > SIMPLEX_TOL) | (X.min(axis=0) < -SIMPLEX_TOL)
    return np.where(off, np.inf, vals)


def loss_grad_x(atoms, y, x, lam):
    """Gradient of the smooth loss in the code: A^T(Ax - y) + lam * dists.

    Evaluated as written whether or not ``x`` lies on the simplex.
    """
    A = _as_dictionary(atoms)
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if y.shape[0] != A.shape[0] or x.shape[0] != A.shape[1]:
        raise ValueError(
            f"dimension mismatch: dictionary {A.shape}, y {y.shape}, x {x.shape}"
        )
    w = atom_distances_sq(A, y[:, None])[:, 0]
    return A.T @ (A @ x - y) + lam * w


def default_step_size(atoms, tol=1e-8, max_iter=10_000):
    """Step size 1 / sigma_max(A)^2 via power iteration on A^T A.

    Converges to relative tolerance ``tol`` on the leading eigenvalue.
    """
    A = _as_dictionary(atoms)
    G = A.T @ A
    m = G.shape[0]
    v = np.random.default_rng(0).standard_normal(m)
    v /= np.linalg.norm(v)
    lam_prev = 0.0
    for _ in range(max_iter):
        Gv = G @ v
        norm = np.linalg.norm(Gv)
        if norm <= 1e-300:
            raise ValueError("dictionary is all zeros; step size undefined")
        v = Gv / norm
        lam_est = float(v @ (G @ v))
        if abs(lam_est - lam_prev) <= tol * max(abs(lam_est), 1e-300):
            break
        lam_prev = lam_est
    if lam_est <= 0:
        raise ValueError("dictionary is all zeros; step size undefined")
    return 1.0 / lam_est


def momentum_schedule(n_steps, recurrence="squared"):
    """Momentum sequences (eta, gamma) for ``n_steps`` unrolled iterations.

    eta[0] = 0 and eta[t+1] = (1 + sqrt(1 + 4 eta[t]^2)) / 2 in the standard
    "squared" form; gamma[t] = (eta[t] - 1) / eta[t+1].  The "printed" form
    drops the square inside the root (gamma then tends to 1/2 instead of 1).
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    eta = np.zeros(n_steps + 1)
    gamma = np.zeros(n_steps)
    for t in range(n_steps):
        if recurrence == "squared":
            eta[t + 1] = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * eta[t] ** 2))
        elif recurrence == "printed":
            eta[t + 1] = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * eta[t]))
        else:
            raise ValueError(f"unknown recurrence {recurrence!r}")
        gamma[t] = (eta[t] - 1.0) / eta[t + 1]
    return eta, gamma


def encode_batch(atoms, Y, params, want_tape=True):
    """Run the T-step unrolled encoder on every column of ``Y`` (shape (d, B)).

    Returns ``(codes, tape)`` with codes of shape (m, B); ``tape`` is None when
    ``want_tape`` is false (saves memory for encode-only sweeps).
    """
    A = _as_dictionary(atoms)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2:
        raise ValueError(f"expected data as a d x B matrix, got shape {Y.shape}")
    if Y.shape[0] != A.shape[0]:
        raise ValueError(f"data dimension {Y.shape[0]} != dictionary dimension {A.shape[0]}")
    if not np.isfinite(Y).all():
        raise ValueError("data contains non-finite entries")
    if not isinstance(params, EncoderParams):
        raise ValueError("params must be an EncoderParams instance")

    m, B = A.shape[1], Y.shape[1]
    T = params.n_steps
    alpha = params.step_size if params.step_size is not None else default_step_size(A)
    _, gamma = momentum_schedule(T, params.recurrence)

    G = A.T @ A
    AtY = A.T @ Y
    w = atom_distances_sq(A, Y)
    lam_w = params.lam * w

    x = np.zeros((m, B))
    x_tilde = np.zeros((m, B))
    if want_tape:
        x_hist = np.zeros((T + 1, m, B))
        pre_hist = np.empty((T, m, B))
        thr_hist = np.empty((T, B))

    for t in range(T):
        grad = G @ x_tilde - AtY + lam_w
        pre = x_tilde - alpha * grad
        x_next, shift = project_simplex_batch(pre)
        x_tilde = x_next + gamma[t] * (x_next - x)
        x = x_next
        if want_tape:
            x_hist[t + 1] = x_next
            pre_hist[t] = pre
            thr_hist[t] = -shift  # out = relu(pre - threshold)

    tape = None
    if want_tape:
        tape = EncoderTape(
            x_hist=x_hist,
            pre=pre_hist,
            thresholds=thr_hist,
            gamma=gamma,
            step_size=float(alpha),
            lam=float(params.lam),
            dim=A.shape[0],
            recurrence=params.recurrence,
        )
    return x, tape


def encode(atoms, y, params, want_tape=True):
    """Encode a single data point; returns ``(code, tape)``."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError(f"expected a 1-d data point, got shape {y.shape}")
    codes, tape = encode_batch(atoms, y[:, None], params, want_tape=want_tape)
    return codes[:, 0], tape
