"""Bipartite similarity graph, reduced-Laplacian spectral embedding, k-means, accuracy.

The code matrix X (m x n, columns on the simplex) defines a bipartite graph on
n data points and m atoms with edge weight X[j, i] between point i and atom j.
Eliminating the data vertices leaves an m x m atom graph with adjacency X X^T,
so the embedding only ever eigensolves an m x m matrix; data embeddings are
recovered harmonically as Q_Y = Q_A X.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = [
    "ReducedGraph",
    "Embedding",
    "validate_codes",
    "reduced_adjacency",
    "schur_laplacian",
    "spectral_embed",
    "harmonic_extend",
    "kmeans",
    "clustering_accuracy",
    "cluster_pipeline",
]

DEGREE_TOL = 1e-12  # atoms with degree below this are dropped from the eigenproblem


@dataclass
class ReducedGraph:
    adjacency: np.ndarray  # (m, m), symmetric PSD: X X^T
    atom_degrees: np.ndarray  # (m,), row sums of X


@dataclass
class Embedding:
    q_atoms: np.ndarray  # (k, m); zero columns for dropped atoms
    q_data: np.ndarray  # (k, n) = q_atoms @ X
    eigenvalues: np.ndarray  # (k,) ascending
    kept_atoms: np.ndarray  # (m,) bool, False for zero-degree atoms


def validate_codes(X, atol=1e-9):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"codes must be an m x n matrix, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("codes contain non-finite entries")
    if X.min() < -atol:
        raise ValueError(f"codes contain negative entries below tolerance: min {X.min():.3g}")
    colsums = X.sum(axis=0)
    bad = np.abs(colsums - 1.0) > atol
    if bad.any():
        i = int(np.argmax(bad))
        raise ValueError(f"code column {i} sums to {colsums[i]:.12g}, expected 1")
    return X


def reduced_adjacency(X):
    """Atom-graph adjacency X X^T and atom degrees (row sums of X)."""
    X = validate_codes(X)
    W = X @ X.T
    W = 0.5 * (W + W.T)
    return ReducedGraph(adjacency=W, atom_degrees=X.sum(axis=1))


def schur_laplacian(graph):
    """Laplacian of the reduced atom graph: diag(degrees) - X X^T.

    Equals the Schur complement of the full bipartite Laplacian after
    eliminating the data vertices (whose degrees are identically one).
    """
    if not isinstance(graph, ReducedGraph):
        raise ValueError("expected a ReducedGraph")
    return np.diag(graph.atom_degrees) - graph.adjacency


def _fix_signs(vecs):
    # one sign convention per eigenvector: largest-magnitude entry positive
    for j in range(vecs.shape[1]):
        i = int(np.argmax(np.abs(vecs[:, j])))
        if vecs[i, j] < 0:
            vecs[:, j] = -vecs[:, j]
    return vecs


def spectral_embed(X, k, mode="quadratic"):
    """Embed atoms (and harmonically, data points) with the k lowest reduced-Laplacian eigenvectors.

    ``mode="quadratic"`` eigensolves the reduced Laplacian itself;
    ``mode="normalized"`` eigensolves the symmetrically degree-normalized
    variant.  Zero-degree atoms are dropped from the eigenproblem and embedded
    at the origin.  Eigenvectors are ordered by ascending eigenvalue and
    sign-fixed so the largest-magnitude entry is positive.
    """
    X = validate_codes(X)
    if mode not in ("quadratic", "normalized"):
        raise ValueError(f"unknown embedding mode {mode!r}")
    m, n = X.shape
    degrees = X.sum(axis=1)
    kept = degrees > DEGREE_TOL
    m_kept = int(kept.sum())
    if k > m_kept:
        raise ValueError(f"requested k={k} eigenvectors but only {m_kept} usable atoms")
    Xk = X[kept]
    W = Xk @ Xk.T
    W = 0.5 * (W + W.T)
    deg = degrees[kept]
    L = np.diag(deg) - W
    if mode == "normalized":
        inv_sqrt = 1.0 / np.sqrt(deg)
        L = inv_sqrt[:, None] * L * inv_sqrt[None, :]
        L = 0.5 * (L + L.T)
    vals, vecs = np.linalg.eigh(L)
    vecs = _fix_signs(vecs[:, :k].copy())
    q_atoms = np.zeros((k, m))
    q_atoms[:, kept] = vecs.T
    q_data = q_atoms @ X
    return Embedding(
        q_atoms=q_atoms,
        q_data=q_data,
        eigenvalues=vals[:k].copy(),
        kept_atoms=kept,
    )


def harmonic_extend(q_atoms, X):
    """Data embeddings Q_A @ X; each data point lands in the hull of its atoms' embeddings."""
    q_atoms = np.asarray(q_atoms, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if q_atoms.ndim != 2 or q_atoms.shape[1] != X.shape[0]:
        raise ValueError(
            f"atom embedding has {q_atoms.shape[1] if q_atoms.ndim == 2 else '?'} columns, "
            f"codes have {X.shape[0]} rows"
        )
    return q_atoms @ X


def _pairwise_sq(P, centers, p_sq):
    # ||p - c||^2 via the expanded form; avoids an (N, k, dim) temporary
    d2 = p_sq[:, None] + (centers * centers).sum(axis=1)[None, :] - 2.0 * (P @ centers.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _kmeans_pp(P, k, rng, p_sq):
    # P: (N, dim). Standard D^2 seeding.
    N = P.shape[0]
    centers = np.empty((k, P.shape[1]))
    i0 = int(rng.integers(N))
    centers[0] = P[i0]
    d2 = _pairwise_sq(P, centers[:1], p_sq)[:, 0]
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j:] = P[rng.integers(N, size=k - j)]
            break
        probs = d2 / total
        i = int(rng.choice(N, p=probs))
        centers[j] = P[i]
        d2 = np.minimum(d2, _pairwise_sq(P, centers[j : j + 1], p_sq)[:, 0])
    return centers


def _lloyd(P, centers, max_iter, p_sq):
    N, k = P.shape[0], centers.shape[0]
    labels = np.full(N, -1, dtype=np.int64)
    for _ in range(max_iter):
        d2 = _pairwise_sq(P, centers, p_sq)
        new_labels = np.argmin(d2, axis=1)
        for c in range(k):
            if not (new_labels == c).any():
                # empty-cluster repair: hand it the point farthest from its centroid
                far = int(np.argmax(d2[np.arange(N), new_labels]))
                new_labels[far] = c
                centers[c] = P[far]
        if (new_labels == labels).all():
            break
        labels = new_labels
        for c in range(k):
            centers[c] = P[labels == c].mean(axis=0)
    d2 = _pairwise_sq(P, centers, p_sq)
    inertia = float(d2[np.arange(N), labels].sum())
    return labels, inertia


def kmeans(points, k_clusters, replicates=10, seed=0, max_iter=300):
    """Lloyd's algorithm with k-means++ seeding and independent restarts.

    ``points`` holds one point per column.  Returns the labeling with the
    lowest inertia across ``replicates`` seeded restarts; fully deterministic
    for a fixed seed.
    """
    P = np.asarray(points, dtype=np.float64).T
    N = P.shape[0]
    if not 1 <= k_clusters <= N:
        raise ValueError(f"need 1 <= k_clusters <= {N}, got {k_clusters}")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    p_sq = (P * P).sum(axis=1)
    best = None
    for child in np.random.SeedSequence(seed).spawn(replicates):
        rng = np.random.default_rng(child)
        centers = _kmeans_pp(P, k_clusters, rng, p_sq)
        labels, inertia = _lloyd(P, centers.copy(), max_iter, p_sq)
        if best is None or inertia < best[1]:
            best = (labels, inertia)
    return best


def clustering_accuracy(pred, truth):
    """Fraction of agreeing labels under the best cluster-label permutation.

    Solved as a linear assignment on the confusion matrix, so the score is
    invariant to relabeling either side.
    """
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError(f"label vectors must match in length, got {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("empty label vectors")
    k = int(max(pred.max(), truth.max())) + 1
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (pred, truth), 1)
    rows, cols = linear_sum_assignment(confusion, maximize=True)
    return float(confusion[rows, cols].sum()) / pred.size


def cluster_pipeline(
    X,
    k,
    replicates=10,
    seed=0,
    mode="quadratic",
    include_atoms=True,
    atoms=None,
):
    """Spectral embedding followed by k-means; returns (data_labels, atom_labels).

    By default atoms join the data points in the k-means stage.  Zero-degree
    atoms never reach the eigenproblem; they inherit the label of the nearest
    kept atom when ``atoms`` coordinates are supplied, otherwise the most
    common data label.
    """
    emb = spectral_embed(X, k, mode=mode)
    kept = emb.kept_atoms
    q_atoms_kept = emb.q_atoms[:, kept]
    if include_atoms:
        points = np.concatenate([emb.q_data, q_atoms_kept], axis=1)
    else:
        points = emb.q_data
    labels, _ = kmeans(points, k, replicates=replicates, seed=seed)
    n = emb.q_data.shape[1]
    data_labels = labels[:n]
    m = X.shape[0]
    atom_labels = np.full(m, -1, dtype=np.int64)
    if include_atoms:
        atom_labels[kept] = labels[n:]
    else:
        # label kept atoms by their nearest data embedding's cluster
        d2 = ((q_atoms_kept.T[:, None, :] - emb.q_data.T[None, :, :]) ** 2).sum(axis=2)
        atom_labels[kept] = data_labels[np.argmin(d2, axis=1)]
    if (~kept).any():
        if atoms is not None:
            A = np.asarray(atoms, dtype=np.float64)
            if A.shape[1] != m:
                raise ValueError(f"atom coordinates have {A.shape[1]} columns, codes have {m} rows")
            for j in np.nonzero(~kept)[0]:
                d2 = ((A[:, kept] - A[:, j : j + 1]) ** 2).sum(axis=0)
                nearest = np.nonzero(kept)[0][int(np.argmin(d2))]
                atom_labels[j] = atom_labels[nearest]
        else:
            counts = np.bincount(data_labels, minlength=k)
            atom_labels[~kept] = int(np.argmax(counts))
    return data_labels, atom_labels
