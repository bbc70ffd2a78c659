"""Posterior clustering analytics and parameter summaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from .gibbs.state import PosteriorDraws

PARAMETERS = ("mu", "gamma", "alpha", "beta", "p_kk")


@dataclass(frozen=True)
class Partition:
    """Cluster labels of ``N`` items, canonicalized to 0..M-1 in order of first appearance."""

    labels: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.labels)
        if raw.ndim != 1 or raw.size == 0:
            raise ValueError("a partition needs a non-empty 1-D label vector")
        _, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
        rank = np.empty(first.size, dtype=np.int64)
        rank[np.argsort(first, kind="stable")] = np.arange(first.size)
        object.__setattr__(self, "labels", rank[inverse.ravel()])

    @property
    def N(self) -> int:
        return self.labels.size

    @property
    def M(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.M)


@dataclass
class CountPosterior:
    """Empirical law of the occupied-cluster count; ``pmf[h - 1] = P(M = h)``."""

    pmf: np.ndarray
    map: int

    @property
    def support(self) -> np.ndarray:
        return np.arange(1, self.pmf.size + 1)


def cluster_count_posterior(draws: PosteriorDraws, k: int) -> CountPosterior:
    """Posterior pmf of the occupied-cluster count in regime ``k``; MAP ties go to the smaller count."""
    if len(draws) == 0:
        raise ValueError("no posterior draws")
    counts = draws.cluster_counts[:, k]
    pmf = np.bincount(counts, minlength=draws.N + 1)[1:].astype(float) / counts.size
    return CountPosterior(pmf=pmf, map=int(np.argmax(pmf)) + 1)


def entropy(p, base: float = 2.0) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return max(float(-(p * np.log(p)).sum() / np.log(base)), 0.0)


def coclustering_matrix(draws: PosteriorDraws, k: int, M: int | None = None) -> np.ndarray:
    """Fraction of sweeps in which units ``i`` and ``j`` share a component in regime ``k``.

    With ``M`` given, only sweeps with exactly ``M`` occupied components count.
    """
    D = draws.D[:, :, k]
    if M is not None:
        sel = draws.cluster_counts[:, k] == M
        if not sel.any():
            available = sorted(set(draws.cluster_counts[:, k].tolist()))
            raise ValueError(f"no draws with {M} occupied clusters in regime {k}; available counts {available}")
        D = D[sel]
    if D.shape[0] == 0:
        raise ValueError("no posterior draws")
    return coclustering_from_allocations(D)


def coclustering_from_allocations(D: np.ndarray) -> np.ndarray:
    """(S, N) allocation draws to the N x N co-clustering matrix."""
    D = np.asarray(D)
    S, N = D.shape
    out = np.zeros((N, N))
    for row in D:
        out += row[:, None] == row[None, :]
    return out / S


def point_partition(coclust: np.ndarray, M: int) -> Partition:
    """Average-linkage cut of the dissimilarity ``1 - coclust`` into at most ``M`` clusters."""
    C = np.asarray(coclust, dtype=float)
    N = C.shape[0]
    if C.shape != (N, N):
        raise ValueError("co-clustering matrix must be square")
    if not 1 <= M <= N:
        raise ValueError(f"M must lie in [1, {N}], got {M}")
    if N == 1:
        return Partition(np.zeros(1, dtype=np.int64))
    dist = 1.0 - 0.5 * (C + C.T)
    np.fill_diagonal(dist, 0.0)
    Z = linkage(squareform(np.clip(dist, 0.0, None), checks=False), method="average")
    return Partition(fcluster(Z, t=M, criterion="maxclust"))


def spectral_reorder(coclust: np.ndarray, decimals: int = 8) -> np.ndarray:
    """Permutation grouping similar units, from the Laplacian of the similarity matrix.

    Units are sorted by the Fiedler vector of the unnormalized Laplacian,
    with the following eigenvectors as secondary keys and the unit index as
    the final tie-break. A similarity with no structure (every non-trivial
    eigenvalue equal) returns the identity.
    """
    W = 0.5 * (np.asarray(coclust, dtype=float) + np.asarray(coclust, dtype=float).T)
    N = W.shape[0]
    if N < 3:
        return np.arange(N)
    W = W.copy()
    np.fill_diagonal(W, 0.0)
    L = np.diag(W.sum(axis=1)) - W
    # lift the constant eigenvector above the rest of the spectrum
    shift = 2.0 * max(np.abs(L).sum(axis=1).max(), 1.0)
    vals, vecs = np.linalg.eigh(L + shift * np.ones((N, N)) / N)
    nontrivial = vals[:-1]
    tol = 1e-9 * max(1.0, np.abs(vals).max())
    if nontrivial.max() - nontrivial.min() <= tol:
        return np.arange(N)
    keys = []
    for j in range(min(3, N - 1)):
        v = vecs[:, j]
        nz = np.flatnonzero(np.abs(v) > 1e-12)
        if nz.size and v[nz[0]] > 0:
            v = -v
        keys.append(np.round(v, decimals))
    # np.lexsort sorts by the last key first
    return np.lexsort([np.arange(N)] + keys[::-1])


def variation_of_information(p1, p2) -> tuple[float, float]:
    """Variation of information in bits and its value divided by ``log2(N)``."""
    a, b = _as_partition(p1), _as_partition(p2)
    if a.N != b.N:
        raise ValueError(f"partitions have different sizes {a.N} and {b.N}")
    N = a.N
    if N < 2:
        raise ValueError("normalized variation of information needs N >= 2")
    joint = cross_counts(a, b) / N
    h1, h2, h12 = entropy(joint.sum(axis=1)), entropy(joint.sum(axis=0)), entropy(joint.ravel())
    vi = max(2.0 * h12 - h1 - h2, 0.0)
    return vi, vi / np.log2(N)


def _as_partition(p) -> Partition:
    return p if isinstance(p, Partition) else Partition(np.asarray(p))


def cross_counts(p1: Partition, p2: Partition) -> np.ndarray:
    out = np.zeros((p1.M, p2.M), dtype=np.int64)
    np.add.at(out, (p1.labels, p2.labels), 1)
    return out


def size_order(p: Partition) -> np.ndarray:
    """Cluster indices by decreasing size, ties by first appearance."""
    return np.argsort(-p.sizes, kind="stable")


def cross_tab(p1, p2) -> np.ndarray:
    """Counts of items shared by each pair of clusters, both sides ordered by decreasing size."""
    a, b = _as_partition(p1), _as_partition(p2)
    if a.N != b.N:
        raise ValueError(f"partitions have different sizes {a.N} and {b.N}")
    return cross_counts(a, b)[np.ix_(size_order(a), size_order(b))]


@dataclass
class ParameterSummary:
    """Posterior means and equal-tailed intervals; each entry is (N, K)."""

    mean: dict
    lower: dict
    upper: dict
    level: float

    def rows(self):
        """``(parameter, unit, regime, mean, lower, upper)`` tuples with 0-based unit and regime."""
        for name in self.mean:
            N, K = self.mean[name].shape
            for i in range(N):
                for k in range(K):
                    yield name, i, k, self.mean[name][i, k], self.lower[name][i, k], self.upper[name][i, k]


def summarize_parameters(draws: PosteriorDraws, level: float = 0.9) -> ParameterSummary:
    """Posterior mean and central ``level`` interval of every unit parameter."""
    if len(draws) == 0:
        raise ValueError("no posterior draws")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    q = (1.0 - level) / 2.0
    mean, lower, upper = {}, {}, {}
    for name in PARAMETERS:
        x = draws.parameter(name)
        mean[name] = x.mean(axis=0)
        lower[name], upper[name] = np.quantile(x, [q, 1.0 - q], axis=0)
    return ParameterSummary(mean=mean, lower=lower, upper=upper, level=level)
