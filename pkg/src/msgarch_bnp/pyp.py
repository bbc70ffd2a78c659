"""Pitman-Yor process machinery: sticks, urn, base measure, cluster-count prior."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .model import Hyperparameters

MAX_TRUNCATION = 10_000


@dataclass
class ClusterPrior:
    N: int
    nu: float
    psi: float
    pmf: np.ndarray  # pmf[h - 1] = P(M = h)
    mean: float

    @property
    def support(self) -> np.ndarray:
        return np.arange(1, self.N + 1)


def stick_weights(V) -> tuple[np.ndarray, float]:
    """Stick-breaking weights ``W[l] = V[l] * prod_{j<l} (1 - V[j])``.

    Returns the weights and the residual mass ``1 - sum(W)``.
    """
    V = np.asarray(V, dtype=float)
    if np.any(V <= 0) or np.any(V >= 1):
        raise ValueError("stick proportions must lie in (0, 1)")
    remaining = np.concatenate([[1.0], np.cumprod(1.0 - V)])
    W = V * remaining[:-1]
    return W, float(remaining[-1])


def sample_stick_prior(l: np.ndarray | int, nu: float, psi: float, rng) -> np.ndarray:
    """Prior draw of the stick proportion(s) at 1-based position(s) ``l``."""
    l = np.asarray(l, dtype=float)
    return rng.beta(1.0 - nu, psi + nu * l)


def sample_base_measure(hp: Hyperparameters, rng, size: int | None = None) -> np.ndarray:
    """Atoms ``(mu*, gamma*, alpha*, beta*)`` from the base measure.

    Returns shape (4,) for ``size=None`` and (size, 4) otherwise.
    """
    n = 1 if size is None else size
    out = np.column_stack([
        rng.normal(hp.m_star, hp.s_star, n),
        rng.uniform(0.0, hp.a, n),
        rng.uniform(0.0, 1.0, n),
        rng.uniform(0.0, 1.0, n),
    ])
    return out[0] if size is None else out


def polya_urn_partition(N: int, nu: float, psi: float, rng) -> np.ndarray:
    """Exchangeable Pitman-Yor partition of ``N`` items by sequential seating.

    Existing cluster ``c`` is chosen with weight ``n_c - nu`` and a new one
    with weight ``psi + nu * M`` where ``M`` is the current cluster count.
    Labels are 0-based in order of first appearance.
    """
    if not 0 <= nu < 1 or not psi > -nu:
        raise ValueError(f"invalid Pitman-Yor parameters nu={nu}, psi={psi}")
    labels = np.zeros(N, dtype=np.int64)
    sizes = [1.0]
    u = rng.random(N)
    for i in range(1, N):
        M = len(sizes)
        # total weight of all seats is i - nu M + psi + nu M = i + psi
        target = u[i] * (i + psi)
        c, acc = M, 0.0
        for j in range(M):
            acc += sizes[j] - nu
            if target < acc:
                c = j
                break
        if c == M:
            sizes.append(1.0)
        else:
            sizes[c] += 1.0
        labels[i] = c
    return labels


def log_generalized_stirling(N: int, nu: float) -> np.ndarray:
    """``log S_nu(n, h)`` for ``1 <= h <= n <= N`` as an (N+1, N+1) table.

    Uses ``S(n+1, h) = S(n, h-1) + (n - h*nu) S(n, h)`` with ``S(1, 1) = 1``;
    entries outside the triangle are ``-inf``. With ``nu = 0`` these are the
    unsigned Stirling numbers of the first kind.
    """
    L = np.full((N + 1, N + 1), -np.inf)
    L[1, 1] = 0.0
    for n in range(1, N):
        h = np.arange(1, n + 2)
        a = L[n, h - 1]
        coef = n - h * nu
        with np.errstate(divide="ignore", invalid="ignore"):
            b = np.where(coef > 0, np.log(np.abs(coef)) + L[n, h], -np.inf)
        L[n + 1, 1:n + 2] = np.logaddexp(a, b)
    return L


def prior_cluster_pmf(N: int, nu: float, psi: float) -> ClusterPrior:
    """Prior law of the number of occupied clusters among ``N`` units."""
    if N < 1:
        raise ValueError("N must be at least 1")
    if not 0 <= nu < 1 or not psi > -nu:
        raise ValueError(f"invalid Pitman-Yor parameters nu={nu}, psi={psi}")
    h = np.arange(1, N + 1)
    logS = log_generalized_stirling(N, nu)[N, 1:]
    if nu == 0:
        logw = h * np.log(psi) + gammaln(psi) - gammaln(psi + N) + logS
    else:
        # prod_{j=1}^{h-1} (psi + j nu) written through gamma functions;
        # valid for psi > 0, otherwise fall back to the explicit product
        if psi > 0:
            log_rise = (h - 1) * np.log(nu) + gammaln(psi / nu + h) - gammaln(psi / nu + 1)
        else:
            terms = np.log(psi + nu * np.arange(1, N))
            log_rise = np.concatenate([[0.0], np.cumsum(terms)])
        logw = log_rise + gammaln(psi + 1) - gammaln(psi + N) + logS
    pmf = np.exp(logw)
    return ClusterPrior(N=N, nu=nu, psi=psi, pmf=pmf, mean=prior_cluster_mean(N, nu, psi))


def prior_cluster_mean(N: int, nu: float, psi: float) -> float:
    """Prior expected number of occupied clusters among ``N`` units."""
    if nu == 0:
        return float(np.sum(psi / (psi + np.arange(N))))
    log_ratio = gammaln(psi + nu + N) + gammaln(psi + 1) - gammaln(psi + nu) - gammaln(psi + N)
    return float(np.exp(log_ratio) / nu - psi / nu)
