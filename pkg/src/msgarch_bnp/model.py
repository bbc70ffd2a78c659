"""Panel MS-GARCH model objects and exact likelihoods.

Regimes are 0-indexed throughout the package: regime ``k`` of the text is
index ``k - 1`` here, and regime 0 carries the largest mean.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from . import _kernels


@dataclass(frozen=True)
class RegimeParams:
    """Regime-specific parameters of one unit, one entry per regime."""

    mu: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        for name in ("mu", "gamma", "alpha", "beta"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        K = self.mu.shape[0]
        if any(getattr(self, n).shape != (K,) for n in ("gamma", "alpha", "beta")):
            raise ValueError("mu, gamma, alpha and beta must have the same length")

    @property
    def K(self) -> int:
        return self.mu.shape[0]

    def validate(self, a: float | None = None, ordered: bool = True) -> None:
        if np.any(self.gamma <= 0) or (a is not None and np.any(self.gamma > a)):
            raise ValueError(f"gamma must lie in (0, a], got {self.gamma}")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if np.any(v <= 0) or np.any(v >= 1):
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if ordered and np.any(np.diff(self.mu) >= 0):
            raise ValueError(f"means must be strictly decreasing across regimes, got {self.mu}")


@dataclass
class Hyperparameters:
    """Fixed constants of the hierarchical prior.

    ``s`` is the standard deviation of the first-stage normal for the means,
    ``r`` the precision of the first-stage betas, ``a`` the upper bound of
    the GARCH intercept, ``(m_star, s_star)`` the mean/sd of the base-measure
    normal, ``(nu, psi)`` the Pitman-Yor discount and concentration, ``phi``
    the Dirichlet precision of the transition rows and ``d`` the Dirichlet
    parameter of the common transition means (``1/K`` when omitted).

    ``sigma0_sq_policy`` is ``"sample_variance"`` or a positive number.
    ``init_dist`` selects the law of the first regime: ``"stationary"``
    (stationary distribution of the unit's transition matrix) or
    ``"uniform"``.
    """

    K: int = 2
    s: float = 0.05
    r: float = 100.0
    a: float = 1.0
    m_star: float = 0.0
    s_star: float = 2.0
    nu: float = 0.0
    psi: float = 1.0
    phi: float = 10.0
    d: float | None = None
    sigma0_sq_policy: str | float = "sample_variance"
    init_dist: str = "stationary"

    def __post_init__(self):
        if self.d is None:
            self.d = 1.0 / self.K
        self.validate()

    def validate(self) -> None:
        if self.K < 1:
            raise ValueError("K must be at least 1")
        for name in ("s", "r", "a", "s_star", "phi", "d"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 <= self.nu < 1:
            raise ValueError(f"nu must lie in [0, 1), got {self.nu}")
        if not self.psi > -self.nu:
            raise ValueError(f"psi must exceed -nu, got psi={self.psi}, nu={self.nu}")
        if self.init_dist not in ("stationary", "uniform"):
            raise ValueError(f"unknown init_dist {self.init_dist!r}")
        if isinstance(self.sigma0_sq_policy, str):
            if self.sigma0_sq_policy != "sample_variance":
                raise ValueError(f"unknown sigma0_sq_policy {self.sigma0_sq_policy!r}")
        elif not float(self.sigma0_sq_policy) > 0:
            raise ValueError("a fixed sigma0_sq must be positive")


@dataclass
class Panel:
    """Rectangular panel of returns, ``y[i, t]`` for unit ``i`` at time ``t``."""

    y: np.ndarray
    units: list = field(default_factory=list)
    times: list = field(default_factory=list)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        if self.y.ndim != 2:
            raise ValueError("panel values must be a 2-D array (units x time)")
        N, T = self.y.shape
        if N < 1 or T < 2:
            raise ValueError(f"panel needs N >= 1 and T >= 2, got N={N}, T={T}")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("panel contains missing or non-finite values")
        if not self.units:
            self.units = [f"unit{i + 1}" for i in range(N)]
        if not self.times:
            self.times = [str(t + 1) for t in range(T)]
        if len(self.units) != N or len(self.times) != T:
            raise ValueError("label lengths do not match the panel shape")

    @property
    def N(self) -> int:
        return self.y.shape[0]

    @property
    def T(self) -> int:
        return self.y.shape[1]


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Stationary distribution of a row-stochastic matrix.

    Solves ``pi (P - I) = 0`` with ``sum(pi) = 1`` by least squares, which
    also returns a valid answer for reducible chains.
    """
    P = np.asarray(P, dtype=float)
    K = P.shape[0]
    if K == 1:
        return np.ones(1)
    A = np.vstack([P.T - np.eye(K), np.ones((1, K))])
    b = np.zeros(K + 1)
    b[-1] = 1.0
    pi = np.linalg.lstsq(A, b, rcond=None)[0]
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def initial_distribution(P: np.ndarray, policy: str = "stationary") -> np.ndarray:
    if policy == "uniform":
        K = np.shape(P)[0]
        return np.full(K, 1.0 / K)
    return stationary_distribution(P)


def resolve_sigma0_sq(y: np.ndarray, policy: str | float = "sample_variance") -> np.ndarray:
    """Initial variance per unit for a (N, T) or (T,) array of returns."""
    y = np.asarray(y, dtype=float)
    if isinstance(policy, str):
        if policy != "sample_variance":
            raise ValueError(f"unknown sigma0_sq_policy {policy!r}")
        v = np.var(y, axis=-1)
        return np.where(v > 0, v, 1.0)
    value = float(policy)
    if not value > 0:
        raise ValueError("sigma0_sq must be positive")
    return np.full(y.shape[:-1], value) if y.ndim > 1 else np.float64(value)


def _check_series(y, params: RegimeParams, path, sigma0_sq):
    y = np.ascontiguousarray(y, dtype=float)
    path = np.ascontiguousarray(path, dtype=np.int64)
    if y.ndim != 1 or path.shape != y.shape:
        raise ValueError(f"series and path lengths differ: {y.shape} vs {path.shape}")
    if not sigma0_sq > 0:
        raise ValueError(f"sigma0_sq must be positive, got {sigma0_sq}")
    if path.size and (path.min() < 0 or path.max() >= params.K):
        raise ValueError("path contains regimes outside 0..K-1")
    return y, path


def garch_variance_path(y, params: RegimeParams, path, sigma0_sq: float) -> np.ndarray:
    """Conditional variances along a regime path.

    ``sigma2[t] = gamma[s_t] + alpha[s_t] * eps[t-1]**2 + beta[s_t] * sigma2[t-1]``
    with ``eps[t-1] = y[t-1] - mu[s_{t-1}]``, ``eps[-1] = 0`` and
    ``sigma2[-1] = sigma0_sq``.
    """
    y, path = _check_series(y, params, path, sigma0_sq)
    return _kernels.variance_path(y, params.mu, params.gamma, params.alpha, params.beta,
                                  path, float(sigma0_sq))


def complete_loglik(y, params: RegimeParams, P, path, sigma0_sq: float,
                    init_dist: np.ndarray | str = "stationary") -> float:
    """Complete-data log likelihood of one unit's series and regime path.

    ``init_dist`` is either a probability vector for the first regime or a
    policy name understood by :func:`initial_distribution`.
    """
    y, path = _check_series(y, params, path, sigma0_sq)
    P = np.asarray(P, dtype=float)
    sig2 = _kernels.variance_path(y, params.mu, params.gamma, params.alpha, params.beta,
                                  path, float(sigma0_sq))
    if np.any(sig2 <= 0) or not np.all(np.isfinite(sig2)):
        raise FloatingPointError("conditional variance is not positive; parameters are invalid")
    if isinstance(init_dist, str):
        init_dist = initial_distribution(P, init_dist)
    with np.errstate(divide="ignore"):
        log_p = np.log(P)
        log_init = np.log(np.asarray(init_dist, dtype=float))
    return float(_kernels.gaussian_loglik(y, params.mu, sig2, path)
                 + _kernels.transition_loglik(log_p, log_init, path))


def enumerate_loglik(y, params: RegimeParams, P, init_dist, sigma0_sq: float,
                     max_paths: int = 10**6) -> float:
    """Observed-data log likelihood by summing over every regime path.

    Exponential in the series length; meant as a test oracle for short
    series only.
    """
    y = np.asarray(y, dtype=float)
    K, T = params.K, y.shape[0]
    if K ** T > max_paths:
        raise ValueError(f"{K}^{T} paths exceed the enumeration guard of {max_paths}")
    if isinstance(init_dist, str):
        init_dist = initial_distribution(P, init_dist)
    terms = [complete_loglik(y, params, P, np.array(p), sigma0_sq, init_dist)
             for p in itertools.product(range(K), repeat=T)]
    return float(logsumexp(terms))


def transition_counts(path: Sequence[int], K: int) -> np.ndarray:
    """``n[k, h]`` = number of moves from regime ``k`` to regime ``h``."""
    return _kernels.transition_counts(np.ascontiguousarray(path, dtype=np.int64), K)
