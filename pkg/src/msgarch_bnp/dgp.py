"""Synthetic panels: the two-regime simulation design and prior-predictive draws."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .model import Hyperparameters, Panel, RegimeParams, initial_distribution
from .pyp import polya_urn_partition, sample_base_measure

MAX_PRIOR_TRIES = 100_000


@dataclass
class RegimeMixture:
    """Finite mixture for one regime: unit ``i`` picks component ``c`` with
    probability ``probs[c]`` and gets ``mu = mu_centers[c] + scale * eta`` and
    ``gamma = gamma_centers[c] + scale * zeta**2`` with standard normal
    ``eta`` and ``zeta``."""

    mu_centers: tuple
    gamma_centers: tuple
    probs: tuple

    def validate(self) -> None:
        if not len(self.mu_centers) == len(self.gamma_centers) == len(self.probs):
            raise ValueError("mixture centres and probabilities must have the same length")
        p = np.asarray(self.probs, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"mixture probabilities must be non-negative and sum to 1, got {self.probs}")
        if np.any(np.asarray(self.gamma_centers, dtype=float) <= 0):
            raise ValueError("gamma centres must be positive")


def _default_regimes():
    return (
        RegimeMixture(mu_centers=(1.0, 1.5), gamma_centers=(0.1, 0.2), probs=(0.5, 0.5)),
        RegimeMixture(mu_centers=(-1.1, -1.5, -1.0), gamma_centers=(0.5, 0.8, 0.1), probs=(0.3, 0.3, 0.4)),
    )


@dataclass
class DGPSpec:
    """Two-regime simulation design.

    ``garch_concentration`` is the Dirichlet parameter of ``(alpha, beta,
    slack)``; the slack coordinate keeps ``alpha + beta < 1``. The diagonal
    transition probabilities are ``Be(precision * p, precision * (1 - p))``.
    ``sigma0_sq`` is ``"stationary"`` (unconditional variance of the regime
    the unit starts in) or a positive number.
    """

    N: int = 30
    T: int = 300
    K: int = 2
    regimes: tuple = field(default_factory=_default_regimes)
    perturbation: float = 0.01
    garch_concentration: tuple = (50.0, 800.0, 150.0)
    persistence: float = 0.98
    precision: float = 1000.0
    sigma0_sq: str | float = "stationary"
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.N < 1 or self.T < 2:
            raise ValueError(f"need N >= 1 and T >= 2, got N={self.N}, T={self.T}")
        if self.K != 2 or len(self.regimes) != 2:
            raise ValueError("the simulation design has exactly two regimes")
        for reg in self.regimes:
            reg.validate()
        if self.perturbation < 0:
            raise ValueError("perturbation scale must be non-negative")
        if len(self.garch_concentration) != 3 or min(self.garch_concentration) <= 0:
            raise ValueError("garch_concentration needs three positive entries")
        if not 0 < self.persistence < 1 or not self.precision > 0:
            raise ValueError("persistence must lie in (0, 1) and precision must be positive")
        if isinstance(self.sigma0_sq, str):
            if self.sigma0_sq != "stationary":
                raise ValueError(f"unknown sigma0_sq policy {self.sigma0_sq!r}")
        elif not float(self.sigma0_sq) > 0:
            raise ValueError("sigma0_sq must be positive")


@dataclass
class GroundTruth:
    """Parameters behind a simulated panel.

    ``labels[i, k]`` is the 0-based mixture component that generated unit
    ``i``'s parameters in regime ``k``; ``paths`` is filled by
    :func:`simulate_panel`.
    """

    params: list
    P: np.ndarray
    labels: np.ndarray
    paths: np.ndarray | None = None
    sigma0_sq: np.ndarray | None = None

    @property
    def N(self) -> int:
        return len(self.params)

    def stacked(self, name: str) -> np.ndarray:
        """(N, K) array of ``mu``, ``gamma``, ``alpha`` or ``beta``."""
        return np.array([getattr(p, name) for p in self.params])


def _unit_streams(rng, N):
    if isinstance(rng, (int, np.integer)) or rng is None:
        rng = np.random.default_rng(rng)
    return rng.spawn(N)


def sample_dgp_parameters(spec: DGPSpec, rng) -> GroundTruth:
    """Draw unit parameters, labels and transition matrices of the design.

    Each unit uses its own child stream of ``rng`` (a generator or a seed),
    so unit ``i``'s parameters do not depend on the panel size.
    """
    streams = _unit_streams(rng, spec.N)
    conc = np.asarray(spec.garch_concentration, dtype=float)
    params, labels, P = [], np.empty((spec.N, spec.K), dtype=np.int64), np.empty((spec.N, 2, 2))
    for i, g in enumerate(streams):
        mu, gamma, alpha, beta = (np.empty(spec.K) for _ in range(4))
        for k, reg in enumerate(spec.regimes):
            c = int(g.choice(len(reg.probs), p=np.asarray(reg.probs, dtype=float)))
            labels[i, k] = c
            mu[k] = reg.mu_centers[c] + spec.perturbation * g.standard_normal()
            gamma[k] = reg.gamma_centers[c] + spec.perturbation * g.standard_normal() ** 2
            a, b, slack = g.dirichlet(conc)
            if not slack > 0:
                raise AssertionError("GARCH draw violates alpha + beta < 1")
            alpha[k], beta[k] = a, b
        params.append(RegimeParams(mu, gamma, alpha, beta))
        P[i] = _transition_matrix(spec.persistence, spec.precision, g)
    return GroundTruth(params=params, P=P, labels=labels)


def _transition_matrix(p, precision, g):
    stay = g.beta(precision * p, precision * (1.0 - p), size=2)
    return np.array([[stay[0], 1.0 - stay[0]], [1.0 - stay[1], stay[1]]])


def sample_transition_matrices(p: float, precision: float, N: int, rng, K: int = 2) -> np.ndarray:
    """(N, 2, 2) transition matrices with ``Be(precision p, precision (1 - p))`` diagonals."""
    if K != 2:
        raise ValueError("diagonal-beta transition matrices are defined for two regimes only")
    if not 0 < p < 1 or not precision > 0:
        raise ValueError("p must lie in (0, 1) and precision must be positive")
    return np.array([_transition_matrix(p, precision, g) for g in _unit_streams(rng, N)])


def simulate_panel(truth: GroundTruth, T: int, rng, sigma0_sq: str | float = "stationary",
                   init_dist: str = "stationary") -> tuple[Panel, GroundTruth]:
    """Simulate regime paths and observations for every unit of ``truth``.

    The first regime follows ``init_dist`` of each unit's transition matrix;
    then the chain and the GARCH recursion run forward with Gaussian
    innovations. Returns the panel and a copy of ``truth`` with paths and
    initial variances filled in.
    """
    if T < 2:
        raise ValueError("T must be at least 2")
    streams = _unit_streams(rng, truth.N)
    y = np.empty((truth.N, T))
    paths = np.empty((truth.N, T), dtype=np.int64)
    s0 = np.empty(truth.N)
    for i, g in enumerate(streams):
        par, P = truth.params[i], truth.P[i]
        first = int(g.choice(par.K, p=initial_distribution(P, init_dist)))
        paths[i] = _kernels.simulate_chain(np.ascontiguousarray(P), first, g.random(T))
        if isinstance(sigma0_sq, str):
            persistence = par.alpha[first] + par.beta[first]
            if not persistence < 1:
                raise ValueError("stationary initial variance needs alpha + beta < 1")
            s0[i] = par.gamma[first] / (1.0 - persistence)
        else:
            s0[i] = float(sigma0_sq)
        y[i] = _kernels.simulate_unit(par.mu, par.gamma, par.alpha, par.beta, paths[i], s0[i],
                                      g.standard_normal(T))
    done = GroundTruth(params=list(truth.params), P=truth.P.copy(), labels=truth.labels.copy(),
                       paths=paths, sigma0_sq=s0)
    return Panel(y), done


def simulate_design(spec: DGPSpec) -> tuple[Panel, GroundTruth]:
    """Parameters and panel of the design from ``spec.seed``."""
    par_seed, path_seed = np.random.SeedSequence(spec.seed).spawn(2)
    truth = sample_dgp_parameters(spec, np.random.default_rng(par_seed))
    return simulate_panel(truth, spec.T, np.random.default_rng(path_seed), spec.sigma0_sq)


# ------------------------------------------------------------ prior draws

@dataclass
class PriorDraw:
    """One draw of every parameter of the hierarchy.

    ``D[:, k]`` are 0-based cluster labels in order of first appearance and
    ``atoms[k]`` the matching (M_k, 4) atom table.
    """

    mu: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    P: np.ndarray
    R: np.ndarray
    D: np.ndarray
    atoms: list
    tries: int = 1

    @property
    def cluster_counts(self) -> np.ndarray:
        return np.array([a.shape[0] for a in self.atoms])


def _dirichlet(alpha, rng):
    g = np.maximum(rng.standard_gamma(alpha), 1e-300)
    return g / g.sum(axis=-1, keepdims=True)


def sample_prior(hp: Hyperparameters, N: int, rng) -> PriorDraw:
    """Draw from the hierarchical prior conditioned on ordered regime means.

    The ordering restriction applies to the joint prior, so a draw in which
    any unit violates ``mu[0] > mu[1] > ...`` is discarded as a whole.
    """
    K, r, a = hp.K, hp.r, hp.a
    for tries in range(1, MAX_PRIOR_TRIES + 1):
        D = np.empty((N, K), dtype=np.int64)
        atoms = []
        for k in range(K):
            D[:, k] = polya_urn_partition(N, hp.nu, hp.psi, rng)
            atoms.append(sample_base_measure(hp, rng, size=int(D[:, k].max()) + 1))
        at = np.stack([atoms[k][D[:, k]] for k in range(K)], axis=1)  # (N, K, 4)
        mu = at[..., 0] + hp.s * rng.standard_normal((N, K))
        if K > 1 and np.any(np.diff(mu, axis=1) >= 0):
            continue
        g_mean = at[..., 1] / a
        gamma = a * rng.beta(r * g_mean, r * (1.0 - g_mean))
        alpha = rng.beta(r * at[..., 2], r * (1.0 - at[..., 2]))
        beta = rng.beta(r * at[..., 3], r * (1.0 - at[..., 3]))
        # beta draws can round to the support edges for extreme atoms
        gamma = np.clip(gamma, a * 1e-12, a * (1 - 1e-12))
        alpha = np.clip(alpha, 1e-12, 1 - 1e-12)
        beta = np.clip(beta, 1e-12, 1 - 1e-12)
        R = _dirichlet(np.full((K, K), hp.d), rng)
        P = _dirichlet(hp.phi * R[None, :, :] * np.ones((N, 1, 1)), rng)
        return PriorDraw(mu=mu, gamma=gamma, alpha=alpha, beta=beta, P=P, R=R, D=D,
                         atoms=atoms, tries=tries)
    raise RuntimeError(f"no prior draw satisfied the mean ordering in {MAX_PRIOR_TRIES} tries")


def fixed_sigma0_sq(hp: Hyperparameters) -> float:
    if isinstance(hp.sigma0_sq_policy, str):
        raise ValueError("prior-predictive simulation needs a fixed numeric sigma0_sq_policy")
    return float(hp.sigma0_sq_policy)


def sample_paths_and_data(draw: PriorDraw, hp: Hyperparameters, T: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Regime paths and observations given a prior draw; returns ``(y, paths)``."""
    s0 = fixed_sigma0_sq(hp)
    N = draw.mu.shape[0]
    y = np.empty((N, T))
    paths = np.empty((N, T), dtype=np.int64)
    for i in range(N):
        P = np.ascontiguousarray(draw.P[i])
        first = int(rng.choice(hp.K, p=initial_distribution(P, hp.init_dist)))
        paths[i] = _kernels.simulate_chain(P, first, rng.random(T))
        y[i] = simulate_observations(draw.mu[i], draw.gamma[i], draw.alpha[i], draw.beta[i],
                                     paths[i], s0, rng)
    return y, paths


def simulate_observations(mu, gamma, alpha, beta, path, sigma0_sq, rng) -> np.ndarray:
    """Observations of one unit along a fixed path."""
    return _kernels.simulate_unit(np.ascontiguousarray(mu, dtype=float), np.ascontiguousarray(gamma, dtype=float),
                                  np.ascontiguousarray(alpha, dtype=float), np.ascontiguousarray(beta, dtype=float),
                                  np.ascontiguousarray(path, dtype=np.int64), float(sigma0_sq),
                                  rng.standard_normal(path.shape[0]))


def prior_predictive_panel(hp: Hyperparameters, N: int, T: int, rng) -> tuple[Panel, PriorDraw, np.ndarray]:
    """Panel drawn from the joint prior; returns ``(panel, parameters, paths)``."""
    draw = sample_prior(hp, N, rng)
    y, paths = sample_paths_and_data(draw, hp, T, rng)
    return Panel(y), draw, paths


__all__ = ["RegimeMixture", "DGPSpec", "GroundTruth", "PriorDraw", "sample_dgp_parameters",
           "sample_transition_matrices", "simulate_panel", "simulate_design", "sample_prior",
           "sample_paths_and_data", "simulate_observations", "prior_predictive_panel"]
