from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..model import Hyperparameters, RegimeParams
from ..pyp import stick_weights

# columns of an atom table
MU, GAMMA, ALPHA, BETA = 0, 1, 2, 3
ATOM_SAMPLERS = ("inverse_cdf", "mh", "slice")


@dataclass
class SamplerConfig:
    """Run-length and proposal settings of the Gibbs sampler.

    ``proposal_weight`` is the mixture weight of the approximate-conditional
    component in the mean and GARCH proposals; the remaining mass goes to the
    random-walk component centred at the current value.

    ``atom_sampler`` selects the update of the GARCH coordinates of the
    atoms. ``"inverse_cdf"`` draws from the truncated-exponential factor of
    the full conditional and ignores its gamma-function factor, so it is not
    invariant for the posterior. ``"mh"`` uses that draw as an independence
    Metropolis-Hastings proposal, which is exact but mixes poorly when the
    first-stage precision is large. ``"slice"`` is an exact shrinkage slice
    sampler on the log-concave full conditional.

    ``transition_rw_steps`` extra random-walk updates of each common
    transition row, conditional on the unit transition matrices, follow the
    independence Metropolis-Hastings update.

    ``garch_constraint`` is ``"redraw"`` (redraw out-of-support GARCH
    proposals up to ``max_redraws`` times) or ``"reject"`` (an out-of-support
    proposal is a rejection, which keeps the block exactly invariant).

    ``garch_prior_moments`` folds a Gaussian approximation of the first-stage
    beta priors into the GARCH proposal moments.

    ``prior_proposal_weight`` is the probability that a GARCH update instead
    proposes independently from the first-stage beta priors, accepted on the
    likelihood ratio. Such moves let the chain enter and leave the spikes
    these priors develop when an atom lies within ``1 / r`` of a bound.

    ``reallocation_moves`` is the number of joint moves per unit and regime
    and sweep that propose a component from the slice set together with a
    fresh parameter vector from its first stage, accepted on the likelihood
    ratio. They let a unit leave a component whose atom has pulled its
    parameters far from every other atom, which single-site updates cannot.

    ``ridge_moves`` cluster-level moves per occupied component and sweep
    shift the logit of ``beta`` for the atom and all its members by a common
    normal step of sd ``ridge_step`` and rescale ``gamma`` so that every
    long-run variance ``gamma / (1 - alpha - beta)`` is unchanged. The data
    pin down that ratio much better than its parts, and single-site updates
    of a tightly pooled cluster travel along the ridge very slowly.

    ``init_allocation`` is the starting allocation of the units:
    ``"singletons"`` (one component per unit) or ``"single"`` (one shared
    component per regime).

    ``parallelism`` is recorded in the run manifest; sweeps are executed
    serially, with one random stream per unit so results do not depend on it.
    """

    iterations: int = 2000
    burn_in: int = 1000
    thin: int = 1
    seed: int = 0
    proposal_weight: float = 0.05
    atom_sampler: str = "inverse_cdf"
    transition_rw_steps: int = 1
    garch_constraint: str = "redraw"
    max_redraws: int = 100
    garch_prior_moments: bool = True
    prior_proposal_weight: float = 0.0
    jitter: float = 1e-8
    reallocation_moves: int = 1
    ridge_moves: int = 1
    ridge_step: float = 0.3
    init_allocation: str = "singletons"
    keep_paths: bool = False
    debug: bool = False
    parallelism: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError(f"burn_in must lie in [0, iterations), got {self.burn_in}")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")
        if not 0 <= self.proposal_weight <= 1:
            raise ValueError("proposal_weight must lie in [0, 1]")
        if not 0 <= self.prior_proposal_weight <= 1:
            raise ValueError("prior_proposal_weight must lie in [0, 1]")
        if self.atom_sampler not in ATOM_SAMPLERS:
            raise ValueError(f"unknown atom_sampler {self.atom_sampler!r}; choose from {ATOM_SAMPLERS}")
        if self.transition_rw_steps < 0:
            raise ValueError("transition_rw_steps must be non-negative")
        if self.garch_constraint not in ("redraw", "reject"):
            raise ValueError(f"unknown garch_constraint {self.garch_constraint!r}")
        if self.max_redraws < 1:
            raise ValueError("max_redraws must be at least 1")
        if self.ridge_moves < 0:
            raise ValueError("ridge_moves must be non-negative")
        if not self.ridge_step > 0:
            raise ValueError("ridge_step must be positive")
        if self.reallocation_moves < 0:
            raise ValueError("reallocation_moves must be non-negative")
        if self.init_allocation not in ("singletons", "single"):
            raise ValueError(f"unknown init_allocation {self.init_allocation!r}")
        if self.parallelism < 1:
            raise ValueError("parallelism must be at least 1")


@dataclass
class ChainState:
    """Full latent state of the sampler.

    Per-unit arrays are indexed ``[i, k]`` (unit, regime). ``V[k]`` holds the
    instantiated stick proportions of regime ``k`` and ``atoms[k]`` the
    matching (L_k, 4) atom table with columns ``(mu*, gamma*, alpha*,
    beta*)``. ``D[i, k]`` is the 0-based mixture component of unit ``i`` in
    regime ``k``.
    """

    mu: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    P: np.ndarray
    R: np.ndarray
    paths: np.ndarray
    V: list
    atoms: list
    U: np.ndarray
    D: np.ndarray
    sigma0_sq: np.ndarray
    sweep: int = 0

    @property
    def N(self) -> int:
        return self.mu.shape[0]

    @property
    def K(self) -> int:
        return self.mu.shape[1]

    @property
    def T(self) -> int:
        return self.paths.shape[1]

    def unit_params(self, i: int) -> RegimeParams:
        return RegimeParams(self.mu[i], self.gamma[i], self.alpha[i], self.beta[i])

    def weights(self, k: int) -> np.ndarray:
        return stick_weights(self.V[k])[0]

    def cluster_counts(self) -> np.ndarray:
        return np.array([np.unique(self.D[:, k]).size for k in range(self.K)])

    def copy(self) -> "ChainState":
        return copy.deepcopy(self)

    def check(self, hp: Hyperparameters) -> None:
        """Raise ``AssertionError`` if any state invariant is broken."""
        assert np.all(self.gamma > 0) and np.all(self.gamma < hp.a), "gamma out of (0, a)"
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            assert np.all((v > 0) & (v < 1)), f"{name} out of (0, 1)"
        if self.K > 1:
            assert np.all(np.diff(self.mu, axis=1) < 0), "regime means not ordered"
        assert np.allclose(self.P.sum(axis=2), 1.0, atol=1e-12), "transition rows do not sum to 1"
        assert np.allclose(self.R.sum(axis=1), 1.0, atol=1e-12), "common rows do not sum to 1"
        assert self.paths.min() >= 0 and self.paths.max() < self.K
        for k in range(self.K):
            W = self.weights(k)
            assert self.atoms[k].shape == (W.size, 4), "atom table does not match sticks"
            assert self.D[:, k].max() < W.size, "allocation outside instantiated atoms"
            assert np.all(self.U[:, k] < W[self.D[:, k]]), "slice variable above its weight"


@dataclass
class PosteriorDraws:
    """Thinned post-burn-in output of :func:`run_chain`."""

    sweeps: np.ndarray
    mu: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    P: np.ndarray
    D: np.ndarray
    cluster_counts: np.ndarray
    cluster_count_trace: np.ndarray
    state_probs: np.ndarray
    acceptance: dict
    units: list = field(default_factory=list)
    paths: np.ndarray | None = None
    wall_time: float = 0.0

    def __len__(self) -> int:
        return self.sweeps.shape[0]

    @property
    def N(self) -> int:
        return self.mu.shape[1]

    @property
    def K(self) -> int:
        return self.mu.shape[2]

    def parameter(self, name: str) -> np.ndarray:
        """Draws of ``mu``, ``gamma``, ``alpha``, ``beta`` or ``p_kk`` (shape (S, N, K))."""
        if name == "p_kk":
            return np.diagonal(self.P, axis1=2, axis2=3)
        return getattr(self, name)
