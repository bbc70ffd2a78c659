"""Joint-distribution test of the sampler.

The marginal-conditional simulator draws parameters and data independently
from the prior. The successive-conditional simulator alternates a Gibbs
sweep with a fresh data draw given the current parameters and paths. When
every block leaves the posterior invariant both simulators have the prior as
their stationary law, so the moments of any parameter function agree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dgp import PriorDraw, fixed_sigma0_sq, sample_paths_and_data, sample_prior, simulate_observations
from .gibbs import ChainState, SamplerConfig, gibbs_sweep, make_streams
from .model import Hyperparameters


def state_from_prior(draw: PriorDraw, paths: np.ndarray, hp: Hyperparameters) -> ChainState:
    """Sampler state holding a prior draw; sticks and slices are refreshed by the first sweep."""
    N, K = draw.mu.shape
    return ChainState(
        mu=draw.mu.copy(), gamma=draw.gamma.copy(), alpha=draw.alpha.copy(), beta=draw.beta.copy(),
        P=draw.P.copy(), R=draw.R.copy(), paths=paths.copy(),
        V=[np.full(a.shape[0], 0.5) for a in draw.atoms], atoms=[a.copy() for a in draw.atoms],
        U=np.zeros((N, K)), D=draw.D.copy(), sigma0_sq=np.full(N, fixed_sigma0_sq(hp)),
    )


def test_functions(mu, alpha, P, cluster_counts) -> dict:
    """Scalar summaries compared by the test, named with 1-based unit and regime indices."""
    out = {}
    N, K = mu.shape
    for i in range(N):
        for k in range(K):
            out[f"mu_{i + 1}{k + 1}"] = mu[i, k]
            out[f"alpha_{i + 1}{k + 1}"] = alpha[i, k]
        out[f"p_{i + 1},11"] = P[i, 0, 0]
    for k in range(K):
        out[f"M_{k + 1}"] = float(cluster_counts[k])
    return out


def batch_means_se(x: np.ndarray, batches: int | None = None) -> float:
    """Monte Carlo standard error of the mean of an autocorrelated series.

    The default uses ``sqrt(n)`` batches, capped at 50 so that batches stay
    long compared with the autocorrelation time of slowly mixing chains.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    b = batches or min(max(int(np.sqrt(n)), 2), 50)
    size = n // b
    if size < 1:
        raise ValueError("series too short for batch means")
    means = x[: b * size].reshape(b, size).mean(axis=1)
    return float(np.std(means, ddof=1) / np.sqrt(b))


@dataclass
class GewekeResult:
    names: list
    marginal_mean: np.ndarray   # (Q, 2): first and second moments
    marginal_se: np.ndarray
    successive_mean: np.ndarray
    successive_se: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return (self.successive_mean - self.marginal_mean) / np.sqrt(self.successive_se**2 + self.marginal_se**2)

    def passed(self, threshold: float = 3.0) -> bool:
        return bool(np.all(np.abs(self.z) <= threshold))

    def report(self) -> str:
        lines = []
        for j, name in enumerate(self.names):
            for m, label in enumerate(("mean", "second moment")):
                lines.append(f"{name:12s} {label:14s} prior {self.marginal_mean[j, m]:+.4f} "
                             f"chain {self.successive_mean[j, m]:+.4f} z {self.z[j, m]:+.2f}")
        return "\n".join(lines)


def marginal_conditional(hp: Hyperparameters, N: int, draws: int, rng) -> dict:
    """Test functions over independent prior draws."""
    rows = []
    for _ in range(draws):
        d = sample_prior(hp, N, rng)
        rows.append(test_functions(d.mu, d.alpha, d.P, d.cluster_counts))
    return {key: np.array([r[key] for r in rows]) for key in rows[0]}


def successive_conditional(hp: Hyperparameters, N: int, T: int, sweeps: int, config: SamplerConfig,
                           seed: int = 0) -> dict:
    """Test functions along the alternating sweep / data-redraw chain."""
    rng, unit_rngs = make_streams(seed, N)
    data_rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(N + 2)[-1])
    draw = sample_prior(hp, N, data_rng)
    y, paths = sample_paths_and_data(draw, hp, T, data_rng)
    state = state_from_prior(draw, paths, hp)
    s0 = fixed_sigma0_sq(hp)
    rows = []
    for _ in range(sweeps):
        gibbs_sweep(state, y, hp, config, rng, unit_rngs)
        for i in range(N):
            y[i] = simulate_observations(state.mu[i], state.gamma[i], state.alpha[i], state.beta[i],
                                         state.paths[i], s0, data_rng)
        rows.append(test_functions(state.mu, state.alpha, state.P, state.cluster_counts()))
    return {key: np.array([r[key] for r in rows]) for key in rows[0]}


def geweke_test(hp: Hyperparameters, N: int, T: int, sweeps: int, config: SamplerConfig | None = None,
                prior_draws: int | None = None, seed: int = 0) -> GewekeResult:
    """Compare first and second moments of both simulators.

    ``config`` defaults to the exact settings: slice-sampled atoms,
    rejection of out-of-support GARCH proposals and prior-independence GARCH
    moves, which the chain needs to cross the spiked priors of atoms drawn
    near a bound.
    """
    if config is None:
        config = SamplerConfig(iterations=sweeps, burn_in=0, seed=seed, atom_sampler="slice",
                               garch_constraint="reject", prior_proposal_weight=0.2)
    mc = marginal_conditional(hp, N, prior_draws or sweeps, np.random.default_rng(seed + 1))
    sc = successive_conditional(hp, N, T, sweeps, config, seed)
    names = list(mc)
    mm, ms, sm, ss = (np.empty((len(names), 2)) for _ in range(4))
    for j, name in enumerate(names):
        for m, f in enumerate((lambda v: v, lambda v: v * v)):
            a, b = f(mc[name]), f(sc[name])
            mm[j, m], ms[j, m] = a.mean(), a.std(ddof=1) / np.sqrt(a.size)
            sm[j, m], ss[j, m] = b.mean(), batch_means_se(b)
    return GewekeResult(names, mm, ms, sm, ss)
