"""Chain initialization, the Gibbs sweep and the run driver."""

from __future__ import annotations

import logging
import time

import numpy as np

from .. import _kernels
from ..model import Hyperparameters, Panel, resolve_sigma0_sq
from . import steps
from .state import ChainState, PosteriorDraws, SamplerConfig

log = logging.getLogger(__name__)

INIT_ALPHA = 0.1
INIT_BETA = 0.8
INIT_STAY = 0.95
BLOCKS = ("sticks_slices", "transitions", "atoms", "unit_means", "unit_garch", "paths", "allocations")


class SamplerError(RuntimeError):
    """A Gibbs block failed; carries the block name, sweep and a copy of the state."""

    def __init__(self, message, block=None, sweep=None, state=None):
        super().__init__(message)
        self.block = block
        self.sweep = sweep
        self.state = state


def make_streams(seed: int, N: int):
    """Master generator for the global blocks and one generator per unit."""
    children = np.random.SeedSequence(seed).spawn(N + 1)
    return np.random.default_rng(children[0]), [np.random.default_rng(c) for c in children[1:]]


def _kmeans_1d(x, K, iters=100):
    centers = np.quantile(x, (np.arange(K) + 0.5) / K)[::-1].copy()
    labels = np.zeros(x.size, dtype=np.int64)
    for _ in range(iters):
        new = np.argmin(np.abs(x[:, None] - centers[None, :]), axis=1)
        for k in range(K):
            if np.any(new == k):
                centers[k] = x[new == k].mean()
        if np.array_equal(new, labels):
            break
        labels = new
    order = np.argsort(-centers, kind="stable")
    relabel = np.empty(K, dtype=np.int64)
    relabel[order] = np.arange(K)
    return relabel[labels]


def _rolling_mean(y, window):
    kernel = np.ones(window) / window
    # edge-padded centred moving average of the same length as y
    pad_l = window // 2
    pad_r = window - 1 - pad_l
    ypad = np.concatenate([np.full(pad_l, y[0]), y, np.full(pad_r, y[-1])])
    return np.convolve(ypad, kernel, mode="valid")


def _ordered_means(values, spread):
    """Strictly decreasing copy of ``values``; equal neighbours are split by ``spread``."""
    out = np.sort(values)[::-1].astype(float)
    for k in range(1, out.size):
        if out[k] >= out[k - 1]:
            out[k] = out[k - 1] - spread
    return out


def initialize_state(y: np.ndarray, hp: Hyperparameters, window: int = 10,
                     allocation: str = "singletons") -> ChainState:
    """Deterministic, data-driven starting point of the chain.

    Paths come from a per-unit K-means split of a centred rolling mean, so
    regime 0 starts on the high-mean stretches. Means are the in-regime
    sample means, ``alpha = 0.1``, ``beta = 0.8`` and ``gamma`` matches the
    in-regime sample variance under that persistence. With ``allocation =
    "singletons"`` every unit starts in its own component whose atom equals
    the unit's parameters; ``"single"`` puts all units of a regime on one
    atom at the cross-unit average. Merging singletons needs only small
    moves of the unit parameters, whereas splitting one shared component
    waits for a base-measure atom to land near a unit in every coordinate.
    Transition matrices and their common means put 0.95 on the diagonal.
    """
    if allocation not in ("singletons", "single"):
        raise ValueError(f"unknown allocation {allocation!r}")
    y = np.asarray(y, dtype=float)
    N, T = y.shape
    K = hp.K
    paths = np.zeros((N, T), dtype=np.int64)
    mu = np.empty((N, K))
    gamma = np.empty((N, K))
    alpha = np.full((N, K), INIT_ALPHA)
    beta = np.full((N, K), INIT_BETA)
    upper = hp.a * (1.0 - 1e-6)
    for i in range(N):
        yi = y[i]
        if K > 1:
            paths[i] = _kmeans_1d(_rolling_mean(yi, min(window, T)), K)
        sd = yi.std() if yi.std() > 0 else 1.0
        means = np.empty(K)
        var = np.empty(K)
        for k in range(K):
            sel = yi[paths[i] == k]
            means[k] = sel.mean() if sel.size else yi.mean()
            var[k] = sel.var() if sel.size > 1 else yi.var()
        mu[i] = _ordered_means(means, 0.1 * sd)
        gamma[i] = np.clip(var * (1.0 - INIT_ALPHA - INIT_BETA), 1e-6 * hp.a, upper)
    if allocation == "singletons":
        atoms = [np.column_stack([mu[:, k], gamma[:, k], alpha[:, k], beta[:, k]]) for k in range(K)]
        D = np.repeat(np.arange(N, dtype=np.int64)[:, None], K, axis=1)
    else:
        atoms = [np.array([[mu[:, k].mean(), gamma[:, k].mean(), INIT_ALPHA, INIT_BETA]]) for k in range(K)]
        D = np.zeros((N, K), dtype=np.int64)
    off = (1.0 - INIT_STAY) / (K - 1) if K > 1 else 0.0
    base = np.full((K, K), off) + np.eye(K) * (INIT_STAY - off) if K > 1 else np.ones((1, 1))
    return ChainState(
        mu=mu, gamma=gamma, alpha=alpha, beta=beta,
        P=np.repeat(base[None], N, axis=0), R=base.copy(), paths=paths,
        V=[np.full(a.shape[0], 0.5) for a in atoms], atoms=atoms,
        U=np.zeros((N, K)), D=D,
        sigma0_sq=np.asarray(resolve_sigma0_sq(y, hp.sigma0_sq_policy), dtype=float).reshape(N),
    )


def gibbs_sweep(state: ChainState, y: np.ndarray, hp: Hyperparameters, config: SamplerConfig,
                rng, unit_rngs, stats: dict | None = None) -> ChainState:
    """One pass over the six blocks, in place; returns ``state``."""
    block = BLOCKS[0]
    try:
        steps.update_sticks_and_slices(state, hp, rng, unit_rngs)
        block = BLOCKS[1]
        counts = np.stack([_kernels.transition_counts(p, state.K) for p in state.paths])
        steps.update_transition_rows(state, hp, unit_rngs, counts, stats)
        steps.update_common_transition_mean(state, hp, rng, unit_rngs, counts, stats)
        steps.update_common_transition_mean_rw(state, hp, rng, config.transition_rw_steps, stats)
        block = BLOCKS[2]
        steps.update_atoms(state, hp, rng, config.atom_sampler, stats)
        block = BLOCKS[3]
        steps.update_unit_means(state, y, hp, config, unit_rngs, stats)
        block = BLOCKS[4]
        steps.update_unit_garch(state, y, hp, config, unit_rngs, stats)
        steps.update_cluster_ridges(state, y, hp, config, rng, stats)
        block = BLOCKS[5]
        steps.update_hidden_paths(state, y, hp, unit_rngs, stats)
        block = BLOCKS[6]
        steps.update_allocations(state, hp, unit_rngs)
        steps.update_reallocations(state, y, hp, config, unit_rngs, stats)
        state.sweep += 1
        if config.debug:
            state.check(hp)
    except SamplerError:
        raise
    except (ArithmeticError, AssertionError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        raise SamplerError(f"sweep {state.sweep + 1}, block {block}: {exc}", block=block,
                           sweep=state.sweep + 1, state=state.copy()) from exc
    return state


def run_chain(panel: Panel | np.ndarray, hp: Hyperparameters, config: SamplerConfig,
              streams=None, initial_state: ChainState | None = None,
              progress_every: int = 0) -> PosteriorDraws:
    """Run the sampler and return the thinned post-burn-in draws.

    ``streams`` optionally replaces the generators derived from
    ``config.seed`` with a ``(global_rng, unit_rngs)`` pair.
    """
    if not isinstance(panel, Panel):
        panel = Panel(np.asarray(panel, dtype=float))
    y = np.ascontiguousarray(panel.y)
    N, T, K = panel.N, panel.T, hp.K
    rng, unit_rngs = streams if streams is not None else make_streams(config.seed, N)
    if len(unit_rngs) != N:
        raise ValueError(f"expected {N} unit streams, got {len(unit_rngs)}")
    state = initial_state.copy() if initial_state is not None else initialize_state(y, hp, allocation=config.init_allocation)

    kept = [s for s in range(config.burn_in, config.iterations) if (s - config.burn_in) % config.thin == 0]
    S = len(kept)
    out = {name: np.empty((S, N, K)) for name in ("mu", "gamma", "alpha", "beta")}
    P = np.empty((S, N, K, K))
    D = np.empty((S, N, K), dtype=np.int64)
    counts = np.empty((S, K), dtype=np.int64)
    trace = np.empty((config.iterations, K), dtype=np.int64)
    state_freq = np.zeros((N, T, K))
    paths = np.empty((S, N, T), dtype=np.int8 if K < 128 else np.int64) if config.keep_paths else None
    stats: dict = {}

    start = time.perf_counter()
    j = 0
    for sweep in range(config.iterations):
        gibbs_sweep(state, y, hp, config, rng, unit_rngs, stats)
        trace[sweep] = state.cluster_counts()
        if j < S and sweep == kept[j]:
            for name in out:
                out[name][j] = getattr(state, name)
            P[j] = state.P
            D[j] = state.D
            counts[j] = trace[sweep]
            np.add.at(state_freq, (np.arange(N)[:, None], np.arange(T)[None, :], state.paths), 1.0)
            if paths is not None:
                paths[j] = state.paths
            j += 1
        if progress_every and (sweep + 1) % progress_every == 0:
            log.info("sweep %d/%d, clusters per regime %s", sweep + 1, config.iterations, trace[sweep].tolist())
    elapsed = time.perf_counter() - start

    acceptance = {name: acc / max(tot, 1) for name, (acc, tot) in sorted(stats.items())}
    return PosteriorDraws(
        sweeps=np.array(kept, dtype=np.int64) + 1, mu=out["mu"], gamma=out["gamma"],
        alpha=out["alpha"], beta=out["beta"], P=P, D=D, cluster_counts=counts,
        cluster_count_trace=trace, state_probs=state_freq / max(S, 1), acceptance=acceptance,
        units=list(panel.units), paths=paths, wall_time=elapsed,
    )


__all__ = ["SamplerError", "make_streams", "initialize_state", "gibbs_sweep", "run_chain"]
