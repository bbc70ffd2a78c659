"""The six blocks of one Gibbs sweep.

Every update mutates the :class:`ChainState` in place. Global blocks (sticks,
slices, common transition means, atoms) draw from the master generator
``rng``; per-unit blocks use ``unit_rngs[i]`` so the work for one unit does
not depend on any other unit's random numbers.

Metropolis-Hastings blocks add their outcomes to ``stats``, a mapping from
block name to a two-element ``[accepted, proposed]`` list.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from .. import _kernels
from ..model import Hyperparameters, initial_distribution
from ..pyp import MAX_TRUNCATION, sample_base_measure, sample_stick_prior, stick_weights
from .proposals import (
    ffbs_proposal,
    first_stage_logpdf,
    garch_prior_gaussian,
    garch_prior_logpdf,
    garch_proposal_moments,
    garch_vector,
    in_garch_support,
    mean_proposal_moments,
    mixture_logpdf,
    normal_logpdf,
    sample_truncated_exponential,
    split_garch_vector,
)
from .state import ALPHA, BETA, GAMMA, MU, ChainState, SamplerConfig

TINY = 1e-300


def _tally(stats, name, accepted):
    if stats is not None:
        rec = stats.setdefault(name, [0, 0])
        rec[0] += int(accepted)
        rec[1] += 1


def _dirichlet_rows(alpha, rng):
    g = rng.standard_gamma(alpha)
    g = np.maximum(g, TINY)
    return g / g.sum(axis=-1, keepdims=True)


def _log_init(P, path0, policy):
    return np.log(max(initial_distribution(P, policy)[path0], TINY))


# ------------------------------------------------- step 1: sticks and slices

def update_sticks_and_slices(state: ChainState, hp: Hyperparameters, rng, unit_rngs) -> None:
    """Redraw sticks given allocations, then slices, then extend the truncation.

    Sticks up to the largest occupied component come from their beta full
    conditionals; the slices are uniform below the weight of their component;
    further sticks (and base-measure atoms) are appended until the weights
    cover more than ``1 - min(U)``.
    """
    N = state.N
    u_all = np.array([unit_rngs[i].random(state.K) for i in range(N)])
    for k in range(state.K):
        Dk = state.D[:, k]
        L = int(Dk.max()) + 1
        if L > state.atoms[k].shape[0]:
            raise ValueError(f"allocation to component {L - 1} in regime {k} has no atom")
        counts = np.bincount(Dk, minlength=L)
        above = N - np.cumsum(counts)
        pos = np.arange(1, L + 1)
        V = rng.beta(1.0 - hp.nu + counts, hp.psi + hp.nu * pos + above)
        V = np.clip(V, 1e-15, 1.0 - 1e-15)
        W, residual = stick_weights(V)
        U = np.maximum(u_all[:, k], 1e-300) * W[Dk]
        V = list(V)
        atoms = [row for row in state.atoms[k][:L]]
        u_min = U.min()
        while residual >= u_min:
            if len(V) >= MAX_TRUNCATION:
                raise RuntimeError(f"stick truncation exceeded {MAX_TRUNCATION} components in regime {k}")
            v = float(np.clip(sample_stick_prior(len(V) + 1, hp.nu, hp.psi, rng), 1e-15, 1 - 1e-15))
            V.append(v)
            atoms.append(sample_base_measure(hp, rng))
            residual *= 1.0 - v
        state.V[k] = np.array(V)
        state.atoms[k] = np.array(atoms)
        state.U[:, k] = U


# ------------------------------------------ step 2: transition probabilities

def log_g(r_row, counts_k, phi):
    """Log of the row-``k`` factor multiplying the Dirichlet proposal density.

    ``counts_k`` is (N, K) with the transition counts out of regime ``k``;
    the unit-level constants that cancel in the acceptance ratio are dropped.
    """
    x = phi * r_row[None, :]
    terms = np.where(counts_k > 0, gammaln(x + counts_k) - gammaln(x + 1.0), 0.0)
    return float(terms.sum())


def update_common_transition_mean(state: ChainState, hp: Hyperparameters, rng, unit_rngs,
                                  counts=None, stats=None) -> None:
    """Independence MH update of each row of the common transition means.

    The proposal is ``Dir(d + m_k)`` with ``m_kh`` the number of units that
    moved at least once from ``k`` to ``h``. When the initial regime follows
    the stationary law of ``P_i`` the transition rows are marginalized
    jointly: fresh rows are drawn given the proposed mean and the ratio of
    the initial-regime probabilities enters the acceptance.
    """
    if counts is None:
        counts = np.stack([_kernels.transition_counts(p, state.K) for p in state.paths])
    K, N = state.K, state.N
    if K == 1:
        return
    stationary = hp.init_dist == "stationary"
    for k in range(K):
        ck = counts[:, k, :]
        m = (ck > 0).sum(axis=0)
        r_new = _dirichlet_rows(hp.d + m, rng)
        log_ratio = log_g(r_new, ck, hp.phi) - log_g(state.R[k], ck, hp.phi)
        if stationary:
            P_new = state.P.copy()
            for i in range(N):
                P_new[i, k] = _dirichlet_rows(hp.phi * r_new + ck[i], unit_rngs[i])
            s0 = state.paths[:, 0]
            for i in range(N):
                log_ratio += _log_init(P_new[i], s0[i], "stationary") - _log_init(state.P[i], s0[i], "stationary")
        accept = np.log(rng.random()) < log_ratio
        if accept:
            state.R[k] = r_new
            if stationary:
                state.P = P_new
        _tally(stats, "common_transition", accept)


def _dirichlet_logpdf(x, alpha):
    return float(gammaln(alpha.sum()) - gammaln(alpha).sum() + np.sum((alpha - 1.0) * np.log(x)))


def common_mean_log_conditional(r_row, P_rows, hp: Hyperparameters) -> float:
    """Log density of one common transition row given the unit rows ``P_rows`` (N, K)."""
    x = hp.phi * r_row
    N = P_rows.shape[0]
    return float((hp.d - 1.0) * np.log(r_row).sum()
                 + N * (gammaln(hp.phi) - gammaln(x).sum())
                 + ((x - 1.0)[None, :] * np.log(np.maximum(P_rows, TINY))).sum())


def update_common_transition_mean_rw(state: ChainState, hp: Hyperparameters, rng,
                                     steps: int = 1, stats=None) -> None:
    """Random-walk MH on each common transition row, holding the unit matrices fixed.

    The proposal is ``Dir(c * r_current)`` with ``c = N * phi + K`` so its
    spread tracks the information the unit rows carry about ``r_k``.
    """
    K, N = state.K, state.N
    if K == 1 or steps == 0:
        return
    c = N * hp.phi + K
    for k in range(K):
        P_rows = state.P[:, k, :]
        cur = state.R[k]
        lp_cur = common_mean_log_conditional(cur, P_rows, hp)
        for _ in range(steps):
            prop = _dirichlet_rows(c * cur, rng)
            lp_prop = common_mean_log_conditional(prop, P_rows, hp)
            log_ratio = (lp_prop - lp_cur + _dirichlet_logpdf(cur, c * prop)
                         - _dirichlet_logpdf(prop, c * cur))
            accept = np.log(rng.random()) < log_ratio
            if accept:
                cur, lp_cur = prop, lp_prop
            _tally(stats, "common_transition_rw", accept)
        state.R[k] = cur


def update_transition_rows(state: ChainState, hp: Hyperparameters, unit_rngs,
                           counts=None, stats=None) -> None:
    """Draw every transition row from ``Dir(phi * r_k + n_ik)``.

    With a stationary initial regime the draw is used as an independence
    proposal corrected by the initial-regime probability.
    """
    if counts is None:
        counts = np.stack([_kernels.transition_counts(p, state.K) for p in state.paths])
    if state.K == 1:
        return
    stationary = hp.init_dist == "stationary"
    for i in range(state.N):
        rng = unit_rngs[i]
        P_new = _dirichlet_rows(hp.phi * state.R + counts[i], rng)
        if stationary:
            s0 = state.paths[i, 0]
            log_ratio = _log_init(P_new, s0, "stationary") - _log_init(state.P[i], s0, "stationary")
            accept = np.log(rng.random()) < log_ratio
            _tally(stats, "transition_rows", accept)
            if not accept:
                continue
        state.P[i] = P_new


# ------------------------------------------------------------ step 3: atoms

def _gamma_factor(x, r):
    return gammaln(r * x) + gammaln(r * (1.0 - x))


def atom_log_conditional(x, rate, n, r):
    """Log full conditional of a GARCH atom coordinate on the unit scale, up to a constant.

    ``x`` is the coordinate divided by its upper bound, ``rate`` the
    truncated-exponential rate on that scale and ``n`` the number of members.
    """
    return -rate * x - n * _gamma_factor(x, r)


def slice_sample_unit_interval(x0, logf, rng, max_steps=200):
    """Vectorized shrinkage slice sampler for targets supported on (0, 1).

    Starting from the whole interval is exact for any target on (0, 1) and
    needs no step size; the bracket contracts geometrically towards ``x0``.
    """
    x0 = np.asarray(x0, dtype=float)
    level = logf(x0) - rng.standard_exponential(x0.shape)
    lo = np.zeros_like(x0)
    hi = np.ones_like(x0)
    out = x0.copy()
    todo = np.ones(x0.shape, dtype=bool)
    for _ in range(max_steps):
        if not todo.any():
            break
        x = lo + rng.random(x0.shape) * (hi - lo)
        with np.errstate(invalid="ignore"):
            ok = todo & (logf(x) > level)
        out[ok] = x[ok]
        todo &= ~ok
        below = todo & (x < x0)
        lo[below] = x[below]
        above = todo & (x >= x0)
        hi[above] = x[above]
    return out


def update_atoms(state: ChainState, hp: Hyperparameters, rng, sampler: str = "inverse_cdf",
                 stats=None) -> None:
    """Redraw every instantiated atom from its full conditional.

    Means are conjugate normal draws and unoccupied atoms come from the base
    measure. For the GARCH coordinates, ``sampler`` is ``"inverse_cdf"``
    (draw from the truncated exponential factor only), ``"mh"`` (use that
    draw as an independence proposal corrected by the gamma-function factor)
    or ``"slice"`` (exact slice sampling of the full conditional).
    """
    a, r = hp.a, hp.r
    for k in range(state.K):
        L = state.V[k].size
        Dk = state.D[:, k]
        n = np.bincount(Dk, minlength=L).astype(float)
        occupied = n > 0
        sum_mu = np.bincount(Dk, weights=state.mu[:, k], minlength=L)
        g, al, be = state.gamma[:, k], state.alpha[:, k], state.beta[:, k]

        var = 1.0 / (1.0 / hp.s_star**2 + n / hp.s**2)
        mean = var * (hp.m_star / hp.s_star**2 + sum_mu / hp.s**2)
        new = np.empty((L, 4))
        new[:, MU] = mean + np.sqrt(var) * rng.standard_normal(L)

        old = state.atoms[k]
        # truncated-exponential rates on the unit scale x = coordinate / upper
        rates = {
            GAMMA: r * np.bincount(Dk, weights=np.log((a - g) / g), minlength=L),
            ALPHA: r * np.bincount(Dk, weights=np.log((1 - al) / al), minlength=L),
            BETA: r * np.bincount(Dk, weights=np.log((1 - be) / be), minlength=L),
        }
        for col, upper in ((GAMMA, a), (ALPHA, 1.0), (BETA, 1.0)):
            if sampler == "slice":
                x = rng.random(L)
                if occupied.any():
                    rate, cnt = rates[col][occupied], n[occupied]
                    x[occupied] = slice_sample_unit_interval(
                        old[occupied, col] / upper,
                        lambda z: atom_log_conditional(z, rate, cnt, r), rng)
                new[:, col] = np.clip(x, 1e-12, 1 - 1e-12) * upper
                continue
            prop = sample_truncated_exponential(rates[col], 1.0, rng.random(L)) * upper
            if sampler == "mh":
                log_ratio = n * (_gamma_factor(old[:, col] / upper, r) - _gamma_factor(prop / upper, r))
                accept = (np.log(rng.random(L)) < log_ratio) | ~occupied
                new[:, col] = np.where(accept, prop, old[:, col])
                if stats is not None:
                    rec = stats.setdefault("atoms", [0, 0])
                    rec[0] += int(accept[occupied].sum())
                    rec[1] += int(occupied.sum())
            else:
                new[:, col] = prop
        state.atoms[k] = new


# ------------------------------------------------ step 4: unit parameters

def _atoms_of_unit(state: ChainState, i: int) -> np.ndarray:
    return np.array([state.atoms[k][state.D[i, k]] for k in range(state.K)])


def _unit_loglik(y, mu, gamma, alpha, beta, path, s0):
    return _kernels.observation_loglik(y, mu, gamma, alpha, beta, path, s0)


def _ordered(mu):
    return bool(np.all(np.diff(mu) < 0))


def update_unit_means(state: ChainState, y: np.ndarray, hp: Hyperparameters,
                      config: SamplerConfig, unit_rngs, stats=None) -> None:
    """MH update of each unit's vector of regime means.

    Proposal: ``w N(m_i, S_i) + (1 - w) N(mu_current, S_i)`` where ``(m_i,
    S_i)`` are the Gaussian moments obtained with the conditional variances
    frozen at the current parameters. The reverse proposal density uses the
    moments evaluated at the proposed point.
    """
    w = config.proposal_weight
    for i in range(state.N):
        rng = unit_rngs[i]
        yi, path, s0 = y[i], state.paths[i], float(state.sigma0_sq[i])
        mu, g, al, be = state.mu[i], state.gamma[i], state.alpha[i], state.beta[i]
        prior_mean = _atoms_of_unit(state, i)[:, MU]

        m_cur, v_cur = mean_proposal_moments(yi, mu, g, al, be, path, s0, prior_mean, hp.s)
        sd_cur = np.sqrt(v_cur)
        center = m_cur if rng.random() < w else mu
        mu_new = center + sd_cur * rng.standard_normal(mu.size)
        if not _ordered(mu_new):
            _tally(stats, "mean", False)
            continue
        m_new, v_new = mean_proposal_moments(yi, mu_new, g, al, be, path, s0, prior_mean, hp.s)
        sd_new = np.sqrt(v_new)

        log_fwd = _diag_mixture_logpdf(mu_new, w, m_cur, mu, sd_cur)
        log_rev = _diag_mixture_logpdf(mu, w, m_new, mu_new, sd_new)
        log_post_new = _unit_loglik(yi, mu_new, g, al, be, path, s0) + normal_logpdf(mu_new, prior_mean, hp.s).sum()
        log_post_cur = _unit_loglik(yi, mu, g, al, be, path, s0) + normal_logpdf(mu, prior_mean, hp.s).sum()
        log_ratio = log_post_new - log_post_cur + log_rev - log_fwd
        accept = np.log(rng.random()) < log_ratio
        if accept:
            state.mu[i] = mu_new
        _tally(stats, "mean", accept)


def _diag_mixture_logpdf(x, w, mean_a, center_b, sd):
    la = np.log(w) + normal_logpdf(x, mean_a, sd).sum() if w > 0 else -np.inf
    lb = np.log1p(-w) + normal_logpdf(x, center_b, sd).sum() if w < 1 else -np.inf
    return np.logaddexp(la, lb)


def update_unit_garch(state: ChainState, y: np.ndarray, hp: Hyperparameters,
                      config: SamplerConfig, unit_rngs, stats=None) -> None:
    """MH update of each unit's GARCH vector ``(gamma, alpha, beta)``.

    The proposal mixes a Gaussian built from the linearized ARMA form of the
    squared residuals and a random walk with the same covariance. Proposals
    outside the support are redrawn (``"redraw"``) or rejected
    (``"reject"``). A proposal that cannot be brought into the support
    within ``max_redraws`` attempts counts as a rejection.

    With probability ``config.prior_proposal_weight`` the update is instead
    an independence move from the first-stage priors (see
    :func:`_garch_prior_move`).
    """
    K, w = state.K, config.proposal_weight
    for i in range(state.N):
        rng = unit_rngs[i]
        yi, path, s0 = y[i], state.paths[i], float(state.sigma0_sq[i])
        mu, g, al, be = state.mu[i], state.gamma[i], state.alpha[i], state.beta[i]
        atoms = _atoms_of_unit(state, i)
        if config.prior_proposal_weight > 0 and rng.random() < config.prior_proposal_weight:
            _tally(stats, "garch_prior", _garch_prior_move(state, i, yi, atoms, hp, rng))
            continue
        prior = garch_prior_gaussian(atoms, hp) if config.garch_prior_moments else None
        theta = garch_vector(g, al, be)

        try:
            m_cur, c_cur = garch_proposal_moments(yi, mu, g, al, be, path, s0, prior, config.jitter)
        except np.linalg.LinAlgError:
            _tally(stats, "garch", False)
            continue
        attempts = 1 if config.garch_constraint == "reject" else config.max_redraws
        theta_new = None
        for _ in range(attempts):
            center = m_cur if rng.random() < w else theta
            cand = center + c_cur @ rng.standard_normal(3 * K)
            if in_garch_support(cand, K, hp.a):
                theta_new = cand
                break
        if theta_new is None:
            _tally(stats, "garch", False)
            continue
        g_new, al_new, be_new = split_garch_vector(theta_new, K)
        ll_new = _unit_loglik(yi, mu, g_new, al_new, be_new, path, s0)
        if not np.isfinite(ll_new):
            _tally(stats, "garch", False)
            continue
        try:
            m_new, c_new = garch_proposal_moments(yi, mu, g_new, al_new, be_new, path, s0,
                                                  prior, config.jitter)
        except np.linalg.LinAlgError:
            _tally(stats, "garch", False)
            continue
        log_fwd = mixture_logpdf(theta_new, w, m_cur, theta, c_cur)
        log_rev = mixture_logpdf(theta, w, m_new, theta_new, c_new)
        ll_cur = _unit_loglik(yi, mu, g, al, be, path, s0)
        log_ratio = (ll_new + garch_prior_logpdf(g_new, al_new, be_new, atoms, hp)
                     - ll_cur - garch_prior_logpdf(g, al, be, atoms, hp)
                     + log_rev - log_fwd)
        accept = np.log(rng.random()) < log_ratio
        if accept:
            state.gamma[i], state.alpha[i], state.beta[i] = g_new, al_new, be_new
        _tally(stats, "garch", accept)


def _garch_prior_move(state: ChainState, i: int, yi, atoms, hp: Hyperparameters, rng) -> bool:
    """Independence move of unit ``i``'s GARCH vector from its first-stage priors.

    The prior density cancels, leaving the likelihood ratio. Draws that
    round onto a bound of the support are rejected.
    """
    r, a = hp.r, hp.a
    mg = atoms[:, GAMMA] / a
    g_new = a * rng.beta(r * mg, r * (1.0 - mg))
    al_new = rng.beta(r * atoms[:, ALPHA], r * (1.0 - atoms[:, ALPHA]))
    be_new = rng.beta(r * atoms[:, BETA], r * (1.0 - atoms[:, BETA]))
    log_u = np.log(rng.random())
    if not in_garch_support(garch_vector(g_new, al_new, be_new), state.K, a):
        return False
    mu, path, s0 = state.mu[i], state.paths[i], float(state.sigma0_sq[i])
    ll_new = _unit_loglik(yi, mu, g_new, al_new, be_new, path, s0)
    ll_cur = _unit_loglik(yi, mu, state.gamma[i], state.alpha[i], state.beta[i], path, s0)
    if log_u < ll_new - ll_cur:
        state.gamma[i], state.alpha[i], state.beta[i] = g_new, al_new, be_new
        return True
    return False


# ---------------------------------------------------- step 5: hidden paths

def update_hidden_paths(state: ChainState, y: np.ndarray, hp: Hyperparameters,
                        unit_rngs, stats=None) -> None:
    """MH update of each regime path with an FFBS proposal from the collapsed model."""
    for i in range(state.N):
        rng = unit_rngs[i]
        yi, s0 = y[i], float(state.sigma0_sq[i])
        mu, g, al, be, P = state.mu[i], state.gamma[i], state.alpha[i], state.beta[i], state.P[i]
        init = initial_distribution(P, hp.init_dist)
        u = rng.random(state.T)
        new, logq_new, filt = ffbs_proposal(yi, mu, g, al, be, P, init, s0, u)
        old = state.paths[i]
        log_accept_u = np.log(rng.random())
        if np.array_equal(new, old):
            _tally(stats, "path", True)
            continue
        with np.errstate(divide="ignore"):
            log_p = np.log(P)
            log_init = np.log(init)
        logq_old = _kernels.path_log_density(filt, P, old)
        lp_new = _kernels.observation_loglik(yi, mu, g, al, be, new, s0) + _kernels.transition_loglik(log_p, log_init, new)
        lp_old = _kernels.observation_loglik(yi, mu, g, al, be, old, s0) + _kernels.transition_loglik(log_p, log_init, old)
        accept = log_accept_u < (lp_new - lp_old + logq_old - logq_new)
        if accept:
            state.paths[i] = new
        _tally(stats, "path", accept)


# ----------------------------------------------------- step 6: allocations

def allocation_log_weights(state: ChainState, hp: Hyperparameters, k: int) -> np.ndarray:
    """(N, L) log weights of the allocation conditional; -inf outside the slice set."""
    W = state.weights(k)
    atoms = state.atoms[k]
    lc = first_stage_logpdf(state.mu[:, k, None], state.gamma[:, k, None], state.alpha[:, k, None],
                            state.beta[:, k, None], atoms[None, :, :], hp)
    return np.where(state.U[:, k, None] < W[None, :], lc, -np.inf)


def update_allocations(state: ChainState, hp: Hyperparameters, unit_rngs) -> None:
    """Draw each ``D[i, k]`` among the components whose weight exceeds ``U[i, k]``."""
    N = state.N
    u = np.array([unit_rngs[i].random(state.K) for i in range(N)])
    for k in range(state.K):
        lw = allocation_log_weights(state, hp, k)
        top = lw.max(axis=1, keepdims=True)
        if not np.all(np.isfinite(top)):
            bad = np.flatnonzero(~np.isfinite(top[:, 0]))
            raise RuntimeError(f"empty allocation set for units {bad.tolist()} in regime {k}")
        prob = np.exp(lw - top)
        cdf = np.cumsum(prob, axis=1)
        target = u[:, k, None] * cdf[:, -1:]
        D = (cdf <= target).sum(axis=1)
        state.D[:, k] = np.minimum(D, lw.shape[1] - 1)


def _first_stage_draw(atom, hp: Hyperparameters, rng) -> np.ndarray:
    """One ``(mu, gamma, alpha, beta)`` vector from the first stage around ``atom``.

    Beta draws are kept in ``[1e-12, 1 - 1e-12]`` as in prior sampling:
    shapes below one near a bound otherwise round to exactly 0 or 1.
    """
    r = hp.r
    mg = atom[GAMMA] / hp.a
    lo, hi = 1e-12, 1.0 - 1e-12
    return np.array([
        atom[MU] + hp.s * rng.standard_normal(),
        hp.a * np.clip(rng.beta(r * mg, r * (1.0 - mg)), lo, hi),
        np.clip(rng.beta(r * atom[ALPHA], r * (1.0 - atom[ALPHA])), lo, hi),
        np.clip(rng.beta(r * atom[BETA], r * (1.0 - atom[BETA])), lo, hi),
    ])


def update_reallocations(state: ChainState, y: np.ndarray, hp: Hyperparameters,
                         config: SamplerConfig, unit_rngs, stats=None) -> None:
    """Joint MH moves of ``(D[i, k], theta[i, k])``.

    The component is proposed uniformly from the slice set and the
    parameters from its first stage. The slice indicator and the first-stage
    density cancel against the proposal, so the acceptance ratio is the
    likelihood ratio times the ordering and support indicators.
    """
    K = state.K
    for i in range(state.N):
        rng = unit_rngs[i]
        yi, path, s0 = y[i], state.paths[i], float(state.sigma0_sq[i])
        for k in range(K):
            W = state.weights(k)
            choices = np.flatnonzero(state.U[i, k] < W)
            for _ in range(config.reallocation_moves):
                c = int(choices[min(int(rng.random() * choices.size), choices.size - 1)])
                theta = _first_stage_draw(state.atoms[k][c], hp, rng)
                log_u = np.log(rng.random())
                mu, g = state.mu[i].copy(), state.gamma[i].copy()
                al, be = state.alpha[i].copy(), state.beta[i].copy()
                mu[k], g[k], al[k], be[k] = theta
                ok = _ordered(mu) and in_garch_support(garch_vector(g, al, be), K, hp.a)
                if ok:
                    ll_new = _unit_loglik(yi, mu, g, al, be, path, s0)
                    ll_cur = _unit_loglik(yi, state.mu[i], state.gamma[i], state.alpha[i], state.beta[i],
                                          path, s0)
                    ok = log_u < ll_new - ll_cur
                if ok:
                    state.mu[i], state.gamma[i], state.alpha[i], state.beta[i] = mu, g, al, be
                    state.D[i, k] = c
                _tally(stats, "reallocation", ok)


def _ridge_map(gamma, alpha, beta, delta):
    """Shift logit(beta) by ``delta`` keeping ``gamma / (1 - alpha - beta)``; returns the log Jacobian."""
    b_new = 1.0 / (1.0 + np.exp(-(np.log(beta / (1.0 - beta)) + delta)))
    scale = (1.0 - alpha - b_new) / (1.0 - alpha - beta)
    g_new = gamma * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        log_jac = np.sum(np.log(b_new * (1.0 - b_new)) - np.log(beta * (1.0 - beta)) + np.log(scale))
    return g_new, b_new, log_jac


def update_cluster_ridges(state: ChainState, y: np.ndarray, hp: Hyperparameters,
                          config: SamplerConfig, rng, stats=None) -> None:
    """Joint MH moves of an atom and its members along the long-run variance ridge.

    For a common step ``delta`` the map sends ``logit(beta)`` to
    ``logit(beta) + delta`` and ``gamma`` to ``gamma (1 - alpha - beta') /
    (1 - alpha - beta)`` for the atom and every member. These maps form a
    group in ``delta``, so a symmetric step with the Jacobian in the ratio is
    exact. Components with ``alpha + beta >= 1`` anywhere are left alone, a
    set the map never enters or leaves after rejection.
    """
    K, a = state.K, hp.a
    for k in range(K):
        occupied = np.unique(state.D[:, k])
        for c in occupied:
            members = np.flatnonzero(state.D[:, k] == c)
            for _ in range(config.ridge_moves):
                delta = config.ridge_step * rng.standard_normal()
                log_u = np.log(rng.random())
                atom = state.atoms[k][c]
                g = np.r_[atom[GAMMA], state.gamma[members, k]]
                al = np.r_[atom[ALPHA], state.alpha[members, k]]
                be = np.r_[atom[BETA], state.beta[members, k]]
                if np.any(al + be >= 1.0):
                    _tally(stats, "ridge", False)
                    continue
                g_new, b_new, log_jac = _ridge_map(g, al, be, delta)
                if not (np.all(g_new > 0) and np.all(g_new < a) and np.all(b_new > 0) and np.all(b_new < 1)):
                    _tally(stats, "ridge", False)
                    continue
                new_atom = atom.copy()
                new_atom[GAMMA], new_atom[BETA] = g_new[0], b_new[0]
                log_ratio = log_jac
                for j, i in enumerate(members, start=1):
                    mu, path, s0 = state.mu[i], state.paths[i], float(state.sigma0_sq[i])
                    gi, bi = state.gamma[i].copy(), state.beta[i].copy()
                    gi[k], bi[k] = g_new[j], b_new[j]
                    log_ratio += (_unit_loglik(y[i], mu, gi, state.alpha[i], bi, path, s0)
                                  - _unit_loglik(y[i], mu, state.gamma[i], state.alpha[i], state.beta[i], path, s0))
                    with np.errstate(invalid="ignore"):
                        log_ratio += (first_stage_logpdf(mu[k], g_new[j], al[j], b_new[j], new_atom, hp)
                                      - first_stage_logpdf(mu[k], g[j], al[j], be[j], atom, hp))
                ok = bool(np.isfinite(log_ratio) and log_u < log_ratio)
                if ok:
                    state.atoms[k][c] = new_atom
                    state.gamma[members, k] = g_new[1:]
                    state.beta[members, k] = b_new[1:]
                _tally(stats, "ridge", ok)
