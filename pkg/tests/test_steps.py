import itertools

import numpy as np
import pytest
from scipy.integrate import trapezoid
from scipy.stats import beta as beta_dist
from scipy.stats import dirichlet, norm

from msgarch_bnp import Hyperparameters, SamplerConfig
from msgarch_bnp.dgp import DGPSpec, simulate_design
from msgarch_bnp.gibbs import initialize_state, make_streams
from msgarch_bnp.gibbs import steps
from msgarch_bnp.gibbs.proposals import (arma_linearization, ffbs_proposal, garch_proposal_moments,
                                         mean_proposal_moments, sample_truncated_exponential,
                                         truncated_exponential_mean)
from msgarch_bnp.model import complete_loglik, RegimeParams
from msgarch_bnp.pyp import stick_weights


def small_state(N=3, T=40, seed=0, **hp_kwargs):
    panel, _ = simulate_design(DGPSpec(N=N, T=T, seed=seed))
    hp = Hyperparameters(**hp_kwargs)
    return panel.y, hp, initialize_state(panel.y, hp)


def grid_normalize(x, logf):
    f = np.exp(logf - logf.max())
    return f / trapezoid(f, x)


# ------------------------------------------------------------ sticks, slices

def test_stick_full_conditional_moment():
    y, hp, state = small_state(N=6, nu=0.25, psi=1.5)
    state.D[:, 0] = [0, 0, 0, 1, 1, 2]
    state.atoms[0] = np.tile(state.atoms[0][:1], (3, 1))
    state.V[0] = np.full(3, 0.5)
    rng, unit_rngs = make_streams(1, state.N)
    draws = []
    for _ in range(5000):
        steps.update_sticks_and_slices(state, hp, rng, unit_rngs)
        draws.append(state.V[0][0])
        assert np.all(state.U[:, 0] < state.weights(0)[state.D[:, 0]])
        W, residual = stick_weights(state.V[0])
        assert residual < state.U[:, 0].min()
    draws = np.array(draws)
    # Be(1 - nu + n_1, psi + nu + m_1) with n_1 = 3, m_1 = 3
    a, b = 1 - 0.25 + 3, 1.5 + 0.25 + 3
    assert draws.mean() == pytest.approx(a / (a + b), abs=4 * draws.std() / np.sqrt(draws.size))


def test_stick_conditional_matches_grid():
    nu, psi, n1, m1 = 0.3, 2.0, 4, 5
    v = np.linspace(1e-6, 1 - 1e-6, 20001)
    # prior Be(1 - nu, psi + nu) times allocation likelihood V^n1 (1 - V)^m1
    logf = beta_dist.logpdf(v, 1 - nu, psi + nu) + n1 * np.log(v) + m1 * np.log1p(-v)
    np.testing.assert_allclose(grid_normalize(v, logf),
                               beta_dist.pdf(v, 1 - nu + n1, psi + nu + m1), atol=1e-6, rtol=1e-6)


# --------------------------------------------------------------- transitions

def test_transition_row_conditional_matches_grid():
    """Dir(phi r + n) against a grid posterior built from the complete likelihood."""
    phi, r = 10.0, np.array([0.5, 0.5])
    path = np.array([0] * 30 + [1, 1, 0] + [1] * 3)
    n = np.array([[29, 2], [1, 3]])
    np.testing.assert_array_equal(steps._kernels.transition_counts(path, 2), n)
    params = RegimeParams([1.0, 0.0], [0.1, 0.1], [0.1, 0.1], [0.5, 0.5])
    y = np.zeros(path.size)
    p = np.linspace(1e-4, 1 - 1e-4, 4001)
    P1 = np.array([[0.6, 0.4], [0.25, 0.75]])
    loglik = []
    for v in p:
        P = P1.copy()
        P[0] = [v, 1 - v]
        loglik.append(complete_loglik(y, params, P, path, 1.0, init_dist=np.array([0.5, 0.5])))
    logf = beta_dist.logpdf(p, phi * r[0], phi * r[1]) + np.array(loglik)
    np.testing.assert_allclose(grid_normalize(p, logf), beta_dist.pdf(p, 5 + 29, 5 + 2), atol=1e-6, rtol=1e-6)


def test_transition_rows_draw_mean():
    y, hp, state = small_state(N=2, init_dist="uniform")
    state.R[:] = 0.5
    counts = np.zeros((2, 2, 2))
    counts[:, 0] = [30, 2]
    rng, unit_rngs = make_streams(0, 2)
    rows = []
    for _ in range(5000):
        steps.update_transition_rows(state, hp, unit_rngs, counts=counts)
        rows.append(state.P[:, 0, 0].copy())
    rows = np.ravel(rows)
    assert rows.mean() == pytest.approx(35 / 42, abs=4 * rows.std() / np.sqrt(rows.size))


def test_log_g_hand_value():
    counts = np.array([[3, 1]])
    assert steps.log_g(np.array([0.5, 0.5]), counts, 10.0) == pytest.approx(np.log(6) + np.log(7))
    assert steps.log_g(np.array([0.3, 0.7]), np.array([[1, 1], [0, 1]]), 10.0) == 0.0


def test_common_mean_conditional_matches_grid():
    hp = Hyperparameters(phi=7.0, d=0.8)
    rng = np.random.default_rng(4)
    P_rows = rng.dirichlet([3.0, 2.0], size=5)
    r1 = np.linspace(1e-4, 1 - 1e-4, 20001)
    ours = np.array([steps.common_mean_log_conditional(np.array([x, 1 - x]), P_rows, hp) for x in r1])
    ref = np.array([dirichlet.logpdf([x, 1 - x], [0.8, 0.8])
                    + sum(dirichlet.logpdf(p, 7.0 * np.array([x, 1 - x])) for p in P_rows) for x in r1])
    np.testing.assert_allclose(grid_normalize(r1, ours), grid_normalize(r1, ref), atol=1e-6, rtol=1e-6)


def test_common_mean_random_walk_targets_conditional():
    hp = Hyperparameters(phi=7.0, d=0.8)
    y, _, state = small_state(N=5)
    rng = np.random.default_rng(5)
    state.P[:, 0, :] = rng.dirichlet([3.0, 2.0], size=5)
    state.R[0] = [0.5, 0.5]
    draws = []
    for _ in range(40000):
        steps.update_common_transition_mean_rw(state, hp, rng, steps=1)
        draws.append(state.R[0, 0])
    draws = np.array(draws)[1000:]
    r1 = np.linspace(1e-5, 1 - 1e-5, 20001)
    dens = grid_normalize(r1, np.array([steps.common_mean_log_conditional(np.array([x, 1 - x]), state.P[:, 0], hp)
                                        for x in r1]))
    mean = trapezoid(r1 * dens, r1)
    # 25 batches of the series give a conservative error of the mean
    se = draws[: 39000].reshape(25, -1).mean(axis=1).std(ddof=1) / 5
    assert abs(draws.mean() - mean) < 4 * se


# ---------------------------------------------------------------------- atoms

def test_truncated_exponential_mean():
    u = np.random.default_rng(0).random(100000)
    x = sample_truncated_exponential(np.full(u.size, 2.0), 1.0, u)
    expected = 0.5 - np.exp(-2) / (1 - np.exp(-2))
    assert expected == pytest.approx(0.34348, abs=1e-5)
    assert truncated_exponential_mean(2.0, 1.0) == pytest.approx(expected)
    assert x.mean() == pytest.approx(expected, abs=3 * x.std() / np.sqrt(x.size))


@pytest.mark.parametrize("rate", [-50.0, -1e-12, 0.0, 3.0, 700.0])
def test_truncated_exponential_is_stable(rate):
    x = sample_truncated_exponential(np.full(3, rate), 2.0, np.array([0.0, 0.5, 0.999999]))
    assert np.all(np.isfinite(x)) and np.all((x > 0) & (x < 2.0))


def test_atom_conditional_matches_grid():
    """Log conditional of an atom coordinate against U(0, 1) prior times member beta densities."""
    r, members = 30.0, np.array([0.31, 0.42, 0.37])
    rate = r * np.log((1 - members) / members).sum()
    x = np.linspace(1e-4, 1 - 1e-4, 20001)
    ours = steps.atom_log_conditional(x, rate, members.size, r)
    ref = beta_dist.logpdf(members[None, :], r * x[:, None], r * (1 - x[:, None])).sum(axis=1)
    np.testing.assert_allclose(grid_normalize(x, ours), grid_normalize(x, ref), atol=1e-6, rtol=1e-6)


def test_slice_atom_sampler_matches_conditional():
    r, members = 30.0, np.array([0.31, 0.42, 0.37])
    rate = r * np.log((1 - members) / members).sum()
    rng = np.random.default_rng(2)
    logf = lambda z: steps.atom_log_conditional(z, np.full(z.shape, rate), np.full(z.shape, 3.0), r)
    x = np.full(2000, 0.5)
    for _ in range(30):
        x = steps.slice_sample_unit_interval(x, logf, rng)
    grid = np.linspace(1e-5, 1 - 1e-5, 20001)
    dens = grid_normalize(grid, steps.atom_log_conditional(grid, rate, 3, r))
    mean = trapezoid(grid * dens, grid)
    assert x.mean() == pytest.approx(mean, abs=4 * x.std() / np.sqrt(x.size))


def test_empty_component_atoms_come_from_base_measure():
    y, hp, state = small_state(N=4, s_star=0.5, m_star=2.0)
    state.D[:, 0] = 0
    state.V[0] = np.array([0.5, 0.5])
    state.atoms[0] = np.vstack([state.atoms[0][:1]] * 2)
    rng = np.random.default_rng(0)
    draws = []
    for _ in range(4000):
        steps.update_atoms(state, hp, rng, sampler="slice")
        draws.append(state.atoms[0][1])
    draws = np.array(draws)
    assert draws[:, 0].mean() == pytest.approx(2.0, abs=4 * 0.5 / np.sqrt(4000))
    assert draws[:, 1].mean() == pytest.approx(hp.a / 2, abs=0.02)


def test_single_member_atom_mean_moments():
    """One member at m* with s = s*: posterior mean m* and sd s* / sqrt(2)."""
    y, hp, state = small_state(N=1, s=1.0, s_star=1.0, m_star=0.0)
    state.mu[0] = [0.0, -0.5]
    state.D[0] = 0
    state.V = [np.array([0.9]), np.array([0.9])]
    state.atoms = [state.atoms[0][:1].copy(), state.atoms[1][:1].copy()]
    rng = np.random.default_rng(0)
    draws = np.array([(steps.update_atoms(state, hp, rng, sampler="slice"), state.atoms[0][0, 0])[1]
                      for _ in range(5000)])
    assert draws.mean() == pytest.approx(0.0, abs=4 / np.sqrt(2) / np.sqrt(draws.size))
    assert draws.std() == pytest.approx(1 / np.sqrt(2), rel=0.05)


# --------------------------------------------------------------- unit means

def test_mean_proposal_moments_transcription():
    y = np.array([0.4, -0.2, 1.1, 0.3, -0.9])
    path = np.array([0, 0, 1, 0, 1])
    mu = np.array([0.5, -0.5])
    g, a, b = np.array([0.2, 0.3]), np.array([0.1, 0.2]), np.array([0.7, 0.5])
    prior, s, s0 = np.array([0.6, -0.4]), 0.3, 1.2
    sig = []
    v, e = s0, 0.0
    for t in range(5):
        k = path[t]
        v = g[k] + a[k] * e * e + b[k] * v
        sig.append(v)
        e = y[t] - mu[k]
    sig = np.array(sig)
    m, var = mean_proposal_moments(y, mu, g, a, b, path, s0, prior, s)
    for k in range(2):
        sel = path == k
        prec = 1 / s**2 + np.sum(1 / sig[sel])
        assert var[k] == pytest.approx(1 / prec, rel=1e-12)
        assert m[k] == pytest.approx((prior[k] / s**2 + np.sum(y[sel] / sig[sel])) / prec, rel=1e-12)


def test_mean_proposal_unvisited_regime_falls_back_to_prior():
    y = np.array([0.4, -0.2, 1.1])
    m, var = mean_proposal_moments(y, np.array([0.5, -0.5]), np.array([0.2, 0.3]), np.array([0.1, 0.2]),
                                   np.array([0.7, 0.5]), np.zeros(3, dtype=np.int64), 1.0,
                                   np.array([0.6, -0.4]), 0.3)
    assert m[1] == pytest.approx(-0.4) and var[1] == pytest.approx(0.09)


def test_mean_update_is_exact_without_garch_memory():
    y, hp, state = small_state(N=3, T=60)
    state.alpha[:] = 0.0
    state.beta[:] = 0.0
    cfg = SamplerConfig(proposal_weight=1.0)
    rng, unit_rngs = make_streams(0, state.N)
    stats = {}
    for _ in range(300):
        steps.update_unit_means(state, y, hp, cfg, unit_rngs, stats)
    acc, tot = stats["mean"]
    assert tot == 900
    assert acc == tot


# ---------------------------------------------------------------- GARCH

def test_arma_gradient_without_persistence():
    rng = np.random.default_rng(0)
    eps2 = rng.random(6) ** 2
    path = np.array([0, 1, 1, 0, 1, 0])
    _, grad = steps._kernels.arma_gradient(eps2, np.array([0.1, 0.2]), np.array([0.3, 0.1]), np.zeros(2), path)
    np.testing.assert_array_equal(grad[:, :2], -np.eye(2)[path])


def test_garch_proposal_covariance_is_positive_definite():
    y, hp, state = small_state(N=3, T=80)
    for i in range(3):
        m, c = garch_proposal_moments(y[i], state.mu[i], state.gamma[i], state.alpha[i], state.beta[i],
                                      state.paths[i], float(state.sigma0_sq[i]))
        S = c @ c.T
        np.testing.assert_allclose(S, S.T, atol=1e-14)
        assert np.all(np.linalg.eigvalsh(S) > 0)


def test_arma_linearization_reproduces_residuals():
    y, hp, state = small_state(N=1, T=30)
    w, grad, rstar = arma_linearization(y[0], state.mu[0], state.gamma[0], state.alpha[0], state.beta[0],
                                        state.paths[0])
    theta = np.concatenate([state.gamma[0], state.alpha[0], state.beta[0]])
    np.testing.assert_allclose(rstar + grad @ theta, w, atol=1e-12)


@pytest.mark.parametrize("mode", ["redraw", "reject"])
def test_garch_update_keeps_support(mode):
    y, hp, state = small_state(N=3, T=60)
    cfg = SamplerConfig(garch_constraint=mode, prior_proposal_weight=0.2)
    rng, unit_rngs = make_streams(0, state.N)
    stats = {}
    for _ in range(200):
        steps.update_unit_garch(state, y, hp, cfg, unit_rngs, stats)
        assert np.all((state.gamma > 0) & (state.gamma < hp.a))
        assert np.all((state.alpha > 0) & (state.alpha < 1) & (state.beta > 0) & (state.beta < 1))
    assert 0 < stats["garch"][0] < stats["garch"][1]
    assert 0 < stats["garch_prior"][1]


# ------------------------------------------------------------------- paths

def test_ffbs_matches_enumeration_of_auxiliary_model():
    """T = 2 path probabilities against a hand build of the collapsed model."""
    y = np.array([0.7, -1.3])
    mu, g, a, b = np.array([0.8, -0.6]), np.array([0.2, 0.5]), np.array([0.15, 0.3]), np.array([0.6, 0.4])
    P = np.array([[0.85, 0.15], [0.2, 0.8]])
    init, s0 = np.array([0.4, 0.6]), 1.3
    h0 = g + b * s0
    f0 = init * norm.pdf(y[0], mu, np.sqrt(h0))
    f0 /= f0.sum()
    h1 = np.empty(2)
    for k in range(2):
        wts = f0 * P[:, k] / (f0 @ P[:, k])
        h1[k] = g[k] + a[k] * (y[0] - wts @ mu) ** 2 + b[k] * (wts @ h0)
    joint = {}
    for s1, s2 in itertools.product(range(2), repeat=2):
        joint[s1, s2] = (init[s1] * norm.pdf(y[0], mu[s1], np.sqrt(h0[s1])) * P[s1, s2]
                         * norm.pdf(y[1], mu[s2], np.sqrt(h1[s2])))
    total = sum(joint.values())
    filt, _, _, _ = steps._kernels.klaassen_filter(y, mu, g, a, b, P, init, s0)
    for (s1, s2), v in joint.items():
        lq = steps._kernels.path_log_density(filt, P, np.array([s1, s2]))
        assert np.exp(lq) == pytest.approx(v / total, abs=1e-10)


def test_ffbs_backward_sampling_frequencies():
    y = np.array([0.7, -1.3, 0.2])
    mu, g, a, b = np.array([0.8, -0.6]), np.array([0.2, 0.5]), np.array([0.15, 0.3]), np.array([0.6, 0.4])
    P = np.array([[0.85, 0.15], [0.2, 0.8]])
    init = np.array([0.4, 0.6])
    rng = np.random.default_rng(0)
    S = 40000
    seen = {}
    filt = None
    for _ in range(S):
        path, _, filt = ffbs_proposal(y, mu, g, a, b, P, init, 1.0, rng.random(3))
        seen[tuple(path)] = seen.get(tuple(path), 0) + 1
    for path, c in seen.items():
        p = np.exp(steps._kernels.path_log_density(filt, P, np.array(path)))
        assert abs(c / S - p) < 4 * np.sqrt(p * (1 - p) / S)


def test_filtered_probabilities_normalized():
    y, hp, state = small_state(N=1, T=200)
    filt, _, _, _ = steps._kernels.klaassen_filter(y[0], state.mu[0], state.gamma[0], state.alpha[0],
                                                   state.beta[0], state.P[0], np.array([0.5, 0.5]),
                                                   float(state.sigma0_sq[0]))
    np.testing.assert_allclose(filt.sum(axis=1), 1.0, atol=1e-12)


def test_path_update_exact_without_garch_memory():
    y, hp, state = small_state(N=2, T=50)
    state.alpha[:] = 0.0
    state.beta[:] = 0.0
    rng, unit_rngs = make_streams(0, state.N)
    stats = {}
    for _ in range(5000):
        steps.update_hidden_paths(state, y, hp, unit_rngs, stats)
    acc, tot = stats["path"]
    assert tot == 10000 and acc / tot >= 0.999


# ------------------------------------------------------------- allocations

def test_allocation_frequencies_three_atoms():
    y, hp, state = small_state(N=200)
    state.mu[:, 0] = 1.0
    state.gamma[:, 0], state.alpha[:, 0], state.beta[:, 0] = 0.2, 0.1, 0.8
    atoms = np.array([[1.02, 0.2, 0.1, 0.8], [0.97, 0.22, 0.12, 0.78], [1.0, 0.18, 0.09, 0.82]])
    state.atoms[0] = atoms
    state.V[0] = np.array([0.3, 0.4, 0.9])
    state.U[:, 0] = 1e-6
    state.D[:, 0] = 0
    lc = np.array([norm.logpdf(1.0, m, hp.s) + beta_dist.logpdf(0.2 / hp.a, hp.r * g / hp.a, hp.r * (1 - g / hp.a))
                   - np.log(hp.a) + beta_dist.logpdf(0.1, hp.r * al, hp.r * (1 - al))
                   + beta_dist.logpdf(0.8, hp.r * be, hp.r * (1 - be)) for m, g, al, be in atoms])
    p = np.exp(lc - lc.max())
    p /= p.sum()
    rng, unit_rngs = make_streams(0, state.N)
    counts = np.zeros(3)
    for _ in range(500):
        steps.update_allocations(state, hp, unit_rngs)
        counts += np.bincount(state.D[:, 0], minlength=3)
    S = counts.sum()
    np.testing.assert_array_less(np.abs(counts / S - p), 3 * np.sqrt(p * (1 - p) / S) + 1e-12)


def test_allocation_singleton_and_symmetric_sets():
    y, hp, state = small_state(N=100)
    atom = state.atoms[0][state.D[0, 0]]
    state.atoms[0] = np.vstack([atom, atom])
    state.V[0] = np.array([0.5, 0.5])
    state.D[:, 0] = 0
    state.U[:, 0] = 0.4   # weights (0.5, 0.25): only component 0 is above the slice
    rng, unit_rngs = make_streams(0, state.N)
    steps.update_allocations(state, hp, unit_rngs)
    assert np.all(state.D[:, 0] == 0)
    state.V[0] = np.array([0.5, 0.99])
    state.U[:, 0] = 1e-3
    total = 0
    for _ in range(100):
        steps.update_allocations(state, hp, unit_rngs)
        total += state.D[:, 0].sum()
    assert total / 10000 == pytest.approx(0.5, abs=4 * 0.5 / 100)


# --------------------------------------------------------- reallocation moves

def test_reallocation_leaves_allocation_prior_invariant():
    """Alternating the move with fresh data from the likelihood keeps the ordered first-stage prior."""
    from msgarch_bnp.dgp import simulate_observations
    from msgarch_bnp.gibbs.steps import _first_stage_draw
    y, hp, state = small_state(N=1, T=15, seed=2, s=0.4, r=20.0, sigma0_sq_policy=1.0)
    state.sigma0_sq[:] = 1.0
    atoms = [np.array([[0.3, 0.2, 0.1, 0.6], [-0.2, 0.5, 0.3, 0.3], [0.8, 0.1, 0.2, 0.2]]),
             np.array([[-0.1, 0.3, 0.2, 0.5], [-0.6, 0.2, 0.1, 0.7]])]
    state.atoms = atoms
    state.V = [np.array([0.3, 0.4, 0.9]), np.array([0.5, 0.9])]
    state.U[0] = [0.05, 0.1]          # slice sets {0, 1, 2} and {0, 1}
    sets = [np.flatnonzero(state.U[0, k] < state.weights(k)) for k in range(2)]
    assert sets[0].size == 3 and sets[1].size == 2
    state.D[0] = [0, 0]
    state.mu[0], state.gamma[0], state.alpha[0], state.beta[0] = [0.3, -0.1], [0.2, 0.3], [0.1, 0.2], [0.6, 0.5]
    state.paths[0] = np.array([0] * 8 + [1] * 7)
    cfg = SamplerConfig(reallocation_moves=1)
    _, units = make_streams(3, 1)
    data_rng = np.random.default_rng(4)
    S = 40000
    chain = np.empty((S, 4))
    for j in range(S):
        y = simulate_observations(state.mu[0], state.gamma[0], state.alpha[0], state.beta[0], state.paths[0],
                                  1.0, data_rng)[None, :]
        steps.update_reallocations(state, y, hp, cfg, units)
        chain[j] = [state.D[0, 0] == 2, state.D[0, 1] == 1, state.mu[0, 0], state.beta[0, 1]]
    ref_rng = np.random.default_rng(5)
    ref = []
    while len(ref) < S:
        c = [ref_rng.choice(sets[0]), ref_rng.choice(sets[1])]
        t = [_first_stage_draw(atoms[k][c[k]], hp, ref_rng) for k in range(2)]
        if t[0][0] > t[1][0]:
            ref.append([c[0] == 2, c[1] == 1, t[0][0], t[1][3]])
    ref = np.array(ref)
    batches = chain.reshape(100, -1, 4).mean(axis=1)
    se = np.sqrt(batches.var(axis=0, ddof=1) / 100 + ref.var(axis=0) / S)
    z = (chain.mean(axis=0) - ref.mean(axis=0)) / se
    assert np.all(np.abs(z) < 4), z


def test_reallocation_moves_a_trapped_unit():
    """A unit pulled onto the wrong atom moves to the atom its data support."""
    y, hp, state = small_state(N=1, T=200, seed=0)
    rng = np.random.default_rng(0)
    path = np.zeros(200, dtype=np.int64)
    path[100:] = 1
    y = np.where(path == 0, 1.5, -1.5) + 0.3 * rng.standard_normal(200)
    state.paths[0] = path
    state.atoms = [np.array([[1.5, 0.09, 0.01, 0.01], [1.0, 0.09, 0.01, 0.01]]),
                   np.array([[-1.5, 0.09, 0.01, 0.01]])]
    state.V = [np.array([0.5, 0.9]), np.array([0.9])]
    state.U[0] = [0.01, 0.01]
    state.D[0] = [1, 0]
    state.mu[0], state.gamma[0] = [1.0, -1.5], [0.09, 0.09]
    state.alpha[0], state.beta[0] = [0.01, 0.01], [0.01, 0.01]
    state.sigma0_sq[:] = 0.09
    _, units = make_streams(1, 1)
    stats = {}
    for _ in range(200):
        steps.update_reallocations(state, y[None, :], hp, SamplerConfig(), units, stats)
    assert state.D[0, 0] == 0 and abs(state.mu[0, 0] - 1.5) < 0.2
    assert 0 < stats["reallocation"][0] < stats["reallocation"][1]


# ---------------------------------------------------------------- ridge moves

def test_ridge_map_is_a_group_action():
    g, al, be = np.array([0.3, 0.1]), np.array([0.05, 0.2]), np.array([0.8, 0.5])
    g1, b1, jac1 = steps._ridge_map(g, al, be, 0.7)
    np.testing.assert_allclose(g1 / (1 - al - b1), g / (1 - al - be), rtol=1e-13)
    g2, b2, jac2 = steps._ridge_map(g1, al, b1, -0.7)
    np.testing.assert_allclose(np.r_[g2, b2], np.r_[g, be], rtol=1e-12)
    assert jac1 + jac2 == pytest.approx(0.0, abs=1e-12)
    # log Jacobian against central differences of the two-dimensional map of one point
    eps = 1e-6
    def f(x):
        gg, bb, _ = steps._ridge_map(np.array([x[0]]), np.array([0.05]), np.array([x[1]]), 0.7)
        return np.r_[gg, bb]
    x0 = np.array([0.3, 0.8])
    J = np.column_stack([(f(x0 + eps * e) - f(x0 - eps * e)) / (2 * eps) for e in np.eye(2)])
    _, _, lj = steps._ridge_map(np.array([0.3]), np.array([0.05]), np.array([0.8]), 0.7)
    assert lj == pytest.approx(np.log(abs(np.linalg.det(J))), abs=1e-7)


def test_ridge_move_preserves_the_prior_with_fresh_data():
    """Starting at the prior, moves followed by data redraws keep prior moments."""
    from msgarch_bnp.dgp import simulate_observations
    from msgarch_bnp.gibbs.steps import _first_stage_draw
    y, hp, state = small_state(N=3, T=12, seed=1, s=0.3, r=15.0, sigma0_sq_policy=1.0)
    state.sigma0_sq[:] = 1.0
    state.D[:] = 0
    state.V = [np.array([0.5]), np.array([0.5])]
    state.paths[:] = np.array([0] * 6 + [1] * 6)
    cfg = SamplerConfig(ridge_moves=1, ridge_step=0.8)
    rng = np.random.default_rng(7)
    R = 3000

    def prior_draw():
        atoms = [np.array([[0.5, rng.random() * hp.a, rng.random(), rng.random()]]),
                 np.array([[-0.5, rng.random() * hp.a, rng.random(), rng.random()]])]
        theta = np.array([[_first_stage_draw(atoms[k][0], hp, rng) for k in range(2)] for _ in range(3)])
        theta[:, 0, 0], theta[:, 1, 0] = 0.5, -0.5   # means stay fixed and ordered
        return atoms, theta

    def stats_of(atoms, theta):
        return [atoms[0][0, 3], atoms[1][0, 1], theta[0, 0, 3], theta[1, 1, 1], theta[2, 0, 1] ** 2]

    chain, ref, accepted = [], [], 0
    for _ in range(R):
        atoms, theta = prior_draw()
        state.atoms = [a.copy() for a in atoms]
        state.mu, state.gamma = theta[:, :, 0].copy(), theta[:, :, 1].copy()
        state.alpha, state.beta = theta[:, :, 2].copy(), theta[:, :, 3].copy()
        stats = {}
        for _ in range(4):
            y = np.stack([simulate_observations(state.mu[i], state.gamma[i], state.alpha[i], state.beta[i],
                                                state.paths[i], 1.0, rng) for i in range(3)])
            steps.update_cluster_ridges(state, y, hp, cfg, rng, stats)
        accepted += stats["ridge"][0]
        th = np.stack([state.mu, state.gamma, state.alpha, state.beta], axis=2)
        chain.append(stats_of(state.atoms, th))
        ref.append(stats_of(*prior_draw()))
    chain, ref = np.array(chain), np.array(ref)
    assert accepted > 0.1 * R * 8
    z = (chain.mean(0) - ref.mean(0)) / np.sqrt(chain.var(0) / R + ref.var(0) / R)
    assert np.all(np.abs(z) < 4), z
