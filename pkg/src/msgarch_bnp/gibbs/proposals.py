"""Proposal distributions and density helpers used by the sampler blocks."""

from __future__ import annotations

import numpy as np
from scipy.special import betaln, xlog1py, xlogy

from .. import _kernels
from ..model import Hyperparameters
from .state import ALPHA, BETA, GAMMA, MU

LOG_2PI = np.log(2.0 * np.pi)


def normal_logpdf(x, mean, sd):
    z = (x - mean) / sd
    return -0.5 * (LOG_2PI + z * z) - np.log(sd)


def beta_logpdf(x, p, q):
    return xlogy(p - 1.0, x) + xlog1py(q - 1.0, -x) - betaln(p, q)


def first_stage_logpdf(mu, gamma, alpha, beta, atoms, hp: Hyperparameters):
    """Log density of unit parameters given atom(s); broadcasts over atoms[..., 4]."""
    r, a = hp.r, hp.a
    mg = atoms[..., GAMMA] / a
    ma = atoms[..., ALPHA]
    mb = atoms[..., BETA]
    return (normal_logpdf(mu, atoms[..., MU], hp.s)
            + beta_logpdf(gamma / a, r * mg, r * (1.0 - mg)) - np.log(a)
            + beta_logpdf(alpha, r * ma, r * (1.0 - ma))
            + beta_logpdf(beta, r * mb, r * (1.0 - mb)))


def garch_prior_logpdf(gamma, alpha, beta, atoms, hp: Hyperparameters) -> float:
    """First-stage beta log priors of one unit's GARCH vectors (atoms is (K, 4))."""
    r, a = hp.r, hp.a
    mg = atoms[:, GAMMA] / a
    return float(np.sum(beta_logpdf(gamma / a, r * mg, r * (1.0 - mg)) - np.log(a)
                        + beta_logpdf(alpha, r * atoms[:, ALPHA], r * (1.0 - atoms[:, ALPHA]))
                        + beta_logpdf(beta, r * atoms[:, BETA], r * (1.0 - atoms[:, BETA]))))


def sample_truncated_exponential(rate, upper, u):
    """Inverse-cdf draws from the density proportional to ``exp(-rate * x)`` on [0, upper].

    ``rate`` may be negative (increasing density) or zero (uniform). ``u`` are
    uniforms on [0, 1) with the broadcast shape of ``rate``.
    """
    rate = np.asarray(rate, dtype=float)
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(rate)):
        raise FloatingPointError("non-finite truncated-exponential rate")
    scaled = rate * upper
    flat = np.abs(scaled) < 1e-10
    abs_rate = np.where(flat, 1.0, np.abs(rate))
    # decreasing branch for |rate|; mirror for negative rates
    with np.errstate(over="ignore"):
        x = -np.log1p(u * np.expm1(-abs_rate * upper)) / abs_rate
    x = np.where(rate < 0, upper - x, x)
    x = np.where(flat, u * upper, x)
    return np.clip(x, upper * 1e-12, upper * (1.0 - 1e-12))


def truncated_exponential_mean(rate, upper):
    """Mean of the truncated exponential on [0, upper]."""
    if abs(rate * upper) < 1e-10:
        return upper / 2.0
    return 1.0 / rate - upper / np.expm1(rate * upper)


def mvn_logpdf(x, mean, chol):
    """Gaussian log density with covariance ``chol @ chol.T``."""
    z = np.linalg.solve(chol, x - mean)
    return -0.5 * (x.size * LOG_2PI + z @ z) - np.sum(np.log(np.diag(chol)))


def mixture_logpdf(x, weight, mean_a, center_b, chol):
    """Log density of ``weight * N(mean_a, S) + (1 - weight) * N(center_b, S)``."""
    la = np.log(weight) + mvn_logpdf(x, mean_a, chol) if weight > 0 else -np.inf
    lb = np.log1p(-weight) + mvn_logpdf(x, center_b, chol) if weight < 1 else -np.inf
    return np.logaddexp(la, lb)


# ---------------------------------------------------------------- unit means

def mean_proposal_moments(y, mu, gamma, alpha, beta, path, sigma0_sq, prior_mean, s):
    """Approximate-conditional moments of the regime means of one unit.

    The conditional variances are evaluated once at the current parameters
    and held fixed, which makes the mean conditional Gaussian with diagonal
    covariance. Returns the mean vector and the vector of variances.
    """
    K = mu.shape[0]
    sig2 = _kernels.variance_path(y, mu, gamma, alpha, beta, path, sigma0_sq)
    prec = 1.0 / s**2 + np.bincount(path, weights=1.0 / sig2, minlength=K)
    lin = prior_mean / s**2 + np.bincount(path, weights=y / sig2, minlength=K)
    return lin / prec, 1.0 / prec


# ------------------------------------------------------------ GARCH vector

def garch_vector(gamma, alpha, beta):
    return np.concatenate([gamma, alpha, beta])


def split_garch_vector(theta, K):
    return theta[:K], theta[K:2 * K], theta[2 * K:]


def arma_linearization(y, mu, gamma, alpha, beta, path):
    """ARMA residuals, their gradient and the linearization offset ``r*``.

    ``w*(theta) ~= r* + grad @ theta`` around the current GARCH vector.
    """
    eps = y - mu[path]
    w, grad = _kernels.arma_gradient(eps * eps, gamma, alpha, beta, path)
    rstar = w - grad @ garch_vector(gamma, alpha, beta)
    return w, grad, rstar


def garch_prior_gaussian(atoms, hp: Hyperparameters):
    """Moment-matched Gaussian of the first-stage beta priors (atoms is (K, 4))."""
    a, r = hp.a, hp.r
    mg = atoms[:, GAMMA] / a
    mean = np.concatenate([atoms[:, GAMMA], atoms[:, ALPHA], atoms[:, BETA]])
    var = np.concatenate([
        a * a * mg * (1 - mg),
        atoms[:, ALPHA] * (1 - atoms[:, ALPHA]),
        atoms[:, BETA] * (1 - atoms[:, BETA]),
    ]) / (r + 1.0)
    return mean, var


def garch_proposal_moments(y, mu, gamma, alpha, beta, path, sigma0_sq,
                           prior=None, jitter=1e-8):
    """Mean and Cholesky factor of the Gaussian GARCH-vector proposal.

    Weighted least squares on the linearized ARMA residuals with weights
    ``1 / (2 sigma**4)``; ``prior`` is an optional ``(mean, var)`` pair that
    is added as Gaussian pseudo-observations.
    """
    _, grad, rstar = arma_linearization(y, mu, gamma, alpha, beta, path)
    sig2 = _kernels.variance_path(y, mu, gamma, alpha, beta, path, sigma0_sq)
    wts = 0.5 / (sig2 * sig2)
    A = grad.T @ (grad * wts[:, None])
    rhs = -(grad.T @ (wts * rstar))
    if prior is not None:
        pmean, pvar = prior
        A[np.diag_indices_from(A)] += 1.0 / pvar
        rhs = rhs + pmean / pvar
    chol = _regularized_cholesky(A, jitter)
    # S = A^{-1} = L^{-T} L^{-1}
    m = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
    cov_chol = np.linalg.inv(chol).T
    return m, cov_chol


def _regularized_cholesky(A, jitter):
    A = 0.5 * (A + A.T)
    scale = np.max(np.abs(np.diag(A)))
    if not np.isfinite(scale) or scale <= 0:
        scale = 1.0
    eye = np.eye(A.shape[0])
    bump = 0.0
    for _ in range(12):
        try:
            return np.linalg.cholesky(A + bump * scale * eye)
        except np.linalg.LinAlgError:
            bump = jitter if bump == 0.0 else bump * 10.0
    raise np.linalg.LinAlgError("GARCH proposal precision is not positive definite")


def in_garch_support(theta, K, a) -> bool:
    g, al, be = split_garch_vector(theta, K)
    return bool(np.all(g > 0) and np.all(g < a) and np.all(al > 0) and np.all(al < 1)
                and np.all(be > 0) and np.all(be < 1))


# ------------------------------------------------------------- hidden paths

def ffbs_proposal(y, mu, gamma, alpha, beta, P, init, sigma0_sq, u):
    """Draw a path from the collapsed auxiliary model and return its log density.

    Returns ``(path, log_q, filt)`` where ``filt`` is needed to evaluate the
    proposal density of any other path.
    """
    filt, _, _, _ = _kernels.klaassen_filter(y, mu, gamma, alpha, beta, P, init, sigma0_sq)
    path = _kernels.backward_sample(filt, P, u)
    return path, _kernels.path_log_density(filt, P, path), filt
