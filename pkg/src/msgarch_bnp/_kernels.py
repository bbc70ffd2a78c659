"""Numba kernels for the per-unit recursions.

Regimes are 0-indexed here. ``path`` is an integer array of regime labels
and every parameter vector has one entry per regime. The GARCH parameter
vector used by the ARMA approximation is laid out as
``(gamma_0..gamma_{K-1}, alpha_0..alpha_{K-1}, beta_0..beta_{K-1})``.
"""

import numpy as np
from numba import njit

LOG_2PI = float(np.log(2.0 * np.pi))


@njit(cache=True)
def variance_path(y, mu, gamma, alpha, beta, path, sigma0_sq):
    T = y.shape[0]
    out = np.empty(T)
    eps_prev = 0.0
    sig_prev = sigma0_sq
    for t in range(T):
        k = path[t]
        sig = gamma[k] + alpha[k] * eps_prev * eps_prev + beta[k] * sig_prev
        out[t] = sig
        eps_prev = y[t] - mu[k]
        sig_prev = sig
    return out


@njit(cache=True)
def gaussian_loglik(y, mu, sig2, path):
    total = 0.0
    for t in range(y.shape[0]):
        e = y[t] - mu[path[t]]
        total += -0.5 * (LOG_2PI + np.log(sig2[t]) + e * e / sig2[t])
    return total


@njit(cache=True)
def transition_loglik(log_p, log_init, path):
    total = log_init[path[0]]
    for t in range(1, path.shape[0]):
        total += log_p[path[t - 1], path[t]]
    return total


@njit(cache=True)
def observation_loglik(y, mu, gamma, alpha, beta, path, sigma0_sq):
    """Gaussian log density of ``y`` given the path; -inf on a bad variance."""
    T = y.shape[0]
    eps_prev = 0.0
    sig_prev = sigma0_sq
    total = 0.0
    for t in range(T):
        k = path[t]
        sig = gamma[k] + alpha[k] * eps_prev * eps_prev + beta[k] * sig_prev
        if not (sig > 0.0) or not np.isfinite(sig):
            return -np.inf
        e = y[t] - mu[k]
        total += -0.5 * (LOG_2PI + np.log(sig) + e * e / sig)
        eps_prev = e
        sig_prev = sig
    return total


@njit(cache=True)
def transition_counts(path, K):
    n = np.zeros((K, K), dtype=np.int64)
    for t in range(1, path.shape[0]):
        n[path[t - 1], path[t]] += 1
    return n


@njit(cache=True)
def arma_gradient(eps2, gamma, alpha, beta, path):
    """ARMA residuals ``w*`` and their gradient in the GARCH parameters.

    ``eps2`` holds the squared mean residuals. Returns ``w`` of shape (T,)
    and ``grad`` of shape (T, 3K).
    """
    T = eps2.shape[0]
    K = gamma.shape[0]
    w = np.empty(T)
    grad = np.zeros((T, 3 * K))
    w_prev = 0.0
    e2_prev = 0.0
    for t in range(T):
        k = path[t]
        b = beta[k]
        lag = e2_prev - w_prev
        w[t] = eps2[t] - gamma[k] - alpha[k] * e2_prev - b * lag
        if t > 0:
            for j in range(3 * K):
                grad[t, j] = b * grad[t - 1, j]
        grad[t, k] -= 1.0
        grad[t, K + k] -= e2_prev
        grad[t, 2 * K + k] -= lag
        w_prev = w[t]
        e2_prev = eps2[t]
    return w, grad


@njit(cache=True)
def klaassen_filter(y, mu, gamma, alpha, beta, P, init, sigma0_sq):
    """Forward filter of the collapsed (Klaassen) MS-GARCH auxiliary model.

    Returns filtered probabilities, predicted probabilities and the
    state-conditional variances ``h`` (all of shape (T, K)) together with
    the auxiliary log likelihood.
    """
    T = y.shape[0]
    K = mu.shape[0]
    filt = np.empty((T, K))
    pred = np.empty((T, K))
    h = np.empty((T, K))
    logdens = np.empty(K)
    loglik = 0.0
    for t in range(T):
        for k in range(K):
            if t == 0:
                pred[0, k] = init[k]
                h[0, k] = gamma[k] + beta[k] * sigma0_sq
            else:
                pk = 0.0
                for j in range(K):
                    pk += filt[t - 1, j] * P[j, k]
                pred[t, k] = pk
                mbar = 0.0
                sbar = 0.0
                if pk > 0.0:
                    for j in range(K):
                        wj = filt[t - 1, j] * P[j, k] / pk
                        mbar += wj * mu[j]
                        sbar += wj * h[t - 1, j]
                else:
                    for j in range(K):
                        mbar += filt[t - 1, j] * mu[j]
                        sbar += filt[t - 1, j] * h[t - 1, j]
                e = y[t - 1] - mbar
                h[t, k] = gamma[k] + alpha[k] * e * e + beta[k] * sbar
            e = y[t] - mu[k]
            logdens[k] = -0.5 * (LOG_2PI + np.log(h[t, k]) + e * e / h[t, k])
        top = -np.inf
        for k in range(K):
            if pred[t, k] > 0.0 and logdens[k] > top:
                top = logdens[k]
        norm = 0.0
        for k in range(K):
            v = pred[t, k] * np.exp(logdens[k] - top)
            filt[t, k] = v
            norm += v
        for k in range(K):
            filt[t, k] /= norm
        loglik += top + np.log(norm)
    return filt, pred, h, loglik


@njit(cache=True)
def _draw_index(prob, u):
    total = 0.0
    for k in range(prob.shape[0]):
        total += prob[k]
    acc = 0.0
    target = u * total
    for k in range(prob.shape[0]):
        acc += prob[k]
        if target < acc:
            return k
    # u * total rounding past the last edge
    for k in range(prob.shape[0] - 1, -1, -1):
        if prob[k] > 0.0:
            return k
    return prob.shape[0] - 1


@njit(cache=True)
def backward_sample(filt, P, u):
    """Backward sampling pass; ``u`` holds T uniforms."""
    T, K = filt.shape
    path = np.empty(T, dtype=np.int64)
    path[T - 1] = _draw_index(filt[T - 1], u[T - 1])
    prob = np.empty(K)
    for t in range(T - 2, -1, -1):
        nxt = path[t + 1]
        for j in range(K):
            prob[j] = filt[t, j] * P[j, nxt]
        path[t] = _draw_index(prob, u[t])
    return path


@njit(cache=True)
def path_log_density(filt, P, path):
    """Log probability of ``path`` under the backward-sampling kernel."""
    T, K = filt.shape
    total = np.log(filt[T - 1, path[T - 1]])
    for t in range(T - 2, -1, -1):
        nxt = path[t + 1]
        norm = 0.0
        for j in range(K):
            norm += filt[t, j] * P[j, nxt]
        total += np.log(filt[t, path[t]] * P[path[t], nxt] / norm)
    return total


@njit(cache=True)
def simulate_unit(mu, gamma, alpha, beta, path, sigma0_sq, z):
    """GARCH observations along a fixed path from standard normal draws ``z``."""
    T = path.shape[0]
    y = np.empty(T)
    eps_prev = 0.0
    sig_prev = sigma0_sq
    for t in range(T):
        k = path[t]
        sig = gamma[k] + alpha[k] * eps_prev * eps_prev + beta[k] * sig_prev
        eps = np.sqrt(sig) * z[t]
        y[t] = mu[k] + eps
        eps_prev = eps
        sig_prev = sig
    return y


@njit(cache=True)
def simulate_chain(P, s0, u):
    T = u.shape[0]
    path = np.empty(T, dtype=np.int64)
    path[0] = s0
    for t in range(1, T):
        path[t] = _draw_index(P[path[t - 1]], u[t])
    return path
