"""Rolling-window moments and cross-sectional kernel densities."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.stats import norm


def rolling_moments(y, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Log standard deviation and log kurtosis over sliding windows.

    Both use biased (1/n) moments; kurtosis is the fourth central moment
    over the squared variance. Windows with zero variance are NaN. The
    outputs have length ``len(y) - window + 1``.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("rolling_moments expects a 1-D series")
    if window < 4:
        raise ValueError("window must be at least 4")
    if y.size < window:
        raise ValueError(f"series of length {y.size} is shorter than the window {window}")
    w = sliding_window_view(y, window)
    dev = w - w.mean(axis=1, keepdims=True)
    m2 = np.mean(dev**2, axis=1)
    m4 = np.mean(dev**4, axis=1)
    # relative threshold so that round-off in a constant window counts as zero
    flat = m2 <= (np.finfo(float).eps * np.maximum(np.abs(w).max(axis=1), 1e-300)) ** 2 * window
    with np.errstate(divide="ignore", invalid="ignore"):
        log_vol = np.where(flat, np.nan, 0.5 * np.log(m2))
        log_kurt = np.where(flat, np.nan, np.log(m4 / m2**2))
    return log_vol, log_kurt


def cross_section_density(values, grid, bandwidth: float) -> np.ndarray:
    """Gaussian kernel density estimate of ``values`` evaluated on ``grid``; NaNs are dropped."""
    v = np.asarray(values, dtype=float).ravel()
    v = v[np.isfinite(v)]
    if v.size == 0:
        raise ValueError("no finite values for the density estimate")
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    g = np.asarray(grid, dtype=float)
    return norm.pdf((g[:, None] - v[None, :]) / bandwidth).mean(axis=1) / bandwidth


def silverman_bandwidth(values) -> float:
    """Rule-of-thumb bandwidth ``0.9 min(sd, IQR / 1.34) n^(-1/5)``."""
    v = np.asarray(values, dtype=float).ravel()
    v = v[np.isfinite(v)]
    if v.size < 2:
        return 1.0
    sd = v.std(ddof=1)
    iqr = np.subtract(*np.percentile(v, [75, 25])) / 1.34
    spread = min(sd, iqr) if iqr > 0 else sd
    return float(0.9 * spread * v.size ** -0.2) if spread > 0 else 1.0
