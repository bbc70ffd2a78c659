"""Panel CSV files, key = value configuration files and chain directories."""

from __future__ import annotations

import csv
import dataclasses
import os
from pathlib import Path

import numpy as np

from .dgp import GroundTruth
from .gibbs.state import PosteriorDraws, SamplerConfig
from .model import Hyperparameters, Panel

MANIFEST = "manifest.txt"
THETA_FILE = "draws_theta.csv"
P_FILE = "draws_P.csv"
D_FILE = "draws_D.csv"
COUNTS_FILE = "cluster_counts.csv"
STATE_PROBS_FILE = "state_probs.csv"


class PanelFormatError(ValueError):
    """Malformed panel file; the message names the offending row and column."""


# ------------------------------------------------------------------ panels

def load_panel_csv(path, from_prices: bool = False) -> Panel:
    """Read a panel with header ``date,<unit1>,...`` and one row per time point.

    With ``from_prices`` the body holds prices and the returned panel holds
    percentage log returns, one observation shorter.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise PanelFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise PanelFormatError(f"{path}: header needs a time column and at least one unit")
    units = header[1:]
    if len(set(units)) != len(units):
        raise PanelFormatError(f"{path}: duplicate unit labels in header")
    body = rows[1:]
    if not body:
        raise PanelFormatError(f"{path}: no data rows")
    times, values = [], np.empty((len(body), len(units)))
    for r, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise PanelFormatError(f"{path}: row {r} has {len(row)} fields, expected {len(header)}")
        times.append(row[0].strip())
        for c, cell in enumerate(row[1:]):
            text = cell.strip()
            if not text:
                raise PanelFormatError(f"{path}: missing value at row {r}, column {c + 2} ({units[c]})")
            try:
                values[r - 2, c] = float(text)
            except ValueError:
                raise PanelFormatError(f"{path}: non-numeric value {text!r} at row {r}, column {c + 2} "
                                       f"({units[c]})") from None
    if not np.all(np.isfinite(values)):
        r, c = np.argwhere(~np.isfinite(values))[0]
        raise PanelFormatError(f"{path}: non-finite value at row {r + 2}, column {c + 2} ({units[c]})")
    if from_prices:
        values, times = prices_to_returns(values.T).T, times[1:]
    return Panel(values.T.copy(), units=units, times=times)


def prices_to_returns(prices) -> np.ndarray:
    """Percentage log returns ``100 * diff(log p)`` along the last axis."""
    p = np.asarray(prices, dtype=float)
    if np.any(p <= 0):
        raise ValueError("prices must be positive")
    return 100.0 * np.diff(np.log(p), axis=-1)


def write_panel_csv(panel: Panel, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *panel.units])
        for t, label in enumerate(panel.times):
            w.writerow([label, *(repr(float(v)) for v in panel.y[:, t])])


def write_truth(truth: GroundTruth, prefix, units=None, times=None) -> list[Path]:
    """Ground truth as ``<prefix>_params.csv``, ``<prefix>_P.csv`` and ``<prefix>_paths.csv``.

    Regimes and mixture components are written 1-based.
    """
    prefix = str(prefix)
    units = units or [f"unit{i + 1}" for i in range(truth.N)]
    out = [Path(prefix + "_params.csv"), Path(prefix + "_P.csv")]
    with out[0].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit", "regime", "mu", "gamma", "alpha", "beta", "component", "sigma0_sq"])
        for i, par in enumerate(truth.params):
            s0 = "" if truth.sigma0_sq is None else repr(float(truth.sigma0_sq[i]))
            for k in range(par.K):
                w.writerow([units[i], k + 1, repr(par.mu[k]), repr(par.gamma[k]), repr(par.alpha[k]),
                            repr(par.beta[k]), int(truth.labels[i, k]) + 1, s0])
    with out[1].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit", "from", "to", "value"])
        for i in range(truth.N):
            K = truth.P.shape[1]
            for k in range(K):
                for h in range(K):
                    w.writerow([units[i], k + 1, h + 1, repr(float(truth.P[i, k, h]))])
    if truth.paths is not None:
        out.append(Path(prefix + "_paths.csv"))
        T = truth.paths.shape[1]
        times = times or [str(t + 1) for t in range(T)]
        with out[2].open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", *units])
            for t in range(T):
                w.writerow([times[t], *(int(v) + 1 for v in truth.paths[:, t])])
    return out


# ------------------------------------------------------------------ config

def _parse_value(text: str, default):
    text = text.strip()
    if isinstance(default, bool):
        low = text.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float) or default is None:
        return None if text.lower() == "none" else float(text)
    # string-or-number fields
    try:
        return float(text)
    except ValueError:
        return text


def parse_key_values(lines) -> dict:
    """``key = value`` lines to a dict; blank lines and ``#`` comments are skipped."""
    out = {}
    for n, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {n}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ValueError(f"line {n}: empty key")
        out[key] = value
    return out


def _build(cls, values: dict):
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in values:
            default = f.default if f.default is not dataclasses.MISSING else None
            try:
                kwargs[f.name] = _parse_value(values[f.name], default)
            except ValueError as exc:
                raise ValueError(f"bad value for {f.name}: {exc}") from None
    return cls(**kwargs)


def config_from_mapping(values: dict, strict: bool = True) -> tuple[Hyperparameters, SamplerConfig]:
    """Hyperparameters and sampler settings from string values keyed by field name."""
    hp_keys = {f.name for f in dataclasses.fields(Hyperparameters)}
    cfg_keys = {f.name for f in dataclasses.fields(SamplerConfig)}
    unknown = sorted(set(values) - hp_keys - cfg_keys)
    if strict and unknown:
        raise ValueError(f"unknown configuration keys: {', '.join(unknown)}")
    hp = _build(Hyperparameters, {k: v for k, v in values.items() if k in hp_keys})
    cfg = _build(SamplerConfig, {k: v for k, v in values.items() if k in cfg_keys})
    return hp, cfg


def read_config(path) -> dict:
    with Path(path).open(encoding="utf-8") as fh:
        return parse_key_values(fh)


def format_config(hp: Hyperparameters, cfg: SamplerConfig) -> list[str]:
    lines = ["# hyperparameters"]
    lines += [f"{f.name} = {getattr(hp, f.name)}" for f in dataclasses.fields(hp)]
    lines.append("# sampler")
    lines += [f"{f.name} = {getattr(cfg, f.name)}" for f in dataclasses.fields(cfg)]
    return lines


# ---------------------------------------------------------- chain directory

def write_chain_dir(out_dir, draws: PosteriorDraws, hp: Hyperparameters, cfg: SamplerConfig,
                    extra: dict | None = None) -> Path:
    """Write draws and a manifest; regimes, components and rows of P are 1-based in the files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    units = draws.units or [f"unit{i + 1}" for i in range(draws.N)]
    S, N, K = draws.mu.shape

    with (out / THETA_FILE).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep", "unit", "regime", "mu", "gamma", "alpha", "beta"])
        for j in range(S):
            sw = int(draws.sweeps[j])
            for i in range(N):
                for k in range(K):
                    w.writerow([sw, units[i], k + 1, repr(float(draws.mu[j, i, k])),
                                repr(float(draws.gamma[j, i, k])), repr(float(draws.alpha[j, i, k])),
                                repr(float(draws.beta[j, i, k]))])
    with (out / P_FILE).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep", "unit", "from", "to", "value"])
        for j in range(S):
            sw = int(draws.sweeps[j])
            for i in range(N):
                for k in range(K):
                    for h in range(K):
                        w.writerow([sw, units[i], k + 1, h + 1, repr(float(draws.P[j, i, k, h]))])
    with (out / D_FILE).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep", "unit", "regime", "component"])
        for j in range(S):
            sw = int(draws.sweeps[j])
            for i in range(N):
                for k in range(K):
                    w.writerow([sw, units[i], k + 1, int(draws.D[j, i, k]) + 1])
    kept = set(int(s) for s in draws.sweeps)
    with (out / COUNTS_FILE).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep", "regime", "count", "kept"])
        for s, row in enumerate(draws.cluster_count_trace, start=1):
            for k in range(K):
                w.writerow([s, k + 1, int(row[k]), int(s in kept)])
    with (out / STATE_PROBS_FILE).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit", "time", "regime", "probability"])
        T = draws.state_probs.shape[1]
        for i in range(N):
            for t in range(T):
                for k in range(K):
                    w.writerow([units[i], t + 1, k + 1, repr(float(draws.state_probs[i, t, k]))])

    lines = format_config(hp, cfg)
    lines.append("# run")
    lines += [f"N = {N}", f"T = {draws.state_probs.shape[1]}", f"stored_draws = {S}",
              f"units = {','.join(units)}", f"wall_time_seconds = {draws.wall_time:.3f}"]
    lines += [f"acceptance.{name} = {rate:.6f}" for name, rate in sorted(draws.acceptance.items())]
    for key, value in (extra or {}).items():
        lines.append(f"{key} = {value}")
    (out / MANIFEST).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out


def read_manifest(chain_dir) -> dict:
    return read_config(Path(chain_dir) / MANIFEST)


def read_chain_dir(chain_dir) -> tuple[PosteriorDraws, Hyperparameters, SamplerConfig, dict]:
    """Inverse of :func:`write_chain_dir`; state probabilities are restored when present."""
    d = Path(chain_dir)
    if not (d / MANIFEST).exists():
        raise FileNotFoundError(f"{d} is not a chain directory (no {MANIFEST})")
    manifest = read_manifest(d)
    hp, cfg = config_from_mapping(manifest, strict=False)
    units = manifest["units"].split(",")
    N, T, K, S = len(units), int(manifest["T"]), hp.K, int(manifest["stored_draws"])
    index = {u: i for i, u in enumerate(units)}

    theta = _read_rows(d / THETA_FILE)
    sweeps = sorted({int(r[0]) for r in theta})
    if len(sweeps) != S:
        raise ValueError(f"{THETA_FILE} holds {len(sweeps)} sweeps, manifest says {S}")
    pos = {s: j for j, s in enumerate(sweeps)}
    arrays = {name: np.empty((S, N, K)) for name in ("mu", "gamma", "alpha", "beta")}
    for r in theta:
        j, i, k = pos[int(r[0])], index[r[1]], int(r[2]) - 1
        for c, name in enumerate(("mu", "gamma", "alpha", "beta")):
            arrays[name][j, i, k] = float(r[3 + c])
    P = np.empty((S, N, K, K))
    for r in _read_rows(d / P_FILE):
        P[pos[int(r[0])], index[r[1]], int(r[2]) - 1, int(r[3]) - 1] = float(r[4])
    D = np.empty((S, N, K), dtype=np.int64)
    for r in _read_rows(d / D_FILE):
        D[pos[int(r[0])], index[r[1]], int(r[2]) - 1] = int(r[3]) - 1
    count_rows = _read_rows(d / COUNTS_FILE)
    iterations = max(int(r[0]) for r in count_rows)
    trace = np.empty((iterations, K), dtype=np.int64)
    for r in count_rows:
        trace[int(r[0]) - 1, int(r[1]) - 1] = int(r[2])
    sweeps_arr = np.array(sweeps, dtype=np.int64)
    probs = np.zeros((N, T, K))
    if (d / STATE_PROBS_FILE).exists():
        for r in _read_rows(d / STATE_PROBS_FILE):
            probs[index[r[0]], int(r[1]) - 1, int(r[2]) - 1] = float(r[3])
    acceptance = {k.split(".", 1)[1]: float(v) for k, v in manifest.items() if k.startswith("acceptance.")}
    draws = PosteriorDraws(
        sweeps=sweeps_arr, P=P, D=D, cluster_counts=trace[sweeps_arr - 1], cluster_count_trace=trace,
        state_probs=probs, acceptance=acceptance, units=units,
        wall_time=float(manifest.get("wall_time_seconds", 0.0)), **arrays,
    )
    return draws, hp, cfg, manifest


def _read_rows(path: Path) -> list:
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        return [row for row in reader if row]


def write_csv(path, header, rows) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
