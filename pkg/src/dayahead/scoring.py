"""Proper scoring rules and calibration diagnostics.

CRPS and the Energy Score use the standard all-pairs sample estimators

    ES(F, y) = (1/S) sum_i ||x_i - y||^beta
             - (1/(2 S^2)) sum_{i,j} ||x_i - x_j||^beta

with CRPS the one-dimensional beta=1 special case; crps_ensemble literally
routes through the same code path, so the m=1 reduction is exact by
construction. Quantile forecasts are scored through the pinball identity
CRPS = 2 * E_tau[rho_tau(y - q_tau)], which converges to CRPS as the level
grid densifies. Scores are computed in raw price units after any
standardization has been inverted.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass

import numpy as np

from .forecasts import EnsembleForecast, QuantileForecast
from .series import format_timestamp, format_value

DEFAULT_ECE_LEVELS = np.arange(1, 100) / 100.0


def pinball_loss(error, tau: float):
    """rho_tau(u) = max(tau*u, (tau-1)*u), elementwise; u = obs - predicted."""
    u = np.asarray(error, dtype=np.float64)
    return np.maximum(tau * u, (tau - 1.0) * u)


def energy_score(samples: np.ndarray, obs: np.ndarray, beta: float = 1.0) -> float:
    """All-pairs sample Energy Score of an S x m ensemble against an m-vector."""
    x = np.asarray(samples, dtype=np.float64)
    y = np.asarray(obs, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("samples must be S x m")
    if x.shape[0] < 1:
        raise ValueError("ensemble must contain at least one sample")
    if y.shape != (x.shape[1],):
        raise ValueError(f"obs has shape {y.shape}, expected ({x.shape[1]},)")
    if not 0.0 < beta < 2.0:
        raise ValueError(f"beta must lie in (0,2), got {beta}")
    s = x.shape[0]
    term_obs = np.linalg.norm(x - y, axis=1) ** beta
    diff = x[:, None, :] - x[None, :, :]
    term_pair = np.linalg.norm(diff, axis=2) ** beta
    return float(term_obs.mean() - term_pair.sum() / (2.0 * s * s))


def crps_ensemble(samples: np.ndarray, obs: float) -> float:
    """CRPS of a 1-D sample ensemble: E|X-y| - (1/2)E|X-X'|, all pairs."""
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if x.size < 1:
        raise ValueError("ensemble must contain at least one sample")
    return energy_score(x[:, None], np.array([float(obs)]), beta=1.0)


def crps_ensemble_trajectory(samples: np.ndarray, obs: np.ndarray) -> np.ndarray:
    """Per-horizon CRPS of an S x H ensemble; same estimator as crps_ensemble."""
    x = np.asarray(samples, dtype=np.float64)
    y = np.asarray(obs, dtype=np.float64)
    if x.ndim != 2 or y.shape != (x.shape[1],):
        raise ValueError("need S x H samples and an H-vector of observations")
    s = x.shape[0]
    term_obs = np.abs(x - y).mean(axis=0)
    term_pair = np.abs(x[:, None, :] - x[None, :, :]).sum(axis=(0, 1))
    return term_obs - term_pair / (2.0 * s * s)


def crps_quantile(levels: np.ndarray, values: np.ndarray, obs: float) -> float:
    """Quantile-grid CRPS: 2 * mean over levels of rho_tau(obs - q_tau)."""
    lev = np.asarray(levels, dtype=np.float64).reshape(-1)
    val = np.asarray(values, dtype=np.float64).reshape(-1)
    if lev.size < 1 or lev.shape != val.shape:
        raise ValueError("levels and values must be equal-length vectors")
    if np.any(np.diff(lev) <= 0):
        raise ValueError("levels must be strictly increasing")
    if np.any(np.diff(val) < 0):
        raise ValueError("quantile values cross; run isotonic repair first")
    u = float(obs) - val
    return float(2.0 * np.mean(np.maximum(lev * u, (lev - 1.0) * u)))


def pit_values(forecast, obs: np.ndarray) -> np.ndarray:
    """Probability integral transform of 24 observations under a forecast.

    Ensembles use the counting rule (#below + half of #equal)/S; quantile
    sets interpolate the level at the observation, clipped to the outermost
    levels.
    """
    y = np.asarray(obs, dtype=np.float64)
    if y.shape != (24,):
        raise ValueError("obs must be a 24-vector")
    if isinstance(forecast, EnsembleForecast):
        x = forecast.samples
        below = (x < y).sum(axis=0)
        equal = (x == y).sum(axis=0)
        return (below + 0.5 * equal) / x.shape[0]
    if isinstance(forecast, QuantileForecast):
        if not forecast.is_monotone:
            raise ValueError("quantile values cross; run isotonic repair first")
        out = np.empty(24)
        for h in range(24):
            out[h] = np.interp(y[h], forecast.values[:, h], forecast.levels)
        return out
    raise TypeError(f"unsupported forecast type {type(forecast).__name__}")


def ece(pit: np.ndarray, levels: np.ndarray | None = None) -> float:
    """Expected calibration error: mean_j |P(PIT <= p_j) - p_j|."""
    p = np.asarray(pit, dtype=np.float64).reshape(-1)
    if p.size == 0:
        raise ValueError("need at least one PIT value")
    lev = DEFAULT_ECE_LEVELS if levels is None else np.asarray(levels, np.float64)
    if np.any((lev <= 0) | (lev >= 1)):
        raise ValueError("evaluation levels must lie strictly inside (0,1)")
    observed = (p[None, :] <= lev[:, None]).mean(axis=1)
    return float(np.abs(observed - lev).mean())


@dataclass(frozen=True)
class ScoreSeries:
    """One metric evaluated per forecast origin, DM-test ready."""

    metric: str
    origins: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origins", np.asarray(self.origins, np.int64))
        object.__setattr__(self, "values", np.asarray(self.values, np.float64))
        if self.origins.shape != self.values.shape or self.origins.ndim != 1:
            raise ValueError("origins and values must be aligned vectors")
        if self.values.size and not np.all(np.isfinite(self.values)):
            raise ValueError("score values must be finite")

    @property
    def mean(self) -> float:
        return float(self.values.mean())


def score_forecasts(
    forecasts: list, observed: dict[int, np.ndarray], beta: float = 1.0
) -> dict:
    """Score a batch of forecasts against per-origin observation vectors.

    Returns per-(origin,horizon) CRPS rows plus per-origin ScoreSeries for
    the day-mean CRPS and (ensembles only) the 24-dimensional Energy Score,
    and the pooled PIT values with their ECE.
    """
    origins, crps_rows, day_crps, energy, pits = [], [], [], [], []
    for fc in forecasts:
        if fc.origin not in observed:
            raise ValueError(f"no observations for origin {fc.origin}")
        y = np.asarray(observed[fc.origin], dtype=np.float64)
        if isinstance(fc, EnsembleForecast):
            per_h = crps_ensemble_trajectory(fc.samples, y)
            energy.append(energy_score(fc.samples, y, beta=beta))
        elif isinstance(fc, QuantileForecast):
            per_h = np.array(
                [crps_quantile(fc.levels, fc.values[:, h], y[h]) for h in range(24)]
            )
        else:
            raise TypeError(f"unsupported forecast type {type(fc).__name__}")
        origins.append(fc.origin)
        crps_rows.append(per_h)
        day_crps.append(per_h.mean())
        pits.append(pit_values(fc, y))

    origins = np.array(origins, dtype=np.int64)
    out = {
        "origins": origins,
        "crps_matrix": np.array(crps_rows),
        "crps": ScoreSeries("crps", origins, np.array(day_crps)),
        "pit": np.concatenate(pits) if pits else np.array([]),
    }
    out["ece"] = ece(out["pit"]) if out["pit"].size else float("nan")
    if energy:
        out["energy_score"] = ScoreSeries("energy_score", origins, np.array(energy))
    return out


def write_score_csv(path, results: dict) -> None:
    """Long-form `origin,horizon,metric,value` rows; day-level metrics use
    horizon 'all'."""
    buf = io.StringIO()
    buf.write("origin,horizon,metric,value\n")
    mat = results["crps_matrix"]
    for i, origin in enumerate(results["origins"]):
        ts = format_timestamp(int(origin))
        for h in range(mat.shape[1]):
            buf.write(f"{ts},{h},crps,{format_value(mat[i, h])}\n")
        buf.write(f"{ts},all,crps,{format_value(results['crps'].values[i])}\n")
        if "energy_score" in results:
            es = results["energy_score"].values[i]
            buf.write(f"{ts},all,energy_score,{format_value(es)}\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(buf.getvalue())


def write_score_summary(path, results: dict, extra: dict | None = None) -> None:
    """Aggregate JSON: mean CRPS over origins and horizons, ES mean, ECE."""
    summary = {
        "crps": float(results["crps_matrix"].mean()),
        "ece": results["ece"],
        "n_origins": int(results["origins"].size),
    }
    if "energy_score" in results:
        summary["energy_score"] = results["energy_score"].mean
    if extra:
        summary.update(extra)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
