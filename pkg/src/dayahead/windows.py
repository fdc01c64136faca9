"""Standardization, sliding-window extraction and day-ahead masking.

Windows pair a 168-hour input block with the following 24-hour target day.
The known_mask spans all 192 hours per feature and records what a forecaster
standing at the market deadline may legitimately see: market-dependent
covariates vanish over the final 14 input hours and the whole horizon, while
calendar features and week-lag proxies stay visible end to end.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .features import GROUP_MEMBERS, FeatureBundle

log = logging.getLogger(__name__)

CONTEXT = 168
HORIZON = 24
MASK_HOURS = 14

# every R-group member series is hidden near the deadline; proxies carry a
# suffix and calendar columns are not members, so neither resolves here
MARKET_DEPENDENT = frozenset(m for ms in GROUP_MEMBERS.values() for m in ms)


@dataclass(frozen=True)
class Standardizer:
    """Per-column affine transform fitted on training rows only."""

    mean: np.ndarray
    std: np.ndarray
    column_names: tuple[str, ...]

    @property
    def n_features(self) -> int:
        return self.mean.size

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def invert(self, z: np.ndarray) -> np.ndarray:
        return z * self.std + self.mean

    def apply_column(self, x: np.ndarray, name: str) -> np.ndarray:
        j = self.column_names.index(name)
        return (x - self.mean[j]) / self.std[j]

    def invert_column(self, z: np.ndarray, name: str) -> np.ndarray:
        j = self.column_names.index(name)
        return z * self.std[j] + self.mean[j]


def fit_standardizer(
    rows: np.ndarray, column_names: tuple[str, ...], std_floor: float = 1e-8
) -> Standardizer:
    """Column means and population standard deviations, std floored.

    The floor keeps constant columns (holiday flags over a short span)
    usable: they standardize to exactly zero instead of dividing by zero.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise ValueError("need a non-empty 2-D block of training rows")
    if rows.shape[1] != len(column_names):
        raise ValueError("column_names does not match row width")
    mean = rows.mean(axis=0)
    std = np.maximum(rows.std(axis=0), std_floor)
    return Standardizer(mean, std, tuple(column_names))


@dataclass(frozen=True)
class SampleWindow:
    """One forecasting instance.

    ``origin`` is the instant the 24-hour target day begins (the hour after
    the last input hour). ``inputs`` holds the 168 input rows, ``future``
    the horizon-side covariate rows (NaN where a value is not legitimately
    known ahead of time), ``target`` the 24 prices to predict, and
    ``known_mask`` the availability of every (hour, feature) cell over the
    full 192 hours (inputs stacked above the horizon).
    """

    origin: int
    inputs: np.ndarray
    future: np.ndarray
    target: np.ndarray
    known_mask: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        f = len(self.feature_names)
        if self.inputs.shape != (CONTEXT, f):
            raise ValueError(f"inputs must be {CONTEXT}x{f}")
        if self.future.shape != (HORIZON, f):
            raise ValueError(f"future must be {HORIZON}x{f}")
        if self.target.shape != (HORIZON,):
            raise ValueError(f"target must have length {HORIZON}")
        if self.known_mask.shape != (CONTEXT + HORIZON, f):
            raise ValueError(f"known_mask must be {CONTEXT + HORIZON}x{f}")


def make_windows(
    bundle: FeatureBundle, context: int = CONTEXT, horizon: int = HORIZON, stride: int = 1
) -> list[SampleWindow]:
    """Slide a context+horizon frame over the bundle.

    Emits floor((T - context - horizon)/stride) + 1 windows. known_mask is
    set from each column's availability: market-dependent columns are
    unknown over the last MASK_HOURS input rows and the whole horizon (their
    values are left in place here; apply_mask overwrites them), the price is
    unknown over the horizon (it is the target), everything else is known.
    """
    if context != CONTEXT or horizon != HORIZON:
        raise ValueError("window geometry is fixed at 168 input / 24 target hours")
    if stride not in (1, 24):
        raise ValueError(f"stride must be 1 or 24, got {stride}")
    total = context + horizon
    T = bundle.timestamps.size
    if T < total:
        log.warning(
            "bundle for %s spans %d hours, need %d; no windows", bundle.zone, T, total
        )
        return []

    names = bundle.column_names
    f = len(names)
    base_mask = np.ones((total, f), dtype=bool)
    for j, col in enumerate(bundle.columns):
        if col.market_dependent or col.name in MARKET_DEPENDENT:
            base_mask[context - MASK_HOURS :, j] = False
        if col.name == "price":
            base_mask[context:, j] = False

    out = []
    for i in range(0, T - total + 1, stride):
        block = bundle.matrix[i : i + total]
        future = block[context:].copy()
        future[~base_mask[context:]] = np.nan
        out.append(
            SampleWindow(
                origin=int(bundle.timestamps[i + context]),
                inputs=block[:context].copy(),
                future=future,
                target=block[context:, 0].copy(),
                known_mask=base_mask.copy(),
                feature_names=names,
            )
        )
    return out


def apply_mask(window: SampleWindow, mask_value: float = 0.0) -> SampleWindow:
    """Blind the final 14 input hours of every market-dependent feature.

    Overwrites those cells with mask_value and clears their known_mask over
    the mask rows and the horizon. Idempotent; never touches targets,
    calendar columns, week-lag proxies or the price history. Dependency is
    resolved from the feature name.
    """
    inputs = window.inputs.copy()
    mask = window.known_mask.copy()
    rows = slice(CONTEXT - MASK_HOURS, CONTEXT)
    for j, name in enumerate(window.feature_names):
        if name not in MARKET_DEPENDENT:
            continue
        inputs[rows, j] = mask_value
        mask[rows, j] = False
        mask[CONTEXT:, j] = False
    return replace(window, inputs=inputs, known_mask=mask)
