"""Forecast containers and their CSV representations.

Two shapes circulate between models and scorers: sample ensembles (S draws
of a 24-hour trajectory) and quantile sets (Q levels by 24 hours). Files
are long-form CSV so external forecasts can be dropped in with any tool.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .series import ParseError, format_timestamp, format_value, parse_timestamp

ENSEMBLE_HEADER = "origin,sample,horizon,value"
QUANTILE_HEADER = "origin,horizon,level,value"


@dataclass(frozen=True)
class EnsembleForecast:
    """S sampled trajectories for the 24 hours starting at ``origin``."""

    origin: int
    samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "samples", np.asarray(self.samples, dtype=np.float64)
        )
        if self.samples.ndim != 2 or self.samples.shape[1] != 24:
            raise ValueError("samples must be S x 24")
        if self.samples.shape[0] < 1:
            raise ValueError("ensemble needs at least one sample")

    @property
    def size(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class QuantileForecast:
    """Per-level forecast values for the 24 hours starting at ``origin``.

    Levels are strictly increasing in (0,1); values need not be monotone
    across levels until isotonic repair has run.
    """

    origin: int
    levels: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "levels", np.asarray(self.levels, dtype=np.float64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.levels.ndim != 1 or self.levels.size < 1:
            raise ValueError("levels must be a non-empty vector")
        if np.any((self.levels <= 0) | (self.levels >= 1)):
            raise ValueError("levels must lie strictly inside (0,1)")
        if np.any(np.diff(self.levels) <= 0):
            raise ValueError("levels must be strictly increasing")
        if self.values.shape != (self.levels.size, 24):
            raise ValueError("values must be Q x 24")

    @property
    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.values, axis=0) >= 0))


def save_ensembles(path, forecasts: list[EnsembleForecast]) -> None:
    buf = io.StringIO()
    buf.write(ENSEMBLE_HEADER + "\n")
    for fc in forecasts:
        ts = format_timestamp(fc.origin)
        for s in range(fc.size):
            for h in range(24):
                buf.write(f"{ts},{s},{h},{format_value(fc.samples[s, h])}\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(buf.getvalue())


def save_quantiles(path, forecasts: list[QuantileForecast]) -> None:
    buf = io.StringIO()
    buf.write(QUANTILE_HEADER + "\n")
    for fc in forecasts:
        ts = format_timestamp(fc.origin)
        for h in range(24):
            for q, lev in enumerate(fc.levels):
                buf.write(f"{ts},{h},{format_value(lev)},{format_value(fc.values[q, h])}\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(buf.getvalue())


def _read_rows(path, header: str):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != header:
        raise ParseError(f"expected header {header!r}", index=0)
    for i, line in enumerate(lines[1:], start=1):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, got {len(parts)}", index=i)
        yield i, parts


def load_ensembles(path) -> list[EnsembleForecast]:
    cells: dict[int, dict[tuple[int, int], float]] = {}
    for i, (o, s, h, v) in _read_rows(path, ENSEMBLE_HEADER):
        try:
            cells.setdefault(parse_timestamp(o), {})[(int(s), int(h))] = float(v)
        except (ParseError, ValueError) as exc:
            raise ParseError(str(exc), index=i) from None
    out = []
    for origin in sorted(cells):
        grid = cells[origin]
        n_s = 1 + max(k[0] for k in grid)
        samples = np.full((n_s, 24), np.nan)
        for (s, h), v in grid.items():
            samples[s, h] = v
        if np.any(np.isnan(samples)):
            raise ParseError(f"incomplete ensemble grid for origin {origin}")
        out.append(EnsembleForecast(origin, samples))
    return out


def load_quantiles(path) -> list[QuantileForecast]:
    cells: dict[int, dict[tuple[float, int], float]] = {}
    for i, (o, h, lev, v) in _read_rows(path, QUANTILE_HEADER):
        try:
            cells.setdefault(parse_timestamp(o), {})[(float(lev), int(h))] = float(v)
        except (ParseError, ValueError) as exc:
            raise ParseError(str(exc), index=i) from None
    out = []
    for origin in sorted(cells):
        grid = cells[origin]
        levels = sorted({k[0] for k in grid})
        values = np.full((len(levels), 24), np.nan)
        for (lev, h), v in grid.items():
            values[levels.index(lev), h] = v
        if np.any(np.isnan(values)):
            raise ParseError(f"incomplete quantile grid for origin {origin}")
        out.append(QuantileForecast(origin, np.array(levels), values))
    return out
