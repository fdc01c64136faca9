"""Four transparent empirical baselines emitting sample ensembles.

Every baseline reads history strictly before the forecast origin. When the
required lookback cannot be resolved the origin is omitted and recorded,
never silently skipped. Hour-of-day matching runs on the UTC axis; history
is expected to be DST-deduplicated upstream (first occurrence kept).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .forecasts import EnsembleForecast
from .series import HOUR, HourlySeries

log = logging.getLogger(__name__)

DAY = 24 * HOUR


@dataclass(frozen=True)
class OmissionRecord:
    origin: int
    method: str
    reason: str


class _Lookup:
    """Timestamp -> value resolution over one series."""

    def __init__(self, series: HourlySeries):
        self.values = series.values
        self.index = {int(t): i for i, t in enumerate(series.timestamps)}

    def get(self, ts: int) -> float | None:
        i = self.index.get(ts)
        return None if i is None else float(self.values[i])


def baseline_same_hour_28d(
    history: HourlySeries, origin: int
) -> EnsembleForecast | OmissionRecord:
    """Per target hour, the 28 most recent same-hour values before origin.

    Missing days are skipped by scanning further back; fewer than 28
    resolvable days anywhere in the target day omits the whole origin.
    """
    look = _Lookup(history)
    samples = np.empty((28, 24))
    for h in range(24):
        t = origin + h * HOUR
        found = 0
        back = t - DAY
        floor = int(history.timestamps[0]) if len(history) else origin
        while found < 28 and back >= floor:
            if back < origin:
                v = look.get(back)
                if v is not None:
                    samples[found, h] = v
                    found += 1
            back -= DAY
        if found < 28:
            rec = OmissionRecord(origin, "same-hour-28d", f"only {found} same-hour days for hour {h}")
            log.info("omitted origin %d: %s", origin, rec.reason)
            return rec
    return EnsembleForecast(origin, samples)


def _shift_months(ts: int, months: int) -> int:
    """Same day-of-month and hour, `months` earlier; day clamped to the
    shorter month's last day when needed."""
    import calendar

    dt = datetime.fromtimestamp(ts, tz=timezone.utc)
    total = dt.year * 12 + (dt.month - 1) - months
    year, month = divmod(total, 12)
    month += 1
    day = min(dt.day, calendar.monthrange(year, month)[1])
    return int(dt.replace(year=year, month=month, day=day).timestamp())


def baseline_7d_12m(
    history: HourlySeries, origin: int
) -> EnsembleForecast | OmissionRecord:
    """Seven same-hour prior days plus the same day-of-month in each of the
    12 prior months, all at the target hour: 19 samples per hour.

    A missing day (or a month offset landing on a gap) falls back to the
    next earlier day with a value at that hour.
    """
    look = _Lookup(history)
    floor = int(history.timestamps[0]) if len(history) else origin
    samples = np.empty((19, 24))
    for h in range(24):
        t = origin + h * HOUR
        found = 0
        back = t - DAY
        while found < 7 and back >= floor:
            if back < origin:
                v = look.get(back)
                if v is not None:
                    samples[found, h] = v
                    found += 1
            back -= DAY
        if found < 7:
            rec = OmissionRecord(origin, "same-hour-7d12m", f"only {found} prior days for hour {h}")
            log.info("omitted origin %d: %s", origin, rec.reason)
            return rec
        for j in range(1, 13):
            back = _shift_months(t, j)
            v = None
            while back >= floor:
                if back < origin:
                    v = look.get(back)
                    if v is not None:
                        break
                back -= DAY
            if v is None:
                rec = OmissionRecord(origin, "same-hour-7d12m", f"month offset {j} unresolvable for hour {h}")
                log.info("omitted origin %d: %s", origin, rec.reason)
                return rec
            samples[6 + j, h] = v
    return EnsembleForecast(origin, samples)


def _lagged(look: _Lookup, ts: int, lag: int) -> float | None:
    # exact lag, then the +/- 1 hour DST fallback
    for cand in (ts - lag, ts - lag - HOUR, ts - lag + HOUR):
        v = look.get(cand)
        if v is not None:
            return v
    return None


def residual_pool(
    target: HourlySeries, reference: HourlySeries, train_end: int, lag: int = 168 * HOUR
) -> np.ndarray:
    """Residuals y_t - reference_{t-lag} over timestamps strictly before
    train_end. Requires exact lag resolution; unresolvable hours are
    skipped."""
    look = _Lookup(reference)
    out = []
    for t, y in zip(target.timestamps, target.values):
        if t >= train_end:
            break
        ref = look.get(int(t) - lag)
        if ref is not None:
            out.append(float(y) - ref)
    return np.array(out)


def baseline_bootstrap(
    target: HourlySeries,
    reference: HourlySeries,
    origin: int,
    train_end: int,
    lag: int = 168 * HOUR,
    m_samples: int = 200,
    seed: int = 0,
    pool: np.ndarray | None = None,
) -> EnsembleForecast | OmissionRecord:
    """Lagged point forecast plus M residuals resampled from training time.

    The point forecast at hour t is reference(t - lag) with a +/-1h
    fallback. Each of the M members draws one residual (uniform over the
    pool, seeded) and applies it across the whole 24-hour trajectory, as in
    y_hat_t + eps^(m). ``reference=target`` bootstraps the price itself;
    a fuel-cost signal gives the synthetic variant. Passing a precomputed
    ``pool`` skips the training-window scan.
    """
    if pool is None:
        pool = residual_pool(target, reference, train_end, lag)
    if pool.size == 0:
        raise ValueError("empty residual pool; check training coverage and lag")
    look = _Lookup(reference)
    point = np.empty(24)
    for h in range(24):
        v = _lagged(look, origin + h * HOUR, lag)
        if v is None:
            rec = OmissionRecord(origin, "bootstrap", f"lag unresolvable at hour {h} even with +/-1h")
            log.info("omitted origin %d: %s", origin, rec.reason)
            return rec
        point[h] = v
    rng = np.random.default_rng(seed)
    eps = rng.choice(pool, size=m_samples, replace=True)
    return EnsembleForecast(origin, point[None, :] + eps[:, None])


def run_baseline(
    history: HourlySeries,
    origins: list[int],
    method: str,
    reference: HourlySeries | None = None,
    train_end: int | None = None,
    lag: int = 168 * HOUR,
    m_samples: int = 200,
    seed: int = 0,
) -> tuple[list[EnsembleForecast], list[OmissionRecord]]:
    """Run one baseline over many origins, splitting hits from omissions.

    Bootstrap origins get independent derived seeds so ensembles stay
    deterministic under a fixed master seed yet differ across days.
    """
    forecasts, omissions = [], []
    pool = None
    if method in ("bootstrap-price", "bootstrap-synthetic"):
        if train_end is None:
            raise ValueError("bootstrap methods need train_end")
        ref = history if method == "bootstrap-price" else reference
        if ref is None:
            raise ValueError("bootstrap-synthetic needs a reference series")
        pool = residual_pool(history, ref, train_end, lag)
    for k, origin in enumerate(origins):
        if method == "same-hour-28d":
            out = baseline_same_hour_28d(history, origin)
        elif method == "same-hour-7d12m":
            out = baseline_7d_12m(history, origin)
        elif method == "bootstrap-price":
            out = baseline_bootstrap(
                history, history, origin, train_end, lag, m_samples, seed + k, pool
            )
        elif method == "bootstrap-synthetic":
            out = baseline_bootstrap(
                history, reference, origin, train_end, lag, m_samples, seed + k, pool
            )
        else:
            raise ValueError(f"unknown baseline method {method!r}")
        (forecasts if isinstance(out, EnsembleForecast) else omissions).append(out)
    return forecasts, omissions
