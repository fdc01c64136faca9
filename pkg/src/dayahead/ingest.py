"""Market-data client, local cache and experiment splits.

Fetches hourly series per (zone, feature) from a JSON endpoint exposing
parallel ``unix_seconds``/value arrays, caches them as CSV, and carves
feature bundles into the train/validation/test window sets, including the
zero/one/few-shot variants where donor zones supply the training windows
and the target zone contributes nothing, one 192-hour sample, or the final
30 days of the validation year.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import requests

from .features import FeatureBundle
from .series import (
    HOUR,
    HourlySeries,
    ParseError,
    format_timestamp,
    from_records,
    load_csv,
    parse_timestamp,
    save_csv,
)
from .windows import CONTEXT, HORIZON, SampleWindow, make_windows

log = logging.getLogger(__name__)

POLITENESS_SECONDS = 0.2
RETRY_ATTEMPTS = 3
FEW_SHOT_DAYS = 30
ONE_SHOT_HOURS = CONTEXT + HORIZON

STRATEGIES = ("full", "zero-shot", "one-shot", "few-shot")

KNOWN_FEATURES = (
    "price",
    "gas_price",
    "co2_price",
    "load",
    "nonrenewable_generation",
    "renewable_generation",
    "cross_border_flow",
)


class TransportError(RuntimeError):
    """Network failure that survived every retry."""


@dataclass(frozen=True)
class ZoneConfig:
    zone: str
    endpoint: str
    features: tuple[str, ...] = ("price",)
    cache_dir: str = "cache"

    def __post_init__(self):
        if not self.zone:
            raise ValueError("zone code must be non-empty")
        unknown = [f for f in self.features if f not in KNOWN_FEATURES]
        if unknown:
            raise ValueError(f"unknown features {unknown}; known: {list(KNOWN_FEATURES)}")

    def cache_path(self, feature: str) -> Path:
        return Path(self.cache_dir) / f"{self.zone}_{feature}.csv"


@dataclass(frozen=True)
class DatasetSplits:
    """Half-open [start, end) intervals, ordered train < val < test."""

    train: tuple[int, int]
    val: tuple[int, int]
    test: tuple[int, int]
    increment: str = "none"  # none | one-window | few-shot-days
    few_shot_days: int = FEW_SHOT_DAYS

    def __post_init__(self):
        for name, (a, b) in (("train", self.train), ("val", self.val), ("test", self.test)):
            if a >= b:
                raise ValueError(f"{name} interval is empty or reversed")
        if not (self.train[1] <= self.val[0] and self.val[1] <= self.test[0]):
            raise ValueError("intervals must be disjoint and ordered train < val < test")
        if self.increment not in ("none", "one-window", "few-shot-days"):
            raise ValueError(f"unknown increment {self.increment!r}")

    @classmethod
    def default(cls) -> "DatasetSplits":
        return cls.from_dates("2018-10-01", "2023-01-01", "2024-01-01", "2025-01-01")

    @classmethod
    def from_dates(cls, train_start, val_start, test_start, test_end, **kw):
        t0, v0, s0, s1 = (
            parse_timestamp(d) for d in (train_start, val_start, test_start, test_end)
        )
        return cls(train=(t0, v0), val=(v0, s0), test=(s0, s1), **kw)


def _politeness_gate(state={"last": 0.0}):
    wait = state["last"] + POLITENESS_SECONDS - time.monotonic()
    if wait > 0:
        time.sleep(wait)
    state["last"] = time.monotonic()


def _parse_payload(doc, zone: str, feature: str) -> HourlySeries:
    if not isinstance(doc, dict) or "unix_seconds" not in doc:
        raise ParseError("payload missing 'unix_seconds' array", index=0)
    key = feature if feature in doc else "price"
    if key not in doc:
        raise ParseError(f"payload missing value array for {feature!r}", index=0)
    seconds, values = doc["unix_seconds"], doc[key]
    if len(seconds) != len(values):
        raise ParseError(
            f"parallel arrays disagree: {len(seconds)} timestamps vs {len(values)} values",
            index=0,
        )
    records = []
    for i, (ts, v) in enumerate(zip(seconds, values)):
        if ts is None or v is None:
            continue  # nulls are gaps
        try:
            records.append((int(ts), float(v)))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"bad record: {exc}", index=i) from None
    return from_records(zone, feature, records, duplicates="first")


def fetch_prices(
    config: ZoneConfig,
    start,
    end,
    feature: str = "price",
    getter=None,
) -> HourlySeries:
    """Hourly values over [start, end), cache first, network second.

    A cache file whose span covers the interval is served directly. On a
    miss the endpoint is queried with 3 attempts and exponential backoff,
    at most one request per 200 ms, and the merged result is written back.
    ``getter(url) -> parsed JSON`` exists for tests; the default performs a
    real HTTP GET.
    """
    start, end = parse_timestamp(start), parse_timestamp(end)
    if end <= start:
        return HourlySeries(config.zone, feature, np.array([], dtype=np.int64), np.array([]))

    path = config.cache_path(feature)
    cached = None
    if path.exists():
        cached = load_csv(path, zone=config.zone, name=feature)
        if (
            len(cached)
            and cached.timestamps[0] <= start
            and cached.timestamps[-1] >= end - HOUR
        ):
            return cached.slice_utc(start, end)

    url = (
        f"{config.endpoint.rstrip('/')}/{feature}"
        f"?bzn={config.zone}&start={format_timestamp(start)}&end={format_timestamp(end)}"
    )
    if getter is None:
        def getter(u):
            resp = requests.get(u, timeout=30)
            resp.raise_for_status()
            return resp.json()

    doc, last_error = None, None
    for attempt in range(RETRY_ATTEMPTS):
        _politeness_gate()
        try:
            doc = getter(url)
            break
        except ParseError:
            raise
        except Exception as exc:  # transport trouble: retry with backoff
            last_error = exc
            if attempt < RETRY_ATTEMPTS - 1:
                time.sleep(0.5 * 2**attempt)
    if doc is None:
        raise TransportError(
            f"GET {url} failed after {RETRY_ATTEMPTS} attempts: {last_error}"
        )

    series = _parse_payload(doc, config.zone, feature)

    if cached is not None and len(cached):
        merged = {int(t): float(v) for t, v in zip(cached.timestamps, cached.values)}
        for t, v in zip(series.timestamps, series.values):
            merged[int(t)] = float(v)
        items = sorted(merged.items())
        series = HourlySeries(
            config.zone,
            feature,
            np.array([t for t, _ in items], dtype=np.int64),
            np.array([v for _, v in items]),
        )
    path.parent.mkdir(parents=True, exist_ok=True)
    save_csv(series, path)
    return series.slice_utc(start, end)


def slice_bundle(bundle: FeatureBundle, start: int, end: int) -> FeatureBundle:
    """Bundle restricted to [start, end); errors name the missing span."""
    ts = bundle.timestamps
    if ts.size == 0 or ts[0] > start or ts[-1] < end - HOUR:
        have = (
            f"{format_timestamp(int(ts[0]))}..{format_timestamp(int(ts[-1]) + HOUR)}"
            if ts.size
            else "nothing"
        )
        raise ValueError(
            f"bundle for {bundle.zone} covers {have}, "
            f"need {format_timestamp(start)}..{format_timestamp(end)}"
        )
    lo = int(np.searchsorted(ts, start))
    hi = int(np.searchsorted(ts, end))
    return replace(
        bundle, timestamps=ts[lo:hi].copy(), matrix=bundle.matrix[lo:hi].copy()
    )


@dataclass
class SplitSet:
    """Windows per role; training windows are grouped by source zone.

    ``train_intervals`` records which [start, end) hours of which zone feed
    training, so downstream standardizers can fit on exactly those rows.
    """

    strategy: str
    target_zone: str
    train: dict[str, list[SampleWindow]]
    val: list[SampleWindow]
    test: list[SampleWindow]
    train_intervals: dict[str, tuple[int, int]]

    @property
    def n_train(self) -> int:
        return sum(len(ws) for ws in self.train.values())


def _clamp(bundle: FeatureBundle, interval: tuple[int, int]) -> tuple[int, int] | None:
    """Requested interval intersected with the bundle's available axis.

    Feature bundles start one week late when lagged proxy columns consume
    history, so calendar-defined split intervals are trimmed to the hours
    that actually exist. None when nothing remains.
    """
    ts = bundle.timestamps
    if ts.size == 0:
        return None
    lo = max(interval[0], int(ts[0]))
    hi = min(interval[1], int(ts[-1]) + HOUR)
    return (lo, hi) if lo < hi else None


def _windows_in(bundle: FeatureBundle, interval: tuple[int, int], stride: int):
    span = _clamp(bundle, interval)
    if span is None:
        return [], None
    return make_windows(slice_bundle(bundle, *span), stride=stride), span


def _overlaps(w: SampleWindow, interval: tuple[int, int]) -> bool:
    w_start = w.origin - CONTEXT * HOUR
    w_end = w.origin + HORIZON * HOUR
    return w_start < interval[1] and w_end > interval[0]


def build_splits(
    bundles: dict[str, FeatureBundle],
    target_zone: str,
    splits: DatasetSplits,
    strategy: str | None = None,
) -> SplitSet:
    """Window sets for one experiment.

    full: target-zone training windows over the train interval at stride 1.
    zero-shot: donor-zone training windows over train+validation years, no
    target-zone training data. one-shot adds exactly one 192-hour
    target-zone window from the end of the validation year; few-shot adds
    the final ``few_shot_days`` days of it at 24-hour stride. Validation
    and test windows always come from the target zone at 24-hour stride and
    never overlap any hour used for target-zone training.
    """
    if strategy is None:
        strategy = {
            "none": "zero-shot",
            "one-window": "one-shot",
            "few-shot-days": "few-shot",
        }[splits.increment]
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if target_zone not in bundles:
        raise ValueError(f"no bundle for target zone {target_zone!r}")

    target = bundles[target_zone]
    train: dict[str, list[SampleWindow]] = {}
    intervals: dict[str, tuple[int, int]] = {}
    increment_span = None

    if strategy == "full":
        train[target_zone], span = _windows_in(target, splits.train, stride=1)
        if span is not None:
            intervals[target_zone] = span
    else:
        donor_interval = (splits.train[0], splits.val[1])
        for zone in sorted(bundles):
            if zone == target_zone:
                continue
            train[zone], span = _windows_in(bundles[zone], donor_interval, stride=1)
            if span is not None:
                intervals[zone] = span
        if strategy == "one-shot":
            increment_span = (splits.val[1] - ONE_SHOT_HOURS * HOUR, splits.val[1])
        elif strategy == "few-shot":
            increment_span = (
                splits.val[1] - splits.few_shot_days * 24 * HOUR,
                splits.val[1],
            )
        if increment_span is not None:
            train[target_zone], span = _windows_in(target, increment_span, stride=24)
            if span is not None:
                intervals[target_zone] = span

    val, _ = _windows_in(target, splits.val, stride=24)
    if increment_span is not None:
        val = [w for w in val if not _overlaps(w, increment_span)]
    test, _ = _windows_in(target, splits.test, stride=24)
    return SplitSet(strategy, target_zone, train, val, test, intervals)
