"""Feature engineering: calendar encodings, fuel-based synthetic price,
feature-group registry and assembly of aligned feature matrices.

A feature bundle is the model-facing view of one zone: a contiguous hourly
axis, the price in column 0, and named covariate columns. Every time-varying
market covariate appears in two representations: ``past-only`` (the observed
series, hidden near the forecast origin) and ``future-proxy`` (the same
series one week earlier, known over the whole window).
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from zoneinfo import ZoneInfo

import numpy as np

from .series import HOUR, HourlySeries

WEEK = 168 * HOUR

CALENDAR_COLUMNS = (
    "hour_sin",
    "hour_cos",
    "dow_sin",
    "dow_cos",
    "month_sin",
    "month_cos",
    "is_weekend",
    "is_holiday",
)

# group id -> member covariate names, in presentation order
GROUP_MEMBERS: dict[str, tuple[str, ...]] = {
    "R1": ("co2_price", "load"),
    "R2": ("gas_price", "synthetic_price"),
    "R3": ("nonrenewable_generation", "renewable_generation"),
    "R4": ("cross_border_flow", "nonrenewable_generation", "renewable_generation"),
    "R5": ("load", "nonrenewable_generation", "renewable_generation"),
}

PROXY_SUFFIX = "_prev_week"


def cyclical_encode(value: int, period: int) -> tuple[float, float]:
    """Map an integer phase onto the unit circle.

    Returns (sin(2*pi*value/period), cos(2*pi*value/period)).
    """
    if period <= 0:
        raise ValueError(f"period must be positive, got {period}")
    if not 0 <= value < period:
        raise ValueError(f"value {value} outside [0, {period})")
    phase = 2.0 * np.pi * value / period
    return float(np.sin(phase)), float(np.cos(phase))


def _local_fields(timestamps: np.ndarray, tz: str):
    zone = ZoneInfo(tz)
    hours = np.empty(timestamps.size, dtype=np.int64)
    dows = np.empty_like(hours)
    months = np.empty_like(hours)
    dates = []
    for i, ts in enumerate(timestamps):
        dt = datetime.fromtimestamp(int(ts), tz=timezone.utc).astimezone(zone)
        hours[i] = dt.hour
        dows[i] = dt.weekday()
        months[i] = dt.month
        dates.append(dt.strftime("%Y-%m-%d"))
    return hours, dows, months, dates


def build_calendar_features(
    timestamps: np.ndarray, tz: str = "UTC", holidays: set[str] | None = None
) -> np.ndarray:
    """Eight deterministic columns per hour.

    hour/day-of-week/month as sin-cos pairs plus binary weekend and holiday
    flags, all computed in the zone-local clock. ``holidays`` is a set of
    zone-local 'YYYY-MM-DD' dates.
    """
    holidays = holidays or set()
    hours, dows, months, dates = _local_fields(np.asarray(timestamps, np.int64), tz)
    out = np.empty((hours.size, 8), dtype=np.float64)
    out[:, 0] = np.sin(2 * np.pi * hours / 24.0)
    out[:, 1] = np.cos(2 * np.pi * hours / 24.0)
    out[:, 2] = np.sin(2 * np.pi * dows / 7.0)
    out[:, 3] = np.cos(2 * np.pi * dows / 7.0)
    out[:, 4] = np.sin(2 * np.pi * (months - 1) / 12.0)
    out[:, 5] = np.cos(2 * np.pi * (months - 1) / 12.0)
    out[:, 6] = (dows >= 5).astype(np.float64)
    out[:, 7] = np.array([d in holidays for d in dates], dtype=np.float64)
    return out


def synthetic_price(gas_price, co2_price):
    """Marginal cost of a gas plant: gas/0.55 + 400*co2/1000 (EUR/MWh).

    0.55 is the assumed plant efficiency and 400 gCO2/kWh its emission
    intensity; co2_price is quoted in EUR/tCO2. Accepts scalars or arrays.
    """
    gas = np.asarray(gas_price, dtype=np.float64)
    co2 = np.asarray(co2_price, dtype=np.float64)
    if np.any(gas < 0) or np.any(co2 < 0):
        raise ValueError("gas_price and co2_price must be non-negative")
    out = gas / 0.55 + 400.0 * co2 / 1000.0
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FeatureSpec:
    """A homogeneous slice of one feature group."""

    group: str
    members: tuple[str, ...]
    representation: str  # "past-only" | "future-proxy"
    market_dependent: bool


def group_specs(group: str) -> tuple[FeatureSpec, ...]:
    """Specs for one group id: calendar gives a single known slice, R-groups
    give a masked past-only slice plus a fully known week-lag proxy slice."""
    if group == "calendar":
        return (FeatureSpec("calendar", CALENDAR_COLUMNS, "past-only", False),)
    if group not in GROUP_MEMBERS:
        raise ValueError(f"unknown feature group {group!r}")
    members = GROUP_MEMBERS[group]
    proxies = tuple(m + PROXY_SUFFIX for m in members)
    return (
        FeatureSpec(group, members, "past-only", True),
        FeatureSpec(group, proxies, "future-proxy", False),
    )


@dataclass(frozen=True)
class ColumnSpec:
    """One bundle column: its name, originating group and availability."""

    name: str
    group: str
    representation: str
    market_dependent: bool


@dataclass(frozen=True)
class FeatureBundle:
    """Aligned per-zone design data on a contiguous hourly axis.

    Column 0 is always the day-ahead price (the forecast target).
    """

    zone: str
    timestamps: np.ndarray
    columns: tuple[ColumnSpec, ...]
    matrix: np.ndarray

    def __post_init__(self):
        if self.matrix.shape != (self.timestamps.size, len(self.columns)):
            raise ValueError("matrix shape does not match axis and columns")
        if not self.columns or self.columns[0].name != "price":
            raise ValueError("column 0 must be the price")
        if self.timestamps.size > 1 and not np.all(
            np.diff(self.timestamps) == HOUR
        ):
            raise ValueError("bundle axis must be contiguous hourly")

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def column_index(self, name: str) -> int:
        return self.column_names.index(name)


def _require_contiguous(s: HourlySeries, what: str):
    if len(s) == 0:
        raise ValueError(f"{what} series is empty")
    if not s.is_contiguous:
        raise ValueError(f"{what} series has gaps; regularize it first")


def build_bundle(
    price: HourlySeries,
    covariates: dict[str, HourlySeries] | None = None,
    groups: tuple[str, ...] = ("calendar",),
    tz: str = "UTC",
    holidays: set[str] | None = None,
) -> FeatureBundle:
    """Assemble price, calendar and requested group columns on one axis.

    The axis is the widest span over which every requested column is
    defined; week-lag proxies shorten it from the left by up to 168 hours.
    ``synthetic_price`` is derived on the fly from gas_price and co2_price
    when absent from ``covariates``. Duplicate member names across groups
    (the generation mix appears in R3, R4 and R5) are emitted once.
    """
    covariates = dict(covariates or {})
    _require_contiguous(price, "price")

    specs: list[FeatureSpec] = []
    for g in groups:
        specs.extend(group_specs(g))

    needed = set()
    for spec in specs:
        if spec.group == "calendar":
            continue
        needed.update(m.removesuffix(PROXY_SUFFIX) for m in spec.members)
    if "synthetic_price" in needed and "synthetic_price" not in covariates:
        for dep in ("gas_price", "co2_price"):
            if dep not in covariates:
                raise ValueError(f"synthetic_price needs covariate {dep!r}")
        gas, co2 = covariates["gas_price"], covariates["co2_price"]
        _require_contiguous(gas, "gas_price")
        _require_contiguous(co2, "co2_price")
        start = max(gas.timestamps[0], co2.timestamps[0])
        end = min(gas.timestamps[-1], co2.timestamps[-1]) + HOUR
        g_cut = gas.slice_utc(start, end)
        c_cut = co2.slice_utc(start, end)
        covariates["synthetic_price"] = HourlySeries(
            price.zone,
            "synthetic_price",
            g_cut.timestamps,
            synthetic_price(g_cut.values, c_cut.values),
        )
    for name in sorted(needed):
        if name not in covariates:
            raise ValueError(f"missing covariate series {name!r}")
        _require_contiguous(covariates[name], name)

    # widest axis on which every column is defined
    start = int(price.timestamps[0])
    end = int(price.timestamps[-1]) + HOUR
    col_specs: list[ColumnSpec] = [ColumnSpec("price", "price", "past-only", False)]
    seen = {"price"}
    for spec in specs:
        for member in spec.members:
            if member in seen:
                continue
            seen.add(member)
            col_specs.append(
                ColumnSpec(member, spec.group, spec.representation, spec.market_dependent)
            )
            if spec.group == "calendar":
                continue
            src = covariates[member.removesuffix(PROXY_SUFFIX)]
            lag = WEEK if spec.representation == "future-proxy" else 0
            start = max(start, int(src.timestamps[0]) + lag)
            end = min(end, int(src.timestamps[-1]) + HOUR + lag)
    if end - start < HOUR:
        raise ValueError("no common span across requested features")

    axis = np.arange(start, end, HOUR, dtype=np.int64)
    calendar = build_calendar_features(axis, tz=tz, holidays=holidays)
    matrix = np.empty((axis.size, len(col_specs)), dtype=np.float64)
    for j, cs in enumerate(col_specs):
        if cs.name == "price":
            matrix[:, j] = price.slice_utc(start, end).values
        elif cs.group == "calendar":
            matrix[:, j] = calendar[:, CALENDAR_COLUMNS.index(cs.name)]
        else:
            src = covariates[cs.name.removesuffix(PROXY_SUFFIX)]
            lag = WEEK if cs.representation == "future-proxy" else 0
            matrix[:, j] = src.slice_utc(start - lag, end - lag).values
    return FeatureBundle(price.zone, axis, tuple(col_specs), matrix)
