"""Hourly time-series container and CSV persistence.

All series live on a UTC hourly axis. Timestamps are int64 unix seconds
aligned to the top of the hour; a timestamp marks the start of the hour it
labels. Zone-local semantics (calendar features, holidays) are derived from
the zone's IANA timezone, never stored on the axis itself.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace

import numpy as np

HOUR = 3600


class ParseError(ValueError):
    """Malformed record in an external payload or CSV file.

    Carries the offending record index so callers can report it.
    """

    def __init__(self, message: str, index: int | None = None):
        self.index = index
        if index is not None:
            message = f"record {index}: {message}"
        super().__init__(message)


def parse_timestamp(text) -> int:
    """Parse an ISO-8601 instant to unix seconds.

    Accepts 'Z' or an explicit numeric offset; a bare date means midnight
    UTC. Integers pass through unchanged so parsed values can be re-fed.
    Anything else raises ParseError.
    """
    from datetime import datetime, timezone

    if isinstance(text, (int, np.integer)):
        return int(text)
    t = text.strip()
    try:
        if len(t) == 10:
            dt = datetime.strptime(t, "%Y-%m-%d").replace(tzinfo=timezone.utc)
        else:
            dt = datetime.fromisoformat(t.replace("Z", "+00:00"))
    except ValueError as exc:
        raise ParseError(f"bad timestamp {text!r}: {exc}") from None
    if dt.tzinfo is None:
        raise ParseError(f"timestamp {text!r} has no UTC offset")
    return int(dt.timestamp())


def format_timestamp(ts: int) -> str:
    """Render unix seconds as 'YYYY-MM-DDTHH:MM:SSZ'."""
    from datetime import datetime, timezone

    return datetime.fromtimestamp(int(ts), tz=timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ"
    )


def format_value(x: float) -> str:
    # canonical number formatting shared by every CSV artifact: up to six
    # decimals, trailing zeros trimmed, so identical floats give identical bytes
    if not np.isfinite(x):
        raise ValueError(f"non-finite value {x!r} cannot be serialized")
    s = np.format_float_positional(
        round(float(x), 6), precision=6, unique=False, trim="-"
    )
    return "0" if s in ("-0", "") else s


@dataclass(frozen=True)
class HourlySeries:
    """One variable for one zone on a strictly increasing hourly UTC axis.

    ``filled`` flags hours whose value was forward-filled during
    regularization rather than observed. The axis may contain holes (a raw
    fetch) until :func:`regularize` is applied; it may never contain
    duplicates or sub-hourly offsets.
    """

    zone: str
    name: str
    timestamps: np.ndarray
    values: np.ndarray
    filled: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)
        if self.filled is None:
            object.__setattr__(self, "filled", np.zeros(ts.shape, dtype=bool))
        else:
            object.__setattr__(self, "filled", np.asarray(self.filled, dtype=bool))
        if ts.ndim != 1 or vals.shape != ts.shape or self.filled.shape != ts.shape:
            raise ValueError("timestamps, values and filled must be 1-D and aligned")
        if ts.size and np.any(ts % HOUR != 0):
            raise ValueError("timestamps must be aligned to the top of the hour")
        if ts.size > 1 and np.any(np.diff(ts) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if vals.size and not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")

    def __len__(self) -> int:
        return int(self.timestamps.size)

    @property
    def is_contiguous(self) -> bool:
        if len(self) < 2:
            return True
        return bool(np.all(np.diff(self.timestamps) == HOUR))

    def slice_utc(self, start: int, end: int) -> "HourlySeries":
        """Rows with start <= timestamp < end."""
        keep = (self.timestamps >= start) & (self.timestamps < end)
        return replace(
            self,
            timestamps=self.timestamps[keep],
            values=self.values[keep],
            filled=self.filled[keep],
        )

    def index_of(self, ts: int) -> int:
        """Position of a timestamp, or -1 if absent."""
        i = int(np.searchsorted(self.timestamps, ts))
        if i < len(self) and self.timestamps[i] == ts:
            return i
        return -1


def from_records(
    zone: str,
    name: str,
    records: list[tuple[int, float]],
    duplicates: str = "first",
) -> HourlySeries:
    """Build a series from (unix seconds, value) pairs.

    Records are sorted; duplicate timestamps (a DST fall-back hour reported
    twice) are collapsed with the given policy: ``first`` keeps the earliest
    record, ``mean`` averages them.
    """
    if duplicates not in ("first", "mean"):
        raise ValueError(f"unknown duplicate policy {duplicates!r}")
    if not records:
        return HourlySeries(zone, name, np.array([], np.int64), np.array([]))
    ts = np.array([int(r[0]) for r in records], dtype=np.int64)
    vals = np.array([float(r[1]) for r in records], dtype=np.float64)
    order = np.argsort(ts, kind="stable")
    ts, vals = ts[order], vals[order]
    uniq, start_idx, counts = np.unique(ts, return_index=True, return_counts=True)
    if duplicates == "first":
        out = vals[start_idx]
    else:
        out = np.array(
            [vals[i : i + c].mean() for i, c in zip(start_idx, counts)]
        )
    return HourlySeries(zone, name, uniq, out)


def regularize(series: HourlySeries) -> HourlySeries:
    """Forward-fill onto a contiguous hourly axis between first and last hour.

    Every hole is filled with the most recent observed value and flagged in
    ``filled``. Observed rows keep their flag from the input.
    """
    if len(series) == 0:
        return series
    full = np.arange(series.timestamps[0], series.timestamps[-1] + HOUR, HOUR)
    pos = np.searchsorted(series.timestamps, full, side="right") - 1
    values = series.values[pos]
    filled = series.filled[pos] | (series.timestamps[pos] != full)
    return replace(series, timestamps=full, values=values, filled=filled)


def save_csv(series: HourlySeries, path) -> None:
    """Write `timestamp_utc,value` rows, LF line endings, UTF-8."""
    buf = io.StringIO()
    buf.write("timestamp_utc,value\n")
    for ts, v in zip(series.timestamps, series.values):
        buf.write(f"{format_timestamp(ts)},{format_value(v)}\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(buf.getvalue())


def load_csv(path, zone: str = "", name: str = "") -> HourlySeries:
    """Read a file produced by :func:`save_csv`.

    Raises ParseError with the offending row index on malformed input.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "timestamp_utc,value":
        raise ParseError("missing 'timestamp_utc,value' header", index=0)
    ts, vals = [], []
    for i, line in enumerate(lines[1:], start=1):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 2 fields, got {len(parts)}", index=i)
        try:
            ts.append(parse_timestamp(parts[0]))
            vals.append(float(parts[1]))
        except ParseError as exc:
            raise ParseError(str(exc), index=i) from None
        except ValueError:
            raise ParseError(f"bad value {parts[1]!r}", index=i) from None
    return HourlySeries(zone, name, np.array(ts, np.int64), np.array(vals))
