import numpy as np

from dayahead.series import HOUR, HourlySeries, parse_timestamp


def hourly(zone="ZZ", name="price", start="2023-01-01", days=30.0, fn=None):
    """Contiguous hourly series starting at a UTC date."""
    t0 = parse_timestamp(start)
    ts = t0 + HOUR * np.arange(int(round(days * 24)), dtype=np.int64)
    values = fn(ts) if fn is not None else np.zeros(ts.size)
    return HourlySeries(zone, name, ts, np.asarray(values, dtype=np.float64))


def daily_profile(ts):
    """Smooth deterministic shape keyed to hour of day and day of week."""
    hour = (ts // HOUR) % 24
    dow = (ts // (24 * HOUR)) % 7
    return (
        50.0
        + 10.0 * np.sin(2 * np.pi * hour / 24.0)
        + 5.0 * np.cos(2 * np.pi * dow / 7.0)
    )
