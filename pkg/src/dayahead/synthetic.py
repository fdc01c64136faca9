"""Deterministic synthetic market data.

Every series is base level + daily harmonic + weekly harmonic + AR(1)
noise, fully determined by (seed, zone, feature). Useful for offline runs,
integration tests and seeding the fetch cache without touching a network.
"""

from __future__ import annotations

import argparse
import zlib
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .series import HOUR, HourlySeries, parse_timestamp, save_csv

# name -> (base, daily amplitude, weekly amplitude, ar coefficient, noise sd)
_PARAMS = {
    "price": (45.0, 12.0, 5.0, 0.90, 2.0),
    "gas_price": (25.0, 2.0, 1.5, 0.97, 0.6),
    "co2_price": (80.0, 1.0, 1.0, 0.98, 0.5),
    "load": (60.0, 15.0, 8.0, 0.85, 1.5),
    "nonrenewable_generation": (35.0, 8.0, 4.0, 0.90, 1.2),
    "renewable_generation": (20.0, 6.0, 3.0, 0.92, 2.0),
    "cross_border_flow": (0.0, 3.0, 2.0, 0.80, 1.0),
}
_DEFAULT = (10.0, 2.0, 1.0, 0.90, 1.0)


def generate_series(zone: str, name: str, start, end, seed: int = 0) -> HourlySeries:
    """Hourly values over [start, end), identical for identical arguments."""
    start, end = parse_timestamp(start), parse_timestamp(end)
    ts = np.arange(start, end, HOUR, dtype=np.int64)
    if ts.size == 0:
        return HourlySeries(zone, name, ts, np.array([]))
    base, daily, weekly, phi, sigma = _PARAMS.get(name, _DEFAULT)
    rng = np.random.default_rng(
        (seed, zlib.crc32(zone.encode()), zlib.crc32(name.encode()))
    )
    phase_d, phase_w = rng.uniform(0, 2 * np.pi, size=2)
    hours = ts // HOUR
    values = (
        base
        + daily * np.sin(2 * np.pi * (hours % 24) / 24.0 + phase_d)
        + weekly * np.sin(2 * np.pi * (hours % 168) / 168.0 + phase_w)
        + lfilter([1.0], [1.0, -phi], sigma * rng.standard_normal(ts.size))
    )
    return HourlySeries(zone, name, ts, values)


def seed_cache(cache_dir, zones, features, start, end, seed: int = 0) -> list[Path]:
    """Write one cache CSV per (zone, feature) and return the paths."""
    out = []
    root = Path(cache_dir)
    root.mkdir(parents=True, exist_ok=True)
    for zone in zones:
        for feature in features:
            series = generate_series(zone, feature, start, end, seed=seed)
            path = root / f"{zone}_{feature}.csv"
            save_csv(series, path)
            out.append(path)
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="seed a fetch cache with synthetic market data"
    )
    parser.add_argument("--cache-dir", required=True)
    parser.add_argument("--zones", required=True, help="comma-separated zone codes")
    parser.add_argument("--features", default="price", help="comma-separated names")
    parser.add_argument("--start", required=True)
    parser.add_argument("--end", required=True)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    paths = seed_cache(
        args.cache_dir,
        [z for z in args.zones.split(",") if z],
        [f for f in args.features.split(",") if f],
        args.start,
        args.end,
        seed=args.seed,
    )
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
