import numpy as np
import pytest

from dayahead.series import HOUR, load_csv, parse_timestamp
from dayahead.synthetic import generate_series, main, seed_cache


def test_identical_arguments_identical_series():
    a = generate_series("AA", "price", "2021-01-01", "2021-02-01", seed=5)
    b = generate_series("AA", "price", "2021-01-01", "2021-02-01", seed=5)
    assert np.array_equal(a.values, b.values)


def test_zone_feature_and_seed_all_decorrelate():
    base = generate_series("AA", "price", "2021-01-01", "2021-02-01", seed=5)
    for other in (
        generate_series("BB", "price", "2021-01-01", "2021-02-01", seed=5),
        generate_series("AA", "load", "2021-01-01", "2021-02-01", seed=5),
        generate_series("AA", "price", "2021-01-01", "2021-02-01", seed=6),
    ):
        assert not np.array_equal(base.values, other.values)


def test_series_axis_and_metadata():
    s = generate_series("AA", "gas_price", "2021-03-01", "2021-03-08")
    assert s.zone == "AA"
    assert s.name == "gas_price"
    assert s.timestamps[0] == parse_timestamp("2021-03-01")
    assert len(s) == 7 * 24
    assert np.all(np.diff(s.timestamps) == HOUR)
    assert np.all(np.isfinite(s.values))


def test_empty_interval_is_empty_series():
    s = generate_series("AA", "price", "2021-01-01", "2021-01-01")
    assert len(s) == 0


def test_daily_cycle_dominates_price():
    s = generate_series("AA", "price", "2021-01-01", "2021-07-01", seed=1)
    by_hour = s.values.reshape(-1, 24).mean(axis=0)
    # a 12 EUR daily harmonic must survive averaging over six months
    assert by_hour.max() - by_hour.min() > 8.0


def test_known_feature_levels():
    gas = generate_series("AA", "gas_price", "2021-01-01", "2021-04-01", seed=0)
    co2 = generate_series("AA", "co2_price", "2021-01-01", "2021-04-01", seed=0)
    assert abs(gas.values.mean() - 25.0) < 10.0
    assert abs(co2.values.mean() - 80.0) < 10.0


def test_unknown_feature_uses_default_params():
    s = generate_series("AA", "mystery", "2021-01-01", "2021-02-01")
    assert abs(s.values.mean() - 10.0) < 8.0


def test_seed_cache_writes_loadable_files(tmp_path):
    paths = seed_cache(
        tmp_path, ["AA", "BB"], ["price", "load"], "2021-01-01", "2021-01-08", seed=2
    )
    assert len(paths) == 4
    assert sorted(p.name for p in paths) == [
        "AA_load.csv",
        "AA_price.csv",
        "BB_load.csv",
        "BB_price.csv",
    ]
    for p in paths:
        s = load_csv(p)
        assert len(s) == 7 * 24


def test_seed_cache_is_byte_deterministic(tmp_path):
    a = seed_cache(tmp_path / "one", ["AA"], ["price"], "2021-01-01", "2021-01-08")
    b = seed_cache(tmp_path / "two", ["AA"], ["price"], "2021-01-01", "2021-01-08")
    assert a[0].read_bytes() == b[0].read_bytes()


def test_cli_entry_point(tmp_path, capsys):
    rc = main(
        [
            "--cache-dir",
            str(tmp_path),
            "--zones",
            "AA,BB",
            "--features",
            "price",
            "--start",
            "2021-01-01",
            "--end",
            "2021-01-03",
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 2
    assert (tmp_path / "AA_price.csv").exists()


def test_cli_requires_start(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["--cache-dir", str(tmp_path), "--zones", "AA", "--end", "2021-01-02"])
    assert err.value.code == 2
