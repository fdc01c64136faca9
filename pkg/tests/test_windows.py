import numpy as np
import pytest

from dayahead import features as df
from dayahead import windows as dw
from dayahead.series import HOUR

from conftest import hourly


def test_standardizer_population_formula():
    fit = dw.fit_standardizer(np.array([[0.0], [2.0]]), ("x",))
    assert fit.mean[0] == 1.0
    assert fit.std[0] == 1.0  # population std, not sample
    assert fit.apply(np.array([[2.0]]))[0, 0] == 1.0


def test_standardizer_constant_column_floors():
    fit = dw.fit_standardizer(np.full((5, 1), 3.25), ("x",))
    assert fit.std[0] == 1e-8
    assert np.all(fit.apply(np.full((5, 1), 3.25)) == 0.0)


def test_standardizer_round_trip():
    rng = np.random.default_rng(11)
    x = rng.normal(50, 30, size=(200, 6))
    fit = dw.fit_standardizer(x, tuple("abcdef"))
    back = fit.invert(fit.apply(x))
    assert np.max(np.abs(back - x) / np.maximum(np.abs(x), 1.0)) < 1e-9


def test_standardizer_rejects_empty():
    with pytest.raises(ValueError):
        dw.fit_standardizer(np.empty((0, 2)), ("a", "b"))


def _price_bundle(hours, groups=("calendar",), extra=None):
    price = hourly(days=hours / 24, fn=lambda ts: np.arange(ts.size, dtype=float))
    covs = extra or {}
    return df.build_bundle(price, covs, groups=groups)


def test_window_count_formula_exhaustive():
    for total_hours in range(192, 401):
        bundle = _price_bundle(total_hours)
        for stride in (1, 24):
            got = len(dw.make_windows(bundle, stride=stride))
            assert got == (total_hours - 192) // stride + 1, (total_hours, stride)


def test_window_count_examples():
    assert len(dw.make_windows(_price_bundle(192), stride=24)) == 1
    assert len(dw.make_windows(_price_bundle(216), stride=24)) == 2
    assert len(dw.make_windows(_price_bundle(216), stride=1)) == 25


def test_short_bundle_warns_and_returns_empty(caplog):
    bundle = _price_bundle(191)
    with caplog.at_level("WARNING"):
        out = dw.make_windows(bundle, stride=1)
    assert out == []
    assert any("no windows" in r.message for r in caplog.records)


def test_target_follows_inputs_and_origin_is_first_target_hour():
    bundle = _price_bundle(240)
    w = dw.make_windows(bundle, stride=24)[0]
    assert w.origin == bundle.timestamps[168]
    assert np.array_equal(w.inputs[:, 0], np.arange(168.0))
    assert np.array_equal(w.target, np.arange(168.0, 192.0))
    # stride 24 gives disjoint target days
    ws = dw.make_windows(bundle, stride=24)
    assert ws[1].origin - ws[0].origin == 24 * HOUR


def test_stride_must_be_1_or_24():
    with pytest.raises(ValueError):
        dw.make_windows(_price_bundle(240), stride=2)


def _masked_window():
    days = 16
    rng = np.random.default_rng(2)
    price = hourly(days=days, fn=lambda ts: rng.normal(60, 5, ts.size))
    covs = {
        "co2_price": hourly(name="co2_price", days=days, fn=lambda ts: np.full(ts.size, 7.0)),
        "load": hourly(name="load", days=days, fn=lambda ts: np.arange(ts.size, dtype=float)),
    }
    bundle = df.build_bundle(price, covs, groups=("calendar", "R1"))
    return dw.make_windows(bundle, stride=24)[0]


def test_mask_overwrites_final_14_input_hours():
    w = _masked_window()
    masked = dw.apply_mask(w, mask_value=0.0)
    j = w.feature_names.index("load")
    assert np.all(masked.inputs[154:168, j] == 0.0)
    assert np.array_equal(masked.inputs[:154, j], w.inputs[:154, j])
    assert not masked.known_mask[154:168, j].any()
    assert (masked.inputs[154:168, j] != w.inputs[154:168, j]).sum() == 14


def test_mask_is_idempotent_and_spares_known_cells():
    w = _masked_window()
    once = dw.apply_mask(w, mask_value=-1.5)
    twice = dw.apply_mask(once, mask_value=-1.5)
    assert np.array_equal(once.inputs, twice.inputs)
    assert np.array_equal(once.known_mask, twice.known_mask)
    # cells that stay known are never altered, target untouched
    keep = w.known_mask[:168]
    assert np.array_equal(once.inputs[keep], w.inputs[keep])
    assert np.array_equal(once.target, w.target)
    assert np.array_equal(once.future, w.future, equal_nan=True)


def test_mask_leaves_calendar_only_window_unchanged():
    bundle = _price_bundle(240)
    w = dw.make_windows(bundle, stride=24)[0]
    masked = dw.apply_mask(w, mask_value=99.0)
    assert np.array_equal(masked.inputs, w.inputs)
    assert np.array_equal(masked.known_mask, w.known_mask)


def test_known_mask_encodes_availability():
    w = _masked_window()
    names = w.feature_names
    j_load = names.index("load")
    j_proxy = names.index("load_prev_week")
    j_price = names.index("price")
    j_cal = names.index("hour_sin")
    assert not w.known_mask[154:192, j_load].any()
    assert w.known_mask[:154, j_load].all()
    assert w.known_mask[:, j_proxy].all()
    assert w.known_mask[:, j_cal].all()
    assert w.known_mask[:168, j_price].all()
    assert not w.known_mask[168:, j_price].any()
    # horizon-side unknown covariates are NaN in future rows
    assert np.isnan(w.future[:, j_load]).all()
    assert np.isfinite(w.future[:, j_proxy]).all()
