"""End-to-end forecast pipeline.

Wires the pieces together for one experiment: split windows, fit the
standardizer on training rows only, train the backbone on masked
standardized windows, draw weight- or dropout-ensembles, convert them back
to price units, calibrate the quantile head on the validation year, and
score dense quantile forecasts on the test year.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .forecasts import EnsembleForecast, QuantileForecast
from .ingest import DatasetSplits, SplitSet, build_splits, slice_bundle
from .nhits import (
    NhitsData,
    NhitsModel,
    SwagState,
    TrainReport,
    assemble_data,
    mc_dropout_ensemble,
    nhits_train,
    swag_ensemble,
)
from .presets import Preset
from .qra import (
    QraModel,
    build_design,
    fit_quantile_lasso,
    qra_forecast,
    subsample_rows,
)
from .scoring import ScoreSeries, crps_quantile, score_forecasts
from .windows import SampleWindow, Standardizer, apply_mask, fit_standardizer

log = logging.getLogger(__name__)


def standardize_window(w: SampleWindow, std: Standardizer) -> SampleWindow:
    """Affine-transform every feature column; NaN availability holes stay NaN."""
    if w.feature_names != std.column_names:
        raise ValueError("window features do not match the standardizer layout")
    return replace(
        w,
        inputs=std.apply(w.inputs),
        future=std.apply(w.future),
        target=std.apply_column(w.target, "price"),
    )


def model_data(windows: list[SampleWindow], std: Standardizer) -> NhitsData:
    """Standardize, blind the deadline hours, and assemble model tensors."""
    return assemble_data([apply_mask(standardize_window(w, std)) for w in windows])


def draw_ensembles(
    model: NhitsModel,
    data: NhitsData,
    preset: Preset,
    swag_state: SwagState | None,
    seed: int = 0,
) -> list[EnsembleForecast]:
    """Weight-space ensembles when SWAG collected enough iterates, else
    MC-dropout; standardized units."""
    if preset.swag.enabled and swag_state is not None and swag_state.n_collected >= 2:
        return swag_ensemble(model, data, swag_state, preset.n_mc_samples, seed=seed)
    return mc_dropout_ensemble(model, data, preset.n_mc_samples, seed=seed)


def to_price_units(
    forecasts: list[EnsembleForecast], std: Standardizer
) -> list[EnsembleForecast]:
    return [
        EnsembleForecast(fc.origin, std.invert_column(fc.samples, "price"))
        for fc in forecasts
    ]


@dataclass
class PipelineResult:
    preset_name: str
    strategy: str
    standardizer: Standardizer
    model: NhitsModel
    train_report: TrainReport
    swag_state: SwagState | None
    qra_model: QraModel
    test_ensembles: list[EnsembleForecast]
    test_quantiles: list[QuantileForecast]
    ensemble_scores: dict
    quantile_scores: dict
    n_train_windows: int = 0
    n_val_windows: int = 0

    @property
    def test_crps(self) -> float:
        return float(self.quantile_scores["crps_matrix"].mean())


def training_rows(bundles, split_set: SplitSet) -> np.ndarray:
    """Feature rows the standardizer may see: training hours only."""
    parts = [
        slice_bundle(bundles[zone], *interval).matrix
        for zone, interval in sorted(split_set.train_intervals.items())
    ]
    return np.vstack(parts)


def observed_targets(windows: list[SampleWindow]) -> dict[int, np.ndarray]:
    return {w.origin: w.target for w in windows}


def run_pipeline(
    bundles,
    target_zone: str,
    splits: DatasetSplits,
    preset: Preset,
    strategy: str = "full",
    train_stride: int = 1,
    seed: int = 0,
) -> PipelineResult:
    """Train, calibrate and score one configuration.

    ``train_stride`` thins the stride-1 training windows (24 reproduces the
    one-window-per-day regime at a fraction of the cost). The quantile head
    fits on validation-year ensembles in price units and is evaluated on
    the test year; when a strategy leaves no validation windows the thinned
    training windows stand in.
    """
    split_set = build_splits(bundles, target_zone, splits, strategy)
    train_windows = [w for zone in sorted(split_set.train) for w in split_set.train[zone]]
    if train_stride > 1:
        train_windows = train_windows[::train_stride]
    if not train_windows:
        raise ValueError(f"strategy {strategy!r} produced no training windows")

    std = fit_standardizer(training_rows(bundles, split_set), bundles[target_zone].column_names)

    train_data = model_data(train_windows, std)
    val_data = model_data(split_set.val, std) if split_set.val else None
    model = NhitsModel(
        replace_seed(preset.nhits, seed),
        d_known=len(train_data.known_names),
        d_unknown=len(train_data.unknown_names),
    )
    report, swag_state = nhits_train(
        model, train_data, val_data, swag_config=preset.swag
    )

    qra_windows = split_set.val if split_set.val else train_windows[:: max(1, 24 // max(train_stride, 1))]
    if not split_set.val:
        log.warning("no validation windows; calibrating the quantile head on training data")
    qra_data = model_data(qra_windows, std)
    qra_ens = to_price_units(
        draw_ensembles(model, qra_data, preset, swag_state, seed=seed), std
    )
    fit_design = subsample_rows(
        build_design(qra_ens, qra_windows, preset.qra_options),
        preset.subsample_stride,
    )
    qra_model = fit_quantile_lasso(
        fit_design, preset.quantile_levels, preset.lambda_grid, preset.qra_solver
    )

    test_data = model_data(split_set.test, std)
    test_ens = to_price_units(
        draw_ensembles(model, test_data, preset, swag_state, seed=seed + 1), std
    )
    test_design = build_design(
        test_ens, split_set.test, preset.qra_options, pca_state=qra_model.pca
    )
    test_quantiles = qra_forecast(qra_model, test_design, preset.n_target_levels)

    observed = observed_targets(split_set.test)
    ensemble_scores = score_forecasts(test_ens, observed)
    quantile_scores = score_forecasts(test_quantiles, observed)
    return PipelineResult(
        preset_name=preset.name,
        strategy=strategy,
        standardizer=std,
        model=model,
        train_report=report,
        swag_state=swag_state,
        qra_model=qra_model,
        test_ensembles=test_ens,
        test_quantiles=test_quantiles,
        ensemble_scores=ensemble_scores,
        quantile_scores=quantile_scores,
        n_train_windows=len(train_windows),
        n_val_windows=len(split_set.val),
    )


def replace_seed(config, seed: int):
    return config if seed == config.seed else replace(config, seed=seed)


def quantile_crps_series(
    forecasts: list[QuantileForecast], observed: dict[int, np.ndarray]
) -> ScoreSeries:
    """Day-mean quantile CRPS per origin, DM-test ready."""
    origins = np.array([fc.origin for fc in forecasts], dtype=np.int64)
    vals = np.array(
        [
            np.mean(
                [
                    crps_quantile(fc.levels, fc.values[:, h], observed[fc.origin][h])
                    for h in range(24)
                ]
            )
            for fc in forecasts
        ]
    )
    return ScoreSeries("crps", origins, vals)


def validation_crps(
    bundles,
    target_zone: str,
    splits: DatasetSplits,
    preset: Preset,
    strategy: str = "full",
    train_stride: int = 1,
    seed: int = 0,
    holdout_fraction: float = 0.2,
) -> np.ndarray:
    """Per-origin validation CRPS of the full model, test split untouched.

    Feature selection needs comparable loss series without consuming test
    data, and the quantile head itself trains on validation ensembles. So
    the validation windows are split chronologically: the head fits on the
    early part and is scored on the held-out tail. Returns one day-mean
    CRPS per held-out origin, aligned across calls on the same splits.
    """
    split_set = build_splits(bundles, target_zone, splits, strategy)
    train_windows = [w for zone in sorted(split_set.train) for w in split_set.train[zone]]
    if train_stride > 1:
        train_windows = train_windows[::train_stride]
    if not train_windows:
        raise ValueError(f"strategy {strategy!r} produced no training windows")
    n_hold = max(10, int(round(len(split_set.val) * holdout_fraction)))
    if len(split_set.val) - n_hold < 1:
        raise ValueError(
            f"{len(split_set.val)} validation windows cannot spare {n_hold} for holdout"
        )
    fit_windows = split_set.val[:-n_hold]
    hold_windows = split_set.val[-n_hold:]

    std = fit_standardizer(training_rows(bundles, split_set), bundles[target_zone].column_names)
    train_data = model_data(train_windows, std)
    model = NhitsModel(
        replace_seed(preset.nhits, seed),
        d_known=len(train_data.known_names),
        d_unknown=len(train_data.unknown_names),
    )
    _, swag_state = nhits_train(
        model, train_data, model_data(fit_windows, std), swag_config=preset.swag
    )

    fit_ens = to_price_units(
        draw_ensembles(model, model_data(fit_windows, std), preset, swag_state, seed=seed),
        std,
    )
    design = subsample_rows(
        build_design(fit_ens, fit_windows, preset.qra_options), preset.subsample_stride
    )
    qra_model = fit_quantile_lasso(
        design, preset.quantile_levels, preset.lambda_grid, preset.qra_solver
    )

    hold_ens = to_price_units(
        draw_ensembles(model, model_data(hold_windows, std), preset, swag_state, seed=seed + 2),
        std,
    )
    hold_design = build_design(
        hold_ens, hold_windows, preset.qra_options, pca_state=qra_model.pca
    )
    quantiles = qra_forecast(qra_model, hold_design, preset.n_target_levels)
    observed = observed_targets(hold_windows)
    return quantile_crps_series(quantiles, observed).values
