"""Batch experiment runner.

One JSON config drives every subcommand; command-line flags override
config values. Every run writes a manifest (config hash, seed, git
revision, input digests, output paths) next to its artifacts, and every
artifact is byte-reproducible from the manifest inputs. Exit codes: 0 on
success, 1 on a module error with a structured JSON message on stderr, 2
on usage errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import subprocess
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .baselines import run_baseline
from .carbon import CARBON_INTENSITY_KG_PER_KWH, PUE, carbon_from_energy, carbon_report
from .fancharts import render_fan_chart, save_fan_chart
from .features import GROUP_MEMBERS, FeatureBundle, build_bundle
from .forecasts import (
    ENSEMBLE_HEADER,
    QUANTILE_HEADER,
    EnsembleForecast,
    load_ensembles,
    load_quantiles,
    save_ensembles,
    save_quantiles,
)
from .ingest import (
    DatasetSplits,
    TransportError,
    ZoneConfig,
    build_splits,
    fetch_prices,
)
from .nhits import NhitsModel, load_state, nhits_train, save_state
from .pipeline import (
    draw_ensembles,
    model_data,
    observed_targets,
    replace_seed,
    run_pipeline,
    to_price_units,
)
from .presets import get_preset
from .qra import (
    build_design,
    fit_quantile_lasso,
    load_model,
    qra_forecast,
    save_model,
    subsample_rows,
)
from .scoring import ScoreSeries, score_forecasts, write_score_csv, write_score_summary
from .series import (
    HOUR,
    HourlySeries,
    format_timestamp,
    format_value,
    load_csv,
    parse_timestamp,
)
from .stats import dm_test, forward_select, save_trail
from .synthetic import seed_cache
from .windows import MASK_HOURS, fit_standardizer
from . import features as features_mod
from . import pipeline as pipeline_mod

WEEK = 168 * HOUR

DEFAULT_CONFIG = {
    "seed": 0,
    "target_zone": "",
    "strategy": "full",
    "preset": "tiny-default",
    "train_stride": 1,
    "data": {
        "zones": [],
        "groups": ["calendar"],
        "cache_dir": "cache",
        "endpoint": "",
        "synthetic": False,
        "train_start": "2018-10-01",
        "val_start": "2023-01-01",
        "test_start": "2024-01-01",
        "test_end": "2025-01-01",
        "increment": "none",
        "few_shot_days": 30,
        "tz": "UTC",
    },
}


class CliError(Exception):
    """Module-level failure reported as exit code 1."""


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path: str | None, overrides: dict) -> dict:
    config = DEFAULT_CONFIG
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                config = _merge(config, json.load(fh))
        except OSError as exc:
            raise CliError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise CliError(f"config is not valid JSON: {exc}") from None
    config = _merge(config, overrides)
    mask = config["data"].get("mask_hours", MASK_HOURS)
    if mask != MASK_HOURS:
        raise CliError(
            f"config requests mask_hours={mask} but the market deadline fixes "
            f"{MASK_HOURS}; refusing to reconcile silently"
        )
    return config


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _git_revision() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=10,
        )
    except (OSError, subprocess.TimeoutExpired):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 else "unknown"


class Run:
    """Bookkeeping for one subcommand invocation.

    Records every file read and written so the manifest can prove what the
    artifacts were derived from. Manifests carry no timestamps; re-running
    with identical inputs yields identical bytes.
    """

    def __init__(self, subcommand: str, workspace: str, config: dict):
        self.subcommand = subcommand
        self.ws = Path(workspace)
        self.config = config
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []

    def path(self, *parts) -> Path:
        p = self.ws.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def _rel(self, path: Path) -> str:
        try:
            return path.resolve().relative_to(self.ws.resolve()).as_posix()
        except ValueError:
            return path.as_posix()

    def record_input(self, path: Path) -> Path:
        if not path.exists():
            raise CliError(f"missing input file: {path}")
        self.inputs[self._rel(path)] = _sha256(path)
        return path

    def record_output(self, path: Path) -> Path:
        rel = self._rel(path)
        if rel not in self.outputs:
            self.outputs.append(rel)
        return path

    def write_manifest(self) -> Path:
        canonical = json.dumps(self.config, sort_keys=True, separators=(",", ":"))
        doc = {
            "subcommand": self.subcommand,
            "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
            "seed": self.config["seed"],
            "git": _git_revision(),
            "inputs": self.inputs,
            "outputs": sorted(self.outputs),
        }
        path = self.path("manifests", f"{self.subcommand}.json")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def required_series(groups) -> tuple[str, ...]:
    """Raw cache series implied by the requested feature groups.

    synthetic_price is derived from gas and CO2 rather than fetched.
    """
    need: set[str] = set()
    for g in groups:
        if g == "calendar":
            continue
        if g not in GROUP_MEMBERS:
            raise CliError(f"unknown feature group {g!r}")
        need.update(GROUP_MEMBERS[g])
    if "synthetic_price" in need:
        need.discard("synthetic_price")
        need.update(("gas_price", "co2_price"))
    return tuple(sorted(need))


def cache_dir(run: Run) -> Path:
    return run.ws / run.config["data"]["cache_dir"]


def load_cached_series(run: Run, zone: str, feature: str) -> HourlySeries:
    path = cache_dir(run) / f"{zone}_{feature}.csv"
    if not path.exists():
        raise CliError(f"no cached data for {zone}/{feature}; run fetch first")
    run.record_input(path)
    return load_csv(path, zone=zone, name=feature)


def load_bundles(run: Run, groups=None) -> dict[str, FeatureBundle]:
    data = run.config["data"]
    groups = tuple(groups if groups is not None else data["groups"])
    bundles = {}
    for zone in data["zones"]:
        price = load_cached_series(run, zone, "price")
        covariates = {
            name: load_cached_series(run, zone, name)
            for name in required_series(groups)
        }
        bundles[zone] = build_bundle(price, covariates, groups=groups, tz=data["tz"])
    if not bundles:
        raise CliError("config lists no zones")
    return bundles


def splits_from_config(config: dict) -> DatasetSplits:
    data = config["data"]
    return DatasetSplits.from_dates(
        data["train_start"],
        data["val_start"],
        data["test_start"],
        data["test_end"],
        increment=data["increment"],
        few_shot_days=data["few_shot_days"],
    )


def target_zone(config: dict) -> str:
    zone = config["target_zone"]
    if not zone:
        raise CliError("config sets no target_zone")
    return zone


def preset_from_config(config: dict):
    """Preset named in the config, with optional model-section overrides.

    The `model` section tweaks the expensive knobs without defining a new
    preset: epochs, batch_size, mc_samples, subsample_stride.
    """
    try:
        preset = get_preset(config["preset"])
    except KeyError as exc:
        raise CliError(str(exc.args[0])) from None
    model = config.get("model", {})
    nhits = preset.nhits
    if model.get("epochs") is not None:
        nhits = replace(nhits, n_epochs=int(model["epochs"]))
    if model.get("batch_size") is not None:
        nhits = replace(nhits, batch_size=int(model["batch_size"]))
    if nhits is not preset.nhits:
        preset = replace(preset, nhits=nhits)
    if model.get("mc_samples") is not None:
        preset = replace(preset, n_mc_samples=int(model["mc_samples"]))
    if model.get("subsample_stride") is not None:
        preset = replace(preset, subsample_stride=int(model["subsample_stride"]))
    return preset


# ---------------------------------------------------------------- fetch


def cmd_fetch(run: Run, args) -> None:
    """Fill the cache: synthetic generator or live endpoint per config.

    Fetches one week before train_start so week-lag proxy columns cover the
    whole training interval.
    """
    data = run.config["data"]
    if not data["zones"]:
        raise CliError("config lists no zones")
    features = ("price",) + required_series(data["groups"])
    start = parse_timestamp(data["train_start"]) - WEEK
    end = parse_timestamp(data["test_end"])
    if data["synthetic"]:
        paths = seed_cache(
            cache_dir(run), data["zones"], features, start, end, seed=run.config["seed"]
        )
        for p in paths:
            run.record_output(p)
        return
    if not data["endpoint"]:
        raise CliError("live fetch needs data.endpoint (or set data.synthetic)")
    for zone in data["zones"]:
        zc = ZoneConfig(zone, data["endpoint"], features, str(cache_dir(run)))
        for feature in features:
            fetch_prices(zc, start, end, feature=feature)
            run.record_output(zc.cache_path(feature))


# ------------------------------------------------------------- featurize


def cmd_featurize(run: Run, args) -> None:
    """Materialize each zone's feature matrix as CSV for inspection."""
    bundles = load_bundles(run)
    for zone, bundle in sorted(bundles.items()):
        path = run.path("features", f"{zone}.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("timestamp," + ",".join(bundle.column_names) + "\n")
            for i, ts in enumerate(bundle.timestamps):
                row = ",".join(format_value(v) for v in bundle.matrix[i])
                fh.write(f"{format_timestamp(int(ts))},{row}\n")
        run.record_output(path)


# -------------------------------------------------------------- baseline


def observed_from_series(series: HourlySeries, origins) -> dict[int, np.ndarray]:
    out = {}
    for origin in origins:
        obs = series.slice_utc(origin, origin + 24 * HOUR)
        if len(obs) == 24:
            out[origin] = obs.values
    return out


def cmd_baseline(run: Run, args) -> None:
    """Run one statistical baseline over the test origins and score it."""
    config = run.config
    zone = target_zone(config)
    data = config["data"]
    history = load_cached_series(run, zone, "price")
    splits = splits_from_config(config)
    origins = list(range(splits.test[0], splits.test[1], 24 * HOUR))

    reference = None
    if args.method == "bootstrap-synthetic":
        gas = load_cached_series(run, zone, "gas_price")
        co2 = load_cached_series(run, zone, "co2_price")
        start = max(gas.timestamps[0], co2.timestamps[0])
        end = min(gas.timestamps[-1], co2.timestamps[-1]) + HOUR
        g = gas.slice_utc(start, end)
        c = co2.slice_utc(start, end)
        reference = HourlySeries(
            zone,
            "synthetic_price",
            g.timestamps,
            features_mod.synthetic_price(g.values, c.values),
        )

    forecasts, omissions = run_baseline(
        history,
        origins,
        args.method,
        reference=reference,
        train_end=splits.train[1],
        m_samples=args.samples,
        seed=config["seed"],
    )
    observed = observed_from_series(history, [fc.origin for fc in forecasts])
    scored = [fc for fc in forecasts if fc.origin in observed]
    if not scored:
        raise CliError(f"baseline {args.method!r} produced no scoreable forecasts")
    results = score_forecasts(scored, observed)

    ens_path = run.path("baseline", args.method, "ensembles.csv")
    save_ensembles(ens_path, scored)
    run.record_output(ens_path)
    csv_path = run.path("baseline", args.method, "scores.csv")
    write_score_csv(csv_path, results)
    run.record_output(csv_path)
    summary_path = run.path("baseline", args.method, "summary.json")
    write_score_summary(
        summary_path,
        results,
        extra={
            "method": args.method,
            "omissions": [
                {"origin": format_timestamp(o.origin), "reason": o.reason}
                for o in omissions
            ],
        },
    )


# ------------------------------------------------------------ train-nhits


def cmd_train_nhits(run: Run, args) -> None:
    """Train the backbone on the configured split and checkpoint it."""
    config = run.config
    preset = preset_from_config(config)
    bundles = load_bundles(run)
    splits = splits_from_config(config)
    split_set = build_splits(bundles, target_zone(config), splits, config["strategy"])

    train_windows = [w for z in sorted(split_set.train) for w in split_set.train[z]]
    stride = int(config["train_stride"])
    if stride > 1:
        train_windows = train_windows[::stride]
    if not train_windows:
        raise CliError(f"strategy {config['strategy']!r} produced no training windows")
    standardizer = fit_standardizer(
        pipeline_mod.training_rows(bundles, split_set),
        bundles[target_zone(config)].column_names,
    )

    train_data = model_data(train_windows, standardizer)
    val_data = model_data(split_set.val, standardizer) if split_set.val else None
    model = NhitsModel(
        replace_seed(preset.nhits, config["seed"]),
        d_known=len(train_data.known_names),
        d_unknown=len(train_data.unknown_names),
    )
    report, swag_state = nhits_train(model, train_data, val_data, swag_config=preset.swag)

    ckpt = run.path("model", "checkpoint.npz")
    model.save(ckpt, standardizer=standardizer)
    run.record_output(ckpt)
    if swag_state is not None and swag_state.n_collected >= 2:
        swag_path = run.path("model", "swag.npz")
        save_state(swag_path, swag_state)
        run.record_output(swag_path)
    report_path = run.path("model", "train_report.json")
    with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(
            {
                "train_mae": report.train_mae,
                "val_mae": report.val_mae,
                "best_epoch": report.best_epoch,
                "stopped_early": report.stopped_early,
                "n_train_windows": len(train_windows),
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    run.record_output(report_path)


def _load_checkpoint(run: Run):
    ckpt = run.ws / "model" / "checkpoint.npz"
    if not ckpt.exists():
        raise CliError("no model checkpoint; run train-nhits first")
    run.record_input(ckpt)
    model, standardizer = NhitsModel.load(ckpt)
    if standardizer is None:
        raise CliError("checkpoint lacks a standardizer; retrain")
    swag_path = run.ws / "model" / "swag.npz"
    swag_state = None
    if swag_path.exists():
        run.record_input(swag_path)
        swag_state = load_state(swag_path)
    return model, standardizer, swag_state


def _split_windows(run: Run, which: str):
    config = run.config
    bundles = load_bundles(run)
    splits = splits_from_config(config)
    split_set = build_splits(bundles, target_zone(config), splits, config["strategy"])
    if which == "val":
        return split_set.val
    if which == "test":
        return split_set.test
    raise CliError(f"unknown split {which!r}; expected val or test")


# -------------------------------------------------------------- ensemble


def cmd_ensemble(run: Run, args) -> None:
    """Draw forecast ensembles from a checkpoint over one split."""
    config = run.config
    preset = preset_from_config(config)
    model, standardizer, swag_state = _load_checkpoint(run)
    windows = _split_windows(run, args.split)
    if not windows:
        raise CliError(f"split {args.split!r} has no windows")
    data = model_data(windows, standardizer)
    seed = config["seed"] + (1 if args.split == "test" else 0)
    ens = to_price_units(
        draw_ensembles(model, data, preset, swag_state, seed=seed), standardizer
    )
    path = run.path("forecasts", f"ensembles_{args.split}.csv")
    save_ensembles(path, ens)
    run.record_output(path)


# --------------------------------------------------------------- qra-fit


def cmd_qra_fit(run: Run, args) -> None:
    """Calibrate the quantile head on validation-split ensembles."""
    config = run.config
    preset = preset_from_config(config)
    ens_path = run.ws / "forecasts" / "ensembles_val.csv"
    if not ens_path.exists():
        raise CliError("no validation ensembles; run ensemble --split val first")
    run.record_input(ens_path)
    ensembles = load_ensembles(ens_path)
    windows = _split_windows(run, "val")
    by_origin = {w.origin: w for w in windows}
    kept = [fc for fc in ensembles if fc.origin in by_origin]
    if not kept:
        raise CliError("validation ensembles do not overlap validation windows")
    design = subsample_rows(
        build_design(kept, [by_origin[fc.origin] for fc in kept], preset.qra_options),
        preset.subsample_stride,
    )
    qra = fit_quantile_lasso(
        design, preset.quantile_levels, preset.lambda_grid, preset.qra_solver
    )
    path = run.path("model", "qra.json")
    save_model(path, qra)
    run.record_output(path)


# --------------------------------------------------------------- predict


def cmd_predict(run: Run, args) -> None:
    """Dense monotone quantiles for the test split."""
    config = run.config
    preset = preset_from_config(config)
    model, standardizer, swag_state = _load_checkpoint(run)
    qra_path = run.ws / "model" / "qra.json"
    if not qra_path.exists():
        raise CliError("no quantile model; run qra-fit first")
    run.record_input(qra_path)
    qra = load_model(qra_path)

    windows = _split_windows(run, "test")
    if not windows:
        raise CliError("test split has no windows")
    data = model_data(windows, standardizer)
    ens = to_price_units(
        draw_ensembles(model, data, preset, swag_state, seed=config["seed"] + 1),
        standardizer,
    )
    design = build_design(ens, windows, preset.qra_options, pca_state=qra.pca)
    forecasts = qra_forecast(qra, design, preset.n_target_levels)
    path = run.path("forecasts", "quantiles_test.csv")
    save_quantiles(path, forecasts)
    run.record_output(path)


# ----------------------------------------------------------------- score


def _sniff_forecasts(run: Run, path: Path):
    run.record_input(path)
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
    if header == ENSEMBLE_HEADER:
        return load_ensembles(path)
    if header == QUANTILE_HEADER:
        return load_quantiles(path)
    raise CliError(
        f"unrecognized forecast header {header!r}; expected "
        f"{ENSEMBLE_HEADER!r} or {QUANTILE_HEADER!r}"
    )


def cmd_score(run: Run, args) -> None:
    """Score a forecast file against cached observations."""
    forecasts = _sniff_forecasts(run, Path(args.forecasts))
    history = load_cached_series(run, target_zone(run.config), "price")
    observed = observed_from_series(history, [fc.origin for fc in forecasts])
    scored = [fc for fc in forecasts if fc.origin in observed]
    if not scored:
        raise CliError("no forecast origin has 24 observed hours in the cache")
    results = score_forecasts(scored, observed)
    stem = Path(args.forecasts).stem
    csv_path = run.path("scores", f"{stem}_scores.csv")
    write_score_csv(csv_path, results)
    run.record_output(csv_path)
    summary_path = run.path("scores", f"{stem}_summary.json")
    write_score_summary(
        summary_path, results, extra={"skipped_origins": len(forecasts) - len(scored)}
    )
    run.record_output(summary_path)
    print(f"crps {format_value(results['crps_matrix'].mean())} over {len(scored)} origins")


# --------------------------------------------------------------- dm-test


def load_score_series(run: Run, path: Path, metric: str) -> ScoreSeries:
    run.record_input(path)
    origins, values = [], []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "origin,horizon,metric,value":
            raise CliError(f"not a score CSV: {path}")
        for line in fh:
            o, h, m, v = line.rstrip("\n").split(",")
            if h == "all" and m == metric:
                origins.append(parse_timestamp(o))
                values.append(float(v))
    if not origins:
        raise CliError(f"no day-level {metric!r} rows in {path}")
    return ScoreSeries(metric, np.array(origins), np.array(values))


def cmd_dm_test(run: Run, args) -> None:
    """Equal-predictive-loss test between two score files.

    The series are intersected on common origins; models rarely cover
    identical origin sets when their context requirements differ.
    """
    a = load_score_series(run, Path(args.scores_a), args.metric)
    b = load_score_series(run, Path(args.scores_b), args.metric)
    common = np.intersect1d(a.origins, b.origins)
    if common.size < a.origins.size or common.size < b.origins.size:
        a = ScoreSeries(a.metric, common, a.values[np.isin(a.origins, common)])
        b = ScoreSeries(b.metric, common, b.values[np.isin(b.origins, common)])
    res = dm_test(a, b, alpha=args.alpha)
    doc = {
        "metric": args.metric,
        "statistic": res.statistic,
        "p_value": res.p_value,
        "reject": res.reject,
        "direction": res.direction,
        "mean_delta": res.mean_delta,
        "n": res.t_count,
        "lag": res.lag,
        "flag": res.flag,
        "alpha": args.alpha,
    }
    path = run.path("scores", f"dm_{args.metric}.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    run.record_output(path)
    verdict = "reject" if res.reject else "no difference"
    print(
        f"dm={format_value(res.statistic)} p={format_value(res.p_value)} -> {verdict}"
    )


# ------------------------------------------------------- select-features


def cmd_select_features(run: Run, args) -> None:
    """Greedy feature-group selection on validation CRPS."""
    config = run.config
    preset = preset_from_config(config)
    splits = splits_from_config(config)
    zone = target_zone(config)

    def runner(feature_groups):
        bundles = load_bundles(run, groups=feature_groups)
        losses = pipeline_mod.validation_crps(
            bundles,
            zone,
            splits,
            preset,
            strategy=config["strategy"],
            train_stride=int(config["train_stride"]),
            seed=config["seed"],
        )
        return losses

    result = forward_select(
        runner,
        groups=tuple(args.groups.split(",")),
        base=("calendar",),
        alpha=args.alpha,
    )
    path = run.path("selection", "trail.json")
    save_trail(path, result)
    run.record_output(path)
    print("selected: " + ",".join(result.selected))


# ----------------------------------------------------------------- xshot


def cmd_xshot(run: Run, args) -> None:
    """Run the transfer strategies and tabulate test CRPS per strategy."""
    config = run.config
    preset = preset_from_config(config)
    bundles = load_bundles(run)
    splits = splits_from_config(config)
    zone = target_zone(config)
    summary = {}
    for strategy in args.strategies.split(","):
        result = run_pipeline(
            bundles,
            zone,
            splits,
            preset,
            strategy=strategy,
            train_stride=int(config["train_stride"]),
            seed=config["seed"],
        )
        path = run.path("xshot", f"quantiles_{strategy}.csv")
        save_quantiles(path, result.test_quantiles)
        run.record_output(path)
        summary[strategy] = {
            "crps": result.test_crps,
            "n_train_windows": result.n_train_windows,
            "n_val_windows": result.n_val_windows,
            "n_test_origins": len(result.test_quantiles),
        }
    path = run.path("xshot", "summary.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    run.record_output(path)
    for strategy, row in summary.items():
        print(f"{strategy}: crps {format_value(row['crps'])}")


# ------------------------------------------------------ import-forecasts


def _parse_wide_ensembles(path: Path) -> list[EnsembleForecast]:
    """Wide interchange format: origin,sample_idx,h0..h23 per row."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    expected = "origin,sample_idx," + ",".join(f"h{h}" for h in range(24))
    if not lines or lines[0] != expected:
        raise CliError(f"expected header {expected!r}")
    rows: dict[int, dict[int, np.ndarray]] = {}
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 26:
            raise CliError(f"line {i}: expected 26 fields, got {len(parts)}")
        try:
            origin = parse_timestamp(parts[0])
            sample = int(parts[1])
            values = np.array([float(v) for v in parts[2:]])
        except ValueError as exc:
            raise CliError(f"line {i}: {exc}") from None
        rows.setdefault(origin, {})[sample] = values
    out = []
    for origin in sorted(rows):
        grid = rows[origin]
        if sorted(grid) != list(range(len(grid))):
            raise CliError(f"origin {format_timestamp(origin)}: sample_idx not 0..S-1")
        out.append(EnsembleForecast(origin, np.stack([grid[s] for s in sorted(grid)])))
    return out


def cmd_import_forecasts(run: Run, args) -> None:
    """Normalize externally produced forecasts into the internal CSVs."""
    if (args.ensembles is None) == (args.quantiles is None):
        raise CliError("give exactly one of --ensembles or --quantiles")
    if args.ensembles is not None:
        src = Path(args.ensembles)
        run.record_input(src)
        forecasts = _parse_wide_ensembles(src)
        path = run.path("forecasts", f"imported_{src.stem}.csv")
        save_ensembles(path, forecasts)
    else:
        src = Path(args.quantiles)
        run.record_input(src)
        forecasts = load_quantiles(src)
        path = run.path("forecasts", f"imported_{src.stem}.csv")
        save_quantiles(path, forecasts)
    run.record_output(path)
    print(f"imported {len(forecasts)} forecasts -> {path}")


# ---------------------------------------------------------------- report


def cmd_report(run: Run, args) -> None:
    """Fan charts (and a summary table when scores exist) from quantiles."""
    forecasts = load_quantiles(run.record_input(Path(args.forecasts)))
    if not forecasts:
        raise CliError("forecast file is empty")
    selected = forecasts
    if args.origin is not None:
        want = parse_timestamp(args.origin)
        selected = [fc for fc in forecasts if fc.origin == want]
        if not selected:
            raise CliError(f"origin {args.origin} not present in {args.forecasts}")
    elif not args.all_origins:
        selected = forecasts[:1]

    observed = {}
    if args.with_observed:
        history = load_cached_series(run, target_zone(run.config), "price")
        observed = observed_from_series(history, [fc.origin for fc in selected])

    for fc in selected:
        svg = render_fan_chart(
            fc,
            observations=observed.get(fc.origin),
            title=f"{target_zone(run.config)} {format_timestamp(fc.origin)}",
        )
        path = run.path("report", f"fan_{fc.origin}.svg")
        save_fan_chart(path, svg)
        run.record_output(path)
    print(f"wrote {len(selected)} fan charts")


# ---------------------------------------------------------------- carbon


def cmd_carbon(run: Run, args) -> None:
    """Energy and emission figures for a training or inference run."""
    try:
        if args.energy_kwh is not None:
            doc = carbon_from_energy(args.energy_kwh, args.intensity, args.pue)
        else:
            if args.hours is None or args.power_kw is None:
                raise CliError("need --hours and --power-kw (or --energy-kwh)")
            doc = carbon_report(args.hours, args.power_kw, args.intensity, args.pue)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    path = run.path("carbon", "report.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    run.record_output(path)
    print(json.dumps(doc, sort_keys=True))


# ------------------------------------------------------------------ main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dayahead",
        description="probabilistic day-ahead electricity price forecasting",
    )
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--workspace", default=".", help="artifact root directory")
    parser.add_argument("--seed", type=int, help="override config seed")
    parser.add_argument("--preset", help="override config preset")
    parser.add_argument("--strategy", help="override config strategy")
    parser.add_argument("--target-zone", help="override config target zone")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    sub.add_parser("fetch", help="fill the local data cache")
    sub.add_parser("featurize", help="write per-zone feature matrices")

    p = sub.add_parser("baseline", help="run a statistical baseline on the test year")
    p.add_argument(
        "--method",
        required=True,
        choices=["same-hour-28d", "same-hour-7d12m", "bootstrap-price", "bootstrap-synthetic"],
    )
    p.add_argument("--samples", type=int, default=200)

    sub.add_parser("train-nhits", help="train the backbone and checkpoint it")

    p = sub.add_parser("ensemble", help="draw forecast ensembles from a checkpoint")
    p.add_argument("--split", default="test", choices=["val", "test"])

    sub.add_parser("qra-fit", help="calibrate the quantile head on validation data")
    sub.add_parser("predict", help="emit dense test-split quantiles")

    p = sub.add_parser("score", help="score a forecast CSV against cached prices")
    p.add_argument("--forecasts", required=True)

    p = sub.add_parser("dm-test", help="Diebold-Mariano test between two score files")
    p.add_argument("--scores-a", required=True)
    p.add_argument("--scores-b", required=True)
    p.add_argument("--metric", default="crps", choices=["crps", "energy_score"])
    p.add_argument("--alpha", type=float, default=0.05)

    p = sub.add_parser("select-features", help="forward feature-group selection")
    p.add_argument("--groups", default="R1,R2,R3,R4,R5")
    p.add_argument("--alpha", type=float, default=0.05)

    p = sub.add_parser("xshot", help="zero/one/few-shot transfer experiments")
    p.add_argument("--strategies", default="zero-shot,one-shot,few-shot")

    p = sub.add_parser("import-forecasts", help="normalize external forecast files")
    p.add_argument("--ensembles", help="wide CSV origin,sample_idx,h0..h23")
    p.add_argument("--quantiles", help="long CSV origin,horizon,level,value")

    p = sub.add_parser("report", help="render SVG fan charts")
    p.add_argument("--forecasts", required=True)
    p.add_argument("--origin", help="plot one origin (ISO timestamp)")
    p.add_argument("--all-origins", action="store_true")
    p.add_argument("--with-observed", action="store_true")

    p = sub.add_parser("carbon", help="energy and CO2e accounting")
    p.add_argument("--hours", type=float)
    p.add_argument("--power-kw", type=float)
    p.add_argument("--energy-kwh", type=float)
    p.add_argument("--intensity", type=float, default=CARBON_INTENSITY_KG_PER_KWH)
    p.add_argument("--pue", type=float, default=PUE)

    return parser


HANDLERS = {
    "fetch": cmd_fetch,
    "featurize": cmd_featurize,
    "baseline": cmd_baseline,
    "train-nhits": cmd_train_nhits,
    "ensemble": cmd_ensemble,
    "qra-fit": cmd_qra_fit,
    "predict": cmd_predict,
    "score": cmd_score,
    "dm-test": cmd_dm_test,
    "select-features": cmd_select_features,
    "xshot": cmd_xshot,
    "import-forecasts": cmd_import_forecasts,
    "report": cmd_report,
    "carbon": cmd_carbon,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.preset is not None:
        overrides["preset"] = args.preset
    if args.strategy is not None:
        overrides["strategy"] = args.strategy
    if args.target_zone is not None:
        overrides["target_zone"] = args.target_zone
    try:
        config = load_config(args.config, overrides)
        run = Run(args.subcommand, args.workspace, config)
        if args.config is not None:
            run.record_input(Path(args.config))
        HANDLERS[args.subcommand](run, args)
        run.write_manifest()
    except (CliError, ValueError, OSError, TransportError) as exc:
        message = json.dumps(
            {"error": str(exc), "subcommand": args.subcommand}, sort_keys=True
        )
        print(message, file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
