import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from dayahead import cli
from dayahead.forecasts import load_ensembles, load_quantiles, save_quantiles
from dayahead.scoring import score_forecasts
from dayahead.series import format_timestamp, format_value, load_csv

CONFIG = {
    "seed": 0,
    "target_zone": "AA",
    "strategy": "full",
    "preset": "tiny-default",
    "train_stride": 24,
    "data": {
        "zones": ["AA", "BB"],
        "groups": ["calendar", "R2"],
        "synthetic": True,
        "train_start": "2021-01-01",
        "val_start": "2021-03-15",
        "test_start": "2021-04-15",
        "test_end": "2021-05-15",
    },
    "model": {"epochs": 4, "mc_samples": 6, "subsample_stride": 8},
}


def run(ws, *argv, config=True):
    args = ["--workspace", str(ws)]
    if config:
        args += ["--config", str(ws / "config.json")]
    return cli.main(args + list(argv))


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    root = tmp_path_factory.mktemp("cliws")
    with open(root / "config.json", "w") as fh:
        json.dump(CONFIG, fh)
    assert run(root, "fetch") == 0
    assert run(root, "featurize") == 0
    assert run(root, "train-nhits") == 0
    assert run(root, "ensemble", "--split", "val") == 0
    assert run(root, "qra-fit") == 0
    assert run(root, "predict") == 0
    assert run(root, "score", "--forecasts", str(root / "forecasts/quantiles_test.csv")) == 0
    assert run(root, "baseline", "--method", "same-hour-28d") == 0
    return root


# ----------------------------------------------------------- config layer


def test_config_merge_and_flag_override(tmp_path):
    path = tmp_path / "c.json"
    with open(path, "w") as fh:
        json.dump({"seed": 3, "data": {"zones": ["XX"]}}, fh)
    config = cli.load_config(str(path), {"seed": 9})
    assert config["seed"] == 9
    assert config["data"]["zones"] == ["XX"]
    assert config["data"]["cache_dir"] == "cache"  # defaults survive the merge


def test_config_rejects_foreign_mask_hours(tmp_path):
    path = tmp_path / "c.json"
    with open(path, "w") as fh:
        json.dump({"data": {"mask_hours": 12}}, fh)
    with pytest.raises(cli.CliError, match="mask_hours=12"):
        cli.load_config(str(path), {})


def test_required_series_resolves_synthetic_price():
    assert cli.required_series(["calendar", "R2"]) == ("co2_price", "gas_price")
    assert cli.required_series(["R1"]) == ("co2_price", "load")
    with pytest.raises(cli.CliError, match="unknown feature group"):
        cli.required_series(["R9"])


# -------------------------------------------------------------- artifacts


def test_workflow_artifacts_exist(ws):
    for rel in (
        "cache/AA_price.csv",
        "features/AA.csv",
        "model/checkpoint.npz",
        "model/train_report.json",
        "model/qra.json",
        "forecasts/ensembles_val.csv",
        "forecasts/quantiles_test.csv",
        "scores/quantiles_test_scores.csv",
        "scores/quantiles_test_summary.json",
        "baseline/same-hour-28d/summary.json",
    ):
        assert (ws / rel).exists(), rel


def test_manifest_records_inputs_and_outputs(ws):
    doc = json.loads((ws / "manifests" / "train-nhits.json").read_text())
    assert doc["subcommand"] == "train-nhits"
    assert doc["seed"] == 0
    assert "config.json" in doc["inputs"]
    assert any(k.startswith("cache/") for k in doc["inputs"])
    assert "model/checkpoint.npz" in doc["outputs"]
    assert all(len(v) == 64 for v in doc["inputs"].values())


def test_rerun_reproduces_manifest_and_artifact_bytes(ws):
    manifest = ws / "manifests" / "featurize.json"
    artifact = ws / "features" / "AA.csv"
    before = manifest.read_bytes(), artifact.read_bytes()
    assert run(ws, "featurize") == 0
    assert (manifest.read_bytes(), artifact.read_bytes()) == before


def test_predictions_are_dense_and_monotone(ws):
    forecasts = load_quantiles(ws / "forecasts" / "quantiles_test.csv")
    assert forecasts
    for fc in forecasts:
        assert fc.levels.size == 200
        assert fc.is_monotone


def test_score_summary_shape(ws):
    doc = json.loads((ws / "scores" / "quantiles_test_summary.json").read_text())
    assert set(doc) >= {"crps", "ece", "n_origins"}
    assert doc["n_origins"] > 0
    assert np.isfinite(doc["crps"])


# --------------------------------------------------------------- imports


def test_import_then_score_matches_in_process(ws):
    src = load_ensembles(ws / "baseline" / "same-hour-28d" / "ensembles.csv")[:12]
    wide = ws / "external.csv"
    with open(wide, "w", newline="\n") as fh:
        fh.write("origin,sample_idx," + ",".join(f"h{h}" for h in range(24)) + "\n")
        for fc in src:
            for s in range(fc.size):
                row = ",".join(format_value(v) for v in fc.samples[s])
                fh.write(f"{format_timestamp(fc.origin)},{s},{row}\n")

    assert run(ws, "import-forecasts", "--ensembles", str(wide)) == 0
    imported_path = ws / "forecasts" / "imported_external.csv"
    assert run(ws, "score", "--forecasts", str(imported_path)) == 0

    history = load_csv(ws / "cache" / "AA_price.csv", zone="AA", name="price")
    imported = load_ensembles(imported_path)
    observed = cli.observed_from_series(history, [fc.origin for fc in imported])
    expected = score_forecasts(imported, observed)
    doc = json.loads((ws / "scores" / "imported_external_summary.json").read_text())
    assert doc["crps"] == float(expected["crps_matrix"].mean())
    assert doc["energy_score"] == expected["energy_score"].mean


def test_import_rejects_bad_header(ws, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("origin,sample,h0\n")
    assert run(ws, "import-forecasts", "--ensembles", str(bad)) == 1


def test_import_needs_exactly_one_source(ws):
    assert run(ws, "import-forecasts") == 1


def test_import_quantiles_normalizes(ws, tmp_path):
    fc = load_quantiles(ws / "forecasts" / "quantiles_test.csv")[:1]
    src = tmp_path / "ext_quant.csv"
    save_quantiles(src, fc)
    assert run(ws, "import-forecasts", "--quantiles", str(src)) == 0
    out = load_quantiles(ws / "forecasts" / "imported_ext_quant.csv")
    assert np.array_equal(out[0].values, fc[0].values)


# ---------------------------------------------------------------- dm-test


def test_dm_test_intersects_origins(ws):
    rc = run(
        ws,
        "dm-test",
        "--scores-a",
        str(ws / "scores" / "quantiles_test_scores.csv"),
        "--scores-b",
        str(ws / "baseline" / "same-hour-28d" / "scores.csv"),
    )
    assert rc == 0
    doc = json.loads((ws / "scores" / "dm_crps.json").read_text())
    # model origins start a week late, baseline covers the whole month
    assert doc["n"] == 23
    assert np.isfinite(doc["statistic"])
    assert 0.0 <= doc["p_value"] <= 1.0


# ----------------------------------------------------------------- report


def test_report_writes_valid_svg(ws):
    rc = run(
        ws,
        "report",
        "--forecasts",
        str(ws / "forecasts" / "quantiles_test.csv"),
        "--with-observed",
    )
    assert rc == 0
    svgs = sorted((ws / "report").glob("fan_*.svg"))
    assert len(svgs) == 1
    root = ET.fromstring(svgs[0].read_text())
    assert root.tag.endswith("svg")
    polygons = root.findall("{http://www.w3.org/2000/svg}polygon")
    assert len(polygons) == 3


def test_report_missing_origin_fails(ws):
    rc = run(
        ws,
        "report",
        "--forecasts",
        str(ws / "forecasts" / "quantiles_test.csv"),
        "--origin",
        "1999-01-01T00:00:00Z",
    )
    assert rc == 1


# ----------------------------------------------------------------- carbon


def test_carbon_from_power(ws, capsys):
    assert run(ws, "carbon", "--hours", "1", "--power-kw", "1") == 0
    doc = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert doc["energy_kwh"] == 1.0
    assert doc["co2e_kg"] == 0.328
    assert doc["co2e_pue_kg"] == pytest.approx(0.3936, rel=1e-12)
    saved = json.loads((ws / "carbon" / "report.json").read_text())
    assert saved == doc


def test_carbon_from_energy(ws, capsys):
    assert run(ws, "carbon", "--energy-kwh", "0.89") == 0
    doc = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert doc["co2e_kg"] == pytest.approx(0.29, abs=0.01)
    assert doc["co2e_pue_kg"] == pytest.approx(0.35, abs=0.01)


def test_carbon_needs_inputs(ws):
    assert run(ws, "carbon") == 1


# ------------------------------------------------------------- exit codes


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as err:
        cli.main(["frobnicate"])
    assert err.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_module_error_exits_1_with_structured_message(tmp_path, capsys):
    rc = cli.main(["--workspace", str(tmp_path), "score", "--forecasts", "missing.csv"])
    assert rc == 1
    doc = json.loads(capsys.readouterr().err.strip())
    assert doc["subcommand"] == "score"
    assert "missing" in doc["error"]


def test_missing_cache_is_actionable(tmp_path, capsys):
    with open(tmp_path / "config.json", "w") as fh:
        json.dump(CONFIG, fh)
    rc = run(tmp_path, "featurize")
    assert rc == 1
    assert "run fetch first" in capsys.readouterr().err


# ------------------------------------------------------------------ xshot


def test_xshot_summary_counts(ws):
    rc = run(ws, "xshot", "--strategies", "one-shot,few-shot")
    assert rc == 0
    doc = json.loads((ws / "xshot" / "summary.json").read_text())
    assert doc["one-shot"]["n_train_windows"] >= 1
    assert doc["few-shot"]["n_train_windows"] >= 23
    for row in doc.values():
        assert np.isfinite(row["crps"])
        assert row["n_test_origins"] > 0
    quantiles = load_quantiles(ws / "xshot" / "quantiles_few-shot.csv")
    assert all(fc.is_monotone for fc in quantiles)
