"""Command-line entry points and exit-code contract."""

import json

import numpy as np
import pytest

from nlosid import CirSlice, cfr_from_cir
from nlosid.cli import main
from nlosid.fileio import (load_cir_tensor, load_features, load_json,
                           save_features, save_json)
from nlosid.metrics import METRIC_NAMES

from conftest import flat_grid, labelled_feature_rows, small_sim


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Shared config and data files plus one simulated campaign."""
    ws = tmp_path_factory.mktemp("cli")

    config = {
        "mode": "simulate",
        "sim": small_sim(snr_db=60.0).to_dict(),
        "seg": {"foreground_threshold_db": 10.0, "min_pixels": 2,
                "marker_min_separation": 1.0, "smoothing_radius": 1},
        "schedule": {"learning_rate": 0.05, "max_epochs": 200,
                     "loss_tolerance": 1e-8},
        "n_realizations": 3, "n_train": 1, "n_test": 1, "seed": 11,
    }
    cfg_path = ws / "config.json"
    save_json(cfg_path, config)

    features_csv = ws / "features.csv"
    save_features(features_csv, labelled_feature_rows(n_realizations=40,
                                                      seed=3))

    sim_dir = ws / "sim"
    assert main(["--config", str(cfg_path), "--out", str(sim_dir),
                 "simulate"]) == 0
    return ws, cfg_path, features_csv, sim_dir


def test_simulate_writes_campaign(workspace):
    _, _, _, sim_dir = workspace
    manifest = load_json(sim_dir / "simulation.json")
    assert manifest["format"] == "simulation"
    assert len(manifest["realizations"]) == 3
    for entry in manifest["realizations"]:
        assert (sim_dir / entry["cir"]).exists()
        assert (sim_dir / entry["pas"]).exists()
        assert (sim_dir / entry["truth"]).exists()


def test_extract_from_manifest(workspace, tmp_path, capsys):
    _, cfg_path, _, sim_dir = workspace
    out = tmp_path / "features.csv"
    code = main(["--config", str(cfg_path), "--out", str(out), "extract",
                 "--manifest", str(sim_dir / "simulation.json")])
    assert code == 0
    assert "feature rows" in capsys.readouterr().out
    rows = load_features(out)
    assert len(rows) >= 3
    assert {r for r, _ in rows} <= {0, 1, 2}
    log = load_json(str(out) + ".log.json")
    assert log["format"] == "extraction_log"
    assert len(log["realizations"]) == 3


def test_extract_from_bare_tensors_is_unlabelled(workspace, tmp_path):
    _, cfg_path, _, sim_dir = workspace
    out = tmp_path / "features.csv"
    code = main(["--config", str(cfg_path), "--out", str(out), "extract",
                 "--cir", str(sim_dir / "real_0000.json")])
    assert code == 0
    assert all(fv.label is None for _, fv in load_features(out))


def test_fit_writes_distribution_table(workspace, tmp_path):
    _, _, features_csv, _ = workspace
    out = tmp_path / "gev_table.json"
    assert main(["--out", str(out), "fit",
                 "--features", str(features_csv)]) == 0
    doc = load_json(out)
    assert doc["format"] == "gev_table"
    assert set(doc["metrics"]) == set(METRIC_NAMES)
    for entry in doc["metrics"].values():
        assert set(entry) == {"los", "nlos"}


def test_fit_needs_enough_samples_per_class(tmp_path, capsys):
    csv = tmp_path / "thin.csv"
    save_features(csv, labelled_feature_rows(n_realizations=10, seed=1))
    assert main(["fit", "--features", str(csv)]) == 4
    assert "need at least 20" in capsys.readouterr().err


def test_train_then_classify_round_trip(workspace, tmp_path, capsys):
    _, cfg_path, features_csv, _ = workspace
    model_dir = tmp_path / "models"
    assert main(["--config", str(cfg_path), "--out", str(model_dir),
                 "train", "--features", str(features_csv)]) == 0
    assert (model_dir / "mlr_model.json").exists()
    assert (model_dir / "ann_model.json").exists()
    capsys.readouterr()

    verdicts = tmp_path / "verdicts.csv"
    code = main(["--out", str(verdicts), "classify",
                 "--features", str(features_csv),
                 "--model", str(model_dir / "mlr_model.json")])
    assert code == 0
    out = capsys.readouterr().out
    assert "type I" in out and "type II" in out
    lines = verdicts.read_text().splitlines()
    assert lines[0] == "realization,decision,score,support_violation,truth"
    assert len(lines) == 81

    code = main(["--out", str(tmp_path / "v2.csv"), "classify",
                 "--features", str(features_csv),
                 "--model", str(model_dir / "mlr_model.json"),
                 "--metrics", "r_p,k_t"])
    assert code == 0

    code = main(["--out", str(tmp_path / "v3.csv"), "classify",
                 "--features", str(features_csv),
                 "--model", str(model_dir / "ann_model.json")])
    assert code == 0


def test_classify_rejects_metric_subset_for_network(workspace, tmp_path,
                                                    capsys):
    _, cfg_path, features_csv, _ = workspace
    model_dir = tmp_path / "models"
    main(["--config", str(cfg_path), "--out", str(model_dir), "train",
          "--features", str(features_csv)])
    capsys.readouterr()
    code = main(["classify", "--features", str(features_csv),
                 "--model", str(model_dir / "ann_model.json"),
                 "--metrics", "r_p"])
    assert code == 2
    assert "ratio test" in capsys.readouterr().err


def test_classify_rejects_other_documents(workspace, tmp_path, capsys):
    _, _, features_csv, sim_dir = workspace
    code = main(["classify", "--features", str(features_csv),
                 "--model", str(sim_dir / "simulation.json")])
    assert code == 3
    assert "mlr_model or ann_model" in capsys.readouterr().err


def test_experiment_and_report_commands(workspace, tmp_path, capsys):
    ws, _, features_csv, _ = workspace
    cfg = {
        "mode": "measured",
        "features_csv": str(features_csv),
        "bootstrap": {"n_train": 24, "n_test": 12, "repeats": 3},
        "schedule": {"learning_rate": 0.05, "max_epochs": 150,
                     "loss_tolerance": 1e-8},
        "seed": 5,
    }
    cfg_path = tmp_path / "measured.json"
    save_json(cfg_path, cfg)
    out_dir = tmp_path / "run"
    assert main(["--config", str(cfg_path), "--out", str(out_dir),
                 "experiment"]) == 0
    assert "error rates" in capsys.readouterr().out
    assert (out_dir / "report.json").exists()

    assert main(["report", str(out_dir / "report.json")]) == 0
    text = capsys.readouterr().out
    assert "mode: measured" in text
    assert "joint_mlr" in text and "ann" in text

    assert main(["report", str(cfg_path)]) == 3


def test_seed_flag_overrides_config(workspace, tmp_path):
    _, cfg_path, _, _ = workspace
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert main(["--config", str(cfg_path), "--out", str(a), "--seed", "77",
                 "simulate"]) == 0
    assert main(["--config", str(cfg_path), "--out", str(b), "--seed", "77",
                 "simulate"]) == 0
    assert load_json(a / "simulation.json")["config"]["seed"] == 77
    assert (a / "real_0000.bin").read_bytes() \
        == (b / "real_0000.bin").read_bytes()


# ---------------------------------------------------------------------------
# sweep ingestion


def write_sweep_files(tmp_path, rng):
    grid = flat_grid(3, 4, step=2.0)
    taps = rng.normal(size=(3, 4, 16)) + 1j * rng.normal(size=(3, 4, 16))
    header = "az_deg,el_deg,freq_ghz,re,im"
    rows_a, rows_b = [], []
    for i in range(3):
        for j in range(4):
            el, az = grid.angles_of(i, j)
            cfr = cfr_from_cir(CirSlice(taps[i, j], 2.0))
            target = rows_a if (i * 4 + j) % 2 == 0 else rows_b
            for f, v in zip(cfr.frequencies_ghz, cfr.values):
                target.append(",".join(repr(float(x)) for x in
                                       (az, el, f, v.real, v.imag)))
    a = tmp_path / "sweep_a.csv"
    b = tmp_path / "sweep_b.csv"
    a.write_text("\n".join([header] + rows_a) + "\n")
    b.write_text("\n".join([header] + rows_b) + "\n")
    return a, b, taps


def test_ingest_builds_tensor_from_sweeps(tmp_path, rng):
    a, b, taps = write_sweep_files(tmp_path, rng)
    out = tmp_path / "tensor.json"
    code = main(["--out", str(out), "ingest", str(a), str(b),
                 "--az", "0:6:2", "--el", "0:4:2", "--window", "none"])
    assert code == 0
    cir = load_cir_tensor(out)
    assert cir.data.shape == (3, 4, 16)
    np.testing.assert_allclose(cir.data, taps, rtol=1e-5, atol=1e-6)


def test_ingest_rejects_duplicate_directions(tmp_path, rng, capsys):
    a, b, _ = write_sweep_files(tmp_path, rng)
    code = main(["ingest", str(a), str(a),
                 "--az", "0:6:2", "--el", "0:4:2"])
    assert code == 3
    assert "more than one sweep file" in capsys.readouterr().err


def test_ingest_validates_axes(tmp_path, rng, capsys):
    a, b, _ = write_sweep_files(tmp_path, rng)
    assert main(["ingest", str(a), "--az", "0:6", "--el", "0:4:2"]) == 2
    assert "start:stop:step" in capsys.readouterr().err
    assert main(["ingest", str(a), "--az", "0:5:2", "--el", "0:4:2"]) == 2
    assert "whole number" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# exit codes


def test_thread_count_must_be_positive(workspace, capsys):
    _, _, _, sim_dir = workspace
    code = main(["--threads", "0", "report",
                 str(sim_dir / "simulation.json")])
    assert code == 2
    assert "--threads" in capsys.readouterr().err


def test_bad_config_exits_with_config_error(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    save_json(cfg, {"mode": "simulate", "warp_factor": 9})
    code = main(["--config", str(cfg), "--out", str(tmp_path / "x"),
                 "simulate"])
    assert code == 2
    assert "unknown ExperimentConfig" in capsys.readouterr().err


def test_malformed_json_exits_with_format_error(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    code = main(["--config", str(cfg), "simulate"])
    assert code == 3
    assert "invalid JSON" in capsys.readouterr().err
