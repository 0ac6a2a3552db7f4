"""End-to-end CLI workflow on a small synthetic flow CSV."""

import csv
import json
import os

import numpy as np
import pytest

from conftest import write_nsl_kdd_like_csv
from idstack.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cliws")
    csv_path = root / "flows.csv"
    write_nsl_kdd_like_csv(csv_path, 700, seed=4)
    return root, csv_path


@pytest.fixture(scope="module")
def cache(workspace):
    root, csv_path = workspace
    out = root / "flows.dsz"
    code = main(["ingest", "--csv", str(csv_path), "--label", "class",
                 "--normal", "normal", "--out-cache", str(out)])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def variants_dir(workspace, cache):
    root, _ = workspace
    out = root / "variants"
    code = main(["variants", "--data", str(cache), "--out", str(out),
                 "--seed", "3"])
    assert code == 0
    return out


def test_ingest_drops_the_three_categorical_columns(cache):
    from idstack.dataset import load_cache

    ds = load_cache(cache)
    assert ds.n_features == 38  # 41 minus protocol_type/service/flag
    assert ds.schema.attack_categories == {"dos", "probe", "r2l", "u2r"}


def test_ingest_idempotent_bytes(workspace, cache):
    root, csv_path = workspace
    again = root / "again.dsz"
    assert main(["ingest", "--csv", str(csv_path), "--label", "class",
                 "--normal", "normal", "--out-cache", str(again)]) == 0
    assert again.read_bytes() == cache.read_bytes()


def test_ingest_missing_label_column_exit_3(workspace):
    root, csv_path = workspace
    code = main(["ingest", "--csv", str(csv_path), "--label", "nope",
                 "--normal", "normal", "--out-cache", str(root / "x.dsz")])
    assert code == 3


def test_variants_emits_per_attack_plus_full(variants_dir):
    manifest = json.loads((variants_dir / "variants.json").read_text())
    assert len(manifest) == 5  # full + 4 attacks
    names = sorted(manifest)
    assert any(v["excluded_attack"] is None for v in manifest.values())
    for name, meta in manifest.items():
        assert (variants_dir / meta["file"]).exists()
        if meta["excluded_attack"]:
            assert meta["unknown_pct"] > 0
    # unknown share matches the excluded category's share of test
    from idstack.splits import load_split

    for name, meta in manifest.items():
        if not meta["excluded_attack"]:
            continue
        split = load_split(variants_dir / meta["file"])
        share = float(np.mean(split.test.labels == meta["excluded_attack"]))
        assert meta["unknown_pct"] == pytest.approx(100 * share, abs=1e-3)


def test_variants_seed_changes_partitions(workspace, cache, variants_dir):
    root, _ = workspace
    other = root / "variants-seed9"
    assert main(["variants", "--data", str(cache), "--out", str(other),
                 "--seed", "9"]) == 0
    from idstack.splits import load_split

    a = load_split(variants_dir / "flows_dos.split")
    b = load_split(other / "flows_dos.split")
    assert not np.array_equal(a.train.source_indices, b.train.source_indices)
    assert len(a.train) == len(b.train)


def test_train_evaluate_and_predict_round_trip(workspace, variants_dir):
    root, _ = workspace
    model_path = root / "model.stk"
    code = main(["train", "--split", str(variants_dir / "flows_dos.split"),
                 "--out-model", str(model_path), "--meta-grid", "rf",
                 "--seed", "5", "--out", str(root / "train-out")])
    assert code == 0
    assert model_path.exists()
    assert (model_path.parent / "model.stk.manifest.json").exists()

    eval_dir = root / "eval"
    code = main(["evaluate", "--model", str(model_path),
                 "--split", str(variants_dir / "flows_dos.split"),
                 "--out", str(eval_dir)])
    assert code == 0
    rows = list(csv.DictReader(open(eval_dir / "evaluation.csv")))
    assert len(rows) == 1
    assert 0.0 <= float(rows[0]["acc"]) <= 1.0
    assert rows[0]["recall_unk"] != ""

    pred_csv = root / "preds.csv"
    cache2 = root / "flows.dsz"
    code = main(["predict", "--model", str(model_path), "--data", str(cache2),
                 "--out-csv", str(pred_csv)])
    assert code == 0
    preds = list(csv.DictReader(open(pred_csv)))
    assert len(preds) == 700
    assert set(p["prediction"] for p in preds) <= {"0", "1"}


def test_rank_features_report(workspace, variants_dir):
    root, _ = workspace
    out = root / "gains"
    code = main(["rank-features", "--split", str(variants_dir / "flows.split"),
                 "--out", str(out), "--seed", "5"])
    assert code == 0
    text = (out / "gains_flows.csv").read_text()
    rows = list(csv.DictReader(text.splitlines()))
    kinds = [r["feature_set"] for r in rows]
    assert kinds == ["DataF", "MetaF", "FullF"]
    full = next(r for r in rows if r["feature_set"] == "FullF")
    assert int(full["n_features"]) == 38 + 28


def test_tune_command(workspace, variants_dir):
    root, _ = workspace
    out = root / "tune"
    code = main(["tune", "--algorithm", "HBOS",
                 "--split", str(variants_dir / "flows_dos.split"),
                 "--out", str(out), "--seed", "2"])
    assert code == 0
    chosen = json.loads((out / "tune_HBOS.json").read_text())
    assert chosen["chosen"].startswith("HBOS(")
    table = list(csv.DictReader(open(out / "tune_HBOS.csv")))
    assert len(table) == 10  # the published value set for b


def test_compare_emits_table_shaped_reports(workspace, variants_dir):
    root, _ = workspace
    out = root / "compare"
    code = main(["compare", "--split", str(variants_dir / "flows_dos.split"),
                 "--out", str(out), "--meta-grid", "rf", "--seed", "5"])
    assert code == 0
    rows = list(csv.DictReader(open(out / "comparison.csv")))
    assert len(rows) == 1
    row = rows[0]
    for group in ("Sup-DataF", "Stacker-MetaF", "Stacker-FullF", "Unsup-DataF"):
        assert f"mcc:{group}" in row
        assert -1.0 <= float(row[f"mcc:{group}"]) <= 1.0
        assert 0.0 <= float(row[f"misc_pct:{group}"]) <= 100.0
    assert "recall_unk:Unsup-DataF" not in row
    assert row["recall_unk:Stacker-FullF"] != ""
    metrics = list(csv.DictReader(open(out / "metrics.csv")))
    assert len(metrics) == 4
    text = (out / "comparison.txt").read_text()
    assert "Misc%" in text and "Rec-Unk" in text


def test_cli_missing_input_exit_3():
    assert main(["compare", "--split", "/nonexistent/file.split"]) == 3


def test_cli_usage_error_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["train"])  # missing required --out-model
    assert exc.value.code == 2


def test_workers_env_override(workspace, variants_dir, monkeypatch):
    root, _ = workspace
    monkeypatch.setenv("IDSTACK_WORKERS", "2")
    from idstack.config import RunConfig

    assert RunConfig().workers == 2
