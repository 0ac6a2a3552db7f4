"""CSV and aligned-text rendering of metric reports and comparison tables."""

from __future__ import annotations

import csv
import io

from .infogain import FeatureSetGains
from .metrics import MetricReport
from .pipeline import ComparisonRun

GAIN_TOPS = (1, 3, 5, 10)


def _fmt(value, percent=False) -> str:
    if value is None:
        return "-"
    if percent:
        return f"{100.0 * value:.2f}"
    return f"{value:.3f}"


def comparison_csv(runs: list[ComparisonRun]) -> str:
    """One row per dataset/variant with the four classifier groups side by
    side, mirroring the misclassification/MCC/recall comparison layout."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["dataset", "variant", "unknown_pct"]
    for metric in ("misc_pct", "mcc", "recall"):
        for group in ComparisonRun.GROUPS:
            header.append(f"{metric}:{group}")
    for group in ComparisonRun.GROUPS:
        if group != "Unsup-DataF":  # recall on unknowns is n/a for unsupervised
            header.append(f"recall_unk:{group}")
    writer.writerow(header)
    for run in runs:
        row = [run.dataset, run.excluded_attack or "-",
               f"{100.0 * run.unknown_fraction:.1f}"]
        for metric, percent in (("misc", True), ("mcc", False), ("recall", False)):
            for group in ComparisonRun.GROUPS:
                row.append(_fmt(getattr(run.reports[group], metric), percent))
        for group in ComparisonRun.GROUPS:
            if group != "Unsup-DataF":
                row.append(_fmt(run.reports[group].recall_unk))
        writer.writerow(row)
    return buf.getvalue()


def comparison_text(runs: list[ComparisonRun]) -> str:
    """Aligned comparison table, one block of columns per metric."""
    groups = ComparisonRun.GROUPS
    head = ["Dataset", "Variant", "%Unk"]
    for metric in ("Misc%", "MCC", "Recall", "Rec-Unk"):
        head += [f"{metric} {g}" for g in groups if not (metric == "Rec-Unk" and g == "Unsup-DataF")]
    rows = [head]
    for run in runs:
        row = [run.dataset, run.excluded_attack or "-",
               f"{100.0 * run.unknown_fraction:.1f}"]
        for g in groups:
            row.append(_fmt(run.reports[g].misc, percent=True))
        for g in groups:
            row.append(_fmt(run.reports[g].mcc))
        for g in groups:
            row.append(_fmt(run.reports[g].recall))
        for g in groups:
            if g != "Unsup-DataF":
                row.append(_fmt(run.reports[g].recall_unk))
        rows.append(row)
    return _align(rows)


def metric_report_csv(reports: list[MetricReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dataset", "variant", "classifier", "acc", "precision",
                     "recall", "f1", "auc", "fpr", "mcc", "misc_pct", "recall_unk",
                     "tp", "tn", "fp", "fn"])
    for r in reports:
        writer.writerow([
            r.dataset, r.variant or "-", r.classifier,
            f"{r.acc:.6f}", f"{r.precision:.6f}", f"{r.recall:.6f}",
            f"{r.f1:.6f}", _fmt(r.auc), f"{r.fpr:.6f}", f"{r.mcc:.6f}",
            f"{100.0 * r.misc:.4f}", _fmt(r.recall_unk),
            r.cm.tp, r.cm.tn, r.cm.fp, r.cm.fn,
        ])
    return buf.getvalue()


def metric_report_text(reports: list[MetricReport]) -> str:
    rows = [["Dataset", "Variant", "Classifier", "ACC", "P", "R", "F1", "AUC", "FPR"]]
    for r in reports:
        rows.append([
            r.dataset, r.variant or "-", r.classifier,
            f"{r.acc:.4f}", f"{r.precision:.3f}", f"{r.recall:.3f}",
            f"{r.f1:.3f}", _fmt(r.auc), f"{r.fpr:.3f}",
        ])
    return _align(rows)


def gains_csv(gains: list[FeatureSetGains]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["feature_set", "n_features"] + [f"best_{t}" for t in GAIN_TOPS])
    for g in gains:
        writer.writerow([g.kind, g.n_features]
                        + [f"{g.best_average(t):.4f}" for t in GAIN_TOPS])
    return buf.getvalue()


def gains_text(gains: list[FeatureSetGains]) -> str:
    rows = [["Feature Set", "#Feat"] + [str(t) for t in GAIN_TOPS]]
    for g in gains:
        rows.append([g.kind, str(g.n_features)]
                    + [f"{g.best_average(t):.3f}" for t in GAIN_TOPS])
    return _align(rows)


def _align(rows: list[list[str]]) -> str:
    widths = [max(len(str(row[i])) for row in rows) for i in range(len(rows[0]))]
    lines = []
    for row in rows:
        lines.append("  ".join(str(cell).ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"
