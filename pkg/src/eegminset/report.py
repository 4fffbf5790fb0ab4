"""Report serialization and figure rendering.

Every artifact embeds the config hash so any output can be traced back to
the exact run configuration. SVG output is deterministic: the hash salt is
pinned and the date metadata stripped, so rerunning a command yields
byte-identical figures.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .dataset import Label
from .errors import ParseError
from .evaluation import (
    EvalReport,
    FoldResult,
    SetupResult,
    ThresholdRule,
    TraceEntry,
)
from .features import FeatureSeries

REPORT_FORMAT_VERSION = 1

REPORT_CSV_HEADER = [
    "setup", "fold", "positive_class", "threshold", "tp", "fp", "fn", "tn", "fscore",
]


def _num(x: float) -> float | None:
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else x


def _nan(x: float | None) -> float:
    return float("nan") if x is None else float(x)


def report_to_dict(report: EvalReport, config_hash: str = "") -> dict:
    return {
        "format_version": REPORT_FORMAT_VERSION,
        "config_hash": config_hash,
        "positive_class": report.positive_class.value,
        "reference_setup": report.reference_setup,
        "selected_setup": report.selected_setup,
        "fallback_used": report.fallback_used,
        "threshold_rule": {
            "kind": report.threshold_rule.kind,
            "p": report.threshold_rule.p,
        },
        "selection_trace": [
            {"setup": t.setup, "rule": t.rule, "decision": t.decision}
            for t in report.selection_trace
        ],
        "per_setup": {
            name: {
                "n_channels": r.n_channels,
                "mean_fscore": _num(r.mean_fscore),
                "std_fscore": _num(r.std_fscore),
                "folds": [
                    {
                        "fold_id": f.fold_id,
                        "positive_class": f.positive_class.value,
                        "threshold": _num(f.threshold),
                        "tp": f.tp, "fp": f.fp, "fn": f.fn, "tn": f.tn,
                        "fscore": _num(f.fscore),
                        "skipped_reason": f.skipped_reason,
                    }
                    for f in r.folds
                ],
            }
            for name, r in report.per_setup.items()
        },
    }


def report_from_dict(doc: dict) -> tuple[EvalReport, str]:
    try:
        if doc.get("format_version") != REPORT_FORMAT_VERSION:
            raise ParseError(f"unsupported report version {doc.get('format_version')}")
        per_setup = {}
        for name, r in doc["per_setup"].items():
            folds = [
                FoldResult(
                    fold_id=f["fold_id"],
                    setup_name=name,
                    positive_class=Label.parse(f["positive_class"]),
                    threshold=_nan(f["threshold"]),
                    tp=f["tp"], fp=f["fp"], fn=f["fn"], tn=f["tn"],
                    fscore=_nan(f["fscore"]),
                    skipped_reason=f.get("skipped_reason"),
                )
                for f in r["folds"]
            ]
            per_setup[name] = SetupResult(
                setup_name=name,
                n_channels=r["n_channels"],
                folds=folds,
                mean_fscore=_nan(r["mean_fscore"]),
                std_fscore=_nan(r["std_fscore"]),
            )
        rule = doc.get("threshold_rule", {})
        report = EvalReport(
            positive_class=Label.parse(doc["positive_class"]),
            per_setup=per_setup,
            reference_setup=doc["reference_setup"],
            selected_setup=doc.get("selected_setup"),
            selection_trace=[
                TraceEntry(t["setup"], t["rule"], t["decision"])
                for t in doc.get("selection_trace", [])
            ],
            fallback_used=doc.get("fallback_used", False),
            threshold_rule=ThresholdRule(
                kind=rule.get("kind", "train_percentile"), p=rule.get("p", 95.0)
            ),
        )
        return report, doc.get("config_hash", "")
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed report: {exc}") from None


def write_report_json(report: EvalReport, path: str | Path, config_hash: str = "") -> None:
    doc = report_to_dict(report, config_hash)
    Path(path).write_text(
        json.dumps(doc, indent=2, sort_keys=False) + "\n", encoding="utf-8"
    )


def load_report(path: str | Path) -> tuple[EvalReport, str]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from None
    return report_from_dict(doc)


def _fold_rows(results: dict[str, SetupResult]) -> list[list]:
    rows = []
    for name, r in results.items():
        for f in r.folds:
            rows.append(
                [
                    name,
                    f.fold_id,
                    f.positive_class.value,
                    "" if math.isnan(f.threshold) else repr(f.threshold),
                    f.tp, f.fp, f.fn, f.tn,
                    "" if math.isnan(f.fscore) else repr(f.fscore),
                ]
            )
    return rows


def write_folds_csv(
    results: dict[str, SetupResult], path: str | Path, config_hash: str = ""
) -> None:
    """Flat per-fold CSV shared by the sweep report and the baseline."""
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_CSV_HEADER)
    writer.writerows(_fold_rows(results))
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def write_comparison_csv(
    report: EvalReport,
    baseline: dict[str, SetupResult],
    path: str | Path,
    config_hash: str = "",
) -> None:
    """Mean F of the autoencoder and the band-power baseline, side by side."""
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["setup", "n_channels", "ae_mean_fscore", "ae_std_fscore",
                     "baseline_mean_fscore", "baseline_std_fscore"])
    for name, r in report.per_setup.items():
        b = baseline.get(name)
        writer.writerow(
            [
                name,
                r.n_channels,
                repr(r.mean_fscore),
                repr(r.std_fscore),
                repr(b.mean_fscore) if b else "",
                repr(b.std_fscore) if b else "",
            ]
        )
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def render_fscore_chart(
    report: EvalReport,
    path: str | Path,
    config_hash: str = "",
    baseline: dict[str, SetupResult] | None = None,
) -> None:
    """Bar chart of mean F per set-up with std error bars, written as SVG."""
    names = list(report.per_setup)
    means = [report.per_setup[n].mean_fscore for n in names]
    stds = [report.per_setup[n].std_fscore for n in names]
    x = range(len(names))

    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    width = 0.38 if baseline else 0.6
    bars = ax.bar(
        [i - (width / 2 if baseline else 0) for i in x],
        means, width, yerr=stds, capsize=3,
        label="one-class AE", color="#4878cf",
    )
    if baseline:
        b_means = [baseline[n].mean_fscore if n in baseline else 0.0 for n in names]
        b_stds = [baseline[n].std_fscore if n in baseline else 0.0 for n in names]
        ax.bar(
            [i + width / 2 for i in x], b_means, width, yerr=b_stds, capsize=3,
            label="band-power baseline", color="#d65f5f",
        )
        ax.legend(frameon=False)
    for name, bar in zip(names, bars):
        if name == report.selected_setup:
            bar.set_edgecolor("black")
            bar.set_linewidth(1.5)
    ax.set_xticks(list(x))
    ax.set_xticklabels(names)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("F-score (mean over folds)")
    ax.set_xlabel("electrode set-up")
    title = f"positive class: {report.positive_class.value}"
    if report.threshold_rule.kind == "oracle_best_f":
        title += " (oracle threshold, diagnostic only)"
    ax.set_title(title)
    fig.tight_layout()
    with plt.rc_context({"svg.hashsalt": config_hash or "eegminset"}):
        fig.savefig(
            path,
            format="svg",
            metadata={"Date": None, "Description": f"config_hash={config_hash}"},
        )
    plt.close(fig)


def write_feature_series_csv(
    series: FeatureSeries, path: str | Path, config_hash: str = ""
) -> None:
    """Feature cache: one row per window, '<channel>_<feature>' columns."""
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(series.column_names() + ["label"])
    for row, is_alpha in zip(series.features, series.labels):
        writer.writerow(
            [repr(v) for v in row]
            + [(Label.ALPHA if is_alpha else Label.NONALPHA).value]
        )
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")
