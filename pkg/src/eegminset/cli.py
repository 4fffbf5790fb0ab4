"""Command-line entry point.

Subcommands: synth, featurize, train, score, sweep, baseline, report.
Every subcommand accepts dotted-path overrides after its own options,
e.g. `eegminset sweep --eval.k_folds=3 --synth.duration_s=40`. Exit codes:
0 success, 1 internal error, 2 bad input or config.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import baseline as baseline_mod
from . import evaluation, report as report_mod
from .config import RunConfig, apply_overrides, config_from_dict, config_hash
from .dataset import Label, load_recording, save_recording, setup_by_name
from .errors import DimensionMismatch, EegMinSetError, ParseError
from .features import assemble_model_windows, build_feature_series
from .model import load_model, save_model, score_windows
from .synthgen import generate_corpus


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


def _parse_override_tokens(tokens: tuple[str, ...]) -> list[tuple[str, str]]:
    overrides = []
    for tok in tokens:
        if not tok.startswith("--") or "=" not in tok:
            _fail(f"expected overrides of the form --section.key=value, got {tok!r}")
        dotted, raw = tok[2:].split("=", 1)
        overrides.append((dotted, raw))
    return overrides


def _resolve_config(ctx: click.Context, tokens: tuple[str, ...]) -> tuple[RunConfig, str]:
    state = ctx.obj
    doc: dict = {}
    if state["config"] is not None:
        path = Path(state["config"])
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            _fail(f"cannot read config {path}: {exc}")
        except json.JSONDecodeError as exc:
            _fail(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})")
        if not isinstance(doc, dict):
            _fail(f"{path}: config must be a JSON object")
    try:
        doc = apply_overrides(doc, _parse_override_tokens(tokens))
        cfg = config_from_dict(doc)
    except (ParseError, EegMinSetError, TypeError) as exc:
        _fail(str(exc))
    if state["seed"] is not None:
        s = state["seed"]
        cfg = replace(
            cfg,
            synth=replace(cfg.synth, seed=s),
            train=replace(cfg.train, seed=s),
            eval=replace(cfg.eval, seed=s),
        )
    if state["positive_class"] is not None:
        cfg = replace(
            cfg, eval=replace(cfg.eval, positive_class=Label.parse(state["positive_class"]))
        )
    return cfg, config_hash(cfg)


def _out_dir(ctx: click.Context, sub: str) -> Path:
    root = Path(ctx.obj["out"]) if ctx.obj["out"] else Path(".")
    d = root / sub
    d.mkdir(parents=True, exist_ok=True)
    return d


def _load_corpus(data_dir: Path):
    if not data_dir.is_dir():
        _fail(f"corpus directory not found: {data_dir}")
    paths = sorted(data_dir.glob("*.csv"))
    if not paths:
        _fail(f"no recordings (*.csv) in {data_dir}")
    return [load_recording(p) for p in paths]


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@click.group()
@click.option("--config", type=click.Path(), default=None, help="Run config JSON.")
@click.option("--seed", type=int, default=None,
              help="Master seed, overriding synth/train/eval seeds.")
@click.option("--out", type=click.Path(), default=None,
              help="Root directory for data/models/reports.")
@click.option("--positive-class", type=click.Choice(["alpha", "nonalpha"]),
              default=None, help="Positive class for training and evaluation.")
@click.pass_context
def main(ctx, config, seed, out, positive_class):
    """Minimal-EEG-set-up finder: synthesize data, train one-class detectors
    per electrode set-up, and rank set-ups by cross-validated F-score."""
    ctx.obj = {
        "config": config,
        "seed": seed,
        "out": out,
        "positive_class": positive_class,
    }


_OVERRIDE_SETTINGS = dict(ignore_unknown_options=True, allow_interspersed_args=False)


@main.command(context_settings=_OVERRIDE_SETTINGS)
@click.argument("overrides", nargs=-1, type=click.UNPROCESSED)
@click.pass_context
def synth(ctx, overrides):
    """Generate the synthetic corpus plus a manifest."""
    cfg, h = _resolve_config(ctx, overrides)
    try:
        data_dir = _out_dir(ctx, cfg.paths.data_dir)
        corpus = generate_corpus(cfg.synth, cfg.n_recordings)
        files = []
        for rec in corpus:
            path = data_dir / f"{rec.id}.csv"
            save_recording(rec, path)
            files.append(
                {"file": path.name, "seed": int(rec.id.removeprefix("synth")),
                 "sha256": _sha256(path)}
            )
        manifest = {
            "config_hash": h,
            "config": cfg.to_dict(),
            "n_recordings": cfg.n_recordings,
            "files": files,
        }
        (data_dir / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    except (EegMinSetError, OSError) as exc:
        _fail(str(exc))
    click.echo(f"wrote {len(files)} recordings to {data_dir} (config {h})")


@main.command(context_settings=_OVERRIDE_SETTINGS)
@click.option("--setup", "setups", multiple=True, help="Set-up name(s); default all configured.")
@click.option("--recording", "recording_paths", multiple=True, type=click.Path(),
              help="Recording CSV path(s); default every CSV in the data dir.")
@click.argument("overrides", nargs=-1, type=click.UNPROCESSED)
@click.pass_context
def featurize(ctx, setups, recording_paths, overrides):
    """Cache per-window features as CSV, one file per recording and set-up."""
    cfg, h = _resolve_config(ctx, overrides)
    try:
        names = setups or cfg.setups
        data_dir = _out_dir(ctx, cfg.paths.data_dir)
        if recording_paths:
            recs = [load_recording(p) for p in recording_paths]
        else:
            recs = _load_corpus(data_dir)
        feat_dir = data_dir / "features"
        feat_dir.mkdir(exist_ok=True)
        count = 0
        for rec in recs:
            for name in names:
                series = build_feature_series(rec, setup_by_name(name), cfg.features)
                report_mod.write_feature_series_csv(
                    series, feat_dir / f"{rec.id}__{name}.csv", h
                )
                count += 1
    except (EegMinSetError, OSError) as exc:
        _fail(str(exc))
    click.echo(f"wrote {count} feature files to {feat_dir}")


@main.command(context_settings=_OVERRIDE_SETTINGS)
@click.option("--setup", "setup_name", required=True, help="Set-up to train on.")
@click.option("--recording", "recording_path", required=True, type=click.Path())
@click.option("--model-out", type=click.Path(), default=None)
@click.argument("overrides", nargs=-1, type=click.UNPROCESSED)
@click.pass_context
def train(ctx, setup_name, recording_path, model_out, overrides):
    """Train a one-class model on one recording's positive windows."""
    cfg, h = _resolve_config(ctx, overrides)
    try:
        setup = setup_by_name(setup_name)
        rec = load_recording(recording_path)
        positive = cfg.eval.positive_class
        series = build_feature_series(rec, setup, cfg.features)
        windows = [
            w for w in assemble_model_windows(series, cfg.eval.model_k)
            if w.label is positive
        ]
        model, threshold = evaluation.fit_one_class_model(
            windows, setup, cfg.train, cfg.eval, split_seed=cfg.eval.seed
        )
        model.train_meta.update(
            {
                "setup": setup.name,
                "positive_class": positive.value,
                "threshold": threshold,
                "config_hash": h,
            }
        )
        model_dir = _out_dir(ctx, cfg.paths.model_dir)
        out_path = Path(model_out) if model_out else (
            model_dir / f"{setup.name}_{positive.value}.model.json"
        )
        out_path.parent.mkdir(parents=True, exist_ok=True)
        save_model(model, out_path)
    except (EegMinSetError, OSError) as exc:
        _fail(str(exc))
    click.echo(f"wrote model {out_path} (threshold {threshold!r})")


@main.command(context_settings=_OVERRIDE_SETTINGS)
@click.option("--setup", "setup_name", required=True)
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--recording", "recording_path", required=True, type=click.Path())
@click.option("--scores-out", type=click.Path(), default=None)
@click.argument("overrides", nargs=-1, type=click.UNPROCESSED)
@click.pass_context
def score(ctx, setup_name, model_path, recording_path, scores_out, overrides):
    """Score a recording window by window with a trained model."""
    cfg, h = _resolve_config(ctx, overrides)
    try:
        setup = setup_by_name(setup_name)
        model = load_model(model_path)
        rec = load_recording(recording_path)
        series = build_feature_series(rec, setup, cfg.features)
        windows = assemble_model_windows(series, cfg.eval.model_k)
        if windows[0].flat.size != model.spec.input_dim:
            raise DimensionMismatch(
                f"set-up {setup.name!r} yields {windows[0].flat.size}-dim windows, "
                f"model expects {model.spec.input_dim}"
            )
        scores = score_windows(model, windows)
        threshold = model.train_meta.get("threshold")

        buf = io.StringIO()
        buf.write(f"# config_hash={h}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["window_index", "score", "label", "classification"])
        for i, (w, s) in enumerate(zip(windows, scores)):
            verdict = ""
            if threshold is not None:
                verdict = "positive" if evaluation.classify(s, threshold) else "negative"
            writer.writerow([i, repr(float(s)), w.label.value, verdict])
        report_dir = _out_dir(ctx, cfg.paths.report_dir)
        out_path = Path(scores_out) if scores_out else (
            report_dir / f"scores_{rec.id}_{setup.name}.csv"
        )
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(buf.getvalue(), encoding="utf-8", newline="")
    except (EegMinSetError, OSError) as exc:
        _fail(str(exc))
    click.echo(f"wrote {len(windows)} scores to {out_path}")


@main.command(context_settings=_OVERRIDE_SETTINGS)
@click.argument("overrides", nargs=-1, type=click.UNPROCESSED)
@click.pass_context
def sweep(ctx, overrides):
    """Cross-validate every configured set-up and pick the optimal one."""
    cfg, h = _resolve_config(ctx, overrides)
    try:
        data_dir = _out_dir(ctx, cfg.paths.data_dir)
        corpus = _load_corpus(data_dir)
        setups = [setup_by_name(n) for n in cfg.setups]
        rep = evaluation.sweep(
            corpus, setups, cfg.eval.positive_class,
            cfg.features, cfg.train, cfg.eval, cfg.comfort,
        )
        report_dir = _out_dir(ctx, cfg.paths.report_dir)
        stem = f"report_{cfg.eval.positive_class.value}"
        report_mod.write_report_json(rep, report_dir / f"{stem}.json", h)
        report_mod.write_folds_csv(rep.per_setup, report_dir / f"{stem}.csv", h)
        report_mod.render_fscore_chart(rep, report_dir / f"{stem}.svg", h)
    except (EegMinSetError, OSError) as exc:
        _fail(str(exc))
    for name, result in rep.per_setup.items():
        click.echo(
            f"  {name:10s} m={result.n_channels}  "
            f"F = {result.mean_fscore:.4f} +/- {result.std_fscore:.4f}"
        )
    click.echo(f"selected set-up: {rep.selected_setup}"
               + (" (fallback, no set-up passed the gate)" if rep.fallback_used else ""))
    for t in rep.selection_trace:
        click.echo(f"  [{t.rule}] {t.setup}: {t.decision}")
    click.echo(f"reports written to {report_dir} (config {h})")


@main.command(context_settings=_OVERRIDE_SETTINGS)
@click.option("--compare", "compare_path", type=click.Path(), default=None,
              help="Sweep report JSON to compare against.")
@click.argument("overrides", nargs=-1, type=click.UNPROCESSED)
@click.pass_context
def baseline(ctx, compare_path, overrides):
    """Band-power threshold baseline over the same folds and set-ups."""
    cfg, h = _resolve_config(ctx, overrides)
    try:
        data_dir = _out_dir(ctx, cfg.paths.data_dir)
        corpus = _load_corpus(data_dir)
        results = {
            name: baseline_mod.bandpower_baseline(
                corpus, setup_by_name(name), cfg.features, cfg.eval
            )
            for name in cfg.setups
        }
        report_dir = _out_dir(ctx, cfg.paths.report_dir)
        positive = cfg.eval.positive_class.value
        report_mod.write_folds_csv(
            results, report_dir / f"baseline_{positive}.csv", h
        )
        if compare_path:
            rep, rep_hash = report_mod.load_report(compare_path)
            report_mod.write_comparison_csv(
                rep, results, report_dir / f"comparison_{positive}.csv", h
            )
            report_mod.render_fscore_chart(
                rep, report_dir / f"comparison_{positive}.svg", h, baseline=results
            )
    except (EegMinSetError, OSError) as exc:
        _fail(str(exc))
    for name, r in results.items():
        click.echo(f"  {name:10s} baseline F = {r.mean_fscore:.4f} +/- {r.std_fscore:.4f}")
    click.echo(f"baseline written to {report_dir}")


@main.command(context_settings=_OVERRIDE_SETTINGS)
@click.option("--input", "input_path", required=True, type=click.Path(),
              help="Sweep report JSON to re-render.")
@click.argument("overrides", nargs=-1, type=click.UNPROCESSED)
@click.pass_context
def report(ctx, input_path, overrides):
    """Re-render the CSV table and SVG chart from a saved report JSON."""
    _resolve_config(ctx, overrides)
    try:
        rep, h = report_mod.load_report(input_path)
        stem = Path(input_path).with_suffix("")
        report_mod.write_folds_csv(rep.per_setup, stem.with_suffix(".csv"), h)
        report_mod.render_fscore_chart(rep, stem.with_suffix(".svg"), h)
    except (EegMinSetError, OSError) as exc:
        _fail(str(exc))
    click.echo(f"re-rendered {stem.with_suffix('.csv')} and {stem.with_suffix('.svg')}")


if __name__ == "__main__":
    main()
