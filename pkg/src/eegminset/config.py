"""Run configuration: one JSON file, dotted-path overrides, stable hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import Electrode, Label, builtin_setups
from .errors import ParseError
from .evaluation import ComfortRanking, EvalConfig, ThresholdRule, default_comfort_ranking
from .features import FeatureConfig
from .model import TrainConfig
from .synthgen import SynthConfig


@dataclass(frozen=True)
class Paths:
    data_dir: str = "data"
    model_dir: str = "models"
    report_dir: str = "reports"


def _default_setups() -> tuple[str, ...]:
    return tuple(s.name for s in builtin_setups())


@dataclass(frozen=True)
class RunConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    comfort: ComfortRanking = field(default_factory=default_comfort_ranking)
    setups: tuple[str, ...] = field(default_factory=_default_setups)
    n_recordings: int = 9
    paths: Paths = field(default_factory=Paths)

    def to_dict(self) -> dict:
        return {
            "synth": self.synth.to_dict(),
            "features": dataclasses.asdict(self.features),
            "train": dataclasses.asdict(self.train),
            "eval": {
                "k_folds": self.eval.k_folds,
                "threshold": dataclasses.asdict(self.eval.threshold),
                "delta": self.eval.delta,
                "positive_class": self.eval.positive_class.value,
                "seed": self.eval.seed,
                "model_k": self.eval.model_k,
                "alpha": self.eval.alpha,
                "beta": self.eval.beta,
                "val_fraction": self.eval.val_fraction,
            },
            "comfort": {
                "ranking": list(self.comfort.ranking),
                "forbidden_electrodes": sorted(
                    e.value for e in self.comfort.forbidden_electrodes
                ),
            },
            "setups": list(self.setups),
            "n_recordings": self.n_recordings,
            "paths": dataclasses.asdict(self.paths),
        }


def _check_keys(section: str, d: dict, allowed: set[str]) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ParseError(f"unknown {section} keys: {sorted(unknown)}")


def config_from_dict(doc: dict) -> RunConfig:
    _check_keys("config", doc, {
        "synth", "features", "train", "eval", "comfort", "setups",
        "n_recordings", "paths",
    })
    synth = SynthConfig.from_dict(doc.get("synth", {}))

    fdoc = doc.get("features", {})
    _check_keys("features", fdoc, {f.name for f in dataclasses.fields(FeatureConfig)})
    features = FeatureConfig(**fdoc)

    tdoc = doc.get("train", {})
    _check_keys("train", tdoc, {f.name for f in dataclasses.fields(TrainConfig)})
    train = TrainConfig(**tdoc)

    edoc = dict(doc.get("eval", {}))
    _check_keys("eval", edoc, {
        "k_folds", "threshold", "delta", "positive_class", "seed",
        "model_k", "alpha", "beta", "val_fraction",
    })
    if "threshold" in edoc:
        rdoc = edoc["threshold"]
        _check_keys("eval.threshold", rdoc, {"kind", "p"})
        edoc["threshold"] = ThresholdRule(**rdoc)
    if "positive_class" in edoc:
        edoc["positive_class"] = Label.parse(edoc["positive_class"])
    eval_cfg = EvalConfig(**edoc)

    cdoc = doc.get("comfort", {})
    _check_keys("comfort", cdoc, {"ranking", "forbidden_electrodes"})
    defaults = default_comfort_ranking()
    comfort = ComfortRanking(
        ranking=tuple(cdoc.get("ranking", defaults.ranking)),
        forbidden_electrodes=frozenset(
            Electrode.parse(e)
            for e in cdoc.get(
                "forbidden_electrodes",
                [e.value for e in defaults.forbidden_electrodes],
            )
        ),
    )

    pdoc = doc.get("paths", {})
    _check_keys("paths", pdoc, {f.name for f in dataclasses.fields(Paths)})

    known = {s.name for s in builtin_setups()}
    setups = tuple(doc.get("setups", _default_setups()))
    unknown_setups = [s for s in setups if s not in known]
    if unknown_setups:
        raise ParseError(f"unknown set-up names: {unknown_setups}")

    return RunConfig(
        synth=synth,
        features=features,
        train=train,
        eval=eval_cfg,
        comfort=comfort,
        setups=setups,
        n_recordings=int(doc.get("n_recordings", 9)),
        paths=Paths(**pdoc),
    )


def load_config(path: str | Path | None = None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: config must be a JSON object")
    return config_from_dict(doc)


def apply_overrides(doc: dict, overrides: list[tuple[str, str]]) -> dict:
    """Apply ('eval.k_folds', '6') style dotted-path overrides to a config
    dict. Values parse as JSON when possible, else stay strings."""
    for dotted, raw in overrides:
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = doc
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ParseError(f"override {dotted!r} crosses a non-object value")
        node[parts[-1]] = value
    return doc


def config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]
