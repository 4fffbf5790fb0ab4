"""Cross-validated evaluation of channel set-ups and optimal-set-up selection.

A fold trains the one-class model on positive windows from its training
recordings, calibrates a score threshold on a held-out positive validation
split, scores every test window, and reduces the confusion counts to
F = 2TP / (2TP + FN + FP). A sweep repeats that for every set-up and every
fold, then applies the selection rule: among comfort-eligible set-ups whose
mean F stays within delta of the CzOz reference, take the one with the
fewest channels.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .dataset import Electrode, Label, Recording, SetUp
from .errors import (
    EmptyScores,
    InvariantViolation,
    MissingReference,
    TooFewRecordings,
    UndefinedFScore,
)
from .features import (
    DEFAULT_K,
    FeatureConfig,
    ModelWindow,
    assemble_model_windows,
    build_feature_series,
    fit_normalizer,
)
from .model import NetSpec, TrainConfig, UsadModel, score_matrix, train

REFERENCE_SETUP = "CzOz"


@dataclass(frozen=True)
class ThresholdRule:
    """How to turn validation scores into a decision threshold.

    train_percentile uses the p-th percentile of positive-class validation
    scores and needs no negative data. oracle_best_f sweeps the test scores
    for the threshold that maximizes F, a diagnostic upper bound that leaks
    test labels; reports flag it.
    """

    kind: str = "train_percentile"
    p: float = 95.0

    def __post_init__(self) -> None:
        if self.kind not in ("train_percentile", "oracle_best_f"):
            raise InvariantViolation(f"unknown threshold rule {self.kind!r}")
        if not 0.0 < self.p < 100.0:
            raise InvariantViolation("percentile must lie in (0, 100)")


@dataclass(frozen=True)
class EvalConfig:
    k_folds: int = 6
    threshold: ThresholdRule = ThresholdRule()
    delta: float = 0.15
    positive_class: Label = Label.ALPHA
    seed: int = 0
    model_k: int = DEFAULT_K
    alpha: float = 0.5
    beta: float = 0.5
    val_fraction: float = 0.1

    def __post_init__(self) -> None:
        if self.k_folds < 1:
            raise InvariantViolation("k_folds must be positive")
        if not 0.0 < self.val_fraction < 1.0:
            raise InvariantViolation("val_fraction must lie in (0, 1)")
        if self.delta < 0:
            raise InvariantViolation("delta must be non-negative")


def fscore(tp: int, fp: int, fn: int) -> float:
    """F = 2TP / (2TP + FN + FP); undefined when all three are zero."""
    if tp < 0 or fp < 0 or fn < 0:
        raise InvariantViolation("confusion counts must be non-negative")
    if tp == 0 and fp == 0 and fn == 0:
        raise UndefinedFScore("no positive ground truth and no positive predictions")
    return 2.0 * tp / (2.0 * tp + fn + fp)


def classify(score: float, threshold: float) -> bool:
    """True (positive class) iff score <= threshold; the boundary is positive."""
    return score <= threshold


def _best_f_threshold(scores: np.ndarray, is_positive: np.ndarray) -> float:
    """Exhaustive sweep over midpoints between sorted scores, maximizing F."""
    uniq = np.unique(scores)
    candidates = np.concatenate(
        ([uniq[0] - 1.0], (uniq[:-1] + uniq[1:]) / 2.0, [uniq[-1]])
    )
    best_f, best_t = -1.0, candidates[0]
    for t in candidates:
        pred = scores <= t
        tp = int(np.count_nonzero(pred & is_positive))
        fp = int(np.count_nonzero(pred & ~is_positive))
        fn = int(np.count_nonzero(~pred & is_positive))
        try:
            f = fscore(tp, fp, fn)
        except UndefinedFScore:
            continue
        if f > best_f:
            best_f, best_t = f, float(t)
    return best_t


def calibrate_threshold(
    scores: Sequence[float] | np.ndarray,
    rule: ThresholdRule,
    test_labels: np.ndarray | None = None,
) -> float:
    """Decision threshold from scores under the given rule.

    For train_percentile, scores are positive-class validation scores. For
    oracle_best_f, scores are test scores and test_labels is the boolean
    is-positive vector they are judged against.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise EmptyScores("cannot calibrate a threshold on zero scores")
    if rule.kind == "train_percentile":
        return float(np.percentile(scores, rule.p))
    if test_labels is None:
        raise InvariantViolation("oracle_best_f needs test labels")
    return _best_f_threshold(scores, np.asarray(test_labels, dtype=bool))


def make_folds(
    n_recordings: int, k: int = 6, seed: int = 0
) -> list[tuple[list[int], list[int]]]:
    """Recording-level k-fold partition; cell sizes differ by at most one."""
    if n_recordings < k:
        raise TooFewRecordings(f"{n_recordings} recordings cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_recordings)
    cells = np.array_split(perm, k)
    folds = []
    for cell in cells:
        test = sorted(int(i) for i in cell)
        train = sorted(set(range(n_recordings)) - set(test))
        folds.append((train, test))
    return folds


@dataclass
class FoldResult:
    fold_id: int
    setup_name: str
    positive_class: Label
    threshold: float
    tp: int
    fp: int
    fn: int
    tn: int
    fscore: float
    skipped_reason: str | None = None

    def __post_init__(self) -> None:
        if self.skipped_reason is not None:
            return
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise InvariantViolation("confusion counts must be non-negative")
        expected = fscore(self.tp, self.fp, self.fn)
        if abs(expected - self.fscore) > 1e-12:
            raise InvariantViolation(
                f"fscore {self.fscore} inconsistent with counts (expected {expected})"
            )

    @property
    def n_test_windows(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass
class SetupResult:
    setup_name: str
    n_channels: int
    folds: list[FoldResult] = field(default_factory=list)
    mean_fscore: float = float("nan")
    std_fscore: float = float("nan")

    @classmethod
    def from_folds(cls, setup: SetUp, folds: list[FoldResult]) -> "SetupResult":
        scored = [f.fscore for f in folds if f.skipped_reason is None]
        return cls(
            setup_name=setup.name,
            n_channels=setup.m,
            folds=folds,
            mean_fscore=float(np.mean(scored)) if scored else float("nan"),
            std_fscore=float(np.std(scored)) if scored else float("nan"),
        )


@dataclass
class TraceEntry:
    setup: str
    rule: str
    decision: str


@dataclass
class EvalReport:
    positive_class: Label
    per_setup: dict[str, SetupResult]
    reference_setup: str = REFERENCE_SETUP
    selected_setup: str | None = None
    selection_trace: list[TraceEntry] = field(default_factory=list)
    fallback_used: bool = False
    threshold_rule: ThresholdRule = ThresholdRule()

    @classmethod
    def from_means(
        cls,
        means: dict[str, tuple[float, int]],
        positive_class: Label = Label.ALPHA,
        reference_setup: str = REFERENCE_SETUP,
    ) -> "EvalReport":
        """Report stub from {setup: (mean_fscore, n_channels)}, for replaying
        published numbers through the selection rule."""
        per_setup = {
            name: SetupResult(setup_name=name, n_channels=nch, mean_fscore=mean,
                              std_fscore=0.0)
            for name, (mean, nch) in means.items()
        }
        return cls(positive_class=positive_class, per_setup=per_setup,
                   reference_setup=reference_setup)


def default_comfort_ranking() -> "ComfortRanking":
    return ComfortRanking(
        ranking=("Fp1Fp2", "refT7", "wearable", "noCz", "all", "CzOz"),
        forbidden_electrodes=frozenset({Electrode.CZ}),
    )


@dataclass(frozen=True)
class ComfortRanking:
    """Set-up names from most to least comfortable, plus electrodes a
    wearable candidate must not touch."""

    ranking: tuple[str, ...]
    forbidden_electrodes: frozenset[Electrode]

    def comfort_index(self, name: str) -> int:
        return self.ranking.index(name)


# ---------------------------------------------------------------------------
# Fold pipeline
# ---------------------------------------------------------------------------


def _derive_seed(base: int, setup_name: str, fold_id: int, salt: int) -> int:
    tag = zlib.crc32(setup_name.encode())
    return (base + 1_000_003 * tag + 7_919 * fold_id + salt) % 2**63


def _model_windows(
    recs: Sequence[Recording], setup: SetUp, fcfg: FeatureConfig, k: int
) -> list[ModelWindow]:
    windows: list[ModelWindow] = []
    for rec in recs:
        series = build_feature_series(rec, setup, fcfg)
        windows.extend(assemble_model_windows(series, k))
    return windows


def run_fold(
    train_recs: Sequence[Recording],
    test_recs: Sequence[Recording],
    setup: SetUp,
    positive_class: Label,
    feature_cfg: FeatureConfig,
    train_cfg: TrainConfig,
    eval_cfg: EvalConfig,
    fold_id: int = 0,
    split_seed: int | None = None,
) -> FoldResult:
    """Train on the fold's positive windows, threshold on a validation split,
    score both classes of the test recordings."""
    if len(train_recs) == 0 or len(test_recs) == 0:
        raise InvariantViolation("both recording lists must be non-empty")
    if split_seed is None:
        split_seed = train_cfg.seed + 1

    positive = positive_class
    train_windows = [
        w
        for w in _model_windows(train_recs, setup, feature_cfg, eval_cfg.model_k)
        if w.label is positive
    ]
    test_windows = _model_windows(test_recs, setup, feature_cfg, eval_cfg.model_k)
    test_truth = np.array([w.label is positive for w in test_windows], dtype=bool)
    if not np.any(test_truth):
        return FoldResult(
            fold_id=fold_id,
            setup_name=setup.name,
            positive_class=positive,
            threshold=float("nan"),
            tp=0, fp=0, fn=0, tn=len(test_windows),
            fscore=float("nan"),
            skipped_reason="test set contains no positive windows",
        )

    model, threshold = fit_one_class_model(
        train_windows, setup, train_cfg, eval_cfg, split_seed
    )
    x_test = model.normalizer.apply_matrix(np.stack([w.flat for w in test_windows]))
    scores = score_matrix(model, x_test)
    if eval_cfg.threshold.kind == "oracle_best_f":
        threshold = calibrate_threshold(scores, eval_cfg.threshold, test_truth)
    pred = scores <= threshold
    tp = int(np.count_nonzero(pred & test_truth))
    fp = int(np.count_nonzero(pred & ~test_truth))
    fn = int(np.count_nonzero(~pred & test_truth))
    tn = int(np.count_nonzero(~pred & ~test_truth))
    return FoldResult(
        fold_id=fold_id,
        setup_name=setup.name,
        positive_class=positive,
        threshold=threshold,
        tp=tp, fp=fp, fn=fn, tn=tn,
        fscore=fscore(tp, fp, fn),
    )


def fit_one_class_model(
    train_windows: list[ModelWindow],
    setup: SetUp,
    train_cfg: TrainConfig,
    eval_cfg: EvalConfig,
    split_seed: int,
) -> tuple[UsadModel, float]:
    """90/10 split, normalizer from the train part, model, percentile threshold."""
    n = len(train_windows)
    if n < 2:
        raise InvariantViolation(
            f"need at least 2 positive training windows, got {n}"
        )
    rng = np.random.default_rng(split_seed)
    perm = rng.permutation(n)
    n_val = max(1, int(round(eval_cfg.val_fraction * n)))
    val = [train_windows[i] for i in perm[:n_val]]
    fit = [train_windows[i] for i in perm[n_val:]]

    normalizer = fit_normalizer(fit)
    spec = NetSpec.for_setup(setup.m, eval_cfg.model_k)
    normalized = [normalizer.apply(w) for w in fit]
    model = train(
        normalized,
        spec,
        train_cfg,
        normalizer=normalizer,
        alpha=eval_cfg.alpha,
        beta=eval_cfg.beta,
    )
    val_scores = score_matrix(model, normalizer.apply_matrix(np.stack([w.flat for w in val])))
    if eval_cfg.threshold.kind == "train_percentile":
        threshold = calibrate_threshold(val_scores, eval_cfg.threshold)
    else:
        threshold = float(np.max(val_scores))  # placeholder, oracle replaces it
    return model, threshold


def sweep(
    corpus: Sequence[Recording],
    setups: Sequence[SetUp],
    positive_class: Label,
    feature_cfg: FeatureConfig,
    train_cfg: TrainConfig,
    eval_cfg: EvalConfig,
    comfort: ComfortRanking | None = None,
) -> EvalReport:
    """run_fold for every set-up and fold, plus the selection rule.

    The CzOz reference is appended to the evaluated set-ups when missing.
    Results do not depend on the order set-ups are supplied in.
    """
    if len(setups) == 0:
        raise InvariantViolation("at least one set-up required")
    from .dataset import setup_by_name

    setups = list(setups)
    if not any(s.name == REFERENCE_SETUP for s in setups):
        setups.append(setup_by_name(REFERENCE_SETUP))
    if comfort is None:
        comfort = default_comfort_ranking()

    folds = make_folds(len(corpus), eval_cfg.k_folds, eval_cfg.seed)
    per_setup: dict[str, SetupResult] = {}
    for setup in setups:
        fold_results = []
        for fold_id, (train_ids, test_ids) in enumerate(folds):
            fold_train_cfg = replace(
                train_cfg,
                seed=_derive_seed(train_cfg.seed, setup.name, fold_id, salt=1),
            )
            fold_results.append(
                run_fold(
                    [corpus[i] for i in train_ids],
                    [corpus[i] for i in test_ids],
                    setup,
                    positive_class,
                    feature_cfg,
                    fold_train_cfg,
                    eval_cfg,
                    fold_id=fold_id,
                    split_seed=_derive_seed(eval_cfg.seed, setup.name, fold_id, salt=2),
                )
            )
        per_setup[setup.name] = SetupResult.from_folds(setup, fold_results)

    report = EvalReport(
        positive_class=positive_class,
        per_setup=per_setup,
        threshold_rule=eval_cfg.threshold,
    )
    select_optimal(report, comfort, eval_cfg.delta)
    return report


# ---------------------------------------------------------------------------
# Selection rule
# ---------------------------------------------------------------------------


def _setup_electrodes(name: str) -> frozenset[Electrode]:
    from .dataset import setup_by_name

    return setup_by_name(name).electrodes


def select_optimal(
    report: EvalReport, comfort: ComfortRanking, delta: float = 0.15
) -> str:
    """Pick the wearable winner and record every comparison in the trace.

    Rule: drop set-ups touching a forbidden electrode; keep those whose mean
    F is within delta of the reference; among the kept, fewest channels
    wins, with ties broken by comfort rank then higher mean F. If the
    performance gate leaves nothing, fall back to the comfort-eligible
    set-up with the best mean F and flag the report.
    """
    if report.reference_setup not in report.per_setup:
        raise MissingReference(
            f"report lacks reference set-up {report.reference_setup!r}"
        )
    missing = [n for n in report.per_setup if n not in comfort.ranking]
    if missing:
        raise InvariantViolation(f"comfort ranking does not cover {missing}")

    trace: list[TraceEntry] = []
    ref_mean = report.per_setup[report.reference_setup].mean_fscore
    gate = ref_mean - delta
    trace.append(
        TraceEntry(
            report.reference_setup,
            "reference",
            f"mean F {ref_mean:.4f}, performance gate {gate:.4f} (delta {delta})",
        )
    )

    eligible: list[SetupResult] = []
    for name, result in report.per_setup.items():
        forbidden = _setup_electrodes(name) & comfort.forbidden_electrodes
        if forbidden:
            trace.append(
                TraceEntry(
                    name,
                    "comfort",
                    f"rejected: uses forbidden electrode(s) "
                    f"{', '.join(sorted(e.value for e in forbidden))}",
                )
            )
        else:
            trace.append(TraceEntry(name, "comfort", "kept: no forbidden electrodes"))
            eligible.append(result)
    if not eligible:
        raise InvariantViolation("no comfort-eligible set-ups to select from")

    kept: list[SetupResult] = []
    for result in eligible:
        if result.mean_fscore >= gate:
            trace.append(
                TraceEntry(
                    result.setup_name,
                    "performance",
                    f"kept: {result.mean_fscore:.4f} >= {gate:.4f}",
                )
            )
            kept.append(result)
        else:
            trace.append(
                TraceEntry(
                    result.setup_name,
                    "performance",
                    f"rejected: {result.mean_fscore:.4f} < {gate:.4f}",
                )
            )

    fallback = False
    if kept:
        min_ch = min(r.n_channels for r in kept)
        finalists = [r for r in kept if r.n_channels == min_ch]
        for r in kept:
            verdict = "kept" if r.n_channels == min_ch else "rejected"
            trace.append(
                TraceEntry(
                    r.setup_name,
                    "channels",
                    f"{verdict}: {r.n_channels} channel(s), minimum is {min_ch}",
                )
            )
        winner = min(
            finalists,
            key=lambda r: (comfort.comfort_index(r.setup_name), -r.mean_fscore),
        )
        if len(finalists) > 1:
            trace.append(
                TraceEntry(
                    winner.setup_name,
                    "tie-break",
                    "kept: best comfort rank, then higher mean F",
                )
            )
    else:
        fallback = True
        winner = max(eligible, key=lambda r: r.mean_fscore)
        trace.append(
            TraceEntry(
                winner.setup_name,
                "fallback",
                "no set-up passed the performance gate; "
                f"best comfort-eligible mean F {winner.mean_fscore:.4f}",
            )
        )

    trace.append(TraceEntry(winner.setup_name, "selected", "optimal set-up"))
    report.selected_setup = winner.setup_name
    report.selection_trace = trace
    report.fallback_used = fallback
    return winner.setup_name


# ---------------------------------------------------------------------------
# Small shared statistics helpers
# ---------------------------------------------------------------------------


def roc_auc(scores: np.ndarray, is_target: np.ndarray) -> float:
    """Probability a random target outscores a random non-target (ties 0.5)."""
    scores = np.asarray(scores, dtype=np.float64)
    is_target = np.asarray(is_target, dtype=bool)
    n_t = int(np.count_nonzero(is_target))
    n_n = is_target.size - n_t
    if n_t == 0 or n_n == 0:
        raise InvariantViolation("roc_auc needs both classes present")
    _, inv, counts = np.unique(scores, return_inverse=True, return_counts=True)
    cum = np.cumsum(counts).astype(np.float64)
    avg_rank = cum - (counts - 1) / 2.0
    ranks = avg_rank[inv]
    return float((ranks[is_target].sum() - n_t * (n_t + 1) / 2.0) / (n_t * n_n))
