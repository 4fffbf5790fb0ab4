"""Transparent band-power baseline for sanity comparison.

Classifies each feature window by the mean 8-12 Hz periodogram power
averaged over the set-up's channels, with the threshold chosen by an
exhaustive best-F sweep on the training folds. Shares the fold partition
and the F-score with the autoencoder pipeline, so the two are directly
comparable per set-up.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .dataset import Label, Recording, SetUp, derive_channel_signal
from .evaluation import (
    EvalConfig,
    FoldResult,
    SetupResult,
    _best_f_threshold,
    fscore,
    make_folds,
)
from .features import FeatureConfig, _periodograms, n_feature_windows
from numpy.lib.stride_tricks import sliding_window_view

ALPHA_BAND_HZ = (8.0, 12.0)


def band_powers(
    rec: Recording, setup: SetUp, fcfg: FeatureConfig, band: tuple[float, float] = ALPHA_BAND_HZ
) -> tuple[np.ndarray, np.ndarray]:
    """Per-window mean band power averaged over channels, plus window labels."""
    from .features import window_label

    lo, hi = band
    n_windows = None
    powers = []
    for ch in setup.channels:
        signal = derive_channel_signal(rec, ch)
        n_windows = n_feature_windows(signal.size, fcfg)
        windows = sliding_window_view(signal, fcfg.window_len_samples)[
            :: fcfg.window_stride_samples
        ][:n_windows]
        psd = _periodograms(windows, rec.sample_rate_hz)
        freqs = np.fft.rfftfreq(fcfg.window_len_samples, d=1.0 / rec.sample_rate_hz)
        mask = (freqs >= lo) & (freqs <= hi)
        powers.append(psd[:, mask].mean(axis=1))
    mean_power = np.mean(powers, axis=0)
    starts = np.arange(n_windows) * fcfg.window_stride_samples
    labels = np.array(
        [
            window_label(rec.labels, int(s), fcfg.window_len_samples) is Label.ALPHA
            for s in starts
        ],
        dtype=bool,
    )
    return mean_power, labels


def _collect(recs: Sequence[Recording], setup: SetUp, fcfg: FeatureConfig):
    powers, labels = [], []
    for rec in recs:
        p, lab = band_powers(rec, setup, fcfg)
        powers.append(p)
        labels.append(lab)
    return np.concatenate(powers), np.concatenate(labels)


def bandpower_baseline(
    corpus: Sequence[Recording],
    setup: SetUp,
    feature_cfg: FeatureConfig,
    eval_cfg: EvalConfig,
) -> SetupResult:
    """Fold-wise band-power classification of one set-up.

    High band power marks alpha, so scores are negated when alpha is the
    positive class to keep the shared 'positive iff score <= threshold'
    convention. Thresholds are the best-F sweep on each fold's training
    windows.
    """
    positive = eval_cfg.positive_class
    folds = make_folds(len(corpus), eval_cfg.k_folds, eval_cfg.seed)
    sign = -1.0 if positive is Label.ALPHA else 1.0

    results = []
    for fold_id, (train_ids, test_ids) in enumerate(folds):
        train_p, train_alpha = _collect([corpus[i] for i in train_ids], setup, feature_cfg)
        test_p, test_alpha = _collect([corpus[i] for i in test_ids], setup, feature_cfg)
        train_truth = train_alpha if positive is Label.ALPHA else ~train_alpha
        test_truth = test_alpha if positive is Label.ALPHA else ~test_alpha
        if not np.any(test_truth):
            results.append(
                FoldResult(
                    fold_id=fold_id, setup_name=setup.name, positive_class=positive,
                    threshold=float("nan"), tp=0, fp=0, fn=0, tn=test_truth.size,
                    fscore=float("nan"),
                    skipped_reason="test set contains no positive windows",
                )
            )
            continue
        threshold = _best_f_threshold(sign * train_p, train_truth)
        pred = sign * test_p <= threshold
        tp = int(np.count_nonzero(pred & test_truth))
        fp = int(np.count_nonzero(pred & ~test_truth))
        fn = int(np.count_nonzero(~pred & test_truth))
        tn = int(np.count_nonzero(~pred & ~test_truth))
        results.append(
            FoldResult(
                fold_id=fold_id, setup_name=setup.name, positive_class=positive,
                threshold=threshold, tp=tp, fp=fp, fn=fn, tn=tn,
                fscore=fscore(tp, fp, fn),
            )
        )
    return SetupResult.from_folds(setup, results)
