"""Per-window feature extraction and model-input assembly.

Raw channel signals are cut into fixed-length windows (1 s at the default
256 Hz, 50 % overlap) and reduced to eight features per window: mean,
population standard deviation, median, minimum, maximum, RMS, and the
maximum and mean of the one-sided Hann periodogram with the DC bin
excluded. Consecutive feature rows are then stacked K at a time into flat
model windows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .dataset import Label, Recording, SetUp, derive_channel_signal
from .errors import (
    DimensionMismatch,
    EmptyTrainingSet,
    InvariantViolation,
    OutOfRange,
    SignalTooShort,
    TooFewWindows,
)

#: Feature order within each channel block.
FEATURE_NAMES = ("mean", "std", "median", "min", "max", "rms", "max_psd", "mean_psd")
#: Features per channel (L).
N_FEATURES = len(FEATURE_NAMES)
#: Default model window length (feature rows per model input).
DEFAULT_K = 4

_STD_FLOOR = 1e-8


@dataclass(frozen=True)
class FeatureConfig:
    window_len_samples: int = 256
    window_stride_samples: int = 128
    psd_window: str = "hann"      # only supported taper
    label_rule: str = "majority"  # only supported rule

    def __post_init__(self) -> None:
        n = self.window_len_samples
        if n < 1 or self.window_stride_samples < 1:
            raise InvariantViolation("window length and stride must be positive")
        if self.window_stride_samples > n:
            raise InvariantViolation("stride must not exceed the window length")
        if n & (n - 1) != 0:
            raise InvariantViolation("window_len_samples must be a power of two")
        if self.psd_window != "hann":
            raise InvariantViolation(f"unsupported psd_window {self.psd_window!r}")
        if self.label_rule != "majority":
            raise InvariantViolation(f"unsupported label_rule {self.label_rule!r}")


def n_feature_windows(signal_len: int, cfg: FeatureConfig) -> int:
    if signal_len < cfg.window_len_samples:
        raise SignalTooShort(
            f"signal of {signal_len} samples is shorter than one "
            f"{cfg.window_len_samples}-sample window"
        )
    return (signal_len - cfg.window_len_samples) // cfg.window_stride_samples + 1


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann taper w[k] = 0.5 - 0.5 cos(2 pi k / n)."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def periodogram(x: np.ndarray, fs: float) -> tuple[np.ndarray, np.ndarray]:
    """One-sided Hann periodogram of a single window.

    Returns (freqs, P) where P[k] = |DFT(w*x)[k]|^2 / (fs * sum(w^2)), with
    every bin except DC and Nyquist doubled to fold the negative
    frequencies in. sum(P) * fs / n equals the w^2-weighted mean power of x
    (Parseval).
    """
    x = np.asarray(x, dtype=np.float64)
    p = _periodograms(x[np.newaxis, :], fs)[0]
    freqs = np.fft.rfftfreq(x.size, d=1.0 / fs)
    return freqs, p


def _periodograms(windows: np.ndarray, fs: float) -> np.ndarray:
    """Row-wise one-sided Hann periodograms of shape (n_windows, n//2 + 1)."""
    n = windows.shape[1]
    w = hann_window(n)
    spec = np.fft.rfft(windows * w, axis=1)
    p = (spec.real**2 + spec.imag**2) / (fs * np.sum(w * w))
    if n % 2 == 0:
        p[:, 1:-1] *= 2.0
    else:
        p[:, 1:] *= 2.0
    return p


def extract_features(signal: np.ndarray, fs: float, cfg: FeatureConfig) -> np.ndarray:
    """Eight features for every sliding window of one channel signal.

    Rows follow FEATURE_NAMES order. Standard deviation is the population
    one (divide by N), so rms^2 = std^2 + mean^2 holds exactly. PSD
    features exclude the DC bin so slow drift does not dominate them.
    """
    signal = np.asarray(signal, dtype=np.float64)
    n_windows = n_feature_windows(signal.size, cfg)
    windows = sliding_window_view(signal, cfg.window_len_samples)[
        :: cfg.window_stride_samples
    ][:n_windows]

    psd = _periodograms(windows, fs)
    out = np.empty((n_windows, N_FEATURES))
    out[:, 0] = windows.mean(axis=1)
    out[:, 1] = windows.std(axis=1)
    out[:, 2] = np.median(windows, axis=1)
    out[:, 3] = windows.min(axis=1)
    out[:, 4] = windows.max(axis=1)
    out[:, 5] = np.sqrt(np.mean(windows * windows, axis=1))
    out[:, 6] = psd[:, 1:].max(axis=1)
    out[:, 7] = psd[:, 1:].mean(axis=1)
    return out


def window_label(labels: np.ndarray, start: int, length: int) -> Label:
    """Majority label of labels[start:start+length]; ties go to non-alpha."""
    labels = np.asarray(labels, dtype=bool)
    if start < 0 or length < 1 or start + length > labels.size:
        raise OutOfRange(
            f"window [{start}, {start + length}) outside {labels.size} labels"
        )
    n_alpha = int(np.count_nonzero(labels[start : start + length]))
    return Label.ALPHA if 2 * n_alpha > length else Label.NONALPHA


@dataclass
class FeatureSeries:
    """Channel-major feature matrix for one recording under one set-up.

    features has shape (n_windows, m * 8): columns 0-7 belong to the first
    channel, 8-15 to the second, and so on. labels is boolean per window
    (True = alpha).
    """

    setup: SetUp
    features: np.ndarray
    labels: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=bool)
        if self.features.ndim != 2 or self.features.shape[1] != self.setup.m * N_FEATURES:
            raise InvariantViolation(
                f"expected {self.setup.m * N_FEATURES} feature columns, "
                f"got {self.features.shape}"
            )
        if self.labels.shape != (self.features.shape[0],):
            raise InvariantViolation("one label per feature row required")
        if not np.all(np.isfinite(self.features)):
            raise InvariantViolation("non-finite feature values")

    @property
    def n_windows(self) -> int:
        return self.features.shape[0]

    def column_names(self) -> list[str]:
        return [
            f"{ch.name}_{feat}" for ch in self.setup.channels for feat in FEATURE_NAMES
        ]


def build_feature_series(rec: Recording, setup: SetUp, cfg: FeatureConfig) -> FeatureSeries:
    """Derive every channel of the set-up, extract features, label windows."""
    blocks = [
        extract_features(derive_channel_signal(rec, ch), rec.sample_rate_hz, cfg)
        for ch in setup.channels
    ]
    features = np.hstack(blocks)
    starts = np.arange(features.shape[0]) * cfg.window_stride_samples
    labels = np.array(
        [
            window_label(rec.labels, int(s), cfg.window_len_samples) is Label.ALPHA
            for s in starts
        ],
        dtype=bool,
    )
    return FeatureSeries(setup=setup, features=features, labels=labels)


@dataclass(frozen=True)
class ModelWindow:
    """K consecutive feature rows flattened oldest-first, labeled by the newest."""

    flat: np.ndarray
    label: Label

    def __post_init__(self) -> None:
        object.__setattr__(self, "flat", np.asarray(self.flat, dtype=np.float64))
        if not np.all(np.isfinite(self.flat)):
            raise InvariantViolation("non-finite model window values")


def assemble_model_windows(series: FeatureSeries, k: int = DEFAULT_K) -> list[ModelWindow]:
    """Sliding stacks of k feature rows (stride 1), n_windows - k + 1 of them."""
    if k < 1:
        raise InvariantViolation("k must be positive")
    if series.n_windows < k:
        raise TooFewWindows(
            f"{series.n_windows} feature windows cannot fill a model window of {k}"
        )
    out = []
    for t in range(k - 1, series.n_windows):
        flat = series.features[t - k + 1 : t + 1].ravel()
        label = Label.ALPHA if series.labels[t] else Label.NONALPHA
        out.append(ModelWindow(flat=flat, label=label))
    return out


@dataclass(frozen=True)
class Normalizer:
    """Per-dimension z-score statistics taken from training windows only."""

    mean: np.ndarray
    std: np.ndarray

    def apply(self, w: ModelWindow) -> ModelWindow:
        if w.flat.shape != self.mean.shape:
            raise DimensionMismatch(
                f"window has {w.flat.shape}, normalizer has {self.mean.shape}"
            )
        return ModelWindow(flat=(w.flat - self.mean) / self.std, label=w.label)

    def apply_matrix(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.mean.size:
            raise DimensionMismatch(
                f"matrix has {x.shape[-1]} columns, normalizer has {self.mean.size}"
            )
        return (x - self.mean) / self.std

    def inverse(self, w: ModelWindow) -> ModelWindow:
        return ModelWindow(flat=w.flat * self.std + self.mean, label=w.label)


def fit_normalizer(train: Sequence[ModelWindow]) -> Normalizer:
    if len(train) == 0:
        raise EmptyTrainingSet("cannot fit a normalizer on zero windows")
    x = np.stack([w.flat for w in train])
    std = x.std(axis=0)
    return Normalizer(mean=x.mean(axis=0), std=np.maximum(std, _STD_FLOOR))


def apply_normalizer(nz: Normalizer, w: ModelWindow) -> ModelWindow:
    return nz.apply(w)
