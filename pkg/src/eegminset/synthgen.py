"""Seeded synthetic EEG corpus with labeled alpha bursts.

The signal model is deliberately simple: every electrode carries independent
1/f-shaped background noise plus white sensor noise; during alpha segments a
shared-phase sinusoid in the alpha band is added with a per-electrode spatial
gain that decays from Oz towards the forehead; Fp1/Fp2 pick up blink
transients while the eyes are open (non-alpha segments). Everything is drawn
from a single PCG64 stream, so equal configs give bit-equal recordings.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataset import ELECTRODE_ORDER, Electrode, Recording
from .errors import InvariantViolation, ParseError

#: Segment durations are clipped below at this length.
MIN_SEGMENT_S = 2.0
#: ... and above at this length (or half the recording, whichever is less),
#: so both classes appear in any recording of 10 s or longer.
MAX_SEGMENT_S = 30.0
#: Blink transient length (raised-cosine support).
BLINK_LEN_S = 0.4


def _default_spatial_gain() -> dict[Electrode, float]:
    return {
        Electrode.OZ: 1.0,
        Electrode.CZ: 0.6,
        Electrode.T7: 0.35,
        Electrode.FP1: 0.2,
        Electrode.FP2: 0.2,
        Electrode.REF: 0.05,
    }


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    sample_rate_hz: float = 256.0
    duration_s: float = 120.0
    alpha_freq_hz: float = 10.0
    alpha_amp_uv: float = 20.0
    background_amp_uv: float = 10.0
    sensor_noise_uv: float = 2.0
    burst_mean_s: float = 10.0
    gap_mean_s: float = 10.0
    spatial_gain: dict[Electrode, float] = field(default_factory=_default_spatial_gain)
    blink_rate_hz: float = 0.1

    def __post_init__(self) -> None:
        if not 0 <= self.seed < 2**64:
            raise InvariantViolation("seed must fit in 64 unsigned bits")
        if self.sample_rate_hz <= 0 or self.duration_s <= 0:
            raise InvariantViolation("sample rate and duration must be positive")
        if self.duration_s * self.sample_rate_hz < 1:
            raise InvariantViolation("recording must span at least one sample")
        if not 8.0 <= self.alpha_freq_hz <= 12.0:
            raise InvariantViolation("alpha_freq_hz must lie in [8, 12]")
        for name in ("alpha_amp_uv", "background_amp_uv", "sensor_noise_uv",
                     "burst_mean_s", "gap_mean_s", "blink_rate_hz"):
            if getattr(self, name) < 0:
                raise InvariantViolation(f"{name} must be non-negative")
        if self.burst_mean_s == 0 and self.gap_mean_s == 0:
            raise InvariantViolation("burst_mean_s and gap_mean_s cannot both be zero")
        if set(self.spatial_gain) != set(ELECTRODE_ORDER):
            raise InvariantViolation("spatial_gain must cover all six electrodes")
        for e, g in self.spatial_gain.items():
            if not 0.0 <= g <= 1.0:
                raise InvariantViolation(f"spatial_gain[{e}] must lie in [0, 1]")

    # -- flat JSON round trip -------------------------------------------------

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["spatial_gain"] = {e.value: g for e, g in self.spatial_gain.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ParseError(f"unknown SynthConfig keys: {sorted(unknown)}")
        kwargs = dict(d)
        if "spatial_gain" in kwargs:
            kwargs["spatial_gain"] = {
                Electrode.parse(k): float(v) for k, v in kwargs["spatial_gain"].items()
            }
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path: str | Path) -> "SynthConfig":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def _segment_plan(cfg: SynthConfig, rng: np.random.Generator) -> list[tuple[bool, float]]:
    """Alternating (is_alpha, duration_s) segments covering the recording.

    A mean of zero for either class removes that class entirely, which
    emulates class-pure sessions. The upper clip never exceeds half the
    recording so recordings of 10 s and longer contain both classes.
    """
    hi = min(MAX_SEGMENT_S, cfg.duration_s / 2.0)
    hi = max(hi, MIN_SEGMENT_S)
    is_alpha = bool(rng.integers(0, 2))
    if cfg.burst_mean_s == 0:
        is_alpha = False
    elif cfg.gap_mean_s == 0:
        is_alpha = True
    segments: list[tuple[bool, float]] = []
    total = 0.0
    while total < cfg.duration_s:
        mean = cfg.burst_mean_s if is_alpha else cfg.gap_mean_s
        dur = float(np.clip(rng.exponential(mean), MIN_SEGMENT_S, hi))
        segments.append((is_alpha, dur))
        total += dur
        if cfg.burst_mean_s > 0 and cfg.gap_mean_s > 0:
            is_alpha = not is_alpha
    return segments


def _one_over_f_noise(n: int, fs: float, rms: float, rng: np.random.Generator) -> np.ndarray:
    """White Gaussian noise shaped to a 1/f power spectrum, normalized to rms."""
    white = rng.standard_normal(n)
    if rms == 0.0:
        return np.zeros(n)
    spec = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, d=1.0 / fs)
    spec[0] = 0.0
    spec[1:] /= np.sqrt(freqs[1:])
    x = np.fft.irfft(spec, n)
    scale = np.sqrt(np.mean(x * x))
    return x * (rms / scale) if scale > 0 else x


def _blink_pulse(n: int, fs: float, amp: float) -> np.ndarray:
    """Raised-cosine bump of BLINK_LEN_S seconds peaking at amp."""
    k = max(int(round(BLINK_LEN_S * fs)), 1)
    tau = np.arange(k) / k
    pulse = amp * 0.5 * (1.0 - np.cos(2.0 * np.pi * tau))
    return pulse[:n]


def generate(cfg: SynthConfig) -> Recording:
    """Generate one labeled recording; deterministic in cfg (including seed)."""
    rng = np.random.default_rng(cfg.seed)
    fs = cfg.sample_rate_hz
    n = int(round(cfg.duration_s * fs))
    t = np.arange(n) / fs

    segments = _segment_plan(cfg, rng)
    labels = np.zeros(n, dtype=bool)
    bounds: list[tuple[bool, int, int]] = []
    pos = 0.0
    for is_alpha, dur in segments:
        a = int(round(pos * fs))
        b = min(int(round((pos + dur) * fs)), n)
        if a >= n:
            break
        bounds.append((is_alpha, a, b))
        labels[a:b] = is_alpha
        pos += dur

    # Shared-phase alpha sinusoid, one phase per burst, unit amplitude here;
    # per-electrode amplitude is applied through the spatial gain below.
    alpha_wave = np.zeros(n)
    for is_alpha, a, b in bounds:
        if is_alpha:
            phase = rng.uniform(0.0, 2.0 * np.pi)
            alpha_wave[a:b] = np.sin(2.0 * np.pi * cfg.alpha_freq_hz * t[a:b] + phase)

    rows = np.zeros((len(ELECTRODE_ORDER), n))
    for i, e in enumerate(ELECTRODE_ORDER):
        gain = cfg.spatial_gain[e]
        rows[i] = cfg.alpha_amp_uv * gain * alpha_wave
        rows[i] += _one_over_f_noise(n, fs, cfg.background_amp_uv * gain, rng)
    for i in range(len(ELECTRODE_ORDER)):
        rows[i] += cfg.sensor_noise_uv * rng.standard_normal(n)

    # Blinks: bilateral, so Fp1 and Fp2 receive identical pulses.
    if cfg.blink_rate_hz > 0:
        fp1 = ELECTRODE_ORDER.index(Electrode.FP1)
        fp2 = ELECTRODE_ORDER.index(Electrode.FP2)
        amp = 5.0 * cfg.alpha_amp_uv
        for is_alpha, a, b in bounds:
            if is_alpha:
                continue
            count = rng.poisson(cfg.blink_rate_hz * (b - a) / fs)
            starts = np.sort(rng.uniform(a / fs, b / fs, size=count))
            for start in starts:
                j = int(round(start * fs))
                pulse = _blink_pulse(n - j, fs, amp)
                rows[fp1, j:j + pulse.size] += pulse
                rows[fp2, j:j + pulse.size] += pulse

    # Remove per-electrode DC, as an AC-coupled amplifier would.
    rows -= rows.mean(axis=1, keepdims=True)

    return Recording(
        id=f"synth{cfg.seed}",
        sample_rate_hz=fs,
        electrodes=ELECTRODE_ORDER,
        samples=rows,
        labels=labels,
    )


def generate_corpus(cfg: SynthConfig, n_recordings: int = 9) -> list[Recording]:
    """Recordings generated from consecutive seeds seed, seed+1, ..."""
    if n_recordings < 1:
        raise InvariantViolation("n_recordings must be at least 1")
    return [generate(replace(cfg, seed=cfg.seed + i)) for i in range(n_recordings)]
