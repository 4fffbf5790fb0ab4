"""Recordings, electrode montages, bipolar channels and CSV I/O.

A recording is a labeled multi-electrode raw signal at a fixed sample rate.
Per-sample labels are stored as a boolean array (``True`` on alpha samples);
:class:`Label` is used wherever a scalar class value crosses an API boundary.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import InvariantViolation, MissingElectrode, ParseError


class Electrode(str, Enum):
    """The six electrode positions the hardware provides (10-20 names)."""

    T7 = "T7"
    CZ = "Cz"
    OZ = "Oz"
    FP1 = "Fp1"
    FP2 = "Fp2"
    REF = "ref"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, name: str) -> "Electrode":
        for e in cls:
            if e.value == name:
                return e
        raise ParseError(f"unknown electrode name {name!r}")


class Label(str, Enum):
    ALPHA = "alpha"
    NONALPHA = "nonalpha"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, name: str) -> "Label":
        for lab in cls:
            if lab.value == name:
                return lab
        raise ParseError(f"unknown label {name!r}")

    @property
    def other(self) -> "Label":
        return Label.NONALPHA if self is Label.ALPHA else Label.ALPHA


#: Canonical electrode ordering used by the generator and CSV writer.
ELECTRODE_ORDER = (
    Electrode.T7,
    Electrode.CZ,
    Electrode.OZ,
    Electrode.FP1,
    Electrode.FP2,
    Electrode.REF,
)


@dataclass(frozen=True)
class Channel:
    """A bipolar channel: potential of ``positive`` minus ``negative``."""

    positive: Electrode
    negative: Electrode

    def __post_init__(self) -> None:
        if self.positive == self.negative:
            raise InvariantViolation(
                f"channel poles must differ, got {self.positive} twice"
            )

    @property
    def name(self) -> str:
        return f"{self.positive}{self.negative}"

    def swapped(self) -> "Channel":
        return Channel(self.negative, self.positive)

    @property
    def electrodes(self) -> frozenset[Electrode]:
        return frozenset((self.positive, self.negative))


@dataclass(frozen=True)
class SetUp:
    """A named, ordered list of channels; ``m`` is the channel count."""

    name: str
    channels: tuple[Channel, ...]

    def __post_init__(self) -> None:
        channels = tuple(self.channels)
        object.__setattr__(self, "channels", channels)
        if len(channels) == 0:
            raise InvariantViolation(f"set-up {self.name!r} has no channels")
        if len(set(channels)) != len(channels):
            raise InvariantViolation(f"set-up {self.name!r} has duplicate channels")

    @property
    def m(self) -> int:
        return len(self.channels)

    @property
    def electrodes(self) -> frozenset[Electrode]:
        return frozenset(e for ch in self.channels for e in ch.electrodes)


@dataclass
class Recording:
    """A labeled multi-electrode recording.

    samples is microvolts with shape (n_electrodes, n_samples); labels is a
    boolean vector of length n_samples, True where the sample is alpha.
    """

    id: str
    sample_rate_hz: float
    electrodes: tuple[Electrode, ...]
    samples: np.ndarray
    labels: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.electrodes = tuple(self.electrodes)
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=bool)
        if self.sample_rate_hz <= 0:
            raise InvariantViolation("sample_rate_hz must be positive")
        if self.samples.ndim != 2:
            raise InvariantViolation("samples must be a 2-d array")
        if len(self.electrodes) != self.samples.shape[0]:
            raise InvariantViolation(
                f"{len(self.electrodes)} electrodes but {self.samples.shape[0]} sample rows"
            )
        if len(set(self.electrodes)) != len(self.electrodes):
            raise InvariantViolation("duplicate electrodes")
        if self.n_samples < 1:
            raise InvariantViolation("recording must contain at least one sample")
        if self.labels.shape != (self.n_samples,):
            raise InvariantViolation(
                f"labels length {self.labels.shape} does not match n_samples {self.n_samples}"
            )
        if not np.all(np.isfinite(self.samples)):
            raise InvariantViolation("samples contain non-finite values")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    def electrode_signal(self, electrode: Electrode) -> np.ndarray:
        try:
            row = self.electrodes.index(electrode)
        except ValueError:
            raise MissingElectrode(
                f"recording {self.id!r} has no electrode {electrode}"
            ) from None
        return self.samples[row]


def derive_channel_signal(rec: Recording, ch: Channel) -> np.ndarray:
    """Bipolar derivation: positive electrode minus negative electrode."""
    return rec.electrode_signal(ch.positive) - rec.electrode_signal(ch.negative)


def _ch(positive: Electrode, negative: Electrode) -> Channel:
    return Channel(positive, negative)


def builtin_setups() -> list[SetUp]:
    """The six named set-ups under study (CzOz is the reference)."""
    e = Electrode
    return [
        SetUp("CzOz", (_ch(e.CZ, e.OZ),)),
        SetUp(
            "all",
            (
                _ch(e.T7, e.CZ),
                _ch(e.FP1, e.FP2),
                _ch(e.REF, e.CZ),
                _ch(e.REF, e.T7),
                _ch(e.REF, e.OZ),
                _ch(e.REF, e.FP1),
            ),
        ),
        SetUp("noCz", (_ch(e.FP1, e.FP2), _ch(e.REF, e.T7), _ch(e.REF, e.OZ))),
        SetUp("wearable", (_ch(e.FP1, e.FP2), _ch(e.REF, e.T7))),
        SetUp("refT7", (_ch(e.REF, e.T7),)),
        SetUp("Fp1Fp2", (_ch(e.FP1, e.FP2),)),
    ]


def setup_by_name(name: str) -> SetUp:
    for s in builtin_setups():
        if s.name == name:
            return s
    raise ParseError(f"unknown set-up {name!r}")


# ---------------------------------------------------------------------------
# CSV interchange format
#
#   # sample_rate_hz=<float>
#   t,<electrode1>,...,<electrodeN>,label
#   0,<uV>,...,<uV>,alpha|nonalpha
#
# Values are written with repr() so a load after save is bit-exact.
# ---------------------------------------------------------------------------


def save_recording(rec: Recording, path: str | Path) -> None:
    path = Path(path)
    buf = io.StringIO()
    buf.write(f"# sample_rate_hz={rec.sample_rate_hz!r}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", *(e.value for e in rec.electrodes), "label"])
    cols = rec.samples.T
    alpha = Label.ALPHA.value
    nonalpha = Label.NONALPHA.value
    for t in range(rec.n_samples):
        writer.writerow(
            [
                t,
                *(repr(v) for v in cols[t]),
                alpha if rec.labels[t] else nonalpha,
            ]
        )
    path.write_text(buf.getvalue(), encoding="utf-8", newline="")


def load_recording(path: str | Path) -> Recording:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(f"recording file not found: {path}") from None
    lines = text.splitlines()
    if len(lines) < 3:
        raise ParseError(f"{path}: expected a rate line, a header and at least one row")
    if not lines[0].startswith("# sample_rate_hz="):
        raise ParseError(f"{path}: first line must be '# sample_rate_hz=<float>'")
    try:
        sample_rate = float(lines[0].split("=", 1)[1])
    except ValueError:
        raise ParseError(f"{path}: malformed sample rate {lines[0]!r}") from None

    header = lines[1].split(",")
    if len(header) < 3 or header[0] != "t" or header[-1] != "label":
        raise ParseError(f"{path}: header must be 't,<electrodes...>,label'")
    electrodes = tuple(Electrode.parse(name) for name in header[1:-1])
    n_cols = len(header)

    samples: list[list[float]] = []
    labels: list[bool] = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line:
            continue
        fields = line.split(",")
        # A row missing only its trailing label cell is a label/sample length
        # mismatch, which the Recording invariants report; anything else is a
        # malformed row.
        if len(fields) == n_cols - 1:
            fields = fields + [None]  # type: ignore[list-item]
        elif len(fields) != n_cols:
            raise ParseError(f"{path}:{lineno}: expected {n_cols} fields, got {len(fields)}")
        try:
            t = int(fields[0])
            values = [float(v) for v in fields[1:-1]]
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
        if t != len(samples):
            raise ParseError(f"{path}:{lineno}: sample index {t}, expected {len(samples)}")
        samples.append(values)
        if fields[-1] is not None:
            labels.append(Label.parse(fields[-1]) is Label.ALPHA)

    if not samples:
        raise ParseError(f"{path}: no sample rows")
    data = np.array(samples, dtype=np.float64).T
    if not np.all(np.isfinite(data)):
        raise InvariantViolation(f"{path}: non-finite sample values")
    if len(labels) != data.shape[1]:
        raise InvariantViolation(
            f"{path}: {len(labels)} labels for {data.shape[1]} samples"
        )
    return Recording(
        id=path.stem,
        sample_rate_hz=sample_rate,
        electrodes=electrodes,
        samples=data,
        labels=np.array(labels, dtype=bool),
    )
