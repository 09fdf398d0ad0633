"""Univariate series container, UCR-style TSV ingestion and synthetic generators.

Synthetic kinds:

* ``freq_disc`` -- each class is a fixed-frequency sinusoid with random phase
  plus Gaussian noise; the discriminative feature lives in a single DFT bin.
* ``event_level`` -- a zero baseline with class-dependent rectangular events;
  silent regions are exactly zero before per-sample z-normalization.
* ``nonstationary_shapelet`` -- an integrated random walk with a small
  class-specific shapelet at a random position.
* ``trend_season_shapelet`` -- linear trend + two sinusoidal seasonalities +
  a class-specific zigzag/bump shapelet.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyFileError,
    InvalidParamsError,
    MalformedFileError,
    RaggedRowsError,
)


@dataclass
class Series:
    """A univariate real-valued time series with an optional class label."""

    values: np.ndarray
    label: int | None = None
    name: str | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size < 2:
            raise InvalidParamsError("series must be 1-D with length >= 2")
        if not np.all(np.isfinite(self.values)):
            raise InvalidParamsError("series values must be finite")

    def __len__(self) -> int:
        return int(self.values.size)


Dataset = list  # list[Series]; alias for readability in signatures


def dataset_matrix(samples: Sequence[Series]) -> tuple[np.ndarray, np.ndarray]:
    """Stack a dataset into (X, y) arrays."""
    X = np.stack([s.values for s in samples])
    y = np.array([-1 if s.label is None else s.label for s in samples], dtype=int)
    return X, y


def load_ucr_tsv(path) -> list[Series]:
    """Load a UCR-style file: one sample per line, label first, then N values.

    Tab- or comma-separated. Labels are remapped to 0..C-1 in sorted order.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh]
    except OSError as exc:
        raise MalformedFileError(f"cannot read {path}: {exc}") from exc
    rows = []
    for lineno, line in enumerate(lines, start=1):
        if not line:
            continue
        sep = "\t" if "\t" in line else ","
        fields = [f for f in line.split(sep) if f != ""]
        try:
            row = [float(f) for f in fields]
        except ValueError as exc:
            raise MalformedFileError(
                f"{path}:{lineno}: non-numeric field"
            ) from exc
        rows.append(row)
    if not rows:
        raise EmptyFileError(f"{path}: no data rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise RaggedRowsError(f"{path}: rows have differing lengths")
    if width < 3:
        raise MalformedFileError(f"{path}: need a label plus at least 2 values")
    raw_labels = [r[0] for r in rows]
    mapping = {lab: i for i, lab in enumerate(sorted(set(raw_labels)))}
    return [
        Series(np.array(r[1:]), label=mapping[r[0]], name=f"row{i}")
        for i, r in enumerate(rows)
    ]


def save_ucr_tsv(samples: Sequence[Series], path) -> None:
    """Write samples in the tab-separated UCR layout (label first)."""
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            label = 0 if s.label is None else int(s.label)
            fh.write("\t".join([str(label)] + [repr(v) for v in s.values]) + "\n")


def train_test_split(
    samples: Sequence[Series], test_fraction: float = 0.2, seed: int = 0
) -> tuple[list[Series], list[Series]]:
    """Stratified split; deterministic given seed."""
    rng = np.random.default_rng(seed)
    by_label: dict[int, list[Series]] = {}
    for s in samples:
        by_label.setdefault(int(s.label or 0), []).append(s)
    train: list[Series] = []
    test: list[Series] = []
    for label in sorted(by_label):
        group = by_label[label]
        order = rng.permutation(len(group))
        n_test = max(1, int(round(test_fraction * len(group))))
        for j, idx in enumerate(order):
            (test if j < n_test else train).append(group[idx])
    return train, test


def znormalize(x: np.ndarray) -> np.ndarray:
    sd = x.std()
    return (x - x.mean()) / (sd if sd > 0 else 1.0)


@dataclass
class SynthSpec:
    """Configuration of one synthetic dataset."""

    kind: str
    n_samples: int = 200
    length: int = 128
    noise_sigma: float = 0.1
    seed: int = 0
    params: dict = field(default_factory=dict)

    VALID_KINDS = (
        "freq_disc",
        "event_level",
        "nonstationary_shapelet",
        "trend_season_shapelet",
    )

    def __post_init__(self):
        if self.kind not in self.VALID_KINDS:
            raise InvalidParamsError(f"unknown synthetic kind {self.kind!r}")
        if self.n_samples < 2:
            raise InvalidParamsError("n_samples must be >= 2")
        if self.length < 16:
            raise InvalidParamsError("length must be >= 16")


@dataclass
class SynthSample:
    """One generated sample plus the ground truth the generators know."""

    series: Series
    # boolean mask of time steps carrying the class feature (events/shapelet);
    # None for freq_disc where the feature is a frequency bin
    feature_mask: np.ndarray | None = None
    # injected feature waveform on the full time axis (zeros elsewhere)
    feature_signal: np.ndarray | None = None


def _gen_freq_disc(spec: SynthSpec, rng: np.random.Generator) -> list[SynthSample]:
    freqs = spec.params.get("class_freqs", (5, 12))
    n_classes = len(freqs)
    t = np.arange(spec.length)
    out = []
    for i in range(spec.n_samples):
        label = i % n_classes
        phase = rng.uniform(0, 2 * np.pi)
        x = np.sin(2 * np.pi * freqs[label] * t / spec.length + phase)
        if spec.noise_sigma > 0:
            x = x + spec.noise_sigma * rng.standard_normal(spec.length)
        x = znormalize(x)
        out.append(SynthSample(Series(x, label=label, name=f"freq{i}")))
    return out


def _gen_event_level(spec: SynthSpec, rng: np.random.Generator) -> list[SynthSample]:
    # class k gets k+1 rectangular events; silence stays exactly zero before
    # normalization so the min-zero placeholder reconstructs the raw floor
    n_classes = int(spec.params.get("n_classes", 2))
    amp = float(spec.params.get("event_amplitude", 1.5))
    ev_len = int(spec.params.get("event_len", max(4, spec.length // 12)))
    out = []
    for i in range(spec.n_samples):
        label = i % n_classes
        x = np.zeros(spec.length)
        mask = np.zeros(spec.length, dtype=bool)
        n_events = label + 1
        slots = np.array_split(np.arange(spec.length), n_events)
        for slot in slots:
            lo = int(rng.integers(slot[0], max(slot[0] + 1, slot[-1] - ev_len)))
            hi = min(lo + ev_len, spec.length)
            level = amp * rng.uniform(0.8, 1.2)
            seg = np.full(hi - lo, level)
            if spec.noise_sigma > 0:
                seg = seg + spec.noise_sigma * rng.standard_normal(hi - lo)
            x[lo:hi] = np.maximum(seg, 0.05 * amp)
            mask[lo:hi] = True
        raw = x.copy()
        out.append(
            SynthSample(
                Series(znormalize(x), label=label, name=f"event{i}"),
                feature_mask=mask,
                feature_signal=raw,
            )
        )
    return out


def _zigzag(length: int, amplitude: float) -> np.ndarray:
    shape = amplitude * np.ones(length)
    shape[1::2] = -amplitude
    return shape


def _bump(length: int, amplitude: float) -> np.ndarray:
    return amplitude * np.sin(np.linspace(0, np.pi, length))


_SHAPELETS = (_zigzag, _bump)


def _gen_nonstationary(spec: SynthSpec, rng: np.random.Generator) -> list[SynthSample]:
    n_classes = int(spec.params.get("n_classes", 2))
    walk_sigma = float(spec.params.get("walk_sigma", 0.05))
    sh_len = int(spec.params.get("shapelet_len", max(8, spec.length // 16)))
    sh_amp = float(spec.params.get("shapelet_amplitude", 2.0))
    out = []
    for i in range(spec.n_samples):
        label = i % n_classes
        steps = walk_sigma * rng.standard_normal(spec.length)
        walk = np.cumsum(np.cumsum(steps))  # integrated random walk
        pos = int(rng.integers(sh_len, spec.length - 2 * sh_len))
        shapelet = _SHAPELETS[label % len(_SHAPELETS)](sh_len, sh_amp)
        if label >= len(_SHAPELETS):  # further classes reuse mirrored shapes
            shapelet = -shapelet
        x = walk.copy()
        x[pos : pos + sh_len] += shapelet
        if spec.noise_sigma > 0:
            x = x + spec.noise_sigma * rng.standard_normal(spec.length)
        mask = np.zeros(spec.length, dtype=bool)
        mask[pos : pos + sh_len] = True
        sig = np.zeros(spec.length)
        sig[pos : pos + sh_len] = shapelet
        out.append(
            SynthSample(
                Series(x, label=label, name=f"walk{i}"),
                feature_mask=mask,
                feature_signal=sig,
            )
        )
    return out


def _gen_trend_season(spec: SynthSpec, rng: np.random.Generator) -> list[SynthSample]:
    n_classes = int(spec.params.get("n_classes", 2))
    slope_range = float(spec.params.get("slope_range", 4.0))
    periods = spec.params.get("season_periods", (spec.length // 4, spec.length // 10))
    season_amp = float(spec.params.get("season_amplitude", 2.0))
    sh_len = int(spec.params.get("shapelet_len", max(8, spec.length // 12)))
    sh_amp = float(spec.params.get("shapelet_amplitude", 1.5))
    t = np.arange(spec.length)
    out = []
    for i in range(spec.n_samples):
        label = i % n_classes
        slope = rng.uniform(-slope_range, slope_range)
        x = slope * t / spec.length
        for period in periods:
            x = x + season_amp * rng.uniform(0.7, 1.3) * np.sin(
                2 * np.pi * t / period + rng.uniform(0, 2 * np.pi)
            )
        pos = int(rng.integers(sh_len, spec.length - 2 * sh_len))
        shapelet = _SHAPELETS[label % len(_SHAPELETS)](sh_len, sh_amp)
        if label >= len(_SHAPELETS):
            shapelet = -shapelet
        x[pos : pos + sh_len] += shapelet
        if spec.noise_sigma > 0:
            x = x + spec.noise_sigma * rng.standard_normal(spec.length)
        mask = np.zeros(spec.length, dtype=bool)
        mask[pos : pos + sh_len] = True
        sig = np.zeros(spec.length)
        sig[pos : pos + sh_len] = shapelet
        out.append(
            SynthSample(
                Series(x, label=label, name=f"ts{i}"),
                feature_mask=mask,
                feature_signal=sig,
            )
        )
    return out


_GENERATORS = {
    "freq_disc": _gen_freq_disc,
    "event_level": _gen_event_level,
    "nonstationary_shapelet": _gen_nonstationary,
    "trend_season_shapelet": _gen_trend_season,
}


def synth_samples(spec: SynthSpec) -> list[SynthSample]:
    """Generate all samples with ground-truth metadata; deterministic given seed."""
    rng = np.random.default_rng(spec.seed)
    return _GENERATORS[spec.kind](spec, rng)


def synth_dataset(spec: SynthSpec) -> tuple[list[Series], list[Series]]:
    """Generate and split a synthetic dataset 80/20 (stratified)."""
    samples = [s.series for s in synth_samples(spec)]
    return train_test_split(samples, test_fraction=0.2, seed=spec.seed)
