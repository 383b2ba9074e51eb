"""Stability and effort metrics over sampled signals and trajectories.

Two families:

- handling stability: differentiate a 3D position trace twice (central
  differences) and take the RMS of the acceleration norm
- windowed signal features: per-window RMS and median frequency over fixed
  windows with a fixed hop, trailing partial windows discarded

Median frequency convention: periodogram of the mean-removed window (plain
squared rfft magnitudes, no tapering); the reported frequency is the first
bin at which the cumulative power reaches at least half the total.  An
all-zero window reports 0 Hz.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

MDF_MIN_WINDOW_SAMPLES = 64


@dataclass(frozen=True)
class SampledSignal:
    """Uniformly sampled scalar (n,) or vector (n, 3) signal."""

    rate: float
    samples: np.ndarray

    def __post_init__(self):
        if self.rate <= 0.0:
            raise ValueError(f"rate must be positive, got {self.rate}")
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim not in (1, 2):
            raise ValueError(f"samples must be (n,) or (n, k), got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class FeatureSeries:
    """Per-window feature values with their window start times (s)."""

    window: float
    hop: float
    start_times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.window <= 0.0 or self.hop <= 0.0:
            raise ValueError("window and hop must be positive")

    def __len__(self):
        return len(self.values)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("window_start_s", "value"))
            for t, v in zip(self.start_times, self.values):
                writer.writerow((f"{t:.17g}", f"{v:.17g}"))


def acceleration(sig: SampledSignal) -> SampledSignal:
    """Second-order central difference; output is two samples shorter."""
    x = sig.samples
    if len(x) < 3:
        raise ValueError("need at least 3 samples to differentiate twice")
    dt = 1.0 / sig.rate
    acc = (x[2:] - 2.0 * x[1:-1] + x[:-2]) / (dt * dt)
    return SampledSignal(sig.rate, acc)


def rms_accel_norm(sig: SampledSignal) -> float:
    """RMS over the trace of the Euclidean norm of the acceleration."""
    acc = acceleration(sig).samples
    if acc.ndim == 1:
        norms = np.abs(acc)
    else:
        norms = np.linalg.norm(acc, axis=1)
    return float(np.sqrt(np.mean(norms * norms)))


def _window_geometry(sig, window, hop, min_window_samples):
    w = int(round(window * sig.rate))
    h = int(round(hop * sig.rate))
    if w < min_window_samples:
        raise ValueError(
            f"window of {w} samples is below the {min_window_samples}-sample minimum"
        )
    if h < 1:
        raise ValueError("hop must cover at least one sample")
    n = len(sig)
    count = (n - w) // h + 1 if n >= w else 0
    return w, h, count


def window_rms(sig: SampledSignal, window: float = 0.5, hop: float = 0.5) -> FeatureSeries:
    """Per-window RMS; trailing partial window discarded."""
    w, h, count = _window_geometry(sig, window, hop, 2)
    x = sig.samples
    values = np.empty(count)
    for i in range(count):
        seg = x[i * h : i * h + w]
        values[i] = np.sqrt(np.mean(seg * seg))
    return FeatureSeries(window, hop, np.arange(count) * h / sig.rate, values)


def median_frequency(samples, rate) -> float:
    """First frequency at which cumulative periodogram power reaches 50%.

    Ties (e.g. two equal-power lines) resolve to the lower bin; the
    threshold carries a 1e-9 relative slack so rounding noise in the
    periodogram cannot flip an exact tie.
    """
    x = np.asarray(samples, dtype=np.float64)
    x = x - x.mean()
    power = np.abs(np.fft.rfft(x)) ** 2
    total = power.sum()
    if total <= 0.0:
        return 0.0
    k = int(np.searchsorted(np.cumsum(power), 0.5 * total * (1.0 - 1e-9)))
    return k * rate / len(x)


def window_mdf(sig: SampledSignal, window: float = 0.5, hop: float = 0.5) -> FeatureSeries:
    """Per-window median frequency (Hz) of a scalar signal."""
    if sig.samples.ndim != 1:
        raise ValueError("median frequency is defined per scalar channel")
    w, h, count = _window_geometry(sig, window, hop, MDF_MIN_WINDOW_SAMPLES)
    values = np.empty(count)
    for i in range(count):
        values[i] = median_frequency(sig.samples[i * h : i * h + w], sig.rate)
    return FeatureSeries(window, hop, np.arange(count) * h / sig.rate, values)


def read_signal_csv(path):
    """Read a generic `t, c1..cn` CSV: returns (rate, {name: column}).

    The sample rate is inferred from the median spacing of the time column.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    if not header or len(rows) < 2:
        raise ValueError("signal CSV needs a header and at least two rows")
    data = np.asarray(rows, dtype=np.float64)
    t = data[:, 0]
    dt = float(np.median(np.diff(t)))
    if dt <= 0.0:
        raise ValueError("time column must be increasing")
    columns = {name: data[:, i] for i, name in enumerate(header)}
    return 1.0 / dt, columns
