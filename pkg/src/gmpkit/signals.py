"""Uniformly sampled multichannel signals.

The numerical substrate for the whole toolkit: slicing by time window,
trapezoidal quadrature of inner products, sliding-window RMS, and the CSV
interchange format.

Conventions
-----------
* ``data`` is laid out ``(n_samples, n_channels)``; sample ``k`` sits at
  ``start_time + k / sample_rate``.
* Quadrature is trapezoidal on the uniform grid: second-order accurate,
  exact for piecewise-linear integrands sampled at the grid, and free of
  phase bias for periodic integrands.
* Signals at different rates are never aligned implicitly; the caller must
  resample explicitly. This keeps mixed-rate streams (robot vs. EMG)
  honest.

All values are immutable after construction (the sample array is marked
read-only), so they are safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, WindowRangeError

# slack used in window/timestamp comparisons, as a fraction of one sample
_TIME_TOL = 1e-6


@dataclass(frozen=True)
class Window:
    """Closed time interval [t_start, t_end], in seconds."""

    t_start: float
    t_end: float

    def __post_init__(self) -> None:
        if not (self.t_end > self.t_start):
            raise WindowRangeError(
                f"degenerate window [{self.t_start}, {self.t_end}]"
            )

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class SampledSignal:
    """Uniformly sampled multichannel time series with labelled channels.

    Attributes:
        sample_rate: samples per second, > 0.
        start_time: time of sample 0, in seconds.
        channels: one label per data column.
        data: float array of shape (n_samples, n_channels), read-only.
    """

    sample_rate: float
    start_time: float
    channels: tuple[str, ...]
    data: np.ndarray

    def __post_init__(self) -> None:
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be > 0, got {self.sample_rate}")
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2:
            raise ValueError(f"data must be 1-D or 2-D, got shape {data.shape}")
        channels = tuple(self.channels)
        if data.shape[1] != len(channels):
            raise ValueError(
                f"{len(channels)} channel labels for {data.shape[1]} data columns"
            )
        data = data.copy()
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "channels", channels)

    # -- geometry ---------------------------------------------------------

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def duration(self) -> float:
        return (self.n_samples - 1) / self.sample_rate

    @property
    def end_time(self) -> float:
        return self.start_time + self.duration

    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.n_samples) / self.sample_rate

    def span(self) -> Window:
        return Window(self.start_time, self.end_time)

    def channel(self, label: str) -> np.ndarray:
        return self.data[:, self.channels.index(label)]

    # -- operations -------------------------------------------------------

    def slice(self, w: Window) -> "SampledSignal":
        """Samples with timestamps inside [w.t_start, w.t_end].

        The window must lie within the signal span (up to a microsample of
        slack); the sample rate is preserved.
        """
        tol = _TIME_TOL / self.sample_rate
        if w.t_start < self.start_time - tol or w.t_end > self.end_time + tol:
            raise WindowRangeError(
                f"window [{w.t_start}, {w.t_end}] outside signal span "
                f"[{self.start_time}, {self.end_time}]"
            )
        k_start = math.ceil((w.t_start - self.start_time) * self.sample_rate - _TIME_TOL)
        k_end = math.floor((w.t_end - self.start_time) * self.sample_rate + _TIME_TOL)
        k_start = max(k_start, 0)
        k_end = min(k_end, self.n_samples - 1)
        if k_end < k_start:
            raise WindowRangeError(f"window [{w.t_start}, {w.t_end}] contains no samples")
        return SampledSignal(
            sample_rate=self.sample_rate,
            start_time=self.start_time + k_start / self.sample_rate,
            channels=self.channels,
            data=self.data[k_start : k_end + 1],
        )


def _check_aligned(a: SampledSignal, b: SampledSignal) -> None:
    if not math.isclose(a.sample_rate, b.sample_rate, rel_tol=1e-12):
        raise AlignmentError(f"sample rates differ: {a.sample_rate} vs {b.sample_rate}")
    if abs(a.start_time - b.start_time) > _TIME_TOL / a.sample_rate:
        raise AlignmentError(f"start times differ: {a.start_time} vs {b.start_time}")
    if a.n_samples != b.n_samples:
        raise AlignmentError(f"lengths differ: {a.n_samples} vs {b.n_samples}")
    if a.n_channels != b.n_channels:
        raise AlignmentError(f"channel counts differ: {a.n_channels} vs {b.n_channels}")


def _trapz(values: np.ndarray, dt: float) -> float:
    if len(values) < 2:
        return 0.0
    return float(dt * (values.sum() - 0.5 * (values[0] + values[-1])))


def inner_product_integral(a: SampledSignal, b: SampledSignal, w: Window) -> float:
    """Trapezoidal approximation of the port energy integral over ``w``.

    Channels are paired positionally and the channelwise products summed,
    i.e. the integrand is the full vector inner product a(t)^T b(t). With a
    force signal and a velocity signal this is the energy flowing through
    the port, in joules.
    """
    _check_aligned(a, b)
    aw = a.slice(w)
    bw = b.slice(w)
    integrand = np.einsum("ij,ij->i", aw.data, bw.data)
    return _trapz(integrand, 1.0 / aw.sample_rate)


def l2_norm_integral(y: SampledSignal, w: Window) -> float:
    """Trapezoidal integral of ||y(t)||^2 over ``w``; always >= 0."""
    return inner_product_integral(y, y, w)


def rms(signal: SampledSignal, window_len: float = 0.25, stride: float = 0.05) -> SampledSignal:
    """Sliding-window root-mean-square per channel.

    Windows of ``window_len`` seconds advance by ``stride`` seconds; both
    are snapped to whole samples. Output samples are stamped at window
    centres, so the output rate is ``sample_rate / round(stride * sample_rate)``
    (equal to 1/stride whenever the stride is a whole number of samples).
    """
    if window_len <= 0 or stride <= 0:
        raise ValueError("window_len and stride must be > 0")
    n_win = max(1, round(window_len * signal.sample_rate))
    n_stride = max(1, round(stride * signal.sample_rate))
    if n_win > signal.n_samples:
        raise WindowRangeError(
            f"RMS window of {n_win} samples longer than signal ({signal.n_samples})"
        )
    sq = signal.data.astype(float) ** 2
    csum = np.vstack([np.zeros((1, signal.n_channels)), np.cumsum(sq, axis=0)])
    starts = np.arange(0, signal.n_samples - n_win + 1, n_stride)
    means = (csum[starts + n_win] - csum[starts]) / n_win
    out = np.sqrt(means)
    center_offset = (n_win - 1) / 2.0 / signal.sample_rate
    return SampledSignal(
        sample_rate=signal.sample_rate / n_stride,
        start_time=signal.start_time + center_offset,
        channels=signal.channels,
        data=out,
    )


# -- CSV interchange -------------------------------------------------------


def write_csv(signal: SampledSignal, path, time_column: str = "t") -> None:
    """Write one row per sample: a time column followed by the channels.

    Floats are written with shortest round-trip formatting so a read-back
    reproduces the exact binary values (and output bytes are deterministic).
    """
    times = signal.times()
    with open(path, "w", newline="") as fh:
        fh.write(",".join((time_column, *signal.channels)) + "\n")
        for k in range(signal.n_samples):
            row = [repr(float(times[k]))]
            row.extend(repr(float(v)) for v in signal.data[k])
            fh.write(",".join(row) + "\n")


def read_csv(path) -> SampledSignal:
    """Read a signal written by :func:`write_csv` (uniform time grid)."""
    with open(path, "r", newline="") as fh:
        header = fh.readline().strip()
        columns = header.split(",")
        if len(columns) < 2:
            raise ValueError(f"{path}: expected a time column plus channels")
        raw = np.loadtxt(fh, delimiter=",", ndmin=2)
    t = raw[:, 0]
    if len(t) < 2:
        raise ValueError(f"{path}: need at least two samples")
    dt = np.diff(t)
    if np.max(np.abs(dt - dt[0])) > _TIME_TOL * abs(dt[0]):
        raise ValueError(f"{path}: non-uniform time grid")
    rate = (len(t) - 1) / (t[-1] - t[0])
    return SampledSignal(
        sample_rate=float(rate),
        start_time=float(t[0]),
        channels=tuple(columns[1:]),
        data=raw[:, 1:],
    )
