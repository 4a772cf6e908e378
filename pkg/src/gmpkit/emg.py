"""Surface-EMG synthesis, MVC calibration, and %MVC envelopes.

Four channels model four forearm muscles; two of them (palmaris longus and
extensor digitorum, the channels most sensitive to grip co-activation)
drive the pooled %MVC readout used as the activation axis of the maps.

%MVC is the sliding-window RMS of the raw EMG normalized by the RMS
recorded at maximum voluntary contraction. Envelope window and stride
default to 0.25 s / 0.05 s, standard surface-EMG practice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import signal as sps

from .errors import DegenerateSampleError
from .signals import SampledSignal, Window, rms

EMG_RATE = 2148.0  # Hz

MUSCLES = (
    "extensor_digitorum",
    "extensor_carpi_radialis",
    "palmaris_longus",
    "flexor_carpi_ulnaris",
)

# channels shown on the myo-feedback bars and pooled into one %MVC scalar
FEEDBACK_CHANNELS = (0, 2)

BAND_HZ = (20.0, 450.0)
RMS_WINDOW_S = 0.25
RMS_STRIDE_S = 0.05

# type alias: a SampledSignal of fractions of MVC (may exceed 1 transiently)
PctMvcSeries = SampledSignal


@dataclass(frozen=True)
class MvcCalibration:
    """Per-channel maximum-voluntary-contraction RMS levels, in mV."""

    mvc_rms: tuple[float, ...]
    n_recordings: int = 2
    window_len: float = RMS_WINDOW_S

    def __post_init__(self) -> None:
        if any(not v > 0 for v in self.mvc_rms):
            raise ValueError(f"mvc_rms must be > 0 per channel, got {self.mvc_rms}")


@dataclass(frozen=True)
class PctMvcResult:
    """Mean %MVC over a window: per channel plus the pooled feedback mean."""

    per_channel: tuple[float, ...]
    pooled: float


def synthesize_emg(
    activation: SampledSignal,
    mvc_rms: Sequence[float],
    seed,
    rate: float = EMG_RATE,
    band: tuple[float, float] = BAND_HZ,
    order: int = 4,
) -> SampledSignal:
    """Raw EMG whose RMS envelope tracks activation * mvc_rms.

    Each channel is band-passed white noise (Butterworth, 20-450 Hz by
    default) rescaled to unit variance and amplitude-modulated by the
    activation trajectory, so the windowed RMS equals
    ``activation * mvc_rms`` in expectation. The activation signal may be
    at any rate; it is interpolated onto the output grid. A single
    activation channel drives all EMG channels (co-activation).
    """
    seed_seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.default_rng(seed_seq)
    n_channels = len(mvc_rms)
    n_out = round(activation.duration * rate) + 1
    t_out = activation.start_time + np.arange(n_out) / rate
    t_act = activation.times()

    sos = sps.butter(order, [band[0] / (rate / 2.0), band[1] / (rate / 2.0)], btype="bandpass", output="sos")
    out = np.empty((n_out, n_channels))
    for ch in range(n_channels):
        act_col = activation.data[:, min(ch, activation.n_channels - 1)]
        drive = np.interp(t_out, t_act, act_col)
        noise = sps.sosfilt(sos, rng.standard_normal(n_out))
        std = noise.std()
        if std > 0:
            noise = noise / std
        out[:, ch] = drive * mvc_rms[ch] * noise
    return SampledSignal(
        sample_rate=rate,
        start_time=activation.start_time,
        channels=tuple(f"emg{i + 1}" for i in range(n_channels)),
        data=out,
    )


def estimate_mvc(
    recordings: Sequence[SampledSignal],
    window_len: float = RMS_WINDOW_S,
    stride: float = RMS_STRIDE_S,
) -> MvcCalibration:
    """Per-channel maximum sliding-RMS across all repetitions."""
    if len(recordings) == 0:
        raise DegenerateSampleError("estimate_mvc needs at least one recording")
    n_channels = recordings[0].n_channels
    peak = np.zeros(n_channels)
    for rec in recordings:
        if rec.n_channels != n_channels:
            raise ValueError("recordings have inconsistent channel counts")
        env = rms(rec, window_len, stride)
        peak = np.maximum(peak, env.data.max(axis=0))
    if np.any(peak <= 0):
        raise DegenerateSampleError("a channel recorded no activity during MVC")
    return MvcCalibration(mvc_rms=tuple(float(p) for p in peak), n_recordings=len(recordings))


def pct_mvc_envelope(
    emg: SampledSignal,
    cal: MvcCalibration,
    window_len: float = RMS_WINDOW_S,
    stride: float = RMS_STRIDE_S,
) -> PctMvcSeries:
    """Normalized RMS envelope: fraction of MVC per channel over time."""
    if emg.n_channels != len(cal.mvc_rms):
        raise ValueError(
            f"calibration covers {len(cal.mvc_rms)} channels, EMG has {emg.n_channels}"
        )
    env = rms(emg, window_len, stride)
    return SampledSignal(
        sample_rate=env.sample_rate,
        start_time=env.start_time,
        channels=env.channels,
        data=env.data / np.asarray(cal.mvc_rms),
    )


def pct_mvc(
    emg: SampledSignal,
    cal: MvcCalibration,
    w: Window,
    feedback_channels: tuple[int, ...] = FEEDBACK_CHANNELS,
    window_len: float = RMS_WINDOW_S,
    stride: float = RMS_STRIDE_S,
) -> PctMvcResult:
    """Mean %MVC over ``w``, per channel and pooled over the feedback pair.

    The envelope is stamped at window centres, so its support is half an
    RMS window short of the raw EMG span at both ends; ``w`` is clipped to
    that support (a window fully outside it is a range error).
    """
    series = pct_mvc_envelope(emg, cal, window_len, stride)
    span = series.span()
    clipped = Window(max(w.t_start, span.t_start), min(w.t_end, span.t_end))
    means = series.slice(clipped).data.mean(axis=0)
    pooled = float(np.mean([means[ch] for ch in feedback_channels]))
    return PctMvcResult(per_channel=tuple(float(m) for m in means), pooled=pooled)
