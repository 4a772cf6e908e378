"""Energy accounting and passivity analysis.

A port with input U(t) and output Y(t) and initial energy E(0) is passive
when its observed energy E_S(t) = integral of U^T Y stays above -E(0) for
all t. If the stronger output-strict inequality

    integral U^T Y dt + E(0) >= xi * integral Y^T Y dt

holds with xi >= 0 the port is output strictly passive (OSP) with excess
of passivity xi and finite L2 gain 1/xi; with xi < 0 it is output
non-passive (ONP) with shortage of passivity |xi|.

For a recorded force/velocity pair over a window W the tight xi is the
ratio of the two integrals; :func:`estimate_eop` computes it with both
integrals on the same trapezoidal grid. Estimation windows are snapped to
whole samples and to an integer number of perturbation periods (anchored
at the window end) so the lossless inertia/spring terms integrate out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .biomech import TrialRecord, perturbation_direction
from .emg import FEEDBACK_CHANNELS, MvcCalibration, RMS_STRIDE_S, RMS_WINDOW_S, pct_mvc
from .errors import AlignmentError, DegenerateTrialError
from .signals import SampledSignal, Window, inner_product_integral, l2_norm_integral

PASSIVITY_TOL_J = 1e-9
VELOCITY_ENERGY_THRESHOLD = 1e-9


@dataclass(frozen=True)
class EnergyLedger:
    """Cumulative observed energy of a port on a uniform time grid."""

    times: np.ndarray
    energy: np.ndarray          # E_S(t), joules; energy[0] == 0
    initial_energy: float = 0.0  # E(0)

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        energy = np.asarray(self.energy, dtype=float)
        if times.shape != energy.shape:
            raise ValueError("times and energy must have the same shape")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "energy", energy)

    def total(self) -> np.ndarray:
        """E_S(t) + E(0) pointwise."""
        return self.energy + self.initial_energy

    @property
    def final_energy(self) -> float:
        return float(self.energy[-1])


@dataclass(frozen=True)
class PassivityVerdict:
    passive: bool
    min_margin: float                      # min over grid of E_S + E(0)
    first_violation_time: float | None = None
    deficit: float | None = None           # magnitude of worst shortfall


@dataclass(frozen=True)
class PassivityClass:
    kind: str                  # "OSP" | "ONP"
    xi: float
    l2_gain: float | None      # 1/xi for OSP (inf at the xi=0 boundary)
    sop: float | None          # |xi| for ONP


@dataclass(frozen=True)
class EopEstimate:
    """Excess of passivity for one (direction, activation, frequency) cell."""

    subject_id: str
    direction_index: int
    activation_label: str
    frequency_label: str
    xi: float                        # N*s/m, may be negative
    mean_pct_mvc: float              # fraction of MVC over the same window
    numerator: float                 # force/velocity energy integral, J
    denominator: float               # velocity L2 integral, (m/s)^2*s
    window: Window | None = None
    frequency_hz: float | None = None

    def __post_init__(self) -> None:
        if not self.denominator > 0:
            raise ValueError(f"denominator must be > 0, got {self.denominator}")
        if not math.isclose(self.xi, self.numerator / self.denominator, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError("xi inconsistent with numerator/denominator")


def energy_ledger(u: SampledSignal, y: SampledSignal, e0: float = 0.0) -> EnergyLedger:
    """Running trapezoidal cumulative of u(t)^T y(t); single forward pass."""
    if not math.isclose(u.sample_rate, y.sample_rate, rel_tol=1e-12):
        raise AlignmentError(f"sample rates differ: {u.sample_rate} vs {y.sample_rate}")
    if u.n_samples != y.n_samples or u.n_channels != y.n_channels:
        raise AlignmentError("signal shapes differ")
    if abs(u.start_time - y.start_time) > 1e-6 / u.sample_rate:
        raise AlignmentError("start times differ")
    power = np.einsum("ij,ij->i", u.data, y.data)
    dt = 1.0 / u.sample_rate
    increments = 0.5 * dt * (power[1:] + power[:-1])
    energy = np.concatenate([[0.0], np.cumsum(increments)])
    return EnergyLedger(times=u.times(), energy=energy, initial_energy=e0)


def is_passive(ledger: EnergyLedger, tol: float = PASSIVITY_TOL_J) -> PassivityVerdict:
    """Passive iff E_S(t) + E(0) >= -tol on the whole grid."""
    total = ledger.total()
    min_idx = int(np.argmin(total))
    min_margin = float(total[min_idx])
    if min_margin >= -tol:
        return PassivityVerdict(passive=True, min_margin=min_margin)
    violating = np.nonzero(total < -tol)[0]
    first = int(violating[0])
    return PassivityVerdict(
        passive=False,
        min_margin=min_margin,
        first_violation_time=float(ledger.times[first]),
        deficit=float(-total[min_idx]),
    )


def interconnection_energy(ledgers: Sequence[EnergyLedger]) -> EnergyLedger:
    """Pointwise total energy of interconnected ports (shared time grid)."""
    if len(ledgers) == 0:
        raise ValueError("need at least one ledger")
    base = ledgers[0]
    energy = base.energy.copy()
    e0 = base.initial_energy
    for other in ledgers[1:]:
        if other.times.shape != base.times.shape or np.max(np.abs(other.times - base.times)) > 1e-9:
            raise AlignmentError("ledgers do not share a time grid")
        energy = energy + other.energy
        e0 += other.initial_energy
    return EnergyLedger(times=base.times.copy(), energy=energy, initial_energy=e0)


def snap_window_to_periods(w: Window, frequency: float, sample_rate: float) -> Window:
    """Largest whole-period window ending at w.t_end, snapped to samples.

    Falls back to plain sample snapping when the window is shorter than one
    period. At the protocol frequencies (1 and 3 Hz) a 5 s window is
    already both, so this only matters for nonstandard frequencies.
    """
    n_periods = math.floor(w.duration * frequency + 1e-9)
    if n_periods >= 1:
        t_start = w.t_end - n_periods / frequency
    else:
        t_start = w.t_start
    k_start = round(t_start * sample_rate)
    k_end = round(w.t_end * sample_rate)
    if k_end <= k_start:
        raise DegenerateTrialError("snapped window is empty")
    return Window(k_start / sample_rate, k_end / sample_rate)


def estimate_eop(
    trial: TrialRecord,
    w: Window,
    cal: MvcCalibration | None = None,
    snap: bool = True,
    velocity_threshold: float = VELOCITY_ENERGY_THRESHOLD,
    axis_projected: bool = False,
    feedback_channels: tuple[int, ...] = FEEDBACK_CHANNELS,
    rms_window: float = RMS_WINDOW_S,
    rms_stride: float = RMS_STRIDE_S,
) -> EopEstimate:
    """Windowed EoP of a trial: energy ratio of force against velocity.

    Uses the full 2-D inner products; off-axis components are included
    (``axis_projected=True`` projects both signals onto the perturbation
    axis first). The mean %MVC over the same window is attached when an
    MVC calibration is supplied.
    """
    if snap:
        w = snap_window_to_periods(w, trial.spec.frequency, trial.force.sample_rate)
    force, velocity = trial.force, trial.velocity
    if axis_projected:
        axis = perturbation_direction(trial.spec.direction_index)
        force = SampledSignal(force.sample_rate, force.start_time, ("f_axis",), force.data @ axis)
        velocity = SampledSignal(
            velocity.sample_rate, velocity.start_time, ("v_axis",), velocity.data @ axis
        )
    denominator = l2_norm_integral(velocity, w)
    if denominator <= velocity_threshold:
        raise DegenerateTrialError(
            f"velocity energy {denominator:.3e} below threshold {velocity_threshold:.0e}; "
            "trial carries no usable motion"
        )
    numerator = inner_product_integral(force, velocity, w)
    mean_pct = math.nan
    if cal is not None:
        mean_pct = pct_mvc(
            trial.emg, cal, w, feedback_channels=feedback_channels,
            window_len=rms_window, stride=rms_stride,
        ).pooled
    return EopEstimate(
        subject_id=trial.subject_id,
        direction_index=trial.condition.direction_index,
        activation_label=trial.condition.activation_label,
        frequency_label=trial.condition.frequency_label,
        xi=numerator / denominator,
        mean_pct_mvc=mean_pct,
        numerator=numerator,
        denominator=denominator,
        window=w,
        frequency_hz=trial.spec.frequency,
    )


def classify(xi: float) -> PassivityClass:
    """OSP with EoP xi (and L2 gain 1/xi) when xi >= 0, else ONP with SoP |xi|."""
    if not math.isfinite(xi):
        raise ValueError(f"xi must be finite, got {xi}")
    if xi >= 0:
        gain = 1.0 / xi if xi > 0 else math.inf
        return PassivityClass(kind="OSP", xi=xi, l2_gain=gain, sop=None)
    return PassivityClass(kind="ONP", xi=xi, l2_gain=None, sop=-xi)


# -- estimate CSV interchange ------------------------------------------------

ESTIMATE_CSV_HEADER = "subject,direction,activation,frequency,xi,pct_mvc,numerator,denominator"


def estimates_to_csv(estimates: Sequence[EopEstimate], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(ESTIMATE_CSV_HEADER + "\n")
        for est in estimates:
            fh.write(
                ",".join(
                    (
                        est.subject_id,
                        str(est.direction_index),
                        est.activation_label,
                        est.frequency_label,
                        repr(float(est.xi)),
                        repr(float(est.mean_pct_mvc)),
                        repr(float(est.numerator)),
                        repr(float(est.denominator)),
                    )
                )
                + "\n"
            )


def estimates_from_csv(path) -> list[EopEstimate]:
    out = []
    with open(path, "r", newline="") as fh:
        header = fh.readline().strip()
        if header != ESTIMATE_CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            subject, direction, activation, frequency, xi, pct, num, den = line.split(",")
            out.append(
                EopEstimate(
                    subject_id=subject,
                    direction_index=int(direction),
                    activation_label=activation,
                    frequency_label=frequency,
                    xi=float(xi),
                    mean_pct_mvc=float(pct),
                    numerator=float(num),
                    denominator=float(den),
                )
            )
    return out
