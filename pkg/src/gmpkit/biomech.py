"""Synthetic subject generator.

A direction-, activation-, and frequency-dependent nonlinear limb model
driven by a sinusoidal motion-source perturbation, standing in for human
subjects holding a planar robot handle.

Limb model
----------
The handle position is prescribed along a unit direction d_i:

    x(t) = A * e(t) * sin(2*pi*f*t) * d_i

where ``e(t)`` is a one-period sin^2 ramp-up envelope so the record starts
from rest (a hard cosine velocity start would hide an impulsive energy
injection from the measured port and break pathwise energy accounting).
The reaction force along the axis is

    f = m*dv/dt + g_i*b0*v + k*x + f_m

with a Maxwell branch (spring k_m in series with an activation-dependent
damper) carrying force f_m:

    df_m/dt = k_m * (v - f_m / (g_i * (c0 + c1*a(t))))

``g_i`` is a per-direction damping gain and ``a(t)`` the muscle activation
(fraction of maximum voluntary contraction), which follows a first-order
lag to its target with multiplicative band-limited tracking noise.

At steady state under a sinusoid of angular frequency w = 2*pi*f the net
work per unit velocity energy (the excess of passivity of the model) is

    xi = g_i*b0 + g_i*b_m / (1 + (g_i*b_m*w/k_m)^2),   b_m = c0 + c1*a,

which rises with activation (while g_i*b_m*w < k_m) and falls with
frequency. :func:`analytic_eop` exposes this closed form as the test
oracle for the full simulation pipeline.

Everything is deterministic given (params, spec, activation, seed);
independent trials can run in parallel with no shared state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import emg as emg_module
from .errors import IntegrationError
from .signals import SampledSignal, write_csv, read_csv

N_DIRECTIONS = 8

# smooth ellipse-like anisotropy profile, 1 + 0.3*cos(2*theta_i)
DEFAULT_DIRECTION_GAINS = (1.3, 1.0, 0.7, 1.0, 1.3, 1.0, 0.7, 1.0)

# per-muscle "true" maximum-contraction RMS levels, mV
DEFAULT_MVC_RMS_MV = (1.6, 1.1, 1.8, 1.3)

ACTIVATION_LABELS = ("relaxed", "stiff")
FREQUENCY_LABELS = ("low", "high")

# correlation time of the multiplicative activation tracking noise, s
_NOISE_CORR_TIME = 0.2


@dataclass(frozen=True)
class LimbParams:
    """Parameters of the synthetic limb.

    Units: mass kg; damping N*s/m; stiffness N/m. ``direction_gains`` holds
    one positive multiplier per cardinal direction, applied to both damping
    terms (base and Maxwell).
    """

    mass: float = 2.0
    base_damping: float = 8.0          # b0
    stiffness: float = 200.0           # k
    maxwell_stiffness: float = 850.0   # k_m
    maxwell_damping_base: float = 13.0  # c0
    maxwell_damping_gain: float = 20.0  # c1, per unit activation
    direction_gains: tuple[float, ...] = DEFAULT_DIRECTION_GAINS

    def __post_init__(self) -> None:
        for name in ("mass", "base_damping", "stiffness", "maxwell_stiffness"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        # zero disables the Maxwell branch (pure Kelvin-Voigt limb)
        for name in ("maxwell_damping_base", "maxwell_damping_gain"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        gains = tuple(float(g) for g in self.direction_gains)
        if len(gains) != N_DIRECTIONS:
            raise ValueError(f"direction_gains needs {N_DIRECTIONS} entries, got {len(gains)}")
        if any(g <= 0 for g in gains):
            raise ValueError("direction_gains must all be > 0")
        object.__setattr__(self, "direction_gains", gains)


@dataclass(frozen=True)
class PerturbationSpec:
    """One sinusoidal perturbation run along a cardinal direction."""

    frequency: float            # Hz
    amplitude: float            # m
    direction_index: int        # 0..7, 45 degree increments
    duration: float = 10.0      # s

    def __post_init__(self) -> None:
        if not self.frequency > 0:
            raise ValueError(f"frequency must be > 0, got {self.frequency}")
        if self.amplitude < 0:
            raise ValueError(f"amplitude must be >= 0, got {self.amplitude}")
        if not self.duration > 0:
            raise ValueError(f"duration must be > 0, got {self.duration}")
        if not 0 <= self.direction_index < N_DIRECTIONS:
            raise ValueError(f"direction_index out of range: {self.direction_index}")


@dataclass(frozen=True)
class ActivationProfile:
    """Target muscle co-activation as a fraction of MVC."""

    target_pct_mvc: float
    tracking_noise: float = 0.02   # multiplicative std-dev fraction
    rise_time: float = 0.5         # s, first-order lag constant

    def __post_init__(self) -> None:
        if not 0.0 <= self.target_pct_mvc <= 1.0:
            raise ValueError(f"target_pct_mvc must be in [0, 1], got {self.target_pct_mvc}")
        if self.tracking_noise < 0:
            raise ValueError("tracking_noise must be >= 0")
        if self.rise_time < 0:
            raise ValueError("rise_time must be >= 0")


@dataclass(frozen=True)
class TrialCondition:
    direction_index: int
    activation_label: str   # "relaxed" | "stiff"
    frequency_label: str    # "low" | "high"

    def __post_init__(self) -> None:
        if self.activation_label not in ACTIVATION_LABELS:
            raise ValueError(f"unknown activation label {self.activation_label!r}")
        if self.frequency_label not in FREQUENCY_LABELS:
            raise ValueError(f"unknown frequency label {self.frequency_label!r}")


@dataclass(frozen=True)
class TrialRecord:
    """One perturbation run: condition tag plus the recorded signals."""

    condition: TrialCondition
    force: SampledSignal      # 2 channels fx, fy (N)
    velocity: SampledSignal   # 2 channels vx, vy (m/s)
    emg: SampledSignal        # 4 channels (mV), at its own rate
    spec: PerturbationSpec
    subject_id: str

    def __post_init__(self) -> None:
        if self.force.n_samples != self.velocity.n_samples:
            raise ValueError("force and velocity lengths differ")
        if not math.isclose(self.force.sample_rate, self.velocity.sample_rate):
            raise ValueError("force and velocity rates differ")
        if self.condition.direction_index != self.spec.direction_index:
            raise ValueError("condition direction inconsistent with perturbation spec")


@dataclass(frozen=True)
class Subject:
    subject_id: str
    params: LimbParams
    mvc_rms: tuple[float, ...] = DEFAULT_MVC_RMS_MV


def perturbation_direction(direction_index: int) -> np.ndarray:
    """Unit 2-vector of cardinal direction ``i``: (cos, sin) of i*45 deg."""
    if not 0 <= direction_index < N_DIRECTIONS:
        raise ValueError(f"direction_index out of range: {direction_index}")
    angle = math.pi * direction_index / 4.0
    return np.array([math.cos(angle), math.sin(angle)])


def analytic_eop(
    params: LimbParams, direction_index: int, activation: float, frequency: float
) -> float:
    """Closed-form steady-state excess of passivity of the limb model.

    Serves as the independent oracle for the time-domain pipeline: over
    integer periods the inertia and spring terms do no net work, so the
    force/velocity energy ratio reduces to the dissipative part of the
    admittance.
    """
    g = params.direction_gains[direction_index]
    b_m = params.maxwell_damping_base + params.maxwell_damping_gain * activation
    if b_m <= 0:
        return g * params.base_damping
    omega = 2.0 * math.pi * frequency
    maxwell = g * b_m / (1.0 + (g * b_m * omega / params.maxwell_stiffness) ** 2)
    return g * params.base_damping + maxwell


def activation_series(
    act: ActivationProfile, n_samples: int, dt: float, rng: np.random.Generator
) -> np.ndarray:
    """Activation trajectory: exact exponential lag plus AR(1) noise.

    The lag solution is evaluated in closed form (not stepped), and the
    multiplicative noise is an AR(1) process with ~0.2 s correlation time,
    so the series is step-size-consistent and replayable.
    """
    t = np.arange(n_samples) * dt
    if act.rise_time > 0:
        mean = act.target_pct_mvc * (1.0 - np.exp(-t / act.rise_time))
    else:
        mean = np.full(n_samples, act.target_pct_mvc)
    if act.tracking_noise > 0 and act.target_pct_mvc > 0:
        rho = math.exp(-dt / _NOISE_CORR_TIME)
        eps = rng.standard_normal(n_samples)
        from scipy.signal import lfilter

        w = lfilter([math.sqrt(1.0 - rho * rho)], [1.0, -rho], eps)
        mean = mean * (1.0 + act.tracking_noise * w)
    return np.clip(mean, 0.0, 1.0)


def _ramp_envelope(t: np.ndarray, frequency: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """sin^2 amplitude ramp over the first period; returns (e, e', e'')."""
    t_ramp = 1.0 / frequency
    u = math.pi * frequency * t
    ramp = t < t_ramp
    e = np.where(ramp, np.sin(u / 2.0) ** 2, 1.0)
    de = np.where(ramp, 0.5 * math.pi * frequency * np.sin(u), 0.0)
    dde = np.where(ramp, 0.5 * (math.pi * frequency) ** 2 * np.cos(u), 0.0)
    return e, de, dde


def _labels_for(spec: PerturbationSpec, act: ActivationProfile) -> tuple[str, str]:
    activation_label = "stiff" if act.target_pct_mvc >= 0.2 else "relaxed"
    frequency_label = "high" if spec.frequency >= 2.0 else "low"
    return activation_label, frequency_label


def simulate_trial(
    params: LimbParams,
    spec: PerturbationSpec,
    act: ActivationProfile,
    seed,
    rate: float,
    mvc_rms: tuple[float, ...] = DEFAULT_MVC_RMS_MV,
    emg_rate: float = emg_module.EMG_RATE,
    subject_id: str = "S0",
    activation_label: str | None = None,
    frequency_label: str | None = None,
) -> TrialRecord:
    """Integrate one perturbation trial and synthesize its EMG.

    The prescribed kinematics are evaluated analytically; only the Maxwell
    branch force is stepped, with a fixed-step implicit (unconditionally
    stable) update, and the activation lag uses its exact exponential
    solution. ``seed`` may be an int or a numpy SeedSequence.
    """
    if rate < 20.0 * spec.frequency:
        raise IntegrationError(
            f"rate {rate} Hz too low for {spec.frequency} Hz perturbation: "
            f"need >= {20.0 * spec.frequency} Hz (integration step too large)"
        )
    seed_seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    act_seq, emg_seq = seed_seq.spawn(2)

    h = 1.0 / rate
    n_samples = round(spec.duration * rate) + 1
    t = np.arange(n_samples) * h
    omega = 2.0 * math.pi * spec.frequency
    amp = spec.amplitude

    e, de, dde = _ramp_envelope(t, spec.frequency)
    s, c = np.sin(omega * t), np.cos(omega * t)
    x_ax = amp * e * s
    v_ax = amp * (de * s + e * omega * c)
    acc_ax = amp * (dde * s + 2.0 * de * omega * c - e * omega * omega * s)

    a = activation_series(act, n_samples, h, np.random.default_rng(act_seq))
    g = params.direction_gains[spec.direction_index]
    b_m = g * (params.maxwell_damping_base + params.maxwell_damping_gain * a)
    f_m = np.zeros(n_samples)
    if np.max(b_m) > 1e-12:
        k_m = params.maxwell_stiffness
        b_m = np.maximum(b_m, 1e-12)
        fm = 0.0
        for idx in range(1, n_samples):
            fm = (fm + h * k_m * v_ax[idx]) / (1.0 + h * k_m / b_m[idx])
            f_m[idx] = fm
    f_ax = params.mass * acc_ax + g * params.base_damping * v_ax + params.stiffness * x_ax + f_m
    if not np.all(np.isfinite(f_ax)):
        raise IntegrationError("non-finite force trajectory; unstable parameterization")

    direction = perturbation_direction(spec.direction_index)
    force = SampledSignal(rate, 0.0, ("fx", "fy"), np.outer(f_ax, direction))
    velocity = SampledSignal(rate, 0.0, ("vx", "vy"), np.outer(v_ax, direction))

    activation_signal = SampledSignal(rate, 0.0, ("a",), a)
    emg = emg_module.synthesize_emg(activation_signal, mvc_rms, emg_seq, rate=emg_rate)

    auto_act, auto_freq = _labels_for(spec, act)
    condition = TrialCondition(
        direction_index=spec.direction_index,
        activation_label=activation_label or auto_act,
        frequency_label=frequency_label or auto_freq,
    )
    return TrialRecord(
        condition=condition,
        force=force,
        velocity=velocity,
        emg=emg,
        spec=spec,
        subject_id=subject_id,
    )


def make_cohort(
    n_subjects: int = 5,
    jitter: float = 0.2,
    seed: int = 0,
    base: LimbParams | None = None,
    base_mvc: tuple[float, ...] = DEFAULT_MVC_RMS_MV,
) -> list[Subject]:
    """Synthetic cohort: jitter the scalar limb parameters by +/- ``jitter``.

    The direction-gain profile is shared by all subjects so the anisotropy
    stays a smooth ellipse; per-subject variation enters through the six
    scalars and the per-muscle MVC levels.
    """
    base = base or LimbParams()
    subjects = []
    for idx in range(n_subjects):
        rng = np.random.default_rng(np.random.SeedSequence((seed, 1000 + idx)))
        factors = 1.0 + jitter * rng.uniform(-1.0, 1.0, size=6)
        params = replace(
            base,
            mass=base.mass * factors[0],
            base_damping=base.base_damping * factors[1],
            stiffness=base.stiffness * factors[2],
            maxwell_stiffness=base.maxwell_stiffness * factors[3],
            maxwell_damping_base=base.maxwell_damping_base * factors[4],
            maxwell_damping_gain=base.maxwell_damping_gain * factors[5],
        )
        mvc = tuple(
            m * f for m, f in zip(base_mvc, 1.0 + jitter * rng.uniform(-1.0, 1.0, size=len(base_mvc)))
        )
        subjects.append(Subject(subject_id=f"S{idx + 1}", params=params, mvc_rms=mvc))
    return subjects


# -- trial CSV interchange ---------------------------------------------------
#
# A trial is stored as two files. The main file carries one row per
# robot-rate sample with header t,fx,fy,vx,vy,emg1..emg4, where the EMG
# columns are the raw EMG linearly interpolated onto the robot grid (for
# inspection/plotting). The companion file carries the native-rate EMG
# (t,emg1..emg4); analysis always uses the companion.


def emg_companion_path(path) -> str:
    text = str(path)
    if text.endswith(".csv"):
        return text[: -len(".csv")] + "_emg.csv"
    return text + "_emg.csv"


def save_trial_csv(trial: TrialRecord, path) -> None:
    t_robot = trial.force.times()
    t_emg = trial.emg.times()
    emg_on_robot = np.column_stack(
        [np.interp(t_robot, t_emg, trial.emg.data[:, ch]) for ch in range(trial.emg.n_channels)]
    )
    main = SampledSignal(
        sample_rate=trial.force.sample_rate,
        start_time=trial.force.start_time,
        channels=("fx", "fy", "vx", "vy") + tuple(f"emg{i + 1}" for i in range(trial.emg.n_channels)),
        data=np.column_stack([trial.force.data, trial.velocity.data, emg_on_robot]),
    )
    write_csv(main, path)
    write_csv(trial.emg, emg_companion_path(path))


def load_trial_csv(
    path,
    condition: TrialCondition,
    spec: PerturbationSpec,
    subject_id: str,
) -> TrialRecord:
    main = read_csv(path)
    emg = read_csv(emg_companion_path(path))
    force = SampledSignal(main.sample_rate, main.start_time, ("fx", "fy"), main.data[:, 0:2])
    velocity = SampledSignal(main.sample_rate, main.start_time, ("vx", "vy"), main.data[:, 2:4])
    return TrialRecord(
        condition=condition,
        force=force,
        velocity=velocity,
        emg=emg,
        spec=spec,
        subject_id=subject_id,
    )
