import math

import numpy as np
import pytest

from gmpkit.biomech import ActivationProfile, LimbParams, PerturbationSpec, simulate_trial
from gmpkit.errors import AlignmentError, DegenerateTrialError
from gmpkit.passivity import (
    EnergyLedger,
    EopEstimate,
    classify,
    energy_ledger,
    estimate_eop,
    estimates_from_csv,
    estimates_to_csv,
    interconnection_energy,
    is_passive,
    snap_window_to_periods,
)
from gmpkit.signals import SampledSignal, Window

RATE = 1000.0


def signal(fn, duration=1.0, channels=("x",)):
    t = np.arange(round(duration * RATE) + 1) / RATE
    return SampledSignal(RATE, 0.0, channels, np.column_stack([fn(t) for _ in channels]))


def kv_trial(b0=15.0, seed=0, amplitude=0.03):
    params = LimbParams(
        base_damping=b0, maxwell_damping_base=0.0, maxwell_damping_gain=0.0,
        direction_gains=(1.0,) * 8,
    )
    spec = PerturbationSpec(frequency=1.0, amplitude=amplitude, direction_index=0)
    return simulate_trial(params, spec, ActivationProfile(0.0), seed=seed, rate=RATE)


def test_ledger_zero_input():
    u = signal(lambda t: np.zeros_like(t))
    y = signal(np.sin)
    ledger = energy_ledger(u, y)
    np.testing.assert_array_equal(ledger.energy, 0.0)
    assert ledger.energy[0] == 0.0


def test_ledger_sine_reaches_half_joule():
    s = signal(lambda t: np.sin(2 * np.pi * t))
    ledger = energy_ledger(s, s)
    assert ledger.energy[-1] == pytest.approx(0.5, abs=1e-6)


def test_ledger_pure_spring_returns_to_zero():
    x = signal(lambda t: np.sin(2 * np.pi * t))
    force = SampledSignal(RATE, 0.0, ("f",), 80.0 * x.data)
    v = signal(lambda t: 2 * np.pi * np.cos(2 * np.pi * t))
    ledger = energy_ledger(force, v)
    assert ledger.energy[-1] == pytest.approx(0.0, abs=1e-6)


def test_ledger_alignment_error():
    u = signal(np.sin)
    y = signal(np.sin, duration=2.0)
    with pytest.raises(AlignmentError):
        energy_ledger(u, y)


def test_is_passive_dissipative_trial():
    trial = kv_trial()
    verdict = is_passive(energy_ledger(trial.force, trial.velocity))
    assert verdict.passive
    assert verdict.first_violation_time is None


def test_negative_damper_nonpassive_at_first_step():
    y = signal(lambda t: np.cos(2 * np.pi * t))
    u = SampledSignal(RATE, 0.0, ("u",), -y.data)
    verdict = is_passive(energy_ledger(u, y))
    assert not verdict.passive
    assert verdict.first_violation_time == pytest.approx(1.0 / RATE)
    assert verdict.deficit > 0


def test_initial_energy_covers_a_known_dip():
    # u*y = -1 W on samples 0..249, +1 W after; trapezoid area by hand:
    # 249 full -1 W steps of 1 ms plus a zero-mean transition step -> 0.249 J
    power = lambda t: np.where(t < 0.25, -1.0, 1.0)
    dip = 0.249
    u = signal(power)
    ones = signal(lambda t: np.ones_like(t))
    ledger_short = energy_ledger(u, ones, e0=dip - 1e-6)
    assert not is_passive(ledger_short).passive
    ledger_covered = energy_ledger(u, ones, e0=dip + 1e-6)
    assert is_passive(ledger_covered).passive


def test_interconnection_identity_and_negation():
    s = signal(lambda t: np.sin(2 * np.pi * t))
    ledger = energy_ledger(s, s, e0=0.5)
    same = interconnection_energy([ledger])
    np.testing.assert_array_equal(same.energy, ledger.energy)
    negated = EnergyLedger(ledger.times, -ledger.energy, -ledger.initial_energy)
    total = interconnection_energy([ledger, negated])
    np.testing.assert_allclose(total.energy, 0.0, atol=1e-15)
    assert total.initial_energy == 0.0


def test_interconnection_stable_human_field_pair():
    # human port dissipates at xi_h ||v||^2, field generates at xi_f ||v||^2
    xi_h, xi_f = 12.0, 5.0
    v = signal(lambda t: 0.2 * np.cos(2 * np.pi * t))
    human_force = SampledSignal(RATE, 0.0, ("f",), xi_h * v.data)
    field_force = SampledSignal(RATE, 0.0, ("f",), -xi_f * v.data)
    total = interconnection_energy(
        [energy_ledger(human_force, v), energy_ledger(field_force, v)]
    )
    assert is_passive(total).passive


def test_interconnection_associative_commutative():
    rng = np.random.default_rng(3)
    t = np.arange(101) / RATE
    ledgers = [
        EnergyLedger(t, np.cumsum(rng.normal(size=101)) / RATE, rng.uniform())
        for _ in range(3)
    ]
    a, b, c = ledgers
    left = interconnection_energy([interconnection_energy([a, b]), c])
    right = interconnection_energy([a, interconnection_energy([b, c])])
    shuffled = interconnection_energy([c, a, b])
    np.testing.assert_allclose(left.energy, right.energy, atol=1e-12)
    np.testing.assert_allclose(left.energy, shuffled.energy, atol=1e-12)
    assert left.initial_energy == pytest.approx(shuffled.initial_energy)


def test_interconnection_grid_mismatch():
    t = np.arange(10) / RATE
    a = EnergyLedger(t, np.zeros(10))
    b = EnergyLedger(t + 1.0, np.zeros(10))
    with pytest.raises(AlignmentError):
        interconnection_energy([a, b])


def test_estimate_eop_kelvin_voigt():
    est = estimate_eop(kv_trial(b0=15.0), Window(5.0, 10.0))
    assert est.xi == pytest.approx(15.0, abs=0.015)
    assert est.denominator > 0
    assert est.xi == pytest.approx(est.numerator / est.denominator, rel=1e-12)


def test_estimate_eop_homogeneous_in_velocity():
    # linear limb, same seed: doubling the drive leaves the ratio unchanged
    a = estimate_eop(kv_trial(seed=5, amplitude=0.03), Window(5.0, 10.0))
    b = estimate_eop(kv_trial(seed=5, amplitude=0.06), Window(5.0, 10.0))
    assert b.xi == pytest.approx(a.xi, abs=1e-6)


def test_estimate_eop_degenerate_trial():
    with pytest.raises(DegenerateTrialError):
        estimate_eop(kv_trial(amplitude=0.0), Window(5.0, 10.0))


def test_estimate_eop_axis_projected_matches_full_for_axial_motion():
    trial = kv_trial(seed=6)
    full = estimate_eop(trial, Window(5.0, 10.0))
    projected = estimate_eop(trial, Window(5.0, 10.0), axis_projected=True)
    assert projected.xi == pytest.approx(full.xi, rel=1e-9)


def test_snap_window_to_integer_periods():
    w = snap_window_to_periods(Window(5.0, 10.0), frequency=0.73, sample_rate=RATE)
    n_periods = (w.t_end - w.t_start) * 0.73
    assert n_periods == pytest.approx(round(n_periods), abs=1e-3)
    assert round(n_periods) == 3
    assert w.t_end == pytest.approx(10.0)
    # protocol frequencies: 5 s is already an integer period count
    assert snap_window_to_periods(Window(5.0, 10.0), 1.0, RATE) == Window(5.0, 10.0)
    assert snap_window_to_periods(Window(5.0, 10.0), 3.0, RATE) == Window(5.0, 10.0)


def test_estimate_eop_tracks_snapped_window():
    trial = kv_trial(seed=7)
    est = estimate_eop(trial, Window(5.2, 9.9))
    assert est.window.t_end == pytest.approx(9.9)
    assert (est.window.t_end - est.window.t_start) == pytest.approx(4.0)
    assert est.xi == pytest.approx(15.0, abs=0.015)


def test_classify_cases():
    osp = classify(15.0)
    assert (osp.kind, osp.l2_gain, osp.sop) == ("OSP", pytest.approx(1 / 15.0), None)
    onp = classify(-3.0)
    assert (onp.kind, onp.sop, onp.l2_gain) == ("ONP", 3.0, None)
    boundary = classify(0.0)
    assert boundary.kind == "OSP"
    assert math.isinf(boundary.l2_gain)
    with pytest.raises(ValueError):
        classify(float("nan"))


def test_estimates_csv_round_trip(tmp_path):
    est = estimate_eop(kv_trial(seed=8), Window(5.0, 10.0))
    path = tmp_path / "estimates.csv"
    estimates_to_csv([est], path)
    with open(path) as fh:
        assert fh.readline().strip() == "subject,direction,activation,frequency,xi,pct_mvc,numerator,denominator"
    (back,) = estimates_from_csv(path)
    assert back.xi == est.xi
    assert back.numerator == est.numerator
    assert back.denominator == est.denominator
    assert back.subject_id == est.subject_id
    assert back.activation_label == est.activation_label


def test_eop_estimate_validation():
    with pytest.raises(ValueError):
        EopEstimate("S1", 0, "relaxed", "low", 2.0, 0.1, 1.0, 1.0)  # xi != num/den
    with pytest.raises(ValueError):
        EopEstimate("S1", 0, "relaxed", "low", 1.0, 0.1, 1.0, 0.0)  # zero denominator
