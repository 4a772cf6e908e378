import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gmpkit.errors import AlignmentError, WindowRangeError
from gmpkit.signals import (
    SampledSignal,
    Window,
    inner_product_integral,
    l2_norm_integral,
    read_csv,
    rms,
    write_csv,
)


def make_signal(fn, duration=1.0, rate=1000.0, channels=("x",)):
    t = np.arange(round(duration * rate) + 1) / rate
    data = np.column_stack([fn(t) for _ in channels])
    return SampledSignal(rate, 0.0, channels, data)


def test_window_rejects_degenerate():
    with pytest.raises(WindowRangeError):
        Window(2.0, 1.0)
    with pytest.raises(WindowRangeError):
        Window(1.0, 1.0)


def test_signal_invariants():
    sig = make_signal(np.sin, duration=2.0)
    assert sig.n_samples == 2001
    assert sig.duration == pytest.approx(2.0)
    assert sig.times()[1] == pytest.approx(sig.start_time + 1.0 / sig.sample_rate)
    with pytest.raises(ValueError):
        SampledSignal(-1.0, 0.0, ("x",), np.zeros(10))
    with pytest.raises(ValueError):
        SampledSignal(1.0, 0.0, ("x", "y"), np.zeros((10, 1)))


def test_signal_data_is_readonly():
    sig = make_signal(np.sin)
    with pytest.raises(ValueError):
        sig.data[0, 0] = 1.0


def test_slice_last_five_seconds():
    sig = make_signal(np.sin, duration=10.0, rate=1000.0)
    out = sig.slice(Window(5.0, 10.0))
    assert out.n_samples == 5001
    assert out.start_time == pytest.approx(5.0)
    assert out.sample_rate == sig.sample_rate


def test_slice_full_span_is_identity():
    sig = make_signal(np.cos, duration=3.0)
    out = sig.slice(sig.span())
    assert out.n_samples == sig.n_samples
    np.testing.assert_array_equal(out.data, sig.data)


def test_slice_outside_span_raises():
    sig = make_signal(np.sin, duration=1.0)
    with pytest.raises(WindowRangeError):
        sig.slice(Window(0.5, 1.5))
    with pytest.raises(WindowRangeError):
        sig.slice(Window(-0.5, 0.5))


def test_nested_slices_equal_single_slice():
    sig = make_signal(np.sin, duration=10.0)
    inner = Window(3.0, 5.0)
    once = sig.slice(inner)
    twice = sig.slice(Window(2.0, 8.0)).slice(inner)
    assert once.start_time == pytest.approx(twice.start_time)
    np.testing.assert_array_equal(once.data, twice.data)


def test_inner_product_zero_input():
    a = make_signal(lambda t: np.zeros_like(t))
    b = make_signal(np.sin)
    assert inner_product_integral(a, b, Window(0.0, 1.0)) == 0.0


def test_inner_product_sine_analytic():
    # oracle: integral of sin^2(2 pi t) over one period is exactly 1/2
    s = make_signal(lambda t: np.sin(2 * np.pi * t))
    assert inner_product_integral(s, s, Window(0.0, 1.0)) == pytest.approx(0.5, abs=1e-6)


def test_spring_force_does_no_net_work():
    # oracle: elastic force k*x against v over a full period integrates to 0
    k = 120.0
    x = make_signal(lambda t: np.sin(2 * np.pi * t))
    force = SampledSignal(x.sample_rate, 0.0, ("f",), k * x.data)
    v = make_signal(lambda t: 2 * np.pi * np.cos(2 * np.pi * t))
    assert inner_product_integral(force, v, Window(0.0, 1.0)) == pytest.approx(0.0, abs=1e-6)


def test_inner_product_symmetry():
    a = make_signal(lambda t: np.sin(3 * t) + 0.2 * t)
    b = make_signal(lambda t: np.cos(5 * t))
    w = Window(0.1, 0.9)
    assert inner_product_integral(a, b, w) == inner_product_integral(b, a, w)


def test_inner_product_alignment_errors():
    a = make_signal(np.sin, rate=1000.0)
    b = make_signal(np.sin, rate=500.0)
    with pytest.raises(AlignmentError):
        inner_product_integral(a, b, Window(0.0, 1.0))
    c = make_signal(np.sin, duration=2.0)
    with pytest.raises(AlignmentError):
        inner_product_integral(a, c, Window(0.0, 1.0))


def test_l2_norm_constant_two_channels():
    # oracle: constant 2 on two channels over 3 s -> (4 + 4) * 3 = 24
    sig = make_signal(lambda t: np.full_like(t, 2.0), duration=3.0, channels=("u", "v"))
    assert l2_norm_integral(sig, Window(0.0, 3.0)) == pytest.approx(24.0, abs=1e-9)


def test_l2_norm_sine():
    sig = make_signal(lambda t: np.sin(2 * np.pi * t))
    assert l2_norm_integral(sig, Window(0.0, 1.0)) == pytest.approx(0.5, abs=1e-6)


def test_l2_norm_zero_iff_zero_signal():
    zero = make_signal(lambda t: np.zeros_like(t))
    assert l2_norm_integral(zero, Window(0.0, 1.0)) == 0.0
    tiny = make_signal(lambda t: np.where(t == 0.5, 1e-3, 0.0))
    assert l2_norm_integral(tiny, Window(0.0, 1.0)) > 0.0


def test_trapezoid_exact_for_piecewise_linear():
    # oracle: sum of exact segment areas of a piecewise-linear integrand
    rng = np.random.default_rng(7)
    values = rng.uniform(-2.0, 2.0, size=101)
    rate = 100.0
    sig = SampledSignal(rate, 0.0, ("x",), values)
    ones = SampledSignal(rate, 0.0, ("one",), np.ones_like(values))
    exact = np.sum((values[1:] + values[:-1]) / 2.0) / rate
    assert inner_product_integral(sig, ones, Window(0.0, 1.0)) == pytest.approx(exact, abs=1e-12)


@given(st.floats(min_value=-5.0, max_value=5.0), st.floats(min_value=0.1, max_value=4.0))
def test_l2_norm_nonnegative(offset, scale):
    t = np.arange(201) / 100.0
    sig = SampledSignal(100.0, 0.0, ("x",), offset + scale * np.sin(7 * t))
    assert l2_norm_integral(sig, Window(0.0, 2.0)) >= 0.0


def test_rms_constant():
    sig = make_signal(lambda t: np.full_like(t, -3.0), duration=2.0)
    out = rms(sig, window_len=0.25, stride=0.05)
    np.testing.assert_allclose(out.data, 3.0)


def test_rms_full_period_sine():
    # oracle: RMS of a full sine period is 1/sqrt(2)
    sig = make_signal(lambda t: np.sin(2 * np.pi * t), duration=2.0)
    out = rms(sig, window_len=1.0, stride=0.1)
    np.testing.assert_allclose(out.data, 1.0 / math.sqrt(2.0), atol=1e-3)


def test_rms_zero():
    sig = make_signal(lambda t: np.zeros_like(t))
    out = rms(sig)
    np.testing.assert_array_equal(out.data, 0.0)


def test_rms_window_longer_than_signal():
    sig = make_signal(np.sin, duration=0.1)
    with pytest.raises(WindowRangeError):
        rms(sig, window_len=1.0, stride=0.05)


def test_rms_output_rate():
    sig = make_signal(np.sin, duration=10.0, rate=1000.0)
    out = rms(sig, window_len=0.25, stride=0.05)
    assert out.sample_rate == pytest.approx(20.0)


def test_csv_round_trip(tmp_path):
    sig = make_signal(lambda t: np.sin(2 * np.pi * 3 * t) + t, duration=0.5, channels=("a", "b"))
    path = tmp_path / "sig.csv"
    write_csv(sig, path)
    back = read_csv(path)
    assert back.channels == sig.channels
    assert back.sample_rate == pytest.approx(sig.sample_rate)
    np.testing.assert_array_equal(back.data, sig.data)


def test_csv_write_is_deterministic(tmp_path):
    sig = make_signal(np.sin, duration=0.2)
    write_csv(sig, tmp_path / "a.csv")
    write_csv(sig, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
