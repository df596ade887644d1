import math

import numpy as np
import pytest

from hybridcrane.sigproc import (FilterSpec, InvalidSpecError, SampledSignal, SignalConditioner,
                                 analytic_gain, butter_filtfilt, central_diff_accel,
                                 central_diff_velocity, condition, mask_zero_crossings, quantum,
                                 quantize_encoder)
from oracles import butterworth_filtfilt_gain

DT = 0.002


def tone(freq, seconds=40.0, dt=DT):
    t = np.arange(int(round(seconds / dt))) * dt
    return t, np.sin(2 * np.pi * freq * t)


def tone_response(freq, seconds=40.0):
    """Amplitude ratio and phase [deg] of the filtered tone, edges excluded."""
    t, x = tone(freq, seconds)
    y = butter_filtfilt(SampledSignal(x, DT)).values
    mid = slice(x.size // 4, 3 * x.size // 4)
    A = np.column_stack([np.sin(2 * np.pi * freq * t), np.cos(2 * np.pi * freq * t)])[mid]
    (a, b), *_ = np.linalg.lstsq(A, y[mid], rcond=None)
    return math.hypot(a, b), math.degrees(math.atan2(b, a))


def test_gain_matches_analytic_butterworth():
    f = np.array([0.1, 0.5, 1.0, 3.0, 10.0, 50.0, 200.0])
    expect = butterworth_filtfilt_gain(f, 3.0, 4, DT)
    assert np.allclose(analytic_gain(f, FilterSpec(), DT), expect, rtol=1e-6)
    assert analytic_gain(3.0, FilterSpec(), DT)[0] == pytest.approx(0.5, rel=1e-9)


def test_dc_passes_unchanged():
    y = butter_filtfilt(SampledSignal(np.ones(2000), DT)).values
    assert np.max(np.abs(y - 1.0)) < 1e-9


def test_passband_tone():
    gain, phase = tone_response(0.5)
    assert 0.999 <= gain <= 1.001
    assert abs(phase) < 0.1


def test_stopband_tone():
    gain, _ = tone_response(50.0, 10.0)
    assert 20 * math.log10(gain) < -90


def test_zero_group_delay():
    t, x = tone(1.0, 20.0)
    y = butter_filtfilt(SampledSignal(x, DT)).values
    mid = slice(2000, 8000)
    lags = np.arange(-20, 21)
    xc = [np.dot(y[mid], np.roll(x, k)[mid]) for k in lags]
    assert lags[int(np.argmax(xc))] == 0


def test_cutoff_at_nyquist_rejected():
    with pytest.raises(InvalidSpecError):
        butter_filtfilt(SampledSignal(np.zeros(100), DT), FilterSpec(4, 250.0))


def test_short_signal_rejected():
    with pytest.raises(InvalidSpecError):
        butter_filtfilt(SampledSignal(np.zeros(10), DT))


# --- differences -------------------------------------------------------------------

def test_central_differences_exact_on_quadratic():
    t = np.arange(1000) * DT
    x = 3.0 * t**2 - 2.0 * t + 0.5
    v = central_diff_velocity(SampledSignal(x, DT)).values
    a = central_diff_accel(SampledSignal(x, DT)).values
    scale = np.max(np.abs(x))
    assert np.max(np.abs(v[1:-1] - (6.0 * t[1:-1] - 2.0))) < 1e-12 * scale / DT
    assert np.max(np.abs(a[1:-1] - 6.0)) < 1e-12 * scale / DT**2
    assert np.isnan(v[0]) and np.isnan(a[-1])


def test_linear_ramp_slope():
    v = central_diff_velocity(SampledSignal(2.0 * np.arange(50) * DT, DT)).values
    assert np.allclose(v[1:-1], 2.0, rtol=1e-12)


def test_constant_has_zero_acceleration():
    a = central_diff_accel(SampledSignal(np.full(20, 0.3), DT)).values
    assert np.all(a[1:-1] == 0.0)


def test_sine_derivative_taylor_bound():
    t, x = tone(1.0, 2.0)
    v = central_diff_velocity(SampledSignal(x, DT)).values
    assert np.max(np.abs(v[1:-1] - 2 * np.pi * np.cos(2 * np.pi * t[1:-1]))) < 1e-4 * 2 * np.pi


def test_differences_are_linear():
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=200), rng.normal(size=200)
    d = lambda z: central_diff_velocity(SampledSignal(z, DT)).values[1:-1]
    assert np.allclose(d(2.5 * x - 1.5 * y), 2.5 * d(x) - 1.5 * d(y), rtol=0, atol=1e-9)


# --- masks and quantization -----------------------------------------------------------

def test_positive_velocity_all_kept():
    assert mask_zero_crossings(SampledSignal(np.full(100, 0.1), 0.01)).all()


def test_single_crossing_window():
    dt = 0.01
    t = np.arange(201) * dt
    m = mask_zero_crossings(SampledSignal(t - 1.0, dt), 0.1)
    dropped = t[~m]
    assert dropped.min() == pytest.approx(0.9) and dropped.max() == pytest.approx(1.1)
    assert np.all(m[(t < 0.895) | (t > 1.105)])


def test_sinusoid_masked_fraction():
    # cosine: all 20 crossings lie a full window inside the record
    t = np.arange(10000) * DT
    m = mask_zero_crossings(SampledSignal(np.cos(np.pi * t), DT), 0.15)
    assert (~m).mean() == pytest.approx(0.30, abs=0.005)


def test_invalid_samples_masked():
    valid = np.ones(50, dtype=bool)
    valid[10] = False
    m = mask_zero_crossings(SampledSignal(np.ones(50), DT, valid=valid))
    assert not m[10] and m[11]


def test_quantize_staircase():
    q = quantum(4096, 0.04)
    assert q == pytest.approx(0.04 * 2 * np.pi / 4096)
    x = np.linspace(0, 0.01, 500)
    y = quantize_encoder(SampledSignal(x, DT), 4096, 0.04).values
    assert np.all((x - y >= -1e-12) & (x - y < q))
    steps = np.unique(np.round(np.diff(y) / q, 9))
    assert set(steps) <= {0.0, 1.0}


def test_quantize_on_grid_unchanged():
    q = quantum(4096, 0.015)
    x = np.arange(-20, 20) * q
    assert np.allclose(quantize_encoder(SampledSignal(x, DT), 4096, 0.015).values, x,
                       rtol=0, atol=1e-15)


def test_filtered_velocity_beats_raw_difference_on_quantized_record():
    t, x = tone(0.3, 20.0)
    x = 0.1 * x
    q = quantize_encoder(SampledSignal(x, DT), 4096, 0.04)
    truth = 0.1 * 2 * np.pi * 0.3 * np.cos(2 * np.pi * 0.3 * t)
    raw = central_diff_velocity(q).values
    c = condition(q)
    mid = slice(1000, 9000)
    assert np.sqrt(np.mean((c.velocity.values[mid] - truth[mid]) ** 2)) < 2e-4
    assert np.sqrt(np.mean((raw[mid] - truth[mid]) ** 2)) > 10 * 2e-4


def test_signal_conditioner_transformer():
    t, x = tone(0.5, 10.0)
    X = np.column_stack([x, 2 * x])
    out = SignalConditioner().fit(X).transform(X)
    assert out.shape == (x.size, 6)
    assert np.allclose(out[1:-1, 3:], 2 * out[1:-1, :3])
    with pytest.raises(InvalidSpecError):
        SignalConditioner(cutoff_hz=300.0).fit(X)
