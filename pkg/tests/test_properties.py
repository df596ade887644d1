"""Property-based checks on the pure building blocks."""
import math

import numpy as np
from hypothesis import assume, given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from hybridcrane import io
from hybridcrane.core import (CraneParams, Mode, ModeVector, Polynomial4, mechanical_energy,
                              vector_field)
from hybridcrane.estimation.ls import RegressionProblem, ls_solve
from hybridcrane.sigproc import (SampledSignal, central_diff_accel, central_diff_velocity,
                                 crossing_times, mask_zero_crossings, quantum, quantize_encoder)

finite = st.floats(allow_nan=False, allow_infinity=False)
moderate = st.floats(-1e3, 1e3, allow_nan=False)
signals = arrays(np.float64, st.integers(5, 200), elements=st.floats(-10, 10))


@given(finite)
def test_fmt_round_trips_every_double(v):
    assert float(io.fmt(v)) == v


@given(st.integers(-2**62, 2**62))
def test_fmt_keeps_integers_exact(n):
    assert int(io.fmt(n)) == n


@given(signals, signals, moderate, moderate)
def test_differentiation_is_linear(x, y, a, b):
    n = min(x.size, y.size)
    x, y = x[:n], y[:n]
    for diff in (central_diff_velocity, central_diff_accel):
        lhs = diff(SampledSignal(a * x + b * y, 0.002)).values[1:-1]
        rhs = (a * diff(SampledSignal(x, 0.002)).values[1:-1]
               + b * diff(SampledSignal(y, 0.002)).values[1:-1])
        scale = (abs(a) + abs(b)) * 20 / 0.002**2
        assert np.allclose(lhs, rhs, atol=1e-12 * scale)


@given(signals, st.integers(64, 8192), st.floats(0.005, 0.1))
def test_quantization_error_within_one_count(x, ppr, radius):
    q = quantum(ppr, radius)
    out = quantize_encoder(SampledSignal(x, 0.002), ppr, radius).values
    err = x - out
    assert np.all(err > -1e-9 * q - 1e-12) and np.all(err < q * (1 + 1e-9))
    # whole counts only
    counts = out / q
    assert np.allclose(counts, np.round(counts), atol=1e-6)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=5),
       st.floats(-1, 0.4), st.floats(0.05, 1), st.floats(-10, 10))
def test_polynomial_clamps_to_domain(coeffs, lo, width, pos):
    p = Polynomial4(tuple(coeffs), (lo, lo + width))
    clamped = min(max(pos, lo), lo + width)
    assert p(pos) == p(clamped)
    assert p(np.array([pos]))[0] == p(clamped)


@given(st.integers(0, 2**32 - 1), st.integers(20, 200), st.integers(1, 4))
def test_least_squares_residual_orthogonal(seed, n, p):
    rng = np.random.default_rng(seed)
    phi = rng.normal(size=(n, p))
    y = rng.normal(size=n)
    res = ls_solve(RegressionProblem(phi, y))
    resid = y - phi @ res.theta
    assert np.all(np.abs(phi.T @ resid) < 1e-9 * np.linalg.norm(phi) * np.linalg.norm(y))
    assert np.allclose(np.diag(res.corr), 1.0)
    assert np.all(np.abs(res.corr) <= 1.0)


@given(st.floats(0.05, 3.0), st.floats(0.0, 0.5))
@settings(deadline=None)
def test_mask_excludes_exactly_the_window(freq, window):
    dt = 0.002
    t = np.arange(2000) * dt
    sig = SampledSignal(np.sin(2 * np.pi * freq * t + 0.3), dt)
    keep = mask_zero_crossings(sig, window)
    tc = crossing_times(sig)
    assume(tc.size > 0)
    near = np.min(np.abs(t[:, None] - tc[None, :]), axis=1)
    clear = np.abs(near - window) > 1e-9
    assert np.array_equal(keep[clear], near[clear] > window)


state_st = st.tuples(
    st.floats(0.0, 0.5), st.floats(-1, 1), st.floats(0.0, 0.5), st.floats(-1, 1),
    st.floats(0.1, 0.6), st.floats(-1, 1), st.floats(0.6, 2.5), st.floats(-2, 2),
    st.floats(-0.9, 0.9), st.floats(-2, 2))
mode_st = st.tuples(*[st.sampled_from(list(Mode))] * 3)
input_st = st.tuples(*[st.floats(-5, 5)] * 3)


@given(state_st, mode_st, input_st)
def test_rest_axes_have_no_motion(state, modes, u):
    p = CraneParams(m_p=0.4)
    s = np.array(state)
    for i, q in enumerate(modes):
        if q == Mode.REST:
            s[2 * i + 1] = 0.0
    d = vector_field(s, u, ModeVector(*modes), p)
    assert np.all(np.isfinite(d))
    for i, q in enumerate(modes):
        if q == Mode.REST:
            assert d[2 * i] == 0.0 and d[2 * i + 1] == 0.0


@given(state_st)
def test_energy_rate_zero_without_friction(state):
    # rope locked, no damping anywhere: the vector field is conservative
    p = CraneParams(m_p=0.4, J_x=0.3, J_y=0.2)
    s = np.array(state)
    s[5] = 0.0
    locked = (False, False, True)
    d = vector_field(s, (0, 0, 0), ModeVector(Mode.POS, Mode.POS, Mode.POS), p, locked=locked)
    h = 1e-6
    rate = (mechanical_energy(s + h * d, p) - mechanical_energy(s - h * d, p)) / (2 * h)
    scale = 1.0 + float(np.abs(d).max())
    assert abs(rate) < 1e-6 * scale**2


@given(st.floats(0.1, 0.6), st.floats(0.6, 2.5), st.floats(-0.9, 0.9))
def test_energy_lower_bound_is_hanging(L, a, b):
    p = CraneParams(m_p=0.4)
    s = [0, 0, 0, 0, L, 0, a, 0, b, 0]
    assert mechanical_energy(s, p) >= -p.m_p * p.g * L - 1e-12
    assert math.isclose(mechanical_energy(s, p),
                        -p.m_p * p.g * L * math.sin(a) * math.cos(b), rel_tol=1e-12)
