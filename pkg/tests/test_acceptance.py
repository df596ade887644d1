"""Acceptance criteria 1 to 10.

Each test carries ``@pytest.mark.criterion(n)``; the terminal summary
prints one PASS/FAIL line per criterion with the measured numbers.
Tolerances below are pinned and must not be loosened.
"""
import math
import time

import numpy as np
import pytest

from hybridcrane.core import AxisFriction, CraneState, Mode, mechanical_energy, net_axis_force
from hybridcrane.estimation.active import active_sampling, make_oracle
from hybridcrane.reference import lab_params, p5_polynomials, p_parameters
from hybridcrane.sigproc import (FilterSpec, SampledSignal, analytic_gain, butter_filtfilt,
                                 central_diff_accel, central_diff_velocity)
from hybridcrane.sim.benchmark import benchmark
from hybridcrane.sim.cases import case1, case2
from hybridcrane.sim.hybrid import EventKind, SimConfig, integrate, zero_input
from oracles import brute_case1, brute_case2, butterworth_filtfilt_gain

# 1
PLATEAU_MIN_S = 0.05
TANH_STILL_SPEED = 1e-6
TANH_STILL_MAX_S = 0.01
CASE1_RUNTIME_S = 10.0
# 2, 3
KS = (1, 10, 100, 1000, 10000)
DECADE_FACTOR = 3.0
REPEATS = 5
# 4
ROPE_BREAKAWAY_N = 9.81
# 5
ORACLE_RMSE = 1e-4
ORACLE_RUNTIME_S = 300.0
# 6
ENERGY_REL_TOL = 1e-9
ENERGY_DRIFT = 1e-6
# 7
P_TOL_NOISELESS = 0.005
P_TOL_QUANTIZED = 0.05
CURVE_TOL = 0.05
ROUND_TRIP_RUNTIME_S = 600.0
# 8
CORR_MAX = 0.05
# 9
ORACLE_NOISE_V = 0.02
ACTIVE_BUDGET = 15
MAX_STD_V = 0.05
MAE_FRACTION = 0.02
# 10
PASS_GAIN_TOL = 1e-3
PASS_PHASE_DEG = 0.1
STOP_ATTEN_DB = 90.0

DT = 0.002


def runs(mask, dt):
    """Durations of the maximal True runs in ``mask`` sampled every ``dt``."""
    out, n = [], 0
    for m in mask:
        if m:
            n += 1
        elif n:
            out.append((n - 1) * dt)
            n = 0
    if n:
        out.append((n - 1) * dt)
    return out


def simulate(case, **changes):
    from dataclasses import replace
    return integrate(case.state, case.params, replace(case.config, **changes),
                     case.input or zero_input)


# --- 1 -----------------------------------------------------------------------------

@pytest.mark.criterion(1)
def test_stick_slip_fidelity(verdict):
    c = case1()
    start = time.perf_counter()
    hyb = simulate(c).grid()
    wall = time.perf_counter() - start
    v = hyb["dy_t"]
    moved = int(np.nonzero(v != 0)[0][0])
    plateaus = runs(v[moved:] == 0.0, c.config.output_dt)
    longest = max(plateaus, default=0.0)
    tanh = simulate(c, model="tanh", k=1000.0).grid()
    still = max(runs(np.abs(tanh["dy_t"]) < TANH_STILL_SPEED, c.config.output_dt), default=0.0)
    verdict(f"hybrid plateau {longest:.3f}s after first slip ({len(plateaus)} plateaus), "
            f"tanh k=1000 longest |v|<1e-6 {still:.3f}s, runtime {wall:.2f}s")
    assert longest > PLATEAU_MIN_S
    assert still <= TANH_STILL_MAX_S
    assert wall < CASE1_RUNTIME_S


# --- 2 and 3 -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def tables():
    return {name: benchmark(make(), KS, REPEATS) for name, make in (("case1", case1),
                                                                    ("case2", case2))}


def rmse_trend(rows):
    tanh = [r for r in rows if r.k is not None]
    e = [r.rmse for r in tanh]
    problems = []
    for a, b in zip(tanh[:-1], tanh[1:]):
        if b.rmse > a.rmse:
            problems.append(f"rmse rises k={a.k:g}->{b.k:g}")
        if a.k >= 10 and a.rmse / b.rmse < DECADE_FACTOR:
            problems.append(f"k={a.k:g}->{b.k:g} drop only {a.rmse / b.rmse:.2f}x")
    return e, problems


@pytest.mark.criterion(2)
def test_tanh_convergence_trend(tables, verdict):
    bad = []
    for name, rows in tables.items():
        e, problems = rmse_trend(rows)
        assert not any(r.failed for r in rows), [r.error for r in rows if r.failed]
        verdict(f"{name} rmse " + ", ".join(f"{v:.2e}" for v in e))
        bad += [f"{name}: {p}" for p in problems]
    assert not bad, bad


@pytest.mark.criterion(3)
def test_timing_trend(tables, verdict):
    bad = []
    for name, rows in tables.items():
        hyb = rows[0].wall_time
        tanh = [r for r in rows if r.k is not None]
        verdict(f"{name} hybrid {hyb:.3f}s, tanh " + ", ".join(f"{r.wall_time:.3f}" for r in tanh))
        steep = [r for r in tanh if r.k >= 10]
        for a, b in zip(steep[:-1], steep[1:]):
            if not b.wall_time > a.wall_time:
                bad.append(f"{name}: time not increasing k={a.k:g}->{b.k:g}")
        for r in tanh:
            if r.k >= 100 and not r.wall_time > hyb:
                bad.append(f"{name}: tanh k={r.k:g} not slower than hybrid")
    assert not bad, bad


# --- 4 -----------------------------------------------------------------------------

def rope_net_force(traj, params, locked):
    u = traj.inputs
    rest = [Mode.REST] * 3
    return np.array([net_axis_force("l", s, ui, params, rest, locked)
                     for s, ui in zip(traj.states, u)])


@pytest.mark.criterion(4)
def test_rope_threshold(verdict):
    # below the threshold the rope must never move at all
    for amp in (9.0, 9.8):
        c = case2(amplitude=amp)
        tr = simulate(c)
        assert np.all(tr["dL"] == 0.0), f"rope moved at amplitude {amp}"
        assert not tr.events
    c = case2()
    tr = simulate(c)
    locked = c.config.locked
    t_rope = rope_net_force(tr, c.params, locked)
    q = tr["q_l"]
    below = np.abs(t_rope) < ROPE_BREAKAWAY_N
    # the rope only leaves REST through a breakaway at or above the threshold
    starts = [e for e in tr.events if e.axis == "l" and e.kind in (EventKind.BREAKAWAY_POS,
                                                                   EventKind.BREAKAWAY_NEG)]
    at = {float(t): i for i, t in enumerate(tr.t)}
    forces = [abs(t_rope[at[e.time]]) for e in starts]
    left_rest = np.nonzero((q[1:] != Mode.REST) & (q[:-1] == Mode.REST))[0] + 1
    moved_below = [float(tr.t[i]) for i in left_rest if below[i - 1] and below[i]
                   and not any(abs(tr.t[i] - e.time) < 1e-12 for e in starts)]
    still_when_resting = np.all(tr["dL"][q == Mode.REST] == 0.0)
    literal = float(np.mean(tr["dL"][below] == 0.0)) if below.any() else 1.0
    verdict(f"9.0/9.8 N runs static; {len(starts)} breakaways at |t_rope| >= "
            f"{min(forces, default=float('nan')):.4f} N; literal reading holds on "
            f"{100 * literal:.1f}% of sub-threshold samples (slip decays through them)")
    assert starts
    assert min(forces) >= ROPE_BREAKAWAY_N - 1e-9
    assert not moved_below
    assert still_when_resting


# --- 5 -----------------------------------------------------------------------------

@pytest.mark.criterion(5)
@pytest.mark.slow
def test_brute_force_oracle(verdict):
    start = time.perf_counter()
    _, _, v1 = brute_case1()
    _, v2 = brute_case2()
    h1 = simulate(case1()).grid()["dy_t"]
    h2 = simulate(case2()).grid()["dL"]
    wall = time.perf_counter() - start
    e1 = float(np.sqrt(np.mean((h1 - v1[:h1.size]) ** 2)))
    e2 = float(np.sqrt(np.mean((h2 - v2[:h2.size]) ** 2)))
    verdict(f"velocity rmse case1 {e1:.2e}, case2 {e2:.2e} m/s; runtime {wall:.1f}s")
    assert h1.size == v1.size and h2.size == v2.size
    assert e1 < ORACLE_RMSE and e2 < ORACLE_RMSE
    assert wall < ORACLE_RUNTIME_S


# --- 6 -----------------------------------------------------------------------------

@pytest.mark.criterion(6)
def test_energy_conservation(verdict):
    p = lab_params(m_p=0.457, friction_x=AxisFriction(), friction_y=AxisFriction(),
                   friction_l=AxisFriction(), D_alpha=0.0, D_beta=0.0)
    s = CraneState(x_t=0.25, y_t=0.25, L=0.5, alpha=math.pi / 2 + 0.4, beta=0.3)
    cfg = SimConfig(t_end=10.0, rel_tol=ENERGY_REL_TOL, abs_tol=1e-12, locked_axes=("l",))
    tr = integrate(s, p, cfg)
    E = np.array([mechanical_energy(x, p) for x in tr.states])
    drift = float(np.max(np.abs(E - E[0])) / abs(E[0]))
    hits = [e for e in tr.events if e.kind in (EventKind.LIMIT_MIN, EventKind.LIMIT_MAX)]
    verdict(f"relative drift {drift:.2e} over 10 s (rope locked, trolleys free)")
    assert not hits
    assert drift < ENERGY_DRIFT


# --- 7 -----------------------------------------------------------------------------

def p_errors(campaign):
    truth = p_parameters(campaign["truth"])
    est = campaign["result"].p
    return {k: abs(est[k] - v) / abs(v) for k, v in truth.items() if k in est and v != 0}


def curve_errors(campaign):
    grid = np.linspace(0.0, 0.505, 1001)
    out = {}
    for k, poly in p5_polynomials(campaign["truth"]).items():
        ref = poly(grid)
        out[k] = float(np.max(np.abs(campaign["result"].p5[k](grid) - ref))
                       / (ref.max() - ref.min()))
    return out


@pytest.mark.criterion(7)
@pytest.mark.slow
def test_estimation_round_trip(noiseless_campaign, quantized_campaign, verdict):
    bad = []
    for name, camp, tol in (("noiseless", noiseless_campaign, P_TOL_NOISELESS),
                            ("quantized", quantized_campaign, P_TOL_QUANTIZED)):
        errs = p_errors(camp)
        curves = curve_errors(camp)
        assert len(errs) == len(p_parameters(camp["truth"]))
        worst = max(errs, key=errs.get)
        wc = max(curves, key=curves.get)
        verdict(f"{name}: worst P {worst} {100 * errs[worst]:.3f}%, worst curve {wc} "
                f"{100 * curves[wc]:.2f}% of range, {camp['seconds']:.0f}s")
        bad += [f"{name} {k} {100 * e:.3f}%" for k, e in errs.items() if not e <= tol]
        bad += [f"{name} curve {k} {100 * e:.2f}%" for k, e in curves.items()
                if not e <= CURVE_TOL]
        if not camp["seconds"] < ROUND_TRIP_RUNTIME_S:
            bad.append(f"{name} runtime {camp['seconds']:.0f}s")
    assert not bad, bad


# --- 8 -----------------------------------------------------------------------------

@pytest.mark.criterion(8)
@pytest.mark.slow
def test_decorrelation(quantized_campaign, verdict):
    diag = quantized_campaign["result"].diagnostics
    c12 = abs(diag["rope"]["p12"]["corr"][0][1])
    cx = diag["axis_x"]["motion"]["max_offdiag"]
    cy = diag["axis_y"]["motion"]["max_offdiag"]
    verdict(f"|corr(P1,P2)| {c12:.4f}; axis max off-diagonal x {cx:.4f}, y {cy:.4f}")
    assert c12 <= CORR_MAX
    assert cx <= CORR_MAX and cy <= CORR_MAX


# --- 9 -----------------------------------------------------------------------------

@pytest.mark.criterion(9)
@pytest.mark.slow
def test_active_sampling_desk_scale(verdict):
    truth = lab_params()

    def run():
        return active_sampling(make_oracle(truth, noise=ORACLE_NOISE_V, seed=0),
                               budget=ACTIVE_BUDGET, random_state=0)

    res = run()
    grid = np.linspace(0.0, 0.505, 1001)
    mae = {}
    for k, poly in p5_polynomials(truth).items():
        ref = poly(grid)
        mae[k] = float(np.mean(np.abs(res.models[k].predict(grid) - ref)) / np.mean(ref))
    again = run()
    worst = max(mae, key=mae.get)
    verdict(f"{len(res.positions)} positions ({res.stop_reason}), max std {res.max_std:.4f} V, "
            f"worst MAE {worst} {100 * mae[worst]:.2f}% of mean level")
    assert len(res.positions) + len(res.failures) <= ACTIVE_BUDGET
    assert res.max_std < MAX_STD_V
    assert all(v < MAE_FRACTION for v in mae.values()), mae
    assert again.positions == res.positions


# --- 10 ----------------------------------------------------------------------------

def tone_fit(freq, seconds):
    t = np.arange(int(round(seconds / DT))) * DT
    x = np.sin(2 * np.pi * freq * t)
    y = butter_filtfilt(SampledSignal(x, DT)).values
    mid = slice(x.size // 4, 3 * x.size // 4)
    A = np.column_stack([np.sin(2 * np.pi * freq * t), np.cos(2 * np.pi * freq * t)])[mid]
    (a, b), *_ = np.linalg.lstsq(A, y[mid], rcond=None)
    return math.hypot(a, b), math.degrees(math.atan2(b, a))


@pytest.mark.criterion(10)
def test_signal_chain(verdict):
    gain, phase = tone_fit(0.5, 40.0)
    stop_gain, _ = tone_fit(50.0, 10.0)
    stop_db = -20 * math.log10(stop_gain)
    oracle_db = -10 * math.log10(butterworth_filtfilt_gain(50.0, 3.0, 4, DT))
    model_db = -10 * math.log10(analytic_gain(50.0, FilterSpec(), DT)[0])
    t = np.arange(500) * DT
    q = 0.3 - 1.7 * t + 4.2 * t**2
    v = central_diff_velocity(SampledSignal(q, DT)).values[1:-1]
    a = central_diff_accel(SampledSignal(q, DT)).values[1:-1]
    ev = float(np.max(np.abs(v - (-1.7 + 8.4 * t[1:-1]))))
    ea = float(np.max(np.abs(a - 8.4)))
    verdict(f"0.5 Hz gain {gain:.6f} phase {phase:.4f} deg; 50 Hz {stop_db:.1f} dB measured, "
            f"{oracle_db:.1f} dB analytic; quadratic error vel {ev:.1e}, acc {ea:.1e}")
    assert abs(gain - 1.0) <= PASS_GAIN_TOL
    assert abs(phase) < PASS_PHASE_DEG
    assert oracle_db > STOP_ATTEN_DB and model_db == pytest.approx(oracle_db, rel=1e-9)
    assert stop_db > STOP_ATTEN_DB
    # machine precision relative to the rounding in the differences
    eps = np.finfo(float).eps
    assert ev <= 8 * eps * np.max(np.abs(q)) / (2 * DT)
    assert ea <= 8 * eps * np.max(np.abs(q)) / DT**2
