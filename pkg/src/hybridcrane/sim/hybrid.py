"""27-mode hybrid automaton, event-localizing driver and tanh baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from ..core import (AXES, POS_INDEX, STATE_FIELDS, VEL_INDEX, CraneParams, CraneState,
                    Diagnostics, InvalidStateError, Mode, ModeVector, _rhs, _solve)
from .integrator import (DenseStep, dp_step, error_norm, initial_step, step_factor)

InputSignal = Callable[[float], Sequence[float]]


class SimulationError(RuntimeError):
    pass


class StiffnessError(SimulationError):
    def __init__(self, t, axis, h):
        super().__init__(f"step size {h:.3g} s underflow at t={t:.9g} s (axis {axis})")
        self.t, self.axis, self.h = t, axis, h


class ChatteringError(SimulationError):
    def __init__(self, t, axis, state, mode):
        dump = ", ".join(f"{n}={v:.17g}" for n, v in zip(STATE_FIELDS, state))
        super().__init__(f"chattering on axis {axis} at t={t:.9g} s; "
                         f"mode={tuple(int(q) for q in mode)}; state: {dump}")
        self.t, self.axis = t, axis


class EventKind(str, Enum):
    VELOCITY_ZERO = "VELOCITY_ZERO"
    BREAKAWAY_POS = "BREAKAWAY_POS"
    BREAKAWAY_NEG = "BREAKAWAY_NEG"
    LIMIT_MIN = "LIMIT_MIN"
    LIMIT_MAX = "LIMIT_MAX"


_POST_MODE = {
    EventKind.VELOCITY_ZERO: Mode.REST,
    EventKind.LIMIT_MIN: Mode.REST,
    EventKind.LIMIT_MAX: Mode.REST,
    EventKind.BREAKAWAY_POS: Mode.POS,
    EventKind.BREAKAWAY_NEG: Mode.NEG,
}


@dataclass(frozen=True)
class GuardEvent:
    time: float
    axis: str
    kind: EventKind
    pre_mode: ModeVector
    post_mode: ModeVector


@dataclass(frozen=True)
class SimConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    event_time_tol: float = 1e-9
    max_step: float = 0.01
    t_end: float = 10.0
    output_dt: float = 1e-3
    model: str = "hybrid"
    k: float = 1000.0
    u_sat: float | None = None
    locked_axes: tuple[str, ...] = ()
    max_transitions: int = 3
    min_step: float = 1e-13

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0 or self.event_time_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.t_end <= 0 or self.output_dt <= 0 or self.max_step <= 0:
            raise ValueError("t_end, output_dt and max_step must be positive")
        if self.model not in ("hybrid", "tanh"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.model == "tanh" and not self.k > 0:
            raise ValueError("tanh gain k must be positive")
        object.__setattr__(self, "locked_axes", tuple(self.locked_axes))
        for a in self.locked_axes:
            if a not in AXES:
                raise ValueError(f"unknown axis {a!r}")

    @property
    def locked(self) -> tuple[bool, bool, bool]:
        return tuple(a in self.locked_axes for a in AXES)


@dataclass
class Trajectory:
    t: np.ndarray
    states: np.ndarray
    modes: np.ndarray
    inputs: np.ndarray
    on_grid: np.ndarray
    events: list[GuardEvent] = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return self.t.size

    def __getitem__(self, name: str) -> np.ndarray:
        if name == "t":
            return self.t
        if name in STATE_FIELDS:
            return self.states[:, STATE_FIELDS.index(name)]
        if name in ("q_x", "q_y", "q_l"):
            return self.modes[:, ("q_x", "q_y", "q_l").index(name)]
        if name in ("u_x", "u_y", "u_l"):
            return self.inputs[:, ("u_x", "u_y", "u_l").index(name)]
        raise KeyError(name)

    def grid(self) -> "Trajectory":
        """Samples on the uniform output grid only (event instants dropped)."""
        m = self.on_grid
        return Trajectory(self.t[m], self.states[m], self.modes[m], self.inputs[m],
                          self.on_grid[m], list(self.events), dict(self.stats))


def zero_input(t: float):
    return (0.0, 0.0, 0.0)


def _saturated(u: InputSignal, u_sat):
    if u_sat is None:
        return lambda t: tuple(float(v) for v in u(t))

    def wrapped(t):
        return tuple(min(max(float(v), -u_sat), u_sat) for v in u(t))
    return wrapped


def guard_check(state, u, mode: ModeVector, params: CraneParams,
                locked: Sequence[bool] = (False, False, False)):
    """Per-axis event kind that fires at this instant, or ``None``.

    REST axes break away when the net force strictly exceeds the Coulomb
    level for that direction (never into a limit it rests on).  Moving
    axes stop on a limit, a reversed velocity, or zero velocity with an
    acceleration that does not continue the motion.
    """
    s = np.asarray(state.as_array() if isinstance(state, CraneState) else state,
                   dtype=float).tolist()
    codes = tuple(int(q) for q in mode)
    _, acc, _, net = _solve(s, tuple(u), codes, params._packed, None, tuple(locked), None)
    out = []
    for i, axis in enumerate(AXES):
        if locked[i]:
            out.append(None)
            continue
        pos, vel = s[POS_INDEX[axis]], s[VEL_INDEX[axis]]
        lo, hi = params.limits[axis]
        fr = params.friction(axis)
        q = codes[i]
        kind = None
        if q == 2:
            if net[i] > fr.C_pos(pos) and pos < hi:
                kind = EventKind.BREAKAWAY_POS
            elif -net[i] > fr.C_neg(pos) and pos > lo:
                kind = EventKind.BREAKAWAY_NEG
        elif q == 3:
            if pos >= hi:
                kind = EventKind.LIMIT_MAX
            elif vel < 0 or (vel == 0 and acc[i] <= 0):
                kind = EventKind.VELOCITY_ZERO
        else:
            if pos <= lo:
                kind = EventKind.LIMIT_MIN
            elif vel > 0 or (vel == 0 and acc[i] >= 0):
                kind = EventKind.VELOCITY_ZERO
        out.append(kind)
    return tuple(out)


def apply_transition(kind: EventKind, axis: str, state, mode: ModeVector,
                     params: CraneParams):
    """Reset map of one axis; returns the new ``(state, mode)``."""
    s = np.array(state.as_array() if isinstance(state, CraneState) else state, dtype=float)
    ip, iv = POS_INDEX[axis], VEL_INDEX[axis]
    lo, hi = params.limits[axis]
    if kind in (EventKind.VELOCITY_ZERO, EventKind.LIMIT_MIN, EventKind.LIMIT_MAX):
        s[iv] = 0.0
    if kind == EventKind.LIMIT_MIN:
        s[ip] = lo
    elif kind == EventKind.LIMIT_MAX:
        s[ip] = hi
    return s, mode.with_axis(axis, _POST_MODE[kind])


def _guard_values(s, u, codes, params, locked):
    """Continuous guard functions; an event fires when one turns positive."""
    net = None
    vals = []
    for i, axis in enumerate(AXES):
        if locked[i]:
            vals.append(())
            continue
        pos, vel = s[POS_INDEX[axis]], s[VEL_INDEX[axis]]
        lo, hi = params.limits[axis]
        q = codes[i]
        if q == 2:
            if net is None:
                net = _solve(s, u, codes, params._packed, None, locked, None)[3]
            fr = params.friction(axis)
            gp = net[i] - fr.C_pos(pos) if pos < hi else -math.inf
            gn = -net[i] - fr.C_neg(pos) if pos > lo else -math.inf
            vals.append(((EventKind.BREAKAWAY_POS, gp), (EventKind.BREAKAWAY_NEG, gn)))
        elif q == 3:
            vals.append(((EventKind.VELOCITY_ZERO, -vel), (EventKind.LIMIT_MAX, pos - hi)))
        else:
            vals.append(((EventKind.VELOCITY_ZERO, vel), (EventKind.LIMIT_MIN, lo - pos)))
    return vals


def integrate(initial_state, params: CraneParams, config: SimConfig = SimConfig(),
              u: InputSignal = zero_input, mode: ModeVector | None = None,
              t0: float = 0.0, stop_when: Callable[[GuardEvent], bool] | None = None,
              ) -> Trajectory:
    """Simulate the crane from ``initial_state`` until ``t0 + config.t_end``.

    ``config.model`` selects the hybrid automaton or the smooth tanh model.
    The initial mode is inferred from the velocity signs unless given.
    ``stop_when`` ends the run right after the first matching event.
    """
    y = np.array(initial_state.as_array() if isinstance(initial_state, CraneState)
                 else initial_state, dtype=float)
    if y.shape != (10,) or not np.all(np.isfinite(y)):
        raise InvalidStateError("initial state must hold 10 finite values")
    locked = config.locked
    for i, axis in enumerate(AXES):
        if locked[i]:
            y[VEL_INDEX[axis]] = 0.0
    hybrid = config.model == "hybrid"
    tanh_k = None if hybrid else float(config.k)
    uf = _saturated(u, config.u_sat)
    if mode is None:
        mode = ModeVector.from_state(y)
    if not hybrid:
        mode = ModeVector(*(Mode.REST if locked[i] else Mode.POS for i in range(3)))
    diag = Diagnostics()
    rtol, atol = config.rel_tol, config.abs_tol
    t_end = t0 + config.t_end
    dt = config.output_dt
    n_grid = int(math.floor(config.t_end / dt + 1e-9))

    out_t, out_y, out_q, out_g = [], [], [], []
    events: list[GuardEvent] = []
    stats = {"steps": 0, "rejected": 0, "fev": 0}

    def record(t, state, codes, grid):
        out_t.append(np.atleast_1d(t))
        st = np.atleast_2d(np.array(state, dtype=float))
        out_y.append(st)
        out_q.append(np.tile(codes, (st.shape[0], 1)))
        out_g.append(np.full(st.shape[0], grid))

    def record_grid(dense, upto, inclusive):
        nonlocal next_grid
        last = (upto - t0) / dt
        n_hi = int(math.floor(last + 1e-9)) if inclusive else int(math.ceil(last - 1e-9)) - 1
        n_hi = min(n_hi, n_grid)
        if n_hi >= next_grid:
            tg = t0 + dt * np.arange(next_grid, n_hi + 1)
            record(tg, dense.many(tg), codes, True)
            next_grid = n_hi + 1

    def make_fun(codes):
        def fun(t, s):
            stats["fev"] += 1
            d = _rhs(s.tolist(), uf(t), codes, params, tanh_k, locked, diag)
            res = np.array(d)
            if not np.all(np.isfinite(res)):
                raise InvalidStateError(f"non-finite derivative at t={t:.9g} s")
            return res
        return fun

    def settle(t, y, mode):
        """Apply chained transitions at one instant."""
        counts = [0, 0, 0]
        while True:
            fired = guard_check(y, uf(t), mode, params, locked)
            if not any(fired):
                return y, mode, False
            stop = False
            for i, kind in enumerate(fired):
                if kind is None:
                    continue
                axis = AXES[i]
                counts[i] += 1
                if counts[i] > config.max_transitions:
                    raise ChatteringError(t, axis, y, mode)
                pre = mode
                y, mode = apply_transition(kind, axis, y, mode, params)
                ev = GuardEvent(t, axis, kind, pre, mode)
                events.append(ev)
                if stop_when is not None and stop_when(ev):
                    stop = True
            if stop:
                return y, mode, True

    t = t0
    stopped = False
    if hybrid:
        y, mode, stopped = settle(t, y, mode)
    codes = tuple(int(q) for q in mode)
    record(t, y, codes, True)
    next_grid = 1
    fun = make_fun(codes)
    f = fun(t, y)
    h = initial_step(fun, t, y, f, rtol, atol, config.max_step)
    g_prev = None

    while not stopped and t < t_end and t_end - t > 1e-12 * max(1.0, abs(t_end)):
        h = min(h, config.max_step, t_end - t)
        if h < config.min_step:
            idx = int(np.argmax(np.abs(err) / (atol + rtol * np.abs(y)))) if stats["steps"] else 0
            raise StiffnessError(t, _component_axis(idx), h)
        y_new, f_new, K, err = dp_step(fun, t, y, f, h)
        en = error_norm(err, y, y_new, rtol, atol)
        if not np.isfinite(en):
            raise InvalidStateError(f"non-finite state near t={t:.9g} s")
        if en > 1.0:
            stats["rejected"] += 1
            h *= max(0.2, 0.9 * en ** -0.2)
            if h < config.min_step:
                idx = int(np.argmax(np.abs(err) / (atol + rtol * np.abs(y))))
                raise StiffnessError(t, _component_axis(idx), h)
            continue
        stats["steps"] += 1
        dense = DenseStep(t, h, y, K)
        t_new = t + h

        hit = None
        if hybrid:
            if g_prev is None:
                g_prev = _guard_values(y.tolist(), uf(t), codes, params, locked)
            g0 = g_prev
            g1 = _guard_values(y_new.tolist(), uf(t_new), codes, params, locked)
            for i in range(3):
                for (kind, a), (_, b) in zip(g0[i], g1[i]):
                    if b > 0 and a <= 0:
                        te = _localize(dense, uf, codes, params, locked, i, kind,
                                       t, t_new, config.event_time_tol)
                        if hit is None or te < hit[0]:
                            hit = (te, i, kind)
        if hit is None:
            record_grid(dense, t_new, True)
            t, y, f = t_new, y_new, f_new
            g_prev = g1 if hybrid else None
            h *= step_factor(en)
            continue

        te = hit[0]
        record_grid(dense, te, False)
        ye = dense(te)
        for i in range(3):
            if codes[i] == 2:
                ye[POS_INDEX[AXES[i]]] = y[POS_INDEX[AXES[i]]]
                ye[VEL_INDEX[AXES[i]]] = 0.0
        kind, axis = hit[2], AXES[hit[1]]
        pre = mode
        ye, mode = apply_transition(kind, axis, ye, mode, params)
        ev = GuardEvent(te, axis, kind, pre, mode)
        events.append(ev)
        stopped = stop_when is not None and stop_when(ev)
        if not stopped:
            ye, mode, stopped = settle(te, ye, mode)
        codes = tuple(int(q) for q in mode)
        on_grid = next_grid <= n_grid and abs(t0 + next_grid * dt - te) <= 1e-12
        if on_grid:
            next_grid += 1
        record(te, ye, codes, on_grid)
        t, y = te, ye
        fun = make_fun(codes)
        f = fun(t, y)
        g_prev = None
        h = max(h * step_factor(en), 10 * config.event_time_tol)

    stats["singular_beta"] = diag.singular_beta
    ts = np.concatenate(out_t)
    inputs = np.array([uf(ti) for ti in ts.tolist()], dtype=float).reshape(-1, 3)
    return Trajectory(ts, np.concatenate(out_y), np.concatenate(out_q).astype(int),
                      inputs, np.concatenate(out_g).astype(bool), events, stats)


def _component_axis(idx: int) -> str:
    return ("x", "x", "y", "y", "l", "l", "alpha", "alpha", "beta", "beta")[idx]


def _localize(dense, uf, codes, params, locked, axis_idx, kind, lo, hi, tol):
    """Bisection on the continuous extension; returns the first time the
    guard is positive, within ``tol`` of the crossing."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        vals = _guard_values(dense(mid).tolist(), uf(mid), codes, params, locked)[axis_idx]
        g = dict(vals)[kind]
        if g > 0:
            hi = mid
        else:
            lo = mid
    return hi
