"""Virtual crane laboratory.

Runs experiments on the hybrid simulator and logs what the real rig would:
encoder-quantized positions and angles plus the commanded voltages.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import AXES, CraneParams, CraneState, ModeVector
from .estimation.breakaway import BreakawaySample, SaturationError, estimate_breakaway
from .records import POSITION_OF, Record, RecordKind
from .reference import LOADED_MASSES, SWING_MASS
from .signals import MultiSine, Ramp, Sum, Zero, from_dict, to_dict
from .sigproc import quantum
from .sim.hybrid import EventKind, SimConfig, integrate

T_S = 0.002
PULSES = 4096
U_MAX = 12.0
EDGE_MARGIN = 0.02
RAMP_RATE = 0.1
FINE_RATE = 0.02
BREAKAWAY_MARGIN = 0.01


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment on the virtual rig.

    ``initial`` overrides fields of the default initial state; ``locked``
    lists axes clamped by their brakes for the whole run.  Ramps stop
    ``post_motion`` seconds after the ramped axis breaks away.
    """

    name: str
    kind: str
    input: object = field(default_factory=Zero)
    m_p: float = 0.0
    duration: float = 10.0
    seed: int = 0
    initial: dict = field(default_factory=dict)
    locked: tuple = ()
    axis: str | None = None
    direction: int = 0
    quantize: bool = True
    voltage_noise: float = 0.0
    post_motion: float = 0.6
    max_step: float = 0.02

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.m_p < 0:
            raise ValueError("payload mass must be non-negative")
        if self.kind not in RecordKind.ALL:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        object.__setattr__(self, "locked", tuple(self.locked))

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["input"] = to_dict(self.input)
        d["locked"] = list(self.locked)
        d["initial"] = dict(self.initial)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise ValueError(f"unknown experiment key(s): {sorted(extra)}")
        if "input" in d:
            d["input"] = from_dict(d["input"])
        return cls(**d)


def initial_state(spec: ExperimentSpec) -> CraneState:
    base = dict(x_t=0.2525, y_t=0.2525, L=0.35 if spec.kind in (
        RecordKind.LOADED_ROPE, RecordKind.RICH_MOTION) or spec.axis == "l" else 0.5)
    base.update(spec.initial)
    return CraneState(**base)


def _quanta(params: CraneParams) -> dict:
    return {"x_t": quantum(PULSES, params.R_x), "y_t": quantum(PULSES, params.R_y),
            "L": quantum(PULSES, params.R_l), "alpha": quantum(PULSES, 1.0),
            "beta": quantum(PULSES, 1.0)}


def simulate_experiment(spec: ExperimentSpec, params: CraneParams):
    """Ground-truth trajectory on the sampling grid (velocities included)."""
    params = params.replace(m_p=spec.m_p)
    cfg = SimConfig(t_end=spec.duration, output_dt=T_S, max_step=spec.max_step,
                    locked_axes=spec.locked, u_sat=U_MAX, rel_tol=1e-9, abs_tol=1e-11)
    state = initial_state(spec)
    if spec.kind in (RecordKind.QUASISTATIC_RAMP, RecordKind.BREAKAWAY_AT) and spec.axis:
        starts = (EventKind.BREAKAWAY_POS, EventKind.BREAKAWAY_NEG)
        first = integrate(state, params, cfg, spec.input,
                          stop_when=lambda ev: ev.axis == spec.axis and ev.kind in starts)
        g = first.grid()
        broke = [e for e in first.events if e.axis == spec.axis and e.kind in starts]
        if not broke or len(g) < 2:
            return g
        te = broke[0].time
        keep = len(g) - 1
        t_g = float(g.t[keep])
        end = min(te + spec.post_motion, spec.duration)
        if end - t_g <= T_S:
            return g
        rest = integrate(g.states[keep], params, replace(cfg, t_end=end - t_g), spec.input,
                         mode=ModeVector(*g.modes[keep]), t0=t_g).grid()
        return _join(g, keep, rest)
    return integrate(state, params, cfg, spec.input).grid()


def _join(a, keep, b):
    from .sim.hybrid import Trajectory
    return Trajectory(np.concatenate([a.t[:keep], b.t]),
                      np.vstack([a.states[:keep], b.states]),
                      np.vstack([a.modes[:keep], b.modes]),
                      np.vstack([a.inputs[:keep], b.inputs]),
                      np.ones(keep + len(b), dtype=bool), a.events + b.events, b.stats)


def to_record(spec: ExperimentSpec, traj, params: CraneParams) -> Record:
    rng = np.random.default_rng(spec.seed)
    n = len(traj)
    t = T_S * np.arange(n)
    cols = {}
    quanta = _quanta(params)
    for name in ("x_t", "y_t", "L", "alpha", "beta"):
        v = traj[name].copy()
        if spec.quantize:
            q = quanta[name]
            v = np.floor(v / q + 1e-9) * q
        cols[name] = v
    for name in ("u_x", "u_y", "u_l"):
        u = traj[name].copy()
        if spec.voltage_noise > 0:
            u = u + rng.normal(0.0, spec.voltage_noise, n)
        cols[name] = u
    meta = {"kind": spec.kind, "m_p": spec.m_p, "locked": list(spec.locked),
            "quantized": spec.quantize, "pulses_per_rev": PULSES, "seed": spec.seed}
    if spec.axis:
        meta["axis"] = spec.axis
    if spec.direction:
        meta["direction"] = spec.direction
    return Record(spec.name, t, cols, meta)


def run_experiment(spec: ExperimentSpec, true_params: CraneParams) -> Record:
    return to_record(spec, simulate_experiment(spec, true_params), true_params)


def peak_excursion(traj, axes, params: CraneParams) -> float:
    """Smallest remaining distance to a limit over the run (negative if crossed)."""
    worst = math.inf
    for axis in axes:
        lo, hi = params.limits[axis]
        p = traj[POSITION_OF[axis]]
        worst = min(worst, float(np.min(p) - lo), float(hi - np.max(p)))
    return worst


def tune_amplitude(make_spec, params: CraneParams, axes, margin: float = EDGE_MARGIN,
                   lo: float = 0.5, hi: float = 1.0, iterations: int = 10) -> float:
    """Largest scale factor in ``[lo, hi]`` keeping ``axes`` ``margin`` inside limits.

    ``make_spec(scale)`` builds the experiment; bisection on the peak
    excursion assumes it grows with the scale.
    """
    def ok(s):
        traj = simulate_experiment(make_spec(s), params)
        return peak_excursion(traj, axes, params) >= margin

    if ok(hi):
        return hi
    if not ok(lo):
        raise ValueError("motion leaves the safe range even at the smallest amplitude")
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def ramp_spec(axis: str, direction: int, position=None, name=None, quantize=True,
              rate: float = RAMP_RATE, start: float = 0.0, voltage_noise: float = 0.0,
              seed: int = 0, kind: str = RecordKind.BREAKAWAY_AT,
              u_stop: float = U_MAX) -> ExperimentSpec:
    """Ramp on one axis with the other two braked and no payload.

    The voltage jumps to ``start`` after 0.5 s and then rises at ``rate``.
    """
    initial = {}
    if position is not None:
        initial[POSITION_OF[axis]] = float(position)
    locked = tuple(a for a in AXES if a != axis)
    duration = 0.5 + max(u_stop - start, 0.1) / rate + 1.0
    name = name or f"ramp_{axis}{'+' if direction > 0 else '-'}"
    return ExperimentSpec(name, kind, Ramp(axis, rate, direction, 0.5, start), 0.0,
                          duration, seed, initial, locked, axis, direction, quantize,
                          voltage_noise, post_motion=2.0 * math.sqrt(0.1 / rate),
                          max_step=0.05)


def measure_breakaway(axis: str, direction: int, position, true_params: CraneParams,
                      quantize: bool = True, coarse_rate: float = 0.5,
                      fine_rate: float = FINE_RATE, backoff: float = 0.3,
                      seed: int = 0) -> BreakawaySample:
    """Two-stage ramp test: a fast ramp finds the neighbourhood, a slow
    ramp starting ``backoff`` volts below it pins the breakaway down."""
    q = _quanta(true_params)[POSITION_OF[axis]] if quantize else None
    coarse = run_experiment(ramp_spec(axis, direction, position, quantize=quantize,
                                      rate=coarse_rate, seed=seed), true_params)
    guess = estimate_breakaway(coarse, axis, q, refine=False).voltage
    start = max(guess - backoff, 0.0)
    for _ in range(4):
        spec = ramp_spec(axis, direction, position, quantize=quantize, rate=fine_rate,
                         start=start, seed=seed, u_stop=guess + 0.5)
        rec = run_experiment(spec, true_params)
        sample = estimate_breakaway(rec, axis, q)
        # motion right at the initial jump means the start was too high
        if sample.voltage > start + 0.5 * backoff * 0.1:
            return sample
        start = max(start - backoff, 0.0)
    return sample


def breakaway_oracle(x: float, y: float, true_params: CraneParams, noise: float = 0.0,
                     rng=None, quantize: bool = True, method: str = "record"):
    """The four breakaway voltages at trolley position ``(x, y)``.

    ``method="record"`` runs two-stage ramp tests on quantized records and
    the breakaway estimator; ``method="event"`` reads the onset off the
    simulator's event log.  Gaussian noise of std ``noise`` is added to
    every value.  Keys are ``(axis, direction)``.
    """
    for axis, p in (("x", x), ("y", y)):
        lo, hi = true_params.limits[axis]
        if not lo <= p <= hi:
            raise ValueError(f"{axis} = {p} outside [{lo}, {hi}]")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    out = {}
    for axis, p in (("x", x), ("y", y)):
        for direction in (1, -1):
            if method == "event":
                sample = _event_breakaway(ramp_spec(axis, direction, p), true_params, p)
            else:
                sample = measure_breakaway(axis, direction, p, true_params, quantize)
            v = sample.voltage + (rng.normal(0.0, noise) if noise > 0 else 0.0)
            out[(axis, direction)] = BreakawaySample(p, direction, max(v, 0.0))
    return out


def _event_breakaway(spec, params, position):
    params = params.replace(m_p=spec.m_p)
    cfg = SimConfig(t_end=spec.duration, output_dt=1.0, max_step=0.5,
                    locked_axes=spec.locked, u_sat=U_MAX)
    starts = (EventKind.BREAKAWAY_POS, EventKind.BREAKAWAY_NEG)
    traj = integrate(initial_state(spec), params, cfg, spec.input,
                     stop_when=lambda ev: ev.axis == spec.axis and ev.kind in starts)
    hits = [e for e in traj.events if e.axis == spec.axis and e.kind in starts]
    if not hits:
        raise SaturationError(f"no breakaway on axis {spec.axis}")
    u = spec.input(hits[0].time)[AXES.index(spec.axis)]
    return BreakawaySample(position, spec.direction, abs(u))


# --- default experiment suite -------------------------------------------

def _peak_scaled(axis, scale, freqs, weights, phases, offset=0.0):
    # peak of the unscaled sum is at most sum(weights); keep clear of U_MAX
    amp = (U_MAX - 1.0 - abs(offset)) * scale / sum(weights)
    return MultiSine(axis, amp, freqs, weights, phases, offset=offset, fade=1.0)


def rope_rich_input(scale: float, offset: float = 0.0) -> MultiSine:
    return _peak_scaled("l", scale, (0.3, 0.7, 1.1), (1.0, 0.6, 0.4), (0.0, 1.3, 2.1), offset)


def axis_rich_input(axis: str, scale: float) -> MultiSine:
    if axis == "x":
        return _peak_scaled("x", scale, (0.2, 0.55, 0.9), (1.0, 0.5, 0.3), (0.0, 0.7, 1.9))
    return _peak_scaled("y", scale, (0.25, 0.6, 0.95), (1.0, 0.5, 0.3), (0.4, 2.0, 0.3))


def default_suite(true_params: CraneParams, seed: int = 0, quantize: bool = True,
                  rich_duration: float = 40.0, swing_duration: float = 30.0):
    """Experiment specs for a complete identification campaign."""
    specs = []
    for d in (1, -1):
        specs.append(replace(ramp_spec("l", d, name=f"quasistatic_l{'+' if d > 0 else '-'}",
                                       quantize=quantize, seed=seed,
                                       kind=RecordKind.QUASISTATIC_RAMP),
                             initial={"L": 0.35}))

    def rope(scale, m_p=0.0, name="rope_noload"):
        offset = -m_p * true_params.g / true_params.K_l
        kind = RecordKind.LOADED_ROPE if m_p > 0 else RecordKind.RICH_MOTION
        return ExperimentSpec(name, kind, rope_rich_input(scale, offset), m_p, rich_duration,
                              seed, {"L": 0.35, "alpha": math.pi / 2}, ("x", "y"), "l",
                              quantize=quantize)

    s = tune_amplitude(lambda k: rope(k), true_params, ("l",))
    specs.append(rope(s))
    for m in LOADED_MASSES:
        name = f"rope_loaded_{int(round(m * 1000)):03d}g"
        s = tune_amplitude(lambda k, m=m, name=name: rope(k, m, name), true_params, ("l",))
        specs.append(rope(s, m, name))

    def rich(scale):
        u = Sum((axis_rich_input("x", scale), axis_rich_input("y", scale)))
        return ExperimentSpec("rich_motion", RecordKind.RICH_MOTION, u, 0.0, rich_duration,
                              seed, {}, ("l",), None, quantize=quantize)

    s = tune_amplitude(rich, true_params, ("x", "y"))
    specs.append(rich(s))

    for axis, other in (("x", "y"), ("y", "x")):
        def loaded(scale, axis=axis, other=other):
            return ExperimentSpec(f"rich_{axis}_loaded", RecordKind.LOADED_AXIS,
                                  axis_rich_input(axis, scale), SWING_MASS, rich_duration,
                                  seed, {"L": 0.5, "alpha": math.pi / 2}, (other, "l"), axis,
                                  quantize=quantize)
        s = tune_amplitude(loaded, true_params, (axis,))
        specs.append(loaded(s))

    swings = (("free_swing_alpha", math.pi / 2 + 0.3, 0.0),
              ("free_swing_beta", math.pi / 2, 0.3),
              ("free_swing_both", math.pi / 2 + 0.2, 0.2))
    for name, a0, b0 in swings:
        specs.append(ExperimentSpec(name, RecordKind.FREE_SWING, Zero(), SWING_MASS,
                                    swing_duration, seed, {"L": 0.5, "alpha": a0, "beta": b0},
                                    ("x", "y", "l"), quantize=quantize))
    return specs


def known_quantities(params: CraneParams) -> dict:
    """What the experimenter knows without identification: masses, radii, limits."""
    keys = ("m_r", "m_t", "g", "R_x", "R_y", "R_l", "x_min", "x_max", "y_min", "y_max",
            "l_min", "l_max")
    return {k: getattr(params, k) for k in keys}


def synthesize_dataset(true_params: CraneParams, seed: int = 0, quantize: bool = True,
                       breakaway_noise: float = 0.0, budget: int = 25,
                       var_threshold: float = 0.01**2, specs=None, workers: int = 1):
    """Records of the default suite plus actively sampled breakaway rows.

    Returns ``(records, breakaway_rows, manifest_extra)``.
    """
    from .estimation.active import active_sampling, dataset_rows, make_oracle

    specs = list(specs) if specs is not None else default_suite(true_params, seed, quantize)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as pool:
            records = list(pool.map(run_experiment, specs, [true_params] * len(specs)))
    else:
        records = [run_experiment(s, true_params) for s in specs]
    domains = {a: true_params.limits[a] for a in "xy"}
    oracle = make_oracle(true_params, breakaway_noise, seed, quantize)
    active = active_sampling(oracle, domains, budget=budget, var_threshold=var_threshold,
                             random_state=seed)
    extra = {"seed": seed, "known": known_quantities(true_params),
             "active_sampling": {"stop_reason": active.stop_reason,
                                 "positions": [list(p) for p in active.positions],
                                 "max_std": active.max_std, "failures": active.failures},
             "specs": [s.to_dict() for s in specs]}
    return records, dataset_rows(active), extra
