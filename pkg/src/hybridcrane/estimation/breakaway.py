"""Breakaway voltage from slow voltage-ramp records."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from ..records import INPUT_OF, POSITION_OF, Record


class SaturationError(RuntimeError):
    """The ramp ended without the axis moving."""


@dataclass(frozen=True)
class BreakawaySample:
    position: float
    direction: int
    voltage: float

    def __post_init__(self):
        if self.direction not in (-1, 1):
            raise ValueError("direction must be +1 or -1")
        if not self.voltage >= 0:
            raise ValueError("breakaway voltage magnitude must be non-negative")


def _onset_shape(s, tau):
    """Displacement of a first-order lag driven by a unit ramp from ``s = 0``."""
    s = np.maximum(s, 0.0)
    return 0.5 * s * s - tau * s - tau * tau * np.expm1(-s / tau)


def estimate_breakaway(record: Record, axis: str, quantum: float | None = None,
                       threshold_quanta: float = 2.0, refine: bool = True) -> BreakawaySample:
    """Ramp voltage at the instant the axis starts to move.

    Motion is detected once the position leaves its initial value by more
    than ``threshold_quanta`` encoder steps.  With ``refine`` the onset is
    then located by fitting a ramp-driven first-order lag to the early
    displacement, which removes the detection delay.
    """
    t = record.t
    pos = record[POSITION_OF[axis]]
    u = record[INPUT_OF[axis]]
    q = quantum if quantum else 1e-9
    dev = pos - pos[0]
    moved = np.nonzero(np.abs(dev) > threshold_quanta * q)[0]
    if moved.size == 0:
        raise SaturationError(f"no motion on axis {axis} up to u = {u[-1]:.4g} V")
    i_det = int(moved[0])
    direction = 1 if dev[i_det] > 0 else -1
    t_on = t[i_det]

    if refine:
        t_on = _refine_onset(t, direction * dev, i_det, q, quantum is not None)

    # the ramp is fitted as a line so that logging noise does not enter
    win = (t > t_on - 2.0) & (t <= t[i_det]) & (np.abs(u) > 0)
    if np.count_nonzero(win) >= 2:
        slope, icpt = np.polyfit(t[win], u[win], 1)
        volt = slope * t_on + icpt
    else:
        volt = float(np.interp(t_on, t, u))
    return BreakawaySample(float(pos[0]), direction, abs(float(volt)))


def _refine_onset(t, d, i_det, q, quantized):
    dt = t[1] - t[0]
    span = max(20 * q, 1e-4)
    after = np.nonzero(d[i_det:] > span)[0]
    i_end = i_det + (int(after[0]) if after.size else d.size - 1 - i_det)
    i_end = min(i_end, i_det + int(round(3.0 / dt)), d.size - 1)
    # crude start: vertex of a parabola through the post-detection samples
    sl = slice(i_det, i_end + 1)
    if i_end - i_det >= 3:
        A, B, _ = np.polyfit(t[sl] - t[i_det], d[sl], 2)
        t_guess = t[i_det] + (-B / (2 * A) if A > 0 else 0.0)
        t_guess = min(t_guess, t[i_det])
    else:
        t_guess = t[i_det]
    i_start = max(0, int(np.searchsorted(t, t_guess - 1.0)))
    ts, ds = t[i_start:i_end + 1], d[i_start:i_end + 1]
    if quantized:
        # a count change means the true position crossed a count boundary
        # during the preceding sample interval; those instants are far
        # better data than the staircase itself
        k = np.nonzero(np.diff(ds) != 0)[0] + 1
        if k.size >= 5:
            ts, ds = ts[k] - 0.5 * dt, np.maximum(ds[k], ds[k - 1])
    if ts.size < 5:
        return float(t_guess)
    scale_t = max(t[i_end] - t_guess, dt)
    c0 = max(d[i_end] - d[i_start], q) / (0.5 * scale_t**2)

    def resid(z):
        p0, c, t0, tau = z
        return p0 + c * _onset_shape(ts - t0, tau) - ds

    lo = [-np.inf, 0.0, t[i_start], 1e-6]
    hi = [np.inf, np.inf, t[i_det], 2.0]
    # started on its upper bound the onset can stall there, so try a few
    # instants before the detection as well
    best = None
    for back in (0.0, 0.005, 0.02, 0.1):
        t0 = float(np.clip(min(t_guess, t[i_det] - back), lo[2], hi[2]))
        z0 = [float(d[i_start]), c0, t0, 0.02]
        try:
            res = least_squares(resid, z0, bounds=(lo, hi), x_scale=[q, c0, dt, 0.01],
                                xtol=1e-12, ftol=1e-12)
        except ValueError:
            continue
        if res.success and (best is None or res.cost < best.cost):
            best = res
    return float(best.x[2]) if best is not None else float(t_guess)


def average_breakaway(samples) -> BreakawaySample:
    """Mean of repeated trials at one position and direction."""
    samples = list(samples)
    if not samples:
        raise ValueError("no samples")
    if len({s.direction for s in samples}) != 1:
        raise ValueError("trials disagree on direction")
    return BreakawaySample(float(np.mean([s.position for s in samples])),
                           samples[0].direction, float(np.mean([s.voltage for s in samples])))
