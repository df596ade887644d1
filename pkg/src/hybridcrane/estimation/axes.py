"""Rail (x) and trolley (y) axis identification.

Unloaded motion gives the combined inertia coefficient ``M/K`` and the
direction-split viscous terms::

    u = (M/K) a + P7(+) v+ + P7(-) v- + P5(pos, dir)

with ``M`` the full moving mass.  Only the sum ``M/K`` is visible there, so
the gain ``P6 = 1/K`` comes from a record with a swinging payload, where
the payload's own acceleration enters with coefficient ``P6 m_p``::

    u = (M/K) a + P6 m_p a_payload + P7 v + P5
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ..core import Polynomial4
from ..records import Record
from ..sigproc import SampledSignal, butter_filtfilt, central_diff_accel
from .breakaway import BreakawaySample
from .common import AxisSignals, Preprocessing, axis_signals, lowpass, trim_edges
from .gpr import GaussianProcessFriction, fit_poly4
from .ls import LsResult, RegressionProblem, ls_solve

DOMAINS = {"x": (0.0, 0.505), "y": (0.0, 0.505)}
# a wider exclusion window around reversals than the rope stage uses; the
# small payload-acceleration regressor of P6 is sensitive to reversal errors
AXIS_WINDOW = 0.25
AXIS_PREPROCESSING = Preprocessing(window_s=AXIS_WINDOW)


@dataclass(frozen=True)
class P5Map:
    """GPR model of one breakaway map and its quartic reduction."""

    key: str
    gpr: GaussianProcessFriction
    poly: Polynomial4
    max_dev: float
    n_samples: int


def estimate_p5(samples, domains=DOMAINS, random_state=0) -> dict:
    """Fit the four breakaway maps from ``(axis, BreakawaySample)`` pairs."""
    groups = {}
    for axis, s in samples:
        groups.setdefault(f"{axis}{'+' if s.direction > 0 else '-'}", []).append(s)
    out = {}
    for key in ("x+", "x-", "y+", "y-"):
        pts = groups.get(key, [])
        if len(pts) < 3:
            raise ValueError(f"need at least 3 breakaway samples for {key}, got {len(pts)}")
        dom = domains[key[0]]
        gpr = GaussianProcessFriction(domain=dom, random_state=random_state).fit(
            [p.position for p in pts], [p.voltage for p in pts])
        poly, dev = fit_poly4(gpr, dom)
        out[key] = P5Map(key, gpr, poly, dev, len(pts))
    return out


@dataclass(frozen=True)
class AxisResult:
    axis: str
    inertia: float          # M / K
    P7_pos: float
    P7_neg: float
    P6: float | None
    motion: LsResult
    gain: LsResult | None = None
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        a = self.axis
        d = {f"M{a}/K{a}": self.inertia, f"P7{a}+": self.P7_pos, f"P7{a}-": self.P7_neg}
        if self.P6 is not None:
            d[f"P6{a}"] = self.P6
        return d


def _friction_regressor(sig: AxisSignals, p_pos: Polynomial4, p_neg: Polynomial4,
                        hold, min_speed):
    """Coulomb voltage: +P5(+) moving forward, -P5(-) backward, the held
    voltage (clipped to the breakaway band) while stuck."""
    v = np.nan_to_num(sig.vel)
    cp, cn = p_pos(sig.pos), p_neg(sig.pos)
    stuck = np.clip(hold, -cn, cp)
    return np.where(np.abs(v) < min_speed, stuck, np.where(v > 0, cp, -cn))


def _motion_rows(sig, dt, pre, p_pos, p_neg, hold):
    m = trim_edges(sig.mask, dt)
    fu = lowpass(sig.u, dt, pre)
    fw = lowpass(_friction_regressor(sig, p_pos, p_neg, hold, pre.min_speed), dt, pre)
    v = sig.vel[m]
    return m, sig.acc[m], np.where(v > 0, v, 0.0), np.where(v < 0, v, 0.0), fu[m] - fw[m]


def payload_acceleration(record: Record, axis: str, pre: Preprocessing = AXIS_PREPROCESSING):
    """Second derivative of the payload's horizontal coordinate along ``axis``.

    The coordinate is formed from the raw samples and filtered afterwards,
    so the result is the filtered true acceleration (filtering is linear).
    """
    x, y, L = record["x_t"], record["y_t"], record["L"]
    a, b = record["alpha"], record["beta"]
    if axis == "x":
        coord = x + L * np.sin(b) * np.sin(a)
    else:
        coord = y + L * np.cos(a)
    sig = butter_filtfilt(SampledSignal(coord, record.dt), pre.spec)
    return central_diff_accel(sig).values


def estimate_axis(record: Record, axis: str, p5: dict, pre: Preprocessing = AXIS_PREPROCESSING,
                  loaded: Record | None = None, passes: int = 2) -> AxisResult:
    """LS estimate of one trolley axis from an unloaded record.

    With a ``loaded`` record (other translations braked, payload swinging)
    the gain term ``P6`` is estimated as well.
    """
    p_pos, p_neg = p5[f"{axis}+"].poly, p5[f"{axis}-"].poly
    dt = record.dt
    sig = axis_signals(record, axis, pre)
    _, acc, vp, vn, y = _motion_rows(sig, dt, pre, p_pos, p_neg, sig.u)
    motion = ls_solve(RegressionProblem(np.column_stack([acc, vp, vn]), y,
                                        (f"M{axis}/K{axis}", f"P7{axis}+", f"P7{axis}-")))
    inertia, P7p, P7n = motion.theta
    P6 = None
    gain = None
    if loaded is not None:
        m_p = loaded.m_p
        if not m_p > 0:
            raise ValueError("the gain record needs a payload")
        ls_sig = axis_signals(loaded, axis, pre)
        ap = payload_acceleration(loaded, axis, pre)
        P6_est = 0.0
        for _ in range(passes):
            # while the axis is stuck the brake force also absorbs the swing
            hold = ls_sig.u - P6_est * m_p * np.nan_to_num(ap)
            m, acc, vp, vn, y = _motion_rows(ls_sig, dt, pre, p_pos, p_neg, hold)
            y = y - inertia * acc - P7p * vp - P7n * vn
            gain = ls_solve(RegressionProblem((m_p * ap[m])[:, None], y, (f"P6{axis}",)))
            P6_est = gain.theta[0]
        P6 = float(P6_est)
    return AxisResult(axis, float(inertia), float(P7p), float(P7n), P6, motion, gain)


def disaggregate(result: AxisResult, m_moving: float, gain_fallback: float | None = None):
    """Effective inertia ``J`` and gain ``K`` from ``M/K`` and ``P6``.

    ``m_moving`` is the known carriage mass on this axis.  Without a gain
    estimate, ``gain_fallback`` (for example a radius-scaled rope gain) is
    used and the result is flagged.
    """
    if result.P6 is not None:
        K = 1.0 / result.P6
        source = "estimated"
    elif gain_fallback is not None:
        K = gain_fallback
        source = "assumed"
    else:
        return None
    return {"K": K, "J": result.inertia * K - m_moving, "D_pos": result.P7_pos * K,
            "D_neg": result.P7_neg * K, "gain_source": source}


class AxisEstimator(BaseEstimator):
    """Estimator wrapper for one trolley axis.

    ``fit(X)`` expects a dict with ``record``, ``p5`` (from
    :func:`estimate_p5`) and optionally ``loaded``.
    """

    def __init__(self, axis="x", cutoff_hz=3.0, order=4, window_s=AXIS_WINDOW, min_speed=1e-2):
        self.axis = axis
        self.cutoff_hz = cutoff_hz
        self.order = order
        self.window_s = window_s
        self.min_speed = min_speed

    def fit(self, X, y=None):
        from ..sigproc import FilterSpec
        pre = Preprocessing(FilterSpec(self.order, self.cutoff_hz), self.window_s,
                            self.min_speed)
        self.result_ = estimate_axis(X["record"], self.axis, X["p5"], pre, X.get("loaded"))
        self.params_ = self.result_.as_dict()
        self.p5_ = X["p5"]
        return self

    def predict(self, X):
        """Voltage for columns ``(position, velocity, acceleration)``; no payload."""
        X = np.asarray(X, dtype=float)
        r = self.result_
        pos, v, a = X[:, 0], X[:, 1], X[:, 2]
        pp, pn = self.p5_[f"{self.axis}+"].poly, self.p5_[f"{self.axis}-"].poly
        coul = np.where(v > 0, pp(pos), np.where(v < 0, -pn(pos), 0.0))
        return r.inertia * a + np.where(v > 0, r.P7_pos, r.P7_neg) * v + coul
