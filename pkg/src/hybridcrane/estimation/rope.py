"""Staged identification of the hoist (rope) axis.

``u_l = P1 L'' + P2 L' + P3 sign(L') + P4 m_p (L'' - g)``

P3 comes from quasistatic ramps, then P1 and P2 from a no-load record
with P3 fixed, then P4 from the loaded records with P1..P3 fixed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ..records import Record
from ..sigproc import quantum as encoder_quantum
from .breakaway import average_breakaway, estimate_breakaway
from .common import (AxisSignals, Preprocessing, axis_signals, friction_sign, lowpass,
                     trim_edges)
from .ls import LsResult, RegressionProblem, ls_solve

G = 9.81


@dataclass(frozen=True)
class RopeResult:
    P1: float
    P2: float
    P3: float
    P4: float
    p12: LsResult
    p4: LsResult
    joint: LsResult | None = None
    breakaway: tuple = ()
    corr_p1_p4: float = float("nan")

    def as_dict(self) -> dict:
        return {"P1": self.P1, "P2": self.P2, "P3": self.P3, "P4": self.P4}


def record_quantum(record: Record, radius: float) -> float | None:
    if not record.meta.get("quantized", True):
        return None
    return encoder_quantum(int(record.meta.get("pulses_per_rev", 4096)), radius)


def estimate_p3(ramps, radius: float = 0.015):
    """Mean breakaway magnitude over quasistatic rope ramps (both directions)."""
    samples = [estimate_breakaway(r, "l", record_quantum(r, radius)) for r in ramps]
    if not samples:
        raise ValueError("no quasistatic rope records")
    by_dir = {}
    for s in samples:
        by_dir.setdefault(s.direction, []).append(s)
    means = [average_breakaway(v).voltage for v in by_dir.values()]
    return float(np.mean(means)), tuple(samples)


def _rows(sig: AxisSignals, dt: float, pre: Preprocessing, P3: float, hold_offset=0.0):
    """Masked regression rows with voltage and friction filtered like the positions."""
    m = trim_edges(sig.mask, dt)
    fu = lowpass(sig.u, dt, pre)
    fw = lowpass(friction_sign(sig.vel, sig.u + hold_offset, P3, pre.min_speed), dt, pre)
    return sig.acc[m], sig.vel[m], fw[m], fu[m]


def estimate_p12(noload: AxisSignals, P3: float, dt: float,
                 pre: Preprocessing = Preprocessing()) -> LsResult:
    acc, vel, fw, fu = _rows(noload, dt, pre, P3)
    return ls_solve(RegressionProblem(np.column_stack([acc, vel]), fu - P3 * fw, ("P1", "P2")))


def estimate_p4(loaded, P1: float, P2: float, P3: float, dt: float,
                pre: Preprocessing = Preprocessing(), g: float = G,
                passes: int = 2, sensitivity: bool = False):
    """P4 from loaded records; while stuck the friction also carries the
    payload weight, which needs P4 itself, hence a couple of passes.

    With ``sensitivity`` the derivative of P4 with respect to the fixed
    ``(P1, P2)`` is returned as well.
    """
    P4 = 0.0
    res = None
    for _ in range(passes):
        problems, fixed = [], []
        for sig, m_p in loaded:
            acc, vel, fw, fu = _rows(sig, dt, pre, P3, hold_offset=P4 * m_p * g)
            problems.append(RegressionProblem((m_p * (acc - g))[:, None],
                                              fu - P1 * acc - P2 * vel - P3 * fw, ("P4",)))
            fixed.append(np.column_stack([acc, vel]))
        stacked = RegressionProblem.stack(problems)
        res = ls_solve(stacked)
        P4 = res["P4"]
    if not sensitivity:
        return res
    phi = stacked.phi[:, 0]
    return res, -(phi @ np.vstack(fixed)) / (phi @ phi)


def staged_correlation(p12: LsResult, p4: LsResult, dP4) -> float:
    """corr(P1, P4) of the staged estimate, propagating the P1/P2 covariance
    into P4 (P3 comes from separate records and is treated as exact)."""
    c12 = p12.cov
    var4 = float(p4.cov[0, 0] + dP4 @ c12 @ dP4)
    cov14 = float(dP4 @ c12[:, 0])
    return cov14 / np.sqrt(var4 * c12[0, 0])


def joint_rope_ls(noload: AxisSignals, loaded, dt: float, pre: Preprocessing = Preprocessing(),
                  g: float = G) -> LsResult:
    """All four parameters in one regression (for comparison with the staged form)."""
    phi, y = [], []
    for sig, m_p in [(noload, 0.0)] + list(loaded):
        m = trim_edges(sig.mask, dt)
        sgn = lowpass(np.sign(np.nan_to_num(sig.vel)), dt, pre)[m]
        phi.append(np.column_stack([sig.acc[m], sig.vel[m], sgn, m_p * (sig.acc[m] - g)]))
        y.append(lowpass(sig.u, dt, pre)[m])
    return ls_solve(RegressionProblem(np.vstack(phi), np.concatenate(y),
                                      ("P1", "P2", "P3", "P4")))


def estimate_rope(quasistatic, noload: Record, loaded, pre: Preprocessing = Preprocessing(),
                  radius: float = 0.015, g: float = G) -> RopeResult:
    """Staged rope identification from record objects.

    ``loaded`` is a sequence of records whose ``meta['m_p']`` holds the payload.
    """
    P3, samples = estimate_p3(quasistatic, radius)
    dt = noload.dt
    sig0 = axis_signals(noload, "l", pre)
    p12 = estimate_p12(sig0, P3, dt, pre)
    P1, P2 = p12["P1"], p12["P2"]
    sigs = [(axis_signals(r, "l", pre), r.m_p) for r in loaded]
    if not sigs:
        raise ValueError("no loaded rope records")
    p4, dP4 = estimate_p4(sigs, P1, P2, P3, dt, pre, g, sensitivity=True)
    try:
        joint = joint_rope_ls(sig0, sigs, dt, pre, g)
    except ValueError:
        joint = None
    return RopeResult(P1, P2, P3, p4["P4"], p12, p4, joint, samples,
                      staged_correlation(p12, p4, dP4))


class RopeEstimator(BaseEstimator):
    """Estimator wrapper around :func:`estimate_rope`.

    ``fit`` takes a dict with ``quasistatic``, ``noload`` and ``loaded``
    records; the P-parameters end up in ``params_``.
    """

    def __init__(self, cutoff_hz=3.0, order=4, window_s=0.15, min_speed=1e-2, radius=0.015):
        self.cutoff_hz = cutoff_hz
        self.order = order
        self.window_s = window_s
        self.min_speed = min_speed
        self.radius = radius

    def fit(self, X, y=None):
        from ..sigproc import FilterSpec
        pre = Preprocessing(FilterSpec(self.order, self.cutoff_hz), self.window_s,
                            self.min_speed)
        self.result_ = estimate_rope(X["quasistatic"], X["noload"], X["loaded"], pre,
                                     self.radius)
        self.params_ = self.result_.as_dict()
        return self

    def predict(self, X):
        """Voltage predicted for columns ``(L'', L', m_p)``."""
        X = np.asarray(X, dtype=float)
        p = self.params_
        return (p["P1"] * X[:, 0] + p["P2"] * X[:, 1] + p["P3"] * np.sign(X[:, 1])
                + p["P4"] * X[:, 2] * (X[:, 0] - G))
