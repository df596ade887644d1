"""Swing damping from free-oscillation records.

With the trolley and rope at rest the angle equations reduce to::

    a'' = (g cos a cos b + cos a sin a L b'^2) / L - D_a a' / (m_p L^2)
    b'' = (-g sin b - 2 cos a L a' b') / (sin a L) - D_b b' / (m_p L^2)

each linear in its single damping coefficient.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ..records import Record
from ..sigproc import SampledSignal, central_diff_velocity
from .common import Preprocessing, angle_signals, lowpass, trim_edges
from .ls import LsResult, RegressionProblem, ls_solve

G = 9.81
STATIONARY_RATE = 1e-3
# rows where the beta equation is near its singularity are skipped
MIN_SIN_ALPHA = 0.2


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class SwingResult:
    D_alpha: float
    D_beta: float
    alpha: LsResult | None
    beta: LsResult | None

    def as_dict(self) -> dict:
        return {"D_alpha": self.D_alpha, "D_beta": self.D_beta}


def stationary_mask(record: Record, pre: Preprocessing = Preprocessing(),
                    threshold: float = STATIONARY_RATE) -> np.ndarray:
    ok = np.ones(record.t.size, dtype=bool)
    for name in ("x_t", "y_t", "L"):
        sig = SampledSignal(lowpass(record[name], record.dt, pre), record.dt)
        v = central_diff_velocity(sig)
        ok &= v.valid & (np.abs(np.nan_to_num(v.values)) < threshold)
    return ok


def swing_rows(record: Record, pre: Preprocessing = Preprocessing(), g: float = G):
    """Regression rows of both angle equations for one record."""
    m_p = record.m_p
    if not m_p > 0:
        raise PreconditionError(f"record {record.name} has no payload mass")
    stat = trim_edges(stationary_mask(record, pre), record.dt, 1.0)
    if not np.any(stat):
        raise PreconditionError(f"no stationary segment in record {record.name}")
    L = lowpass(record["L"], record.dt, pre)
    a, da, dda, va = angle_signals(record, "alpha", pre)
    b, db, ddb, vb = angle_signals(record, "beta", pre)
    ok = stat & va & vb
    sa, ca, sb, cb = np.sin(a), np.cos(a), np.sin(b), np.cos(b)
    scale = m_p * L * L
    with np.errstate(divide="ignore", invalid="ignore"):
        ya = dda - (g * ca * cb + ca * sa * L * db * db) / L
        yb = ddb - (-g * sb - 2 * ca * L * da * db) / (sa * L)
    okb = ok & (np.abs(sa) > MIN_SIN_ALPHA)
    return ((-da / scale)[ok], ya[ok]), ((-db / scale)[okb], yb[okb])


def estimate_swing_damping(records, pre: Preprocessing = Preprocessing(),
                           min_excitation: float = 1e-2, g: float = G) -> SwingResult:
    """LS estimate of ``D_alpha`` and ``D_beta`` over concatenated records.

    An angle whose rate never exceeds ``min_excitation`` rad/s in any
    record is not identifiable; its coefficient is reported as NaN.
    """
    records = list(records)
    if not records:
        raise PreconditionError("no free-oscillation records")
    rows_a, rows_b = [], []
    for r in records:
        (pa, ya), (pb, yb) = swing_rows(r, pre, g)
        rows_a.append((pa, ya))
        rows_b.append((pb, yb))
    out = []
    for rows, label in ((rows_a, "D_alpha"), (rows_b, "D_beta")):
        phi = np.concatenate([p for p, _ in rows])
        y = np.concatenate([v for _, v in rows])
        scale = records[0].m_p * np.mean(lowpass(records[0]["L"], records[0].dt, pre)) ** 2
        if phi.size == 0 or np.max(np.abs(phi)) * scale < min_excitation:
            out.append(None)
            continue
        out.append(ls_solve(RegressionProblem(phi[:, None], y, (label,))))
    ra, rb = out
    return SwingResult(ra.theta[0] if ra else float("nan"), rb.theta[0] if rb else float("nan"),
                       ra, rb)


def log_decrement_damping(t, angle, center, m_p, L):
    """Damping coefficient from the decay of successive swing peaks.

    For a lightly damped pendulum the envelope decays as ``exp(-c t / 2)``
    with ``c = D / (m_p L^2)``.
    """
    x = np.asarray(angle) - center
    i = np.nonzero((x[1:-1] > x[:-2]) & (x[1:-1] >= x[2:]) & (x[1:-1] > 0))[0] + 1
    if i.size < 3:
        raise PreconditionError("fewer than three swing peaks")
    slope = np.polyfit(t[i], np.log(x[i]), 1)[0]
    return -2.0 * slope * m_p * L * L


class SwingDampingEstimator(BaseEstimator):
    """Estimator wrapper; ``fit`` takes a list of free-swing records."""

    def __init__(self, cutoff_hz=3.0, order=4):
        self.cutoff_hz = cutoff_hz
        self.order = order

    def fit(self, X, y=None):
        from ..sigproc import FilterSpec
        self.result_ = estimate_swing_damping(
            X, Preprocessing(FilterSpec(self.order, self.cutoff_hz), 0.0))
        self.params_ = self.result_.as_dict()
        return self
