"""Dormand-Prince 5(4) stepper with continuous extension.

Only the single-step machinery lives here; the event-aware driver is in
:mod:`hybridcrane.sim.hybrid`.
"""
from __future__ import annotations

import numpy as np

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# difference between the 5th and embedded 4th order weights (7 stages, FSAL)
E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# continuous extension: y(t + theta h) = y + h * K.T @ (P @ [theta, theta^2, theta^3, theta^4])
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

ORDER = 4
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


def dp_step(fun, t, y, f0, h):
    """One Dormand-Prince step.

    Returns ``(y_new, f_new, K, err)`` where ``K`` holds the seven stage
    derivatives (needed by :func:`dense_eval`) and ``err`` the embedded
    error vector.
    """
    K = np.empty((7, y.size))
    K[0] = f0
    for s in range(1, 6):
        dy = np.dot(K[:s].T, A[s]) * h
        K[s] = fun(t + C[s] * h, y + dy)
    y_new = y + h * np.dot(K[:6].T, B)
    f_new = fun(t + h, y_new)
    K[6] = f_new
    err = h * np.dot(K.T, E)
    return y_new, f_new, K, err


def error_norm(err, y, y_new, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def step_factor(err_norm: float) -> float:
    if err_norm == 0:
        return MAX_FACTOR
    return min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * err_norm ** (-1 / (ORDER + 1))))


def dense_eval(y, K, h, theta):
    """State at fraction ``theta`` in [0, 1] of an accepted step."""
    Q = K.T @ P
    powers = np.array([theta, theta**2, theta**3, theta**4])
    return y + h * (Q @ powers)


class DenseStep:
    """Continuous extension of an accepted step on ``[t, t + h]``."""

    __slots__ = ("t", "h", "y", "Q")

    def __init__(self, t, h, y, K):
        self.t, self.h, self.y = t, h, y
        self.Q = K.T @ P

    def __call__(self, t):
        theta = (t - self.t) / self.h
        return self.y + self.h * (self.Q @ np.array([theta, theta**2, theta**3, theta**4]))

    def many(self, ts):
        """States at several times, one row per time."""
        theta = (np.asarray(ts) - self.t) / self.h
        powers = np.vander(theta, 5, increasing=True)[:, 1:]
        return self.y + self.h * (powers @ self.Q.T)


def initial_step(fun, t0, y0, f0, rtol, atol, max_step):
    """Starting step size (Hairer, Norsett & Wanner, II.4)."""
    scale = atol + np.abs(y0) * rtol
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, max_step)
    y1 = y0 + h0 * f0
    f1 = fun(t0 + h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / (ORDER + 1))
    return min(100 * h0, h1, max_step)
