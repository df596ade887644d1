"""Offline conditioning of sampled encoder records.

Zero-phase Butterworth smoothing, central-difference derivatives, masking
around velocity reversals and encoder quantization.  All functions are pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal as sps
from sklearn.base import BaseEstimator, TransformerMixin

DEFAULT_DT = 0.002
DEFAULT_MASK_WINDOW = 0.15


class InvalidSpecError(ValueError):
    pass


@dataclass(frozen=True)
class SampledSignal:
    """Uniformly sampled series; ``valid`` flags usable samples."""

    values: np.ndarray
    dt: float = DEFAULT_DT
    t0: float = 0.0
    valid: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidSpecError("dt must be positive")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.valid is None:
            object.__setattr__(self, "valid", np.isfinite(self.values))
        else:
            object.__setattr__(self, "valid", np.asarray(self.valid, dtype=bool))

    def __len__(self):
        return self.values.size

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    def with_values(self, values, valid=None) -> "SampledSignal":
        return replace(self, values=np.asarray(values, dtype=float), valid=valid)


@dataclass(frozen=True)
class FilterSpec:
    order: int = 4
    cutoff_hz: float = 3.0

    def __post_init__(self):
        if self.order < 1:
            raise InvalidSpecError("filter order must be at least 1")
        if not self.cutoff_hz > 0:
            raise InvalidSpecError("cutoff must be positive")

    @property
    def padlen(self) -> int:
        return 3 * (self.order + 1)

    def check(self, dt: float):
        nyq = 0.5 / dt
        if not self.cutoff_hz < nyq:
            raise InvalidSpecError(
                f"cutoff {self.cutoff_hz} Hz is not below Nyquist {nyq} Hz")

    def coefficients(self, dt: float):
        """Digital (b, a) from the bilinear transform of the analog prototype.

        scipy pre-warps the cutoff so the -3 dB point lands on ``cutoff_hz``.
        """
        self.check(dt)
        return sps.butter(self.order, self.cutoff_hz, btype="low", fs=1.0 / dt)


def butter_filtfilt(sig: SampledSignal, spec: FilterSpec = FilterSpec()) -> SampledSignal:
    b, a = spec.coefficients(sig.dt)
    n = len(sig)
    if n <= spec.padlen:
        raise InvalidSpecError(f"signal of {n} samples too short for padding {spec.padlen}")
    if not np.all(np.isfinite(sig.values)):
        raise InvalidSpecError("cannot filter non-finite samples")
    y = sps.filtfilt(b, a, sig.values, padtype="odd", padlen=spec.padlen)
    return sig.with_values(y, sig.valid.copy())


def analytic_gain(freq_hz, spec: FilterSpec, dt: float):
    """Magnitude of the forward-backward digital response (squared single pass)."""
    b, a = spec.coefficients(dt)
    _, h = sps.freqz(b, a, worN=np.atleast_1d(freq_hz), fs=1.0 / dt)
    return np.abs(h) ** 2


def central_diff_velocity(sig: SampledSignal) -> SampledSignal:
    x = sig.values
    if x.size < 3:
        raise InvalidSpecError("need at least 3 samples")
    v = np.full_like(x, np.nan)
    v[1:-1] = (x[2:] - x[:-2]) / (2 * sig.dt)
    return sig.with_values(v, _interior_valid(sig.valid))


def central_diff_accel(sig: SampledSignal) -> SampledSignal:
    x = sig.values
    if x.size < 3:
        raise InvalidSpecError("need at least 3 samples")
    acc = np.full_like(x, np.nan)
    acc[1:-1] = (x[2:] - 2 * x[1:-1] + x[:-2]) / sig.dt**2
    return sig.with_values(acc, _interior_valid(sig.valid))


def _interior_valid(valid):
    out = np.zeros_like(valid)
    out[1:-1] = valid[2:] & valid[1:-1] & valid[:-2]
    return out


def crossing_times(sig: SampledSignal) -> np.ndarray:
    """Instants where the series changes sign (linear interpolation).

    Exact zeros count as crossings at their own sample time.
    """
    v = np.where(sig.valid, sig.values, np.nan)
    t = sig.t
    zeros = t[v == 0]
    a, b = v[:-1], v[1:]
    flip = (a * b < 0)
    idx = np.nonzero(flip)[0]
    tc = t[idx] + sig.dt * a[idx] / (a[idx] - b[idx])
    return np.sort(np.concatenate([zeros, tc]))


def mask_zero_crossings(sig: SampledSignal, window_s: float = DEFAULT_MASK_WINDOW) -> np.ndarray:
    """True where a sample may enter a regression.

    False within ``window_s`` of any velocity sign change and wherever the
    sample is invalid.
    """
    if window_s < 0:
        raise InvalidSpecError("window must be non-negative")
    keep = sig.valid & np.isfinite(sig.values)
    tc = crossing_times(sig)
    if tc.size == 0:
        return keep
    t = sig.t
    j = np.searchsorted(tc, t)
    near = np.full(t.size, np.inf)
    left = j > 0
    near[left] = t[left] - tc[j[left] - 1]
    right = j < tc.size
    near[right] = np.minimum(near[right], tc[j[right]] - t[right])
    # tiny slack so window edges computed in floating point stay excluded
    return keep & (near > window_s + 1e-12 * max(1.0, abs(window_s)))


def quantum(pulses_per_rev: int, scale: float) -> float:
    """Linear encoder resolution for a pulley of radius ``scale``."""
    if pulses_per_rev <= 0:
        raise InvalidSpecError("pulses_per_rev must be positive")
    return scale * 2 * math.pi / pulses_per_rev


def quantize_encoder(sig: SampledSignal, pulses_per_rev: int = 4096,
                     scale: float = 1.0) -> SampledSignal:
    """Floor quantization to whole encoder counts."""
    q = quantum(pulses_per_rev, scale)
    counts = np.floor(sig.values / q + 1e-9)
    return sig.with_values(counts * q, sig.valid.copy())


@dataclass(frozen=True)
class Conditioned:
    position: SampledSignal
    velocity: SampledSignal
    acceleration: SampledSignal
    mask: np.ndarray


def condition(sig: SampledSignal, spec: FilterSpec = FilterSpec(),
              window_s: float = DEFAULT_MASK_WINDOW) -> Conditioned:
    """Filter a position record, differentiate it and mask reversals."""
    pos = butter_filtfilt(sig, spec)
    vel = central_diff_velocity(pos)
    acc = central_diff_accel(pos)
    return Conditioned(pos, vel, acc, mask_zero_crossings(vel, window_s) & acc.valid)


class SignalConditioner(BaseEstimator, TransformerMixin):
    """Column-wise filtering and differentiation of position records.

    ``transform`` maps an ``(n, m)`` array of positions to ``(n, 3m)``:
    filtered position, velocity and acceleration for each input column.
    End samples, where central differences are undefined, are NaN.
    """

    def __init__(self, dt=DEFAULT_DT, cutoff_hz=3.0, order=4):
        self.dt = dt
        self.cutoff_hz = cutoff_hz
        self.order = order

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        self.spec_ = FilterSpec(self.order, self.cutoff_hz)
        self.spec_.check(self.dt)
        self.n_features_in_ = 1 if X.ndim == 1 else X.shape[1]
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        cols = X.reshape(-1, 1) if X.ndim == 1 else X
        out = []
        for j in range(cols.shape[1]):
            c = condition(SampledSignal(cols[:, j], self.dt), self.spec_, 0.0)
            out += [c.position.values, c.velocity.values, c.acceleration.values]
        return np.column_stack(out)
