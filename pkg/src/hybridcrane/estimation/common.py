"""Shared preprocessing of measurement records for the regressions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..records import INPUT_OF, POSITION_OF, Record
from ..sigproc import FilterSpec, SampledSignal, butter_filtfilt, condition

DEFAULT_WINDOW = 0.15
# slower samples are treated as possibly stuck and left out
DEFAULT_MIN_SPEED = 1e-2


@dataclass(frozen=True)
class Preprocessing:
    spec: FilterSpec = FilterSpec()
    window_s: float = DEFAULT_WINDOW
    min_speed: float = DEFAULT_MIN_SPEED


@dataclass(frozen=True)
class AxisSignals:
    pos: np.ndarray
    vel: np.ndarray
    acc: np.ndarray
    u: np.ndarray
    mask: np.ndarray


def axis_signals(record: Record, axis: str, pre: Preprocessing = Preprocessing()) -> AxisSignals:
    """Filtered position, derivatives, input and usable-sample mask of one axis."""
    c = condition(SampledSignal(record[POSITION_OF[axis]], record.dt), pre.spec, pre.window_s)
    mask = c.mask & (np.abs(np.nan_to_num(c.velocity.values)) > pre.min_speed)
    return AxisSignals(c.position.values, c.velocity.values, c.acceleration.values,
                       record[INPUT_OF[axis]], mask)


def angle_signals(record: Record, name: str, pre: Preprocessing = Preprocessing()):
    """Filtered angle with its first and second derivative (no masking)."""
    c = condition(SampledSignal(record[name], record.dt), pre.spec, 0.0)
    return c.position.values, c.velocity.values, c.acceleration.values, c.acceleration.valid


def trim_edges(mask: np.ndarray, dt: float, seconds: float = 0.5) -> np.ndarray:
    """Drop samples near the record ends where filter transients live."""
    n = int(round(seconds / dt))
    out = mask.copy()
    out[:n] = False
    if n:
        out[-n:] = False
    return out


def lowpass(x, dt: float, pre: Preprocessing = Preprocessing()) -> np.ndarray:
    """The position filter applied to any other series of the same record.

    Filtering the voltage and the friction regressor with the same
    zero-phase filter as the positions keeps the regression equation exact
    away from velocity reversals, instead of comparing raw voltages with
    smoothed derivatives.
    """
    return butter_filtfilt(SampledSignal(np.asarray(x, dtype=float), dt), pre.spec).values


def friction_sign(vel, hold, level, min_speed):
    """Dry-friction regressor: ``sign(v)`` while moving; while stuck the
    friction balances ``hold`` (in the same units as ``level``)."""
    v = np.nan_to_num(vel)
    lev = np.where(np.asarray(level) > 0, level, 1.0)
    stuck = np.clip(np.asarray(hold) / lev, -1.0, 1.0)
    return np.where(np.abs(v) < min_speed, stuck, np.sign(v))
