"""The two stick-slip benchmark scenarios.

Both run without viscous friction and with zero motor inertia, with unit
gains so that inputs are forces in newtons.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from ..core import AxisFriction, CraneParams, CraneState
from ..signals import SineForce
from .hybrid import SimConfig


@dataclass(frozen=True)
class Case:
    name: str
    params: CraneParams
    state: CraneState
    config: SimConfig
    input: object
    axis: str

    @property
    def velocity_field(self) -> str:
        return {"x": "dx_t", "y": "dy_t", "l": "dL"}[self.axis]


def case1(t_end: float = 5.0, **config) -> Case:
    """Payload released from a swing; the trolley is dragged by the rope."""
    params = CraneParams(
        m_p=0.457,
        friction_x=AxisFriction.constant(0.0, 1.0),
        friction_y=AxisFriction.constant(0.0, 1.0),
        friction_l=AxisFriction.constant(0.0, 1.0),
    )
    state = CraneState(x_t=0.25, y_t=0.25, L=0.5, alpha=math.pi / 2 + 0.6, beta=0.0)
    cfg = SimConfig(t_end=t_end, locked_axes=("l",), **config)
    return Case("case1", params, state, cfg, None, "y")


def case2(t_end: float = 4.0, amplitude: float = 12.0, frequency: float = 1.0,
          **config) -> Case:
    """Rope driven by a gravity-offset sinusoidal force against 9.81 N dry friction."""
    params = CraneParams(m_p=1.0, friction_l=AxisFriction.constant(0.0, 9.81))
    state = CraneState(x_t=0.25, y_t=0.25, L=0.35)
    force = SineForce("l", amplitude, frequency, offset=-params.m_p * params.g)
    cfg = SimConfig(t_end=t_end, locked_axes=("x", "y"), **config)
    return Case("case2", params, state, cfg, force, "l")
