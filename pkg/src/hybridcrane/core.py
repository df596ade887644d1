"""Crane domain types, effective-parameter transforms, friction and dynamics.

State layout (10 components)::

    [x_t, dx_t, y_t, dy_t, L, dL, alpha, dalpha, beta, dbeta]

Axis order everywhere is ``x, y, l`` (rail, trolley, rope).  Coulomb maps are
stored as positive magnitudes in newtons; the sign is supplied by the mode.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from enum import IntEnum
from functools import cached_property
from typing import Sequence

import numpy as np

AXES = ("x", "y", "l")
STATE_FIELDS = ("x_t", "dx_t", "y_t", "dy_t", "L", "dL", "alpha", "dalpha", "beta", "dbeta")
POS_INDEX = {"x": 0, "y": 2, "l": 4}
VEL_INDEX = {"x": 1, "y": 3, "l": 5}

# below this |sin(alpha)| the beta equation keeps only its damping term
SINGULAR_SIN_ALPHA = 1e-4


class InvalidParameterError(ValueError):
    pass


class InvalidStateError(ValueError):
    pass


class Mode(IntEnum):
    NEG = 1
    REST = 2
    POS = 3

    @property
    def sign(self) -> int:
        return int(self) - 2

    @classmethod
    def from_velocity(cls, v: float) -> "Mode":
        if v > 0:
            return cls.POS
        if v < 0:
            return cls.NEG
        return cls.REST


@dataclass(frozen=True)
class ModeVector:
    q_x: Mode = Mode.REST
    q_y: Mode = Mode.REST
    q_l: Mode = Mode.REST

    def __iter__(self):
        return iter((self.q_x, self.q_y, self.q_l))

    def __getitem__(self, axis: int | str) -> Mode:
        if isinstance(axis, str):
            axis = AXES.index(axis)
        return (self.q_x, self.q_y, self.q_l)[axis]

    def with_axis(self, axis: int | str, mode: Mode) -> "ModeVector":
        if isinstance(axis, int):
            axis = AXES[axis]
        return replace(self, **{f"q_{axis}": Mode(mode)})

    @classmethod
    def from_state(cls, state: Sequence[float]) -> "ModeVector":
        s = np.asarray(state, dtype=float)
        return cls(*(Mode.from_velocity(s[VEL_INDEX[a]]) for a in AXES))

    @classmethod
    def rest(cls) -> "ModeVector":
        return cls()


@dataclass(frozen=True)
class CraneState:
    x_t: float = 0.0
    dx_t: float = 0.0
    y_t: float = 0.0
    dy_t: float = 0.0
    L: float = 0.5
    dL: float = 0.0
    alpha: float = math.pi / 2
    dalpha: float = 0.0
    beta: float = 0.0
    dbeta: float = 0.0

    def __post_init__(self):
        values = self.as_array()
        if not np.all(np.isfinite(values)):
            raise InvalidStateError("state has non-finite components")
        if self.L <= 0:
            raise InvalidStateError(f"rope length must be positive, got {self.L}")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in STATE_FIELDS], dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "CraneState":
        return cls(*(float(v) for v in values))


@dataclass(frozen=True)
class InputVector:
    u_x: float = 0.0
    u_y: float = 0.0
    u_l: float = 0.0

    def __iter__(self):
        return iter((self.u_x, self.u_y, self.u_l))

    def saturate(self, u_sat: float | None) -> "InputVector":
        if u_sat is None:
            return self
        return InputVector(*(min(max(u, -u_sat), u_sat) for u in self))


@dataclass(frozen=True)
class Polynomial4:
    """Quartic ``c0 + c1 p + ... + c4 p^4`` evaluated with a clamped argument."""

    coeffs: tuple[float, ...] = (0.0, 0.0, 0.0, 0.0, 0.0)
    domain: tuple[float, float] = (-math.inf, math.inf)

    def __post_init__(self):
        c = tuple(float(v) for v in self.coeffs)
        if len(c) > 5:
            raise InvalidParameterError("at most five coefficients")
        object.__setattr__(self, "coeffs", c + (0.0,) * (5 - len(c)))
        object.__setattr__(self, "domain", (float(self.domain[0]), float(self.domain[1])))

    @classmethod
    def constant(cls, value: float, domain=(-math.inf, math.inf)) -> "Polynomial4":
        return cls((value,), domain)

    def __call__(self, pos):
        lo, hi = self.domain
        c0, c1, c2, c3, c4 = self.coeffs
        if isinstance(pos, (float, int)):
            p = lo if pos < lo else hi if pos > hi else pos
            return float(c0 + p * (c1 + p * (c2 + p * (c3 + p * c4))))
        p = np.clip(pos, lo, hi)
        return c0 + p * (c1 + p * (c2 + p * (c3 + p * c4)))

    def in_domain(self, pos: float) -> bool:
        return self.domain[0] <= pos <= self.domain[1]

    def scaled(self, factor: float) -> "Polynomial4":
        return Polynomial4(tuple(factor * c for c in self.coeffs), self.domain)

    def with_domain(self, domain) -> "Polynomial4":
        return Polynomial4(self.coeffs, domain)


@dataclass(frozen=True)
class AxisFriction:
    """Effective viscous coefficients and Coulomb magnitude maps of one axis."""

    D_pos: float = 0.0
    D_neg: float = 0.0
    C_pos: Polynomial4 = field(default_factory=Polynomial4)
    C_neg: Polynomial4 = field(default_factory=Polynomial4)

    def __post_init__(self):
        if self.D_pos < 0 or self.D_neg < 0:
            raise InvalidParameterError("viscous coefficients must be non-negative")

    @classmethod
    def constant(cls, D: float = 0.0, C: float = 0.0) -> "AxisFriction":
        """Direction- and position-independent friction (rope axis)."""
        return cls(D, D, Polynomial4.constant(C), Polynomial4.constant(C))

    def coulomb(self, pos: float, direction: int) -> float:
        if direction > 0:
            return float(self.C_pos(pos))
        if direction < 0:
            return float(self.C_neg(pos))
        return 0.0

    def viscous(self, vel: float) -> float:
        if vel > 0:
            return self.D_pos * vel
        if vel < 0:
            return self.D_neg * vel
        return 0.0

    def scaled(self, factor: float) -> "AxisFriction":
        return AxisFriction(self.D_pos * factor, self.D_neg * factor,
                            self.C_pos.scaled(factor), self.C_neg.scaled(factor))


@dataclass(frozen=True)
class MotorParams:
    R: float
    K_e: float
    K_p: float
    J: float
    D_m: float = 0.0
    C_m: float = 0.0
    r_g: float = 1.0

    def __post_init__(self):
        if self.R <= 0 or self.K_p <= 0 or self.r_g <= 0:
            raise InvalidParameterError("R, K_p and r_g must be positive")
        if self.C_m < 0 or self.D_m < 0 or self.J < 0:
            raise InvalidParameterError("C_m, D_m and J must be non-negative")


@dataclass(frozen=True)
class CraneParams:
    """All parameters of the complete crane + motor model, in force units."""

    m_r: float = 2.2
    m_t: float = 1.155
    m_p: float = 0.0
    g: float = 9.81
    R_x: float = 40e-3
    R_y: float = 40e-3
    R_l: float = 15e-3
    J_x: float = 0.0
    J_y: float = 0.0
    J_l: float = 0.0
    K_x: float = 1.0
    K_y: float = 1.0
    K_l: float = 1.0
    friction_x: AxisFriction = field(default_factory=AxisFriction)
    friction_y: AxisFriction = field(default_factory=AxisFriction)
    friction_l: AxisFriction = field(default_factory=AxisFriction)
    D_alpha: float = 0.0
    D_beta: float = 0.0
    x_min: float = 0.0
    x_max: float = 0.505
    y_min: float = 0.0
    y_max: float = 0.505
    l_min: float = 0.13
    l_max: float = 0.57

    def __post_init__(self):
        if self.m_r <= 0 or self.m_t <= 0 or self.m_p < 0:
            raise InvalidParameterError("masses must be positive (payload non-negative)")
        if min(self.R_x, self.R_y, self.R_l) <= 0:
            raise InvalidParameterError("pulley radii must be positive")
        if min(self.K_x, self.K_y, self.K_l) <= 0:
            raise InvalidParameterError("gains must be positive")
        for lo, hi in self.limits.values():
            if not lo < hi:
                raise InvalidParameterError("axis limits need MIN < MAX")

    @property
    def limits(self) -> dict[str, tuple[float, float]]:
        return {"x": (self.x_min, self.x_max), "y": (self.y_min, self.y_max),
                "l": (self.l_min, self.l_max)}

    def friction(self, axis: str) -> AxisFriction:
        return getattr(self, f"friction_{axis}")

    def gain(self, axis: str) -> float:
        return getattr(self, f"K_{axis}")

    def inertia(self, axis: str) -> float:
        """Total effective mass seen by the axis actuator."""
        if axis == "x":
            return self.J_x + self.m_t + self.m_r
        if axis == "y":
            return self.J_y + self.m_t
        return self.J_l + self.m_p

    def replace(self, **changes) -> "CraneParams":
        return replace(self, **changes)

    @cached_property
    def _packed(self) -> tuple:
        fx, fy, fl = self.friction_x, self.friction_y, self.friction_l
        return (
            self.m_p, self.g, self.inertia("x"), self.inertia("y"), self.J_l + self.m_p,
            self.K_x, self.K_y, self.K_l,
            (fx.D_pos, fx.D_neg, fx.C_pos, fx.C_neg),
            (fy.D_pos, fy.D_neg, fy.C_pos, fy.C_neg),
            (fl.D_pos, fl.D_neg, fl.C_pos, fl.C_neg),
            self.D_alpha, self.D_beta,
        )


@dataclass
class Diagnostics:
    """Mutable counters a caller may pass into the dynamics."""

    singular_beta: int = 0


def effective_params(motor: MotorParams, radius: float, D_pos: float = 0.0,
                     D_neg: float | None = None, C_pos: Polynomial4 | float = 0.0,
                     C_neg: Polynomial4 | float | None = None) -> dict:
    """Reflect motor constants through gearbox and pulley onto a linear axis.

    Returns a dict with the effective inertia ``J``, gain ``K`` and the
    combined :class:`AxisFriction`.  Raw mechanical terms default to zero,
    which is the rope-axis case.
    """
    if radius <= 0:
        raise InvalidParameterError("pulley radius must be positive")
    rg, R = motor.r_g, motor.R
    J = rg**2 / radius**2 * motor.J
    K = rg * motor.K_p / (R * radius)
    D_motor = motor.K_p * motor.K_e * rg**2 / (R * radius**2) + rg**2 / radius**2 * motor.D_m
    C_motor = rg / radius * motor.C_m
    if D_neg is None:
        D_neg = D_pos
    if C_neg is None:
        C_neg = C_pos
    if not isinstance(C_pos, Polynomial4):
        C_pos = Polynomial4.constant(C_pos)
    if not isinstance(C_neg, Polynomial4):
        C_neg = Polynomial4.constant(C_neg)
    shift = np.array([C_motor, 0, 0, 0, 0])
    friction = AxisFriction(
        D_motor + D_pos, D_motor + D_neg,
        Polynomial4(tuple(np.add(C_pos.coeffs, shift)), C_pos.domain),
        Polynomial4(tuple(np.add(C_neg.coeffs, shift)), C_neg.domain),
    )
    return {"J": J, "K": K, "friction": friction}


def payload_position(state) -> tuple[float, float, float]:
    s = _as_state_array(state)
    x, y, L, a, b = s[0], s[2], s[4], s[6], s[8]
    return (x + L * math.sin(b) * math.sin(a), y + L * math.cos(a),
            -L * math.sin(a) * math.cos(b))


def coulomb_force(params: CraneParams, axis: str, position: float, direction: int) -> float:
    """Coulomb magnitude for the given direction; zero at rest."""
    return params.friction(axis).coulomb(position, direction)


def viscous_force(params: CraneParams, axis: str, velocity: float) -> float:
    return params.friction(axis).viscous(velocity)


def _as_state_array(state) -> np.ndarray:
    if isinstance(state, CraneState):
        return state.as_array()
    return np.asarray(state, dtype=float)


def _mode_codes(mode) -> tuple[int, int, int]:
    if mode is None:
        return (2, 2, 2)
    return tuple(int(q) for q in mode)


def _solve(s, u, q, P, tanh_k, locked, diag):
    """Accelerations, rope coupling force and REST-axis net forces.

    ``q`` holds integer mode codes; locked axes behave as REST.  In the tanh
    model (``tanh_k`` set) only locked axes are held.
    """
    x, dx, y, dy, L, dL, a, da, b, db = s
    ux, uy, ul = u
    mp, g, Mx, My, Ml, Kx, Ky, Kl, fx, fy, fl, Da, Db = P
    lx, ly, ll = locked

    if tanh_k is None:
        hx, hy, hl = q[0] == 2 or lx, q[1] == 2 or ly, q[2] == 2 or ll
    else:
        hx, hy, hl = lx, ly, ll

    def drive(K, uu, f, pos, vel, code):
        Dp, Dn, Cp, Cn = f
        if tanh_k is not None:
            if vel >= 0:
                return K * uu - Dp * vel - Cp(pos) * math.tanh(tanh_k * vel)
            return K * uu - Dn * vel - Cn(pos) * math.tanh(tanh_k * vel)
        if code == 3:
            return K * uu - Dp * vel - Cp(pos)
        if code == 1:
            return K * uu - Dn * vel + Cn(pos)
        return K * uu

    Ax = drive(Kx, ux, fx, x, dx, q[0])
    Ay = drive(Ky, uy, fy, y, dy, q[1])
    Al = drive(Kl, ul, fl, L, dL, q[2]) if not hl else Kl * ul

    if mp > 0:
        sa, ca, sb, cb = math.sin(a), math.cos(a), math.sin(b), math.cos(b)
        cx, cy = sa * sb, ca
        Qc = L * da * da + L * db * db * sa * sa + g * cb * sa
    else:
        sa = ca = sb = cb = 0.0
        cx = cy = 0.0
        Qc = 0.0

    if hl:
        # rope force that keeps the rope length fixed
        if mp > 0:
            num, den = Qc, 1.0
            if not hx:
                num -= cx * Ax / Mx
                den += mp * cx * cx / Mx
            if not hy:
                num -= cy * Ay / My
                den += mp * cy * cy / My
            F = -mp * num / den
        else:
            F = 0.0
    else:
        F = Al

    ddx = 0.0 if hx else (Ax - F * cx) / Mx
    ddy = 0.0 if hy else (Ay - F * cy) / My
    t_rope = Al + mp * (Qc - cy * ddy - cx * ddx)
    if hl:
        ddL = 0.0
    else:
        if Ml <= 0:
            raise InvalidParameterError("rope axis has neither payload nor inertia")
        ddL = t_rope / Ml

    if mp > 0:
        mL2 = mp * L * L
        dda = (sa * ddy - ca * sb * ddx + g * ca * cb + ca * sa * L * db * db
               - 2.0 * dL * da) / L - Da * da / mL2
        if abs(sa) < SINGULAR_SIN_ALPHA:
            ddb = -Db * db / mL2
            if diag is not None:
                diag.singular_beta += 1
        else:
            ddb = (-g * sb - cb * ddx - 2.0 * sa * dL * db
                   - 2.0 * ca * L * da * db) / (sa * L) - Db * db / mL2
    else:
        dda = ddb = 0.0

    net = (Kx * ux - F * cx, Ky * uy - F * cy, t_rope)
    return (hx, hy, hl), (ddx, ddy, ddL, dda, ddb), F, net


def vector_field(state, u, mode, params: CraneParams, *, tanh_k: float | None = None,
                 locked: Sequence[bool] = (False, False, False),
                 diagnostics: Diagnostics | None = None) -> np.ndarray:
    """Time derivative of the 10-component state.

    Friction is selected by ``mode`` (not by the velocity sign).  REST or
    locked axes get exactly zero velocity and acceleration.  With
    ``tanh_k`` the smooth tanh model is evaluated and ``mode`` is ignored.
    """
    s = _as_state_array(state)
    return np.array(_rhs(s.tolist(), tuple(u), _mode_codes(mode), params, tanh_k,
                         tuple(locked), diagnostics))


def _rhs(s, u, q, params, tanh_k, locked, diag):
    """List-valued right-hand side on plain floats (integrator hot path)."""
    if not s[4] > 0.5 * params.l_min:
        raise InvalidStateError(
            f"rope length {s[4]} below half the minimum {params.l_min}")
    (hx, hy, hl), (ddx, ddy, ddL, dda, ddb), _, _ = _solve(
        s, u, q, params._packed, tanh_k, locked, diag)
    if params.m_p > 0:
        da, db = s[7], s[9]
    else:
        da = db = 0.0
    return [
        0.0 if hx else s[1], ddx,
        0.0 if hy else s[3], ddy,
        0.0 if hl else s[5], ddL,
        da, dda, db, ddb,
    ]


def net_axis_force(axis: str, state, u, params: CraneParams, mode=None,
                   locked: Sequence[bool] = (False, False, False)) -> float:
    """Force the Coulomb friction of ``axis`` has to balance.

    For X/Y this is the actuator force minus the rope coupling; for the rope
    it is the net force along the rope (``t_rope``).  ``mode`` defaults to
    all axes at rest.
    """
    s = _as_state_array(state)
    _, _, _, net = _solve(s, tuple(u), _mode_codes(mode), params._packed, None,
                          tuple(locked), None)
    return net[AXES.index(axis)]


def rope_force(state, u, mode, params: CraneParams, *, tanh_k=None,
               locked=(False, False, False)) -> float:
    """Rope force entering the trolley couplings (reaction when locked)."""
    s = _as_state_array(state)
    _, _, F, _ = _solve(s, tuple(u), _mode_codes(mode), params._packed, tanh_k,
                        tuple(locked), None)
    return F


def mechanical_energy(state, params: CraneParams) -> float:
    """Kinetic plus potential energy, effective motor inertias included."""
    s = _as_state_array(state)
    x, dx, y, dy, L, dL, a, da, b, db = s
    T = 0.5 * params.inertia("x") * dx**2 + 0.5 * params.inertia("y") * dy**2
    T += 0.5 * params.J_l * dL**2
    if params.m_p > 0:
        sa, ca, sb, cb = math.sin(a), math.cos(a), math.sin(b), math.cos(b)
        vx = dx + dL * sb * sa + L * cb * db * sa + L * sb * ca * da
        vy = dy + dL * ca - L * sa * da
        vz = -dL * sa * cb - L * ca * da * cb + L * sa * sb * db
        T += 0.5 * params.m_p * (vx * vx + vy * vy + vz * vz)
        V = -params.m_p * params.g * L * sa * cb
    else:
        V = 0.0
    return T + V


def param_field_names() -> list[str]:
    return [f.name for f in fields(CraneParams)]
