"""Laboratory crane parameter set and the auxiliary P-parameterisation.

The P-parameters are the voltage-normalised quantities the estimator
recovers: each force-unit coefficient divided by the axis gain ``K``.
"""
from __future__ import annotations

from .core import AxisFriction, CraneParams, Polynomial4

# identified effective parameters of the laboratory crane
ROPE = {"J": 17.76, "K": 8.83, "C": 9.511, "D": 676.12}
X_AXIS = {"J": 1.76, "K": 2.33, "D_pos": 76.23, "D_neg": 75.12}
Y_AXIS = {"J": 3.52, "K": 4.66, "D_pos": 145.94, "D_neg": 143.70}
D_ALPHA = 2.573e-4
D_BETA = 0.0059

# breakaway voltage quartics: b for positive motion, a for negative motion
POLY_X_POS = (2.63, 0.08, -2.14, 22.47, -19.69)
POLY_X_NEG = (2.32, 0.98, 1.44, -25.06, 30.61)
POLY_Y_POS = (3.86, -4.06, 32.12, -72.83, 51.83)
# the y negative-direction row is tabulated with a negative sign throughout
# the axis range; its magnitude is the breakaway voltage
POLY_Y_NEG = tuple(-c for c in (-3.38, 1.31, -13.54, 30.94, -18.23))

LOADED_MASSES = (0.173, 0.325, 0.457, 0.550)
SWING_MASS = 0.457


def lab_params(m_p: float = 0.0, **changes) -> CraneParams:
    """Crane with the identified laboratory parameters, in force units."""
    dom = (0.0, 0.505)
    fx = AxisFriction(X_AXIS["D_pos"], X_AXIS["D_neg"],
                      Polynomial4(POLY_X_POS, dom).scaled(X_AXIS["K"]),
                      Polynomial4(POLY_X_NEG, dom).scaled(X_AXIS["K"]))
    fy = AxisFriction(Y_AXIS["D_pos"], Y_AXIS["D_neg"],
                      Polynomial4(POLY_Y_POS, dom).scaled(Y_AXIS["K"]),
                      Polynomial4(POLY_Y_NEG, dom).scaled(Y_AXIS["K"]))
    fl = AxisFriction.constant(ROPE["D"], ROPE["C"])
    base = dict(m_p=m_p, J_x=X_AXIS["J"], J_y=Y_AXIS["J"], J_l=ROPE["J"],
                K_x=X_AXIS["K"], K_y=Y_AXIS["K"], K_l=ROPE["K"],
                friction_x=fx, friction_y=fy, friction_l=fl,
                D_alpha=D_ALPHA, D_beta=D_BETA)
    base.update(changes)
    return CraneParams(**base)


def p_parameters(params: CraneParams) -> dict:
    """Scalar P-parameters (and the identifiable inertia terms) of ``params``."""
    fl, fx, fy = params.friction_l, params.friction_x, params.friction_y
    Kl, Kx, Ky = params.K_l, params.K_x, params.K_y
    return {
        "P1": params.J_l / Kl,
        "P2": fl.D_pos / Kl,
        "P3": fl.C_pos.coeffs[0] / Kl,
        "P4": 1.0 / Kl,
        "P6x": 1.0 / Kx,
        "P7x+": fx.D_pos / Kx,
        "P7x-": fx.D_neg / Kx,
        "Mx/Kx": (params.J_x + params.m_t + params.m_r) / Kx,
        "P6y": 1.0 / Ky,
        "P7y+": fy.D_pos / Ky,
        "P7y-": fy.D_neg / Ky,
        "My/Ky": (params.J_y + params.m_t) / Ky,
    }


def p5_polynomials(params: CraneParams) -> dict:
    """Breakaway voltage maps ``C/K`` of the trolley axes."""
    return {
        "x+": params.friction_x.C_pos.scaled(1 / params.K_x),
        "x-": params.friction_x.C_neg.scaled(1 / params.K_x),
        "y+": params.friction_y.C_pos.scaled(1 / params.K_y),
        "y-": params.friction_y.C_neg.scaled(1 / params.K_y),
    }
