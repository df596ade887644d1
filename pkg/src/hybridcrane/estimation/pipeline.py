"""Full identification run over a dataset directory.

Stages run in the rig's order: hoist first, then the two trolley axes,
then swing damping.  Each stage names the record kinds it needs; asking
for a stage whose records are missing raises :class:`MissingRecordsError`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import friction_to_dict, params_to_dict, poly_to_dict
from ..core import AxisFriction, CraneParams
from ..records import RecordKind
from .active import samples_from_rows
from .axes import AXIS_PREPROCESSING, disaggregate, estimate_axis, estimate_p5
from .common import Preprocessing
from .rope import estimate_rope
from .swing import estimate_swing_damping

STEPS = ("rope", "axes", "swing")
KNOWN_KEYS = ("m_r", "m_t", "g", "R_x", "R_y", "R_l", "x_min", "x_max", "y_min", "y_max",
              "l_min", "l_max")


class MissingRecordsError(LookupError):
    def __init__(self, step, kinds):
        super().__init__(f"step '{step}' needs record kind(s): {', '.join(kinds)}")
        self.step = step
        self.kinds = tuple(kinds)


def parse_steps(text: str) -> tuple[str, ...]:
    names = [s.strip() for s in text.split(",") if s.strip()]
    if "all" in names:
        return STEPS
    bad = [n for n in names if n not in STEPS]
    if bad or not names:
        raise ValueError(f"unknown step(s) {bad}; choose from {', '.join(STEPS)}, all")
    return tuple(s for s in STEPS if s in names)


def ls_summary(res) -> dict:
    if res is None:
        return None
    return {"labels": list(res.labels), "theta": [float(v) for v in res.theta],
            "residual_rms": float(res.residual_rms),
            "corr": np.round(res.corr, 12).tolist(), "max_offdiag": res.max_offdiag()}


@dataclass
class PipelineResult:
    steps: tuple
    known: dict
    p: dict = field(default_factory=dict)
    p5: dict = field(default_factory=dict)
    physical: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def incomplete(self) -> bool:
        return set(self.steps) != set(STEPS)

    def crane_params(self) -> CraneParams | None:
        """Simulator parameters, or None before every stage has run."""
        if self.incomplete:
            return None
        kw = {k: v for k, v in self.known.items() if k in KNOWN_KEYS}
        kw.update({k: v for k, v in self.physical.items() if not k.startswith("friction_")})
        kw.update({k: v for k, v in self.physical.items() if k.startswith("friction_")})
        return CraneParams(**kw)

    def params_block(self) -> dict:
        full = self.crane_params()
        if full is not None:
            return params_to_dict(full, "N")
        out = {k: v for k, v in self.known.items() if k in KNOWN_KEYS}
        for k, v in self.physical.items():
            out[k] = friction_to_dict(v) if isinstance(v, AxisFriction) else v
        out["coulomb_units"] = "N"
        return out

    def to_json(self) -> dict:
        return {"incomplete": self.incomplete, "steps": list(self.steps),
                "p_parameters": self.p,
                "p5_volts": {k: poly_to_dict(v) for k, v in self.p5.items()},
                "params": self.params_block()}


def _select(records, kind, **meta):
    out = []
    for r in records:
        if r.kind != kind:
            continue
        if all(r.meta.get(k) == v for k, v in meta.items()):
            out.append(r)
    return out


def run_pipeline(records, breakaway_rows, steps=STEPS, known: dict | None = None,
                 rope_pre: Preprocessing = Preprocessing(),
                 axis_pre: Preprocessing = AXIS_PREPROCESSING,
                 random_state=0) -> PipelineResult:
    """Identify the requested stages from measurement records.

    ``known`` supplies what the estimator cannot see (carriage masses,
    pulley radii, limits); it defaults to the rig values.
    """
    defaults = CraneParams()
    known = {k: getattr(defaults, k) for k in KNOWN_KEYS} | dict(known or {})
    steps = tuple(s for s in STEPS if s in steps)
    res = PipelineResult(steps, known)
    g = known["g"]

    # check everything first so a missing record fails before any work
    need = {
        "rope": {"quasistatic": _select(records, RecordKind.QUASISTATIC_RAMP, axis="l"),
                 "noload": _select(records, RecordKind.RICH_MOTION, axis="l"),
                 "loaded": _select(records, RecordKind.LOADED_ROPE)},
        "axes": {"rich": [r for r in _select(records, RecordKind.RICH_MOTION)
                          if r.meta.get("axis") in (None, "")],
                 "breakaway": list(breakaway_rows)},
        "swing": {"free": _select(records, RecordKind.FREE_SWING)},
    }
    kinds = {"quasistatic": RecordKind.QUASISTATIC_RAMP, "noload": RecordKind.RICH_MOTION,
             "loaded": RecordKind.LOADED_ROPE, "rich": RecordKind.RICH_MOTION,
             "breakaway": RecordKind.BREAKAWAY_AT, "free": RecordKind.FREE_SWING}
    for step in steps:
        missing = [kinds[k] for k, v in need[step].items() if not v]
        if missing:
            raise MissingRecordsError(step, missing)

    if "rope" in steps:
        n = need["rope"]
        rope = estimate_rope(n["quasistatic"], n["noload"][0], n["loaded"], rope_pre,
                             radius=known["R_l"], g=g)
        res.p.update(rope.as_dict())
        K = 1.0 / rope.P4
        res.physical.update({"K_l": K, "J_l": rope.P1 * K,
                             "friction_l": AxisFriction.constant(rope.P2 * K, rope.P3 * K)})
        res.diagnostics["rope"] = {
            "p12": ls_summary(rope.p12), "p4": ls_summary(rope.p4),
            "joint": ls_summary(rope.joint), "staged_corr_P1_P4": rope.corr_p1_p4,
            "breakaway": [{"direction": s.direction, "voltage": s.voltage}
                          for s in rope.breakaway]}

    if "axes" in steps:
        domains = {a: (known[f"{a}_min"], known[f"{a}_max"]) for a in "xy"}
        p5 = estimate_p5(samples_from_rows(need["axes"]["breakaway"]), domains, random_state)
        res.p5 = {k: m.poly for k, m in p5.items()}
        res.diagnostics["p5"] = {k: {"hyperparameters": m.gpr.hyperparameters,
                                     "poly_max_dev": m.max_dev, "n_samples": m.n_samples}
                                 for k, m in p5.items()}
        rich = need["axes"]["rich"][0]
        moving = {"x": known["m_t"] + known["m_r"], "y": known["m_t"]}
        for axis in "xy":
            loaded = _select(records, RecordKind.LOADED_AXIS, axis=axis)
            r = estimate_axis(rich, axis, p5, axis_pre, loaded[0] if loaded else None)
            res.p.update(r.as_dict())
            fallback = None
            if "K_l" in res.physical:
                # identical motors: force gain scales inversely with pulley radius
                fallback = res.physical["K_l"] * known["R_l"] / known[f"R_{axis}"]
            phys = disaggregate(r, moving[axis], fallback)
            diag = {"motion": ls_summary(r.motion), "gain": ls_summary(r.gain)}
            if phys is None:
                diag["gain_source"] = "missing"
                res.diagnostics[f"axis_{axis}"] = diag
                continue
            K = phys["K"]
            dom = domains[axis]
            fr = AxisFriction(max(phys["D_pos"], 0.0), max(phys["D_neg"], 0.0),
                              p5[f"{axis}+"].poly.scaled(K).with_domain(dom),
                              p5[f"{axis}-"].poly.scaled(K).with_domain(dom))
            res.physical.update({f"K_{axis}": K, f"J_{axis}": phys["J"],
                                 f"friction_{axis}": fr})
            diag["gain_source"] = phys["gain_source"]
            res.diagnostics[f"axis_{axis}"] = diag

    if "swing" in steps:
        sw = estimate_swing_damping(need["swing"]["free"], rope_pre, g=g)
        res.p.update(sw.as_dict())
        res.physical.update({k: v for k, v in sw.as_dict().items() if np.isfinite(v)})
        res.diagnostics["swing"] = {"alpha": ls_summary(sw.alpha), "beta": ls_summary(sw.beta)}
    return res

