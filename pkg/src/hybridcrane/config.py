"""JSON schemas for parameter files and simulation scenarios.

Parameter files store Coulomb maps either in newtons (``"coulomb_units":
"N"``) or as breakaway voltages (``"V"``), which are multiplied by the axis
gain on load.  Loading always returns force units; every default is
written out again on save so that files round-trip unchanged.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, fields

from .core import AXES, STATE_FIELDS, AxisFriction, CraneParams, CraneState, Polynomial4
from .signals import Zero, from_dict as signal_from_dict, to_dict as signal_to_dict
from .sim.hybrid import SimConfig

UNITS = ("N", "V")
SCENARIO_KEYS = ("params", "initial_state", "input", "sim")
_SCALAR = [f.name for f in fields(CraneParams) if not f.name.startswith("friction_")]


class SchemaError(ValueError):
    pass


def _reject_unknown(d, allowed, where):
    if not isinstance(d, dict):
        raise SchemaError(f"{where}: expected an object")
    extra = set(d) - set(allowed)
    if extra:
        raise SchemaError(f"{where}: unknown key(s) {sorted(extra)}")


def _bound(v):
    return None if math.isinf(v) else v


def poly_to_dict(p: Polynomial4) -> dict:
    return {"coeffs": list(p.coeffs), "domain": [_bound(p.domain[0]), _bound(p.domain[1])]}


def poly_from_dict(d, where="polynomial") -> Polynomial4:
    if isinstance(d, (int, float)):
        return Polynomial4.constant(float(d))
    _reject_unknown(d, ("coeffs", "domain"), where)
    lo, hi = d.get("domain", [None, None])
    return Polynomial4(tuple(d.get("coeffs", ())),
                       (-math.inf if lo is None else lo, math.inf if hi is None else hi))


def friction_to_dict(f: AxisFriction) -> dict:
    return {"D_pos": f.D_pos, "D_neg": f.D_neg, "C_pos": poly_to_dict(f.C_pos),
            "C_neg": poly_to_dict(f.C_neg)}


def friction_from_dict(d, where) -> AxisFriction:
    _reject_unknown(d, ("D_pos", "D_neg", "C_pos", "C_neg"), where)
    return AxisFriction(float(d.get("D_pos", 0.0)), float(d.get("D_neg", 0.0)),
                        poly_from_dict(d.get("C_pos", 0.0), f"{where}.C_pos"),
                        poly_from_dict(d.get("C_neg", 0.0), f"{where}.C_neg"))


def params_to_dict(p: CraneParams, coulomb_units: str = "N") -> dict:
    """Parameter file contents; with ``"V"`` the maps are divided by the gains."""
    if coulomb_units not in UNITS:
        raise SchemaError(f"coulomb_units must be one of {UNITS}")
    d = {name: getattr(p, name) for name in _SCALAR}
    for a in AXES:
        f = p.friction(a)
        if coulomb_units == "V":
            k = p.gain(a)
            f = AxisFriction(f.D_pos, f.D_neg, f.C_pos.scaled(1 / k), f.C_neg.scaled(1 / k))
        d[f"friction_{a}"] = friction_to_dict(f)
    d["coulomb_units"] = coulomb_units
    return d


def params_from_dict(d) -> CraneParams:
    allowed = _SCALAR + [f"friction_{a}" for a in AXES] + ["coulomb_units"]
    _reject_unknown(d, allowed, "params")
    units = d.get("coulomb_units", "N")
    if units not in UNITS:
        raise SchemaError(f"params.coulomb_units must be one of {UNITS}, got {units!r}")
    try:
        kw = {k: float(d[k]) for k in _SCALAR if k in d}
        base = CraneParams(**kw)
        for a in AXES:
            key = f"friction_{a}"
            if key in d:
                f = friction_from_dict(d[key], f"params.{key}")
                if units == "V":
                    k = base.gain(a)
                    f = AxisFriction(f.D_pos, f.D_neg, f.C_pos.scaled(k), f.C_neg.scaled(k))
                kw[key] = f
        return CraneParams(**kw)
    except SchemaError:
        raise
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"params: {exc}") from exc


def config_to_dict(c: SimConfig) -> dict:
    d = asdict(c)
    d["locked_axes"] = list(c.locked_axes)
    return d


def config_from_dict(d) -> SimConfig:
    _reject_unknown(d, [f.name for f in fields(SimConfig)], "sim")
    try:
        return SimConfig(**d)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"sim: {exc}") from exc


def state_from_dict(d) -> CraneState:
    _reject_unknown(d, STATE_FIELDS, "initial_state")
    try:
        return CraneState(**{k: float(v) for k, v in d.items()})
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"initial_state: {exc}") from exc


class Scenario:
    """Parameters, initial state, input and solver settings of one run."""

    def __init__(self, params: CraneParams, initial_state: CraneState, input=None,
                 sim: SimConfig | None = None, coulomb_units: str = "N"):
        self.params = params
        self.initial_state = initial_state
        self.input = input if input is not None else Zero()
        self.sim = sim if sim is not None else SimConfig()
        self.coulomb_units = coulomb_units

    def to_dict(self) -> dict:
        return {"params": params_to_dict(self.params, self.coulomb_units),
                "initial_state": {k: getattr(self.initial_state, k) for k in STATE_FIELDS},
                "input": signal_to_dict(self.input),
                "sim": config_to_dict(self.sim)}

    @classmethod
    def from_dict(cls, d) -> "Scenario":
        _reject_unknown(d, SCENARIO_KEYS, "scenario")
        if "params" not in d or "initial_state" not in d:
            raise SchemaError("scenario needs 'params' and 'initial_state'")
        params = params_from_dict(d["params"])
        try:
            sig = signal_from_dict(d["input"]) if "input" in d else Zero()
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"input: {exc}") from exc
        sim = config_from_dict(d.get("sim", {}))
        return cls(params, state_from_dict(d["initial_state"]), sig, sim,
                   d["params"].get("coulomb_units", "N"))


def load_scenario(path) -> Scenario:
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read scenario {path}: {exc}") from exc
    return Scenario.from_dict(doc)


def load_params(path) -> CraneParams:
    """A parameter file, or the ``params`` block of an estimation result."""
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read parameters {path}: {exc}") from exc
    if isinstance(doc, dict) and "params" in doc and isinstance(doc["params"], dict):
        if doc.get("incomplete"):
            raise SchemaError(f"{path} holds an incomplete estimate")
        doc = doc["params"]
    return params_from_dict(doc)


def fixture_path(name: str):
    """Path of a bundled fixture (``case1``, ``table3_params`` ...), or None."""
    from importlib import resources
    fname = name if name.endswith(".json") else f"{name}.json"
    if "/" in fname or "\\" in fname:
        return None
    p = resources.files("hybridcrane") / "data" / fname
    return p if p.is_file() else None
