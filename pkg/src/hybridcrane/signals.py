"""Input signals u(t) returning ``(u_x, u_y, u_l)``, with a JSON form."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

AXES = ("x", "y", "l")


def _on_axis(axis, v):
    return (v if axis == "x" else 0.0, v if axis == "y" else 0.0, v if axis == "l" else 0.0)


@dataclass(frozen=True)
class Zero:
    def __call__(self, t):
        return (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Constant:
    u_x: float = 0.0
    u_y: float = 0.0
    u_l: float = 0.0

    def __call__(self, t):
        return (self.u_x, self.u_y, self.u_l)


@dataclass(frozen=True)
class SineForce:
    """``offset + amplitude * sin(2 pi f t + phase)`` on one axis."""

    axis: str = "l"
    amplitude: float = 0.0
    frequency: float = 1.0
    offset: float = 0.0
    phase: float = 0.0

    def __call__(self, t):
        v = self.offset + self.amplitude * math.sin(2 * math.pi * self.frequency * t + self.phase)
        return _on_axis(self.axis, v)


@dataclass(frozen=True)
class Ramp:
    """Zero until ``delay``, then ``direction * (start + rate * (t - delay))``."""

    axis: str = "l"
    rate: float = 0.1
    direction: int = 1
    delay: float = 0.0
    start: float = 0.0

    def __call__(self, t):
        v = self.direction * (self.start + self.rate * (t - self.delay)) if t >= self.delay else 0.0
        return _on_axis(self.axis, v)


@dataclass(frozen=True)
class MultiSine:
    """Sum of sines on one axis, ``amplitude * sum(w_i sin(2 pi f_i t + p_i))``.

    A raised-cosine fade-in over ``fade`` seconds starts the motion smoothly.
    """

    axis: str = "x"
    amplitude: float = 1.0
    frequencies: tuple[float, ...] = (0.25, 0.75)
    weights: tuple[float, ...] = (1.0, 0.5)
    phases: tuple[float, ...] = (0.0, 1.0)
    offset: float = 0.0
    fade: float = 0.0

    def __post_init__(self):
        for name in ("frequencies", "weights", "phases"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if not len(self.frequencies) == len(self.weights) == len(self.phases):
            raise ValueError("frequencies, weights and phases must have equal length")

    def __call__(self, t):
        v = sum(w * math.sin(2 * math.pi * f * t + p)
                for f, w, p in zip(self.frequencies, self.weights, self.phases))
        if self.fade > 0 and t < self.fade:
            v *= 0.5 - 0.5 * math.cos(math.pi * t / self.fade)
        return _on_axis(self.axis, self.offset + self.amplitude * v)


@dataclass(frozen=True)
class Sum:
    """Componentwise sum of several signals."""

    parts: tuple = field(default_factory=tuple)

    def __call__(self, t):
        ux = uy = ul = 0.0
        for p in self.parts:
            a, b, c = p(t)
            ux += a
            uy += b
            ul += c
        return (ux, uy, ul)


_TYPES = {"zero": Zero, "constant": Constant, "sine": SineForce, "ramp": Ramp,
          "multisine": MultiSine, "sum": Sum}
_NAMES = {v: k for k, v in _TYPES.items()}


def to_dict(sig) -> dict:
    if isinstance(sig, Sum):
        return {"type": "sum", "parts": [to_dict(p) for p in sig.parts]}
    d = asdict(sig)
    for k, v in d.items():
        if isinstance(v, tuple):
            d[k] = list(v)
    return {"type": _NAMES[type(sig)], **d}


def from_dict(d: dict):
    d = dict(d)
    kind = d.pop("type", None)
    if kind not in _TYPES:
        raise ValueError(f"unknown input type {kind!r}")
    cls = _TYPES[kind]
    if cls is Sum:
        extra = set(d) - {"parts"}
        if extra:
            raise ValueError(f"unknown key(s) for sum input: {sorted(extra)}")
        return Sum(tuple(from_dict(p) for p in d.get("parts", [])))
    allowed = {f.name for f in fields(cls)}
    extra = set(d) - allowed
    if extra:
        raise ValueError(f"unknown key(s) for {kind} input: {sorted(extra)}")
    for k, v in d.items():
        if isinstance(v, list):
            d[k] = tuple(v)
    if "axis" in d and d["axis"] not in AXES:
        raise ValueError(f"unknown axis {d['axis']!r}")
    return cls(**d)
