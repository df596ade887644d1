"""Measurement records: what an encoder-and-DAQ setup would log."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MEASURED = ("x_t", "y_t", "L", "alpha", "beta", "u_x", "u_y", "u_l")
POSITION_OF = {"x": "x_t", "y": "y_t", "l": "L"}
INPUT_OF = {"x": "u_x", "y": "u_y", "l": "u_l"}


class RecordKind:
    QUASISTATIC_RAMP = "QUASISTATIC_RAMP"
    RICH_MOTION = "RICH_MOTION"
    LOADED_ROPE = "LOADED_ROPE"
    LOADED_AXIS = "LOADED_AXIS"
    FREE_SWING = "FREE_SWING"
    BREAKAWAY_AT = "BREAKAWAY_AT"
    ALL = (QUASISTATIC_RAMP, RICH_MOTION, LOADED_ROPE, LOADED_AXIS, FREE_SWING, BREAKAWAY_AT)


@dataclass
class Record:
    """Uniformly sampled measured columns plus experiment metadata.

    ``meta`` carries at least ``kind`` and ``m_p``; ramps add ``axis`` and
    ``direction``.
    """

    name: str
    t: np.ndarray
    columns: dict
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.columns = {k: np.asarray(v, dtype=float) for k, v in self.columns.items()}
        for k, v in self.columns.items():
            if v.shape != self.t.shape:
                raise ValueError(f"column {k} has {v.size} samples, expected {self.t.size}")

    def __getitem__(self, name):
        if name == "t":
            return self.t
        return self.columns[name]

    @property
    def kind(self) -> str:
        return self.meta.get("kind", "")

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def m_p(self) -> float:
        return float(self.meta.get("m_p", 0.0))
