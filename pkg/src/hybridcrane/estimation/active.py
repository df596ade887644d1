"""Active sampling of the dry-friction maps with four Gaussian processes.

An initial set of positions is measured, then each round fits one model
per friction component, picks for every axis the candidate with the
largest predictive variance over that axis' two components, measures
there and refits, until the variance is small enough or a budget runs out.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .axes import DOMAINS
from .breakaway import BreakawaySample
from .gpr import GaussianProcessFriction

log = logging.getLogger(__name__)

KEYS = (("x", 1), ("x", -1), ("y", 1), ("y", -1))
# keep commanded positions this far inside the rails
INSET = 0.01


@dataclass
class ActiveResult:
    models: dict
    dataset: list
    positions: list
    max_std: float
    stop_reason: str
    failures: list = field(default_factory=list)

    def samples(self):
        """The dataset as ``(axis, BreakawaySample)`` pairs."""
        return [(axis, s) for row in self.dataset for (axis, _), s in row.items()]


def _key_name(axis, direction):
    return f"{axis}{'+' if direction > 0 else '-'}"


def _fit(dataset, domains, random_state):
    models = {}
    for axis, direction in KEYS:
        pts = [row[(axis, direction)] for row in dataset]
        models[_key_name(axis, direction)] = GaussianProcessFriction(
            domain=domains[axis], random_state=random_state).fit(
            [p.position for p in pts], [p.voltage for p in pts])
    return models


def active_sampling(oracle, domains=DOMAINS, n_initial: int = 5, n_candidates: int = 101,
                    budget: int = 25, var_threshold: float = 0.05**2,
                    time_budget: float | None = None, inset: float = INSET,
                    random_state=0) -> ActiveResult:
    """Sequential variance-driven sampling of the four breakaway maps.

    ``oracle(x, y)`` returns a dict keyed by ``(axis, direction)`` holding
    :class:`BreakawaySample` values.  ``budget`` counts measured positions,
    including the initial ones.  The stop test uses the latent posterior
    variance, so measurement noise alone does not keep the loop running.
    """
    if budget < n_initial:
        raise ValueError("budget smaller than the initial grid")
    bounds = {a: (lo + inset, hi - inset) for a, (lo, hi) in domains.items()}
    cand = {a: np.linspace(lo, hi, n_candidates) for a, (lo, hi) in bounds.items()}
    initial = [(float(x), float(y)) for x, y in zip(np.linspace(*bounds["x"], n_initial),
                                                    np.linspace(*bounds["y"], n_initial))]
    start = time.perf_counter()
    dataset, positions, failures = [], [], []
    attempts = 0

    def measure(x, y):
        nonlocal attempts
        attempts += 1
        try:
            row = oracle(x, y)
        except Exception as exc:  # a failed measurement is skipped, not fatal
            log.warning("breakaway measurement at (%.4f, %.4f) failed: %s", x, y, exc)
            failures.append({"x": x, "y": y, "error": str(exc)})
            return
        dataset.append(row)
        positions.append((x, y))

    for x, y in initial:
        measure(x, y)
    if len(dataset) < 3:
        raise RuntimeError("fewer than three initial measurements succeeded")

    models, max_var, reason = None, np.inf, "budget"
    while True:
        models = _fit(dataset, domains, random_state)
        var = {k: m.predictive_variance(cand[k[0]], include_noise=False)
               for k, m in models.items()}
        max_var = max(float(v.max()) for v in var.values())
        if max_var < var_threshold:
            reason = "variance"
            break
        if attempts >= budget:
            reason = "budget"
            break
        if time_budget is not None and time.perf_counter() - start > time_budget:
            reason = "time"
            break
        new = {}
        for axis in ("x", "y"):
            worst = np.maximum(var[f"{axis}+"], var[f"{axis}-"])
            new[axis] = float(cand[axis][int(np.argmax(worst))])
        measure(new["x"], new["y"])
    return ActiveResult(models, dataset, positions, float(np.sqrt(max_var)), reason, failures)


def make_oracle(true_params, noise: float = 0.0, seed=0, quantize: bool = True,
                method: str = "record"):
    """Closure around the synthetic breakaway measurement."""
    from ..synth import breakaway_oracle
    rng = np.random.default_rng(seed)

    def oracle(x, y):
        return breakaway_oracle(x, y, true_params, noise, rng, quantize, method)
    return oracle


def dataset_rows(result: ActiveResult):
    """Flat rows ``(x, y, axis, direction, voltage)`` for CSV output."""
    out = []
    for (x, y), row in zip(result.positions, result.dataset):
        for (axis, direction), s in row.items():
            out.append((x, y, axis, direction, s.voltage))
    return out


def samples_from_rows(rows):
    """Inverse of :func:`dataset_rows` as ``(axis, BreakawaySample)`` pairs."""
    out = []
    for x, y, axis, direction, v in rows:
        pos = x if axis == "x" else y
        out.append((axis, BreakawaySample(float(pos), int(direction), float(v))))
    return out
