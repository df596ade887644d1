"""Wall-time and accuracy comparison of the hybrid and tanh models."""
from __future__ import annotations

import statistics
import time
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .cases import Case
from .hybrid import SimulationError, integrate, zero_input

DEFAULT_KS = (1.0, 10.0, 100.0, 1000.0, 10000.0)


@dataclass(frozen=True)
class BenchmarkRow:
    model: str
    k: float | None
    wall_time: float
    rmse: float
    failed: bool = False
    error: str = ""

    @property
    def label(self) -> str:
        return "hybrid" if self.k is None else f"tanh(k={self.k:g})"


def _timed(case: Case, config, repeats: int):
    u = case.input or zero_input
    times = []
    traj = None
    # the first run warms caches and is discarded
    for r in range(repeats + 1):
        start = time.perf_counter()
        traj = integrate(case.state, case.params, config, u)
        elapsed = time.perf_counter() - start
        if r:
            times.append(elapsed)
    return statistics.median(times), traj


def velocity_rmse(reference, other, field: str) -> float:
    a, b = reference.grid(), other.grid()
    n = min(len(a), len(b))
    if n == 0 or abs(a.t[n - 1] - b.t[n - 1]) > 1e-9:
        raise ValueError("trajectories do not share an output grid")
    return float(np.sqrt(np.mean((a[field][:n] - b[field][:n]) ** 2)))


def benchmark(case: Case, k_list=DEFAULT_KS, repeats: int = 5) -> list[BenchmarkRow]:
    """Hybrid reference row followed by one tanh row per gain.

    Times are medians over ``repeats`` runs after one discarded warm-up run.
    A failing run yields a row with ``failed=True``; the table is always
    returned unless the hybrid reference itself fails.
    """
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    if repeats < 5:
        warnings.warn(f"only {repeats} repeat(s); medians will be noisy", stacklevel=2)
    field = case.velocity_field
    hybrid_cfg = replace(case.config, model="hybrid")
    rows = []
    try:
        t_h, ref = _timed(case, hybrid_cfg, repeats)
    except SimulationError as exc:
        rows.append(BenchmarkRow("hybrid", None, float("nan"), float("nan"), True, str(exc)))
        ref = None
    else:
        rows.append(BenchmarkRow("hybrid", None, t_h, 0.0))
    for k in k_list:
        cfg = replace(case.config, model="tanh", k=float(k))
        try:
            t_k, traj = _timed(case, cfg, repeats)
            err = velocity_rmse(ref, traj, field) if ref is not None else float("nan")
        except (SimulationError, ValueError) as exc:
            rows.append(BenchmarkRow("tanh", float(k), float("nan"), float("nan"), True, str(exc)))
            continue
        rows.append(BenchmarkRow("tanh", float(k), t_k, err))
    return rows


def format_table(rows) -> str:
    lines = [f"{'model':<18}{'time [s]':>12}{'RMSE [m/s]':>14}"]
    for r in rows:
        if r.failed:
            lines.append(f"{r.label:<18}{'failed':>12}{'':>14}  {r.error}")
        else:
            lines.append(f"{r.label:<18}{r.wall_time:>12.4f}{r.rmse:>14.3e}")
    return "\n".join(lines)
