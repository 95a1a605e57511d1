"""Gamma sweeps: RDRP by dynamic programming, RI by repeated Q-learning runs.

Output is one CSV row per gamma (see :data:`devicedr.metrics.CSV_COLUMNS`).
``gamma`` vs ``rdrp`` gives the potential curve, ``gamma`` vs ``ri`` the
learner curve.

Run ``r`` at grid index ``k`` is seeded with ``base_seed ^ cell_hash(k, r)``,
where ``cell_hash`` is the first 8 bytes (little endian) of the BLAKE2b digest
of ``f"{k},{r}"``.  Appending grid points therefore leaves earlier streams
untouched, and results never depend on the worker count.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .config import model_from_dict, model_to_dict
from .env import DeviceEnv, RngStream
from .instances import paper_default_instance, tiny_instance  # noqa: F401  (re-exported)
from .learning import LearnerConfig, StepSize, learn
from .metrics import (
    CSV_COLUMNS,
    MetricsReport,
    baseline_policy,
    dr_potential,
    mean_and_se,
    policy_value,
    relative_improvement,
)
from .model import DeviceModel

log = logging.getLogger(__name__)

U64 = (1 << 64) - 1


def cell_hash(k: int, r: int) -> int:
    digest = hashlib.blake2b(f"{k},{r}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def cell_seed(base_seed: int, k: int, r: int) -> int:
    return (int(base_seed) & U64) ^ cell_hash(k, r)


def gamma_range(start: float, stop: float, step: float) -> list[float]:
    """Inclusive arithmetic grid, rounded to 10 decimals to avoid drift."""
    if step <= 0:
        raise ValueError("step must be > 0")
    n = int(math.floor((stop - start) / step + 1e-9))
    return [round(start + i * step, 10) for i in range(n + 1)]


@dataclass(frozen=True)
class SweepConfig:
    gamma_grid: tuple[float, ...]
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    runs: int = 200
    base_seed: int = 0
    output_path: str = "sweep.csv"

    def __post_init__(self):
        grid = tuple(float(g) for g in self.gamma_grid)
        object.__setattr__(self, "gamma_grid", grid)
        if not grid:
            raise ValueError("gamma_grid must be non-empty")
        if any(g < 0 for g in grid):
            raise ValueError("gamma_grid must be non-negative")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("gamma_grid must be strictly increasing")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if not 0 <= self.base_seed <= U64:
            raise ValueError("base_seed must be an unsigned 64-bit integer")


def sweep_config_from_dict(tree: dict) -> SweepConfig:
    """Parse a sweep file; ``gamma_grid`` is a list or ``{start, stop, step}``."""
    grid = tree["gamma_grid"]
    if isinstance(grid, dict):
        grid = gamma_range(grid["start"], grid["stop"], grid["step"])
    lt = dict(tree.get("learner", {}))
    if "step_size" in lt:
        lt["step_size"] = StepSize(**lt["step_size"])
    return SweepConfig(
        gamma_grid=grid,
        learner=LearnerConfig(**lt),
        runs=int(tree.get("runs", 200)),
        base_seed=int(tree.get("base_seed", 0)),
        output_path=str(tree.get("output_path", "sweep.csv")),
    )


def sweep_config_to_dict(cfg: SweepConfig) -> dict:
    return {
        "gamma_grid": list(cfg.gamma_grid),
        "learner": asdict(cfg.learner),
        "runs": cfg.runs,
        "base_seed": cfg.base_seed,
        "output_path": cfg.output_path,
    }


def load_sweep_config(path: str | Path) -> SweepConfig:
    return sweep_config_from_dict(json.loads(Path(path).read_text()))


# -- learner runs (executed in workers) ----------------------------------------

_template: DeviceModel | None = None
_envs: dict[float, DeviceEnv] = {}


def _init_worker(template: dict) -> None:
    global _template
    _template = model_from_dict(template)
    _envs.clear()


def _env_for(gamma: float) -> DeviceEnv:
    env = _envs.get(gamma)
    if env is None:
        env = _envs[gamma] = DeviceEnv(_template.with_gamma(gamma))
    return env


def _learn_cell(task):
    gamma, cfg, seed = task
    try:
        return learn(_env_for(gamma), cfg, RngStream(seed)).discounted_cost, None
    except Exception:  # reported in the sweep row
        return math.nan, traceback.format_exc(limit=3)


def lifetime_costs(model: DeviceModel, cfg: LearnerConfig, seeds: list[int]) -> list[float]:
    """Realized discounted lifetime cost of one learner run per seed (serial)."""
    env = DeviceEnv(model)
    return [learn(env, cfg, RngStream(s)).discounted_cost for s in seeds]


# -- sweep -----------------------------------------------------------------------


def _report_for(model: DeviceModel, gamma: float, costs, errors, tol: float):
    if errors:
        raise RuntimeError(f"{len(errors)} learner runs failed; first:\n{errors[0]}")
    v_base = policy_value(model, baseline_policy(model), tol)
    pot = dr_potential(model, tol)
    est = mean_and_se(costs)
    ri = relative_improvement(v_base, est.mean) if v_base > 0 else None
    return MetricsReport(gamma, v_base, pot.v_star, v_base - pot.v_star, pot.rdrp, est, ri)


def run_sweep(
    model_template: DeviceModel,
    cfg: SweepConfig,
    workers: int | None = None,
    tol: float = 1e-9,
) -> list[MetricsReport]:
    """Compute one :class:`MetricsReport` per gamma and write the CSV.

    Rows are written to ``cfg.output_path`` as each gamma completes, in grid
    order.  A failure at one gamma yields a row of ``nan`` and the sweep
    moves on; inspect ``report.error``.
    """
    if workers is None:
        workers = os.cpu_count() or 1
    tasks = [
        (gamma, cfg.learner, cell_seed(cfg.base_seed, k, r))
        for k, gamma in enumerate(cfg.gamma_grid)
        for r in range(cfg.runs)
    ]
    template = model_to_dict(model_template)
    if workers <= 1:
        _init_worker(template)
        results = map(_learn_cell, tasks)
        pool = None
    else:
        pool = ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(template,))
        results = pool.map(_learn_cell, tasks, chunksize=max(1, cfg.runs // 4))

    reports = []
    path = Path(cfg.output_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            fh.flush()
            for k, gamma in enumerate(cfg.gamma_grid):
                cell = [next(results) for _ in range(cfg.runs)]
                costs = [c for c, _ in cell]
                errors = [e for _, e in cell if e is not None]
                model = model_template.with_gamma(gamma)
                try:
                    report = _report_for(model, gamma, costs, errors, tol)
                except Exception as exc:
                    log.error("gamma=%g failed: %s", gamma, exc)
                    report = MetricsReport.failed(gamma, str(exc))
                reports.append(report)
                writer.writerow(report.csv_row())
                fh.flush()
                log.info(
                    "gamma=%g rdrp=%s ri=%s (%d/%d)",
                    gamma, report.rdrp, report.ri, k + 1, len(cfg.gamma_grid),
                )
    finally:
        if pool is not None:
            pool.shutdown()
    return reports


def read_sweep_csv(path: str | Path) -> list[dict[str, float]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        out.append({k: (math.nan if v == "undefined" else float(v)) for k, v in row.items()})
    return out


def rows_as_arrays(rows: list[dict[str, float]]) -> dict[str, np.ndarray]:
    return {c: np.array([r[c] for r in rows]) for c in CSV_COLUMNS}
