"""Parallel (eps, alpha) sweeps with caching and deterministic reports."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .asymptotics import NOISE_FLOOR, FitError, RegimeReport, regime_of
from .cache import ResultCache, atomic_write_text, cache_key, clean_floats, dumps_json
from .cell import solve_cell
from .config import ExperimentConfig
from .pipeline import DEFAULT_L_CAP, PointParams, auto_params, compare_point
from .potential import TwoScalePotential

log = logging.getLogger(__name__)

FIT_KEYS = ("err_eff", "err_formula", "d_raw", "d_dressed")


@dataclass(frozen=True)
class PointTask:
    index: int
    potential: dict
    eps: float
    alpha: float
    count: int
    L: float | None
    N_grid: int | None
    n: int | None
    L_cap: float = DEFAULT_L_CAP
    functions: bool = True
    cache_dir: str | None = None


def _params(task: PointTask, cell) -> PointParams:
    auto = auto_params(cell, task.eps, task.alpha, task.count, L_cap=task.L_cap, L=task.L)
    n = task.n or auto.n
    from .oscillatory import min_grid, mode_set

    N_grid = task.N_grid or (auto.N_grid if n == auto.n else min_grid(mode_set(auto.L, task.eps, n).kmax))
    return PointParams(auto.L, n, auto.N, N_grid)


def run_point(task: PointTask) -> dict:
    """One sweep point; never raises (failures come back in the dict)."""
    cache = ResultCache(task.cache_dir) if task.cache_dir else None
    key = cache_key("point", potential=task.potential, eps=task.eps, alpha=task.alpha, count=task.count,
                    L=task.L, N_grid=task.N_grid, n=task.n, L_cap=task.L_cap, functions=task.functions)
    if cache is not None:
        hit = cache.get_json(key)
        if hit is not None:
            return hit
    try:
        cell = solve_cell(TwoScalePotential.from_spec(task.potential))
        params = _params(task, cell)
        res = compare_point(cell, task.eps, task.alpha, task.count, params, task.functions, cache=cache)
        out = {"index": task.index, "eps": task.eps, "alpha": task.alpha, "params": params.to_dict(),
               "negative_count": res.osc.negative_count(), "records": clean_floats(res.records), "error": None}
    except Exception as exc:  # recorded, the sweep goes on
        log.warning("point eps=%g alpha=%g failed: %s", task.eps, task.alpha, exc)
        return {"index": task.index, "eps": task.eps, "alpha": task.alpha, "params": None,
                "negative_count": None, "records": [], "error": f"{type(exc).__name__}: {exc}"}
    if cache is not None:
        cache.put_json(key, out)
    return out


def tasks_for(cfg: ExperimentConfig, cache_dir=None) -> list[PointTask]:
    spec = cfg.potential.to_spec()
    out = []
    for a in cfg.alphas:
        for e in cfg.eps:
            out.append(PointTask(len(out), spec, float(e), float(a), cfg.num_eigs, cfg.L, cfg.N_grid, cfg.n,
                                 cfg.L_cap, cfg.functions, None if cache_dir is None else str(cache_dir)))
    return out


@dataclass
class SweepResult:
    reports: list = field(default_factory=list)
    points: list = field(default_factory=list)

    @property
    def failures(self):
        return [p for p in self.points if p["error"]]

    def to_csv(self) -> str:
        parts = [r.to_csv() for r in self.reports]
        if not parts:
            return RegimeReport("none").to_csv()
        head, *rest = parts
        return head + "".join(p.split("\n", 1)[1] for p in rest)

    def to_json(self, cfg: ExperimentConfig | None = None) -> str:
        blob = {
            "config": cfg.to_dict() if cfg else None,
            "reports": [
                {"regime": r.regime, "alpha": r.alpha, "records": r.records,
                 "slopes": [dict(s) for s in r.fits]}
                for r in self.reports
            ],
            "points": [{k: p[k] for k in ("eps", "alpha", "params", "negative_count", "error")} for p in self.points],
        }
        return dumps_json(clean_floats(blob))


class SweepReport(RegimeReport):
    def __init__(self, regime, alpha):
        super().__init__(regime)
        self.alpha = alpha
        self.fits = []


def _fit_all(rep: SweepReport, noise_floor: float = NOISE_FLOOR):
    ns = sorted({r["n"] for r in rep.records})
    for key in FIT_KEYS:
        for n in ns:
            entry = {"quantity": key, "n": n}
            try:
                f = rep.fit(key, n, noise_floor)
                entry.update(slope=f.slope, radius=f.radius if math.isfinite(f.radius) else None,
                             intercept=f.intercept, max_residual=f.max_residual, points=len(f.used),
                             dropped=len(f.dropped))
            except FitError as exc:
                entry.update(slope=None, note=str(exc))
            rep.fits.append(entry)


def run_sweep(cfg: ExperimentConfig, cache_dir=None, jobs: int | None = None) -> SweepResult:
    tasks = tasks_for(cfg, cache_dir)
    jobs = max(1, int(jobs or cfg.jobs or 1))
    if jobs == 1 or len(tasks) == 1:
        points = [run_point(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks), os.cpu_count() or 1)) as ex:
            points = list(ex.map(run_point, tasks))  # map keeps submission order
    res = SweepResult(points=points)
    for a in cfg.alphas:
        rep = SweepReport(regime_of(a), a)
        for p in points:
            if p["alpha"] == a:
                rep.records.extend(p["records"])
        rep.sort()
        _fit_all(rep)
        res.reports.append(rep)
    return res


def write_outputs(res: SweepResult, cfg: ExperimentConfig, csv_path=None, json_path=None):
    if csv_path:
        atomic_write_text(csv_path, res.to_csv())
    if json_path:
        atomic_write_text(json_path, res.to_json(cfg))
