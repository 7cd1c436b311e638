"""Best-first branch and bound over binary variables."""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np

from .model import MilpModel, MilpSolution, SolveStats, Status
from .simplex import StandardForm, solve_standard_form


@dataclass
class SolverSettings:
    backend: str = "bnb"  # "bnb" (in-repo) or "highs" (scipy.optimize.milp)
    node_limit: int = 200_000
    time_limit: float = math.inf
    abs_gap: float = 1e-6
    rel_gap: float = 1e-6  # highs only
    int_tol: float = 1e-6
    lp_iter_limit: int = 50_000


def solve(model: MilpModel, settings: SolverSettings | None = None) -> MilpSolution:
    settings = settings or SolverSettings()
    if settings.backend == "highs":
        from .highs import solve_highs

        return solve_highs(model, settings)
    if settings.backend != "bnb":
        raise ValueError(f"unknown backend {settings.backend!r}")
    return branch_and_bound(model, settings)


def _most_fractional(x, binaries, tol):
    frac = np.abs(x[binaries] - np.round(x[binaries]))
    if frac.size == 0 or frac.max() <= tol:
        return None
    # Distance to 0.5; argmin returns the lowest id among ties.
    return int(binaries[np.argmin(np.abs(x[binaries] - np.floor(x[binaries]) - 0.5) + (frac <= tol) * 2.0)])


def branch_and_bound(model: MilpModel, settings: SolverSettings) -> MilpSolution:
    t0 = time.perf_counter()
    deadline = t0 + settings.time_limit if math.isfinite(settings.time_limit) else None
    sf = StandardForm.from_model(model)
    binaries = np.array(model.binary_ids(), dtype=int)
    stats = SolveStats(backend="bnb")

    incumbent = None
    best_obj = math.inf
    heap = [(-math.inf, 0, sf.lo.copy(), sf.hi.copy())]
    seq = 1
    hit_limit = False
    root_unbounded = False

    while heap:
        bound, _, lo, hi = heapq.heappop(heap)
        if bound >= best_obj - settings.abs_gap:
            continue
        if stats.nodes >= settings.node_limit or (deadline is not None and time.perf_counter() > deadline):
            heapq.heappush(heap, (bound, seq, lo, hi))
            hit_limit = True
            break
        stats.nodes += 1
        res = solve_standard_form(sf, lo, hi, settings.lp_iter_limit, deadline)
        stats.lp_pivots += res.iterations
        if stats.nodes == 1:
            stats.root_bound = res.objective
        if res.status is Status.ITERATION_LIMIT:
            heapq.heappush(heap, (bound, seq, lo, hi))
            hit_limit = True
            break
        if res.status is Status.UNBOUNDED:
            if stats.nodes == 1:
                root_unbounded = True
                break
            continue
        if res.status is not Status.OPTIMAL or res.objective >= best_obj - settings.abs_gap:
            continue
        j = _most_fractional(res.x, binaries, settings.int_tol)
        if j is None:
            x = res.x.copy()
            x[binaries] = np.round(x[binaries])
            incumbent, best_obj = x, res.objective
            continue
        for val in (0.0, 1.0):
            clo, chi = lo.copy(), hi.copy()
            clo[j] = chi[j] = val
            heapq.heappush(heap, (res.objective, seq, clo, chi))
            seq += 1

    stats.wall_time = time.perf_counter() - t0
    open_bounds = [b for b, *_ in heap if b < best_obj - settings.abs_gap]
    stats.best_bound = min([best_obj, *open_bounds]) if open_bounds else best_obj

    if root_unbounded:
        return MilpSolution(Status.UNBOUNDED, None, -math.inf, stats)
    if hit_limit and open_bounds:
        status = Status.ITERATION_LIMIT
    elif incumbent is None:
        status = Status.INFEASIBLE
    else:
        status = Status.OPTIMAL
    if incumbent is not None:
        obj = float(model.cost_vector() @ incumbent) + model.objective.constant
        return MilpSolution(status, incumbent, obj, stats)
    return MilpSolution(status, None, math.inf if status is Status.INFEASIBLE else math.nan, stats)
