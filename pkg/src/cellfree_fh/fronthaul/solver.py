"""MILP backends: built-in branch-and-bound, HiGHS (via scipy) and external command."""

from __future__ import annotations

import heapq
import logging
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import simplex
from .lpfile import read_solution, write_lp
from .model import MilpModel

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
FEASIBLE_GAP = "feasible-with-gap"
INFEASIBLE = "infeasible"
TIME_LIMIT = "time-limit"


@dataclass
class SolverConfig:
    backend: str = "builtin"  # builtin | highs | external
    time_limit: float | None = None  # seconds
    abs_gap: float = 1e-6
    rel_gap: float = 0.0
    node_limit: int = 1_000_000
    # external backend: template with {lp} and {sol} placeholders
    command: str | None = None


@dataclass
class MilpSolution:
    values: np.ndarray
    objective: float
    status: str
    bound: float = np.nan
    nodes: int = 0
    wall_time: float = 0.0

    def value(self, model: MilpModel, name: str) -> float:
        return float(self.values[model.index[name]])


def solve_milp(model: MilpModel, cfg: SolverConfig | None = None) -> MilpSolution:
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    if model.infeasible_reason:
        log.warning("model infeasible at build time: %s", model.infeasible_reason)
        sol = MilpSolution(np.full(model.num_vars, np.nan), np.inf, INFEASIBLE)
    elif cfg.backend == "builtin":
        sol = _branch_and_bound(model, cfg)
    elif cfg.backend == "highs":
        sol = _highs(model, cfg)
    elif cfg.backend == "external":
        sol = _external(model, cfg)
    else:
        raise ValueError(f"unknown solver backend {cfg.backend!r}")
    if np.all(np.isfinite(sol.values)):
        _tighten_max_loads(model, sol)
    sol.wall_time = time.perf_counter() - t0
    return sol


def placement(model: MilpModel, sol: MilpSolution) -> dict[int, int]:
    """Hosting DU of every user, read from the ``b_k_n`` values."""
    hosts = {}
    for name, j in model.index.items():
        if name.startswith("b_") and sol.values[j] > 0.5:
            _, k, n = name.split("_")
            hosts[int(k)] = int(n)
    return hosts


def with_placement(model: MilpModel, hosts: dict[int, int]) -> MilpModel:
    """Copy of ``model`` with every ``b_k_n`` fixed to the given placement (an LP in disguise)."""
    lb, ub = model.lb.copy(), model.ub.copy()
    for name, j in model.index.items():
        if name.startswith("b_"):
            _, k, n = name.split("_")
            lb[j] = ub[j] = float(hosts.get(int(k)) == int(n))
    return replace(model, lb=lb, ub=ub)


def improve_with_placement(model: MilpModel, sol: MilpSolution, hosts: dict[int, int], cfg: SolverConfig) -> MilpSolution:
    """Warm start by hand: route the given placement optimally and keep whichever solution is better.

    Used along a distortion sweep, where the previous placement stays feasible
    because demands only shrink. The dual bound of ``sol`` is kept.
    """
    if sol.status == INFEASIBLE:
        return sol
    t0 = time.perf_counter()
    alt = solve_milp(with_placement(model, hosts), cfg)
    if not np.all(np.isfinite(alt.values)) or alt.objective >= sol.objective - cfg.abs_gap:
        sol.wall_time += time.perf_counter() - t0
        return sol
    bound = sol.bound if np.isfinite(sol.bound) else -np.inf
    status = OPTIMAL if alt.objective - bound <= cfg.abs_gap else FEASIBLE_GAP
    return MilpSolution(alt.values, alt.objective, status, sol.bound, sol.nodes, sol.wall_time + time.perf_counter() - t0)


def _tighten_max_loads(model: MilpModel, sol: MilpSolution) -> None:
    """Lower each max-load variable to the largest row it bounds (stays feasible, never worse)."""
    x = sol.values
    A = model.A.tocsc()
    for var in ("CL", "CQ", "CD"):
        j = model.index.get(var)
        if j is None:
            continue
        rows = A.indices[A.indptr[j] : A.indptr[j + 1]]
        if rows.size == 0:
            x[j] = max(model.lb[j], 0.0)
            continue
        # capacity rows read: sum(loads) - C <= 0
        loads = model.A[rows] @ x + x[j]
        x[j] = max(float(loads.max()), model.lb[j])
    sol.objective = float(model.objective @ x)


def _most_fractional(x: np.ndarray, binaries: np.ndarray, tol: float) -> int | None:
    frac = np.abs(x[binaries] - np.round(x[binaries]))
    if frac.size == 0 or frac.max() <= tol:
        return None
    # most fractional = closest to 0.5; lowest index among ties
    return int(binaries[np.argmin(np.abs(frac - 0.5))])


def _branch_and_bound(model: MilpModel, cfg: SolverConfig, int_tol: float = 1e-6) -> MilpSolution:
    """Best-first branch-and-bound over the binaries with simplex relaxations."""
    A = model.A.toarray()
    lo, hi = model.row_bounds()
    binaries = np.flatnonzero(model.binary)
    deadline = None if cfg.time_limit is None else time.perf_counter() + cfg.time_limit

    def relax(lb, ub):
        return simplex.solve_lp(model.objective, A, lo, hi, lb, ub)

    incumbent, best = None, np.inf
    root = relax(model.lb.copy(), model.ub.copy())
    if root.status != simplex.OPTIMAL:
        status = INFEASIBLE if root.status == simplex.INFEASIBLE else root.status
        return MilpSolution(np.full(model.num_vars, np.nan), np.inf, status)
    counter = 0
    heap = [(root.objective, counter, model.lb.copy(), model.ub.copy(), root)]
    nodes = 0
    timed_out = False
    while heap:
        bound, _, lb, ub, res = heapq.heappop(heap)
        if bound >= best - cfg.abs_gap:
            continue
        if deadline is not None and time.perf_counter() > deadline or nodes >= cfg.node_limit:
            heapq.heappush(heap, (bound, -1, lb, ub, res))
            timed_out = True
            break
        nodes += 1
        j = _most_fractional(res.x, binaries, int_tol)
        if j is None:
            x = res.x.copy()
            x[binaries] = np.round(x[binaries])
            incumbent, best = x, float(model.objective @ x)
            continue
        for v in (0.0, 1.0):
            lb2, ub2 = lb.copy(), ub.copy()
            lb2[j] = ub2[j] = v
            child = relax(lb2, ub2)
            if child.status == simplex.OPTIMAL and child.objective < best - cfg.abs_gap:
                counter += 1
                heapq.heappush(heap, (child.objective, counter, lb2, ub2, child))

    lower = min([h[0] for h in heap], default=best)
    if incumbent is None:
        status = TIME_LIMIT if timed_out else INFEASIBLE
        return MilpSolution(np.full(model.num_vars, np.nan), np.inf, status, lower, nodes)
    status = TIME_LIMIT if timed_out else OPTIMAL
    return MilpSolution(incumbent, best, status, min(lower, best), nodes)


def _highs(model: MilpModel, cfg: SolverConfig) -> MilpSolution:
    from scipy.optimize import Bounds, LinearConstraint, milp

    lo, hi = model.row_bounds()
    options = {"mip_rel_gap": cfg.rel_gap, "disp": False, "node_limit": cfg.node_limit}
    if cfg.time_limit is not None:
        options["time_limit"] = cfg.time_limit
    res = milp(
        c=model.objective,
        constraints=LinearConstraint(model.A, lo, hi),
        integrality=model.binary.astype(int),
        bounds=Bounds(model.lb, model.ub),
        options=options,
    )
    if res.x is None:
        status = TIME_LIMIT if res.status == 1 else INFEASIBLE
        return MilpSolution(np.full(model.num_vars, np.nan), np.inf, status)
    x = np.asarray(res.x, dtype=float)
    x[model.binary] = np.round(x[model.binary])
    obj = float(model.objective @ x)
    bound = getattr(res, "mip_dual_bound", None)
    bound = obj if bound is None or not np.isfinite(bound) else float(bound)
    if res.status == 1:
        status = TIME_LIMIT
    elif res.status == 0 and obj - bound <= cfg.abs_gap:
        status = OPTIMAL
    else:
        # stopped at the relative gap tolerance (or by the node limit) with a proven bound
        status = FEASIBLE_GAP
    return MilpSolution(x, obj, status, bound, int(getattr(res, "mip_node_count", 0) or 0))


def _external(model: MilpModel, cfg: SolverConfig) -> MilpSolution:
    if not cfg.command:
        raise ValueError("external backend needs a command template")
    with tempfile.TemporaryDirectory() as tmp:
        lp = Path(tmp) / "model.lp"
        sol = Path(tmp) / "model.sol"
        write_lp(model, lp)
        cmd = cfg.command.format(lp=shlex.quote(str(lp)), sol=shlex.quote(str(sol)))
        try:
            proc = subprocess.run(cmd, shell=True, capture_output=True, text=True, timeout=cfg.time_limit)
        except subprocess.TimeoutExpired:
            return MilpSolution(np.full(model.num_vars, np.nan), np.inf, TIME_LIMIT)
        if proc.returncode != 0 or not sol.exists():
            raise RuntimeError(f"external solver failed ({proc.returncode}): {proc.stderr.strip()}")
        values, status, _ = read_solution(sol)
    if status == INFEASIBLE:
        return MilpSolution(np.full(model.num_vars, np.nan), np.inf, INFEASIBLE)
    x = np.array([values.get(name, 0.0) for name in model.names], dtype=float)
    if status == "unknown":
        status = FEASIBLE_GAP
    return MilpSolution(x, float(model.objective @ x), status)
