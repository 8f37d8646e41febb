"""Independent checks of solver output and per-link load accounting."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .model import EQ, GE, LE, MilpModel, parse_name
from .solver import MilpSolution


@dataclass
class ValidationReport:
    violated_rows: list[str] = field(default_factory=list)
    bound_violations: list[str] = field(default_factory=list)
    integrality_violations: list[str] = field(default_factory=list)
    objective_mismatch: float = 0.0
    max_load_mismatch: dict[str, float] = field(default_factory=dict)
    tol: float = 1e-6

    @property
    def ok(self) -> bool:
        return not (
            self.violated_rows
            or self.bound_violations
            or self.integrality_violations
            or self.objective_mismatch > self.tol
            or any(v > self.tol for v in self.max_load_mismatch.values())
        )


@dataclass
class LinkLoadReport:
    ru_router: dict[tuple[int, int], float]  # (l, q)
    router_router: dict[tuple[int, int], float]  # (q, r), q < r, both directions summed
    router_du: dict[tuple[int, int], float]  # (q, n)
    C_L: float
    C_Q: float
    C_D: float
    weighted_objective: float

    def rows(self):
        """Flat ``(link_class, endpoint_a, endpoint_b, load)`` records."""
        for cls, loads in (("ru-router", self.ru_router), ("router-router", self.router_router), ("router-du", self.router_du)):
            for (a, b), v in sorted(loads.items()):
                yield cls, a, b, v


def link_loads(model: MilpModel, x: np.ndarray):
    """Per-physical-link totals summed over users, UL and DL."""
    ru, rr, du = defaultdict(float), defaultdict(float), defaultdict(float)
    for name, v in zip(model.names, x):
        kind, *idx = parse_name(name)
        if kind == "xru":
            _, l, q = idx
            ru[l, q] += v
        elif kind == "yru":
            _, q, l = idx
            ru[l, q] += v
        elif kind in ("xfh", "yfh"):
            _, q, r = idx
            rr[min(q, r), max(q, r)] += v
        elif kind == "xdu":
            _, q, n = idx
            du[q, n] += v
        elif kind == "ydu":
            _, n, q = idx
            du[q, n] += v
    # links present only as capacity rows (no user traffic) still count with load 0
    for row in model.row_names:
        kind, *idx = parse_name(row)
        target = {"capL": ru, "capQ": rr, "capD": du}.get(kind)
        if target is not None:
            target[tuple(idx)] += 0.0
    return dict(ru), dict(rr), dict(du)


def link_load_report(model: MilpModel, sol: MilpSolution, weights=(1.0, 1.0, 1.0)) -> LinkLoadReport:
    ru, rr, du = link_loads(model, sol.values)
    C_L = max(ru.values(), default=0.0)
    C_Q = max(rr.values(), default=0.0)
    C_D = max(du.values(), default=0.0)
    eta_L, eta_Q, eta_D = weights
    return LinkLoadReport(ru, rr, du, C_L, C_Q, C_D, eta_L * C_L + eta_Q * C_Q + eta_D * C_D)


def validate_solution(model: MilpModel, sol: MilpSolution, tol: float = 1e-6) -> ValidationReport:
    """Recheck every row, bound and integrality; never mutates its inputs."""
    x = np.asarray(sol.values, dtype=float)
    rep = ValidationReport(tol=tol)
    if not np.all(np.isfinite(x)):
        rep.violated_rows.append("<no solution values>")
        return rep
    ax = model.A @ x
    for i, (sense, b) in enumerate(zip(model.senses, model.rhs)):
        bad = (
            (sense == LE and ax[i] > b + tol)
            or (sense == GE and ax[i] < b - tol)
            or (sense == EQ and abs(ax[i] - b) > tol)
        )
        if bad:
            rep.violated_rows.append(model.row_names[i])
    for j in np.flatnonzero((x < model.lb - tol) | (x > model.ub + tol)):
        rep.bound_violations.append(model.names[j])
    for j in np.flatnonzero(model.binary):
        if min(abs(x[j]), abs(x[j] - 1.0)) > tol:
            rep.integrality_violations.append(model.names[j])
    rep.objective_mismatch = abs(float(model.objective @ x) - sol.objective)

    ru, rr, du = link_loads(model, x)
    for var, loads in (("CL", ru), ("CQ", rr), ("CD", du)):
        if var in model.index:
            true_max = max(loads.values(), default=0.0)
            # at an optimum with positive weight the max-load variable is tight
            if model.objective[model.index[var]] > 0:
                rep.max_load_mismatch[var] = abs(x[model.index[var]] - true_max)
    return rep
