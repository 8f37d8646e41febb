"""Joint cluster-processor placement and fronthaul routing MILP.

Variables (``k`` user, ``l`` RU, ``q`` router, ``n`` DU):

* ``b_k_n``        binary, user k's cluster processor sits at DU n
* ``xru_k_l_q``    UL load RU l -> router q          (only for l in C_k)
* ``xfh_k_q_r``    UL load router q -> router r      (both directions of a link)
* ``xdu_k_q_n``    UL load router q -> DU n
* ``yru_k_q_l``    DL load router q -> RU l          (only for l in C_k)
* ``yfh_k_q_r``    DL load router q -> router r
* ``ydu_k_n_q``    DL load DU n -> router q
* ``CL CQ CD``     maximum RU-router, router-router and router-DU link loads

UL demands carry the ``1 - gamma_dl`` weight, DL demands ``gamma_dl``. Every
physical link is half-duplex: its capacity row sums UL and DL variables, and
router-router rows sum both directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .topology import FronthaulGraph

LE, GE, EQ = "<=", ">=", "="


@dataclass
class TrafficDemand:
    ul_bits: np.ndarray  # (L, K) quantization rates B_{l,k} on surviving edges
    dl_bits: np.ndarray  # (K,) DL rates R^dl_k
    gamma_dl: float
    assoc: np.ndarray  # (L, K) bool, pruned association

    def __post_init__(self):
        if not 0.0 < self.gamma_dl < 1.0:
            raise ValueError("gamma_dl must lie in (0, 1)")
        self.ul_bits = np.where(self.assoc, np.asarray(self.ul_bits, dtype=float), 0.0)
        self.dl_bits = np.asarray(self.dl_bits, dtype=float)
        if (self.dl_bits < 0).any() or (self.ul_bits < 0).any():
            raise ValueError("demands must be nonnegative")

    @property
    def K(self) -> int:
        return self.assoc.shape[1]


@dataclass
class MilpModel:
    names: list[str]
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray  # bool mask
    objective: np.ndarray
    A: sp.csr_matrix
    senses: list[str]
    rhs: np.ndarray
    row_names: list[str]
    capacity_limit_per_du: np.ndarray | None = None
    infeasible_reason: str | None = None
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {name: j for j, name in enumerate(self.names)}
        if len(self.index) != len(self.names):
            raise ValueError("duplicate variable names")

    @property
    def num_vars(self) -> int:
        return len(self.names)

    @property
    def num_rows(self) -> int:
        return len(self.senses)

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Rows as ``lo <= A x <= hi``."""
        lo = np.full(self.num_rows, -np.inf)
        hi = np.full(self.num_rows, np.inf)
        s = np.array(self.senses)
        lo[(s == GE) | (s == EQ)] = self.rhs[(s == GE) | (s == EQ)]
        hi[(s == LE) | (s == EQ)] = self.rhs[(s == LE) | (s == EQ)]
        return lo, hi


class _Builder:
    def __init__(self):
        self.names: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.binary: list[bool] = []
        self.cost: list[float] = []
        self.index: dict[str, int] = {}
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.vals: list[float] = []
        self.senses: list[str] = []
        self.rhs: list[float] = []
        self.row_names: list[str] = []
        self.unsatisfiable: list[str] = []

    def var(self, name, lb=0.0, ub=math.inf, binary=False, cost=0.0) -> int:
        j = len(self.names)
        self.index[name] = j
        self.names.append(name)
        self.lb.append(lb)
        self.ub.append(ub)
        self.binary.append(binary)
        self.cost.append(cost)
        return j

    def row(self, name, terms, sense, rhs) -> None:
        if not terms:
            ok = {LE: 0.0 <= rhs, GE: 0.0 >= rhs, EQ: rhs == 0.0}[sense]
            if not ok:
                self.unsatisfiable.append(name)
            return
        i = len(self.senses)
        for j, a in terms:
            self.rows.append(i)
            self.cols.append(j)
            self.vals.append(a)
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self.row_names.append(name)

    def model(self, **extra) -> MilpModel:
        A = sp.coo_matrix(
            (self.vals, (self.rows, self.cols)), shape=(len(self.senses), len(self.names))
        ).tocsr()
        A.sum_duplicates()
        return MilpModel(
            names=self.names,
            lb=np.array(self.lb, dtype=float),
            ub=np.array(self.ub, dtype=float),
            binary=np.array(self.binary, dtype=bool),
            objective=np.array(self.cost, dtype=float),
            A=A,
            senses=self.senses,
            rhs=np.array(self.rhs, dtype=float),
            row_names=self.row_names,
            **extra,
        )


def du_capacity(K: int, N: int) -> np.ndarray:
    """Default per-DU processor limit ``ceil(K / 2)``."""
    return np.full(N, math.ceil(K / 2), dtype=float)


def build_milp(
    graph: FronthaulGraph,
    demand: TrafficDemand,
    Z=None,
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> MilpModel:
    L, Q, N, K = graph.L, graph.Q, graph.N, demand.K
    if demand.assoc.shape[0] != L:
        raise ValueError("demand and graph disagree on the number of RUs")
    Z = du_capacity(K, N) if Z is None else np.broadcast_to(np.asarray(Z, dtype=float), (N,)).copy()
    g = 1.0 - demand.gamma_dl
    gd = demand.gamma_dl
    eta_L, eta_Q, eta_D = weights
    directed = graph.directed_router_links()
    mb = _Builder()
    CL = mb.var("CL", cost=eta_L)
    CQ = mb.var("CQ", cost=eta_Q)
    CD = mb.var("CD", cost=eta_D)

    problems = []
    reach = {l: graph.reachable_dus(l) for l in range(L)}
    cap_L = {e: [] for e in graph.ru_router}
    cap_Q = {e: [] for e in graph.router_router}
    cap_D = {e: [] for e in graph.router_du}
    b = {}
    for k in range(K):
        for n in range(N):
            b[k, n] = mb.var(f"b_{k}_{n}", ub=1.0, binary=True)

    for k in range(K):
        cluster = np.flatnonzero(demand.assoc[:, k]).tolist()
        ul = {l: g * demand.ul_bits[l, k] for l in cluster}
        ul_total = sum(ul.values())
        dl = gd * demand.dl_bits[k]
        for l in cluster:
            if (ul[l] > 0 or dl > 0) and not reach[l]:
                problems.append(f"user {k}: RU {l} has no path to any DU")

        if cluster:
            x_ru = {(l, q): mb.var(f"xru_{k}_{l}_{q}", ub=ul[l]) for l, q in graph.ru_router if l in ul}
            x_fh = {(q, r): mb.var(f"xfh_{k}_{q}_{r}") for q, r in directed}
            x_du = {(q, n): mb.var(f"xdu_{k}_{q}_{n}") for q, n in graph.router_du}
            y_ru = {(q, l): mb.var(f"yru_{k}_{q}_{l}") for l, q in graph.ru_router if l in ul}
            y_fh = {(q, r): mb.var(f"yfh_{k}_{q}_{r}") for q, r in directed}
            y_du = {(n, q): mb.var(f"ydu_{k}_{n}_{q}") for q, n in graph.router_du}
        else:
            x_ru = x_fh = x_du = y_ru = y_fh = y_du = {}

        # UL unicast conservation at each router
        if cluster:
            for q in range(Q):
                terms = [(j, 1.0) for (l, qq), j in x_ru.items() if qq == q]
                terms += [(j, 1.0) for (a, r), j in x_fh.items() if r == q]
                terms += [(j, -1.0) for (qq, n), j in x_du.items() if qq == q]
                terms += [(j, -1.0) for (a, r), j in x_fh.items() if a == q]
                mb.row(f"ulcons_{k}_{q}", terms, EQ, 0.0)
        # UL source rates (per-link upper bounds live in the variable bounds)
        for l in cluster:
            terms = [(j, 1.0) for (ll, q), j in x_ru.items() if ll == l]
            mb.row(f"ulsrc_{k}_{l}", terms, GE, ul[l])
        # exactly one host, capacity rows come after the user loop
        mb.row(f"host_{k}", [(b[k, n], 1.0) for n in range(N)], EQ, 1.0)
        for n in range(N):
            if not cluster:
                continue
            inbound = [(j, 1.0) for (q, nn), j in x_du.items() if nn == n]
            mb.row(f"ulsink_{k}_{n}", inbound + [(b[k, n], -ul_total)], GE, 0.0)
            for (q, nn), j in x_du.items():
                if nn == n:
                    mb.row(f"ulsinkub_{k}_{q}_{n}", [(j, 1.0), (b[k, n], -ul_total)], LE, 0.0)

        # DL multicast: each outgoing flow bounded by the router's total inflow
        for q in range(Q):
            if not cluster:
                break
            inflow = [(j, 1.0) for (n, qq), j in y_du.items() if qq == q]
            inflow += [(j, 1.0) for (a, r), j in y_fh.items() if r == q]
            for (qq, l), j in y_ru.items():
                if qq == q:
                    mb.row(f"dlru_{k}_{q}_{l}", inflow + [(j, -1.0)], GE, 0.0)
            for (a, r), j in y_fh.items():
                if a == q:
                    mb.row(f"dlfh_{k}_{q}_{r}", inflow + [(j, -1.0)], GE, 0.0)
        for n in range(N):
            if not cluster:
                continue
            outbound = [(j, 1.0) for (nn, q), j in y_du.items() if nn == n]
            mb.row(f"dlsrc_{k}_{n}", outbound + [(b[k, n], -dl)], GE, 0.0)
            for (nn, q), j in y_du.items():
                if nn == n:
                    mb.row(f"dlsrcub_{k}_{n}_{q}", [(j, 1.0), (b[k, n], -dl)], LE, 0.0)
        for l in cluster:
            terms = [(j, 1.0) for (q, ll), j in y_ru.items() if ll == l]
            mb.row(f"dlsink_{k}_{l}", terms, GE, dl)

        for (l, q), j in x_ru.items():
            cap_L[l, q].append(j)
        for (q, l), j in y_ru.items():
            cap_L[l, q].append(j)
        for (q, r), j in list(x_fh.items()) + list(y_fh.items()):
            cap_Q[min(q, r), max(q, r)].append(j)
        for (q, n), j in x_du.items():
            cap_D[q, n].append(j)
        for (n, q), j in y_du.items():
            cap_D[q, n].append(j)

    for n in range(N):
        mb.row(f"ducap_{n}", [(b[k, n], 1.0) for k in range(K)], LE, Z[n])
    for (l, q), cols in cap_L.items():
        mb.row(f"capL_{l}_{q}", [(j, 1.0) for j in cols] + [(CL, -1.0)], LE, 0.0)
    for (q, r), cols in cap_Q.items():
        mb.row(f"capQ_{q}_{r}", [(j, 1.0) for j in cols] + [(CQ, -1.0)], LE, 0.0)
    for (q, n), cols in cap_D.items():
        mb.row(f"capD_{q}_{n}", [(j, 1.0) for j in cols] + [(CD, -1.0)], LE, 0.0)

    if Z.sum() < K:
        problems.append(f"DU capacities sum to {Z.sum():g} < K={K}")
    problems += [f"row {name} has no variables but a nonzero demand" for name in mb.unsatisfiable]
    reason = "; ".join(problems) if problems else None
    return mb.model(capacity_limit_per_du=Z, infeasible_reason=reason)


def parse_name(name: str) -> tuple:
    """``'xru_3_2_1' -> ('xru', 3, 2, 1)``."""
    kind, *rest = name.split("_")
    return (kind, *map(int, rest))
