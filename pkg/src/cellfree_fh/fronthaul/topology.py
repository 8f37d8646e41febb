"""Fronthaul graph: RU-router, router-router and router-DU links."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import ConfigurationError
from ..geometry import NetworkArea, torus_distance


@dataclass
class FronthaulGraph:
    L: int
    Q: int
    N: int
    ru_router: list[tuple[int, int]]  # (l, q)
    router_router: list[tuple[int, int]]  # (q, q') with q < q', one entry per physical link
    router_du: list[tuple[int, int]]  # (q, n)

    def __post_init__(self):
        self.ru_router = sorted({(int(l), int(q)) for l, q in self.ru_router})
        self.router_router = sorted({(min(int(a), int(b)), max(int(a), int(b))) for a, b in self.router_router})
        self.router_du = sorted({(int(q), int(n)) for q, n in self.router_du})
        for l, q in self.ru_router:
            if not (0 <= l < self.L and 0 <= q < self.Q):
                raise ConfigurationError(f"RU-router link {(l, q)} out of range")
        for a, b in self.router_router:
            if a == b or not (0 <= a < self.Q and 0 <= b < self.Q):
                raise ConfigurationError(f"router-router link {(a, b)} invalid")
        for q, n in self.router_du:
            if not (0 <= q < self.Q and 0 <= n < self.N):
                raise ConfigurationError(f"router-DU link {(q, n)} out of range")

    def routers_of_ru(self, l: int) -> list[int]:
        return [q for ll, q in self.ru_router if ll == l]

    def router_neighbors(self, q: int) -> list[int]:
        return sorted([b for a, b in self.router_router if a == q] + [a for a, b in self.router_router if b == q])

    def directed_router_links(self) -> list[tuple[int, int]]:
        return sorted([(a, b) for a, b in self.router_router] + [(b, a) for a, b in self.router_router])

    def reachable_dus(self, l: int) -> set[int]:
        seen = set(self.routers_of_ru(l))
        queue = deque(seen)
        while queue:
            q = queue.popleft()
            for r in self.router_neighbors(q):
                if r not in seen:
                    seen.add(r)
                    queue.append(r)
        return {n for q, n in self.router_du if q in seen}

    def check(self) -> None:
        """Raise unless every RU and DU has a router link and every RU reaches every DU."""
        for l in range(self.L):
            if not self.routers_of_ru(l):
                raise ConfigurationError(f"RU {l} has no router link")
            if len(self.reachable_dus(l)) != self.N:
                raise ConfigurationError(f"RU {l} cannot reach every DU")
        for n in range(self.N):
            if not any(nn == n for _, nn in self.router_du):
                raise ConfigurationError(f"DU {n} has no router link")

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "Q": self.Q,
            "N": self.N,
            "ru_router": [list(e) for e in self.ru_router],
            "router_router": [list(e) for e in self.router_router],
            "router_du": [list(e) for e in self.router_du],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FronthaulGraph":
        return cls(
            L=int(d["L"]),
            Q=int(d["Q"]),
            N=int(d["N"]),
            ru_router=[tuple(e) for e in d["ru_router"]],
            router_router=[tuple(e) for e in d.get("router_router", [])],
            router_du=[tuple(e) for e in d["router_du"]],
        )


def save_topology(graph: FronthaulGraph, path) -> None:
    Path(path).write_text(json.dumps(graph.to_dict(), indent=2) + "\n")


def load_topology(path) -> FronthaulGraph:
    return FronthaulGraph.from_dict(json.loads(Path(path).read_text()))


def router_grid(Q: int, area: NetworkArea) -> np.ndarray:
    """Router positions at cell centers of the most square ``rows x cols = Q`` grid."""
    rows = max(r for r in range(1, int(math.isqrt(Q)) + 1) if Q % r == 0)
    cols = Q // rows
    xs = (np.arange(cols) + 0.5) * area.width / cols
    ys = (np.arange(rows) + 0.5) * area.height / rows
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def default_topology(ru_positions: np.ndarray, Q: int, N: int, area: NetworkArea, ru_degree: int = 2) -> FronthaulGraph:
    """Stand-in topology: each RU to its nearest routers, routers on a ring, DUs to two routers round-robin."""
    L = len(ru_positions)
    routers = router_grid(Q, area)
    ru_router = []
    for l, p in enumerate(ru_positions):
        d = torus_distance(p[None, :], routers, area)
        for q in np.argsort(d, kind="stable")[: min(ru_degree, Q)]:
            ru_router.append((l, int(q)))
    if Q == 2:
        ring = [(0, 1)]
    elif Q > 2:
        ring = [(q, (q + 1) % Q) for q in range(Q)]
    else:
        ring = []
    router_du = []
    for n in range(N):
        first = (2 * n) % Q
        router_du.append((first, n))
        if Q > 1:
            router_du.append(((first + 1) % Q, n))
    graph = FronthaulGraph(L=L, Q=Q, N=N, ru_router=ru_router, router_router=ring, router_du=router_du)
    graph.check()
    return graph
