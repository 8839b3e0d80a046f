"""Integer min-cost flow by successive shortest paths.

Arc bounds may be non-zero below; they are removed the usual way, by shifting
the lower bound into node supplies and draining all supplies through an added
super source and super sink. Costs are Python ints, so ties are exact.
"""

from __future__ import annotations

import heapq
from collections import deque

INF = float("inf")


class FlowInfeasible(Exception):
    def __init__(self, shortage: int, reachable: set[int]):
        super().__init__(f"flow short by {shortage} units")
        self.shortage = shortage
        self.reachable = reachable


class MinCostFlow:
    def __init__(self, n: int):
        self.n = n
        self.supply = [0] * n
        self._arcs: list[tuple[int, int, int, int, int]] = []  # u, v, lo, hi, cost

    def add_arc(self, u: int, v: int, lo: int, hi: int, cost: int) -> int:
        if lo > hi:
            raise ValueError(f"arc {u}->{v}: lower bound {lo} above capacity {hi}")
        self._arcs.append((u, v, lo, hi, cost))
        return len(self._arcs) - 1

    def set_supply(self, v: int, amount: int) -> None:
        self.supply[v] = amount

    @property
    def arcs(self):
        return self._arcs

    def solve(self) -> list[int]:
        """Return per-arc flows of a min-cost feasible flow.

        The network must not contain a negative-cost cycle. Raises
        ``FlowInfeasible`` when supplies and bounds cannot be met.
        """
        n = self.n
        src, snk = n, n + 1
        N = n + 2
        head: list[list[int]] = [[] for _ in range(N)]
        to: list[int] = []
        cap: list[int] = []
        cost: list[int] = []

        def edge(u, v, c, w):
            head[u].append(len(to))
            to.append(v), cap.append(c), cost.append(w)
            head[v].append(len(to))
            to.append(u), cap.append(0), cost.append(-w)

        excess = list(self.supply)
        for u, v, lo, hi, w in self._arcs:
            edge(u, v, hi - lo, w)
            excess[u] -= lo
            excess[v] += lo
        need = 0
        for v, e in enumerate(excess):
            if e > 0:
                edge(src, v, e, 0)
                need += e
            elif e < 0:
                edge(v, snk, -e, 0)
        if sum(excess) != 0:
            raise ValueError("node supplies do not balance")

        pot = self._initial_potentials(N, head, to, cap, cost, src)
        sent = 0
        while sent < need:
            dist = [INF] * N
            prev = [-1] * N
            dist[src] = 0
            heap = [(0, src)]
            while heap:
                d, u = heapq.heappop(heap)
                if d > dist[u]:
                    continue
                pu = pot[u]
                for e in head[u]:
                    if cap[e]:
                        v = to[e]
                        nd = d + cost[e] + pu - pot[v]
                        if nd < dist[v]:
                            dist[v] = nd
                            prev[v] = e
                            heapq.heappush(heap, (nd, v))
            if dist[snk] == INF:
                reach = {v for v in range(n) if dist[v] != INF}
                raise FlowInfeasible(need - sent, reach)
            dt = dist[snk]
            for v in range(N):
                pot[v] += dist[v] if dist[v] < dt else dt
            push = need - sent
            v = snk
            while v != src:
                e = prev[v]
                if cap[e] < push:
                    push = cap[e]
                v = to[e ^ 1]
            v = snk
            while v != src:
                e = prev[v]
                cap[e] -= push
                cap[e ^ 1] += push
                v = to[e ^ 1]
            sent += push

        return [lo + cap[2 * i + 1] for i, (_, _, lo, _, _) in enumerate(self._arcs)]

    @staticmethod
    def _initial_potentials(N, head, to, cap, cost, src):
        # SPFA from the super source; unreachable nodes keep potential 0
        dist = [INF] * N
        dist[src] = 0
        queue = deque([src])
        inq = [False] * N
        inq[src] = True
        while queue:
            u = queue.popleft()
            inq[u] = False
            du = dist[u]
            for e in head[u]:
                if cap[e]:
                    v = to[e]
                    nd = du + cost[e]
                    if nd < dist[v]:
                        dist[v] = nd
                        if not inq[v]:
                            inq[v] = True
                            queue.append(v)
        return [0 if d == INF else d for d in dist]
