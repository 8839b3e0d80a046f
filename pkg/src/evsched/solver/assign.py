"""Exact batch assignment of charging slots to EVs.

Each EV needs between ``k_min`` and ``k_max`` slots from its window, every slot
holds at most ``slot_capacity`` simultaneous chargers, and each used slot earns
``slot_value``. The constraint matrix is a bipartite transportation structure,
so a min-cost flow gives the integral optimum directly:

    source -> EV_i       [k_min, k_max]
    EV_i   -> slot_j     [0, 1]        cost -value_j
    slot_j -> sink       [0, capacity_j]
    source -> sink       bypass for optional units left unused

Among equal-value optima the lower slot index wins. ``refine_peak_valley`` then
flattens the resulting load without giving up any value.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy.sparse import csr_array
from scipy.sparse.csgraph import maximum_flow

from .flow import FlowInfeasible, MinCostFlow

VALUE_SCALE = 10**9  # value units resolved by the integer costs
ORACLE_MAX_CELLS = 24
TOL = 1e-9


class InfeasibleInstance(Exception):
    """No assignment meets every EV's minimum with the given slot capacities."""

    def __init__(self, binding_slots: Sequence[int], evs: Sequence[int] = ()):
        self.binding_slots = sorted(int(j) for j in binding_slots)
        self.evs = sorted(int(i) for i in evs)
        super().__init__(
            f"demand exceeds capacity; binding slots {self.binding_slots}, EVs {self.evs}"
        )


class OracleTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class EvDemand:
    window: tuple[int, ...]
    k_min: int
    k_max: int
    ev_id: str = ""

    def __post_init__(self) -> None:
        w = tuple(sorted(set(int(j) for j in self.window)))
        object.__setattr__(self, "window", w)
        if not 0 <= self.k_min <= self.k_max <= len(w):
            raise ValueError(
                f"EV {self.ev_id!r}: need 0 <= k_min <= k_max <= |window|, got "
                f"{self.k_min}, {self.k_max}, {len(w)}"
            )


@dataclass(frozen=True)
class AssignmentInstance:
    evs: tuple[EvDemand, ...]
    slot_value: np.ndarray
    slot_capacity: np.ndarray
    base_loads: np.ndarray
    unit_power: float = 7.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "evs", tuple(self.evs))
        val = np.asarray(self.slot_value, dtype=float)
        cap = np.asarray(self.slot_capacity)
        base = np.asarray(self.base_loads, dtype=float)
        n = val.size
        if cap.shape != (n,) or base.shape != (n,):
            raise ValueError("slot_value, slot_capacity and base_loads must share one length")
        if np.any(cap < 0) or np.any(cap != np.round(cap)):
            raise ValueError("slot capacities must be non-negative integers")
        if not self.unit_power > 0:
            raise ValueError("unit_power must be positive")
        for ev in self.evs:
            if ev.window and not (0 <= ev.window[0] and ev.window[-1] < n):
                raise ValueError(f"EV {ev.ev_id!r} window leaves the slot range")
        object.__setattr__(self, "slot_value", val)
        object.__setattr__(self, "slot_capacity", cap.astype(int))
        object.__setattr__(self, "base_loads", base)

    @property
    def n_slots(self) -> int:
        return int(self.slot_value.size)


@dataclass(frozen=True)
class Assignment:
    chosen: tuple[tuple[int, ...], ...]

    def usage(self, n_slots: int) -> np.ndarray:
        u = np.zeros(n_slots, dtype=int)
        for slots in self.chosen:
            u[list(slots)] += 1
        return u

    def value(self, inst: AssignmentInstance) -> float:
        return float(sum(inst.slot_value[j] for slots in self.chosen for j in slots))

    def loads(self, inst: AssignmentInstance) -> np.ndarray:
        return inst.base_loads + inst.unit_power * self.usage(inst.n_slots)

    def peak_valley(self, inst: AssignmentInstance) -> float:
        loads = self.loads(inst)
        return float(loads.max() - loads.min()) if loads.size else 0.0


def check_assignment(inst: AssignmentInstance, a: Assignment) -> None:
    """Raise ``AssertionError`` unless ``a`` satisfies every instance constraint."""
    assert len(a.chosen) == len(inst.evs)
    for ev, slots in zip(inst.evs, a.chosen):
        assert ev.k_min <= len(slots) <= ev.k_max, (ev, slots)
        assert set(slots) <= set(ev.window), (ev, slots)
        assert len(set(slots)) == len(slots)
    assert np.all(a.usage(inst.n_slots) <= inst.slot_capacity)


def slot_capacities(base, p_mtf: float, unit_power: float, tol: float = TOL) -> np.ndarray:
    """Chargers each slot can add before reaching the transformer limit."""
    if not unit_power > 0:
        raise ValueError("unit_power must be positive")
    base = np.asarray(getattr(base, "loads", base), dtype=float)
    cap = np.floor((p_mtf - base + tol) / unit_power)
    return np.maximum(cap, 0).astype(int)


class _Network:
    """Flow network of one instance, with optional per-slot bounds."""

    S, T = 0, 1

    def __init__(self, inst: AssignmentInstance):
        self.inst = inst
        m = len(inst.evs)
        used = sorted({j for ev in inst.evs for j in ev.window})
        self.slot_node = {j: 2 + m + k for k, j in enumerate(used)}
        self.n_nodes = 2 + m + len(used)
        self.F = sum(ev.k_max for ev in inst.evs)
        self.primary = {j: -int(round(float(inst.slot_value[j]) * VALUE_SCALE)) for j in used}
        # arcs: (u, v, lo, hi, primary cost, tie-break cost)
        arcs = []
        for i, ev in enumerate(inst.evs):
            arcs.append((self.S, 2 + i, ev.k_min, ev.k_max, 0, 0))
        self.cell_arcs: list[tuple[int, int, int]] = []  # (arc index, ev, slot)
        for i, ev in enumerate(inst.evs):
            for j in ev.window:
                self.cell_arcs.append((len(arcs), i, j))
                arcs.append((2 + i, self.slot_node[j], 0, 1, self.primary[j], j + 1))
        self.slot_arc = {}
        for j in used:
            self.slot_arc[j] = len(arcs)
            arcs.append((self.slot_node[j], self.T, 0, int(inst.slot_capacity[j]), 0, 0))
        self.bypass = len(arcs)
        arcs.append((self.S, self.T, 0, self.F, 0, 0))
        self.arcs = arcs

    def min_cost_flows(self) -> list[int]:
        n_slots = self.inst.n_slots
        weight = 2 * (self.F + 1) * (n_slots + 2) + 1
        mcf = MinCostFlow(self.n_nodes)
        for u, v, lo, hi, c1, c2 in self.arcs:
            mcf.add_arc(u, v, lo, hi, c1 * weight + c2)
        mcf.set_supply(self.S, self.F)
        mcf.set_supply(self.T, -self.F)
        return mcf.solve()

    def assignment(self, flows: Sequence[int]) -> Assignment:
        chosen: list[list[int]] = [[] for _ in self.inst.evs]
        for a, i, j in self.cell_arcs:
            if flows[a] > 0:
                chosen[i].append(j)
        return Assignment(tuple(tuple(sorted(c)) for c in chosen))

    def flows_of(self, a: Assignment) -> list[int]:
        flows = [0] * len(self.arcs)
        lookup = {(i, j): arc for arc, i, j in self.cell_arcs}
        total = 0
        for i, slots in enumerate(a.chosen):
            flows[i] = len(slots)
            total += len(slots)
            for j in slots:
                flows[lookup[i, j]] = 1
                flows[self.slot_arc[j]] += 1
        flows[self.bypass] = self.F - total
        return flows

    def potentials(self, flows: Sequence[int]) -> list[int] | None:
        """Feasible duals for the value objective, or None if ``flows`` is not optimal."""
        N = self.n_nodes
        residual = []
        for (u, v, lo, hi, c1, _), x in zip(self.arcs, flows):
            if x < hi:
                residual.append((u, v, c1))
            if x > lo:
                residual.append((v, u, -c1))
        adj: list[list[tuple[int, int]]] = [[] for _ in range(N)]
        for u, v, c in residual:
            adj[u].append((v, c))
        dist = [0] * N
        count = [0] * N
        queue = deque(range(N))
        inq = [True] * N
        while queue:
            u = queue.popleft()
            inq[u] = False
            du = dist[u]
            for v, c in adj[u]:
                if du + c < dist[v]:
                    dist[v] = du + c
                    if not inq[v]:
                        count[v] += 1
                        if count[v] > N:
                            return None  # negative cycle: a better flow exists
                        inq[v] = True
                        queue.append(v)
        return dist


def solve_max_value(inst: AssignmentInstance) -> tuple[Assignment, float]:
    """Value-maximizing assignment; raises ``InfeasibleInstance`` if minima cannot be met."""
    if not inst.evs:
        return Assignment(()), 0.0
    net = _Network(inst)
    try:
        flows = net.min_cost_flows()
    except FlowInfeasible as exc:
        inv = {node: j for j, node in net.slot_node.items()}
        slots = [inv[v] for v in exc.reachable if v in inv]
        evs = [v - 2 for v in exc.reachable if 2 <= v < 2 + len(inst.evs)]
        raise InfeasibleInstance(slots, evs) from None
    a = net.assignment(flows)
    return a, a.value(inst)


def _feasible_flow(net: _Network, bounds, supply_F: int):
    """Flows meeting per-arc ``bounds`` with ``supply_F`` from S to T, else None.

    Returns a zero-argument callable producing the per-arc flows, so probes
    that only need a yes/no answer skip the extraction.
    """
    N = net.n_nodes
    ss, tt = N, N + 1
    excess = [0] * N
    excess[net.S] += supply_F
    excess[net.T] -= supply_F
    rows, cols, caps = [], [], []
    for (u, v, *_), (lo, hi) in zip(net.arcs, bounds):
        if lo > hi:
            return None
        if hi > lo:
            rows.append(u), cols.append(v), caps.append(hi - lo)
        excess[u] -= lo
        excess[v] += lo
    need = 0
    for v, e in enumerate(excess):
        if e > 0:
            rows.append(ss), cols.append(v), caps.append(e)
            need += e
        elif e < 0:
            rows.append(v), cols.append(tt), caps.append(-e)
    if need == 0:
        return lambda: [lo for lo, _ in bounds]
    graph = csr_array(
        (np.array(caps, dtype=np.int32), (np.array(rows), np.array(cols))), shape=(N + 2, N + 2)
    )
    res = maximum_flow(graph, ss, tt, method="dinic")
    if res.flow_value < need:
        return None

    def extract() -> list[int]:
        coo = res.flow.tocoo()
        got = {(int(r), int(c)): int(x) for r, c, x in zip(coo.row, coo.col, coo.data) if x > 0}
        return [lo + got.get((u, v), 0) for (u, v, *_), (lo, _) in zip(net.arcs, bounds)]

    return extract


def refine_peak_valley(
    inst: AssignmentInstance, assignment: Assignment, optimal_value: float
) -> Assignment:
    """Flatten the load of a value-optimal assignment without losing value.

    First the lowest peak reachable by any value-optimal assignment is found by
    bisection over the attainable load levels, then, under that peak, the
    highest attainable valley floor. Value-optimal assignments are exactly the
    flows complementary-slack with one optimal dual, so each probe is a plain
    feasibility flow. Returns the input whenever nothing improves.
    """
    if not inst.evs:
        return assignment
    net = _Network(inst)
    flows = net.flows_of(assignment)
    pot = net.potentials(flows)
    if pot is None or abs(assignment.value(inst) - optimal_value) > TOL * max(1.0, abs(optimal_value)):
        return assignment

    # complementary slackness pins every arc with non-zero reduced cost
    base_bounds = []
    for u, v, lo, hi, c1, _ in net.arcs:
        rc = c1 + pot[u] - pot[v]
        base_bounds.append((lo, lo) if rc > 0 else (hi, hi) if rc < 0 else (lo, hi))

    base = inst.base_loads
    unit = inst.unit_power
    slots = sorted(net.slot_node)
    slot_lo = {j: base_bounds[net.slot_arc[j]][0] for j in slots}
    slot_hi = {j: base_bounds[net.slot_arc[j]][1] for j in slots}
    fixed = [base[j] for j in range(inst.n_slots) if j not in net.slot_node]

    def probe(caps: dict[int, int], floors: dict[int, int]):
        bounds = list(base_bounds)
        for j in slots:
            lo, hi = bounds[net.slot_arc[j]]
            bounds[net.slot_arc[j]] = (max(lo, floors.get(j, lo)), min(hi, caps.get(j, hi)))
        return _feasible_flow(net, bounds, net.F)

    def caps_for(C: float) -> dict[int, int]:
        return {j: min(slot_hi[j], math.floor((C - base[j]) / unit + TOL)) for j in slots}

    def floors_for(V: float, caps) -> dict[int, int]:
        return {j: max(slot_lo[j], math.ceil((V - base[j]) / unit - TOL)) for j in slots}

    in_loads = assignment.loads(inst)
    cur_peak, cur_min = float(in_loads.max()), float(in_loads.min())

    # stage (a): lowest feasible peak
    peak_floor = max(fixed + [base[j] + unit * slot_lo[j] for j in slots])
    levels = {cur_peak, peak_floor}
    for j in slots:
        for k in range(slot_lo[j], slot_hi[j] + 1):
            x = base[j] + unit * k
            if peak_floor <= x <= cur_peak:
                levels.add(x)
    levels = sorted(x for x in levels if peak_floor - TOL <= x <= cur_peak + TOL)
    best_C, best_probe = cur_peak, lambda: flows
    lo_i, hi_i = 0, len(levels) - 1
    while lo_i <= hi_i:
        mid = (lo_i + hi_i) // 2
        f = probe(caps_for(levels[mid]), {})
        if f is None:
            lo_i = mid + 1
        else:
            best_C, best_probe = levels[mid], f
            hi_i = mid - 1
    caps = caps_for(best_C)

    # stage (b): highest feasible valley floor under that peak
    start_loads = _loads_from_flows(net, best_probe())
    v_start = float(start_loads.min())
    v_ceiling = min(fixed + [base[j] + unit * caps[j] for j in slots])
    levels = {v_start}
    for j in slots:
        for k in range(slot_lo[j], caps[j] + 1):
            x = base[j] + unit * k
            if v_start <= x <= v_ceiling:
                levels.add(x)
    if v_ceiling >= v_start:
        levels.add(v_ceiling)
    levels = sorted(levels)
    lo_i, hi_i = 0, len(levels) - 1
    while lo_i <= hi_i:
        mid = (lo_i + hi_i) // 2
        f = probe(caps, floors_for(levels[mid], caps))
        if f is None:
            hi_i = mid - 1
        else:
            best_probe = f
            lo_i = mid + 1

    refined = net.assignment(best_probe())
    if refined.peak_valley(inst) > cur_peak - cur_min + TOL:
        return assignment
    if abs(refined.value(inst) - optimal_value) > TOL * max(1.0, abs(optimal_value)):
        return assignment
    return refined


def _loads_from_flows(net: _Network, flows) -> np.ndarray:
    usage = np.zeros(net.inst.n_slots, dtype=int)
    for j, arc in net.slot_arc.items():
        usage[j] = flows[arc]
    return net.inst.base_loads + net.inst.unit_power * usage


def brute_force_oracle(inst: AssignmentInstance) -> tuple[float, float]:
    """Exhaustive (max value, min peak-valley among value-optimal assignments).

    Every per-EV subset choice is enumerated; partial assignments that reach
    the same per-slot usage are merged, which keeps the search exact.
    """
    cells = sum(len(ev.window) for ev in inst.evs)
    if cells > ORACLE_MAX_CELLS:
        raise OracleTooLarge(f"{cells} decision cells exceed the oracle limit {ORACLE_MAX_CELLS}")
    n = inst.n_slots
    caps = tuple(int(c) for c in inst.slot_capacity)
    states = {tuple([0] * n)}
    for ev in inst.evs:
        subsets = [
            c for k in range(ev.k_min, ev.k_max + 1) for c in combinations(ev.window, k)
        ]
        nxt = set()
        for s in states:
            for sub in subsets:
                u = list(s)
                ok = True
                for j in sub:
                    u[j] += 1
                    if u[j] > caps[j]:
                        ok = False
                        break
                if ok:
                    nxt.add(tuple(u))
        states = nxt
        if not states:
            raise InfeasibleInstance([], [])
    best_val, best_pv = -math.inf, math.inf
    vals = inst.slot_value
    for s in states:
        val = float(sum(vals[j] * s[j] for j in range(n)))
        loads = [inst.base_loads[j] + inst.unit_power * s[j] for j in range(n)]
        pv = (max(loads) - min(loads)) if n else 0.0
        if val > best_val + TOL:
            best_val, best_pv = val, pv
        elif abs(val - best_val) <= TOL:
            best_pv = min(best_pv, pv)
    return best_val, best_pv


def dumps_instance(inst: AssignmentInstance) -> str:
    """Line-based text form: header lines, then one ``ev`` line per EV."""
    fmt = lambda xs: " ".join(repr(float(x)) for x in xs)  # noqa: E731
    lines = [
        "# evsched assignment instance v1",
        f"slots {inst.n_slots}",
        f"unit_power {inst.unit_power!r}",
        "values " + fmt(inst.slot_value),
        "capacities " + " ".join(str(int(c)) for c in inst.slot_capacity),
        "base " + fmt(inst.base_loads),
    ]
    for ev in inst.evs:
        name = ev.ev_id or "-"
        lines.append(f"ev {name} {ev.k_min} {ev.k_max} " + " ".join(map(str, ev.window)))
    return "\n".join(lines) + "\n"


def loads_instance(text: str) -> AssignmentInstance:
    header: dict[str, list[str]] = {}
    evs: list[EvDemand] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, *rest = line.split()
        try:
            if key == "ev":
                name, kmin, kmax, *window = rest
                evs.append(
                    EvDemand(
                        tuple(int(j) for j in window),
                        int(kmin),
                        int(kmax),
                        "" if name == "-" else name,
                    )
                )
            elif key in ("slots", "unit_power", "values", "capacities", "base"):
                header[key] = rest
            else:
                raise ValueError(f"unknown record {key!r}")
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    missing = {"slots", "unit_power", "values", "capacities", "base"} - header.keys()
    if missing:
        raise ValueError(f"instance text lacks {sorted(missing)}")
    n = int(header["slots"][0])
    values = [float(x) for x in header["values"]]
    caps = [int(x) for x in header["capacities"]]
    base = [float(x) for x in header["base"]]
    if not len(values) == len(caps) == len(base) == n:
        raise ValueError("per-slot records disagree with the slot count")
    return AssignmentInstance(tuple(evs), np.array(values), np.array(caps), np.array(base),
                              float(header["unit_power"][0]))
