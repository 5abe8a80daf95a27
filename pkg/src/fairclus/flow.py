"""Flow networks for rounding a rerouted fractional assignment to 0/1.

Shared layered structure: source -> points -> (center, color) -> center ->
sink. Per-color and per-center integer windows around the fractional masses
are what carry the bounded-violation guarantee into the integral solution.

Radius mode solves a feasibility problem (max flow with lower bounds via the
usual circulation reduction); cost mode solves a min-cost flow whose node
balances encode the floors of the fractional masses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import maximum_flow

from .errors import PipelineError, ValidationError
from .instance import MetricInstance
from .lp import EPS_POS, FractionalSolution

COST_SCALE = 10 ** 9  # integer scaling of arc costs fed to the exact solver


@dataclass(frozen=True)
class FlowArc:
    tail: tuple | str
    head: tuple | str
    lower: int
    upper: int
    cost: int = 0


@dataclass
class FlowNetwork:
    """Arc list plus (cost mode) node balances; node labels are tuples.

    Labels: "s", "t", ("p", j), ("ch", i, h), ("c", i).
    """

    kind: str  # "center" (max flow with lower bounds) or "mincost"
    n: int
    centers: tuple
    m: int
    arcs: list
    balances: dict | None = None
    # snapped fractional masses retained for window checks
    color_mass: dict = field(default_factory=dict)  # (i, h) -> float
    total_mass: dict = field(default_factory=dict)  # i -> float

    def a2_arcs(self):
        return [a for a in self.arcs if isinstance(a.tail, tuple) and a.tail[0] == "p"]


def snap_to_integer(value: float, eps: float = EPS_POS) -> float:
    """Round values within eps of an integer; floors of exact reals need this."""
    nearest = round(value)
    return float(nearest) if abs(value - nearest) <= eps else float(value)


def _masses(rerouted: FractionalSolution, inst: MetricInstance, centers):
    color_mass = {}
    total_mass = {}
    for i in centers:
        row = rerouted.x[i, :]
        for h in range(inst.m):
            color_mass[(i, h)] = snap_to_integer(float(row[inst.colors == h].sum()))
        total_mass[i] = snap_to_integer(float(row.sum()))
    return color_mass, total_mass


def build_center_flow(rerouted: FractionalSolution, centers,
                      inst: MetricInstance) -> FlowNetwork:
    """Radius-mode network: unit arcs into (center, color) nodes, floor/ceil
    windows on the aggregation arcs, no costs."""
    centers = sorted(int(c) for c in centers)
    color_mass, total_mass = _masses(rerouted, inst, centers)
    arcs = []
    for j in range(inst.n):
        arcs.append(FlowArc("s", ("p", j), 0, 1))
    for j in range(inst.n):
        h = int(inst.colors[j])
        for i in centers:
            if rerouted.x[i, j] > EPS_POS:
                arcs.append(FlowArc(("p", j), ("ch", i, h), 0, 1))
    for i in centers:
        for h in range(inst.m):
            mass = color_mass[(i, h)]
            arcs.append(FlowArc(("ch", i, h), ("c", i),
                                math.floor(mass), math.ceil(mass)))
    for i in centers:
        mass = total_mass[i]
        arcs.append(FlowArc(("c", i), "t", math.floor(mass), math.ceil(mass)))
    return FlowNetwork(kind="center", n=inst.n, centers=tuple(centers),
                       m=inst.m, arcs=arcs, balances=None,
                       color_mass=color_mass, total_mass=total_mass)


def max_flow_with_lower_bounds(net: FlowNetwork) -> dict:
    """Integral flow of value n respecting all arc windows.

    Standard reduction: lower bounds become node excesses, a closure arc
    t -> s with lower = upper = n pins the flow value, and a plain integral
    max flow between the super-terminals decides feasibility.
    """
    if net.kind != "center":
        raise ValidationError("lower-bounded max flow expects a radius-mode network")
    arcs = list(net.arcs) + [FlowArc("t", "s", net.n, net.n)]

    nodes = []
    seen = {}
    for arc in arcs:
        for v in (arc.tail, arc.head):
            if v not in seen:
                seen[v] = len(nodes)
                nodes.append(v)
    super_source = len(nodes)
    super_sink = len(nodes) + 1

    excess = [0] * len(nodes)
    rows, cols, caps = [], [], []
    arc_pos = []
    for arc in arcs:
        u, v = seen[arc.tail], seen[arc.head]
        excess[v] += arc.lower
        excess[u] -= arc.lower
        residual = arc.upper - arc.lower
        arc_pos.append((u, v, residual))
        if residual > 0:
            rows.append(u)
            cols.append(v)
            caps.append(residual)
    need = 0
    for w, e in enumerate(excess):
        if e > 0:
            rows.append(super_source)
            cols.append(w)
            caps.append(e)
            need += e
        elif e < 0:
            rows.append(w)
            cols.append(super_sink)
            caps.append(-e)
    size = len(nodes) + 2
    graph = sparse.csr_matrix((np.array(caps, dtype=np.int64),
                               (np.array(rows), np.array(cols))),
                              shape=(size, size))
    result = maximum_flow(graph, super_source, super_sink)
    if result.flow_value != need:
        raise PipelineError(
            "flow", f"no flow of value {net.n} meets the arc windows "
                    f"(saturated {result.flow_value} of {need} units of excess)")
    flow_matrix = result.flow
    flows = {}
    for arc, (u, v, residual) in zip(arcs, arc_pos):
        routed = int(flow_matrix[u, v]) if residual > 0 else 0
        flows[(arc.tail, arc.head)] = arc.lower + routed
    return flows


def build_medmeans_flow(rerouted: FractionalSolution, centers,
                        inst: MetricInstance, objective: str,
                        cost_scale: int = COST_SCALE) -> FlowNetwork:
    """Cost-mode network: balances encode mass floors, assignment arcs carry
    integer-scaled distances (squared for the sum-of-squares objective)."""
    if objective not in ("median", "means"):
        raise ValidationError("cost-mode network expects 'median' or 'means'")
    centers = sorted(int(c) for c in centers)
    color_mass, total_mass = _masses(rerouted, inst, centers)
    d = inst.distance_matrix()
    arcs = []
    for j in range(inst.n):
        arcs.append(FlowArc("s", ("p", j), 0, 1))
    for j in range(inst.n):
        h = int(inst.colors[j])
        for i in centers:
            if rerouted.x[i, j] > EPS_POS:
                dist = d[i, j] if objective == "median" else d[i, j] ** 2
                arcs.append(FlowArc(("p", j), ("ch", i, h), 0, 1,
                                    cost=int(round(dist * cost_scale))))
    for i in centers:
        for h in range(inst.m):
            mass = color_mass[(i, h)]
            arcs.append(FlowArc(("ch", i, h), ("c", i), 0,
                                math.ceil(mass) - math.floor(mass)))
    for i in centers:
        mass = total_mass[i]
        arcs.append(FlowArc(("c", i), "t", 0,
                            math.ceil(mass) - math.floor(mass)))

    balances = {"s": inst.n}
    for j in range(inst.n):
        balances[("p", j)] = 0
    floor_sum_by_center = {}
    for i in centers:
        for h in range(inst.m):
            f = math.floor(color_mass[(i, h)])
            balances[("ch", i, h)] = -f
            floor_sum_by_center[i] = floor_sum_by_center.get(i, 0) + f
    total_floor = 0
    for i in centers:
        f = math.floor(total_mass[i])
        balances[("c", i)] = -(f - floor_sum_by_center[i])
        total_floor += f
    balances["t"] = -(inst.n - total_floor)
    if sum(balances.values()) != 0:
        raise PipelineError("flow", "node balances do not sum to zero")
    return FlowNetwork(kind="mincost", n=inst.n, centers=tuple(centers),
                       m=inst.m, arcs=arcs, balances=balances,
                       color_mass=color_mass, total_mass=total_mass)


def min_cost_flow(net: FlowNetwork) -> dict:
    """Exact integral min-cost flow meeting all node balances."""
    if net.kind != "mincost" or net.balances is None:
        raise ValidationError("min-cost flow expects a cost-mode network")
    graph = nx.DiGraph()
    for node, balance in net.balances.items():
        graph.add_node(node, demand=-balance)  # networkx: positive demand consumes
    for arc in net.arcs:
        graph.add_edge(arc.tail, arc.head, capacity=arc.upper, weight=arc.cost)
    try:
        _, flow_dict = nx.network_simplex(graph)
    except nx.NetworkXUnfeasible as exc:
        raise PipelineError("flow", f"min-cost flow infeasible: {exc}") from exc
    flows = {}
    for arc in net.arcs:
        flows[(arc.tail, arc.head)] = int(flow_dict[arc.tail][arc.head])
    return flows


def extract_assignment(flows: dict, net: FlowNetwork) -> np.ndarray:
    """0/1 assignment table from the unit flows on the point arcs."""
    x2 = np.zeros((net.n, net.n))
    for (tail, head), value in flows.items():
        if isinstance(tail, tuple) and tail[0] == "p" and value:
            if value != 1:
                raise PipelineError("extract", f"non-unit flow {value} on arc {tail}->{head}")
            j = tail[1]
            i = head[1]
            x2[i, j] = 1.0
    per_point = x2.sum(axis=0)
    if not np.all(per_point == 1.0):
        j = int(np.flatnonzero(per_point != 1.0)[0])
        raise PipelineError("extract",
                            f"point {j} assigned {int(per_point[j])} times, expected once")
    return x2


def check_mass_windows(x2: np.ndarray, net: FlowNetwork,
                       inst: MetricInstance) -> None:
    """Verify integral per-color / total masses sit in the fractional windows."""
    for i in net.centers:
        got_total = int(x2[i, :].sum())
        mass = net.total_mass[i]
        if not math.floor(mass) <= got_total <= math.ceil(mass):
            raise PipelineError(
                "flow", f"center {i} serves {got_total} points outside "
                        f"[{math.floor(mass)}, {math.ceil(mass)}]")
        for h in range(inst.m):
            got = int(x2[i, inst.colors == h].sum())
            mass_h = net.color_mass[(i, h)]
            if not math.floor(mass_h) <= got <= math.ceil(mass_h):
                raise PipelineError(
                    "flow", f"center {i} serves {got} points of color {h} "
                            f"outside [{math.floor(mass_h)}, {math.ceil(mass_h)}]")


def dump_flow_text(net: FlowNetwork, stream) -> None:
    """One arc per line: tail head lower upper cost."""

    def label(v):
        return v if isinstance(v, str) else "_".join(str(part) for part in v)

    for arc in net.arcs:
        stream.write(f"{label(arc.tail)} {label(arc.head)} "
                     f"{arc.lower} {arc.upper} {arc.cost}\n")
    if net.balances is not None:
        for node, balance in net.balances.items():
            stream.write(f"balance {label(node)} {balance}\n")
