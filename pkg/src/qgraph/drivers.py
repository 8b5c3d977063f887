"""Coefficient-free bookkeeping for driven solutions on a lattice domain.

A driven solution is fixed by boundary data that vanishes on the top, bottom
and left sides except at one driving vertex, with zero flux on the left side
except (for a Neumann driver) at one left vertex.  The right side is whatever
the D-N map forces.  Which vertices of such a solution vanish identically,
and which values can be computed from a partially known coefficient set, are
purely combinatorial questions answered here.  The numerical modules replay
the resulting programs at each energy.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

from .lattice import DomainError, LatticeDomain


@dataclass(frozen=True)
class Driver:
    kind: str  # "dirichlet" or "neumann"
    vertex: int

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann"):
            raise ValueError(f"unknown driver kind {self.kind!r}")

    def tag(self, domain: LatticeDomain) -> str:
        return f"{self.kind[0].upper()}{domain.label(self.vertex)}"


def check_driver(domain: LatticeDomain, driver: Driver) -> None:
    side = domain.vertices[driver.vertex].side
    if driver.kind == "dirichlet" and side not in ("T", "B", "L"):
        raise DomainError("a Dirichlet driver must sit on the top, bottom or left side")
    if driver.kind == "neumann" and side != "L":
        raise DomainError("a Neumann driver must sit on the left side")


def zero_set(domain: LatticeDomain, driver: Driver) -> frozenset[int]:
    """Vertices where the driven solution vanishes for every coefficient choice."""
    check_driver(domain, driver)
    zero = set()
    for s in "TBL":
        for b in domain.sides[s]:
            if not (driver.kind == "dirichlet" and b == driver.vertex):
                zero.add(b)
    for b in domain.sides["L"]:
        if not (driver.kind == "neumann" and b == driver.vertex):
            zero.add(domain.trace_vertex(b))
    changed = True
    while changed:
        changed = False
        for x in domain.interior:
            if x in zero:
                rest = [w for w in domain.neighbors(x) if w not in zero]
                if len(rest) == 1:
                    zero.add(rest[0])
                    changed = True
    return frozenset(zero)


@dataclass(frozen=True)
class MarchStep:
    """Solve for ``target`` from the vertex equation centred at ``center``."""

    target: int
    center: int


def march_program(
    domain: LatticeDomain,
    seeds,
    zero: frozenset[int],
    known_edges: set[int] | frozenset[int],
    known_couplings: set[int] | frozenset[int],
) -> tuple[list[MarchStep], frozenset[int]]:
    """Order in which further values follow from the seeds.

    A centre in ``zero`` needs only the edges to its nonzero neighbours; any
    other centre needs all of its edges and its coupling.  Each step fixes
    the single remaining unknown neighbour.

    ``seeds`` is a set or a mapping ``vertex -> cost``.  Marching is unstable,
    so every value is derived along the cheapest chain, a chain costing one
    per step on top of its most expensive input (Dijkstra order).  Returns
    the steps in execution order and the set of computable vertices.
    """
    costs = dict(seeds) if isinstance(seeds, dict) else {v: 0 for v in seeds}
    for z in zero:
        costs[z] = 0
    heap = [(c, v, -1) for v, c in costs.items()]
    heapq.heapify(heap)
    done: dict[int, int] = {}
    steps: list[MarchStep] = []

    def inputs_of(x):
        if x in zero:
            live = [(w, e) for w, e in domain.adjacency[x] if w not in zero]
        else:
            if x not in known_couplings or x not in done:
                return None
            live = domain.adjacency[x]
        if not all(e in known_edges for _, e in live):
            return None
        return live

    while heap:
        c, v, center = heapq.heappop(heap)
        if v in done:
            continue
        done[v] = c
        if center >= 0:
            steps.append(MarchStep(v, center))
        for x in [v] + domain.neighbors(v):
            if domain.is_boundary(x) or (x not in zero and x not in done):
                continue
            live = inputs_of(x)
            if live is None:
                continue
            missing = [w for w, _ in live if w not in done]
            if len(missing) != 1:
                continue
            used = [done[w] for w, _ in live if w in done]
            if x not in zero:
                used.append(done[x])
            heapq.heappush(heap, (1 + max(used, default=0), missing[0], x))
    return steps, frozenset(done)


TRACE_COST = 2


def driven_seeds(domain: LatticeDomain) -> dict[int, int]:
    """Values available before marching, with their cost.

    Prescribed values (top, bottom and left sides, left traces) are exact.
    Right-side values and the remaining traces come out of the D-N map and
    are charged ``TRACE_COST`` marching steps.
    """
    seeds = {}
    for b in domain.boundary:
        exact = domain.vertices[b].side != "R"
        seeds[b] = 0 if exact else TRACE_COST
        w = domain.trace_vertex(b)
        c = 0 if domain.vertices[b].side == "L" else TRACE_COST
        seeds[w] = min(seeds.get(w, c), c)
    return seeds


def cauchy_seeds(domain: LatticeDomain) -> set[int]:
    """Values fixed by Dirichlet data off the right side and flux on the left."""
    seeds = {b for s in "TBL" for b in domain.sides[s]}
    return seeds | {domain.trace_vertex(b) for b in domain.sides["L"]}


@dataclass(frozen=True)
class Rule:
    """One recoverable item for a given driven solution.

    ``kind`` is ``"edge"`` (a vanishing centre with one unknown edge),
    ``"edge+coupling"`` (a nonvanishing centre whose only unknown edge leads
    to a vanishing neighbour) or ``"coupling"`` (all edges at the centre
    known).
    """

    kind: str
    center: int
    edge: int | None
    neighbor: int | None


def applicable_rules(
    domain: LatticeDomain,
    zero: frozenset[int],
    computable: frozenset[int],
    known_edges,
    known_couplings,
) -> list[Rule]:
    rules = []
    for x in domain.interior:
        if x in zero:
            live = [(w, e) for w, e in domain.adjacency[x] if w not in zero]
            unknown = [(w, e) for w, e in live if e not in known_edges]
            if len(unknown) == 1 and len(live) >= 2 and all(w in computable for w, _ in live):
                rules.append(Rule("edge", x, unknown[0][1], unknown[0][0]))
            continue
        if x not in computable or not all(w in computable for w in domain.neighbors(x)):
            continue
        unknown = [(w, e) for w, e in domain.adjacency[x] if e not in known_edges]
        if len(unknown) == 1 and unknown[0][0] in zero:
            rules.append(Rule("edge+coupling", x, unknown[0][1], unknown[0][0]))
        elif not unknown and x not in known_couplings:
            rules.append(Rule("coupling", x, None, None))
    return rules


def schedule(domain: LatticeDomain) -> list[list[Driver]]:
    """Driver groups in the order the layers are stripped.

    Square: ``A_{m-1}, ..., A_1`` then ``B_{n+1}, ..., B_2``; one pass covers
    everything.  Hex: the top, bottom and left families, which the caller
    sweeps repeatedly until nothing new is recovered.
    """
    from .lattice import line_range

    if domain.kind == "square":
        m, n = domain.size
        groups = [line_drivers(domain, "A", k) for k in range(m - 1, 0, -1)]
        groups += [line_drivers(domain, "B", l) for l in range(n + 1, 1, -1)]
        return groups
    ks = list(line_range(domain, "A"))[::-1]
    groups = [line_drivers(domain, "A", k) for k in ks]
    groups += [line_drivers(domain, "B", k) for k in ks]
    groups += [[Driver("neumann", b)] for b in reversed(domain.sides["L"])]
    return groups


def line_drivers(domain: LatticeDomain, family: str, k: int) -> list[Driver]:
    """Drivers whose solutions strip the layer below line ``family_k``.

    Square ``A_k`` uses the top vertex ``a_k`` and ``B_l`` the left vertex
    ``b_{l-1}`` (flux first, then value).  Hex ``A_k`` uses ``alpha_k`` and
    ``B_l`` the ``l``-th bottom vertex, the lowest point of that column.
    """
    from .lattice import line_range

    if k not in line_range(domain, family):
        raise DomainError(f"line {family}_{k} out of range for {domain.descriptor()}")
    T, B, L = domain.sides["T"], domain.sides["B"], domain.sides["L"]
    if domain.kind == "square":
        if family == "A":
            if k == 0:
                raise DomainError("A_0 coincides with B_{n+1}; strip it with the B family")
            return [Driver("dirichlet", T[k - 1])]
        if k < 2:
            raise DomainError("the B family runs down to B_2")
        b = L[k - 2]
        return [Driver("neumann", b), Driver("dirichlet", b)]
    return [Driver("dirichlet", T[k] if family == "A" else B[k])]


def driver_pool(domain: LatticeDomain) -> list[Driver]:
    """Every admissible driver: unit values on T, B and L, unit flux on L."""
    pool = [Driver("dirichlet", b) for s in "TBL" for b in domain.sides[s]]
    return pool + [Driver("neumann", b) for b in domain.sides["L"]]


def rule_items(rule: Rule) -> list[tuple[str, int]]:
    if rule.kind == "coupling":
        return [("coupling", rule.center)]
    items = [("edge", rule.edge)]
    if rule.kind == "edge+coupling":
        items.append(("coupling", rule.center))
    return items


def march_depths(domain: LatticeDomain, steps, computable) -> dict[int, int]:
    """Length of the marching chain behind each computable value (seeds are 0)."""
    depth = {v: 0 for v in computable}
    for st in steps:
        inputs = [w for w in domain.neighbors(st.center) if w != st.target] + [st.center]
        depth[st.target] = 1 + max(depth[w] for w in inputs)
    return depth


def rule_cost(domain: LatticeDomain, rule: Rule, depth: dict[int, int]) -> int:
    """Deepest marched value a rule reads; shallower rules are more accurate."""
    if rule.kind == "edge":
        return max(depth[w] for w in domain.neighbors(rule.center) if w in depth)
    return max(depth[w] for w in domain.neighbors(rule.center) + [rule.center])
