"""Finite square and hexagonal lattice domains for quantum graphs.

Two domain shapes are supported:

* the rectangle of the square lattice: an ``m x n`` grid of interior vertices
  with one pendant boundary vertex attached to every perimeter stub;
* the hexagonal parallelogram: the union of ``(N+1)^2`` honeycomb cells
  ``D_0 + n1*v1 + n2*v2`` with a pendant attached to every perimeter vertex
  that belongs to a single cell.

Every boundary vertex has degree one and every edge touching the boundary is
oriented with its tail ``e(0)`` on the boundary vertex.  Interior edges are
oriented by vertex index.

Hexagonal vertices are labelled exactly by ``(n1, n2, s)`` with the embedding
``n1*v1 + n2*v2 + p_s``, ``v1 = 1 + w``, ``v2 = i*sqrt(3)``, ``p_1 = w^5``,
``p_2 = 1`` and ``w = exp(i*pi/3)``.  The integer ``level = 3*(n1+n2) -+ 1``
equals ``x1 + sqrt(3)*x2`` and indexes the diagonal lines ``A_k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

SIDES = ("T", "B", "L", "R")
SQRT3 = math.sqrt(3.0)


class DomainError(ValueError):
    """Invalid domain size, index, or vertex role."""


@dataclass(frozen=True)
class Vertex:
    index: int
    label: tuple
    pos: tuple[float, float]
    side: str | None = None

    @property
    def boundary(self) -> bool:
        return self.side is not None


@dataclass(frozen=True)
class Edge:
    index: int
    tail: int
    head: int

    def other(self, v: int) -> int:
        if v == self.tail:
            return self.head
        if v == self.head:
            return self.tail
        raise DomainError(f"vertex {v} is not an endpoint of edge {self.index}")


@dataclass(frozen=True)
class DiagonalLine:
    family: str
    index: int
    vertices: tuple[int, ...]
    level: int | None = None


@dataclass
class LatticeDomain:
    kind: str
    size: tuple[int, ...]
    vertices: list[Vertex]
    edges: list[Edge]
    sides: dict[str, tuple[int, ...]]
    adjacency: list[list[tuple[int, int]]] = field(default_factory=list)
    by_label: dict[tuple, int] = field(default_factory=dict)
    _edge_lookup: dict[frozenset, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.adjacency = [[] for _ in self.vertices]
        for e in self.edges:
            self.adjacency[e.tail].append((e.head, e.index))
            self.adjacency[e.head].append((e.tail, e.index))
            self._edge_lookup[frozenset((e.tail, e.head))] = e.index
        self.by_label = {v.label: v.index for v in self.vertices}

    # -- basic queries ---------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def boundary(self) -> tuple[int, ...]:
        """Boundary vertices in side order T, B, L, R."""
        return tuple(v for s in SIDES for v in self.sides[s])

    @property
    def interior(self) -> tuple[int, ...]:
        return tuple(v.index for v in self.vertices if not v.boundary)

    def is_boundary(self, v: int) -> bool:
        return self.vertices[v].boundary

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def neighbors(self, v: int) -> list[int]:
        return [w for w, _ in self.adjacency[v]]

    def edge_between(self, v: int, w: int) -> int:
        try:
            return self._edge_lookup[frozenset((v, w))]
        except KeyError:
            raise DomainError(f"no edge between {v} and {w}") from None

    def boundary_edge(self, v: int) -> int:
        """The unique edge at boundary vertex ``v``."""
        if not self.is_boundary(v):
            raise DomainError(f"vertex {v} is interior")
        return self.adjacency[v][0][1]

    def trace_vertex(self, v: int) -> int:
        """Interior neighbour of boundary vertex ``v``."""
        if not self.is_boundary(v):
            raise DomainError(f"vertex {v} is interior")
        return self.adjacency[v][0][0]

    def boundary_adjacent_edges(self) -> set[int]:
        return {self.boundary_edge(v) for v in self.boundary}

    def interior_edges(self) -> list[int]:
        bad = self.boundary_adjacent_edges()
        return [e.index for e in self.edges if e.index not in bad]

    def label(self, v: int) -> tuple:
        return self.vertices[v].label

    def vertex(self, label: Iterable[int]) -> int:
        return self.by_label[tuple(label)]

    def level(self, v: int) -> int:
        """Integer ``x1 + sqrt(3) x2`` for hex, ``i + j`` for square."""
        lab = self.vertices[v].label
        if self.kind == "hex":
            n1, n2, s = lab
            return 3 * (n1 + n2) + (-1 if s == 1 else 1)
        return lab[0] + lab[1]

    def descriptor(self) -> str:
        return f"{self.kind}:" + "x".join(str(s) for s in self.size)


# ---------------------------------------------------------------------------
# square rectangle


def build_square_domain(m: int, n: int) -> LatticeDomain:
    """Rectangle with an ``m x n`` interior grid (labels ``(i, j)``).

    Interior vertices are ``1 <= i <= m, 1 <= j <= n``; the top side is
    ``a_i = (i, n+1)``, left ``b_j = (0, j)``, bottom ``(i, 0)`` and right
    ``(m+1, j)``, each ordered by increasing free coordinate.
    """
    if m < 2 or n < 2:
        raise DomainError(f"square domain needs m, n >= 2, got ({m}, {n})")
    labels: list[tuple[int, int]] = []
    sides_of: dict[tuple[int, int], str] = {}
    for j in range(1, n + 1):
        for i in range(1, m + 1):
            labels.append((i, j))
    side_labels = {
        "T": [(i, n + 1) for i in range(1, m + 1)],
        "B": [(i, 0) for i in range(1, m + 1)],
        "L": [(0, j) for j in range(1, n + 1)],
        "R": [(m + 1, j) for j in range(1, n + 1)],
    }
    for s in SIDES:
        for lab in side_labels[s]:
            labels.append(lab)
            sides_of[lab] = s
    idx = {lab: k for k, lab in enumerate(labels)}
    vertices = [
        Vertex(k, lab, (float(lab[0]), float(lab[1])), sides_of.get(lab))
        for k, lab in enumerate(labels)
    ]
    pairs = []
    for j in range(1, n + 1):
        for i in range(0, m + 1):
            pairs.append(((i, j), (i + 1, j)))
    for i in range(1, m + 1):
        for j in range(0, n + 1):
            pairs.append(((i, j), (i, j + 1)))
    edges = _orient(pairs, idx, sides_of)
    sides = {s: tuple(idx[lab] for lab in side_labels[s]) for s in SIDES}
    return LatticeDomain("square", (m, n), vertices, edges, sides)


def _orient(pairs, idx, sides_of) -> list[Edge]:
    edges = []
    for k, (p, q) in enumerate(pairs):
        a, b = idx[p], idx[q]
        if q in sides_of:
            a, b = b, a
        elif p not in sides_of and a > b:
            a, b = b, a
        edges.append(Edge(k, a, b))
    return edges


# ---------------------------------------------------------------------------
# hexagonal parallelogram

# corners of the cell centred at the origin, as (dn1, dn2, sublattice), k = 0..5
_CELL_CORNERS = ((0, 0, 2), (0, 1, 1), (-1, 1, 2), (-1, 1, 1), (-1, 0, 2), (0, 0, 1))


def hex_neighbors(lab: tuple[int, int, int]) -> list[tuple[int, int, int]]:
    n1, n2, s = lab
    if s == 2:
        return [(n1, n2, 1), (n1, n2 + 1, 1), (n1 + 1, n2, 1)]
    return [(n1, n2, 2), (n1, n2 - 1, 2), (n1 - 1, n2, 2)]


def hex_cells_of(lab: tuple[int, int, int]) -> list[tuple[int, int]]:
    """The three cell centres (as lattice indices) having ``lab`` as a corner."""
    n1, n2, s = lab
    return [(n1 - d1, n2 - d2) for d1, d2, t in _CELL_CORNERS if t == s]


def hex_position(lab: tuple[int, int, int]) -> tuple[float, float]:
    n1, n2, s = lab
    px, py = (0.5, -SQRT3 / 2) if s == 1 else (1.0, 0.0)
    return (1.5 * n1 + px, (0.5 * n1 + n2) * SQRT3 + py)


def hex_side_labels(N: int) -> dict[str, list[tuple[int, int, int]]]:
    """Exact labels of the four boundary sides, in their listed order."""
    return {
        # alpha_k = beta_N + 2w + k(1+w)
        "T": [(k - 1, N + 2, 1) for k in range(N + 1)],
        # 2w^5 + k(1+w)
        "B": [(k, -1, 2) for k in range(N + 1)],
        # 2w^4, then beta_k = -2 + k*sqrt(3)i
        "L": [(-1, 0, 1)] + [(-2, 1 + k, 2) for k in range(N + 1)],
        # 2 + N(1+w) + k*sqrt(3)i for 0 <= k <= N, then the corner pendant (+2w^2);
        # k = 0 is the pendant of the lower-right corner 1 + N(1+w)
        "R": [(N + 1, k, 1) for k in range(N + 1)] + [(N, N + 1, 2)],
    }


def build_hex_parallelogram(N: int) -> LatticeDomain:
    """Hexagonal parallelogram made of the cells ``0 <= n1, n2 <= N``."""
    if N < 1:
        raise DomainError(f"hex parallelogram needs N >= 1, got {N}")
    cells = {(a, b) for a in range(N + 1) for b in range(N + 1)}
    inner = set()
    for a, b in cells:
        for d1, d2, s in _CELL_CORNERS:
            inner.add((a + d1, b + d2, s))
    pairs = set()
    pendants = {}
    for lab in inner:
        own = [c for c in hex_cells_of(lab) if c in cells]
        for nb in hex_neighbors(lab):
            shared = set(hex_cells_of(nb)) & set(hex_cells_of(lab))
            if nb in inner and shared & cells:
                pairs.add(tuple(sorted((lab, nb))))
        if len(own) == 1:
            # interior angle 2pi/3: the outward lattice edge becomes a pendant
            (out,) = [nb for nb in hex_neighbors(lab) if not set(hex_cells_of(nb)) & set(own)]
            pendants[out] = lab
    side_labels = hex_side_labels(N)
    listed = {lab: s for s in SIDES for lab in side_labels[s]}
    if set(listed) != set(pendants):
        raise DomainError("pendant construction disagrees with the boundary formulas")
    labels = sorted(inner, key=lambda t: (hex_level(t), t[0]))
    labels += [lab for s in SIDES for lab in side_labels[s]]
    idx = {lab: k for k, lab in enumerate(labels)}
    vertices = [Vertex(k, lab, hex_position(lab), listed.get(lab)) for k, lab in enumerate(labels)]
    all_pairs = sorted(pairs, key=lambda pq: (idx[pq[0]], idx[pq[1]]))
    all_pairs += [(pendants[z], z) for s in SIDES for z in side_labels[s]]
    edges = _orient(all_pairs, idx, listed)
    sides = {s: tuple(idx[lab] for lab in side_labels[s]) for s in SIDES}
    return LatticeDomain("hex", (N,), vertices, edges, sides)


def hex_level(lab: tuple[int, int, int]) -> int:
    n1, n2, s = lab
    return 3 * (n1 + n2) + (-1 if s == 1 else 1)


# ---------------------------------------------------------------------------
# diagonal lines


def line_range(domain: LatticeDomain, family: str) -> range:
    if domain.kind == "square":
        m, n = domain.size
        return range(0, m + 1) if family == "A" else range(1, n + 2)
    (N,) = domain.size
    return range(0, N + 1)


def line_level(domain: LatticeDomain, family: str, k: int) -> int:
    """Level of ``A_k`` (square: also ``B_k``).  Hex ``B`` lines are columns, not level sets."""
    if domain.kind == "square":
        m, n = domain.size
        return n + 1 + k if family == "A" else k
    (N,) = domain.size
    if family == "B":
        raise DomainError("hex B lines are columns of constant first coordinate")
    return 3 * (N + k + 1) - 1


def diagonal_line(domain: LatticeDomain, family: str, k: int) -> DiagonalLine:
    """Ordered vertices of ``A_k`` or ``B_k``.

    Square lines have slope -1: ``A_k`` is ``i + j = n + 1 + k`` starting at
    ``a_k`` and ``B_l`` is ``i + j = l`` starting at ``b_l``, so that
    ``B_{n+1} = A_0``.  Hex ``A_k`` is the sublattice-1 level set
    ``3(N+k+1) - 1`` through the top vertex ``alpha_k``, walked in steps of
    ``1 + w^5``.  Hex ``B_l`` is the vertical column of sublattice-2 vertices
    ``(l, y, 2)`` walked upward from the ``l``-th bottom vertex; it bounds the
    support of the solution driven from that vertex.  Only ``B_N`` ends on
    the boundary (on the right side); the other columns stop next to the top.
    """
    if family not in ("A", "B"):
        raise DomainError(f"unknown line family {family!r}")
    if k not in line_range(domain, family):
        raise DomainError(f"line {family}_{k} out of range for {domain.descriptor()}")
    if domain.kind == "hex" and family == "B":
        col = [v.index for v in domain.vertices if v.label[0] == k and v.label[2] == 2]
        col.sort(key=lambda v: domain.label(v)[1])
        return DiagonalLine(family, k, tuple(col), None)
    level = line_level(domain, family, k)
    on_line = [v.index for v in domain.vertices if domain.level(v.index) == level]
    if domain.kind == "hex":
        on_line = [v for v in on_line if domain.label(v)[2] == 1]
    on_line.sort(key=lambda v: domain.label(v)[0])
    return DiagonalLine(family, k, tuple(on_line), level)


def cross_neighbors(domain: LatticeDomain, v: int) -> list[tuple[int, int]]:
    """``(neighbour, edge)`` pairs around interior ``v`` in counter-clockwise order.

    The square order is right, up, left, down; hex fans start at the
    neighbour with the smallest polar angle in ``[0, 2pi)``.
    """
    if domain.is_boundary(v):
        raise DomainError(f"vertex {v} is on the boundary")
    x0, y0 = domain.vertices[v].pos

    def angle(item):
        x, y = domain.vertices[item[0]].pos
        return math.atan2(y - y0, x - x0) % (2 * math.pi)

    return sorted(domain.adjacency[v], key=angle)
