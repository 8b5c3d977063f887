"""Vertex Schrodinger operator, Dirichlet problems and the D-N map.

At an interior vertex ``v`` of degree ``d`` the solution values satisfy

    (1/d) * sum_w u(w) / psi_vw  =  (1/d) * (sum_w psi'_vw / psi_vw + C_v) * u(v)

where ``psi_vw = phi_e(1, lam)`` for the edge ``e = vw``.  Rows are stored in
this degree-normalised form.  For a boundary vertex ``v`` with interior
neighbour ``w`` the D-N map is ``(Lambda f)(v) = u(w) / psi_e`` and the
Neumann derivative is its negative.
"""
from __future__ import annotations

import threading
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import drivers as drv
from .lattice import LatticeDomain
from .sturm import POLE_GUARD, PoleProximityError, SymmetricPotential, propagate_many

COND_LIMIT = 1e10


class SingularSystemError(ArithmeticError):
    """The requested energy is (numerically) an eigenvalue of a solve."""


class MarchingError(ArithmeticError):
    pass


class MissingSampleError(KeyError):
    def __init__(self, missing):
        self.missing = sorted(set(missing))
        super().__init__(f"no recorded D-N sample at lambda = {', '.join(repr(x) for x in self.missing)}")


@dataclass(frozen=True)
class EdgeField:
    default: SymmetricPotential
    overrides: Mapping[int, SymmetricPotential] = field(default_factory=dict)

    def __getitem__(self, e: int) -> SymmetricPotential:
        return self.overrides.get(e, self.default)

    def with_overrides(self, extra: Mapping[int, SymmetricPotential]) -> "EdgeField":
        merged = dict(self.overrides)
        merged.update(extra)
        return EdgeField(self.default, merged)


@dataclass(frozen=True)
class CouplingField:
    default: float = 0.0
    overrides: Mapping[int, float] = field(default_factory=dict)

    def __getitem__(self, v: int) -> float:
        return float(self.overrides.get(v, self.default))


@dataclass(frozen=True)
class BoundaryData:
    """Dirichlet values ``f`` and fluxes ``g`` on the boundary, NaN where not given.

    Both arrays are indexed like ``domain.boundary``.
    """

    f: np.ndarray
    g: np.ndarray

    @classmethod
    def partial(cls, domain: LatticeDomain, f, g, f_sides: str = "TBL", g_sides: str = "L") -> "BoundaryData":
        """Keep ``f`` on ``f_sides`` and ``g`` on ``g_sides`` only."""
        sides = [domain.vertices[b].side for b in domain.boundary]
        fm = np.array([s in f_sides for s in sides])
        gm = np.array([s in g_sides for s in sides])
        return cls(np.where(fm, np.asarray(f, dtype=float), np.nan), np.where(gm, np.asarray(g, dtype=float), np.nan))

    @property
    def f_mask(self) -> np.ndarray:
        return np.isfinite(self.f)

    @property
    def g_mask(self) -> np.ndarray:
        return np.isfinite(self.g)


@dataclass
class VertexSolution:
    lam: float
    values: np.ndarray  # NaN where not computed

    def __getitem__(self, v):
        return self.values[v]


@dataclass
class VertexSystem:
    """Interior block ``A`` and boundary coupling ``B``: ``A u_int + B f = 0``."""

    lam: float
    interior: tuple[int, ...]
    boundary: tuple[int, ...]
    A: np.ndarray
    B: np.ndarray


# ---------------------------------------------------------------------------
# transfer values


@lru_cache(maxsize=1 << 16)
def _transfer(pot: SymmetricPotential, lam: float) -> tuple[float, float]:
    p, dp = propagate_many(pot, [lam])
    return float(p[0]), float(dp[0])


def transfer_table(
    potentials: Mapping[int, SymmetricPotential] | EdgeField,
    edge_ids,
    lam: float,
    *,
    guard: bool = True,
) -> tuple[dict[int, float], dict[int, float]]:
    """``psi_e``, ``psi'_e`` for the requested edges, one propagation per distinct potential."""
    groups: dict[SymmetricPotential, list[int]] = {}
    for e in edge_ids:
        groups.setdefault(potentials[e], []).append(e)
    psi, dpsi = {}, {}
    for pot, es in groups.items():
        p, dp = _transfer(pot, float(lam))
        if guard and abs(p) < POLE_GUARD * (1 + abs(dp)):
            raise PoleProximityError(f"lam={lam!r} is a near Dirichlet eigenvalue of edges {es[:4]}")
        for e in es:
            psi[e], dpsi[e] = p, dp
    return psi, dpsi


def assemble(domain: LatticeDomain, edges: EdgeField, couplings: CouplingField, lam: float) -> VertexSystem:
    interior = domain.interior
    boundary = domain.boundary
    row = {v: i for i, v in enumerate(interior)}
    col = {v: i for i, v in enumerate(boundary)}
    psi, dpsi = transfer_table(edges, range(len(domain.edges)), lam)
    A = np.zeros((len(interior), len(interior)))
    B = np.zeros((len(interior), len(boundary)))
    for v in interior:
        i = row[v]
        d = domain.degree(v)
        q = couplings[v]
        for w, e in domain.adjacency[v]:
            q += dpsi[e] / psi[e]
            if w in row:
                A[i, row[w]] -= 1.0 / (d * psi[e])
            else:
                B[i, col[w]] -= 1.0 / (d * psi[e])
        A[i, i] += q / d
    return VertexSystem(float(lam), interior, boundary, A, B)


def _solve_interior(system: VertexSystem, rhs: np.ndarray) -> np.ndarray:
    A = system.A
    try:
        lu_cond = np.linalg.cond(A)
    except np.linalg.LinAlgError:
        lu_cond = np.inf
    if not np.isfinite(lu_cond) or lu_cond > 1e13:
        raise SingularSystemError(f"interior system singular at lam={system.lam!r} (cond {lu_cond:.2e})")
    return np.linalg.solve(A, rhs)


def solve_dirichlet(domain, edges, couplings, lam, f) -> VertexSolution:
    """Solution with boundary values ``f`` (ordered as ``domain.boundary``)."""
    system = assemble(domain, edges, couplings, lam)
    f = np.asarray(f, dtype=float)
    u_int = _solve_interior(system, -system.B @ f)
    values = np.empty(domain.n_vertices)
    values[list(system.interior)] = u_int
    values[list(system.boundary)] = f
    return VertexSolution(float(lam), values)


def residuals(domain, edges, couplings, sol: VertexSolution, vertices=None) -> np.ndarray:
    """Unnormalised vertex-equation residual at the given interior vertices."""
    vertices = domain.interior if vertices is None else vertices
    psi, dpsi = transfer_table(edges, range(len(domain.edges)), sol.lam)
    u = sol.values
    out = []
    for v in vertices:
        lhs = sum(u[w] / psi[e] for w, e in domain.adjacency[v])
        rhs = (sum(dpsi[e] / psi[e] for _, e in domain.adjacency[v]) + couplings[v]) * u[v]
        out.append(lhs - rhs)
    return np.array(out)


def dtn(domain, edges, couplings, lam) -> np.ndarray:
    """``|dV| x |dV|`` D-N matrix; columns are indicator data in boundary order."""
    system = assemble(domain, edges, couplings, lam)
    u_int = _solve_interior(system, -system.B)
    row = {v: i for i, v in enumerate(system.interior)}
    bd = system.boundary
    psi, _ = transfer_table(edges, [domain.boundary_edge(b) for b in bd], lam)
    out = np.empty((len(bd), len(bd)))
    for i, b in enumerate(bd):
        out[i] = u_int[row[domain.trace_vertex(b)]] / psi[domain.boundary_edge(b)]
    return out


def neumann_derivative(domain, edges, u, lam) -> np.ndarray:
    """``g(v) = -u(w) / psi_e`` for every boundary ``v`` (degree one)."""
    values = u.values if isinstance(u, VertexSolution) else np.asarray(u, dtype=float)
    bd = domain.boundary
    psi, _ = transfer_table(edges, [domain.boundary_edge(b) for b in bd], lam)
    return np.array([-values[domain.trace_vertex(b)] / psi[domain.boundary_edge(b)] for b in bd])


# ---------------------------------------------------------------------------
# marching


def run_program(
    domain: LatticeDomain,
    steps,
    values: np.ndarray,
    zero,
    psi: Mapping[int, float],
    dpsi: Mapping[int, float],
    couplings: Mapping[int, float] | CouplingField,
) -> np.ndarray:
    """Execute marching steps in place; ``values`` must already hold the seeds."""
    for st in steps:
        x, t = st.center, st.target
        acc = 0.0
        if x not in zero:
            g = couplings[x]
            for _, e in domain.adjacency[x]:
                g += dpsi[e] / psi[e]
            acc = g * values[x]
        e_t = None
        for w, e in domain.adjacency[x]:
            if w == t:
                e_t = e
            elif not (x in zero and w in zero):
                acc -= values[w] / psi[e]
        values[t] = psi[e_t] * acc
    return values


def march_partial_cauchy(domain, edges, couplings, lam, f, g=None) -> VertexSolution:
    """Solution from Dirichlet values off the right side and flux on the left.

    ``f`` and ``g`` are indexed like ``domain.boundary``; entries of ``f`` on
    the right side and of ``g`` off the left side are ignored.  A
    :class:`BoundaryData` may be passed as ``f`` instead.
    """
    if isinstance(f, BoundaryData):
        f, g = f.f, f.g
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    bd = domain.boundary
    pos = {b: i for i, b in enumerate(bd)}
    values = np.full(domain.n_vertices, np.nan)
    for s in "TBL":
        for b in domain.sides[s]:
            values[b] = f[pos[b]]
    psi, dpsi = transfer_table(edges, range(len(domain.edges)), lam)
    for b in domain.sides["L"]:
        values[domain.trace_vertex(b)] = -g[pos[b]] * psi[domain.boundary_edge(b)]
    steps, reached = drv.march_program(
        domain, drv.cauchy_seeds(domain), frozenset(), set(range(len(domain.edges))), set(domain.interior)
    )
    if len(reached) != domain.n_vertices:
        raise MarchingError("left-side data does not determine the solution")
    run_program(domain, steps, values, frozenset(), psi, dpsi, couplings)
    return VertexSolution(float(lam), values)


# ---------------------------------------------------------------------------
# D-N oracle

REJECTIONS = {"pole": PoleProximityError, "singular": SingularSystemError}


class DtnOracle:
    """D-N matrices on demand, from a forward model or from recorded samples.

    Recorded samples are looked up by exact energy.  Every request is logged
    (first occurrence order), and computed matrices are cached, so repeated
    calls return the identical array.
    """

    def __init__(self, domain: LatticeDomain, evaluator: Callable[[float], np.ndarray] | None = None,
                 samples: Mapping[float, np.ndarray] | None = None, rejected: Mapping[float, str] | None = None):
        if (evaluator is None) == (samples is None):
            raise ValueError("give exactly one of evaluator or samples")
        self.domain = domain
        self._evaluator = evaluator
        self._samples = dict(samples) if samples is not None else None
        self._rejected = dict(rejected or {})
        self._cache: dict[float, np.ndarray] = {}
        self._lock = threading.Lock()
        self.requests: list[float] = []
        self._seen: set[float] = set()

    @classmethod
    def live(cls, domain, edges: EdgeField, couplings: CouplingField) -> "DtnOracle":
        return cls(domain, evaluator=lambda lam: dtn(domain, edges, couplings, lam))

    @classmethod
    def recorded(cls, domain, samples: Mapping[float, np.ndarray],
                 rejected: Mapping[float, str] | None = None) -> "DtnOracle":
        """Replay samples; ``rejected`` maps energies the forward model refused to
        ``"pole"`` or ``"singular"``, which are raised again on request."""
        return cls(domain, samples=samples, rejected=rejected)

    @property
    def is_live(self) -> bool:
        return self._evaluator is not None

    def __call__(self, lam: float) -> np.ndarray:
        lam = float(lam)
        with self._lock:
            if lam not in self._seen:
                self._seen.add(lam)
                self.requests.append(lam)
            hit = self._cache.get(lam)
        if hit is not None:
            return hit
        if self._samples is not None:
            if lam in self._rejected:
                raise REJECTIONS[self._rejected[lam]](f"lam={lam!r} was rejected by the forward model")
            if lam not in self._samples:
                raise MissingSampleError([lam])
            mat = np.array(self._samples[lam], dtype=float)
        else:
            mat = np.array(self._evaluator(lam), dtype=float)
        mat.setflags(write=False)
        with self._lock:
            return self._cache.setdefault(lam, mat)


def complete_boundary_data(oracle: DtnOracle, lam: float, f2, g) -> np.ndarray:
    """Right-side Dirichlet values compatible with ``f2`` and left flux ``g``.

    Solves ``-(Lambda f)(v) = g(v)`` on the left side for ``f`` on the right
    side.  Arrays are indexed like ``domain.boundary``; right-side entries of
    ``f2`` are ignored.
    """
    dom = oracle.domain
    bd = dom.boundary
    pos = {b: i for i, b in enumerate(bd)}
    Lr = [pos[b] for b in dom.sides["L"]]
    Rr = [pos[b] for b in dom.sides["R"]]
    rest = [pos[b] for s in "TBL" for b in dom.sides[s]]
    lam_mat = oracle(lam)
    f = np.array(f2, dtype=float)
    g = np.asarray(g, dtype=float)
    f[Rr] = 0.0
    block = lam_mat[np.ix_(Lr, Rr)]
    cond = np.linalg.cond(block)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularSystemError(f"left/right D-N block singular at lam={lam!r} (cond {cond:.2e})")
    rhs = -g[Lr] - lam_mat[np.ix_(Lr, rest)] @ f[rest]
    f[Rr] = np.linalg.solve(block, rhs)
    return f


# ---------------------------------------------------------------------------
# driven (special) solutions


def driven_solution(
    oracle: DtnOracle,
    driver: drv.Driver,
    known_edges: Mapping[int, SymmetricPotential],
    known_couplings: Mapping[int, float],
    lam: float,
    *,
    plan=None,
) -> VertexSolution:
    """Values of a driven solution wherever the known coefficients determine them.

    Uncomputable vertices are NaN.  ``plan`` may carry a precomputed
    ``(zero, steps)`` pair for the current knowledge.
    """
    dom = oracle.domain
    if plan is None:
        plan = driver_plan(dom, driver, known_edges, known_couplings)
    zero, steps = plan
    bd = dom.boundary
    pos = {b: i for i, b in enumerate(bd)}
    bedges = [dom.boundary_edge(b) for b in bd]
    edges_needed = set(bedges)
    for st in steps:
        edges_needed.update(e for _, e in dom.adjacency[st.center])
    edges_needed &= set(known_edges)
    psi, dpsi = transfer_table(known_edges, sorted(edges_needed), lam)

    f = np.zeros(len(bd))
    trace = np.full(len(bd), np.nan)
    for i, b in enumerate(bd):
        if dom.vertices[b].side == "L" or dom.trace_vertex(b) in zero:
            trace[i] = 0.0
    if driver.kind == "dirichlet":
        f[pos[driver.vertex]] = 1.0
    else:
        trace[pos[driver.vertex]] = 1.0
    f = _complete_driven(oracle, lam, f, trace, zero, psi, bedges)
    flux = oracle(lam) @ f

    values = np.full(dom.n_vertices, np.nan)
    values[list(bd)] = f
    for i, b in enumerate(bd):
        w = dom.trace_vertex(b)
        values[w] = trace[i] if np.isfinite(trace[i]) else psi[bedges[i]] * flux[i]
    for z in zero:
        values[z] = 0.0
    run_program(dom, steps, values, zero, psi, dpsi, known_couplings)
    return VertexSolution(float(lam), values)


def _complete_driven(oracle, lam, f, trace, zero, psi, bedges) -> np.ndarray:
    """Right-side values from every boundary vertex with a known trace.

    Besides the left side this uses the vertices whose interior neighbour is
    known to vanish, and drops right-side unknowns that vanish themselves.
    The system is overdetermined but consistent; least squares keeps it
    far better conditioned than the square left/right block alone.
    """
    dom = oracle.domain
    bd = dom.boundary
    pos = {b: i for i, b in enumerate(bd)}
    unknown = [pos[b] for b in dom.sides["R"] if b not in zero]
    rows = [i for i in range(len(bd)) if np.isfinite(trace[i])]
    lam_mat = oracle(lam)
    f = f.copy()
    if not unknown:
        return f
    target = np.array([trace[i] / psi[bedges[i]] for i in rows])
    block = lam_mat[np.ix_(rows, unknown)]
    rhs = target - lam_mat[rows] @ f
    sol, _, rank, sv = np.linalg.lstsq(block, rhs, rcond=None)
    if rank < len(unknown) or sv[-1] < sv[0] / COND_LIMIT:
        raise SingularSystemError(f"driven completion singular at lam={lam!r}")
    f[unknown] = sol
    return f


def driver_plan(dom, driver, known_edges, known_couplings):
    zero = drv.zero_set(dom, driver)
    steps, _ = drv.march_program(dom, drv.driven_seeds(dom), zero, set(known_edges), set(known_couplings))
    return zero, steps


def special_solution(oracle, domain, known_edges, known_couplings, k, lam, family="A") -> VertexSolution:
    """Driven solution for the line ``A_k`` (top driver ``a_k``) or ``B_k``.

    Square ``B_k`` is driven by a unit value at the left vertex ``b_{k-1}``;
    hex ``B_k`` by the bottom vertex of index ``k``.
    """
    driver = drv.line_drivers(domain, family, k)[-1]
    return driven_solution(oracle, driver, known_edges, known_couplings, lam)
