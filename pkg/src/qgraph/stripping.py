"""Numerical layer stripping shared by the square and hexagonal inversions.

Each recovery step picks a driven solution and a vertex where the known
coefficients reduce the vertex equation to one unknown edge (and possibly the
coupling).  Three shapes occur:

``edge``
    the centre ``x`` vanishes, so ``psi_xy = -u(y) / sum_{w != y} u(w)/psi_xw``
    is an entire function of ``lam`` whose zeros are the Dirichlet
    eigenvalues of the unknown edge;
``edge+coupling``
    the centre does not vanish and the unknown edge leads to a vanishing
    neighbour; ``G = psi'_xy/psi_xy + C_x`` is known up to ``C_x`` and the
    zeros of ``1/G`` are again the Dirichlet eigenvalues;
``coupling``
    every edge at ``x`` is known and ``C_x`` is read off directly.

Edge spectra go through the Borg inversion of :mod:`qgraph.sturm`.
Evaluations near Dirichlet eigenvalues of already known edges are replaced by
polynomial interpolation from points just outside a small exclusion radius,
because several of the computed quantities have removable singularities
there.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import BarycentricInterpolator
from scipy.optimize import brentq

from . import drivers as drv
from .lattice import LatticeDomain
from .sturm import (
    BorgError,
    DirichletSpectrum,
    PoleProximityError,
    SymmetricPotential,
    borg_reconstruct,
    dirichlet_spectrum,
)
from .vertex_op import (
    CouplingField,
    DtnOracle,
    EdgeField,
    MissingSampleError,
    SingularSystemError,
    driven_solution,
    transfer_table,
)

log = logging.getLogger(__name__)

_SOFT_ERRORS = (SingularSystemError, PoleProximityError, ZeroDivisionError, FloatingPointError)


class ReconstructionError(RuntimeError):
    pass


@dataclass
class ScanConfig:
    """Energy sampling for the inverse steps.

    ``lam_max`` defaults to ``((J + 3) pi)^2 + 5``, which brackets ``J + 1``
    eigenvalues of any edge with ``|V| <= 5``.  ``lam_min`` stays above zero:
    driven solutions are badly conditioned at negative energies, and no edge
    with ``|V| < pi^2 - lam_min`` has an eigenvalue there.  Recovered edges
    outside that bound are flagged.
    """

    J: int = 3
    n_points: int = 400
    lam_min: float = 0.5
    lam_max: float | None = None
    exclusion: float = 2e-3
    n_avg: int = 5
    max_refine: int = 3
    coupling_spread_tol: float = 1e-6
    max_shift_retries: int = 10
    shift: float = 1e-3

    @property
    def upper(self) -> float:
        if self.lam_max is not None:
            return float(self.lam_max)
        return ((self.J + 3) * math.pi) ** 2 + 5.0

    def grid(self, refine: int = 0) -> np.ndarray:
        n = (self.n_points - 1) * 2**refine + 1
        return np.linspace(self.lam_min, self.upper, n)


@dataclass
class EdgeRecord:
    edge: int
    potential: SymmetricPotential
    eigenvalues: tuple[float, ...]
    spectrum_residual: float
    driver: str
    center: int
    rule: str


@dataclass
class CouplingRecord:
    vertex: int
    value: float
    spread: float
    lam_points: tuple[float, ...]
    driver: str
    rule: str


@dataclass
class ReconstructionReport:
    domain: LatticeDomain
    edges: EdgeField
    couplings: CouplingField
    edge_records: dict[int, EdgeRecord]
    coupling_records: dict[int, CouplingRecord]
    lam_points: list[float]
    steps: list[tuple[str, str, int]]
    flags: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# regularised evaluation


class Regularized:
    """``fn`` with values inside small clusters around ``bad`` interpolated.

    Points within ``radius`` of a bad energy are evaluated from a degree-5
    polynomial through ``lo - k r`` and ``hi + k r`` for ``k = 1, 2, 3``,
    where ``[lo, hi]`` is the cluster of nearby bad energies.  Direct
    evaluations that fail are turned into new bad energies on the fly.
    """

    def __init__(self, fn: Callable[[float], float], bad, radius: float):
        self.fn = fn
        self.radius = radius
        self.clusters: list[list[float]] = []
        for b in sorted(bad):
            self._add(b)
        self._memo: dict[float, float] = {}

    def _add(self, b: float):
        r = self.radius
        for c in self.clusters:
            if c[0] - 8 * r <= b <= c[1] + 8 * r:
                c[0], c[1] = min(c[0], b), max(c[1], b)
                break
        else:
            self.clusters.append([b, b])
            self.clusters.sort()
        # merging may chain neighbouring clusters
        merged = []
        for c in self.clusters:
            if merged and c[0] - merged[-1][1] <= 8 * r:
                merged[-1][1] = max(merged[-1][1], c[1])
            else:
                merged.append(c)
        self.clusters = merged

    def _cluster_of(self, lam: float):
        r = self.radius
        for c in self.clusters:
            if c[0] - r < lam < c[1] + r:
                return c
        return None

    def direct(self, lam: float) -> float:
        if lam not in self._memo:
            self._memo[lam] = float(self.fn(lam))
        return self._memo[lam]

    def __call__(self, lam: float) -> float:
        lam = float(lam)
        for _ in range(6):
            c = self._cluster_of(lam)
            if c is None:
                try:
                    return self.direct(lam)
                except _SOFT_ERRORS:
                    self._add(lam)
                    continue
            r = self.radius
            nodes = [c[0] - 3 * r, c[0] - 2 * r, c[0] - r, c[1] + r, c[1] + 2 * r, c[1] + 3 * r]
            try:
                vals = [self.direct(x) for x in nodes]
            except _SOFT_ERRORS as exc:
                raise ReconstructionError(f"cannot regularise near lam={lam!r}: {exc}") from exc
            return float(BarycentricInterpolator(nodes, vals)(lam))
        raise ReconstructionError(f"too many singular energies near lam={lam!r}")


def find_zeros(
    probe: Callable[[float], float],
    K: int,
    config: ScanConfig,
    bad=(),
    *,
    reject_poles: bool = True,
) -> DirichletSpectrum:
    """``K`` smallest zeros of a real-analytic probe by sign-change scan and Brent.

    Sign changes across poles are told apart from zeros by the size of the
    probe just beside the located point.
    """
    if K == 0:
        return DirichletSpectrum(())
    f = Regularized(probe, bad, config.exclusion)
    found: list[float] = []
    for refine in range(config.max_refine + 1):
        grid = config.grid(refine)
        found = []
        mags = []
        prev = None
        for lam in grid:
            val = f(lam)
            mags.append(abs(val))
            if prev is not None and prev[1] * val < 0:
                a, b = prev[0], float(lam)
                root = brentq(f, a, b, xtol=1e-12 * max(1.0, abs(a)), rtol=1e-15, maxiter=200)
                if not reject_poles or _is_zero(f, root, mags):
                    found.append(root)
                    if len(found) == K:
                        return DirichletSpectrum(tuple(found))
            elif val == 0.0:
                found.append(float(lam))
                if len(found) == K:
                    return DirichletSpectrum(tuple(found))
            prev = (float(lam), val)
    raise ReconstructionError(f"found {len(found)} of {K} zeros below {config.upper:.1f}")


def _is_zero(f, root: float, mags) -> bool:
    h = 1e-6 * max(1.0, abs(root))
    scale = float(np.median(mags)) or 1.0
    side = max(abs(f(root - h)), abs(f(root + h)))
    return side < 1e-2 * scale


# ---------------------------------------------------------------------------
# state


class ReconstructionState:
    """Known coefficients plus caches for one inversion run."""

    def __init__(self, oracle: DtnOracle, prior: dict, config: ScanConfig):
        self.domain = oracle.domain
        self.oracle = oracle
        self.config = config
        self.edges: dict[int, SymmetricPotential] = dict(prior)
        self.couplings: dict[int, float] = {}
        self.edge_records: dict[int, EdgeRecord] = {}
        self.coupling_records: dict[int, CouplingRecord] = {}
        self.steps: list[tuple[str, str, int]] = []
        self.flags: list[str] = []
        self._spectra: dict[SymmetricPotential, tuple[float, ...]] = {}
        self._plans: dict = {}
        self._values: dict = {}
        self.version = 0
        self.frontier: str | None = None
        missing = self.domain.boundary_adjacent_edges() - set(prior)
        if missing:
            raise ReconstructionError(f"boundary-adjacent edges {sorted(missing)} need known potentials")

    # -- knowledge -------------------------------------------------------
    def knows_edge(self, e: int) -> bool:
        return e in self.edges

    def knows_coupling(self, v: int) -> bool:
        return v in self.couplings

    def complete(self) -> bool:
        return len(self.edges) == len(self.domain.edges) and len(self.couplings) == len(self.domain.interior)

    def _bump(self):
        self.version += 1
        self._plans.clear()
        self._values.clear()

    def set_edge(self, record: EdgeRecord):
        if math.pi**2 - record.potential.sup_bound() <= self.config.lam_min:
            ed = self.domain.edges[record.edge]
            self.flags.append(
                f"edge {self.domain.label(ed.tail)}-{self.domain.label(ed.head)}: "
                "potential may have an eigenvalue below the scan window"
            )
        self.edges[record.edge] = record.potential
        self.edge_records[record.edge] = record
        self.steps.append(("edge", record.driver, record.edge))
        self._bump()

    def set_coupling(self, record: CouplingRecord):
        self.couplings[record.vertex] = record.value
        self.coupling_records[record.vertex] = record
        self.steps.append(("coupling", record.driver, record.vertex))
        if record.spread > self.config.coupling_spread_tol:
            self.flags.append(
                f"coupling spread {record.spread:.2e} at vertex {self.domain.label(record.vertex)}"
            )
        self._bump()

    # -- driven solutions ------------------------------------------------
    def plan(self, driver: drv.Driver):
        key = driver
        if key not in self._plans:
            zero = drv.zero_set(self.domain, driver)
            steps, computable = drv.march_program(
                self.domain, drv.driven_seeds(self.domain), zero, set(self.edges), set(self.couplings)
            )
            self._plans[key] = (zero, steps, computable)
        return self._plans[key]

    def rules(self, driver: drv.Driver) -> list[drv.Rule]:
        zero, _, computable = self.plan(driver)
        return drv.applicable_rules(self.domain, zero, computable, self.edges, self.couplings)

    def values(self, driver: drv.Driver, lam: float) -> np.ndarray:
        key = (driver, lam)
        hit = self._values.get(key)
        if hit is None:
            zero, steps, _ = self.plan(driver)
            hit = driven_solution(
                self.oracle, driver, self.edges, self.couplings, lam, plan=(zero, steps)
            ).values
            self._values[key] = hit
        return hit

    def bad_energies(self) -> list[float]:
        """Dirichlet eigenvalues of every known edge below the scan ceiling."""
        top = self.config.upper + 10.0
        out = set()
        for pot in set(self.edges.values()):
            if pot not in self._spectra:
                K = max(1, int(math.sqrt(top + pot.sup_bound()) / math.pi) + 1)
                self._spectra[pot] = dirichlet_spectrum(pot, K).eigenvalues
            out.update(x for x in self._spectra[pot] if x <= top)
        return sorted(out)

    def report(self) -> ReconstructionReport:
        missing_e = sorted(set(range(len(self.domain.edges))) - set(self.edges))
        missing_c = sorted(set(self.domain.interior) - set(self.couplings))
        flags = list(self.flags)
        if missing_e or missing_c:
            flags.append(f"incomplete: {len(missing_e)} edges and {len(missing_c)} couplings unknown")
        default = SymmetricPotential.constant(0.0, self.config.J)
        return ReconstructionReport(
            domain=self.domain,
            edges=EdgeField(default, dict(sorted(self.edges.items()))),
            couplings=CouplingField(0.0, dict(sorted(self.couplings.items()))),
            edge_records=dict(sorted(self.edge_records.items())),
            coupling_records=dict(sorted(self.coupling_records.items())),
            lam_points=list(self.oracle.requests),
            steps=list(self.steps),
            flags=flags,
        )


# ---------------------------------------------------------------------------
# probes


def edge_probe(state: ReconstructionState, driver: drv.Driver, rule: drv.Rule) -> Callable[[float], float]:
    """``psi`` of the unknown edge at a vanishing centre."""
    dom = state.domain
    x, y = rule.center, rule.neighbor
    zero = state.plan(driver)[0]
    live = [(w, e) for w, e in dom.adjacency[x] if w not in zero and w != y]

    def probe(lam: float) -> float:
        u = state.values(driver, lam)
        psi, _ = transfer_table(state.edges, [e for _, e in live], lam)
        s = sum(u[w] / psi[e] for w, e in live)
        return -u[y] / s

    return probe


def coupling_parts(state: ReconstructionState, driver: drv.Driver, x: int, skip: int | None):
    """Callable giving ``(u(x), sum u(w)/psi, sum psi'/psi)`` over edges not to ``skip``."""
    dom = state.domain
    nb = [(w, e) for w, e in dom.adjacency[x] if w != skip]

    def parts(lam: float):
        u = state.values(driver, lam)
        psi, dpsi = transfer_table(state.edges, [e for _, e in nb], lam)
        num = sum(u[w] / psi[e] for w, e in nb)
        s = sum(dpsi[e] / psi[e] for _, e in nb)
        return u[x], num, s

    return parts


def inverse_g_probe(state, driver, rule) -> Callable[[float], float]:
    """``1 / (psi'/psi + C)`` of the unknown edge at a nonvanishing centre."""
    parts = coupling_parts(state, driver, rule.center, rule.neighbor)

    def probe(lam: float) -> float:
        ux, num, s = parts(lam)
        return ux / (num - s * ux)

    return probe


# ---------------------------------------------------------------------------
# steps


def recover_edge_from_probe(state, probe, *, reject_poles: bool) -> tuple[SymmetricPotential, DirichletSpectrum, float]:
    J = state.config.J
    ev = find_zeros(probe, J + 1, state.config, state.bad_energies(), reject_poles=reject_poles)
    try:
        pot = borg_reconstruct(ev, J)
    except BorgError as exc:
        raise ReconstructionError(f"Borg inversion failed: {exc}") from exc
    check = dirichlet_spectrum(pot, J + 1).as_array()
    return pot, ev, float(np.max(np.abs(check - ev.as_array())))


def regular_points(state: ReconstructionState, avoid, ux: Callable[[float], float]) -> list[float]:
    """``n_avg`` scan energies well away from all singular sets with the best ``ux`` score."""
    cfg = state.config
    avoid = np.asarray(sorted(avoid), dtype=float)
    cands = []
    for lam in cfg.grid():
        if avoid.size and np.min(np.abs(avoid - lam)) < 1.0:
            continue
        try:
            cands.append((abs(ux(lam)), float(lam)))
        except _SOFT_ERRORS:
            continue
    cands.sort(key=lambda t: (-t[0], t[1]))
    return sorted(lam for _, lam in cands[: cfg.n_avg])


def estimate_coupling(state, driver, x: int, extra_avoid=()) -> tuple[float, float, tuple[float, ...]]:
    """``C_x`` from the vertex equation once every edge at ``x`` is known."""
    parts = coupling_parts(state, driver, x, None)

    def health(lam):
        # size of u(x) against the largest computed value: absolute marching
        # errors scale with the latter
        u = state.values(driver, lam)
        return abs(u[x]) / np.nanmax(np.abs(u))

    pts = regular_points(state, list(state.bad_energies()) + list(extra_avoid), health)
    if not pts:
        raise ReconstructionError(f"no regular energies for the coupling at {state.domain.label(x)}")
    est = []
    for lam in pts:
        ux, num, s = parts(lam)
        est.append(num / ux - s)
    est = np.array(est)
    return float(np.mean(est)), float(np.max(est) - np.min(est)), tuple(pts)


def apply_rule(state: ReconstructionState, driver: drv.Driver, rule: drv.Rule) -> list[str]:
    """Run one recovery step and store the results; returns what was recovered."""
    dom = state.domain
    tag = driver.tag(dom)
    got = []
    if rule.kind == "edge":
        pot, ev, res = recover_edge_from_probe(state, edge_probe(state, driver, rule), reject_poles=True)
        state.set_edge(EdgeRecord(rule.edge, pot, ev.eigenvalues, res, tag, rule.center, rule.kind))
        got.append(f"edge {rule.edge}")
    elif rule.kind == "edge+coupling":
        pot, ev, res = recover_edge_from_probe(state, inverse_g_probe(state, driver, rule), reject_poles=True)
        state.set_edge(EdgeRecord(rule.edge, pot, ev.eigenvalues, res, tag, rule.center, rule.kind))
        got.append(f"edge {rule.edge}")
        if not state.knows_coupling(rule.center):
            c, spread, pts = estimate_coupling(state, driver, rule.center)
            state.set_coupling(CouplingRecord(rule.center, c, spread, pts, tag, rule.kind))
            got.append(f"coupling {rule.center}")
    else:
        c, spread, pts = estimate_coupling(state, driver, rule.center)
        state.set_coupling(CouplingRecord(rule.center, c, spread, pts, tag, rule.kind))
        got.append(f"coupling {rule.center}")
    log.debug("%s: %s", tag, ", ".join(got))
    return got


def best_rule(state: ReconstructionState, drivers, allow=None) -> tuple[drv.Driver, drv.Rule] | None:
    """Among all drivers, the applicable rule with the shortest marching chain.

    ``allow(rule)`` can restrict the candidates, e.g. to one layer.
    """
    best = None
    for order, driver in enumerate(drivers):
        zero, steps, computable = state.plan(driver)
        rules = drv.applicable_rules(state.domain, zero, computable, state.edges, state.couplings)
        if allow is not None:
            rules = [r for r in rules if allow(r)]
        if not rules:
            continue
        depth = drv.march_depths(state.domain, steps, computable)
        for rule in rules:
            key = (drv.rule_cost(state.domain, rule, depth), order)
            if best is None or key < best[0]:
                best = (key, driver, rule)
    return None if best is None else (best[1], best[2])


def exhaust(state: ReconstructionState, drivers, allow=None) -> int:
    """Apply rules from a driver group until none is left; returns the step count."""
    count = 0
    while True:
        pick = best_rule(state, drivers, allow)
        if pick is None:
            return count
        apply_rule(state, *pick)
        count += 1


def boundary_prior(domain: LatticeDomain, edges: EdgeField) -> dict[int, SymmetricPotential]:
    return {e: edges[e] for e in sorted(domain.boundary_adjacent_edges())}


__all__ = [
    "CouplingRecord",
    "EdgeRecord",
    "MissingSampleError",
    "ReconstructionError",
    "ReconstructionReport",
    "ReconstructionState",
    "Regularized",
    "ScanConfig",
    "apply_rule",
    "best_rule",
    "boundary_prior",
    "exhaust",
    "find_zeros",
]
