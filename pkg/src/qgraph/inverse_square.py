"""Layer stripping on the rectangular lattice.

Coefficients are recovered strip by strip: first the strips between
consecutive anti-diagonals ``A_k`` (``i + j = n + 1 + k``) from the top-right
corner down to ``A_0``, then the strips between ``B_l`` (``i + j = l``) down
to the bottom-left corner.  Inside a strip every step is one of the rules of
:mod:`qgraph.stripping`.

Two driver strategies are available.  ``"lines"`` uses only the driver tied
to the current line (a unit value at ``a_k`` for ``A_k``; unit flux, then
unit value, at ``b_{l-1}`` for ``B_l``).  ``"pooled"`` (the default) lets
every step choose among all admissible drivers, which keeps the marching
chains short and the errors near rounding level.
"""
from __future__ import annotations

import logging
import time

from . import drivers as drv
from .lattice import DomainError, LatticeDomain, line_level
from .stripping import (
    ReconstructionError,
    ReconstructionReport,
    ReconstructionState,
    ScanConfig,
    apply_rule,
    boundary_prior,
    exhaust,
    find_zeros,
)
from .sturm import DirichletSpectrum, SymmetricPotential
from .vertex_op import DtnOracle, EdgeField

log = logging.getLogger(__name__)

STRATEGIES = ("pooled", "lines")


def extract_edge_eigenvalues(state: ReconstructionState, probe, K: int) -> DirichletSpectrum:
    """``K`` smallest zeros of ``probe`` on the scan window of ``state``.

    Energies near Dirichlet eigenvalues of already known edges are
    regularised; sign changes across poles are rejected.
    """
    return find_zeros(probe, K, state.config, state.bad_energies())


def _check_rule(state, driver, rule, kind):
    if rule.kind != kind:
        raise ValueError(f"expected a {kind!r} rule, got {rule.kind!r}")
    if rule not in state.rules(driver):
        raise ReconstructionError(f"rule at {state.domain.label(rule.center)} is not applicable for {driver.tag(state.domain)}")


def recover_adjacent_edge(state: ReconstructionState, driver: drv.Driver, rule: drv.Rule) -> SymmetricPotential:
    """Edge next to a vertex where the driven solution vanishes."""
    _check_rule(state, driver, rule, "edge")
    apply_rule(state, driver, rule)
    return state.edges[rule.edge]


def recover_interior_edge_and_coupling(
    state: ReconstructionState, driver: drv.Driver, rule: drv.Rule
) -> tuple[SymmetricPotential, float]:
    """Last unknown edge at a nonvanishing vertex, then that vertex's coupling."""
    _check_rule(state, driver, rule, "edge+coupling")
    apply_rule(state, driver, rule)
    return state.edges[rule.edge], state.couplings[rule.center]


def _edge_level(domain: LatticeDomain, e: int) -> int:
    ed = domain.edges[e]
    return min(domain.level(ed.tail), domain.level(ed.head))


def _allow_from(domain: LatticeDomain, floor: int):
    """Rules whose recovered items all lie on or above level ``floor``."""

    def allow(rule: drv.Rule) -> bool:
        for kind, item in drv.rule_items(rule):
            lev = _edge_level(domain, item) if kind == "edge" else domain.level(item)
            if lev < floor:
                return False
        return True

    return allow


def _missing_from(state: ReconstructionState, floor: int) -> list[str]:
    """Unknown edges reaching down to ``floor`` and couplings above it."""
    dom = state.domain
    out = [f"edge {dom.label(dom.edges[e].tail)}-{dom.label(dom.edges[e].head)}"
           for e in range(len(dom.edges)) if e not in state.edges and _edge_level(dom, e) >= floor]
    out += [f"coupling {dom.label(v)}" for v in dom.interior
            if v not in state.couplings and dom.level(v) > floor]
    return out


def _strip(state: ReconstructionState, family: str, k: int, strategy: str) -> int:
    dom = state.domain
    if dom.kind != "square":
        raise DomainError("square layer stripping needs a square domain")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    lines = drv.line_drivers(dom, family, k)
    drivers = drv.driver_pool(dom) if strategy == "pooled" else lines
    floor = line_level(dom, family, k) - 1
    state.frontier = f"{family}_{k}"
    count = exhaust(state, drivers, _allow_from(dom, floor))
    missing = _missing_from(state, floor)
    if missing:
        raise ReconstructionError(f"{len(missing)} items left unknown: {', '.join(missing[:4])}")
    log.info("layer %s_%d: %d steps", family, k, count)
    return count


def strip_layer_A(state: ReconstructionState, k: int, strategy: str = "pooled") -> ReconstructionState:
    """Recover the edges between ``A_k`` and ``A_{k-1}`` and the couplings on ``A_k``."""
    m, _ = state.domain.size
    if not 1 <= k <= m - 1:
        raise DomainError(f"A-layers run over k = {m - 1}..1, got {k}")
    _strip(state, "A", k, strategy)
    return state


def strip_layer_B(state: ReconstructionState, l: int, strategy: str = "pooled") -> ReconstructionState:
    """Recover the edges between ``B_l`` and ``B_{l-1}`` and the couplings on ``B_l``."""
    _, n = state.domain.size
    if not 2 <= l <= n + 1:
        raise DomainError(f"B-layers run over l = {n + 1}..2, got {l}")
    _strip(state, "B", l, strategy)
    return state


def reconstruct_square(
    oracle: DtnOracle,
    domain: LatticeDomain,
    prior: EdgeField | dict,
    config: ScanConfig | None = None,
    *,
    strategy: str = "pooled",
) -> ReconstructionReport:
    """All edge potentials and couplings of a square domain from its D-N map.

    ``prior`` must supply the potentials of the boundary-adjacent edges
    (an :class:`EdgeField` or an ``edge -> potential`` mapping).
    """
    if domain.kind != "square":
        raise DomainError("reconstruct_square needs a square domain")
    config = config or ScanConfig()
    known = boundary_prior(domain, prior) if isinstance(prior, EdgeField) else dict(prior)
    known = {e: p.padded(config.J) for e, p in known.items()}
    state = ReconstructionState(oracle, known, config)
    m, n = domain.size
    t0 = time.perf_counter()
    layers = [("A", k) for k in range(m - 1, 0, -1)] + [("B", l) for l in range(n + 1, 1, -1)]
    for family, k in layers:
        try:
            _strip(state, family, k, strategy)
        except ReconstructionError as exc:
            raise ReconstructionError(f"layer {family}_{k}: {exc}") from exc
    log.info("square reconstruction finished in %.1f s", time.perf_counter() - t0)
    return state.report()


__all__ = [
    "STRATEGIES",
    "extract_edge_eigenvalues",
    "reconstruct_square",
    "recover_adjacent_edge",
    "recover_interior_edge_and_coupling",
    "strip_layer_A",
    "strip_layer_B",
]
