"""Layer stripping on the hexagonal parallelogram.

The solution driven by a unit value at the top vertex ``alpha_k`` vanishes
below the level line ``A_k``; the one driven from the ``l``-th bottom vertex
vanishes left of the column ``B_l``.  Along ``A_k`` the driven values are a
product of ratios, one per two-edge step, and those ratios involve no
coupling constants.

The reconstruction first runs the initial procedure on the top A strip and
the rightmost B strip, then pushes the B column to the left one strip at a
time with local steps, and finally closes the thin region left of ``B_0``.
Each local step is one rule of :mod:`qgraph.stripping`.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from . import drivers as drv
from .lattice import DomainError, LatticeDomain, diagonal_line, line_level, line_range
from .stripping import (
    ReconstructionError,
    ReconstructionReport,
    ReconstructionState,
    ScanConfig,
    apply_rule,
    best_rule,
    boundary_prior,
    exhaust,
)
from .vertex_op import DtnOracle, EdgeField, VertexSolution

log = logging.getLogger(__name__)

RATIO_GUARD = 1e-12
STRATEGIES = ("pooled", "lines")


def _require_hex(domain: LatticeDomain):
    if domain.kind != "hex":
        raise DomainError("this operation needs a hexagonal domain")


def column(domain: LatticeDomain, v: int) -> int:
    """Twice the horizontal coordinate of ``v``: ``3 n1 + 1`` or ``3 n1 + 2``."""
    n1, _, s = domain.label(v)
    return 3 * n1 + s


def b_column(domain: LatticeDomain, l: int) -> int:
    return 3 * l + 2


# ---------------------------------------------------------------------------
# frontier


@dataclass(frozen=True)
class HexFrontier:
    """Largest fully known halfplanes: level ``>= a_k`` and column ``>= b_l``.

    ``a`` and ``b`` are line indices or ``None`` when not even the first
    strip is known.
    """

    domain: LatticeDomain
    a: int | None
    b: int | None

    @staticmethod
    def a_items(domain, k):
        lev = line_level(domain, "A", k)
        edges = [i for i, e in enumerate(domain.edges) if max(domain.level(e.tail), domain.level(e.head)) >= lev]
        verts = [v for v in domain.interior if domain.level(v) >= lev]
        return edges, verts

    @staticmethod
    def b_items(domain, l):
        col = b_column(domain, l)
        edges = [i for i, e in enumerate(domain.edges) if max(column(domain, e.tail), column(domain, e.head)) >= col]
        verts = [v for v in domain.interior if column(domain, v) >= col]
        return edges, verts

    @classmethod
    def of(cls, state: ReconstructionState) -> "HexFrontier":
        dom = state.domain
        _require_hex(dom)

        def known(items):
            edges, verts = items
            return all(e in state.edges for e in edges) and all(v in state.couplings for v in verts)

        ks = [k for k in line_range(dom, "A") if known(cls.a_items(dom, k))]
        ls = [l for l in line_range(dom, "B") if known(cls.b_items(dom, l))]
        return cls(dom, min(ks) if ks else None, min(ls) if ls else None)

    def contains_vertex(self, v: int) -> bool:
        dom = self.domain
        up = self.a is not None and dom.level(v) >= line_level(dom, "A", self.a)
        right = self.b is not None and column(dom, v) >= b_column(dom, self.b)
        return up or right


# ---------------------------------------------------------------------------
# line solutions and ratio chains


def line_driver(domain: LatticeDomain, k: int) -> drv.Driver:
    return drv.line_drivers(domain, "A", k)[0]


def compute_line_solution(state: ReconstructionState, k: int, lam: float) -> VertexSolution:
    """Solution driven from ``alpha_k``, wherever the known data determine it.

    Values below ``A_k`` are exactly zero; undetermined values are NaN.
    """
    _require_hex(state.domain)
    values = state.values(line_driver(state.domain, k), float(lam)).copy()
    return VertexSolution(float(lam), values)


@dataclass(frozen=True)
class RatioChain:
    """Ratios ``f_l = u(alpha_{k,l}) / u(alpha_{k,l-1})`` along a line.

    A ratio is NaN where the denominator fails the guard.
    """

    lam: float
    values: tuple[float, ...]
    ratios: tuple[float, ...]

    def products(self) -> np.ndarray:
        """Partial products ``f_1 ... f_l``, which should reproduce ``u(alpha_{k,l})``."""
        return np.cumprod(np.asarray(self.ratios, dtype=float))

    def identity_error(self) -> float:
        """Largest relative mismatch between the partial products and the values."""
        if not self.ratios:
            return 0.0
        u = np.asarray(self.values[1:], dtype=float) / self.values[0]
        p = self.products()
        ok = np.isfinite(p)
        if not ok.any():
            return 0.0
        return float(np.max(np.abs(p[ok] - u[ok]) / np.maximum(np.abs(u[ok]), 1e-300)))


def chain_ratios(line_values, lam: float) -> RatioChain:
    """Ratio chain from driven values along ``A_k``, first entry at ``alpha_k``."""
    u = np.asarray(line_values, dtype=float)
    if u.size == 0:
        raise ValueError("a line has at least its top vertex")
    scale = float(np.max(np.abs(u)))
    ratios = []
    for prev, cur in zip(u[:-1], u[1:]):
        ratios.append(cur / prev if abs(prev) > RATIO_GUARD * scale else float("nan"))
    return RatioChain(float(lam), tuple(float(x) for x in u), tuple(ratios))


def line_chain(state: ReconstructionState, k: int, lam: float) -> RatioChain:
    sol = compute_line_solution(state, k, lam)
    line = diagonal_line(state.domain, "A", k)
    return chain_ratios([sol.values[v] for v in line.vertices], lam)


# ---------------------------------------------------------------------------
# steps


def recover_below_line_pair(state: ReconstructionState, k: int) -> list[str]:
    """Next edge below ``A_k`` from the chain, then the edge and coupling after it.

    Uses only the solution driven from ``alpha_k``.  Returns what was
    recovered (possibly nothing when that solution has no rule left).
    """
    _require_hex(state.domain)
    driver = line_driver(state.domain, k)
    got = []
    for kind in ("edge", "edge+coupling"):
        pick = best_rule(state, [driver], lambda r, kind=kind: r.kind == kind)
        if pick is not None:
            got += apply_rule(state, *pick)
    return got


def local_step(state: ReconstructionState, driver: drv.Driver, rule: drv.Rule) -> list[str]:
    """One recovery at a vertex whose unknown edge leads to a vanishing neighbour."""
    zero = state.plan(driver)[0]
    if rule not in state.rules(driver):
        raise ReconstructionError(f"rule at {state.domain.label(rule.center)} is not applicable for {driver.tag(state.domain)}")
    if rule.kind == "edge+coupling" and rule.neighbor not in zero:
        raise ReconstructionError("the far end of the unknown edge must vanish")
    return apply_rule(state, driver, rule)


def _drivers(domain: LatticeDomain, strategy: str, lines: list[drv.Driver]) -> list[drv.Driver]:
    if strategy == "pooled":
        return drv.driver_pool(domain)
    if strategy == "lines":
        return lines
    raise ValueError(f"unknown strategy {strategy!r}")


def _line_family(domain: LatticeDomain) -> list[drv.Driver]:
    out = []
    for group in drv.schedule(domain):
        out += [d for d in group if d not in out]
    return out


def _allow_in(domain: LatticeDomain, edges, verts):
    edges, verts = set(edges), set(verts)

    def allow(rule: drv.Rule) -> bool:
        return all((item in edges) if kind == "edge" else (item in verts) for kind, item in drv.rule_items(rule))

    return allow


def _close(state: ReconstructionState, drivers, edges, verts, where: str) -> int:
    count = exhaust(state, drivers, _allow_in(state.domain, edges, verts))
    missing = [e for e in edges if e not in state.edges] + [v for v in verts if v not in state.couplings]
    if missing:
        raise ReconstructionError(f"{where}: {len(missing)} items left unknown")
    return count


def initial_procedure(state: ReconstructionState, k: int, l: int, strategy: str = "pooled") -> ReconstructionState:
    """Everything on or above ``A_k`` and everything right of ``B_l``.

    With the ``"lines"`` strategy the solutions driven from ``alpha_k`` and
    from the ``l``-th bottom vertex come first; the rest of the line family
    fills in what those two cannot reach on their own.
    """
    dom = state.domain
    _require_hex(dom)
    first = [line_driver(dom, k), drv.line_drivers(dom, "B", l)[0]]
    drivers = _drivers(dom, strategy, first + [d for d in _line_family(dom) if d not in first])
    ea, va = HexFrontier.a_items(dom, k)
    eb, vb = HexFrontier.b_items(dom, l)
    state.frontier = f"A_{k}|B_{l}"
    _close(state, drivers, set(ea) | set(eb), set(va) | set(vb), f"initial procedure A_{k}, B_{l}")
    return state


def reconstruct_hex(
    oracle: DtnOracle,
    domain: LatticeDomain,
    prior: EdgeField | dict,
    config: ScanConfig | None = None,
    *,
    strategy: str = "pooled",
) -> ReconstructionReport:
    """All edge potentials and couplings of a hex parallelogram from its D-N map."""
    _require_hex(domain)
    config = config or ScanConfig()
    known = boundary_prior(domain, prior) if isinstance(prior, EdgeField) else dict(prior)
    known = {e: p.padded(config.J) for e, p in known.items()}
    state = ReconstructionState(oracle, known, config)
    (N,) = domain.size
    t0 = time.perf_counter()
    initial_procedure(state, N, N, strategy)
    drivers = _drivers(domain, strategy, _line_family(domain))
    for l in range(N - 1, -1, -1):
        state.frontier = f"A_{N}|B_{l}"
        eb, vb = HexFrontier.b_items(domain, l)
        _close(state, drivers, eb, vb, f"strip B_{l}")
    state.frontier = "all"
    _close(state, drivers, range(len(domain.edges)), domain.interior, "left fringe")
    log.info("hex reconstruction finished in %.1f s", time.perf_counter() - t0)
    return state.report()


__all__ = [
    "HexFrontier",
    "RatioChain",
    "STRATEGIES",
    "b_column",
    "chain_ratios",
    "column",
    "compute_line_solution",
    "initial_procedure",
    "line_chain",
    "local_step",
    "reconstruct_hex",
    "recover_below_line_pair",
]
