"""Pooled driver search against the per-line schedule on small domains.

Both strategies recover the same fields; they differ in which driven
solutions they use, so the number of D-N energies and the run time differ.

    python scripts/strategy_comparison.py
"""
import time

import numpy as np

from qgraph import (
    CouplingField,
    DtnOracle,
    EdgeField,
    ScanConfig,
    SymmetricPotential,
    build_hex_parallelogram,
    build_square_domain,
    reconstruct_hex,
    reconstruct_square,
)


def perturbed(dom, rng):
    inner = sorted(set(range(len(dom.edges))) - dom.boundary_adjacent_edges())
    picks = rng.choice(inner, size=min(2, len(inner)), replace=False)
    overrides = {}
    for e in picks:
        c = rng.uniform(-1, 1, 3)
        overrides[int(e)] = SymmetricPotential(tuple(0.8 * c / np.linalg.norm(c)))
    v = int(rng.choice(dom.interior))
    return EdgeField(SymmetricPotential.constant(0.0, 2), overrides), CouplingField(0.0, {v: 1.2})


def errors(rep, dom, edges, couplings):
    pe = max(float(np.max(np.abs(np.subtract(rep.edges[e].padded(2).coefficients, edges[e].padded(2).coefficients))))
             for e in range(len(dom.edges)))
    ce = max(abs(rep.couplings[v] - couplings[v]) for v in dom.interior)
    return pe, ce


def main():
    rng = np.random.default_rng(3)
    cases = [("square 2x2", build_square_domain(2, 2), reconstruct_square),
             ("square 3x3", build_square_domain(3, 3), reconstruct_square),
             ("hex N=1", build_hex_parallelogram(1), reconstruct_hex)]
    print(f"{'domain':12} {'strategy':8} {'potential':>10} {'coupling':>10} {'energies':>9} {'secs':>6}")
    for name, dom, solve in cases:
        edges, couplings = perturbed(dom, rng)
        for strategy in ("pooled", "lines"):
            oracle = DtnOracle.live(dom, edges, couplings)
            t0 = time.perf_counter()
            rep = solve(oracle, dom, edges, ScanConfig(J=2), strategy=strategy)
            pe, ce = errors(rep, dom, edges, couplings)
            print(f"{name:12} {strategy:8} {pe:10.1e} {ce:10.1e} {len(oracle.requests):9d} "
                  f"{time.perf_counter() - t0:6.1f}")


if __name__ == "__main__":
    main()
