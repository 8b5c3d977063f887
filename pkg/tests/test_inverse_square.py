import math

import numpy as np
import pytest

from qgraph import drivers as drv
from qgraph.inverse_square import (
    extract_edge_eigenvalues,
    reconstruct_square,
    recover_adjacent_edge,
    recover_interior_edge_and_coupling,
    strip_layer_A,
    strip_layer_B,
)
from qgraph.lattice import DomainError, build_hex_parallelogram, build_square_domain
from qgraph.stripping import ReconstructionError, ReconstructionState, ScanConfig, boundary_prior, edge_probe
from qgraph.sturm import SymmetricPotential
from qgraph.vertex_op import CouplingField, DtnOracle, EdgeField, dtn

PI2 = math.pi**2
J = 2
V0 = SymmetricPotential.constant(0.0, J)


def interior_edge(dom, a, b):
    return dom.edge_between(dom.vertex(a), dom.vertex(b))


def state_knowing_all_but(dom, edges, couplings, skip_edges=(), skip_couplings=()):
    oracle = DtnOracle.live(dom, edges, couplings)
    known = {e: edges[e].padded(J) for e in range(len(dom.edges)) if e not in skip_edges}
    state = ReconstructionState(oracle, known, ScanConfig(J=J))
    for v in dom.interior:
        if v not in skip_couplings:
            state.couplings[v] = couplings[v]
    return state


def pick(state, kind, edge=None, center=None):
    for d in drv.driver_pool(state.domain):
        for r in state.rules(d):
            if r.kind == kind and (edge is None or r.edge == edge) and (center is None or r.center == center):
                return d, r
    raise AssertionError(f"no {kind} rule")


def test_extract_shifted_edge_in_free_lattice():
    dom = build_square_domain(4, 4)
    e = interior_edge(dom, (2, 2), (3, 2))
    edges = EdgeField(V0, {e: SymmetricPotential.constant(2.0, J)})
    state = state_knowing_all_but(dom, edges, CouplingField(), skip_edges=[e])
    driver, rule = pick(state, "edge", edge=e)
    ev = extract_edge_eigenvalues(state, edge_probe(state, driver, rule), 3)
    assert ev.as_array() == pytest.approx([PI2 + 2, 4 * PI2 + 2, 9 * PI2 + 2], abs=1e-6)


def test_recover_adjacent_edge_perturbed():
    dom = build_square_domain(4, 4)
    e = interior_edge(dom, (3, 3), (3, 2))
    truth = SymmetricPotential((0.8, -0.4, 0.0))
    edges = EdgeField(V0, {e: truth})
    state = state_knowing_all_but(dom, edges, CouplingField(), skip_edges=[e])
    pot = recover_adjacent_edge(state, *pick(state, "edge", edge=e))
    assert pot.coefficients == pytest.approx(truth.coefficients, abs=1e-4)


def test_recover_edge_and_coupling():
    dom = build_square_domain(4, 4)
    x = dom.vertex((2, 3))
    couplings = CouplingField(0.0, {x: 1.3})
    # any edge at x whose far end can vanish for some driver
    for _, e in dom.adjacency[x]:
        state = state_knowing_all_but(dom, EdgeField(V0), couplings, skip_edges=[e], skip_couplings=[x])
        try:
            d, r = pick(state, "edge+coupling", edge=e, center=x)
        except AssertionError:
            continue
        pot, c = recover_interior_edge_and_coupling(state, d, r)
        assert pot.coefficients == pytest.approx(V0.coefficients, abs=1e-6)
        assert c == pytest.approx(1.3, abs=1e-6)
        break
    else:
        pytest.fail("no edge+coupling rule at the vertex")


def test_step_functions_check_rules():
    dom = build_square_domain(3, 3)
    state = state_knowing_all_but(dom, EdgeField(V0), CouplingField(), skip_edges=[interior_edge(dom, (2, 2), (2, 1))])
    d, r = pick(state, "edge")
    with pytest.raises(ValueError):
        recover_interior_edge_and_coupling(state, d, r)
    bogus = drv.Rule("edge", r.center, r.edge, r.neighbor)
    other = next(x for x in drv.driver_pool(dom) if bogus not in state.rules(x))
    with pytest.raises(ReconstructionError):
        recover_adjacent_edge(state, other, bogus)


def fresh_state(dom, edges, couplings):
    oracle = DtnOracle.live(dom, edges, couplings)
    return ReconstructionState(oracle, {e: p.padded(J) for e, p in boundary_prior(dom, edges).items()}, ScanConfig(J=J))


def test_layers_unperturbed_and_monotone():
    dom = build_square_domain(3, 3)
    state = fresh_state(dom, EdgeField(V0), CouplingField())
    m, n = dom.size
    sizes = [len(state.edges)]
    for k in range(m - 1, 0, -1):
        strip_layer_A(state, k)
        sizes.append(len(state.edges))
    for l in range(n + 1, 1, -1):
        strip_layer_B(state, l)
        sizes.append(len(state.edges))
    # the last strip, B_2 to B_1, holds only boundary-adjacent edges
    assert all(b > a for a, b in zip(sizes[:-1], sizes[1:-1]))
    assert sizes[-1] == sizes[-2]
    assert {e for e in range(len(dom.edges)) if max(dom.level(dom.edges[e].tail), dom.level(dom.edges[e].head)) <= 2} \
        <= dom.boundary_adjacent_edges()
    assert state.complete()
    assert max(np.max(np.abs(p.coefficients)) for p in state.edges.values()) < 1e-6
    assert max(abs(c) for c in state.couplings.values()) < 1e-6


def test_top_layer_isolates_its_perturbed_edge():
    dom = build_square_domain(4, 4)
    e = interior_edge(dom, (3, 4), (4, 4))
    truth = SymmetricPotential((0.5, 0.3, -0.2))
    state = fresh_state(dom, EdgeField(V0, {e: truth}), CouplingField())
    before = set(state.edges)
    strip_layer_A(state, 3)
    new = set(state.edges) - before
    assert e in new
    for f in new:
        expect = truth if f == e else V0
        assert state.edges[f].coefficients == pytest.approx(expect.coefficients, abs=1e-4)


def test_layer_ranges():
    dom = build_square_domain(3, 3)
    state = fresh_state(dom, EdgeField(V0), CouplingField())
    with pytest.raises(DomainError):
        strip_layer_A(state, 3)
    with pytest.raises(DomainError):
        strip_layer_B(state, 1)
    with pytest.raises(ValueError):
        strip_layer_A(state, 2, strategy="greedy")


def test_reconstruct_small_perturbed():
    dom = build_square_domain(3, 3)
    e = interior_edge(dom, (2, 2), (2, 1))
    f = interior_edge(dom, (1, 2), (2, 2))
    truth = {e: SymmetricPotential((0.4, -0.5, 0.3)), f: SymmetricPotential((-0.3, 0.2, 0.6))}
    edges = EdgeField(V0, truth)
    couplings = CouplingField(0.0, {dom.vertex((2, 2)): 1.1, dom.vertex((1, 1)): -0.6})
    rep = reconstruct_square(DtnOracle.live(dom, edges, couplings), dom, edges, ScanConfig(J=J))
    assert set(rep.edge_records) | set(boundary_prior(dom, edges)) == set(range(len(dom.edges)))
    for i in range(len(dom.edges)):
        assert rep.edges[i].coefficients == pytest.approx(edges[i].coefficients, abs=1e-4)
    for v in dom.interior:
        assert rep.couplings[v] == pytest.approx(couplings[v], abs=1e-6)
    # the recovered fields reproduce the D-N map
    for lam in (1.3, 27.0):
        assert dtn(dom, rep.edges, rep.couplings, lam) == pytest.approx(dtn(dom, edges, couplings, lam), abs=1e-7)
    assert not rep.flags


def test_lines_strategy_small():
    dom = build_square_domain(2, 2)
    couplings = CouplingField(0.0, {dom.vertex((1, 1)): 0.7})
    rep = reconstruct_square(DtnOracle.live(dom, EdgeField(V0), couplings), dom, EdgeField(V0), ScanConfig(J=J),
                             strategy="lines")
    for v in dom.interior:
        assert rep.couplings[v] == pytest.approx(couplings[v], abs=1e-6)


def test_reconstruct_rejects_hex_and_missing_prior():
    hexd = build_hex_parallelogram(1)
    with pytest.raises(DomainError):
        reconstruct_square(DtnOracle.live(hexd, EdgeField(V0), CouplingField()), hexd, EdgeField(V0))
    dom = build_square_domain(2, 2)
    with pytest.raises(ReconstructionError):
        reconstruct_square(DtnOracle.live(dom, EdgeField(V0), CouplingField()), dom, {})
