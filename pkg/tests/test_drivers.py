import pytest

from qgraph import drivers as drv
from qgraph.lattice import DomainError, build_hex_parallelogram, build_square_domain, line_level


def closure(dom, drivers):
    """Apply every applicable rule symbolically until nothing changes."""
    edges = set(dom.boundary_adjacent_edges())
    couplings = set()
    changed = True
    while changed:
        changed = False
        for d in drivers:
            zero = drv.zero_set(dom, d)
            _, comp = drv.march_program(dom, drv.driven_seeds(dom), zero, edges, couplings)
            for rule in drv.applicable_rules(dom, zero, comp, edges, couplings):
                for kind, item in drv.rule_items(rule):
                    target = edges if kind == "edge" else couplings
                    if item not in target:
                        target.add(item)
                        changed = True
    return edges, couplings


DOMAINS = [(2, 2), (3, 4), (5, 4), (6, 6), ("hex", 1), ("hex", 2), ("hex", 3)]


def make(shape):
    return build_hex_parallelogram(shape[1]) if shape[0] == "hex" else build_square_domain(*shape)


@pytest.mark.parametrize("shape", DOMAINS)
def test_pool_covers_everything(shape):
    dom = make(shape)
    edges, couplings = closure(dom, drv.driver_pool(dom))
    assert edges == set(range(len(dom.edges)))
    assert couplings == set(dom.interior)


@pytest.mark.parametrize("shape", DOMAINS)
def test_line_family_covers_everything(shape):
    dom = make(shape)
    family = []
    for group in drv.schedule(dom):
        family += [d for d in group if d not in family]
    edges, couplings = closure(dom, family)
    assert edges == set(range(len(dom.edges)))
    assert couplings == set(dom.interior)


@pytest.mark.parametrize("shape", [(4, 4), (5, 3), ("hex", 2), ("hex", 3)])
def test_top_driver_vanishes_below_its_line(shape):
    dom = make(shape)
    ks = range(1, dom.size[0]) if dom.kind == "square" else range(dom.size[0] + 1)
    for k in ks:
        d = drv.line_drivers(dom, "A", k)[0]
        zero = drv.zero_set(dom, d)
        lev = line_level(dom, "A", k)
        assert {v.index for v in dom.vertices if dom.level(v.index) < lev} <= zero
        assert d.vertex not in zero


def test_driver_placement_checked():
    dom = build_square_domain(3, 3)
    with pytest.raises(DomainError):
        drv.zero_set(dom, drv.Driver("dirichlet", dom.sides["R"][0]))
    with pytest.raises(DomainError):
        drv.zero_set(dom, drv.Driver("neumann", dom.sides["T"][0]))
    with pytest.raises(ValueError):
        drv.Driver("robin", 0)


def test_line_driver_ranges():
    dom = build_square_domain(4, 3)
    with pytest.raises(DomainError):
        drv.line_drivers(dom, "A", 0)
    with pytest.raises(DomainError):
        drv.line_drivers(dom, "B", 1)
    assert [d.kind for d in drv.line_drivers(dom, "B", 3)] == ["neumann", "dirichlet"]
    assert drv.line_drivers(dom, "A", 2) == [drv.Driver("dirichlet", dom.vertex((2, 4)))]
    assert [len(g) for g in drv.schedule(dom)] == [1, 1, 1, 2, 2, 2]


@pytest.mark.parametrize("shape", [(3, 3), (5, 2), ("hex", 2)])
def test_full_knowledge_marches_everywhere(shape):
    dom = make(shape)
    all_e, all_c = set(range(len(dom.edges))), set(dom.interior)
    steps, reached = drv.march_program(dom, drv.cauchy_seeds(dom), frozenset(), all_e, all_c)
    assert reached == frozenset(range(dom.n_vertices))
    assert len({s.target for s in steps}) == len(steps)
    for d in drv.driver_pool(dom):
        zero = drv.zero_set(dom, d)
        _, reached = drv.march_program(dom, drv.driven_seeds(dom), zero, all_e, all_c)
        assert reached == frozenset(range(dom.n_vertices))


def test_march_depth_prefers_short_chains():
    dom = build_square_domain(4, 4)
    all_e, all_c = set(range(len(dom.edges))), set(dom.interior)
    seeds = drv.driven_seeds(dom)
    steps, reached = drv.march_program(dom, seeds, frozenset(), all_e, all_c)
    depth = drv.march_depths(dom, steps, reached)
    # every left trace is exact; other traces carry the D-N cost at most
    for b in dom.sides["L"]:
        assert depth[dom.trace_vertex(b)] == 0
    assert max(depth.values()) < dom.size[0] + dom.size[1]


def test_rule_items():
    assert drv.rule_items(drv.Rule("edge", 1, 7, 2)) == [("edge", 7)]
    assert drv.rule_items(drv.Rule("edge+coupling", 1, 7, 2)) == [("edge", 7), ("coupling", 1)]
    assert drv.rule_items(drv.Rule("coupling", 1, None, None)) == [("coupling", 1)]
