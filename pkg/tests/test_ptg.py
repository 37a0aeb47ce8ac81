
import numpy as np
import pytest

from ptglearn import pauli_core as pc
from ptglearn.casestudies import cz_single
from ptglearn.noise_model import ParamIndex, ParamVector
from ptglearn.ptg import (
    ROOT, build_ptg, canonical_cut, cut_vector, flow_imbalance, is_flow_conserving,
    root_visits, rooted_cycle, rooted_cycle_basis, sdg, single_vertex_cuts, spanning_tree_cycles,
)
from ptglearn.linalg import rank_of, same_span
from conftest import random_gateset


def _rows(vecs, ptg):
    ids = {e.index: i for i, e in enumerate(ptg.edges())}
    return [{ids[k]: v for k, v in vec.items()} for vec in vecs]


def test_single_cz_graph_counts():
    gs, _ = cz_single()
    ptg = build_ptg(gs)
    assert ptg.num_vertices == 4
    assert ptg.num_edges == 3 + 3 + 15 == len(list(ptg.edges()))
    e = ptg.edge(ParamIndex("G", pc.parse_pauli("XI")[0], "CZ"))
    assert (e.src, e.tgt) == (0b10, 0b11)
    assert ptg.edge(ParamIndex("S", 1)) == (ParamIndex("S", 1), ROOT, 1)


@pytest.mark.parametrize("n,seed", [(2, 0), (2, 1), (3, 2), (3, 3)])
def test_canonical_cut_matches_generic_cut(n, seed):
    ptg = build_ptg(random_gateset(n, np.random.default_rng(seed)))
    for u in range(1, 1 << n):
        assert canonical_cut(ptg, u) == cut_vector(ptg, [u])
    assert single_vertex_cuts(ptg) == [canonical_cut(ptg, u) for u in range(1, 1 << n)]


@pytest.mark.parametrize("n,seed", [(2, 4), (3, 5)])
def test_sdg_is_negated_cut_of_overlapping_patterns(n, seed):
    ptg = build_ptg(random_gateset(n, np.random.default_rng(seed)))
    for s in range(1, 1 << n):
        neg = {k: -v for k, v in cut_vector(ptg, [u for u in range(1, 1 << n) if u & s]).items()}
        assert sdg(ptg, s) == ParamVector(neg)


@pytest.mark.parametrize("n,seed", [(2, 6), (3, 7)])
def test_gauge_and_cut_change_of_basis(n, seed):
    ptg = build_ptg(random_gateset(n, np.random.default_rng(seed)))
    cuts = {z: canonical_cut(ptg, z) for z in range(1, 1 << n)}
    gauges = {s: sdg(ptg, s) for s in range(1, 1 << n)}

    def comb(terms):
        acc = {}
        for c, v in terms:
            for k, x in v.items():
                acc[k] = acc.get(k, 0) + c * x
        return ParamVector(acc)

    for s in range(1, 1 << n):
        assert gauges[s] == comb((-1, cuts[z]) for z in cuts if z & s)
    full = (1 << n) - 1
    for z in range(1, 1 << n):
        zbar = full & ~z
        terms = [((-1) ** (pc.popcount(s) - pc.popcount(zbar)), gauges[s])
                 for s in range(1, 1 << n) if s & zbar == zbar]
        assert cuts[z] == comb(terms)


@pytest.mark.parametrize("n,seed", [(2, 8), (3, 9)])
def test_cycle_space_is_orthogonal_complement_of_cuts(n, seed):
    ptg = build_ptg(random_gateset(n, np.random.default_rng(seed)))
    rooted = rooted_cycle_basis(ptg)
    tree = spanning_tree_cycles(ptg)
    cuts = single_vertex_cuts(ptg)
    E, V = ptg.num_edges, ptg.num_vertices
    assert rank_of(_rows(rooted, ptg)) == len(rooted) == E - V + 1
    assert same_span(_rows(rooted, ptg), _rows(tree, ptg))
    assert rank_of(_rows(cuts, ptg)) == V - 1
    assert all(c.dot(z) == 0 for c in rooted for z in cuts)
    assert rank_of(_rows(rooted + cuts, ptg)) == E
    assert all(is_flow_conserving(ptg, c) for c in tree)


def test_flow_helpers():
    gs, _ = cz_single()
    ptg = build_ptg(gs)
    xi = pc.parse_pauli("XI")[0]
    cyc = rooted_cycle(ptg, ParamIndex("G", xi, "CZ"))
    assert is_flow_conserving(ptg, cyc) and root_visits(ptg, cyc) == 1
    broken = ParamVector({ParamIndex("S", 2): 1, ParamIndex("G", xi, "CZ"): 1})
    assert flow_imbalance(ptg, broken) == {0: 1, 3: -1}
    with pytest.raises(ValueError):
        sdg(ptg, 0)


def test_gate_only_cycles_stay_off_root():
    gs, _ = cz_single()
    ptg = build_ptg(gs)
    for c in spanning_tree_cycles(ptg, gates_only=True):
        assert all(k.kind == "G" for k in c) and is_flow_conserving(ptg, c)


def test_dot_output():
    gs, _ = cz_single()
    dot = build_ptg(gs).to_dot()
    assert dot.startswith("digraph ptg {") and dot.rstrip().endswith("}")
    assert "root" in dot and "->" in dot
    assert dot.count(" -> ") == len({(e.src, e.tgt) for e in build_ptg(gs).edges()})
