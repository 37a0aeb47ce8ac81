import math

import pytest

from ptglearn import pauli_core as pc
from ptglearn.casestudies import covariant_4local, cz_ring_fully_local, cz_single, nn_cz
from ptglearn.exp_design import (
    GATE, U1, ExperimentPlan, ExperimentSpec, Layer, RelativeUnavailable, compile_rooted_cycle,
    compile_walk, germ_family, plan_relative, plan_simple, search_depth,
)
from ptglearn.gate_cycles import reduced_cycle_basis_gates
from ptglearn.noise_model import ParamIndex, ParamVector, build_embedding
from ptglearn.simulator import exact_expectation
from ptglearn.noise_model import random_model


def P(s):
    return pc.parse_pauli(s)[0]


@pytest.fixture(scope="module")
def single():
    gs, ans = cz_single()
    return gs, build_embedding(gs, ans)


@pytest.fixture(scope="module")
def ring4():
    gs, ans = cz_ring_fully_local(4)
    return gs, build_embedding(gs, ans)


def test_spam_pair_compiles_to_empty_circuit(single):
    gs, _ = single
    spec = compile_rooted_cycle(gs, {ParamIndex("S", 0b10): 1, ParamIndex("M", 0b10): 1})
    assert spec.layers == [] and spec.meas == P("ZI") and spec.prep == P("ZZ") and spec.sign == 1


def test_cz_xx_maps_to_yy(single):
    gs, _ = single
    cyc = {ParamIndex("S", 3): 1, ParamIndex("G", P("XX"), "CZ"): 1, ParamIndex("M", 3): 1}
    spec = compile_rooted_cycle(gs, cyc)
    assert spec.layers == [Layer(GATE, "CZ")]
    assert spec.prep == P("XX") and spec.meas == P("YY") and spec.sign == 1
    assert spec.target == ParamVector(cyc)


def test_compile_walk_inserts_connectors(single):
    gs, _ = single
    layers, meas, sign = compile_walk(gs, [("CZ", P("XI")), ("CZ", P("XY"))], close=False)
    assert [l.kind for l in layers] == [GATE, U1, GATE]
    assert (sign, meas) == gs["CZ"].apply_int(P("XY"))
    layers, meas, sign = compile_walk(gs, [("CZ", P("XX"))], close=True)
    assert layers[-1].kind == U1 and (meas, sign) == (P("XX"), 1)


@pytest.mark.parametrize("cycle,msg", [
    ({ParamIndex("G", 2, "CZ"): 1}, "root"),
    ({ParamIndex("S", 1): 1, ParamIndex("M", 1): 1, ParamIndex("G", 1, "CZ"): -1}, "nonnegative"),
    ({ParamIndex("S", 1): 1, ParamIndex("M", 3): 1}, "flow"),
    ({ParamIndex("S", 1): 1, ParamIndex("M", 1): 1, ParamIndex("G", 2, "CZ"): 1}, "single walk"),
    ({ParamIndex("S", 1): 2, ParamIndex("M", 1): 2}, "exactly once"),
    ({ParamIndex("S", 1): 0.5, ParamIndex("M", 1): 0.5}, "integers"),
])
def test_compile_rejects_bad_cycles(single, cycle, msg):
    gs, _ = single
    with pytest.raises(ValueError, match=msg):
        compile_rooted_cycle(gs, cycle)


def _check_plan(Q, plan, dim):
    assert len(plan.elements) == dim
    assert all(s.gate_count() <= 1 for s in plan.experiments)
    model = random_model(Q, 1, 0.03)
    for spec, el in zip(plan.experiments, plan.elements):
        assert Q.pullback(spec.target) == el.vector
        e = exact_expectation(model, spec)
        assert -math.log(e * spec.sign) == pytest.approx(model.value(spec.target), abs=1e-12)


def test_simple_plan_sizes(single, ring4):
    _check_plan(single[1], plan_simple(single[1]), 18)
    _check_plan(ring4[1], plan_simple(ring4[1]), 64)
    gs, ans = nn_cz(6)
    Q = build_embedding(gs, ans)
    _check_plan(Q, plan_simple(Q), 162)


def test_simple_plan_covariant_uses_block_candidates():
    gs, ans = covariant_4local(6)
    Q = build_embedding(gs, ans)
    plan = plan_simple(Q, learnable_dim=1452)
    assert len(plan.elements) == len(plan.experiments) == 1452
    assert all(s.gate_count() <= 1 for s in plan.experiments)


def test_relative_plan_structure(ring4):
    gs, Q = ring4
    plan = plan_relative(Q, [0, 1, 4])
    ratio = [e for e in plan.elements if e.estimator == "ratio"]
    single = [e for e in plan.elements if e.estimator == "single"]
    assert len(ratio) == 14 * 4 and len(single) == 2 * 4
    for el in ratio:
        fam = [plan.experiments[i] for i in el.experiments]
        assert [s.m for s in fam] == [0, 1, 4]
        germ_len = sum(l.kind == GATE for l in fam[0].layers)
        assert sum(el.witness.values()) == germ_len
        for s in fam:
            assert s.gate_count() == s.m * germ_len
            assert s.sign == 1


def test_germ_targets_are_log_affine(ring4):
    gs, Q = ring4
    model = random_model(Q, 4, 0.02)
    for cyc in reduced_cycle_basis_gates(Q)[:20]:
        fam = germ_family(gs, cyc.witness, [0, 1, 3])
        vals = [-math.log(exact_expectation(model, s)) for s in fam]
        rate = model.value(cyc.witness)
        assert vals[1] - vals[0] == pytest.approx(rate, abs=1e-12)
        assert vals[2] - vals[0] == pytest.approx(3 * rate, abs=1e-12)


def test_relative_refusals(single, ring4):
    with pytest.raises(RelativeUnavailable):
        plan_relative(single[1])
    gs, ans = nn_cz(6)
    with pytest.raises(RelativeUnavailable):
        plan_relative(build_embedding(gs, ans))
    with pytest.raises(ValueError):
        plan_relative(ring4[1], [1, 2])


def test_per_family_depths(ring4):
    gs, Q = ring4
    k = len(reduced_cycle_basis_gates(Q))
    depths = {i: [0, 1 + i % 3] for i in range(k)}
    plan = plan_relative(Q, depths)
    ratio = [e for e in plan.elements if e.estimator == "ratio"]
    assert [plan.experiments[e.experiments[-1]].m for e in ratio] == [1 + i % 3 for i in range(k)]


def test_search_depth_examples():
    assert search_depth(1.0, lambda m: math.exp(-m / 4)) == (4, False)
    assert search_depth(0.6, lambda m: 0.5 ** m * 0.6) == (2, False)
    assert search_depth(0.9, lambda m: 0.3) == (1, False)
    with pytest.warns(RuntimeWarning):
        assert search_depth(1.0, lambda m: 1.0, cap=64) == (64, True)
    with pytest.raises(ValueError):
        search_depth(1.0, lambda m: 1.0, threshold=1.5)


def test_plan_json_round_trip(ring4):
    gs, Q = ring4
    plan = plan_relative(Q, [0, 2])
    back = ExperimentPlan.from_json(plan.dumps())
    assert back.dumps() == plan.dumps()
    assert back.experiments[5] == plan.experiments[5]
    spec = plan.experiments[3]
    assert ExperimentSpec.from_json(spec.to_json()) == spec
