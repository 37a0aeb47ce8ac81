"""Acceptance suite: one check per numbered criterion, each reported as a PASS/FAIL line.

Run under pytest (the lines appear in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""

import math
import sys
import time
import warnings
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from conftest import random_gateset  # noqa: E402
from ptglearn import noise_model as nm  # noqa: E402
from ptglearn import pauli_core as pc  # noqa: E402
from ptglearn.casestudies import CASES, cz_ring_fully_local, cz_single, ring_reduced_cycles  # noqa: E402
from ptglearn.clifford import GateSet, apply_connector, builtin_local, tensor_parallel  # noqa: E402
from ptglearn.estimator import assemble, estimate_cycle  # noqa: E402
from ptglearn.exp_design import (  # noqa: E402
    ExperimentSpec, Layer, germ_family, plan_simple, search_depth,
)
from ptglearn.gate_cycles import reduced_cycle_basis_gates  # noqa: E402
from ptglearn.learnability import (  # noqa: E402
    analytic_gauge_basis, brute_force_spaces, gate_learnable_space, nn_cz_layers, reduced_spaces,
)
from ptglearn.linalg import rank_of, same_span  # noqa: E402
from ptglearn.noise_model import AnsatzSpec, FactorSet, build_embedding, random_model  # noqa: E402
from ptglearn.ptg import (  # noqa: E402
    build_ptg, canonical_cut, rooted_cycle_basis, sdg, single_vertex_cuts, spanning_tree_cycles,
)
from ptglearn.simulator import (  # noqa: E402
    SimResult, Simulator, dense_expectation, derived_seed, gauge_transform, simulate_plan,
)

RESULTS: dict[int, str] = {}
PROPERTY = settings(max_examples=1000, deadline=None, derandomize=True,
                    suppress_health_check=list(HealthCheck))


def report(k: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[k] = line
    print(line)
    assert ok, line


def _rows(vecs, edges):
    ids = {e.index: i for i, e in enumerate(edges)}
    return [{ids[k]: v for k, v in v_.items()} for v_ in vecs]


def _comb(terms):
    acc = {}
    for c, v in terms:
        for k, x in v.items():
            acc[k] = acc.get(k, 0) + c * x
    return nm.ParamVector(acc)


# ---------------------------------------------------------------------------


def test_criterion_1_dimension_table():
    rows = [("cz-single", None), ("cz-ring-fully-local", 4), ("cz-ring-fully-local", 6),
            ("nn-cz", 6), ("covariant-4local", 6)]
    ok, parts = True, []
    for name, n in rows:
        case = CASES[name]
        gs, ans = case.make(n)
        t0 = time.perf_counter()
        rep = reduced_spaces(build_embedding(gs, ans))
        dt = time.perf_counter() - t0
        want = case.expected(gs.n)
        good = all(want[k] is None or rep.dims[k] == want[k] for k in want)
        ok &= good
        parts.append(f"{name}(n={gs.n}): {rep.row()} [{dt:.1f}s]")
    report(1, ok, "; ".join(parts))


def test_criterion_2_structural_identities():
    ok, notes = True, []
    for n, seed in [(2, 100), (2, 101), (3, 102), (3, 103), (3, 104)]:
        gs = random_gateset(n, np.random.default_rng(seed))
        rep = reduced_spaces(build_embedding(gs, AnsatzSpec.complete()), gate_route="none")
        ptg = build_ptg(gs)
        edges = list(ptg.edges())
        B = rooted_cycle_basis(ptg)
        want_B = 2 ** n - 1 + len(gs) * (4 ** n - 1)
        Z, U = _rows(spanning_tree_cycles(ptg), edges), _rows(single_vertex_cuts(ptg), edges)
        good = (rep.dims["T_R"] == 2 ** n - 1 and len(B) == want_B
                and rank_of(_rows(B, edges)) == want_B and same_span(_rows(B, edges), Z)
                and all(sum(z.get(k, 0) * u.get(k, 0) for k in z) == 0 for z in Z for u in U)
                and rank_of(Z) + rank_of(U) == len(edges) == rank_of(Z + U))
        ok &= good
        notes.append(f"n={n}:|B|={len(B)}")
    report(2, ok, "dim T=2^n-1, |B| formula, cycle/cut orthogonal complements on 5 gate sets (" + ", ".join(notes) + ")")


def test_criterion_3_gauge_basis_and_expansions():
    ok, checked = True, 0
    for n, seed in [(2, 110), (3, 111), (3, 112)]:
        gs = random_gateset(n, np.random.default_rng(seed))
        ptg = build_ptg(gs)
        edges = list(ptg.edges())
        gauges = {s: sdg(ptg, s) for s in range(1, 1 << n)}
        cuts = {z: canonical_cut(ptg, z) for z in range(1, 1 << n)}
        ok &= same_span(_rows(gauges.values(), edges), _rows(single_vertex_cuts(ptg), edges))
        full = (1 << n) - 1
        for s in gauges:
            ok &= gauges[s] == _comb((-1, cuts[z]) for z in cuts if z & s)
            checked += 1
        for z in cuts:
            zbar = full & ~z
            ok &= cuts[z] == _comb(((-1) ** (pc.popcount(s) - pc.popcount(zbar)), gauges[s])
                                   for s in gauges if s & zbar == zbar)
            checked += 1
    report(3, ok, f"depolarizing gauges span the cut space; {checked} expansion identities exact (n<=3)")


def _cz_chain(n):
    cz = builtin_local("CZ")
    return GateSet(n, [tensor_parallel([(cz, [j, j + 1])], n, f"G{j}") for j in range(1, n)])


def test_criterion_4_analytic_vs_brute():
    ok, parts = True, []
    configs = [("fully-local chain n=3", _cz_chain(3), AnsatzSpec.fully_local()),
               ("fully-local chain n=4", _cz_chain(4), AnsatzSpec.fully_local()),
               ("covariant-4local n=6", *CASES["covariant-4local"].make(6)),
               ("nn-cz n=6", *CASES["nn-cz"].make(6))]
    for label, gs, ans in configs:
        Q = build_embedding(gs, ans)
        _, T = brute_force_spaces(Q)
        A = analytic_gauge_basis(Q, verify=True)
        good = A.same_span(T)
        ok &= good
        parts.append(f"{label}: {len(A)}={len(T)}")
    ge, go = nn_cz_layers(6)
    ring = FactorSet.from_maximal(6, [[j, j % 6 + 1] for j in range(1, 7)])
    _, cov = CASES["covariant-4local"].make(6)
    nn_cov = nm.is_covariant(ring, ge) or nm.is_covariant_exhaustive(ring, ge)
    four_cov = all(nm.is_covariant(cov.omega_gate[k], g) and nm.is_covariant_exhaustive(cov.omega_gate[k], g)
                   for k, g in (("Ge", ge), ("Go", go)))
    ok &= (not nn_cov) and four_cov
    parts.append(f"2-local covariant={nn_cov}, 4-local covariant={four_cov}")
    report(4, ok, "; ".join(parts))


def test_criterion_5_exact_learning_and_gauge_invariance():
    ok, parts = True, []
    for name in ["cz-single", "cz-ring-fully-local", "nn-cz", "covariant-4local"]:
        t0 = time.perf_counter()
        gs, ans = CASES[name].make()
        Q = build_embedding(gs, ans)
        rep = reduced_spaces(Q, gate_route="none")
        plan = plan_simple(Q, rep.dims["L_R"])
        model = random_model(Q, 5, 0.01)
        base = assemble(plan, simulate_plan(model, plan, 0))
        truth = [model.reduced_value(el.vector) for el in plan.elements]
        err = max(abs(e.value - t) for e, t in zip(base, truth))
        shift = 0.0
        for d in rep.gauge.vectors:
            moved = gauge_transform(model, d, 0.1)
            est = assemble(plan, simulate_plan(moved, plan, 0))
            shift = max(shift, max(abs(a.value - b.value) for a, b in zip(est, base)))
        dt = time.perf_counter() - t0
        good = len(plan.elements) == rep.dims["L_R"] and err <= 1e-9 and shift <= 1e-9 and dt < 60
        ok &= good
        parts.append(f"{name}: err={err:.1e} gauge-shift={shift:.1e} [{dt:.1f}s]")
    report(5, ok, "; ".join(parts))


def _regime_errors(Q, scale, shots, trials, seed):
    model = random_model(Q, 1, scale)
    sim = Simulator(model)
    cycles = reduced_cycle_basis_gates(Q)
    rng = np.random.default_rng(seed)
    errs, ms, infid = [], [], []
    for i, cyc in enumerate(cycles):
        pilot0 = sim.sample(germ_family(Q.gateset, cyc.witness, [0])[0], shots, derived_seed(seed, 2 * i))
        counter = iter(range(1, 10 ** 6))

        def probe(m, w=cyc.witness):
            spec = germ_family(Q.gateset, w, [m])[0]
            return sim.sample(spec, shots, derived_seed(seed, 10 ** 6 * (i + 1) + next(counter))).mean

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            m = search_depth(pilot0.mean, probe, cap=4096).m
        ms.append(m)
        lam = math.exp(-model.value(cyc.witness))
        infid.append(1 - lam ** (1 / sum(cyc.witness.values())))
        e0, em = (sim.exact_expectation(s) for s in germ_family(Q.gateset, cyc.witness, [0, m]))
        k0 = rng.binomial(shots, (1 + e0) / 2, size=trials)
        km = rng.binomial(shots, (1 + em) / 2, size=trials)
        for a, b in zip(k0, km):
            r0 = SimResult(0, e0, shots, (2 * a - shots) / shots, None)
            rm = SimResult(1, em, shots, (2 * b - shots) / shots, None)
            est = estimate_cycle(r0, rm, m)
            errs.append(abs(est.lambda_hat - lam))
    return float(np.median(errs)), float(np.median(infid)), int(np.median(ms))


def test_criterion_6_relative_precision():
    gs, ans = cz_ring_fully_local(4)
    Q = build_embedding(gs, ans)
    shots, trials = 100_000, 100
    hi, inf_hi, m_hi = _regime_errors(Q, 2.5e-3, shots, trials, 61)
    lo, inf_lo, m_lo = _regime_errors(Q, 2.5e-4, shots, trials, 62)
    ratio = hi / lo
    model = random_model(Q, 3, 0.01)
    sim = Simulator(model)
    affine = 0.0
    for cyc in reduced_cycle_basis_gates(Q):
        fam = germ_family(gs, cyc.witness, [0, 1, 2, 3, 7, 16])
        logs = np.array([sim.log_expectation(s)[1] for s in fam])
        ms = np.array([s.m for s in fam], dtype=float)
        A = np.vstack([np.ones_like(ms), ms]).T
        coef, *_ = np.linalg.lstsq(A, logs, rcond=None)
        affine = max(affine, float(np.max(np.abs(A @ coef - logs))))
    ok = 10 / 3 <= ratio <= 30 and affine <= 1e-12
    report(6, ok, f"median |lam_hat-lam| {hi:.2e} (infid {inf_hi:.1e}, m~{m_hi}) vs {lo:.2e} "
                  f"(infid {inf_lo:.1e}, m~{m_lo}): ratio {ratio:.1f} (target 10, factor 3); "
                  f"germ log-affine residual {affine:.1e}")


# -- criterion 7: three property checks, each over 1000 generated instances

_C7 = {"mobius": 0, "roundtrip": 0, "local": 0, "worst_roundtrip": 0.0}
fracs = st.fractions(min_value=-5, max_value=5, max_denominator=12)


@PROPERTY
@given(st.integers(1, 3).flatmap(lambda n: st.tuples(st.just(n), st.lists(fracs, min_size=4 ** n, max_size=4 ** n))))
def _mobius_property(data):
    n, vals = data
    r = np.array(vals, dtype=object)
    assert list(nm.mobius_paulis(nm.zeta_paulis(r, n), n)) == vals
    s = np.array(vals[: 2 ** n], dtype=object)
    assert list(nm.mobius_subsets(nm.zeta_subsets(s, n), n)) == vals[: 2 ** n]
    _C7["mobius"] += 1


@PROPERTY
@given(st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def _roundtrip_property(n, seed):
    rng = np.random.default_rng(seed)
    tau = {b: float(v) for b, v in zip(range(1, 4 ** n), rng.uniform(-0.1, 0.3, 4 ** n - 1))
           if rng.random() < 0.7}
    x = nm.lindblad_to_fidelity(n, tau=tau)
    back, res = nm.fidelity_to_lindblad(x, n)
    worst = max(abs(back[b] - tau.get(b, 0.0)) for b in range(1, 4 ** n))
    x2 = nm.lindblad_to_fidelity(n, tau=back)
    worst = max(worst, float(np.max(np.abs(x2 - x))))
    assert not res and worst <= 1e-12
    _C7["worst_roundtrip"] = max(_C7["worst_roundtrip"], worst)
    _C7["roundtrip"] += 1


@PROPERTY
@given(st.integers(1, 3).flatmap(lambda n: st.tuples(
    st.just(n),
    st.lists(st.lists(st.integers(1, n), min_size=1, max_size=n, unique=True), min_size=1, max_size=3),
    st.integers(0, 2 ** 32 - 1))))
def _local_property(data):
    n, maximal, seed = data
    om = FactorSet.from_maximal(n, maximal)
    rng = np.random.default_rng(seed)
    tau = {b: Fraction(int(rng.integers(-20, 21)), 97) for b in om.consistent_labels()}
    x = nm.lindblad_to_fidelity(n, tau={b: v for b, v in tau.items() if v})
    back, res = nm.fidelity_to_lindblad(np.array(x, dtype=object), n, om)
    assert res == {}
    assert all(back[b] == tau[b] for b in om.consistent_labels())
    _C7["local"] += 1


def test_criterion_7_conversion_round_trips():
    _mobius_property()
    _roundtrip_property()
    _local_property()
    ok = _C7["mobius"] >= 1000 and _C7["roundtrip"] >= 1000 and _C7["local"] >= 1000
    report(7, ok, f"Mobius exact on {_C7['mobius']} cases; Lindblad<->fidelity round trip on "
                  f"{_C7['roundtrip']} cases (worst {_C7['worst_roundtrip']:.1e}); "
                  f"omega-local residual exactly empty on {_C7['local']} cases")


def test_criterion_8_reduced_cycle_search():
    ok, parts = True, []
    single = GateSet(2, [tensor_parallel([(builtin_local("CZ"), [1, 2])], 2, "G1")])
    Q = build_embedding(single, AnsatzSpec.fully_local())
    c = reduced_cycle_basis_gates(Q)
    good = len(c) == 13 and gate_learnable_space(Q).same_span([x.vector for x in c])
    ok &= good
    parts.append(f"single CZ: {len(c)}")
    for n in (4, 6):
        gs, ans = cz_ring_fully_local(n)
        Q = build_embedding(gs, ans)
        fam = ring_reduced_cycles(Q)
        ref = fam["one_gate"] + fam["two_gate"]
        c = reduced_cycle_basis_gates(Q)
        from ptglearn.learnability import SubspaceBasis
        good = len(c) == 14 * n and SubspaceBasis("reduced", [x.vector for x in c]).same_span(ref)
        ok &= good
        parts.append(f"ring n={n}: {len(c)}=13n+n")
    for label, names, n in [("SWAP", ["SWAP", "SWAP", "SWAP"], 3), ("iSWAP", ["ISWAP", "ISWAP", "ISWAP"], 3),
                            ("SWAP+iSWAP+CZ", ["SWAP", "ISWAP", "CZ", "CNOT"], 4),
                            ("iSWAP+SWAP", ["ISWAP", "SWAP", "ISWAP"], 4)]:
        gates = [tensor_parallel([(builtin_local(g), [j % n + 1, (j + 1) % n + 1])], n, f"G{j}")
                 for j, g in enumerate(names)]
        Q = build_embedding(GateSet(n, gates), AnsatzSpec.fully_local())
        c = reduced_cycle_basis_gates(Q)
        ref = gate_learnable_space(Q)
        vecs = [x.vector for x in c]
        ids = {k: i for i, k in enumerate(Q.indices)}
        good = (rank_of([{ids[k]: v for k, v in x.items()} for x in vecs]) == len(c) == ref.rank
                and ref.same_span(vecs))
        ok &= good
        parts.append(f"{label} n={n}: {len(c)}/{ref.rank}")
    report(8, ok, "; ".join(parts))


def _random_spec(gs, rng):
    """Random circuit; most specs measure the ideal image of a sub-label of the preparation."""
    n = gs.n
    layers = []
    for _ in range(int(rng.integers(0, 7))):
        if rng.random() < 0.6:
            layers.append(Layer("gate", gs.names()[rng.integers(len(gs))]))
        else:
            layers.append(Layer("u1", tuple(rng.choice(["I", "H", "S", "HS", "SH", "SX"], n))))
    prep = int(rng.integers(1, 4 ** n))
    if rng.random() < 0.2:
        return ExperimentSpec(n, prep, layers, int(rng.integers(1, 4 ** n)))
    subs = [c for c in pc.sub_labels(prep, n) if c]
    cur = subs[rng.integers(len(subs))]
    for layer in layers:
        if layer.kind == "gate":
            _, cur = gs[layer.value].apply_int(cur)
        else:
            _, cur = apply_connector(layer.value, 1, cur)
    return ExperimentSpec(n, prep, layers, cur)


def test_criterion_9_simulator_oracle():
    rng = np.random.default_rng(90)
    ok, parts = True, []
    configs = [("cz-single", *cz_single()),
               ("cz-ring-fully-local n=3", *cz_ring_fully_local(3)),
               ("complete random n=3", random_gateset(3, np.random.default_rng(91)), AnsatzSpec.complete()),
               ("nn-cz n=4", *CASES["nn-cz"].make(4)),
               ("covariant-4local n=4", *CASES["covariant-4local"].make(4))]
    for label, gs, ans in configs:
        Q = build_embedding(gs, ans)
        model = random_model(Q, 9, 0.05)
        sim = Simulator(model)
        worst, nonzero = 0.0, 0
        for _ in range(50):
            spec = _random_spec(gs, rng)
            a, b = sim.exact_expectation(spec), dense_expectation(model, spec)
            if b != 0 or a != 0:
                nonzero += 1
                worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
        good = worst <= 1e-10
        ok &= good
        parts.append(f"{label}: worst rel {worst:.1e} ({nonzero}/50 nonzero)")
    report(9, ok, "; ".join(parts))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
