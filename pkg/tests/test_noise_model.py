import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ptglearn import pauli_core as pc
from ptglearn import noise_model as nm
from ptglearn.casestudies import covariant_4local, cz_ring_fully_local, cz_single, nn_cz
from ptglearn.clifford import GateSet, builtin_local, tensor_parallel
from conftest import pauli_matrix


def fractions(k, seed):
    rng = np.random.default_rng(seed)
    return np.array([Fraction(int(v), int(d)) for v, d in zip(rng.integers(-9, 10, k), rng.integers(1, 7, k))],
                    dtype=object)


@given(st.integers(1, 3), st.integers(0, 2 ** 31))
def test_pauli_zeta_mobius_exact_inverse(n, seed):
    r = fractions(4 ** n, seed)
    assert list(nm.mobius_paulis(nm.zeta_paulis(r, n), n)) == list(r)
    assert list(nm.zeta_paulis(nm.mobius_paulis(r, n), n)) == list(r)


@given(st.integers(1, 3), st.integers(0, 2 ** 31))
def test_pauli_zeta_matches_definition(n, seed):
    r = fractions(4 ** n, seed)
    x = nm.zeta_paulis(r, n)
    for a in range(4 ** n):
        assert x[a] == sum((r[b] for b in pc.sub_labels(a, n)), Fraction(0))


@given(st.integers(1, 5), st.integers(0, 2 ** 31))
def test_subset_zeta_mobius(n, seed):
    r = fractions(2 ** n, seed)
    x = nm.zeta_subsets(r, n)
    for u in range(2 ** n):
        assert x[u] == sum((r[v] for v in range(2 ** n) if v & u == v), Fraction(0))
    assert list(nm.mobius_subsets(x, n)) == list(r)


def test_sparse_mobius_inverses_against_forward():
    n = 4
    om = pc.FactorSet.from_maximal(n, [[1, 2], [2, 3, 4]])
    rng = np.random.default_rng(1)
    r_spam = {nu: Fraction(int(rng.integers(1, 9))) for nu in om}
    assert nm.mobius_inverse_spam(nm.mobius_forward_spam(r_spam, n), n, om) == r_spam
    r_gate = {b: Fraction(int(rng.integers(1, 9))) for b in om.consistent_labels()}
    assert nm.mobius_inverse_gate(nm.mobius_forward_gate(r_gate, n), n, om) == r_gate


def dense_channel_fidelities(tau, n):
    """Compose single-generator Pauli channels as matrices and read off Pauli fidelities."""
    d = 2 ** n
    lam = np.ones(4 ** n)
    for b, t in tau.items():
        p = (1 - np.exp(-t)) / 2
        P = pauli_matrix(b, n)
        for a in range(1, 4 ** n):
            A = pauli_matrix(a, n)
            out = (1 - p) * A + p * P @ A @ P
            lam[a] *= np.real(np.trace(A @ out)) / d
    return lam


@pytest.mark.parametrize("n", [1, 2])
def test_lindblad_to_fidelity_against_dense_channels(n):
    rng = np.random.default_rng(n)
    tau = {b: float(rng.uniform(0, 0.2)) for b in range(1, 4 ** n) if rng.random() < 0.6}
    x = nm.lindblad_to_fidelity(n, tau=tau)
    lam = dense_channel_fidelities(tau, n)
    assert np.allclose(np.exp(-x), lam, atol=1e-13)


def test_lindblad_eta_form():
    x = nm.lindblad_to_fidelity(1, eta={1: 0.1})
    # Z generator flips X and Y with probability 0.1
    assert x[1] == 0 and np.isclose(np.exp(-x[2]), 0.8) and np.isclose(np.exp(-x[3]), 0.8)
    with pytest.raises(ValueError):
        nm.lindblad_to_fidelity(1, eta={1: 0.5})
    with pytest.raises(ValueError):
        nm.lindblad_to_fidelity(1)


def test_fidelity_to_lindblad_round_trip_and_locality():
    n = 3
    om = pc.FactorSet.from_maximal(n, [[1, 2], [2, 3]])
    rng = np.random.default_rng(7)
    tau = {b: Fraction(int(rng.integers(1, 20)), 100) for b in om.consistent_labels()}
    x = nm.lindblad_to_fidelity(n, tau=tau)
    back, residual = nm.fidelity_to_lindblad(x, n, om)
    assert residual == {}
    assert {b: v for b, v in back.items() if v} == tau
    _, residual_full = nm.fidelity_to_lindblad(x, n, pc.FactorSet.singletons(n))
    assert residual_full


def test_quasi_local_factorization():
    """Fidelities of an omega-local channel factor over the reduced parameters."""
    gs, ans = nn_cz(6)
    Q = nm.build_embedding(gs, ans)
    model = nm.random_model(Q, 3, 0.05)
    n = Q.n
    r = {k.label: v for k, v in model.reduced.items() if k.kind == "G" and k.gate == "Ge"}
    lam = np.exp(-model.arrays[("G", "Ge")])
    rng = np.random.default_rng(0)
    for a in rng.integers(1, 4 ** n, 50):
        a = int(a)
        pred = np.exp(-sum(r.get(b, 0.0) for b in pc.sub_labels(a, n) if b))
        assert np.isclose(lam[a], pred, rtol=1e-12)


@pytest.mark.parametrize("builder", [cz_single, lambda: cz_ring_fully_local(3), lambda: nn_cz(6)])
def test_embed_pullback_adjoint(builder):
    gs, ans = builder()
    Q = nm.build_embedding(gs, ans)
    rng = np.random.default_rng(11)
    r = {Q.indices[i]: Fraction(int(rng.integers(-5, 6))) for i in rng.choice(Q.dim, 15, replace=False)}
    x = Q.embed(r)
    space = Q.space
    f = {}
    for _ in range(25):
        f[space.index(int(rng.integers(space.dim)))] = Fraction(int(rng.integers(-3, 4)))
    lhs = sum((v * x.get(k, 0) for k, v in f.items()), Fraction(0))
    pulled = Q.pullback(f)
    rhs = sum((v * r.get(k, 0) for k, v in pulled.items()), Fraction(0))
    assert lhs == rhs
    back, res = Q.left_inverse(x)
    assert not res
    assert {k: v for k, v in back.items() if v} == {k: v for k, v in r.items() if v}


def test_left_inverse_flags_vectors_outside_image():
    gs, ans = cz_ring_fully_local(3)
    Q = nm.build_embedding(gs, ans)
    a, _ = pc.parse_pauli("XXX")
    _, res = Q.left_inverse({nm.ParamIndex("G", a, "G1"): 1})
    assert res


def test_dims_of_blocks():
    gs, ans = cz_single()
    assert nm.build_embedding(gs, ans).dim == 3 + 3 + 15
    gs, ans = cz_ring_fully_local(4)
    Q = nm.build_embedding(gs, ans)
    assert Q.dim == 17 * 4 and Q.block_dims() == {"S": 4, "M": 4, "G": 60}
    gs, ans = covariant_4local(6)
    assert nm.build_embedding(gs, ans).dim == 244 * 6


def test_random_model_deterministic_and_physical():
    gs, ans = nn_cz(6)
    Q = nm.build_embedding(gs, ans)
    m1, m2 = nm.random_model(Q, 5, 0.02), nm.random_model(Q, 5, 0.02)
    assert all(np.array_equal(m1.arrays[k], m2.arrays[k]) for k in m1.arrays)
    assert 0 < m1.min_fidelity() <= 1
    back = nm.GroundTruthModel.from_json(Q, json.dumps(m1.to_json()))
    assert all(np.allclose(back.arrays[k], m1.arrays[k], rtol=0, atol=1e-15) for k in m1.arrays)


def test_ansatz_json_round_trip():
    gs, ans = covariant_4local(6)
    back = nm.AnsatzSpec.from_json(json.dumps(ans.to_json(6)), 6)
    assert back.omega_gate == ans.omega_gate and back.omega_s == ans.omega_s
    with pytest.raises(ValueError):
        nm.AnsatzSpec("weird")


def test_custom_ansatz_rejects_dependent_columns():
    gs = GateSet(2, [tensor_parallel([(builtin_local("CZ"), [1, 2])], 2, "CZ")])
    col = nm.ParamVector({nm.ParamIndex("S", 1): 1})
    spec = nm.AnsatzSpec.custom([(nm.ReducedIndex("S", 1, ""), col), (nm.ReducedIndex("S", 2, ""), col)])
    with pytest.raises(ValueError):
        nm.build_embedding(gs, spec)
