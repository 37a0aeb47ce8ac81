import functools
import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ptglearn import pauli_core as pc

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_SITE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@functools.lru_cache(maxsize=None)
def pauli_matrix(a: int, n: int) -> np.ndarray:
    """Dense Hermitian Pauli for a packed label (qubit 1 is the leftmost tensor factor)."""
    out = np.ones((1, 1), dtype=complex)
    for ch in pc.pauli_str(a, n):
        out = np.kron(out, _SITE[ch])
    return out


@pytest.fixture(autouse=True)
def _reset_cap():
    yield
    pc.set_n_max(None)


TWO_QUBIT = ("CZ", "CNOT", "SWAP", "ISWAP")
ONE_QUBIT = ("H", "S", "HS", "SX", "SH")


def random_gateset(n, rng, k=2, extra_1q=0.5):
    """``k`` gates, each a random two-qubit builtin on a random ordered pair, sometimes with a 1q gate alongside."""
    from ptglearn.clifford import GateSet, builtin_local, tensor_parallel

    gates = []
    for i in range(k):
        q = [int(v) + 1 for v in rng.choice(n, 2, replace=False)]
        parts = [(builtin_local(TWO_QUBIT[rng.integers(len(TWO_QUBIT))]), q)]
        rest = [j for j in range(1, n + 1) if j not in q]
        if rest and rng.random() < extra_1q:
            parts.append((builtin_local(ONE_QUBIT[rng.integers(len(ONE_QUBIT))]), [rest[0]]))
        gates.append(tensor_parallel(parts, n, f"g{i}"))
    return GateSet(n, gates)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
