"""CZ gate-set configurations with known subspace dimensions, plus explicit cycle families.

Each builder returns ``(gateset, ansatz)``.  The explicit families are used as
regression fixtures: they are complete-model cycles whose pullbacks must
span the gate-only learnable space (and, with the SPAM-completing cycles,
the full learnable space).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from . import pauli_core as pc
from .clifford import GateSet, builtin_local, tensor_parallel
from .learnability import nn_cz_layers
from .noise_model import AnsatzSpec, EmbeddingMap, FactorSet, ParamIndex, ParamVector, build_embedding


def _ring_pairs(n: int) -> FactorSet:
    return FactorSet.from_maximal(n, [[j, j % n + 1] for j in range(1, n + 1)])


def _window(start: int, length: int, n: int) -> list[int]:
    return [(start - 1 + i) % n + 1 for i in range(length)]


def cz_single():
    cz = tensor_parallel([(builtin_local("CZ"), [1, 2])], 2, "CZ")
    return GateSet(2, [cz]), AnsatzSpec.complete()


def cz_ring_fully_local(n: int = 4):
    if n < 3:
        raise ValueError("a CZ ring needs at least 3 qubits")
    cz = builtin_local("CZ")
    gates = [tensor_parallel([(cz, [j, j % n + 1])], n, f"G{j}") for j in range(1, n + 1)]
    return GateSet(n, gates), AnsatzSpec.fully_local()


def nn_cz(n: int = 6):
    ge, go = nn_cz_layers(n)
    ring = _ring_pairs(n)
    return GateSet(n, [ge, go]), AnsatzSpec.quasi_local(ring, ring, {"Ge": ring, "Go": ring})


def covariant_4local(n: int = 6):
    ge, go = nn_cz_layers(n)
    ring = _ring_pairs(n)
    half = n // 2
    omega_e = FactorSet.from_maximal(n, [_window(2 * k - 1, 4, n) for k in range(1, half + 1)])
    omega_o = FactorSet.from_maximal(n, [_window(2 * k, 4, n) for k in range(1, half + 1)])
    return GateSet(n, [ge, go]), AnsatzSpec.quasi_local(ring, ring, {"Ge": omega_e, "Go": omega_o})


@dataclass(frozen=True)
class CaseStudy:
    name: str
    build: Callable[..., tuple]
    default_n: int
    expected: Callable[[int], dict]
    takes_n: bool = True

    def make(self, n: int | None = None):
        if not self.takes_n:
            if n not in (None, self.default_n):
                raise ValueError(f"{self.name} is defined only for n={self.default_n}")
            return self.build()
        return self.build(self.default_n if n is None else n)


def _dims(x, l, t, xg, lg):
    return {"X_R": x, "L_R": l, "T_R": t, "X_R^G": xg, "L_R^G": lg}


CASES: dict[str, CaseStudy] = {
    "cz-single": CaseStudy("cz-single", cz_single, 2,
                           lambda n: _dims(21, 18, 3, 15, 13), takes_n=False),
    "cz-ring-fully-local": CaseStudy("cz-ring-fully-local", cz_ring_fully_local, 4,
                                     lambda n: _dims(17 * n, 16 * n, n, 15 * n, 14 * n)),
    "nn-cz": CaseStudy("nn-cz", nn_cz, 6,
                       lambda n: _dims(28 * n, 27 * n, n, 24 * n, 23 * n)),
    # the gate-only learnable dimension is not known in closed form here
    "covariant-4local": CaseStudy("covariant-4local", covariant_4local, 6,
                                  lambda n: _dims(244 * n, 242 * n, 2 * n, 240 * n, None)),
}


def get_case(name: str) -> CaseStudy:
    try:
        return CASES[name]
    except KeyError:
        raise KeyError(f"unknown case study {name!r}; choose from {sorted(CASES)}") from None


# ---------------------------------------------------------------------------
# explicit cycle families


def _label(n: int, sites: dict[int, str]) -> int:
    a = 0
    for q, ch in sites.items():
        if ch == "I":
            continue
        bit = pc.qubit_bit(q, n)
        k = "IZXY".index(ch)
        if k & 2:
            a |= pc.pack(bit, 0, n)
        if k & 1:
            a |= pc.pack(0, bit, n)
    return a


def _on(n: int, qubits: list[int], word: str) -> int:
    return _label(n, dict(zip(qubits, word)))


# The 13 gate-only cycles of one CZ (local words on the ordered pair).
CZ_LOCAL_CYCLES: tuple[tuple[str, ...], ...] = (
    ("IZ",), ("ZI",), ("ZZ",), ("XX",), ("YY",), ("XY",), ("YX",),
    ("XI", "XZ"), ("YI", "YZ"), ("XI", "YZ"), ("IX", "ZX"), ("IY", "ZY"), ("IX", "ZY"),
)


def _gate_cycle(n: int, gate: str, qubits: list[int], words: tuple[str, ...]) -> ParamVector:
    out: dict = {}
    for w in words:
        idx = ParamIndex("G", _on(n, qubits, w), gate)
        out[idx] = out.get(idx, 0) + 1
    return ParamVector(out)


def _rooted(n: int, prep: list[int], gate: str | None, label: int | None, meas: list[int]) -> ParamVector:
    out = {ParamIndex("S", pc.bits_of(prep, n)): 1}
    if gate is not None:
        out[ParamIndex("G", label, gate)] = 1
    m = ParamIndex("M", pc.bits_of(meas, n))
    out[m] = out.get(m, 0) + 1
    return ParamVector(out)


def single_cz_cycles() -> dict[str, list[ParamVector]]:
    """Gate-only cycles and the SPAM-completing rooted cycles of the single-CZ model."""
    gate = [_gate_cycle(2, "CZ", [1, 2], w) for w in CZ_LOCAL_CYCLES]
    spam = [ParamVector({ParamIndex("S", u): 1, ParamIndex("M", u): 1}) for u in (1, 2, 3)]
    spam.append(_rooted(2, [1], "CZ", _on(2, [1, 2], "XI"), [1, 2]))
    spam.append(_rooted(2, [2], "CZ", _on(2, [1, 2], "IX"), [1, 2]))
    return {"gate": gate, "supplement": spam}


def ring_reduced_cycles(Q: EmbeddingMap) -> dict[str, list[ParamVector]]:
    """Reduced cycle families of the fully-local CZ ring (gates named G1..Gn)."""
    from .noise_model import ReducedIndex

    n = Q.n

    def th(gate, qubits, word):
        return ReducedIndex("G", _on(n, qubits, word), gate)

    one, two, supp = [], [], []
    for i in range(1, n + 1):
        q = [i, i % n + 1]
        for words in CZ_LOCAL_CYCLES:
            v: dict = {}
            for w in words:
                v[th(f"G{i}", q, w)] = v.get(th(f"G{i}", q, w), 0) + 1
            one.append(ParamVector(v))
        nxt = i % n + 1
        two.append(ParamVector({th(f"G{i}", q, "XI"): 1,
                                th(f"G{nxt}", [nxt, nxt % n + 1], "ZX"): 1}))
        bit = pc.qubit_bit(i, n)
        supp.append(ParamVector({ReducedIndex("S", bit, ""): 1, ReducedIndex("M", bit, ""): 1}))
        supp.append(ParamVector({ReducedIndex("S", bit, ""): 1, th(f"G{i}", q, "XI"): 1,
                                 ReducedIndex("M", bit, ""): 1,
                                 ReducedIndex("M", pc.qubit_bit(i % n + 1, n), ""): 1}))
    return {"one_gate": one, "two_gate": two, "supplement": supp}


def nn_cz_fixture_cycles(n: int) -> dict[str, list[ParamVector]]:
    """Complete-model cycles of the nearest-neighbour CZ model, grouped by family."""
    if n < 6 or n % 2:
        raise ValueError("the nearest-neighbour CZ families need an even n >= 6")
    ge, go = nn_cz_layers(n)
    half = n // 2
    basis1, basis2, basis3 = [], [], []
    for k in range(1, half + 1):
        for words in CZ_LOCAL_CYCLES:
            basis1.append(_gate_cycle(n, "Ge", _window(2 * k - 1, 2, n), words))
        for words in CZ_LOCAL_CYCLES:
            basis1.append(_gate_cycle(n, "Go", _window(2 * k, 2, n), words))
    for k in range(1, half + 1):
        for gate, g, start in (("Ge", ge, 2 * k), ("Go", go, 2 * k + 1)):
            qs = _window(start, 2, n)
            for a in pc.labels_with_support(pc.bits_of(qs, n), n):
                b = g.image(a)
                basis2.append(ParamVector({ParamIndex("G", a, gate): 1,
                                           ParamIndex("G", b, gate): 1}))
    for k in range(1, half + 1):
        w1 = _window(2 * k - 1, 5, n)
        basis3.append(ParamVector({
            ParamIndex("G", _on(n, w1, "IXIXI"), "Go"): 1,
            ParamIndex("G", _on(n, w1, "IXZXZ"), "Ge"): 1,
            ParamIndex("G", _on(n, w1, "ZXIXZ"), "Go"): 1,
            ParamIndex("G", _on(n, w1, "ZXZXI"), "Ge"): 1}))
        w2 = _window(2 * k, 5, n)
        basis3.append(ParamVector({
            ParamIndex("G", _on(n, w2, "IXIXI"), "Go"): 1,
            ParamIndex("G", _on(n, w2, "ZXZXI"), "Ge"): 1,
            ParamIndex("G", _on(n, w2, "ZXIXZ"), "Go"): 1,
            ParamIndex("G", _on(n, w2, "IXZXZ"), "Ge"): 1}))

    def xs(qs):
        return _label(n, {q: "X" for q in qs})

    supp = []
    for k in range(1, half + 1):
        pair = _window(2 * k - 1, 2, n)
        if k != 1:
            supp.append(_rooted(n, [2 * k - 1], "Ge", xs([2 * k - 1]), pair))
        supp.append(_rooted(n, [2 * k], "Ge", xs([2 * k]), pair))
    for k in range(1, half + 1):
        pair = _window(2 * k, 2, n)
        supp.append(_rooted(n, [2 * k], "Go", xs([2 * k]), pair))
        supp.append(_rooted(n, [pair[1]], "Go", xs([pair[1]]), pair))
    for k in range(1, n + 1):
        u = pc.bits_of(_window(k, 2, n), n)
        supp.append(ParamVector({ParamIndex("S", u): 1, ParamIndex("M", u): 1}))
    for k in range(1, n + 1):
        u = pc.qubit_bit(k, n)
        supp.append(ParamVector({ParamIndex("S", u): 1, ParamIndex("M", u): 1}))
    supp.append(_rooted(n, [n, 3], "Go", xs([n, 3]), [n, 1, 2, 3]))
    return {"basis1": basis1, "basis2": basis2, "basis3": basis3, "supplement": supp}


def nn_cz_fixture_bases(n: int, Q: EmbeddingMap | None = None) -> dict[str, list[ParamVector]]:
    """The same families pulled back to reduced covectors."""
    if Q is None:
        gs, ans = nn_cz(n)
        Q = build_embedding(gs, ans)
    cycles = nn_cz_fixture_cycles(n)
    return {k: [Q.pullback(c) for c in v] for k, v in cycles.items()}
