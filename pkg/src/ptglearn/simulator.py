"""Exact and sampled expectations of experiment specs under Pauli noise.

Every compiled circuit is Clifford, so the measured Pauli back-propagates to
a single Pauli at preparation time.  The expectation is the tracked sign
times the product of the fidelities met on the way.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import pauli_core as pc
from .clifford import CliffordGate, connector_layer, single_qubit
from .exp_design import GATE, ExperimentPlan, ExperimentSpec
from .noise_model import GroundTruthModel, ParamIndex, ReducedIndex


class UnphysicalModel(ValueError):
    """An expectation left [-1, 1]."""


@dataclass
class SimResult:
    index: int
    exact: float
    shots: int
    mean: float
    seed: int | None
    sign: int = 1

    def to_json(self) -> dict:
        d = asdict(self)
        d["exact"] = repr(float(self.exact))
        d["mean"] = repr(float(self.mean))
        return d

    @classmethod
    def from_json(cls, data: Mapping) -> "SimResult":
        return cls(int(data["index"]), float(data["exact"]), int(data["shots"]),
                   float(data["mean"]), data.get("seed"), int(data.get("sign", 1)))


# ---------------------------------------------------------------------------
# inverse Clifford action


class _InverseTable:
    """Lazy preimages ``b -> (sign, a)`` with ``G(a) = sign * b``."""

    def __init__(self, gate: CliffordGate):
        pc.check_cap(gate.n, "inverse Clifford table")
        self.table: dict[int, tuple[int, int]] = {}
        for a in range(1 << 2 * gate.n):
            s, b = gate.apply_int(a)
            self.table[b] = (s, a)

    def __call__(self, b: int) -> tuple[int, int]:
        return self.table[b]


_SQ_PRE: dict[str, dict[int, tuple[int, int]]] = {}


def _sq_preimage(name: str, c: int) -> tuple[int, int]:
    tab = _SQ_PRE.get(name)
    if tab is None:
        g = single_qubit(name)
        tab = {}
        for a in (1, 2, 3):
            s, b = g.apply_int(a)
            tab[b] = (s, a)
        _SQ_PRE[name] = tab
    return tab[c]


def _connector_preimage(names: Sequence[str], b: int, n: int) -> tuple[int, int]:
    sign, out = 1, 0
    for j, nm in enumerate(names, start=1):
        ch = pc.site_char(b, n, j)
        if ch == "I":
            continue
        k = "IZXY".index(ch)
        if nm != "I":
            s, k = _sq_preimage(nm, k)
            sign *= s
        bit = pc.qubit_bit(j, n)
        if k & 2:
            out |= pc.pack(bit, 0, n)
        if k & 1:
            out |= pc.pack(0, bit, n)
    return sign, out


def _is_sublabel(c: int, a: int, n: int) -> bool:
    """Every non-identity site of ``c`` agrees with ``a``."""
    for j in range(1, n + 1):
        ch = pc.site_char(c, n, j)
        if ch != "I" and ch != pc.site_char(a, n, j):
            return False
    return True


class Simulator:
    """Caches inverse tables per gate set; evaluates specs against models."""

    def __init__(self, model: GroundTruthModel):
        self.model = model
        self.n = model.n
        self._inv = {g.name: _InverseTable(g) for g in model.embedding.gateset}

    def log_expectation(self, spec: ExperimentSpec) -> tuple[int, float]:
        """(sign, total fidelity exponent); the expectation is ``sign * exp(-exponent)``.

        Sign 0 means the ideal expectation vanishes.
        """
        n = self.n
        if spec.n != n:
            raise ValueError(f"spec acts on {spec.n} qubits, model on {n}")
        arrays = self.model.arrays
        p = spec.meas
        sign = 1
        total = float(arrays[("M", "")][pc.support_bits(p, n)]) if p else 0.0
        for layer in reversed(spec.circuit()):
            if p == 0:
                break
            if layer.kind == GATE:
                if layer.value not in self._inv:
                    raise ValueError(f"unknown gate {layer.value!r}")
                s, p = self._inv[layer.value](p)
                sign *= s
                total += float(arrays[("G", layer.value)][p])
            else:
                s, p = _connector_preimage(layer.value, p, n)
                sign *= s
        if p and not _is_sublabel(p, spec.prep, n):
            return 0, 0.0
        if p:
            total += float(arrays[("S", "")][pc.support_bits(p, n)])
        return sign, total

    def exact_expectation(self, spec: ExperimentSpec) -> float:
        sign, total = self.log_expectation(spec)
        return sign * float(np.exp(-total))

    def sample(self, spec: ExperimentSpec, shots: int, seed: int | None, index: int = 0) -> SimResult:
        if shots < 0:
            raise ValueError("shots must be nonnegative")
        e = self.exact_expectation(spec)
        if abs(e) > 1 + 1e-12:
            raise UnphysicalModel(f"expectation {e} is outside [-1, 1]")
        if shots == 0:
            return SimResult(index, e, 0, e, seed, spec.sign)
        rng = np.random.default_rng(seed)
        k = int(rng.binomial(shots, min(1.0, max(0.0, (1 + e) / 2))))
        return SimResult(index, e, shots, (2 * k - shots) / shots, seed, spec.sign)


def exact_expectation(model: GroundTruthModel, spec: ExperimentSpec) -> float:
    return Simulator(model).exact_expectation(spec)


def sample(model: GroundTruthModel, spec: ExperimentSpec, shots: int, seed: int | None) -> SimResult:
    return Simulator(model).sample(spec, shots, seed)


def derived_seed(seed: int, index: int) -> int:
    """Per-experiment seed: first word of ``SeedSequence(seed, spawn_key=(index,))``."""
    return int(np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1, np.uint32)[0])


def simulate_plan(model: GroundTruthModel, plan: ExperimentPlan | Sequence[ExperimentSpec],
                  shots: int, seed: int | None = None) -> list[SimResult]:
    specs = plan.experiments if isinstance(plan, ExperimentPlan) else list(plan)
    if shots > 0 and seed is None:
        raise ValueError("sampling needs a seed")
    sim = Simulator(model)
    out = []
    for i, spec in enumerate(specs):
        s = None if seed is None else derived_seed(seed, i)
        out.append(sim.sample(spec, shots, s, index=i))
    return out


def write_results(results: Iterable[SimResult], path: str) -> None:
    with open(path, "w") as fh:
        for r in results:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")


def read_results(path: str) -> list[SimResult]:
    with open(path) as fh:
        return [SimResult.from_json(json.loads(line)) for line in fh if line.strip()]


# ---------------------------------------------------------------------------
# gauge moves


def gauge_transform(model: GroundTruthModel, direction: Mapping, eta: float) -> GroundTruthModel:
    """Shift the model by ``eta * direction``.

    ``direction`` is a complete vector (ParamIndex keys) or a reduced one
    (ReducedIndex keys).  The reduced parameters follow along whenever the
    complete direction lies in the image of the embedding.
    """
    Q = model.embedding
    keys = list(direction)
    if keys and all(isinstance(k, ReducedIndex) for k in keys):
        unknown = [k for k in keys if k not in Q.position]
        if unknown:
            raise ValueError(f"reduced direction has unknown coordinates {unknown[:3]}")
        r_dir = {k: float(v) for k, v in direction.items()}
        x_dir = Q.embed(direction)
    else:
        x_dir = {ParamIndex(*k): v for k, v in direction.items()}
        r_dir = None
        if model.reduced is not None:
            r, res = Q.left_inverse(x_dir)
            if not res:
                r_dir = {k: float(v) for k, v in r.items()}
    arrays = {k: v.astype(float).copy() for k, v in model.arrays.items()}
    for idx, v in x_dir.items():
        key = (idx.kind, idx.gate if idx.kind == "G" else "")
        if key not in arrays:
            raise ValueError(f"direction entry {idx} is not a model parameter")
        arrays[key][idx.label] += eta * float(v)
    reduced = None
    if model.reduced is not None and r_dir is not None:
        reduced = dict(model.reduced)
        for k, v in r_dir.items():
            reduced[k] = reduced.get(k, 0.0) + eta * v
    return GroundTruthModel(Q, arrays, reduced)


# ---------------------------------------------------------------------------
# dense oracle


def _ptm(gate: CliffordGate) -> np.ndarray:
    n = gate.n
    d = 1 << 2 * n
    mat = np.zeros((d, d))
    mat[0, 0] = 1.0
    for a in range(1, d):
        s, b = gate.apply_int(a)
        mat[b, a] = s
    return mat


def dense_expectation(model: GroundTruthModel, spec: ExperimentSpec) -> float:
    """Forward propagation of the full Pauli vector of the state with dense transfer matrices (n <= 4)."""
    n = model.n
    if n > 4:
        raise ValueError("the dense oracle is limited to n <= 4")
    d = 1 << 2 * n
    lam = {k: np.exp(-np.asarray(v, dtype=float)) for k, v in model.arrays.items()}
    vec = np.zeros(d)
    for c in range(d):
        if _is_sublabel(c, spec.prep, n):
            vec[c] = 1.0
    spam_s = np.ones(d)
    spam_m = np.ones(d)
    for c in range(1, d):
        u = pc.support_bits(c, n)
        spam_s[c] = lam[("S", "")][u]
        spam_m[c] = lam[("M", "")][u]
    vec = spam_s * vec
    gates = {g.name: g for g in model.embedding.gateset}
    for layer in spec.circuit():
        if layer.kind == GATE:
            g = gates[layer.value]
            noise = np.diag(np.concatenate([[1.0], lam[("G", g.name)][1:]]))
            vec = _ptm(g) @ (noise @ vec)
        else:
            vec = _ptm(connector_layer(list(layer.value))) @ vec
    vec = spam_m * vec
    return float(vec[spec.meas])
