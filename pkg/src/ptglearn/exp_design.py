"""Experiment specifications compiled from rooted cycles, and plans built from them.

An :class:`ExperimentSpec` prepares the product eigenstate of ``prep``, runs
``layers`` repeated ``m`` times and measures the Pauli ``meas``.  Layers are
either single-qubit connector layers (one Clifford name per qubit) or named
gate layers.  Connectors absorb every Clifford sign they can, so ideal
expectations are ``sign`` (always +1 for germ families).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, NamedTuple, Sequence

from . import pauli_core as pc
from .clifford import GateSet, SignedPauli, gateset_from_json, single_qubit_connector
from .linalg import Echelon
from .noise_model import AnsatzSpec, EmbeddingMap, ParamIndex, ParamVector, ReducedIndex, build_embedding

GATE = "gate"
U1 = "u1"


class RelativeUnavailable(ValueError):
    """Relative-precision plans need a fully-local ansatz on 2-qubit gates."""


class Layer(NamedTuple):
    kind: str          # "gate" or "u1"
    value: object      # gate name, or tuple of single-qubit Clifford names

    def to_json(self):
        return {GATE: self.value} if self.kind == GATE else {U1: list(self.value)}

    @classmethod
    def from_json(cls, data: Mapping) -> "Layer":
        if GATE in data:
            return cls(GATE, str(data[GATE]))
        if U1 in data:
            return cls(U1, tuple(data[U1]))
        raise ValueError(f"unknown layer {data!r}")


@dataclass
class ExperimentSpec:
    n: int
    prep: int
    layers: list[Layer]
    meas: int
    m: int = 1
    sign: int = 1
    target: ParamVector = field(default_factory=ParamVector)

    def circuit(self) -> list[Layer]:
        return list(self.layers) * self.m

    def gate_count(self) -> int:
        return sum(1 for layer in self.layers if layer.kind == GATE) * self.m

    def to_json(self) -> dict:
        return {"prep": pc.pauli_str(self.prep, self.n),
                "layers": [layer.to_json() for layer in self.layers],
                "meas": pc.pauli_str(self.meas, self.n),
                "m": self.m, "sign": self.sign,
                "target": ParamVector(self.target).to_json(self.n)}

    @classmethod
    def from_json(cls, data: Mapping) -> "ExperimentSpec":
        prep, n = pc.parse_pauli(data["prep"])
        meas, n2 = pc.parse_pauli(data["meas"])
        if n != n2:
            raise ValueError("prep and meas have different lengths")
        return cls(n, prep, [Layer.from_json(x) for x in data.get("layers", [])], meas,
                   int(data.get("m", 1)), int(data.get("sign", 1)),
                   ParamVector.from_json(data.get("target", {})))


@dataclass
class PlanElement:
    """One learnable-basis element and the experiments that determine it.

    ``estimator`` is ``"single"`` (one experiment, value = -log mean) or
    ``"ratio"`` (a germ family; value = decay rate per repetition).
    """

    name: str
    vector: ParamVector
    experiments: list[int]
    estimator: str
    witness: ParamVector | None = None

    def to_json(self, n: int) -> dict:
        out = {"name": self.name, "vector": self.vector.to_json(n),
               "experiments": list(self.experiments), "estimator": self.estimator}
        if self.witness is not None:
            out["witness"] = self.witness.to_json(n)
        return out


@dataclass
class ExperimentPlan:
    gateset: GateSet
    ansatz: AnsatzSpec
    mode: str
    experiments: list[ExperimentSpec]
    elements: list[PlanElement]

    @property
    def n(self) -> int:
        return self.gateset.n

    def embedding(self) -> EmbeddingMap:
        return build_embedding(self.gateset, self.ansatz)

    def to_json(self) -> dict:
        n = self.n
        return {"n": n, "mode": self.mode, "gateset": self.gateset.to_json(),
                "ansatz": self.ansatz.to_json(n),
                "experiments": [s.to_json() for s in self.experiments],
                "elements": [e.to_json(n) for e in self.elements]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, data: Mapping | str) -> "ExperimentPlan":
        if isinstance(data, str):
            data = json.loads(data)
        gs = gateset_from_json(data["gateset"])
        ans = AnsatzSpec.from_json(data["ansatz"], gs.n)
        specs = [ExperimentSpec.from_json(s) for s in data["experiments"]]
        elements = []
        for e in data.get("elements", []):
            w = e.get("witness")
            elements.append(PlanElement(
                e["name"], ParamVector.from_json(e["vector"], ReducedIndex),
                list(e["experiments"]), e["estimator"],
                None if w is None else ParamVector.from_json(w)))
        return cls(gs, ans, data.get("mode", "simple"), specs, elements)


def load_plan(path: str) -> ExperimentPlan:
    with open(path) as fh:
        return ExperimentPlan.from_json(json.load(fh))


# ---------------------------------------------------------------------------
# compilation


def complete_prep(a: int, n: int) -> int:
    """Fill identity sites of ``a`` with Z."""
    x, z = pc.split(a, n)
    return pc.pack(x, z | (((1 << n) - 1) & ~(x | z)), n)


def _signed(a: int, s: int, n: int) -> SignedPauli:
    return SignedPauli(pc.PauliLabel.from_int(a, n), s)


def compile_walk(gateset: GateSet, steps: Sequence[tuple[str, int]], close: bool) -> tuple[list[Layer], int, int]:
    """Layers for a walk given as ``(gate, input label)`` steps.

    Returns ``(layers, meas, sign)``.  With ``close`` the last connector
    maps the final output back onto ``+steps[0]`` label, so the layers
    form a repeatable germ.
    """
    n = gateset.n
    if not steps:
        raise ValueError("empty walk")
    layers: list[Layer] = []
    sign, cur = 1, steps[0][1]
    for i, (gname, a) in enumerate(steps):
        if i:
            layers.append(Layer(U1, tuple(single_qubit_connector(_signed(cur, sign, n), _signed(a, 1, n)))))
            sign, cur = 1, a
        sign, cur = gateset[gname].apply_int(a)
        layers.append(Layer(GATE, gname))
    if close:
        first = steps[0][1]
        layers.append(Layer(U1, tuple(single_qubit_connector(_signed(cur, sign, n), _signed(first, 1, n)))))
        return layers, first, 1
    return layers, cur, sign


def _as_int(v) -> int:
    f = Fraction(v)
    if f.denominator != 1:
        raise ValueError("cycle coefficients must be integers")
    return int(f)


def _euler(gateset: GateSet, gate_counts: Mapping[ParamIndex, int], start: int) -> list[ParamIndex]:
    """Hierholzer walk from ``start`` using every gate edge with its multiplicity."""
    n = gateset.n
    out_edges: dict[int, list[ParamIndex]] = {}
    for idx in sorted(gate_counts, reverse=True):
        src = pc.support_bits(idx.label, n)
        out_edges.setdefault(src, []).extend([idx] * gate_counts[idx])
    stack: list[tuple[int, ParamIndex | None]] = [(start, None)]
    walk: list[ParamIndex] = []
    while stack:
        v, via = stack[-1]
        if out_edges.get(v):
            idx = out_edges[v].pop()
            stack.append((pc.support_bits(gateset[idx.gate].image(idx.label), n), idx))
        else:
            stack.pop()
            if via is not None:
                walk.append(via)
    walk.reverse()
    if len(walk) != sum(gate_counts.values()):
        raise ValueError("gate edges do not form a single walk through the root")
    return walk


def compile_rooted_cycle(gateset: GateSet, cycle: Mapping) -> ExperimentSpec:
    """One experiment whose -log(sign * ideal-circuit expectation) is ``cycle(x)``."""
    n = gateset.n
    prep_u = meas_u = None
    gates: dict[ParamIndex, int] = {}
    balance: dict[int, int] = {}
    for idx, v in cycle.items():
        idx = ParamIndex(*idx)
        c = _as_int(v)
        if c == 0:
            continue
        if c < 0:
            raise ValueError("rooted cycles have nonnegative coefficients")
        if idx.kind == "S":
            if prep_u is not None or c != 1:
                raise ValueError("cycle must leave the root exactly once")
            prep_u = idx.label
        elif idx.kind == "M":
            if meas_u is not None or c != 1:
                raise ValueError("cycle must return to the root exactly once")
            meas_u = idx.label
        else:
            gates[idx] = c
            s = pc.support_bits(idx.label, n)
            t = pc.support_bits(gateset[idx.gate].image(idx.label), n)
            balance[s] = balance.get(s, 0) + c
            balance[t] = balance.get(t, 0) - c
    if prep_u is None or meas_u is None:
        raise ValueError("cycle does not pass through the root")
    balance[prep_u] = balance.get(prep_u, 0) - 1
    balance[meas_u] = balance.get(meas_u, 0) + 1
    if any(balance.values()):
        raise ValueError("cycle is not flow-conserving")
    target = ParamVector({ParamIndex(*k): _as_int(v) for k, v in cycle.items() if v})
    if not gates:
        z = pc.pack(0, prep_u, n)
        return ExperimentSpec(n, complete_prep(z, n), [], z, 1, 1, target)
    walk = _euler(gateset, gates, prep_u)
    layers, meas, sign = compile_walk(gateset, [(i.gate, i.label) for i in walk], close=False)
    return ExperimentSpec(n, complete_prep(walk[0].label, n), layers, meas, 1, sign, target)


# ---------------------------------------------------------------------------
# plans


def _rooted(gateset: GateSet, gate: str, a: int) -> ParamVector:
    n = gateset.n
    t = pc.support_bits(gateset[gate].image(a), n)
    return ParamVector({ParamIndex("S", pc.support_bits(a, n)): 1,
                        ParamIndex("G", a, gate): 1, ParamIndex("M", t): 1})


def _spam_pair(u: int) -> ParamVector:
    return ParamVector({ParamIndex("S", u): 1, ParamIndex("M", u): 1})


def _candidates(Q: EmbeddingMap):
    """Preferred single-experiment cycles, then the full rooted cycle basis."""
    gs = Q.gateset
    n = Q.n
    if Q.kind != "custom":
        for u in Q.blocks[("M", "")].labels:
            yield _spam_pair(u)
        for g in gs:
            for a in Q.blocks[("G", g.name)].labels:
                yield _rooted(gs, g.name, a)
    pc.check_cap(n, "rooted cycle enumeration")
    for u in range(1, 1 << n):
        yield _spam_pair(u)
    for g in gs:
        for a in range(1, 1 << 2 * n):
            yield _rooted(gs, g.name, a)


class _Span:
    def __init__(self, Q: EmbeddingMap):
        self.pos = Q.position
        self.ech = Echelon()

    def add(self, vec: Mapping) -> bool:
        return self.ech.add({self.pos[k]: v for k, v in vec.items() if v})

    @property
    def rank(self) -> int:
        return self.ech.rank


def _learnable_dim(Q: EmbeddingMap) -> int:
    from .learnability import reduced_spaces
    return reduced_spaces(Q, gate_route="none").dims["L_R"]


def _fill(Q: EmbeddingMap, span: _Span, target_dim: int, specs, elements) -> None:
    seen = set()
    for cyc in _candidates(Q):
        if span.rank >= target_dim:
            break
        key = tuple(sorted(cyc.items()))
        if key in seen:
            continue
        seen.add(key)
        red = ParamVector(Q.pullback(cyc))
        if not red or not span.add(red):
            continue
        spec = compile_rooted_cycle(Q.gateset, cyc)
        elements.append(PlanElement(_name(cyc, Q.n), red, [len(specs)], "single"))
        specs.append(spec)
    if span.rank != target_dim:
        raise ArithmeticError(f"plan reaches rank {span.rank}, expected {target_dim}")


def _name(vec: Mapping, n: int) -> str:
    return "+".join(ParamIndex(*k).render(n) if v == 1 else f"{v}*{ParamIndex(*k).render(n)}"
                    for k, v in sorted(vec.items()))


def plan_simple(Q: EmbeddingMap, learnable_dim: int | None = None) -> ExperimentPlan:
    """One experiment per learnable-basis element, each with at most one gate layer."""
    dim = _learnable_dim(Q) if learnable_dim is None else learnable_dim
    specs: list[ExperimentSpec] = []
    elements: list[PlanElement] = []
    _fill(Q, _Span(Q), dim, specs, elements)
    return ExperimentPlan(Q.gateset, Q.ansatz, "simple", specs, elements)


def _check_relative(Q: EmbeddingMap) -> None:
    if Q.kind != "fully_local":
        raise RelativeUnavailable("relative-precision plans need the fully-local ansatz")
    for g in Q.gateset:
        if g.support_size() > 2:
            raise RelativeUnavailable(f"gate {g.name} acts on more than 2 qubits")


def germ_for(gateset: GateSet, witness: Mapping) -> tuple[list[Layer], int, int]:
    """Germ layers for a closed gate-only walk; returns ``(layers, label, pattern)``."""
    n = gateset.n
    counts = {ParamIndex(*k): _as_int(v) for k, v in witness.items() if v}
    first = min(counts)
    start = pc.support_bits(first.label, n)
    walk = _euler(gateset, counts, start)
    layers, label, _ = compile_walk(gateset, [(i.gate, i.label) for i in walk], close=True)
    return layers, label, start


def germ_family(gateset: GateSet, witness: Mapping, m_values: Sequence[int]) -> list[ExperimentSpec]:
    n = gateset.n
    layers, label, u = germ_for(gateset, witness)
    alpha = _spam_pair(u)
    out = []
    for m in m_values:
        target = ParamVector(alpha) + ParamVector({ParamIndex(*k): _as_int(v) * m for k, v in witness.items()})
        out.append(ExperimentSpec(n, complete_prep(label, n), layers, label, int(m), 1,
                                  ParamVector({k: v for k, v in target.items() if v})))
    return out


def plan_relative(Q: EmbeddingMap,
                  m_values: Sequence[int] | Mapping[int, Sequence[int]] = (0, 1, 2, 4, 8),
                  learnable_dim: int | None = None) -> ExperimentPlan:
    """Germ families for each gate-only reduced cycle, plus single experiments completing L_R.

    ``m_values`` is one list for every family or a mapping from family
    position to its own list.  Each list needs 0 and at least one positive depth.
    """
    from .gate_cycles import reduced_cycle_basis_gates

    _check_relative(Q)
    cycles = reduced_cycle_basis_gates(Q)
    specs: list[ExperimentSpec] = []
    elements: list[PlanElement] = []
    span = _Span(Q)
    for i, cyc in enumerate(cycles):
        ms = list(m_values[i] if isinstance(m_values, Mapping) else m_values)
        if 0 not in ms or not any(m > 0 for m in ms) or any(m < 0 for m in ms):
            raise ValueError("each family needs depth 0 and at least one positive depth")
        fam = germ_family(Q.gateset, cyc.witness, sorted(set(ms)))
        idx = list(range(len(specs), len(specs) + len(fam)))
        specs.extend(fam)
        span.add(cyc.vector)
        elements.append(PlanElement(_name(cyc.vector, Q.n), ParamVector(cyc.vector), idx,
                                    "ratio", ParamVector(cyc.witness)))
    dim = _learnable_dim(Q) if learnable_dim is None else learnable_dim
    _fill(Q, span, dim, specs, elements)
    return ExperimentPlan(Q.gateset, Q.ansatz, "relative", specs, elements)


# ---------------------------------------------------------------------------
# depth selection


class DepthChoice(NamedTuple):
    m: int
    capped: bool


def search_depth(f_hat_0: float, probe: Callable[[int], float],
                 threshold: float = math.exp(-1), cap: int = 1024) -> DepthChoice:
    """First m in 1, 2, 4, ... with probe(m) / f_hat_0 at or below ``threshold``."""
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    if cap < 1:
        raise ValueError("cap must be positive")
    m = 1
    while m < cap:
        if probe(m) / f_hat_0 <= threshold:
            return DepthChoice(m, False)
        m *= 2
    warnings.warn(f"depth search hit the cap m={cap}", RuntimeWarning, stacklevel=2)
    return DepthChoice(cap, True)


def choose_depths(Q: EmbeddingMap, probe: Callable[[ExperimentSpec], float],
                  threshold: float = math.exp(-1), cap: int = 1024) -> dict[int, list[int]]:
    """Per-family ``[0, m*]`` from pilot estimates ``probe(spec)`` (sign-compensated means)."""
    from .gate_cycles import reduced_cycle_basis_gates

    _check_relative(Q)
    out = {}
    for i, cyc in enumerate(reduced_cycle_basis_gates(Q)):
        fam = germ_family(Q.gateset, cyc.witness, [0])
        f0 = probe(fam[0])

        def at(m, w=cyc.witness):
            return probe(germ_family(Q.gateset, w, [m])[0])

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            choice = search_depth(f0, at, threshold, cap)
        out[i] = [0, choice.m]
    return out
