"""Learnable and gauge subspaces of complete and reduced noise models.

Everything here is exact rational arithmetic.  Three independent routes are
available for reduced models:

* ``brute``: kernel and row space of the rooted cycles pulled back through
  the embedding (generic, cap-guarded);
* ``analytic``: closed-form gauge bases built from subsystem depolarizing
  gauges for recognized ansatzes;
* ``dual``: the gauge space as the preimage of the cut space, solved over
  vertex potentials (one unknown per pattern).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from . import pauli_core as pc
from .clifford import GateSet, builtin_local, tensor_parallel
from .linalg import Echelon
from .noise_model import (
    EmbeddingMap, FactorSet, ParamVector, ReducedIndex,
    _IdentityBlock, _LocalGateBlock, _QuasiGateBlock, extended_support, is_covariant, is_covariant_exhaustive,
    mobius_inverse_gate, mobius_inverse_spam,
)
from .ptg import (
    PatternTransferGraph, build_ptg, canonical_cut, rooted_cycle, rooted_cycle_indices,
    sdg, spanning_tree_cycles,
)


class AnalyticUnavailable(ValueError):
    """No closed-form gauge basis is proven for this ansatz; use the brute-force route."""


# ---------------------------------------------------------------------------
# subspace containers


def _column_ids(keys: Iterable) -> dict:
    return {k: i for i, k in enumerate(sorted(set(keys)))}


@dataclass
class SubspaceBasis:
    """Linearly independent sparse vectors spanning a subspace.

    ``ambient`` is ``"complete"`` or ``"reduced"``.  ``sources`` optionally
    records, per vector, the complete cycle it was pulled back from.
    """

    ambient: str
    vectors: list[ParamVector]
    sources: list | None = None

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def rank(self) -> int:
        return len(self.vectors)

    def _echelon(self, extra: Iterable[Mapping] = ()) -> tuple[Echelon, dict]:
        extra = list(extra)
        ids = _column_ids(k for v in list(self.vectors) + extra for k in v)
        ech = Echelon()
        for v in self.vectors:
            ech.add({ids[k]: c for k, c in v.items()})
        return ech, ids

    def contains(self, vec: Mapping) -> bool:
        ech, ids = self._echelon([vec])
        return ech.contains({ids[k]: c for k, c in vec.items()})

    def same_span(self, other: "SubspaceBasis | Sequence[Mapping]") -> bool:
        others = other.vectors if isinstance(other, SubspaceBasis) else list(other)
        if len(others) != len(self.vectors):
            ids = _column_ids(k for v in others for k in v)
            ech = Echelon()
            for v in others:
                ech.add({ids[k]: c for k, c in v.items()})
            if ech.rank != self.rank:
                return False
        ech, ids = self._echelon(others)
        return all(ech.contains({ids[k]: c for k, c in v.items()}) for v in others)

    def verify_independent(self) -> bool:
        ech, _ = self._echelon()
        return ech.rank == len(self.vectors)

    def orthogonal_to(self, other: "SubspaceBasis") -> bool:
        return all(u.dot(v) == 0 for u in self.vectors for v in other.vectors)

    def to_json(self, n: int) -> list[dict]:
        return [v.to_json(n) for v in self.vectors]


@dataclass
class LearnabilityReport:
    n: int
    ansatz: str
    dims: dict[str, int | None]
    method: str
    gauge: SubspaceBasis | None = None
    learnable: SubspaceBasis | None = None
    gate_learnable: SubspaceBasis | None = None
    notes: list[str] = field(default_factory=list)

    KEYS = ("X_R", "L_R", "T_R", "X_R^G", "L_R^G")
    TABLE = ("X_R", "L_R", "X_R^G", "L_R^G")

    def row(self) -> str:
        """Dimensions in table order: X_R, L_R, X_R^G, L_R^G (NA when unavailable)."""
        return " ".join("NA" if self.dims.get(k) is None else str(self.dims[k]) for k in self.TABLE)

    def to_json(self) -> dict:
        out = {"n": self.n, "ansatz": self.ansatz,
               "dims": {k: self.dims.get(k) for k in self.KEYS},
               "method": self.method, "notes": list(self.notes), "bases": {}}
        for key, basis in (("T_R", self.gauge), ("L_R", self.learnable),
                           ("L_R^G", self.gate_learnable)):
            if basis is not None:
                out["bases"][key] = basis.to_json(self.n)
        return out


# ---------------------------------------------------------------------------
# complete model


def complete_spaces(ptg: PatternTransferGraph) -> tuple[SubspaceBasis, SubspaceBasis]:
    """Learnable space (rooted cycles) and gauge space (subsystem depolarizing gauges)."""
    pc.check_cap(ptg.n, "complete learnability")
    cycles = SubspaceBasis("complete", rooted_cycle_basis_list(ptg))
    gauges = SubspaceBasis("complete", [sdg(ptg, s) for s in range(1, 1 << ptg.n)])
    return cycles, gauges


def rooted_cycle_basis_list(ptg: PatternTransferGraph) -> list[ParamVector]:
    return [rooted_cycle(ptg, i) for i in rooted_cycle_indices(ptg)]


# ---------------------------------------------------------------------------
# brute force over pulled-back rooted cycles


def _elimination_order(Q: EmbeddingMap) -> list[ReducedIndex]:
    # gate columns first, heavy labels first: keeps fill-in small because a
    # pulled-back gate cycle's heaviest term is usually unique to it
    n = Q.n

    def key(r: ReducedIndex):
        if r.kind == "G":
            return (0, -pc.weight(r.label, n), Q.position[r])
        return (1, -pc.popcount(r.label), Q.position[r])

    return sorted(Q.indices, key=key)


def _pulled_rows(Q: EmbeddingMap, ptg: PatternTransferGraph, cycles):
    for src in cycles:
        yield src, Q.pullback(src)


def _row_space_and_kernel(Q: EmbeddingMap, rows, want_kernel: bool = True):
    order = _elimination_order(Q)
    ids = {r: i for i, r in enumerate(order)}
    ech = Echelon()
    basis, sources = [], []
    for src, vec in rows:
        if not vec:
            continue
        if ech.add({ids[k]: v for k, v in vec.items()}):
            basis.append(ParamVector(vec))
            sources.append(src)
    kernel = None
    if want_kernel:
        kernel = []
        for kv in ech.kernel(range(len(order))):
            kernel.append(ParamVector({order[i]: v for i, v in kv.items()}))
        kernel.sort(key=lambda v: min(Q.position[k] for k in v))
    return basis, sources, kernel


def brute_force_spaces(Q: EmbeddingMap) -> tuple[SubspaceBasis, SubspaceBasis]:
    """(L_R, T_R) as row space and kernel of the pulled-back rooted cycle basis."""
    pc.check_cap(Q.n, "brute-force learnability")
    ptg = build_ptg(Q.gateset)
    rows = ((i, Q.pullback(rooted_cycle(ptg, i))) for i in rooted_cycle_indices(ptg))
    basis, sources, kernel = _row_space_and_kernel(Q, rows)
    sources = [rooted_cycle(ptg, i) for i in sources]
    return SubspaceBasis("reduced", basis, sources), SubspaceBasis("reduced", kernel)


# ---------------------------------------------------------------------------
# dual route: gauge vectors as preimages of cuts


def _cut_residuals(Q: EmbeddingMap, ptg: PatternTransferGraph):
    out = {}
    for u in range(1, 1 << Q.n):
        r, res = Q.left_inverse(canonical_cut(ptg, u))
        out[u] = (r, res)
    return out


def _potential_kernel(residuals: Mapping[int, ParamVector], keep) -> list[dict]:
    """Potentials y (one per pattern) with sum_u y_u * residual_u = 0 on kept entries."""
    rows: dict = {}
    for u, res in residuals.items():
        for idx, v in res.items():
            if keep(idx):
                rows.setdefault(idx, {})[u] = v
    ech = Echelon()
    for row in rows.values():
        ech.add(row)
    return ech.kernel(residuals.keys())


def dual_gauge_space(Q: EmbeddingMap) -> SubspaceBasis:
    pc.check_cap(Q.n, "dual gauge computation")
    ptg = build_ptg(Q.gateset)
    data = _cut_residuals(Q, ptg)
    ys = _potential_kernel({u: res for u, (_, res) in data.items()}, lambda idx: True)
    out = []
    for y in ys:
        acc: dict = {}
        for u, c in y.items():
            for k, v in data[u][0].items():
                acc[k] = acc.get(k, 0) + c * v
        out.append(ParamVector(acc))
    return SubspaceBasis("reduced", out)


def _gate_pattern_components(gateset: GateSet) -> int:
    n = gateset.n
    parent = list(range(1 << n))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for g in gateset:
        for a in range(1, 4 ** n):
            s, t = find(pc.support_bits(a, n)), find(pc.support_bits(g.image(a), n))
            if s != t:
                parent[s] = t
    return len({find(v) for v in range(1, 1 << n)})


def gate_learnable_dim_dual(Q: EmbeddingMap) -> int:
    """dim L_R^G from potentials whose gate-only cut lies in the image of Q."""
    if not Q.layer_uncorrelated:
        raise ValueError("the potential route needs a layer-uncorrelated embedding")
    pc.check_cap(Q.n, "dual gate-learnable computation")
    ptg = build_ptg(Q.gateset)
    data = _cut_residuals(Q, ptg)
    ys = _potential_kernel({u: res for u, (_, res) in data.items()},
                           lambda idx: idx.kind == "G")
    comps = _gate_pattern_components(Q.gateset)
    x_g = Q.block_dims()["G"]
    return x_g - (len(ys) - comps)


# ---------------------------------------------------------------------------
# gate-only learnable space


def gate_learnable_space(Q: EmbeddingMap) -> SubspaceBasis:
    """Pullback of the gate-only cycle space, with the cycles used as sources."""
    pc.check_cap(Q.n, "gate-learnable space")
    ptg = build_ptg(Q.gateset)
    cycles = spanning_tree_cycles(ptg, gates_only=True)
    rows = ((c, Q.pullback(c)) for c in cycles)
    basis, sources, _ = _row_space_and_kernel(Q, rows, want_kernel=False)
    return SubspaceBasis("reduced", basis, sources)


# ---------------------------------------------------------------------------
# analytic gauge bases


def _nn_ring(n: int) -> FactorSet:
    return FactorSet.from_maximal(n, [[j, j % n + 1] for j in range(1, n + 1)])


def nn_cz_layers(n: int) -> tuple:
    """The even and odd nearest-neighbour CZ layers on a ring of ``n`` qubits."""
    if n < 4 or n % 2:
        raise ValueError("nearest-neighbour CZ layers need an even n >= 4")
    cz = builtin_local("CZ")
    even = tensor_parallel([(cz, [2 * k - 1, 2 * k]) for k in range(1, n // 2 + 1)], n, "Ge")
    odd = tensor_parallel([(cz, [2 * k, 2 * k % n + 1]) for k in range(1, n // 2 + 1)], n, "Go")
    return even, odd


def is_nn_cz_structure(Q: EmbeddingMap) -> bool:
    """Even/odd CZ ring layers with every factor set equal to the nearest-neighbour pairs."""
    n = Q.n
    if Q.kind != "quasi_local" or n < 4 or n % 2 or len(Q.gateset) != 2:
        return False
    even, odd = nn_cz_layers(n)
    imgs = sorted(g.images for g in Q.gateset)
    if imgs != sorted([even.images, odd.images]):
        return False
    ring = _nn_ring(n)
    a = Q.ansatz
    return a.omega_s == ring and a.omega_m == ring and all(
        a.omega_gate[g] == ring for g in Q.gateset.names())


def _covariant(omega: FactorSet, g) -> bool:
    if is_covariant(omega, g):
        return True
    return g.n <= pc.get_n_max() and is_covariant_exhaustive(omega, g)


def analytic_gauge_subsets(Q: EmbeddingMap) -> tuple[list[int], str]:
    """Subsets whose depolarizing gauges span the embedded gauge space, with the reason."""
    n = Q.n
    kind = Q.kind
    if kind == "complete":
        return list(range(1, 1 << n)), "complete model: every subsystem gauge"
    if kind == "fully_local":
        return [pc.qubit_bit(j, n) for j in range(1, n + 1)], "fully-local: single-qubit gauges"
    if kind == "quasi_local":
        a = Q.ansatz
        problems = []
        if not a.omega_s.issubset(a.omega_m):
            problems.append("state-preparation factors are not all measurement factors")
        for g in Q.gateset:
            if not _covariant(a.omega_gate[g.name], g):
                problems.append(f"factor set of {g.name} is not covariant")
            for nu in a.omega_s:
                if nu not in a.omega_gate[g.name] and extended_support(g, nu) != nu:
                    problems.append(
                        f"factor {pc.qubits_of(nu, n)} is neither a factor of {g.name} nor closed under it")
                    break
        if not problems:
            return sorted(a.omega_s), "quasi-local: one gauge per state-preparation factor"
        if is_nn_cz_structure(Q):
            return [pc.qubit_bit(j, n) for j in range(1, n + 1)], \
                "nearest-neighbour CZ structure: single-qubit gauges"
        raise AnalyticUnavailable("analytic gauge basis refused (" + "; ".join(problems)
                                  + "); use the brute-force route")
    raise AnalyticUnavailable(f"no analytic gauge basis for a {kind} ansatz; use the brute-force route")


def _sdg_entry_gate(g, a: int, s: int, n: int) -> int:
    return int(bool(pc.support_bits(g.image(a), n) & s)) - int(bool(pc.support_bits(a, n) & s))


def reduced_sdg(Q: EmbeddingMap, s: int) -> ParamVector:
    """Reduced vector r with Q(r) equal to the depolarizing gauge on ``s``.

    Only labels the ansatz actually parametrizes are touched, so this works
    past the enumeration cap for local ansatzes.  The caller is responsible
    for ``s`` being a gauge of the ansatz (see :func:`analytic_gauge_subsets`).
    """
    n = Q.n
    out: dict = {}
    for (kind, gname), blk in Q.blocks.items():
        if kind in ("S", "M"):
            sign = 1 if kind == "S" else -1
            if isinstance(blk, _IdentityBlock):
                r = {u: sign for u in range(1, 1 << n) if u & s}
            else:
                x = {u: sign for u in blk.labels if u & s}
                r = mobius_inverse_spam(x, n, blk.omega)
            for lab, v in r.items():
                out[ReducedIndex(kind, lab, "")] = v
            continue
        g = Q.gateset[gname]
        if isinstance(blk, _IdentityBlock):
            pc.check_cap(n, "complete gate block")
            r = {a: _sdg_entry_gate(g, a, s, n) for a in range(1, 4 ** n)}
        elif isinstance(blk, _LocalGateBlock):
            r = {b: _sdg_entry_gate(g, b, s, n) for b in blk.labels}
        elif isinstance(blk, _QuasiGateBlock):
            x = {a: _sdg_entry_gate(g, a, s, n) for a in blk.labels}
            r = mobius_inverse_gate(x, n, blk.omega)
        else:
            raise TypeError(f"unsupported block {type(blk).__name__}")
        for lab, v in r.items():
            if v:
                out[ReducedIndex("G", lab, gname)] = v
    return ParamVector(out)


def analytic_gauge_basis(Q: EmbeddingMap, verify: bool | None = None) -> SubspaceBasis:
    """Closed-form gauge basis; raises :class:`AnalyticUnavailable` when not proven.

    With ``verify`` (default: whenever enumeration is allowed) each vector is
    checked to embed onto its depolarizing gauge and to be annihilated by
    every rooted cycle.
    """
    subsets, _ = analytic_gauge_subsets(Q)
    vecs = [reduced_sdg(Q, s) for s in subsets]
    if verify is None:
        verify = Q.n <= pc.get_n_max()
    if verify:
        ptg = build_ptg(Q.gateset)
        cycles = rooted_cycle_basis_list(ptg)
        for s, r in zip(subsets, vecs):
            x = Q.embed(r)
            if x != sdg(ptg, s):
                raise ArithmeticError(f"gauge on {pc.pattern_str(s, Q.n)} is not in the image of the embedding")
            if any(c.dot(x) != 0 for c in cycles):
                raise ArithmeticError("analytic gauge vector is observable")
    return SubspaceBasis("reduced", vecs)


# ---------------------------------------------------------------------------
# reports


def _count_dims(Q: EmbeddingMap) -> tuple[int, int]:
    bd = Q.block_dims()
    return Q.dim, bd["G"]


def reduced_spaces(Q: EmbeddingMap, method: str = "auto", gate_route: str = "auto") -> LearnabilityReport:
    """Learnability report for the reduced model given by ``Q``.

    ``method``: ``auto`` runs brute force when enumeration is allowed and the
    analytic basis whenever it is proven, cross-checking spans when both run;
    ``brute`` or ``analytic`` force one route.  ``gate_route`` picks how
    dim L_R^G is found: ``primal`` (pulled-back gate cycles), ``dual``
    (potentials), ``auto`` (primal), or ``none``.
    """
    if method not in ("auto", "brute", "analytic"):
        raise ValueError(f"unknown method {method!r}")
    n = Q.n
    x_r, x_g = _count_dims(Q)
    within_cap = n <= pc.get_n_max()
    notes: list[str] = []
    analytic = brute_T = brute_L = None
    if method in ("auto", "analytic"):
        try:
            analytic = analytic_gauge_basis(Q)
        except AnalyticUnavailable as exc:
            if method == "analytic":
                raise
            notes.append(str(exc))
    if method in ("auto", "brute"):
        if within_cap:
            brute_L, brute_T = brute_force_spaces(Q)
        elif method == "brute" or analytic is None:
            pc.check_cap(n, "brute-force learnability")
    used = []
    if analytic is not None:
        used.append("analytic")
    if brute_T is not None:
        used.append("brute-force")
    if analytic is not None and brute_T is not None:
        if not analytic.same_span(brute_T):
            raise ArithmeticError("analytic and brute-force gauge spaces differ")
        notes.append("analytic gauge basis matches brute-force kernel")
    gauge = brute_T if brute_T is not None else analytic
    dims: dict[str, int | None] = {"X_R": x_r, "T_R": gauge.rank, "L_R": x_r - gauge.rank,
                                   "X_R^G": x_g, "L_R^G": None}
    gate_basis = None
    if gate_route != "none" and within_cap:
        if gate_route == "dual":
            dims["L_R^G"] = gate_learnable_dim_dual(Q)
            used.append("dual(L_R^G)")
        else:
            gate_basis = gate_learnable_space(Q)
            dims["L_R^G"] = gate_basis.rank
    elif gate_route != "none":
        notes.append("L_R^G unavailable beyond the enumeration cap")
    return LearnabilityReport(n, Q.kind, dims, "+".join(used), gauge, brute_L, gate_basis, notes)


def is_learnable(Q: EmbeddingMap, f: Mapping, report: LearnabilityReport | None = None) -> bool:
    """Whether the reduced covector ``f`` is orthogonal to the whole gauge space."""
    if report is None:
        report = reduced_spaces(Q, gate_route="none")
    f = {ReducedIndex(*k): v for k, v in f.items()}
    return all(sum(Fraction(v) * Fraction(t.get(k, 0)) for k, v in f.items()) == 0
               for t in report.gauge.vectors)
