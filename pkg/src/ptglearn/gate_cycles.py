"""Reduced cycle bases of the gate-only learnable space for fully-local noise on 2-qubit gates.

Each reduced gate parameter ``(G, b)`` (``b`` a Pauli on the gate's support)
is treated as a directed edge between local support patterns.  The search
runs in two stages: cycles inside one support, then cycles that cross
supports found by chasing boundaries.  Every emitted vector carries a
complete-model witness: a gate-only closed walk whose pullback is the vector.
"""

from __future__ import annotations

from collections import deque
from fractions import Fraction
from math import lcm
from typing import NamedTuple

from . import pauli_core as pc
from .linalg import Echelon
from .noise_model import EmbeddingMap, ParamIndex, ParamVector, ReducedIndex


class ReducedCycle(NamedTuple):
    vector: ParamVector
    witness: ParamVector
    kind: str


class _Edge(NamedTuple):
    rid: ReducedIndex
    support: int
    src: int
    tgt: int


def _check(Q: EmbeddingMap) -> None:
    if Q.kind != "fully_local":
        raise ValueError("reduced cycle search needs the fully-local ansatz")
    for g in Q.gateset:
        if g.support_size() > 2:
            raise ValueError(f"gate {g.name} acts on {g.support_size()} qubits; only 2-qubit gates are supported")


def boundary(Q: EmbeddingMap, r) -> ParamVector:
    """Boundary of a reduced gate-block vector, as a state-preparation vector."""
    _check(Q)
    n = Q.n
    out: dict = {}
    for rid, v in r.items():
        rid = ReducedIndex(*rid)
        if rid.kind != "G":
            raise ValueError("boundary is defined on gate parameters only")
        g = Q.gateset[rid.gate]
        src = pc.support_bits(rid.label, n)
        tgt = pc.support_bits(g.image(rid.label), n)
        for j in pc.qubits_of(g.support, n):
            bit = pc.qubit_bit(j, n)
            d = int(bool(src & bit)) - int(bool(tgt & bit))
            if d:
                key = ReducedIndex("S", bit, "")
                out[key] = out.get(key, 0) + d * v
    return ParamVector(out)


def _edges(Q: EmbeddingMap) -> list[_Edge]:
    n = Q.n
    out = []
    for r in Q.gate_indices():
        g = Q.gateset[r.gate]
        out.append(_Edge(r, g.support, pc.support_bits(r.label, n),
                         pc.support_bits(g.image(r.label), n)))
    return out


def _boundary_vec(e: _Edge, n: int) -> dict[int, int]:
    out = {}
    for j in pc.qubits_of(e.support, n):
        bit = pc.qubit_bit(j, n)
        d = int(bool(e.src & bit)) - int(bool(e.tgt & bit))
        if d:
            out[j] = d
    return out


def _find_path(edges: list[_Edge], start: int, goal: int) -> list[_Edge] | None:
    """Directed path start -> goal (BFS; edges tried in the given order)."""
    if start == goal:
        return []
    prev: dict[int, tuple[int, _Edge]] = {}
    seen = {start}
    q = deque([start])
    while q:
        v = q.popleft()
        for e in edges:
            if e.src == v and e.tgt not in seen:
                seen.add(e.tgt)
                prev[e.tgt] = (v, e)
                if e.tgt == goal:
                    path = []
                    w = goal
                    while w != start:
                        pv, pe = prev[w]
                        path.append(pe)
                        w = pv
                    return path[::-1]
                q.append(e.tgt)
    return None


# ---------------------------------------------------------------------------
# witnesses


def _realize_walk(Q: EmbeddingMap, terms: list[_Edge]) -> ParamVector:
    """Order the terms into a closed walk on full patterns and lift each to a complete label."""
    n = Q.n
    k = len(terms)
    order: list[int] = []
    used = [False] * k

    def local_bits(pattern, support):
        return {j: int(bool(pattern & pc.qubit_bit(j, n))) for j in pc.qubits_of(support, n)}

    req = [local_bits(e.src, e.support) for e in terms]
    out = [local_bits(e.tgt, e.support) for e in terms]

    def dfs(initial: dict, current: dict) -> dict | None:
        if len(order) == k:
            return initial if all(current[j] == initial[j] for j in current) else None
        tried = set()
        for i in range(k):
            if used[i] or terms[i] in tried:
                continue
            if any(j in current and current[j] != b for j, b in req[i].items()):
                continue
            tried.add(terms[i])
            ini, cur = dict(initial), dict(current)
            for j, b in req[i].items():
                if j not in cur:
                    ini[j] = cur[j] = b
            cur.update(out[i])
            used[i] = True
            order.append(i)
            res = dfs(ini, cur)
            if res is not None:
                return res
            order.pop()
            used[i] = False
            if not order:
                break  # the walk is cyclic: fixing the first term loses nothing
        return None

    initial = dfs({}, {})
    if initial is None:
        raise ArithmeticError("terms do not form a closed walk on patterns")
    bits = {j: initial.get(j, 0) for j in range(1, n + 1)}
    witness: dict[ParamIndex, int] = {}
    for i in order:
        e = terms[i]
        pad = 0
        for j in range(1, n + 1):
            bit = pc.qubit_bit(j, n)
            if not e.support & bit and bits[j]:
                pad |= pc.pack(bit, 0, n)
        a = e.rid.label | pad
        idx = ParamIndex("G", a, e.rid.gate)
        witness[idx] = witness.get(idx, 0) + 1
        for j, b in out[i].items():
            bits[j] = b
    return ParamVector(witness)


def _walk_is_closed(Q: EmbeddingMap, witness: ParamVector) -> bool:
    n = Q.n
    bal: dict[int, int] = {}
    for idx, v in witness.items():
        g = Q.gateset[idx.gate]
        s, t = pc.support_bits(idx.label, n), pc.support_bits(g.image(idx.label), n)
        bal[s] = bal.get(s, 0) + v
        bal[t] = bal.get(t, 0) - v
    return all(v == 0 for v in bal.values())


def _emit(Q: EmbeddingMap, terms: list[_Edge], kind: str) -> ReducedCycle:
    vec: dict = {}
    for e in terms:
        vec[e.rid] = vec.get(e.rid, 0) + 1
    vec = ParamVector(vec)
    witness = _realize_walk(Q, terms)
    if Q.pullback(witness) != vec or not _walk_is_closed(Q, witness):
        raise ArithmeticError("witness does not realize the reduced cycle")
    return ReducedCycle(vec, witness, kind)


# ---------------------------------------------------------------------------
# the search


def reduced_cycle_basis_gates(Q: EmbeddingMap) -> list[ReducedCycle]:
    """Basis of the gate-only learnable space made of reduced cycles with witnesses."""
    _check(Q)
    n = Q.n
    pos = Q.position
    edges = _edges(Q)
    canon = lambda e: pos[e.rid]  # noqa: E731
    groups: dict[int, list[_Edge]] = {}
    for e in sorted(edges, key=canon):
        groups.setdefault(e.support, []).append(e)

    result: list[ReducedCycle] = []
    remaining: list[_Edge] = []
    partner: dict[_Edge, _Edge] = {}

    # stage 1: cycles inside one support
    for sup, group in groups.items():
        loops = [e for e in group if e.src == e.tgt]
        for e in loops:
            result.append(_emit(Q, [e], "self-loop"))
        moving = [e for e in group if e.src != e.tgt]
        if not moving:
            continue
        tree = set()
        qs = pc.qubits_of(sup, n)
        if len(qs) == 2:
            J, K = pc.qubit_bit(qs[0], n), pc.qubit_bit(qs[1], n)
            parent = {K: K, J: J, J | K: J | K}

            def find(v):
                while parent[v] != v:
                    v = parent[v]
                return v

            for u, v in ((K, J | K), (J, J | K), (K, J)):
                cand = [e for e in moving if {e.src, e.tgt} == {u, v}]
                if cand and find(u) != find(v):
                    parent[find(u)] = find(v)
                    tree.add(cand[0])
        A = list(moving)
        for e in moving:
            if e in tree:
                continue
            others = [f for f in A if f != e]
            path = _find_path(others, e.tgt, e.src)
            if path is None:
                continue  # left for the cross-support stage
            if len(path) == 1:
                partner.setdefault(e, path[0])
                partner.setdefault(path[0], e)
            result.append(_emit(Q, [e] + path, "local"))
            A.remove(e)
        remaining.extend(A)

    def reverse_of(e: _Edge) -> _Edge:
        if e in partner:
            return partner[e]
        for f in groups[e.support]:
            if f.src == e.tgt and f.tgt == e.src:
                return f
        raise ArithmeticError("edge has no reverse in its support")

    # stage 2: cross-support cycles from boundary chasing
    bvec = {e: _boundary_vec(e, n) for e in edges}
    while True:
        A = sorted(remaining, key=canon)
        ech = Echelon()
        rows: dict[int, dict[int, int]] = {}
        for i, e in enumerate(A):
            for j, d in bvec[e].items():
                rows.setdefault(j, {})[i] = d
        for row in rows.values():
            ech.add(row)
        kernel = ech.kernel(range(len(A)))
        if not kernel:
            break
        kv = kernel[0]
        den = lcm(*(Fraction(v).denominator for v in kv.values()))
        coeff = {A[i]: int(Fraction(v) * den) for i, v in kv.items()}
        terms, kind = _classify(coeff, bvec, canon)
        signed = [(e, s) for e, s in terms]
        pivot = min((e for e, _ in signed), key=canon)
        lifted = [e if s > 0 else reverse_of(e) for e, s in signed]
        result.append(_emit(Q, lifted, kind))
        remaining.remove(pivot)
    return result


def _classify(coeff: dict[_Edge, int], bvec, canon) -> tuple[list[tuple[_Edge, int]], str]:
    """Pick a zero-boundary signed sub-sum of a kernel vector: paired, chain or loop."""
    items = sorted(coeff.items(), key=lambda kv: canon(kv[0]))
    sgn = {e: (1 if v > 0 else -1) for e, v in items}
    signed_b = {e: {j: d * sgn[e] for j, d in bvec[e].items()} for e, _ in items}
    type1 = [e for e, _ in items if len(bvec[e]) == 1]
    by_qubit: dict[int, list[_Edge]] = {}
    for e in type1:
        (j,) = bvec[e]
        by_qubit.setdefault(j, []).append(e)
    for j in sorted(by_qubit):
        es = by_qubit[j]
        if len(es) >= 2:
            a, b = es[0], es[1]
            s = -1 if bvec[a][j] == bvec[b][j] else 1
            return [(a, 1), (b, s)], "paired"
    type2 = [e for e, _ in items if len(bvec[e]) == 2]
    if not type2:
        raise ArithmeticError("kernel vector without a resolvable boundary structure")
    start = type2[0]

    def pos_entry(e):
        return next(j for j, d in signed_b[e].items() if d > 0)

    def neg_entry(e):
        return next(j for j, d in signed_b[e].items() if d < 0)

    def chase(first: _Edge, forward: bool, avoid=()):
        """Follow matching entries; returns (terms, loop_start_index or None)."""
        chain = [first]
        entries = [pos_entry(first) if forward else neg_entry(first)]
        used = {first, *avoid}
        while True:
            j = entries[-1]
            want = -1 if forward else 1
            nxt = next((e for e, _ in items if e not in used and signed_b[e].get(j) == want), None)
            if nxt is None:
                raise ArithmeticError("boundary chase found no continuation")
            chain.append(nxt)
            used.add(nxt)
            if len(bvec[nxt]) == 1:
                return chain, None
            j2 = pos_entry(nxt) if forward else neg_entry(nxt)
            back = neg_entry(first) if forward else pos_entry(first)
            if j2 == back:
                return chain, 0
            if j2 in entries:
                return chain, entries.index(j2) + 1
            entries.append(j2)

    fwd, loop_at = chase(start, True)
    if loop_at is not None:
        return [(e, sgn[e]) for e in fwd[loop_at:]], "loop"
    bwd, loop_at = chase(start, False, fwd[1:])
    if loop_at is not None:
        return [(e, sgn[e]) for e in bwd[loop_at:]], "loop"
    chain = bwd[:0:-1] + fwd
    return [(e, sgn[e]) for e in chain], "chain"
