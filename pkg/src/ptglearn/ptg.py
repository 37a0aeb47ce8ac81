"""Pattern transfer graphs and their distinguished cycle and cut vectors.

Vertex 0 is the root (state preparation and measurement); vertex ``u`` for
``u = 1 .. 2**n - 1`` is the support pattern ``u``.  Every complete parameter
is one directed edge: preparation ``root -> u``, measurement ``u -> root``
and gate label ``a`` of gate ``G``: ``pt(a) -> pt(G(a))``.
"""

from __future__ import annotations

from collections import deque
from typing import Iterable, Iterator, Mapping, NamedTuple

from . import pauli_core as pc
from .clifford import GateSet
from .noise_model import CompleteSpace, ParamIndex, ParamVector

ROOT = 0


class Edge(NamedTuple):
    index: ParamIndex
    src: int
    tgt: int


class PatternTransferGraph:
    def __init__(self, gateset: GateSet):
        pc.check_cap(gateset.n, "pattern transfer graph")
        self.gateset = gateset
        self.n = gateset.n
        self.space = CompleteSpace(gateset)

    @property
    def num_vertices(self) -> int:
        return 1 << self.n

    @property
    def num_edges(self) -> int:
        return self.space.dim

    def vertices(self) -> range:
        return range(1 << self.n)

    def edge(self, idx: ParamIndex) -> Edge:
        idx = ParamIndex(*idx)
        if idx.kind == "S":
            return Edge(idx, ROOT, idx.label)
        if idx.kind == "M":
            return Edge(idx, idx.label, ROOT)
        g = self.gateset[idx.gate]
        n = self.n
        return Edge(idx, pc.support_bits(idx.label, n), pc.support_bits(g.image(idx.label), n))

    def edges(self, gates_only: bool = False) -> Iterator[Edge]:
        n = self.n
        if not gates_only:
            for u in range(1, 1 << n):
                yield Edge(ParamIndex("S", u), ROOT, u)
            for u in range(1, 1 << n):
                yield Edge(ParamIndex("M", u), u, ROOT)
        for g in self.gateset:
            for a in range(1, 1 << 2 * n):
                yield Edge(ParamIndex("G", a, g.name), pc.support_bits(a, n),
                           pc.support_bits(g.image(a), n))

    def gate_edges(self, name: str) -> Iterator[Edge]:
        g = self.gateset[name]
        n = self.n
        for a in range(1, 1 << 2 * n):
            yield Edge(ParamIndex("G", a, name), pc.support_bits(a, n),
                       pc.support_bits(g.image(a), n))

    def is_strongly_connected(self) -> bool:
        # root reaches and is reached by every pattern through SPAM edges
        return self.n >= 1

    def to_dot(self, name: str = "ptg") -> str:
        """GraphViz DOT text; parallel edges are merged into one multi-label edge."""
        n = self.n
        groups: dict[tuple[int, int], list[str]] = {}
        for e in self.edges():
            groups.setdefault((e.src, e.tgt), []).append(e.index.render(n))

        def vname(v):
            return "root" if v == ROOT else pc.pattern_str(v, n)

        lines = [f"digraph {name} {{", '  rankdir=LR;',
                 '  root [shape=doublecircle, style=filled, fillcolor="#f4c542", label="root"];']
        for v in range(1, 1 << n):
            lines.append(f'  "{vname(v)}" [shape=circle];')
        for (s, t), labels in sorted(groups.items()):
            lab = "\\n".join(labels)
            lines.append(f'  "{vname(s)}" -> "{vname(t)}" [label="{lab}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_ptg(gateset: GateSet) -> PatternTransferGraph:
    return PatternTransferGraph(gateset)


# ---------------------------------------------------------------------------
# distinguished vectors


def rooted_cycle(ptg: PatternTransferGraph, idx: ParamIndex) -> ParamVector:
    """The rooted cycle through the edge ``idx`` (SPAM pair for S/M indices)."""
    idx = ParamIndex(*idx)
    if idx.kind in ("S", "M"):
        u = idx.label
        return ParamVector({ParamIndex("S", u): 1, ParamIndex("M", u): 1})
    e = ptg.edge(idx)
    return ParamVector({ParamIndex("S", e.src): 1, idx: 1, ParamIndex("M", e.tgt): 1})


def rooted_cycle_indices(ptg: PatternTransferGraph) -> Iterator[ParamIndex]:
    """Edge labels generating the rooted cycle basis, in canonical order."""
    for u in range(1, 1 << ptg.n):
        yield ParamIndex("S", u)
    for g in ptg.gateset.names():
        for a in range(1, 1 << 2 * ptg.n):
            yield ParamIndex("G", a, g)


def rooted_cycle_basis(ptg: PatternTransferGraph) -> list[ParamVector]:
    return [rooted_cycle(ptg, i) for i in rooted_cycle_indices(ptg)]


def cut_vector(ptg: PatternTransferGraph, side: Iterable[int]) -> ParamVector:
    """+1 on edges leaving ``side``, -1 on edges entering it."""
    side = set(side)
    out = {}
    for e in ptg.edges():
        a, b = e.src in side, e.tgt in side
        if a and not b:
            out[e.index] = 1
        elif b and not a:
            out[e.index] = -1
    return ParamVector(out)


def sdg(ptg: PatternTransferGraph, s: int) -> ParamVector:
    """Subsystem depolarizing gauge on the qubit subset ``s`` (pattern bits)."""
    n = ptg.n
    if not 0 < s < (1 << n):
        raise ValueError("subsystem must be a non-empty pattern")
    out = {}
    for u in range(1, 1 << n):
        if u & s:
            out[ParamIndex("S", u)] = 1
            out[ParamIndex("M", u)] = -1
    for g in ptg.gateset:
        for a in range(1, 1 << 2 * n):
            v = int(bool(pc.support_bits(g.image(a), n) & s)) - int(bool(pc.support_bits(a, n) & s))
            if v:
                out[ParamIndex("G", a, g.name)] = v
    return ParamVector(out)


def canonical_cut(ptg: PatternTransferGraph, u: int) -> ParamVector:
    """Cut isolating the single pattern vertex ``u``."""
    if not 0 < u < (1 << ptg.n):
        raise ValueError("vertex must be a non-empty pattern")
    n = ptg.n
    out = {ParamIndex("S", u): -1, ParamIndex("M", u): 1}
    for g in ptg.gateset:
        for a in range(1, 1 << 2 * n):
            s, t = pc.support_bits(a, n), pc.support_bits(g.image(a), n)
            if s == t:
                continue
            if s == u:
                out[ParamIndex("G", a, g.name)] = 1
            elif t == u:
                out[ParamIndex("G", a, g.name)] = -1
    return ParamVector(out)


def flow_imbalance(ptg: PatternTransferGraph, vec: Mapping) -> dict[int, object]:
    """Net outflow minus inflow at each vertex (empty for flow-conserving vectors)."""
    bal: dict[int, object] = {}
    for idx, v in vec.items():
        e = ptg.edge(idx)
        bal[e.src] = bal.get(e.src, 0) + v
        bal[e.tgt] = bal.get(e.tgt, 0) - v
    return {k: v for k, v in bal.items() if v != 0}


def is_flow_conserving(ptg: PatternTransferGraph, vec: Mapping) -> bool:
    return not flow_imbalance(ptg, vec)


def root_visits(ptg: PatternTransferGraph, vec: Mapping) -> int:
    """Total weight on edges leaving the root."""
    return sum(v for idx, v in vec.items() if ParamIndex(*idx).kind == "S")


# ---------------------------------------------------------------------------
# textbook oracles


def spanning_tree_cycles(ptg: PatternTransferGraph, gates_only: bool = False) -> list[ParamVector]:
    """Fundamental cycles of a BFS spanning forest (undirected, signed)."""
    edges = list(ptg.edges(gates_only=gates_only))
    adj: dict[int, list[tuple[int, int]]] = {}
    for i, e in enumerate(edges):
        if e.src == e.tgt:
            continue
        adj.setdefault(e.src, []).append((e.tgt, i))
        adj.setdefault(e.tgt, []).append((e.src, i))
    parent: dict[int, tuple[int, int] | None] = {}
    tree = set()
    for start in sorted(adj):
        if start in parent:
            continue
        parent[start] = None
        q = deque([start])
        while q:
            v = q.popleft()
            for w, i in adj[v]:
                if w not in parent:
                    parent[w] = (v, i)
                    tree.add(i)
                    q.append(w)

    def path_up(v):
        out = []
        while parent[v] is not None:
            p, i = parent[v]
            out.append((v, p, i))
            v = p
        return out

    cycles = []
    for i, e in enumerate(edges):
        if i in tree:
            continue
        vec: dict[ParamIndex, int] = {e.index: 1}
        if e.src != e.tgt:
            # close the loop tgt -> common ancestor -> src through the tree
            up_t, up_s = path_up(e.tgt), path_up(e.src)
            nodes_s = {e.src} | {p for _, p, _ in up_s}
            common = next(v for v in [e.tgt] + [p for _, p, _ in up_t] if v in nodes_s)
            for path, upward in ((up_t, True), (up_s, False)):
                for child, par, j in path:
                    if child == common:
                        break
                    te = edges[j]
                    step = (child, par) if upward else (par, child)
                    sign = 1 if (te.src, te.tgt) == step else -1
                    vec[te.index] = vec.get(te.index, 0) + sign
        cycles.append(ParamVector(vec))
    return cycles


def single_vertex_cuts(ptg: PatternTransferGraph) -> list[ParamVector]:
    """Cut vectors of every single pattern vertex, built from the generic cut routine."""
    return [cut_vector(ptg, [u]) for u in range(1, 1 << ptg.n)]
