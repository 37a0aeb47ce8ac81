"""Clifford gates as signed symplectic maps on Pauli labels."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import pauli_core as pc
from .pauli_core import PauliLabel, Pattern


@dataclass(frozen=True)
class SignedPauli:
    label: PauliLabel
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    def __str__(self) -> str:
        return ("+" if self.sign > 0 else "-") + str(self.label)


def _mul(p, q):
    """Multiply two phased operators ``i^k X^x Z^z`` given as (k, x, z)."""
    k1, x1, z1 = p
    k2, x2, z2 = q
    return ((k1 + k2 + 2 * pc.popcount(z1 & x2)) & 3, x1 ^ x2, z1 ^ z2)


def _phased(sign: int, b: int, n: int):
    x, z = pc.split(b, n)
    return ((pc.popcount(x & z) + (0 if sign > 0 else 2)) & 3, x, z)


class CliffordGate:
    """An n-qubit Clifford given by the signed images of X_1..X_n, Z_1..Z_n."""

    def __init__(self, n: int, images: Sequence[tuple[int, int]], name: str = "",
                 components: Sequence[tuple[str, tuple[int, ...]]] = ()):
        if len(images) != 2 * n:
            raise ValueError("need 2n generator images")
        self.n = n
        self.name = name
        self.images = tuple((int(s), int(b)) for s, b in images)
        self.components = tuple((c, tuple(p)) for c, p in components)
        self._cache: dict[int, tuple[int, int]] = {}
        self._phased = [_phased(s, b, n) for s, b in self.images]
        self._check_symplectic()
        sup = 0
        for j in range(1, n + 1):
            bit = pc.qubit_bit(j, n)
            xj = pc.pack(bit, 0, n)
            zj = pc.pack(0, bit, n)
            if self.apply_int(xj) != (1, xj) or self.apply_int(zj) != (1, zj):
                sup |= bit
        self.support = sup

    def _check_symplectic(self) -> None:
        n = self.n
        gens = [pc.pack(pc.qubit_bit(j, n), 0, n) for j in range(1, n + 1)]
        gens += [pc.pack(0, pc.qubit_bit(j, n), n) for j in range(1, n + 1)]
        for i in range(2 * n):
            s, b = self.images[i]
            if s not in (1, -1) or b == 0:
                raise ValueError("generator images must be signed non-identity Paulis")
            for k in range(i + 1, 2 * n):
                if pc.symp(b, self.images[k][1], n) != pc.symp(gens[i], gens[k], n):
                    raise ValueError("generator images do not preserve commutation")

    def apply_int(self, a: int) -> tuple[int, int]:
        hit = self._cache.get(a)
        if hit is not None:
            return hit
        n = self.n
        x, z = pc.split(a, n)
        acc = (pc.popcount(x & z) & 3, 0, 0)
        for j in range(n):
            bit = 1 << (n - 1 - j)
            if x & bit:
                acc = _mul(acc, self._phased[j])
        for j in range(n):
            bit = 1 << (n - 1 - j)
            if z & bit:
                acc = _mul(acc, self._phased[n + j])
        k, X, Z = acc
        k = (k - pc.popcount(X & Z)) & 3
        if k not in (0, 2):
            raise ArithmeticError("non-Hermitian image; tableau is inconsistent")
        out = (1 if k == 0 else -1, pc.pack(X, Z, n))
        if len(self._cache) < 1 << 16:
            self._cache[a] = out
        return out

    def image(self, a: int) -> int:
        return self.apply_int(a)[1]

    def support_size(self) -> int:
        return pc.popcount(self.support)

    def support_pattern(self) -> Pattern:
        return Pattern(self.n, self.support)

    def local_restriction(self) -> "CliffordGate":
        """The gate restricted to its support (qubits relabelled 1..k in order)."""
        n = self.n
        qs = pc.qubits_of(self.support, n)
        k = len(qs)
        images = []
        for kind in ("x", "z"):
            for q in qs:
                bit = pc.qubit_bit(q, n)
                g = pc.pack(bit, 0, n) if kind == "x" else pc.pack(0, bit, n)
                s, b = self.apply_int(g)
                images.append((s, _gather(b, qs, n)))
        return CliffordGate(k, images, name=self.name + "|local")

    def compose(self, other: "CliffordGate") -> "CliffordGate":
        """Apply ``self`` first, then ``other``."""
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        images = []
        for s, b in self.images:
            t, c = other.apply_int(b)
            images.append((s * t, c))
        return CliffordGate(self.n, images, name=f"{self.name}*{other.name}")

    def is_identity(self) -> bool:
        return self.support == 0

    def __eq__(self, other) -> bool:
        return isinstance(other, CliffordGate) and self.n == other.n and self.images == other.images

    def __hash__(self) -> int:
        return hash((self.n, self.images))

    def __repr__(self) -> str:
        return f"CliffordGate({self.name!r}, n={self.n}, support={pc.pattern_str(self.support, self.n)})"


def _gather(b: int, qs: Sequence[int], n: int) -> int:
    k = len(qs)
    x, z = pc.split(b, n)
    lx = lz = 0
    for i, q in enumerate(qs):
        bit = pc.qubit_bit(q, n)
        lbit = 1 << (k - 1 - i)
        if x & bit:
            lx |= lbit
        if z & bit:
            lz |= lbit
    return pc.pack(lx, lz, k)


def _scatter(b: int, qs: Sequence[int], k: int, n: int) -> int:
    x, z = pc.split(b, k)
    gx = gz = 0
    for i, q in enumerate(qs):
        lbit = 1 << (k - 1 - i)
        bit = pc.qubit_bit(q, n)
        if x & lbit:
            gx |= bit
        if z & lbit:
            gz |= bit
    return pc.pack(gx, gz, n)


def apply(g: CliffordGate, p: PauliLabel) -> SignedPauli:
    if g.n != p.n:
        raise ValueError(f"dimension mismatch: gate on {g.n} qubits, Pauli on {p.n}")
    s, b = g.apply_int(p.packed)
    return SignedPauli(PauliLabel.from_int(b, g.n), s)


def identity_gate(n: int, name: str = "I") -> CliffordGate:
    images = [(1, pc.pack(pc.qubit_bit(j, n), 0, n)) for j in range(1, n + 1)]
    images += [(1, pc.pack(0, pc.qubit_bit(j, n), n)) for j in range(1, n + 1)]
    return CliffordGate(n, images, name=name)


def from_tableau_strings(xs: Sequence[str], zs: Sequence[str], name: str = "") -> CliffordGate:
    """Build from signed Pauli strings such as ``"+XZ"`` / ``"-YI"``."""
    k = len(xs)
    images = []
    for text in list(xs) + list(zs):
        text = text.strip()
        sign = -1 if text.startswith("-") else 1
        b, m = pc.parse_pauli(text.lstrip("+-"))
        if m != k:
            raise ValueError(f"tableau entry {text!r} has wrong length")
        images.append((sign, b))
    return CliffordGate(k, images, name=name)


# local tableaus, qubit order as in the placement list
_TWO_QUBIT = {
    "CZ": (["XZ", "ZX"], ["ZI", "IZ"]),
    "CNOT": (["XX", "IX"], ["ZI", "ZZ"]),
    "SWAP": (["IX", "XI"], ["IZ", "ZI"]),
    "ISWAP": (["ZY", "YZ"], ["IZ", "ZI"]),
}


def _single_qubit_table():
    """The 24 single-qubit Cliffords, named by shortest H/S words in circuit order."""
    h = from_tableau_strings(["Z"], ["X"], "H")
    s = from_tableau_strings(["Y"], ["Z"], "S")
    start = identity_gate(1, "I")
    seen = {start.images: "I"}
    order = [("I", start)]
    frontier = [("", start)]
    while frontier:
        nxt = []
        for word, g in frontier:
            for letter, gen in (("H", h), ("S", s)):
                w = word + letter
                c = g.compose(gen)
                if c.images not in seen:
                    seen[c.images] = w
                    order.append((w, CliffordGate(1, c.images, name=w)))
                    nxt.append((w, c))
        frontier = nxt
    return order


SINGLE_QUBIT_CLIFFORDS: list[tuple[str, CliffordGate]] = _single_qubit_table()
_SQ_BY_NAME = {name: g for name, g in SINGLE_QUBIT_CLIFFORDS}
_SQ_BY_IMAGES = {g.images: name for name, g in SINGLE_QUBIT_CLIFFORDS}
SQ_ALIASES = {"X": "HSSH", "Y": "SSHSSH", "Z": "SS", "SDG": "SSS", "SX": "HSH"}


def single_qubit(name: str) -> CliffordGate:
    """Look up a single-qubit Clifford by canonical name, alias, or any H/S word."""
    key = name.upper()
    key = SQ_ALIASES.get(key, key)
    if key in _SQ_BY_NAME:
        return _SQ_BY_NAME[key]
    if key and set(key) <= {"H", "S"}:
        g = _SQ_BY_NAME["I"]
        for letter in key:
            g = g.compose(_SQ_BY_NAME[letter])
        return _SQ_BY_NAME[_SQ_BY_IMAGES[g.images]]
    raise KeyError(f"unknown single-qubit Clifford {name!r}")


def single_qubit_name(g: CliffordGate) -> str:
    return _SQ_BY_IMAGES[g.images]


def builtin_local(name: str) -> CliffordGate:
    key = name.upper()
    if key in _TWO_QUBIT:
        xs, zs = _TWO_QUBIT[key]
        return from_tableau_strings(xs, zs, key)
    return single_qubit(key)


def builtin_names() -> list[str]:
    return sorted(_TWO_QUBIT) + [n for n, _ in SINGLE_QUBIT_CLIFFORDS] + sorted(SQ_ALIASES)


def embed_local(local: CliffordGate, placement: Sequence[int], n: int, name: str = "") -> CliffordGate:
    return tensor_parallel([(local, placement)], n, name=name)


def tensor_parallel(gates: Iterable[tuple[CliffordGate, Sequence[int]]], n: int,
                    name: str = "") -> CliffordGate:
    """Parallel layer: each local gate acts on its placement, identity elsewhere."""
    gates = list(gates)
    used: set[int] = set()
    for local, placement in gates:
        if len(placement) != local.n:
            raise ValueError("placement length must match gate size")
        if used & set(placement) or len(set(placement)) != len(placement):
            raise ValueError("overlapping placements")
        if any(not 1 <= q <= n for q in placement):
            raise ValueError("placement out of range")
        used |= set(placement)
    images = []
    owner = {}
    for local, placement in gates:
        for i, q in enumerate(placement):
            owner[q] = (local, placement, i)
    for kind in (0, 1):
        for q in range(1, n + 1):
            bit = pc.qubit_bit(q, n)
            if q not in owner:
                images.append((1, pc.pack(bit, 0, n) if kind == 0 else pc.pack(0, bit, n)))
                continue
            local, placement, i = owner[q]
            s, b = local.images[i if kind == 0 else local.n + i]
            images.append((s, _scatter(b, placement, local.n, n)))
    comps = [(local.name, tuple(placement)) for local, placement in gates]
    return CliffordGate(n, images, name=name, components=comps)


def sub_gate_supports(g: CliffordGate) -> list[int]:
    """Supports of the parallel components of a layer (one block if unknown)."""
    if g.components:
        out = []
        for _, placement in g.components:
            bits = pc.bits_of(placement, g.n)
            out.append(bits)
        return out
    return [g.support] if g.support else []


class SubgraphShape(enum.Enum):
    CNOTlike = "CNOTlike"
    SWAPlike = "SWAPlike"
    iSWAPlike = "iSWAPlike"
    Trivial = "Trivial"


def pattern_edges(g: CliffordGate) -> list[tuple[int, int, int]]:
    """(label, source pattern, target pattern) for every non-identity label."""
    pc.check_cap(g.n, "pattern edges")
    out = []
    for a in range(1, 4 ** g.n):
        out.append((a, pc.support_bits(a, g.n), pc.support_bits(g.image(a), g.n)))
    return out


def classify_subgraph(g: CliffordGate) -> SubgraphShape:
    """Shape of the 2-qubit pattern transfer subgraph on {01, 10, 11}."""
    if g.support_size() != 2 and g.n != 2:
        raise ValueError("classification needs a gate on exactly 2 qubits")
    local = g if g.n == 2 else g.local_restriction()
    cross, swap = False, False
    for _, u, v in pattern_edges(local):
        if u == v:
            continue
        if {u, v} == {1, 2}:
            swap = True
        else:
            cross = True
    if cross and swap:
        return SubgraphShape.iSWAPlike
    if cross:
        return SubgraphShape.CNOTlike
    if swap:
        return SubgraphShape.SWAPlike
    return SubgraphShape.Trivial


def subgraph_connected(g: CliffordGate) -> bool:
    """Whether the pattern transfer subgraph of the gate on its support is connected."""
    local = g.local_restriction()
    k = local.n
    parent = list(range(1 << k))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for _, u, v in pattern_edges(local):
        parent[find(u)] = find(v)
    roots = {find(v) for v in range(1, 1 << k)}
    return len(roots) == 1


def single_qubit_connector(src: SignedPauli, dst: SignedPauli) -> list[str]:
    """Names of single-qubit Cliffords (one per qubit) mapping ``src`` onto ``dst``.

    Every qubit takes the first Clifford (in table order) that maps its factor to
    ``+`` the target factor, except the first non-identity qubit, which absorbs
    the overall sign.
    """
    n = src.label.n
    if dst.label.n != n:
        raise ValueError("dimension mismatch")
    a, b = src.label.packed, dst.label.packed
    if pc.support_bits(a, n) != pc.support_bits(b, n):
        raise ValueError("no single-qubit connector between different patterns")
    need = src.sign * dst.sign
    names = []
    first = True
    for j in range(1, n + 1):
        ca, cb = pc.site_char(a, n, j), pc.site_char(b, n, j)
        if ca == "I":
            names.append("I")
            continue
        pa, _ = pc.parse_pauli(ca)
        pb, _ = pc.parse_pauli(cb)
        want = need if first else 1
        first = False
        for name, g in SINGLE_QUBIT_CLIFFORDS:
            if g.apply_int(pa) == (want, pb):
                names.append(name)
                break
    if first and need != 1:
        raise ValueError("identity cannot be mapped to minus identity")
    return names


def connector_layer(names: Sequence[str]) -> CliffordGate:
    n = len(names)
    parts = [(single_qubit(nm), [j + 1]) for j, nm in enumerate(names) if nm != "I"]
    return tensor_parallel(parts, n, name="u1")


def apply_connector(names: Sequence[str], sign: int, a: int) -> tuple[int, int]:
    """Apply a connector layer (given by names) to a signed packed Pauli."""
    n = len(names)
    x, z = pc.split(a, n)
    out = 0
    for j, nm in enumerate(names, start=1):
        c = pc.site_char(a, n, j)
        if c == "I":
            continue
        if nm == "I":
            p = c
        else:
            s, b = single_qubit(nm).apply_int(pc.parse_pauli(c)[0])
            sign *= s
            p = pc.pauli_str(b, 1)
        bit = pc.qubit_bit(j, n)
        k = "IZXY".index(p)
        if k & 2:
            out |= pc.pack(bit, 0, n)
        if k & 1:
            out |= pc.pack(0, bit, n)
    return sign, out


class GateSet:
    """Ordered collection of named gate layers on a common number of qubits."""

    def __init__(self, n: int, gates: Iterable[CliffordGate] = ()):
        self.n = n
        self.gates: list[CliffordGate] = []
        self._by_name: dict[str, CliffordGate] = {}
        for g in gates:
            self.add(g)

    def add(self, g: CliffordGate) -> None:
        if g.n != self.n:
            raise ValueError(f"gate {g.name!r} acts on {g.n} qubits, gate set has {self.n}")
        if not g.name or g.name in self._by_name:
            raise ValueError(f"gate names must be unique and non-empty ({g.name!r})")
        self.gates.append(g)
        self._by_name[g.name] = g

    def __getitem__(self, name: str) -> CliffordGate:
        return self._by_name[name]

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __iter__(self):
        return iter(self.gates)

    def __len__(self) -> int:
        return len(self.gates)

    def names(self) -> list[str]:
        return [g.name for g in self.gates]

    def order(self, name: str) -> int:
        return self.names().index(name)

    def to_json(self) -> dict:
        out = []
        for g in self.gates:
            if len(g.components) == 1 and g.components[0][0].upper() in _TWO_QUBIT_OR_SQ():
                comp, placement = g.components[0]
                out.append({"name": g.name, "kind": "builtin", "builtin": comp,
                            "placement": list(placement)})
            elif g.components and all(c.upper() in _TWO_QUBIT_OR_SQ() for c, _ in g.components):
                out.append({"name": g.name, "kind": "builtin",
                            "builtin": [c for c, _ in g.components],
                            "placement": [list(p) for _, p in g.components]})
            else:
                xs = [("+" if s > 0 else "-") + pc.pauli_str(b, g.n) for s, b in g.images[:g.n]]
                zs = [("+" if s > 0 else "-") + pc.pauli_str(b, g.n) for s, b in g.images[g.n:]]
                out.append({"name": g.name, "kind": "tableau",
                            "placement": list(range(1, g.n + 1)),
                            "tableau": {"x": xs, "z": zs}})
        return {"n": self.n, "gates": out}


def _TWO_QUBIT_OR_SQ():
    return set(_TWO_QUBIT) | set(_SQ_BY_NAME) | set(SQ_ALIASES)


def gate_from_json(entry: dict, n: int) -> CliffordGate:
    name = entry["name"]
    kind = entry.get("kind", "builtin")
    if kind == "builtin":
        builtin = entry["builtin"]
        placement = entry["placement"]
        if isinstance(builtin, list):
            parts = [(builtin_local(b), list(p)) for b, p in zip(builtin, placement)]
            if len(parts) != len(builtin):
                raise ValueError("builtin list and placement list differ in length")
        else:
            parts = [(builtin_local(builtin), list(placement))]
        return tensor_parallel(parts, n, name=name)
    if kind == "tableau":
        tab = entry["tableau"]
        local = from_tableau_strings(tab["x"], tab["z"], name)
        placement = entry.get("placement", list(range(1, local.n + 1)))
        return tensor_parallel([(local, placement)], n, name=name)
    raise ValueError(f"unknown gate kind {kind!r}")


def gateset_from_json(data: dict | str) -> GateSet:
    if isinstance(data, str):
        data = json.loads(data)
    n = int(data["n"])
    return GateSet(n, [gate_from_json(e, n) for e in data.get("gates", [])])


def load_gateset(path: str) -> GateSet:
    with open(path) as fh:
        return gateset_from_json(json.load(fh))
