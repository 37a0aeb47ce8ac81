"""Parameter spaces, ansatz embeddings and noise-parameter conversions.

Complete parameters are indexed by :class:`ParamIndex`: state preparation and
measurement parameters by a non-empty support pattern, gate parameters by a
non-identity Pauli label of a named gate.  A reduced model is an injective
linear map from a smaller space (indexed by :class:`ReducedIndex`) into the
complete one.

Dense block arrays are used throughout for the per-block transforms: a SPAM
block is an array of length ``2**n`` indexed by pattern bits, a gate block an
array of length ``4**n`` indexed by packed Pauli labels.  Slot 0 (empty
pattern / identity) is always zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Mapping, NamedTuple

import numpy as np

from . import pauli_core as pc
from .clifford import CliffordGate, GateSet, sub_gate_supports
from .linalg import Echelon, Solver
from .pauli_core import FactorSet


# ---------------------------------------------------------------------------
# indices and vectors


class _IndexBase(NamedTuple):
    kind: str       # "S", "M" or "G"
    label: int      # pattern bits for S/M, packed Pauli for G
    gate: str = ""

    def render(self, n: int) -> str:
        if self.kind == "G":
            return f"{self.gate}:{pc.pauli_str(self.label, n)}"
        return f"{self.kind}:{pc.pattern_str(self.label, n)}"


class ParamIndex(_IndexBase):
    """Coordinate of the complete parameter space."""

    __slots__ = ()

    @classmethod
    def prep(cls, u: int) -> "ParamIndex":
        return cls("S", u)

    @classmethod
    def meas(cls, u: int) -> "ParamIndex":
        return cls("M", u)

    @classmethod
    def gate_param(cls, gate: str, a: int) -> "ParamIndex":
        return cls("G", a, gate)


class ReducedIndex(_IndexBase):
    """Coordinate of a reduced parameter space (same shape as :class:`ParamIndex`)."""

    __slots__ = ()


def parse_index(text: str, cls=ParamIndex):
    """Inverse of ``render``: ``"S:01"``, ``"M:11"`` or ``"CZ:XI"``."""
    head, _, body = text.rpartition(":")
    if head in ("S", "M"):
        bits, _ = pc.parse_pattern(body)
        return cls(head, bits)
    if not head:
        raise ValueError(f"bad index string {text!r}")
    a, _ = pc.parse_pauli(body)
    return cls("G", a, head)


class ParamVector(dict):
    """Sparse vector (or covector) over parameter indices with exact entries."""

    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        for k in [k for k, v in self.items() if v == 0]:
            del self[k]

    def dot(self, other: Mapping):
        small, big = (self, other) if len(self) <= len(other) else (other, self)
        return sum((v * big[k] for k, v in small.items() if k in big), 0)

    def __add__(self, other: Mapping) -> "ParamVector":
        out = dict(self)
        for k, v in other.items():
            out[k] = out.get(k, 0) + v
        return type(self)(out)

    def __sub__(self, other: Mapping) -> "ParamVector":
        return self + {k: -v for k, v in other.items()}

    def scale(self, c) -> "ParamVector":
        return type(self)({k: c * v for k, v in self.items()})

    def to_json(self, n: int) -> dict:
        return {k.render(n): str(v) for k, v in sorted(self.items())}

    @classmethod
    def from_json(cls, data: Mapping, index_cls=ParamIndex) -> "ParamVector":
        return cls({parse_index(k, index_cls): Fraction(v) for k, v in data.items()})


class CompleteSpace:
    """Integer column numbering of the complete parameter space of a gate set."""

    def __init__(self, gateset: GateSet):
        self.gateset = gateset
        self.n = n = gateset.n
        self.names = gateset.names()
        self._gate_pos = {g: i for i, g in enumerate(self.names)}
        self.n_spam = (1 << n) - 1
        self.n_gate = (1 << 2 * n) - 1
        self.dim = 2 * self.n_spam + len(self.names) * self.n_gate

    def col(self, idx: ParamIndex) -> int:
        if idx.kind == "S":
            return idx.label - 1
        if idx.kind == "M":
            return self.n_spam + idx.label - 1
        return 2 * self.n_spam + self._gate_pos[idx.gate] * self.n_gate + idx.label - 1

    def index(self, c: int) -> ParamIndex:
        if c < self.n_spam:
            return ParamIndex("S", c + 1)
        c -= self.n_spam
        if c < self.n_spam:
            return ParamIndex("M", c + 1)
        c -= self.n_spam
        g, a = divmod(c, self.n_gate)
        return ParamIndex("G", a + 1, self.names[g])

    def indices(self) -> Iterator[ParamIndex]:
        pc.check_cap(self.n, "complete parameter enumeration")
        for u in range(1, 1 << self.n):
            yield ParamIndex("S", u)
        for u in range(1, 1 << self.n):
            yield ParamIndex("M", u)
        for g in self.names:
            for a in range(1, 1 << 2 * self.n):
                yield ParamIndex("G", a, g)

    def valid(self, idx: ParamIndex) -> bool:
        if idx.kind in ("S", "M"):
            return 0 < idx.label <= self.n_spam
        return idx.kind == "G" and idx.gate in self._gate_pos and 0 < idx.label <= self.n_gate


# ---------------------------------------------------------------------------
# dense transforms on blocks


@lru_cache(maxsize=None)
def _site_perm(n: int) -> np.ndarray:
    """perm[i] = packed label whose per-site codes (I,Z,X,Y = 0..3) read i in base 4."""
    perm = np.zeros(4 ** n, dtype=np.int64)
    for i in range(4 ** n):
        x = z = 0
        t = i
        for j in range(n):
            c = t & 3
            t >>= 2
            bit = 1 << j       # digit j from the right is qubit n-j
            if c & 2:
                x |= bit
            if c & 1:
                z |= bit
        perm[i] = (x << n) | z
    return perm


def _per_site(v: np.ndarray, n: int, sign: int) -> np.ndarray:
    perm = _site_perm(n)
    arr = np.array(v[perm]).reshape((4,) * n) if n else np.array(v)
    for ax in range(n):
        idx0 = [slice(None)] * n
        idx1 = [slice(None)] * n
        idx0[ax] = slice(0, 1)
        idx1[ax] = slice(1, 4)
        if sign > 0:
            arr[tuple(idx1)] += arr[tuple(idx0)]
        else:
            arr[tuple(idx1)] -= arr[tuple(idx0)]
    out = np.empty_like(v)
    out[perm] = arr.reshape(-1)
    return out


def zeta_paulis(r: np.ndarray, n: int) -> np.ndarray:
    """x_a = sum over b majorized by a of r_b (dense, length 4**n)."""
    return _per_site(r, n, +1)


def mobius_paulis(x: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`zeta_paulis`."""
    return _per_site(x, n, -1)


def _per_bit(v: np.ndarray, n: int, sign: int) -> np.ndarray:
    arr = np.array(v).reshape((2,) * n) if n else np.array(v)
    for ax in range(n):
        i0 = [slice(None)] * n
        i1 = [slice(None)] * n
        i0[ax] = 0
        i1[ax] = 1
        if sign > 0:
            arr[tuple(i1)] += arr[tuple(i0)]
        else:
            arr[tuple(i1)] -= arr[tuple(i0)]
    return arr.reshape(-1)


def zeta_subsets(r: np.ndarray, n: int) -> np.ndarray:
    """x_u = sum over subsets v of u of r_v (dense, length 2**n)."""
    return _per_bit(r, n, +1)


def mobius_subsets(x: np.ndarray, n: int) -> np.ndarray:
    return _per_bit(x, n, -1)


def _fwht(v: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform over the bits of the index."""
    a = np.array(v)
    N = a.shape[0]
    h = 1
    while h < N:
        a = a.reshape(-1, 2, h)
        lo = a[:, 0, :] + a[:, 1, :]
        hi = a[:, 0, :] - a[:, 1, :]
        a = np.stack([lo, hi], axis=1).reshape(-1)
        h *= 2
    return a


@lru_cache(maxsize=None)
def _swap_halves(n: int) -> np.ndarray:
    idx = np.arange(4 ** n, dtype=np.int64)
    mask = (1 << n) - 1
    return ((idx & mask) << n) | (idx >> n)


def symplectic_transform(v: np.ndarray, n: int) -> np.ndarray:
    """out[b] = sum_a (-1)^<a,b> v[a]."""
    return _fwht(v)[_swap_halves(n)]


def _dense(n: int, entries: Mapping[int, object], size: int, dtype) -> np.ndarray:
    arr = np.zeros(size, dtype=dtype)
    for k, v in entries.items():
        arr[k] = v
    return arr


def _as_dense_paulis(x, n: int, dtype=None) -> np.ndarray:
    if isinstance(x, np.ndarray):
        return x
    vals = list(x.values())
    if dtype is None:
        dtype = object if any(isinstance(v, Fraction) for v in vals) else float
    return _dense(n, x, 4 ** n, dtype)


# ---------------------------------------------------------------------------
# Lindblad / fidelity / error-rate conversions


def lindblad_to_fidelity(n: int, tau: Mapping[int, float] | None = None,
                         eta: Mapping[int, float] | None = None) -> np.ndarray:
    """Fidelity exponents x_a = sum_b <a,b> tau_b from Lindblad generators.

    Give either ``tau`` (rates) or ``eta`` (flip probabilities, tau = -log(1-2 eta)).
    Returns a dense array of length ``4**n`` with x_I = 0.
    """
    if (tau is None) == (eta is None):
        raise ValueError("give exactly one of tau or eta")
    if eta is not None:
        tau = {}
        for b, e in eta.items():
            if e >= 0.5:
                raise ValueError(f"flip probability {e} must be below 1/2")
            tau[b] = -np.log1p(-2 * e)
    pc.check_cap(n, "Lindblad conversion")
    t = _as_dense_paulis({b: v for b, v in tau.items() if b}, n)
    t[0] = 0
    total = t.sum()
    # <a,b> = (1 - (-1)^<a,b>) / 2
    out = (total - symplectic_transform(t, n))
    if out.dtype == object:
        out = np.array([Fraction(v) / 2 for v in out], dtype=object)
    else:
        out = out / 2
    out[0] = 0
    return out


def fidelity_to_lindblad(x, n: int, omega: FactorSet | None = None):
    """Lindblad rates reproducing the fidelity exponents ``x``.

    Returns ``(tau, residual)``: ``tau`` maps every label consistent with
    ``omega`` (all labels when ``omega`` is None) to its rate, ``residual``
    holds the nonzero rates on labels outside ``omega``.  The residual is
    empty exactly when ``x`` is an omega-local channel.
    """
    pc.check_cap(n, "Lindblad conversion")
    xv = _as_dense_paulis(x, n)
    h = symplectic_transform(xv, n)
    if h.dtype == object:
        scale = Fraction(-2, 4 ** n)
        tau_all = [scale * v for v in h]
    else:
        tau_all = (-2.0 / 4 ** n) * h
    tau, residual = {}, {}
    for b in range(1, 4 ** n):
        v = tau_all[b]
        if omega is None or omega.covers(pc.support_bits(b, n)):
            tau[b] = v
        elif v != 0:
            residual[b] = v
    return tau, residual


def error_rates(lam, n: int) -> np.ndarray:
    """Pauli error rates p_a = 4^-n sum_b lambda_b (-1)^<a,b> (dense)."""
    pc.check_cap(n, "Walsh-Hadamard error rates")
    lv = _as_dense_paulis(lam, n)
    h = symplectic_transform(lv, n)
    if h.dtype == object:
        return np.array([Fraction(v) / 4 ** n for v in h], dtype=object)
    return h / 4 ** n


# ---------------------------------------------------------------------------
# covariance


def extended_support(g: CliffordGate, s: int) -> int:
    """Grow pattern ``s`` by every parallel component of ``g`` it touches."""
    out = s
    for block in sub_gate_supports(g):
        if block & s:
            out |= block
    return out


def is_covariant(omega: FactorSet, g: CliffordGate) -> bool:
    """Sufficient covariance certificate via the extended support map."""
    return all(extended_support(g, s) in omega for s in omega)


def is_covariant_exhaustive(omega: FactorSet, g: CliffordGate) -> bool:
    """Whether conjugation by ``g`` maps omega-consistent labels to omega-consistent ones."""
    pc.check_cap(g.n, "covariance check")
    n = g.n
    for a in omega.consistent_labels():
        if not omega.covers(pc.support_bits(g.image(a), n)):
            return False
    return True


# ---------------------------------------------------------------------------
# ansatz description


@dataclass
class AnsatzSpec:
    """Which reduced model to use.

    ``kind`` is one of ``complete``, ``fully_local``, ``quasi_local``, ``custom``.
    Quasi-local ansatzes carry factor sets; custom ones carry explicit columns
    (a list of ``(ReducedIndex, ParamVector)``).
    """

    kind: str
    omega_s: FactorSet | None = None
    omega_m: FactorSet | None = None
    omega_gate: dict[str, FactorSet] = field(default_factory=dict)
    columns: list = field(default_factory=list)

    KINDS = ("complete", "fully_local", "quasi_local", "custom")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown ansatz kind {self.kind!r}")
        if self.kind == "quasi_local":
            if self.omega_s is None or self.omega_m is None:
                raise ValueError("quasi-local ansatz needs state-preparation and measurement factor sets")

    @classmethod
    def complete(cls) -> "AnsatzSpec":
        return cls("complete")

    @classmethod
    def fully_local(cls) -> "AnsatzSpec":
        return cls("fully_local")

    @classmethod
    def quasi_local(cls, omega_s: FactorSet, omega_m: FactorSet,
                    omega_gate: Mapping[str, FactorSet]) -> "AnsatzSpec":
        return cls("quasi_local", omega_s, omega_m, dict(omega_gate))

    @classmethod
    def custom(cls, columns) -> "AnsatzSpec":
        return cls("custom", columns=list(columns))

    def to_json(self, n: int) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == "quasi_local":
            def mx(f):
                return [pc.qubits_of(m, n) for m in f.maximal()]
            out["omega_s_max"] = mx(self.omega_s)
            out["omega_m_max"] = mx(self.omega_m)
            out["omega_gate_max"] = {g: mx(f) for g, f in self.omega_gate.items()}
        if self.kind == "custom":
            out["columns"] = [{"index": r.render(n), "column": ParamVector(c).to_json(n)}
                              for r, c in self.columns]
        return out

    @classmethod
    def from_json(cls, data: Mapping | str, n: int) -> "AnsatzSpec":
        if isinstance(data, str):
            data = json.loads(data)
        kind = data.get("kind")
        if kind == "quasi_local":
            def fs(key):
                if key not in data:
                    raise ValueError(f"quasi-local ansatz is missing {key!r}")
                return FactorSet.from_maximal(n, data[key])
            gates = {g: FactorSet.from_maximal(n, m)
                     for g, m in data.get("omega_gate_max", {}).items()}
            return cls.quasi_local(fs("omega_s_max"), fs("omega_m_max"), gates)
        if kind == "custom":
            cols = [(parse_index(c["index"], ReducedIndex),
                     ParamVector.from_json(c["column"])) for c in data.get("columns", [])]
            return cls.custom(cols)
        return cls(kind)


def load_ansatz(path: str, n: int) -> AnsatzSpec:
    with open(path) as fh:
        return AnsatzSpec.from_json(json.load(fh), n)


# ---------------------------------------------------------------------------
# per-block embeddings


class _Block:
    """One layer block of a layer-uncorrelated embedding.

    ``labels`` are the reduced labels of the block in canonical order.  All
    block maps have 0/1 entries.
    """

    kind: str
    gate: str = ""
    size: int
    labels: list[int]

    def pull(self, label: int) -> list[int]:
        raise NotImplementedError

    def push(self, rlabel: int) -> Iterator[int]:
        raise NotImplementedError

    def embed_dense(self, r: Mapping[int, object], dtype=float) -> np.ndarray:
        raise NotImplementedError

    def invert_dense(self, x: np.ndarray) -> tuple[dict, np.ndarray]:
        """Left inverse and residual ``x - embed(r)`` of a dense block."""
        raise NotImplementedError


class _IdentityBlock(_Block):
    def __init__(self, kind: str, n: int, gate: str = ""):
        self.kind, self.gate, self.n = kind, gate, n
        self.size = (1 << n) if kind in ("S", "M") else (1 << 2 * n)
        self.labels = list(range(1, self.size))

    def pull(self, label):
        return [label]

    def push(self, rlabel):
        yield rlabel

    def embed_dense(self, r, dtype=float):
        return _dense(self.n, r, self.size, dtype)

    def invert_dense(self, x):
        r = {k: x[k] for k in range(1, self.size) if x[k] != 0}
        return r, np.zeros_like(x)


class _SubsetBlock(_Block):
    """SPAM block parametrized over a factor set (subset zeta transform)."""

    def __init__(self, kind: str, n: int, omega: FactorSet):
        self.kind, self.n, self.omega = kind, n, omega
        self.size = 1 << n
        self.labels = sorted(omega)
        self._set = omega.members

    def pull(self, u):
        return [v for v in self.labels if v & u == v]

    def push(self, v):
        full = (1 << self.n) - 1
        rest = full & ~v
        sub = rest
        while True:
            yield v | sub
            if sub == 0:
                return
            sub = (sub - 1) & rest

    def embed_dense(self, r, dtype=float):
        arr = _dense(self.n, {k: v for k, v in r.items() if k in self._set}, self.size, dtype)
        return zeta_subsets(arr, self.n)

    def invert_dense(self, x):
        m = mobius_subsets(np.array(x), self.n)
        r = {v: m[v] for v in self.labels if m[v] != 0}
        return r, x - self.embed_dense(r, dtype=x.dtype)


class _LocalGateBlock(_Block):
    """Fully-local gate block: x_a = r of a restricted to the gate support."""

    def __init__(self, n: int, gate: CliffordGate):
        self.kind, self.gate, self.n = "G", gate.name, n
        self.size = 1 << 2 * n
        self.support = gate.support
        self.labels = sorted(b for b in pc.labels_within(self.support, n) if b)
        self._restrict = None

    def _restrict_map(self) -> np.ndarray:
        if self._restrict is None:
            idx = np.arange(self.size, dtype=np.int64)
            m = (self.support << self.n) | self.support
            self._restrict = idx & m
        return self._restrict

    def pull(self, a):
        b = pc.restrict(a, self.support, self.n)
        return [b] if b else []

    def push(self, b):
        n = self.n
        rest = ((1 << n) - 1) & ~self.support
        for c in pc.labels_within(rest, n):
            yield b | c

    def embed_dense(self, r, dtype=float):
        small = _dense(self.n, r, self.size, dtype)
        out = small[self._restrict_map()]
        out[0] = 0
        return out

    def invert_dense(self, x):
        r = {b: x[b] for b in self.labels if x[b] != 0}
        return r, x - self.embed_dense(r, dtype=x.dtype)


class _QuasiGateBlock(_Block):
    """Quasi-local gate block: x_a = sum over omega-consistent b majorized by a of r_b."""

    def __init__(self, n: int, gate: str, omega: FactorSet):
        self.kind, self.gate, self.n, self.omega = "G", gate, n, omega
        self.size = 1 << 2 * n
        self.labels = omega.consistent_labels()
        self._mask = None

    def _consistent_mask(self) -> np.ndarray:
        if self._mask is None:
            m = np.zeros(self.size, dtype=bool)
            m[self.labels] = True
            self._mask = m
        return self._mask

    def pull(self, a):
        n = self.n
        return [b for b in pc.sub_labels(a, n) if b and self.omega.covers(pc.support_bits(b, n))]

    def push(self, b):
        n = self.n
        rest = ((1 << n) - 1) & ~pc.support_bits(b, n)
        for c in pc.labels_within(rest, n):
            yield b | c

    def embed_dense(self, r, dtype=float):
        arr = _dense(self.n, r, self.size, dtype)
        arr[~self._consistent_mask()] = 0
        return zeta_paulis(arr, self.n)

    def invert_dense(self, x):
        m = mobius_paulis(np.array(x), self.n)
        r = {b: m[b] for b in self.labels if m[b] != 0}
        return r, x - self.embed_dense(r, dtype=x.dtype)


# ---------------------------------------------------------------------------
# embedding map


class EmbeddingMap:
    """Injective linear map from a reduced parameter space into the complete one."""

    def __init__(self, gateset: GateSet, ansatz: AnsatzSpec):
        self.gateset = gateset
        self.ansatz = ansatz
        self.n = n = gateset.n
        self.space = CompleteSpace(gateset)
        self.blocks: dict[tuple[str, str], _Block] = {}
        self._custom_cols: list[dict[int, Fraction]] | None = None
        kind = ansatz.kind
        if kind == "custom":
            self._init_custom()
            return
        if kind == "complete":
            self.blocks[("S", "")] = _IdentityBlock("S", n)
            self.blocks[("M", "")] = _IdentityBlock("M", n)
            for g in gateset:
                self.blocks[("G", g.name)] = _IdentityBlock("G", n, g.name)
        elif kind == "fully_local":
            single = FactorSet.singletons(n)
            self.blocks[("S", "")] = _SubsetBlock("S", n, single)
            self.blocks[("M", "")] = _SubsetBlock("M", n, single)
            for g in gateset:
                self.blocks[("G", g.name)] = _LocalGateBlock(n, g)
        else:
            for key, om in (("omega_s", ansatz.omega_s), ("omega_m", ansatz.omega_m)):
                if om.n != n:
                    raise ValueError(f"{key} is over {om.n} qubits, gate set has {n}")
            self.blocks[("S", "")] = _SubsetBlock("S", n, ansatz.omega_s)
            self.blocks[("M", "")] = _SubsetBlock("M", n, ansatz.omega_m)
            missing = [g for g in gateset.names() if g not in ansatz.omega_gate]
            if missing:
                raise ValueError(f"quasi-local ansatz lacks a factor set for gates {missing}")
            for g in gateset:
                om = ansatz.omega_gate[g.name]
                if om.n != n:
                    raise ValueError(f"factor set of {g.name} has the wrong qubit count")
                self.blocks[("G", g.name)] = _QuasiGateBlock(n, g.name, om)
        self.indices: list[ReducedIndex] = []
        for (kind_, gname), blk in self.blocks.items():
            self.indices.extend(ReducedIndex(kind_, b, gname) for b in blk.labels)
        self.position = {r: i for i, r in enumerate(self.indices)}

    # -- custom maps ---------------------------------------------------------
    def _init_custom(self):
        cols = self.ansatz.columns
        self.indices = [ReducedIndex(*r) for r, _ in cols]
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("custom ansatz has duplicate reduced indices")
        self.position = {r: i for i, r in enumerate(self.indices)}
        self._custom_cols = []
        self._custom_rows: dict[int, dict[int, Fraction]] = {}
        ech = Echelon()
        for i, (_, col) in enumerate(cols):
            c = {}
            for idx, v in col.items():
                idx = ParamIndex(*idx)
                if not self.space.valid(idx):
                    raise ValueError(f"custom column entry {idx} is not a parameter of this gate set")
                c[self.space.col(idx)] = Fraction(v)
            self._custom_cols.append(c)
            for k, v in c.items():
                self._custom_rows.setdefault(k, {})[i] = v
            if not ech.add(c):
                raise ValueError("custom ansatz columns are linearly dependent (map not injective)")
        self._solver = Solver()
        for i, c in enumerate(self._custom_cols):
            self._solver.add(c, tag=i)

    # -- basic facts ---------------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self.indices)

    @property
    def kind(self) -> str:
        return self.ansatz.kind

    @property
    def layer_uncorrelated(self) -> bool:
        if self._custom_cols is None:
            return True
        for i, c in enumerate(self._custom_cols):
            blocks = {self._block_key(self.space.index(k)) for k in c}
            if len(blocks) > 1:
                return False
        return True

    @staticmethod
    def _block_key(idx) -> tuple[str, str]:
        return (idx.kind, idx.gate if idx.kind == "G" else "")

    def block_dims(self) -> dict[str, int]:
        out = {"S": 0, "M": 0, "G": 0}
        for r in self.indices:
            out[r.kind] += 1
        return out

    def gate_indices(self) -> list[ReducedIndex]:
        return [r for r in self.indices if r.kind == "G"]

    # -- the map and its adjoint ---------------------------------------------
    def pull_index(self, idx: ParamIndex) -> dict[int, int]:
        """Q^T applied to a standard basis vector, as {reduced position: coeff}."""
        if self._custom_cols is not None:
            return dict(self._custom_rows.get(self.space.col(idx), {}))
        blk = self.blocks[self._block_key(idx)]
        key = (idx.kind, idx.gate if idx.kind == "G" else "")
        pos = self.position
        return {pos[ReducedIndex(key[0], b, key[1])]: 1 for b in blk.pull(idx.label)}

    def pullback(self, f: Mapping) -> dict:
        """Q^T f for a complete covector ``f``; returns {ReducedIndex: value}."""
        acc: dict[int, object] = {}
        for idx, v in f.items():
            for p, c in self.pull_index(ParamIndex(*idx)).items():
                acc[p] = acc.get(p, 0) + c * v
        return ParamVector({self.indices[p]: v for p, v in acc.items()})

    def column(self, r: ReducedIndex) -> ParamVector:
        pc.check_cap(self.n, "embedding column")
        r = ReducedIndex(*r)
        if self._custom_cols is not None:
            c = self._custom_cols[self.position[r]]
            return ParamVector({self.space.index(k): v for k, v in c.items()})
        blk = self.blocks[self._block_key(r)]
        return ParamVector({ParamIndex(r.kind, a, r.gate): 1 for a in blk.push(r.label)})

    def embed(self, r: Mapping) -> ParamVector:
        """x = Q(r) as a sparse complete vector."""
        out: dict = {}
        for ri, v in r.items():
            if v == 0:
                continue
            for idx, c in self.column(ri).items():
                out[idx] = out.get(idx, 0) + c * v
        return ParamVector(out)

    def embed_arrays(self, r: Mapping, dtype=float) -> dict[tuple[str, str], np.ndarray]:
        """Dense per-block arrays of Q(r)."""
        pc.check_cap(self.n, "dense embedding")
        if self._custom_cols is not None:
            return to_arrays(self.embed(r), self.gateset, dtype)
        per: dict[tuple[str, str], dict[int, object]] = {k: {} for k in self.blocks}
        for ri, v in r.items():
            per[self._block_key(ri)][ri.label] = v
        return {k: blk.embed_dense(per[k], dtype) for k, blk in self.blocks.items()}

    def left_inverse(self, x: Mapping) -> tuple[ParamVector, ParamVector]:
        """Reduced ``r`` with Q(r) closest to ``x`` on the image and the residual ``x - Q(r)``.

        The residual is empty exactly when ``x`` lies in the image of Q.
        """
        if self._custom_cols is not None:
            cols = {self.space.col(ParamIndex(*k)): Fraction(v) for k, v in x.items() if v}
            expr, rem = self._solver.decompose(cols)
            r = ParamVector({self.indices[t]: v for t, v in expr.items()})
            return r, ParamVector({self.space.index(k): v for k, v in rem.items()})
        exact = not any(isinstance(v, (float, np.floating)) for v in x.values())
        dtype = object if exact else float
        arrays = to_arrays(x, self.gateset, dtype)
        r_out, res_out = {}, {}
        for key, blk in self.blocks.items():
            r_b, res = blk.invert_dense(arrays[key])
            for lab, v in r_b.items():
                r_out[ReducedIndex(key[0], lab, key[1])] = v
            for lab in np.nonzero(res)[0]:
                lab = int(lab)
                if lab:
                    res_out[ParamIndex(key[0], lab, key[1])] = res[lab]
        return ParamVector(r_out), ParamVector(res_out)

    def in_image(self, x: Mapping, tol: float = 0.0) -> bool:
        _, res = self.left_inverse(x)
        return all(abs(v) <= tol for v in res.values())

    def describe(self) -> str:
        return f"{self.kind} ansatz on {self.n} qubits, dim X_R = {self.dim}"


def build_embedding(gateset: GateSet, ansatz: AnsatzSpec) -> EmbeddingMap:
    return EmbeddingMap(gateset, ansatz)


def to_arrays(x: Mapping, gateset: GateSet, dtype=float) -> dict[tuple[str, str], np.ndarray]:
    """Dense per-block arrays of a sparse complete vector."""
    n = gateset.n
    pc.check_cap(n, "dense parameter arrays")
    out = {("S", ""): np.zeros(1 << n, dtype=dtype), ("M", ""): np.zeros(1 << n, dtype=dtype)}
    for g in gateset.names():
        out[("G", g)] = np.zeros(1 << 2 * n, dtype=dtype)
    for idx, v in x.items():
        idx = ParamIndex(*idx)
        key = (idx.kind, idx.gate if idx.kind == "G" else "")
        if key not in out:
            raise KeyError(f"index {idx} does not belong to this gate set")
        out[key][idx.label] = v
    return out


def mobius_inverse_spam(x: Mapping[int, object], n: int, omega: FactorSet) -> dict[int, object]:
    """r_nu = sum over subsets mu of nu of (-1)^(|nu|-|mu|) x_mu, for nu in omega."""
    r = {}
    for nu in omega:
        acc = 0
        sub = nu
        while sub:
            v = x.get(sub, 0)
            if v:
                acc += -v if (pc.popcount(nu) - pc.popcount(sub)) & 1 else v
            sub = (sub - 1) & nu
        if acc != 0:
            r[nu] = acc
    return r


def mobius_inverse_gate(x: Mapping[int, object], n: int, omega: FactorSet) -> dict[int, object]:
    """r_b = sum over a majorized by b of (-1)^(w(b)-w(a)) x_a, for b consistent with omega."""
    r = {}
    for b in omega.consistent_labels():
        wb = pc.weight(b, n)
        acc = 0
        for a in pc.sub_labels(b, n):
            v = x.get(a, 0) if a else 0
            if v:
                acc += -v if (wb - pc.weight(a, n)) & 1 else v
        if acc != 0:
            r[b] = acc
    return r


def mobius_forward_spam(r: Mapping[int, object], n: int) -> dict[int, object]:
    """x_u = sum over nu in r contained in u of r_nu (all non-empty u)."""
    out = {}
    for u in range(1, 1 << n):
        acc = sum((v for nu, v in r.items() if nu & u == nu), 0)
        if acc != 0:
            out[u] = acc
    return out


def mobius_forward_gate(r: Mapping[int, object], n: int) -> dict[int, object]:
    """x_a = sum over b in r majorized by a of r_b (all non-identity a)."""
    arr = _dense(n, r, 4 ** n, object)
    x = zeta_paulis(arr, n)
    return {a: x[a] for a in range(1, 4 ** n) if x[a] != 0}


# ---------------------------------------------------------------------------
# ground-truth models


@dataclass
class GroundTruthModel:
    """Noise model with float fidelity exponents per block.

    ``reduced`` holds the reduced parameters when the model is known to lie
    in the image of the embedding (None after a non-representable change).
    """

    embedding: EmbeddingMap
    arrays: dict[tuple[str, str], np.ndarray]
    reduced: dict | None = None

    @classmethod
    def from_reduced(cls, Q: EmbeddingMap, r: Mapping) -> "GroundTruthModel":
        r = {ReducedIndex(*k): float(v) for k, v in r.items()}
        return cls(Q, Q.embed_arrays(r, float), r)

    @property
    def n(self) -> int:
        return self.embedding.n

    def x_spam(self, kind: str, u: int) -> float:
        return float(self.arrays[(kind, "")][u])

    def x_gate(self, gate: str, a: int) -> float:
        return float(self.arrays[("G", gate)][a])

    def fidelity(self, idx: ParamIndex) -> float:
        key = (idx.kind, idx.gate if idx.kind == "G" else "")
        return float(np.exp(-self.arrays[key][idx.label]))

    def value(self, f: Mapping) -> float:
        """Evaluate a complete covector on the model's exponents."""
        tot = 0.0
        for idx, c in f.items():
            idx = ParamIndex(*idx)
            key = (idx.kind, idx.gate if idx.kind == "G" else "")
            tot += float(c) * float(self.arrays[key][idx.label])
        return tot

    def reduced_value(self, f: Mapping) -> float:
        if self.reduced is None:
            raise ValueError("model has no reduced parametrization")
        return sum(float(c) * self.reduced.get(ReducedIndex(*k), 0.0) for k, c in f.items())

    def min_fidelity(self) -> float:
        return float(min(np.exp(-arr[1:]).min() for arr in self.arrays.values()))

    def to_json(self) -> dict:
        n = self.n
        out = {"n": n, "ansatz": self.embedding.kind}
        if self.reduced is not None:
            out["reduced"] = {k.render(n): repr(float(v))
                              for k, v in sorted(self.reduced.items())}
        return out

    @classmethod
    def from_json(cls, Q: EmbeddingMap, data: Mapping | str) -> "GroundTruthModel":
        if isinstance(data, str):
            data = json.loads(data)
        if int(data.get("n", Q.n)) != Q.n:
            raise ValueError("model and gate set disagree on the number of qubits")
        if "reduced" not in data:
            raise ValueError("model file has no reduced parameters")
        r = {parse_index(k, ReducedIndex): float(v) for k, v in data["reduced"].items()}
        unknown = [k for k in r if k not in Q.position]
        if unknown:
            raise ValueError(f"model parameter {unknown[0].render(Q.n)} is not in the ansatz")
        return cls.from_reduced(Q, r)


def random_model(Q: EmbeddingMap, seed: int, scale: float, spam_scale: float | None = None,
                 signed: bool = False) -> GroundTruthModel:
    """Random model in the image of ``Q``.

    Gate blocks draw Lindblad rates uniformly in ``[0, scale]`` on the labels
    allowed by the ansatz (``[-scale, scale]`` when ``signed``) and convert
    them to fidelity exponents.  SPAM blocks draw reduced parameters directly
    in ``[0, spam_scale]``.  Custom ansatzes draw every reduced parameter
    directly.
    """
    if scale < 0 or (spam_scale is not None and spam_scale < 0):
        raise ValueError("scales must be nonnegative")
    spam_scale = scale if spam_scale is None else spam_scale
    rng = np.random.default_rng(seed)
    n = Q.n
    lo = -1.0 if signed else 0.0

    def draw(k, s):
        return rng.uniform(lo, 1.0, size=k) * s

    if Q.kind == "custom":
        vals = draw(Q.dim, scale)
        return GroundTruthModel.from_reduced(Q, dict(zip(Q.indices, vals)))
    r: dict[ReducedIndex, float] = {}
    for (kind, gname), blk in Q.blocks.items():
        if kind in ("S", "M"):
            for lab, v in zip(blk.labels, draw(len(blk.labels), spam_scale)):
                r[ReducedIndex(kind, lab, "")] = float(v)
            continue
        if isinstance(blk, _IdentityBlock):
            gen_labels = list(range(1, 4 ** n))
        elif isinstance(blk, _LocalGateBlock):
            gen_labels = blk.labels
        else:
            gen_labels = blk.labels
        tau = dict(zip(gen_labels, draw(len(gen_labels), scale)))
        x = lindblad_to_fidelity(n, tau=tau)
        rb, _ = blk.invert_dense(x)
        for lab in blk.labels:
            v = float(rb.get(lab, 0.0))
            if v != 0.0:
                r[ReducedIndex("G", lab, gname)] = v
    return GroundTruthModel.from_reduced(Q, r)
