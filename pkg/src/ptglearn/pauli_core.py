"""Symplectic Pauli labels, support patterns, majorization and factor sets.

A Pauli label on n qubits is stored as a single packed integer
``(x_bits << n) | z_bits`` where qubit 1 is the most significant bit of each
half.  Sorting packed integers therefore gives the canonical order used by
every module: lexicographic on ``(x_bits, z_bits)`` read as unsigned ints.

Per-site encoding is the Hermitian convention ``(x, z)``: ``(0,0)=I``,
``(1,0)=X``, ``(1,1)=Y``, ``(0,1)=Z`` with ``Y = iXZ``.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

DEFAULT_N_MAX = 6
N_MAX_ENV = "PTGLEARN_N_MAX"

_n_max_override: int | None = None


class CapExceeded(ValueError):
    """Raised when a brute-force enumeration would exceed the qubit cap."""


def get_n_max() -> int:
    if _n_max_override is not None:
        return _n_max_override
    env = os.environ.get(N_MAX_ENV)
    if env:
        return int(env)
    return DEFAULT_N_MAX


def set_n_max(value: int | None) -> None:
    """Override the brute-force cap for this process (``None`` restores env/default)."""
    global _n_max_override
    _n_max_override = value


def check_cap(n: int, what: str = "enumeration") -> None:
    cap = get_n_max()
    if n > cap:
        raise CapExceeded(f"{what} needs n={n} but the brute-force cap is n_max={cap}")


# ---------------------------------------------------------------------------
# integer-level helpers (hot paths work on packed ints)

_CHARS = "IZXY"  # index = 2*x + z


def popcount(v: int) -> int:
    return bin(v).count("1")


def split(a: int, n: int) -> tuple[int, int]:
    return a >> n, a & ((1 << n) - 1)


def pack(x: int, z: int, n: int) -> int:
    return (x << n) | z


def support_bits(a: int, n: int) -> int:
    x, z = split(a, n)
    return x | z


def weight(a: int, n: int) -> int:
    return popcount(support_bits(a, n))


def symp(a: int, b: int, n: int) -> int:
    ax, az = split(a, n)
    bx, bz = split(b, n)
    return (popcount(ax & bz) + popcount(az & bx)) & 1


def majorizes_int(b: int, a: int, n: int) -> bool:
    """True iff every non-identity site of ``b`` equals the same site of ``a``."""
    sb = support_bits(b, n)
    mask = (sb << n) | sb
    return (a & mask) == b


def restrict(a: int, mask: int, n: int) -> int:
    """Keep only the sites in the pattern ``mask``; identity elsewhere."""
    return a & ((mask << n) | mask)


def sub_labels(a: int, n: int) -> Iterator[int]:
    """All ``b`` with ``b`` majorized by ``a`` (including the identity)."""
    s = support_bits(a, n)
    sub = s
    while True:
        yield restrict(a, sub, n)
        if sub == 0:
            return
        sub = (sub - 1) & s


def site_char(a: int, n: int, j: int) -> str:
    """Single-qubit factor on qubit ``j`` (1-based)."""
    x, z = split(a, n)
    bit = n - j
    return _CHARS[2 * ((x >> bit) & 1) + ((z >> bit) & 1)]


def pauli_str(a: int, n: int) -> str:
    return "".join(site_char(a, n, j) for j in range(1, n + 1))


def parse_pauli(text: str) -> tuple[int, int]:
    """Parse a string over {I,X,Y,Z}; returns ``(packed, n)``."""
    text = text.strip().upper()
    n = len(text)
    if n == 0:
        raise ValueError("empty Pauli string")
    x = z = 0
    for ch in text:
        if ch not in _CHARS:
            raise ValueError(f"bad Pauli character {ch!r} in {text!r}")
        k = _CHARS.index(ch)
        x = (x << 1) | (k >> 1)
        z = (z << 1) | (k & 1)
    return pack(x, z, n), n


def pattern_str(bits: int, n: int) -> str:
    return format(bits, f"0{n}b") if n else ""


def parse_pattern(text: str) -> tuple[int, int]:
    text = text.strip()
    if not text or any(c not in "01" for c in text):
        raise ValueError(f"bad pattern string {text!r}")
    return int(text, 2), len(text)


def qubit_bit(j: int, n: int) -> int:
    """Pattern bit for qubit ``j`` (1-based)."""
    if not 1 <= j <= n:
        raise ValueError(f"qubit {j} out of range for n={n}")
    return 1 << (n - j)


def qubits_of(bits: int, n: int) -> list[int]:
    return [j for j in range(1, n + 1) if bits & qubit_bit(j, n)]


def bits_of(qubits: Iterable[int], n: int) -> int:
    out = 0
    for j in qubits:
        out |= qubit_bit(j, n)
    return out


def labels_with_support(mask: int, n: int) -> Iterator[int]:
    """Every Pauli whose support is exactly ``mask``, in canonical order."""
    sites = qubits_of(mask, n)
    out = []
    for choice in itertools.product((1, 2, 3), repeat=len(sites)):
        x = z = 0
        for j, k in zip(sites, choice):
            bit = qubit_bit(j, n)
            if k & 2:
                x |= bit
            if k & 1:
                z |= bit
        out.append(pack(x, z, n))
    return iter(sorted(out))


def labels_within(mask: int, n: int) -> Iterator[int]:
    """Every Pauli (identity included) supported inside ``mask``, canonical order."""
    sites = qubits_of(mask, n)
    out = []
    for choice in itertools.product((0, 1, 2, 3), repeat=len(sites)):
        x = z = 0
        for j, k in zip(sites, choice):
            bit = qubit_bit(j, n)
            if k & 2:
                x |= bit
            if k & 1:
                z |= bit
        out.append(pack(x, z, n))
    return iter(sorted(out))


# ---------------------------------------------------------------------------
# value types


@dataclass(frozen=True, order=True)
class PauliLabel:
    """An n-qubit Pauli operator up to sign, in symplectic form."""

    n: int
    x_bits: int
    z_bits: int

    def __post_init__(self):
        lim = 1 << self.n
        if self.n < 0 or not (0 <= self.x_bits < lim and 0 <= self.z_bits < lim):
            raise ValueError("x_bits and z_bits must fit in n bits")

    @classmethod
    def from_int(cls, a: int, n: int) -> "PauliLabel":
        x, z = split(a, n)
        return cls(n, x, z)

    @classmethod
    def parse(cls, text: str) -> "PauliLabel":
        a, n = parse_pauli(text)
        return cls.from_int(a, n)

    @classmethod
    def identity(cls, n: int) -> "PauliLabel":
        return cls(n, 0, 0)

    @property
    def packed(self) -> int:
        return pack(self.x_bits, self.z_bits, self.n)

    def is_identity(self) -> bool:
        return self.x_bits == 0 and self.z_bits == 0

    def weight(self) -> int:
        return popcount(self.x_bits | self.z_bits)

    def __str__(self) -> str:
        return pauli_str(self.packed, self.n)


@dataclass(frozen=True, order=True)
class Pattern:
    """Support indicator of a Pauli; equivalently a subset of the qubits."""

    n: int
    bits: int

    def __post_init__(self):
        if not 0 <= self.bits < (1 << self.n):
            raise ValueError("pattern bits must fit in n bits")

    @classmethod
    def parse(cls, text: str) -> "Pattern":
        bits, n = parse_pattern(text)
        return cls(n, bits)

    @classmethod
    def from_qubits(cls, qubits: Iterable[int], n: int) -> "Pattern":
        return cls(n, bits_of(qubits, n))

    def qubits(self) -> list[int]:
        return qubits_of(self.bits, self.n)

    def weight(self) -> int:
        return popcount(self.bits)

    def __str__(self) -> str:
        return pattern_str(self.bits, self.n)


def _check_same_n(a, b) -> None:
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} vs {b.n} qubits")


def symplectic_product(a: PauliLabel, b: PauliLabel) -> int:
    """0 if the two Paulis commute, 1 if they anticommute."""
    _check_same_n(a, b)
    return symp(a.packed, b.packed, a.n)


def pattern(a: PauliLabel) -> Pattern:
    return Pattern(a.n, a.x_bits | a.z_bits)


def majorizes(b: PauliLabel, a: PauliLabel) -> bool:
    """``b`` is majorized by ``a``: wherever ``b`` is not I it agrees with ``a``."""
    _check_same_n(a, b)
    return majorizes_int(b.packed, a.packed, a.n)


class FactorSet:
    """Downward-closed family of non-empty qubit subsets (stored as patterns)."""

    def __init__(self, n: int, members: Iterable[int]):
        self.n = n
        closed: set[int] = set()
        for m in members:
            if isinstance(m, Pattern):
                m = m.bits
            if m <= 0 or m >= (1 << n):
                raise ValueError(f"factor {m} is empty or out of range for n={n}")
            sub = m
            while sub:
                closed.add(sub)
                sub = (sub - 1) & m
        self.members = frozenset(closed)
        self._sorted = tuple(sorted(self.members))

    @classmethod
    def from_maximal(cls, n: int, maximal: Iterable[Iterable[int]]) -> "FactorSet":
        """Build from a list of qubit-index lists (1-based)."""
        return cls(n, [bits_of(q, n) for q in maximal])

    @classmethod
    def singletons(cls, n: int) -> "FactorSet":
        return cls(n, [qubit_bit(j, n) for j in range(1, n + 1)])

    @classmethod
    def all_subsets(cls, n: int, within: int | None = None) -> "FactorSet":
        top = (1 << n) - 1 if within is None else within
        return cls(n, [top] if top else [])

    def maximal(self) -> list[int]:
        return sorted(m for m in self.members
                      if not any(o != m and (o & m) == m for o in self.members))

    def __contains__(self, bits) -> bool:
        if isinstance(bits, Pattern):
            bits = bits.bits
        return bits in self.members

    def __iter__(self):
        return iter(self._sorted)

    def __len__(self) -> int:
        return len(self.members)

    def __eq__(self, other) -> bool:
        return isinstance(other, FactorSet) and self.n == other.n and self.members == other.members

    def __hash__(self) -> int:
        return hash((self.n, self.members))

    def issubset(self, other: "FactorSet") -> bool:
        return self.members <= other.members

    def covers(self, bits: int) -> bool:
        """Support ``bits`` lies inside some member (the empty support always does)."""
        return bits == 0 or bits in self.members

    def consistent_labels(self) -> list[int]:
        """All non-identity Paulis whose support is a member, canonical order."""
        out = []
        for m in self._sorted:
            out.extend(labels_with_support(m, self.n))
        return sorted(out)

    def __repr__(self) -> str:
        return "FactorSet(n=%d, maximal=%s)" % (
            self.n, [qubits_of(m, self.n) for m in self.maximal()])


def consistent_with(a: PauliLabel, omega: FactorSet) -> bool:
    _check_same_n(a, omega)
    return omega.covers(a.x_bits | a.z_bits)


def all_labels(n: int, include_identity: bool = False) -> range:
    """Every packed Pauli on n qubits in canonical order (cap-guarded)."""
    check_cap(n, "Pauli enumeration")
    return range(0 if include_identity else 1, 4 ** n)


def enumerate_paulis(n: int, predicate: Callable[[PauliLabel], bool] | None = None,
                     include_identity: bool = False) -> Iterator[PauliLabel]:
    for a in all_labels(n, include_identity):
        p = PauliLabel.from_int(a, n)
        if predicate is None or predicate(p):
            yield p


def enumerate_patterns(n: int, predicate: Callable[[Pattern], bool] | None = None,
                       include_empty: bool = False) -> Iterator[Pattern]:
    check_cap(n, "pattern enumeration")
    for bits in range(0 if include_empty else 1, 1 << n):
        p = Pattern(n, bits)
        if predicate is None or predicate(p):
            yield p
