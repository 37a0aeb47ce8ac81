"""Exact sparse linear algebra over the rationals.

Rows are dicts ``column -> int`` kept primitive (gcd 1, positive leading entry);
elimination is fraction-free.  The leading column of a row is its smallest
column id, so callers choose the elimination order by how they number columns.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Iterable, Mapping


def _primitive(row: dict) -> dict:
    g = 0
    for v in row.values():
        g = gcd(g, v)
        if g == 1:
            break
    lead = row[min(row)]
    if lead < 0:
        g = -g
    if g not in (1, 0):
        return {k: v // g for k, v in row.items()}
    return row


def to_int_row(row: Mapping) -> dict:
    """Scale a rational row to a primitive integer row (zero entries dropped)."""
    items = [(k, Fraction(v)) for k, v in row.items() if v != 0]
    if not items:
        return {}
    den = 1
    for _, v in items:
        den = den * v.denominator // gcd(den, v.denominator)
    return _primitive({k: int(v * den) for k, v in items})


class Echelon:
    """Incrementally built row-echelon basis (one pivot row per leading column)."""

    def __init__(self):
        self.rows: dict[int, dict] = {}

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def rank(self) -> int:
        return len(self.rows)

    def reduce(self, row: Mapping) -> dict:
        """Remainder of ``row`` after leading-term reduction (empty iff dependent)."""
        r = to_int_row(row)
        rows = self.rows
        while r:
            p = min(r)
            piv = rows.get(p)
            if piv is None:
                return r
            a, b = piv[p], r[p]
            g = gcd(a, b)
            fa, fb = a // g, b // g
            out = {k: fa * v for k, v in r.items()}
            for k, v in piv.items():
                nv = out.get(k, 0) - fb * v
                if nv:
                    out[k] = nv
                else:
                    out.pop(k, None)
            r = _primitive(out) if out else out
        return r

    def add(self, row: Mapping) -> bool:
        r = self.reduce(row)
        if not r:
            return False
        self.rows[min(r)] = r
        return True

    def contains(self, row: Mapping) -> bool:
        return not self.reduce(row)

    def pivots(self) -> list[int]:
        return sorted(self.rows)

    def kernel(self, columns: Iterable[int]) -> list[dict]:
        """Basis of {v : row . v = 0 for every row}, one vector per free column.

        Each vector has a 1 at its free column and 0 at every other free column,
        which makes the basis canonical for the row space.
        """
        cols = sorted(set(columns))
        piv_desc = sorted(self.rows, reverse=True)
        out = []
        for f in cols:
            if f in self.rows:
                continue
            x: dict[int, Fraction] = {f: Fraction(1)}
            for p in piv_desc:
                row = self.rows[p]
                s = Fraction(0)
                for k, v in row.items():
                    if k != p:
                        xv = x.get(k)
                        if xv:
                            s += v * xv
                if s:
                    x[p] = -s / row[p]
            out.append({k: v for k, v in x.items() if v})
        return out


def rank_of(rows: Iterable[Mapping]) -> int:
    e = Echelon()
    for r in rows:
        e.add(r)
    return e.rank


def same_span(a: Iterable[Mapping], b: Iterable[Mapping]) -> bool:
    a, b = list(a), list(b)
    ea = Echelon()
    for r in a:
        ea.add(r)
    eb = Echelon()
    for r in b:
        eb.add(r)
    if ea.rank != eb.rank:
        return False
    return all(ea.contains(r) for r in b)


def dot(u: Mapping, v: Mapping):
    if len(u) > len(v):
        u, v = v, u
    return sum(val * v[k] for k, val in u.items() if k in v)


class Solver:
    """Tracks how each reduced row is expressed in terms of the inputs.

    Slower than :class:`Echelon` (rational arithmetic) but lets callers write a
    vector as an explicit combination of previously added vectors.
    """

    def __init__(self):
        self.rows: dict[int, tuple[dict, dict]] = {}
        self.count = 0

    @property
    def rank(self) -> int:
        return len(self.rows)

    def _reduce(self, row: Mapping, combo: dict):
        r = {k: Fraction(v) for k, v in row.items() if v}
        c = dict(combo)
        while r:
            p = min(r)
            hit = self.rows.get(p)
            if hit is None:
                break
            prow, pcombo = hit
            f = r[p]
            for k, v in prow.items():
                nv = r.get(k, 0) - f * v
                if nv:
                    r[k] = nv
                else:
                    r.pop(k, None)
            for k, v in pcombo.items():
                nv = c.get(k, 0) - f * v
                if nv:
                    c[k] = nv
                else:
                    c.pop(k, None)
        return r, c

    def add(self, row: Mapping, tag=None) -> bool:
        """Add ``row`` labelled ``tag`` (defaults to insertion count)."""
        tag = self.count if tag is None else tag
        self.count += 1
        r, c = self._reduce(row, {tag: Fraction(1)})
        if not r:
            return False
        p = min(r)
        lead = r[p]
        self.rows[p] = ({k: v / lead for k, v in r.items()},
                        {k: v / lead for k, v in c.items()})
        return True

    def decompose(self, row: Mapping) -> tuple[dict, dict]:
        """Split ``row`` as ``sum c[tag] * input[tag] + remainder``.

        The remainder is empty exactly when ``row`` is in the span; it is
        the echelon remainder, not an orthogonal projection.
        """
        r, c = self._reduce(row, {})
        return {k: -v for k, v in c.items() if v}, r

    def express(self, row: Mapping) -> dict | None:
        """Coefficients over tags with ``row = sum c[tag] * input[tag]``; None if outside span."""
        r, c = self._reduce(row, {})
        if r:
            return None
        return {k: -v for k, v in c.items() if v}
