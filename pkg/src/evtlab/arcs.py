"""Exact set algebra for finite unions of arcs on the circle [0, 1).

Arcs are stored with high-precision endpoints (mpmath, default 80 bits) so
that repeated preimage cascades do not drift.  An ``ArcSet`` is the canonical
representation: sorted, pairwise disjoint, half-open segments with touching
segments merged.  Wrap-around arcs (hi < lo) are accepted on input and split
internally at 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Sequence, Tuple

from mpmath import mp, mpf as _mpf

DEFAULT_PREC = 80


def mpf(x):
    """mpmath float from any endpoint type, including Fraction."""
    if isinstance(x, Fraction):
        return _mpf(x.numerator) / x.denominator
    return _mpf(x)

#: hard cap on stored arcs; q-fold preimages under degree-k maps grow like k^q
MAX_ARCS = 10**6


class ArcBudgetError(RuntimeError):
    """Raised when an operation would exceed the arc-count budget."""


def _merge_tol(prec: int):
    # slivers below working precision are numerical noise
    return mpf(2) ** (-(prec - 10))


@dataclass(frozen=True)
class CircleArc:
    """A single arc on the circle, ``hi < lo`` encodes wrap-around."""

    lo: object
    hi: object

    def length(self, prec: int = DEFAULT_PREC):
        with mp.workprec(prec):
            lo, hi = mpf(self.lo), mpf(self.hi)
            return (hi - lo) % 1


class ArcSet:
    """Sorted disjoint union of circle arcs; immutable value type.

    Internally segments are half-open ``[a, b)`` with ``0 <= a < b <= 1``;
    a wrapped input arc becomes two segments.  All operations are pure.
    """

    __slots__ = ("segments", "prec")

    def __init__(self, segments: Sequence[Tuple[object, object]], prec: int = DEFAULT_PREC, _normalized: bool = False):
        self.prec = prec
        if _normalized:
            self.segments = tuple(segments)
            return
        self.segments = self._normalize(segments, prec)

    @staticmethod
    def _normalize(raw, prec) -> tuple:
        with mp.workprec(prec):
            tol = _merge_tol(prec)
            pieces = []
            for lo, hi in raw:
                lo, hi = mpf(lo) % 1, mpf(hi)
                if hi != 1:
                    hi = hi % 1
                if hi > lo:
                    pieces.append((lo, hi))
                elif hi < lo:           # wraps through 0
                    pieces.append((lo, mpf(1)))
                    if hi > 0:
                        pieces.append((mpf(0), hi))
                # lo == hi: degenerate, dropped
            pieces.sort()
            merged: List[Tuple[mpf, mpf]] = []
            for lo, hi in pieces:
                if hi - lo <= tol:
                    continue
                if merged and lo <= merged[-1][1] + tol:
                    if hi > merged[-1][1]:
                        merged[-1] = (merged[-1][0], hi)
                else:
                    merged.append((lo, hi))
            if len(merged) > MAX_ARCS:
                raise ArcBudgetError(f"arc count {len(merged)} exceeds budget {MAX_ARCS}")
            return tuple(merged)

    # -- constructors ------------------------------------------------------

    @classmethod
    def empty(cls, prec: int = DEFAULT_PREC) -> "ArcSet":
        return cls((), prec, _normalized=True)

    @classmethod
    def full(cls, prec: int = DEFAULT_PREC) -> "ArcSet":
        with mp.workprec(prec):
            return cls(((mpf(0), mpf(1)),), prec, _normalized=True)

    @classmethod
    def from_arcs(cls, arcs: Iterable[CircleArc], prec: int = DEFAULT_PREC) -> "ArcSet":
        return cls([(a.lo, a.hi) for a in arcs], prec)

    @classmethod
    def ball(cls, center, radius, prec: int = DEFAULT_PREC) -> "ArcSet":
        with mp.workprec(prec):
            c, r = mpf(center), mpf(radius)
            if r <= 0:
                return cls.empty(prec)
            if 2 * r >= 1:
                return cls.full(prec)
            return cls([(c - r, c + r)], prec)

    # -- presentation ------------------------------------------------------

    @property
    def arcs(self) -> Tuple[CircleArc, ...]:
        """Arcs with the pair touching 0 and 1 re-joined into one wrap arc."""
        segs = list(self.segments)
        with mp.workprec(self.prec):
            tol = _merge_tol(self.prec)
            if len(segs) >= 2 and segs[0][0] <= tol and segs[-1][1] >= 1 - tol \
                    and not (len(segs) == 1):
                first, last = segs[0], segs[-1]
                if first[1] < 1 and last[0] > 0:
                    segs = segs[1:-1] + [(last[0], first[1])]
        return tuple(CircleArc(lo, hi) for lo, hi in segs)

    def __len__(self):
        return len(self.segments)

    def __repr__(self):
        with mp.workprec(self.prec):
            inner = ", ".join(f"[{mp.nstr(lo, 8)}, {mp.nstr(hi, 8)})" for lo, hi in self.segments)
        return f"ArcSet({inner})"

    def is_empty(self) -> bool:
        return not self.segments

    # -- measure and membership -------------------------------------------

    def measure(self):
        with mp.workprec(self.prec):
            return sum((hi - lo for lo, hi in self.segments), mpf(0))

    def contains(self, x) -> bool:
        with mp.workprec(self.prec):
            x = mpf(x) % 1
            for lo, hi in self.segments:
                if lo <= x < hi:
                    return True
            return False

    # -- boolean algebra ---------------------------------------------------

    def complement(self) -> "ArcSet":
        with mp.workprec(self.prec):
            out = []
            cur = mpf(0)
            for lo, hi in self.segments:
                if lo > cur:
                    out.append((cur, lo))
                cur = hi
            if cur < 1:
                out.append((cur, mpf(1)))
            return ArcSet(out, self.prec)

    def union(self, other: "ArcSet") -> "ArcSet":
        return ArcSet(list(self.segments) + list(other.segments), self.prec)

    def intersect(self, other: "ArcSet") -> "ArcSet":
        with mp.workprec(self.prec):
            out = []
            a, b = self.segments, other.segments
            i = j = 0
            while i < len(a) and j < len(b):
                lo = max(a[i][0], b[j][0])
                hi = min(a[i][1], b[j][1])
                if hi > lo:
                    out.append((lo, hi))
                if a[i][1] < b[j][1]:
                    i += 1
                else:
                    j += 1
            return ArcSet(out, self.prec)

    def difference(self, other: "ArcSet") -> "ArcSet":
        return self.intersect(other.complement())

    def symmetric_difference(self, other: "ArcSet") -> "ArcSet":
        return self.difference(other).union(other.difference(self))

    # -- serialization -----------------------------------------------------

    def to_json(self) -> list:
        """Decimal-string ``[lo, hi]`` pairs, precision-preserving."""
        digits = int(self.prec * 0.30103) + 5
        with mp.workprec(self.prec):
            return [[mp.nstr(a.lo, digits), mp.nstr(a.hi, digits)] for a in self.arcs]

    @classmethod
    def from_json(cls, data: list, prec: int = DEFAULT_PREC) -> "ArcSet":
        return cls([(lo, hi) for lo, hi in data], prec)


def normalize(raw_arcs: Iterable[CircleArc], prec: int = DEFAULT_PREC) -> ArcSet:
    """Canonicalize a list of possibly overlapping/wrapping arcs."""
    return ArcSet.from_arcs(raw_arcs, prec)
