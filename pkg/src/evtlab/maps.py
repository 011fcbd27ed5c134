"""Circle/interval maps: piecewise-affine mod-1 maps and the LSV family.

Provides orbit iteration (exact for rational points under affine branches),
derivative products, periodicity verification, first-return induced maps,
set preimages/images against :class:`~evtlab.arcs.ArcSet`, and stationary
orbit sampling.  Orbits of integer-slope affine maps are sampled as base-k
digit streams (the map acts as a left shift), which is exactly stationary
and immune to the floating-point collapse of ``kx mod 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from mpmath import mp

from .arcs import DEFAULT_PREC, ArcSet, mpf

Position = Union[Fraction, float, str]


class OrbitError(RuntimeError):
    """Orbit hit a branch endpoint or another unrecoverable state."""


class ReturnTimeout(RuntimeError):
    """First return to the base set not found within the step budget."""


@dataclass(frozen=True)
class AffineLaw:
    slope: Fraction
    offset: Fraction


@dataclass(frozen=True)
class LSVLaw:
    """x -> x (1 + 2^alpha x^alpha), the neutral branch on [0, 1/2)."""

    alpha: float


@dataclass(frozen=True)
class Branch:
    lo: Fraction
    hi: Fraction
    law: Union[AffineLaw, LSVLaw]


@dataclass(frozen=True)
class PiecewiseMap:
    branches: Tuple[Branch, ...]
    is_continuous: bool = False
    name: str = ""

    @property
    def degree(self) -> int:
        return len(self.branches)

    @property
    def is_affine(self) -> bool:
        return all(isinstance(b.law, AffineLaw) for b in self.branches)

    @property
    def constant_slope(self) -> Optional[Fraction]:
        slopes = {abs(b.law.slope) for b in self.branches if isinstance(b.law, AffineLaw)}
        if len(slopes) == 1 and self.is_affine:
            return next(iter(slopes))
        return None

    def branch_at(self, x) -> Branch:
        if isinstance(x, Fraction):
            for b in self.branches:
                if b.lo <= x < b.hi:
                    return b
        else:
            xf = float(x)
            for b in self.branches:
                if float(b.lo) <= xf < float(b.hi):
                    return b
            if xf == 1.0:
                return self.branches[-1]
        raise OrbitError(f"no branch contains {x}")


def affine_mod1(slope: int) -> PiecewiseMap:
    """The full-branch expanding map x -> slope*x mod 1 (slope >= 2)."""
    if slope < 2:
        raise ValueError("expanding map needs integer slope >= 2")
    k = Fraction(slope)
    branches = tuple(
        Branch(Fraction(i, slope), Fraction(i + 1, slope), AffineLaw(k, Fraction(-i)))
        for i in range(slope)
    )
    return PiecewiseMap(branches, is_continuous=True, name=f"{slope}x mod 1")


def piecewise_affine(pieces: Sequence[Tuple[Fraction, Fraction, Fraction, Fraction]],
                     is_continuous: bool = False) -> PiecewiseMap:
    """Build from (lo, hi, slope, offset) tuples; domains must partition [0,1)."""
    branches = tuple(Branch(Fraction(lo), Fraction(hi), AffineLaw(Fraction(a), Fraction(b)))
                     for lo, hi, a, b in pieces)
    total = sum(b.hi - b.lo for b in branches)
    if total != 1:
        raise ValueError("branch domains must partition [0,1)")
    for b in branches:
        if abs(b.law.slope) <= 1:
            raise ValueError("expanding map needs |slope| > 1 on every branch")
    return PiecewiseMap(branches, is_continuous=is_continuous)


def lsv(alpha: float) -> PiecewiseMap:
    """Liverani-Saussol-Vaienti intermittent map with neutral fixed point at 0."""
    if not 0 < alpha < 1:
        raise ValueError("LSV requires alpha in (0, 1)")
    h = Fraction(1, 2)
    return PiecewiseMap(
        (Branch(Fraction(0), h, LSVLaw(alpha)),
         Branch(h, Fraction(1), AffineLaw(Fraction(2), Fraction(-1)))),
        is_continuous=False,
        name=f"LSV({alpha})",
    )


# -- pointwise dynamics ----------------------------------------------------

def _apply_branch(law, x, prec):
    if isinstance(law, AffineLaw):
        if isinstance(x, Fraction):
            return (law.slope * x + law.offset) % 1
        with mp.workprec(prec):
            return (mpf(str(law.slope)) * x + mpf(law.offset.numerator) / law.offset.denominator) % 1
    # LSV neutral branch
    with mp.workprec(prec):
        xm = mpf(x)
        a = mpf(law.alpha)
        return xm * (1 + 2**a * xm**a)


def step(pmap: PiecewiseMap, x, prec: int = DEFAULT_PREC):
    b = pmap.branch_at(x)
    if isinstance(b.law, LSVLaw) and isinstance(x, Fraction):
        x = mpf(x.numerator) / x.denominator
    return _apply_branch(b.law, x, prec)

def iterate(pmap: PiecewiseMap, x, steps: int, prec: int = DEFAULT_PREC):
    """f^steps(x); exact when x is a Fraction and all branches are affine."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if not isinstance(x, Fraction):
        with mp.workprec(prec):
            x = mpf(x)
    for _ in range(steps):
        x = step(pmap, x, prec)
    return x


def derivative_at(pmap: PiecewiseMap, x, prec: int = DEFAULT_PREC):
    b = pmap.branch_at(x)
    if isinstance(b.law, AffineLaw):
        return abs(b.law.slope)
    with mp.workprec(prec):
        xm = mpf(x)
        a = mpf(b.law.alpha)
        return 1 + (1 + a) * 2**a * xm**a


def derivative_product(pmap: PiecewiseMap, x, steps: int, prec: int = DEFAULT_PREC):
    """|Df^steps(x)| = product of branch-slope magnitudes along the orbit.

    Returns a Fraction when the orbit stays exact (Fraction point, affine
    branches); raises :class:`OrbitError` if the orbit lands on a branch
    endpoint at working precision.
    """
    exact = isinstance(x, Fraction) and pmap.is_affine
    prod = Fraction(1) if exact else 1.0
    tol = mpf(2) ** (-(prec - 10))
    for _ in range(steps):
        if not exact:
            with mp.workprec(prec):
                xm = mpf(x)
                for b in pmap.branches:
                    if abs(xm - mpf(b.lo.numerator) / b.lo.denominator) < tol:
                        raise OrbitError(f"orbit hits branch endpoint near {b.lo}")
        d = derivative_at(pmap, x, prec)
        prod = prod * d if exact else prod * float(d)
        x = step(pmap, x, prec)
    return prod


@dataclass(frozen=True)
class PeriodicityCheck:
    is_periodic: bool
    is_prime_period: bool
    multiplier: object


def verify_periodic(pmap: PiecewiseMap, zeta, p: int, prec: int = DEFAULT_PREC) -> PeriodicityCheck:
    """Check f^p(zeta) = zeta, period primality, and the repelling multiplier."""
    if p < 1:
        raise ValueError("period must be >= 1")

    def returns(steps: int) -> bool:
        y = iterate(pmap, zeta, steps, prec)
        if isinstance(y, Fraction) and isinstance(zeta, Fraction):
            return y == zeta
        with mp.workprec(prec):
            d = abs(mpf(y) - mpf(zeta))
            return min(d, 1 - d) < mpf(2) ** (-60)

    if not returns(p):
        return PeriodicityCheck(False, False, None)
    prime = all(not returns(d) for d in range(1, p) if p % d == 0)
    mult = derivative_product(pmap, zeta, p, prec)
    return PeriodicityCheck(True, prime, mult)


def induced_first_return(pmap: PiecewiseMap, y_lo, y_hi, x,
                         budget: int = 10**9, prec: int = 60):
    """First return of x in Y = [y_lo, y_hi) under f: (return point, time)."""
    with mp.workprec(prec):
        lo, hi = mpf(y_lo), mpf(y_hi)
        xm = mpf(x)
        if not (lo <= xm < hi):
            raise ValueError("x must lie in the base Y")
        for j in range(1, budget + 1):
            xm = step(pmap, xm, prec)
            if lo <= xm < hi:
                return xm, j
    raise ReturnTimeout(f"no return to [{y_lo}, {y_hi}) within {budget} steps")


# -- set dynamics ----------------------------------------------------------

def _branch_bounds_mpf(b: Branch, prec):
    with mp.workprec(prec):
        return (mpf(b.lo.numerator) / b.lo.denominator,
                mpf(b.hi.numerator) / b.hi.denominator)


def _lsv_inverse(alpha, y, prec):
    """Inverse of the neutral branch on [0, 1/2); monotone bisection."""
    with mp.workprec(prec + 20):
        y = mpf(y)
        if y <= 0:
            return mpf(0)
        if y >= 1:
            return mpf("0.5")
        a = mpf(alpha)
        g = lambda x: x * (1 + 2**a * x**a) - y
        lo, hi = mpf(0), mpf("0.5")
        for _ in range(prec + 30):
            mid = (lo + hi) / 2
            if g(mid) <= 0:
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2


def preimage(target: ArcSet, pmap: PiecewiseMap) -> ArcSet:
    """{x : f(x) in target}, computed branch by branch via branch inverses."""
    prec = target.prec
    out = []
    with mp.workprec(prec):
        for b in pmap.branches:
            c, d = _branch_bounds_mpf(b, prec)
            if isinstance(b.law, AffineLaw):
                a = mpf(b.law.slope.numerator) / b.law.slope.denominator
                off = mpf(b.law.offset.numerator) / b.law.offset.denominator
                y0, y1 = a * c + off, a * d + off
                if a < 0:
                    y0, y1 = y1, y0
                for s, t in target.segments:
                    jlo = int(mp.floor(y0 - t)) - 1
                    jhi = int(mp.ceil(y1 - s)) + 1
                    for j in range(jlo, jhi + 1):
                        ss, tt = s + j, t + j
                        lo_y, hi_y = max(ss, y0), min(tt, y1)
                        if hi_y <= lo_y:
                            continue
                        x0, x1 = (lo_y - off) / a, (hi_y - off) / a
                        if x0 > x1:
                            x0, x1 = x1, x0
                        x0, x1 = max(x0, c), min(x1, d)
                        if x1 > x0:
                            out.append((x0, x1))
            else:
                for s, t in target.segments:
                    x0 = _lsv_inverse(b.law.alpha, s, prec)
                    x1 = _lsv_inverse(b.law.alpha, t, prec)
                    x0, x1 = max(x0, c), min(x1, d)
                    if x1 > x0:
                        out.append((x0, x1))
    return ArcSet(out, prec)


def forward_image(s: ArcSet, pmap: PiecewiseMap) -> ArcSet:
    """f(S); segments are split at branch boundaries and mapped monotonically."""
    prec = s.prec
    out = []
    with mp.workprec(prec):
        for b in pmap.branches:
            c, d = _branch_bounds_mpf(b, prec)
            for lo, hi in s.segments:
                x0, x1 = max(lo, c), min(hi, d)
                if x1 <= x0:
                    continue
                if isinstance(b.law, AffineLaw):
                    a = mpf(b.law.slope.numerator) / b.law.slope.denominator
                    off = mpf(b.law.offset.numerator) / b.law.offset.denominator
                    y0, y1 = a * x0 + off, a * x1 + off
                else:
                    al = mpf(b.law.alpha)
                    y0 = x0 * (1 + 2**al * x0**al)
                    y1 = x1 * (1 + 2**al * x1**al)
                if y0 > y1:
                    y0, y1 = y1, y0
                if y1 - y0 >= 1:
                    return ArcSet.full(prec)
                out.append((y0 % 1, y0 % 1 + (y1 - y0)))
    return ArcSet(out, prec)


def first_return_of_set(a: ArcSet, pmap: PiecewiseMap, max_steps: int = 200) -> int:
    """R(A) = min j >= 1 with f^j(A) meeting A (set-level first return time)."""
    img = a
    for j in range(1, max_steps + 1):
        img = forward_image(img, pmap)
        if not a.intersect(img).is_empty():
            return j
    raise ReturnTimeout(f"no set return within {max_steps} steps")


# -- stationary orbit sampling --------------------------------------------

def _window_for_base(base: int) -> int:
    # the scan keeps base**window as the modulus and forms m*base + digit,
    # so base**(window+1) must stay below 2**63
    w = 1
    while base ** (w + 2) <= 2**63:
        w += 1
    return w


class DigitOrbit:
    """Lebesgue-stationary orbit of ``base * x mod 1`` as an i.i.d. digit stream.

    The point is its base-k digit expansion; the map is the left shift.  The
    position at time t is reconstructed from a W-digit window, exact to
    k^-W.  Deterministic per seed.
    """

    def __init__(self, base: int, seed, window: Optional[int] = None):
        if base < 2:
            raise ValueError("base must be >= 2")
        self.base = base
        self.window = window or _window_for_base(base)
        if base ** (self.window + 1) > 2**63:
            raise ValueError("window too wide for 63-bit reconstruction")
        self._rng = np.random.Generator(np.random.PCG64(seed))
        self._digits = np.empty(0, dtype=np.int64)

    def digits(self, count: int) -> np.ndarray:
        if count > self._digits.size:
            extra = self._rng.integers(0, self.base, size=count - self._digits.size,
                                       dtype=np.int64)
            self._digits = np.concatenate([self._digits, extra])
        return self._digits[:count]

    def positions(self, length: int) -> np.ndarray:
        """float64 positions x_0 .. x_{length-1}."""
        from .kernels import digit_positions
        d = self.digits(length + self.window)
        return digit_positions(d, self.base, self.window, length)

    def exact_position(self, t: int, extra_windows: int = 2) -> Fraction:
        """High-precision position at time t from an extended digit window."""
        w = self.window * (1 + extra_windows)
        d = self.digits(t + w)[t:t + w]
        num = 0
        for dig in d.tolist():
            num = num * self.base + dig
        return Fraction(num, self.base ** w)


def sample_orbit(pmap: PiecewiseMap, length: int, rng_seed,
                 burn_in: Optional[int] = None) -> np.ndarray:
    """A stationary orbit sample as float64 positions.

    Integer-slope affine maps use the exact digit-stream shift (no burn-in
    needed); LSV orbits are iterated in double precision after a burn-in
    (default 1000) to approximate the a.c. invariant measure.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    slope = pmap.constant_slope
    if slope is not None and slope.denominator == 1 and pmap.is_continuous:
        return DigitOrbit(int(slope), rng_seed).positions(length)
    from .kernels import lsv_positions
    alpha = next(b.law.alpha for b in pmap.branches if isinstance(b.law, LSVLaw))
    burn = 1000 if burn_in is None else burn_in
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    x0 = float(rng.uniform())
    return lsv_positions(x0, alpha, length, burn)
