"""Observables with several maximal points along one orbit.

A spec bundles the base point, the maximal points (orbit offsets + local
shape laws), and the radius within which the shape laws apply.  It induces
the exceedance region U(u) as an :class:`~evtlab.arcs.ArcSet` and the
normalizing threshold solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Tuple

from mpmath import mp, mpf

from .arcs import DEFAULT_PREC, ArcSet
from .maps import PiecewiseMap, iterate, verify_periodic


class LevelRegimeError(ValueError):
    """Level below the regime where the shape laws describe U(u)."""


class SpecError(ValueError):
    """Observable definition violates a construction invariant."""


@dataclass(frozen=True)
class ShapeFn:
    """Local shape of the observable near a maximal point.

    neglog:        h(d) = -log d,       radius e^{-u}        (type-1 representative)
    powerlaw(p):   h(d) = d^-p,         radius u^{-1/p}      (type 2)
    boundedpower(D, g): h(d) = D - d^g, radius (D - u)^{1/g} (type 3)
    boundedlog(D): h(d) = D - 1/log(1/d), radius e^{-1/(D-u)} (bounded,
                   exponential-type approach to the maximum)
    """

    kind: str
    p: Fraction = Fraction(1)
    D: Fraction = Fraction(1)
    g: Fraction = Fraction(1)

    def __post_init__(self):
        if self.kind not in ("neglog", "powerlaw", "boundedpower",
                             "boundedlog", "custom"):
            raise SpecError(f"unknown shape kind {self.kind!r}")
        if self.kind == "powerlaw" and self.p <= 0:
            raise SpecError("powerlaw exponent must be positive")
        if self.kind == "boundedpower" and self.g <= 0:
            raise SpecError("boundedpower exponent must be positive")

    @property
    def bounded(self) -> bool:
        return self.kind in ("boundedpower", "boundedlog")

    @property
    def endpoint(self):
        """Maximum attainable value u_F at the point."""
        return mpf(self.D.numerator) / self.D.denominator if self.bounded else mp.inf

    def value(self, d, prec: int = DEFAULT_PREC):
        with mp.workprec(prec):
            d = mpf(d)
            if self.kind == "neglog":
                return mp.inf if d == 0 else -mp.log(d)
            if self.kind == "powerlaw":
                return mp.inf if d == 0 else d ** (-mpf(self.p.numerator) / self.p.denominator)
            if self.kind == "boundedpower":
                D = mpf(self.D.numerator) / self.D.denominator
                g = mpf(self.g.numerator) / self.g.denominator
                return D - d ** g
            if self.kind == "boundedlog":
                D = mpf(self.D.numerator) / self.D.denominator
                if d == 0:
                    return D
                if d >= 1:
                    raise SpecError("boundedlog shape needs distance < 1")
                return D + 1 / mp.log(d)
            raise SpecError("custom shapes need explicit callables")

    def radius(self, u, prec: int = DEFAULT_PREC):
        """epsilon(u): the ball radius with h(radius) = u."""
        with mp.workprec(prec):
            u = mpf(u)
            if self.kind == "neglog":
                return mp.e ** (-u)
            if self.kind == "powerlaw":
                if u <= 0:
                    raise LevelRegimeError("powerlaw shape needs u > 0")
                return u ** (-self.p.denominator / mpf(self.p.numerator))
            if self.kind == "boundedpower":
                D = mpf(self.D.numerator) / self.D.denominator
                if u >= D:
                    return mpf(0)
                g = mpf(self.g.numerator) / self.g.denominator
                return (D - u) ** (1 / g)
            if self.kind == "boundedlog":
                D = mpf(self.D.numerator) / self.D.denominator
                if u >= D:
                    return mpf(0)
                return mp.e ** (-1 / (D - u))
            raise SpecError("custom shapes need explicit callables")

    def level_floor(self, eps_bar, prec: int = DEFAULT_PREC):
        """Smallest level whose ball stays inside the shape-law radius."""
        return self.value(eps_bar, prec)


def neglog() -> ShapeFn:
    return ShapeFn("neglog")


def powerlaw(p) -> ShapeFn:
    return ShapeFn("powerlaw", p=Fraction(p))


def boundedpower(D, g) -> ShapeFn:
    return ShapeFn("boundedpower", D=Fraction(D), g=Fraction(g))


def boundedlog(D) -> ShapeFn:
    return ShapeFn("boundedlog", D=Fraction(D))


@dataclass(frozen=True)
class MaximalPoint:
    xi: object                      # position (mpf-compatible or Fraction)
    m: int                          # orbit offset: xi = f^m(zeta)
    shape: ShapeFn
    period: int = 0                 # per-point period, uncorrelated specs only
    rho: Fraction = Fraction(1)     # invariant density at xi


@dataclass(frozen=True)
class ObservableSpec:
    zeta: object
    points: Tuple[MaximalPoint, ...]
    eps_bar: object
    base_value: float = 0.0
    periodic: Optional[int] = None  # prime period of zeta, correlated case
    correlated: bool = True
    prec: int = DEFAULT_PREC

    @property
    def n_points(self) -> int:
        return len(self.points)

    def endpoint(self):
        return self.points[0].shape.endpoint

    def level_floor(self):
        with mp.workprec(self.prec):
            return max(pt.shape.level_floor(self.eps_bar, self.prec) for pt in self.points)


def as_mpf(x):
    """Convert a position (Fraction, str, float, mpf) to mpf losslessly."""
    if isinstance(x, Fraction):
        return mpf(x.numerator) / x.denominator
    return mpf(x)


def circle_dist(x, y, prec: int = DEFAULT_PREC):
    with mp.workprec(prec):
        d = abs(as_mpf(x) - as_mpf(y)) % 1
        return min(d, 1 - d)


def _min_pairwise_distance(xis, prec):
    with mp.workprec(prec):
        best = mpf(1)
        for i in range(len(xis)):
            for j in range(i + 1, len(xis)):
                best = min(best, circle_dist(xis[i], xis[j], prec))
        return best


def _build_spec(zeta, points, eps_bar, base_value, periodic, correlated, prec):
    if len(points) == 0:
        raise SpecError("at least one maximal point required")
    endpoints = {str(pt.shape.endpoint) for pt in points}
    if len(endpoints) > 1:
        raise SpecError("maximal points must share one maximum value "
                        "(mixed finite/infinite endpoints)")
    xis = [pt.xi for pt in points]
    if eps_bar is None:
        if len(xis) > 1:
            eps_bar = _min_pairwise_distance(xis, prec) / 3
        else:
            eps_bar = mpf("0.25")
    with mp.workprec(prec):
        eps_bar = as_mpf(eps_bar)
        if len(xis) > 1 and 2 * eps_bar > _min_pairwise_distance(xis, prec):
            raise SpecError("shape-law balls are not pairwise disjoint at eps_bar")
    return ObservableSpec(zeta, tuple(points), eps_bar, base_value,
                          periodic, correlated, prec)


def make_correlated_spec(pmap: PiecewiseMap, zeta,
                         entries: Sequence[Tuple[int, ShapeFn]],
                         periodic: Optional[int] = None,
                         eps_bar=None, base_value: float = 0.0,
                         rho: Optional[Sequence[Fraction]] = None,
                         prec: int = DEFAULT_PREC) -> ObservableSpec:
    """Spec with maximal points xi_i = f^{m_i}(zeta); entries are (m_i, shape_i)."""
    ms = [m for m, _ in entries]
    if ms != sorted(ms) or len(set(ms)) != len(ms):
        raise SpecError("orbit offsets must be strictly increasing")
    if ms[0] != 0:
        raise SpecError("first orbit offset must be 0 (relabel the base point)")
    if periodic is not None:
        chk = verify_periodic(pmap, zeta, periodic, prec)
        if not (chk.is_periodic and chk.is_prime_period):
            raise SpecError(f"zeta is not a prime-period-{periodic} point")
        if any(m > periodic - 1 for m in ms):
            raise SpecError("orbit offsets must stay within one period")
    points = []
    for idx, (m, shape) in enumerate(entries):
        xi = iterate(pmap, zeta, m, prec)
        r = Fraction(1) if rho is None else Fraction(rho[idx])
        points.append(MaximalPoint(xi, m, shape, rho=r))
    return _build_spec(zeta, points, eps_bar, base_value, periodic, True, prec)


def make_uncorrelated_spec(pmap: PiecewiseMap,
                           entries: Sequence[Tuple[object, ShapeFn, int]],
                           eps_bar=None, base_value: float = 0.0,
                           prec: int = DEFAULT_PREC) -> ObservableSpec:
    """Spec with independent maximal points; entries are (xi, shape, period).

    period = 0 marks a non-periodic (typical) point.
    """
    points = []
    for xi, shape, period in entries:
        if period:
            chk = verify_periodic(pmap, xi, period, prec)
            if not chk.is_periodic:
                raise SpecError(f"{xi} is not periodic with period {period}")
        points.append(MaximalPoint(xi, 0, shape, period=period))
    return _build_spec(points[0].xi, points, eps_bar, base_value, None, False, prec)


# -- the observable and its level sets ------------------------------------

def evaluate(spec: ObservableSpec, x, prec: Optional[int] = None):
    """phi(x): the shape law inside a ball, base value outside all balls."""
    prec = prec or spec.prec
    with mp.workprec(prec):
        for pt in spec.points:
            d = circle_dist(x, pt.xi, prec)
            if d < spec.eps_bar:
                return pt.shape.value(d, prec)
        return mpf(spec.base_value)


def exceedance_region(spec: ObservableSpec, u, prec: Optional[int] = None) -> ArcSet:
    """U(u) = {phi > u} as a union of balls around the maximal points."""
    prec = prec or spec.prec
    with mp.workprec(prec):
        u = mpf(u)
        segs = []
        for pt in spec.points:
            r = pt.shape.radius(u, prec)
            if r >= spec.eps_bar:
                raise LevelRegimeError(
                    f"level {u} below the shape regime (radius {r} >= eps_bar)")
            if r > 0:
                c = as_mpf(pt.xi)
                segs.append((c - r, c + r))
        return ArcSet(segs, prec)


def exceedance_measure(spec: ObservableSpec, u, prec: Optional[int] = None,
                       weighted: bool = True):
    """mu(U(u)) = sum of 2 rho_i eps_i(u); raises below the regime."""
    prec = prec or spec.prec
    with mp.workprec(prec):
        u = mpf(u)
        total = mpf(0)
        for pt in spec.points:
            r = pt.shape.radius(u, prec)
            if r >= spec.eps_bar:
                raise LevelRegimeError(f"level {u} below the shape regime")
            w = mpf(pt.rho.numerator) / pt.rho.denominator if weighted else mpf(1)
            total += 2 * r * w
        return total


def solve_threshold(spec: ObservableSpec, n: int, tau, prec: Optional[int] = None):
    """The level u_n with n * mu(U(u_n)) = tau, by bisection.

    mu(U(u)) is strictly decreasing in u on the valid range, so the root is
    unique; solved to |residual| <= 1e-12 * tau.
    """
    prec = prec or spec.prec
    with mp.workprec(prec):
        tau = as_mpf(tau)
        if tau <= 0:
            raise ValueError("tau must be positive")
        target = tau / n
        lo = spec.level_floor() * (1 + mpf(2) ** (-40))
        if exceedance_measure(spec, lo, prec) < target:
            raise LevelRegimeError("tau/n exceeds the measure of the maximal valid region")
        endpoint = spec.endpoint()
        if mp.isinf(endpoint):
            hi = max(lo * 2, lo + 1)
            while exceedance_measure(spec, hi, prec) > target:
                hi = hi * 2 + 1
        else:
            hi = endpoint
        for _ in range(prec + 60):
            mid = (lo + hi) / 2
            if mid >= endpoint or exceedance_measure(spec, mid, prec) > target:
                lo = mid
            else:
                hi = mid
            if n * abs(exceedance_measure(spec, (lo + hi) / 2, prec) - target) <= \
                    mpf("1e-12") * tau and abs(hi - lo) < mpf("1e-15") * max(1, abs(lo)):
                break
        return (lo + hi) / 2
