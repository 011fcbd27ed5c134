"""Exact limiting cluster statistics for multi-maximum observables.

Ball radii at different maximal points shrink at different rates as the
level grows (e^-u, u^-e, (D-u)^e).  All asymptotic quantities are kept as
formal linear combinations of these scale classes with Fraction
coefficients, so limits of ratios are exact rationals: the slowest-decaying
class present in the denominator carries the limit, faster classes vanish.

The extremal index and the cluster-size distribution come from a nesting
recursion on the balls pulled back along the orbit connecting the maximal
points.  A finite-level oracle builds the same sets explicitly with
interval algebra, for cross-checking at concrete thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from mpmath import mp

from .arcs import ArcSet
from .maps import (PiecewiseMap, derivative_product, first_return_of_set,
                   preimage, verify_periodic)
from .observables import (ObservableSpec, ShapeFn, exceedance_region,
                          solve_threshold)


class AnalyticError(RuntimeError):
    """Exact asymptotics not computable for this configuration."""


class IndeterminateError(AnalyticError):
    """Ball nesting undecidable at leading order (radii tie exactly)."""


# -- scale classes ---------------------------------------------------------
#
# A class is (family, exponent):
#   ("exp",  e) ~ e^{-e u}      ("poly", e) ~ u^{-e}      ("root", e) ~ (D-u)^e
# "root" never mixes with the unbounded families (shared maximum enforced
# by the observable spec).

def _decay_cmp(a: Tuple[str, Fraction], b: Tuple[str, Fraction]) -> int:
    """-1 if a decays slower than b (a dominates in limits), 0 if equal."""
    fa, ea = a
    fb, eb = b
    if (fa == "root") != (fb == "root"):
        raise AnalyticError("bounded and unbounded scale classes cannot mix")
    if fa != fb:
        # poly decays slower than exp, whatever the exponents
        return -1 if fa == "poly" else 1
    if ea == eb:
        return 0
    return -1 if ea < eb else 1


class ScaleExpr:
    """Linear combination of scale classes with Fraction coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[Dict[Tuple[str, Fraction], Fraction]] = None):
        self.terms = {c: q for c, q in (terms or {}).items() if q != 0}

    @classmethod
    def term(cls, family: str, exponent, coeff) -> "ScaleExpr":
        return cls({(family, Fraction(exponent)): Fraction(coeff)})

    @classmethod
    def zero(cls) -> "ScaleExpr":
        return cls()

    def __add__(self, other: "ScaleExpr") -> "ScaleExpr":
        out = dict(self.terms)
        for c, q in other.terms.items():
            out[c] = out.get(c, Fraction(0)) + q
        return ScaleExpr(out)

    def __sub__(self, other: "ScaleExpr") -> "ScaleExpr":
        out = dict(self.terms)
        for c, q in other.terms.items():
            out[c] = out.get(c, Fraction(0)) - q
        return ScaleExpr(out)

    def scale(self, factor) -> "ScaleExpr":
        f = Fraction(factor)
        return ScaleExpr({c: q * f for c, q in self.terms.items()})

    def is_zero(self) -> bool:
        return not self.terms

    def dominant(self) -> Optional[Tuple[str, Fraction]]:
        dom = None
        for c in self.terms:
            if dom is None or _decay_cmp(c, dom) < 0:
                dom = c
        return dom

    def coeff(self, c) -> Fraction:
        return self.terms.get(c, Fraction(0))

    def __repr__(self):
        if not self.terms:
            return "ScaleExpr(0)"
        bits = [f"{q}*{f}^{e}" for (f, e), q in sorted(self.terms.items())]
        return "ScaleExpr(" + " + ".join(bits) + ")"


def limit_ratio(num: ScaleExpr, den: ScaleExpr) -> Fraction:
    """lim num(u)/den(u) as the level approaches the endpoint."""
    dom = den.dominant()
    if dom is None:
        raise AnalyticError("limit ratio with vanishing denominator")
    for c, q in num.terms.items():
        if q != 0 and _decay_cmp(c, dom) < 0:
            raise AnalyticError("ratio diverges: numerator decays slower")
    return num.coeff(dom) / den.coeff(dom)


def _radius_class(shape: ShapeFn) -> Tuple[str, Fraction]:
    if shape.kind == "neglog":
        return ("exp", Fraction(1))
    if shape.kind == "powerlaw":
        return ("poly", 1 / shape.p)
    if shape.kind == "boundedpower":
        return ("root", 1 / shape.g)
    raise AnalyticError(f"no scale class for shape kind {shape.kind!r}")


# nesting verdicts for a pulled-back ball against the ball it lands in
INSIDE, CONTAINS = "inside", "contains"


def _nesting(pull_cls, pull_coeff: Fraction, ball_cls, ball_coeff: Fraction) -> str:
    c = _decay_cmp(pull_cls, ball_cls)
    if c > 0:
        return INSIDE
    if c < 0:
        return CONTAINS
    if pull_coeff < ball_coeff:
        return INSIDE
    if pull_coeff > ball_coeff:
        return CONTAINS
    raise IndeterminateError(
        "pulled-back ball and target ball shrink at identical rate and size; "
        "nesting cannot be decided at leading order")


# -- the nesting recursion -------------------------------------------------

class _Recursion:
    """Shared machinery for the orbit-correlated cluster recursion."""

    def __init__(self, spec: ObservableSpec, pmap: PiecewiseMap):
        if not spec.correlated:
            raise AnalyticError("recursion applies to orbit-correlated maxima")
        self.spec = spec
        self.pmap = pmap
        self.N = spec.n_points
        self.m = [pt.m for pt in spec.points]
        self.period = spec.periodic
        self.cls = [_radius_class(pt.shape) for pt in spec.points]
        # ball measure = 2 * rho * radius
        self.muU = [ScaleExpr.term(c[0], c[1], 2 * pt.rho)
                    for c, pt in zip(self.cls, spec.points)]
        self._lam_cache: Dict[Tuple[int, int], Fraction] = {}
        self._rounds: List[List[int]] = [list(range(1, self.N + 1))]  # j vectors
        self._isets: List[set] = [set()]                              # I_0 unused

    # extended indices are 1-based; in the periodic case index e > N refers
    # to the orbit continued through further periods
    def _ext(self, e: int) -> Tuple[int, int]:
        """(0-based point index, orbit offset) for extended index e."""
        if self.period is None:
            if not 1 <= e <= self.N:
                raise AnalyticError(f"extended index {e} out of range")
            return e - 1, self.m[e - 1]
        i = (e - 1) % self.N
        return i, self.m[i] + self.period * ((e - 1) // self.N)

    def _lam(self, i: int, lag: int) -> Fraction:
        """|Df^lag| along the orbit starting at maximal point i (exact)."""
        if lag == 0:
            return Fraction(1)
        key = (i, lag)
        if key not in self._lam_cache:
            slope = self.pmap.constant_slope
            if slope is not None:
                val = slope ** lag
            else:
                xi = self.spec.points[i].xi
                if not isinstance(xi, Fraction):
                    raise AnalyticError(
                        "exact derivative product needs a rational point "
                        "on a non-constant-slope map")
                val = derivative_product(self.pmap, xi, lag)
                if not isinstance(val, Fraction):
                    raise AnalyticError("derivative product is not exact")
            self._lam_cache[key] = Fraction(val)
        return self._lam_cache[key]

    def _pull(self, i: int, e: int) -> Tuple[Tuple[str, Fraction], Fraction]:
        """Radius (class, coeff) of the ball at ext index e pulled back to point i."""
        pt, off = self._ext(e)
        lag = off - self.m[i]
        if lag < 0:
            raise AnalyticError("pullback lag must be nonnegative")
        return self.cls[pt], Fraction(1) / self._lam(i, lag)

    def _ell_range(self, i: int):
        """1-based successor index range for point i (1-based)."""
        if self.period is None:
            return range(i + 1, self.N + 1)
        return range(i + 1, self.N + i + 1)

    def _jext(self, ell: int, k: int) -> int:
        """j_{ell,k} for a possibly extended successor index ell."""
        jvec = self._rounds[k]
        if ell <= self.N:
            return jvec[ell - 1]
        return jvec[ell - self.N - 1] + self.N

    def _eligible(self, k: int):
        """Candidate indices for membership in I_k (1-based)."""
        if self.period is None:
            return range(1, self.N - k + 2) if k <= self.N else range(0)
        return range(1, self.N + 1)

    def _advance(self):
        """Compute I_k and the j vector of round k from round k-1."""
        k = len(self._rounds)
        prev = k - 1
        iset = set()
        for i in self._eligible(k):
            ball = (self.cls[i - 1], Fraction(1))
            verdicts = [_nesting(*self._pull(i - 1, self._jext(l, prev)), *ball)
                        for l in self._ell_range(i)]
            if verdicts and all(v == INSIDE for v in verdicts):
                iset.add(i)
        jvec = []
        for i in range(1, self.N + 1):
            if i in iset:
                best = None
                best_rad = None
                for l in self._ell_range(i):
                    e = self._jext(l, prev)
                    rad = self._pull(i - 1, e)
                    if best_rad is None or _decay_cmp(rad[0], best_rad[0]) < 0 \
                            or (rad[0] == best_rad[0] and rad[1] > best_rad[1]):
                        best, best_rad = e, rad
                jvec.append(best)
            else:
                jvec.append(i)
        self._isets.append(iset)
        self._rounds.append(jvec)

    def _ensure(self, k: int):
        while len(self._rounds) <= k:
            self._advance()

    def _alpha(self, e: int, i: int) -> ScaleExpr:
        """mu of the ball at ext index e pulled back to maximal point i."""
        pt, off = self._ext(e)
        lag = off - self.m[i]
        return self.muU[pt].scale(Fraction(1) / self._lam(i, lag))

    def cluster_measure(self, k: int) -> ScaleExpr:
        """Asymptotic measure of the set of clusters exceeding depth k."""
        if self.period is None and k >= self.N:
            return ScaleExpr.zero()
        self._ensure(k + 1)
        jk, jk1 = self._rounds[k], self._rounds[k + 1]
        out = ScaleExpr.zero()
        for i in self._isets[k + 1]:
            out = out + self._alpha(jk[i - 1], i - 1) - self._alpha(jk1[i - 1], i - 1)
        if self.period is None:
            i = self.N - k
            out = out + self._alpha(jk[i - 1], i - 1)
        return out

    def total_measure(self) -> ScaleExpr:
        out = ScaleExpr.zero()
        for e in self.muU:
            out = out + e
        return out


# -- public results --------------------------------------------------------

@dataclass(frozen=True)
class EIResult:
    theta: Fraction
    q: int
    cluster0: ScaleExpr              # asymptotic measure of one-per-cluster set
    total: ScaleExpr                 # asymptotic measure of the exceedance set
    point_weights: Tuple[Fraction, ...]   # each ball's share of the total measure
    point_indices: Tuple[Fraction, ...]   # per-point EI (uncorrelated case only)


@dataclass(frozen=True)
class MultiplicityResult:
    """Cluster-size distribution pi(k), exact, with an optional periodic tail.

    ``head[j]`` is pi(j+1).  When ``tail_start`` is set, sizes from that
    value on repeat with period ``tail_period`` and ratio ``tail_ratio``:
    pi(k + tail_period) = tail_ratio * pi(k) for k >= tail_start.
    """

    head: Tuple[Fraction, ...]
    tail_start: Optional[int] = None
    tail_period: int = 0
    tail_ratio: Fraction = Fraction(0)

    def pi(self, k: int) -> Fraction:
        if k < 1:
            raise ValueError("cluster sizes start at 1")
        if k <= len(self.head):
            return self.head[k - 1]
        if self.tail_start is None:
            return Fraction(0)
        d, r = self.tail_period, self.tail_ratio
        back = ((k - self.tail_start) // d) * d
        base = k - back
        while base > len(self.head):
            # head always covers one full tail period past tail_start
            base -= d
            back += d
        return self.head[base - 1] * r ** (back // d)

    def total_mass(self) -> Fraction:
        if self.tail_start is None:
            return sum(self.head, Fraction(0))
        d, r = self.tail_period, self.tail_ratio
        s = sum(self.head[:self.tail_start - 1], Fraction(0))
        for j in range(d):
            s += self.pi(self.tail_start + j) / (1 - r)
        return s

    def mean_cluster_size(self) -> Fraction:
        if self.tail_start is None:
            return sum((Fraction(k + 1) * v for k, v in enumerate(self.head)),
                       Fraction(0))
        d, r = self.tail_period, self.tail_ratio
        s = sum((Fraction(k) * self.head[k - 1] for k in range(1, self.tail_start)),
                Fraction(0))
        for j in range(d):
            k0 = self.tail_start + j
            p0 = self.pi(k0)
            s += p0 * (Fraction(k0) / (1 - r) + Fraction(d) * r / (1 - r) ** 2)
        return s


def select_q(spec: ObservableSpec, pmap: PiecewiseMap) -> Tuple[int, str]:
    """The gap parameter separating clusters, with a short rationale."""
    if spec.correlated:
        if spec.periodic is not None:
            return spec.periodic, "prime period of the base orbit"
        if spec.n_points == 1:
            return 0, "single non-periodic maximum: no clustering mechanism"
        return (spec.points[-1].m - spec.points[0].m,
                "orbit gap between first and last maximal point")
    periods = [pt.period for pt in spec.points]
    q = max(periods)
    if q == 0:
        return 0, "independent non-periodic maxima: no clustering mechanism"
    return q, "largest prime period among independent maxima"


def analytic_theta(spec: ObservableSpec, pmap: PiecewiseMap) -> EIResult:
    """Exact extremal index for the observable's exceedance process."""
    q, _ = select_q(spec, pmap)
    if not spec.correlated:
        return _theta_uncorrelated(spec, pmap, q)
    rec = _Recursion(spec, pmap)
    total = rec.total_measure()
    a0 = rec.cluster_measure(0)
    theta = limit_ratio(a0, total)
    weights = tuple(limit_ratio(mu, total) for mu in rec.muU)
    return EIResult(theta, q, a0, total, weights, ())


def _theta_uncorrelated(spec: ObservableSpec, pmap: PiecewiseMap, q: int) -> EIResult:
    total = ScaleExpr.zero()
    balls = []
    for pt in spec.points:
        c = _radius_class(pt.shape)
        mu = ScaleExpr.term(c[0], c[1], 2 * pt.rho)
        balls.append(mu)
        total = total + mu
    thetas = []
    for pt in spec.points:
        if pt.period == 0:
            thetas.append(Fraction(1))
            continue
        slope = pmap.constant_slope
        if slope is not None:
            lam = slope ** pt.period
        else:
            chk = verify_periodic(pmap, pt.xi, pt.period)
            if not isinstance(chk.multiplier, Fraction):
                raise AnalyticError("periodic multiplier is not exact")
            lam = chk.multiplier
        thetas.append(1 - 1 / Fraction(lam))
    weights = tuple(limit_ratio(mu, total) for mu in balls)
    theta = sum((w * t for w, t in zip(weights, thetas)), Fraction(0))
    a0 = total.scale(theta)
    return EIResult(theta, q, a0, total, weights, tuple(thetas))


_TAIL_WINDOW = 6


def analytic_multiplicity(spec: ObservableSpec, pmap: PiecewiseMap,
                          k_max: int = 10) -> MultiplicityResult:
    """Exact cluster-size distribution pi(1), pi(2), ..."""
    if not spec.correlated:
        res = analytic_theta(spec, pmap)
        return _geometric_multiplicity(res.theta, k_max)
    rec = _Recursion(spec, pmap)
    if spec.periodic is None:
        depth = rec.N
    else:
        depth = max(2 * k_max, 2 * rec.N) + 2 * _TAIL_WINDOW
    a0 = rec.cluster_measure(0)
    c = [Fraction(1)]
    for k in range(1, depth + 1):
        c.append(limit_ratio(rec.cluster_measure(k), a0))
    head = [c[k - 1] - c[k] for k in range(1, depth + 1)]
    if spec.periodic is None:
        head = head[:max(k_max, rec.N)]
        while len(head) < k_max:
            head.append(Fraction(0))
        return MultiplicityResult(tuple(head))
    tail = _detect_tail(head)
    if tail is None:
        raise AnalyticError("no periodic geometric tail found in the "
                            "cluster-size sequence")
    start, d, r = tail
    keep = max(k_max, start + d)
    return MultiplicityResult(tuple(head[:keep]), start, d, r)


def _detect_tail(head: Sequence[Fraction]):
    """Find (start, period, ratio) with pi(k+period) = ratio*pi(k) beyond start."""
    n = len(head)
    for d in (1, 2, 3):
        for start in range(1, n - d * _TAIL_WINDOW + 1):
            base = head[start - 1]
            if base == 0:
                continue
            ratio = head[start - 1 + d] / base
            if ratio <= 0 or ratio >= 1:
                continue
            ok = True
            for k in range(start, n - d + 1):
                if head[k - 1] == 0 or head[k - 1 + d] != ratio * head[k - 1]:
                    ok = False
                    break
            if ok:
                return start, d, ratio
    return None


def _geometric_multiplicity(theta: Fraction, k_max: int) -> MultiplicityResult:
    if theta == 1:
        head = [Fraction(1)] + [Fraction(0)] * (k_max - 1)
        return MultiplicityResult(tuple(head))
    head = [theta * (1 - theta) ** (k - 1) for k in range(1, k_max + 2)]
    return MultiplicityResult(tuple(head), 1, 1, 1 - theta)


# -- finite-level oracle ---------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    u: object
    q: int
    exceedance: ArcSet
    cluster_sets: Tuple[ArcSet, ...]   # depth-k cluster sets, k = 0..k_max
    theta_n: object
    pi_n: Tuple[object, ...]


def _deep_nonreturn(region: ArcSet, pmap: PiecewiseMap, q: int) -> ArcSet:
    """Points of the region whose next q iterates all leave it."""
    if q == 0:
        return region
    comp = region.complement()
    g = comp
    for _ in range(q - 1):
        g = comp.intersect(preimage(g, pmap))
    return region.intersect(preimage(g, pmap))


def oracle_cluster_sets(spec: ObservableSpec, pmap: PiecewiseMap, u, q: int,
                        k_max: int = 6) -> OracleResult:
    """Build the nested exceedance/cluster sets explicitly at level u."""
    U = exceedance_region(spec, u)
    sets = []
    cur = U
    for _ in range(k_max + 1):
        a = _deep_nonreturn(cur, pmap, q)
        sets.append(a)
        cur = cur.difference(a)
    with mp.workprec(U.prec):
        mu0 = sets[0].measure()
        theta_n = mu0 / U.measure()
        mus = [s.measure() for s in sets]
        pi_n = tuple((mus[k - 1] - mus[k]) / mu0 for k in range(1, k_max + 1))
    return OracleResult(u, q, U, tuple(sets), theta_n, pi_n)


def oracle_at_scale(spec: ObservableSpec, pmap: PiecewiseMap, n: int, tau,
                    q: Optional[int] = None, k_max: int = 6) -> OracleResult:
    """Oracle sets at the level solving n * mu(exceedance) = tau."""
    if q is None:
        q, _ = select_q(spec, pmap)
    u = solve_threshold(spec, n, tau)
    return oracle_cluster_sets(spec, pmap, u, q, k_max)


def return_time_table(spec: ObservableSpec, pmap: PiecewiseMap,
                      levels: Sequence[int], tau=Fraction(1),
                      q: Optional[int] = None) -> List[Tuple[int, int]]:
    """First set-return time of the depth-0 cluster set at a scale ladder."""
    if q is None:
        q, _ = select_q(spec, pmap)
    out = []
    for n in levels:
        u = solve_threshold(spec, n, tau)
        a = _deep_nonreturn(exceedance_region(spec, u), pmap, q)
        out.append((n, first_return_of_set(a, pmap)))
    return out
