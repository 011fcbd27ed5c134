"""Domain of attraction of the level distribution under linear scaling.

Each local shape law puts its ball's tail in one classical family: the
log shape gives a Gumbel tail, power blowup gives Frechet, power approach
to a finite cap gives Weibull.  With several maximal points the overall
tail 1-F(u) is the sum of the ball tails, and the heaviest one wins.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple

from mpmath import mp, mpf

from .observables import ObservableSpec, ShapeFn, exceedance_measure

GUMBEL, FRECHET, WEIBULL = "gumbel", "frechet", "weibull"


class TailError(ValueError):
    """Shapes define incompatible tails (e.g. different finite maxima)."""


@dataclass(frozen=True)
class TailType:
    family: str
    index: Optional[Fraction]    # tail index alpha; None for Gumbel
    endpoint: object             # mp.inf or the finite maximum

    def __str__(self):
        if self.family == GUMBEL:
            return "Gumbel"
        return f"{self.family.capitalize()}(alpha={self.index})"


def classify_shape(shape: ShapeFn) -> TailType:
    """Tail family of a single ball's exceedance law."""
    if shape.kind == "neglog":
        return TailType(GUMBEL, None, mp.inf)
    if shape.kind == "powerlaw":
        # radius u^{-1/p}, so 1-F ~ u^{-1/p}: Frechet with alpha = 1/p
        return TailType(FRECHET, 1 / shape.p, mp.inf)
    if shape.kind == "boundedpower":
        # radius (D-u)^{1/g}: Weibull with alpha = 1/g at endpoint D
        return TailType(WEIBULL, 1 / shape.g, shape.endpoint)
    if shape.kind == "boundedlog":
        # radius e^{-1/(D-u)}: faster than any power of D-u, Gumbel domain
        # despite the finite maximum
        return TailType(GUMBEL, None, shape.endpoint)
    raise TailError(f"no tail classification for shape kind {shape.kind!r}")


def compete(shapes: Sequence[ShapeFn]) -> Tuple[TailType, str]:
    """Winning domain of attraction when shapes contribute jointly.

    Returns the verdict plus a short note.  Mixing a finite with an
    infinite maximum is rejected: those shapes cannot share the maximum
    value, so the competition is not defined.
    """
    if not shapes:
        raise TailError("no shapes to classify")
    types = [classify_shape(s) for s in shapes]
    finite = [t for t in types if not mp.isinf(t.endpoint)]
    infinite = [t for t in types if mp.isinf(t.endpoint)]
    if finite and infinite:
        raise TailError("finite-endpoint and unbounded shapes cannot share "
                        "a common maximum")
    if len({str(t.endpoint) for t in finite}) > 1:
        raise TailError("bounded shapes disagree on the maximum value")
    if finite:
        weibulls = [t for t in finite if t.family == WEIBULL]
        if not weibulls:
            return TailType(GUMBEL, None, finite[0].endpoint), \
                "bounded Gumbel tail"
        alpha = min(t.index for t in weibulls)
        if len(weibulls) < len(finite):
            note = ("Weibull dominates the bounded Gumbel component: the "
                    "power approach to the maximum is heavier")
        elif len({t.index for t in weibulls}) > 1:
            note = ("heaviest Weibull component wins (smallest index); "
                    "multi-index case extends the pairwise argument")
        else:
            note = "pure Weibull tail"
        return TailType(WEIBULL, alpha, finite[0].endpoint), note
    frechets = [t for t in types if t.family == FRECHET]
    if not frechets:
        return TailType(GUMBEL, None, mp.inf), "pure Gumbel tail"
    alpha = min(t.index for t in frechets)
    if len(frechets) < len(types):
        note = "Frechet dominates Gumbel: the power tail is heavier"
    elif len({t.index for t in frechets}) > 1:
        note = ("heaviest Frechet component wins (smallest index); "
                "multi-index case extends the pairwise argument")
    else:
        note = "pure Frechet tail"
    return TailType(FRECHET, alpha, mp.inf), note


def classify_spec(spec: ObservableSpec) -> Tuple[TailType, str]:
    return compete([pt.shape for pt in spec.points])


def numeric_tail_index(spec: ObservableSpec, scale=mpf(2), rungs: int = 6,
                       prec: int = 120):
    """Empirical tail index from ratios of 1-F along a geometric level ladder.

    For unbounded tails returns estimates of alpha with
    (1-F(s*u))/(1-F(u)) ~ s^-alpha; the sequence should stabilise for a
    Frechet tail and diverge for Gumbel.  For bounded tails the ladder
    runs in the distance s to the endpoint and (1-F(D-s/2))/(1-F(D-s))
    estimates 2^-alpha.
    """
    with mp.workprec(prec):
        scale = mpf(scale)
        endpoint = spec.endpoint()
        floor = spec.level_floor()
        out = []
        if mp.isinf(endpoint):
            u = max(floor * 2, mpf(10))
            for _ in range(rungs):
                r = exceedance_measure(spec, scale * u, prec) / \
                    exceedance_measure(spec, u, prec)
                out.append(-mp.log(r) / mp.log(scale))
                u *= scale
        else:
            s = (endpoint - floor) / 4
            for _ in range(rungs):
                r = exceedance_measure(spec, endpoint - s / scale, prec) / \
                    exceedance_measure(spec, endpoint - s, prec)
                out.append(-mp.log(r) / mp.log(scale))
                s /= scale
        return out
