"""Monte Carlo side: exceedance series, cluster statistics, REPP checks.

Orbits are independent replicates with per-orbit RNG streams spawned from
one master seed, so results are deterministic per seed and independent of
scheduling.  The runs estimator and the q-gap cluster rule mirror the
set-level definitions: a cluster ends when q consecutive non-exceedances
follow an exceedance.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np
from mpmath import mp
from scipy import stats as sps

from .kernels import (SHAPE_BOUNDED, SHAPE_NEGLOG, SHAPE_POWERLAW,
                      exceedance_scan)
from .maps import DigitOrbit, LSVLaw, PiecewiseMap, sample_orbit
from .observables import (ObservableSpec, as_mpf, circle_dist,
                          exceedance_measure, solve_threshold)
from .analytic import select_q

MONOTONE_DECREASING = "monotone-decreasing"
ASCENDING_STEP = "ascending-step"
OTHER = "other"
SINGLE = "single"


@dataclass(frozen=True)
class ExperimentPlan:
    n: int                       # orbit length
    orbits: int                  # number of independent orbits
    seed: int
    tau: Optional[float] = None  # expected number of exceedances
    u: Optional[float] = None    # explicit level (overrides tau)
    q: Optional[int] = None      # cluster gap; default from select_q
    burn_in: Optional[int] = None
    backend: Optional[str] = None

    def __post_init__(self):
        if self.n < 1 or self.orbits < 1:
            raise ValueError("need n >= 1 and orbits >= 1")
        if (self.tau is None) == (self.u is None):
            raise ValueError("give exactly one of tau and u")


@dataclass
class ClusterStats:
    theta_hat: float
    theta_se: float              # binomial standard error
    n_exceedances: int
    n_clusters: int
    pi_hat: dict                 # cluster size -> relative frequency
    gaps: np.ndarray             # inter-cluster start gaps, rescaled by mu(U)
    ks_stat: float
    ks_pvalue: float
    evl_hat: float               # fraction of orbits with no exceedance
    evl_pred: float              # e^{-theta_hat * n * mu(U)}
    tau_eff: float               # n * mu(U)
    mu_u: float
    patterns: dict = field(default_factory=dict)

    @property
    def mean_cluster_size(self) -> float:
        return self.n_exceedances / self.n_clusters if self.n_clusters else math.nan

    def theta_ci(self, z: float = 1.96) -> Tuple[float, float]:
        return (self.theta_hat - z * self.theta_se,
                self.theta_hat + z * self.theta_se)


@dataclass
class SeriesSample:
    x: np.ndarray
    phi: np.ndarray
    exceed: np.ndarray           # bool
    hit_point: np.ndarray        # ball index, -1 outside


@dataclass
class ClusterRecord:
    orbit: int
    start: int
    size: int
    pattern: str
    peak: float


@dataclass
class SimulationResult:
    u: float
    q: int
    stats: ClusterStats
    clusters: List[ClusterRecord]
    series: Optional[SeriesSample] = None


def cluster_pattern(values: Sequence[float]) -> str:
    """Within-cluster shape of the exceedance values (size >= 2)."""
    if len(values) < 2:
        raise ValueError("pattern defined for clusters of size >= 2")
    v = np.asarray(values, dtype=np.float64)
    d = np.diff(v)
    if np.all(d < 0):
        return MONOTONE_DECREASING
    if np.any(d > 0):
        return ASCENDING_STEP
    return OTHER


def extract_clusters(times: np.ndarray, q: int) -> List[slice]:
    """Partition time-sorted exceedances into q-gap clusters (as slices)."""
    if times.size == 0:
        return []
    breaks = np.nonzero(np.diff(times) > q)[0]
    starts = np.concatenate([[0], breaks + 1])
    stops = np.concatenate([breaks + 1, [times.size]])
    return [slice(int(a), int(b)) for a, b in zip(starts, stops)]


def _kernel_params(spec: ObservableSpec, u):
    """float64 ball parameters for the scan kernel, plus exact radii."""
    with mp.workprec(spec.prec):
        centers, radii, codes, p1, p2, radii_mp = [], [], [], [], [], []
        for pt in spec.points:
            r = pt.shape.radius(u, spec.prec)
            radii_mp.append(r)
            centers.append(float(as_mpf(pt.xi) % 1))
            radii.append(float(r))
            if pt.shape.kind == "neglog":
                codes.append(SHAPE_NEGLOG)
                p1.append(0.0)
                p2.append(0.0)
            elif pt.shape.kind == "powerlaw":
                codes.append(SHAPE_POWERLAW)
                p1.append(float(pt.shape.p))
                p2.append(0.0)
            else:
                codes.append(SHAPE_BOUNDED)
                p1.append(float(Fraction(pt.shape.D)))
                p2.append(float(Fraction(pt.shape.g)))
    return (np.array(centers), np.array(radii), np.array(codes, dtype=np.int64),
            np.array(p1), np.array(p2), radii_mp)


def observable_values(spec: ObservableSpec, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized observable: (phi values, index of the ball hit or -1)."""
    phi = np.full(x.shape, float(spec.base_value))
    hit = np.full(x.shape, -1, dtype=np.int64)
    eps = float(spec.eps_bar)
    for i, pt in enumerate(spec.points):
        d = np.abs(x - float(as_mpf(pt.xi) % 1))
        np.minimum(d, 1.0 - d, out=d)
        m = (d < eps) & (hit < 0)
        dm = d[m]
        with np.errstate(divide="ignore", invalid="ignore"):
            if pt.shape.kind == "neglog":
                v = np.where(dm == 0.0, np.inf, -np.log(dm))
            elif pt.shape.kind == "powerlaw":
                v = np.where(dm == 0.0, np.inf, dm ** (-float(pt.shape.p)))
            else:
                v = float(Fraction(pt.shape.D)) - dm ** float(Fraction(pt.shape.g))
        phi[m] = v
        hit[m] = i
    return phi, hit


def _digit_source(pmap: PiecewiseMap):
    slope = pmap.constant_slope
    if slope is not None and slope.denominator == 1 and pmap.is_continuous:
        return int(slope)
    return None


def _resolve_ambiguous(orb: DigitOrbit, spec: ObservableSpec, radii_mp,
                       times, values, hits, amb):
    """Re-decide near-boundary samples with exact digit-window positions."""
    if len(amb) == 0:
        return times, values, hits
    tset = {int(t): k for k, t in enumerate(times)}
    drop, add = set(), []
    with mp.workprec(120):
        for t in (int(a) for a in amb):
            xe = orb.exact_position(t)
            inside = None
            for i, pt in enumerate(spec.points):
                d = circle_dist(xe, pt.xi, 120)
                if d < radii_mp[i]:
                    inside = (i, float(pt.shape.value(d, 120)))
                    break
            if inside is None:
                if t in tset:
                    drop.add(t)
            elif t not in tset:
                add.append((t, inside[1], inside[0]))
    if not drop and not add:
        return times, values, hits
    keep = [k for k, t in enumerate(times) if int(t) not in drop]
    rows = [(int(times[k]), float(values[k]), int(hits[k])) for k in keep] + add
    rows.sort()
    times = np.array([r[0] for r in rows], dtype=np.int64)
    values = np.array([r[1] for r in rows])
    hits = np.array([r[2] for r in rows], dtype=np.int64)
    return times, values, hits


def run_experiment(spec: ObservableSpec, pmap: PiecewiseMap,
                   plan: ExperimentPlan, keep_series: bool = True) -> SimulationResult:
    """Scan independent orbits for exceedances and pool cluster statistics."""
    if plan.u is not None:
        u = as_mpf(plan.u)
    else:
        u = solve_threshold(spec, plan.n, plan.tau)
    q = plan.q if plan.q is not None else select_q(spec, pmap)[0]
    mu_u = float(exceedance_measure(spec, u))
    centers, radii, codes, p1, p2, radii_mp = _kernel_params(spec, u)
    base = _digit_source(pmap)
    # window resolution plus float64 rounding slack for the boundary re-check
    margin = max(4.0 * base ** (-DigitOrbit(base, 0).window), 1e-12) if base else 0.0

    ss = np.random.SeedSequence(plan.seed)
    children = ss.spawn(plan.orbits)

    n_ends = 0
    n_valid = 0
    total_exceed = 0
    zero_orbits = 0
    sizes = Counter()
    patterns = Counter()
    gap_chunks = []
    cluster_rows: List[ClusterRecord] = []
    series = None

    for idx in range(plan.orbits):
        if base:
            orb = DigitOrbit(base, children[idx])
            x = orb.positions(plan.n)
        else:
            orb = None
            x = sample_orbit(pmap, plan.n, children[idx], burn_in=plan.burn_in)
        times, values, hits, amb = exceedance_scan(
            x, centers, radii, codes, p1, p2, margin, backend=plan.backend)
        if orb is not None:
            times, values, hits = _resolve_ambiguous(
                orb, spec, radii_mp, times, values, hits, amb)
        total_exceed += times.size
        if times.size == 0:
            zero_orbits += 1
        # runs estimator: an exceedance ends a cluster when the next q steps
        # stay below the level; only times with a full q-window observable count
        if times.size:
            next_gap = np.diff(times)
            is_end = np.concatenate([next_gap > q, [True]])
            observable = times <= plan.n - 1 - q
            n_valid += int(observable.sum())
            n_ends += int((is_end & observable).sum())
        cl = extract_clusters(times, q)
        starts = []
        for sl in cl:
            vals = values[sl]
            size = sl.stop - sl.start
            sizes[size] += 1
            pat = SINGLE if size == 1 else cluster_pattern(vals)
            patterns[pat] += 1
            start_t = int(times[sl.start])
            starts.append(start_t)
            cluster_rows.append(ClusterRecord(idx, start_t, size, pat,
                                              float(vals.max())))
        if len(starts) > 1:
            gap_chunks.append(np.diff(np.array(starts)) * mu_u)
        if keep_series and idx == 0:
            phi, hit = observable_values(spec, x)
            series = SeriesSample(x, phi, phi > float(u), hit)

    theta_hat = n_ends / n_valid if n_valid else math.nan
    se = math.sqrt(theta_hat * (1 - theta_hat) / n_valid) if n_valid else math.nan
    gaps = np.concatenate(gap_chunks) if gap_chunks else np.empty(0)
    if gaps.size and 0 < theta_hat <= 1:
        ks_stat, ks_p = sps.kstest(gaps, "expon", args=(0.0, 1.0 / theta_hat))
    else:
        ks_stat, ks_p = math.nan, math.nan
    n_clusters = sum(sizes.values())
    pi_hat = {k: v / n_clusters for k, v in sorted(sizes.items())} if n_clusters else {}
    tau_eff = plan.n * mu_u
    stats = ClusterStats(
        theta_hat=theta_hat, theta_se=se, n_exceedances=total_exceed,
        n_clusters=n_clusters, pi_hat=pi_hat, gaps=gaps,
        ks_stat=float(ks_stat), ks_pvalue=float(ks_p),
        evl_hat=zero_orbits / plan.orbits,
        evl_pred=math.exp(-theta_hat * tau_eff) if not math.isnan(theta_hat) else math.nan,
        tau_eff=tau_eff, mu_u=mu_u, patterns=dict(patterns))
    return SimulationResult(float(u), q, stats, cluster_rows, series)


# -- induced-map comparison ------------------------------------------------

@dataclass
class InducedComparison:
    theta_orig: float
    theta_induced: float
    tv_pi: float
    ks_gaps: float
    n_exceedances: int
    y_visit_fraction: float


def _pool_cluster_stats(times_list, n, q):
    ends = valid = 0
    sizes = Counter()
    for times in times_list:
        if times.size == 0:
            continue
        is_end = np.concatenate([np.diff(times) > q, [True]])
        observable = times <= n - 1 - q
        valid += int(observable.sum())
        ends += int((is_end & observable).sum())
        for sl in extract_clusters(times, q):
            sizes[sl.stop - sl.start] += 1
    theta = ends / valid if valid else math.nan
    total = sum(sizes.values())
    pi = {k: v / total for k, v in sizes.items()} if total else {}
    return theta, pi


def compare_induced_repp(pmap: PiecewiseMap, y_lo, y_hi,
                         spec: ObservableSpec, plan: ExperimentPlan) -> InducedComparison:
    """Cluster statistics on the raw clock vs the first-return clock of Y.

    Exceedance gaps are rescaled with the measure of the exceedance set in
    the ambient orbit and with its conditional measure on Y (estimated from
    visit counts) for the induced clock.
    """
    lo, hi = float(as_mpf(y_lo)), float(as_mpf(y_hi))
    for pt in spec.points:
        xf = float(as_mpf(pt.xi) % 1)
        if not lo <= xf < hi:
            raise ValueError(f"maximal point {xf} outside the base [{lo}, {hi})")
    if plan.u is not None:
        u = as_mpf(plan.u)
    else:
        u = solve_threshold(spec, plan.n, plan.tau)
    q = plan.q if plan.q is not None else select_q(spec, pmap)[0]
    centers, radii, codes, p1, p2, _ = _kernel_params(spec, u)

    children = np.random.SeedSequence(plan.seed).spawn(plan.orbits)
    orig_times, ind_times = [], []
    orig_starts_gaps, ind_starts_gaps = [], []
    total_exceed = 0
    total_visits = 0
    total_steps = 0

    for idx in range(plan.orbits):
        x = sample_orbit(pmap, plan.n, children[idx], burn_in=plan.burn_in)
        times, values, hits, _ = exceedance_scan(
            x, centers, radii, codes, p1, p2, 0.0, backend=plan.backend)
        in_y = (x >= lo) & (x < hi)
        clock = np.cumsum(in_y)          # Y-visit count up to and including t
        total_visits += int(clock[-1])
        total_steps += plan.n
        total_exceed += times.size
        orig_times.append(times)
        t_ind = clock[times] - 1 if times.size else times
        ind_times.append(t_ind.astype(np.int64))

    mu_hat = total_exceed / total_steps if total_steps else math.nan
    mu_y_hat = total_exceed / total_visits if total_visits else math.nan
    n_ind = int(round(plan.n * total_visits / total_steps))
    theta_o, pi_o = _pool_cluster_stats(orig_times, plan.n, q)
    theta_i, pi_i = _pool_cluster_stats(ind_times, n_ind, q)

    for times, bucket, scale in ((orig_times, orig_starts_gaps, mu_hat),
                                 (ind_times, ind_starts_gaps, mu_y_hat)):
        for t in times:
            st = [int(t[sl.start]) for sl in extract_clusters(t, q)]
            if len(st) > 1:
                bucket.append(np.diff(np.array(st)) * scale)
    g_o = np.concatenate(orig_starts_gaps) if orig_starts_gaps else np.empty(0)
    g_i = np.concatenate(ind_starts_gaps) if ind_starts_gaps else np.empty(0)
    ks = sps.ks_2samp(g_o, g_i).statistic if g_o.size and g_i.size else math.nan

    keys = set(pi_o) | set(pi_i)
    tv = 0.5 * sum(abs(pi_o.get(k, 0.0) - pi_i.get(k, 0.0)) for k in keys)
    return InducedComparison(theta_o, theta_i, tv, float(ks), total_exceed,
                             total_visits / total_steps)
