"""Hot numeric loops: orbit reconstruction and exceedance scanning.

Each kernel has a numba ``@njit`` implementation and a pure-numpy fallback.
The fallback is selected by setting ``EVTLAB_NO_NUMBA=1`` in the environment
(or per call via ``backend=``); ``benchmarks/bench_orbit.py`` compares both.
"""

from __future__ import annotations

import os

import numpy as np

SHAPE_NEGLOG = 0
SHAPE_POWERLAW = 1
SHAPE_BOUNDED = 2

_env = os.environ.get("EVTLAB_NO_NUMBA", "").lower()
USE_NUMBA = _env not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:          # pragma: no cover
        USE_NUMBA = False

if not USE_NUMBA:
    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        if args and callable(args[0]):
            return args[0]
        return wrap


def _backend(name):
    return USE_NUMBA if name is None else (name == "numba")


# -- digit-stream orbits ---------------------------------------------------

@njit(cache=True)
def _digit_positions_nb(digits, base, window, length):
    out = np.empty(length, dtype=np.float64)
    modulus = np.int64(base) ** window
    scale = 1.0 / modulus
    m = np.int64(0)
    for j in range(window):
        m = m * base + digits[j]
    for t in range(length):
        out[t] = m * scale
        m = (m * base + digits[t + window]) % modulus
    return out


def _digit_positions_np(digits, base, window, length):
    weights = (np.int64(base) ** np.arange(window - 1, -1, -1)).astype(np.int64)
    out = np.empty(length, dtype=np.float64)
    scale = 1.0 / float(np.int64(base) ** window)
    chunk = 1 << 15
    view = np.lib.stride_tricks.sliding_window_view(digits, window)
    for start in range(0, length, chunk):
        stop = min(start + chunk, length)
        out[start:stop] = (view[start:stop] @ weights) * scale
    return out


def digit_positions(digits, base, window, length, backend=None):
    """Positions x_t = 0.d_{t+1}...d_{t+window} (base k) as float64."""
    digits = np.ascontiguousarray(digits, dtype=np.int64)
    if _backend(backend):
        return _digit_positions_nb(digits, base, window, length)
    return _digit_positions_np(digits, base, window, length)


# -- LSV orbits ------------------------------------------------------------

@njit(cache=True)
def _lsv_positions_nb(x0, alpha, length, burn):
    out = np.empty(length, dtype=np.float64)
    x = x0
    c = 2.0 ** alpha
    for _ in range(burn):
        x = x * (1.0 + c * x**alpha) if x < 0.5 else 2.0 * x - 1.0
    for t in range(length):
        out[t] = x
        x = x * (1.0 + c * x**alpha) if x < 0.5 else 2.0 * x - 1.0
    return out


def _lsv_positions_np(x0, alpha, length, burn):
    out = np.empty(length, dtype=np.float64)
    x = x0
    c = 2.0 ** alpha
    for _ in range(burn):
        x = x * (1.0 + c * x**alpha) if x < 0.5 else 2.0 * x - 1.0
    for t in range(length):
        out[t] = x
        x = x * (1.0 + c * x**alpha) if x < 0.5 else 2.0 * x - 1.0
    return out


def lsv_positions(x0, alpha, length, burn=1000, backend=None):
    if _backend(backend):
        return _lsv_positions_nb(x0, alpha, length, burn)
    return _lsv_positions_np(x0, alpha, length, burn)


# -- exceedance scanning ---------------------------------------------------

@njit(cache=True)
def _exceedance_scan_nb(x, centers, radii, codes, p1, p2, margin):
    # outputs are preallocated at full length: growing arrays inside the
    # loop defeats the optimizer (measured ~25x slower)
    n = x.shape[0]
    npts = centers.shape[0]
    times = np.empty(n, dtype=np.int64)
    values = np.empty(n, dtype=np.float64)
    hits = np.empty(n, dtype=np.int64)
    amb_times = np.empty(64, dtype=np.int64)
    count = 0
    namb = 0
    for t in range(n):
        xt = x[t]
        for i in range(npts):
            d = abs(xt - centers[i])
            if d > 0.5:
                d = 1.0 - d
            r = radii[i]
            if abs(d - r) < margin and namb < 64:
                amb_times[namb] = t
                namb += 1
            if d < r:
                if codes[i] == 0:
                    v = np.inf if d == 0.0 else -np.log(d)
                elif codes[i] == 1:
                    v = np.inf if d == 0.0 else d ** (-p1[i])
                else:
                    v = p1[i] - d ** p2[i]
                times[count] = t
                values[count] = v
                hits[count] = i
                count += 1
                break
    return (times[:count].copy(), values[:count].copy(),
            hits[:count].copy(), amb_times[:namb].copy())


def _exceedance_scan_np(x, centers, radii, codes, p1, p2, margin):
    n = x.shape[0]
    hit_idx = np.full(n, -1, dtype=np.int64)
    dist = np.empty(n, dtype=np.float64)
    amb = np.zeros(n, dtype=bool)
    for i in range(centers.shape[0]):
        d = np.abs(x - centers[i])
        np.minimum(d, 1.0 - d, out=d)
        amb |= np.abs(d - radii[i]) < margin
        m = (d < radii[i]) & (hit_idx < 0)
        hit_idx[m] = i
        dist[m] = d[m]
    times = np.nonzero(hit_idx >= 0)[0]
    hits = hit_idx[times]
    d = dist[times]
    values = np.empty(times.shape[0], dtype=np.float64)
    for i in range(centers.shape[0]):
        m = hits == i
        if not m.any():
            continue
        dm = d[m]
        with np.errstate(divide="ignore", invalid="ignore"):
            if codes[i] == SHAPE_NEGLOG:
                values[m] = np.where(dm == 0.0, np.inf, -np.log(dm))
            elif codes[i] == SHAPE_POWERLAW:
                values[m] = np.where(dm == 0.0, np.inf, dm ** (-p1[i]))
            else:
                values[m] = p1[i] - dm ** p2[i]
    return times, values, hits, np.nonzero(amb)[0][:64]


def exceedance_scan(x, centers, radii, codes, p1, p2, margin=0.0, backend=None):
    """Find times with x_t inside one of the balls; report the observable value.

    Returns (times, values, hit_point, ambiguous_times).  ``ambiguous_times``
    are steps whose distance to a ball boundary is below ``margin`` (the
    reconstruction resolution); callers re-check those at higher precision.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    radii = np.ascontiguousarray(radii, dtype=np.float64)
    codes = np.ascontiguousarray(codes, dtype=np.int64)
    p1 = np.ascontiguousarray(p1, dtype=np.float64)
    p2 = np.ascontiguousarray(p2, dtype=np.float64)
    if _backend(backend):
        return _exceedance_scan_nb(x, centers, radii, codes, p1, p2, margin)
    return _exceedance_scan_np(x, centers, radii, codes, p1, p2, margin)
