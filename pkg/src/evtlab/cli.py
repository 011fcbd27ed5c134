"""Command-line front end: config in, CSV/JSON reports out.

Commands: analytic, oracle, simulate, tails, qselect, induced.  Configs are
TOML with decimal-string positions (no binary-float drift); every output
carries the config hash and master seed.  Files are written atomically.

Exit codes: 0 ok, 1 config error, 2 analytic indeterminate, 3 resource
budget exceeded, 4 numeric regime error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import re
import sys
import tempfile
from fractions import Fraction
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:              # Python 3.10
    import tomli as tomllib

from mpmath import mp

from . import analytic, simulate, tails
from .arcs import ArcBudgetError, DEFAULT_PREC
from .maps import OrbitError, PiecewiseMap, ReturnTimeout, affine_mod1, lsv
from .observables import (LevelRegimeError, ObservableSpec, ShapeFn, SpecError,
                          make_correlated_spec, make_uncorrelated_spec)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INDETERMINATE = 2
EXIT_BUDGET = 3
EXIT_REGIME = 4


class ConfigError(ValueError):
    pass


# -- config parsing --------------------------------------------------------

_SQRT_RE = re.compile(r"^sqrt\((\d+)\)\s*(?:/\s*(\d+))?$")


def parse_position(value, prec: int = DEFAULT_PREC):
    """Position from config: int, decimal string, 'a/b', or 'sqrt(n)/d'."""
    if isinstance(value, bool):
        raise ConfigError(f"bad position {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        raise ConfigError("positions must be strings (decimal-float drift); "
                          f"got {value!r}")
    if not isinstance(value, str):
        raise ConfigError(f"bad position {value!r}")
    s = value.strip()
    m = _SQRT_RE.match(s)
    if m:
        with mp.workprec(prec):
            root = mp.sqrt(int(m.group(1)))
            return root / int(m.group(2)) if m.group(2) else root
    try:
        return Fraction(s)
    except ValueError:
        pass
    try:
        with mp.workprec(prec):
            return mp.mpf(s)
    except (ValueError, TypeError):
        raise ConfigError(f"cannot parse position {value!r}") from None


def _as_fraction(value, what: str) -> Fraction:
    try:
        if isinstance(value, float):
            raise TypeError
        return Fraction(value)
    except (ValueError, TypeError, ZeroDivisionError):
        raise ConfigError(f"{what} must be an integer or 'a/b' string, "
                          f"got {value!r}") from None


def _check_keys(table: dict, allowed: set, where: str):
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{where}]: {sorted(unknown)}")


def _parse_shape(table) -> ShapeFn:
    if not isinstance(table, dict):
        raise ConfigError("shape must be a table")
    _check_keys(table, {"kind", "p", "D", "g"}, "shape")
    kind = table.get("kind")
    try:
        if kind == "neglog":
            return ShapeFn("neglog")
        if kind == "powerlaw":
            return ShapeFn("powerlaw", p=_as_fraction(table["p"], "shape.p"))
        if kind == "boundedpower":
            return ShapeFn("boundedpower", D=_as_fraction(table["D"], "shape.D"),
                           g=_as_fraction(table["g"], "shape.g"))
        if kind == "boundedlog":
            return ShapeFn("boundedlog", D=_as_fraction(table["D"], "shape.D"))
    except KeyError as e:
        raise ConfigError(f"shape {kind!r} missing field {e}") from None
    raise ConfigError(f"unknown shape kind {kind!r}")


def _parse_map(table) -> PiecewiseMap:
    _check_keys(table, {"kind", "slope", "alpha"}, "map")
    kind = table.get("kind")
    if kind == "affine":
        return affine_mod1(int(table.get("slope", 0)))
    if kind == "lsv":
        return lsv(float(table.get("alpha", 0)))
    raise ConfigError(f"unknown map kind {kind!r}")


def _parse_observable(table, pmap: PiecewiseMap) -> ObservableSpec:
    _check_keys(table, {"zeta", "correlated", "periodic", "eps_bar", "points"},
                "observable")
    pts = table.get("points")
    if not pts:
        raise ConfigError("observable needs at least one [[observable.points]]")
    correlated = bool(table.get("correlated", "zeta" in table))
    eps_bar = None
    if "eps_bar" in table:
        eps_bar = parse_position(table["eps_bar"])
    if correlated:
        if "zeta" not in table:
            raise ConfigError("correlated observable needs zeta")
        zeta = parse_position(table["zeta"])
        entries = []
        for p in pts:
            _check_keys(p, {"m", "shape"}, "observable.points")
            entries.append((int(p["m"]), _parse_shape(p.get("shape"))))
        periodic = table.get("periodic")
        return make_correlated_spec(pmap, zeta, entries,
                                    periodic=int(periodic) if periodic else None,
                                    eps_bar=eps_bar)
    entries = []
    for p in pts:
        _check_keys(p, {"xi", "shape", "period"}, "observable.points")
        entries.append((parse_position(p["xi"]), _parse_shape(p.get("shape")),
                        int(p.get("period", 0))))
    return make_uncorrelated_spec(pmap, entries, eps_bar=eps_bar)


_RUN_KEYS = {"n", "tau", "u", "orbits", "seed", "q", "levels", "k_max", "burn_in"}


def load_config(path: str):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
        cfg = tomllib.loads(raw.decode("utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config parse error: {e}") from None
    _check_keys(cfg, {"map", "observable", "run", "induced"}, "config")
    for section in ("map", "observable"):
        if section not in cfg:
            raise ConfigError(f"missing [{section}] section")
    _check_keys(cfg.get("run", {}), _RUN_KEYS, "run")
    _check_keys(cfg.get("induced", {}), {"y"}, "induced")
    pmap = _parse_map(cfg["map"])
    spec = _parse_observable(cfg["observable"], pmap)
    digest = hashlib.sha256(raw).hexdigest()
    return pmap, spec, cfg.get("run", {}), cfg.get("induced", {}), digest


# -- output helpers --------------------------------------------------------

def _atomic_write(path: str, text: str):
    d = os.path.dirname(path) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _write_json(path: str, payload: dict):
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _frac(x) -> str:
    return str(x)


# -- commands --------------------------------------------------------------

def cmd_analytic(pmap, spec, run, induced, meta, args):
    k_max = args.k_max or int(run.get("k_max", 10))
    res = analytic.analytic_theta(spec, pmap)
    mult = analytic.analytic_multiplicity(spec, pmap, k_max=k_max)
    pis = [mult.pi(k) for k in range(1, k_max + 1)]
    payload = dict(meta)
    payload.update({
        "theta": _frac(res.theta),
        "theta_float": float(res.theta),
        "q": res.q,
        "pi": [_frac(p) for p in pis],
        "pi_float": [float(p) for p in pis],
        "pi_tail": None if mult.tail_start is None else {
            "start": mult.tail_start, "period": mult.tail_period,
            "ratio": _frac(mult.tail_ratio)},
        "total_mass": _frac(mult.total_mass()),
        "mean_cluster_size": _frac(mult.mean_cluster_size()),
        "point_weights": [_frac(w) for w in res.point_weights],
    })
    _write_json(os.path.join(args.out, "analytic.json"), payload)
    print(f"theta = {res.theta} ({float(res.theta):.6f})   q = {res.q}")
    print(f"mean cluster size = {mult.mean_cluster_size()}")
    print("  k   pi(k)")
    for k, p in enumerate(pis, start=1):
        print(f"  {k:<3d} {str(p):<12s} {float(p):.6g}")
    if mult.tail_start is not None:
        print(f"tail: pi(k+{mult.tail_period}) = {mult.tail_ratio} * pi(k) "
              f"for k >= {mult.tail_start}")
    return EXIT_OK


def _levels(args, run, default):
    if args.levels:
        return [int(v) for v in args.levels.split(",")]
    return [int(v) for v in run.get("levels", default)]


def cmd_oracle(pmap, spec, run, induced, meta, args):
    levels = _levels(args, run, [10, 15, 20, 25])
    k_max = args.k_max or int(run.get("k_max", 6))
    q = run.get("q")
    q = int(q) if q is not None else analytic.select_q(spec, pmap)[0]
    rows = []
    for u in levels:
        r = analytic.oracle_cluster_sets(spec, pmap, u, q, k_max)
        rows.append((u, float(r.theta_n), [float(p) for p in r.pi_n]))
    lines = ["u,theta_n," + ",".join(f"pi_n_{k}" for k in range(1, k_max + 1))]
    for u, th, pis in rows:
        lines.append(f"{u},{th!r}," + ",".join(repr(p) for p in pis))
    _atomic_write(os.path.join(args.out, "oracle.csv"), "\n".join(lines) + "\n")
    payload = dict(meta)
    payload.update({"q": q, "levels": levels,
                    "theta_n": [r[1] for r in rows],
                    "pi_n": [r[2] for r in rows]})
    _write_json(os.path.join(args.out, "oracle.json"), payload)
    print("  u     theta_n")
    for u, th, _ in rows:
        print(f"  {u:<5} {th:.10f}")
    return EXIT_OK


def _plan_from(run, args) -> simulate.ExperimentPlan:
    n = int(run.get("n", 0))
    if n < 1:
        raise ConfigError("run.n must be a positive integer")
    seed = args.seed if args.seed is not None else run.get("seed")
    if seed is None:
        raise ConfigError("a master seed is required (run.seed or --seed)")
    orbits = args.orbits or int(run.get("orbits", 1))
    tau = run.get("tau")
    u = run.get("u")
    q = run.get("q")
    burn = run.get("burn_in")
    return simulate.ExperimentPlan(
        n=n, orbits=orbits, seed=int(seed),
        tau=float(tau) if tau is not None else None,
        u=float(u) if u is not None else None,
        q=int(q) if q is not None else None,
        burn_in=int(burn) if burn is not None else None)


def cmd_simulate(pmap, spec, run, induced, meta, args):
    plan = _plan_from(run, args)
    res = simulate.run_experiment(spec, pmap, plan)
    s = res.stats
    ser = res.series
    lines = ["t,x,phi,exceed,hit_point"]
    for t in range(ser.x.size):
        lines.append(f"{t},{float(ser.x[t])!r},{float(ser.phi[t])!r},"
                     f"{int(ser.exceed[t])},{int(ser.hit_point[t])}")
    _atomic_write(os.path.join(args.out, "series.csv"), "\n".join(lines) + "\n")
    lines = ["cluster,orbit,start,size,pattern,peak"]
    for cid, c in enumerate(res.clusters):
        lines.append(f"{cid},{c.orbit},{c.start},{c.size},{c.pattern},{c.peak!r}")
    _atomic_write(os.path.join(args.out, "clusters.csv"), "\n".join(lines) + "\n")
    lo, hi = s.theta_ci()
    payload = dict(meta)
    payload.update({
        "u": res.u, "q": res.q, "n": plan.n, "orbits": plan.orbits,
        "seed": plan.seed, "mu_u": s.mu_u, "tau_eff": s.tau_eff,
        "theta_hat": s.theta_hat, "theta_se": s.theta_se,
        "theta_ci": [lo, hi],
        "n_exceedances": s.n_exceedances, "n_clusters": s.n_clusters,
        "mean_cluster_size": s.mean_cluster_size,
        "pi_hat": {str(k): v for k, v in s.pi_hat.items()},
        "patterns": s.patterns,
        "ks_stat": s.ks_stat, "ks_pvalue": s.ks_pvalue,
        "evl_hat": s.evl_hat, "evl_pred": s.evl_pred,
    })
    _write_json(os.path.join(args.out, "stats.json"), payload)
    print(f"u = {res.u:.6f}  q = {res.q}  exceedances = {s.n_exceedances} "
          f"clusters = {s.n_clusters}")
    print(f"theta_hat = {s.theta_hat:.4f} +- {s.theta_se:.4f}  "
          f"evl_hat = {s.evl_hat:.4f} (pred {s.evl_pred:.4f})")
    print(f"patterns: {s.patterns}")
    return EXIT_OK


def cmd_tails(pmap, spec, run, induced, meta, args):
    verdict, note = tails.classify_spec(spec)
    checks = [float(v) for v in tails.numeric_tail_index(spec)]
    payload = dict(meta)
    payload.update({
        "winner": {"family": verdict.family,
                   "index": None if verdict.index is None else _frac(verdict.index),
                   "endpoint": ("inf" if verdict.family != tails.WEIBULL
                                else _frac(Fraction(spec.points[0].shape.D))),
                   "provenance": {"family": "competition rule",
                                  "index": "derived from ball geometry"}},
        "note": note,
        "checks": checks,
        "points": [str(tails.classify_shape(pt.shape)) for pt in spec.points],
    })
    _write_json(os.path.join(args.out, "tails.json"), payload)
    print(f"winner: {verdict}  ({note})")
    print("empirical tail index along level ladder:",
          ", ".join(f"{c:.4f}" for c in checks))
    return EXIT_OK


def cmd_qselect(pmap, spec, run, induced, meta, args):
    q, reason = analytic.select_q(spec, pmap)
    levels = _levels(args, run, [10, 100, 1000])
    table = analytic.return_time_table(spec, pmap, levels, q=q)
    payload = dict(meta)
    payload.update({"q": q, "reason": reason,
                    "return_times": [[n, r] for n, r in table]})
    _write_json(os.path.join(args.out, "qselect.json"), payload)
    print(f"q = {q}  ({reason})")
    print("  n      R(cluster set)")
    for n, r in table:
        print(f"  {n:<6d} {r}")
    return EXIT_OK


def cmd_induced(pmap, spec, run, induced, meta, args):
    plan = _plan_from(run, args)
    y = induced.get("y")
    if not y or len(y) != 2:
        raise ConfigError("[induced] needs y = [lo, hi]")
    rep = simulate.compare_induced_repp(pmap, parse_position(y[0]),
                                        parse_position(y[1]), spec, plan)
    payload = dict(meta)
    payload.update({
        "theta_orig": rep.theta_orig, "theta_induced": rep.theta_induced,
        "delta_theta": abs(rep.theta_orig - rep.theta_induced),
        "tv_pi": rep.tv_pi, "ks_gaps": rep.ks_gaps,
        "n_exceedances": rep.n_exceedances,
        "y_visit_fraction": rep.y_visit_fraction,
        "seed": plan.seed, "orbits": plan.orbits, "n": plan.n,
    })
    _write_json(os.path.join(args.out, "induced.json"), payload)
    print(f"theta_orig = {rep.theta_orig:.4f}  theta_induced = "
          f"{rep.theta_induced:.4f}  TV(pi) = {rep.tv_pi:.4f}  "
          f"KS(gaps) = {rep.ks_gaps:.4f}")
    return EXIT_OK


_COMMANDS = {
    "analytic": cmd_analytic,
    "oracle": cmd_oracle,
    "simulate": cmd_simulate,
    "tails": cmd_tails,
    "qselect": cmd_qselect,
    "induced": cmd_induced,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="evtlab",
        description="Extreme value statistics of circle maps with multiple "
                    "correlated maxima")
    ap.add_argument("command", choices=sorted(_COMMANDS))
    ap.add_argument("config", help="TOML experiment config")
    ap.add_argument("--seed", type=int, default=None, help="master seed override")
    ap.add_argument("--orbits", type=int, default=None, help="orbit count override")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--levels", default=None, help="comma-separated level list")
    ap.add_argument("--k-max", dest="k_max", type=int, default=None,
                    help="largest cluster size to report")
    return ap


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        pmap, spec, run, induced, digest = load_config(args.config)
        meta = {"config_sha256": digest,
                "seed": args.seed if args.seed is not None else run.get("seed")}
        return _COMMANDS[args.command](pmap, spec, run, induced, meta, args)
    except (ConfigError, SpecError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except analytic.IndeterminateError as e:
        print(f"analytic indeterminate: {e}", file=sys.stderr)
        return EXIT_INDETERMINATE
    except (ArcBudgetError, ReturnTimeout) as e:
        print(f"resource budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except (LevelRegimeError, OrbitError) as e:
        print(f"numeric regime error: {e}", file=sys.stderr)
        return EXIT_REGIME
    except analytic.AnalyticError as e:
        print(f"analytic indeterminate: {e}", file=sys.stderr)
        return EXIT_INDETERMINATE


if __name__ == "__main__":
    sys.exit(main())
