"""Command-line entry point: ``fuchsian-orbits <command> [options]``.

Tables are written as CSV preceded by one ``#`` line carrying the schema version
and the full run configuration; reports are JSON.  Exit codes: 0 success or
formula check passed, 1 formula check failed, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import counting, haarmc, pairstats
from .fuchsian import Lattice, lattice_from_config, parse_lattice_config
from .orbit import DiscreteOrbit, HolonomySet
from .shapes import annulus, disk, sector, square
from .testfunctions import ball_indicator, pair_ball

SCHEMA_VERSION = 1
CACHE_ENV = "FUCHSIAN_ORBITS_CACHE"
FORMULAS = ("first-moment", "pair-moment", "second-moment", "avg-paircorr", "second-moment-discrepancy")


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------- argument parsing

def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from exc


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("lattice and run")
    g.add_argument("--lattice", default=None, help="sl2z, hecke, gamma2, gammaN, congruence or custom")
    g.add_argument("--q", type=int, default=None, help="Hecke parameter")
    g.add_argument("--N", type=int, default=None, help="congruence level")
    g.add_argument("--cusp", default=None, help="cusp label or index (default: first cusp)")
    g.add_argument("--components", default=None,
                   help="holonomy components as scale@cusp pairs, e.g. '1@inf,1.7@0'")
    g.add_argument("--config", default=None, help="key=value file; keys match the long flag names")
    g.add_argument("--cache-dir", default=None, help=f"orbit cache directory (default: ${CACHE_ENV})")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--workers", type=int, default=None)
    g.add_argument("--output", "-o", default=None, help="output file (default: stdout)")
    g.add_argument("--emit-plot-data", default=None, metavar="PATH",
                   help="also write tidy long-format CSV (series, x, y) for plotting")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fuchsian-orbits",
                                     description="Orbit counting and pair statistics for Fuchsian lattices")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="orbit points in a ball")
    p.add_argument("--radius", type=float, default=None)
    _common(p)

    p = sub.add_parser("phi", help="determinant multiplicity table, or Phi at given t")
    p.add_argument("--max-c", type=float, default=None)
    p.add_argument("--t", type=_floats, default=None, help="evaluate Phi at these points")
    p.add_argument("--c-trunc", type=float, default=None)
    p.add_argument("--cusps", default=None, help="cusp pair a,b")
    _common(p)

    p = sub.add_parser("partial-sum", help="sums of multiplicities below T")
    p.add_argument("--T", type=_floats, default=None)
    p.add_argument("--cusps", default=None)
    _common(p)

    p = sub.add_parser("friends", help="ordered pairs closer than eta")
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--eta", type=_floats, default=None)
    _common(p)

    p = sub.add_parser("detpairs", help="pairs with bounded determinant")
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--D", type=_floats, default=None)
    p.add_argument("--s", type=float, default=None)
    _common(p)

    p = sub.add_parser("paircorr", help="pair correlation of the orbit and its cone average")
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--s", type=float, default=None)
    p.add_argument("--n", type=int, default=None, help="cone samples (0 skips the average)")
    _common(p)

    p = sub.add_parser("lengthdensity", help="fraction of lengths inside intervals")
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--intervals", default=None, help="a:b pairs, comma separated")
    _common(p)

    p = sub.add_parser("discrepancy", help="counting discrepancy on dilates of a shape")
    p.add_argument("--radii", type=_floats, default=None)
    p.add_argument("--shape", default=None, help="disk, square, sector:<angle>, annulus:<r0>")
    p.add_argument("--matrix", type=_floats, default=None, help="a,b,c,d (default identity)")
    _common(p)

    p = sub.add_parser("congruence", help="exact primitive count in a residue class vs main term")
    p.add_argument("--radius", type=_floats, default=None)
    _common(p)

    p = sub.add_parser("check", help="Monte Carlo verification of a mean value formula")
    p.add_argument("formula", choices=FORMULAS)
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--s", type=float, default=None)
    p.add_argument("--cusps", default=None, help="cusp pair a,b for pair-moment")
    p.add_argument("--areas", type=_floats, default=None, help="disk areas for second-moment-discrepancy")
    p.add_argument("--tolerance", type=float, default=None, help="relative tolerance")
    p.add_argument("--table-c", type=float, default=None)
    p.add_argument("--reference-scale", type=float, default=None,
                   help="multiply the reference (test hook for the failure path)")
    _common(p)
    return parser


DEFAULTS = {
    "lattice": "sl2z", "workers": 1, "radius": None, "n": 10000, "s": 1.0, "max_c": 100.0,
    "reference_scale": 1.0, "table_c": 2000.0, "shape": "disk",
}


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge config file values under explicit flags, then defaults."""
    cfg = {k: v for k, v in vars(args).items()}
    file_vals: dict = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from exc
        file_vals = {k.replace("-", "_"): v for k, v in parse_lattice_config(text).items()}
    for k, v in file_vals.items():
        if cfg.get(k) is None:
            cfg[k] = _coerce(k, v)
    for k, v in DEFAULTS.items():
        if k in cfg and cfg[k] is None:
            cfg[k] = v
    if cfg.get("cache_dir") is None and os.environ.get(CACHE_ENV):
        cfg["cache_dir"] = os.environ[CACHE_ENV]
    cfg["lattice_extra"] = {k: v for k, v in file_vals.items()
                            if k in ("generators", "covolume", "minus_identity", "cusp_width", "ring_q",
                                     "delta", "name")}
    return cfg


_LIST_KEYS = {"t", "T", "eta", "D", "radii", "matrix", "areas"}


def _coerce(key: str, value: str):
    if key in _LIST_KEYS or (key == "radius" and "," in value):
        return _floats(value)
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def make_lattice(cfg: dict) -> Lattice:
    name = str(cfg["lattice"]).lower()
    spec: dict = dict(cfg.get("lattice_extra", {}))
    if name in ("sl2z", "modular"):
        spec["kind"] = "sl2z"
    elif name == "hecke":
        if cfg.get("q") is None:
            raise UsageError("--q is required for hecke lattices")
        spec.update(kind="hecke", q=cfg["q"])
    elif name in ("congruence", "gamma", "gamman"):
        if cfg.get("N") is None:
            raise UsageError("--N is required for congruence lattices")
        spec.update(kind="congruence", N=cfg["N"])
    elif name.startswith("gamma") and name[5:].isdigit():
        spec.update(kind="congruence", N=int(name[5:]))
    elif name == "custom":
        spec["kind"] = "custom"
    else:
        raise UsageError(f"unknown lattice {name!r}")
    try:
        return lattice_from_config(spec)
    except (KeyError, ValueError) as exc:
        raise UsageError(f"invalid lattice: {exc}") from exc


def _cusp_arg(L: Lattice, label):
    """Cusp by label ('inf', '0', '1/2', ...) or, failing that, by index."""
    if label is None:
        return L.cusps[0]
    text = str(label)
    if text in (c.label for c in L.cusps):
        return L.cusp(text)
    try:
        return L.cusps[int(text)]
    except (ValueError, IndexError) as exc:
        raise UsageError(f"no cusp {text!r}; known: {[c.label for c in L.cusps]}") from exc


def make_orbit(L: Lattice, cfg: dict, cusp=None) -> DiscreteOrbit:
    return DiscreteOrbit(L, _cusp_arg(L, cusp if cusp is not None else cfg.get("cusp")),
                         cache_dir=cfg.get("cache_dir"))


def make_holonomy(L: Lattice, cfg: dict) -> HolonomySet:
    spec = cfg.get("components")
    if not spec:
        return HolonomySet([(1.0, make_orbit(L, cfg))])
    comps = []
    for item in str(spec).split(","):
        scale, _, cusp = item.partition("@")
        try:
            lam = float(scale)
        except ValueError as exc:
            raise UsageError(f"bad component {item!r}") from exc
        if not lam > 0:
            raise UsageError("component scales must be positive")
        comps.append((lam, make_orbit(L, cfg, cusp or None)))
    return HolonomySet(comps)


def _cusp_pair(L: Lattice, cfg: dict):
    if cfg.get("cusps"):
        parts = str(cfg["cusps"]).split(",")
        if len(parts) != 2:
            raise UsageError("--cusps takes two labels a,b")
        return _cusp_arg(L, parts[0]), _cusp_arg(L, parts[1])
    c = _cusp_arg(L, cfg.get("cusp"))
    return c, c


def _positive(cfg: dict, key: str) -> float:
    v = cfg.get(key)
    if v is None:
        raise UsageError(f"--{key.replace('_', '-')} is required")
    vals = v if isinstance(v, list) else [v]
    if not vals or any(not (x > 0) for x in vals):
        raise UsageError(f"--{key.replace('_', '-')} must be positive")
    return v


# ---------------------------------------------------------------- output

def _echo(cfg: dict) -> dict:
    skip = {"lattice_extra", "output", "emit_plot_data"}
    out = {k: v for k, v in cfg.items() if k not in skip and v is not None}
    out.update({f"lattice_{k}": v for k, v in cfg.get("lattice_extra", {}).items()})
    return out


def render_csv(header: Sequence[str], rows: Sequence[Sequence], cfg: dict) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps({"schema_version": SCHEMA_VERSION, "config": _echo(cfg)}, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def render_json(payload: dict, cfg: dict) -> str:
    body = {"schema_version": SCHEMA_VERSION, "config": _echo(cfg), **payload}
    return json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n"


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return int(x)
    return x


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    return o


def _write(text: str, cfg: dict) -> None:
    if cfg.get("output"):
        Path(cfg["output"]).write_text(text)
    else:
        sys.stdout.write(text)


def _plot(series: Sequence[tuple[str, float, float]], cfg: dict) -> None:
    if cfg.get("emit_plot_data"):
        Path(cfg["emit_plot_data"]).write_text(render_csv(("series", "x", "y"), series, cfg))


# ---------------------------------------------------------------- commands

def cmd_enumerate(cfg: dict) -> int:
    R = _positive(cfg, "radius")
    L = make_lattice(cfg)
    orbit = make_orbit(L, cfg)
    pts = orbit.points(R)
    rows = [(float(x), float(y), float(math.sqrt(n)), int(d))
            for (x, y), n, d in zip(pts.xy, pts.norm_sq, pts.depth)]
    _write(render_csv(("x", "y", "norm", "word_length"), rows, cfg), cfg)
    return 0


def cmd_phi(cfg: dict) -> int:
    C = _positive(cfg, "max_c")
    L = make_lattice(cfg)
    a, b = _cusp_pair(L, cfg)
    table = pairstats.build_pair_table(L, a, b, C)
    if cfg.get("t"):
        ts = _positive(cfg, "t")
        ctr = cfg.get("c_trunc") or C
        rows = []
        for t in ts:
            val, bound = pairstats.phi_function(table, t, ctr)
            rows.append((t, val, bound))
        _write(render_csv(("t", "Phi", "tail_bound"), rows, cfg), cfg)
        _plot([("Phi", r[0], r[1]) for r in rows], cfg)
        return 0
    rows = [(_key_text(k), float(k), m) for k, m in sorted(table.entries.items(), key=lambda kv: float(kv[0]))
            if float(k) > 0]
    _write(render_csv(("c", "c_value", "phi"), rows, cfg), cfg)
    _plot([("phi", r[1], r[2]) for r in rows], cfg)
    return 0


def _key_text(k) -> str:
    if isinstance(k, pairstats.ExactDeterminant):
        return f"({k.numerator})/{k.denominator!r}"
    return str(k)


def cmd_partial_sum(cfg: dict) -> int:
    Ts = _positive(cfg, "T")
    L = make_lattice(cfg)
    a, b = _cusp_pair(L, cfg)
    table = pairstats.build_pair_table(L, a, b, max(Ts))
    rows = [(T, pairstats.partial_sum(table, T)) for T in Ts]
    _write(render_csv(("T", "partial_sum"), rows, cfg), cfg)
    _plot([("partial_sum", r[0], r[1]) for r in rows], cfg)
    return 0


def cmd_friends(cfg: dict) -> int:
    R = _positive(cfg, "radius")
    etas = _positive(cfg, "eta")
    L = make_lattice(cfg)
    S = make_holonomy(L, cfg)
    total = S.count(R)
    rows = []
    for eta in etas:
        fc = pairstats.friends(S, R, eta)
        rows.append((eta, fc, total, fc / total if total else float("nan")))
    _write(render_csv(("eta", "friend_count", "total", "ratio"), rows, cfg), cfg)
    _plot([("friend_ratio", r[0], r[3]) for r in rows], cfg)
    return 0


def cmd_detpairs(cfg: dict) -> int:
    R = _positive(cfg, "radius")
    Ds = _positive(cfg, "D")
    s = _positive(cfg, "s")
    L = make_lattice(cfg)
    S = make_holonomy(L, cfg)
    rows = [(D, pairstats.det_pairs(S, R, D, s)) for D in Ds]
    _write(render_csv(("D", "pairs"), rows, cfg), cfg)
    _plot([("det_pairs", r[0], r[1]) for r in rows], cfg)
    return 0


def cmd_paircorr(cfg: dict) -> int:
    R = _positive(cfg, "radius")
    s = _positive(cfg, "s")
    L = make_lattice(cfg)
    S = make_holonomy(L, cfg)
    c_M = S.counting_constant
    payload = {"R2_orbit": pairstats.pair_correlation(S, R, s, c_M), "c_M": c_M, "reference": math.pi * s * s}
    n = int(cfg.get("n") or 0)
    if n:
        rep = haarmc.avg_pair_correlation(L, S, s, R, n, seed=cfg.get("seed"), workers=cfg["workers"])
        payload["cone_average"] = rep.to_dict()
    _write(render_json(payload, cfg), cfg)
    return 0


def cmd_lengthdensity(cfg: dict) -> int:
    R = _positive(cfg, "radius")
    text = cfg.get("intervals") or ""
    intervals = []
    for item in str(text).split(","):
        if not item.strip():
            continue
        a, _, b = item.partition(":")
        try:
            lo, hi = float(a), float(b)
        except ValueError as exc:
            raise UsageError(f"bad interval {item!r}") from exc
        if not 0 <= lo <= hi:
            raise UsageError(f"bad interval {item!r}")
        intervals.append((lo, hi))
    L = make_lattice(cfg)
    S = make_holonomy(L, cfg)
    _write(render_json({"density": pairstats.length_density(S, intervals, R), "intervals": intervals}, cfg), cfg)
    return 0


def _shape(text: str):
    kind, _, arg = str(text).partition(":")
    try:
        if kind == "disk":
            return disk()
        if kind == "square":
            return square()
        if kind == "sector":
            return sector(float(arg))
        if kind == "annulus":
            return annulus(float(arg))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    raise UsageError(f"unknown shape {text!r}")


def cmd_discrepancy(cfg: dict) -> int:
    radii = _positive(cfg, "radii")
    L = make_lattice(cfg)
    mat = cfg.get("matrix") or [1.0, 0.0, 0.0, 1.0]
    if len(mat) != 4:
        raise UsageError("--matrix takes four numbers")
    try:
        rep = counting.discrepancy_experiment(L, make_orbit(L, cfg), _shape(cfg["shape"]),
                                              np.array(mat, float).reshape(2, 2), radii)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _write(render_csv(("R", "count", "main_term", "discrepancy"), rep.rows(), cfg), cfg)
    _plot([("abs_discrepancy", r[0], abs(r[3])) for r in rep.rows()], cfg)
    sys.stderr.write(f"fitted exponent {rep.fitted_exponent} (target {rep.target_exponent:.4f})\n")
    return 0


def cmd_congruence(cfg: dict) -> int:
    radii = _positive(cfg, "radius")
    radii = radii if isinstance(radii, list) else [radii]
    L = make_lattice(cfg)
    N = L.level if L.kind == "congruence" else 1
    cusp = _cusp_arg(L, cfg.get("cusp")) if N > 1 else None
    rows = []
    for R in radii:
        exact, main = counting.congruence_count(N, cusp, R)
        rows.append((R, exact, main, exact - main))
    _write(render_csv(("R", "count", "main_term", "discrepancy"), rows, cfg), cfg)
    return 0


def cmd_check(cfg: dict) -> int:
    formula = cfg["formula"]
    L = make_lattice(cfg)
    seed, workers, n = cfg.get("seed"), cfg["workers"], int(cfg["n"])
    if n < 1000:
        raise UsageError("--n must be at least 1000")
    scale = float(cfg["reference_scale"])
    tol = cfg.get("tolerance")
    if formula == "second-moment-discrepancy":
        areas = cfg.get("areas") or [1e2, 1e3, 1e4]
        orbit = make_orbit(L, cfg)
        res = [counting.second_moment_discrepancy(L, orbit, a, n, seed=seed, workers=workers) for a in areas]
        ratios = [r.ratio * scale for r in res]
        limit = 10.0 if tol is None else float(tol)
        spread = max(ratios) / min(ratios) if min(ratios) > 0 else math.inf
        passed = bool(spread < limit and all(r.estimate >= 0 for r in res))
        payload = {"formula": formula, "lattice": L.config_key(), "n": n, "seed": seed,
                   "exponent": res[0].exponent, "spread_limit": limit, "ratio_spread": spread, "passed": passed,
                   "rows": [{"area": r.area, "estimate": r.estimate, "stderr": r.stderr, "ratio": q,
                             "resample_rate": r.resample_rate} for r, q in zip(res, ratios)]}
        _write(render_json(payload, cfg), cfg)
        _plot([("ratio", r.area, q) for r, q in zip(res, ratios)], cfg)
        return 0 if passed else 1
    R = _positive(cfg, "radius")
    kw = {} if tol is None else {"rel_tolerance": float(tol)}
    if formula == "first-moment":
        rep = haarmc.first_moment_check(L, make_orbit(L, cfg), R, n, seed=seed, workers=workers,
                                        reference_scale=scale)
        if tol is not None:
            rep.rel_tolerance = float(tol)
    elif formula == "pair-moment":
        a, b = _cusp_pair(L, cfg)
        rep = haarmc.pair_moment_check(L, make_orbit(L, cfg, a.label), make_orbit(L, cfg, b.label), pair_ball(R), n,
                                       seed=seed, workers=workers, table_c=cfg["table_c"], reference_scale=scale, **kw)
    elif formula == "second-moment":
        rep = haarmc.second_moment_check(L, make_orbit(L, cfg), ball_indicator(R), n, seed=seed, workers=workers,
                                         table_c=cfg["table_c"], reference_scale=scale, **kw)
    else:
        rep = haarmc.avg_pair_correlation(L, make_holonomy(L, cfg), _positive(cfg, "s"), R, n, seed=seed,
                                          workers=workers, reference_scale=scale, **kw)
    _write(render_json(rep.to_dict(), cfg), cfg)
    _plot([("estimate", 0.0, rep.estimate), ("reference", 0.0, rep.reference)], cfg)
    return 0 if rep.passed else 1


COMMANDS = {
    "enumerate": cmd_enumerate, "phi": cmd_phi, "partial-sum": cmd_partial_sum, "friends": cmd_friends,
    "detpairs": cmd_detpairs, "paircorr": cmd_paircorr, "lengthdensity": cmd_lengthdensity,
    "discrepancy": cmd_discrepancy, "congruence": cmd_congruence, "check": cmd_check,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (ValueError, NotImplementedError, KeyError) as exc:
        sys.stderr.write(f"error in {args.command}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
