"""Command-line entry point: ``sle-lab <command> [options]``.

Exit codes: 0 all tests passed, 1 a statistical test failed, 2 usage or
configuration error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import re
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiments as ex
from .errors import ParameterError, SleLabError
from .loewner import HalfDisk, Polygon, trace
from .sde_drivers import RngSpec, build_pair_driver, sle_kr_driver

COMMANDS = ("trace", "martingale", "mstar", "identities", "coupling", "reversibility")

FLOAT_KEYS = {"kappa", "x1", "x2", "dt", "alpha", "z_threshold", "max_discard", "min_neff",
              "ref_radius", "identity_time", "derivative_dt", "radius1", "radius2"}
INT_KEYS = {"n_steps", "samples", "seed", "n_sub", "identity_samples", "workers"}
BOOL_KEYS = {"tbar2_zero", "svg", "dump_samples"}
STR_KEYS = {"observables", "hull_pairs", "format", "out"}
KNOWN_KEYS = FLOAT_KEYS | INT_KEYS | BOOL_KEYS | STR_KEYS


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ------------------------------------------------------------------------ config


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise UsageError(f"{path}:{n}: expected key = value")
        if key not in KNOWN_KEYS:
            raise UsageError(f"{path}:{n}: unknown key {key!r}")
        out[key] = _convert(key, value, f"{path}:{n}")
    return out


def _convert(key, value, where):
    try:
        if key in FLOAT_KEYS:
            return float(value)
        if key in INT_KEYS:
            return int(value)
        if key in BOOL_KEYS:
            v = value.lower()
            if v not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return v in ("true", "1", "yes")
    except ValueError:
        raise UsageError(f"{where}: bad value {value!r} for {key}") from None
    return value


_HULL = re.compile(r"(halfdisk|polygon)\s*\(((?:[^()]|\([^()]*\))*)\)", re.I)


def parse_hull_pairs(text):
    """``halfdisk(0, 0.3) halfdisk(1, 0.3); polygon((-.2,0),(0,.3),(.2,0)) halfdisk(1,.2)``."""
    pairs = []
    for chunk in text.split(";"):
        hulls = []
        for kind, args in _HULL.findall(chunk):
            if kind.lower() == "halfdisk":
                c, r = (float(v) for v in args.split(","))
                hulls.append(HalfDisk(c, r))
            else:
                pts = re.findall(r"\(([^()]*)\)", args)
                hulls.append(Polygon(tuple(tuple(float(v) for v in p.split(",")) for p in pts)))
        if len(hulls) != 2:
            raise UsageError(f"each hull pair needs exactly two hulls: {chunk.strip()!r}")
        pairs.append(tuple(hulls))
    return tuple(pairs)


def build_config(command, settings):
    """ExperimentConfig for ``command`` from merged config-file and flag settings."""
    s = dict(settings)
    for k in ("format", "out", "svg", "dump_samples", "workers"):
        s.pop(k, None)
    kw = {}
    rename = {"samples": "n_samples"}
    for k, v in s.items():
        if k in ("radius1", "radius2", "hull_pairs", "observables"):
            continue
        kw[rename.get(k, k)] = v
    if "observables" in s:
        kw["observables"] = tuple(o.strip() for o in s["observables"].split(",") if o.strip())
    x1, x2 = kw.get("x1", 0.0), kw.get("x2", 1.0)
    for key in ("radius1", "radius2"):
        if key in s and not s[key] > 0:
            raise ParameterError(f"{key} must be positive")
    if "hull_pairs" in s:
        kw["hull_pairs"] = parse_hull_pairs(s["hull_pairs"])
    elif "radius1" in s or "radius2" in s:
        r1, r2 = s.get("radius1", 0.3), s.get("radius2", 0.3)
        kw["hull_pairs"] = ((HalfDisk(x1, r1), HalfDisk(x2, r2)),)
    if command == "reversibility":
        return ex.reversibility_defaults(**kw)
    if command == "mstar":
        return ex.mstar_defaults(**kw)
    if command == "coupling":
        kw.setdefault("kappa", 3.0)
        kw.setdefault("n_samples", 1000)
    if command == "identities":
        kw.setdefault("kappa", 3.0)
    return ex.ExperimentConfig(**kw)


# ------------------------------------------------------------------------ output


def svg_polylines(curves, x1, x2, size=600):
    """SVG of curves in the window [x1 - 1, x2 + 1] x [0, 2 (x2 - x1)]."""
    lo, hi, top = x1 - 1.0, x2 + 1.0, 2.0 * (x2 - x1)
    w = size
    h = int(round(size * top / (hi - lo)))
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
             f'viewBox="0 0 {w} {h}">',
             f'<line x1="0" y1="{h}" x2="{w}" y2="{h}" stroke="black"/>']
    for k, pts in enumerate(curves):
        pts = np.asarray(pts)
        xs = (pts.real - lo) / (hi - lo) * w
        ys = h - pts.imag / top * h
        coords = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(xs, ys))
        lines.append(f'<polyline fill="none" stroke="{colors[k % len(colors)]}" '
                     f'stroke-width="1" points="{coords}"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _trace_csv(tr):
    rows = ["t,re,im"]
    rows += [f"{t!r},{z.real!r},{z.imag!r}" for t, z in zip(tr.times.tolist(), tr.points.tolist())]
    return "\n".join(rows) + "\n"


def _sample_curves(command, cfg):
    rng = RngSpec(cfg.seed, 0)
    if command == "reversibility":
        f = sle_kr_driver(cfg.kappa, cfg.x1, cfg.x2, cfg.dt, cfg.n_steps, rng, side=1)
        r = sle_kr_driver(cfg.kappa, cfg.x2, cfg.x1, cfg.dt, cfg.n_steps, rng, side=2)
        return [trace(f.xi).points, trace(r.xi).points]
    d = build_pair_driver(cfg.kappa, cfg.x1, cfg.x2, cfg.dt, cfg.n_steps, rng)
    return [trace(d.side1.xi).points, trace(d.side2.xi).points]


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _sidecar(out, name, argv, wall, workers):
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    _write(out / f"{name}.log", json.dumps(
        {"finished": stamp, "wall_time_s": round(wall, 3), "workers": workers,
         "argv": list(argv)}, indent=2) + "\n")


# --------------------------------------------------------------------------- run


def _parser():
    p = _Parser(prog="sle-lab", description="Numerical laboratory for two-sided SLE martingales.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", metavar="PATH", help="key = value configuration file")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--out", metavar="DIR", help="output directory (default: .)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--svg", action="store_true", default=None, help="also write SVG figures")
    p.add_argument("--workers", type=int,
                   help="parallel worker processes (default: $SLE_LAB_WORKERS or 1)")
    p.add_argument("--dump-samples", action="store_true", default=None,
                   help="write per-sample observables to CSV")
    return p


def _settings(args):
    s = read_config(args.config) if args.config else {}
    for key in ("seed", "samples", "kappa", "out", "format", "svg", "workers", "dump_samples"):
        v = getattr(args, key)
        if v is not None:
            s[key] = v
    if "workers" not in s:
        env = os.environ.get("SLE_LAB_WORKERS")
        try:
            s["workers"] = int(env) if env else 1
        except ValueError:
            raise UsageError(f"SLE_LAB_WORKERS must be an integer, got {env!r}") from None
    return s


def _run_trace(s, out, fmt):
    kw = {k: s[k] for k in ("kappa", "x1", "x2", "dt", "seed") if k in s}
    cfg = ex.ExperimentConfig(hull_pairs=(), **kw)
    n = s.get("n_steps", 1000)
    side = sle_kr_driver(cfg.kappa, cfg.x1, cfg.x2, cfg.dt, n, RngSpec(cfg.seed, 0))
    tr = trace(side.xi)
    if fmt == "json":
        _write(out / "trace.json", json.dumps(
            {"t": tr.times.tolist(), "re": tr.points.real.tolist(),
             "im": tr.points.imag.tolist()}, indent=1) + "\n")
    else:
        _write(out / "trace.csv", _trace_csv(tr))
    if s.get("svg"):
        _write(out / "trace.svg", svg_polylines([tr.points], cfg.x1, cfg.x2))
    print(f"trace: {len(tr)} points written to {out}")
    return 0


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = _parser()
    try:
        try:
            args, extra = parser.parse_known_args(argv)
        except SystemExit as exc:  # --help
            return int(exc.code or 0)
        if extra:
            flag = next((e for e in extra if e.startswith("-")), extra[0])
            raise UsageError(f"unknown flag {flag}" if flag.startswith("-")
                             else f"unexpected argument {flag}")
        s = _settings(args)
        out = Path(s.get("out", "."))
        fmt = s.get("format", "json")
        if fmt not in ("csv", "json"):
            raise UsageError(f"format must be csv or json, got {fmt!r}")
        if args.command == "trace":
            return _run_trace(s, out, fmt)
        cfg = replace(build_config(args.command, s), workers=s["workers"])
    except UsageError as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return 2
    except (ParameterError, ValueError) as exc:
        print(f"ERROR: invalid configuration: {exc}", file=sys.stderr)
        return 2

    try:
        report = ex.SUITES[args.command](cfg)
    except ParameterError as exc:
        print(f"ERROR: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except (SleLabError, ArithmeticError) as exc:
        print(f"ERROR: numerical abort: {exc}", file=sys.stderr)
        return 3

    name = args.command
    if fmt == "json":
        _write(out / f"{name}.json", report.to_json())
    else:
        _write(out / f"{name}.csv", report.to_csv())
        if report.records:
            _write(out / f"{name}_records.csv", report.records_csv())
    if s.get("dump_samples") and report.samples:
        _write(out / f"{name}_samples.csv", report.samples_csv())
    if s.get("svg"):
        _write(out / f"{name}.svg", svg_polylines(_sample_curves(name, cfg), cfg.x1, cfg.x2))
    _sidecar(out, name, argv, report.wall_time, cfg.workers)
    for t in report.tests:
        status = "PASS" if t.passed else "FAIL"
        print(f"{status} {name}.{t.name}: statistic={_short(t.statistic)} "
              f"threshold={_short(t.threshold)} n={t.n} discards={t.discards}")
    return 0 if report.passed else 1


def _short(v):
    return "nan" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.6g}"


if __name__ == "__main__":
    sys.exit(main())
