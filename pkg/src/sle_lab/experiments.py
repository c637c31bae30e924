"""Seeded Monte Carlo suites and the reports they produce.

Every sample ``i`` draws its randomness from ``RngSpec(seed, stream=i)``, so a
sample's outcome depends only on the seed and its position.  Samples may be
evaluated by a process pool; results are reduced sequentially in stream order,
which makes every report independent of the number of workers.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import partial

import numpy as np

from . import ensemble as ens
from .conformal_maps import compose_apply, invert_apply
from .ensemble import EnsemblePair, compute_A, compute_M
from .errors import DegenerateWeightsError, DiscardLimitError, ParameterError, SleLabError
from .loewner import HalfDisk, HullSpec, Trace, exit_time, trace, validate_hull_pair
from .mstar import INF, MEvaluator, mstar_eval, select_S, structural_checks
from .sde_drivers import RngSpec, build_pair_driver, default_dt, sle_kr_driver
from .stats import ks_two_sample, weighted_ks

# ------------------------------------------------------------------ observables


def _crossings(points, axis, level):
    """Interpolated points where the polyline crosses ``coord == level``."""
    p = np.asarray(points, dtype=complex)
    c = p.real if axis == "re" else p.imag
    a, b = c[:-1] - level, c[1:] - level
    hit = (a == 0) | (a * b < 0)
    i = np.flatnonzero(hit)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(a[i] == 0, 0.0, a[i] / (a[i] - b[i]))
    out = p[i] + s * (p[i + 1] - p[i])
    if c[-1] == level:
        out = np.append(out, p[-1])
    return out


@dataclass(frozen=True)
class MaxHeight:
    name = "MaxHeight"

    def __call__(self, points):
        return float(np.max(np.asarray(points).imag))


@dataclass(frozen=True)
class MidlineMinHeight:
    """Lowest height at which the curve meets the vertical line ``Re z = mid``
    (``inf`` if it never does)."""

    mid: float
    name = "MidlineMinHeight"

    def __call__(self, points):
        c = _crossings(points, "re", self.mid)
        return float(np.min(c.imag)) if c.size else math.inf


@dataclass(frozen=True)
class LineCrossLeftmost:
    """Leftmost point where the curve meets the horizontal line ``Im z = y0``."""

    y0: float
    name = "LineCrossLeftmost"

    def __call__(self, points):
        c = _crossings(points, "im", self.y0)
        return float(np.min(c.real)) if c.size else math.inf


def parse_observable(text, x1=0.0, x2=1.0):
    name, _, arg = text.strip().partition(":")
    if name == "MaxHeight":
        return MaxHeight()
    if name == "MidlineMinHeight":
        return MidlineMinHeight(float(arg) if arg else 0.5 * (x1 + x2))
    if name == "LineCrossLeftmost":
        if not arg:
            raise ParameterError("LineCrossLeftmost needs a level, e.g. LineCrossLeftmost:0.2")
        return LineCrossLeftmost(float(arg))
    raise ParameterError(f"unknown observable {text!r}")


def stopped_points(tr, hull):
    """Trace points up to the hull exit, ending at the refined boundary point."""
    T, i, exited = exit_time(tr, hull)
    if not exited:
        return tr.points.copy(), False
    a, b = complex(tr.points[i - 1]), complex(tr.points[i])
    end = a + hull.exit_fraction(a, b) * (b - a)
    return np.append(tr.points[:i], end), True


def hcap_bound(hull: HullSpec):
    """Upper bound for the half-plane capacity of anything inside ``hull``."""
    if isinstance(hull, HalfDisk):
        return hull.radius**2
    c = hull.base
    return max(abs(complex(x, y) - c) for x, y in hull.vertices) ** 2


# ----------------------------------------------------------------- configuration


def _default_pairs():
    return ((HalfDisk(0.0, 0.3), HalfDisk(1.0, 0.3)),)


@dataclass(frozen=True)
class ExperimentConfig:
    kappa: float = 8 / 3
    x1: float = 0.0
    x2: float = 1.0
    dt: float = None
    n_steps: int = None
    hull_pairs: tuple = field(default_factory=_default_pairs)
    n_samples: int = 2000
    seed: int = 0
    alpha: float = 0.01
    z_threshold: float = 3.0
    max_discard: float = 0.05
    n_sub: int = 20
    observables: tuple = ("MaxHeight",)
    workers: int = 1
    min_neff: float = 300.0
    ref_radius: float = None
    identity_samples: int = 3
    identity_time: float = 0.02
    derivative_dt: float = 1e-3
    tbar2_zero: bool = False

    def __post_init__(self):
        if not self.kappa > 0:
            raise ParameterError(f"kappa must be positive, got {self.kappa}")
        if not self.x1 < self.x2:
            raise ParameterError("need x1 < x2")
        if self.dt is None:
            object.__setattr__(self, "dt", default_dt(self.x1, self.x2))
        if not self.dt > 0:
            raise ParameterError("dt must be positive")
        if self.n_samples < 1:
            raise ParameterError("need at least one sample")
        if not 0 < self.alpha < 1:
            raise ParameterError("alpha must lie in (0, 1)")
        pairs = tuple(tuple(p) for p in self.hull_pairs)
        object.__setattr__(self, "hull_pairs", pairs)
        for h1, _ in pairs:
            for _, h2 in pairs:
                validate_hull_pair(h1, h2, self.x1, self.x2)
        if self.n_steps is None:
            cap = max(max(hcap_bound(a), hcap_bound(b)) for a, b in pairs) if pairs else 0.0
            if self.ref_radius:
                cap = max(cap, self.ref_radius**2)
            object.__setattr__(self, "n_steps", int(math.ceil(cap / (2 * self.dt))) + 2)
        for o in self.observables:
            parse_observable(o, self.x1, self.x2)

    @property
    def observable_fns(self):
        return [parse_observable(o, self.x1, self.x2) for o in self.observables]

    def summary(self):
        d = asdict(self)
        d["hull_pairs"] = [[_hull_repr(h) for h in p] for p in self.hull_pairs]
        d["observables"] = list(self.observables)
        d.pop("workers")
        return d


def _hull_repr(h):
    if isinstance(h, HalfDisk):
        return {"halfdisk": [h.center, h.radius]}
    return {"polygon": [list(v) for v in h.vertices]}


def reversibility_defaults(**kw):
    """Config for the reversibility suite: a single reference half-disk around each end."""
    base = dict(kappa=2.0, n_samples=1000, dt=4e-4, ref_radius=0.75, hull_pairs=(),
                observables=("MaxHeight", "MidlineMinHeight"))
    base.update(kw)
    return ExperimentConfig(**base)


def mstar_defaults(**kw):
    """Three hull pairs: a nested pair and an incomparable one."""
    pairs = (
        (HalfDisk(0.0, 0.2), HalfDisk(1.0, 0.2)),
        (HalfDisk(0.0, 0.3), HalfDisk(1.0, 0.3)),
        (HalfDisk(0.0, 0.4), HalfDisk(1.0, 0.15)),
    )
    base = dict(n_samples=1000, hull_pairs=pairs)
    base.update(kw)
    return ExperimentConfig(**base)


# ---------------------------------------------------------------------- reports


@dataclass
class TestResult:
    name: str
    estimate: float
    stderr: float
    statistic: float
    threshold: float
    passed: bool
    n: int
    discards: int = 0
    extra: dict = field(default_factory=dict)

    __test__ = False

    def payload(self):
        return {
            "name": self.name, "estimate": self.estimate, "stderr": self.stderr,
            "statistic": self.statistic, "threshold": self.threshold,
            "pass": bool(self.passed), "n": int(self.n), "discards": int(self.discards),
            "extra": self.extra,
        }


@dataclass
class SuiteReport:
    suite: str
    config: dict
    tests: list
    n: int
    discards: int
    wall_time: float = 0.0
    samples: dict = field(default_factory=dict)
    records: list = field(default_factory=list)

    @property
    def passed(self):
        return all(t.passed for t in self.tests)

    def test(self, name):
        return next(t for t in self.tests if t.name == name)

    def payload(self):
        head = self.tests[0] if self.tests else None
        return _clean({
            "suite": self.suite,
            "pass": self.passed,
            "n": self.n,
            "discards": self.discards,
            "mean": head.estimate if head else None,
            "stderr": head.stderr if head else None,
            "tests": [t.payload() for t in self.tests],
            "config": self.config,
        })

    def to_json(self):
        return json.dumps(self.payload(), indent=2, sort_keys=True) + "\n"

    CSV_HEADER = ("suite", "test", "estimate", "stderr", "statistic", "threshold", "pass",
                  "n", "discards")

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        for t in self.tests:
            w.writerow([self.suite, t.name, _fmt(t.estimate), _fmt(t.stderr), _fmt(t.statistic),
                        _fmt(t.threshold), int(t.passed), t.n, t.discards])
        return buf.getvalue()

    def samples_csv(self):
        cols = list(self.samples)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["stream", *cols])
        for r, row in enumerate(zip(*(self.samples[c] for c in cols))):
            w.writerow([r, *map(_fmt, row)])
        return buf.getvalue()

    def records_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ens.MartingaleRecord.CSV_HEADER)
        for row in self.records:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if v is None:
        return ""
    return repr(float(v))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return obj


# ----------------------------------------------------------------- sample engine


def run_samples(fn, n, workers=1, offset=0):
    """``[fn(i) for i in streams]`` in stream order, optionally on a process pool."""
    streams = range(offset, offset + n)
    if workers is None or workers <= 1 or n < 2:
        return [fn(i) for i in streams]
    chunk = max(1, n // (8 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, streams, chunksize=chunk))


def _guarded(fn, cfg, stream):
    try:
        return fn(cfg, stream)
    except (SleLabError, ArithmeticError, FloatingPointError) as exc:
        return {"discard": type(exc).__name__}


def _split(results, cfg, what):
    kept = [r for r in results if "discard" not in r]
    discards = len(results) - len(kept)
    if discards > cfg.max_discard * len(results):
        reasons = sorted({r["discard"] for r in results if "discard" in r})
        raise DiscardLimitError(
            f"{what}: {discards} of {len(results)} samples discarded ({', '.join(reasons)})",
            discards, len(results))
    return kept, discards


def _mean_test(name, values, cfg, discards, target=1.0):
    v = np.asarray(values, dtype=float)
    mean = float(v.mean())
    se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else math.inf
    z = abs(mean - target) / se if se > 0 else (0.0 if mean == target else math.inf)
    return TestResult(name, mean, se, z, cfg.z_threshold, bool(z <= cfg.z_threshold), v.size,
                      discards)


def _weighted_or_none(xs, ws, ys, cfg):
    try:
        return weighted_ks(xs, ws, ys, alpha=cfg.alpha)
    except DegenerateWeightsError:
        return None


def _degenerate(name, n, discards):
    return TestResult(name, math.nan, math.nan, math.nan, math.nan, False, n, discards,
                      {"error": "effective sample size below the asymptotic minimum"})


def _pair_sample(cfg, stream):
    driver = build_pair_driver(cfg.kappa, cfg.x1, cfg.x2, cfg.dt, cfg.n_steps,
                               RngSpec(cfg.seed, stream))
    return EnsemblePair.from_driver(driver)


def _exit_indices(pair, h1, h2):
    _, i1, e1 = exit_time(pair.trace1, h1)
    _, i2, e2 = exit_time(pair.trace2, h2)
    if not (e1 and e2):
        return None
    return i1, i2


# -------------------------------------------------------------------- martingale


def _martingale_sample(cfg, stream):
    pair = _pair_sample(cfg, stream)
    h1, h2 = cfg.hull_pairs[0]
    idx = _exit_indices(pair, h1, h2)
    if idx is None:
        return {"discard": "no-exit"}
    rec = compute_M(pair, *idx, n_sub=cfg.n_sub)
    if not rec.valid:
        return {"discard": "invalid-record"}
    pts, _ = stopped_points(pair.trace1, h1)
    # an independent side-1 chain (its own Brownian stream) for the unweighted law
    rng = RngSpec(cfg.seed, stream)
    side = sle_kr_driver(cfg.kappa, cfg.x1, cfg.x2, cfg.dt, cfg.n_steps, rng,
                         increments=rng.increments(cfg.n_steps, cfg.dt, 3))
    ref, exited = stopped_points(trace(side.xi), h1)
    if not exited:
        return {"discard": "no-exit"}
    fns = cfg.observable_fns
    return {"M": rec.M, "obs": [f(pts) for f in fns], "ref": [f(ref) for f in fns],
            "record": rec.as_row()}


def run_martingale_test(cfg: ExperimentConfig) -> SuiteReport:
    """E[M(T1, T2)] = 1 at the exits of one hull pair, plus the side-1 marginal check."""
    t0 = time.perf_counter()
    if len(cfg.hull_pairs) != 1:
        raise ParameterError("the martingale suite takes exactly one hull pair")
    res = run_samples(partial(_guarded, _martingale_sample, cfg), cfg.n_samples, cfg.workers)
    kept, discards = _split(res, cfg, "martingale")
    M = np.array([r["M"] for r in kept])
    tests = [_mean_test("mean_M", M, cfg, discards)]
    ok = bool(np.all(np.isfinite(M)) and np.all(M > 0))
    tests.append(TestResult("M_positive_bounded", float(M.min()), math.nan, float(M.max()),
                            math.nan, ok, M.size, discards,
                            {"min": float(M.min()), "max": float(M.max())}))
    if M.size >= 400:
        q = M.size // 4
        ratio = float(M[:q].std(ddof=1) / np.sqrt(q)) / tests[0].stderr
        expected = math.sqrt(M.size / q)
        tests.append(TestResult("stderr_scaling", ratio, math.nan, ratio / expected, 0.25,
                                abs(ratio / expected - 1) <= 0.25, M.size, discards,
                                {"n_small": q, "n_large": int(M.size), "expected_ratio": expected}))
    samples = {"M": M.tolist()}
    for k, f in enumerate(cfg.observable_fns):
        obs = np.array([r["obs"][k] for r in kept])
        ref = np.array([r["ref"][k] for r in kept])
        samples[f.name] = obs.tolist()
        samples[f"ref_{f.name}"] = ref.tolist()
        d0, p0 = ks_two_sample(obs, ref)
        tests.append(TestResult(f"null_{f.name}", p0, math.nan, d0, cfg.alpha,
                                p0 >= cfg.alpha, obs.size, discards))
        ks = _weighted_or_none(obs, M, ref, cfg)
        if ks is None:
            tests.append(_degenerate(f"marginal_{f.name}", obs.size, discards))
            continue
        tests.append(TestResult(f"marginal_{f.name}", ks.statistic, math.nan, ks.statistic,
                                ks.critical, ks.passed, obs.size, discards,
                                {"n_eff": ks.n_eff, "p_value": ks.p_value}))
    return SuiteReport("martingale", cfg.summary(), tests, len(res), discards,
                       time.perf_counter() - t0, samples, [r["record"] for r in kept])


# ------------------------------------------------------------------------- M*


def _mstar_sample(cfg, stream):
    pair = _pair_sample(cfg, stream)
    exits = []
    for h1, h2 in cfg.hull_pairs:
        idx = _exit_indices(pair, h1, h2)
        if idx is None or 0 in idx:
            return {"discard": "no-exit"}
        exits.append((pair.time(1, idx[0]), pair.time(2, idx[1])))
    splice = select_S(exits)
    ev = MEvaluator(pair, splice, cfg.n_sub)
    value = mstar_eval(INF, INF, splice, ev)
    checks = structural_checks(splice, ev, snap=ev.snap)
    lo, hi = ev.observed_range()
    return {"Mstar": value, "checks": checks, "lo": lo, "hi": hi, "size": splice.size}


def run_mstar_test(cfg: ExperimentConfig) -> SuiteReport:
    """E[M*(inf, inf)] = 1 for a hull family, with per-sample structural invariants."""
    t0 = time.perf_counter()
    if len(cfg.hull_pairs) < 1:
        raise ParameterError("the M* suite needs at least one hull pair")
    res = run_samples(partial(_guarded, _mstar_sample, cfg), cfg.n_samples, cfg.workers)
    kept, discards = _split(res, cfg, "mstar")
    V = np.array([r["Mstar"] for r in kept])
    tests = [_mean_test("mean_Mstar", V, cfg, discards)]
    tol = {"boundary": 0.0, "rectangle": 1e-9, "cell": 1e-9, "saturation": 1e-9}
    for key, thr in tol.items():
        worst = max(r["checks"][key] for r in kept)
        tests.append(TestResult(key, worst, math.nan, worst, thr, worst <= thr, len(kept),
                                discards))
    lo = min(r["lo"] for r in kept)
    hi = max(r["hi"] for r in kept)
    s = max(r["size"] for r in kept)
    c1, c2 = lo ** (s + 1) / hi**s, hi ** (s + 1) / lo**s
    ok = bool(np.all(np.isfinite(V)) and np.all(V > 0) and np.all((V >= c1) & (V <= c2)))
    tests.append(TestResult("bounds", float(V.min()), math.nan, float(V.max()), c2, ok, V.size,
                            discards, {"C1": c1, "C2": c2, "M_min": lo, "M_max": hi}))
    sizes = np.bincount([r["size"] for r in kept]).tolist()
    tests[0].extra["splice_sizes"] = sizes
    return SuiteReport("mstar", cfg.summary(), tests, len(res), discards,
                       time.perf_counter() - t0, {"Mstar": V.tolist()})


# --------------------------------------------------------------------- identities

_TEST_POINTS = (0.5 + 0.8j, -0.7 + 0.4j, 1.8 + 0.6j, 0.5 + 2.0j, 0.5 + 0.15j, 2.5 + 0.05j,
                -1.5 + 1.0j)


def _identity_pair(cfg, stream, dt=None, zero_noise=False):
    dt = cfg.dt if dt is None else dt
    n = int(round(cfg.identity_time / dt))
    d = build_pair_driver(cfg.kappa, cfg.x1, cfg.x2, dt, n, RngSpec(cfg.seed, stream, zero_noise))
    return EnsemblePair.from_driver(d), n


def _test_points(pair, i1, i2, count=5):
    pts = np.concatenate([pair.trace1.points[: i1 + 1], pair.trace2.points[: i2 + 1]])
    scale = pair.x2 - pair.x1
    cand = [pair.x1 + scale * z for z in _TEST_POINTS]
    good = [z for z in cand if np.min(np.abs(pts - z)) > 0.05 * scale]
    return np.array(good[:count])


def _speed_residual(pair, j, i_j, i_k, probes=5):
    """max relative gap between dv/dt of the image chain and A_{j,1}^2."""
    chain = ens.time_changed_chain(pair, j, i_j, i_k)
    dt = pair.time(j, 1)
    worst = 0.0
    for i in np.linspace(2, i_j - 2, probes).round().astype(int):
        slope = (chain.v[i + 1] - chain.v[i - 1]) / (2 * dt)
        a1 = compute_A(pair, *((i, i_k) if j == 1 else (i_k, i))).side(j)[1]
        worst = max(worst, abs(slope - a1**2) / a1**2)
    return worst, chain


def integral_identity_residual(cfg, dt, stream=0, zero_noise=True, m=20):
    pair, n = _identity_pair(cfg, stream, dt, zero_noise)
    i1 = ens.integral_I(pair, n, n, m, warn=False)
    i2 = ens.integral_I_2d(pair, n, n, m)
    return abs(i1 - i2) / abs(i2), i1, i2


def run_identity_checks(cfg: ExperimentConfig) -> SuiteReport:
    """Commutation, time-derivative, mapped-driving, speed and integral identities."""
    t0 = time.perf_counter()
    comm = lem = drive = speed = 0.0
    rough = []
    zero_ok = True
    for s in range(cfg.identity_samples):
        pair, n = _identity_pair(cfg, s)
        zs = _test_points(pair, n, n)
        comm = max(comm, ens.commutation_residual(pair, n, n, zs))
        for j in (1, 2):
            lem = max(lem, *ens.time_derivative_check(pair, n, n, cfg.derivative_dt, j=j))
            res, chain = _speed_residual(pair, j, n, n)
            speed = max(speed, res)
            a0 = compute_A(pair, n, n).side(j)[0]
            drive = max(drive, abs(chain.eta[-1] - a0))
        i_a = ens.integral_I(pair, n, n, 20, warn=False)
        rough.append(abs(i_a - ens.integral_I_2d(pair, n, n, 20)) / abs(i_a))
        zero_ok &= ens.integral_I(pair, 0, n) == 0.0 and ens.integral_I(pair, n, 0) == 0.0
        zero_ok &= ens.time_derivative_check(pair, n, 0, cfg.derivative_dt) == (0.0, 0.0)
        zero_ok &= ens.commutation_residual(pair, 0, 0, zs) == 0.0
    r1, _, _ = integral_identity_residual(cfg, cfg.dt)
    r2, _, _ = integral_identity_residual(cfg, cfg.dt / 2)
    k = cfg.identity_samples
    tests = [
        TestResult("commutation", comm, math.nan, comm, 1e-3, comm <= 1e-3, k),
        TestResult("time_derivative", lem, math.nan, lem, 0.05, lem <= 0.05, k,
                   extra={"delta_t": cfg.derivative_dt}),
        TestResult("mapped_driving", drive, math.nan, drive, 1e-3, drive <= 1e-3, k),
        TestResult("speed_factor", speed, math.nan, speed, 0.05, speed <= 0.05, k),
        TestResult("integral_identity", r1, math.nan, r1, 0.02, r1 <= 0.02, 1,
                   extra={"driver": "zero-noise", "brownian_max": max(rough)}),
        TestResult("integral_refinement", r2, math.nan, r2 / r1, 1.0, r2 < r1, 1,
                   extra={"coarse": r1, "fine": r2}),
        TestResult("zero_time_edges", 0.0, math.nan, 0.0, 0.0, bool(zero_ok), k),
    ]
    return SuiteReport("identities", cfg.summary(), tests, k, 0, time.perf_counter() - t0)


# ----------------------------------------------------------------------- coupling


def _coupling_sample(cfg, stream):
    pair = _pair_sample(cfg, stream)
    h1, h2 = cfg.hull_pairs[0]
    idx = _exit_indices(pair, h1, h2)
    if idx is None:
        return {"discard": "no-exit"}
    i1, i2 = idx
    if cfg.tbar2_zero:
        i2 = 0
    rec = compute_M(pair, i1, i2, n_sub=cfg.n_sub)
    if not rec.valid:
        return {"discard": "invalid-record"}
    pts_a, _ = stopped_points(pair.trace1, h1)

    head = pair.comp2.prefix(i2)
    start = compose_apply(head, pair.x1).real
    force = pair.tip_value(2, i2)
    rng = RngSpec(cfg.seed, stream)
    side = sle_kr_driver(cfg.kappa, start, force, cfg.dt, cfg.n_steps, rng,
                         increments=rng.increments(cfg.n_steps, cfg.dt, 3))
    mapped = trace(side.xi).points.copy()
    mapped[0] = mapped[0].real
    back = invert_apply(head, mapped)
    back[0] = pair.x1
    pts_b, exited = stopped_points(Trace(side.xi.times, back), h1)
    if not exited:
        return {"discard": "no-exit"}
    fns = cfg.observable_fns
    return {"w": rec.M, "a": [f(pts_a) for f in fns], "b": [f(pts_b) for f in fns]}


def _coupling_tests(cfg, kept, discards, label):
    w = np.array([r["w"] for r in kept])
    tests = []
    for k, f in enumerate(cfg.observable_fns):
        a = np.array([r["a"][k] for r in kept])
        b = np.array([r["b"][k] for r in kept])
        ks = _weighted_or_none(a, w, b, cfg)
        if ks is None:
            tests.append(_degenerate(f"{label}_{f.name}", len(kept), discards))
            continue
        ok = ks.passed and ks.n_eff >= (cfg.min_neff if label == "coupling" else 0)
        tests.append(TestResult(f"{label}_{f.name}", ks.statistic, math.nan, ks.statistic,
                                ks.critical, ok, len(kept), discards,
                                {"n_eff": ks.n_eff, "p_value": ks.p_value}))
    return tests, w


def run_coupling_test(cfg: ExperimentConfig) -> SuiteReport:
    """M-weighted side-1 law vs SLE(kappa, kappa-6) run directly in the slit domain."""
    t0 = time.perf_counter()
    if len(cfg.hull_pairs) != 1:
        raise ParameterError("the coupling suite takes exactly one hull pair")
    if not cfg.kappa <= 4:
        raise ParameterError("the coupling suite needs kappa in (0, 4]")
    null_cfg = replace(cfg, tbar2_zero=True)
    res0 = run_samples(partial(_guarded, _coupling_sample, null_cfg), cfg.n_samples, cfg.workers)
    kept0, d0 = _split(res0, cfg, "coupling null")
    null_tests, _ = _coupling_tests(null_cfg, kept0, d0, "null")
    if cfg.tbar2_zero:
        tests, w, kept, discards, n = null_tests, np.ones(len(kept0)), kept0, d0, len(res0)
    else:
        res = run_samples(partial(_guarded, _coupling_sample, cfg), cfg.n_samples, cfg.workers)
        kept, discards = _split(res, cfg, "coupling")
        tests, w = _coupling_tests(cfg, kept, discards, "coupling")
        tests += null_tests
        n = len(res)
    ok = bool(np.all(np.isfinite(w)) and np.all(w > 0))
    tests.append(TestResult("weights_positive_bounded", float(w.min()), math.nan, float(w.max()),
                            math.nan, ok, w.size, discards))
    samples = {"weight": w.tolist()}
    for k, f in enumerate(cfg.observable_fns):
        samples[f"A_{f.name}"] = [r["a"][k] for r in kept]
        samples[f"B_{f.name}"] = [r["b"][k] for r in kept]
    return SuiteReport("coupling", cfg.summary(), tests, n, discards,
                       time.perf_counter() - t0, samples)


# ------------------------------------------------------------------ reversibility


def _one_sided_sample(cfg, stream, start, force, key):
    rng = RngSpec(cfg.seed, stream)
    side = sle_kr_driver(cfg.kappa, start, force, cfg.dt, cfg.n_steps, rng,
                         increments=rng.increments(cfg.n_steps, cfg.dt, key))
    pts, exited = stopped_points(trace(side.xi), HalfDisk(start, cfg.ref_radius))
    if not exited:
        return None
    return [f(pts) for f in cfg.observable_fns]


def _reversal_sample(cfg, stream):
    out = {}
    for name, start, force, key in (("F", cfg.x1, cfg.x2, 1), ("R", cfg.x2, cfg.x1, 2),
                                    ("F2", cfg.x1, cfg.x2, 3)):
        v = _one_sided_sample(cfg, stream, start, force, key)
        if v is None:
            return {"discard": "no-exit"}
        out[name] = v
    return out


def run_reversibility_test(cfg: ExperimentConfig) -> SuiteReport:
    """Set-level observables of curves from x1 to x2 vs curves from x2 to x1."""
    t0 = time.perf_counter()
    if not cfg.kappa <= 4:
        raise ParameterError("the reversibility suite needs kappa in (0, 4]")
    if not cfg.ref_radius:
        raise ParameterError("the reversibility suite needs ref_radius")
    res = run_samples(partial(_guarded, _reversal_sample, cfg), cfg.n_samples, cfg.workers)
    kept, discards = _split(res, cfg, "reversibility")
    tests, samples = [], {}
    for k, f in enumerate(cfg.observable_fns):
        F = np.array([r["F"][k] for r in kept])
        R = np.array([r["R"][k] for r in kept])
        F2 = np.array([r["F2"][k] for r in kept])
        d, p = ks_two_sample(F, R)
        tests.append(TestResult(f"reversal_{f.name}", p, math.nan, d, cfg.alpha, p >= cfg.alpha,
                                len(kept), discards))
        d0, p0 = ks_two_sample(F, F2)
        tests.append(TestResult(f"null_{f.name}", p0, math.nan, d0, cfg.alpha, p0 >= cfg.alpha,
                                len(kept), discards))
        samples.update({f"F_{f.name}": F.tolist(), f"R_{f.name}": R.tolist()})
    return SuiteReport("reversibility", cfg.summary(), tests, len(res), discards,
                       time.perf_counter() - t0, samples)


SUITES = {
    "martingale": run_martingale_test,
    "mstar": run_mstar_test,
    "identities": run_identity_checks,
    "coupling": run_coupling_test,
    "reversibility": run_reversibility_test,
}
