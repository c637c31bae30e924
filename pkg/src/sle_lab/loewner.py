"""Forward Loewner evolution, traces, the zipper, hulls and exit times."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import _kernels as K
from .conformal_maps import SLIT_TOL, MapComposition
from .errors import ParameterError, ZipperError


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DrivingPath:
    """Driving function sampled on a grid, constant on ``[times[i], times[i+1])``."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = _frozen(self.times, float)
        values = _frozen(self.values, float)
        if times.ndim != 1 or times.shape != values.shape or times.size == 0:
            raise ParameterError("times and values must be equal-length 1-D arrays")
        if times[0] != 0.0:
            raise ParameterError("driving paths start at time 0")
        if np.any(np.diff(times) <= 0):
            raise ParameterError("time grid must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ParameterError("driving values must be finite")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def uniform(cls, values, dt):
        values = np.asarray(values, dtype=float)
        return cls(dt * np.arange(values.size), values)

    def __len__(self):
        return self.times.size

    @property
    def n_steps(self):
        return self.times.size - 1

    def truncate(self, index):
        """Path restricted to grid points ``0..index``."""
        return DrivingPath(self.times[: index + 1], self.values[: index + 1])


@dataclass(frozen=True, eq=False)
class Trace:
    times: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", _frozen(self.times, float))
        object.__setattr__(self, "points", _frozen(self.points, complex))
        if self.times.shape != self.points.shape:
            raise ParameterError("trace times and points must have equal length")

    def __len__(self):
        return self.points.size

    def truncate(self, index):
        return Trace(self.times[: index + 1], self.points[: index + 1])


# --------------------------------------------------------------------------- hulls


@dataclass(frozen=True)
class HalfDisk:
    center: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ParameterError(f"half-disk radius must be positive, got {self.radius}")

    @property
    def base(self):
        return self.center

    @property
    def footprint(self):
        return self.center - self.radius, self.center + self.radius

    def contains(self, z):
        z = np.asarray(z)
        return (np.abs(z - self.center) < self.radius) & (z.imag >= 0)

    def exit_fraction(self, a, b):
        """Parameter s in (0, 1] where the segment a -> b first meets the arc."""
        d = b - a
        p = a - self.center
        qa = (d * np.conj(d)).real
        qb = 2 * (p * np.conj(d)).real
        qc = (p * np.conj(p)).real - self.radius**2
        disc = max(qb * qb - 4 * qa * qc, 0.0)
        s = (-qb + np.sqrt(disc)) / (2 * qa)
        return float(min(max(s, 0.0), 1.0))

    def as_polygon(self, n=256):
        th = np.linspace(0, np.pi, n)
        return [(self.center + self.radius * np.cos(t), self.radius * np.sin(t)) for t in th]


@dataclass(frozen=True)
class Polygon:
    """Simple polygon attached to the real line, vertices as (x, y) pairs."""

    vertices: tuple

    def __post_init__(self):
        v = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(v) < 3:
            raise ParameterError("a polygon needs at least three vertices")
        if any(y < 0 for _, y in v):
            raise ParameterError("polygon hulls must lie in the closed upper half-plane")
        if sum(1 for _, y in v if y == 0) < 2:
            raise ParameterError("polygon hulls must have an edge on the real line")
        object.__setattr__(self, "vertices", v)

    @property
    def _xy(self):
        return np.array(self.vertices)

    @property
    def footprint(self):
        xs = [x for x, y in self.vertices if y == 0]
        return min(xs), max(xs)

    @property
    def base(self):
        lo, hi = self.footprint
        return 0.5 * (lo + hi)

    def contains(self, z):
        """Even-odd rule; points on the real footprint count as inside."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        x, y = z.real, z.imag
        v = self._xy
        inside = np.zeros(z.shape, dtype=bool)
        n = len(v)
        for i in range(n):
            x1, y1 = v[i]
            x2, y2 = v[(i + 1) % n]
            if y1 == y2:
                continue
            crosses = (y1 > y) != (y2 > y)
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (x < xc)
        lo, hi = self.footprint
        on_base = (y == 0) & (x > lo) & (x < hi)
        return inside | on_base

    def exit_fraction(self, a, b):
        d = b - a
        best = 1.0
        v = self._xy
        n = len(v)
        for i in range(n):
            p = complex(*v[i])
            e = complex(*v[(i + 1) % n]) - p
            den = (d.real * e.imag - d.imag * e.real)
            if den == 0:
                continue
            w = p - a
            s = (w.real * e.imag - w.imag * e.real) / den
            u = (w.real * d.imag - w.imag * d.real) / den
            if 0 <= s <= 1 and 0 <= u <= 1 and s > 1e-15:
                best = min(best, s)
        return float(best)

    def as_polygon(self, n=None):
        return list(self.vertices)


HullSpec = Union[HalfDisk, Polygon]


def _shapely(hull):
    from shapely.geometry import Polygon as ShPolygon

    return ShPolygon(hull.as_polygon())


def hull_distance(h1: HullSpec, h2: HullSpec):
    """Euclidean distance between the closures of two hulls."""
    if isinstance(h1, HalfDisk) and isinstance(h2, HalfDisk):
        return abs(h2.center - h1.center) - h1.radius - h2.radius
    return float(_shapely(h1).distance(_shapely(h2)))


def validate_hull_pair(h1: HullSpec, h2: HullSpec, x1, x2, sep_min=None):
    """Raise unless h1 holds x1, h2 holds x2, and their closures are ``sep_min`` apart."""
    if sep_min is None:
        sep_min = 0.05 * abs(x2 - x1)
    for h, x in ((h1, x1), (h2, x2)):
        lo, hi = h.footprint
        if not lo < x < hi:
            raise ParameterError(f"hull {h} does not contain a neighborhood of {x}")
    if not h1.footprint[1] < h2.footprint[0]:
        raise ParameterError("hull 1 must lie to the left of hull 2")
    d = hull_distance(h1, h2)
    if d < sep_min:
        raise ParameterError(f"hulls are {d:.3g} apart, need at least {sep_min:.3g}")
    return d


@dataclass
class ExitTimeTable:
    """Exit times T_j^m per hull pair m and side j, with exited flags."""

    times: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    indices: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))
    exited: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=bool))

    @classmethod
    def from_traces(cls, trace1, trace2, hull_pairs):
        rows = [(exit_time(trace1, h1), exit_time(trace2, h2)) for h1, h2 in hull_pairs]
        return cls(
            times=np.array([[a[0], b[0]] for a, b in rows], dtype=float).reshape(-1, 2),
            indices=np.array([[a[1], b[1]] for a, b in rows], dtype=int).reshape(-1, 2),
            exited=np.array([[a[2], b[2]] for a, b in rows], dtype=bool).reshape(-1, 2),
        )

    def __len__(self):
        return self.times.shape[0]


# --------------------------------------------------------------------- operations


def evolve(path: DrivingPath) -> MapComposition:
    """Loewner map at the final time: one slit per grid interval."""
    return MapComposition(path.values[:-1], np.diff(path.times))


def trace(path: DrivingPath) -> Trace:
    """Tip of the hull at every grid time.

    Point k is the preimage, under the first k slit maps, of the driving value
    active on the last of them, i.e. the tip of the most recent slit.
    """
    comp = evolve(path)
    pts = K.trace_points(comp.xis, comp.dts)
    if path.n_steps == 0:
        pts = np.array([path.values[0] + 0j])
    return Trace(path.times, pts)


def extract_driving(points, tol=SLIT_TOL):
    """Zipper: recover (DrivingPath, MapComposition) from a sampled simple curve.

    Each new point is pushed through the maps found so far and its image ``w``
    is removed by a vertical slit at ``Re w`` of duration ``Im(w)**2 / 4``.
    """
    pts = np.asarray(points, dtype=complex)
    if pts.size == 0:
        raise ParameterError("need at least one curve point")
    if pts[0].imag != 0:
        raise ParameterError("the curve must start on the real line")
    xis, dts, bad = K.zip_curve(pts, tol)
    if bad >= 0:
        raise ZipperError(f"curve point #{bad} maps to the real line or onto a slit")
    comp = MapComposition(xis, dts)
    times = np.concatenate([[0.0], np.cumsum(dts)])
    values = np.concatenate([xis, xis[-1:]]) if xis.size else np.array([pts[0].real])
    return DrivingPath(times, values), comp


def exit_time(tr: Trace, hull: HullSpec):
    """First time the trace leaves the hull, refined linearly between samples.

    Returns (T, index of the first sample outside, exited). If the trace never
    leaves, returns (final time, last index, False).
    """
    pts = tr.points
    inside = hull.contains(pts)
    inside[0] = True
    out = np.flatnonzero(~inside)
    if out.size == 0:
        return float(tr.times[-1]), len(tr) - 1, False
    i = int(out[0])
    s = hull.exit_fraction(complex(pts[i - 1]), complex(pts[i]))
    t = tr.times[i - 1] + s * (tr.times[i] - tr.times[i - 1])
    return float(t), i, True


def exit_point(tr: Trace, hull: HullSpec):
    """The refined point where the trace meets the hull boundary (or its last point)."""
    T, i, exited = exit_time(tr, hull)
    if not exited:
        return complex(tr.points[-1])
    a, b = complex(tr.points[i - 1]), complex(tr.points[i])
    return a + hull.exit_fraction(a, b) * (b - a)
