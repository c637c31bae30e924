"""Vertical-slit maps, their compositions and half-plane capacity.

A hull grown by the chordal Loewner equation with piecewise-constant driving
is normalized by a finite composition of elementary maps

    g(z) = xi + sqrt((z - xi)**2 + 4*dt),

each of which removes the vertical slit ``[xi, xi + 2i*sqrt(dt)]`` and has
half-plane capacity ``2*dt``.  Everything in the package that needs a
normalizing map represents it as a :class:`MapComposition`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels as K
from .errors import BranchError, DomainError, ParameterError

#: relative proximity (scaled by 1 + |z|) under which a point counts as lying on a slit
SLIT_TOL = 1e-9


@dataclass(frozen=True)
class SlitStep:
    xi: float
    dt: float

    def __post_init__(self):
        if not np.isfinite(self.xi):
            raise ParameterError(f"slit driving point must be finite, got {self.xi}")
        if not self.dt > 0:
            raise ParameterError(f"slit duration must be positive, got {self.dt}")

    @property
    def height(self):
        return 2.0 * np.sqrt(self.dt)


class Jet3(NamedTuple):
    """Value and first three derivatives of a map at one point."""

    f: complex
    f1: complex
    f2: complex
    f3: complex

    def real(self):
        return Jet3(*(float(np.real(v)) for v in self))


def _as_readonly(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


class MapComposition:
    """``g_n o ... o g_1`` stored as parallel arrays of driving points and durations.

    Steps are applied first to last.  Instances are immutable; slicing and
    concatenation return new compositions that share no mutable state.
    """

    __slots__ = ("xis", "dts")

    def __init__(self, xis=(), dts=()):
        xis = _as_readonly(xis, float)
        dts = _as_readonly(dts, float)
        if xis.shape != dts.shape or xis.ndim != 1:
            raise ParameterError("xis and dts must be 1-D arrays of equal length")
        if dts.size and not np.all(dts > 0):
            raise ParameterError("all slit durations must be positive")
        if not np.all(np.isfinite(xis)):
            raise ParameterError("slit driving points must be finite")
        object.__setattr__(self, "xis", xis)
        object.__setattr__(self, "dts", dts)

    def __setattr__(self, name, value):
        raise AttributeError("MapComposition is immutable")

    @classmethod
    def from_steps(cls, steps: Sequence[SlitStep]):
        return cls([s.xi for s in steps], [s.dt for s in steps])

    @property
    def steps(self):
        return [SlitStep(float(x), float(d)) for x, d in zip(self.xis, self.dts)]

    def __len__(self):
        return self.xis.shape[0]

    def __repr__(self):
        return f"MapComposition(n={len(self)}, hcap={hcap(self):.6g})"

    def prefix(self, n):
        """The first ``n`` steps."""
        return MapComposition(self.xis[:n], self.dts[:n])

    def then(self, other: "MapComposition"):
        """Apply ``self`` first, then ``other``."""
        return MapComposition(
            np.concatenate([self.xis, other.xis]), np.concatenate([self.dts, other.dts])
        )

    def append(self, step: SlitStep):
        return MapComposition(np.append(self.xis, step.xi), np.append(self.dts, step.dt))


IDENTITY = MapComposition()


def apply_slit(step: SlitStep, z, tol=SLIT_TOL):
    """Image of ``z`` under one elementary slit map."""
    z = complex(z)
    if K.on_slit(step.xi, step.dt, z, tol):
        raise DomainError(f"{z} lies on the slit of {step}")
    return complex(K.forward(step.xi, step.dt, z))


def slit_jet(step: SlitStep, x, tol=SLIT_TOL):
    """(g, g', g'', g''') of one slit map at a point off the slit."""
    x = complex(x)
    if K.on_slit(step.xi, step.dt, x, tol):
        raise DomainError(f"{x} lies on the slit of {step}")
    xis = np.array([step.xi])
    dts = np.array([step.dt])
    jet = Jet3(*K.jet_complex(xis, dts, x, 1))
    return jet.real() if x.imag == 0 else jet


def _check(status, idx, where):
    if status == K.ON_SLIT:
        raise DomainError(f"point #{idx} entered a slit while {where}")
    if status == K.BELOW_AXIS:
        raise BranchError(f"point #{idx} is below the real line while {where}")


def compose_apply(comp: MapComposition, z, tol=SLIT_TOL):
    """Evaluate the composition at a point or an array of points."""
    scalar = np.ndim(z) == 0
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    out, status, idx = K.apply_many(comp.xis, comp.dts, zs, len(comp), tol)
    _check(status, idx, "applying a composition")
    return complex(out[0]) if scalar else out


def compose_jet(comp: MapComposition, x):
    """Jet of the composition at a real point (real Jet3) or a complex point."""
    if np.isrealobj(x) or complex(x).imag == 0:
        f, f1, f2, f3, status = K.jet_real(comp.xis, comp.dts, float(np.real(x)), len(comp))
        if status != K.OK:
            raise DomainError(f"{x} hits a slit base of the composition")
        return Jet3(f, f1, f2, f3)
    z = complex(x)
    _check(*K.apply_many(comp.xis, comp.dts, np.array([z]), len(comp), SLIT_TOL)[1:], "taking a jet")
    return Jet3(*(complex(v) for v in K.jet_complex(comp.xis, comp.dts, z, len(comp))))


def compose_jet_many(comp: MapComposition, xs):
    """Real jets at several real points; rows are (f, f1, f2, f3)."""
    out = K.jet_real_many(comp.xis, comp.dts, np.asarray(xs, dtype=float), len(comp))
    if np.isnan(out).any():
        raise DomainError("a real evaluation point hits a slit base")
    return out


def invert_apply(comp: MapComposition, w, tol=SLIT_TOL):
    """Right inverse of :func:`compose_apply` (last step undone first)."""
    scalar = np.ndim(w) == 0
    ws = np.atleast_1d(np.asarray(w, dtype=complex))
    out, status, idx = K.invert_many(comp.xis, comp.dts, ws, len(comp), tol)
    _check(status, idx, "inverting a composition")
    return complex(out[0]) if scalar else out


def hcap(comp: MapComposition):
    """Half-plane capacity: each step contributes twice its duration."""
    return 2.0 * float(np.sum(comp.dts))
