"""Two chains growing in the same half-plane and the two-parameter martingale M.

Grid conventions.  Chain j is described by its slit composition and its
trace on a uniform grid.  At grid index ``i`` the hull is the union of the
first ``i`` slits and the driving point paired with it is the image of the
tip, i.e. ``values[i - 1]`` (``values[0]`` at ``i = 0``).  Every quantity
below, A-values included, is evaluated with that pairing.

The remainder map for side j at ``(i_j, i_k)`` normalizes the image of hull k
under the Loewner map of chain j.  It is computed by pushing trace k through
chain j and zipping the image curve; its jets at the tip image of chain j are
the A-values.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .conformal_maps import MapComposition, compose_apply, compose_jet
from .errors import InvariantError, ParameterError
from .loewner import DrivingPath, Trace, evolve, extract_driving, trace
from .sde_drivers import PairDriver


class QuadratureWarning(UserWarning):
    """Successive quadrature refinements disagree by more than 1%."""


def alpha(kappa):
    return (6.0 - kappa) / (2.0 * kappa)


def lam(kappa):
    return (8.0 - 3.0 * kappa) * (6.0 - kappa) / (2.0 * kappa)


@dataclass(eq=False)
class EnsemblePair:
    """Two chains on matching grids, plus a memo of remainder maps.

    The chains themselves are never modified after construction; the memo only
    caches pure functions of them.
    """

    kappa: float
    x1: float
    x2: float
    path1: DrivingPath
    path2: DrivingPath
    comp1: MapComposition
    comp2: MapComposition
    trace1: Trace
    trace2: Trace
    eps_E: float = None
    _memo: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.trace1.points[0].real == self.x1 < self.x2 == self.trace2.points[0].real:
            raise ParameterError("traces must start at x1 < x2")
        if self.eps_E is None:
            self.eps_E = 1e-3 * (self.x2 - self.x1)

    @classmethod
    def from_paths(cls, kappa, path1, path2, n1=None, n2=None, **kw):
        """Build from two driving paths, optionally truncated at grid indices."""
        if n1 is not None:
            path1 = path1.truncate(n1)
        if n2 is not None:
            path2 = path2.truncate(n2)
        return cls(
            float(kappa), float(path1.values[0]), float(path2.values[0]),
            path1, path2, evolve(path1), evolve(path2), trace(path1), trace(path2), **kw,
        )

    @classmethod
    def from_driver(cls, driver: PairDriver, n1=None, n2=None, **kw):
        return cls.from_paths(driver.kappa, driver.side1.xi, driver.side2.xi, n1, n2, **kw)

    def comp(self, j):
        return self.comp1 if j == 1 else self.comp2

    def trace_of(self, j):
        return self.trace1 if j == 1 else self.trace2

    def path(self, j):
        return self.path1 if j == 1 else self.path2

    def n(self, j):
        return len(self.comp(j))

    def time(self, j, i):
        return float(self.path(j).times[i])

    def tip_value(self, j, i):
        """Driving point paired with the hull after ``i`` steps."""
        return float(self.path(j).values[max(i - 1, 0)])

    def start(self, j):
        return self.x1 if j == 1 else self.x2

    def disjoint(self, i1, i2, threshold=None):
        """Distance-threshold check that the two traces have not met."""
        a = self.trace1.points[: i1 + 1]
        b = self.trace2.points[: i2 + 1]
        threshold = 1e-3 * (self.x2 - self.x1) if threshold is None else threshold
        d = np.abs(a[:, None] - b[None, :]).min()
        return bool(d > threshold)


@dataclass(frozen=True)
class AValues:
    """``a1[h]`` = A_{1,h}, ``a2[h]`` = A_{2,h} for h = 0..3."""

    a1: tuple
    a2: tuple

    def side(self, j):
        return self.a1 if j == 1 else self.a2

    @property
    def E(self):
        return self.a2[0] - self.a1[0]

    def as_row(self):
        return [*self.a1, *self.a2]


@dataclass(frozen=True)
class MartingaleRecord:
    t1: float
    t2: float
    A: AValues
    E: float
    N: float
    I: float
    M: float
    alpha: float
    lam: float
    valid: bool = True

    CSV_HEADER = ("t1", "t2", "A10", "A11", "A12", "A13", "A20", "A21", "A22", "A23",
                  "E", "N", "I", "M", "valid")

    def as_row(self):
        return [self.t1, self.t2, *self.A.as_row(), self.E, self.N, self.I, self.M, int(self.valid)]


@dataclass(frozen=True)
class TimeChangedChain:
    """Chain j seen through the Loewner map of chain k at a frozen time.

    ``v[i]`` is half the capacity of the image of the first ``i`` steps of
    chain j; ``eta[i]`` is the driving value of the image chain at capacity
    time ``v[i]``.
    """

    v: np.ndarray
    eta: np.ndarray
    comp: MapComposition


# ---------------------------------------------------------------- remainder maps


def _image_curve(pair: EnsemblePair, j, i_j, i_k):
    k = 3 - j
    pts = pair.trace_of(k).points[: i_k + 1]
    img = compose_apply(pair.comp(j).prefix(i_j), pts)
    img[0] = img[0].real
    return img


def remainder_map(pair: EnsemblePair, j, i_j, i_k) -> MapComposition:
    """Normalizing map of the image of hull k (up to ``i_k``) under chain j (up to ``i_j``)."""
    key = ("R", j, i_j, i_k)
    memo = pair._memo
    if key not in memo:
        if i_k == 0:
            memo[key] = MapComposition()
        else:
            memo[key] = extract_driving(_image_curve(pair, j, i_j, i_k))[1]
    return memo[key]


def time_changed_chain(pair: EnsemblePair, j, i_j, i_k) -> TimeChangedChain:
    """Image of chain j (up to ``i_j``) under chain k frozen at ``i_k``, zipped."""
    k = 3 - j
    comp = remainder_map(pair, k, i_k, i_j)
    if i_j == 0:
        x = compose_apply(pair.comp(k).prefix(i_k), pair.start(j)).real
        return TimeChangedChain(np.zeros(1), np.array([x]), comp)
    recovered, comp = extract_driving(_image_curve(pair, k, i_k, i_j))
    return TimeChangedChain(recovered.times, recovered.values, comp)


def commutation_residual(pair: EnsemblePair, i1, i2, zs):
    """max |phi_{2,t1}(t2, phi_1(t1, z)) - phi_{1,t2}(t1, phi_2(t2, z))| over ``zs``."""
    zs = np.asarray(zs, dtype=complex)
    via1 = compose_apply(remainder_map(pair, 1, i1, i2), compose_apply(pair.comp1.prefix(i1), zs))
    via2 = compose_apply(remainder_map(pair, 2, i2, i1), compose_apply(pair.comp2.prefix(i2), zs))
    return float(np.max(np.abs(via1 - via2)))


# ------------------------------------------------------------------ A, N, I, M


def _jet(comp, x):
    return tuple(float(v) for v in compose_jet(comp, x))


def compute_A(pair: EnsemblePair, i1, i2, check=True) -> AValues:
    key = ("A", i1, i2)
    memo = pair._memo
    if key in memo:
        return memo[key]
    a1 = _jet(remainder_map(pair, 1, i1, i2), pair.tip_value(1, i1))
    a2 = _jet(remainder_map(pair, 2, i2, i1), pair.tip_value(2, i2))
    A = AValues(a1, a2)
    if check:
        if not a1[0] < a2[0]:
            raise InvariantError(f"A10 = {a1[0]} is not left of A20 = {a2[0]} at ({i1}, {i2})")
        if not (a1[1] > 0 and a2[1] > 0):
            raise InvariantError(f"non-positive A_(j,1) at ({i1}, {i2}): {a1[1]}, {a2[1]}")
    memo[key] = A
    return A


def compute_N(A: AValues):
    return A.a1[1] * A.a2[1] / A.E**2


def N_axis(pair: EnsemblePair, j, i_j):
    """N with the other chain at time 0: phi_j'(x_k) / (p_j - xi_j)**2."""
    k = 3 - j
    f, f1, _, _ = compose_jet(pair.comp(j).prefix(i_j), pair.start(k))
    return f1 / (f - pair.tip_value(j, i_j)) ** 2


def _F(pair, s1, i2):
    """1/4 (C2/C1)^2 - 1/6 C3/C1 at grid point (s1, i2), C_h = A_{1,h}."""
    if i2 == 0:
        return 0.0
    _, c1, c2, c3 = compute_A(pair, s1, i2, check=False).a1
    return 0.25 * (c2 / c1) ** 2 - c3 / (6.0 * c1)


def _nodes(i, n_sub):
    if i == 0:
        return np.zeros(1, dtype=int)
    return np.unique(np.round(np.linspace(0, i, min(n_sub, i) + 1)).astype(int))


def integral_I(pair: EnsemblePair, i1, i2, n_sub=20, warn=True):
    """Double integral of 2 N^2 over [0, t1] x [0, t2], via the closed form in t2.

    The inner integral equals ``1/4 (C2/C1)^2 - 1/6 C3/C1`` at ``(s1, t2)``; the
    outer one is a trapezoid over ``n_sub`` intervals of ``[0, t1]``.
    """
    if i1 == 0 or i2 == 0:
        return 0.0
    nodes = _nodes(i1, n_sub)
    t = pair.path1.times[nodes]
    f = np.array([_F(pair, s, i2) for s in nodes])
    fine = float(np.trapezoid(f, t))
    if warn and nodes.size >= 5:
        coarse = float(np.trapezoid(f[::2], t[::2])) if (nodes.size - 1) % 2 == 0 else fine
        if abs(fine - coarse) > 0.01 * abs(fine) + 1e-14:
            warnings.warn(
                f"integral term changes by {abs(fine - coarse):.3g} on refinement at ({i1}, {i2})",
                QuadratureWarning, stacklevel=2)
    return fine


def integral_I_2d(pair: EnsemblePair, i1, i2, m=20):
    """Brute-force 2-D trapezoid of 2 N(s1, s2)^2 on an m x m node grid."""
    if i1 == 0 or i2 == 0:
        return 0.0
    n1 = _nodes(i1, m)
    n2 = _nodes(i2, m)
    vals = np.array([[2.0 * compute_N(compute_A(pair, a, b, check=False)) ** 2 for b in n2] for a in n1])
    inner = np.trapezoid(vals, pair.path2.times[n2], axis=1)
    return float(np.trapezoid(inner, pair.path1.times[n1]))


def compute_M(pair: EnsemblePair, i1, i2, n_sub=20, warn=False) -> MartingaleRecord:
    key = ("M", i1, i2, n_sub)
    memo = pair._memo
    if key in memo:
        return memo[key]
    kappa = pair.kappa
    a, l = alpha(kappa), lam(kappa)
    A = compute_A(pair, i1, i2)
    N = compute_N(A)
    N00 = 1.0 / (pair.x2 - pair.x1) ** 2
    ratio = N * N00 / (N_axis(pair, 1, i1) * N_axis(pair, 2, i2))
    I = 0.0 if l == 0 else integral_I(pair, i1, i2, n_sub, warn=warn)
    M = ratio**a * np.exp(-l * I)
    valid = bool(A.E >= pair.eps_E and np.isfinite(M) and M > 0)
    rec = MartingaleRecord(pair.time(1, i1), pair.time(2, i2), A, A.E, N, I, float(M), a, l, valid)
    memo[key] = rec
    return rec


# -------------------------------------------------- time derivative


def time_derivative_check(pair: EnsemblePair, i1, i2, delta_t, j=1):
    """Finite-difference check of the time derivative of the remainder map.

    Chain j is advanced by one slit of duration ``delta_t`` at its current tip
    value while the evaluation point ``w`` stays at that value.  Returns the
    relative residuals of (value derivative vs ``-3 A_{j,2}``) and (log-derivative
    of the slope vs ``1/2 (A2/A1)^2 - 4/3 A3/A1``).
    """
    k = 3 - j
    i_j, i_k = (i1, i2) if j == 1 else (i2, i1)
    w = pair.tip_value(j, i_j)
    a0, a1, a2, a3 = compute_A(pair, i1, i2).side(j)
    if i_k == 0:
        return 0.0, 0.0
    chain = pair.comp(j).prefix(i_j)
    chain = MapComposition(np.append(chain.xis, w), np.append(chain.dts, delta_t))
    pts = pair.trace_of(k).points[: i_k + 1]
    img = compose_apply(chain, pts)
    img[0] = img[0].real
    later = extract_driving(img)[1]
    b0, b1, _, _ = compose_jet(later, w)
    value_lhs = (b0 - a0) / delta_t
    value_rhs = -3.0 * a2
    slope_lhs = (b1 - a1) / (delta_t * a1)
    slope_rhs = 0.5 * (a2 / a1) ** 2 - (4.0 / 3.0) * a3 / a1
    return _rel(value_lhs, value_rhs), _rel(slope_lhs, slope_rhs)


def _rel(x, ref):
    if ref == 0:
        return abs(x)
    return abs(x - ref) / abs(ref)
