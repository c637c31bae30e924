"""The spliced martingale M* built from a family of stopping rectangles.

Given exit-time rectangles ``[0, T1^m] x [0, T2^m]`` for m = 1..n, only the
maximal ones matter.  Sorting those by ``T1`` (so ``T2`` descends) gives a
staircase; M* equals M inside the staircase and is continued outside it by a
telescoping product of M at staircase corners.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


from .ensemble import EnsemblePair, compute_M
from .errors import EvaluatorDomainError, ParameterError, TieError

#: two exit times closer than this are treated as equal
TIE_TOL = 1e-12

INF = math.inf


@dataclass(frozen=True)
class SpliceIndex:
    """Maximal rectangles of an exit-time family and their staircase order.

    ``S`` and ``sigma`` hold 1-based rectangle indices.  ``T1``/``T2`` are the
    staircase coordinates with sentinels: ``T1[0] = 0``, ``T1[-1] = inf``,
    ``T2[0] = inf``, ``T2[-1] = 0``.
    """

    n: int
    exits: tuple
    S: tuple
    sigma: tuple
    T1: tuple
    T2: tuple

    @property
    def size(self):
        return len(self.sigma)

    @property
    def t1_max(self):
        return max(e[0] for e in self.exits)

    @property
    def t2_max(self):
        return max(e[1] for e in self.exits)

    def contains(self, t1, t2, tol=TIE_TOL):
        """Whether (t1, t2) lies in the union of the rectangles (axes included)."""
        if t1 == 0 or t2 == 0:
            return True
        return any(t1 <= a * (1 + tol) + tol and t2 <= b * (1 + tol) + tol
                   for a, b in (self.exits[m - 1] for m in self.S))


def _le(a, b):
    return a <= b + TIE_TOL


def select_S(exits) -> SpliceIndex:
    """Keep the rectangles not dominated by any other one.

    A rectangle is dropped when another one contains it; of several equal
    maximal rectangles the smallest index survives, which makes the index sum
    minimal.  The survivors are ordered by ``T1``.
    """
    ex = [(float(a), float(b)) for a, b in exits]
    if not ex:
        raise ParameterError("need at least one exit-time rectangle")
    for a, b in ex:
        if not (0 < a < INF and 0 < b < INF):
            raise ParameterError(f"exit times must be finite and positive, got {(a, b)}")
    keep = []
    for m, (a, b) in enumerate(ex):
        dominated = False
        for k, (c, d) in enumerate(ex):
            if k == m or not (_le(a, c) and _le(b, d)):
                continue
            same = _le(c, a) and _le(d, b)
            if not same or k < m:
                dominated = True
                break
        if not dominated:
            keep.append(m + 1)
    order = sorted(keep, key=lambda m: ex[m - 1][0])
    for p, q in zip(order, order[1:]):
        (a, b), (c, d) = ex[p - 1], ex[q - 1]
        if abs(a - c) <= TIE_TOL or abs(b - d) <= TIE_TOL:
            raise TieError(f"maximal rectangles {p} and {q} share a coordinate")
        if not (a < c and b > d):
            raise TieError(f"rectangles {p} and {q} do not form a staircase")
    T1 = (0.0, *(ex[m - 1][0] for m in order), INF)
    T2 = (INF, *(ex[m - 1][1] for m in order), 0.0)
    return SpliceIndex(len(ex), tuple(ex), tuple(sorted(keep)), tuple(order), T1, T2)


class MEvaluator:
    """M(t1, t2) on the union of rectangles, from cached grid values.

    Times are mapped to grid indices of the pair; off-grid arguments are
    interpolated bilinearly between the four surrounding nodes.  On the axes
    the value is exactly 1.
    """

    def __init__(self, pair: EnsemblePair, index: SpliceIndex | None = None, n_sub=20):
        self.pair = pair
        self.index = index
        self.n_sub = n_sub
        self.dt1 = float(pair.path1.times[1]) if pair.n(1) else 1.0
        self.dt2 = float(pair.path2.times[1]) if pair.n(2) else 1.0
        self._cache = {}

    def node(self, i1, i2):
        if i1 == 0 or i2 == 0:
            return 1.0
        key = (i1, i2)
        if key not in self._cache:
            if i1 > self.pair.n(1) or i2 > self.pair.n(2):
                raise EvaluatorDomainError(f"grid node {key} is beyond the simulated chains")
            self._cache[key] = compute_M(self.pair, i1, i2, self.n_sub).M
        return self._cache[key]

    @staticmethod
    def _split(t, dt):
        x = t / dt
        r = round(x)
        if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
            return int(r), int(r), 0.0
        lo = math.floor(x)
        return lo, lo + 1, x - lo

    def __call__(self, t1, t2):
        if t1 == 0 or t2 == 0:
            return 1.0
        if not (math.isfinite(t1) and math.isfinite(t2)) or t1 < 0 or t2 < 0:
            raise EvaluatorDomainError(f"M requested at ({t1}, {t2})")
        if self.index is not None and not self.index.contains(t1, t2):
            raise EvaluatorDomainError(f"({t1}, {t2}) is outside the admissible region")
        a0, a1, u = self._split(t1, self.dt1)
        b0, b1, v = self._split(t2, self.dt2)
        if u == 0 and v == 0:
            return self.node(a0, b0)
        return ((1 - u) * (1 - v) * self.node(a0, b0) + u * (1 - v) * self.node(a1, b0)
                + (1 - u) * v * self.node(a0, b1) + u * v * self.node(a1, b1))

    def snap(self, t1, t2):
        """Nearest grid node at or below (t1, t2)."""
        return (math.floor(t1 / self.dt1 + 1e-9) * self.dt1,
                math.floor(t2 / self.dt2 + 1e-9) * self.dt2)

    def observed_range(self):
        vals = list(self._cache.values()) or [1.0]
        return min(min(vals), 1.0), max(max(vals), 1.0)


def locate(t1, t2, idx: SpliceIndex):
    """Cell indices (k1, k2) with T1[k1-1] <= t1 <= T1[k1] and T2[k2+1] <= t2 <= T2[k2].

    On a cell boundary the smallest admissible k1 and the largest admissible
    k2 are returned.
    """
    s = idx.size
    k1 = next(k for k in range(1, s + 2) if idx.T1[k - 1] <= t1 <= idx.T1[k])
    k2 = next(k for k in range(s, -1, -1) if idx.T2[k + 1] <= t2 <= idx.T2[k])
    return k1, k2


def mstar_eval(t1, t2, idx: SpliceIndex, M, k1=None, k2=None):
    """M*(t1, t2); ``k1``/``k2`` may force a particular admissible cell."""
    if t1 < 0 or t2 < 0:
        raise ParameterError("times must be non-negative")
    if t1 == 0 or t2 == 0:
        return 1.0
    T1, T2 = idx.T1, idx.T2
    d1, d2 = locate(t1, t2, idx)
    k1 = d1 if k1 is None else k1
    k2 = d2 if k2 is None else k2
    if not T1[k1 - 1] <= t1 <= T1[k1]:
        raise ParameterError(f"k1 = {k1} is not admissible for t1 = {t1}")
    if not T2[k2 + 1] <= t2 <= T2[k2]:
        raise ParameterError(f"k2 = {k2} is not admissible for t2 = {t2}")

    def m(a, b):
        return 1.0 if a == 0 or b == 0 else M(a, b)

    if k1 <= k2:
        return m(t1, t2)
    num = m(T1[k2], t2) * m(t1, T2[k1])
    for k in range(k2 + 1, k1):
        num *= m(T1[k], T2[k])
    den = 1.0
    for k in range(k2, k1):
        den *= m(T1[k], T2[k + 1])
    return num / den


def structural_checks(idx: SpliceIndex, M, probes=(0.5, 1.0), snap=None):
    """Boundary, rectangle agreement, cell consistency and saturation on one sample.

    ``snap`` maps probe points to evaluation nodes (e.g. :meth:`MEvaluator.snap`).
    Returns a dict of worst-case deviations (all should be ~0).
    """
    snap = snap or (lambda a, b: (a, b))
    out = {"boundary": 0.0, "rectangle": 0.0, "cell": 0.0, "saturation": 0.0}
    for t in (*idx.T1[1:-1], *idx.T2[1:-1], INF):
        out["boundary"] = max(out["boundary"], abs(mstar_eval(t, 0.0, idx, M) - 1.0),
                              abs(mstar_eval(0.0, t, idx, M) - 1.0))
    for a, b in idx.exits:
        for f in probes:
            t1, t2 = snap(f * a, f * b)
            if t1 == 0 or t2 == 0:
                continue
            ref = M(t1, t2)
            out["rectangle"] = max(out["rectangle"], abs(mstar_eval(t1, t2, idx, M) - ref) / ref)
    s = idx.size
    for k in range(1, s + 1):
        t1 = idx.T1[k]
        for t2 in (*idx.T2[1:-1], snap(0.0, 0.5 * idx.T2[s])[1]):
            if t2 == 0:
                continue
            k2 = locate(t1, t2, idx)[1]
            va = mstar_eval(t1, t2, idx, M, k1=k, k2=k2)
            vb = mstar_eval(t1, t2, idx, M, k1=k + 1, k2=k2)
            out["cell"] = max(out["cell"], abs(va - vb) / abs(va))
    top = mstar_eval(INF, INF, idx, M)
    for t1, t2 in ((idx.t1_max, idx.t2_max), (INF, idx.t2_max), (idx.t1_max, INF),
                   (2 * idx.t1_max, 3 * idx.t2_max)):
        out["saturation"] = max(out["saturation"], abs(mstar_eval(t1, t2, idx, M) - top) / top)
    return out
