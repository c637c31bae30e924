"""Random driving functions: Brownian, Bessel, and SLE(kappa, kappa - 6) drivers.

Randomness comes from :class:`RngSpec`, which names a Philox counter-based
stream by ``(seed, stream, *key)`` through :class:`numpy.random.SeedSequence`.
The same spec always yields the same increments, whatever order samples are
drawn in and however many workers draw them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ParameterError
from .loewner import DrivingPath

SIDE_KEYS = {1: 1, 2: 2}


@dataclass(frozen=True)
class RngSpec:
    seed: int
    stream: int = 0
    zero_noise: bool = False

    def generator(self, *key):
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream, *key))
        return np.random.Generator(np.random.Philox(ss))

    def increments(self, n, dt, *key, oversample=1):
        """``n`` Brownian increments of variance ``dt``.

        With ``oversample = m`` the increments are sums of ``m`` finer ones, so
        a path on grid dt and one on grid dt/m drawn with ``oversample`` m and 1
        from the same spec share the same underlying Brownian motion.
        """
        if self.zero_noise:
            return np.zeros(n)
        z = self.generator(*key).standard_normal(n * oversample)
        return np.sqrt(dt / oversample) * z.reshape(n, oversample).sum(axis=1)


def _check_kappa(kappa):
    if not kappa > 0:
        raise ParameterError(f"kappa must be positive, got {kappa}")


def default_dt(x1, x2):
    return 1e-4 * (x2 - x1) ** 2


def default_floor(x1, x2):
    return 1e-3 * abs(x2 - x1)


@njit(cache=True)
def _bessel_recursion(kappa, y0, dt, dB, sign, floor):
    n = dB.shape[0]
    y = np.empty(n + 1)
    y[0] = y0
    sk = np.sqrt(kappa)
    for i in range(n):
        nxt = y[i] + sign * sk * dB[i] + (kappa - 4.0) / y[i] * dt
        if not nxt > floor:
            return y[: i + 1], i
        y[i + 1] = nxt
    return y, -1


@njit(cache=True)
def _force_point_recursion(kappa, start, force, dt, dB, sign, floor):
    # sign = (-1)^j of the side; Y tracks sign * (xi - p)
    n = dB.shape[0]
    xi = np.empty(n + 1)
    p = np.empty(n + 1)
    y = np.empty(n + 1)
    xi[0] = start
    p[0] = force
    y[0] = sign * (start - force)
    sk = np.sqrt(kappa)
    for i in range(n):
        d = xi[i] - p[i]
        xi_n = xi[i] + sk * dB[i] + (kappa - 6.0) / d * dt
        p_n = p[i] + 2.0 * dt / (p[i] - xi[i])
        y_n = y[i] + sign * sk * dB[i] + (kappa - 4.0) / y[i] * dt
        if not y_n > floor:
            return xi[: i + 1], p[: i + 1], y[: i + 1], i
        xi[i + 1] = xi_n
        p[i + 1] = p_n
        y[i + 1] = y_n
    return xi, p, y, -1


def sample_bessel(kappa, y0, dt, n, rng: RngSpec, floor_guard=None, increments=None, key=(0,)):
    """Euler-Maruyama path of ``dY = sqrt(kappa) dB + (kappa - 4)/Y dt``.

    ``Y/sqrt(kappa)`` is a Bessel process of dimension ``3 - 8/kappa``.
    Returns ``(Y, stopped_index)`` where ``stopped_index`` is the grid index at
    which the next step would have crossed ``floor_guard`` (``None`` if never).
    """
    _check_kappa(kappa)
    if not y0 > 0 or not dt > 0:
        raise ParameterError("need y0 > 0 and dt > 0")
    floor = 1e-3 * y0 if floor_guard is None else floor_guard
    dB = rng.increments(n, dt, *key) if increments is None else np.asarray(increments, float)
    y, stop = _bessel_recursion(float(kappa), float(y0), float(dt), dB, 1.0, float(floor))
    return y, (None if stop < 0 else int(stop))


@dataclass(frozen=True, eq=False)
class SideDriver:
    """One chain of the coupled system: driving path, force point track, Bessel track."""

    xi: DrivingPath
    p: np.ndarray
    Y: np.ndarray
    stopped: bool

    @property
    def n_steps(self):
        return self.xi.n_steps


@dataclass(frozen=True, eq=False)
class PairDriver:
    kappa: float
    x1: float
    x2: float
    dt: float
    side1: SideDriver
    side2: SideDriver

    def side(self, j):
        return self.side1 if j == 1 else self.side2


def _side(kappa, start, force, dt, dB, sign, floor):
    xi, p, y, stop = _force_point_recursion(
        float(kappa), float(start), float(force), float(dt), dB, float(sign), float(floor)
    )
    return SideDriver(DrivingPath.uniform(xi, dt), p, y, stop >= 0)


def build_pair_driver(kappa, x1, x2, dt, n, rng: RngSpec, floor_guard=None, oversample=1):
    """Both chains of the two-sided system from independent Brownian streams.

    Side j starts at ``x_j`` with force point ``x_k``; each side is cut at the
    first step where its Bessel track would fall below ``floor_guard``.
    """
    _check_kappa(kappa)
    if not x1 < x2:
        raise ParameterError("need x1 < x2")
    if not dt > 0:
        raise ParameterError("need dt > 0")
    floor = default_floor(x1, x2) if floor_guard is None else floor_guard
    s1 = _side(kappa, x1, x2, dt, rng.increments(n, dt, SIDE_KEYS[1], oversample=oversample), -1, floor)
    s2 = _side(kappa, x2, x1, dt, rng.increments(n, dt, SIDE_KEYS[2], oversample=oversample), 1, floor)
    return PairDriver(float(kappa), float(x1), float(x2), float(dt), s1, s2)


def sle_kr_driver(kappa, start, force, dt, n, rng: RngSpec, floor_guard=None, side=1,
                  increments=None, oversample=1):
    """SLE(kappa, kappa - 6) driver from ``start`` with force point ``force``.

    Uses the Brownian stream of ``side`` in ``rng`` unless explicit
    ``increments`` are supplied.  Returns a :class:`SideDriver`.
    """
    _check_kappa(kappa)
    if start == force:
        raise ParameterError("start and force point must differ")
    floor = default_floor(start, force) if floor_guard is None else floor_guard
    if increments is None:
        dB = rng.increments(n, dt, SIDE_KEYS[side], oversample=oversample)
    else:
        dB = np.asarray(increments, dtype=float)
    sign = -1.0 if start < force else 1.0
    return _side(kappa, start, force, dt, dB, sign, floor)


def standard_sle_driver(kappa, dt, n, rng: RngSpec, oversample=1):
    """``sqrt(kappa) * B`` on a uniform grid, started at 0."""
    _check_kappa(kappa)
    dB = rng.increments(n, dt, 0, oversample=oversample)
    return DrivingPath.uniform(np.concatenate([[0.0], np.cumsum(np.sqrt(kappa) * dB)]), dt)
