"""Compiled inner loops for vertical-slit maps.

Every routine works on the two parallel arrays ``xis``/``dts`` describing a
composition of elementary maps ``g(z) = xi + sqrt((z - xi)**2 + 4 dt)``.
Errors are reported through integer status codes so the loops stay in
nopython mode; the Python wrappers in :mod:`sle_lab.conformal_maps` turn them
into exceptions.
"""

import numpy as np
from numba import njit

OK = 0
ON_SLIT = 1
BELOW_AXIS = 2


@njit(cache=True, inline="always")
def _fix_branch(s, u):
    # pick the root in the closed upper half-plane; on the real line keep the
    # sign of Re(u) so that left/right of the slit stay ordered
    if s.imag < 0.0 or (s.imag == 0.0 and u.real < 0.0):
        return -s
    return s


@njit(cache=True)
def on_slit(xi, dt, z, tol):
    u = z - xi
    if abs(u.real) > tol * (1.0 + abs(z)):
        return False
    return u.imag < 2.0 * np.sqrt(dt) - tol * (1.0 + abs(z))


@njit(cache=True)
def forward(xi, dt, z):
    u = z - xi
    s = np.sqrt(u * u + 4.0 * dt)
    return xi + _fix_branch(s, u)


@njit(cache=True)
def inverse(xi, dt, w):
    u = w - xi
    s = np.sqrt(u * u - 4.0 * dt)
    return xi + _fix_branch(s, u)


@njit(cache=True)
def apply_many(xis, dts, zs, stop, tol):
    """Push every point of ``zs`` through steps ``0..stop-1``.

    Returns (images, status, offending point index).
    """
    out = zs.copy()
    for q in range(out.shape[0]):
        z = out[q]
        for i in range(stop):
            if tol > 0.0 and on_slit(xis[i], dts[i], z, tol):
                return out, ON_SLIT, q
            z = forward(xis[i], dts[i], z)
        out[q] = z
    return out, OK, -1


@njit(cache=True)
def invert_many(xis, dts, ws, stop, tol):
    """Pull every point of ``ws`` back through steps ``stop-1..0``."""
    out = ws.copy()
    for q in range(out.shape[0]):
        w = out[q]
        if w.imag < -tol * (1.0 + abs(w)):
            return out, BELOW_AXIS, q
        for i in range(stop - 1, -1, -1):
            w = inverse(xis[i], dts[i], w)
        out[q] = w
    return out, OK, -1


@njit(cache=True)
def trace_points(xis, dts):
    """Tips of the growing hull: point k is the preimage of the last active
    driving value ``xis[k-1]`` under the first k steps."""
    n = xis.shape[0]
    pts = np.empty(n + 1, dtype=np.complex128)
    if n == 0:
        return pts
    pts[0] = xis[0] + 0.0j
    for k in range(1, n + 1):
        w = xis[k - 1] + 0.0j
        for i in range(k - 1, -1, -1):
            w = inverse(xis[i], dts[i], w)
        pts[k] = w
    return pts


@njit(cache=True)
def zip_curve(points, tol):
    """Vertical-slit zipper.

    Returns (xis, dts, failing index or -1). The point at the failing index
    was mapped to Im <= 0, or landed on an emitted slit.
    """
    m = points.shape[0]
    xis = np.empty(max(m - 1, 0))
    dts = np.empty(max(m - 1, 0))
    work = points.copy()
    for k in range(1, m):
        w = work[k]
        if not w.imag > 0.0:
            return xis[: k - 1], dts[: k - 1], k
        xi = w.real
        dt = 0.25 * w.imag * w.imag
        xis[k - 1] = xi
        dts[k - 1] = dt
        for q in range(k + 1, m):
            z = work[q]
            if on_slit(xi, dt, z, tol):
                return xis[:k], dts[:k], q
            work[q] = forward(xi, dt, z)
    return xis, dts, -1


@njit(cache=True)
def jet_complex(xis, dts, z, stop):
    f = z + 0.0j
    f1 = 1.0 + 0.0j
    f2 = 0.0j
    f3 = 0.0j
    for i in range(stop):
        dt = dts[i]
        u = f - xis[i]
        s = _fix_branch(np.sqrt(u * u + 4.0 * dt), u)
        g1 = u / s
        s3 = s * s * s
        g2 = 4.0 * dt / s3
        g3 = -12.0 * dt * u / (s3 * s * s)
        f3 = g3 * f1 * f1 * f1 + 3.0 * g2 * f1 * f2 + g1 * f3
        f2 = g2 * f1 * f1 + g1 * f2
        f1 = g1 * f1
        f = xis[i] + s
    return f, f1, f2, f3


@njit(cache=True)
def jet_real(xis, dts, x, stop):
    """Real-line version of :func:`jet_complex`; returns status as 5th item."""
    f = x
    f1 = 1.0
    f2 = 0.0
    f3 = 0.0
    for i in range(stop):
        dt = dts[i]
        u = f - xis[i]
        if u == 0.0:
            return f, f1, f2, f3, ON_SLIT
        s = np.sqrt(u * u + 4.0 * dt)
        if u < 0.0:
            s = -s
        g1 = u / s
        s3 = s * s * s
        g2 = 4.0 * dt / s3
        g3 = -12.0 * dt * u / (s3 * s * s)
        f3 = g3 * f1 * f1 * f1 + 3.0 * g2 * f1 * f2 + g1 * f3
        f2 = g2 * f1 * f1 + g1 * f2
        f1 = g1 * f1
        f = xis[i] + s
    return f, f1, f2, f3, OK


@njit(cache=True)
def jet_real_many(xis, dts, xs, stop):
    n = xs.shape[0]
    out = np.empty((n, 4))
    for q in range(n):
        f, f1, f2, f3, st = jet_real(xis, dts, xs[q], stop)
        if st != OK:
            out[q, :] = np.nan
        else:
            out[q, 0] = f
            out[q, 1] = f1
            out[q, 2] = f2
            out[q, 3] = f3
    return out
