"""Two-sample Kolmogorov-Smirnov statistics with optional weights on one side."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DegenerateWeightsError, ParameterError

MIN_NEFF = 30


@dataclass(frozen=True)
class KSResult:
    statistic: float
    n_eff: float
    m: int
    critical: float
    p_value: float
    alpha: float

    @property
    def passed(self):
        return self.statistic <= self.critical


def ecdf(sample, weights=None):
    """Sorted support and (weighted) cumulative probabilities."""
    x = np.asarray(sample, dtype=float)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    cw = np.cumsum(w)
    return x, cw / cw[-1]


def _cdf_at(x, c, at):
    c0 = np.concatenate([[0.0], c])
    return c0[np.searchsorted(x, at, side="right")]


def ks_distance(xs, ys, wx=None, wy=None):
    """sup |F_x - F_y| of the two (weighted) empirical CDFs."""
    x, cx = ecdf(xs, wx)
    y, cy = ecdf(ys, wy)
    grid = np.concatenate([x, y])
    return float(np.max(np.abs(_cdf_at(x, cx, grid) - _cdf_at(y, cy, grid))))


def effective_size(w):
    w = np.asarray(w, dtype=float)
    return float(w.sum() ** 2 / np.sum(w * w))


def critical_value(n, m, alpha=0.01):
    """Asymptotic two-sample KS critical value c(alpha) * sqrt((n + m) / (n m))."""
    c = np.sqrt(-0.5 * np.log(alpha / 2.0))
    return float(c * np.sqrt((n + m) / (n * m)))


def weighted_ks(xs, ws, ys, alpha=0.01, min_neff=MIN_NEFF, n_perm=0, seed=0):
    """Weighted ECDF of ``xs`` (weights ``ws``) against the plain ECDF of ``ys``.

    The effective size ``(sum w)^2 / sum w^2`` of the weighted sample stands in
    for its sample count in the asymptotic critical value and p-value.  With
    ``n_perm > 0`` the p-value is instead estimated by permuting the pooled
    samples (weights of pooled ``ys`` entries set to the mean weight).
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    ws = np.asarray(ws, dtype=float)
    if xs.size == 0 or ys.size == 0:
        raise ParameterError("both samples must be nonempty")
    if ws.shape != xs.shape:
        raise ParameterError("one weight per weighted observation")
    if np.any(~np.isfinite(ws)) or np.any(ws <= 0):
        raise DegenerateWeightsError("weights must be finite and positive")
    n_eff = effective_size(ws)
    if n_eff < min_neff:
        raise DegenerateWeightsError(f"effective sample size {n_eff:.1f} < {min_neff}")
    d = ks_distance(xs, ys, ws)
    m = ys.size
    crit = critical_value(n_eff, m, alpha)
    if n_perm:
        p = _permutation_p(xs, ws, ys, d, n_perm, seed)
    else:
        p = float(stats.kstwobign.sf(d * np.sqrt(n_eff * m / (n_eff + m))))
    return KSResult(d, n_eff, int(m), crit, p, alpha)


def _permutation_p(xs, ws, ys, d, n_perm, seed):
    rng = np.random.default_rng(seed)
    pooled = np.concatenate([xs, ys])
    wpool = np.concatenate([ws, np.full(ys.size, ws.mean())])
    n = xs.size
    hits = 0
    for _ in range(n_perm):
        idx = rng.permutation(pooled.size)
        a, b = idx[:n], idx[n:]
        hits += ks_distance(pooled[a], pooled[b], wpool[a]) >= d
    return (hits + 1) / (n_perm + 1)


def ks_two_sample(xs, ys):
    """Classical two-sample test; returns (statistic, p-value)."""
    res = stats.ks_2samp(np.asarray(xs, float), np.asarray(ys, float))
    return float(res.statistic), float(res.pvalue)
