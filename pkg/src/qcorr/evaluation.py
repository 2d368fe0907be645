"""Losses, divergences and the likelihood-ratio machinery.

Everything is in nats.  The chi-squared tail is computed here from the
regularised upper incomplete gamma function (series below ``a + 1``,
Lentz continued fraction above) so its accuracy is under our control for
the very small p-values that 5 sigma tests need; scipy supplies only the
normal tail and root bracketing.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np
from scipy import optimize, special, stats

from qcorr.data import as_sequences

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


class KlEstimate(NamedTuple):
    total: float
    per_symbol: float
    unsupported: tuple  # indices of sequences with zero model probability


class LrTestResult(NamedTuple):
    statistic: float
    df: int
    p_value: float  # floored at the smallest positive double
    sigma: float
    log_p_value: float = 0.0


class MultErrorCheck(NamedTuple):
    applicable: bool
    gamma: float
    kl_pq: float
    kl_qp: float
    holds: bool


def stochastic_kl(loglik: Callable, data) -> KlEstimate:
    """``-(1/K) sum log p(seq)`` and its per-symbol value.

    ``loglik`` maps a ``(K, n)`` array to per-sequence log-likelihoods.
    The data-entropy constant of the forward KL is not included.  Any
    sequence with zero model probability makes the estimate ``+inf`` and
    is reported in ``unsupported``.
    """
    seqs = as_sequences(data)
    if seqs.shape[0] == 0:
        raise ValueError("empty dataset")
    ll = np.asarray(loglik(seqs), dtype=np.float64).reshape(-1)
    if ll.shape[0] != seqs.shape[0]:
        raise ValueError("loglik must return one value per sequence")
    bad = tuple(int(i) for i in np.flatnonzero(~np.isfinite(ll)))
    if bad:
        return KlEstimate(math.inf, math.inf, bad)
    total = float(-ll.mean())
    return KlEstimate(total, total / seqs.shape[1], ())


def _as_distribution(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("not a probability vector")
    return p


def kl_exact(p, q) -> float:
    """``sum p log(p/q)``; ``inf`` when ``q`` misses part of the support of ``p``."""
    p, q = _as_distribution(p), _as_distribution(q)
    if p.shape != q.shape:
        raise ValueError("distributions differ in support size")
    mask = p > 0
    if np.any(q[mask] == 0):
        return math.inf
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


def l1_distance(p, q) -> float:
    p, q = _as_distribution(p), _as_distribution(q)
    if p.shape != q.shape:
        raise ValueError("distributions differ in support size")
    return float(np.abs(p - q).sum())


def multiplicative_gamma(p, q) -> float:
    """``max |p - q| / q`` over the support of ``q`` (``inf`` if ``q = 0 < p``)."""
    p, q = _as_distribution(p), _as_distribution(q)
    if p.shape != q.shape:
        raise ValueError("distributions differ in support size")
    if np.any((q == 0) & (p > 0)):
        return math.inf
    mask = q > 0
    return float(np.max(np.abs(p[mask] - q[mask]) / q[mask]))


def mult_error_implies_kl(p, q) -> MultErrorCheck:
    """Check that a two-sided multiplicative error ``gamma < 1/2`` bounds both KLs by ``gamma``."""
    g = max(multiplicative_gamma(p, q), multiplicative_gamma(q, p))
    if not g < 0.5:
        return MultErrorCheck(False, g, math.nan, math.nan, False)
    kpq, kqp = kl_exact(p, q), kl_exact(q, p)
    same_support = bool(np.array_equal(np.asarray(p) > 0, np.asarray(q) > 0))
    slack = 1e-14  # summation rounding when p and q nearly coincide
    return MultErrorCheck(True, g, kpq, kqp, same_support and kpq <= g + slack and kqp <= g + slack)


# ---------------------------------------------------------------- chi-squared


def _log_gamma_series(a: float, x: float) -> float:
    """log of the regularised lower incomplete gamma ``P(a, x)``, for ``x < a + 1``."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return math.log(total) - x + a * math.log(x) - math.lgamma(a)


def _log_gamma_cf(a: float, x: float) -> float:
    """log of the regularised upper incomplete gamma ``Q(a, x)``, for ``x >= a + 1``."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.log(h) - x + a * math.log(x) - math.lgamma(a)


def chi2_logsf(x: float, df: int) -> float:
    """Natural log of the chi-squared survival function; stays finite far into the tail."""
    if df < 1:
        raise ValueError("df must be at least 1")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 0.0
    a, z = df / 2.0, x / 2.0
    if z < a + 1.0:
        lp = _log_gamma_series(a, z)
        return math.log1p(-math.exp(lp)) if lp < 0 else -math.inf
    return _log_gamma_cf(a, z)


def chi2_sf(x: float, df: int) -> float:
    """Upper-tail probability of the chi-squared distribution."""
    return math.exp(chi2_logsf(x, df))


def chi2_isf_log(log_p: float, df: int) -> float:
    """``x`` with ``log chi2_sf(x, df) = log_p``."""
    if log_p > 0:
        raise ValueError("log_p must not be positive")
    if log_p == 0:
        return 0.0
    hi = max(1.0, float(df))
    while chi2_logsf(hi, df) > log_p:
        hi *= 2.0
    return optimize.brentq(lambda x: chi2_logsf(x, df) - log_p, 0.0, hi, xtol=1e-13, rtol=1e-15, maxiter=500)


def chi2_isf(p: float, df: int) -> float:
    """Inverse of :func:`chi2_sf`."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    return chi2_isf_log(math.log(p), df)


def sigma_from_logp(log_p: float) -> float:
    """One-sided normal equivalent of a log p-value, clamped at 0."""
    if log_p >= math.log(0.5):
        return 0.0
    if log_p > -700:
        return float(max(0.0, stats.norm.isf(math.exp(log_p))))
    hi = 1.0
    while special.log_ndtr(-hi) > log_p:
        hi *= 2.0
    return optimize.brentq(lambda s: special.log_ndtr(-s) - log_p, 0.0, hi, xtol=1e-12)


def sigma_from_p(p: float) -> float:
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    return sigma_from_logp(math.log(p))


def logp_from_sigma(sigma: float) -> float:
    return float(special.log_ndtr(-sigma))


def lr_test(loglik_alt: float, loglik_null: float, df_alt: int, df_null: int) -> LrTestResult:
    """Wilks test of a nested null against the larger alternative.

    The statistic is clamped at 0, so an alternative that fits worse
    reports ``p = 1`` and ``sigma = 0``.
    """
    if df_alt <= df_null:
        raise ValueError("df_alt must exceed df_null")
    df = int(df_alt - df_null)
    stat = max(0.0, 2.0 * (float(loglik_alt) - float(loglik_null)))
    log_p = chi2_logsf(stat, df)
    p = max(math.exp(log_p), math.ulp(0.0))
    return LrTestResult(stat, df, p, sigma_from_logp(log_p), log_p)


def kl_threshold_for_sigma(df: int, sigma_target: float, K: int, n: int) -> float:
    """Per-symbol KL improvement that makes :func:`lr_test` reach ``sigma_target``.

    ``delta_loglik = K n delta_kl``, so the threshold is the chi-squared
    quantile at the target tail probability divided by ``2 K n``.
    """
    if df < 1 or K < 1 or n < 1:
        raise ValueError("df, K and n must be positive")
    if sigma_target <= 0:
        return 0.0
    return chi2_isf_log(logp_from_sigma(sigma_target), df) / (2.0 * K * n)


# ---------------------------------------------------------- parameter counts


def dof_hmm(h: int, M: int) -> int:
    """Free parameters of a stationary HMM: prior, transitions and emissions."""
    if h < 1 or M < 1:
        raise ValueError("h and M must be positive")
    return (h - 1) + h * (h - 1) + h * (M - 1)


def dof_bbqc(k: int, M: int, convention: str = "stiefel") -> int:
    """Real parameters of the used isometry plus the boundary vector.

    ``"stiefel"`` counts the complex Stiefel manifold of ``kM x k``
    isometries (``2 kM k - k^2``) and a unit vector modulo phase
    (``2k - 2``).  ``"gauge-fixed"`` also removes the ``k^2`` dimensions of
    a bond-space unitary change of basis.
    """
    if k < 1 or M < 1:
        raise ValueError("k and M must be positive")
    base = (2 * k * M * k - k * k) + (2 * k - 2)
    if convention == "stiefel":
        return base
    if convention == "gauge-fixed":
        return base - k * k
    raise ValueError(f"unknown convention {convention!r}")
