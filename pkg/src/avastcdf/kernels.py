"""Special functions and small convex transforms used by the oracles.

Everything that feeds a wealth computation returns a log value; mixture
wealths overflow double precision at moderate sample sizes.

Functions accept scalars or numpy arrays unless noted otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, betaincc, betaln, gammaln

__all__ = [
    "KernelError",
    "ToleranceConfig",
    "DEFAULT_TOLERANCE",
    "log_h",
    "psi_e",
    "kearns_saul",
    "lambert_w_m1",
    "log_upper_inc_gamma",
    "log_lower_inc_gamma",
    "log_kummer_1f1_row1",
    "log_inc_beta",
]


class KernelError(ArithmeticError):
    """A series or iteration failed to converge within ``max_iter``."""


@dataclass(frozen=True)
class ToleranceConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_iter: int = 10_000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if not self.abs_tol >= 0:
            raise ValueError("abs_tol must be nonnegative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


DEFAULT_TOLERANCE = ToleranceConfig()

# convergence target for the inner series/continued fractions; the public
# tolerance is a contract, the iteration runs to machine precision
_EPS = 2.0 * np.finfo(float).eps
_FPMIN = 1e-300


def _scalar_out(arr, *inputs):
    if all(np.ndim(x) == 0 for x in inputs):
        return float(arr)
    return arr


def log_h(lam, z):
    """log of the centered-Bernoulli MGF ``(1-z) e^{-lam z} + z e^{lam (1-z)}``."""
    lam = np.asarray(lam, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any((z < 0) | (z > 1)):
        raise ValueError("z must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        a = np.log1p(-z) - lam * z
        b = np.log(z) + lam * (1.0 - z)
    return _scalar_out(np.logaddexp(a, b), lam, z)


def psi_e(lam):
    """Sub-exponential CGF proxy ``-lam - log(1 - lam)`` on ``[0, 1)``."""
    lam = np.asarray(lam, dtype=float)
    if np.any((lam < 0) | (lam >= 1)):
        raise ValueError("psi_e is defined for lam in [0, 1)")
    return _scalar_out(-lam - np.log1p(-lam), lam)


def kearns_saul(p):
    """Kearns-Saul sub-Gaussian variance factor of a Bernoulli(p).

    ``K(p) = (2p - 1) / (2 log(p / (1 - p)))``, extended continuously by
    ``K(1/2) = 1/4``.
    """
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("kearns_saul requires p in (0, 1)")
    x = 2.0 * p - 1.0
    small = np.abs(x) < 1e-4
    with np.errstate(divide="ignore", invalid="ignore"):
        # log(p/(1-p)) = 2 atanh(2p - 1)
        out = np.where(small, 0.25 / (1.0 + x * x / 3.0), x / (4.0 * np.arctanh(x)))
    return _scalar_out(out, p)


def lambert_w_m1(x: float, tol: ToleranceConfig = DEFAULT_TOLERANCE) -> float:
    """Lower real branch ``W_{-1}`` of the Lambert W function.

    The starting bracket comes from the Chatzigeorgiou bounds
    ``-1 - sqrt(2u) - u <= W_{-1}(-e^{-u-1}) <= -1 - sqrt(2u) - 2u/3`` and is
    refined by Newton steps on ``w + log(-w) = log(-x)`` that fall back to
    bisection whenever they leave the bracket.
    """
    x = float(x)
    lo_edge = -math.exp(-1.0)
    if not (lo_edge - 1e-16 <= x < 0.0):
        raise ValueError("lambert_w_m1 is defined on [-1/e, 0)")
    u = max(-math.log(-x) - 1.0, 0.0)
    if u == 0.0:
        return -1.0
    r = math.sqrt(2.0 * u)
    lo, hi = -1.0 - r - u, -1.0 - r - (2.0 / 3.0) * u
    target = math.log(-x)

    def g(w):
        return w + math.log(-w) - target

    # g is increasing on (-inf, -1]: g(lo) <= 0 <= g(hi)
    w = 0.5 * (lo + hi)
    for _ in range(tol.max_iter):
        gw = g(w)
        if gw == 0.0:
            return w
        if gw < 0.0:
            lo = w
        else:
            hi = w
        slope = 1.0 + 1.0 / w
        step = w - gw / slope if slope > 0 else math.nan
        w_new = step if lo < step < hi else 0.5 * (lo + hi)
        if abs(w_new - w) <= tol.rel_tol * 1e-3 * abs(w) or hi - lo <= _EPS * abs(w):
            return w_new
        w = w_new
    raise KernelError("lambert_w_m1 did not converge")


def _gamma_series(a, x, tol):
    # sum_{n>=0} x^n / (a (a+1) ... (a+n)); gamma(a, x) = e^{-x} x^a * sum
    total = 1.0 / a
    term = total.copy()
    ap = a.copy()
    active = np.ones(a.shape, dtype=bool)
    for _ in range(tol.max_iter):
        if not active.any():
            return np.log(total)
        ap[active] += 1.0
        term[active] *= x[active] / ap[active]
        total[active] += term[active]
        active &= term > total * _EPS
    raise KernelError("incomplete gamma series did not converge")


def _gamma_cf(a, x, tol):
    # modified Lentz evaluation of the continued fraction for Gamma(a, x);
    # returns log of the fraction so that Gamma(a, x) = e^{-x} x^a * cf
    b = x + 1.0 - a
    c = np.full(a.shape, 1.0 / _FPMIN)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(a.shape, dtype=bool)
    for i in range(1, tol.max_iter + 1):
        if not active.any():
            return np.log(h)
        idx = np.flatnonzero(active)
        an = -i * (i - a[idx])
        b[idx] += 2.0
        di = an * d[idx] + b[idx]
        di = np.where(np.abs(di) < _FPMIN, _FPMIN, di)
        ci = b[idx] + an / c[idx]
        ci = np.where(np.abs(ci) < _FPMIN, _FPMIN, ci)
        di = 1.0 / di
        delta = di * ci
        d[idx] = di
        c[idx] = ci
        h[idx] *= delta
        active[idx] = np.abs(delta - 1.0) > _EPS
    raise KernelError("incomplete gamma continued fraction did not converge")


def _prep_gamma_args(a, x):
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(a <= 0):
        raise ValueError("a must be positive")
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    return np.broadcast_arrays(a, x)


def log_upper_inc_gamma(a, x, tol: ToleranceConfig = DEFAULT_TOLERANCE):
    """log of the unregularized upper incomplete gamma ``Gamma(a, x)``.

    Continued fraction for ``x > a + 1``, otherwise the complement of the
    lower series.
    """
    a_in, x_in = a, x
    a, x = _prep_gamma_args(a, x)
    a = a.astype(float).ravel()
    x = x.astype(float).ravel()
    out = np.empty(a.shape)
    cf = x > a + 1.0
    if cf.any():
        ac, xc = a[cf], x[cf]
        out[cf] = -xc + ac * np.log(xc) + _gamma_cf(ac, xc, tol)
    ser = ~cf
    if ser.any():
        as_, xs = a[ser], x[ser]
        lg = gammaln(as_)
        with np.errstate(divide="ignore"):
            log_lower = np.where(
                xs > 0, -xs + as_ * np.log(np.where(xs > 0, xs, 1.0)) + _gamma_series(as_, xs, tol), -np.inf
            )
        p = np.exp(log_lower - lg)
        with np.errstate(divide="ignore"):
            out[ser] = lg + np.log1p(-np.minimum(p, 1.0))
    out = out.reshape(np.broadcast(np.asarray(a_in), np.asarray(x_in)).shape)
    return _scalar_out(out, a_in, x_in)


def log_lower_inc_gamma(a, x, tol: ToleranceConfig = DEFAULT_TOLERANCE):
    """log of the unregularized lower incomplete gamma ``gamma(a, x)``."""
    a_in, x_in = a, x
    a, x = _prep_gamma_args(a, x)
    a = a.astype(float).ravel()
    x = x.astype(float).ravel()
    out = np.full(a.shape, -np.inf)
    cf = x > a + 1.0
    if cf.any():
        ac, xc = a[cf], x[cf]
        log_upper = -xc + ac * np.log(xc) + _gamma_cf(ac, xc, tol)
        lg = gammaln(ac)
        out[cf] = lg + np.log1p(-np.exp(log_upper - lg))
    ser = (~cf) & (x > 0)
    if ser.any():
        as_, xs = a[ser], x[ser]
        out[ser] = -xs + as_ * np.log(xs) + _gamma_series(as_, xs, tol)
    out = out.reshape(np.broadcast(np.asarray(a_in), np.asarray(x_in)).shape)
    return _scalar_out(out, a_in, x_in)


def _log_1f1_series(b, x, tol: ToleranceConfig = DEFAULT_TOLERANCE):
    """Ascending series ``sum_n x^n / (b)_n`` for 1F1(1; b; x), x >= 0."""
    b = np.asarray(b, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    total = np.ones(b.shape)
    term = np.ones(b.shape)
    active = x > 0
    n = 0
    while active.any():
        if n >= tol.max_iter:
            raise KernelError("1F1 series did not converge")
        idx = np.flatnonzero(active)
        term[idx] *= x[idx] / (b[idx] + n)
        total[idx] += term[idx]
        n += 1
        ratio = x[idx] / (b[idx] + n)
        # once the ratio drops below one the remaining tail is geometric
        tail = np.where(ratio < 1.0, term[idx] * ratio / (1.0 - np.minimum(ratio, 0.999999)), np.inf)
        active[idx] = tail > total[idx] * _EPS
    return np.log(total)


def _log_1f1_identity(b, x, tol: ToleranceConfig = DEFAULT_TOLERANCE):
    """``1F1(1; a+1; x) = e^x a x^{-a} gamma(a, x)`` with ``a = b - 1``."""
    b = np.asarray(b, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    a = b - 1.0
    return x + np.log(a) - a * np.log(x) + log_lower_inc_gamma(a, x, tol)


def log_kummer_1f1_row1(b, x, tol: ToleranceConfig = DEFAULT_TOLERANCE):
    """log of Kummer's ``1F1(1; b; x)`` for ``b > 1`` and ``x >= 0``.

    Uses the ascending series when ``x <= b`` and the incomplete-gamma
    identity otherwise.
    """
    b_in, x_in = b, x
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(b <= 1):
        raise ValueError("b must exceed 1")
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    shape = np.broadcast(b, x).shape
    b, x = (np.broadcast_to(v, shape).ravel() for v in (b, x))
    out = np.empty(b.shape)
    ser = x <= b
    if ser.any():
        out[ser] = _log_1f1_series(b[ser], x[ser], tol)
    if (~ser).any():
        out[~ser] = _log_1f1_identity(b[~ser], x[~ser], tol)
    return _scalar_out(out.reshape(shape), b_in, x_in)


def _log_beta_head(x, a, b, tol):
    # log of int_0^x p^{a-1} (1-p)^{b-1} dp by the Lentz continued fraction;
    # converges fast for x < (a + 1) / (a + b + 2)
    if x <= 0.0:
        return -math.inf
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c, d = 1.0, 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _FPMIN else _FPMIN)
    h = d
    for m in range(1, tol.max_iter + 1):
        m2 = 2 * m
        for aa in (m * (b - m) * x / ((qam + m2) * (a + m2)), -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))):
            d = 1.0 + aa * d
            d = 1.0 / (d if abs(d) > _FPMIN else _FPMIN)
            c = 1.0 + aa / c
            c = c if abs(c) > _FPMIN else _FPMIN
            delta = d * c
            h *= delta
        if abs(delta - 1.0) <= _EPS:
            return a * math.log(x) + b * math.log1p(-x) - math.log(a) + math.log(h)
    raise KernelError("incomplete beta continued fraction did not converge")


def _log_inc_beta_tail(lo, hi, a, b, tol):
    # interval mass far in one tail, where the regularized values underflow
    if lo >= a / (a + b):
        lo, hi, a, b = 1.0 - hi, 1.0 - lo, b, a
    big, small = _log_beta_head(hi, a, b, tol), _log_beta_head(lo, a, b, tol)
    if small == -math.inf:
        return big
    return big + math.log1p(-math.exp(small - big))


def log_inc_beta(lo, hi, a, b, tol: ToleranceConfig = DEFAULT_TOLERANCE):
    """log of ``int_lo^hi p^{a-1} (1-p)^{b-1} dp``.

    Differences of regularized incomplete betas are taken on whichever
    side of the distribution keeps them away from cancellation. Masses
    below the double range are recomputed in log space by a continued
    fraction.
    """
    lo_in, hi_in, a_in, b_in = lo, hi, a, b
    lo, hi, a, b = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (lo, hi, a, b)))
    if np.any((lo < 0) | (hi > 1) | (lo > hi)):
        raise ValueError("need 0 <= lo <= hi <= 1")
    if np.any((a <= 0) | (b <= 0)):
        raise ValueError("a and b must be positive")
    upper_side = lo >= a / (a + b)
    mass = np.where(
        upper_side,
        betaincc(a, b, lo) - betaincc(a, b, hi),
        betainc(a, b, hi) - betainc(a, b, lo),
    )
    with np.errstate(divide="ignore"):
        out = np.where(mass > 0, betaln(a, b) + np.log(np.where(mass > 0, mass, 1.0)), -np.inf)
    for i in map(tuple, np.argwhere((mass < 1e-280) & (lo < hi))):
        out[i] = _log_inc_beta_tail(float(lo[i]), float(hi[i]), float(a[i]), float(b[i]), tol)
    return _scalar_out(out, lo_in, hi_in, a_in, b_in)
