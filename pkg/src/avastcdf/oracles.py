"""Fixed-value confidence sequences for the averaged conditional CDF.

For a probe value ``rho`` each oracle returns a lower and an upper bound on
``(1/t) sum_s E_{s-1}[W_s 1{X_s <= rho}]`` that hold simultaneously over
all ``t`` with probability at least ``1 - delta``.

Four strategies are available:

``BernoulliOracle``
    Beta-Binomial mixture (prior parameter ``b``) on the indicator
    ``1{X_s <= rho}``. Unweighted streams only.
``SubGaussianOracle``
    Closed-form curved normal-mixture boundary with the Kearns-Saul
    variance factor. Unweighted streams only.
``EmpBernOracle``
    Empirical Bernstein supermartingale with an Adagrad regret-inflated
    variance process and a truncated-gamma conjugate mixture over bets.
``DDRMOracle``
    Heavy-tailed mixture of fixed bets with LogApprox bucket statistics.

All lower bounds are found by bisection on a fixed dyadic lattice of
``[0, 1]`` so that, for fixed data, shrinking ``delta`` can never tighten
a bound. Upper bounds are one minus a lower bound on the complement
process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import polygamma

from .kernels import (
    kearns_saul,
    log_inc_beta,
    log_kummer_1f1_row1,
    log_lower_inc_gamma,
)
from .stats import (
    CountsSnapshot,
    FrozenTailStats,
    ProcessStats,
    ValueCounts,
    WeightedStreamStats,
    bucket_log_wealth,
)

__all__ = [
    "BISECT_ITERS",
    "OracleQuery",
    "BetGrid",
    "EmpBernState",
    "WidthDiagnostics",
    "PointwiseOracle",
    "BernoulliOracle",
    "SubGaussianOracle",
    "EmpBernOracle",
    "DDRMOracle",
    "make_oracle",
    "ORACLE_KINDS",
    "beta_binomial_log_wealth",
    "subgaussian_radius",
    "empbern_log_wealth",
    "empbern_stitched_boundary",
    "ddrm_per_lambda_log_wealth",
    "log_c_tau",
    "bernoulli_lower",
    "bernoulli_upper",
    "subgaussian_upper",
    "subgaussian_lower",
    "empbern_lower",
    "empbern_upper",
    "ddrm_lower",
    "ddrm_upper",
    "width_diagnostics",
]

# 2^-40 lattice on [0, 1]; finer than the 1e-8 root tolerance
BISECT_ITERS = 40


@dataclass(frozen=True)
class OracleQuery:
    rho: float
    delta: float
    t: int

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.t < 1:
            raise ValueError("t must be at least 1")


@dataclass(frozen=True)
class BetGrid:
    """Discrete mixture over bets ``lambdas`` with sub-probability ``weights``.

    The default grid is ``lambda_j = 2^-(j+1)`` with weight
    ``6 / (pi^2 (j+1)^2)``; ``tail_weight`` is the mass of the (infinite)
    remainder of that family beyond the explicit terms.
    """

    lambdas: np.ndarray
    weights: np.ndarray
    tail_weight: float = 0.0

    def __post_init__(self):
        if np.any((self.lambdas <= 0) | (self.lambdas >= 1)):
            raise ValueError("bets must lie in (0, 1)")
        if np.any(np.diff(self.lambdas) >= 0):
            raise ValueError("bets must be strictly decreasing")
        if self.weights.sum() + self.tail_weight > 1 + 1e-12:
            raise ValueError("bet weights must sum to at most one")

    @classmethod
    def dyadic(cls, n_terms: int = 64) -> "BetGrid":
        j = np.arange(n_terms, dtype=float)
        lambdas = 2.0 ** -(j + 1.0)
        weights = 6.0 / (math.pi**2 * (j + 1.0) ** 2)
        # sum_{j >= n} 6/(pi^2 (j+1)^2) = (6/pi^2) * trigamma(n + 1)
        tail = 6.0 / math.pi**2 * float(polygamma(1, n_terms + 1))
        return cls(lambdas, weights, tail)


@dataclass(frozen=True)
class EmpBernState:
    """Variance process of the empirical Bernstein supermartingale."""

    sum_sq_dev: np.ndarray
    tau: float = 1.0

    @property
    def regret(self) -> np.ndarray:
        return 16.0 + 4.0 * math.sqrt(2.0) * np.sqrt(8.0 + self.sum_sq_dev)

    @property
    def variance(self) -> np.ndarray:
        return self.regret + self.sum_sq_dev

    @classmethod
    def from_process(cls, ps: ProcessStats, tau: float = 1.0) -> "EmpBernState":
        y_star = np.minimum(1.0, ps.sum_y / ps.t)
        dev = ps.sum_y_sq - 2.0 * y_star * ps.sum_y + ps.t * y_star**2
        return cls(np.maximum(dev, 0.0), tau)


@dataclass(frozen=True)
class WidthDiagnostics:
    drift: float
    kearns_saul: float
    depth_used: int


def _bisect_lower(reject, n: int, iters: int = BISECT_ITERS) -> np.ndarray:
    """Largest lattice point ``m`` of ``[0, 1]`` with ``reject(m)`` true.

    ``reject`` must be true on a prefix ``[0, root)``; returns 0 when nothing
    is rejected.
    """
    lo = np.zeros(n)
    hi = np.ones(n)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        r = reject(mid)
        lo = np.where(r, mid, lo)
        hi = np.where(r, hi, mid)
    return lo


def _as_array(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


class PointwiseOracle:
    """Common interface: vectorized ``lower_many``/``upper_many`` plus scalars."""

    kind = "abstract"
    weighted = False

    def prepare(self, stats):
        """Turn live statistics into the immutable snapshot this oracle reads."""
        if isinstance(stats, (CountsSnapshot, FrozenTailStats)):
            return stats
        if isinstance(stats, (ValueCounts, WeightedStreamStats)):
            return stats.freeze()
        raise TypeError(f"unsupported statistics type {type(stats).__name__}")

    def lower_many(self, snap, rho, delta) -> np.ndarray:
        raise NotImplementedError

    def upper_many(self, snap, rho, delta) -> np.ndarray:
        raise NotImplementedError

    def lower(self, snap, rho: float, delta: float) -> float:
        return float(self.lower_many(snap, [rho], [delta])[0])

    def upper(self, snap, rho: float, delta: float) -> float:
        return float(self.upper_many(snap, [rho], [delta])[0])

    @staticmethod
    def _check(snap, rho, delta):
        if snap.t < 1:
            raise ValueError("oracle queries need at least one observation")
        rho, delta = np.broadcast_arrays(_as_array(rho), _as_array(delta))
        if np.any(delta <= 0):
            raise ValueError("delta must be positive")
        return rho, delta


# ---------------------------------------------------------------------------
# Beta-Binomial


def beta_binomial_log_wealth(q, k, t, b: float = 1.0):
    """log wealth of the one-sided Beta-Binomial mixture at candidate mean ``q``.

    ``k`` of ``t`` indicators are one; the prior is ``Beta(b q, b (1-q))``
    truncated to ``[q, 1]``.
    """
    q, k = np.broadcast_arrays(np.asarray(q, dtype=float), np.asarray(k, dtype=float))
    num = log_inc_beta(q, 1.0, b * q + k, b * (1.0 - q) + t - k)
    den = log_inc_beta(q, 1.0, b * q, b * (1.0 - q))
    return num - den - k * np.log(q) - (t - k) * np.log1p(-q)


class BernoulliOracle(PointwiseOracle):
    """Beta-Binomial confidence sequence on the indicator ``1{X <= rho}``.

    Results depend only on ``(count, t, delta)`` and are memoized across
    snapshots.
    """

    kind = "bernoulli"

    def __init__(self, prior: float = 1.0, cache_size: int = 2_000_000):
        if not prior > 0:
            raise ValueError("prior parameter must be positive")
        self.prior = float(prior)
        self.cache_size = cache_size
        self._cache: dict[tuple[int, int, float], float] = {}

    def lower_from_counts(self, k, t: int, delta) -> np.ndarray:
        k = np.atleast_1d(np.asarray(k, dtype=np.int64))
        delta = np.broadcast_to(_as_array(delta), k.shape)
        out = np.zeros(k.shape)
        trivial = (k == 0) | (delta >= 1)
        keys = [(int(kk), int(t), float(dd)) for kk, dd in zip(k.tolist(), delta.tolist())]
        todo = {}
        for i, key in enumerate(keys):
            if trivial[i]:
                continue
            hit = self._cache.get(key)
            if hit is None:
                todo.setdefault(key, []).append(i)
            else:
                out[i] = hit
        if todo:
            uk = np.array([key[0] for key in todo], dtype=float)
            ud = np.array([key[2] for key in todo])
            qhat = uk / t
            thresh = np.log(1.0 / ud)

            def reject(q):
                ok = (q > 0) & (q <= qhat)
                res = np.zeros(q.shape, dtype=bool)
                if ok.any():
                    lw = beta_binomial_log_wealth(q[ok], uk[ok], t, self.prior)
                    res[ok] = lw >= thresh[ok]
                res[q == 0] = True
                return res

            vals = _bisect_lower(reject, uk.size)
            if len(self._cache) > self.cache_size:
                self._cache.clear()
            for (key, idx), v in zip(todo.items(), vals.tolist()):
                self._cache[key] = v
                out[idx] = v
        return out

    def lower_many(self, snap, rho, delta):
        rho, delta = self._check(snap, rho, delta)
        k = snap.count_le(rho)
        return self.lower_from_counts(k, snap.t, delta)

    def upper_many(self, snap, rho, delta):
        rho, delta = self._check(snap, rho, delta)
        k = snap.count_le(rho)
        return 1.0 - self.lower_from_counts(snap.t - k, snap.t, delta)


# ---------------------------------------------------------------------------
# curved sub-Gaussian boundary


def _ks_closed(p):
    """Kearns-Saul factor extended by continuity to ``K(0) = K(1) = 0``."""
    p = np.asarray(p, dtype=float)
    inner = (p > 0) & (p < 1)
    out = np.zeros(p.shape)
    if inner.any():
        out[inner] = kearns_saul(p[inner])
    return out


def subgaussian_radius(p, t, delta, tau: float = 1.0):
    """Crossing radius ``M(t; p, tau) / t`` of the normal-mixture boundary."""
    v = t * _ks_closed(p) + tau
    m = np.sqrt(2.0 * v * np.log(np.sqrt(v / tau) / (2.0 * delta) + 1.0))
    return m / t


class SubGaussianOracle(PointwiseOracle):
    """Curved sub-Gaussian boundary with the Kearns-Saul variance factor.

    The upper bound is the largest ``p`` with ``p - qhat <= M(t; p)/t``.
    On ``[1/2, 1]`` the defining function is increasing so plain bisection
    is exact; below ``1/2`` a grid scan locates the largest crossing first.
    """

    kind = "subgaussian"

    def __init__(self, tau: float = 1.0, scan_points: int = 128):
        if not tau > 0:
            raise ValueError("tau must be positive")
        self.tau = float(tau)
        self.scan_points = int(scan_points)

    def upper_from_counts(self, k, t: int, delta) -> np.ndarray:
        qhat = np.atleast_1d(np.asarray(k, dtype=float)) / t
        delta = np.broadcast_to(_as_array(delta), qhat.shape).astype(float)

        def g(p, sel):
            return p - qhat[sel] - subgaussian_radius(p, t, delta[sel], self.tau)

        out = np.ones(qhat.shape)
        allsel = np.arange(qhat.size)
        top = g(np.ones(qhat.size), allsel) <= 0
        live = np.flatnonzero(~top & (delta < 1))
        if live.size == 0:
            return out
        p0 = np.maximum(qhat[live], 0.5)
        easy = g(p0, live) <= 0
        lo = np.where(easy, p0, 0.0)
        hi = np.where(easy, 1.0, 0.0)
        hard = np.flatnonzero(~easy)
        if hard.size:
            sel = live[hard]
            q0 = qhat[sel]
            frac = np.linspace(0.0, 1.0, self.scan_points + 1)
            grid = q0[:, None] + (0.5 - q0)[:, None] * frac[None, :]
            gv = grid - q0[:, None] - subgaussian_radius(grid, t, delta[sel][:, None], self.tau)
            below = gv <= 0
            last = self.scan_points - np.argmax(below[:, ::-1], axis=1)
            last = np.minimum(last, self.scan_points - 1)
            rows = np.arange(sel.size)
            lo[hard] = grid[rows, last]
            hi[hard] = grid[rows, last + 1]
        for _ in range(BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            ok = g(mid, live) <= 0
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        out[live] = np.maximum(hi, qhat[live])
        return out

    def upper_many(self, snap, rho, delta):
        rho, delta = self._check(snap, rho, delta)
        return self.upper_from_counts(snap.count_le(rho), snap.t, delta)

    def lower_many(self, snap, rho, delta):
        rho, delta = self._check(snap, rho, delta)
        k = snap.count_le(rho)
        return 1.0 - self.upper_from_counts(snap.t - k, snap.t, delta)


# ---------------------------------------------------------------------------
# empirical Bernstein


def log_c_tau(tau: float) -> float:
    """log of the truncated-gamma mixture constant ``tau^tau e^-tau / gamma(tau, tau)``."""
    return tau * math.log(tau) - tau - float(log_lower_inc_gamma(tau, tau))


def empbern_log_wealth(s, v, tau: float = 1.0):
    """log of the conjugate-mixture wealth ``M^EB`` at centered sum ``s``, variance ``v``.

    For ``s + v + tau < 0`` the lower bound ``1F1(1; b; x) >= e^x`` is used.
    """
    s, v = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(v, dtype=float))
    tv = tau + v
    x = s + tv
    base = log_c_tau(tau) - np.log(tv)
    out = base + np.minimum(x, 0.0)
    pos = x >= 0
    if pos.any():
        out = np.array(out, dtype=float)
        out[pos] = base[pos] + log_kummer_1f1_row1(tv[pos] + 1.0, x[pos])
    return out


def empbern_stitched_boundary(v, t, tau: float = 1.0, delta: float = 0.05):
    """Closed-form majorant of the mixture crossing radius for ``S_t / t``."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("variance process must be nonnegative")
    log_c = log_c_tau(tau)
    tv = tau + v
    ell = 0.5 * np.log(tv / (2.0 * math.pi)) - 1.0 / (12.0 * tv + 1.0) + np.log1p(1.0 / delta) - log_c
    ell = np.maximum(ell, 0.0)
    u = np.sqrt(2.0 * (tv / t) / t * ell) + ell / t
    out = np.maximum(math.exp(log_c) / t, u)
    return float(out) if out.ndim == 0 else out


class EmpBernOracle(PointwiseOracle):
    """Empirical Bernstein confidence sequence for importance-weighted indicators.

    ``boundary="mixture"`` inverts the exact conjugate mixture;
    ``boundary="stitched"`` uses its closed-form majorant.
    """

    kind = "empbern"
    weighted = True

    def __init__(self, tau: float = 1.0, boundary: str = "mixture"):
        if not tau > 0:
            raise ValueError("tau must be positive")
        if boundary not in ("mixture", "stitched"):
            raise ValueError("boundary must be 'mixture' or 'stitched'")
        self.tau = float(tau)
        self.boundary = boundary

    def prepare(self, stats):
        if isinstance(stats, ValueCounts):
            stats = stats.freeze()
        if isinstance(stats, CountsSnapshot):
            return FrozenTailStats.from_counts(stats)
        return super().prepare(stats)

    def log_wealth(self, ps: ProcessStats, m) -> np.ndarray:
        """Mixture log-wealth against mean ``m`` for each process."""
        m = np.broadcast_to(_as_array(m), ps.sum_y.shape).astype(float)
        v = EmpBernState.from_process(ps, self.tau).variance
        return empbern_log_wealth(ps.sum_y - ps.t * m, v, self.tau)

    def lower_from_process(self, ps: ProcessStats, delta) -> np.ndarray:
        delta = np.broadcast_to(_as_array(delta), ps.sum_y.shape).astype(float)
        t = ps.t
        state = EmpBernState.from_process(ps, self.tau)
        v = state.variance
        qhat = np.minimum(1.0, ps.sum_y / t)
        if self.boundary == "stitched":
            radius = empbern_stitched_boundary(v, t, self.tau, delta)
            out = np.clip(ps.sum_y / t - radius, 0.0, 1.0)
        else:
            thresh = np.log(1.0 / delta)

            def reject(m):
                return empbern_log_wealth(ps.sum_y - t * m, v, self.tau) >= thresh

            out = _bisect_lower(reject, qhat.size)
        out = np.minimum(out, qhat)
        out[delta >= 1] = 0.0
        return out

    def lower_many(self, snap, rho, delta):
        rho, delta = self._check(snap, rho, delta)
        return self.lower_from_process(snap.below(rho), delta)

    def upper_many(self, snap, rho, delta):
        rho, delta = self._check(snap, rho, delta)
        ps = snap.below(rho)
        upper = 1.0 - self.lower_from_process(snap.above(rho), delta)
        return np.clip(np.maximum(upper, ps.sum_y / snap.t), 0.0, 1.0)


# ---------------------------------------------------------------------------
# DDRM


def _clipped_mean(ps: ProcessStats):
    return np.minimum(1.0, ps.sum_y / ps.t)


def ddrm_per_lambda_log_wealth(ps: ProcessStats, lam: float, exact_log_terms=None):
    """Constant part ``c`` of the per-bet log wealth bound ``c - lam t m``.

    ``exact_log_terms`` replaces the bucket lower bound on
    ``sum_s log(1 + lam (Y_s - Ybar))`` with an exactly computed value.
    """
    t = ps.t
    ybar = _clipped_mean(ps)
    if exact_log_terms is None:
        g = bucket_log_wealth(lam, ybar, ps.ns, ps.a, ps.b, ps.c, ps.zeros, ps.k)
    else:
        g = np.asarray(exact_log_terms, dtype=float)
    # sum_s h(lam (Y_s - Ybar)) with h(u) = u - log(1 + u)
    h_sum = np.maximum(lam * (ps.sum_y - t * ybar) - g, 0.0)
    r = lam / (1.0 - lam)
    regret = 4.0 * r * r + 4.0 * r * np.sqrt(h_sum)
    return lam * np.minimum(t, ps.sum_y) + g - regret


class DDRMOracle(PointwiseOracle):
    """Mixture of fixed-bet heavy-tailed supermartingales over a :class:`BetGrid`.

    The explicit bets are evaluated from LogApprox buckets. The remaining
    infinitely many bets of the dyadic family are folded in through a
    closed-form lower bound on their wealth, so the mixture is exact up to
    rounding without enumerating them.
    """

    kind = "ddrm"
    weighted = True

    def __init__(self, grid: BetGrid | None = None, chunk: int = 4096):
        self.grid = grid if grid is not None else BetGrid.dyadic()
        self.chunk = int(chunk)

    def prepare(self, stats):
        if isinstance(stats, ValueCounts):
            stats = stats.freeze()
        if isinstance(stats, CountsSnapshot):
            return FrozenTailStats.from_counts(stats)
        return super().prepare(stats)

    def log_wealth_terms(self, ps: ProcessStats):
        """Per-bet constants ``c_j`` (shape ``(J, Q)``) and tail parameters."""
        lams = self.grid.lambdas
        c = np.stack([ddrm_per_lambda_log_wealth(ps, float(lam)) for lam in lams])
        ybar = _clipped_mean(ps)
        sq_dev = np.maximum(ps.sum_y_sq - 2.0 * ybar * ps.sum_y + ps.t * ybar**2, 0.0)
        return c, sq_dev

    def _tail_log_wealth(self, ps, sq_dev, m):
        # every bet lam <= lam_tail beyond the explicit grid has log wealth at
        # least lam (S - t m) - lam^2 kappa (second-order bound on log1p and
        # on the regret), minimized over the tail
        if self.grid.tail_weight <= 0:
            return np.full(np.shape(m), -np.inf)
        lam = 0.5 * float(self.grid.lambdas[-1])
        half = sq_dev / 2.0
        kappa = (half + 4.0 + 4.0 * np.sqrt(half)) / (1.0 - lam) ** 2
        lin = np.minimum(0.0, lam * (ps.sum_y - ps.t * m))
        return math.log(self.grid.tail_weight) + lin - lam * lam * kappa

    def lower_from_process(self, ps: ProcessStats, delta) -> np.ndarray:
        delta = np.broadcast_to(_as_array(delta), ps.sum_y.shape).astype(float)
        n = ps.sum_y.size
        out = np.zeros(n)
        for start in range(0, n, self.chunk):
            sl = slice(start, start + self.chunk)
            sub = ProcessStats(
                t=ps.t,
                sum_y=ps.sum_y[sl],
                sum_y_sq=ps.sum_y_sq[sl],
                zeros=ps.zeros[sl],
                ns=ps.ns,
                a=ps.a[sl],
                b=ps.b[sl],
                c=ps.c[sl],
                k=ps.k,
            )
            out[sl] = self._lower_chunk(sub, delta[sl])
        return out

    def _wealth_fn(self, ps: ProcessStats):
        c, sq_dev = self.log_wealth_terms(ps)
        logw = np.log(self.grid.weights)[:, None] + c
        slope = self.grid.lambdas[:, None] * ps.t

        def log_wealth(m):
            body = np.logaddexp.reduce(logw - slope * m[None, :], axis=0)
            return np.logaddexp(body, self._tail_log_wealth(ps, sq_dev, m))

        return log_wealth

    def log_wealth(self, ps: ProcessStats, m) -> np.ndarray:
        """Mixture log-wealth lower bound against mean ``m`` for each process."""
        m = np.broadcast_to(_as_array(m), ps.sum_y.shape).astype(float)
        return self._wealth_fn(ps)(m)

    def _lower_chunk(self, ps: ProcessStats, delta):
        log_wealth = self._wealth_fn(ps)
        thresh = np.log(1.0 / delta)
        out = _bisect_lower(lambda m: log_wealth(m) >= thresh, ps.sum_y.size)
        out = np.minimum(out, _clipped_mean(ps))
        out[delta >= 1] = 0.0
        return out

    def lower_many(self, snap, rho, delta):
        rho, delta = self._check(snap, rho, delta)
        return self.lower_from_process(snap.below(rho), delta)

    def upper_many(self, snap, rho, delta):
        rho, delta = self._check(snap, rho, delta)
        ps = snap.below(rho)
        upper = 1.0 - self.lower_from_process(snap.above(rho), delta)
        return np.clip(np.maximum(upper, ps.sum_y / snap.t), 0.0, 1.0)


ORACLE_KINDS = {
    "bernoulli": BernoulliOracle,
    "subgaussian": SubGaussianOracle,
    "empbern": EmpBernOracle,
    "ddrm": DDRMOracle,
}


def make_oracle(kind: str, **kwargs) -> PointwiseOracle:
    try:
        return ORACLE_KINDS[kind](**kwargs)
    except KeyError:
        raise ValueError(f"unknown oracle kind {kind!r}; choose from {sorted(ORACLE_KINDS)}") from None


# ---------------------------------------------------------------------------
# functional entry points


def _snapshot_for(stats, q: OracleQuery, oracle: PointwiseOracle):
    snap = oracle.prepare(stats)
    if snap.t != q.t:
        raise ValueError(f"query time {q.t} does not match statistics total {snap.t}")
    return snap


def bernoulli_lower(counts, q: OracleQuery, prior: float = 1.0) -> float:
    oracle = BernoulliOracle(prior)
    return oracle.lower(_snapshot_for(counts, q, oracle), q.rho, q.delta)


def bernoulli_upper(counts, q: OracleQuery, prior: float = 1.0) -> float:
    oracle = BernoulliOracle(prior)
    return oracle.upper(_snapshot_for(counts, q, oracle), q.rho, q.delta)


def subgaussian_upper(counts, q: OracleQuery, tau: float = 1.0) -> float:
    oracle = SubGaussianOracle(tau)
    return oracle.upper(_snapshot_for(counts, q, oracle), q.rho, q.delta)


def subgaussian_lower(counts, q: OracleQuery, tau: float = 1.0) -> float:
    oracle = SubGaussianOracle(tau)
    return oracle.lower(_snapshot_for(counts, q, oracle), q.rho, q.delta)


def empbern_lower(frozen, q: OracleQuery, tau: float = 1.0) -> float:
    oracle = EmpBernOracle(tau)
    return oracle.lower(_snapshot_for(frozen, q, oracle), q.rho, q.delta)


def empbern_upper(frozen, q: OracleQuery, tau: float = 1.0) -> float:
    oracle = EmpBernOracle(tau)
    return oracle.upper(_snapshot_for(frozen, q, oracle), q.rho, q.delta)


def ddrm_lower(frozen, q: OracleQuery, grid: BetGrid | None = None) -> float:
    oracle = DDRMOracle(grid)
    return oracle.lower(_snapshot_for(frozen, q, oracle), q.rho, q.delta)


def ddrm_upper(frozen, q: OracleQuery, grid: BetGrid | None = None) -> float:
    oracle = DDRMOracle(grid)
    return oracle.upper(_snapshot_for(frozen, q, oracle), q.rho, q.delta)


def width_diagnostics(frozen: FrozenTailStats, bound: float, depth_used: int) -> WidthDiagnostics:
    """Reporting-only diagnostics: realized weight drift and ``K`` at ``bound``."""
    drift = frozen.total_w / frozen.t - 1.0
    p = min(max(bound, 1e-12), 1 - 1e-12)
    return WidthDiagnostics(drift, float(kearns_saul(p)), int(depth_used))
