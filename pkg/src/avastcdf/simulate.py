"""Synthetic streams with exactly tracked averaged conditional CDFs.

Every generator returns the full stream of ``(w, x)`` pairs together with a
:class:`TruthTracker` that evaluates
``v -> (1/t) sum_{s <= t} E_{s-1}[W_s 1{X_s <= v}]`` for any prefix length
``t``. That is the quantity a band must cover, so trackers drive the
Monte-Carlo coverage harness.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import special, stats

from .bands import Band, DepthSchedule, band_curve
from .oracles import PointwiseOracle, make_oracle
from .stats import ValueCounts, WeightedStreamStats

__all__ = [
    "GENERATOR_KINDS",
    "WEIGHT_LAWS",
    "GeneratorConfig",
    "SmoothnessMetadata",
    "TruthTracker",
    "MixtureTracker",
    "Stream",
    "BandConfig",
    "CoverageReport",
    "make_rng",
    "generate",
    "weight_law_sample",
    "dkw_band",
    "dkw_radius",
    "stats_at",
    "evaluate_band",
    "coverage_mc",
    "time_to_width",
]

GENERATOR_KINDS = (
    "iid-beta",
    "iid-lognormal",
    "iid-gaussian",
    "iid-uniform-eps",
    "polya",
    "iw-polya",
    "iid-iw",
)
WEIGHTED_KINDS = ("iw-polya", "iid-iw")
WEIGHT_LAWS = ("exp", "pareto")

# Pareto(3/2) scale giving unit mean: (3/2) x_m / (1/2) = 1
PARETO_SHAPE = 1.5
PARETO_SCALE = 1.0 / 3.0


@dataclass(frozen=True)
class GeneratorConfig:
    kind: str = "iid-beta"
    seed: int = 0
    horizon: int = 10_000
    a: float = 6.0
    b: float = 3.0
    mu: float = 0.0
    sigma: float = 1.0
    eps: float = 1.0 / 16.0
    q: float = 1.0
    gamma_scale: float = 1.0
    w_max: float = 10.0
    weight_law: str = "exp"

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if not (self.a > 0 and self.b > 0 and self.sigma > 0):
            raise ValueError("shape parameters must be positive")
        if not 0 < self.eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        if self.gamma_scale < 0:
            raise ValueError("gamma_scale must be nonnegative")
        if self.w_max < 1:
            raise ValueError("w_max must be at least 1")
        if self.weight_law not in WEIGHT_LAWS:
            raise ValueError(f"unknown weight law {self.weight_law!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def weighted(self) -> bool:
        return self.kind in WEIGHTED_KINDS

    @property
    def domain(self) -> str:
        return "real" if self.kind in ("iid-lognormal", "iid-gaussian") else "unit"

    def replace(self, **changes) -> "GeneratorConfig":
        return GeneratorConfig(**{**asdict(self), **changes})


@dataclass(frozen=True)
class SmoothnessMetadata:
    """Smoothness of the generator wrt its reference measure (reporting only)."""

    xi: float | None
    reference: str
    note: str = ""


class TruthTracker:
    """Averaged conditional CDF of a generated stream.

    Either a single closed-form CDF (iid streams) or the running average of
    per-step Beta CDFs with parameters ``params[s] = (a_s, b_s)``.
    """

    def __init__(self, cdf: Callable | None = None, params: np.ndarray | None = None):
        if (cdf is None) == (params is None):
            raise ValueError("provide exactly one of cdf or params")
        self._cdf = cdf
        self.params = None if params is None else np.asarray(params, dtype=float)

    @property
    def iid(self) -> bool:
        return self._cdf is not None

    def __call__(self, v, t: int | None = None) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self._cdf is not None:
            return np.asarray(self._cdf(v), dtype=float)
        t = self.params.shape[0] if t is None else int(t)
        if not 1 <= t <= self.params.shape[0]:
            raise ValueError("t outside the generated horizon")
        uniq, counts = np.unique(self.params[:t], axis=0, return_counts=True)
        flat = np.atleast_1d(np.clip(v, 0.0, 1.0)).reshape(-1)
        total = np.zeros(flat.size)
        for start in range(0, uniq.shape[0], 512):
            blk = uniq[start : start + 512]
            vals = special.betainc(blk[:, 0][:, None], blk[:, 1][:, None], flat[None, :])
            total += counts[start : start + 512] @ vals
        return (total / t).reshape(np.shape(v))


@dataclass(frozen=True)
class Stream:
    config: GeneratorConfig
    w: np.ndarray
    x: np.ndarray
    truth: TruthTracker
    smoothness: SmoothnessMetadata
    factual: "MixtureTracker | None" = None


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream keyed by ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def weight_law_sample(law: str, rng: np.random.Generator, size=None):
    """Unit-mean importance weights: ``Exp(1)`` or ``Pareto(3/2)`` by inverse CDF."""
    if law == "exp":
        u = rng.random(size)
        return -np.log1p(-u)
    if law == "pareto":
        u = 1.0 - rng.random(size)
        return PARETO_SCALE * u ** (-1.0 / PARETO_SHAPE)
    raise ValueError(f"unknown weight law {law!r}")


def _polya_params(counts_hi, counts_lo, t, cfg: GeneratorConfig):
    gamma = cfg.gamma_scale * float(t) ** cfg.q
    return 2.0 + gamma * counts_hi, 2.0 + gamma * counts_lo


def _gen_polya(cfg: GeneratorConfig, rng: np.random.Generator):
    T = cfg.horizon
    x = np.empty(T)
    params = np.empty((T, 2))
    hi = lo = 0
    for s in range(T):
        a, b = _polya_params(hi, lo, s + 1, cfg)
        params[s] = a, b
        x[s] = rng.beta(a, b)
        if x[s] > 0.5:
            hi += 1
        else:
            lo += 1
    return x, params


def _gen_iw_polya(cfg: GeneratorConfig, rng: np.random.Generator):
    T = cfg.horizon
    p_hi = 1.0 / cfg.w_max
    x = np.empty(T)
    w = np.empty(T)
    p_weighted = np.empty((T, 2))
    p_zero = np.empty((T, 2))
    counts = {0: [0, 0], 1: [0, 0]}
    for s in range(T):
        params = {c: _polya_params(counts[c][0], counts[c][1], s + 1, cfg) for c in (0, 1)}
        p_weighted[s] = params[1]
        p_zero[s] = params[0]
        cls = 1 if rng.random() < p_hi else 0
        w[s] = cfg.w_max if cls else 0.0
        x[s] = rng.beta(*params[cls])
        counts[cls][0 if x[s] > 0.5 else 1] += 1
    return w, x, p_weighted, p_zero


def generate(config: GeneratorConfig) -> Stream:
    """Draw a full stream of length ``config.horizon``; deterministic in the seed."""
    cfg = config
    rng = make_rng(cfg.seed)
    T = cfg.horizon
    ones = np.ones(T)
    if cfg.kind == "iid-beta" or cfg.kind == "iid-iw":
        dist = stats.beta(cfg.a, cfg.b)
        x = rng.beta(cfg.a, cfg.b, size=T)
        w = weight_law_sample(cfg.weight_law, rng, T) if cfg.kind == "iid-iw" else ones
        mode = (cfg.a - 1) / (cfg.a + cfg.b - 2) if cfg.a > 1 and cfg.b > 1 else None
        xi = 1.0 / dist.pdf(mode) if mode is not None else None
        meta = SmoothnessMetadata(xi, "uniform[0,1]")
        return Stream(cfg, w, x, TruthTracker(cdf=dist.cdf), meta)
    if cfg.kind == "iid-uniform-eps":
        x = cfg.eps * rng.random(T)
        eps = cfg.eps
        truth = TruthTracker(cdf=lambda v: np.clip(np.asarray(v, dtype=float) / eps, 0.0, 1.0))
        return Stream(cfg, ones, x, truth, SmoothnessMetadata(cfg.eps, "uniform[0,1]"))
    if cfg.kind == "iid-lognormal":
        x = np.exp(cfg.mu + cfg.sigma * rng.standard_normal(T))
        dist = stats.lognorm(s=cfg.sigma, scale=math.exp(cfg.mu))
        return Stream(cfg, ones, x, TruthTracker(cdf=dist.cdf), SmoothnessMetadata(None, "lebesgue"))
    if cfg.kind == "iid-gaussian":
        x = cfg.mu + cfg.sigma * rng.standard_normal(T)
        dist = stats.norm(cfg.mu, cfg.sigma)
        xi = cfg.sigma * math.sqrt(2 * math.pi)
        return Stream(cfg, ones, x, TruthTracker(cdf=dist.cdf), SmoothnessMetadata(xi, "lebesgue"))
    if cfg.kind == "polya":
        x, params = _gen_polya(cfg, rng)
        note = f"density wrt uniform grows like t^(1+q), q={cfg.q}"
        return Stream(cfg, ones, x, TruthTracker(params=params), SmoothnessMetadata(None, "uniform[0,1]", note))
    # iw-polya
    w, x, p_weighted, p_zero = _gen_iw_polya(cfg, rng)
    p_hi = 1.0 / cfg.w_max
    weighted_truth = TruthTracker(params=p_weighted)
    zero_truth = TruthTracker(params=p_zero)

    factual = MixtureTracker(((p_hi, weighted_truth), (1.0 - p_hi, zero_truth)))
    meta = SmoothnessMetadata(None, "uniform[0,1]", "weighted truth follows the w_max urn")
    return Stream(cfg, w, x, weighted_truth, meta, factual)


class MixtureTracker:
    """Probability-weighted combination of trackers."""

    def __init__(self, parts):
        self.parts = tuple(parts)

    def __call__(self, v, t: int | None = None) -> np.ndarray:
        return sum(p * tr(v, t) for p, tr in self.parts)


# ---------------------------------------------------------------------------
# DKW baseline


def dkw_radius(t, alpha: float) -> np.ndarray | float:
    """Time-uniform DKW radius with the ``6 alpha / (pi^2 t^2)`` union over time."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 1):
        raise ValueError("t must be at least 1")
    delta_t = 6.0 * alpha / (math.pi**2 * t**2)
    r = np.sqrt(np.log(2.0 / delta_t) / (2.0 * t))
    return float(r) if r.ndim == 0 else r


def dkw_band(t: int, alpha: float, counts=None, grid=None):
    """DKW radius at ``t``; with ``counts`` and ``grid`` also the clipped band."""
    r = dkw_radius(t, alpha)
    if counts is None:
        return r
    snap = counts.freeze() if hasattr(counts, "freeze") else counts
    if snap.t != t:
        raise ValueError("counts total does not match t")
    ecdf = np.asarray(snap.count_le(np.asarray(grid, dtype=float))) / t
    return r, np.clip(ecdf - r, 0.0, 1.0), np.clip(ecdf + r, 0.0, 1.0)


# ---------------------------------------------------------------------------
# coverage harness


@dataclass(frozen=True)
class BandConfig:
    oracle: str = "bernoulli"
    alpha: float = 0.05
    domain: str = "unit"
    eta: int = 2
    max_depth: int = 64
    oracle_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")

    def build_oracle(self) -> PointwiseOracle:
        return make_oracle(self.oracle, **self.oracle_options)

    @property
    def schedule(self) -> DepthSchedule:
        return DepthSchedule(self.eta, self.max_depth)


@dataclass(frozen=True)
class CoverageReport:
    n_seeds: int
    failures: int
    fraction: float
    ci_low: float
    ci_high: float
    worst_margin: np.ndarray
    seeds: np.ndarray
    check_times: tuple[int, ...]
    n_probes: int

    def threshold(self, alpha: float) -> float:
        return alpha + 3.0 * math.sqrt(alpha * (1 - alpha) / self.n_seeds)


def stats_at(stream: Stream, t: int, weighted: bool):
    """Sufficient statistics of the first ``t`` observations."""
    if weighted:
        ws = WeightedStreamStats()
        ws.extend(stream.w[:t], stream.x[:t])
        return ws
    vc = ValueCounts()
    vc.extend(stream.x[:t])
    return vc


def evaluate_band(stream: Stream, t: int, grid, band: BandConfig, oracle: PointwiseOracle | None = None) -> Band:
    oracle = oracle or band.build_oracle()
    st = stats_at(stream, t, oracle.weighted)
    return band_curve(grid, band.alpha, st, oracle, band.domain, band.schedule)


def _clopper_pearson(k: int, n: int, level: float = 0.95):
    lo = 0.0 if k == 0 else float(stats.beta.ppf((1 - level) / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - (1 - level) / 2, k + 1, n - k))
    return lo, hi


def coverage_mc(
    band: BandConfig,
    generator: GeneratorConfig,
    n_seeds: int,
    grid,
    check_times,
    seeds=None,
) -> CoverageReport:
    """Fraction of seeds whose band misses the truth at any checked ``(t, v)``.

    ``worst_margin`` is, per seed, the largest ``max(L - truth, truth - U)``
    over all checks; positive entries are violations.
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be at least 1")
    check_times = tuple(sorted(int(t) for t in check_times))
    if not check_times or check_times[0] < 1:
        raise ValueError("check times must be positive")
    horizon = max(generator.horizon, check_times[-1])
    seeds = np.arange(n_seeds, dtype=np.uint64) + np.uint64(generator.seed) if seeds is None else np.asarray(seeds)
    oracle = band.build_oracle()
    if generator.weighted and not oracle.weighted:
        raise ValueError("weighted generators need a weighted oracle")
    grid = np.asarray(grid, dtype=float)
    worst = np.empty(seeds.size)
    for i, seed in enumerate(seeds.tolist()):
        stream = generate(generator.replace(seed=int(seed), horizon=horizon))
        margin = -np.inf
        for t in check_times:
            b = evaluate_band(stream, t, grid, band, oracle)
            truth = stream.truth(grid, t)
            margin = max(margin, float(np.max(np.maximum(b.lower - truth, truth - b.upper))))
        worst[i] = margin
    failures = int(np.sum(worst > 0))
    lo, hi = _clopper_pearson(failures, seeds.size)
    return CoverageReport(
        n_seeds=int(seeds.size),
        failures=failures,
        fraction=failures / seeds.size,
        ci_low=lo,
        ci_high=hi,
        worst_margin=worst,
        seeds=seeds,
        check_times=check_times,
        n_probes=grid.size,
    )


def time_to_width(
    x: np.ndarray,
    grid,
    target: float,
    times,
    band: BandConfig,
    oracle: PointwiseOracle | None = None,
):
    """First time in ``times`` at which the band's max width is at most ``target``.

    Returns ``(t, width)``, or ``(None, last_width)`` if never reached.
    """
    oracle = oracle or band.build_oracle()
    width = float("nan")
    for t in times:
        t = int(t)
        if t > x.size:
            break
        vc = ValueCounts()
        vc.extend(x[:t])
        width = band_curve(grid, band.alpha, vc, oracle, band.domain, band.schedule).max_width
        if width <= target:
            return t, width
    return None, width
