"""Time- and value-uniform CDF bands built from pointwise oracles.

A band at probe value ``v`` is the running minimum (upper side) or maximum
(lower side) of oracle bounds at grid points ``rho_d`` that approach ``v`` as
the depth ``d`` grows. Each grid point at depth ``d`` receives its own error
budget, and the budgets over the whole countable family sum to the side's
``alpha``. The depth loop stops as soon as no sample lies between ``v`` and
``rho_d``: past that point the empirical counts are unchanged while budgets
keep shrinking, so no later depth can tighten the bound.

Because the stopping rule depends only on counts, all queries for a grid of
probe values are planned up front, deduplicated, and evaluated by the oracle
in a single batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .oracles import PointwiseOracle

__all__ = [
    "DepthSchedule",
    "BandPoint",
    "AtomSpec",
    "Band",
    "QueryPlan",
    "plan_queries",
    "upper_unit",
    "lower_unit",
    "upper_real_line",
    "lower_real_line",
    "band_with_atoms",
    "monotonize",
    "band_curve",
    "REAL_LINE_WEIGHT",
]

# 3 / (pi^2 - 3): normalizes sum_{k in Z} (1 + |k|)^-2 to one
REAL_LINE_WEIGHT = 3.0 / (math.pi**2 - 3.0)

DOMAINS = ("unit", "real")


@dataclass(frozen=True)
class DepthSchedule:
    """Dyadic-style refinement: spacing ``eta^-d`` with geometric budgets.

    ``max_depth`` caps the loop; stopping early only loosens a bound.
    """

    eta: int = 2
    max_depth: int = 64

    def __post_init__(self):
        if not (isinstance(self.eta, (int, np.integer)) and self.eta >= 2):
            raise ValueError("eta must be an integer >= 2")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")

    def cells(self, d: int) -> int:
        return self.eta**d

    def spacing(self, d: int) -> float:
        return float(self.eta) ** -d

    def unit_budget(self, alpha: float, d: int) -> float:
        return alpha / float(self.eta) ** (2 * d)

    def real_budget(self, alpha: float, d: int, k):
        return alpha / 2.0**d * REAL_LINE_WEIGHT / (1.0 + np.abs(k)) ** 2


@dataclass(frozen=True)
class BandPoint:
    v: float
    lower: float
    upper: float
    depth_terminated: int
    oracle_kind: str

    def __post_init__(self):
        if not 0.0 <= self.lower <= self.upper <= 1.0:
            raise ValueError(f"invalid band point lower={self.lower} upper={self.upper}")


@dataclass(frozen=True)
class AtomSpec:
    """Known discrete atoms ``(v_i, zeta_i)`` of the reference measure."""

    atoms: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        masses = [z for _, z in self.atoms]
        if any(z <= 0 for z in masses):
            raise ValueError("atom masses must be positive")
        if sum(masses) > 1 + 1e-12:
            raise ValueError("atom masses must sum to at most one")
        if any(a < b for a, b in zip(masses, masses[1:])):
            raise ValueError("atoms must be sorted by nonincreasing mass")

    @classmethod
    def from_pairs(cls, pairs) -> "AtomSpec":
        ordered = sorted(((float(v), float(z)) for v, z in pairs), key=lambda p: -p[1])
        return cls(tuple(ordered))

    @property
    def continuous_mass(self) -> float:
        return max(0.0, 1.0 - sum(z for _, z in self.atoms))


@dataclass(frozen=True)
class QueryPlan:
    """Oracle queries for a batch of probe values on one side.

    Query ``j`` belongs to probe ``owner[j]`` and was issued at depth
    ``depth[j]``. ``stop_depth`` is the depth at which each probe's loop
    terminated (0 when the answer is trivial without any query).
    """

    owner: np.ndarray
    rho: np.ndarray
    delta: np.ndarray
    depth: np.ndarray
    stop_depth: np.ndarray
    trivial: np.ndarray


def _counts_le(snap, x):
    return np.asarray(snap.count_le(x), dtype=np.int64)


def _counts_lt(snap, x):
    return np.asarray(snap.count_lt(x), dtype=np.int64)


def _shift_toward_origin(snap, k, scale, side):
    """Move grid index ``k`` toward 0 while ``#{X <= k/scale}`` is unchanged."""
    vals = snap.values
    k = k.copy()
    if vals.size == 0:
        return k
    if side == "upper":
        neg = k < 0
        if neg.any():
            rho = k[neg] / scale
            i = np.searchsorted(vals, rho, side="right")
            nxt = np.where(i < vals.size, vals[np.minimum(i, vals.size - 1)], np.inf)
            cand = np.where(np.isfinite(nxt), np.ceil(scale * nxt) - 1.0, 0.0)
            # guard against rounding in scale * nxt
            cand = np.where(np.isfinite(nxt) & (cand / scale >= nxt), cand - 1.0, cand)
            k[neg] = np.maximum(k[neg], np.minimum(0.0, cand))
    else:
        pos = k > 0
        if pos.any():
            rho = k[pos] / scale
            i = np.searchsorted(vals, rho, side="right")
            prev = np.where(i > 0, vals[np.maximum(i - 1, 0)], -np.inf)
            cand = np.where(np.isfinite(prev), np.ceil(scale * prev), 0.0)
            cand = np.where(np.isfinite(prev) & (cand / scale < prev), cand + 1.0, cand)
            k[pos] = np.minimum(k[pos], np.maximum(0.0, cand))
    return k


def plan_queries(
    snap,
    v,
    alpha: float,
    side: str,
    domain: str = "unit",
    schedule: DepthSchedule | None = None,
    extra_depth: int = 0,
    origin_shift: bool = True,
) -> QueryPlan:
    """Plan every oracle query the depth loop issues for each probe in ``v``.

    ``extra_depth`` keeps querying that many levels past the stopping depth
    (used to audit that early termination loses nothing).
    """
    if side not in ("upper", "lower"):
        raise ValueError("side must be 'upper' or 'lower'")
    if domain not in DOMAINS:
        raise ValueError(f"domain must be one of {DOMAINS}")
    schedule = schedule or DepthSchedule()
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if np.any(np.isnan(v)):
        raise ValueError("probe values must not be NaN")
    n = v.size
    trivial = np.zeros(n, dtype=bool)
    if domain == "unit":
        trivial = v > 1 if side == "upper" else v < 0
        vq = np.clip(v, 0.0, 1.0)
    else:
        trivial = ~np.isfinite(v)
        vq = np.where(trivial, 0.0, v)
    if alpha >= 1:
        trivial = np.ones(n, dtype=bool)

    stop = np.zeros(n, dtype=np.int64)
    remaining = np.where(trivial, -1, extra_depth)
    stopped = trivial.copy()
    owners, rhos, deltas, depths = [], [], [], []
    idx_all = np.arange(n)
    eta = float(schedule.eta)
    if side == "upper":
        below_v = _counts_le(snap, vq)
    else:
        below_v = _counts_lt(snap, vq)

    for d in range(1, schedule.max_depth + 1):
        live = (~stopped) | (remaining > 0)
        live &= ~trivial
        if not live.any():
            break
        idx = idx_all[live]
        scale = eta**d
        x = scale * vq[idx]
        if domain == "unit":
            if side == "upper":
                k = np.maximum(1.0, np.ceil(x))
            else:
                k = np.minimum(scale - 1.0, np.floor(x))
            delta = np.full(idx.size, schedule.unit_budget(alpha, d))
        else:
            k = np.ceil(x) if side == "upper" else np.floor(x)
            if origin_shift:
                k = _shift_toward_origin(snap, k, scale, side)
            delta = schedule.real_budget(alpha, d, k)
        rho = k / scale
        owners.append(idx)
        rhos.append(rho)
        deltas.append(delta)
        depths.append(np.full(idx.size, d, dtype=np.int64))

        # spend the extra-depth allowance of already stopped probes
        was_stopped = stopped[idx]
        remaining[idx[was_stopped]] -= 1
        fresh = idx[~was_stopped]
        if fresh.size:
            r = rho[~was_stopped]
            if side == "upper":
                between = _counts_le(snap, r) - below_v[fresh]
            else:
                between = below_v[fresh] - _counts_lt(snap, r)
            done = between == 0
            stopped[fresh[done]] = True
            stop[fresh[done]] = d
    # probes that hit the depth cap
    capped = ~stopped & ~trivial
    stop[capped] = schedule.max_depth

    cat = lambda parts, dt: np.concatenate(parts) if parts else np.zeros(0, dtype=dt)  # noqa: E731
    return QueryPlan(
        owner=cat(owners, np.int64),
        rho=cat(rhos, float),
        delta=cat(deltas, float),
        depth=cat(depths, np.int64),
        stop_depth=stop,
        trivial=trivial,
    )


def _evaluate_plan(snap, oracle: PointwiseOracle, plan: QueryPlan, n: int, side: str):
    if side == "upper":
        out = np.ones(n)
    else:
        out = np.zeros(n)
    spent = np.zeros(n)
    if plan.rho.size == 0:
        return out, spent
    pairs = np.stack([plan.rho, plan.delta], axis=1)
    uniq, inv = np.unique(pairs, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    if side == "upper":
        vals = oracle.upper_many(snap, uniq[:, 0], uniq[:, 1])
        np.minimum.at(out, plan.owner, vals[inv])
    else:
        vals = oracle.lower_many(snap, uniq[:, 0], uniq[:, 1])
        np.maximum.at(out, plan.owner, vals[inv])
    np.add.at(spent, plan.owner, plan.delta)
    return np.clip(out, 0.0, 1.0), spent


def _side(v, alpha, stats, oracle, side, domain, schedule, extra_depth=0):
    snap = oracle.prepare(stats)
    if snap.t < 1:
        raise ValueError("band queries need at least one observation")
    v = np.atleast_1d(np.asarray(v, dtype=float))
    plan = plan_queries(snap, v, alpha, side, domain, schedule, extra_depth)
    vals, spent = _evaluate_plan(snap, oracle, plan, v.size, side)
    return vals, plan.stop_depth, spent


def upper_unit(v, alpha, stats, oracle, schedule=None, extra_depth: int = 0) -> float:
    """Upper band at ``v`` for data supported on ``[0, 1]``."""
    return float(_side([v], alpha, stats, oracle, "upper", "unit", schedule, extra_depth)[0][0])


def lower_unit(v, alpha, stats, oracle, schedule=None, extra_depth: int = 0) -> float:
    """Lower band at ``v`` for data supported on ``[0, 1]``."""
    return float(_side([v], alpha, stats, oracle, "lower", "unit", schedule, extra_depth)[0][0])


def upper_real_line(v, alpha, stats, oracle, schedule=None, extra_depth: int = 0) -> float:
    """Upper band at ``v`` for data on the whole real line."""
    return float(_side([v], alpha, stats, oracle, "upper", "real", schedule, extra_depth)[0][0])


def lower_real_line(v, alpha, stats, oracle, schedule=None, extra_depth: int = 0) -> float:
    """Lower band at ``v`` for data on the whole real line."""
    return float(_side([v], alpha, stats, oracle, "lower", "real", schedule, extra_depth)[0][0])


@dataclass(frozen=True)
class Band:
    """Band envelopes over a probe grid at a single time ``t``."""

    t: int
    alpha: float
    v: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    empirical: np.ndarray
    depth_lower: np.ndarray
    depth_upper: np.ndarray
    spent_lower: np.ndarray
    spent_upper: np.ndarray
    oracle_kind: str
    domain: str = "unit"
    monotone: bool = field(default=False)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def max_width(self) -> float:
        return float(np.max(self.width)) if self.width.size else 0.0

    @property
    def depth_used(self) -> np.ndarray:
        return np.maximum(self.depth_lower, self.depth_upper)

    @property
    def points(self) -> list[BandPoint]:
        return [
            BandPoint(float(v), float(lo), float(hi), int(d), self.oracle_kind)
            for v, lo, hi, d in zip(self.v, self.lower, self.upper, self.depth_used)
        ]

    def covers(self, truth) -> np.ndarray:
        truth = np.asarray(truth, dtype=float)
        return (self.lower <= truth) & (truth <= self.upper)


def monotonize(points):
    """Suffix-min of uppers and prefix-max of lowers.

    Accepts a list of :class:`BandPoint` (sorted by ``v``) or a :class:`Band`.
    """
    if isinstance(points, Band):
        b = points
        upper = np.minimum.accumulate(b.upper[::-1])[::-1]
        lower = np.maximum.accumulate(b.lower)
        return Band(
            t=b.t,
            alpha=b.alpha,
            v=b.v,
            lower=lower,
            upper=upper,
            empirical=b.empirical,
            depth_lower=b.depth_lower,
            depth_upper=b.depth_upper,
            spent_lower=b.spent_lower,
            spent_upper=b.spent_upper,
            oracle_kind=b.oracle_kind,
            domain=b.domain,
            monotone=True,
        )
    points = list(points)
    vs = [p.v for p in points]
    if any(a > b for a, b in zip(vs, vs[1:])):
        raise ValueError("points must be sorted by v")
    if not points:
        return []
    upper = np.minimum.accumulate(np.array([p.upper for p in points])[::-1])[::-1]
    lower = np.maximum.accumulate(np.array([p.lower for p in points]))
    return [
        BandPoint(p.v, float(lo), float(hi), p.depth_terminated, p.oracle_kind)
        for p, lo, hi in zip(points, lower, upper)
    ]


def _empirical(snap, oracle, v):
    if oracle.weighted and hasattr(snap, "below"):
        return np.minimum(1.0, snap.below(v).sum_y / snap.t)
    return _counts_le(snap, v) / snap.t


def band_curve(
    grid,
    alpha: float,
    stats,
    oracle: PointwiseOracle,
    domain: str = "unit",
    schedule: DepthSchedule | None = None,
    atoms: AtomSpec | None = None,
    monotone: bool = True,
) -> Band:
    """Evaluate both envelopes on a sorted grid, spending ``alpha/2`` per side."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a nonempty 1-d sequence")
    if np.any(np.diff(grid) < 0):
        raise ValueError("grid must be sorted")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    snap = oracle.prepare(stats)
    if snap.t < 1:
        raise ValueError("band queries need at least one observation")
    # a total budget of one admits the trivial band
    half = 1.0 if alpha >= 1 else alpha / 2.0
    if atoms is not None and atoms.atoms:
        up, du, su = _atoms_side(snap, grid, half, oracle, atoms, "upper", domain, schedule)
        lo, dl, sl = _atoms_side(snap, grid, half, oracle, atoms, "lower", domain, schedule)
    else:
        up, du, su = _side(grid, half, snap, oracle, "upper", domain, schedule)
        lo, dl, sl = _side(grid, half, snap, oracle, "lower", domain, schedule)
    band = Band(
        t=snap.t,
        alpha=alpha,
        v=grid,
        lower=lo,
        upper=up,
        empirical=_empirical(snap, oracle, grid),
        depth_lower=dl,
        depth_upper=du,
        spent_lower=sl,
        spent_upper=su,
        oracle_kind=oracle.kind,
        domain=domain,
    )
    return monotonize(band) if monotone else band


def _atoms_side(snap, v, alpha, oracle, atoms: AtomSpec, side, domain, schedule):
    """One side of the atom-augmented band for each probe in ``v``."""
    cont_alpha = atoms.continuous_mass * alpha
    if cont_alpha > 0:
        vals, depth, spent = _side(v, cont_alpha, snap, oracle, side, domain, schedule)
    else:
        vals = np.ones(v.size) if side == "upper" else np.zeros(v.size)
        depth = np.zeros(v.size, dtype=np.int64)
        spent = np.zeros(v.size)
    at_v = _counts_le(snap, v) if side == "upper" else _counts_lt(snap, v)
    done = np.zeros(v.size, dtype=bool)
    for a_v, zeta in atoms.atoms:
        budget = zeta * alpha
        if side == "upper":
            usable = (a_v >= v) & ~done
        else:
            usable = (a_v <= v) & ~done
        if not usable.any():
            continue
        idx = np.flatnonzero(usable)
        rho = np.full(idx.size, a_v)
        delta = np.full(idx.size, budget)
        if side == "upper":
            bound = oracle.upper_many(snap, rho, delta)
            vals[idx] = np.minimum(vals[idx], bound)
            between = _counts_le(snap, a_v) - at_v[idx]
        else:
            bound = oracle.lower_many(snap, rho, delta)
            vals[idx] = np.maximum(vals[idx], bound)
            between = at_v[idx] - _counts_lt(snap, a_v)
        spent[idx] += budget
        # later atoms carry less budget and cannot see fewer counts
        done[idx[between == 0]] = True
    return vals, depth, spent


def band_with_atoms(v, alpha, stats, oracle, atoms: AtomSpec, domain: str = "unit", schedule=None) -> BandPoint:
    """Band point at ``v`` with explicit pointwise bounds at known atoms."""
    snap = oracle.prepare(stats)
    grid = np.array([float(v)])
    half = alpha / 2.0
    up, du, _ = _atoms_side(snap, grid, half, oracle, atoms, "upper", domain, schedule)
    lo, dl, _ = _atoms_side(snap, grid, half, oracle, atoms, "lower", domain, schedule)
    return BandPoint(float(v), float(lo[0]), float(up[0]), int(max(du[0], dl[0])), oracle.kind)
