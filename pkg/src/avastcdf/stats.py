"""Streaming sufficient statistics for the empirical CDF.

Two accumulators are provided:

* :class:`ValueCounts` keeps exact counts per distinct value (the
  unweighted case).
* :class:`WeightedStreamStats` keeps, per distinct value, the number of
  points, the sum and sum of squares of their importance weights, and
  geometric LogApprox buckets over those weights.

Ingestion is O(1) amortized. :meth:`ValueCounts.freeze` and
:meth:`WeightedStreamStats.freeze` sort the distinct values once
(O(t log t)) and return immutable cumulative views that the oracles and
band algorithms query.

Interval conventions: ``count_in(lo, hi)`` counts the half-open interval
``(lo, hi]`` and ``count_in_closed_open(lo, hi)`` counts ``[lo, hi)``.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DEFAULT_GRANULARITY",
    "NonFiniteError",
    "ValueCounts",
    "CountsSnapshot",
    "LogApproxBuckets",
    "WeightedStreamStats",
    "FrozenTailStats",
    "ProcessStats",
    "bucket_edges",
    "bucket_log_wealth",
]

DEFAULT_GRANULARITY = 0.25

_COUNTS_MAGIC = b"AVCC"
_WEIGHTED_MAGIC = b"AVWS"
_SNAPSHOT_VERSION = 1


class NonFiniteError(ValueError, ArithmeticError):
    """A NaN or infinite observation reached the statistics."""


def _check_finite(x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise NonFiniteError(f"non-finite observation {x!r}")
    return x


class _SortedCountsMixin:
    """Count queries over sorted distinct ``values`` with prefix ``cum`` counts.

    ``cum[i]`` is the number of samples among the first ``i`` distinct values.
    """

    values: np.ndarray
    cum: np.ndarray

    @property
    def t(self) -> int:
        return int(self.cum[-1])

    def count_le(self, x):
        return self.cum[np.searchsorted(self.values, x, side="right")]

    def count_lt(self, x):
        return self.cum[np.searchsorted(self.values, x, side="left")]

    def count_in(self, lo, hi):
        """Number of samples in ``(lo, hi]``."""
        return self.count_le(hi) - self.count_le(lo)

    def count_in_closed_open(self, lo, hi):
        """Number of samples in ``[lo, hi)``."""
        return self.count_lt(hi) - self.count_lt(lo)

    def next_above(self, x):
        """Smallest observed value strictly greater than ``x`` (``inf`` if none)."""
        i = np.searchsorted(self.values, x, side="right")
        padded = np.append(self.values, np.inf)
        return padded[i]

    def next_below(self, x):
        """Largest observed value strictly less than ``x`` (``-inf`` if none)."""
        i = np.searchsorted(self.values, x, side="left")
        padded = np.concatenate(([-np.inf], self.values))
        return padded[i]


@dataclass(frozen=True, eq=False)
class CountsSnapshot(_SortedCountsMixin):
    """Immutable sorted view of a :class:`ValueCounts`."""

    values: np.ndarray
    cum: np.ndarray

    def __post_init__(self):
        self.values.setflags(write=False)
        self.cum.setflags(write=False)

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.cum)


class ValueCounts:
    """Exact multiset of observed values.

    >>> vc = ValueCounts()
    >>> vc.update(0.25); vc.update(0.25); vc.update(0.5)
    >>> vc.count_in(0.25, 0.5)
    1
    """

    def __init__(self):
        self._counts: dict[float, int] = {}
        self.total = 0
        self._snapshot: CountsSnapshot | None = None

    def __len__(self):
        return self.total

    def update(self, x: float) -> "ValueCounts":
        x = _check_finite(x) + 0.0  # folds -0.0 onto 0.0
        self._counts[x] = self._counts.get(x, 0) + 1
        self.total += 1
        self._snapshot = None
        return self

    def extend(self, xs) -> "ValueCounts":
        xs = np.asarray(xs, dtype=float).ravel()
        if xs.size == 0:
            return self
        if not np.all(np.isfinite(xs)):
            raise NonFiniteError("non-finite observation in batch")
        uniq, cnt = np.unique(xs + 0.0, return_counts=True)
        counts = self._counts
        for v, c in zip(uniq.tolist(), cnt.tolist()):
            counts[v] = counts.get(v, 0) + c
        self.total += int(xs.size)
        self._snapshot = None
        return self

    @property
    def entries(self) -> list[tuple[float, int]]:
        return sorted(self._counts.items())

    def freeze(self) -> CountsSnapshot:
        if self._snapshot is None:
            if self._counts:
                keys = np.fromiter(self._counts.keys(), dtype=float, count=len(self._counts))
                vals = np.fromiter(self._counts.values(), dtype=np.int64, count=len(self._counts))
                order = np.argsort(keys, kind="stable")
                values = keys[order]
                cum = np.concatenate(([0], np.cumsum(vals[order])))
            else:
                values = np.empty(0)
                cum = np.zeros(1, dtype=np.int64)
            self._snapshot = CountsSnapshot(values, cum.astype(np.int64))
        return self._snapshot

    def count_in(self, lo: float, hi: float) -> int:
        """Number of samples in ``(lo, hi]``."""
        if lo > hi:
            raise ValueError("need lo <= hi")
        return int(self.freeze().count_in(lo, hi))

    def count_le(self, x: float) -> int:
        return int(self.freeze().count_le(x))

    # Snapshot layout (little-endian):
    #   magic "AVCC" | u32 version | u64 n_distinct | u64 total
    #   | f64[n] values (ascending) | u64[n] counts
    def to_bytes(self) -> bytes:
        snap = self.freeze()
        buf = io.BytesIO()
        buf.write(_COUNTS_MAGIC)
        buf.write(struct.pack("<IQQ", _SNAPSHOT_VERSION, snap.values.size, self.total))
        buf.write(snap.values.astype("<f8").tobytes())
        buf.write(snap.counts.astype("<u8").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "ValueCounts":
        if data[:4] != _COUNTS_MAGIC:
            raise ValueError("not a ValueCounts snapshot")
        version, n, total = struct.unpack_from("<IQQ", data, 4)
        if version != _SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        off = 4 + struct.calcsize("<IQQ")
        values = np.frombuffer(data, dtype="<f8", count=n, offset=off)
        counts = np.frombuffer(data, dtype="<u8", count=n, offset=off + 8 * n)
        out = cls()
        out._counts = dict(zip(values.tolist(), (int(c) for c in counts)))
        out.total = int(total)
        if out.total != int(counts.sum()):
            raise ValueError("corrupt snapshot: total does not match counts")
        return out


# positive values below this are bucketed as zeros (edges would underflow)
MIN_BUCKETED = 1e-280


def bucket_index(z, k: float = DEFAULT_GRANULARITY):
    """Exponent ``n`` with ``(1+k)^n <= z < (1+k)^(n+1)`` for positive ``z``."""
    z = np.asarray(z, dtype=float)
    base = 1.0 + k
    n = np.floor(np.log(z) / np.log(base)).astype(np.int64)
    # repair floating-point misses at the edges
    lo = base ** n.astype(float)
    n = np.where(lo > z, n - 1, n)
    hi = base ** (n + 1).astype(float)
    n = np.where(hi <= z, n + 1, n)
    return n


def bucket_edges(n, k: float = DEFAULT_GRANULARITY):
    """Lower and upper bucket edges ``(z_l, z_u)`` for exponents ``n``."""
    z_l = (1.0 + k) ** np.asarray(n, dtype=float)
    return z_l, (1.0 + k) * z_l


def interpolation_weight(z, k: float = DEFAULT_GRANULARITY):
    """Bucket exponent and interpolation weight ``alpha = (z_u - z)/(z_u - z_l)``."""
    n = bucket_index(z, k)
    z_l, z_u = bucket_edges(n, k)
    return n, (z_u - z) / (z_u - z_l)


class LogApproxBuckets:
    """Geometric bucket statistics over nonnegative values.

    Each positive value ``z`` in bucket ``[z_l, z_u)`` contributes
    ``alpha`` to ``a``, ``1 - alpha`` to ``b`` and ``alpha (1 - alpha)`` to
    ``c``; zeros are counted separately.
    """

    def __init__(self, k: float = DEFAULT_GRANULARITY):
        if not k > 0:
            raise ValueError("granularity k must be positive")
        self.k = float(k)
        self.zero_count = 0
        self.buckets: dict[int, list[float]] = {}

    def add(self, z: float) -> None:
        z = float(z)
        if z < 0 or not math.isfinite(z):
            raise ValueError("bucketed values must be finite and nonnegative")
        if z < MIN_BUCKETED:
            # rounding down keeps the wealth bound valid: f is increasing in z
            self.zero_count += 1
            return
        n, alpha = interpolation_weight(z, self.k)
        n, alpha = int(n), float(alpha)
        acc = self.buckets.setdefault(n, [0.0, 0.0, 0.0])
        acc[0] += alpha
        acc[1] += 1.0 - alpha
        acc[2] += alpha * (1.0 - alpha)

    def merge(self, other: "LogApproxBuckets") -> "LogApproxBuckets":
        if other.k != self.k:
            raise ValueError("cannot merge buckets with different granularity")
        out = LogApproxBuckets(self.k)
        out.zero_count = self.zero_count + other.zero_count
        for src in (self.buckets, other.buckets):
            for n, (a, b, c) in src.items():
                acc = out.buckets.setdefault(n, [0.0, 0.0, 0.0])
                acc[0] += a
                acc[1] += b
                acc[2] += c
        return out

    @property
    def count(self) -> float:
        return self.zero_count + sum(a + b for a, b, _ in self.buckets.values())

    def as_arrays(self):
        ns = np.array(sorted(self.buckets), dtype=np.int64)
        abc = np.array([self.buckets[n] for n in ns.tolist()], dtype=float).reshape(-1, 3)
        return ns, abc

    def log_wealth_bound(self, lam: float, yhat: float) -> float:
        """Lower bound on ``sum_s log(1 + lam (z_s - yhat))`` from the buckets."""
        ns, abc = self.as_arrays()
        val = bucket_log_wealth(lam, yhat, ns, abc[:, 0], abc[:, 1], abc[:, 2], self.zero_count, self.k)
        return float(val)


def bucket_log_wealth(lam, yhat, ns, a, b, c, zero_count, k: float = DEFAULT_GRANULARITY):
    """Concavity lower bound on ``sum_s log(1 + lam (z_s - yhat))``.

    ``ns`` are bucket exponents (last axis of ``a``, ``b``, ``c``); ``lam``
    and ``yhat`` broadcast against the leading axes. Each bucket uses
    ``f(z) >= alpha f(z_l) + (1-alpha) f(z_u) + alpha (1-alpha) m / 2`` where
    ``m = (k z_l lam / (1 + lam (z_u - yhat)))^2`` is the strong-concavity
    constant of ``f`` on ``[z_l, z_u]``.
    """
    lam = np.asarray(lam, dtype=float)[..., None]
    yhat = np.asarray(yhat, dtype=float)[..., None]
    z_l, z_u = bucket_edges(ns, k)
    f_l = np.log1p(lam * (z_l - yhat))
    f_u = np.log1p(lam * (z_u - yhat))
    curv = (k * z_l * lam / (1.0 + lam * (z_u - yhat))) ** 2
    body = np.sum(a * f_l + b * f_u + 0.5 * c * curv, axis=-1)
    return body + np.asarray(zero_count) * np.log1p(-lam[..., 0] * yhat[..., 0])


@dataclass
class _ValueAcc:
    count: int = 0
    sum_w: float = 0.0
    sum_w_sq: float = 0.0
    buckets: LogApproxBuckets = field(default_factory=LogApproxBuckets)


class WeightedStreamStats:
    """Per-distinct-value importance-weighted accumulators.

    >>> ws = WeightedStreamStats()
    >>> ws.update(1.1, 0.3)
    >>> acc = ws.at(0.3).buckets.buckets[0]
    >>> [round(v, 12) for v in acc]
    [0.6, 0.4, 0.24]
    """

    def __init__(self, k: float = DEFAULT_GRANULARITY):
        if not k > 0:
            raise ValueError("granularity k must be positive")
        self.k = float(k)
        self._acc: dict[float, _ValueAcc] = {}
        self.total = 0
        self.total_w = 0.0
        self.total_w_sq = 0.0

    def __len__(self):
        return self.total

    def at(self, x: float) -> _ValueAcc:
        return self._acc[float(x) + 0.0]

    @property
    def values(self) -> list[float]:
        return sorted(self._acc)

    def update(self, w: float, x: float) -> "WeightedStreamStats":
        w = _check_finite(w)
        x = _check_finite(x) + 0.0
        if w < 0:
            raise ValueError("importance weights must be nonnegative")
        acc = self._acc.get(x)
        if acc is None:
            acc = self._acc[x] = _ValueAcc(buckets=LogApproxBuckets(self.k))
        acc.count += 1
        acc.sum_w += w
        acc.sum_w_sq += w * w
        acc.buckets.add(w)
        self.total += 1
        self.total_w += w
        self.total_w_sq += w * w
        return self

    def extend(self, ws, xs) -> "WeightedStreamStats":
        ws = np.asarray(ws, dtype=float).ravel()
        xs = np.asarray(xs, dtype=float).ravel()
        if ws.shape != xs.shape:
            raise ValueError("weights and values must have the same length")
        for w, x in zip(ws.tolist(), xs.tolist()):
            self.update(w, x)
        return self

    @classmethod
    def from_counts(cls, counts: ValueCounts, k: float = DEFAULT_GRANULARITY) -> "WeightedStreamStats":
        """Unit-weight statistics equivalent to an unweighted stream."""
        out = cls(k)
        for x, c in counts.entries:
            for _ in range(c):
                out.update(1.0, x)
        return out

    def freeze(self) -> "FrozenTailStats":
        return FrozenTailStats.build(self)

    # Snapshot layout (little-endian):
    #   magic "AVWS" | u32 version | f64 k | u64 n_distinct
    #   then per value, ascending: f64 x | u64 count | f64 sum_w | f64 sum_w_sq
    #   | u64 zero_count | u64 n_buckets | n_buckets * (i64 n | f64 a | f64 b | f64 c)
    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        buf.write(_WEIGHTED_MAGIC)
        buf.write(struct.pack("<IdQ", _SNAPSHOT_VERSION, self.k, len(self._acc)))
        for x in self.values:
            acc = self._acc[x]
            bk = acc.buckets
            buf.write(struct.pack("<dQddQQ", x, acc.count, acc.sum_w, acc.sum_w_sq, bk.zero_count, len(bk.buckets)))
            for n in sorted(bk.buckets):
                buf.write(struct.pack("<qddd", n, *bk.buckets[n]))
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "WeightedStreamStats":
        if data[:4] != _WEIGHTED_MAGIC:
            raise ValueError("not a WeightedStreamStats snapshot")
        version, k, n_values = struct.unpack_from("<IdQ", data, 4)
        if version != _SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        out = cls(k)
        off = 4 + struct.calcsize("<IdQ")
        head = struct.Struct("<dQddQQ")
        rec = struct.Struct("<qddd")
        for _ in range(n_values):
            x, count, sw, sw2, zc, nb = head.unpack_from(data, off)
            off += head.size
            bk = LogApproxBuckets(k)
            bk.zero_count = zc
            for _ in range(nb):
                n, a, b, c = rec.unpack_from(data, off)
                off += rec.size
                bk.buckets[n] = [a, b, c]
            out._acc[x] = _ValueAcc(count, sw, sw2, bk)
            out.total += count
            out.total_w += sw
            out.total_w_sq += sw2
        return out


@dataclass(frozen=True)
class ProcessStats:
    """Statistics of a nonnegative process ``Y_1..Y_t`` (vectorized over queries).

    ``a``, ``b``, ``c`` have bucket exponents ``ns`` on their last axis;
    ``zeros`` counts the ``Y_s = 0`` terms.
    """

    t: int
    sum_y: np.ndarray
    sum_y_sq: np.ndarray
    zeros: np.ndarray
    ns: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    k: float = DEFAULT_GRANULARITY

    @classmethod
    def from_samples(cls, ys, k: float = DEFAULT_GRANULARITY, ns=None) -> "ProcessStats":
        """Build statistics for a single process directly from its samples."""
        ys = np.asarray(ys, dtype=float)
        bk = LogApproxBuckets(k)
        for y in ys.tolist():
            bk.add(y)
        own_ns, abc = bk.as_arrays()
        if ns is None:
            ns = own_ns
        full = np.zeros((len(ns), 3))
        pos = {int(n): i for i, n in enumerate(np.asarray(ns).tolist())}
        for n, row in zip(own_ns.tolist(), abc):
            full[pos[n]] = row
        return cls(
            t=int(ys.size),
            sum_y=np.array([ys.sum()]),
            sum_y_sq=np.array([(ys * ys).sum()]),
            zeros=np.array([bk.zero_count]),
            ns=np.asarray(ns, dtype=np.int64),
            a=full[None, :, 0],
            b=full[None, :, 1],
            c=full[None, :, 2],
            k=k,
        )


@dataclass(frozen=True, eq=False)
class FrozenTailStats(_SortedCountsMixin):
    """Cumulative statistics over the sorted distinct values.

    Row ``i`` of each ``prefix_*`` array aggregates the points at the first
    ``i`` distinct values (``X <= values[i-1]``); row ``i`` of ``suffix_*``
    aggregates the rest (``X > values[i-1]``). Bucket arrays have one column
    per exponent in ``ns``.
    """

    values: np.ndarray
    cum: np.ndarray
    k: float
    ns: np.ndarray
    prefix_w: np.ndarray
    prefix_w_sq: np.ndarray
    prefix_zero: np.ndarray
    prefix_abc: np.ndarray
    suffix_w: np.ndarray
    suffix_w_sq: np.ndarray
    suffix_zero: np.ndarray
    suffix_abc: np.ndarray

    @classmethod
    def build(cls, stats: WeightedStreamStats) -> "FrozenTailStats":
        xs = np.array(stats.values, dtype=float)
        m = xs.size
        all_ns = sorted({n for x in xs.tolist() for n in stats.at(x).buckets.buckets})
        ns = np.array(all_ns, dtype=np.int64)
        col = {n: j for j, n in enumerate(all_ns)}
        count = np.zeros(m, dtype=np.int64)
        sw = np.zeros(m)
        sw2 = np.zeros(m)
        zero = np.zeros(m, dtype=np.int64)
        abc = np.zeros((m, len(all_ns), 3))
        for i, x in enumerate(xs.tolist()):
            acc = stats.at(x)
            count[i] = acc.count
            sw[i] = acc.sum_w
            sw2[i] = acc.sum_w_sq
            zero[i] = acc.buckets.zero_count
            for n, row in acc.buckets.buckets.items():
                abc[i, col[n]] = row

        return cls._from_columns(xs, count, sw, sw2, zero, ns, abc, stats.k)

    @classmethod
    def from_counts(cls, snap: CountsSnapshot, k: float = DEFAULT_GRANULARITY) -> "FrozenTailStats":
        """Unit-weight view of an unweighted stream."""
        count = np.asarray(snap.cum[1:] - snap.cum[:-1], dtype=np.int64)
        n0 = int(bucket_index(1.0, k))
        lo, hi = bucket_edges(n0, k)
        alpha = (hi - 1.0) / (hi - lo)
        abc = np.zeros((count.size, 1, 3))
        abc[:, 0, 0] = alpha * count
        abc[:, 0, 1] = (1.0 - alpha) * count
        abc[:, 0, 2] = alpha * (1.0 - alpha) * count
        w = count.astype(float)
        zero = np.zeros(count.size, dtype=np.int64)
        ns = np.array([n0], dtype=np.int64)
        return cls._from_columns(np.array(snap.values, dtype=float), count, w, w, zero, ns, abc, k)

    @classmethod
    def _from_columns(cls, xs, count, sw, sw2, zero, ns, abc, k) -> "FrozenTailStats":
        def prefix(arr):
            z = np.zeros((1,) + arr.shape[1:], dtype=arr.dtype)
            return np.concatenate((z, np.cumsum(arr, axis=0)))

        def suffix(arr):
            z = np.zeros((1,) + arr.shape[1:], dtype=arr.dtype)
            return np.concatenate((np.cumsum(arr[::-1], axis=0)[::-1], z))

        frozen = cls(
            values=xs,
            cum=prefix(count),
            k=k,
            ns=ns,
            prefix_w=prefix(sw),
            prefix_w_sq=prefix(sw2),
            prefix_zero=prefix(zero),
            prefix_abc=prefix(abc),
            suffix_w=suffix(sw),
            suffix_w_sq=suffix(sw2),
            suffix_zero=suffix(zero),
            suffix_abc=suffix(abc),
        )
        for arr in frozen.__dict__.values():
            if isinstance(arr, np.ndarray):
                arr.setflags(write=False)
        return frozen

    def index_le(self, rho):
        return np.searchsorted(self.values, rho, side="right")

    def below(self, rho) -> ProcessStats:
        """Statistics of ``Y_s = W_s 1{X_s <= rho}`` for each ``rho``."""
        i = np.atleast_1d(self.index_le(rho))
        t = self.t
        abc = self.prefix_abc[i]
        return ProcessStats(
            t=t,
            sum_y=self.prefix_w[i],
            sum_y_sq=self.prefix_w_sq[i],
            zeros=(t - self.cum[i]) + self.prefix_zero[i],
            ns=self.ns,
            a=abc[..., 0],
            b=abc[..., 1],
            c=abc[..., 2],
            k=self.k,
        )

    def above(self, rho) -> ProcessStats:
        """Statistics of ``Y_s = W_s 1{X_s > rho}`` for each ``rho``."""
        i = np.atleast_1d(self.index_le(rho))
        abc = self.suffix_abc[i]
        return ProcessStats(
            t=self.t,
            sum_y=self.suffix_w[i],
            sum_y_sq=self.suffix_w_sq[i],
            zeros=self.cum[i] + self.suffix_zero[i],
            ns=self.ns,
            a=abc[..., 0],
            b=abc[..., 1],
            c=abc[..., 2],
            k=self.k,
        )

    @property
    def total_w(self) -> float:
        return float(self.prefix_w[-1])
