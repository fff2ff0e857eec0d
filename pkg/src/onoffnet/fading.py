"""Channel power gains: fading distributions and seeded sampling.

Gains are power gains. "Rayleigh" therefore means unit-mean exponential
gains with pdf ``exp(-x)``; amplitude-domain sampling is not offered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from onoffnet.errors import ConfigurationError, DomainError, EmptyNetworkError, UnderflowError

RAYLEIGH = "rayleigh"
EXPONENTIAL = "exponential"
TABLE = "table"
KINDS = (RAYLEIGH, EXPONENTIAL, TABLE)


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus a stream index.

    Each ``(seed, stream)`` pair maps to an independent Philox substream
    through ``SeedSequence(seed, spawn_key=(stream,))``, so trial ``t`` can
    run on any worker and still draw the same numbers.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.stream < 0:
            raise ConfigurationError(f"stream index must be nonnegative, got {self.stream}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, stream: int) -> "SeedSpec":
        return SeedSpec(self.seed, stream)


@dataclass(frozen=True, eq=False)
class FadingSpec:
    """I.i.d. fading law for every channel power gain.

    ``kind`` is one of ``"rayleigh"`` (Exp(1)), ``"exponential"`` (Exp with
    mean ``mean``) or ``"table"``, a monotone inverse-cdf table given as
    matching arrays ``table_u`` (probabilities from 0 to 1) and ``table_x``
    (gains), linearly interpolated.
    """

    kind: str = RAYLEIGH
    mean: float = 1.0
    table_u: Optional[tuple] = None
    table_x: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown fading kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == RAYLEIGH and self.mean != 1.0:
            raise ConfigurationError("rayleigh fading has unit mean; use kind='exponential'")
        if self.kind == EXPONENTIAL and not (math.isfinite(self.mean) and self.mean > 0):
            raise ConfigurationError(f"exponential mean must be positive and finite, got {self.mean}")
        if self.kind == TABLE:
            self._check_table()
            object.__setattr__(self, "mean", _table_moments(self._u, self._x)[0])

    def _check_table(self):
        if self.table_u is None or self.table_x is None:
            raise ConfigurationError("table fading needs both table_u and table_x")
        u = np.asarray(self.table_u, dtype=float)
        x = np.asarray(self.table_x, dtype=float)
        if u.ndim != 1 or u.shape != x.shape or u.size < 2:
            raise ConfigurationError("table_u and table_x must be 1-d arrays of equal length >= 2")
        if u[0] != 0.0 or u[-1] != 1.0 or np.any(np.diff(u) <= 0):
            raise ConfigurationError("table_u must increase strictly from 0 to 1")
        if not np.all(np.isfinite(x)) or x[0] < 0 or np.any(np.diff(x) < 0):
            raise ConfigurationError("table_x must be finite, nonnegative and nondecreasing")
        if x[-1] <= 0:
            raise ConfigurationError("table fading must have positive mean")
        object.__setattr__(self, "_u", u)
        object.__setattr__(self, "_x", x)

    @classmethod
    def rayleigh(cls) -> "FadingSpec":
        return cls(RAYLEIGH)

    @classmethod
    def exponential(cls, mean: float) -> "FadingSpec":
        return cls(EXPONENTIAL, mean=float(mean))

    @classmethod
    def from_table(cls, u, x) -> "FadingSpec":
        return cls(TABLE, table_u=tuple(float(v) for v in u), table_x=tuple(float(v) for v in x))

    @property
    def is_exponential(self) -> bool:
        return self.kind in (RAYLEIGH, EXPONENTIAL)

    @property
    def variance(self) -> float:
        if self.is_exponential:
            return self.mean**2
        return _table_moments(self._u, self._x)[1]

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == EXPONENTIAL:
            d["mean"] = self.mean
        if self.kind == TABLE:
            d["table_u"] = list(self.table_u)
            d["table_x"] = list(self.table_x)
        return d

    def __eq__(self, other):
        if not isinstance(other, FadingSpec):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_exponential:
            return np.where(x >= 0, np.exp(-x / self.mean) / self.mean, 0.0)
        # density of a piecewise-linear quantile function is piecewise constant
        du, dx = np.diff(self._u), np.diff(self._x)
        seg = np.clip(np.searchsorted(self._x, x, side="right") - 1, 0, du.size - 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            dens = np.where(dx[seg] > 0, du[seg] / dx[seg], 0.0)
        return np.where((x >= self._x[0]) & (x < self._x[-1]), dens, 0.0)

    def cdf(self, x):
        return 1.0 - self.ccdf(x)

    def ccdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_exponential:
            return np.exp(-np.maximum(x, 0.0) / self.mean)
        return 1.0 - np.interp(x, self._x, self._u, left=0.0, right=1.0)

    def log_ccdf(self, x: float) -> float:
        """``log(1 - F(x))``, exact in the exponential case for any x."""
        if self.is_exponential:
            return -max(x, 0.0) / self.mean
        q = float(self.ccdf(x))
        return math.log(q) if q > 0 else -math.inf

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if self.is_exponential:
            return -self.mean * np.log1p(-u)
        return np.interp(u, self._u, self._x)

    def upper_quantile(self, log_q: float) -> float:
        """Gain x with ``log(1 - F(x)) = log_q`` (log domain, for huge n)."""
        if self.is_exponential:
            return -self.mean * log_q
        return float(self.quantile(-math.expm1(log_q)))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.is_exponential:
            return self.mean * rng.standard_exponential(size)
        return np.interp(rng.random(size), self._u, self._x)


def _table_moments(u: np.ndarray, x: np.ndarray) -> tuple[float, float]:
    # exact integrals of a piecewise-linear quantile function over [0, 1]
    du = np.diff(u)
    a, b = x[:-1], x[1:]
    m1 = float(np.sum(du * (a + b) / 2))
    m2 = float(np.sum(du * (a * a + a * b + b * b) / 3))
    return m1, max(m2 - m1 * m1, 0.0)


def sample_gain_matrix(spec: FadingSpec, n: int, seed: SeedSpec) -> np.ndarray:
    """Draw an ``n x n`` matrix of i.i.d. gains; entry ``[j, i]`` is ``g_ji``.

    Row-major draws from the ``seed`` substream, so the same
    ``(spec, n, seed)`` always gives a bit-identical matrix.
    """
    if n < 1:
        raise EmptyNetworkError(f"network needs at least one link, got n={n}")
    return spec.sample(seed.generator(), (n, n))


def iter_gain_rows(spec: FadingSpec, n: int, seed: SeedSpec, block: int = 1024):
    """Yield ``(row_start, rows)`` blocks of the same matrix ``sample_gain_matrix`` draws.

    Lets callers stream an ``n x n`` matrix that would not fit in memory.
    """
    if n < 1:
        raise EmptyNetworkError(f"network needs at least one link, got n={n}")
    rng = seed.generator()
    for start in range(0, n, block):
        stop = min(start + block, n)
        yield start, spec.sample(rng, (stop - start, n))


def gain_ccdf(spec: FadingSpec, x: float) -> float:
    """``q_x = 1 - F(x)``, the probability that a gain exceeds ``x``."""
    if x < 0:
        raise DomainError(f"gain level must be nonnegative, got {x}")
    return float(spec.ccdf(x))


def sample_truncated_gain(spec: FadingSpec, floor: float, seed, size=None):
    """Draw gains conditioned on exceeding ``floor``.

    ``seed`` may be a :class:`SeedSpec` or an existing generator. Exponential
    laws use memorylessness (``floor + Exp``); tables invert the conditional
    cdf. Returns a float when ``size`` is None.
    """
    if floor < 0:
        raise DomainError(f"truncation floor must be nonnegative, got {floor}")
    rng = seed.generator() if isinstance(seed, SeedSpec) else seed
    if spec.is_exponential:
        if math.exp(spec.log_ccdf(floor)) == 0.0:
            raise UnderflowError(f"P(g > {floor}) is numerically zero")
        out = floor + spec.mean * rng.standard_exponential(size)
        # a zero exponential draw would sit on the floor
        out = np.maximum(out, np.nextafter(floor, np.inf))
    else:
        q = gain_ccdf(spec, floor)
        if q <= 0:
            raise UnderflowError(f"P(g > {floor}) is numerically zero")
        f = 1.0 - q
        v = 1.0 - rng.random(size)  # in (0, 1]
        out = np.maximum(spec.quantile(f + q * v), np.nextafter(floor, np.inf))
    return float(out) if size is None else out
