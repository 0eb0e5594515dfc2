"""Method-of-types combinatorics over a finite alphabet.

A dataset of ``n`` samples from an alphabet of ``m`` symbols is identified
with its count vector (how many times each symbol occurs).  Everything here
works on count vectors; ordered sequences never appear.

All logarithms are natural.
"""
from __future__ import annotations

import dataclasses
import math
from collections.abc import Iterator, Sequence

import numpy as np
from scipy.special import betaln, gammaln

from genbound.errors import CapacityError, DimensionMismatchError, ValidationError

#: Largest number of types any exhaustive routine will materialize.
DEFAULT_TYPE_CAP = 10**7


@dataclasses.dataclass(frozen=True, order=True)
class CountVector:
    """Per-symbol occurrence counts of a dataset (its type, unnormalized)."""

    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if len(counts) < 2:
            raise ValidationError(f"alphabet size must be >= 2, got {len(counts)}")
        if any(c < 0 for c in counts):
            raise ValidationError(f"counts must be non-negative: {counts}")
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def m(self) -> int:
        return len(self.counts)

    def frequencies(self) -> np.ndarray:
        """Relative frequencies; the all-zero type maps to zeros."""
        arr = np.asarray(self.counts, dtype=float)
        return arr / self.n if self.n else arr

    def __iter__(self):
        return iter(self.counts)

    def __len__(self):
        return len(self.counts)

    def __getitem__(self, i):
        return self.counts[i]


@dataclasses.dataclass(frozen=True)
class SourceDistribution:
    """A probability mass function over the alphabet."""

    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        if len(probs) < 2:
            raise ValidationError("alphabet size must be >= 2")
        if any(not (0.0 <= p <= 1.0) for p in probs):
            raise ValidationError(f"probabilities must lie in [0, 1]: {probs}")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValidationError(f"probabilities must sum to 1, got {math.fsum(probs)!r}")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, m: int) -> SourceDistribution:
        return cls((1.0 / m,) * m)

    @property
    def m(self) -> int:
        return len(self.probs)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)


def default_eta(n: int) -> float:
    """Typicality width sqrt(log(n) / n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.sqrt(math.log(n) / n)


@dataclasses.dataclass(frozen=True)
class TypicalSetSpec:
    eta: float
    n: int

    def __post_init__(self):
        if self.eta < 0:
            raise ValidationError("eta must be non-negative")

    @classmethod
    def default(cls, n: int) -> TypicalSetSpec:
        return cls(eta=default_eta(n), n=n)


def type_count(n: int, m: int) -> int:
    """Exact number of types, binom(n + m - 1, m - 1)."""
    return math.comb(n + m - 1, m - 1)


def _check_nm(n: int, m: int) -> None:
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if m < 2:
        raise ValueError(f"m must be >= 2, got {m}")


def _compositions(n: int, m: int) -> Iterator[tuple[int, ...]]:
    if m == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, m - 1):
            yield (first,) + rest


def iter_type_tuples(n: int, m: int) -> Iterator[tuple[int, ...]]:
    """Lexicographically ordered count tuples, without size checks."""
    _check_nm(n, m)
    return _compositions(n, m)


def enumerate_types(n: int, m: int, cap: int = DEFAULT_TYPE_CAP) -> list[CountVector]:
    """All count vectors of ``m`` symbols summing to ``n``, lexicographically.

    Raises
    ------
    CapacityError
        If the number of types exceeds ``cap``.
    """
    _check_nm(n, m)
    size = type_count(n, m)
    if size > cap:
        raise CapacityError(f"{size} types for n={n}, m={m} exceeds the cap of {cap}")
    return [CountVector(c) for c in _compositions(n, m)]


def type_array(n: int, m: int, cap: int = DEFAULT_TYPE_CAP) -> np.ndarray:
    """Same ordering as :func:`enumerate_types`, as an ``(M, m)`` int array."""
    _check_nm(n, m)
    size = type_count(n, m)
    if size > cap:
        raise CapacityError(f"{size} types for n={n}, m={m} exceeds the cap of {cap}")
    return np.array(list(_compositions(n, m)), dtype=np.int64).reshape(size, m)


def type_count_exact_log(n: int, m: int) -> float:
    """log binom(n + m - 1, m - 1).

    Uses the log-beta form; differencing log-gammas loses digits to
    cancellation once n is large.
    """
    _check_nm(n, m)
    k = m - 1
    return float(-math.log(n + k + 1) - betaln(n + 1, k + 1))


def type_count_claim1_log(n: int, m: int) -> float:
    """log of the (n + 1)^(m - 1) ceiling on the number of types."""
    _check_nm(n, m)
    return (m - 1) * math.log1p(n)


def type_count_claim2_log(n: int, m: int) -> float:
    """log of the AM-GM/Stirling ceiling on the number of types.

    With ``k = m - 1`` this is
    ``k * (1 + log((n + (k + 1) / 2) / k)) - log(2 * pi * k) / 2``.
    """
    _check_nm(n, m)
    if n < 1:
        raise ValueError("the ceiling is stated for n >= 1")
    k = m - 1
    return k * (1.0 + math.log((n + (k + 1) / 2.0) / k)) - 0.5 * math.log(2.0 * math.pi * k)


def dataset_distance(a: Sequence[int], b: Sequence[int]) -> int:
    """Minimum number of samples to replace to turn dataset ``a`` into ``b``.

    >>> dataset_distance((3, 0, 0), (0, 0, 3))
    3
    """
    ca, cb = tuple(a), tuple(b)
    if len(ca) != len(cb):
        raise DimensionMismatchError(f"alphabet sizes differ: {len(ca)} vs {len(cb)}")
    if sum(ca) != sum(cb):
        raise DimensionMismatchError(f"sample counts differ: {sum(ca)} vs {sum(cb)}")
    return sum(abs(x - y) for x, y in zip(ca, cb)) // 2


def distance_matrix(types: np.ndarray) -> np.ndarray:
    """Pairwise dataset distances between the rows of an ``(M, m)`` count array."""
    types = np.asarray(types, dtype=np.int64)
    return np.abs(types[:, None, :] - types[None, :, :]).sum(axis=2) // 2


def type_log_probability(t: Sequence[int], pz: SourceDistribution) -> float:
    """Log of the multinomial mass of type ``t`` under i.i.d. sampling from ``pz``."""
    counts = tuple(t)
    if len(counts) != pz.m:
        raise DimensionMismatchError(f"type has {len(counts)} symbols, source has {pz.m}")
    n = sum(counts)
    out = float(gammaln(n + 1))
    for c, p in zip(counts, pz.probs):
        if c == 0:
            continue
        if p == 0.0:
            return -math.inf
        out += c * math.log(p) - float(gammaln(c + 1))
    return out


def type_log_probabilities(types: np.ndarray, pz: SourceDistribution) -> np.ndarray:
    """Vectorized :func:`type_log_probability` over the rows of ``types``."""
    types = np.asarray(types, dtype=np.int64)
    p = pz.as_array()
    if types.shape[1] != p.size:
        raise DimensionMismatchError(f"types have {types.shape[1]} symbols, source has {p.size}")
    n = types.sum(axis=1)
    with np.errstate(divide="ignore"):
        logp = np.log(p)
    # 0 * log 0 contributes nothing
    with np.errstate(invalid="ignore"):
        weighted = np.where(types > 0, types * logp, 0.0)
    return gammaln(n + 1) - gammaln(types + 1).sum(axis=1) + weighted.sum(axis=1)


# Absorbs float rounding in n * p when a count sits exactly on the edge.
_TYPICAL_SLACK = 1e-12


def is_strongly_typical(t: Sequence[int], pz: SourceDistribution, spec: TypicalSetSpec) -> bool:
    counts = tuple(t)
    if len(counts) != pz.m:
        raise DimensionMismatchError(f"type has {len(counts)} symbols, source has {pz.m}")
    n = sum(counts)
    for c, p in zip(counts, pz.probs):
        if p == 0.0:
            if c != 0:
                return False
        elif abs(c / n - p) > spec.eta + _TYPICAL_SLACK:
            return False
    return True


def atypical_mass_bound(n: int, m: int, eta: float | None = None) -> float:
    """Union/Hoeffding ceiling on the probability of drawing an atypical dataset.

    ``eta`` defaults to ``sqrt(log(n) / n)``, which makes the ceiling
    ``2 m / n**2``.  The result is clamped to 1.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if eta is None:
        eta = default_eta(n)
    if eta < 0:
        raise ValueError("eta must be non-negative")
    return min(1.0, 2.0 * m * math.exp(-2.0 * n * eta * eta))
