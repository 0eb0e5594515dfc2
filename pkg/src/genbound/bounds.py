"""Closed-form information bounds for (differentially private) learners.

Every function takes a :class:`BoundQuery` and returns a :class:`BoundReport`
whose ``value`` is in nats.  Bounds with a grid parameter ``t`` are
minimized by exhaustive search over the whole admissible range; ties go to
the smallest ``t``.

Families
--------
MI bounds (ceilings on I(S; W) through a per-dataset KL):
    ``eq8``, ``eq9``, ``thm1``, ``thm2``, ``thm3``
Maximal-leakage bounds:
    ``thm4``, ``thm4_sharp``, ``thm5``, ``ml_baseline``
"""
from __future__ import annotations

import dataclasses
import enum
import math
from collections.abc import Callable
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

from genbound import typespace as ts
from genbound.errors import DomainError, ValidationError
from genbound.mechanisms import PrivacyBudget

# Number of grid parameters evaluated per vectorized block.
_CHUNK = 1 << 20


class BoundFamily(str, enum.Enum):
    EQ8 = "eq8"
    EQ9 = "eq9"
    THM1 = "thm1"
    THM2 = "thm2"
    THM3 = "thm3"
    THM4 = "thm4"
    THM4_SHARP = "thm4_sharp"
    THM5 = "thm5"
    ML_BASELINE = "ml_baseline"

    def __str__(self):
        return self.value


MI_FAMILIES = (BoundFamily.EQ8, BoundFamily.EQ9, BoundFamily.THM1, BoundFamily.THM2, BoundFamily.THM3)
ML_FAMILIES = (BoundFamily.THM4, BoundFamily.THM4_SHARP, BoundFamily.THM5, BoundFamily.ML_BASELINE)
GRID_FAMILIES = (BoundFamily.THM1, BoundFamily.THM2, BoundFamily.THM3)
# Families whose value scales with epsilon and vanishes at epsilon = 0.
EPS_FAMILIES = (
    BoundFamily.EQ9,
    BoundFamily.THM1,
    BoundFamily.THM3,
    BoundFamily.THM5,
    BoundFamily.ML_BASELINE,
)


@dataclasses.dataclass(frozen=True)
class BoundQuery:
    """Problem size, privacy level and loss sub-Gaussian constant."""

    n: int
    m: int
    epsilon: PrivacyBudget = PrivacyBudget(0.0)
    sigma: float = 0.5

    def __post_init__(self):
        if not isinstance(self.epsilon, PrivacyBudget):
            object.__setattr__(self, "epsilon", PrivacyBudget(float(self.epsilon)))
        if self.n < 1:
            raise ValidationError(f"n must be >= 1, got {self.n}")
        if self.m < 2:
            raise ValidationError(f"m must be >= 2, got {self.m}")
        if not self.sigma > 0:
            raise ValidationError(f"sigma must be > 0, got {self.sigma}")
        self.epsilon.require_pure()

    @property
    def eps(self) -> float:
        return self.epsilon.epsilon


@dataclasses.dataclass(frozen=True)
class BoundReport:
    """One evaluated bound.

    ``value`` equals the sum of ``terms`` (evaluated in insertion order).
    """

    family: BoundFamily
    value: float
    argmin_t: int | None = None
    terms: dict[str, float] = dataclasses.field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "family": str(self.family),
            "value_nats": _json_float(self.value),
            "argmin_t": self.argmin_t,
            "terms": {k: _json_float(v) for k, v in self.terms.items()},
        }


def _json_float(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _report(family, terms, argmin_t=None) -> BoundReport:
    value = 0.0
    for v in terms.values():
        value += v
    return BoundReport(family=family, value=value, argmin_t=argmin_t, terms=dict(terms))


def _credit(x):
    """log(1 + e^{-x}) for x >= 0; underflows gracefully to 0."""
    return np.log1p(np.exp(-np.asarray(x, dtype=float)))


def _scalar_credit(x: float) -> float:
    return math.log1p(math.exp(-x))


def _search(objective: Callable[[np.ndarray], np.ndarray], t_max: int) -> int:
    """Smallest minimizer of ``objective`` over ``t = 1..t_max``."""
    best_t, best_v = 1, math.inf
    for lo in range(1, t_max + 1, _CHUNK):
        t = np.arange(lo, min(lo + _CHUNK, t_max + 1), dtype=np.int64)
        vals = objective(t)
        i = int(np.argmin(vals))
        if vals[i] < best_v:
            best_v, best_t = float(vals[i]), int(t[i])
    return best_t


def _saturated(family) -> BoundReport:
    return _report(family, {"saturated": math.inf}, argmin_t=1)


def bound_eq8(q: BoundQuery) -> BoundReport:
    """(m - 1) log(n + 1): the type-counting ceiling for any discrete learner."""
    return _report(BoundFamily.EQ8, {"log_type_count": (q.m - 1) * math.log1p(q.n)})


def bound_eq9(q: BoundQuery) -> BoundReport:
    """(m - 1) log(1 + e eps n), valid for eps <= 1."""
    if q.eps > 1:
        raise DomainError(f"eq9 requires epsilon <= 1, got {q.eps}; use eq8 instead")
    return _report(BoundFamily.EQ9, {"log_cover": (q.m - 1) * math.log1p(math.e * q.eps * q.n)})


def _thm1_terms(n, m, eps, t):
    return {
        "privacy": (m - 1) * eps * n / t,
        "log_cells": (m - 1) * math.log(t),
        "overlap_credit": -_scalar_credit(eps * n) if t >= 2 else 0.0,
    }


def bound_thm1(q: BoundQuery) -> BoundReport:
    """Full-cube representative set with the overlap credit.

    min over t in 1..n of ``(m-1) eps n / t + (m-1) log t - [t>=2] log(1 + e^{-eps n})``.
    """
    n, m, eps = q.n, q.m, q.eps
    if math.isinf(eps):
        return _saturated(BoundFamily.THM1)
    credit = _scalar_credit(eps * n)

    def objective(t):
        tf = t.astype(float)
        return (m - 1) * eps * n / tf + (m - 1) * np.log(tf) - np.where(t >= 2, credit, 0.0)

    t = _search(objective, n)
    return _report(BoundFamily.THM1, _thm1_terms(n, m, eps, t), argmin_t=t)


def thm2_delta(n: int, t: int) -> int:
    """Neighbor-distance ceiling ceil(n / t) + 1 for the simplex grid."""
    return -(-n // t) + 1


def _thm2_terms(n, m, eps, t):
    return {
        "privacy": (m - 1) * eps * n / t,
        "log_cells": (m - 1) * math.log(t + (m - 2) / 2),
        "log_factorial": -float(gammaln(m)),
        "overlap_credit": -_scalar_credit(eps * thm2_delta(n, t)) if t >= 2 else 0.0,
    }


def bound_thm2(q: BoundQuery) -> BoundReport:
    """Simplex-pruned representative set with the overlap credit.

    min over t in 1..n of ``(m-1) eps n / t + (m-1) log(t + (m-2)/2)
    - log((m-1)!) - [t>=2] log(1 + e^{-eps Delta_t})`` with
    ``Delta_t = ceil(n / t) + 1``.
    """
    n, m, eps = q.n, q.m, q.eps
    if math.isinf(eps):
        return _saturated(BoundFamily.THM2)
    log_fact = float(gammaln(m))

    def objective(t):
        tf = t.astype(float)
        delta = (-(-n // t) + 1).astype(float)
        return (
            (m - 1) * eps * n / tf
            + (m - 1) * np.log(tf + (m - 2) / 2)
            - log_fact
            - np.where(t >= 2, _credit(eps * delta), 0.0)
        )

    t = _search(objective, n)
    return _report(BoundFamily.THM2, _thm2_terms(n, m, eps, t), argmin_t=t)


def thm3_t_max(n: int) -> int:
    """Upper end of the grid range, floor(2 sqrt(n log n))."""
    return math.floor(2.0 * math.sqrt(n * math.log(n)))


def thm3_delta(n: int, t: int) -> int:
    return math.ceil(2.0 * math.sqrt(n * math.log(n)) / t) + 1


def _thm3_terms(n, m, eps, t):
    r = math.sqrt(n * math.log(n))
    return {
        "privacy": eps * m * r / t,
        "overlap_credit": -_scalar_credit(eps * thm3_delta(n, t)) if t >= 2 else 0.0,
        "atypical": 2.0 * m * eps / n,
        "log_cells": min(m * math.log(t), math.log(m) + (m - 1) * math.log(t)) if t >= 2 else 0.0,
    }


def bound_thm3(q: BoundQuery) -> BoundReport:
    """Typical-set representative grid; bounds I(S; W) directly.

    min over t in 1..floor(2 sqrt(n log n)) of ``eps m sqrt(n log n) / t
    - [t>=2] log(1 + e^{-eps Delta_t}) + 2 m eps / n
    + [t>=2] min(m log t, log(m t^{m-1}))``.
    """
    n, m, eps = q.n, q.m, q.eps
    if n < 2:
        raise DomainError("n must be >= 2 for thm3")
    if math.isinf(eps):
        return _saturated(BoundFamily.THM3)
    r = math.sqrt(n * math.log(n))
    atypical = 2.0 * m * eps / n

    def objective(t):
        tf = t.astype(float)
        delta = np.ceil(2.0 * r / tf) + 1
        logt = np.log(tf)
        cells = np.minimum(m * logt, math.log(m) + (m - 1) * logt)
        gated = np.where(t >= 2, cells - _credit(eps * delta), 0.0)
        return eps * m * r / tf + atypical + gated

    t = _search(objective, thm3_t_max(n))
    return _report(BoundFamily.THM3, _thm3_terms(n, m, eps, t), argmin_t=t)


def bound_thm4(q: BoundQuery) -> BoundReport:
    """Maximal leakage of any permutation-invariant learner: (m - 1) log(n + 1)."""
    return _report(BoundFamily.THM4, {"log_type_count": (q.m - 1) * math.log1p(q.n)})


def bound_thm4_sharpened(q: BoundQuery) -> BoundReport:
    """Maximal-leakage ceiling using the AM-GM/Stirling count of types."""
    k = q.m - 1
    return _report(
        BoundFamily.THM4_SHARP,
        {
            "stirling_main": k * (1.0 + math.log((q.n + q.m / 2) / k)),
            "stirling_norm": -0.5 * math.log(2.0 * math.pi * k),
        },
    )


def bound_thm5(q: BoundQuery) -> BoundReport:
    """Maximal leakage of an eps-DP learner, eps <= 1.

    ``(m-1) n eps`` when ``eps <= 1/n``; ``(m-1) log(e (n eps + 1))`` above.
    """
    n, m, eps = q.n, q.m, q.eps
    if eps > 1:
        raise DomainError(f"thm5 requires epsilon <= 1, got {eps}")
    if eps <= 1.0 / n:
        return _report(BoundFamily.THM5, {"linear_regime": (m - 1) * n * eps})
    return _report(BoundFamily.THM5, {"log_regime": (m - 1) * (1.0 + math.log1p(n * eps))})


def ml_dp_baseline(q: BoundQuery, w_size: int | None = None) -> BoundReport:
    """min(n eps, log |W|) for an eps-DP mechanism."""
    terms = {"group_privacy": q.n * q.eps if q.eps > 0 else 0.0}
    if w_size is not None:
        if w_size < 1:
            raise ValidationError("w_size must be >= 1")
        log_w = math.log(w_size)
        if log_w < terms["group_privacy"]:
            terms = {"log_outputs": log_w}
    return _report(BoundFamily.ML_BASELINE, terms)


_DISPATCH = {
    BoundFamily.EQ8: bound_eq8,
    BoundFamily.EQ9: bound_eq9,
    BoundFamily.THM1: bound_thm1,
    BoundFamily.THM2: bound_thm2,
    BoundFamily.THM3: bound_thm3,
    BoundFamily.THM4: bound_thm4,
    BoundFamily.THM4_SHARP: bound_thm4_sharpened,
    BoundFamily.THM5: bound_thm5,
}


def evaluate(family: BoundFamily | str, q: BoundQuery, w_size: int | None = None) -> BoundReport:
    family = BoundFamily(family)
    if family is BoundFamily.ML_BASELINE:
        return ml_dp_baseline(q, w_size)
    return _DISPATCH[family](q)


def is_applicable(family: BoundFamily | str, q: BoundQuery) -> bool:
    """Whether ``family`` is defined at ``q`` (no domain error)."""
    family = BoundFamily(family)
    if family in (BoundFamily.EQ9, BoundFamily.THM5):
        return q.eps <= 1
    if family is BoundFamily.THM3:
        return q.n >= 2
    return True


def gen_avg_bound(mi_nats: float, q: BoundQuery) -> float:
    """Expected generalization gap ceiling sqrt(2 sigma^2 I / n), in loss units."""
    if mi_nats < 0:
        raise ValueError("mutual information must be non-negative")
    return math.sqrt(2.0 * q.sigma**2 * mi_nats / q.n)


def _check_eta(eta: float) -> None:
    if not 0.0 < eta < 1.0:
        raise DomainError(f"eta must lie in (0, 1), got {eta}")


def log_gen_tail_bound(ml_nats: float, q: BoundQuery, eta: float) -> float:
    _check_eta(eta)
    return math.log(2.0) + ml_nats - q.n * eta**2 / (2.0 * q.sigma**2)


def gen_tail_bound(ml_nats: float, q: BoundQuery, eta: float) -> float:
    """P(|gen| >= eta) ceiling ``2 exp(L - n eta^2 / (2 sigma^2))``, unclamped."""
    log_value = log_gen_tail_bound(ml_nats, q, eta)
    return math.exp(log_value) if log_value < 709.0 else math.inf


class TailBound(NamedTuple):
    log_value: float
    value: float


def gen_tail_explicit(q: BoundQuery, eta: float) -> TailBound:
    """Tail ceiling with the maximal leakage replaced by the Stirling type count."""
    _check_eta(eta)
    log_value = log_gen_tail_bound(ts.type_count_claim2_log(q.n, q.m), q, eta)
    return TailBound(log_value, math.exp(log_value) if log_value < 709.0 else math.inf)
