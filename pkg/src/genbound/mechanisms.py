"""Discrete permutation-invariant mechanisms and exact information oracles.

A mechanism is stored as a row-stochastic table ``P(w | t)`` whose rows are
indexed by the types of ``n`` samples over ``m`` symbols, in the canonical
lexicographic order of :func:`genbound.typespace.enumerate_types`.  Since the
learning algorithms of interest are permutation invariant, nothing is lost
by conditioning on the type instead of the ordered dataset.
"""
from __future__ import annotations

import dataclasses
import json
import math
from collections.abc import Sequence
from pathlib import Path

import numpy as np
from scipy.special import logsumexp, rel_entr

from genbound import typespace as ts
from genbound.errors import DomainError, EmptySupportError, ValidationError

#: Probabilities below this are treated as exact zeros by the DP audit.
AUDIT_FLOOR = 1e-300

# Row-sum tolerance for tables built in memory vs. tables read from disk.
_BUILD_TOL = 1e-12
_LOAD_TOL = 1e-9


def type_label(counts: Sequence[int]) -> str:
    return ",".join(str(int(c)) for c in counts)


@dataclasses.dataclass(frozen=True)
class PrivacyBudget:
    """Pure-DP level of a mechanism; ``delta`` is carried as metadata only."""

    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValidationError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValidationError(f"delta must lie in [0, 1], got {self.delta}")

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.epsilon)

    def require_pure(self) -> float:
        """Return epsilon, refusing budgets with delta > 0."""
        if self.delta > 0:
            raise DomainError("bounds are only defined for pure DP (delta = 0)")
        return self.epsilon


@dataclasses.dataclass(frozen=True, eq=False)
class MechanismTable:
    """Conditional pmf ``P(w | t)`` over the canonical type ordering.

    Attributes
    ----------
    n, m : int
        Dataset size and alphabet size.
    rows : ndarray, shape (M, |W|)
        One row per type.  Stored read-only.
    labels : tuple of str
        Hypothesis names, one per column.
    """

    n: int
    m: int
    rows: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
        _validate_rows(self.n, self.m, rows, self.labels, _BUILD_TOL)

    @property
    def num_types(self) -> int:
        return self.rows.shape[0]

    @property
    def num_outputs(self) -> int:
        return self.rows.shape[1]

    def types(self) -> np.ndarray:
        return ts.type_array(self.n, self.m)

    def hypothesis_frequencies(self) -> np.ndarray:
        """Parse labels of the form ``"c1,...,cm"`` into relative frequencies.

        Used when each hypothesis is itself a released type, so a loss can be
        evaluated against it.
        """
        out = np.empty((self.num_outputs, self.m))
        for j, label in enumerate(self.labels):
            try:
                counts = [int(x) for x in label.split(",")]
            except ValueError:
                raise ValidationError(f"label {label!r} is not a count vector") from None
            if len(counts) != self.m or sum(counts) <= 0 or min(counts) < 0:
                raise ValidationError(f"label {label!r} is not a count vector over {self.m} symbols")
            out[j] = np.asarray(counts, dtype=float) / sum(counts)
        return out

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "labels": list(self.labels),
            "rows": self.rows.tolist(),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def from_json(cls, obj: dict) -> MechanismTable:
        if not isinstance(obj, dict):
            raise ValidationError("mechanism file must hold a JSON object")
        for key in ("n", "m", "labels", "rows"):
            if key not in obj:
                raise ValidationError(f"missing key {key!r}")
        n, m = obj["n"], obj["m"]
        if not isinstance(n, int) or not isinstance(m, int) or isinstance(n, bool) or isinstance(m, bool):
            raise ValidationError("n and m must be integers")
        if n < 0 or m < 2:
            raise ValidationError(f"need n >= 0 and m >= 2, got n={n}, m={m}")
        labels = obj["labels"]
        if not isinstance(labels, list):
            raise ValidationError("labels must be a list")
        raw = obj["rows"]
        if not isinstance(raw, list):
            raise ValidationError("rows must be a list of lists")
        for i, row in enumerate(raw):
            if not isinstance(row, list):
                raise ValidationError(f"row {i}: not a list")
            if len(row) != len(labels):
                raise ValidationError(f"row {i}: has {len(row)} entries, expected {len(labels)}")
            for j, x in enumerate(row):
                if isinstance(x, bool) or not isinstance(x, (int, float)):
                    raise ValidationError(f"row {i}, column {j}: {x!r} is not a number")
        rows = np.asarray(raw, dtype=float).reshape(len(raw), len(labels))
        _validate_rows(n, m, rows, labels, _LOAD_TOL)
        # renormalize within the load tolerance so downstream sums are exact
        rows = rows / rows.sum(axis=1, keepdims=True)
        return cls(n=n, m=m, rows=rows, labels=tuple(labels))

    @classmethod
    def load(cls, path: str | Path) -> MechanismTable:
        try:
            obj = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_json(obj)


def _validate_rows(n, m, rows, labels, tol):
    expected = ts.type_count(n, m)
    if rows.ndim != 2:
        raise ValidationError("rows must form a 2-D table")
    if rows.shape[0] != expected:
        raise ValidationError(f"expected {expected} rows (one per type of n={n}, m={m}), got {rows.shape[0]}")
    if rows.shape[1] != len(labels):
        raise ValidationError(f"rows have {rows.shape[1]} columns but there are {len(labels)} labels")
    if rows.shape[1] == 0:
        raise ValidationError("hypothesis set is empty")
    bad = ~np.isfinite(rows) | (rows < 0) | (rows > 1)
    if bad.any():
        i, j = map(int, np.argwhere(bad)[0])
        raise ValidationError(f"row {i}, column {j}: entry {float(rows[i, j])!r} outside [0, 1]")
    sums = rows.sum(axis=1)
    off = np.abs(sums - 1.0) > tol
    if off.any():
        i = int(np.argmax(off))
        raise ValidationError(f"row {i}: sums to {float(sums[i])!r}, not 1")


def _table_over_types(n: int, m: int, rows: np.ndarray) -> MechanismTable:
    labels = tuple(type_label(t) for t in ts.iter_type_tuples(n, m))
    return MechanismTable(n=n, m=m, rows=rows, labels=labels)


def make_randomized_response(n: int, m: int, stay_prob: float) -> MechanismTable:
    """Release the true type w.p. ``stay_prob``, otherwise a uniform type."""
    if not 0.0 <= stay_prob <= 1.0:
        raise ValueError("stay_prob must lie in [0, 1]")
    size = ts.type_count(n, m)
    rows = np.full((size, size), (1.0 - stay_prob) / size)
    rows[np.diag_indices(size)] += stay_prob
    return _table_over_types(n, m, rows)


def make_constant_mechanism(n: int, m: int) -> MechanismTable:
    return make_randomized_response(n, m, 0.0)


def make_identity_mechanism(n: int, m: int) -> MechanismTable:
    return make_randomized_response(n, m, 1.0)


def make_exponential_mechanism(n: int, m: int, eps_target: float) -> MechanismTable:
    """Exponential mechanism over types with utility ``-dataset_distance``.

    Sensitivity of the utility is 1, so the result is ``eps_target``-DP.
    """
    if not eps_target > 0:
        raise ValueError("eps_target must be > 0")
    types = ts.type_array(n, m)
    logits = -0.5 * eps_target * ts.distance_matrix(types)
    rows = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
    rows /= rows.sum(axis=1, keepdims=True)
    return _table_over_types(n, m, rows)


MECHANISM_FAMILIES = ("constant", "rr", "exp", "identity")


def make_mechanism(family: str, n: int, m: int, param: float | None = None) -> MechanismTable:
    """Build a battery mechanism by family name."""
    if family == "constant":
        return make_constant_mechanism(n, m)
    if family == "identity":
        return make_identity_mechanism(n, m)
    if family == "rr":
        if param is None:
            raise ValueError("rr needs a stay probability")
        return make_randomized_response(n, m, param)
    if family == "exp":
        if param is None:
            raise ValueError("exp needs a target epsilon")
        return make_exponential_mechanism(n, m, param)
    raise ValueError(f"unknown mechanism family {family!r}; choose from {MECHANISM_FAMILIES}")


def neighbor_pairs(n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs ``(i, j)`` of types at dataset distance exactly 1.

    Both orientations are listed.
    """
    tuples = list(ts.iter_type_tuples(n, m))
    index = {t: i for i, t in enumerate(tuples)}
    left, right = [], []
    for i, t in enumerate(tuples):
        for a in range(m):
            if t[a] == 0:
                continue
            for b in range(m):
                if a == b:
                    continue
                u = list(t)
                u[a] -= 1
                u[b] += 1
                left.append(i)
                right.append(index[tuple(u)])
    return np.asarray(left, dtype=np.intp), np.asarray(right, dtype=np.intp)


def audit_epsilon(mech: MechanismTable) -> PrivacyBudget:
    """Exact pure-DP level: the largest log ratio over neighbors and outputs."""
    left, right = neighbor_pairs(mech.n, mech.m)
    if left.size == 0:
        return PrivacyBudget(0.0)
    p = mech.rows[left]
    q = mech.rows[right]
    p = np.where(p < AUDIT_FLOOR, 0.0, p)
    q = np.where(q < AUDIT_FLOOR, 0.0, q)
    if np.any((p > 0) & (q == 0)):
        return PrivacyBudget(math.inf)
    pos = p > 0
    ratios = np.log(p[pos]) - np.log(q[pos])
    eps = float(ratios.max()) if ratios.size else 0.0
    return PrivacyBudget(max(eps, 0.0))


def group_privacy_kl_bound(k: int, eps: float) -> tuple[float, float]:
    """KL ceilings between output laws of datasets at distance ``k``.

    Returns ``(k eps tanh(k eps / 2), k eps)``.
    """
    if k < 0 or eps < 0:
        raise ValueError("k and eps must be non-negative")
    ke = k * eps
    if ke == 0:
        return 0.0, 0.0
    if math.isinf(ke):
        return math.inf, math.inf
    return ke * math.tanh(ke / 2.0), ke


def exact_kl(p: Sequence[float], q: Sequence[float]) -> float:
    """Relative entropy in nats, with ``0 log 0 = 0`` and ``+inf`` off-support."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("pmfs must share an index set")
    return float(max(rel_entr(p, q).sum(), 0.0))


def type_prior(mech: MechanismTable, pz: ts.SourceDistribution) -> np.ndarray:
    """Probability of each type under i.i.d. sampling from ``pz``."""
    if pz.m != mech.m:
        raise ValidationError(f"prior has {pz.m} symbols, mechanism has {mech.m}")
    return np.exp(ts.type_log_probabilities(mech.types(), pz))


def support_mask(mech: MechanismTable, pz: ts.SourceDistribution) -> np.ndarray:
    """Types that have positive probability under ``pz``."""
    return ts.type_log_probabilities(mech.types(), pz) > -np.inf


def exact_mutual_information(mech: MechanismTable, pz: ts.SourceDistribution) -> float:
    """I(T; W) for the joint law ``P_T(t) P(w | t)``.

    Equals I(S; W) for a permutation-invariant algorithm.
    """
    pt = type_prior(mech, pz)
    pw = pt @ mech.rows
    per_type = rel_entr(mech.rows, pw[None, :]).sum(axis=1)
    live = pt > 0
    return float(max(math.fsum(pt[live] * per_type[live]), 0.0))


def exact_max_leakage(mech: MechanismTable, mask: np.ndarray | None = None) -> float:
    """Maximal leakage ``log sum_w max_{t in mask} P(w | t)``.

    ``mask`` selects the types in the support of the data distribution; by
    default every type is in the support.
    """
    if mask is None:
        mask = np.ones(mech.num_types, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (mech.num_types,):
        raise ValidationError("support mask must have one entry per type")
    if not mask.any():
        raise EmptySupportError("support mask is empty")
    col_max = mech.rows[mask].max(axis=0)
    return float(max(math.log(math.fsum(col_max)), 0.0))


def sum_cover(pmfs: Sequence[Sequence[float]]) -> tuple[float, bool]:
    """Sum of column-wise maxima of ``M`` pmfs, and whether it equals ``M``.

    The sum never exceeds ``M``; it reaches ``M`` exactly when no output has
    positive mass under two different pmfs.
    """
    arr = np.asarray(pmfs, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError("need at least one pmf")
    value = math.fsum(arr.max(axis=0))
    disjoint = bool(((arr > 0).sum(axis=0) <= 1).all())
    return value, disjoint


def mixture_kl_bound_lemma1(
    p: Sequence[float], components: Sequence[Sequence[float]], weights: Sequence[float]
) -> tuple[float, float]:
    """Soft and hard upper bounds on ``KL(p || sum_b w_b Q_b)``.

    Returns
    -------
    soft : float
        ``-log sum_b w_b exp(-KL(p || Q_b))``.
    hard : float
        ``min_b KL(p || Q_b) - log w_b``.  Never smaller than ``soft``.
    """
    w = np.asarray(weights, dtype=float)
    if abs(w.sum() - 1.0) > 1e-12 or np.any(w <= 0):
        raise ValidationError("weights must be positive and sum to 1")
    kls = np.array([exact_kl(p, q) for q in components])
    logw = np.log(w)
    soft = float(-logsumexp(logw - kls))
    hard = float(np.min(kls - logw))
    return soft, hard


@dataclasses.dataclass(frozen=True)
class MixtureSpec:
    """Mixture weights plus overlap coefficients relative to one anchor component."""

    weights: tuple[float, ...]
    alphas: tuple[float, ...]
    anchor: int

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        a = tuple(float(x) for x in self.alphas)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "alphas", a)
        if len(w) != len(a) or not w:
            raise ValidationError("weights and alphas must be non-empty and of equal length")
        if any(x <= 0 for x in w) or abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValidationError("weights must be positive and sum to 1")
        if any(not 0.0 <= x <= 1.0 for x in a):
            raise ValidationError("overlap coefficients must lie in [0, 1]")
        if not 0 <= self.anchor < len(w):
            raise ValidationError("anchor index out of range")
        if a[self.anchor] != 1.0:
            raise ValidationError("the anchor's overlap with itself must be 1")

    @property
    def overlap_mass(self) -> float:
        return math.fsum(w * a for w, a in zip(self.weights, self.alphas))


def overlap_coefficients(components: Sequence[Sequence[float]], anchor: int) -> np.ndarray:
    """Largest ``alpha_b`` with ``Q_b >= alpha_b Q_anchor`` on every event."""
    comps = np.asarray(components, dtype=float)
    qi = comps[anchor]
    on = qi > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = comps[:, on] / qi[on]
    alphas = np.clip(ratios.min(axis=1), 0.0, 1.0)
    alphas[anchor] = 1.0
    return alphas


def dp_overlap_coefficients(
    rep_types: Sequence[Sequence[int]], eps: float, anchor: int
) -> np.ndarray:
    """Group-privacy overlap ``exp(-eps d(s_b, s_anchor))`` for each representative."""
    reps = np.asarray(rep_types, dtype=np.int64)
    d = np.abs(reps - reps[anchor]).sum(axis=1) // 2
    return np.exp(-eps * d.astype(float))


_OVERLAP_TOL = 1e-12


def mixture_kl_bound_lemma2(
    p: Sequence[float], components: Sequence[Sequence[float]], spec: MixtureSpec
) -> float:
    """``KL(p || Q_anchor) - log sum_b w_b alpha_b`` for the overlap mixture.

    Raises
    ------
    ValidationError
        If some claimed ``alpha_b`` exceeds the true overlap, i.e.
        ``Q_b(w) < alpha_b Q_anchor(w)`` for some output ``w``.
    """
    comps = np.asarray(components, dtype=float)
    if comps.shape[0] != len(spec.weights):
        raise ValidationError("one weight per component is required")
    qi = comps[spec.anchor]
    alphas = np.asarray(spec.alphas)
    slack = comps - alphas[:, None] * qi[None, :]
    if np.any(slack < -_OVERLAP_TOL):
        b, w = map(int, np.argwhere(slack < -_OVERLAP_TOL)[0])
        raise ValidationError(
            f"alpha[{b}] = {alphas[b]!r} is too large: Q_{b}({w}) < alpha * Q_anchor({w})"
        )
    return exact_kl(p, qi) - math.log(spec.overlap_mass)
