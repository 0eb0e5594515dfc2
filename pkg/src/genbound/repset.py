"""Representative-set grids over the count space and their covering checks.

Three constructions are provided:

``FULL_CUBE``
    Split each of the first ``m - 1`` count coordinates of ``[0, n]`` into
    ``t`` cells of side ``n / t``.  At most ``t**(m-1)`` cells.
``SIMPLEX``
    Same grid, but only the ``S_{m-1}(t)`` cells under the simplex
    ``sum(counts) <= n`` are counted.
``TYPICAL``
    An ``m``-dimensional cube of side ``2 sqrt(n log n)`` centred on
    ``n * P_Z``, split into ``t`` parts per coordinate; only cells holding a
    strongly typical type are kept.

Each kept cell contributes one representative: the cell's centre atom,
moved to the nearest valid type the cell owns.  Grids are built by
enumerating every type, so they are intended for verification-sized
problems (see :data:`genbound.typespace.DEFAULT_TYPE_CAP`).
"""
from __future__ import annotations

import dataclasses
import enum
import json
import math
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

from genbound import typespace as ts
from genbound.errors import DomainError, ValidationError

# Float slack when placing a count on the typical-cube grid.
_EDGE = 1e-9


class GridVariant(str, enum.Enum):
    FULL_CUBE = "full_cube"
    SIMPLEX = "simplex"
    TYPICAL = "typical"

    def __str__(self):
        return self.value


@dataclasses.dataclass(frozen=True, eq=False)
class GridSpec:
    n: int
    m: int
    t: int
    variant: GridVariant
    cell_side: float
    delta_t: int
    representatives: tuple[ts.CountVector, ...]
    cells: tuple[tuple[int, ...], ...]
    raw_cell_count: int
    prior: ts.SourceDistribution | None = None

    @property
    def M(self) -> int:
        return len(self.representatives)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "t": self.t,
            "variant": str(self.variant),
            "cell_side": self.cell_side,
            "delta_t": self.delta_t,
            "M": self.M,
            "raw_cell_count": self.raw_cell_count,
            "representatives": [list(r.counts) for r in self.representatives],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    def rep_for_cell(self, cell: tuple[int, ...]) -> ts.CountVector | None:
        try:
            return self.representatives[self.cells.index(cell)]
        except ValueError:
            return None


def _lattice_cell(x: int, n: int, t: int) -> int:
    """Cell of count ``x`` on ``[0, n]`` split in ``t``; boundaries go to the lower cell."""
    if x == 0:
        return 0
    return -(-x * t // n) - 1


def _center_atom(lo: float, hi: float, n: int) -> int:
    """Centre atom of the cell ``[lo, hi]`` on the integer lattice ``0..n``.

    With an odd number of atoms this is the middle one; with an even number
    the cell is enlarged by one atom (downward when it would leave
    ``[0, n]``) and the centre of the enlarged cell is taken.
    """
    a = max(math.ceil(lo - _EDGE), 0)
    b = min(math.floor(hi + _EDGE), n)
    if a > b:
        return min(max(round((lo + hi) / 2), 0), n)
    if (b - a + 1) % 2 == 1:
        return (a + b) // 2
    if b + 1 <= n:
        return (a + b + 1) // 2
    return (a - 1 + b) // 2


def _pick(candidates: list[tuple[int, ...]], center: np.ndarray) -> tuple[int, ...]:
    """Candidate closest to ``center`` in L1; ties go lexicographically first."""
    arr = np.asarray(candidates, dtype=np.int64)
    cost = np.abs(arr - center[None, :]).sum(axis=1)
    best = cost.min()
    return min(c for c, v in zip(candidates, cost) if v == best)


def simplex_cells_exact(m: int, t: int) -> int:
    """S_{m-1}(t) = (t + m - 2)! / ((m - 1)! (t - 1)!), the number of cells under the simplex."""
    return math.comb(t + m - 2, m - 1)


def delta_for(n: int, t: int, variant: GridVariant) -> int:
    if variant is GridVariant.TYPICAL:
        return math.ceil(2.0 * math.sqrt(n * math.log(n)) / t) + 1
    return -(-n // t) + 1


def build_grid(
    n: int,
    m: int,
    t: int,
    variant: GridVariant | str = GridVariant.FULL_CUBE,
    prior: ts.SourceDistribution | None = None,
    cap: int = ts.DEFAULT_TYPE_CAP,
) -> GridSpec:
    """Construct the representative set for grid parameter ``t``.

    ``prior`` centres the typical cube and is required for ``TYPICAL``
    (it defaults to uniform there).
    """
    variant = GridVariant(variant)
    if m < 2:
        raise ValueError("m must be >= 2")
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 1 <= t <= n:
        raise ValueError(f"t must lie in 1..{n}, got {t}")
    if variant is GridVariant.TYPICAL:
        return _build_typical(n, m, t, prior or ts.SourceDistribution.uniform(m), cap)

    types = ts.type_array(n, m, cap=cap)
    groups: dict[tuple[int, ...], list[tuple[int, ...]]] = {}
    for row in map(tuple, types.tolist()):
        cell = tuple(_lattice_cell(x, n, t) for x in row[:-1])
        groups.setdefault(cell, []).append(row)

    cells = sorted(groups)
    reps = []
    side = n / t
    for cell in cells:
        center = [_center_atom(j * side, (j + 1) * side, n) for j in cell]
        center.append(n - sum(center))
        reps.append(ts.CountVector(_pick(groups[cell], np.asarray(center))))

    raw = t ** (m - 1) if variant is GridVariant.FULL_CUBE else simplex_cells_exact(m, t)
    return GridSpec(
        n=n,
        m=m,
        t=t,
        variant=variant,
        cell_side=side,
        delta_t=delta_for(n, t, variant),
        representatives=tuple(reps),
        cells=tuple(cells),
        raw_cell_count=raw,
    )


def _typical_cell(row, lo, side, t):
    return tuple(min(max(math.ceil((x - l) / side - _EDGE) - 1, 0), t - 1) for x, l in zip(row, lo))


def _build_typical(n, m, t, prior, cap):
    if n < 2:
        raise DomainError("the typical grid needs n >= 2")
    if prior.m != m:
        raise ValidationError(f"prior has {prior.m} symbols, expected {m}")
    spec = ts.TypicalSetSpec.default(n)
    radius = math.sqrt(n * math.log(n))
    side = 2.0 * radius / t
    lo = [n * p - radius for p in prior.probs]

    groups: dict[tuple[int, ...], list[tuple[int, ...]]] = {}
    for row in map(tuple, ts.type_array(n, m, cap=cap).tolist()):
        if not ts.is_strongly_typical(row, prior, spec):
            continue
        groups.setdefault(_typical_cell(row, lo, side, t), []).append(row)

    cells = sorted(groups)
    reps = []
    for cell in cells:
        center = [_center_atom(l + j * side, l + (j + 1) * side, n) for l, j in zip(lo, cell)]
        reps.append(ts.CountVector(_pick(groups[cell], np.asarray(center))))
    return GridSpec(
        n=n,
        m=m,
        t=t,
        variant=GridVariant.TYPICAL,
        cell_side=side,
        delta_t=delta_for(n, t, GridVariant.TYPICAL),
        representatives=tuple(reps),
        cells=tuple(cells),
        raw_cell_count=len(reps),
        prior=prior,
    )


class Nearest(NamedTuple):
    rep: ts.CountVector | None
    dist: int | None
    covered: bool


def cell_of(s, g: GridSpec) -> tuple[int, ...]:
    counts = tuple(s)
    if g.variant is GridVariant.TYPICAL:
        radius = math.sqrt(g.n * math.log(g.n))
        lo = [g.n * p - radius for p in g.prior.probs]
        return _typical_cell(counts, lo, g.cell_side, g.t)
    return tuple(_lattice_cell(x, g.n, g.t) for x in counts[:-1])


def nearest_representative(s, g: GridSpec) -> Nearest:
    """Representative of the cell owning ``s`` and its dataset distance.

    For the typical grid an atypical ``s`` is reported as not covered.
    """
    counts = tuple(s)
    if len(counts) != g.m or sum(counts) != g.n:
        raise ValidationError(f"{counts} is not a type with n={g.n}, m={g.m}")
    if g.variant is GridVariant.TYPICAL and not ts.is_strongly_typical(
        counts, g.prior, ts.TypicalSetSpec.default(g.n)
    ):
        return Nearest(None, None, False)
    rep = g.rep_for_cell(cell_of(counts, g))
    if rep is None:  # pragma: no cover - every owned type has a kept cell
        raise ValidationError(f"{counts} is outside every kept cell")
    return Nearest(rep, ts.dataset_distance(counts, rep), True)


def covering_radius_bound(g: GridSpec) -> float:
    """Distance ceiling the theorem proofs use for the owning representative."""
    if g.variant is GridVariant.TYPICAL:
        return g.m * math.sqrt(g.n * math.log(g.n)) / g.t
    return (g.m - 1) * g.n / g.t


def covering_radius(g: GridSpec) -> int:
    """Largest representative distance over every covered type (exhaustive)."""
    worst = 0
    for row in ts.iter_type_tuples(g.n, g.m):
        hit = nearest_representative(row, g)
        if hit.covered:
            worst = max(worst, hit.dist)
    return worst


class SimplexCellCount(NamedTuple):
    exact: int | None
    upper: float | None
    log_exact: float
    log_upper: float


def simplex_cell_count(m: int, t: int) -> SimplexCellCount:
    """Exact count of cells under the simplex and its closed-form ceiling.

    ``exact = (t + m - 2)! / ((m - 1)! (t - 1)!)`` and
    ``upper = (t + (m - 2) / 2)**(m - 1) / (m - 1)!``.  The linear values are
    ``None`` when they do not fit a double; the logs are always returned.
    """
    if m < 2 or t < 1:
        raise ValueError("need m >= 2 and t >= 1")
    k = m - 1
    log_exact = float(gammaln(t + m - 1) - gammaln(m) - gammaln(t))
    log_upper = k * math.log(t + (m - 2) / 2) - float(gammaln(m))
    exact = simplex_cells_exact(m, t) if log_exact < 700 else None
    upper = math.exp(log_upper) if log_upper < 700 else None
    return SimplexCellCount(exact, upper, log_exact, log_upper)


class NeighborCheck(NamedTuple):
    max_min_distance: int
    delta_t: int

    @property
    def ok(self) -> bool:
        return self.max_min_distance <= self.delta_t


def neighbor_distance_check(g: GridSpec) -> NeighborCheck | None:
    """Worst distance from a representative to its nearest other representative.

    Returns ``None`` (not applicable) for single-representative grids.
    """
    if g.M < 2:
        return None
    reps = np.asarray([r.counts for r in g.representatives], dtype=np.int64)
    d = ts.distance_matrix(reps).astype(float)
    np.fill_diagonal(d, np.inf)
    return NeighborCheck(int(d.min(axis=1).max()), g.delta_t)
