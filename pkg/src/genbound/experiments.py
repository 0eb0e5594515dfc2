"""Monte Carlo generalization experiments, the verification battery and figure sweeps.

Experiments use the loss ``l(w, z) = 1 - w(z)``, where ``w`` is the relative
frequency vector of the released type.  The loss lies in ``[0, 1]``, so it is
1/2-sub-Gaussian, and its expectation under ``P_Z`` is an inner product.  The
per-trial gap is therefore exact::

    gen(W, S) = E_{P_Z}[l(W, Z)] - (1/n) sum_i l(W, Z_i) = sum_z w(z) (T_S(z) - P_Z(z))

Every trial draws from its own counter-based stream
(``Philox(SeedSequence(seed, spawn_key=(trial,)))``), so results do not
depend on how trials are scheduled across workers.
"""
from __future__ import annotations

import concurrent.futures as cf
import csv
import dataclasses
import io
import json
import math
import os
from typing import Iterable, Sequence

import numpy as np

from genbound import bounds as bd
from genbound import mechanisms as mc
from genbound import repset as rs
from genbound import typespace as ts
from genbound.errors import CapacityError, DomainError, ValidationError

SIGMA = 0.5
DEFAULT_TOL = 1e-9
BATTERY_MECHANISMS = (
    ("constant", None),
    ("rr", 0.25),
    ("rr", 0.5),
    ("rr", 0.9),
    ("exp", 0.1),
    ("exp", 0.5),
    ("exp", 1.0),
)


def default_jobs() -> int:
    env = os.environ.get("GENBOUND_JOBS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def dumps(obj) -> str:
    """Canonical JSON text: sorted keys, round-trip float repr, non-finite as strings."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=1) + "\n"


# --------------------------------------------------------------------------- checks


@dataclasses.dataclass(frozen=True)
class Check:
    """One inequality ``lhs <= rhs`` with its margin.

    ``asserted`` is False for informational comparisons that are reported
    but never counted as failures.
    """

    name: str
    lhs: float
    rhs: float
    tol: float = DEFAULT_TOL
    asserted: bool = True

    @property
    def slack(self) -> float:
        if math.isinf(self.rhs) and self.rhs > 0 and math.isfinite(self.lhs):
            return math.inf
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs + self.tol

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "passed": self.passed,
            "asserted": self.asserted,
        }


# ----------------------------------------------------------------------- Monte Carlo


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    n: int
    m: int
    family: str = "rr"
    param: float | None = 0.5
    prior: ts.SourceDistribution | None = None
    trials: int = 10_000
    seed: int = 0
    etas: tuple[float, ...] = (0.3,)
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if self.trials < 1:
            raise ValidationError(f"trials must be >= 1, got {self.trials}")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "etas", tuple(float(e) for e in self.etas))
        for e in self.etas:
            if not 0.0 < e < 1.0:
                raise DomainError(f"eta must lie in (0, 1), got {e}")
        if self.prior is None:
            object.__setattr__(self, "prior", ts.SourceDistribution.uniform(self.m))
        elif self.prior.m != self.m:
            raise ValidationError(f"prior has {self.prior.m} symbols, expected {self.m}")

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "family": self.family,
            "param": self.param,
            "prior": list(self.prior.probs),
            "trials": self.trials,
            "seed": self.seed,
            "etas": list(self.etas),
        }


@dataclasses.dataclass(frozen=True)
class GenerationReport:
    config: ExperimentConfig
    mean_gen: float
    se_gen: float
    mean_abs_gen: float
    se_abs_gen: float
    tail_freq: dict[float, float]
    exact_mi: float
    exact_ml: float
    audited_eps: float
    bounds: dict[str, float]
    gen_avg: float
    gen_tail: dict[float, float]
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.asserted)

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "mean_gen": self.mean_gen,
            "se_gen": self.se_gen,
            "mean_abs_gen": self.mean_abs_gen,
            "se_abs_gen": self.se_abs_gen,
            "tail_freq": {repr(k): v for k, v in self.tail_freq.items()},
            "exact_mi": self.exact_mi,
            "exact_ml": self.exact_ml,
            "audited_eps": self.audited_eps,
            "bounds": self.bounds,
            "gen_avg_bound": self.gen_avg,
            "gen_tail_bound": {repr(k): v for k, v in self.gen_tail.items()},
            "checks": [c.to_json() for c in self.checks],
            "passed": self.passed,
        }


def trial_generator(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(trial,))))


def _simulate(lo, hi, seed, n, pz, index, cdf, freqs, out):
    for i in range(lo, hi):
        rng = trial_generator(seed, i)
        counts = rng.multinomial(n, pz)
        row = index[tuple(counts.tolist())]
        w = min(int(np.searchsorted(cdf[row], rng.random(), side="right")), cdf.shape[1] - 1)
        out[i] = float(freqs[w] @ (counts / n - pz))


def simulate_gaps(
    mech: mc.MechanismTable, prior: ts.SourceDistribution, trials: int, seed: int, jobs: int = 1
) -> np.ndarray:
    """Exact ``gen(W, S)`` for each trial, in trial order."""
    index = {t: i for i, t in enumerate(ts.iter_type_tuples(mech.n, mech.m))}
    cdf = np.cumsum(mech.rows, axis=1)
    freqs = mech.hypothesis_frequencies()
    pz = prior.as_array()
    out = np.empty(trials)
    jobs = max(1, min(jobs, trials))
    edges = np.linspace(0, trials, jobs + 1).astype(int)
    args = (seed, mech.n, pz, index, cdf, freqs, out)
    if jobs == 1:
        _simulate(0, trials, *args)
    else:
        with cf.ThreadPoolExecutor(jobs) as pool:
            list(pool.map(lambda k: _simulate(edges[k], edges[k + 1], *args), range(jobs)))
    return out


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    mean = math.fsum(x.tolist()) / x.size
    if x.size < 2:
        return mean, 0.0
    var = math.fsum(((x - mean) ** 2).tolist()) / (x.size - 1)
    return mean, math.sqrt(var / x.size)


def bound_values(q: bd.BoundQuery, w_size: int) -> dict[str, float]:
    """Every applicable bound family at ``q``, keyed by family name."""
    out = {}
    for fam in bd.BoundFamily:
        if bd.is_applicable(fam, q):
            out[fam.value] = bd.evaluate(fam, q, w_size).value
    return out


def oracle_checks(
    mech: mc.MechanismTable, prior: ts.SourceDistribution, tol: float = DEFAULT_TOL
) -> tuple[float, float, float, dict[str, float], list[Check]]:
    """Exact MI, ML and audited eps against every applicable bound."""
    mi = mc.exact_mutual_information(mech, prior)
    ml = mc.exact_max_leakage(mech, mc.support_mask(mech, prior))
    eps = mc.audit_epsilon(mech).epsilon
    q = bd.BoundQuery(mech.n, mech.m, eps, SIGMA)
    values = bound_values(q, mech.num_outputs)
    checks = [Check("mi<=ml", mi, ml, tol)]
    for fam in bd.MI_FAMILIES:
        if fam.value in values:
            checks.append(Check(f"mi<={fam.value}", mi, values[fam.value], tol))
    for fam in bd.ML_FAMILIES:
        if fam.value in values:
            checks.append(Check(f"ml<={fam.value}", ml, values[fam.value], tol))
    return mi, ml, eps, values, checks


def run_monte_carlo(
    cfg: ExperimentConfig, mech: mc.MechanismTable | None = None, jobs: int = 1
) -> GenerationReport:
    """Sample ``(S, W)`` pairs and compare the observed gaps with the information bounds.

    ``mech`` overrides the family/param pair in ``cfg``.
    """
    if ts.type_count(cfg.n, cfg.m) > ts.DEFAULT_TYPE_CAP:
        raise CapacityError(f"type space for n={cfg.n}, m={cfg.m} exceeds the enumeration cap")
    if mech is None:
        mech = mc.make_mechanism(cfg.family, cfg.n, cfg.m, cfg.param)
    elif (mech.n, mech.m) != (cfg.n, cfg.m):
        raise ValidationError("mechanism size does not match the experiment")

    mi, ml, eps, values, checks = oracle_checks(mech, cfg.prior, cfg.tol)
    q = bd.BoundQuery(cfg.n, cfg.m, eps, SIGMA)
    gaps = simulate_gaps(mech, cfg.prior, cfg.trials, cfg.seed, jobs)
    mean_gen, se_gen = _mean_se(gaps)
    mean_abs, se_abs = _mean_se(np.abs(gaps))
    gen_avg = bd.gen_avg_bound(max(mi, 0.0), q)

    checks.append(Check("|mean gen|<=gen_avg+3se", abs(mean_gen), gen_avg + 3 * se_gen, cfg.tol))
    # The mutual-information bound controls |E gen|, not E|gen|; the latter fails for
    # near-independent mechanisms, so it is reported but never asserted.
    checks.append(
        Check("mean |gen|<=gen_avg+3se", mean_abs, gen_avg + 3 * se_abs, cfg.tol, asserted=False)
    )
    tail_freq, gen_tail = {}, {}
    for eta in cfg.etas:
        p_hat = float(np.count_nonzero(np.abs(gaps) >= eta)) / cfg.trials
        bound = bd.gen_tail_bound(ml, q, eta)
        tail_freq[eta], gen_tail[eta] = p_hat, bound
        se = math.sqrt(p_hat * (1.0 - p_hat) / cfg.trials)
        checks.append(Check(f"tail({eta!r})<=min(1,bound)+3se", p_hat, min(1.0, bound) + 3 * se, cfg.tol))

    return GenerationReport(
        config=cfg,
        mean_gen=mean_gen,
        se_gen=se_gen,
        mean_abs_gen=mean_abs,
        se_abs_gen=se_abs,
        tail_freq=tail_freq,
        exact_mi=mi,
        exact_ml=ml,
        audited_eps=eps,
        bounds=values,
        gen_avg=gen_avg,
        gen_tail=gen_tail,
        checks=tuple(checks),
    )


# ------------------------------------------------------------------------- battery


@dataclasses.dataclass(frozen=True)
class BatteryRanges:
    """Instance ranges for :func:`run_verification_battery`."""

    ns: tuple[int, ...] = tuple(range(1, 7))
    ms: tuple[int, ...] = (2, 3)
    mechanisms: tuple[tuple[str, float | None], ...] = BATTERY_MECHANISMS
    combinatorial_n: int = 10
    combinatorial_m: int = 4
    grid_ns: tuple[int, ...] = tuple(range(2, 13))
    grid_ms: tuple[int, ...] = (2, 3)
    lemma_instances: int = 100
    mc_n: int = 6
    mc_trials: int = 2000
    mc_etas: tuple[float, ...] = (0.3, 0.5)
    fig1_points: int = 25

    @classmethod
    def full(cls) -> "BatteryRanges":
        return cls()

    @classmethod
    def quick(cls) -> "BatteryRanges":
        return cls(
            ns=tuple(range(1, 5)),
            combinatorial_n=6,
            grid_ns=tuple(range(2, 9)),
            lemma_instances=20,
            mc_n=4,
            mc_trials=500,
            fig1_points=10,
        )

    @classmethod
    def empty(cls) -> "BatteryRanges":
        return cls(
            ns=(),
            mechanisms=(),
            combinatorial_n=0,
            grid_ns=(),
            lemma_instances=0,
            mc_trials=0,
            fig1_points=0,
        )

    def to_json(self) -> dict:
        return _jsonable(dataclasses.asdict(self))


class _Table:
    """Aggregates checks into one row per inequality with its worst slack."""

    def __init__(self):
        self.rows: dict[str, dict] = {}

    def add(self, group: str, instance: str, check: Check):
        key = f"{group}/{check.name}"
        row = self.rows.setdefault(
            key,
            {"inequality": key, "count": 0, "failures": 0, "worst_slack": math.inf,
             "worst_instance": None, "asserted": check.asserted},
        )
        row["count"] += 1
        row["asserted"] = row["asserted"] or check.asserted
        if check.asserted and not check.passed:
            row["failures"] += 1
        if check.slack < row["worst_slack"] or row["worst_instance"] is None:
            row["worst_slack"] = check.slack
            row["worst_instance"] = instance

    def report(self) -> list[dict]:
        out = []
        for key in sorted(self.rows):
            row = dict(self.rows[key])
            row["passed"] = row["failures"] == 0
            out.append(row)
        return out


def _mechanism_battery(table, ranges, tol, extra):
    mechs = []
    for n in ranges.ns:
        for m in ranges.ms:
            for fam, param in ranges.mechanisms:
                mechs.append((f"{fam}({param}) n={n} m={m}", mc.make_mechanism(fam, n, m, param)))
    mechs.extend((f"extra[{i}] n={x.n} m={x.m}", x) for i, x in enumerate(extra))
    for name, mech in mechs:
        prior = ts.SourceDistribution.uniform(mech.m)
        *_, checks = oracle_checks(mech, prior, tol)
        for c in checks:
            table.add("oracle_dominance", name, c)
        _group_privacy(table, name, mech, tol)
    return mechs


def _group_privacy(table, name, mech, tol):
    eps = mc.audit_epsilon(mech).epsilon
    if not math.isfinite(eps):
        return
    types = mech.types()
    d = ts.distance_matrix(types)
    for i in range(len(types)):
        for j in range(len(types)):
            if i == j:
                continue
            tight, loose = mc.group_privacy_kl_bound(int(d[i, j]), eps)
            kl = mc.exact_kl(mech.rows[i], mech.rows[j])
            table.add("group_privacy", name, Check("kl<=k*eps*tanh(k*eps/2)", kl, tight, tol))
            table.add("group_privacy", name, Check("tanh_form<=k*eps", tight, loose, tol))


def _random_pmf(rng, size):
    x = rng.exponential(size=size)
    return x / x.sum()


def _lemma_chain(table, ranges, seed, tol):
    for k in range(ranges.lemma_instances):
        rng = trial_generator(seed, 10**6 + k)
        size = int(rng.integers(2, 7))
        count = int(rng.integers(1, 5))
        p = _random_pmf(rng, size)
        comps = [_random_pmf(rng, size) for _ in range(count)]
        weights = _random_pmf(rng, count)
        anchor = int(rng.integers(count))
        soft, hard = mc.mixture_kl_bound_lemma1(p, comps, weights)
        alphas = mc.overlap_coefficients(comps, anchor)
        lemma2 = mc.mixture_kl_bound_lemma2(p, comps, mc.MixtureSpec(tuple(weights), tuple(alphas), anchor))
        mixture = np.asarray(weights) @ np.asarray(comps)
        kl = mc.exact_kl(p, mixture)
        inst = f"random[{k}]"
        table.add("lemma_chain", inst, Check("kl<=lemma1_soft", kl, soft, tol))
        table.add("lemma_chain", inst, Check("lemma1_soft<=lemma1_hard", soft, hard, tol))
        table.add("lemma_chain", inst, Check("kl<=lemma2", kl, lemma2, tol))
        table.add("lemma_chain", inst, Check("lemma1_soft<=lemma2", soft, lemma2, tol))
        cover, _ = mc.sum_cover(comps)
        table.add("lemma_chain", inst, Check("cover>=1", 1.0, cover, tol))


def _dp_lemma_chain(table, mechs, tol):
    """Lemma chains on mixtures of DP output laws with group-privacy overlaps."""
    for name, mech in mechs:
        eps = mc.audit_epsilon(mech).epsilon
        if not math.isfinite(eps) or mech.num_types < 2:
            continue
        types = mech.types()
        k = mech.num_types
        weights = np.full(k, 1.0 / k)
        for anchor in range(k):
            p = mech.rows[anchor]
            alphas = np.minimum(mc.dp_overlap_coefficients(types, eps, anchor), 1.0)
            alphas[anchor] = 1.0
            soft, hard = mc.mixture_kl_bound_lemma1(p, mech.rows, weights)
            lemma2 = mc.mixture_kl_bound_lemma2(
                p, mech.rows, mc.MixtureSpec(tuple(weights), tuple(alphas), anchor)
            )
            kl = mc.exact_kl(p, weights @ mech.rows)
            table.add("dp_lemma_chain", name, Check("kl<=lemma1_soft", kl, soft, tol))
            table.add("dp_lemma_chain", name, Check("lemma1_soft<=lemma1_hard", soft, hard, tol))
            table.add("dp_lemma_chain", name, Check("lemma1_soft<=lemma2", soft, lemma2, tol))


def _combinatorial(table, ranges, tol):
    for n in range(1, ranges.combinatorial_n + 1):
        for m in range(2, ranges.combinatorial_m + 1):
            inst = f"n={n} m={m}"
            count = len(ts.enumerate_types(n, m))
            exact = math.comb(n + m - 1, m - 1)
            table.add("combinatorics", inst, Check("|enum|==binom", float(abs(count - exact)), 0.0, 0.0))
            log_exact = math.log(exact)
            claim1 = ts.type_count_claim1_log(n, m)
            table.add("combinatorics", inst, Check("log|T|<=claim1", log_exact, claim1, tol))
            equal = math.isclose(log_exact, claim1, rel_tol=0, abs_tol=1e-12)
            table.add("combinatorics", inst, Check("claim1 tight iff m=2", float(equal != (m == 2)), 0.0, 0.0))
            table.add("combinatorics", inst, Check("log|T|<=claim2", log_exact, ts.type_count_claim2_log(n, m), tol))


def _covering(table, ranges, tol):
    for n in ranges.grid_ns:
        for m in ranges.grid_ms:
            for t in range(1, n + 1):
                for variant in rs.GridVariant:
                    g = rs.build_grid(n, m, t, variant)
                    inst = f"{variant} n={n} m={m} t={t}"
                    table.add("covering", inst, Check(f"{variant}:radius<=bound", rs.covering_radius(g), rs.covering_radius_bound(g), tol))
                    nb = rs.neighbor_distance_check(g)
                    if nb is not None:
                        table.add("covering", inst, Check(f"{variant}:neighbor<=delta_t", nb.max_min_distance, nb.delta_t, tol))
                    if variant is rs.GridVariant.FULL_CUBE:
                        table.add("covering", inst, Check("M<=t^(m-1)", g.M, t ** (m - 1), 0.0))
                    elif variant is rs.GridVariant.SIMPLEX:
                        cnt = rs.simplex_cell_count(m, t)
                        table.add("covering", inst, Check("M<=S(t)", g.M, cnt.exact, 0.0))
                        table.add("covering", inst, Check("S(t)<=S_upper(t)", math.log(cnt.exact), cnt.log_upper, tol))
                    else:
                        table.add("covering", inst, Check("M<=min(t^m,m t^(m-1))", g.M, min(t**m, m * t ** (m - 1)), 0.0))


def fig1_ordering_checks(points: int, tol: float = DEFAULT_TOL) -> list[tuple[str, Check]]:
    """Bound ordering on the fig1 configuration over ``points`` log-spaced eps in [1e-2, 1]."""
    out = []
    best_gap = -math.inf
    for eps in np.logspace(-2, 0, points):
        q = bd.BoundQuery(1000, 2, float(eps), SIGMA)
        v = {f: bd.evaluate(f, q).value for f in ("eq9", "thm1", "thm2", "thm3")}
        inst = f"eps={float(eps)!r}"
        out.append((inst, Check("thm1<=eq9", v["thm1"], v["eq9"], tol)))
        out.append((inst, Check("thm3<=min(thm1,thm2)", v["thm3"], min(v["thm1"], v["thm2"]), tol)))
        best_gap = max(best_gap, v["eq9"] - v["thm1"])
    if points:
        # Strictness: the largest improvement over the grid must be positive.
        out.append(("grid", Check("thm1<eq9 somewhere", 0.0, best_gap, -1e-12)))
    return out


def _strict_improvement(table, ranges, tol):
    for inst, c in fig1_ordering_checks(ranges.fig1_points, tol):
        table.add("fig1_ordering", inst, c)


def _mc_battery(table, ranges, seed, tol, extra):
    if ranges.mc_trials < 1:
        return
    mechs = [
        (f"{fam}({param}) n={ranges.mc_n} m={m}", mc.make_mechanism(fam, ranges.mc_n, m, param))
        for m in ranges.ms
        for fam, param in ranges.mechanisms
    ]
    mechs.extend((f"extra[{i}] n={x.n} m={x.m}", x) for i, x in enumerate(extra))
    for k, (name, mech) in enumerate(mechs):
        try:
            mech.hypothesis_frequencies()
        except ValueError:
            continue  # outputs are not types, so the loss is undefined
        cfg = ExperimentConfig(
            mech.n, mech.m, family="table", param=None, trials=ranges.mc_trials,
            seed=(seed + k) % 2**64, etas=ranges.mc_etas, tol=tol,
        )
        rep = run_monte_carlo(cfg, mech)
        for c in rep.checks:
            if not c.name.startswith(("mi", "ml")):
                table.add("monte_carlo", name, c)


def run_verification_battery(
    ranges: BatteryRanges | None = None,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    extra_mechanisms: Sequence[mc.MechanismTable] = (),
) -> dict:
    """Run every cross-module invariant and return a pass/fail table.

    Failures are table entries, never exceptions.  The report holds no
    timings, so identical arguments give identical JSON.
    """
    ranges = ranges or BatteryRanges.full()
    table = _Table()
    mechs = _mechanism_battery(table, ranges, tol, extra_mechanisms)
    _dp_lemma_chain(table, mechs, tol)
    _lemma_chain(table, ranges, seed, tol)
    _combinatorial(table, ranges, tol)
    _covering(table, ranges, tol)
    _strict_improvement(table, ranges, tol)
    _mc_battery(table, ranges, seed, tol, extra_mechanisms)
    rows = table.report()
    failures = sum(1 for r in rows if not r["passed"])
    return {
        "seed": seed,
        "tolerance": tol,
        "ranges": ranges.to_json(),
        "inequalities": rows,
        "total": len(rows),
        "failures": failures,
        "passed": failures == 0,
    }


# -------------------------------------------------------------------------- sweeps

PRESETS = {"fig1": (10**3, 2), "fig2": (10**7, 10**6)}
SWEEP_FAMILIES = ("eq8", "eq9", "thm1", "thm2", "thm3", "thm4", "thm5")
CSV_HEADER = ("epsilon", "family", "value_nats", "argmin_t")


def eps_grid(lo: float = 1e-3, hi: float = 1.0, points: int = 50) -> np.ndarray:
    """Log-spaced grid; ``lo == hi`` (including 0) gives ``points`` copies of ``lo``."""
    if points < 1:
        raise ValidationError("the grid needs at least one point")
    if lo < 0 or hi < lo:
        raise ValidationError("need 0 <= lo <= hi")
    if lo == hi:
        return np.full(points, float(lo))
    if lo == 0:
        raise ValidationError("a log grid cannot start at 0 unless lo == hi == 0")
    return np.logspace(math.log10(lo), math.log10(hi), points)


@dataclasses.dataclass(frozen=True)
class SweepCell:
    epsilon: float
    family: str
    value: float | None
    argmin_t: int | None


def _sweep_point(n, m, eps, families):
    q = bd.BoundQuery(n, m, float(eps), SIGMA)
    out = []
    for fam in families:
        try:
            r = bd.evaluate(fam, q, None)
            out.append(SweepCell(float(eps), fam, r.value, r.argmin_t))
        except DomainError:
            out.append(SweepCell(float(eps), fam, None, None))
    return out


def sweep_figure(
    n: int,
    m: int,
    grid: Iterable[float],
    families: Sequence[str] = SWEEP_FAMILIES,
    jobs: int = 1,
) -> list[SweepCell]:
    """Evaluate ``families`` at every eps of ``grid``; rows are ordered by eps then family."""
    families = [bd.BoundFamily(f).value for f in families]
    grid = [float(e) for e in grid]
    bd.BoundQuery(n, m)
    if jobs > 1 and len(grid) > 1:
        with cf.ThreadPoolExecutor(jobs) as pool:
            parts = list(pool.map(lambda e: _sweep_point(n, m, e, families), grid))
    else:
        parts = [_sweep_point(n, m, e, families) for e in grid]
    return [cell for part in parts for cell in part]


def sweep_csv(cells: Sequence[SweepCell], scale: float = 1.0) -> str:
    """CSV text with the fixed header; domain-error cells are left empty."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for c in cells:
        w.writerow([
            repr(c.epsilon),
            c.family,
            "" if c.value is None else repr(c.value * scale),
            "" if c.argmin_t is None else c.argmin_t,
        ])
    return buf.getvalue()
