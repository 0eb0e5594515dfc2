import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from genbound import bounds as bd
from genbound import experiments as ex
from genbound import mechanisms as mc
from genbound import typespace as ts
from genbound.errors import CapacityError, DomainError, ValidationError


def _gap_oracle(mech, prior, counts, w):
    """gen = E_P[1 - w(Z)] - mean_i (1 - w(Z_i)), written out symbol by symbol."""
    n = sum(counts)
    freq = mech.hypothesis_frequencies()[w]
    expected = sum(p * (1.0 - freq[z]) for z, p in enumerate(prior.probs))
    empirical = sum(c * (1.0 - freq[z]) for z, c in enumerate(counts)) / n
    return expected - empirical


def test_simulated_gaps_match_loss_definition():
    mech = mc.make_randomized_response(5, 3, 0.4)
    prior = ts.SourceDistribution((0.5, 0.3, 0.2))
    gaps = ex.simulate_gaps(mech, prior, trials=50, seed=3)
    index = {t: i for i, t in enumerate(ts.iter_type_tuples(5, 3))}
    cdf = np.cumsum(mech.rows, axis=1)
    for i in range(50):
        rng = ex.trial_generator(3, i)
        counts = tuple(rng.multinomial(5, prior.as_array()).tolist())
        w = int(np.searchsorted(cdf[index[counts]], rng.random(), side="right"))
        assert gaps[i] == pytest.approx(_gap_oracle(mech, prior, counts, w), abs=1e-14)


def test_gaps_independent_of_worker_count():
    mech = mc.make_exponential_mechanism(4, 2, 0.5)
    prior = ts.SourceDistribution.uniform(2)
    one = ex.simulate_gaps(mech, prior, 301, 11, jobs=1)
    many = ex.simulate_gaps(mech, prior, 301, 11, jobs=4)
    assert np.array_equal(one, many)


def test_identity_gap_is_bounded_by_loss_range():
    gaps = ex.simulate_gaps(mc.make_identity_mechanism(6, 2), ts.SourceDistribution.uniform(2), 500, 0)
    assert np.all(np.abs(gaps) <= 1.0)


def test_constant_mechanism_has_zero_information():
    rep = ex.run_monte_carlo(ex.ExperimentConfig(8, 2, "constant", None, trials=2000, seed=5))
    assert rep.exact_mi == pytest.approx(0.0, abs=1e-12)
    assert rep.exact_ml == pytest.approx(0.0, abs=1e-12)
    assert rep.gen_avg == pytest.approx(0.0, abs=1e-6)
    assert rep.passed
    info = [c for c in rep.checks if c.name.startswith("mean |gen|")]
    assert info and not info[0].asserted and not info[0].passed


def test_identity_tail_example():
    cfg = ex.ExperimentConfig(4, 2, "identity", None, trials=10_000, seed=2, etas=(0.5,))
    rep = ex.run_monte_carlo(cfg)
    assert rep.exact_ml == pytest.approx(math.log(5), rel=1e-12)
    q = bd.BoundQuery(4, 2, math.inf)
    assert rep.gen_tail[0.5] == pytest.approx(bd.gen_tail_bound(math.log(5), q, 0.5))
    assert rep.passed


def test_report_fields_are_consistent():
    rep = ex.run_monte_carlo(ex.ExperimentConfig(10, 2, "rr", 0.5, trials=400, seed=9, etas=(0.3, 0.5)))
    for c in rep.checks:
        assert c.passed == (c.lhs <= c.rhs + c.tol)
    tail = {c.name: c for c in rep.checks if c.name.startswith("tail")}
    for eta, p in rep.tail_freq.items():
        se = math.sqrt(p * (1 - p) / 400)
        assert tail[f"tail({eta!r})<=min(1,bound)+3se"].rhs == pytest.approx(min(1.0, rep.gen_tail[eta]) + 3 * se)
    assert set(rep.to_json()) >= {"mean_abs_gen", "tail_freq", "exact_mi", "exact_ml", "audited_eps", "bounds", "checks"}


def test_seed_determinism():
    cfg = ex.ExperimentConfig(12, 2, "exp", 1.0, trials=500, seed=42)
    assert ex.dumps(ex.run_monte_carlo(cfg).to_json()) == ex.dumps(ex.run_monte_carlo(cfg).to_json())


def test_different_seeds_differ():
    a = ex.run_monte_carlo(ex.ExperimentConfig(12, 2, trials=200, seed=1))
    b = ex.run_monte_carlo(ex.ExperimentConfig(12, 2, trials=200, seed=2))
    assert a.mean_gen != b.mean_gen


@pytest.mark.parametrize("kwargs,err", [
    ({"trials": 0}, ValidationError),
    ({"seed": -1}, ValidationError),
    ({"etas": (1.0,)}, DomainError),
    ({"prior": ts.SourceDistribution.uniform(3)}, ValidationError),
])
def test_config_validation(kwargs, err):
    with pytest.raises(err):
        ex.ExperimentConfig(5, 2, **kwargs)


def test_capacity_error():
    with pytest.raises(CapacityError):
        ex.run_monte_carlo(ex.ExperimentConfig(10**4, 5, trials=1))


# ------------------------------------------------------------------ battery


def test_quick_battery_passes():
    rep = ex.run_verification_battery(ex.BatteryRanges.quick(), seed=1)
    assert rep["passed"], [r for r in rep["inequalities"] if not r["passed"]]
    groups = {r["inequality"].split("/")[0] for r in rep["inequalities"]}
    assert groups == {
        "oracle_dominance", "group_privacy", "dp_lemma_chain", "lemma_chain",
        "combinatorics", "covering", "fig1_ordering", "monte_carlo",
    }


def test_empty_battery():
    rep = ex.run_verification_battery(ex.BatteryRanges.empty())
    assert rep["inequalities"] == [] and rep["passed"] and rep["failures"] == 0


def test_negative_tolerance_forces_failures():
    rep = ex.run_verification_battery(ex.BatteryRanges.quick(), tol=-1.0)
    assert rep["failures"] > 0


def test_battery_deterministic():
    r = ex.BatteryRanges.quick()
    assert ex.dumps(ex.run_verification_battery(r, seed=3)) == ex.dumps(ex.run_verification_battery(r, seed=3))


def test_extra_mechanism_is_included():
    extra = mc.make_randomized_response(3, 2, 0.7)
    r = ex.BatteryRanges.empty()
    rep = ex.run_verification_battery(r, extra_mechanisms=[extra])
    assert any(row["worst_instance"].startswith("extra[0]") for row in rep["inequalities"])
    assert rep["passed"]


def test_corrupted_mechanism_rejected_before_battery(tmp_path):
    obj = mc.make_randomized_response(2, 2, 0.5).to_json()
    obj["rows"][0][0] = 0.0
    with pytest.raises(ValidationError, match="row 0"):
        mc.MechanismTable.from_json(obj)


def test_worst_slack_is_minimum():
    t = ex._Table()
    for s in (0.5, 0.1, 0.3):
        t.add("g", f"s={s}", ex.Check("x<=y", 0.0, s))
    (row,) = t.report()
    assert row["worst_slack"] == 0.1 and row["worst_instance"] == "s=0.1" and row["count"] == 3


# ------------------------------------------------------------------- sweeps


def test_fig1_sweep_shape():
    cells = ex.sweep_figure(*ex.PRESETS["fig1"], ex.eps_grid())
    assert len(cells) == 50 * len(ex.SWEEP_FAMILIES)
    assert all(c.value is not None and math.isfinite(c.value) for c in cells)
    for c in cells:
        assert (c.argmin_t is not None) == (c.family in ("thm1", "thm2", "thm3"))


def test_sweep_domain_errors_become_empty_cells():
    cells = ex.sweep_figure(1000, 2, [0.5, 2.0], ["eq9", "thm5", "thm1"])
    bad = [c for c in cells if c.value is None]
    assert {(c.epsilon, c.family) for c in bad} == {(2.0, "eq9"), (2.0, "thm5")}
    rows = list(csv.reader(io.StringIO(ex.sweep_csv(cells))))
    assert rows[0] == ["epsilon", "family", "value_nats", "argmin_t"]
    assert ["2.0", "eq9", "", ""] in rows


def test_sweep_eps_zero():
    cells = ex.sweep_figure(1000, 2, ex.eps_grid(0, 0, 1))
    by = {c.family: c.value for c in cells}
    for fam in ("eq9", "thm1", "thm2", "thm3", "thm5"):
        assert by[fam] == 0.0


def test_sweep_parallel_matches_serial():
    grid = ex.eps_grid(1e-3, 1, 7)
    assert ex.sweep_figure(1000, 3, grid, jobs=1) == ex.sweep_figure(1000, 3, grid, jobs=3)


def test_csv_is_plain_text():
    text = ex.sweep_csv(ex.sweep_figure(100, 2, [0.1], ["thm1"]))
    assert "\r" not in text and text.endswith("\n")


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-6, 1.0), st.floats(1e-6, 1.0), st.integers(1, 60))
def test_eps_grid_properties(a, b, k):
    lo, hi = min(a, b), max(a, b)
    g = ex.eps_grid(lo, hi, k)
    assert len(g) == k
    assert np.all(np.diff(g) >= 0)
    assert g[0] == pytest.approx(lo, rel=1e-12)
    if k > 1:
        assert g[-1] == pytest.approx(hi, rel=1e-12)


@pytest.mark.parametrize("lo,hi,k", [(0, 1, 5), (1, 0.1, 5), (0.1, 1, 0), (-1, 1, 3)])
def test_eps_grid_rejects(lo, hi, k):
    with pytest.raises(ValidationError):
        ex.eps_grid(lo, hi, k)
