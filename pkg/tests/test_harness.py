import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dualbatch.errors import EmptySample
from dualbatch.harness import (RUNS_HEADER, ExperimentSpec, RunRecord, bound_audit, box_stats,
                               monte_carlo,
                               noise_rng, run_closed_loop, summarize)
from dualbatch.model import GammaParams, PlantConfig

CFG = PlantConfig()


def test_five_point_summary():
    s = box_stats([1, 2, 3, 4, 5])
    assert (s.median, s.q25, s.q75) == (3.0, 2.0, 4.0)
    assert s.outliers == [] and (s.whisker_lo, s.whisker_hi) == (1.0, 5.0)


def test_outlier_flagged():
    s = box_stats([1, 1, 1, 1, 100])
    assert s.outliers == [100.0]
    assert s.whisker_hi == 1.0


@given(st.floats(-1e3, 1e3), st.integers(1, 20))
def test_all_equal_sample_is_a_point(v, n):
    s = box_stats([v] * n)
    assert s.iqr == 0 and s.whisker_lo == s.whisker_hi == v and s.outliers == []


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50))
def test_whiskers_and_outliers_partition_the_sample(vals):
    s = box_stats(vals)
    # whiskers are the extreme data points inside the 1.5 IQR fences
    assert s.whisker_lo >= s.q25 - 1.5 * s.iqr - 1e-9
    assert s.whisker_hi <= s.q75 + 1.5 * s.iqr + 1e-9
    assert s.whisker_lo in vals and s.whisker_hi in vals
    inside = [v for v in vals if s.whisker_lo <= v <= s.whisker_hi]
    assert len(inside) + len(s.outliers) == len(vals)


def test_empty_sample():
    with pytest.raises(EmptySample):
        box_stats([])


def test_summarize_skips_failed_runs():
    recs = [RunRecord(0, (3, 1000, 0.1), "nominal", 9.0, 0.1, True),
            RunRecord(1, (3, 1000, 0.1), "nominal", float("nan"), float("nan"), False,
                      error="boom"),
            RunRecord(2, (3, 1000, 0.1), "nominal", 10.0, 0.2, True)]
    s = summarize(recs)
    assert s["nominal"].n == 2 and s["nominal"].median == 9.5
    assert s.failures == [{"index": 1, "gamma": [3, 1000, 0.1], "controller": "nominal",
                           "error": "boom"}]


def test_grid_points_cover_the_prior():
    pts = ExperimentSpec(grid=3).grid_points()
    assert len(pts) == 27
    assert pts[0].as_tuple() == CFG.gamma_lower and pts[-1].as_tuple() == CFG.gamma_upper
    assert pts[13].as_tuple() == pytest.approx(CFG.prior_mid.as_tuple())
    assert ExperimentSpec(grid=1).grid_points()[0].as_tuple() == pytest.approx(
        CFG.prior_mid.as_tuple())


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(controllers=("pid",))
    with pytest.raises(ValueError):
        ExperimentSpec(grid=0)


def test_noise_streams_are_keyed_by_truth():
    a = noise_rng(0, 3).uniform(size=4)
    assert (a == noise_rng(0, 3).uniform(size=4)).all()
    assert not (a == noise_rng(0, 4).uniform(size=4)).all()


def test_clairvoyant_run_at_nominal_truth():
    r = run_closed_loop(CFG.prior_mid, "optimal", CFG)
    assert r.tf == pytest.approx(9.286049172, abs=1e-6)


@pytest.fixture(scope="module")
def small_mc():
    return monte_carlo(ExperimentSpec(grid=2, controllers=("optimal", "nominal", "adaptive")))


def test_regret_of_optimal_is_zero(small_mc):
    assert small_mc.by_controller("optimal", "regret_pct") == [0.0] * 8
    assert all(r >= -1e-9 for r in small_mc.by_controller("nominal", "regret_pct"))


def test_completeness_and_csv(small_mc):
    lines = small_mc.runs_csv().splitlines()
    assert lines[0].split(",") == RUNS_HEADER
    # failed runs stay in the table with ok=0
    assert len(lines) == 1 + 8 * 3
    doc = json.loads(small_mc.summary_json())
    assert doc["n_runs"] == 24 and set(doc["controllers"]) == {"optimal", "nominal", "adaptive"}


def test_same_spec_same_bytes(small_mc):
    again = monte_carlo(ExperimentSpec(grid=2, controllers=("optimal", "nominal", "adaptive")))
    assert again.runs_csv() == small_mc.runs_csv()


def test_parallel_matches_serial(small_mc):
    par = monte_carlo(ExperimentSpec(grid=2, controllers=("optimal", "nominal", "adaptive"),
                                     workers=2))
    assert par.runs_csv() == small_mc.runs_csv()


def test_explicit_truths():
    spec = ExperimentSpec(controllers=("optimal",), truths=((3.0, 1000.0, 0.1),))
    mc = monte_carlo(spec)
    assert len(mc.records) == 1 and np.isclose(mc.records[0].tf, 9.286049172)
    assert GammaParams(*mc.records[0].gamma) == CFG.prior_mid


def test_bound_audit(small_mc):
    assert all(r.containment_violations == 0 and r.nesting_violations == 0
               for r in small_mc.records)
    g = CFG.prior_mid
    p = g.to_p().as_tuple()
    inside = [0.1, p[0] - 1, p[0] + 1, p[1] - .1, p[1] + .1, p[2] - .01, p[2] + .01]
    missed = [0.2, p[0] + .5, p[0] + 1, p[1] - .1, p[1] + .1, p[2] - .01, p[2] + .01]
    wider = [0.3, p[0] - 2, p[0] + 1, p[1] - .1, p[1] + .1, p[2] - .01, p[2] + .01]
    assert bound_audit([inside, missed, wider], g, CFG) == (1, 1)
