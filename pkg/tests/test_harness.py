import json
import math

import numpy as np
import pytest

from corrprophet.corpus import smoke_corpus, sparse_corpus
from corrprophet.harness import (
    ALGORITHMS,
    ExperimentReport,
    ExperimentSpec,
    build_source,
    fit_algorithm,
    ratio_estimate,
    run_experiment,
    scan_csv,
    scan_thresholds,
)
from corrprophet.model import gen_tower2, independent_instance
from corrprophet.distributions import DiscreteDistribution as D, SupportExplosionError
from corrprophet.oracle import Estimate
from corrprophet.suites import SUITES, reproduce, smoke_spec

TOWER = {"generator": "tower2", "params": {"n": 2, "eps": 0.1}}


def test_fixed_threshold_report_on_two_level_tower():
    rep = run_experiment(ExperimentSpec(TOWER, "threshold", {"tau": 5.0}, oracle="exact", online_opt=True))
    assert rep.alg.mean == pytest.approx(1.1)
    assert rep.benchmark.mean == pytest.approx(1.99)
    assert rep.ratio == pytest.approx(1.99 / 1.1)
    assert round(rep.ratio, 3) == 1.809
    assert rep.online_opt.mean == pytest.approx(1.18)
    assert rep.metadata["oracle_path"] == "exact" and rep.metadata["s_col"] == 2


def test_half_max_on_independent_is_within_two():
    src = {"generator": "independent", "params": {"dists": [[[0, 0.5], [3, 0.5]], [[1, 0.9], [9, 0.1]]]}}
    rep = run_experiment(ExperimentSpec(src, "half-max", oracle="exact"))
    assert rep.ratio <= 2.0


def test_single_sample_report_is_unreliable():
    rep = run_experiment(ExperimentSpec(TOWER, "threshold", {"tau": 5.0}, num_samples=1, oracle="mc"))
    assert not rep.reliable and math.isinf(rep.alg.std_error)


def test_report_json_is_reproducible():
    spec = ExperimentSpec(TOWER, "col-sparse", num_samples=3000, oracle="mc", seed=4)
    assert run_experiment(spec).to_json() == run_experiment(spec).to_json()
    assert "wall_time" not in run_experiment(spec).to_dict()
    assert "wall_time" in run_experiment(spec).to_dict(include_timing=True)


def test_csv_round_trip_is_exact():
    rep = run_experiment(ExperimentSpec(TOWER, "threshold", {"tau": 5.0}, num_samples=2000, oracle="mc", seed=2))
    back = ExperimentReport.from_csv(rep.to_csv())
    assert back.alg == rep.alg and back.benchmark == rep.benchmark
    assert back.ratio == rep.ratio and back.ratio_std_error == rep.ratio_std_error
    assert back.metadata == rep.metadata
    assert "\r" not in rep.to_csv()


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(TOWER, "nope")
    with pytest.raises(ValueError):
        ExperimentSpec(TOWER, "threshold", num_samples=0)
    with pytest.raises(ValueError):
        ExperimentSpec(TOWER, "threshold", oracle="maybe")
    spec = ExperimentSpec(TOWER, "threshold", {"tau": 1.0})
    assert ExperimentSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec


def test_exact_mode_overflow_raises():
    big = {"generator": "tower", "params": {"c": 3, "eps": 0.1}}
    with pytest.raises(SupportExplosionError):
        run_experiment(ExperimentSpec(
            {"instance": independent_instance([D.from_pairs([(k, 0.1) for k in range(10)])] * 7).to_dict()},
            "threshold", oracle="exact"))
    assert run_experiment(ExperimentSpec(big, "threshold", oracle="exact")).alg.exact


def test_build_source_errors():
    with pytest.raises(ValueError):
        build_source({"generator": "missing"})
    assert build_source(TOWER) == gen_tower2(2, 0.1)
    assert build_source({"instance": gen_tower2(2, 0.1).to_dict()}) == gen_tower2(2, 0.1)


def test_fit_algorithm_guards():
    with pytest.raises(ValueError):
        fit_algorithm("unweighted", gen_tower2(2, 0.1))
    with pytest.raises(ValueError):
        fit_algorithm("col-sparse", build_source({"generator": "permutation", "params": {"values": [1, 2]}}))
    with pytest.raises(ValueError):
        fit_algorithm("missing", gen_tower2(2, 0.1))


def test_ratio_estimate_delta_method():
    ratio, se = ratio_estimate(Estimate(2.0, 0.2, 100), Estimate(1.0, 0.1, 100))
    assert ratio == 2.0 and se == pytest.approx(2.0 * math.sqrt(0.01 + 0.01))
    assert ratio_estimate(Estimate.exact_value(0.0), Estimate.exact_value(0.0))[0] == 1.0
    assert math.isinf(ratio_estimate(Estimate.exact_value(1.0), Estimate.exact_value(0.0))[0])


def test_scan_plateaus_on_two_level_tower():
    rows = scan_thresholds(gen_tower2(2, 0.1))
    assert [t for t, _ in rows] == [0.0, 10.0, 20.0, 100.0, math.inf]
    assert [e.mean for _, e in rows] == pytest.approx([1.1, 1.1, 0.92, 1.0, 0.0])
    text = scan_csv(rows)
    assert text.splitlines()[0] == "tau,value,std_error,exact"


def test_scan_single_deterministic_arrival():
    inst = independent_instance([D.point(4.0)])
    rows = scan_thresholds(inst, [0.0, 4.0, 4.5, 100.0])
    assert [e.mean for _, e in rows] == [4.0, 4.0, 0.0, 0.0]
    with pytest.raises(ValueError):
        scan_thresholds(inst, mode="mc")
    mc = scan_thresholds(inst, [3.0], mode="mc", num_samples=100)
    assert mc[0][1].mean == 4.0 and not mc[0][1].exact


@pytest.mark.parametrize("algo", sorted(ALGORITHMS))
def test_smoke_matrix(algo):
    for name, inst in smoke_corpus():
        if not ALGORITHMS[algo].applies(inst):
            continue
        rep = run_experiment(smoke_spec(algo, inst, 500))
        assert rep.ratio >= 1.0 - 4 * rep.ratio_std_error - 1e-9, name


def test_randomized_algorithm_mc_matches_exact_mixture():
    inst = sparse_corpus()[5][1]
    src = {"instance": inst.to_dict()}
    exact = run_experiment(ExperimentSpec(src, "col-sparse", oracle="exact"))
    mc = run_experiment(ExperimentSpec(src, "col-sparse", num_samples=64000, fits=64, oracle="mc"))
    assert abs(mc.alg.mean - exact.alg.mean) <= 4 * mc.alg.std_error


def test_reproduce_rejects_unknown_names():
    with pytest.raises(ValueError):
        reproduce("nope")
    with pytest.raises(ValueError):
        reproduce("tower-hardness", scale="huge")
    assert {"tower-hardness", "na-permutations", "multi-trend"} <= set(SUITES)


def test_quick_suites_emit_rows():
    res = reproduce("tower-hardness", "quick")
    assert res.passed
    rows = res.rows()
    assert set(rows[0]) == {"suite", "check_id", "measured", "sense", "bound", "margin", "verdict", "note"}
    assert float(rows[0]["measured"]) <= 1 / 0.999**2 + 1e-6
    aliased = reproduce("appendix-b", "quick")
    assert aliased.passed and aliased.suite == "na-permutations"
