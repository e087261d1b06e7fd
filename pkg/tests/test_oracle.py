import math

import numpy as np
import pytest

from corrprophet.distributions import DiscreteDistribution as D, SupportExplosionError
from corrprophet.model import JointSampler, gen_random_sparse, gen_tower2, gen_tower_general
from corrprophet.oracle import (
    Estimate,
    achievable_values,
    as_table,
    best_fixed_threshold,
    brute_force_online_optimum,
    build_scenarios,
    exact_mixture_value,
    exact_online_optimum,
    exact_policy_value,
    exact_prophet_value,
    mc_prophet_value,
    mc_value,
    threshold_values,
    top_r_sum,
)
from corrprophet.single_item import ThresholdPolicy


class ConstantSampler(JointSampler):
    def __init__(self, row):
        self.row = np.asarray(row, dtype=float)
        self.n = self.row.size

    def _block(self, rng, size):
        return np.tile(self.row, (size, 1))


def test_two_level_tower_values(tower2_small):
    assert exact_prophet_value(tower2_small).mean == pytest.approx(1.99, abs=1e-12)
    assert exact_policy_value(tower2_small, ThresholdPolicy(5.0)).mean == pytest.approx(1.1, abs=1e-12)
    assert exact_policy_value(tower2_small, ThresholdPolicy(50.0)).mean == pytest.approx(1.0, abs=1e-12)
    assert exact_online_optimum(tower2_small, 1).mean == pytest.approx(1.18, abs=1e-12)
    assert threshold_values(tower2_small, [5.0, 15.0, 100.0]) == pytest.approx([1.1, 0.92, 1.0])


def test_best_fixed_threshold_two_level_tower(tower2_small):
    tau, value = best_fixed_threshold(tower2_small)
    assert value.exact and value.mean == pytest.approx(1.1)
    assert threshold_values(tower2_small, [tau])[0] == pytest.approx(1.1)
    assert np.all(threshold_values(tower2_small, np.linspace(0.01, 10, 7)) == pytest.approx(1.1))


def test_scenario_table_enumeration_order(tower2_small):
    table = build_scenarios(tower2_small)
    assert table.size == 4
    assert table.Y.tolist() == [[0, 0], [0, 100], [10, 0], [10, 100]]
    assert table.X.tolist() == [[0, 0], [10, 100], [10, 0], [20, 100]]
    assert table.prob.sum() == pytest.approx(1.0)
    assert achievable_values(tower2_small).tolist() == [0, 10, 20, 100]


def test_enumeration_cap_raises():
    inst = gen_tower_general(5, 0.1)
    with pytest.raises(SupportExplosionError):
        build_scenarios(inst, cap=16)
    with pytest.raises(SupportExplosionError):
        exact_online_optimum(inst, cap=8)


def test_prophet_with_r_at_least_n_is_sum_of_means(tower2_small):
    total = exact_prophet_value(tower2_small, r=2).mean
    assert total == pytest.approx(2 * 1.0 + 0.1 * 1.0)
    assert exact_prophet_value(tower2_small, r=5).mean == pytest.approx(total)
    with pytest.raises(ValueError):
        exact_prophet_value(tower2_small, r=0)


def test_online_optimum_multi_item_takes_everything_when_r_is_large(tower2_small):
    assert exact_online_optimum(tower2_small, 2).mean == pytest.approx(2.1)


def test_online_optimum_matches_brute_force_on_towers():
    for inst in (gen_tower2(3, 0.1), gen_tower_general(3, 0.1), gen_random_sparse(4, 4, 2, 2, seed=2)):
        dp = exact_online_optimum(inst).mean
        assert brute_force_online_optimum(inst).mean == pytest.approx(dp, abs=1e-9)


def test_tower_c3_online_optimum_is_small():
    inst = gen_tower_general(3, 0.01)
    assert exact_prophet_value(inst).mean > 2.9
    assert exact_online_optimum(inst).mean <= 1 / (1 - 0.01) ** 2 + 1e-9


def test_top_r_sum():
    X = np.array([[3.0, 1.0, 2.0], [0.0, 5.0, 5.0]])
    assert top_r_sum(X, 1).tolist() == [3.0, 5.0]
    assert top_r_sum(X, 2).tolist() == [5.0, 10.0]
    assert top_r_sum(X, 9).tolist() == [6.0, 10.0]


def test_mixture_weights_must_sum_to_one(tower2_small):
    pol = ThresholdPolicy(5.0)
    assert exact_mixture_value(tower2_small, [(0.5, pol), (0.5, pol)]).mean == pytest.approx(1.1)
    with pytest.raises(ValueError):
        exact_mixture_value(tower2_small, [(0.4, pol)])


def test_constant_sampler_mc_is_exact():
    est = mc_value(ConstantSampler([3.0]), ThresholdPolicy(0.0), num_samples=100, seed=1)
    assert est.mean == 3.0 and est.std_error == 0.0 and est.num_samples == 100


def test_single_sample_estimate_is_unreliable():
    est = mc_value(ConstantSampler([3.0]), ThresholdPolicy(0.0), num_samples=1)
    assert math.isinf(est.std_error) and not est.reliable
    with pytest.raises(ValueError):
        mc_value(ConstantSampler([3.0]), ThresholdPolicy(0.0), num_samples=0)


def test_mc_brackets_exact_value(tower2_small):
    pol = ThresholdPolicy(5.0)
    est = mc_value(tower2_small.sampler(), pol, num_samples=10**6, seed=3)
    assert abs(est.mean - 1.1) <= 4 * est.std_error
    bench = mc_prophet_value(tower2_small.sampler(), num_samples=10**5, seed=3)
    assert abs(bench.mean - 1.99) <= 4 * bench.std_error


def test_mc_is_deterministic_per_seed(tower2_small):
    pol = ThresholdPolicy(5.0)
    a = mc_value(tower2_small.sampler(), pol, num_samples=5000, seed=9)
    b = mc_value(tower2_small.sampler(), pol, num_samples=5000, seed=9)
    assert a == b


def test_policy_budget_checked_against_r(tower2_small):
    class Greedy(ThresholdPolicy):
        budget_ = 2

    with pytest.raises(ValueError):
        exact_policy_value(tower2_small, Greedy(0.0), r=1)


def test_estimate_validation():
    with pytest.raises(ValueError):
        Estimate(1.0, -1.0)
    with pytest.raises(ValueError):
        Estimate(1.0, 0.5, exact=True)
    assert Estimate.exact_value(2).to_dict() == {"mean": 2.0, "std_error": 0.0, "num_samples": 0, "exact": True}


def test_as_table_rejects_unknown_source():
    with pytest.raises(TypeError):
        as_table(object())
    with pytest.raises(SupportExplosionError):
        as_table(ConstantSampler([1.0]))


def test_point_mass_instance_has_trivial_values():
    from corrprophet.model import independent_instance

    inst = independent_instance([D.point(2.0), D.point(7.0)])
    assert exact_prophet_value(inst).mean == 7.0
    assert exact_online_optimum(inst).mean == 7.0
