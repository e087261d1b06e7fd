import numpy as np
import pytest

from corrprophet.augmented import (
    Adversary,
    AdversaryContractError,
    AugmentedStream,
    HistoryTriggered,
    JustBelowThreshold,
    TinyBoostFirst,
    ZeroAdversary,
    adversary_suite,
    exact_augmented_value,
    run_augmented,
)
from corrprophet.distributions import DiscreteDistribution as D, tower_feature
from corrprophet.single_item import HalfMaxPolicy, MedianPolicy

BERN100 = [D.bernoulli(0.001)] * 100
TOWER = [tower_feature(0.05, i + 1) for i in range(6)]


class Negative(Adversary):
    def boost(self, history, z, i):
        return -np.ones_like(z)


def test_suite_has_five_named_adversaries():
    suite = adversary_suite(1.0)
    assert list(suite) == ["zero", "tiny-boost-first", "just-below-threshold", "just-above-first", "history-triggered"]


def test_zero_adversary_leaves_z():
    Z, X = AugmentedStream(TOWER).sample(3, 500)
    assert np.array_equal(Z, X)


def test_bonuses_nonnegative_and_targeted():
    stream = AugmentedStream([D.bernoulli(0.5)] * 3, JustBelowThreshold(0.7))
    Z, X = stream.sample(1, 2000)
    assert np.all(X >= Z)
    below = np.nextafter(0.7, -np.inf)
    assert np.all(X[Z < below] == below)
    assert np.all(X[Z >= 1.0] == Z[Z >= 1.0])


def test_history_trigger_only_after_large_value():
    stream = AugmentedStream([D.point(0.0), D.point(3.0), D.point(0.0)], HistoryTriggered(2.0, 5.0))
    _, X = stream.sample(0, 4)
    assert X[0].tolist() == [0.0, 3.0, 5.0]


def test_negative_bonus_is_contract_error():
    with pytest.raises(AdversaryContractError):
        AugmentedStream([D.point(1.0)], Negative()).sample(0, 10)


def test_draws_are_reproducible_and_block_consistent():
    stream = AugmentedStream(TOWER, TinyBoostFirst(1e-3))
    a = stream.sample(5, 6000)
    b = stream.sample(5, 100, start=4050)
    assert np.array_equal(a[1][4050:4150], b[1])


def test_tiny_boost_breaks_strict_median():
    med = MedianPolicy(strict=True).fit(BERN100)
    res = run_augmented(AugmentedStream(BERN100, TinyBoostFirst(1e-6)), med, 10**5, seed=2)
    assert abs(res.alg.mean - 0.001001) <= 4 * res.alg.std_error + 1e-9
    assert abs(res.benchmark.mean - (1 - 0.999**100)) <= 4 * res.benchmark.std_error


def test_half_max_survives_tiny_boost_in_mc():
    pol = HalfMaxPolicy().fit(BERN100)
    res = run_augmented(AugmentedStream(BERN100, TinyBoostFirst(1e-6)), pol, 10**5, seed=3)
    gap = res.gap(0.5)
    assert gap.mean >= -3 * gap.std_error


@pytest.mark.parametrize("name", list(adversary_suite(1.0)))
def test_half_max_exact_guarantee_on_tower(name):
    pol = HalfMaxPolicy().fit(TOWER)
    stream = AugmentedStream(TOWER, adversary_suite(pol.threshold_)[name])
    alg, bench = exact_augmented_value(stream, pol)
    assert bench.mean == pytest.approx(2 * pol.threshold_)
    assert alg.mean >= 0.5 * bench.mean - 1e-12


def test_zero_adversary_tower_mc_bracket():
    pol = HalfMaxPolicy().fit(TOWER)
    stream = AugmentedStream(TOWER, ZeroAdversary())
    exact, _ = exact_augmented_value(stream, pol)
    res = run_augmented(stream, pol, 10**5, seed=8)
    assert res.alg.mean >= 0.5 * stream.benchmark() - 3 * res.alg.std_error
    assert stream.benchmark(r=2) is None
    assert exact.mean > 0


def test_empty_stream_rejected():
    with pytest.raises(ValueError):
        AugmentedStream([])
    with pytest.raises(ValueError):
        run_augmented(AugmentedStream(TOWER), HalfMaxPolicy().fit(TOWER), 0)
