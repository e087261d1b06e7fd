import math

import numpy as np
import pytest

from corrprophet.distributions import (
    DiscreteDistribution as D,
    SupportExplosionError,
    expected_max,
    linear_combination,
    max_cdf,
    median_of_max,
    tower_feature,
)


def test_validation_rejects_bad_laws():
    with pytest.raises(ValueError):
        D.from_pairs([(1.0, 0.5), (2.0, 0.4)])
    with pytest.raises(ValueError):
        D.from_pairs([(-1.0, 1.0)])


def test_from_pairs_merges_duplicate_atoms():
    d = D.from_pairs([(1.0, 0.25), (0.0, 0.5), (1.0, 0.25)])
    assert d.values.tolist() == [0.0, 1.0]
    assert d.probs.tolist() == [0.5, 0.5]


def test_moments_and_tails():
    d = D.from_pairs([(0.0, 0.5), (2.0, 0.3), (10.0, 0.2)])
    assert d.mean() == pytest.approx(2.6)
    assert d.cdf(2.0) == pytest.approx(0.8)
    assert d.sf(2.0) == pytest.approx(0.2)
    assert d.tail_mass(1.0) == pytest.approx(2.6)
    t = d.truncated_above(2.0)
    assert t.values.tolist() == [0.0, 2.0]
    assert t.probs == pytest.approx([0.625, 0.375])


def test_tower_feature_values():
    f = tower_feature(0.01, 2)
    assert f.values.tolist() == [0.0, 10000.0]
    assert f.probs[1] == pytest.approx(1e-4)
    assert f.mean() == pytest.approx(1.0)


def test_expected_max_matches_enumeration():
    a = D.from_pairs([(0.0, 0.9), (10.0, 0.1)])
    b = D.from_pairs([(0.0, 0.99), (100.0, 0.01)])
    assert expected_max([a, b]) == pytest.approx(1.99)
    assert expected_max([]) == 0.0


def test_median_of_max_smallest_quantile():
    assert median_of_max([D.point(4.0)]) == 4.0
    assert median_of_max([D.bernoulli(0.5)]) == 0.0
    assert median_of_max([D.bernoulli(0.001)] * 100) == 0.0


def test_linear_combination_and_cap():
    z = linear_combination([(1.0, D.bernoulli(0.5)), (2.0, D.bernoulli(0.5))])
    assert z.values.tolist() == [0.0, 1.0, 2.0, 3.0]
    assert np.allclose(z.probs, 0.25)
    with pytest.raises(SupportExplosionError):
        linear_combination([(2.0**k, D.bernoulli(0.5)) for k in range(12)], cap=1000)


def test_sample_inverse_cdf():
    d = D.from_pairs([(0.0, 0.25), (1.0, 0.75)])
    assert d.sample(np.array([0.0, 0.2499, 0.25, 0.9999])).tolist() == [0.0, 0.0, 1.0, 1.0]


def test_max_cdf_is_product():
    grid, cdf = max_cdf([D.bernoulli(0.5), D.bernoulli(0.5)])
    assert grid.tolist() == [0.0, 1.0]
    assert cdf.tolist() == [0.25, 1.0]
    assert math.isclose(cdf[-1], 1.0)
