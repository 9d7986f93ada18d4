from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from rulescout.theory import (
    ScoreModel,
    TheoryError,
    check_lower_bound,
    check_preference,
    check_upper_bound,
    expected_sum,
    min_coverage,
    sample_scores,
    selection_approximation_check,
)


def test_model_validation():
    with pytest.raises(TheoryError):
        ScoreModel(theta=0.3)
    with pytest.raises(TheoryError):
        ScoreModel(beta=0.3, beta_prime=0.5)
    with pytest.raises(TheoryError):
        ScoreModel(epsilon=0.0)


def test_degenerate_certain_positives():
    model = ScoreModel(theta=1.0, beta=1.0, beta_prime=0.0, epsilon=0.1)
    scores = sample_scores(model, 50, 1.0, np.random.default_rng(0))
    assert np.allclose(scores, 1.0)


def test_equal_rates_make_classes_indistinguishable():
    # with beta == beta_prime... the model forbids equality, so compare a
    # positive-only draw against a negative-only draw at nearly equal rates
    model = ScoreModel(theta=0.7, beta=0.6, beta_prime=0.6 - 1e-12, epsilon=0.1)
    rng = np.random.default_rng(1)
    pos = sample_scores(model, 100_000, 1.0, rng)
    neg = sample_scores(model, 100_000, 0.0, rng)
    _stat, p_value = stats.ks_2samp(pos, neg)
    assert p_value > 0.01


def test_mean_matches_closed_form():
    model = ScoreModel(theta=0.7, beta=0.8, beta_prime=0.4, epsilon=0.2)
    size, precision = 400, 0.9
    rng = np.random.default_rng(2)
    total = 0.0
    trials = 2000
    for _ in range(trials):
        total += sample_scores(model, size, precision, rng).sum()
    mean = total / trials
    closed = expected_sum(model, size, precision)
    assert abs(mean - closed) / closed < 0.01
    # and the closed form respects the expected-score lower bound
    assert closed >= model.theta * model.beta_prime * size


def test_lower_bound_never_violated_on_spec_point():
    model = ScoreModel(theta=0.7, beta=0.8, beta_prime=0.4, epsilon=0.5)
    cov = min_coverage(model, 10_000, "lower")
    check = check_lower_bound(model, cov, 0.9, trials=4000, n=10_000, seed=3)
    assert check.violation_rate <= 1e-3
    assert check.passed


def test_lower_bound_near_trivial_epsilon():
    model = ScoreModel(theta=0.7, beta=0.8, beta_prime=0.4, epsilon=0.999)
    cov = min_coverage(model, 200, "lower")
    check = check_lower_bound(model, cov, 0.9, trials=2000, n=200, seed=4)
    assert check.violation_rate == 0.0


def test_lower_bound_floor_enforced():
    model = ScoreModel()
    with pytest.raises(TheoryError, match="c\\*log"):
        check_lower_bound(model, 10, 0.9, trials=10, n=10_000)


def test_upper_bound_check():
    model = ScoreModel(theta=0.7, beta=0.8, beta_prime=0.3, epsilon=0.2)
    cov = min_coverage(model, 10_000, "upper")
    check = check_upper_bound(model, cov, 0.9, trials=4000, n=10_000, seed=5)
    assert check.passed


def test_upper_bound_floor_enforced():
    model = ScoreModel()
    with pytest.raises(TheoryError, match="c\\*log"):
        check_upper_bound(model, 5, 0.9, trials=10, n=10_000)


def test_alpha_formula_cross_check():
    model = ScoreModel(theta=0.7, beta=0.8, beta_prime=0.3, epsilon=0.1)
    # independent evaluation of the same closed form
    numerator = (1 + 0.1) * (0.8 + (1 - 0.7) * (1 - 0.8))
    denominator = (1 - 0.1) * 0.7 * 0.3
    assert model.alpha() == pytest.approx(numerator / denominator)
    assert model.alpha() == pytest.approx(1.1 * 0.86 / (0.9 * 0.21))


def test_gamma_from_benefit_floor():
    model = ScoreModel(theta=0.7, beta=0.8, beta_prime=0.3, epsilon=0.2)
    gamma = model.gamma()
    # at precision gamma the expected per-sentence score is exactly 0.5
    mu = gamma * model.mean_positive() + (1 - gamma) * model.mean_negative()
    assert mu == pytest.approx(0.5)


def test_preference_rate_high_at_double_alpha():
    model = ScoreModel(theta=0.7, beta=0.8, beta_prime=0.3, epsilon=0.2)
    c2 = 200
    c1 = int(math.ceil(2 * model.alpha() * c2))
    rate = check_preference(model, c1, c2, trials=2000, seed=6)
    assert rate >= 0.99


def test_preference_symmetric_at_ratio_one():
    model = ScoreModel(theta=0.7, beta=0.8, beta_prime=0.3, epsilon=0.2)
    rate = check_preference(model, 300, 300, trials=4000, seed=7)
    assert abs(rate - 0.5) < 0.05


def test_preference_drops_when_first_rule_is_smaller():
    model = ScoreModel(theta=0.7, beta=0.8, beta_prime=0.3, epsilon=0.2)
    rate = check_preference(model, 100, 1000, trials=500, seed=9)
    assert rate < 0.5


def test_selection_approximation_smoke():
    model = ScoreModel(theta=0.7, beta=0.8, beta_prime=0.3, epsilon=0.2)
    trials = selection_approximation_check(model, trials=30, seed=8)
    assert len(trials) == 30
    frac = sum(t.passed for t in trials) / len(trials)
    assert frac >= 0.9
    assert all(t.optimum >= 0 for t in trials)
