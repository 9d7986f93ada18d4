"""Monte-Carlo checks of the score-model guarantees.

The model: a scorer better than random assigns a positive sentence a
score uniform in [theta, 1] with probability beta and uniform in
[0, 1-theta] otherwise; negatives do the same with beta_prime < beta.
Under this model the summed score of a rule's coverage concentrates,
which yields a lower tail bound, an upper tail bound, a pairwise
preference guarantee once the coverage ratio clears a constant, and a
constant-factor approximation for benefit-greedy selection.  Each check
samples the model directly and compares the empirical violation rate
against the stated probability plus three-sigma Monte-Carlo slack.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .engine import max_coverage_optimum


class TheoryError(ValueError):
    pass


@dataclass(frozen=True)
class ScoreModel:
    theta: float = 0.7
    beta: float = 0.8
    beta_prime: float = 0.3
    epsilon: float = 0.2

    def __post_init__(self) -> None:
        if not 0.5 <= self.theta <= 1:
            raise TheoryError("theta must be in [0.5, 1]")
        if not 0 <= self.beta_prime < self.beta <= 1:
            raise TheoryError("need 0 <= beta_prime < beta <= 1")
        if self.epsilon <= 0:
            raise TheoryError("epsilon must be > 0")

    # per-sentence expected scores under the mixture
    def mean_positive(self) -> float:
        t, b = self.theta, self.beta
        return b * (1 + t) / 2 + (1 - b) * (1 - t) / 2

    def mean_negative(self) -> float:
        t, b = self.theta, self.beta_prime
        return b * (1 + t) / 2 + (1 - b) * (1 - t) / 2

    def alpha(self) -> float:
        """Coverage ratio beyond which the bigger rule wins the comparison."""
        up = (1 + self.epsilon) * (self.beta + (1 - self.theta) * (1 - self.beta))
        dn = (1 - self.epsilon) * self.theta * self.beta_prime
        return up / dn

    def gamma(self) -> float:
        """Precision floor implied by the 0.5 average-benefit filter.

        Solving p * mean_positive + (1 - p) * mean_negative > 0.5 for p
        gives the smallest precision a rule can have and still be
        considered for querying under this score model.
        """
        lo, hi = self.mean_negative(), self.mean_positive()
        if hi <= lo:
            raise TheoryError("degenerate model: positives not above negatives")
        return min(1.0, max(0.0, (0.5 - lo) / (hi - lo)))

    def lower_constant(self) -> float:
        return 2.0 / (self.epsilon ** 2 * self.theta ** 2 * self.beta_prime ** 2)

    def upper_constant(self) -> float:
        mu = self.beta + (1 - self.theta) * (1 - self.beta)
        return 2.0 / (self.epsilon ** 2 * mu ** 2)


def expected_sum(model: ScoreModel, coverage_size: int, precision: float) -> float:
    """Closed-form expectation of the summed coverage score."""
    n_pos = math.ceil(precision * coverage_size)
    n_neg = coverage_size - n_pos
    return n_pos * model.mean_positive() + n_neg * model.mean_negative()


def sample_scores(model: ScoreModel, coverage_size: int, precision: float,
                  rng: np.random.Generator) -> np.ndarray:
    """One draw of per-sentence scores for a rule's coverage."""
    return _score_matrix(model, coverage_size, precision, 1, rng)[0]


def _score_matrix(model: ScoreModel, coverage_size: int, precision: float,
                  trials: int, rng: np.random.Generator) -> np.ndarray:
    """(trials, coverage_size) matrix of model scores.

    A score is theta * B + (1 - theta) * U with U uniform and B the
    high-regime Bernoulli (rate beta for positive slots, beta_prime for
    negative slots); that reproduces the uniform-on-[theta, 1] /
    uniform-on-[0, 1-theta] mixture exactly.
    """
    if coverage_size < 1:
        raise TheoryError("coverage_size must be >= 1")
    if not 0 <= precision <= 1:
        raise TheoryError("precision must be in [0, 1]")
    n_pos = math.ceil(precision * coverage_size)
    rates = np.full(coverage_size, model.beta_prime)
    rates[:n_pos] = model.beta
    high = rng.random((trials, coverage_size)) < rates
    u = rng.random((trials, coverage_size))
    return model.theta * high + (1 - model.theta) * u


def _sum_samples(model: ScoreModel, coverage_size: int, precision: float,
                 trials: int, rng: np.random.Generator,
                 chunk: int = 200_000) -> np.ndarray:
    out = np.empty(trials)
    done = 0
    rows = max(1, chunk // max(1, coverage_size))
    while done < trials:
        take = min(rows, trials - done)
        out[done : done + take] = _score_matrix(
            model, coverage_size, precision, take, rng
        ).sum(axis=1)
        done += take
    return out


@dataclass(frozen=True)
class BoundCheck:
    name: str
    violation_rate: float
    allowed_rate: float
    threshold: float
    trials: int
    passed: bool


def _mc_slack(p: float, trials: int) -> float:
    return 3.0 * math.sqrt(max(p * (1 - p), 1e-300) / trials)


def min_coverage(model: ScoreModel, n: int, side: str) -> int:
    c = model.lower_constant() if side == "lower" else model.upper_constant()
    return math.ceil(c * math.log(n))


def check_lower_bound(
    model: ScoreModel,
    coverage_size: int,
    precision: float,
    trials: int,
    n: int = 10_000,
    seed: int = 0,
) -> BoundCheck:
    """Empirical rate of sums below (1-eps) * theta * beta' * |C|.

    Requires |C| >= c log n with c = 2 / (eps^2 theta^2 beta'^2); the
    stated failure probability is 2 / n^4.
    """
    floor = min_coverage(model, n, "lower")
    if coverage_size < floor:
        raise TheoryError(
            f"coverage_size {coverage_size} below c*log(n) = {floor} "
            f"(c = {model.lower_constant():.1f})"
        )
    rng = np.random.default_rng(seed)
    sums = _sum_samples(model, coverage_size, precision, trials, rng)
    threshold = (1 - model.epsilon) * model.theta * model.beta_prime * coverage_size
    rate = float(np.mean(sums < threshold))
    bound = 2.0 / n ** 4
    allowed = bound + _mc_slack(bound, trials)
    return BoundCheck("lower_tail", rate, allowed, threshold, trials, rate <= allowed)


def check_upper_bound(
    model: ScoreModel,
    coverage_size: int,
    precision: float,
    trials: int,
    n: int = 10_000,
    seed: int = 0,
) -> BoundCheck:
    """Empirical rate of sums above (1+eps)(beta + (1-theta)(1-beta))|C|."""
    floor = min_coverage(model, n, "upper")
    if coverage_size < floor:
        raise TheoryError(
            f"coverage_size {coverage_size} below c*log(n) = {floor} "
            f"(c = {model.upper_constant():.1f})"
        )
    rng = np.random.default_rng(seed)
    sums = _sum_samples(model, coverage_size, precision, trials, rng)
    mu = model.beta + (1 - model.theta) * (1 - model.beta)
    threshold = (1 + model.epsilon) * mu * coverage_size
    rate = float(np.mean(sums > threshold))
    bound = 2.0 / n ** 4
    allowed = bound + _mc_slack(bound, trials)
    return BoundCheck("upper_tail", rate, allowed, threshold, trials, rate <= allowed)


def check_preference(
    model: ScoreModel,
    c1_size: int,
    c2_size: int,
    trials: int,
    precision1: float = 0.9,
    precision2: float = 0.9,
    seed: int = 0,
) -> float:
    """Rate at which the larger-coverage rule outscores the smaller one.

    The guarantee assumes the first rule carries more positives; when
    c1_size / c2_size >= alpha the rate should approach one.  Identical
    configurations land at one half by symmetry.
    """
    rng = np.random.default_rng(seed)
    s1 = _sum_samples(model, c1_size, precision1, trials, rng)
    s2 = _sum_samples(model, c2_size, precision2, trials, rng)
    return float(np.mean(s1 > s2))


@dataclass(frozen=True)
class ApproximationTrial:
    identified: int
    optimum: int
    passed: bool


def selection_approximation_check(
    model: ScoreModel,
    trials: int = 200,
    n_sets: int = 15,
    budget: int = 5,
    universe: int = 2_000,
    positive_fraction: float = 0.4,
    oracle_threshold: float = 0.8,
    seed: int = 0,
    base_coverage: Optional[int] = None,
) -> list[ApproximationTrial]:
    """Benefit-greedy selection on abstract set systems vs brute force.

    Each trial builds <= 20 random sets with known positives, samples
    scores from the model once, then repeatedly takes the unasked set
    with the best summed score over uncovered elements (skipping sets
    whose average is below 0.5, the query filter).  A set is accepted
    when its true precision meets the oracle threshold.  The trial
    passes when the positives identified reach (gamma / alpha) * OPT,
    with OPT the exhaustive best coverage over acceptable sets.
    """
    rng = np.random.default_rng(seed)
    gamma_over_alpha = model.gamma() / model.alpha()
    n_pos = int(universe * positive_fraction)
    base = base_coverage or max(40, universe // 25)
    out: list[ApproximationTrial] = []
    for _ in range(trials):
        labels = np.zeros(universe, dtype=bool)
        labels[:n_pos] = True
        sets: list[np.ndarray] = []
        for _s in range(n_sets):
            size = int(rng.integers(base, 3 * base))
            precision = float(rng.uniform(model.gamma() + 0.05, 1.0))
            k_pos = min(n_pos, int(round(size * precision)))
            k_neg = min(universe - n_pos, size - k_pos)
            members = np.concatenate([
                rng.choice(n_pos, size=k_pos, replace=False),
                n_pos + rng.choice(universe - n_pos, size=k_neg, replace=False),
            ])
            sets.append(members)
        scores = np.where(
            rng.random(universe) < np.where(labels, model.beta, model.beta_prime),
            model.theta + (1 - model.theta) * rng.random(universe),
            (1 - model.theta) * rng.random(universe),
        )
        acceptable_positives = [
            {int(x) for x in members if labels[x]}
            if labels[members].mean() >= oracle_threshold else set()
            for members in sets
        ]
        optimum = max_coverage_optimum(acceptable_positives, budget)
        covered = np.zeros(universe, dtype=bool)
        remaining = set(range(n_sets))
        asked = 0
        while asked < budget and remaining:
            best_i, best_total = None, -1.0
            for i in sorted(remaining):
                new = sets[i][~covered[sets[i]]]
                if new.size == 0:
                    continue
                total = float(scores[new].sum())
                if total / new.size <= 0.5:
                    continue
                if total > best_total:
                    best_i, best_total = i, total
            if best_i is None:
                break
            remaining.discard(best_i)
            asked += 1
            if labels[sets[best_i]].mean() >= oracle_threshold:
                covered[sets[best_i]] = True
        identified = int((covered & labels).sum())
        out.append(ApproximationTrial(
            identified=identified,
            optimum=optimum,
            passed=identified >= gamma_over_alpha * optimum,
        ))
    return out


def run_all_checks(
    model: ScoreModel,
    trials: int = 100_000,
    n: int = 10_000,
    seed: int = 0,
) -> list[tuple[str, str, bool]]:
    """The pass/fail table behind the `theory check` command."""
    rows: list[tuple[str, str, bool]] = []
    cov_lo = min_coverage(model, n, "lower")
    lo = check_lower_bound(model, cov_lo, 0.9, trials, n=n, seed=seed)
    rows.append((
        "lower tail",
        f"violations {lo.violation_rate:.2e} <= {lo.allowed_rate:.2e}",
        lo.passed,
    ))
    cov_hi = min_coverage(model, n, "upper")
    hi = check_upper_bound(model, cov_hi, 0.9, trials, n=n, seed=seed + 1)
    rows.append((
        "upper tail",
        f"violations {hi.violation_rate:.2e} <= {hi.allowed_rate:.2e}",
        hi.passed,
    ))
    ratio = 2.0 * model.alpha()
    # both coverages must clear their concentration floors; the larger
    # one is fixed by the ratio, so size the smaller one from it
    c2 = max(cov_hi, math.ceil(cov_lo / ratio))
    c1 = max(cov_lo, int(math.ceil(ratio * c2)))
    pref_trials = min(trials, 10_000)
    rate = check_preference(model, c1, c2, pref_trials, seed=seed + 2)
    rows.append((
        "preference at 2*alpha",
        f"rate {rate:.4f} >= 0.99 (alpha={model.alpha():.3f})",
        rate >= 0.99,
    ))
    approx = selection_approximation_check(model, trials=200, seed=seed + 3)
    frac = sum(t.passed for t in approx) / len(approx)
    rows.append((
        "greedy approximation",
        f"{frac:.1%} of trials >= gamma/alpha * OPT (gamma={model.gamma():.3f})",
        frac >= 0.95,
    ))
    return rows
