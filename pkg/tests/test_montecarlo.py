import math

import numpy as np
import pytest

from rhprophet.corpus import random_horizon, random_value, threshold_grid
from rhprophet.distributions import HorizonDist, ValidationError, ValueDist, ZeroTailError
from rhprophet.exact import (backward_induction, randomized_threshold_value,
                             threshold_value, tie_break_threshold_value)
from rhprophet.hardness import hard_family
from rhprophet.montecarlo import (chunk_generator, secretary_win_prob, simulate_paired,
                                  simulate_policy, simulate_prophet, simulate_sp_on_family)
from rhprophet.policies import (FixedThreshold, RandomizedThreshold,
                                TieBreakThreshold, secretary_waiting_index, sp_guarantee)


def within(rep, exact, k=3.0):
    return abs(rep.estimate - exact) <= k * rep.se


def test_constant_values():
    rep = simulate_policy(HorizonDist.geometric(0.5), ValueDist.point(2.5), FixedThreshold(1.0), 5000, 1)
    assert rep.estimate == 2.5 and rep.se == 0.0


def test_threshold_corpus_agreement():
    rng = np.random.default_rng(2024)
    hits = total = 0
    while total < 30:
        H, X = random_horizon(rng), random_value(rng)
        pi = float(threshold_grid(X, 8)[rng.integers(1, 5)])
        try:
            exact = threshold_value(H, X, pi).gambler
        except ZeroTailError:
            continue
        rep = simulate_policy(H, X, FixedThreshold(pi), 100_000, 1000 + total)
        hits += within(rep, exact)
        total += 1
    assert hits >= 29


def test_randomized_straddle():
    H = HorizonDist.geometric_with_mean(2.0)
    X = ValueDist.two_point(1.0, 2.0, 0.3)
    rep = simulate_policy(H, X, RandomizedThreshold(1.0, 0.5), 200_000, 11)
    assert within(rep, randomized_threshold_value(H, X, 1.0, 0.5).gambler)


def test_tie_break_rule():
    H = HorizonDist.uniform(1, 8)
    X = ValueDist.atomic([0.0, 1.0, 3.0], [0.6, 0.3, 0.1])
    rep = simulate_policy(H, X, TieBreakThreshold(1.0, 0.4), 200_000, 12)
    assert within(rep, tie_break_threshold_value(H, X, 1.0, 0.4).gambler)


def test_backward_induction_policy():
    H = HorizonDist.zipf(12, 0.5)
    X = ValueDist.uniform(0, 1)
    dp = backward_induction(H, X)
    rep = simulate_policy(H, X, dp.policy(), 200_000, 13)
    assert within(rep, dp.value)


def test_prophet_examples():
    X = ValueDist.atomic([1.0, 3.0], [0.25, 0.75])
    assert within(simulate_prophet(HorizonDist.degenerate(1), X, 100_000, 1), X.mean)
    rep = simulate_prophet(HorizonDist.geometric(0.5), ValueDist.two_point(1, 2, 0.5), 100_000, 2)
    assert within(rep, 5 / 3)
    rep = simulate_prophet(HorizonDist.degenerate(2), ValueDist.pareto(1.0), 400_000, 3)
    assert within(rep, 8 / 3)


def test_se_is_sample_sd_over_sqrt_runs():
    # one Bernoulli draw per run: the sample variance is p(1-p) n/(n-1)
    n = 10_000
    rep = simulate_prophet(HorizonDist.degenerate(1), ValueDist.two_point(0.0, 1.0, 0.3), n, 5)
    p = rep.estimate
    assert rep.se == pytest.approx(math.sqrt(p * (1 - p) / (n - 1)), rel=1e-12)


def test_determinism_across_workers():
    H, X = HorizonDist.zipf(30, 0.2), ValueDist.pareto(0.7)
    pol = FixedThreshold(2.0)
    a = simulate_paired(H, X, pol, 50_000, 42, chunk_size=4096, workers=1)
    b = simulate_paired(H, X, pol, 50_000, 42, chunk_size=4096, workers=4)
    assert a.to_json() == b.to_json()
    c = simulate_paired(H, X, pol, 50_000, 43, chunk_size=4096)
    assert c.estimate != a.estimate


def test_fixed_and_randomized_q1_are_run_for_run_equal():
    H, X = HorizonDist.geometric(0.8), ValueDist.uniform(0, 1)
    a = simulate_policy(H, X, FixedThreshold(0.6), 30_000, 8)
    b = simulate_policy(H, X, RandomizedThreshold(0.6, 1.0), 30_000, 8)
    assert a.estimate == b.estimate and a.se == b.se


def test_paired_ratio():
    H, X = HorizonDist.geometric(0.9), ValueDist.uniform(0, 1)
    rep = simulate_paired(H, X, FixedThreshold(0.9), 200_000, 21)
    exact = threshold_value(H, X, 0.9)
    assert abs(rep.ratio - exact.ratio) <= 3 * rep.ratio_se
    assert rep.ratio == pytest.approx(rep.estimate / rep.prophet, rel=1e-15)


def test_secretary_examples():
    rep = secretary_win_prob(1, 1, 1000, 1)
    assert rep.estimate == 1.0 and rep.exact == 1.0
    rep = secretary_win_prob(100, secretary_waiting_index(100), 100_000, 2)
    assert within(rep, rep.exact)
    rep = secretary_win_prob(9, 1, 100_000, 3)
    assert rep.exact == pytest.approx(1 / 9) and within(rep, 1 / 9)
    with pytest.raises(ValidationError):
        secretary_win_prob(5, 6, 10, 1)


def test_secretary_samplers_agree():
    for m, r in ((5, 2), (30, 12)):
        a = secretary_win_prob(m, r, 100_000, 4, method="skip")
        b = secretary_win_prob(m, r, 100_000, 5, method="direct")
        assert abs(a.estimate - b.estimate) <= 3 * math.hypot(a.se, b.se)
        assert within(b, b.exact)


def test_sp_rule_large_eps():
    rep = simulate_sp_on_family(hard_family(2000, 5.0), 100_000, 31)
    assert rep.ratio >= sp_guarantee(5.0) - 3 * rep.ratio_se


def test_sp_rule_degenerate_family():
    rep = simulate_sp_on_family(hard_family(2, 0.5), 20_000, 32)
    assert rep.ratio > 0


def test_bad_seed():
    with pytest.raises(ValidationError):
        chunk_generator(-1, 0)
