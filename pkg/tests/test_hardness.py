import math

import mpmath
import numpy as np
import pytest

from rhprophet.classify import DOMINATED, pgf_order_check
from rhprophet.distributions import HorizonDist, ValidationError, ValueDist
from rhprophet.exact import prophet_value, threshold_value
from rhprophet.hardness import (HardFamilyPoint, cv_limit, gbar_step_verify, hard_family,
                                hard_family_cv, hard_prophet_mean, hard_ratio_curve,
                                horizon_moment_asymptotics, normalizer_asymptote,
                                optimal_single_threshold, optimality_residual,
                                pareto_max_asymptote, pareto_prophet_mean, perturbed_horizon,
                                prophet_constant, sp_finite_bound, threshold_objective)


def test_family_pmf_and_normalizer():
    pt = hard_family(500, 0.1)
    h = np.arange(2, 501)
    w = h ** (-1 / 1.2)
    assert pt.Z == pytest.approx(math.fsum(w), rel=1e-14)
    assert np.allclose(pt.horizon.pmf, w / math.fsum(w), rtol=1e-13)
    assert pt.horizon.min_support == 2 and pt.horizon.max_support == 500


@pytest.mark.parametrize("eps", [0.01, 0.1, 0.5])
def test_normalizer_offset_tends_to_zeta(eps):
    # sum_{h=2}^m h^-s = m^(1-s)/(1-s) + zeta(s) - 1 + O(m^-s)
    s = 1 / (1 + 2 * eps)
    offset = float(mpmath.zeta(s)) - 1
    ratios = []
    for m in (10**3, 10**4, 10**5, 10**6):
        pt = hard_family(m, eps)
        asym = normalizer_asymptote(m, eps)
        assert abs(pt.Z - asym - offset) < 2 * m ** (-s)
        ratios.append(pt.Z / asym)
    # so Z_m / asymptote -> 1, here monotonically
    assert np.all(np.diff(ratios) > 0) and ratios[-1] < 1


def test_pareto_prophet_mean():
    assert pareto_prophet_mean(1, 1.0) == pytest.approx(2.0, rel=1e-14)
    assert pareto_prophet_mean(2, 1.0) == pytest.approx(8 / 3, rel=1e-14)
    r = pareto_prophet_mean(10**6, 0.5) / pareto_max_asymptote(10**6, 0.5)
    assert 0.99 <= r <= 1.01
    n = np.arange(1, 5000)
    assert np.all(np.diff(pareto_prophet_mean(n, 0.05)) > 0)


def test_hard_prophet_mean():
    exact, asym = hard_prophet_mean(hard_family(10**5, 0.5))
    assert 0.95 <= exact / asym <= 1.05
    pt = hard_family(2, 0.3)
    assert hard_prophet_mean(pt)[0] == pytest.approx(pareto_prophet_mean(2, 0.3), rel=1e-14)
    assert hard_prophet_mean(pt)[0] == pytest.approx(prophet_value(pt.horizon, pt.values), rel=1e-12)
    N = [prophet_constant(e) for e in (1e-2, 1e-3, 1e-4)]
    assert np.all(np.diff(np.abs(np.array(N) - 2)) < 0) and abs(N[-1] - 2) < 1e-3


def test_threshold_objective_matches_exact_module():
    pt = hard_family(300, 0.2)
    for pi in (1.0, 1.7, 5.0, 40.0):
        assert threshold_objective(pt, pi) == pytest.approx(
            threshold_value(pt.horizon, pt.values, pi).gambler, rel=1e-12)


def test_residual_is_derivative():
    pt = hard_family(1000, 0.1)
    for pi in (2.0, 30.0, 300.0):
        d = pi * 1e-6
        num = (threshold_objective(pt, pi + d) - threshold_objective(pt, pi - d)) / (2 * d)
        assert num == pytest.approx(-(1 + 1 / 0.1) * optimality_residual(pt, pi), rel=1e-5, abs=1e-9)


def test_degenerate_horizon_boundary_case():
    eps = 0.5
    pt = HardFamilyPoint(1, eps, 1, 1.0, HorizonDist.degenerate(1), ValueDist.pareto(eps))
    opt = optimal_single_threshold(pt)
    assert opt.pi_bar == 1.0 and opt.value == pytest.approx((1 + eps) / eps)


def test_optimum_is_certified():
    pt = hard_family(10**4, 0.1)
    opt = optimal_single_threshold(pt)
    assert abs(opt.residual) < 1e-8
    grid = np.geomspace(1.0, opt.bracket[1], 2000)
    assert opt.value >= max(threshold_objective(pt, x) for x in grid) * (1 - 1e-12)


def test_ratio_decreases_small_eps():
    rows = hard_ratio_curve(0.01, [10**3, 10**4, 10**5])
    r = [row["ratio"] for row in rows]
    assert r[0] > r[1] > r[2]
    assert set(rows[0]) == {"m", "Z_m", "E_H", "E_MH", "pi_bar", "gambler", "ratio"}


def test_ratio_large_eps_stays_away_from_zero():
    rows = hard_ratio_curve(5.0, [2, 100, 1000, 10**4])
    assert all(row["ratio"] > 0.7 for row in rows)


def test_perturbed_construction():
    pt = perturbed_horizon(10**3, 0.1)
    assert pt.C == pytest.approx(20.0, rel=1e-15)
    assert math.fsum(pt.horizon.pmf) == pytest.approx(1.0, abs=1e-12)
    assert pt.delta == pytest.approx(20 * 1000 ** (0.2 / 1.2), rel=1e-14)
    assert pt.mu_tilde == pytest.approx(pt.horizon.mean, rel=1e-12)
    with pytest.raises(ValidationError):
        perturbed_horizon(100, 0.3)


def test_perturbed_is_gbar_member():
    pt = perturbed_horizon(10**4, 0.1)
    rep = pgf_order_check(pt.horizon, DOMINATED)
    assert rep.verdict == "member" and rep.margin >= -1e-12


def test_step1_linear_and_target_slacks():
    for m in (10**3, 10**4):
        sl = gbar_step_verify(perturbed_horizon(m, 0.1))
        assert sl["slack_linear"] >= 0
        assert sl["slack_target"] >= 0


def test_step1_concave_slack_against_high_precision():
    # The grid value of the second-derivative inequality agrees with a
    # 40-digit evaluation at the reported point.
    pt = perturbed_horizon(10**3, 0.1)
    sl = gbar_step_verify(pt)
    mpmath.mp.dps = 40
    t = mpmath.mpf(sl["t_concave"])
    rho = 1 - 1 / mpmath.mpf(pt.mu_tilde)
    a = mpmath.mpf(pt.base.exponent)
    lhs = mpmath.fsum(h * (h - 1) * t ** (h - 2) * mpmath.mpf(h) ** (-a) for h in range(2, 1001))
    rhs = 2 * mpmath.mpf(pt.eps_m) * rho / (1 - t * rho) ** 3
    assert float(rhs - lhs) == pytest.approx(sl["slack_concave"], rel=1e-8)


def test_target_vanishes_at_zero():
    pt = perturbed_horizon(10**3, 0.1)
    rho = 1 - 1 / pt.mu_tilde
    t = 1e-9
    v = pt.Z_tilde * ((1 - t) / (1 - t * rho) - pt.horizon.hit_probability(1 - t))
    assert abs(v) < 1e-6


def test_small_m_report_is_finite():
    sl = gbar_step_verify(perturbed_horizon(10, 0.1))
    assert all(math.isfinite(sl[k]) for k in ("slack_linear", "slack_concave", "slack_target"))


def test_step2_prophet_and_threshold_domination():
    pt = perturbed_horizon(2000, 0.1)
    base = pt.base
    Ht, H = pt.horizon, base.horizon
    X = base.values
    assert prophet_value(Ht, X) > base.Z / pt.Z_tilde * prophet_value(H, X)
    i = np.arange(3, 2001)
    assert np.allclose(Ht.survival(i), H.survival(i) * base.Z / pt.Z_tilde, rtol=1e-12)
    for pi in (1.0, 2.0, 10.0, 100.0):
        assert threshold_value(Ht, X, pi).gambler <= threshold_value(H, X, pi).gambler + 1e-9


def test_cv_limits():
    assert cv_limit(1e8) == pytest.approx(1 / 3, abs=1e-6)
    assert cv_limit(0.001) > 100
    cv2, lim = hard_family_cv(0.1, 1000)
    pt = hard_family(1000, 0.1)
    assert cv2 == pytest.approx(pt.horizon.var / pt.horizon.mean**2, rel=1e-12)


def test_cv_converges_slowly_toward_limit():
    errs = [abs(c - l) / l for c, l in (hard_family_cv(0.1, m) for m in (10**3, 10**4, 10**5, 10**6))]
    assert np.all(np.diff(errs) < 0)


def test_moment_asymptotics():
    rows = horizon_moment_asymptotics(0.1, 1, [2, 10**3, 10**5])
    assert rows[1]["asymptote"] == pytest.approx(2 * 0.1 / (1 + 0.4) * 1000, rel=1e-14)
    assert abs(rows[0]["ratio"] - 1) > 1  # single-point horizon is far from the limit
    r = [row["ratio"] for row in rows]
    assert np.all(np.diff(np.abs(np.array(r) - 1)) < 0)


def test_sp_finite_bound_is_below_the_rule_value():
    # the bound counts only wins on the best-overall value
    pt = hard_family(200, 0.25)
    assert 0 < sp_finite_bound(pt) < 1
