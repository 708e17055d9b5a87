"""Pareto values against power-law horizons: the family on which every single
threshold rule does vanishingly well, its perturbation with extra mass at
h = 1, and the asymptotic constants attached to both."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn

from .distributions import HorizonDist, ValidationError, ValueDist, pareto_max_mean
from .policies import secretary_waiting_index

__all__ = [
    "HardFamilyPoint",
    "PerturbedFamilyPoint",
    "NumericFailure",
    "hard_family",
    "pareto_prophet_mean",
    "pareto_max_asymptote",
    "normalizer_asymptote",
    "prophet_constant",
    "hard_prophet_mean",
    "threshold_objective",
    "optimality_residual",
    "optimal_single_threshold",
    "hard_ratio_curve",
    "perturbed_horizon",
    "gbar_step_verify",
    "cv_limit",
    "hard_family_cv",
    "horizon_moment_asymptotics",
    "sp_finite_bound",
]


class NumericFailure(ArithmeticError):
    """A solver failed to bracket or certify its answer."""


def _psum(a) -> float:
    a = np.asarray(a, dtype=float)
    return math.fsum(a.tolist()) if a.size <= 200_000 else float(np.sum(a))


@dataclass
class HardFamilyPoint:
    m: int
    eps: float
    ell: int
    Z: float
    horizon: HorizonDist
    values: ValueDist

    @property
    def exponent(self) -> float:
        return 1.0 / (1.0 + 2.0 * self.eps)


def hard_family(m: int, eps: float, ell: int = 2) -> HardFamilyPoint:
    """P(H_m = h) proportional to h^-1/(1+2 eps) on [ell, m]; values Pareto(1+eps)."""
    if not eps > 0:
        raise ValidationError("eps must be > 0")
    if not 1 <= ell <= m:
        raise ValidationError("need 1 <= ell <= m")
    h = np.arange(ell, m + 1)
    w = h.astype(float) ** (-1.0 / (1.0 + 2.0 * eps))
    Z = _psum(w)
    H = HorizonDist.finite(h, w / Z, renormalize=True)
    return HardFamilyPoint(int(m), float(eps), int(ell), Z, H, ValueDist.pareto(eps))


def pareto_prophet_mean(n, eps: float):
    """E[M_n] for Pareto(1+eps): n Beta(n, 1 - 1/(1+eps))."""
    return pareto_max_mean(n, eps)


def pareto_max_asymptote(n, eps: float):
    return gamma_fn(1.0 - 1.0 / (1.0 + eps)) * np.asarray(n, dtype=float) ** (1.0 / (1.0 + eps))


def normalizer_asymptote(m: int, eps: float) -> float:
    return (1.0 + 1.0 / (2.0 * eps)) * m ** (2.0 * eps / (1.0 + 2.0 * eps))


def prophet_constant(eps: float) -> float:
    """N(eps) with E M_{H_m} ~ N m^{1/(1+eps)}."""
    return gamma_fn(1.0 - 1.0 / (1.0 + eps)) / (
        (1.0 + eps / ((1.0 + eps) * (1.0 + 2.0 * eps))) * (1.0 + 1.0 / (2.0 * eps)))


def hard_prophet_mean(pt: HardFamilyPoint) -> tuple[float, float]:
    """(exact E M_{H_m}, asymptote N m^{1/(1+eps)})."""
    H = pt.horizon
    exact = _psum(H.pmf * pareto_prophet_mean(H.support, pt.eps))
    return exact, prophet_constant(pt.eps) * pt.m ** (1.0 / (1.0 + pt.eps))


# single-threshold optimization



def threshold_objective(pt: HardFamilyPoint, pi: float) -> float:
    """f_m(pi): expected reward of accepting the first value >= pi."""
    e = pt.eps
    if pi <= 1.0:
        return (1.0 + e) / e
    s = pi ** (-(1.0 + e))
    return (1.0 + 1.0 / e) * pi * pt.horizon.hit_probability(s)


def optimality_residual(pt: HardFamilyPoint, pi: float) -> float:
    """g_m(pi) - 1 with g_m = E(1-s)^H + (1+eps) s E[H (1-s)^(H-1)], s = pi^-(1+eps).

    f_m'(pi) = -(1 + 1/eps) (g_m(pi) - 1), so the sign locates the maximum.
    """
    e = pt.eps
    s = pi ** (-(1.0 + e))
    H = pt.horizon
    if s >= 1.0:
        g = (1.0 + e) * float(H.pmf_at(1))
        return g - 1.0
    h = H.support.astype(float)
    lg = math.log1p(-s)
    pw = np.exp(h * lg)
    a = _psum(H.pmf * pw)
    b = _psum(H.pmf * h * np.exp((h - 1.0) * lg))
    return a + (1.0 + e) * s * b - 1.0


@dataclass
class ThresholdOptimum:
    pi_bar: float
    value: float
    c: float
    residual: float
    boundary: bool
    bracket: tuple
    audit_max: float


def optimal_single_threshold(pt: HardFamilyPoint, audit_points: int = 512,
                             scan_points: int = 256) -> ThresholdOptimum:
    """Best fixed threshold for the family point.

    The bracket starts at [1, 2 (E H)^(1/(1+eps))] and doubles its right end
    until f_m decreases there.  A log-spaced scan picks the best cell, golden
    section refines it, and bisection on g_m - 1 polishes the stationary point
    to 1e-10 relative.  The result must satisfy |g_m - 1| < 1e-8 and beat
    every point of a 512-point audit grid.
    """
    e = pt.eps
    ex = (1.0 + e) / e
    f = lambda x: threshold_objective(pt, x)
    r1 = optimality_residual(pt, 1.0)
    hi = 2.0 * pt.horizon.mean ** (1.0 / (1.0 + e))
    for _ in range(60):
        if optimality_residual(pt, hi) > 0:  # f decreasing at hi
            break
        hi *= 2.0
    else:
        raise NumericFailure("bracket growth exceeded 60 doublings")
    if r1 >= 0 and all(f(x) <= ex * (1 + 1e-12) for x in np.geomspace(1.0, hi, 64)[1:]):
        return ThresholdOptimum(1.0, ex, 1.0, r1, True, (1.0, hi), ex)

    grid = np.geomspace(1.0, hi, scan_points)
    vals = np.array([f(x) for x in grid])
    k = int(np.argmax(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    # golden section on [a, b]
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - gr * (b - a), a + gr * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(80):
        if b - a <= 1e-12 * b:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = f(d)
    x0 = 0.5 * (a + b)
    # polish the stationary point: residual < 0 left of the max, > 0 right of it
    lo, hi_b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    if optimality_residual(pt, lo) < 0 < optimality_residual(pt, hi_b):
        for _ in range(200):
            mid = 0.5 * (lo + hi_b)
            if optimality_residual(pt, mid) < 0:
                lo = mid
            else:
                hi_b = mid
            if hi_b - lo <= 1e-10 * hi_b:
                break
        x1 = 0.5 * (lo + hi_b)
        # the maximum is flat, so f values within rounding cannot rank the two
        pi_bar = x1 if f(x1) >= f(x0) * (1.0 - 1e-13) else x0
    else:
        pi_bar = x0
    val = f(pi_bar)
    res = optimality_residual(pt, pi_bar)
    if abs(res) >= 1e-8:
        raise NumericFailure(f"optimality residual {res:.3e} not below 1e-8 at pi = {pi_bar!r}")
    audit = max(f(x) for x in np.geomspace(1.0, grid[-1], audit_points))
    if val < audit * (1.0 - 1e-12):
        raise NumericFailure("audit grid beats the polished threshold")
    c_pi = pt.horizon.hit_probability(pi_bar ** (-(1.0 + e)))
    return ThresholdOptimum(float(pi_bar), float(val), float(c_pi), float(res), False,
                            (1.0, float(grid[-1])), float(audit))


def hard_ratio_curve(eps: float, m_grid, ell: int = 2) -> list[dict]:
    """Rows (m, Z_m, E_H, E_MH, pi_bar, gambler, ratio) of the optimal single-threshold ratio."""
    rows = []
    for m in m_grid:
        pt = hard_family(int(m), eps, ell)
        emh, _ = hard_prophet_mean(pt)
        opt = optimal_single_threshold(pt)
        rows.append({"m": int(m), "Z_m": pt.Z, "E_H": pt.horizon.mean, "E_MH": emh,
                     "pi_bar": opt.pi_bar, "gambler": opt.value, "ratio": opt.value / emh})
    return rows


# perturbed family

@dataclass
class PerturbedFamilyPoint:
    base: HardFamilyPoint
    C: float
    delta: float
    Z_tilde: float
    horizon: HorizonDist
    mu_tilde: float
    eps_m: float
    eta_m: float


def perturbed_horizon(m: int, eps: float) -> PerturbedFamilyPoint:
    """Add weight delta_m = C m^(2eps/(1+2eps)), C = (3+10eps)/(2eps), at h = 1."""
    if not 0 < eps < 0.25:
        raise ValidationError("perturbed family needs 0 < eps < 1/4")
    base = hard_family(m, eps, 2)
    C = (3.0 + 10.0 * eps) / (2.0 * eps)
    delta = C * m ** (2.0 * eps / (1.0 + 2.0 * eps))
    Zt = base.Z + delta
    h = np.concatenate([[1], base.horizon.support])
    w = np.concatenate([[delta], base.horizon.support.astype(float) ** (-base.exponent)])
    H = HorizonDist.finite(h, w / Zt, renormalize=True)
    mu_t = delta / Zt + base.horizon.mean * base.Z / Zt
    eps_m = Zt / mu_t
    eta = (1.0 - eps_m / delta) / (1.0 - 1.0 / mu_t)
    return PerturbedFamilyPoint(base, C, delta, Zt, H, mu_t, eps_m, eta)


def gbar_step_verify(pt: PerturbedFamilyPoint, n: int = 4096) -> dict:
    """Minimum slack of the three inequalities that together give pgf
    domination by the mean-matched geometric.

    (a) -delta t + eps_m t / (1 - t rho) <= 0 on (0, eta_m], rho = 1 - 1/mu~,
        evaluated as delta rho t (eta_m - t)/(1 - t rho);
    (b) sum h(h-1) t^(h-2) h^-a < 2 eps_m rho / (1 - t rho)^3 on [eta_m, 1);
    (c) sum_{h>=2} t^h h^-a >= -delta t + eps_m t/(1 - t rho) on (0, 1),
        which is Z~ (pgf_H~ - pgf_G) and is evaluated through 1 - pgf.
    """
    base = pt.base
    rho = 1.0 - 1.0 / pt.mu_tilde
    eta = pt.eta_m
    hs = base.horizon.support.astype(float)
    w = hs ** (-base.exponent)

    ta = eta * np.arange(1, n + 1) / n
    sa = pt.delta * rho * ta * (eta - ta) / (1.0 - ta * rho)
    ka = int(np.argmin(sa))

    tb = eta + (1.0 - eta) * np.arange(0, n) / n
    lhs_b = np.array([_psum(hs * (hs - 1.0) * w * np.exp((hs - 2.0) * math.log(t))) for t in tb])
    sb = 2.0 * pt.eps_m * rho / (1.0 - tb * rho) ** 3 - lhs_b
    kb = int(np.argmin(sb))

    tc = np.arange(1, n + 1) / (n + 1.0)
    H = pt.horizon
    one_minus_geo = (1.0 - tc) / (1.0 - tc * rho)
    sc = pt.Z_tilde * (one_minus_geo - H.hit_probability(1.0 - tc))
    kc = int(np.argmin(sc))
    return {
        "slack_linear": float(sa[ka]), "t_linear": float(ta[ka]),
        "slack_concave": float(sb[kb]), "t_concave": float(tb[kb]),
        "slack_target": float(sc[kc]), "t_target": float(tc[kc]),
        "eta_m": eta, "eps_m": pt.eps_m, "delta_m": pt.delta, "mu_tilde": pt.mu_tilde,
    }


# moments and concentration of the horizon

def cv_limit(eps: float) -> float:
    """Limit of Var H_m / (E H_m)^2: (1+4eps)^2/(4eps(1+3eps)) - 1."""
    return (1.0 + 4.0 * eps) ** 2 / (4.0 * eps * (1.0 + 3.0 * eps)) - 1.0


def hard_family_cv(eps: float, m: int, ell: int = 2) -> tuple[float, float]:
    pt = hard_family(m, eps, ell)
    H = pt.horizon
    mu = H.mean
    return H.moment(2) / (mu * mu) - 1.0, cv_limit(eps)


def horizon_moment_asymptotics(eps: float, n: int, m_grid, ell: int = 2) -> list[dict]:
    """Exact E H_m^n against 2 eps m^n / (n + 2(n+1) eps)."""
    rows = []
    for m in m_grid:
        pt = hard_family(int(m), eps, ell)
        ex = pt.horizon.moment(n)
        asym = 2.0 * eps * float(m) ** n / (n + 2.0 * (n + 1.0) * eps)
        rows.append({"m": int(m), "moment": ex, "asymptote": asym, "ratio": ex / asym})
    return rows


def sp_finite_bound(pt: HardFamilyPoint) -> float:
    """Exact finite-m lower bound on the secretary rule's ratio:
    sum_{i >= r} S_m(i) P(best of m is the first relative maximum at i),
    with P(W_i) = (r-1)/(m(i-1)) (or 1/m for i = r = 1)."""
    m = pt.m
    r = secretary_waiting_index(m)
    S = pt.horizon.survival(np.arange(r, m + 1))
    if r == 1:
        w = np.concatenate([[1.0 / m], (0.0 / m) * np.ones(m - 1)])
    else:
        i = np.arange(r, m + 1, dtype=float)
        w = (r - 1) / (m * (i - 1.0))
    return _psum(S * w)
