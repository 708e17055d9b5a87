"""Horizon class certification (hazard monotonicity, pgf order, aging classes)
and the Lambert-W concentration test."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .distributions import HorizonDist, ValidationError

__all__ = [
    "ClassReport",
    "ConcentrationReport",
    "InadmissibleConstantError",
    "MARGIN_TOL",
    "hazard_monotonicity",
    "pgf_order_check",
    "pgf_grid",
    "pgf_margin",
    "aging_class_check",
    "lambert_w0",
    "concentration_check",
    "min_admissible_constant",
    "cv_bound",
    "classify",
]

MARGIN_TOL = 1e-12
GRID_SIZE = 2048
REFINE_DEPTH = 40

DOMINATES = "dominates"  # G class: pgf_G >= pgf_H
DOMINATED = "dominated"  # G-bar class: pgf_H >= pgf_G


@dataclass
class ClassReport:
    label: str
    verdict: str  # member | non-member | inconclusive
    margin: float
    witness: object = None
    grid_size: int = 0
    refine_depth: int = 0
    info: dict = field(default_factory=dict)

    @property
    def member(self) -> bool:
        return self.verdict == "member"

    def to_json(self) -> dict:
        d = asdict(self)
        if isinstance(self.witness, tuple):
            d["witness"] = list(self.witness)
        return d


def _verdict(margin: float) -> str:
    return "member" if margin >= -MARGIN_TOL else "non-member"


# hazard rate

def hazard_monotonicity(H: HorizonDist) -> tuple[ClassReport, ClassReport]:
    """IHR and DHR reports. Hazard is 1 beyond the support, so finite tables
    other than point masses fail DHR at the right boundary."""
    if H.kind == "geometric":
        return (ClassReport("ihr", "member", 0.0, 1), ClassReport("dhr", "member", 0.0, 1))
    m = int(H.support[-1])
    h = np.arange(1, m + 2)
    lam = H.hazard(h)  # lam[m] is the convention value 1
    d = np.diff(lam)  # lam(h+1) - lam(h), h = 1..m
    k = int(np.argmin(d))
    ihr = ClassReport("ihr", _verdict(d[k]), float(d[k]), k + 1)
    lo = H.min_support
    dd = -d[lo - 1:]
    j = int(np.argmin(dd))
    dhr = ClassReport("dhr", _verdict(dd[j]), float(dd[j]), lo + j)
    return ihr, dhr


# pgf order against the mean-matched geometric

def pgf_grid(n: int = GRID_SIZE) -> np.ndarray:
    """Half uniform on (0,1), half geometrically clustered toward t = 1."""
    half = n // 2
    uni = (np.arange(1, half + 1) - 0.5) / half
    clus = 1.0 - np.logspace(-0.3, -6.0, n - half)
    return np.unique(np.concatenate([uni, clus]))


def _one_minus_geo(t, mu):
    # 1 - pgf_G(t) = (1-t)/(1 - t(1-1/mu))
    return (1.0 - t) / (1.0 - t * (1.0 - 1.0 / mu))


def pgf_margin(H: HorizonDist, t, direction: str = DOMINATES):
    """Signed slack at t: pgf_G - pgf_H for ``dominates``, the negative otherwise.

    Both pgfs are evaluated through 1 - pgf, which has no cancellation.
    """
    mu = H.mean
    d = H.hit_probability(1.0 - np.asarray(t, dtype=float)) - _one_minus_geo(np.asarray(t, dtype=float), mu)
    return d if direction == DOMINATES else -d


def _margin_slope(H: HorizonDist, t: float, direction: str) -> float:
    mu = H.mean
    ro = 1.0 - 1.0 / mu
    dg = (1.0 / mu) / (1.0 - t * ro) ** 2
    if H.kind == "geometric":
        dh = (1.0 - H.q) / (1.0 - H.q * t) ** 2
    else:
        h = H.support.astype(float)
        with np.errstate(divide="ignore"):
            dh = float(np.sum(H.pmf * h * np.exp((h - 1.0) * math.log(t)))) if t > 0 else float(H.pmf_at(1))
    s = dg - dh
    return s if direction == DOMINATES else -s


def _err_bound(H, t):
    # rounding scale of the margin at t: both 1 - pgf terms are O(mu (1-t))
    n = 1 if H.kind == "geometric" else H.support.size
    return 64 * np.finfo(float).eps * math.log2(n + 2) * (
        H.hit_probability(1.0 - t) + _one_minus_geo(t, H.mean))


def pgf_order_check(H: HorizonDist, direction: str = DOMINATES, grid_size: int = GRID_SIZE,
                    depth: int = REFINE_DEPTH) -> ClassReport:
    """Compare H with the geometric law of equal mean in the pgf order.

    ``dominates`` checks E t^G >= E t^H (G class); ``dominated`` the
    reverse.  Grid-local minima below 1e-6 are refined by bisection on the
    sign of the derivative.  A margin inside (-1e-12, 1e-12) that is no
    larger than the rounding scale at its witness is reported inconclusive.
    """
    if direction not in (DOMINATES, DOMINATED):
        raise ValidationError(f"unknown direction {direction!r}")
    label = "g" if direction == DOMINATES else "gbar"
    mu = H.mean
    if mu < 1.0 + 1e-12:
        # H = 1 a.s. and its comparator coincide
        return ClassReport(label, "member", 0.0, 0.5, grid_size, 0, {"mu": mu})
    if H.kind == "geometric":
        return ClassReport(label, "member", 0.0, 0.5, grid_size, 0, {"mu": mu})
    t = pgf_grid(grid_size)
    mg = pgf_margin(H, t, direction)
    cands = [(float(mg[k]), float(t[k])) for k in range(t.size)]
    for k in range(1, t.size - 1):
        if mg[k] <= mg[k - 1] and mg[k] <= mg[k + 1] and mg[k] < 1e-6:
            lo, hi = float(t[k - 1]), float(t[k + 1])
            for _ in range(depth):
                mid = 0.5 * (lo + hi)
                if _margin_slope(H, mid, direction) < 0:
                    lo = mid
                else:
                    hi = mid
            tm = 0.5 * (lo + hi)
            cands.append((float(pgf_margin(H, tm, direction)), tm))
    margin, witness = min(cands)
    info = {"mu": mu}
    if margin < -MARGIN_TOL:
        verdict = "non-member"
    elif margin < MARGIN_TOL and abs(margin) <= _err_bound(H, witness):
        # the minimum is below the rounding scale, so its sign is not certified
        verdict = "inconclusive"
    else:
        verdict = "member"
    info["rounding_scale"] = float(_err_bound(H, witness))
    return ClassReport(label, verdict, margin, witness, grid_size, depth, info)


# aging classes

def aging_class_check(H: HorizonDist, cls: str) -> ClassReport:
    """NBU: min over h,k >= 2, h+k <= m+1 of S(h)S(k) - S(h+k).
    HNBUE: min over n <= m of mu - (harmonic mean of residual lives 1..n).

    Residual life counts the current step, m(h) = E(H - h + 1 | H >= h), so
    m(1) = mu and a geometric law has m(h) = mu for every h.
    """
    cls = cls.lower()
    if cls == "nbu":
        if H.kind == "geometric":
            # S(h)S(k) - S(h+k) = q^(h+k-2)(1-q) > 0 with infimum 0
            return ClassReport("nbu", "member", 0.0, None)
        m = int(H.support[-1])
        if m < 3:
            return ClassReport("nbu", "member", 0.0, None, info={"note": "no pairs with h,k>=2, h+k<=m+1"})
        S = H.survival(np.arange(0, m + 2))  # S[i] = S(i)
        best, arg = math.inf, None
        for h in range(2, (m + 1) // 2 + 1):
            k = np.arange(h, m + 2 - h)
            if k.size == 0:
                continue
            sl = S[h] * S[k] - S[h + k]
            j = int(np.argmin(sl))
            if sl[j] < best:
                best, arg = float(sl[j]), (h, int(k[j]))
        return ClassReport("nbu", _verdict(best), best, arg)
    if cls == "hnbue":
        mu = H.mean
        if H.kind == "geometric":
            return ClassReport("hnbue", "member", 0.0, 1)
        m = int(H.support[-1])
        S = H.survival(np.arange(1, m + 2))
        # sum_{j>=h} S(j) = E[(H-h+1)^+]
        cum = np.cumsum(S[::-1])[::-1][:m]
        mrl = cum / S[:m]
        n = np.arange(1, m + 1)
        hm = n / np.cumsum(1.0 / mrl)
        sl = mu - hm
        j = int(np.argmin(sl))
        return ClassReport("hnbue", _verdict(sl[j]), float(sl[j]), j + 1)
    raise ValidationError(f"unknown aging class {cls!r}")


# Lambert W, principal branch

_INV_E = math.exp(-1.0)


def lambert_w0(z: float) -> float:
    """Principal branch W0(z) for z >= -1/e: bracketed bisection, then Halley steps."""
    z = float(z)
    if not math.isfinite(z) or z < -_INV_E - 1e-15:
        raise ValidationError(f"lambert_w0: z = {z!r} outside [-1/e, inf)")
    if z == 0.0:
        return 0.0
    if z < -_INV_E + 1e-6:
        # branch-point series in p = sqrt(2(ez + 1))
        p = math.sqrt(max(2.0 * (math.e * z + 1.0), 0.0))
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3 - 43.0 / 540.0 * p**4 + 769.0 / 17280.0 * p**5

    def f(w):
        return w * math.exp(w) - z

    lo = -1.0
    hi = 1.0 if z <= math.e else math.log(z)
    while f(hi) < 0:
        hi *= 2.0
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    w = 0.5 * (lo + hi)
    for _ in range(8):
        ew = math.exp(w)
        fw = w * ew - z
        if fw == 0.0:
            break
        wp1 = w + 1.0
        step = fw / (ew * wp1 - (w + 2.0) * fw / (2.0 * wp1))
        w_new = w - step
        if not lo <= w_new <= hi:
            w_new = 0.5 * (lo + hi)
        if fw < 0:
            lo = max(lo, w)
        else:
            hi = min(hi, w)
        if abs(w_new - w) <= 1e-16 * max(1.0, abs(w)):
            w = w_new
            break
        w = w_new
    return w


# concentration test

class InadmissibleConstantError(ValidationError):
    def __init__(self, C, c_min):
        super().__init__(f"constant C = {C!r} below the admissible minimum {c_min!r}")
        self.C = C
        self.min_admissible = c_min


@dataclass
class ConcentrationReport:
    mu: float
    var: float
    C: float
    min_admissible: float
    cv: float
    cv_bound: float
    var_bound: float
    satisfied: bool

    def to_json(self) -> dict:
        return asdict(self)


def min_admissible_constant(mu: float) -> float:
    """Smallest C allowed for mean mu: 1 / (1 - (1 - 1/mu)^mu)."""
    return 1.0 / -math.expm1(mu * math.log1p(-1.0 / mu)) if mu > 1 else 1.0


def cv_bound(C: float) -> float:
    """sqrt(C - 1 + W0(-C e^-C))."""
    return math.sqrt(max(C - 1.0 + lambert_w0(-C * math.exp(-C)), 0.0))


def concentration_check(mu: float, var: float, C: float | None = None) -> ConcentrationReport:
    """Is CV = sigma/mu below the Lambert-W bound for constant C?  C defaults
    to 2 - 1/mu."""
    if not mu > 1.0:
        raise ValidationError("concentration check needs mu > 1")
    if var < 0:
        raise ValidationError("variance must be >= 0")
    if C is None:
        C = 2.0 - 1.0 / mu
    c_min = min_admissible_constant(mu)
    if C < c_min - 1e-12:
        raise InadmissibleConstantError(C, c_min)
    b = cv_bound(C)
    cv = math.sqrt(var) / mu
    vb = mu * mu * (C - 1.0 + lambert_w0(-C * math.exp(-C)))
    return ConcentrationReport(mu, var, C, c_min, cv, b, vb, var <= vb)


def classify(H: HorizonDist, classes) -> list[dict]:
    """JSON-ready reports for the requested class labels."""
    out = []
    ihr = dhr = None
    for c in classes:
        c = c.strip().lower()
        if c in ("ihr", "dhr"):
            if ihr is None:
                ihr, dhr = hazard_monotonicity(H)
            out.append((ihr if c == "ihr" else dhr).to_json())
        elif c == "g":
            out.append(pgf_order_check(H, DOMINATES).to_json())
        elif c == "gbar":
            out.append(pgf_order_check(H, DOMINATED).to_json())
        elif c in ("nbu", "hnbue"):
            out.append(aging_class_check(H, c).to_json())
        elif c == "cv":
            r = concentration_check(H.mean, H.var)
            out.append({"label": "cv", "verdict": "member" if r.satisfied else "non-member",
                        "margin": r.var_bound - r.var, "witness": None, "grid_size": 0,
                        "refine_depth": 0, "info": r.to_json()})
        else:
            raise ValidationError(f"classes: unknown class {c!r}")
    return out
