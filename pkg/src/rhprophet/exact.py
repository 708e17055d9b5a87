"""Exact gambler and prophet values, optimal play by backward induction on the
survival-discounted problem, and a brute-force oracle for tiny instances."""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .distributions import HorizonDist, ValidationError, ValueDist, ZeroTailError

__all__ = [
    "EvalReport",
    "DiscountedPolicy",
    "threshold_value",
    "randomized_threshold_value",
    "tie_break_threshold_value",
    "prophet_value",
    "backward_induction",
    "geometric_fixed_point",
    "tight_instance",
    "tight_instance_ratio",
    "brute_force_optimal",
    "brute_force_by_rules",
    "BRUTE_CAPS",
]


@dataclass
class EvalReport:
    gambler: float
    prophet: float
    ratio: float
    method: str
    error: float = 0.0
    info: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def _report(g: float, p: float, method: str, error: float = 0.0, **info) -> EvalReport:
    ratio = g / p if p > 0 else 0.0
    return EvalReport(float(g), float(p), float(ratio), method, error, info)


def prophet_value(H: HorizonDist, X: ValueDist) -> float:
    """E[max(X_1..X_H)]."""
    if X.atoms is not None:
        # x_1 + sum_k (x_{k+1} - x_k) P(M_H > x_k); P(M_H > x) is a hit probability
        gaps = np.diff(X.atoms)
        tails = X._tail[1:]
        return float(X.atoms[0]) + math.fsum(float(g) * H.hit_probability(float(t))
                                             for g, t in zip(gaps, tails))
    return H.expect(X.max_mean)


def _threshold_core(H, X, pi, q):
    tail, cm = X.tail_stats(pi)
    c = H.hit_probability(q * tail)
    return c, c * cm


def threshold_value(H: HorizonDist, X: ValueDist, pi: float, prophet: float | None = None) -> EvalReport:
    """Accept the first value >= pi: gambler value c_pi E(X | X >= pi) with
    c_pi = 1 - E[P(X < pi)^H].  Raises ZeroTailError when P(X >= pi) = 0."""
    c, g = _threshold_core(H, X, pi, 1.0)
    p = prophet_value(H, X) if prophet is None else prophet
    return _report(g, p, "closed-form", c_pi=c)


def randomized_threshold_value(H: HorizonDist, X: ValueDist, pi: float, q: float,
                               prophet: float | None = None) -> EvalReport:
    """Accept a value >= pi with probability q: c = 1 - E[(1 - q P(X >= pi))^H]."""
    if not 0.0 < q <= 1.0:
        raise ValidationError("q must lie in (0, 1]")
    c, g = _threshold_core(H, X, pi, q)
    p = prophet_value(H, X) if prophet is None else prophet
    return _report(g, p, "closed-form", c_pi=c)


def tie_break_threshold_value(H: HorizonDist, X: ValueDist, pi: float, q: float,
                              prophet: float | None = None) -> EvalReport:
    """Accept values > pi always and values equal to pi with probability q.
    With a = P(X > pi) + q P(X = pi) the gambler earns
    hit(a) (E[X; X > pi] + q pi P(X = pi)) / a."""
    if not 0.0 <= q <= 1.0:
        raise ValidationError("q must lie in [0, 1]")
    if X.atoms is not None:
        k = int(np.searchsorted(X.atoms, pi, side="right"))
        above = float(X._tail[k]) if k < X.atoms.size else 0.0
        part = math.fsum((X.atoms[k:] * X.probs[k:]).tolist())
        j = k - 1
        at = float(X.probs[j]) if j >= 0 and X.atoms[j] == pi else 0.0
    else:
        above, at = X.tail(pi), 0.0
        part = above * X.tail_stats(pi)[1] if above > 0 else 0.0
    a = above + q * at
    if a <= 0.0:
        raise ZeroTailError(pi)
    c = H.hit_probability(a)
    g = c * (part + q * pi * at) / a
    p = prophet_value(H, X) if prophet is None else prophet
    return _report(g, p, "closed-form", c_pi=c)


@dataclass
class DiscountedPolicy:
    """Backward-induction solution. ``cont[i]`` holds v_{i+1} for i = 0..m
    (so cont[m] = 0); ``thresholds[i-1]`` is v_{i+1}/S(i)."""
    m: int
    cont: np.ndarray
    survival: np.ndarray
    thresholds: np.ndarray
    value: float

    def policy(self):
        from .policies import StepThresholds
        return StepThresholds(tuple(self.thresholds.tolist()))


def backward_induction(H: HorizonDist, X: ValueDist) -> DiscountedPolicy:
    """v_{m+1} = 0, v_i = E max(S(i) X, v_{i+1}); V_0 = v_1."""
    if H.kind != "finite":
        raise ValidationError("backward induction needs a finite horizon; use H.truncated(tail) first")
    m = int(H.support[-1])
    S = H.dense_survival()
    v = np.zeros(m + 2)  # v[i] = v_i, v[m+1] = 0
    for i in range(m, 0, -1):
        v[i] = X.expected_max_scaled(S[i - 1], v[i + 1])
    cont = v[1:]  # cont[i] = v_{i+1}
    thr = v[2:] / S
    return DiscountedPolicy(m, cont, S, thr, float(v[1]))


def geometric_fixed_point(q: float, X: ValueDist, tol: float = 1e-12) -> float:
    """Root of f(V) = V + int_{qV}^b F(x) dx - b on [0, b] by bisection.

    For geometric H with failure probability q this is the optimal value,
    attained by accepting the first value >= V.  f is increasing, so the
    least root is returned.
    """
    b = X.upper
    if not math.isfinite(b):
        raise ValidationError("geometric fixed point needs bounded values")
    if not 0.0 <= q < 1.0:
        raise ValidationError("q must lie in [0, 1)")

    def f(V):
        c = q * V
        # int_c^b F = (b - c) - E(X - c)^+
        return V + (b - c) - X.excess_mean(c) - b

    lo, hi = 0.0, b
    if f(lo) >= 0:
        return 0.0
    while hi - lo > tol * max(1.0, b):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return hi


def tight_instance(q: float, p: float, x2: float = 1.0) -> tuple[HorizonDist, ValueDist]:
    """Geometric horizon and two-point values with x1 = q p x2 / (1 - q(1-p))."""
    x1 = q * p * x2 / (1.0 - q * (1.0 - p))
    return HorizonDist.geometric(q), ValueDist.two_point(x1, x2, p)


def tight_instance_ratio(q: float, p: float) -> tuple[float, float]:
    """(optimal gambler/prophet on the tight instance, its p -> 0 limit 1/(1+q))."""
    r = 1.0 / ((1.0 - p) * (1.0 - q) * q / (1.0 - (1.0 - p) * q) + 1.0)
    return r, 1.0 / (1.0 + q)


# brute force

BRUTE_CAPS = {"support": 4, "atoms": 4, "m": 6}


def _check_tiny(H, X):
    if H.kind != "finite":
        raise ValidationError("brute force needs a finite horizon")
    if X.atoms is None:
        raise ValidationError("brute force needs atomic values")
    if H.support.size > BRUTE_CAPS["support"] or X.atoms.size > BRUTE_CAPS["atoms"] \
            or H.support[-1] > BRUTE_CAPS["m"]:
        raise ValidationError(f"brute force size cap exceeded {BRUTE_CAPS}")


def brute_force_optimal(H: HorizonDist, X: ValueDist) -> float:
    """Optimal value of the random-horizon game by full-history tree search.

    Works on the original game (reward x_i if stopped at i while H >= i),
    conditioning on survival at every node, in exact rational arithmetic.
    Maximizing at every history node is the same as maximizing over all
    deterministic history-dependent rules.
    """
    _check_tiny(H, X)
    m = int(H.support[-1])
    S = [Fraction(1)] + [sum((Fraction(float(p)) for h, p in zip(H.support, H.pmf) if h >= i), Fraction(0))
                         for i in range(1, m + 2)]
    S[1] = Fraction(1)
    atoms = [(Fraction(float(x)), Fraction(float(p))) for x, p in zip(X.atoms, X.probs)]
    tot = sum(p for _, p in atoms)
    atoms = [(x, p / tot) for x, p in atoms]

    def node(history):
        i = len(history)
        stop = history[-1]
        if i >= m or S[i + 1] == 0:
            return stop
        alive = S[i + 1] / S[i]
        cont = alive * sum(p * node(history + (x,)) for x, p in atoms)
        return max(stop, cont)

    return float(sum(p * node((x,)) for x, p in atoms))


def brute_force_by_rules(H: HorizonDist, X: ValueDist) -> float:
    """Literal enumeration of every deterministic rule (a stop/continue bit per
    history node), scored on the discounted rewards S(i) x_i.  Only for
    m <= 3 and at most 2 atoms."""
    _check_tiny(H, X)
    m = int(H.support[-1])
    k = X.atoms.size
    if m > 3 or k > 2:
        raise ValidationError("rule enumeration limited to m <= 3 and 2 atoms")
    S = [1.0] + [float(H.survival(i)) for i in range(1, m + 1)]
    nodes = [h for i in range(1, m) for h in itertools.product(range(k), repeat=i)]
    paths = list(itertools.product(range(k), repeat=m))
    pw = [math.prod(float(X.probs[j]) for j in path) for path in paths]
    best = -math.inf
    for bits in itertools.product((False, True), repeat=len(nodes)):
        rule = dict(zip(nodes, bits))
        tot = 0.0
        for path, w in zip(paths, pw):
            for i in range(1, m + 1):
                if i == m or rule[path[:i]]:
                    tot += w * S[i] * float(X.atoms[path[i - 1]])
                    break
        best = max(best, tot)
    return best
