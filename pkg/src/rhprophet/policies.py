"""Stopping rules as per-step decision functions.

Every policy exposes a vectorized ``decide(i, x, u, best_x, best_u)`` over
many runs at step ``i`` (1-based) and a scalar ``step`` built on it.  ``u`` is
the auxiliary uniform attached to the current value; ``best_x``/``best_u``
hold the lexicographic running maximum of earlier (value, uniform) pairs
(``-inf`` before the first step).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import ValidationError, ValueDist

__all__ = [
    "Policy",
    "FixedThreshold",
    "RandomizedThreshold",
    "TieBreakThreshold",
    "StepThresholds",
    "SecretaryRule",
    "select_ex_ante_threshold",
    "select_tie_break_threshold",
    "secretary_waiting_index",
    "secretary_win_exact",
    "sp_guarantee",
    "policy_from_json",
]


class Policy:
    tag = "policy"

    def decide(self, i: int, x, u, best_x, best_u):
        raise NotImplementedError

    def step(self, i: int, x: float, running_max=None, u: float = 0.0) -> bool:
        """Scalar decision; ``running_max`` is the (value, uniform) pair of the
        best earlier value, or None at the first step."""
        bx, bu = running_max if running_max is not None else (-math.inf, 0.0)
        return bool(self.decide(i, np.array([x]), np.array([u]), np.array([bx]), np.array([bu]))[0])


@dataclass(frozen=True)
class FixedThreshold(Policy):
    pi: float
    tag = "threshold"

    def decide(self, i, x, u, best_x, best_u):
        return x >= self.pi


@dataclass(frozen=True)
class RandomizedThreshold(Policy):
    """Accept a value >= pi with probability q (coin read from the auxiliary uniform)."""
    pi: float
    q: float
    tag = "randomized"

    def __post_init__(self):
        if not 0.0 < self.q <= 1.0:
            raise ValidationError("randomization probability must lie in (0, 1]")

    def decide(self, i, x, u, best_x, best_u):
        return (x >= self.pi) & (u < self.q)


@dataclass(frozen=True)
class TieBreakThreshold(Policy):
    """Accept every value > pi, and a value equal to pi with probability q."""
    pi: float
    q: float
    tag = "tie_break"

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValidationError("tie-break probability must lie in [0, 1]")

    def decide(self, i, x, u, best_x, best_u):
        return (x > self.pi) | ((x == self.pi) & (u < self.q))


@dataclass(frozen=True)
class StepThresholds(Policy):
    """Accept at step i iff x >= thresholds[i-1]; never accept past the table."""
    thresholds: tuple
    tag = "step_thresholds"

    def decide(self, i, x, u, best_x, best_u):
        if i > len(self.thresholds):
            return np.zeros(np.shape(x), dtype=bool)
        return x >= self.thresholds[i - 1]


@dataclass(frozen=True)
class SecretaryRule(Policy):
    """Skip the first r-1 values, then take the first strict relative maximum."""
    r: int
    tag = "secretary"

    def __post_init__(self):
        if self.r < 1:
            raise ValidationError("waiting index must be >= 1")

    def decide(self, i, x, u, best_x, best_u):
        if i < self.r:
            return np.zeros(np.shape(x), dtype=bool)
        return (x > best_x) | ((x == best_x) & (u > best_u))


def select_ex_ante_threshold(X: ValueDist, mu: float) -> tuple[float, float]:
    """Threshold p and acceptance probability q with P(X >= p) q = 1/mu.

    For an atom whose jump straddles 1/mu, p is that atom and q < 1.
    """
    if mu < 1.0:
        raise ValidationError("mu must be >= 1")
    target = 1.0 / mu
    if X.kind == "pareto":
        return mu ** (1.0 / (1.0 + X.eps)), 1.0
    if X.kind == "uniform":
        return X.b - (X.b - X.a) * target, 1.0
    tails = X._tail
    k = int(np.nonzero(tails >= target - 1e-15)[0][-1])
    T = float(tails[k])
    q = 1.0 if abs(mu * T - 1.0) <= 1e-12 else min(1.0, 1.0 / (mu * T))
    return float(X.atoms[k]), q


def select_tie_break_threshold(X: ValueDist, mu: float) -> tuple[float, float]:
    """Threshold p and tie probability q with P(X > p) + q P(X = p) = 1/mu.

    Unlike ``select_ex_ante_threshold`` this keeps every value above p, so the
    accepted values are exactly the top 1/mu quantile of X.
    """
    if mu < 1.0:
        raise ValidationError("mu must be >= 1")
    if X.atoms is None:
        p, _ = select_ex_ante_threshold(X, mu)
        return p, 1.0
    target = 1.0 / mu
    tails = X._tail
    k = int(np.nonzero(tails >= target - 1e-15)[0][-1])
    above = float(tails[k + 1]) if k + 1 < tails.size else 0.0
    q = (target - above) / float(X.probs[k])
    return float(X.atoms[k]), min(1.0, max(0.0, q))


def secretary_waiting_index(m: int) -> int:
    """Smallest r >= 1 with sum_{k=r}^{m-1} 1/k <= 1."""
    if m < 1:
        raise ValidationError("m must be >= 1")
    r, s = m, 0.0
    while r > 1 and s + 1.0 / (r - 1) <= 1.0:
        s += 1.0 / (r - 1)
        r -= 1
    return r


def secretary_win_exact(m: int, r: int) -> float:
    """P(rule with waiting index r picks the overall best of m)."""
    if not 1 <= r <= m:
        raise ValidationError("need 1 <= r <= m")
    if r == 1:
        return 1.0 / m
    k = np.arange(r - 1, m, dtype=float)
    return (r - 1) / m * math.fsum((1.0 / k).tolist())


def sp_guarantee(eps: float) -> float:
    """g(eps) = (1/e)(1 - (1 + 1/(2 eps))(1 - exp(-2 eps/(1+2 eps))))."""
    if not eps > 0:
        raise ValidationError("eps must be > 0")
    x = 2.0 * eps / (1.0 + 2.0 * eps)
    # 1 - (1 - e^-x)/x, series for small x
    if x < 1e-4:
        inner = x / 2.0 - x * x / 6.0 + x**3 / 24.0
    else:
        inner = (math.expm1(-x) + x) / x
    return inner / math.e


def policy_from_json(spec: dict) -> Policy | str:
    """Policy from JSON; ``backward_induction`` comes back as that string and
    is resolved against a horizon by the caller."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValidationError("policy: expected an object with 'kind'")
    kind = spec["kind"]
    allowed = {"threshold": {"pi"}, "randomized": {"pi", "q"}, "tie_break": {"pi", "q"}, "secretary": {"m", "r"},
               "backward_induction": set(), "step_thresholds": {"thresholds"}}
    if kind not in allowed:
        raise ValidationError(f"policy.kind: unknown kind {kind!r}")
    extra = set(spec) - allowed[kind] - {"kind"}
    if extra:
        raise ValidationError(f"policy.{kind}: unknown key(s) {sorted(extra)}")
    try:
        if kind == "threshold":
            return FixedThreshold(float(spec["pi"]))
        if kind == "randomized":
            return RandomizedThreshold(float(spec["pi"]), float(spec["q"]))
        if kind == "tie_break":
            return TieBreakThreshold(float(spec["pi"]), float(spec["q"]))
        if kind == "secretary":
            if "r" in spec:
                return SecretaryRule(int(spec["r"]))
            return SecretaryRule(secretary_waiting_index(int(spec["m"])))
        if kind == "step_thresholds":
            return StepThresholds(tuple(float(t) for t in spec["thresholds"]))
    except KeyError as e:
        raise ValidationError(f"policy.{kind}: missing key {e.args[0]!r}") from None
    return "backward_induction"
