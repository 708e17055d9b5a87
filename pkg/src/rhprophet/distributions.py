"""Horizon and value distributions.

Horizons are laws on the positive integers (finite tables or geometric).
Values are nonnegative laws (atomic tables, two-point, Pareto with scale 1,
uniform).  Both are immutable after construction.
"""
from __future__ import annotations

import math
from typing import Any, Sequence

import numpy as np
from scipy.special import gammaln

__all__ = [
    "HorizonDist",
    "ValueDist",
    "ZeroTailError",
    "ValidationError",
    "PROB_TOL",
    "horizon_from_json",
    "value_from_json",
    "pareto_max_mean",
]

PROB_TOL = 1e-12
# geometric tails below this are dropped when a truncated sum is needed
_SUM_TAIL = 1e-18


class ValidationError(ValueError):
    """Raised when an input violates a distribution invariant."""


class ZeroTailError(ValueError):
    """P(X >= pi) is zero, so the conditional mean above pi is undefined."""

    def __init__(self, pi):
        super().__init__(f"P(X >= {pi!r}) = 0: conditional mean undefined")
        self.pi = pi


def _fsum(a) -> float:
    a = np.asarray(a, dtype=float)
    if a.size <= 200_000:
        return math.fsum(a.tolist())
    return float(np.sum(a))


def _check_probs(p: np.ndarray, renormalize: bool, what: str) -> np.ndarray:
    if p.ndim != 1 or p.size == 0:
        raise ValidationError(f"{what}: probabilities must be a non-empty 1-d list")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValidationError(f"{what}: probabilities must be finite and >= 0")
    total = _fsum(p)
    if renormalize:
        if total <= 0:
            raise ValidationError(f"{what}: zero total mass")
        return p / total
    if abs(total - 1.0) > PROB_TOL:
        raise ValidationError(f"{what}: probabilities sum to {total!r}, not 1 within {PROB_TOL}")
    return p


class HorizonDist:
    """Law of the random number of values H >= 1.

    Use the classmethod constructors.  ``kind`` is ``"finite"`` (sparse
    support table) or ``"geometric"`` (failure probability ``q``, so
    P(H = h) = (1-q) q^(h-1)).
    """

    __slots__ = ("kind", "support", "pmf", "q", "_tail", "_mean", "_var", "label")

    def __init__(self, kind, support=None, pmf=None, q=None, label=None):
        self.kind = kind
        self.support = support
        self.pmf = pmf
        self.q = q
        self.label = label
        if kind == "finite":
            # _tail[k] = P(H >= support[k]); last entry P(H > max) = 0
            tail = np.concatenate([np.cumsum(pmf[::-1])[::-1], [0.0]])
            tail[0] = 1.0
            self._tail = tail
            self._mean = _fsum(support * pmf)
            second = _fsum(support.astype(float) ** 2 * pmf)
            self._var = max(second - self._mean**2, 0.0)
        else:
            self._tail = None
            self._mean = 1.0 / (1.0 - q)
            self._var = q / (1.0 - q) ** 2

    # construction

    @classmethod
    def finite(cls, support: Sequence[int], pmf: Sequence[float], renormalize: bool = False,
               label: str | None = None) -> "HorizonDist":
        s = np.asarray(support)
        p = np.asarray(pmf, dtype=float)
        if s.shape != p.shape:
            raise ValidationError("support and pmf must have the same length")
        if s.size == 0:
            raise ValidationError("empty support")
        if not np.all(np.equal(np.mod(s, 1), 0)):
            raise ValidationError("support points must be integers")
        s = s.astype(np.int64)
        if s[0] < 1:
            raise ValidationError("support minimum must be >= 1 (no mass at zero)")
        if np.any(np.diff(s) <= 0):
            raise ValidationError("support must be strictly increasing")
        p = _check_probs(p, renormalize, "horizon")
        # zero-mass points carry no information; drop them so max support is meaningful
        keep = p > 0
        return cls("finite", s[keep], p[keep].copy(), label=label)

    @classmethod
    def from_survival(cls, survival: Sequence[float], label: str | None = None) -> "HorizonDist":
        """Table from S(1), S(2), ..., S(m) with S(1) = 1."""
        S = np.asarray(survival, dtype=float)
        if S.size == 0 or abs(S[0] - 1.0) > PROB_TOL:
            raise ValidationError("survival must start at S(1) = 1")
        if np.any(np.diff(S) > PROB_TOL) or S[-1] < 0:
            raise ValidationError("survival must be nonincreasing and nonnegative")
        pmf = S - np.concatenate([S[1:], [0.0]])
        return cls.finite(np.arange(1, S.size + 1), pmf, label=label)

    @classmethod
    def geometric(cls, q: float) -> "HorizonDist":
        if not 0.0 <= q < 1.0:
            raise ValidationError("geometric failure probability must lie in [0, 1)")
        if q == 0.0:
            return cls.degenerate(1)
        return cls("geometric", q=float(q))

    @classmethod
    def geometric_with_mean(cls, mu: float) -> "HorizonDist":
        if mu < 1.0:
            raise ValidationError("geometric mean must be >= 1")
        return cls.geometric(1.0 - 1.0 / mu)

    @classmethod
    def degenerate(cls, c: int) -> "HorizonDist":
        return cls.finite([int(c)], [1.0], label=f"const{c}")

    @classmethod
    def uniform(cls, lo: int, hi: int) -> "HorizonDist":
        n = hi - lo + 1
        if lo < 1 or n < 1:
            raise ValidationError("uniform horizon needs 1 <= lo <= hi")
        return cls.finite(np.arange(lo, hi + 1), np.full(n, 1.0 / n), renormalize=True)

    @classmethod
    def zipf(cls, n: int, a: float) -> "HorizonDist":
        """P(H = h) proportional to h^-a on {1..n}."""
        if n < 1:
            raise ValidationError("zipf needs n >= 1")
        h = np.arange(1, n + 1)
        w = h.astype(float) ** (-float(a))
        return cls.finite(h, w / _fsum(w), renormalize=True, label=f"zipf{n}_{a}")

    def truncated(self, tail: float = 1e-12) -> "HorizonDist":
        """Finite table agreeing with a geometric law up to survival mass ``tail``.

        The dropped tail is folded into the last support point, so S(h) is
        exact for every h up to the cut.
        """
        if self.kind == "finite":
            return self
        if not 0 < tail < 1:
            raise ValidationError("tail mass must lie in (0, 1)")
        K = max(1, int(math.ceil(math.log(tail) / math.log(self.q))))
        h = np.arange(1, K + 1)
        p = (1.0 - self.q) * self.q ** (h - 1.0)
        p[-1] = self.q ** (K - 1)  # = S(K)
        return HorizonDist.finite(h, p, renormalize=True)

    # basic quantities

    @property
    def mean(self) -> float:
        return self._mean

    @property
    def var(self) -> float:
        return self._var

    @property
    def max_support(self) -> float:
        return float(self.support[-1]) if self.kind == "finite" else math.inf

    @property
    def min_support(self) -> int:
        return int(self.support[0]) if self.kind == "finite" else 1

    def survival(self, h):
        """P(H >= h)."""
        h = np.asarray(h)
        if self.kind == "geometric":
            out = np.where(h <= 1, 1.0, self.q ** (np.maximum(h, 1) - 1.0))
        else:
            out = self._tail[np.searchsorted(self.support, h, side="left")]
        return float(out) if out.ndim == 0 else out

    def pmf_at(self, h):
        h = np.asarray(h)
        if self.kind == "geometric":
            out = np.where(h >= 1, (1.0 - self.q) * self.q ** (np.maximum(h, 1) - 1.0), 0.0)
        else:
            idx = np.clip(np.searchsorted(self.support, h), 0, self.support.size - 1)
            out = np.where(self.support[idx] == h, self.pmf[idx], 0.0)
        return float(out) if out.ndim == 0 else out

    def hazard(self, h):
        """P(H = h) / P(H >= h), set to 1 beyond the support."""
        h = np.asarray(h)
        if self.kind == "geometric":
            out = np.full(h.shape, 1.0 - self.q)
        else:
            S = self.survival(h)
            p = self.pmf_at(h)
            out = np.where(h > self.support[-1], 1.0, p / np.where(S > 0, S, 1.0))
        return float(out) if out.ndim == 0 else out

    def dense_survival(self) -> np.ndarray:
        """Array of S(1..m) for a finite table."""
        self._need_finite("dense_survival")
        return self.survival(np.arange(1, self.support[-1] + 1))

    def _need_finite(self, what):
        if self.kind != "finite":
            raise ValidationError(f"{what} needs a finite table; truncate the geometric first")

    def _terms(self):
        """(support, pmf) pairs covering all but ~1e-18 of the mass."""
        if self.kind == "finite":
            return self.support, self.pmf
        K = max(2, int(math.ceil(math.log(_SUM_TAIL) / math.log(self.q))) + 1)
        h = np.arange(1, K + 1)
        return h, (1.0 - self.q) * self.q ** (h - 1.0)

    def expect(self, fn) -> float:
        """E[fn(H)] for a vectorized ``fn``; geometric laws are summed to tail 1e-18."""
        h, p = self._terms()
        return _fsum(p * fn(h))

    # generating functions

    def pgf(self, t):
        """E[t^H]."""
        t_arr = np.asarray(t, dtype=float)
        if np.any((t_arr < 0) | (t_arr > 1)):
            raise ValidationError("pgf argument must lie in [0, 1]")
        if self.kind == "geometric":
            out = (1.0 - self.q) * t_arr / (1.0 - self.q * t_arr)
        else:
            out = 1.0 - np.asarray(self.hit_probability(1.0 - t_arr))
        return float(out) if out.ndim == 0 else out

    def hit_probability(self, s):
        """1 - E[(1-s)^H]: chance that an event of per-step probability s occurs within H steps.

        Computed as E[-expm1(H log1p(-s))] so tiny s and huge H stay accurate.
        """
        s_arr = np.asarray(s, dtype=float)
        if self.kind == "geometric":
            q = self.q
            out = s_arr / (1.0 - q + q * s_arr)
        else:
            h = self.support.astype(float)
            flat = s_arr.reshape(-1)
            res = np.empty(flat.size)
            for j, sj in enumerate(flat):
                if sj >= 1.0:
                    res[j] = 1.0
                elif sj <= 0.0:
                    res[j] = 0.0
                else:
                    res[j] = _fsum(self.pmf * -np.expm1(h * math.log1p(-sj)))
            out = res.reshape(s_arr.shape)
        return float(out) if out.ndim == 0 else out

    def moment(self, n: int) -> float:
        if n < 1:
            raise ValidationError("moment order must be >= 1")
        if self.kind == "geometric":
            if n == 1:
                return self._mean
            if n == 2:
                return (1.0 + self.q) / (1.0 - self.q) ** 2
        h, p = self._terms()
        with np.errstate(over="ignore"):
            val = _fsum(p * h.astype(float) ** n)
        if not math.isfinite(val):
            raise OverflowError(f"moment of order {n} overflows")
        return val

    # sampling

    def sample(self, u: np.ndarray) -> np.ndarray:
        """Inverse-cdf transform of uniforms in [0, 1)."""
        if self.kind == "geometric":
            return 1 + np.floor(np.log1p(-u) / math.log(self.q)).astype(np.int64)
        cdf = np.cumsum(self.pmf)
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), self.support.size - 1)
        return self.support[idx]

    # serialization

    def to_json(self) -> dict:
        if self.kind == "geometric":
            return {"kind": "geometric", "q": self.q}
        return {"kind": "finite", "support": self.support.tolist(), "pmf": self.pmf.tolist()}

    def __repr__(self):
        if self.kind == "geometric":
            return f"HorizonDist.geometric(q={self.q})"
        return f"HorizonDist(finite, m={self.support[-1]}, n_support={self.support.size})"


def pareto_max_mean(n, eps: float):
    """E[max of n iid Pareto(1+eps) values] = n B(n, eps/(1+eps)), via log-Gamma."""
    if eps <= 0:
        raise ValidationError("pareto mean diverges for eps <= 0")
    n = np.asarray(n, dtype=float)
    b = eps / (1.0 + eps)
    out = np.exp(np.log(n) + gammaln(n) + gammaln(b) - gammaln(n + b))
    return float(out) if out.ndim == 0 else out


class ValueDist:
    """Nonnegative value law.

    kinds: ``atomic`` (sorted atoms and probabilities), ``two_point``
    (stored as a two-atom table), ``pareto`` with V(x) = 1 - x^-(1+eps) on
    [1, inf), and ``uniform`` on [a, b].
    """

    __slots__ = ("kind", "atoms", "probs", "eps", "a", "b", "_tail")

    def __init__(self, kind, atoms=None, probs=None, eps=None, a=None, b=None):
        self.kind = kind
        self.atoms = atoms
        self.probs = probs
        self.eps = eps
        self.a = a
        self.b = b
        self._tail = None
        if atoms is not None:
            t = np.cumsum(probs[::-1])[::-1].copy()
            t[0] = 1.0
            self._tail = t  # _tail[k] = P(X >= atoms[k])

    @classmethod
    def atomic(cls, atoms: Sequence[float], probs: Sequence[float], renormalize: bool = False) -> "ValueDist":
        x = np.asarray(atoms, dtype=float)
        p = np.asarray(probs, dtype=float)
        if x.shape != p.shape or x.ndim != 1 or x.size == 0:
            raise ValidationError("atoms and probs must be equal-length non-empty lists")
        if not np.all(np.isfinite(x)) or np.any(x < 0):
            raise ValidationError("atoms must be finite and nonnegative")
        p = _check_probs(p, renormalize, "value")
        order = np.argsort(x, kind="stable")
        x, p = x[order], p[order]
        if np.any(np.diff(x) == 0):
            raise ValidationError("atoms must be distinct")
        keep = p > 0
        return cls("atomic", atoms=x[keep], probs=p[keep].copy())

    @classmethod
    def two_point(cls, x1: float, x2: float, p: float) -> "ValueDist":
        """P(X = x2) = p, P(X = x1) = 1 - p, with 0 <= x1 < x2."""
        if not 0 <= x1 < x2:
            raise ValidationError("two-point law needs 0 <= x1 < x2")
        if not 0 <= p <= 1:
            raise ValidationError("p must lie in [0, 1]")
        d = cls.atomic([x1, x2], [1.0 - p, p])
        d.kind = "two_point"
        return d

    @classmethod
    def point(cls, c: float) -> "ValueDist":
        return cls.atomic([c], [1.0])

    @classmethod
    def pareto(cls, eps: float) -> "ValueDist":
        if not eps > 0:
            raise ValidationError("pareto needs eps > 0 (finite mean)")
        return cls("pareto", eps=float(eps))

    @classmethod
    def uniform(cls, a: float = 0.0, b: float = 1.0) -> "ValueDist":
        if not 0 <= a < b:
            raise ValidationError("uniform needs 0 <= a < b")
        return cls("uniform", a=float(a), b=float(b))

    # properties

    @property
    def is_continuous(self) -> bool:
        return self.kind in ("pareto", "uniform")

    @property
    def lower(self) -> float:
        if self.atoms is not None:
            return float(self.atoms[0])
        return 1.0 if self.kind == "pareto" else self.a

    @property
    def upper(self) -> float:
        if self.atoms is not None:
            return float(self.atoms[-1])
        return math.inf if self.kind == "pareto" else self.b

    @property
    def mean(self) -> float:
        if self.atoms is not None:
            return _fsum(self.atoms * self.probs)
        if self.kind == "pareto":
            return (1.0 + self.eps) / self.eps
        return 0.5 * (self.a + self.b)

    def cdf(self, x):
        """V(x) = P(X <= x)."""
        x = np.asarray(x, dtype=float)
        if self.atoms is not None:
            idx = np.searchsorted(self.atoms, x, side="right")
            out = np.where(idx > 0, 1.0 - np.concatenate([self._tail, [0.0]])[idx], 0.0)
        elif self.kind == "pareto":
            out = np.where(x < 1.0, 0.0, -np.expm1(-(1.0 + self.eps) * np.log(np.maximum(x, 1.0))))
        else:
            out = np.clip((x - self.a) / (self.b - self.a), 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def tail(self, x):
        """P(X >= x), closed at x."""
        x = np.asarray(x, dtype=float)
        if self.atoms is not None:
            idx = np.searchsorted(self.atoms, x, side="left")
            out = np.concatenate([self._tail, [0.0]])[idx]
        elif self.kind == "pareto":
            out = np.where(x <= 1.0, 1.0, np.exp(-(1.0 + self.eps) * np.log(np.maximum(x, 1.0))))
        else:
            out = np.clip((self.b - x) / (self.b - self.a), 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def excess_mean(self, c: float) -> float:
        """E[(X - c)^+]."""
        if self.atoms is not None:
            return _fsum(np.maximum(self.atoms - c, 0.0) * self.probs)
        if self.kind == "pareto":
            if c <= 1.0:
                return self.mean - c
            return c ** (-self.eps) / self.eps
        a, b = self.a, self.b
        if c <= a:
            return self.mean - c
        if c >= b:
            return 0.0
        return (b - c) ** 2 / (2.0 * (b - a))

    def expected_max_scaled(self, s: float, v: float) -> float:
        """E[max(s X, v)] for s > 0, v >= 0."""
        return v + s * self.excess_mean(v / s)

    def tail_stats(self, pi: float) -> tuple[float, float]:
        """(P(X >= pi), E[X | X >= pi]); raises ZeroTailError if the tail is empty."""
        t = self.tail(pi)
        if t <= 0.0:
            raise ZeroTailError(pi)
        if self.atoms is not None:
            k = int(np.searchsorted(self.atoms, pi, side="left"))
            cm = _fsum(self.atoms[k:] * self.probs[k:]) / _fsum(self.probs[k:])
        elif self.kind == "pareto":
            cm = (1.0 + 1.0 / self.eps) * max(pi, 1.0)
        else:
            cm = 0.5 * (max(pi, self.a) + self.b)
        return t, cm

    def max_mean(self, n):
        """E[max(X_1..X_n)] for an array of sample sizes n >= 1."""
        n = np.asarray(n, dtype=float)
        if self.atoms is not None:
            # x_1 + sum_k (x_{k+1} - x_k) P(M > x_k)
            gaps = np.diff(self.atoms)
            below = 1.0 - self._tail[1:]  # V(x_k) for k < last
            logv = np.log(np.maximum(below, 1e-300))
            acc = np.full(n.shape, self.atoms[0])
            for g, lv, v in zip(gaps, logv, below):
                acc = acc + g * (-np.expm1(n * lv) if v > 0 else 1.0)
            out = acc
        elif self.kind == "pareto":
            out = np.asarray(pareto_max_mean(n, self.eps))
        else:
            out = self.a + (self.b - self.a) * n / (n + 1.0)
        return float(out) if np.ndim(out) == 0 else out

    def sample(self, u: np.ndarray) -> np.ndarray:
        """Inverse-cdf transform of uniforms in [0, 1)."""
        if self.atoms is not None:
            cdf = 1.0 - self._tail[1:]
            idx = np.searchsorted(cdf, u, side="right")
            return self.atoms[idx]
        if self.kind == "pareto":
            return np.exp(-np.log1p(-u) / (1.0 + self.eps))
        return self.a + (self.b - self.a) * u

    def to_json(self) -> dict:
        if self.kind == "two_point":
            return {"kind": "two_point", "x1": float(self.atoms[0]), "x2": float(self.atoms[-1]),
                    "p": float(self.probs[-1])}
        if self.atoms is not None:
            return {"kind": "atomic", "atoms": self.atoms.tolist(), "probs": self.probs.tolist()}
        if self.kind == "pareto":
            return {"kind": "pareto", "epsilon": self.eps}
        return {"kind": "uniform", "a": self.a, "b": self.b}

    def __repr__(self):
        return f"ValueDist({self.to_json()})"


def _take(spec: dict, allowed: set, where: str) -> dict:
    if not isinstance(spec, dict):
        raise ValidationError(f"{where}: expected a JSON object")
    extra = set(spec) - allowed - {"kind"}
    if extra:
        raise ValidationError(f"{where}: unknown key(s) {sorted(extra)}")
    return spec


def _need(spec: dict, key: str, where: str) -> Any:
    if key not in spec:
        raise ValidationError(f"{where}: missing key '{key}'")
    return spec[key]


def horizon_from_json(spec: dict) -> HorizonDist:
    """Build a horizon from its JSON description."""
    kind = spec.get("kind") if isinstance(spec, dict) else None
    w = f"horizon.{kind}"
    if kind == "finite":
        _take(spec, {"support", "pmf", "renormalize"}, w)
        return HorizonDist.finite(_need(spec, "support", w), _need(spec, "pmf", w),
                                  renormalize=bool(spec.get("renormalize", False)))
    if kind == "survival":
        _take(spec, {"survival"}, w)
        return HorizonDist.from_survival(_need(spec, "survival", w))
    if kind == "geometric":
        _take(spec, {"q", "mean", "truncate"}, w)
        if "mean" in spec:
            H = HorizonDist.geometric_with_mean(float(spec["mean"]))
        else:
            H = HorizonDist.geometric(float(_need(spec, "q", w)))
        if "truncate" in spec:
            H = H.truncated(float(spec["truncate"]))
        return H
    if kind == "degenerate":
        _take(spec, {"h"}, w)
        return HorizonDist.degenerate(int(_need(spec, "h", w)))
    if kind == "uniform":
        _take(spec, {"lo", "hi"}, w)
        return HorizonDist.uniform(int(_need(spec, "lo", w)), int(_need(spec, "hi", w)))
    if kind == "zipf":
        _take(spec, {"n", "a"}, w)
        return HorizonDist.zipf(int(_need(spec, "n", w)), float(_need(spec, "a", w)))
    raise ValidationError(f"horizon.kind: unknown kind {kind!r}")


def value_from_json(spec: dict) -> ValueDist:
    """Build a value law from its JSON description."""
    kind = spec.get("kind") if isinstance(spec, dict) else None
    w = f"value.{kind}"
    if kind == "atomic":
        _take(spec, {"atoms", "probs", "renormalize"}, w)
        return ValueDist.atomic(_need(spec, "atoms", w), _need(spec, "probs", w),
                                renormalize=bool(spec.get("renormalize", False)))
    if kind == "two_point":
        _take(spec, {"x1", "x2", "p"}, w)
        return ValueDist.two_point(float(_need(spec, "x1", w)), float(_need(spec, "x2", w)),
                                   float(_need(spec, "p", w)))
    if kind == "pareto":
        _take(spec, {"epsilon"}, w)
        return ValueDist.pareto(float(_need(spec, "epsilon", w)))
    if kind == "uniform":
        _take(spec, {"a", "b"}, w)
        return ValueDist.uniform(float(spec.get("a", 0.0)), float(spec.get("b", 1.0)))
    if kind == "point":
        _take(spec, {"c"}, w)
        return ValueDist.point(float(_need(spec, "c", w)))
    raise ValidationError(f"value.kind: unknown kind {kind!r}")
