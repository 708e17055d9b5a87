"""Seeded simulation of the gambler and the prophet.

Runs are split into fixed-size chunks.  Chunk ``c`` draws from a Philox
generator keyed by ``(seed, c)``, so results depend only on (seed, runs,
chunk_size) and never on how chunks are scheduled across threads.  Within a
chunk every run draws its horizon, then its values and auxiliary uniforms
step by step; the draws do not depend on the policy, so gambler and prophet
(and two different policies) share random numbers run for run.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .distributions import HorizonDist, ValidationError, ValueDist
from .policies import Policy, SecretaryRule, secretary_waiting_index, secretary_win_exact

__all__ = [
    "SimReport",
    "simulate_policy",
    "simulate_prophet",
    "simulate_paired",
    "secretary_win_prob",
    "simulate_sp_on_family",
    "chunk_generator",
    "DEFAULT_CHUNK",
]

DEFAULT_CHUNK = 1 << 14


@dataclass
class SimReport:
    estimate: float
    se: float
    runs: int
    seed: int
    policy: str
    prophet: float | None = None
    prophet_se: float | None = None
    ratio: float | None = None
    ratio_se: float | None = None
    chunk_size: int = DEFAULT_CHUNK
    exact: float | None = None

    def to_json(self) -> dict:
        return asdict(self)


def chunk_generator(seed: int, chunk: int) -> np.random.Generator:
    if seed < 0:
        raise ValidationError("seed must be >= 0")
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, chunk], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _play_chunk(H: HorizonDist, X: ValueDist, policy: Policy | None, n: int, rng):
    h = H.sample(rng.random(n))
    h = np.sort(h)[::-1]  # active runs at step i form a prefix
    hmax = int(h[0])
    # active[i-1] = #runs with h >= i
    active = np.searchsorted(-h, -np.arange(1, hmax + 1), side="right")
    best_x = np.full(n, -math.inf)
    best_u = np.zeros(n)
    pay = np.zeros(n)
    stopped = np.zeros(n, dtype=bool)
    live = n  # runs not yet stopped (counted over all runs)
    for i in range(1, hmax + 1):
        k = int(active[i - 1])
        x = X.sample(rng.random(k))
        u = rng.random(k)
        bx, bu = best_x[:k], best_u[:k]
        if policy is not None and live:
            acc = policy.decide(i, x, u, bx, bu)
            acc = acc & ~stopped[:k]
            if acc.any():
                pay[:k][acc] = x[acc]
                stopped[:k] |= acc
                live -= int(acc.sum())
        better = (x > bx) | ((x == bx) & (u > bu))
        bx[better] = x[better]
        bu[better] = u[better]
    return pay, best_x


def _moments(g, p):
    # count, means, centered co-moments
    n = g.size
    mg, mp = float(np.mean(g)), float(np.mean(p))
    dg, dp = g - mg, p - mp
    return [n, mg, mp, float(np.dot(dg, dg)), float(np.dot(dp, dp)), float(np.dot(dg, dp))]


def _combine(a, b):
    # pairwise update of means and co-moments (Chan et al.)
    n = a[0] + b[0]
    dg, dp = b[1] - a[1], b[2] - a[2]
    f = a[0] * b[0] / n
    return [n, a[1] + dg * b[0] / n, a[2] + dp * b[0] / n,
            a[3] + b[3] + dg * dg * f, a[4] + b[4] + dp * dp * f, a[5] + b[5] + dg * dp * f]


def _run(H, X, policy, runs, seed, chunk_size, workers):
    if runs < 1:
        raise ValidationError("runs must be >= 1")
    n_chunks = -(-runs // chunk_size)
    sizes = [min(chunk_size, runs - c * chunk_size) for c in range(n_chunks)]

    def job(c):
        g, p = _play_chunk(H, X, policy, sizes[c], chunk_generator(seed, c))
        return _moments(g, p)

    if workers and workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(job, range(n_chunks)))
    else:
        parts = [job(c) for c in range(n_chunks)]
    acc = parts[0]
    for part in parts[1:]:  # fixed order: identical result for any worker count
        acc = _combine(acc, part)
    return acc


def _report(acc, seed, tag, chunk_size, paired=True) -> SimReport:
    n, mg, mp, sgg, spp, sgp = acc
    den = max(n - 1, 1)
    vg, vp, cgp = sgg / den, spp / den, sgp / den
    se_g = math.sqrt(vg / n)
    se_p = math.sqrt(vp / n)
    ratio = ratio_se = None
    if paired and mp > 0:
        ratio = mg / mp
        # delta method for a ratio of paired means
        ratio_se = math.sqrt(max(vg - 2 * ratio * cgp + ratio * ratio * vp, 0.0) / n) / mp
    return SimReport(mg, se_g, int(n), int(seed), tag, mp, se_p, ratio, ratio_se, chunk_size)


def simulate_paired(H: HorizonDist, X: ValueDist, policy: Policy, runs: int, seed: int,
                    chunk_size: int = DEFAULT_CHUNK, workers: int = 1) -> SimReport:
    """Gambler payoff under ``policy`` with the prophet's maximum on the same draws."""
    acc = _run(H, X, policy, runs, seed, chunk_size, workers)
    return _report(acc, seed, getattr(policy, "tag", "policy"), chunk_size)


def simulate_policy(H: HorizonDist, X: ValueDist, policy: Policy, runs: int, seed: int,
                    chunk_size: int = DEFAULT_CHUNK, workers: int = 1) -> SimReport:
    """Mean payoff (0 when nothing is accepted by step h) and its standard error.
    The paired prophet estimate and ratio come along for free."""
    return simulate_paired(H, X, policy, runs, seed, chunk_size, workers)


def simulate_prophet(H: HorizonDist, X: ValueDist, runs: int, seed: int,
                     chunk_size: int = DEFAULT_CHUNK, workers: int = 1) -> SimReport:
    n, _, mp, _, spp, _ = _run(H, X, None, runs, seed, chunk_size, workers)
    se = math.sqrt(spp / max(n - 1, 1) / n)
    return SimReport(mp, se, int(n), int(seed), "prophet", chunk_size=chunk_size)


def _secretary_skip(m, r, n, rng):
    # Uniform values; jump straight to the first value above the benchmark.
    u = rng.random((4, n))
    if r == 1:
        y = u[0]
        rest = m - 1
        if rest == 0:
            return np.ones(n, dtype=bool)
        return np.log1p(-u[3]) < rest * np.log(np.maximum(y, 1e-300))
    logb = np.log1p(-u[0]) / (r - 1)  # log of the max of the first r-1 values
    k = 1 + np.floor(np.log1p(-u[1]) / np.minimum(logb, -1e-300))
    pos = (r - 1) + k
    ok = pos <= m
    one_minus_b = -np.expm1(logb)
    log_y = np.log1p(-one_minus_b * (1.0 - u[2]))  # y uniform on (b, 1)
    rest = np.where(ok, m - pos, 0)
    win = ok & ((rest == 0) | (np.log1p(-u[3]) < rest * log_y))
    return win


def _secretary_direct(m, r, n, rng):
    x = rng.random((n, m))
    u = rng.random((n, m))
    rule = SecretaryRule(r)
    best_x = np.full(n, -math.inf)
    best_u = np.zeros(n)
    pick = np.full(n, -1.0)
    done = np.zeros(n, dtype=bool)
    for i in range(1, m + 1):
        xi, ui = x[:, i - 1], u[:, i - 1]
        acc = rule.decide(i, xi, ui, best_x, best_u) & ~done
        pick[acc] = xi[acc]
        done |= acc
        better = (xi > best_x) | ((xi == best_x) & (ui > best_u))
        best_x = np.where(better, xi, best_x)
        best_u = np.where(better, ui, best_u)
    return done & (pick == best_x)


def secretary_win_prob(m: int, r: int, runs: int, seed: int, method: str = "skip",
                       chunk_size: int = DEFAULT_CHUNK) -> SimReport:
    """Frequency with which the waiting rule picks the best of m uniform values.

    ``skip`` draws the benchmark maximum, the waiting time to the first value
    above it, that value, and the maximum of what follows, which is exact in
    law and costs O(1) per run.  ``direct`` plays every value.
    """
    if not 1 <= r <= m:
        raise ValidationError("need 1 <= r <= m")
    play = {"skip": _secretary_skip, "direct": _secretary_direct}[method]
    n_chunks = -(-runs // chunk_size)
    wins = 0
    for c in range(n_chunks):
        n = min(chunk_size, runs - c * chunk_size)
        wins += int(play(m, r, n, chunk_generator(seed, c)).sum())
    p = wins / runs
    se = math.sqrt(p * (1 - p) / max(runs - 1, 1))
    return SimReport(p, se, runs, seed, f"secretary_r{r}", chunk_size=chunk_size,
                     exact=secretary_win_exact(m, r))


def simulate_sp_on_family(pt, runs: int, seed: int, chunk_size: int = DEFAULT_CHUNK,
                          workers: int = 1) -> SimReport:
    """Secretary rule with the optimal waiting index for m, played on H_m with
    Pareto values; ratio against the prophet on shared draws."""
    rule = SecretaryRule(secretary_waiting_index(pt.m))
    return simulate_paired(pt.horizon, pt.values, rule, runs, seed, chunk_size, workers)
