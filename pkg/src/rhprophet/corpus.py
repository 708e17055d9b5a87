"""Seeded random instances for property checks."""
from __future__ import annotations

import numpy as np

from .distributions import HorizonDist, ValueDist


def random_horizon(rng: np.random.Generator, max_m: int = 25) -> HorizonDist:
    kind = rng.integers(0, 6)
    if kind == 0:
        # arbitrary sparse table
        m = int(rng.integers(1, max_m + 1))
        k = int(rng.integers(1, min(m, 8) + 1))
        support = np.sort(rng.choice(np.arange(1, m + 1), size=k, replace=False))
        return HorizonDist.finite(support, rng.dirichlet(np.ones(k)), renormalize=True)
    if kind == 1:
        # increasing hazard: lands in every class of the inclusion chain
        m = int(rng.integers(2, max_m + 1))
        lam = np.sort(rng.uniform(0.02, 0.9, m - 1))
        S = np.concatenate([[1.0], np.cumprod(1.0 - lam)])
        return HorizonDist.from_survival(S)
    if kind == 2:
        return HorizonDist.geometric(float(rng.uniform(0.05, 0.9)))
    if kind == 3:
        lo = int(rng.integers(1, 6))
        return HorizonDist.uniform(lo, lo + int(rng.integers(0, 10)))
    if kind == 4:
        return HorizonDist.degenerate(int(rng.integers(1, 12)))
    return HorizonDist.zipf(int(rng.integers(2, max_m + 1)), float(rng.uniform(0.0, 1.5)))


def random_value(rng: np.random.Generator, continuous: bool | None = None,
                 bounded: bool = False) -> ValueDist:
    kinds = ["atomic", "two_point", "uniform", "pareto"]
    if continuous is True:
        kinds = ["uniform"] if bounded else ["uniform", "pareto"]
    elif continuous is False:
        kinds = ["atomic", "two_point"]
    elif bounded:
        kinds = ["atomic", "two_point", "uniform"]
    kind = kinds[int(rng.integers(0, len(kinds)))]
    if kind == "atomic":
        k = int(rng.integers(1, 5))
        atoms = np.round(rng.uniform(0, 10, k), 3)
        atoms = np.unique(atoms)
        return ValueDist.atomic(atoms, rng.dirichlet(np.ones(atoms.size)), renormalize=True)
    if kind == "two_point":
        x1 = float(rng.uniform(0, 2))
        return ValueDist.two_point(x1, x1 + float(rng.uniform(0.1, 3)), float(rng.uniform(0.01, 0.99)))
    if kind == "uniform":
        a = float(rng.uniform(0, 2))
        return ValueDist.uniform(a, a + float(rng.uniform(0.1, 5)))
    return ValueDist.pareto(float(rng.uniform(0.2, 3.0)))


def tiny_instance(rng: np.random.Generator) -> tuple[HorizonDist, ValueDist]:
    """|supp H| <= 4, at most 4 atoms, max horizon <= 6."""
    m = int(rng.integers(1, 7))
    k = int(rng.integers(1, min(4, m) + 1))
    # m is always in the support so the cap is attained
    rest = rng.choice(np.arange(1, m), size=k - 1, replace=False) if k > 1 else []
    support = np.sort(np.append(rest, m)).astype(int)
    H = HorizonDist.finite(support, rng.dirichlet(np.ones(support.size)), renormalize=True)
    a = int(rng.integers(1, 5))
    atoms = np.unique(rng.integers(0, 20, a)) / 4.0
    X = ValueDist.atomic(atoms, rng.dirichlet(np.ones(atoms.size)), renormalize=True)
    return H, X


def threshold_grid(X: ValueDist, n: int = 64) -> np.ndarray:
    """n thresholds spanning the bulk of X (atoms included when present)."""
    lo = X.lower
    hi = X.upper if np.isfinite(X.upper) else 50.0
    grid = np.linspace(0.0, hi * 1.05, n)
    if X.atoms is not None:
        grid = np.unique(np.concatenate([X.atoms, grid]))[:n]
        if grid.size < n:
            grid = np.concatenate([grid, np.linspace(lo, hi, n - grid.size)])
    return grid
