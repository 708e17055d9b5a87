"""Values pinned by the first oracle run and committed with the code.

Regenerate with ``python -m rhprophet.baselines`` only after a deliberate
numerical change; the acceptance suite treats these as regression ceilings.
"""

# optimal single-threshold ratio on the hard family, eps = 0.01, ell = 2
HARD_RATIO_EPS = 0.01
HARD_RATIO = {
    1_000: 0.955053529220716,
    10_000: 0.9550011273616066,
    100_000: 0.9549944009195666,
    1_000_000: 0.9549935935751067,
}
# r_{10^6} must stay below this
HARD_RATIO_CEILING = HARD_RATIO[1_000_000] + 1e-9

# secretary rule on the hard family, eps = 0.25, m = 2000: the finite-m gap
# max(0, g(eps) - L_m), where L_m = sum_{i >= r} S_m(i) (r-1)/(m(i-1)) is the
# exact lower bound on the rule's ratio
SP_EPS = 0.25
SP_M = 2000
SP_FINITE_BOUND = 0.060596368929387606
SP_GAP = 0.0


def _regenerate():
    from .hardness import hard_family, hard_ratio_curve, sp_finite_bound
    from .policies import sp_guarantee

    for row in hard_ratio_curve(HARD_RATIO_EPS, sorted(HARD_RATIO)):
        print(f"    {row['m']:_}: {row['ratio']!r},")
    L = sp_finite_bound(hard_family(SP_M, SP_EPS))
    print("SP_FINITE_BOUND =", repr(L))
    print("SP_GAP =", repr(max(0.0, sp_guarantee(SP_EPS) - L)))


if __name__ == "__main__":
    _regenerate()
