"""Stopping rules, exact values and hardness checks for the IID prophet
inequality with a random horizon."""
from .distributions import (HorizonDist, ValidationError, ValueDist, ZeroTailError,
                            horizon_from_json, value_from_json)
from .classify import ClassReport, classify, concentration_check, cv_bound, lambert_w0, pgf_order_check
from .policies import (FixedThreshold, RandomizedThreshold, SecretaryRule, StepThresholds,
                       TieBreakThreshold, policy_from_json, select_ex_ante_threshold,
                       select_tie_break_threshold)
from .exact import (EvalReport, backward_induction, brute_force_optimal, geometric_fixed_point,
                    prophet_value, randomized_threshold_value, threshold_value,
                    tie_break_threshold_value)
from .hardness import NumericFailure, hard_family, optimal_single_threshold, perturbed_horizon
from .montecarlo import SimReport, simulate_paired, simulate_policy, simulate_prophet

__version__ = "0.1.0"
