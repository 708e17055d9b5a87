"""Command-line front end.

Exit codes: 0 success, 1 a reproduction check failed, 2 validation error
(bad flags, malformed JSON, unknown keys), 3 numeric failure (bracket,
overflow).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields

from .distributions import HorizonDist, ValidationError, horizon_from_json, value_from_json
from .hardness import NumericFailure

EXIT_OK, EXIT_CHECK_FAILED, EXIT_VALIDATION, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("classify", "eval", "simulate", "hard", "reproduce")

# frozen column orders (version 1)
HARD_COLUMNS = ("m", "Z_m", "E_H", "E_MH", "pi_bar", "gambler", "ratio")
PERTURBED_COLUMNS = ("m", "margin", "verdict", "slack_linear", "slack_concave", "slack_target")
CV_COLUMNS = ("m", "cv2", "limit", "rel_error")
MOMENT_COLUMNS = ("m", "moment", "asymptote", "ratio")
CLASSIFY_COLUMNS = ("label", "verdict", "margin", "witness", "grid_size", "refine_depth")
EVAL_COLUMNS = ("source", "gambler", "prophet", "ratio", "method", "error", "se", "ratio_se")
SIM_COLUMNS = ("policy", "runs", "seed", "estimate", "se", "prophet", "prophet_se", "ratio", "ratio_se")


def _default_seed() -> int:
    env = os.environ.get("PROPHET_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ValidationError(f"PROPHET_SEED: not an integer: {env!r}") from None


@dataclass
class ExperimentConfig:
    """Every knob of every subcommand with its default."""
    command: str = "reproduce"
    horizon: dict | None = None
    value: dict | None = None
    policy: dict | None = None
    classes: list = field(default_factory=lambda: ["ihr", "dhr", "g", "gbar", "nbu", "hnbue", "cv"])
    method: str = "exact"            # eval: exact | mc | both
    runs: int = 100_000
    seed: int | None = None          # None -> PROPHET_SEED or 0
    chunk_size: int = 1 << 14
    threads: int = 1
    truncate: float = 1e-12          # tail mass dropped when a geometric horizon is cut
    epsilon: float = 0.01
    m_grid: list = field(default_factory=lambda: [1_000, 10_000])
    ell: int = 2
    perturbed: bool = False
    cv: bool = False
    moments: int | None = None
    only: list | None = None
    output: str | None = None
    format: str = "json"             # json | csv

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ValidationError("config: expected a JSON object")
        known = {f.name for f in fields(cls)}
        extra = sorted(set(data) - known)
        if extra:
            raise ValidationError(f"config.{extra[0]}: unknown key")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ValidationError(f"config.command: expected one of {COMMANDS}")
        if self.method not in ("exact", "mc", "both"):
            raise ValidationError("config.method: expected exact, mc or both")
        if self.format not in ("json", "csv"):
            raise ValidationError("config.format: expected json or csv")
        for key in ("runs", "chunk_size", "threads", "ell"):
            v = getattr(self, key)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ValidationError(f"config.{key}: expected a positive integer")
        if self.seed is not None and (not isinstance(self.seed, int) or self.seed < 0):
            raise ValidationError("config.seed: expected a non-negative integer")
        if not isinstance(self.m_grid, list) or not all(isinstance(m, int) and m >= 1 for m in self.m_grid):
            raise ValidationError("config.m_grid: expected a list of positive integers")

    def resolved_seed(self) -> int:
        return self.seed if self.seed is not None else _default_seed()


# dispatch

def _need(cfg, key):
    v = getattr(cfg, key)
    if v is None:
        raise ValidationError(f"config.{key}: required for {cfg.command}")
    return v


def _horizon(cfg) -> HorizonDist:
    return horizon_from_json(_need(cfg, "horizon"))


def _finite(H: HorizonDist, cfg) -> HorizonDist:
    return H if H.kind == "finite" else H.truncated(cfg.truncate)


def _run_classify(cfg):
    from .classify import classify
    H = _horizon(cfg)
    reports = classify(H, cfg.classes)
    return {"horizon": H.to_json(), "mean": H.mean, "reports": reports}, (CLASSIFY_COLUMNS, reports)


def _resolve_policy(cfg, H, X):
    from .exact import backward_induction
    from .policies import policy_from_json
    pol = policy_from_json(_need(cfg, "policy"))
    if pol == "backward_induction":
        pol = backward_induction(_finite(H, cfg), X).policy()
    return pol


def _exact_eval(cfg, H, X):
    from .exact import (backward_induction, geometric_fixed_point, prophet_value,
                        randomized_threshold_value, threshold_value, tie_break_threshold_value)
    spec = _need(cfg, "policy")
    kind = spec.get("kind")
    prophet = prophet_value(H, X)
    if kind == "threshold":
        return threshold_value(H, X, float(spec["pi"]), prophet).to_json()
    if kind == "randomized":
        return randomized_threshold_value(H, X, float(spec["pi"]), float(spec["q"]), prophet).to_json()
    if kind == "tie_break":
        return tie_break_threshold_value(H, X, float(spec["pi"]), float(spec["q"]), prophet).to_json()
    if kind == "backward_induction":
        if H.kind == "geometric" and math.isfinite(X.upper):
            v, method = geometric_fixed_point(H.q, X), "fixed-point"
        else:
            v, method = backward_induction(_finite(H, cfg), X).value, "recursion"
        return {"gambler": v, "prophet": prophet, "ratio": v / prophet if prophet > 0 else 0.0,
                "method": method, "error": 0.0, "info": {}}
    raise ValidationError(f"policy.kind: no exact evaluation for {kind!r}; use --method mc")


def _mc_eval(cfg, H, X):
    from .montecarlo import simulate_paired
    pol = _resolve_policy(cfg, H, X)
    return simulate_paired(H, X, pol, cfg.runs, cfg.resolved_seed(), cfg.chunk_size,
                           cfg.threads).to_json()


def _run_eval(cfg):
    from .policies import policy_from_json
    H, X = _horizon(cfg), value_from_json(_need(cfg, "value"))
    policy_from_json(_need(cfg, "policy"))  # validate before any work
    out = {}
    if cfg.method in ("exact", "both"):
        out["exact"] = _exact_eval(cfg, H, X)
    if cfg.method in ("mc", "both"):
        out["mc"] = _mc_eval(cfg, H, X)
    rows = []
    if "exact" in out:
        rows.append({"source": "exact", **out["exact"]})
    if "mc" in out:
        mc = out["mc"]
        rows.append({"source": "mc", "gambler": mc["estimate"], "prophet": mc["prophet"],
                     "ratio": mc["ratio"], "method": "monte-carlo", "se": mc["se"],
                     "ratio_se": mc["ratio_se"]})
    return out, (EVAL_COLUMNS, rows)


def _run_simulate(cfg):
    H, X = _horizon(cfg), value_from_json(_need(cfg, "value"))
    rep = _mc_eval(cfg, H, X)
    return rep, (SIM_COLUMNS, [rep])


def _run_hard(cfg):
    from .classify import DOMINATED, pgf_order_check
    from .hardness import (gbar_step_verify, hard_family_cv, hard_ratio_curve,
                           horizon_moment_asymptotics, perturbed_horizon)
    grid = cfg.m_grid
    if cfg.perturbed:
        rows = []
        for m in grid:
            pt = perturbed_horizon(m, cfg.epsilon)
            rep = pgf_order_check(pt.horizon, DOMINATED)
            sl = gbar_step_verify(pt)
            rows.append({"m": m, "margin": rep.margin, "verdict": rep.verdict,
                         "slack_linear": sl["slack_linear"], "slack_concave": sl["slack_concave"],
                         "slack_target": sl["slack_target"]})
        cols = PERTURBED_COLUMNS
    elif cfg.cv:
        rows = []
        for m in grid:
            cv2, lim = hard_family_cv(cfg.epsilon, m, cfg.ell)
            rows.append({"m": m, "cv2": cv2, "limit": lim, "rel_error": abs(cv2 - lim) / lim})
        cols = CV_COLUMNS
    elif cfg.moments is not None:
        rows = horizon_moment_asymptotics(cfg.epsilon, cfg.moments, grid, cfg.ell)
        cols = MOMENT_COLUMNS
    else:
        rows = hard_ratio_curve(cfg.epsilon, grid, cfg.ell)
        cols = HARD_COLUMNS
    return {"epsilon": cfg.epsilon, "rows": rows}, (cols, rows)


def _run_reproduce(cfg):
    from .acceptance import CHECKS, CSV_COLUMNS, run_suite
    only = cfg.only
    if only:
        bad = [n for n in only if n not in CHECKS]
        if bad:
            raise ValidationError(f"config.only: unknown check {bad[0]!r}; choose from {sorted(CHECKS)}")
    results = run_suite(only, threads=cfg.threads)
    for r in results:
        print(r.line(), file=sys.stderr)
    rows = [r.to_json() for r in results]
    for row in rows:
        row["detail"] = json.dumps(row["detail"], sort_keys=True, default=str)
    payload = {"passed": all(r.passed for r in results), "results": [r.to_json() for r in results]}
    return payload, (CSV_COLUMNS, rows)


RUNNERS = {"classify": _run_classify, "eval": _run_eval, "simulate": _run_simulate,
           "hard": _run_hard, "reproduce": _run_reproduce}


def _to_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def run_experiment(cfg: ExperimentConfig, stdout=None) -> int:
    """Run one config, write its report, return the exit status."""
    stdout = stdout or sys.stdout
    try:
        cfg.validate()
        payload, table = RUNNERS[cfg.command](cfg)
    except (ValidationError, KeyError, TypeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericFailure, OverflowError, ArithmeticError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    if cfg.format == "csv":
        text = _to_csv(*table)
    else:
        text = json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n"
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    if cfg.command == "reproduce" and not payload["passed"]:
        return EXIT_CHECK_FAILED
    return EXIT_OK


# argument parsing

def _json_arg(text: str):
    """Inline JSON, or @path to a JSON file."""
    if text.startswith("@"):
        with open(text[1:], encoding="utf-8") as fh:
            text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise argparse.ArgumentTypeError(f"malformed JSON: {e}") from None


def _int_list(text: str):
    try:
        return [int(float(t)) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text: str):
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS  # unset flags stay absent so config values survive
    common.add_argument("--config", default=S, help="JSON config file; flags override its values")
    common.add_argument("--threads", type=int, default=S, help="cap on worker threads (default 1)")
    common.add_argument("--output", "-o", default=S, help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default=S, help="report format (default json)")
    common.add_argument("--seed", type=int, default=S, help="RNG seed (default $PROPHET_SEED or 0)")

    p = argparse.ArgumentParser(prog="rhprophet", description=(
        "Stopping rules for the IID prophet inequality with a random horizon."))
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", parents=[common], help="certify distribution classes of a horizon")
    c.add_argument("--horizon", type=_json_arg, default=S)
    c.add_argument("--classes", type=_str_list, default=S,
                   help="comma list from ihr,dhr,g,gbar,nbu,hnbue,cv")

    for name, hlp in (("eval", "gambler/prophet values of a policy"),
                      ("simulate", "Monte Carlo run of a policy")):
        e = sub.add_parser(name, parents=[common], help=hlp)
        e.add_argument("--horizon", type=_json_arg, default=S)
        e.add_argument("--value", type=_json_arg, default=S)
        e.add_argument("--policy", type=_json_arg, default=S)
        e.add_argument("--runs", type=int, default=S)
        e.add_argument("--chunk-size", dest="chunk_size", type=int, default=S)
        e.add_argument("--truncate", type=float, default=S)
        if name == "eval":
            e.add_argument("--method", choices=("exact", "mc", "both"), default=S)

    h = sub.add_parser("hard", parents=[common], help="hard-family sweeps")
    h.add_argument("--epsilon", type=float, default=S)
    h.add_argument("--m-grid", dest="m_grid", type=_int_list, default=S)
    h.add_argument("--ell", type=int, default=S)
    mode = h.add_mutually_exclusive_group()
    mode.add_argument("--perturbed", action="store_true", default=S)
    mode.add_argument("--cv", action="store_true", default=S)
    mode.add_argument("--moments", type=int, default=S)

    r = sub.add_parser("reproduce", parents=[common], help="run the acceptance checks")
    r.add_argument("--only", type=_str_list, default=S)
    r.add_argument("--emit", dest="format", choices=("json", "csv"), default=S)
    return p


def config_from_args(argv) -> ExperimentConfig:
    ns = vars(build_parser().parse_args(argv))
    data = {}
    path = ns.pop("config", None)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ValidationError(f"config: cannot read {path}: {e}") from None
        if not isinstance(data, dict):
            raise ValidationError("config: expected a JSON object")
        if data.get("command", ns["command"]) != ns["command"]:
            raise ValidationError(f"config.command: file says {data['command']!r}, "
                                  f"command line says {ns['command']!r}")
    data.update(ns)
    return ExperimentConfig.from_json(data)


def main(argv=None) -> int:
    try:
        cfg = config_from_args(sys.argv[1:] if argv is None else argv)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except TypeError as e:
        print(f"error: config: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    return run_experiment(cfg)


if __name__ == "__main__":
    sys.exit(main())
