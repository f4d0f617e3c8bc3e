"""Command-line front end.

Exit codes: 0 success, 1 usage or I/O error, 2 invalid model / constants or a
REFUTED verdict, 3 numerical non-convergence or iteration cap.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .discounted import MAX_DEPTH, TruncationCapError, shapley_residual, solve_discounted
from .ergodic import (DEFAULT_MAX_ITERS, DEFAULT_TOL, REFUTED, ErgodicConvergenceError,
                      ErgodicityConstantsError, check_ergodicity, solve_ergodic)
from .finite import FiniteHorizonPlan, evaluate_policies, solve_finite
from .matgame import MatrixGameError, solve_stage_game
from .model import GameModel, ModelError, ModelParseError, build_model, model_from_dict
from .sim import simulate

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3

# r(-1,-1)=5, r(-1,1)=3, r(1,-1)=2, r(1,1)=4 with actions ordered (-1, +1)
EXAMPLE_REWARD = ((5.0, 3.0), (2.0, 4.0))


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# example sweep


@dataclass(frozen=True)
class SweepRow:
    gamma: float
    y_star: float  # probability of player 1's second action (+1)
    z_star: float  # probability of player 2's second action (+1)
    ce_value: float


def example_model(gamma: float) -> GameModel:
    return build_model([EXAMPLE_REWARD], [[[[1.0], [1.0]], [[1.0], [1.0]]]], gamma, 1.0,
                       states=["x0"], actions1=["-1", "+1"], actions2=["-1", "+1"], normalize=False)


def example_closed_form(gamma: float) -> tuple[float, float]:
    """Completely mixed equilibrium of the exponentiated 2x2 example game."""
    (a, b), (c, d) = np.exp(gamma * np.array(EXAMPLE_REWARD))
    den = b + c - a - d
    return (b - a) / den, (c - a) / den


def sweep_example(gammas) -> list[SweepRow]:
    rows = []
    for g in gammas:
        g = float(g)
        if g == 0.0:
            continue
        sol = solve_stage_game(example_model(g), 0, [1.0], g)
        rows.append(SweepRow(g, float(sol.row_strategy[1]), float(sol.col_strategy[1]),
                             math.log(sol.value) / g))
    return rows


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gamma", "y_star", "z_star", "ce_value"])
        for r in rows:
            w.writerow(["%.12g" % v for v in (r.gamma, r.y_star, r.z_star, r.ce_value)])


def read_sweep_csv(path) -> list[SweepRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [SweepRow(*(float(row[k]) for k in ("gamma", "y_star", "z_star", "ce_value")))
                for row in csv.DictReader(fh)]


# ---------------------------------------------------------------------------
# helpers


def _load(args) -> GameModel:
    try:
        data = json.loads(Path(args.model).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read model: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelParseError(f"{args.model}: malformed JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ModelParseError(f"{args.model}: top level must be a JSON object")
    if getattr(args, "gamma", None) is not None:
        data["gamma"] = args.gamma
    return model_from_dict(data)


def _emit(payload: dict, out) -> None:
    text = json.dumps(payload, indent=2, default=_np_default)
    if out in (None, "-"):
        print(text)
        return
    try:
        Path(out).write_text(text + "\n", encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot write {out}: {exc}") from exc


def _np_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _horizon(args, model: GameModel) -> int:
    N = args.horizon if args.horizon is not None else model.horizon
    if N is None:
        raise UsageError("--horizon is required (the model file has no horizon)")
    if N < 1:
        raise UsageError("--horizon must be >= 1")
    return N


def _plan_policies(args, model: GameModel, N: int):
    if args.plan:
        try:
            plan = FiniteHorizonPlan.from_json(Path(args.plan).read_text(encoding="utf-8"))
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"cannot read plan {args.plan}: {exc}") from exc
        return plan.policies1, plan.policies2
    plan = solve_finite(model, N)
    return plan.policies1, plan.policies2


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args) -> int:
    model = _load(args)
    if args.kind == "finite":
        N = _horizon(args, model)
        payload = solve_finite(model, N, workers=args.workers).to_dict()
    elif args.kind == "discounted":
        tol = args.tol if args.tol is not None else 1e-6
        cap = args.max_iters if args.max_iters is not None else MAX_DEPTH
        sol = solve_discounted(model, tol=tol, max_depth=cap, workers=args.workers)
        payload = sol.to_dict()
        payload["shapley_residual"] = shapley_residual(model, sol, workers=args.workers)
    else:
        tol = args.tol if args.tol is not None else DEFAULT_TOL
        iters = args.max_iters if args.max_iters is not None else DEFAULT_MAX_ITERS
        payload = solve_ergodic(model, tol=tol, max_iters=iters, x_ref=args.x_ref,
                                workers=args.workers).to_dict()
    payload = {"kind": args.kind, "states": list(model.states), "gamma": model.gamma,
               "beta": model.beta, **payload}
    _emit(payload, args.out)
    return EXIT_OK


def cmd_check(args) -> int:
    model = _load(args)
    constants = dict(model.ergodic_constants or {})
    for key in ("K0", "gamma_bar", "alpha0", "R"):
        val = getattr(args, key)
        if val is not None:
            constants[key] = val
    W = None
    if args.weights is not None:
        W = [float(t) for t in args.weights.split(",")]
    report = check_ergodicity(model, W=W, constants=constants, n_samples=args.samples, seed=args.seed)
    _emit(report.to_dict(), args.out)
    return EXIT_INVALID if report.tier == REFUTED else EXIT_OK


def cmd_simulate(args) -> int:
    model = _load(args)
    N = _horizon(args, model)
    pi, sigma = _plan_policies(args, model, N)
    res = simulate(model, pi, sigma, N, args.episodes, args.seed, x0=args.x0, workers=args.workers)
    _emit({"horizon": N, "x0": args.x0, **json.loads(res.to_json())}, args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = _load(args)
    N = _horizon(args, model)
    pi, sigma = _plan_policies(args, model, N)
    E = evaluate_policies(model, pi, sigma, N)
    ce = np.log(E) / model.gamma + model.reward_offset * model.horizon_weight(N)
    _emit({"horizon": N, "exp_values": E.tolist(), "ce_values": ce.tolist()}, args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.gammas:
        gammas = [float(t) for t in args.gammas.split(",")]
    else:
        if args.steps < 1:
            raise UsageError("--steps must be >= 1")
        gammas = np.linspace(args.gamma_min, args.gamma_max, args.steps)
    skipped = sum(1 for g in gammas if float(g) == 0.0)
    if skipped:
        print(f"note: skipped {skipped} grid point(s) at gamma = 0", file=sys.stderr)
    rows = sweep_example(gammas)
    if args.out in (None, "-"):
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["gamma", "y_star", "z_star", "ce_value"])
        for r in rows:
            w.writerow(["%.12g" % v for v in (r.gamma, r.y_star, r.z_star, r.ce_value)])
    else:
        try:
            write_sweep_csv(rows, args.out)
        except OSError as exc:
            raise UsageError(f"cannot write {args.out}: {exc}") from exc
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rsgame", description="Risk-sensitive zero-sum stochastic game solver.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, model=True):
        if model:
            sp.add_argument("--model", required=True, help="model JSON file")
            sp.add_argument("--gamma", type=float, help="override the model's risk parameter")
        sp.add_argument("--out", help="output path (default: stdout)")
        sp.add_argument("--workers", type=int, default=None, help="threads for per-state stage games")

    s = sub.add_parser("solve", help="solve a finite, discounted or ergodic game")
    s.add_argument("kind", choices=["finite", "discounted", "ergodic"])
    common(s)
    s.add_argument("--horizon", type=int)
    s.add_argument("--tol", type=float)
    s.add_argument("--max-iters", type=int, help="ergodic iteration cap / discounted depth cap")
    s.add_argument("--x-ref", type=int, default=0)
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("check", help="check the ergodicity conditions and constant chain")
    common(c)
    c.add_argument("--K0", type=float)
    c.add_argument("--gamma-bar", dest="gamma_bar", type=float)
    c.add_argument("--alpha0", type=float)
    c.add_argument("--R", type=float)
    c.add_argument("--weights", help="comma-separated Lyapunov weights W (default: model weight_W or 0)")
    c.add_argument("--samples", type=int, default=1000)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_check)

    m = sub.add_parser("simulate", help="Monte Carlo estimate of the exp-space value")
    common(m)
    m.add_argument("--horizon", type=int)
    m.add_argument("--episodes", type=int, default=100_000)
    m.add_argument("--seed", type=int, required=True)
    m.add_argument("--x0", type=int, default=0)
    m.add_argument("--plan", help="finite-horizon plan JSON (default: solve the game first)")
    m.set_defaults(func=cmd_simulate)

    e = sub.add_parser("evaluate", help="exact value of a policy pair")
    common(e)
    e.add_argument("--horizon", type=int)
    e.add_argument("--plan", help="finite-horizon plan JSON (default: solve the game first)")
    e.set_defaults(func=cmd_evaluate)

    w = sub.add_parser("sweep-example", help="equilibrium strategies of the 2x2 example versus gamma (CSV)")
    common(w, model=False)
    w.add_argument("--gamma-min", type=float, default=-5.0)
    w.add_argument("--gamma-max", type=float, default=5.0)
    w.add_argument("--steps", type=int, default=100)
    w.add_argument("--gammas", help="explicit comma-separated gamma list (overrides the grid)")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelError, ErgodicityConstantsError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ErgodicConvergenceError as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (TruncationCapError, MatrixGameError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
