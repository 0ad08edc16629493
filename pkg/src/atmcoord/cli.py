"""Command-line entry point.

Exit codes: 0 success, 1 infeasible / not converged / check failed /
unreachable, 2 input error, 3 size cap exceeded. Diagnostics go to stderr;
machine-readable results go to files (and, for ``verify``, a CSV on stdout).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import files
from .congestion import BrdConfig, ScheduleProfile, kappa_sweep, run_brd
from .equilibria import (
    BASIS_SOURCES,
    EquilibriumResult,
    NoiseModel,
    build_nash_basis,
    solve_ccce,
    solve_ce,
    solve_rrce,
    verify_ccce,
)
from .errors import (
    AtmCoordError,
    EmptyBasisError,
    GameInputError,
    NumericalError,
    SizeLimitError,
    UnsupportedError,
)
from .game import verify_ce
from .scenarios import RunwayScenario, gen_congestion_instance, gen_runway_game
from .steering import UnreachableReport, plan_incentives

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_SIZE = 3

OUT_DIR_ENV = "ATMCOORD_OUT_DIR"

TRACE_HEADER = ("step", "sector", "J_before", "J_after", "total_overload")
SWEEP_HEADER = ("kappa", "seed", "final_overload", "rounds", "status")
SWEEP_SUMMARY_HEADER = ("kappa", "runs", "mean_final_overload", "std_final_overload")
VERIFY_HEADER = ("player", "rec", "alt", "margin")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUT_DIR_ENV) or "."
    return Path(out)


def _noise(game, alpha: float, sigma: list[float]) -> NoiseModel:
    if len(sigma) == 1:
        sigma = sigma * game.n_players
    if len(sigma) != game.n_players:
        raise GameInputError(f"--sigma needs 1 or {game.n_players} values")
    return NoiseModel(tuple(sigma), alpha)


def _metrics(res: EquilibriumResult, solver: str, fallback: bool = False) -> dict:
    out = {
        "solver": solver,
        "status": res.status,
        "welfare": res.welfare,
        "objective": res.objective,
        "per_player_payoffs": None
        if res.per_player_payoffs is None
        else [float(v) for v in res.per_player_payoffs],
        "min_margin": res.min_margin,
        "cut_rounds": res.rounds,
        "restricted_to_basis": res.restricted_to_basis,
        "basis_fallback": fallback,
    }
    if res.lam is not None:
        out["lambda"] = [float(v) for v in res.lam]
    return out


def cmd_solve(args) -> int:
    game = files.load_game(args.game)
    weights = args.weights
    fallback = False
    if args.solver == "ce":
        res = solve_ce(game, weights)
    elif args.solver == "rrce":
        basis = build_nash_basis(game, args.basis, args.max_members)
        res = solve_rrce(game, basis, weights)
    else:
        noise = _noise(game, args.alpha, args.sigma)
        res = solve_ccce(game, noise, weights)
        if res.status == "infeasible":
            print("ccce: full program infeasible; retrying on the Nash basis hull", file=sys.stderr)
            try:
                basis = build_nash_basis(game, args.basis, args.max_members)
            except EmptyBasisError as exc:
                print(f"ccce: no basis fallback available: {exc}", file=sys.stderr)
            else:
                res = solve_ccce(game, noise, weights, basis=basis)
                fallback = True
    out = _out_dir(args)
    files.write_json(out / "metrics.json", _metrics(res, args.solver, fallback))
    if not res.optimal:
        print(f"{args.solver}: status {res.status}", file=sys.stderr)
        return EXIT_FAIL
    files.save_distribution(out / "z.json", res.z)
    return EXIT_OK


def cmd_verify(args) -> int:
    game = files.load_game(args.game)
    z = files.load_distribution(args.dist, game)
    if args.alpha is not None or args.sigma is not None:
        noise = _noise(game, 0.5 if args.alpha is None else args.alpha, args.sigma or [0.0])
        report = verify_ccce(z, game, noise, args.tol)
    else:
        report = verify_ce(z, game, args.tol)
    rows = [
        (
            game.player_names[c.player],
            game.action_labels[c.player][c.rec],
            game.action_labels[c.player][c.alt],
            repr(c.gain),
        )
        for c in report.constraints
    ]
    sys.stdout.write(files.csv_text(VERIFY_HEADER, rows))
    w = report.worst
    if w is not None:
        print(
            f"worst: {game.player_names[w.player]}, {game.action_labels[w.player][w.rec]}, "
            f"{game.action_labels[w.player][w.alt]}, {w.gain:g}",
            file=sys.stderr,
        )
    return EXIT_OK if report.passed else EXIT_FAIL


def _brd_config(args, kappa: float) -> BrdConfig:
    return BrdConfig(
        kappa=kappa,
        br_cap=args.br_cap,
        max_rounds=args.max_rounds,
        greedy_above_cap=args.greedy,
    )


def cmd_brd(args) -> int:
    inst = files.load_scenario(args.scenario)
    cfg = _brd_config(args, args.kappa)
    if args.seed is None:
        x0 = ScheduleProfile.nominal(inst)
    else:
        x0 = ScheduleProfile.random(inst, np.random.default_rng(args.seed))
    trace = run_brd(x0, cfg, inst)
    out = _out_dir(args)
    rows = [(s.step, s.sector, repr(s.cost_before), repr(s.cost_after), repr(s.total_overload)) for s in trace.steps]
    files.write_csv(out / "trace.csv", TRACE_HEADER, rows)
    files.write_json(
        out / "brd.json",
        {
            "status": trace.status,
            "rounds": trace.rounds,
            "accepted_moves": len(trace.steps),
            "initial_total_overload": trace.initial_total_overload,
            "final_total_overload": trace.final_total_overload,
            "greedy_moves": sum(s.greedy for s in trace.steps),
            "initial": files.profile_to_dict(x0, inst)["shifts"],
            "final": files.profile_to_dict(trace.final, inst)["shifts"],
        },
    )
    return EXIT_OK if trace.status == "converged" else EXIT_FAIL


def cmd_sweep(args) -> int:
    inst = files.load_scenario(args.scenario)
    if args.seeds < 1:
        raise GameInputError("--seeds must be positive")
    cfg = _brd_config(args, 0.0)
    result = kappa_sweep(inst, args.kappas, list(range(args.seeds)), cfg, args.workers)
    out = _out_dir(args)
    files.write_csv(
        out / "sweep.csv",
        SWEEP_HEADER,
        [(repr(r.kappa), r.seed, repr(r.final_overload), r.rounds, r.status) for r in result.rows],
    )
    counts = {}
    for r in result.rows:
        counts[r.kappa] = counts.get(r.kappa, 0) + 1
    files.write_csv(
        out / "sweep_summary.csv",
        SWEEP_SUMMARY_HEADER,
        [(repr(k), counts[k], repr(m), repr(s)) for k, (m, s) in result.summary().items()],
    )
    return EXIT_OK if all(r.status == "converged" for r in result.rows) else EXIT_FAIL


def cmd_steer(args) -> int:
    prob, x0 = files.load_problem(args.problem)
    plan = plan_incentives(x0, prob)
    out = _out_dir(args)
    if isinstance(plan, UnreachableReport):
        files.write_json(
            out / "trajectory.json",
            {
                "reached": False,
                "states_explored": plan.states_explored,
                "frontier_exhausted": plan.frontier_exhausted,
            },
        )
        print(f"steer: unreachable after exploring {plan.states_explored} states", file=sys.stderr)
        return EXIT_FAIL
    files.write_json(
        out / "trajectory.json",
        {
            "reached": plan.reached,
            "states": [list(s) for s in plan.states],
            "signals": [[[float(v) for v in o] for o in s.offsets] for s in plan.signals],
            "cost": plan.total_incentive,
        },
    )
    return EXIT_OK


def cmd_gen(args) -> int:
    out = _out_dir(args)
    if args.kind == "runway":
        sc = RunwayScenario.random(args.airlines, args.slots, args.seed)
        files.save_game(out / "game.json", gen_runway_game(sc))
        files.write_json(out / "runway.json", files.runway_to_dict(sc))
    else:
        inst = gen_congestion_instance(
            args.sectors, args.flights, args.horizon, args.shift_radius, args.seed
        )
        files.save_scenario(out / "scenario.json", inst)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="atmcoord", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="compute a CE, RRCE or CCCE")
    p.add_argument("solver", choices=["ce", "rrce", "ccce"])
    p.add_argument("game")
    p.add_argument("--alpha", type=float, default=0.9)
    p.add_argument("--sigma", type=_floats, default=[0.1], help="one value or one per player")
    p.add_argument("--basis", choices=BASIS_SOURCES, default="pure")
    p.add_argument("--max-members", type=int, default=None)
    p.add_argument("--weights", type=_floats, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="check a distribution's incentive constraints")
    p.add_argument("game")
    p.add_argument("dist")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--sigma", type=_floats, default=None)
    p.set_defaults(func=cmd_verify)

    for name, func in (("brd", cmd_brd), ("sweep", cmd_sweep)):
        p = sub.add_parser(name, help="best-response dynamics" if name == "brd" else "kappa sweep")
        p.add_argument("scenario")
        if name == "brd":
            p.add_argument("--kappa", type=float, default=0.0)
            p.add_argument("--seed", type=int, default=None, help="random start; default nominal shifts")
        else:
            p.add_argument("--kappas", type=_floats, default=[0.0, 0.05, 1.0])
            p.add_argument("--seeds", type=int, default=10, help="runs seeds 0..N-1")
            p.add_argument("--workers", type=int, default=None)
        p.add_argument("--max-rounds", type=int, default=1000)
        p.add_argument("--br-cap", type=int, default=4096)
        p.add_argument("--greedy", action="store_true", help="coordinate descent above the cap")
        p.add_argument("--out")
        p.set_defaults(func=func)

    p = sub.add_parser("steer", help="plan bounded incentives for BR dynamics")
    p.add_argument("problem")
    p.add_argument("--out")
    p.set_defaults(func=cmd_steer)

    p = sub.add_parser("gen", help="generate a synthetic scenario")
    p.add_argument("kind", choices=["runway", "congestion"])
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--airlines", type=int, default=3)
    p.add_argument("--slots", type=int, default=3)
    p.add_argument("--sectors", type=int, default=4)
    p.add_argument("--flights", type=int, default=12)
    p.add_argument("--horizon", type=int, default=12)
    p.add_argument("--shift-radius", type=int, default=2)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SizeLimitError as exc:
        print(f"size error: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except (EmptyBasisError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (GameInputError, UnsupportedError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AtmCoordError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
