"""Command-line entry point: ``reactexec {plan,run,experiment,gen-expert}``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .domain import Domain, DomainError, parse_domain, standard_domain
from .experiment import ExperimentSpec, run_episode, run_experiment
from .planner import NoPlanFound, plan
from .sim import FailureModel, SensorModel, parse_scenario, reset

EXIT_OK, EXIT_USAGE, EXIT_NO_PLAN = 0, 1, 2

log = logging.getLogger("reactexec")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--domain", type=Path, help="domain file (default: the built-in block skills)")
    p.add_argument("--scenario", type=Path, help="scenario file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=250)
    p.add_argument("--mode", action="append", choices=["none", "retrials", "full"],
                   help="execution mode; repeat for several (experiment default: all three)")
    p.add_argument("--p-fail", type=float, default=0.10)
    p.add_argument("--topple-base", type=float, default=0.05)
    p.add_argument("--p-eject", type=float, default=0.3)
    p.add_argument("--p-drop-close", type=float, default=0.3)
    p.add_argument("--p-eject-hard", type=float, default=0.1)
    p.add_argument("--fp", type=float, default=0.02, help="false-positive rate of learned predicates")
    p.add_argument("--fn", type=float, default=0.02, help="false-negative rate of learned predicates")
    p.add_argument("--reset", choices=["episode", "failure"], default="episode")
    p.add_argument("--trace-out", type=Path)
    p.add_argument("--csv", type=Path)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="reactexec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("plan", parents=[common], help="print a plan for a scenario")

    sub.add_parser("run", parents=[common], help="run one episode of a scenario")

    ex = sub.add_parser("experiment", parents=[common], help="Monte-Carlo ablation over execution modes")
    ex.add_argument("--task", choices=["stacking", "reordering"], default="stacking")
    ex.add_argument("--fig", type=Path, help="write a success-rate figure here")

    ge = sub.add_parser("gen-expert", parents=[common], help="generate an expert trajectory dataset")
    ge.add_argument("--n", type=int, default=8, help="number of trajectories")
    ge.add_argument("--out", type=Path, default=Path("expert.jsonl"))
    ge.add_argument("--dense", type=int, default=20, help="terminal samples around each final state")
    ge.add_argument("--delta", type=float, default=3 * np.pi / 16, help="L-inf radius of dense samples (rad)")
    ge.add_argument("--resolution", type=float, default=np.pi / 16, help="joint grid resolution (rad)")
    ge.add_argument("--links", type=float, nargs=3, default=[0.5, 0.4, 0.3])
    ge.add_argument("--target", type=float, nargs=2, default=[0.6, 0.5], help="grasp point (m)")
    ge.add_argument("--obstacle", type=float, nargs=3, action="append", metavar=("X", "Y", "R"),
                    help="circular obstacle; repeatable")
    ge.add_argument("--fig", type=Path, help="write a workspace figure here")
    return parser


def _models(args) -> tuple[FailureModel, SensorModel]:
    fm = FailureModel(args.p_fail, args.topple_base, args.p_eject, args.p_drop_close, args.p_eject_hard)
    return fm, SensorModel.learned(args.fp, args.fn)


def _load(args, need_scenario: bool):
    schemas = parse_domain(args.domain.read_text()) if args.domain else standard_domain()
    scenario = parse_scenario(args.scenario.read_text()) if args.scenario else None
    if need_scenario and scenario is None:
        raise ValueError("--scenario is required")
    if need_scenario and scenario.goal is None:
        raise ValueError("scenario has no goal line")
    return schemas, scenario


def cmd_plan(args) -> int:
    schemas, scenario = _load(args, need_scenario=True)
    domain = Domain(schemas, scenario.universe)
    from .sim import project_ground_truth

    state = project_ground_truth(reset(scenario, args.seed))
    try:
        p = plan(state, scenario.goal, domain)
    except NoPlanFound as e:
        print(f"NO PLAN ({e.reason})")
        return EXIT_NO_PLAN
    sys.stdout.write(p.to_text())
    return EXIT_OK


def cmd_run(args) -> int:
    schemas, scenario = _load(args, need_scenario=True)
    domain = Domain(schemas, scenario.universe)
    fm, sm = _models(args)
    mode = (args.mode or ["full"])[-1]
    world = reset(scenario, args.seed)
    r = run_episode(world, scenario.goal, mode, domain, fm, sm)
    for e in r.outcome.trace:
        if e.kind == "plan":
            print(f"plan #{e.plan_index}: " + (f"NO PLAN ({e.no_plan_reason})" if e.no_plan_reason
                                                else f"{len(e.plan)} steps"))
        else:
            back = f" (after {e.precondition_backtracks} backtrack(s))" if e.precondition_backtracks else ""
            print(f"  step {e.step}: {e.skill} attempt {e.attempt} -> {e.mode}{back}")
    print(f"{'SUCCESS' if r.success else 'FAILURE'} mode={mode} planner_calls={r.outcome.replans_used} "
          f"sensed_success={r.outcome.success}")
    if args.trace_out:
        r.outcome.write_jsonl(args.trace_out)
    return EXIT_OK


def cmd_experiment(args) -> int:
    schemas, scenario = _load(args, need_scenario=False)
    fm, sm = _models(args)
    spec = ExperimentSpec(
        task=args.task, modes=tuple(args.mode or ("none", "retrials", "full")), trials=args.trials,
        master_seed=args.seed, failure=fm, sensor=sm, reset_policy=args.reset, scenario=scenario,
        jobs=args.jobs, schemas=schemas,
    )
    t0 = time.perf_counter()
    table = run_experiment(spec)
    what = f"scenario {args.scenario}" if scenario else args.task
    print(f"# {what}, {args.trials} trials/mode, seed {args.seed}, reset every "
          f"{'episode' if args.reset == 'episode' else 'failure'}")
    sys.stdout.write(table.to_text())
    log.info("experiment took %.1fs", time.perf_counter() - t0)
    if args.csv:
        args.csv.write_text(table.to_csv())
    if args.fig:
        from .report import plot_results

        plot_results(table, args.fig, title=f"{what} ({args.trials} trials)")
    return EXIT_OK


def cmd_gen_expert(args) -> int:
    from .expert import ArmModel, Circle, CSpaceGrid, dataset_rows, dense_goal_samples, generate_trajectories
    from .expert.dataset import resolve_goal_cell, write_jsonl

    arm = ArmModel(tuple(args.links))
    obstacles = [Circle(*o) for o in (args.obstacle if args.obstacle is not None else [[0.1, 0.55, 0.12]])]
    grid = CSpaceGrid(arm, args.resolution, obstacles)
    goal = resolve_goal_cell(grid, args.target)
    trajs = generate_trajectories(args.n, arm, grid, goal, args.seed)
    rows = []
    for t in trajs:
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, t.traj_id, 1]))
        dense = dense_goal_samples(t, args.dense, args.delta, grid, rng) if args.dense > 0 else []
        rows.extend(dataset_rows(t, dense))
    n = write_jsonl(rows, args.out)
    print(f"{n} rows from {len(trajs)} trajectories -> {args.out}")
    if args.fig:
        from .report import plot_trajectories

        plot_trajectories(trajs, grid, args.fig, target=args.target)
    return EXIT_OK


COMMANDS = {"plan": cmd_plan, "run": cmd_run, "experiment": cmd_experiment, "gen-expert": cmd_gen_expert}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (DomainError, ValueError, KeyError, OSError) as e:
        print(f"reactexec: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
