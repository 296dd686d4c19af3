"""Command-line entry point: generate MDPs, run solvers and benchmarks, query oracles."""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .generators import gen_cycle, gen_garnet, gen_river_swim
from .harness import ExperimentConfig, parse_config, report_errors, run_experiment
from .mdp import InvalidMdpError, span
from .mdpfile import MdpFormatError, read_mdp, write_mdp
from .oracles import OracleNotConverged, discounted_vi, exact_anchored_vi


def _cmd_gen(args):
    if args.family == "cycle":
        mdp = gen_cycle(args.states)
    elif args.family == "riverswim":
        mdp = gen_river_swim(args.states)
    else:
        if args.actions is None or args.branching is None:
            raise ValueError("garnet needs --actions and --branching")
        mdp = gen_garnet(args.states, args.actions, args.branching, args.seed)
    write_mdp(mdp, args.out, comment=mdp.name)
    return 0


def _solve(args, solver, gamma=None):
    config = ExperimentConfig(
        solver=solver, mdp_source=args.mdp, epsilon=args.epsilon, delta=args.delta, gamma=gamma,
        n=args.n, trials=args.trials, master_seed=args.seed, oracle_mode=args.oracle,
        output_path=args.csv, sampler=args.sampler, threads=args.threads, workers=args.workers,
        timing=args.timing, scaled=args.scaled)
    result = run_experiment(config)
    report_errors(result)
    if not args.csv:
        for r in result.results:
            print(f"trial {r.trial}: n_or_N={r.n_or_N} samples={r.total_samples} "
                  f"residual={r.empirical_residual:.6g}")
    return result.exit_code


_AVG_ALGOS = {"savia": "savia", "savia-plus": "savia_plus", "exact": "exact_anc_vi"}
_DISC_ALGOS = {"savid": "savid", "savid-plus": "savid_plus"}


def _cmd_solve_avg(args):
    return _solve(args, _AVG_ALGOS[args.algo])


def _cmd_solve_disc(args):
    return _solve(args, _DISC_ALGOS[args.algo], gamma=args.gamma)


def _cmd_bench(args):
    with open(args.config) as fh:
        config = parse_config(fh.read(), base_dir=os.path.dirname(os.path.abspath(args.config)))
    if args.threads is not None:
        config = ExperimentConfig(**{**config.__dict__, "threads": args.threads})
    result = run_experiment(config)
    report_errors(result)
    s = result.summary
    print(f"{config.solver}: {s['trials']} trials, {s['errors']} errors, "
          f"mean samples {s['mean_samples']}, success fraction {s['success_fraction']}")
    return result.exit_code


def _cmd_oracle(args):
    mdp = read_mdp(args.mdp)
    np.set_printoptions(precision=10, suppress=True)
    if args.gamma is None:
        sol = exact_anchored_vi(mdp, tol_span=args.tol)
        print(f"g* = {sol.g_star:.12g}")
        print(f"span(h*) = {span(sol.h_star):.12g}")
        print(f"residual span = {sol.residual_span:.3g} after {sol.iterations} iterations")
        print("Q* =")
        print(sol.Q_star)
    else:
        Q = discounted_vi(mdp, args.gamma, args.tol)
        print(f"max Q* = {Q.max():.12g}, min Q* = {Q.min():.12g}")
        print("Q* =")
        print(Q)
    return 0


def _add_solve_args(p, algos):
    p.add_argument("--mdp", required=True, help="MDP file or generator spec such as garnet:8,3,2,0")
    p.add_argument("--algo", required=True, choices=sorted(algos))
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--n", type=int, default=None, help="iteration count for fixed-length runs")
    p.add_argument("--seed", type=int, default=0, help="master seed; trial t uses seed + t")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--oracle", action="store_true", help="verify against exact oracles")
    p.add_argument("--csv", default=None, help="per-trial CSV output (summary written alongside)")
    p.add_argument("--sampler", choices=("draws", "multinomial"), default="draws")
    p.add_argument("--threads", type=int, default=1, help="sampling threads per trial")
    p.add_argument("--workers", type=int, default=1, help="trials run in parallel processes")
    p.add_argument("--timing", action="store_true", help="record wall time (makes CSVs nondeterministic)")
    p.add_argument("--scaled", action="store_true",
                   help="run the doubling solvers at the accuracy that guarantees an epsilon-optimal policy")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anchored-vi", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a benchmark MDP file")
    p.add_argument("--family", required=True, choices=("cycle", "riverswim", "garnet"))
    p.add_argument("--states", type=int, required=True)
    p.add_argument("--actions", type=int)
    p.add_argument("--branching", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("solve-avg", help="average-reward solvers")
    _add_solve_args(p, _AVG_ALGOS)
    p.set_defaults(func=_cmd_solve_avg)

    p = sub.add_parser("solve-disc", help="discounted solvers")
    _add_solve_args(p, _DISC_ALGOS)
    p.add_argument("--gamma", type=float, required=True)
    p.set_defaults(func=_cmd_solve_disc)

    p = sub.add_parser("bench", help="run an experiment described by a key = value config file")
    p.add_argument("--config", required=True)
    p.add_argument("--threads", type=int, default=None, help="override the config's thread count")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("oracle", help="print the exact optimal solution of an MDP file")
    p.add_argument("--mdp", required=True)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=_cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, InvalidMdpError, MdpFormatError, OracleNotConverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
