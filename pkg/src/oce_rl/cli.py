"""Command-line front end: ``oce-rl <subcommand> ...``.

Exit status is 0 on success, 1 when a check fails and 2 for bad input.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

from . import harness
from .errors import OceError
from .learner import MODES, mb_oce_vi
from .mdp import load_mdp, save_mdp, v_from_q, greedy_from_q
from .planning import exact_q_star
from .risk import parse_risk
from .sampling import GenerativeModel, sample_count_policy, sample_count_value

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2))


def cmd_solve(args) -> int:
    m = load_mdp(args.mdp)
    q = exact_q_star(m, parse_risk(args.risk), args.tol)
    _emit({"q": q.tolist(), "v": v_from_q(q).tolist(), "policy": greedy_from_q(q).tolist()})
    return EXIT_OK


def cmd_learn(args) -> int:
    m = load_mdp(args.mdp)
    out = mb_oce_vi(GenerativeModel(m, args.seed), parse_risk(args.risk), args.epsilon,
                    args.delta, mode=args.mode, budget_override=args.n, as_printed=args.as_printed)
    _emit(out.to_dict())
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = harness.ExperimentConfig.load(args.config)
    rows = harness.run_pac_experiment(cfg)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(harness.SUMMARY_HEADER)
    for r in rows:
        w.writerow([harness._csv_cell(getattr(r, h)) for h in harness.SUMMARY_HEADER])
    return EXIT_OK


def cmd_instance(args) -> int:
    params = {"gamma": args.gamma, "p": args.p, "alpha": args.alpha, "S": args.S, "A": args.A, "i": args.i}
    if args.kind == "value-lb":
        params["variant"] = args.variant
    elif args.kind == "policy-lb":
        params["l"] = args.l
    else:
        params = {"gamma": args.gamma, "p": args.p}
    m = harness.build_instance(args.kind, params)
    print(f"states={m.num_states} actions={m.num_actions}", file=sys.stderr)
    if args.out:
        save_mdp(m, args.out)
    else:
        print(m.to_json())
    return EXIT_OK


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_demo(args) -> int:
    rows = harness.run_impossibility_demo(args.gamma, args.p_grid, args.delta)
    harness.write_impossibility_csv(rows, sys.stdout)
    return EXIT_OK


def cmd_check(args) -> int:
    report = harness.run_bound_suite(args.count, args.seed)
    _emit(report.to_dict())
    return EXIT_OK if report.all_passed else EXIT_CHECK_FAILED


def cmd_budget(args) -> int:
    count = sample_count_value if args.mode == "value" else sample_count_policy
    b = count(parse_risk(args.risk), args.gamma, args.S, args.A, args.epsilon, args.delta,
              as_printed=args.as_printed)
    _emit({"total": b.total, "per_pair": b.per_pair})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oce-rl", description="Risk-sensitive tabular RL with OCE objectives.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="exact Q*, V* and greedy policy")
    p.add_argument("--mdp", required=True)
    p.add_argument("--risk", required=True, help='utility as JSON, e.g. \'{"kind": "cvar", "tau": 0.5}\'')
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("learn", help="run MB-OCE-VI against a simulator of the MDP")
    p.add_argument("--mdp", required=True)
    p.add_argument("--risk", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--mode", choices=MODES, default="value")
    p.add_argument("--n", type=int, default=None, help="samples per pair (overrides the budget formula)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--as-printed", action="store_true", help="drop 1/delta inside the budget logarithm")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("experiment", help="Monte Carlo PAC experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("instance", help="emit a hard-instance MDP as JSON")
    p.add_argument("--kind", choices=["value-lb", "policy-lb", "impossibility"], required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--S", type=int, default=1)
    p.add_argument("--A", type=int, default=1)
    p.add_argument("--i", type=int, default=0)
    p.add_argument("--l", type=int, default=0)
    p.add_argument("--variant", type=int, choices=[0, 1], default=0, help="value-lb: 0 for M0, 1 for M1")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_instance)

    p = sub.add_parser("demo-impossibility", help="essinf value gap vs distinguishing-sample bound")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--p-grid", type=_float_list, required=True)
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("check", help="randomized contraction, simulation and greedy bound checks")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("budget", help="sample counts from the budget formulas")
    p.add_argument("--risk", required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--S", type=int, required=True)
    p.add_argument("--A", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--mode", choices=MODES, default="value")
    p.add_argument("--as-printed", action="store_true")
    p.set_defaults(func=cmd_budget)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OceError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
