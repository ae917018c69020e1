"""Command line interface.

Exit codes: 0 success, 2 configuration error, 3 solver infeasibility.
"""
import argparse
import json
import logging
import sys

from . import constants, harness, observability
from .adversary import make_environment
from .exceptions import EtaTooLargeError, InfeasibilityError, LinPMError
from .games import make_game

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def _load_json(arg):
    """Inline JSON (starting with ``{``) or a path to a JSON file."""
    text = arg if arg.lstrip().startswith("{") else open(arg).read()
    return json.loads(text)


def _emit(obj, out=None):
    text = json.dumps(obj, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_classify(args):
    game = make_game(_load_json(args.game))
    _emit(observability.classify(game).to_dict(), args.out)


def cmd_constants(args):
    game = make_game(_load_json(args.game))
    report = constants.compute_constants(game, mode=args.mode, n_samples=args.samples, rng=args.seed)
    out = report.to_dict()
    out["local_eta_threshold"] = constants.local_eta_threshold(report, report.omega_bound)
    out["global_eta_threshold"] = constants.global_eta_threshold(report, report.omega_bound)
    _emit(out, args.out)


def _template(args):
    t = {"eta": args.eta}
    if args.delta is not None:
        t["delta"] = args.delta
    if args.L is not None:
        t["scale_L"] = args.L
    if args.rate_cap is not None:
        t["rate_cap"] = args.rate_cap
    if args.config:
        t.update(_load_json(args.config))
    return t


def cmd_run(args):
    game = make_game(_load_json(args.game))
    config = harness.make_config(_template(args), game, args.T)
    env = make_environment(_load_json(args.env), game, args.T)
    trace = harness.run(game, config, env, args.T, args.seed, force=args.force)
    if args.out:
        trace.to_csv(args.out)
    summary = {"game": game.name, "T": args.T, "seed": args.seed, "regret": harness.regret(trace),
               "violations": int(trace.violation.sum()), "audit_slack": harness.audit(trace)}
    if trace.theta is not None:
        summary["pseudo_regret"] = harness.pseudo_regret(trace)
    _emit(summary)


def cmd_sweep(args):
    game_spec = _load_json(args.game)
    env_spec = _load_json(args.env)
    horizons = [int(h) for h in args.horizons.split(",")]
    res = harness.sweep(game_spec, _template(args), env_spec, horizons, args.repeats, seed=args.seed,
                        n_jobs=args.jobs, slope_metric=args.metric)
    res.write(args.csv, args.json)
    _emit(res.to_dict())


def build_parser():
    p = argparse.ArgumentParser(prog="linpm", description="Linear partial monitoring toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", help="observability verdict of a game")
    c.add_argument("game", help="game JSON (path or inline)")
    c.add_argument("--out")
    c.set_defaults(func=cmd_classify)

    c = sub.add_parser("constants", help="alignment and design constants of a game")
    c.add_argument("game")
    c.add_argument("--mode", choices=["exact", "greedy", "sampled"], default="exact")
    c.add_argument("--samples", type=int, default=2000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(func=cmd_constants)

    for name, func in (("run", cmd_run), ("sweep", cmd_sweep)):
        c = sub.add_parser(name)
        c.add_argument("--game", required=True)
        c.add_argument("--env", required=True)
        c.add_argument("--eta", default="adaptive", help="positive float or 'adaptive'")
        c.add_argument("--delta", type=float)
        c.add_argument("--L", type=float)
        c.add_argument("--rate-cap", type=float)
        c.add_argument("--config", help="extra learner settings as JSON")
        c.add_argument("--seed", type=int, default=0)
        c.set_defaults(func=func)
        if name == "run":
            c.add_argument("--T", type=int, required=True)
            c.add_argument("--out", help="trace CSV path")
            c.add_argument("--force", action="store_true", help="run even on hopeless games")
        else:
            c.add_argument("--horizons", default="1000,4000,16000")
            c.add_argument("--repeats", type=int, default=10)
            c.add_argument("--jobs", type=int, default=1)
            c.add_argument("--metric", choices=["regret", "pseudo_regret"], default="pseudo_regret")
            c.add_argument("--csv")
            c.add_argument("--json")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        args.func(args)
    except (EtaTooLargeError, InfeasibilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (LinPMError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
