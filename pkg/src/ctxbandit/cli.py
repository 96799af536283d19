"""Command-line front end.

    ctxbandit run --preset channel-k4 --policy dcb --epsilon 0.01 --horizon 100000 --reps 20 --seed 42
    ctxbandit reproduce table1
    ctxbandit verify lemma1 --k 2 --means 0.9,0.1 --epsilon 0 --n 150,300,600 --reps 20000

Data goes to stdout, progress and logs to stderr.  Exit codes: 0 success,
1 invalid input, 2 runtime failure, 3 a verified bound was violated.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

import yaml

from . import bounds, reproduce
from .config import ConfigError, ExperimentConfig, PolicyConfig, config_from_dict
from .environments import PRESETS, compute_genie, get_preset
from .experiments import run_experiment

log = logging.getLogger("ctxbandit")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_VIOLATED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for runtime failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(float(x)) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _count(text: str) -> int:
    try:
        return int(float(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ctxbandit", description="Contextual bandits with known reward functions")
    p.add_argument("-v", "--verbose", action="count", default=0, help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="simulate one policy and print its regret trace as CSV")
    r.add_argument("--config", help="YAML/JSON experiment file; flags override its values")
    r.add_argument("--preset", choices=sorted(PRESETS), help="environment preset")
    r.add_argument("--policy", help="dcb | ucb1 | multi-ucb | ccb | ccb-doubling | genie")
    r.add_argument("--epsilon", type=float)
    r.add_argument("--delta", type=float, help="quantization width (ccb, multi-ucb on continuous contexts)")
    r.add_argument("--alpha", type=float, help="regret exponent target (ccb-doubling)")
    r.add_argument("--scale-confidence", action="store_true", default=None,
                   help="multi-ucb: scale the confidence radius by each context's reward range")
    r.add_argument("--horizon", type=_count)
    r.add_argument("--reps", type=_count, help="replications")
    r.add_argument("--seed", type=_count)
    r.add_argument("--checkpoints", type=_int_list, help="comma-separated trial indices")
    r.add_argument("--name")
    r.add_argument("--workers", type=int, help="threads for replications")

    rp = sub.add_parser("reproduce", help="rerun a published table or figure")
    rp.add_argument("artifact", choices=reproduce.ARTIFACTS)
    rp.add_argument("--reps", type=_count)
    rp.add_argument("--seed", type=_count, default=reproduce.DEFAULT_SEED)
    rp.add_argument("--horizon", type=_count, help="override the published horizon (quick runs)")
    rp.add_argument("--json", action="store_true", help="tables: emit JSON instead of text")

    v = sub.add_parser("verify", help="check a regret or concentration bound empirically")
    vs = v.add_subparsers(dest="check", required=True, parser_class=_Parser)
    l1 = vs.add_parser("lemma1", help="UCB1(eps) high-probability bound on optimal pulls")
    l1.add_argument("--k", type=int, default=2)
    l1.add_argument("--means", type=_float_list, default=[0.9, 0.1])
    l1.add_argument("--epsilon", type=float, default=0.0)
    l1.add_argument("--n", type=_int_list, default=[150, 300, 600])
    l1.add_argument("--reps", type=_count, default=20000)
    for name, helptext, default_h in (("theorem1", "pull bound for never-optimal arms", None),
                                      ("theorem2", "bounded non-optimal pulls of optimal arms", 10**5),
                                      ("theorem3", "logarithmic regret slope", 10**5)):
        t = vs.add_parser(name, help=helptext)
        t.add_argument("--preset", default="channel-k7", choices=[k for k, f in PRESETS.items()
                                                                   if f().is_discrete])
        t.add_argument("--epsilon", type=float, default=0.01)
        t.add_argument("--reps", type=_count, default=50 if name != "theorem3" else 20)
        if name == "theorem1":
            t.add_argument("--n", type=_int_list, default=[10**3, 10**4, 10**5])
        else:
            t.add_argument("--horizon", type=_count, default=default_h)
        if name == "theorem2":
            t.add_argument("--threshold", type=float, default=2.0)
    for sp in (l1, *[vs.choices[n] for n in ("theorem1", "theorem2", "theorem3")]):
        sp.add_argument("--seed", type=_count, default=0)
        sp.add_argument("--json", action="store_true")
    return p


# ------------------------------------------------------------------- run


def _run_config(args) -> ExperimentConfig:
    doc: dict = {}
    if args.config:
        with open(args.config) as fh:
            doc = yaml.safe_load(fh) or {}
        if not isinstance(doc, dict):
            raise ConfigError([f"{args.config}: document must be a mapping"])
    pol = doc.get("policy", {})
    pol = {"type": pol} if isinstance(pol, str) else dict(pol)
    for flag, key in (("policy", "type"), ("epsilon", "epsilon"), ("delta", "delta"), ("alpha", "alpha"),
                      ("scale_confidence", "scale_confidence")):
        val = getattr(args, flag)
        if val is not None:
            pol[key] = val
    if pol:
        doc["policy"] = pol
    for flag, key in (("preset", "environment"), ("horizon", "horizon"), ("reps", "replications"),
                      ("seed", "seed"), ("checkpoints", "checkpoints"), ("name", "name")):
        val = getattr(args, flag)
        if val is not None:
            doc[key] = val
    missing = [f"--{f}" for f, k in (("preset", "environment"), ("horizon", "horizon")) if k not in doc]
    if "type" not in pol:
        missing.append("--policy")
    if missing:
        raise UsageError(f"missing required flag(s): {', '.join(missing)} (or supply them in --config)")
    return config_from_dict(doc)


def cmd_run(args) -> int:
    cfg = _run_config(args)
    trace = run_experiment(cfg, workers=args.workers)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(trace.csv_header())
    for row in trace.to_rows():
        w.writerow([row[0]] + [f"{v:.10g}" for v in row[1:]])
    return EXIT_OK


def cmd_reproduce(args) -> int:
    if args.artifact in ("table1", "table2"):
        fn = reproduce.table1 if args.artifact == "table1" else reproduce.table2
        kw = {"seed": args.seed}
        if args.reps:
            kw["replications"] = args.reps
        if args.horizon:
            kw["horizon"] = args.horizon
        rep = fn(**kw)
        print(json.dumps(rep.to_dict(), indent=2) if args.json else rep.render())
        return EXIT_OK
    cols, rows = reproduce.figure(args.artifact, args.reps, args.seed, args.horizon)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        w.writerow([row[0]] + [f"{v:.10g}" for v in row[1:]])
    return EXIT_OK


# ---------------------------------------------------------------- verify


def _discrete_trace(preset: str, epsilon: float, horizon: int, reps: int, seed: int, checkpoints=None):
    cfg = ExperimentConfig(f"verify-{preset}", PolicyConfig("dcb", epsilon), preset, horizon, reps, seed,
                           checkpoints=checkpoints)
    return run_experiment(cfg.check())


def verify_reports(args) -> list[bounds.BoundReport]:
    if args.check == "lemma1":
        return bounds.verify_lemma1(args.k, args.means, args.epsilon, args.n, args.reps, args.seed)
    env = get_preset(args.preset)
    genie = compute_genie(env)
    if args.epsilon <= 0:
        raise ConfigError(["--epsilon: DCB requires epsilon > 0"])
    if args.check == "theorem1":
        ns = sorted(set(args.n))
        if not genie.non_optimal_set:
            raise ConfigError([f"{args.preset} has no never-optimal arms; nothing to bound"])
        tr = _discrete_trace(args.preset, args.epsilon, ns[-1], args.reps, args.seed, ns)
        return bounds.theorem1_reports(tr, genie, args.epsilon, ns)
    if args.check == "theorem2":
        tr = _discrete_trace(args.preset, args.epsilon, args.horizon, args.reps, args.seed)
        return bounds.theorem2_flatness(tr, genie, args.threshold)
    tr = _discrete_trace(args.preset, args.epsilon, args.horizon, args.reps, args.seed)
    return [bounds.evaluate_theorem3_slope(tr, genie, args.epsilon)]


def cmd_verify(args) -> int:
    reports = verify_reports(args)
    if args.json:
        print(json.dumps([r.to_dict() for r in reports], indent=2))
    else:
        for r in reports:
            print(r)
    return EXIT_OK if all(r.satisfied for r in reports) else EXIT_VIOLATED


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "reproduce": cmd_reproduce, "verify": cmd_verify}[args.command]
    try:
        return handler(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"ctxbandit: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except ConfigError as e:
        for msg in e.errors:
            print(f"ctxbandit: invalid config: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, FileNotFoundError) as e:
        print(f"ctxbandit: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:  # noqa: BLE001
        log.exception("runtime failure")
        print(f"ctxbandit: runtime failure: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
