"""Command line entry point.

Exit status: 0 on success, 2 for configuration errors, 3 for runtime errors.
"""

import argparse
import sys
from dataclasses import replace

from ..codec import save_model
from ..errors import ConfigurationError, FastLinkError
from ..importance import distill_train, save_evaluator, save_pairs
from .config import LinkConfig, load_config
from .experiment import distill_pairs, prepare, prepare_codec, run_experiment
from .output import emit_csv, emit_summary, read_csv

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file (defaults if omitted)")
    common.add_argument("--seed", type=int, help="master seed, overrides the config")
    common.add_argument("--out", help="output path")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="fastlink", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train-codec", parents=[common], help="fit the codec and save it")
    d = sub.add_parser("distill", parents=[common], help="build distillation pairs and fit the evaluator")
    d.add_argument("--pairs", help="also save the (A, omega) pairs here")
    sub.add_parser("run", parents=[common], help="run the SNR sweep and write per-trial CSV")
    s = sub.add_parser("summarize", parents=[common], help="group a results CSV by scheme and SNR")
    s.add_argument("results", help="CSV written by 'run'")
    return parser


def _config(args):
    cfg = load_config(args.config) if args.config else LinkConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _train_codec(args):
    cfg = _config(args)
    model = prepare_codec(cfg, args.verbose)
    out = args.out or "codec.bin"
    save_model(model, out)
    print(f"codec c={model.c} h={model.h} w={model.w} saved to {out}")


def _distill(args):
    cfg = _config(args)
    model = prepare_codec(cfg, args.verbose)
    pairs = distill_pairs(cfg, model)
    if args.pairs:
        save_pairs(pairs, args.pairs)
    ev = distill_train(pairs, cfg.evaluator_ridge)
    out = args.out or "evaluator.bin"
    save_evaluator(ev, out)
    print(f"evaluator fitted on {len(pairs)} pairs saved to {out}")


def _run(args):
    cfg = _config(args)
    artifacts = prepare(cfg, args.verbose)
    rows = run_experiment(cfg, artifacts)
    out = args.out or "results.csv"
    emit_csv(rows, out)
    print(f"{len(rows)} rows written to {out}")


def _summarize(args):
    rows = read_csv(args.results)
    text = emit_summary(rows, args.out)
    if args.out is None:
        sys.stdout.write(text)


_COMMANDS = {"train-codec": _train_codec, "distill": _distill, "run": _run, "summarize": _summarize}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"fastlink: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FastLinkError, OSError) as exc:
        print(f"fastlink: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
