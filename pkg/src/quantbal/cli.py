"""Command-line entry point: ``quantbal balance|consensus [flags]``."""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, InvariantViolation
from .harness import TrialFailure, export_series, parse_config, run_experiment

_FLAGS = [
    ("--N", int, "number of nodes"),
    ("--p", float, "extra-edge probability"),
    ("--trials", int, "initial-value realizations per graph"),
    ("--graph-realizations", int, "number of random graphs"),
    ("--max-iters", int, "rounds per trial"),
    ("--tol", float, "stop a trial once its metric is at or below this"),
    ("--q-min", float, "quantizer lower bound"),
    ("--q-max", float, "quantizer upper bound"),
    ("--alpha-a0", float, "consensus step scale"),
    ("--alpha-tau", float, "consensus step decay exponent"),
    ("--master-seed", int, "seed for every random draw"),
    ("--record-every", int, "recording stride in rounds"),
    ("--emit", str, "output format: csv or json"),
    ("--graph-file", str, "fixed graph in edge-list format"),
    ("--workers", int, "parallel worker processes"),
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quantbal", description=__doc__)
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode, help_text in (("balance", "one-bit weight balancing"),
                            ("consensus", "two-bit quantized average consensus")):
        p = sub.add_parser(mode, help=help_text)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--out", help="output path (default: <mode>_series.<emit>)")
        for flag, kind, text in _FLAGS:
            p.add_argument(flag, type=kind, help=text)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {flag.lstrip("-").replace("-", "_"): getattr(args, flag.lstrip("-").replace("-", "_"))
                 for flag, _, _ in _FLAGS}
    overrides["mode"] = args.mode
    try:
        cfg = parse_config(args.config, overrides)
        result = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except TrialFailure as exc:
        kind = "invariant violation" if isinstance(exc.cause, InvariantViolation) else "trial failed"
        print(f"{kind}: {exc}", file=sys.stderr)
        return 2
    out = args.out or f"{cfg.mode}_series.{cfg.emit}"
    export_series(result.series, out, cfg.emit, cfg)
    s = result.series
    print(f"{cfg.mode}: {len(result.trials)} trials, {s.metric} mean at k={int(s.k[-1])}: "
          f"{float(s.mean[-1]):.6g} -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
