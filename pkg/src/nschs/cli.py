"""Command-line entry point ``nschs``."""
from __future__ import annotations

import argparse
import sys

from .config import ConfigError, parse_config
from .experiments import converge, perturb, sweep_eps, sweep_omega
from .params import validate_assumptions
from .runner import EXIT_CONFIG, EXIT_MONITOR, EXIT_OK, run_simulation


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the config-error code, keeping 2 for monitor trips."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="nschs", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("validate", help="parse a config and print the assumption report")
    p.add_argument("config")
    p = sub.add_parser("run", help="run one simulation")
    p.add_argument("config")
    p.add_argument("-o", "--output-dir", default=None)
    p = sub.add_parser("converge", help="spatial and temporal self-convergence study")
    p.add_argument("config")
    p = sub.add_parser("sweep-eps", help="regularization sweep")
    p.add_argument("config")
    p.add_argument("--eps", type=float, nargs="+", required=True)
    p = sub.add_parser("sweep-omega", help="penalty sweep")
    p.add_argument("config")
    p.add_argument("--omega", type=float, nargs="+", required=True)
    p = sub.add_parser("perturb", help="twin-run continuous-dependence study")
    p.add_argument("config")
    p.add_argument("--delta", type=float, nargs="+", required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if args.command == "validate":
            print(validate_assumptions(cfg.params))
            print("config ok")
            return EXIT_OK
        if args.command == "run":
            res = run_simulation(cfg, args.output_dir)
            print(f"{res.message} after {res.steps} steps, t = {res.state.t:.6g}")
            return res.exit_code
        if args.command == "converge":
            rep = converge(cfg)
            print(rep)
            return EXIT_OK if rep.passed else EXIT_MONITOR
        if args.command in ("sweep-eps", "sweep-omega"):
            rep = sweep_eps(cfg, args.eps) if args.command == "sweep-eps" else sweep_omega(cfg, args.omega)
            print(rep)
            return rep.exit_code
        if args.command == "perturb":
            reports = [perturb(cfg, d) for d in args.delta]
            for rep in reports:
                print(rep)
            amps = [r.Y_amplification for r in reports]
            if len(amps) > 1:
                spread = max(amps) / min(amps)
                print(f"Y amplification spread across delta levels: {spread:.6g}")
            return max(r.exit_code for r in reports)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
