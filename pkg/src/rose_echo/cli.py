"""Command-line entry point: ``rose-echo <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .model import CHS_BETA, CHS_MU, CHS_OMEGA0, SIGNAL_TAU, T2
from .runner import (
    design_pulse,
    phase_match_report,
    run_reproduce_fig4,
    run_reproduce_fig5,
    run_simulate,
    to_jsonable,
    write_json,
)
from .scenario import PAPER_DEFAULTS, load_scenario, paper_defaults
from .units import format_quantity, parse_quantity

SUMMARY_KEYS = (
    "efficiency", "efficiency_analytic", "efficiency_bloch", "echo_time_s", "timing_error_s",
    "signal_in", "transmitted", "echo", "background", "snr", "seed",
)


def _common(suppress: bool = False) -> argparse.ArgumentParser:
    # Subcommand copies suppress their defaults so flags placed before the
    # subcommand are not overwritten.
    p = argparse.ArgumentParser(add_help=False)
    d = (lambda value: argparse.SUPPRESS) if suppress else (lambda value: value)
    p.add_argument("--seed", type=int, default=d(None), help="RNG seed (default: the scenario's)")
    p.add_argument("--out-dir", type=Path, default=d(Path("rose-echo-out")), help="output directory")
    p.add_argument("--threads", type=int, default=d(None), help="worker threads for the Bloch integration")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rose-echo", description=__doc__, parents=[_common()])
    common = _common(suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run one scenario end to end")
    p.add_argument("config", help=f"JSON config path, or {PAPER_DEFAULTS!r}")

    p = sub.add_parser("design-pulse", parents=[common], help="check a CHS design and its inversion")
    p.add_argument("--omega0", default=format_quantity(CHS_OMEGA0, "angular_frequency"), help="peak Rabi frequency, e.g. '800 kHz'")
    p.add_argument("--beta", default=format_quantity(CHS_BETA, "angular_frequency"), help="sech rate, e.g. '80 kHz'")
    p.add_argument("--mu", type=float, default=CHS_MU, help="chirp parameter")
    p.add_argument("--t2", default=format_quantity(T2, "time"), help="coherence time, e.g. '55 us'")
    p.add_argument("--signal-tau", default=format_quantity(SIGNAL_TAU, "time"), help="signal duration τ, e.g. '2 us'")
    p.add_argument("--no-simulate", action="store_true", help="skip the Bloch inversion profile")

    p = sub.add_parser("phase-match", parents=[common], help="phase-matching verdicts of a geometry")
    p.add_argument("config", help=f"JSON config path, or {PAPER_DEFAULTS!r}")

    p = sub.add_parser("reproduce-fig4", parents=[common], help="SE tail after one or two CHS pulses")
    p.add_argument("--variant", required=True, choices=["one_chs", "two_chs"])

    p = sub.add_parser("reproduce-fig5", parents=[common], help="14-photon ROSE run, seed averaged")
    p.add_argument("--n-seeds", type=int, default=20, help="number of seeded realisations to average")

    sub.add_parser("show-defaults", parents=[common], help="print the paper-defaults config")
    return parser


def _print(obj) -> None:
    print(json.dumps(to_jsonable(obj), indent=2, sort_keys=True))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            result = run_simulate(load_scenario(args.config), args.seed, args.out_dir, args.threads)
            _print({k: result.metrics[k] for k in SUMMARY_KEYS})
        elif args.command == "design-pulse":
            out = design_pulse(
                parse_quantity(args.omega0, "angular_frequency"),
                parse_quantity(args.beta, "angular_frequency"),
                args.mu,
                parse_quantity(args.t2, "time"),
                parse_quantity(args.signal_tau, "time"),
                simulate=not args.no_simulate,
                threads=args.threads or 1,
            )
            args.out_dir.mkdir(parents=True, exist_ok=True)
            write_json(args.out_dir / "design_pulse.json", out)
            _print(out)
        elif args.command == "phase-match":
            out = phase_match_report(load_scenario(args.config))
            args.out_dir.mkdir(parents=True, exist_ok=True)
            write_json(args.out_dir / "phase_match.json", out)
            _print(out)
        elif args.command == "reproduce-fig4":
            out = run_reproduce_fig4(args.variant, args.seed, args.out_dir)
            _print({k: v for k, v in out.items() if k != "scenario"})
        elif args.command == "reproduce-fig5":
            out = run_reproduce_fig5(args.n_seeds, args.seed, args.out_dir, args.threads)
            _print({k: v for k, v in out.items() if k not in ("scenario", "per_seed")})
        elif args.command == "show-defaults":
            _print(paper_defaults().to_dict())
    except (ValueError, OSError, FloatingPointError) as exc:
        print(f"rose-echo: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
