"""Command-line entry point: `sim run|validate|oracle`."""

from __future__ import annotations

import argparse
import sys

from .config import ScenarioConfig, load_config
from .errors import SimulationError
from .scenarios import SCENARIOS, run_oracle_comparison, run_scenario


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sim",
        description="Optical response of a two-dimensional Rydberg-atom array.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a scenario and write CSV results")
    run.add_argument("scenario", choices=SCENARIOS)
    run.add_argument("--config", required=True, help="YAML configuration file")
    run.add_argument("--seed", type=int, default=None, help="override run.seed")
    run.add_argument("--out", default=None, help="override run.output_dir")
    run.add_argument("--workers", type=int, default=None, help="override run.workers")

    val = sub.add_parser("validate", help="parse and validate a configuration")
    val.add_argument("--config", required=True)

    orc = sub.add_parser(
        "oracle",
        help="compare the truncated solver against the dense master equation",
    )
    orc.add_argument("--n", type=int, required=True, choices=(1, 2, 3))
    orc.add_argument("--config", default=None, help="YAML configuration (defaults apply)")
    orc.add_argument("--out", default=None, help="also write oracle_n<N>.csv here")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            path = run_scenario(
                args.scenario, cfg,
                out_dir=args.out, seed=args.seed, workers=args.workers,
            )
            print(f"wrote {path} and {path.with_suffix('.json')}")
        elif args.command == "validate":
            load_config(args.config)
            print(f"configuration ok: {args.config}")
        elif args.command == "oracle":
            cfg = load_config(args.config) if args.config else ScenarioConfig()
            result = run_oracle_comparison(cfg, args.n, out_dir=args.out)
            trunc, orc = result["truncated"], result["oracle"]
            print(f"n_atoms={result['n_atoms']}  tau_d={result['tau_d']:.4g}")
            print(f"{'quantity':10s} {'truncated':>16s} {'oracle':>16s} {'rel.err':>10s}")
            for key in ("R", "T", "L"):
                t, o = trunc[key], orc[key]
                rel = abs(t - o) / max(abs(o), 1e-300)
                print(f"{key:10s} {t:16.9e} {o:16.9e} {rel:10.2e}")
            for key in ("g2_ff", "g2_bb"):
                for label, idx in (("(0)", 0), ("(td)", 1)):
                    t, o = trunc[key][idx], orc[key][idx]
                    rel = abs(t - o) / max(abs(o), 1e-300)
                    print(f"{key + label:10s} {t:16.9e} {o:16.9e} {rel:10.2e}")
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
