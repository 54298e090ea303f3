"""Command-line entry point: ``duplexnet <stage> --config run.ini``."""

from __future__ import annotations

import argparse
import sys

from duplexnet.config import load_config
from duplexnet.errors import DuplexError
from duplexnet.pipeline import STAGES, StageError, run_stages, simulate

COMMANDS = STAGES + ("all", "simulate")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="duplexnet", description="Duplex industry network pipeline.")
    ap.add_argument("command", choices=COMMANDS, help="stage to run; 'all' runs every stage in order")
    ap.add_argument("-c", "--config", help="INI configuration file")
    ap.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override a config value (repeatable)",
    )
    return ap


def _fail(stage: str, exc: DuplexError) -> int:
    print(
        f"duplexnet: error stage={stage} kind={type(exc).__name__} exit={exc.exit_code}: {exc}",
        file=sys.stderr,
    )
    return exc.exit_code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    stage = "config"
    try:
        cfg = load_config(args.config, args.overrides)
        if args.command == "simulate":
            stage = "simulate"
            cfg.validate(need_inputs=False)
            for key, path in simulate(cfg).items():
                print(f"{key}={path}")
            return 0
        stages = list(STAGES) if args.command == "all" else [args.command]
        manifest = run_stages(cfg, stages)
    except StageError as exc:
        return _fail(exc.stage, exc.error)
    except DuplexError as exc:
        return _fail(stage, exc)
    print(f"manifest={manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
