"""Simulate raw inputs, run every stage and print the regression table.

    python3 scripts/demo_pipeline.py            # uses scripts/synthetic.ini
    python3 scripts/demo_pipeline.py -c my.ini --set spill.theta=0.1
"""

import argparse
import sys
from pathlib import Path

from duplexnet.cli import main as cli
from duplexnet.config import load_config

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("-c", "--config", default=str(HERE / "synthetic.ini"))
    ap.add_argument("--set", dest="overrides", action="append", default=[])
    args = ap.parse_args()
    extra = [x for o in args.overrides for x in ("--set", o)]

    for command in ("simulate", "all"):
        code = cli([command, "-c", args.config, *extra])
        if code:
            return code
    out = load_config(args.config, args.overrides).output_dir
    print((out / "report" / "table.txt").read_text())
    return 0


if __name__ == "__main__":
    sys.exit(main())
