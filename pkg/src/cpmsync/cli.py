"""Command-line front end for the Monte Carlo harness.

    cpmsync <subcommand> [--config cfg.yaml] [--seed U64] [--out PATH]
                         [--trials N] [--threads N]

Subcommands: mse-sweep, framesync-sweep, roc, calibrate-threshold, ber, fig5.
CLI flags override config-file keys; see configs/default.yaml for the schema.
"""

from __future__ import annotations

import argparse
import sys
import time

from .harness import RUNNERS, load_config, write_csv


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cpmsync",
                                description="Burst-mode CPM synchronization experiments")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in RUNNERS.items():
        sp = sub.add_parser(name, help=fn.__doc__.splitlines()[0].strip()
                            if fn.__doc__ else None)
        sp.add_argument("--config", type=str, default=None, help="YAML config file")
        sp.add_argument("--seed", type=int, default=None, help="master seed")
        sp.add_argument("--out", type=str, default=None, help="output CSV path")
        sp.add_argument("--trials", type=int, default=None, help="trials per sweep point")
        sp.add_argument("--threads", type=int, default=None, help="worker threads")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in ("seed", "out", "trials", "threads")}
    cfg = load_config(args.config, overrides)
    t0 = time.time()
    rows = RUNNERS[args.command](cfg)
    write_csv(cfg.out, rows, cfg)
    print(f"{args.command}: {len(rows)} rows -> {cfg.out} "
          f"({time.time() - t0:.1f} s, seed {cfg.seed})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
