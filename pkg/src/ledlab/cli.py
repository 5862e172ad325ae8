"""``ledlab <command> --config FILE`` entry point.

Exit status: 0 when every check passes, 1 when a check fails or the run
aborts with a numerical error (the report is still written), 2 for an
invalid configuration.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .commands import run
from .config import COMMANDS, gallery_names, load_config, load_gallery
from .errors import ConfigError
from .io import table_name, write_csv, write_json, write_matrix, write_problem

log = logging.getLogger("ledlab")


def _parser():
    p = argparse.ArgumentParser(prog="ledlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"ledlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        c = sub.add_parser(name)
        src = c.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", type=Path, help="experiment TOML file")
        src.add_argument("--gallery", choices=gallery_names(), help="use a bundled configuration")
        c.add_argument("--out", type=Path, help="output directory (default: config 'out' or ./ledlab_out)")
        c.add_argument("--seed", type=int, help="override the configured seed")
        c.add_argument("--threads", type=int, default=1, help="worker threads for parallel stages")
        c.add_argument("-v", "--verbose", action="store_true")
    return p


def _limit_blas(threads):
    # numerical kernels are already parallel over tests; keep BLAS single threaded unless asked
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(max(1, threads)))


def write_outputs(outcome, cfg, out_dir, timestamp):
    out_dir = Path(out_dir)
    report = outcome.report(cfg, timestamp)
    for name, rows in outcome.tables.items():
        write_csv(out_dir / table_name(outcome.command, name), rows)
    for name, mat in outcome.matrices.items():
        write_matrix(out_dir / f"{name}.mtx", mat)
    if outcome.problem is not None:
        write_problem(out_dir / f"{outcome.command}_problem", *outcome.problem)
    path = out_dir / f"{outcome.command}_report.json"
    write_json(path, report)
    return path


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    _limit_blas(args.threads)
    try:
        cfg = load_config(args.config) if args.config else load_gallery(args.gallery)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("seed must lie in [0, 2^64)", "seed")
            cfg = cfg.model_copy(update={"seed": args.seed})
        if args.threads < 1:
            raise ConfigError("threads must be positive", "threads")
        outcome = run(args.command, cfg, threads=args.threads)
    except ConfigError as exc:
        print(f"ledlab: configuration error at '{exc.path}': {exc.message}", file=sys.stderr)
        return 2
    out_dir = args.out or Path(cfg.out or "ledlab_out")
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    path = write_outputs(outcome, cfg, out_dir, stamp)
    failed = [c.name for c in outcome.checks if not c.passed]
    if outcome.error:
        print(f"ledlab: {outcome.error}", file=sys.stderr)
    elif failed:
        print(f"ledlab: failed checks: {', '.join(failed)}", file=sys.stderr)
    print(path)
    return 0 if outcome.passed else 1


if __name__ == "__main__":
    sys.exit(main())
