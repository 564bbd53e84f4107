"""
Command-line entry point.
Sub-commands: run <plan.json>, report <dir>, pf-cache <problem> <M> <count> <seed>.
"""

import argparse
import logging
import sys
from typing import List, Optional

from .core.config import get_settings
from .core.exceptions import MBOError
from .core.utils import load_environment, log_error, setup_logging


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mbo-epbii",
                                     description="Many-objective Bayesian optimization experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute an experiment plan")
    run_p.add_argument("config", help="JSON experiment plan")
    run_p.add_argument("--workers", type=int, default=None, help="worker-pool width (overrides MBO_WORKERS)")

    report_p = sub.add_parser("report", help="print summaries of completed runs")
    report_p.add_argument("output_dir")

    cache_p = sub.add_parser("pf-cache", help="write a Pareto-front reference cloud")
    cache_p.add_argument("problem")
    cache_p.add_argument("n_obj", type=int)
    cache_p.add_argument("count", type=int)
    cache_p.add_argument("seed", type=int)
    cache_p.add_argument("--n-var", type=int, default=10)
    cache_p.add_argument("--cache-dir", default=None)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_environment()
    settings = get_settings()
    setup_logging("DEBUG" if settings.debug else settings.log_level)
    logger = logging.getLogger(__name__)
    args = build_parser().parse_args(argv)

    from .cli import commands

    try:
        if args.command == "run":
            plan = commands.parse_config(args.config)
            return commands.run_plan(plan, args.workers)
        if args.command == "report":
            return commands.report(args.output_dir)
        path = commands.pf_cache(args.problem, args.n_obj, args.count, args.seed, args.cache_dir, args.n_var)
        logger.info(f"Reference set written to {path}")
        return 0
    except MBOError as e:
        log_error(e, f"command '{args.command}'")
        return 1


if __name__ == "__main__":
    sys.exit(main())
