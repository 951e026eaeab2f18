"""
Command-line entry point for the angle coder laboratory

    python main.py roundtrip --coder fsc --n-freq 2 --angle-step-deg 0.01
    python main.py montecarlo --coder pscd --sigma 0.05 --trials 1000000 --out var.csv
    python main.py errordist --compare fsc,pscd --sigma 0.3 --modulus 0.3
    python main.py losscheck --points 1000

Exit status: 0 success, 1 an asserted contract failed, 2 invalid input, 3 I/O error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import structlog
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from config import build_experiment_config, config
from errors import AngleCoderError, InvalidInputError
from experiments import ExperimentResult, ExperimentRunner, write_result
from models import CoderKind, OutputFormat, Subcommand

EXIT_OK = 0
EXIT_CONTRACT = 1
EXIT_INVALID = 2
EXIT_IO = 3

stderr_console = Console(stderr=True)
logger = structlog.get_logger(__name__)


def configure_logging(level: str) -> None:
    """Route structlog through the stdlib logger and render on stderr with rich"""
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(message)s",
        handlers=[RichHandler(console=stderr_console, show_path=False)],
        force=True,
    )
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.processors.format_exc_info,
            structlog.processors.KeyValueRenderer(key_order=["event"], sort_keys=True),
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )


def _common_flags() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    p = argparse.ArgumentParser(add_help=False, argument_default=S)
    p.add_argument("--config", type=Path, help="Flat key=value file; flags override it")
    p.add_argument("--coder", choices=[k.value for k in CoderKind], help="Coder under test (default fsc)")
    p.add_argument("--n-freq", type=int, help="FSC harmonic order N (default 2)")
    p.add_argument("--omega", type=int, help="Cycle mapping factor (default 2)")
    p.add_argument("--definition", choices=["le90", "le135", "oc"], help="Angle definition (default le90)")
    p.add_argument("--no-cyclic-wrapping", dest="cyclic_wrapping", action="store_false",
                   help="Decode FSC from the fundamental only")
    p.add_argument("--sigma", type=float, help="Gaussian channel noise (default 0)")
    p.add_argument("--modulus", type=float, help="Modulus scale m in (0, 1] (default 1)")
    p.add_argument("--trials", type=int, help=f"Monte Carlo trials (default {config.trials})")
    p.add_argument("--seed", type=int, help=f"Noise seed (default {config.seed})")
    p.add_argument("--workers", type=int, help="Worker threads; results do not depend on it")
    p.add_argument("--angle-step-deg", type=float, help="Angle grid step in degrees (default 1)")
    p.add_argument("--angle-deg", type=float, help="Fixed ground truth; unset sweeps 360 angles")
    p.add_argument("--threshold", type=float, help="PSC heuristic threshold, e.g. 0.47 (default off)")
    p.add_argument("--csl-bins", type=int, help=f"CSL bins (default {config.csl_bins})")
    p.add_argument("--csl-window", type=float, help="CSL window radius in bins (default 6)")
    p.add_argument("--out", dest="out_path", type=Path, help="Output file (default stdout)")
    p.add_argument("--format", choices=[f.value for f in OutputFormat], help="csv or json")
    p.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Log level")
    return p


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(description="Fourier Series Coder angle encoding laboratory")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    common = [_common_flags()]

    sub.add_parser("roundtrip", parents=common, help="Assert decode(encode(theta)) over the angle grid")
    sub.add_parser("sweep", parents=common, help="Per-angle decode table, optionally noisy")

    mc = sub.add_parser("montecarlo", parents=common, help="Variance against the modulus grid")
    mc.add_argument("--modulus-start", type=float, default=S, help="First modulus (default 1.0)")
    mc.add_argument("--modulus-stop", type=float, default=S, help="Last modulus (default 0.1)")
    mc.add_argument("--modulus-step", type=float, default=S, help="Grid step (default 0.05)")

    ed = sub.add_parser("errordist", parents=common, help="High-noise error histogram and CDF per coder")
    ed.add_argument("--compare", default=S, help="Comma list of coders (default fsc,pscd)")
    ed.add_argument("--constrained", default=S, help="Comma list held at unit modulus (default fsc)")
    ed.add_argument("--hist-bin-deg", type=float, default=S, help="Histogram bin width (default 2)")
    ed.add_argument("--cdf-step-deg", type=float, default=S, help="CDF threshold step (default 0.5)")

    lc = sub.add_parser("losscheck", parents=common, help="Gradient and zero-at-truth checks of the loss")
    lc.add_argument("--points", type=int, default=S, help="Random points for the gradient check (default 1000)")
    lc.add_argument("--beta", type=float, default=S, help="Smooth-L1 transition (default 1.0)")
    lc.add_argument("--manifold-weight", type=float, default=S, help="Manifold term weight (default 1.0)")
    lc.add_argument("--inject-fault", action="store_true", default=S, help="Use a wrong gradient (negative control)")
    return parser


def print_summary(result: ExperimentResult) -> None:
    table = Table(title=f"{result.subcommand.value}: {'PASS' if result.passed else 'FAIL'}")
    table.add_column("key")
    table.add_column("value")
    for key, value in result.summary.items():
        table.add_row(str(key), str(value))
    stderr_console.print(table)


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    args = vars(build_parser().parse_args(argv))
    subcommand = Subcommand(args.pop("subcommand"))
    config_file = args.pop("config", None)
    configure_logging(args.pop("log_level", config.log_level))
    flags: Dict[str, Any] = args

    try:
        cfg = build_experiment_config(subcommand, flags, config_file=config_file)
    except InvalidInputError as e:
        logger.error("invalid_configuration", error=str(e))
        return EXIT_INVALID
    except OSError as e:
        logger.error("config_unreadable", error=str(e))
        return EXIT_IO

    try:
        result = ExperimentRunner(cfg).run()
    except InvalidInputError as e:
        logger.error("invalid_input", error=str(e))
        return EXIT_INVALID
    except AngleCoderError as e:
        logger.error("experiment_failed", error=str(e))
        return EXIT_CONTRACT

    try:
        write_result(result, cfg)
    except OSError as e:
        logger.error("output_unwritable", path=str(cfg.out_path), error=str(e))
        return EXIT_IO

    print_summary(result)
    if not result.passed:
        logger.warning("contract_failed", subcommand=subcommand.value)
        return EXIT_CONTRACT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
