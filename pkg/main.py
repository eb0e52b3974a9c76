"""
Main entry point for batch runs of the nonlocal isoperimetric toolkit.
Configures logging and dispatches `run <config.json>` to the runner.
"""

import argparse
import logging
import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent))

LOG_FILE = 'nonlocal_isoperimetric.log'


def configure_logging(level: str = "INFO") -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.StreamHandler(sys.stdout),
            logging.FileHandler(LOG_FILE)
        ]
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="main.py",
        description="Energy, stability, flow and diagnostics experiments for the nonlocal isoperimetric functional",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run the experiment described by a JSON config")
    run.add_argument("config", type=Path, help="Path to the run configuration (JSON)")
    run.add_argument("--out", type=Path, default=None, help="Output directory (overrides the config)")
    run.add_argument("--threads", type=int, default=None, help="Worker threads")
    run.add_argument("--dump-mesh-every", type=int, default=None, metavar="N",
                     help="Write flow meshes every N steps")
    run.add_argument("--export-matrices", action="store_true", help="Write assembled matrices as CSV")
    run.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                     help="Logging level")
    return parser


def main(argv=None) -> int:
    """Parse arguments and run; the return value is the process exit status."""
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    logger = logging.getLogger(__name__)

    from src.cli.runner import execute

    logger.info(f"Starting run of {args.config}")
    return execute(
        args.config,
        out=args.out,
        threads=args.threads,
        dump_mesh_every=args.dump_mesh_every,
        export_matrices=args.export_matrices,
    )


if __name__ == "__main__":
    sys.exit(main())
