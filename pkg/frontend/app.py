import argparse
import sys
import os
from pathlib import Path
from typing import List, Optional

# Add project root directory to Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

# Load environment variables BEFORE importing other modules
from utils.config.env_loader import load_env
load_env()

from frontend.page import bounds, gradcheck, levelset, regime, train
from frontend.run_config import config_hash, load_config
from frontend.ui_components import ArtifactWriter, RunManifest
from utils import __version__
from utils.config.settings import get_runtime_settings
from utils.core.exceptions import ResNetLabException
from utils.core.logging import get_project_logger, run_context

logger = get_project_logger(__name__)

PAGES = {
    "gradcheck": gradcheck.main,
    "regime": regime.main,
    "bounds": bounds.main,
    "train": train.main,
    "levelset": levelset.main,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="resnetlab", description="eps-delta ResNet expressivity toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML config or manifest.json of an earlier run")
    common.add_argument("--out", type=Path, help="Artifact directory")
    common.add_argument("--seed", type=int, help="Root seed")

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("gradcheck", parents=[common], help="Exact input gradients vs finite differences")
    regime_parser = commands.add_parser("regime", parents=[common], help="Regime constants and verdict")
    regime_parser.add_argument("--model", type=Path, help="Model JSON file")
    regime_parser.add_argument("--search", action="store_true", default=None,
                               help="Cross-check with a critical-point search")
    bounds_parser = commands.add_parser("bounds", parents=[common], help="Certified proximity bound sweeps")
    bounds_parser.add_argument("--kind", choices=["euler", "mlp"])
    commands.add_parser("train", parents=[common], help="Toy training protocol")
    levelset_parser = commands.add_parser("levelset", parents=[common], help="Level-set topology of a model")
    levelset_parser.add_argument("--model", type=Path, help="Model JSON file")
    levelset_parser.add_argument("--level", type=float, help="Level c")
    levelset_parser.add_argument("--reference", type=Path, help="Reference model for the level-crossing check")
    levelset_parser.add_argument("--mu", type=float, help="Distance to the reference, measured if omitted")
    return parser


def run_command(args: argparse.Namespace) -> int:
    overrides = {key: getattr(args, key, None) for key in ("model", "search", "kind", "level", "reference", "mu")}
    config = load_config(args.command, args.config, seed=args.seed, out=args.out, **overrides)
    out_dir = config.out or get_runtime_settings().output_root / args.command
    writer = ArtifactWriter(out_dir)
    manifest = RunManifest(command=args.command, config_hash=config_hash(config),
                           config=config.model_dump(mode="json", exclude={"out"}), seeds=[config.seed])
    try:
        seeds = PAGES[args.command](config, writer)
    except ResNetLabException as e:
        writer.finish(manifest.model_copy(update={"status": e.error_code or type(e).__name__}))
        raise
    writer.finish(manifest.model_copy(update={"seeds": seeds}))
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point of the ``resnetlab`` console script.

    Exit codes: 0 success, 2 configuration error, 3 property violation,
    4 numerical failure, 5 verdict inapplicable (augmented model).
    """
    args = build_parser().parse_args(argv)
    try:
        with run_context(args.command, args.seed):
            return run_command(args)
    except ResNetLabException as e:
        logger.error(f"{args.command} failed: {e}")
        for key, value in e.details.items():
            logger.error(f"  {key}: {value}")
        print(f"resnetlab {args.command}: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
