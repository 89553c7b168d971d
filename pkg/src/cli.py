"""
Command-line surface.

    python main.py [--config PATH] [--seed N] [--workspace DIR]
                   [--style-profile {cartoon,caricature,anime,custom}]
                   [--deterministic] [--log-level LEVEL] [--progress]
                   COMMAND [command options]
"""

import argparse
import logging
from typing import Any, Dict, List, Optional

from .config import STYLE_PROFILES, RunConfig
from .errors import DualStyleError
from .pipeline import COMMANDS, DualStylePipeline
from .reporting import setup_logging

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualstyle",
        description="Desk-scale exemplar-based portrait style transfer on synthetic sprites.")
    parser.add_argument("--config", help="JSON run configuration (default: repository config.json)")
    parser.add_argument("--seed", type=int, help="override the run seed")
    parser.add_argument("--workspace", help="override the workspace directory")
    parser.add_argument("--style-profile", choices=sorted(STYLE_PROFILES),
                        help="weight preset, Stage-III weights and refinement rates")
    parser.add_argument("--deterministic", action="store_true",
                        help="deterministic kernels, single thread")
    parser.add_argument("--log-level", default="INFO")
    parser.add_argument("--progress", action="store_true", help="show progress bars")

    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    dataset = sub.add_parser("dataset", help="render source and style images")
    dataset.add_argument("--n-identities", type=int, dest="n_identities")
    dataset.add_argument("--n-styles", type=int, dest="n_styles")

    sub.add_parser("train-base", help="train g, D and the identity embedder on source renders")
    sub.add_parser("train-encoder", help="train E against the frozen g")
    sub.add_parser("finetune-uncond", help="fine-tune a copy of g on the style images")

    destylize = sub.add_parser("destylize", help="destylize style exemplars into records")
    destylize.add_argument("--limit", type=int, help="only the first N exemplars")

    sub.add_parser("pretrain", help="Stage I initialization and Stage II pretraining")
    sub.add_parser("finetune", help="Stage III fine-tuning on the style records")
    sub.add_parser("refine", help="refine every record's extrinsic code")
    sub.add_parser("train-sampler", help="train the extrinsic code samplers")

    transfer = sub.add_parser("transfer", help="stylize one content image with one exemplar")
    transfer.add_argument("content", help="source dataset index or PNG path")
    transfer.add_argument("exemplar", help="style record index or PNG path")
    transfer.add_argument("--w", dest="weight_string", help='run-length weights, e.g. "3*0.75,5*1.0"')
    transfer.add_argument("--preserve-color", action="store_true", dest="preserve_color")
    transfer.add_argument("--output", help="output PNG (default: <workspace>/outputs/transfer.png)")

    sample = sub.add_parser("sample", help="random artistic portraits from sampled codes")
    sample.add_argument("--count", type=int, default=16)
    sample.add_argument("--w", dest="weight_string")

    sub.add_parser("adapter-lab", help="compare residual adapters against fine-tuning")

    grid = sub.add_parser("grid", help="content × exemplar panel or blending strip")
    grid.add_argument("--contents", type=int, default=4)
    grid.add_argument("--exemplars", type=int, default=4)
    grid.add_argument("--blend", choices=("intrinsic", "extrinsic", "both"))
    grid.add_argument("--steps", type=int, default=5)
    grid.add_argument("--w", dest="weight_string")
    return parser


GLOBAL_OPTIONS = {"config", "seed", "workspace", "style_profile", "deterministic",
                  "log_level", "progress", "command"}


def apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    """CLI flags win over file values."""
    if args.seed is not None:
        config.seed = args.seed
    if args.workspace:
        config.workspace = args.workspace
    if args.style_profile:
        config.style_profile = args.style_profile
    if args.deterministic:
        config.deterministic = True
    return config


def command_options(args: argparse.Namespace) -> Dict[str, Any]:
    return {k: v for k, v in vars(args).items() if k not in GLOBAL_OPTIONS and v is not None}


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one command and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on bad flags, matching ContractViolation
        return int(e.code) if e.code is not None else 0
    setup_logging(args.log_level)

    try:
        config = apply_overrides(RunConfig.load(args.config), args)
    except DualStyleError as e:
        logger.error("cannot load configuration: %s", e)
        return e.exit_code

    assert args.command in COMMANDS
    pipeline = DualStylePipeline(config, progress=args.progress)
    return pipeline.run_command(args.command, **command_options(args))
