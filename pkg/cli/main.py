"""Entry point of the ``hmil`` command."""

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from hmil import __version__
from hmil.data.splits import KFoldSplit
from shared.errors import EXIT_OK, EXIT_RUNTIME, exit_code_for
from shared.logging import get_logger, set_console_level

from .commands import cmd_compare, cmd_eval, cmd_gen, cmd_gradcheck, cmd_train
from .config import RunConfig, apply_overrides, load_run_config


logger = get_logger(__name__)

COMMANDS = ("gen", "train", "eval", "gradcheck", "compare")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hmil",
        description="Hierarchical multi-instance learning on bags of instance features",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s gen --out data/synth --seed 7
  %(prog)s train --dataset data/synth/manifest.json --out runs/full
  %(prog)s train --config run.json --model abmil --out runs/abmil
  %(prog)s eval --out runs/full --bootstrap 1000
  %(prog)s gradcheck --out runs/gradcheck
  %(prog)s compare --config sweep.json --workers 4
        """,
    )
    parser.add_argument("command", choices=COMMANDS, help="Sub-command to run")
    parser.add_argument("--config", help="Run configuration JSON document")
    parser.add_argument("--seed", type=int, help="Run seed (for gen: the generator seed)")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--dataset", help="Dataset manifest (overrides the synthetic section)")
    parser.add_argument("--model", choices=("hmil", "mean", "max", "abmil"), help="Model to train")
    parser.add_argument("--loss", help="Loss scheme: dynamic, static:a,b or coarse")
    parser.add_argument("--tau", type=float, help="Contrastive temperature")
    parser.add_argument("--bootstrap", type=int, help="Bootstrap replicates for eval (0 disables)")
    parser.add_argument("--kfold", metavar="K:I", help="Use fold I of a stratified K-fold split")
    parser.add_argument("--force", action="store_true", help="Overwrite a non-empty gen output directory")
    parser.add_argument("--checkpoint", help="Checkpoint for eval (default <out>/checkpoint.hmil)")
    parser.add_argument("--workers", type=int, help="Worker processes for compare")
    parser.add_argument("--verbose", "-v", action="store_true", help="Log DEBUG output to the console")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def _dataset_path(value: Optional[str]) -> Optional[str]:
    if value is None:
        return None
    path = Path(value).resolve()
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    return str(path)


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """Dotted configuration overrides for the flags that were given."""
    overrides: Dict[str, Any] = {
        "out": args.out,
        "dataset": _dataset_path(args.dataset),
        "model": args.model,
        "train.loss_mode": args.loss,
        "train.tau": args.tau,
        "eval.bootstrap": args.bootstrap,
    }
    if args.seed is not None:
        key = "synthetic.seed" if args.command == "gen" else "seed"
        overrides[key] = args.seed
    if args.kfold is not None:
        overrides["split"] = KFoldSplit.parse(args.kfold).model_dump()
        overrides["resplit"] = True
    return overrides


def run_command(args: argparse.Namespace) -> None:
    cfg: RunConfig = apply_overrides(load_run_config(args.config), overrides_from_args(args))
    logger.debug(f"Resolved configuration: {cfg.resolved_dump()}")
    if args.command == "gen":
        cmd_gen(cfg, force=args.force)
    elif args.command == "train":
        cmd_train(cfg)
    elif args.command == "eval":
        cmd_eval(cfg, checkpoint=args.checkpoint)
    elif args.command == "gradcheck":
        cmd_gradcheck(cfg)
    else:
        cmd_compare(cfg, workers=args.workers)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main CLI entry point.

    :param argv: Arguments without the program name (``sys.argv[1:]`` when
                 omitted).
    :return: 0 on success, 1 for validation errors, 2 for runtime or numeric
             errors, 3 when a gradient check breaches its threshold.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        set_console_level("DEBUG")

    try:
        run_command(args)
        return EXIT_OK
    except KeyboardInterrupt:
        logger.warning("Interrupted by user")
        return EXIT_RUNTIME
    except Exception as exc:
        code = exit_code_for(exc)
        logger.error(f"{args.command} failed ({type(exc).__name__}): {exc}")
        if args.verbose:
            logger.exception(exc)
        return code


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
