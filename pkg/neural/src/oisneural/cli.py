"""Command line: train on an exported manifest, refine .flo files."""

import argparse
import sys
from pathlib import Path

from .infer import load_checkpoint, refine_file
from .train import TrainConfig, train


def parse_size(text: str):
    """'WxH' -> (width, height); 'auto' -> None (use the data's size)."""
    if text.strip().lower() == "auto":
        return None
    try:
        width, height = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ValueError(f"expected WxH or 'auto', got {text!r}") from None
    if width < 1 or height < 1:
        raise ValueError("input size must be positive")
    return (width, height)


def cmd_train(args) -> int:
    cfg = TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        input_size=parse_size(args.input_size),
    )
    checkpoint = train(
        args.manifest,
        cfg,
        args.out,
        epochs=args.epochs,
        max_steps=args.max_steps,
        seed=args.seed,
        base_channels=args.base_channels,
        levels=args.levels,
        log=lambda msg: print(msg, file=sys.stderr),
    )
    print(checkpoint)
    return 0


def cmd_infer(args) -> int:
    model = load_checkpoint(args.checkpoint)
    inputs = [Path(p) for p in args.inputs]
    out = Path(args.out)
    if len(inputs) == 1 and out.suffix == ".flo":
        out.parent.mkdir(parents=True, exist_ok=True)
        print(refine_file(model, inputs[0], out))
        return 0
    out.mkdir(parents=True, exist_ok=True)
    for path in inputs:
        print(refine_file(model, path, out / path.name))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oisneural", description="Learned refinement of predicted flows."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model on an exported manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="directory for checkpoint and curve")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--input-size", default="360x270",
                   help="WxH every training flow must match, or 'auto'")
    p.add_argument("--base-channels", type=int, default=32)
    p.add_argument("--levels", type=int, default=4)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="refine .flo files with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True,
                   help="output directory, or a .flo path for a single input")
    p.add_argument("inputs", nargs="+", help=".flo files to refine")
    p.set_defaults(func=cmd_infer)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"oisneural error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
