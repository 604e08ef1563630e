"""Command line: `unet-train train` and `unet-train export`."""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .export import export_masks
from .model import load_model
from .train import TrainSpec, train_to_files


def cmd_train(args: argparse.Namespace) -> int:
    spec = TrainSpec(
        satellite=args.satellite,
        epochs=args.epochs,
        seed=args.seed,
        lr=args.lr,
    )
    result = train_to_files(spec, args.stacks, args.corpus, args.out, args.curve)
    first = result.curve[0]["train_loss"]
    last = result.curve[-1]["train_loss"]
    print(json.dumps({"epochs": len(result.curve), "initial_loss": first, "final_loss": last}))
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    model, satellite = load_model(args.model)
    written = export_masks(model, satellite, args.stacks, args.out_dir)
    print(json.dumps({"satellite": satellite, "masks": len(written)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="unet-train",
        description="Train per-satellite segmentation U-Nets on pipeline corpora "
        "and export probability masks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model for one satellite")
    p.add_argument("--satellite", required=True,
                   choices=("Sentinel1", "Sentinel2", "Landsat8"))
    p.add_argument("--stacks", required=True, help="directory of FGPS stacks")
    p.add_argument("--corpus", required=True, help="corpus directory holding label tiles")
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=2e-3)
    p.add_argument("--out", required=True, help="model artifact path")
    p.add_argument("--curve", default=None, help="optional loss-curve JSON path")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("export", help="write FGPM masks for every matching stack")
    p.add_argument("--model", required=True)
    p.add_argument("--stacks", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_export)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
