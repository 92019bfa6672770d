"""Command line entry point: train on an HR directory, export weights."""

from __future__ import annotations

import argparse
import sys

from . import topo
from .train import TrainConfig, export, train


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lutsr-train",
        description="Train mapping-module weights for the lutsr engine.",
    )
    p.add_argument("hr_dir", help="directory of high-resolution PNG images")
    p.add_argument("out", help="output weight file")
    p.add_argument("--variant", default="S", choices=topo.BUILTIN_NAMES)
    p.add_argument("--vf", type=int, default=16, choices=topo.QUERY_BINS,
                   help="aggregation bin count")
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--crop", type=int, default=48, help="LR crop side")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--loss-log", default=None, help="write iteration,loss lines here")
    p.add_argument("--no-rotate", action="store_true", help="disable 90-degree rotations")
    p.add_argument("--no-flip", action="store_true", help="disable horizontal flips")
    p.add_argument("--loader-threads", type=int, default=1)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = TrainConfig(
        hr_dir=args.hr_dir,
        variant=args.variant,
        v_f=args.vf,
        iterations=args.iters,
        lr=args.lr,
        batch_size=args.batch,
        crop=args.crop,
        seed=args.seed,
        rotate=not args.no_rotate,
        flip=not args.no_flip,
        loader_threads=args.loader_threads,
    )
    try:
        result = train(cfg, loss_log=args.loss_log)
        export(result.net, args.out)
    except ValueError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return 4
    print(
        f"trained {args.variant}@{args.vf} for {cfg.iterations} iterations, "
        f"final loss {result.losses[-1]:.4f}, wrote {args.out}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
