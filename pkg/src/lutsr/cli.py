"""Command line interface.

Exit codes: 0 success, 2 usage or validation error, 3 file format error,
4 I/O error, 5 verification mismatch. Failures print a single
``ERROR <ClassName>: <message>`` line to stderr.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import engine, formats, image, mapping, metrics, model, report

EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_IO = 4
EXIT_VERIFY = 5


class VerifyMismatch(Exception):
    pass


def _threads_default() -> int:
    env = os.environ.get("LUTSR_THREADS", "1")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lutsr", description="x4 super-resolution from cascaded lookup tables"
    )
    sub = p.add_subparsers(dest="command", required=True)

    init = sub.add_parser("init-random", help="write a reproducible random weight file")
    init.add_argument("--variant", required=True, choices=model.BUILTIN_NAMES)
    init.add_argument("--vf", type=int, default=16, choices=model.QUERY_BINS,
                      help="aggregation bin count for query tables")
    init.add_argument("--seed", type=int, default=1)
    init.add_argument("--out", required=True)

    build = sub.add_parser("build-luts", help="transfer a weight file into tables")
    build.add_argument("--weights", required=True)
    build.add_argument("--out", required=True)

    sr = sub.add_parser("sr", help="upscale one PNG by x4")
    sr.add_argument("--luts", required=True)
    sr.add_argument("--input", required=True)
    sr.add_argument("--output", required=True)
    sr.add_argument("--threads", type=int, default=_threads_default())

    ev = sub.add_parser("eval", help="score upscaled images against ground truth")
    ev.add_argument("--luts", required=True)
    ev.add_argument("--lr-dir", required=True)
    ev.add_argument("--hr-dir", required=True)
    ev.add_argument("--mode", default="y", choices=metrics.MODES)
    ev.add_argument("--crop", type=int, default=4)
    ev.add_argument("--report", help="prefix for <prefix>.csv records and <prefix>.png figure")

    bench = sub.add_parser("bench", help="time the engine on a synthetic image")
    bench.add_argument("--luts", required=True)
    bench.add_argument("--size", default="320x180", help="LR size as WxH")
    bench.add_argument("--iters", type=int, default=7)
    bench.add_argument("--threads", type=int, default=1)
    bench.add_argument("--report", help="prefix for <prefix>.csv records and <prefix>.png figure")

    ver = sub.add_parser("verify", help="check tables against their weight file bit for bit")
    ver.add_argument("--weights", required=True)
    ver.add_argument("--luts", required=True)
    ver.add_argument("--images", type=int, default=20)
    ver.add_argument("--seed", type=int, default=3)

    return p


def cmd_init_random(args) -> int:
    topo = model.builtin_topology(args.variant, args.vf)
    weights = mapping.random_weights(topo, args.seed)
    formats.save_weights(args.out, weights)
    print(f"wrote {args.out}: variant {topo.name} v_f {topo.v_f} seed {args.seed}")
    return 0


def cmd_build_luts(args) -> int:
    weights = formats.load_weights(args.weights)
    container = mapping.transfer_container(weights)
    formats.save_container(args.out, container)
    topo = container.topology
    print(f"wrote {args.out}: variant {topo.name} v_f {topo.v_f}")
    print(f"payload {model.payload_size(topo)} bytes of table entries")
    for branch, stage, slot, t in container.iter_tables():
        tag = "MSB" if branch == model.MSB else "LSB"
        print(
            f"  {tag} stage {stage} slot {slot}: {t.kind} bins {t.bins} "
            f"out {t.out_ch} scale 2^{t.scale_exp} ({t.nbytes()} bytes)"
        )
    return 0


def cmd_sr(args) -> int:
    container = formats.load_container(args.luts)
    lr = image.read_png(args.input)
    sr = engine.super_resolve(lr, container, threads=args.threads)
    image.write_png(args.output, sr)
    print(
        f"{args.input} {lr.shape[1]}x{lr.shape[0]} -> "
        f"{args.output} {sr.shape[1]}x{sr.shape[0]}"
    )
    return 0


def cmd_eval(args) -> int:
    container = formats.load_container(args.luts)
    rep = metrics.evaluate_dataset(
        args.lr_dir, args.hr_dir, container, mode=args.mode, crop=args.crop
    )
    print(report.format_eval_table(rep))
    if args.report:
        prefix = Path(args.report)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        report.write_eval_records(rep, prefix.with_suffix(".csv"))
        report.save_eval_figure(rep, prefix.with_suffix(".png"))
        print(f"records {prefix.with_suffix('.csv')}  figure {prefix.with_suffix('.png')}")
    return 0


def cmd_bench(args) -> int:
    container = formats.load_container(args.luts)
    try:
        w, h = (int(v) for v in args.size.lower().split("x"))
    except ValueError:
        raise ValueError(f"--size must look like 320x180, got {args.size!r}")
    t = metrics.bench_engine(container, w, h, args.iters, threads=args.threads)
    print(report.format_bench_table(t))
    if args.report:
        prefix = Path(args.report)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        report.write_bench_records(t, prefix.with_suffix(".csv"))
        report.save_bench_figure(t, prefix.with_suffix(".png"))
        print(f"records {prefix.with_suffix('.csv')}  figure {prefix.with_suffix('.png')}")
    return 0


def cmd_verify(args) -> int:
    weights = formats.load_weights(args.weights)
    container = formats.load_container(args.luts)
    ok, detail = mapping.verify_equivalence(weights, container, args.images, args.seed)
    if not ok:
        raise VerifyMismatch(detail)
    print(f"PASS: {detail}")
    return 0


_COMMANDS = {
    "init-random": cmd_init_random,
    "build-luts": cmd_build_luts,
    "sr": cmd_sr,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except formats.FormatError as e:
        _fail(e)
        return EXIT_FORMAT
    except VerifyMismatch as e:
        _fail(e)
        return EXIT_VERIFY
    except OSError as e:
        _fail(e)
        return EXIT_IO
    except (ValueError, AssertionError) as e:
        _fail(e)
        return EXIT_USAGE


def _fail(e: Exception) -> None:
    msg = " ".join(str(e).split())
    print(f"ERROR {type(e).__name__}: {msg}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
