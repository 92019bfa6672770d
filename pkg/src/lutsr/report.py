"""Report rendering: aligned text tables, CSV records, and figures.

The eval and bench commands write line-delimited CSV records next to a
rendered PNG chart so results can be consumed by scripts and skimmed by
humans from the same prefix.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import EvalReport, TimingSummary


def _fmt(x: float) -> str:
    return "inf" if x == float("inf") else f"{x:.4f}"


def format_eval_table(report: EvalReport) -> str:
    """Human-readable evaluation summary."""
    lines = [
        f"dataset {report.dataset}  variant {report.variant}  "
        f"mode {report.mode}  crop {report.crop}",
        f"{'image':<32} {'psnr':>10} {'ssim':>8}",
    ]
    for r in report.images:
        lines.append(f"{r.name:<32} {_fmt(r.psnr):>10} {r.ssim:>8.4f}")
    if report.images:
        lines.append(
            f"{'mean (' + str(len(report.images)) + ' images)':<32} "
            f"{_fmt(report.mean_psnr):>10} {report.mean_ssim:>8.4f}"
        )
    for name, msg in report.errors:
        lines.append(f"error: {name}: {msg}")
    return "\n".join(lines)


def write_eval_records(report: EvalReport, path) -> None:
    """One CSV record per image: name,psnr,ssim (psnr may be the literal inf)."""
    with open(path, "w") as f:
        f.write("name,psnr,ssim\n")
        for r in report.images:
            f.write(f"{r.name},{_fmt(r.psnr)},{r.ssim:.6f}\n")


def save_eval_figure(report: EvalReport, path) -> None:
    """Per-image PSNR bars with the SSIM trace on a twin axis."""
    names = [r.name for r in report.images]
    psnrs = [min(r.psnr, 99.0) for r in report.images]
    ssims = [r.ssim for r in report.images]
    fig, ax = plt.subplots(figsize=(max(6.0, 0.5 * len(names) + 2), 4.0))
    xs = range(len(names))
    ax.bar(xs, psnrs, color="#4878cf", label="PSNR (dB)")
    ax.set_ylabel("PSNR (dB)")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(names, rotation=60, ha="right", fontsize=7)
    ax.set_title(f"{report.dataset}: variant {report.variant}, {report.mode}, crop {report.crop}")
    ax2 = ax.twinx()
    ax2.plot(list(xs), ssims, "o-", color="#d65f5f", label="SSIM")
    ax2.set_ylabel("SSIM")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def format_bench_table(t: TimingSummary) -> str:
    lines = [
        f"{t.width}x{t.height} -> {t.width * 4}x{t.height * 4}, "
        f"{t.iters} iterations, {t.threads} thread(s)",
        f"median {t.median_ms:.2f} ms   min {t.min_ms:.2f} ms",
    ]
    return "\n".join(lines)


def write_bench_records(t: TimingSummary, path) -> None:
    """One CSV record per timed iteration: iter,ms."""
    with open(path, "w") as f:
        f.write("iter,ms\n")
        for i, ms in enumerate(t.samples_ms):
            f.write(f"{i},{ms:.4f}\n")


def save_bench_figure(t: TimingSummary, path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 3.5))
    ax.plot(range(len(t.samples_ms)), t.samples_ms, "o-", color="#4878cf")
    ax.axhline(t.median_ms, color="#d65f5f", linestyle="--", label=f"median {t.median_ms:.1f} ms")
    ax.set_xlabel("iteration")
    ax.set_ylabel("ms")
    ax.set_title(f"{t.width}x{t.height} x4, {t.threads} thread(s)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
