"""Quality metrics and timing for the upscaler.

PSNR and SSIM follow the usual super-resolution evaluation protocol:
optional border crop first, luma comparison on the BT.601 Y channel (or raw
RGB), SSIM with an 11x11 Gaussian window (sigma 1.5) over valid positions
only. Identical inputs give infinite PSNR; it is reported as ``inf``, never
capped.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .engine import prepare, super_resolve
from .image import read_png
from .model import LutContainer
from .rng import SplitMix64

MODES = ("y", "rgb")

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DYNAMIC_RANGE = 255.0


def to_luma(img: np.ndarray) -> np.ndarray:
    """BT.601 luma in float64; full-range RGB maps onto the [16, 235] band."""
    img = np.asarray(img, dtype=np.float64)
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    return 16.0 + (65.738 * r + 129.057 * g + 25.064 * b) / 256.0


def _crop_pair(a: np.ndarray, b: np.ndarray, crop: int):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim not in (2, 3):
        raise ValueError("expected (H, W) or (H, W, C) arrays")
    if crop < 0:
        raise ValueError("crop must be >= 0")
    h, w = a.shape[:2]
    if 2 * crop >= h or 2 * crop >= w:
        raise ValueError(f"crop {crop} leaves no pixels of {w}x{h}")
    if crop:
        a = a[crop:-crop, crop:-crop]
        b = b[crop:-crop, crop:-crop]
    return a, b


def _planes(img: np.ndarray, mode: str) -> np.ndarray:
    if mode == "y":
        return to_luma(img)
    if mode == "rgb":
        return np.asarray(img, dtype=np.float64)
    raise ValueError(f"mode must be one of {MODES}")


def psnr(a: np.ndarray, b: np.ndarray, mode: str = "y", crop: int = 0) -> float:
    """Peak signal-to-noise ratio in dB over the cropped comparison region."""
    a, b = _crop_pair(a, b, crop)
    pa, pb = _planes(a, mode), _planes(b, mode)
    mse = float(np.mean((pa - pb) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(DYNAMIC_RANGE**2 / mse)


def _gaussian_1d(n: int, sigma: float) -> np.ndarray:
    x = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    return g / g.sum()


def _sep_filter_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    t = sliding_window_view(x, len(g), axis=0) @ g
    return sliding_window_view(t, len(g), axis=1) @ g


def _ssim_plane(x: np.ndarray, y: np.ndarray) -> float:
    h, w = x.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ValueError(f"need at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels after crop")
    g = _gaussian_1d(SSIM_WINDOW, SSIM_SIGMA)
    mu_x = _sep_filter_valid(x, g)
    mu_y = _sep_filter_valid(y, g)
    xx = _sep_filter_valid(x * x, g) - mu_x * mu_x
    yy = _sep_filter_valid(y * y, g) - mu_y * mu_y
    xy = _sep_filter_valid(x * y, g) - mu_x * mu_y
    c1 = (SSIM_K1 * DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * DYNAMIC_RANGE) ** 2
    s = ((2 * mu_x * mu_y + c1) * (2 * xy + c2)) / (
        (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
    )
    return float(s.mean())


def ssim(a: np.ndarray, b: np.ndarray, mode: str = "y", crop: int = 0) -> float:
    """Mean structural similarity over valid 11x11 window positions."""
    a, b = _crop_pair(a, b, crop)
    pa, pb = _planes(a, mode), _planes(b, mode)
    if mode == "y":
        return _ssim_plane(pa, pb)
    return float(np.mean([_ssim_plane(pa[..., c], pb[..., c]) for c in range(3)]))


@dataclass
class ImageResult:
    name: str
    psnr: float
    ssim: float


@dataclass
class EvalReport:
    dataset: str
    variant: str
    mode: str
    crop: int
    images: list[ImageResult] = field(default_factory=list)
    errors: list[tuple[str, str]] = field(default_factory=list)

    @property
    def mean_psnr(self) -> float:
        return float(np.mean([r.psnr for r in self.images])) if self.images else math.nan

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([r.ssim for r in self.images])) if self.images else math.nan


def evaluate_dataset(
    lr_dir,
    hr_dir,
    container: LutContainer,
    mode: str = "y",
    crop: int = 4,
) -> EvalReport:
    """Upscale every LR PNG and score it against the same-named HR PNG.

    Unmatched names and dimension mismatches become per-file errors in the
    report instead of aborting the run; empty inputs are an error.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    lr_dir, hr_dir = Path(lr_dir), Path(hr_dir)
    lr_files = {p.name: p for p in sorted(lr_dir.glob("*.png"))}
    hr_files = {p.name: p for p in sorted(hr_dir.glob("*.png"))}
    if not lr_files:
        raise ValueError(f"no PNG files in {lr_dir}")
    if not hr_files:
        raise ValueError(f"no PNG files in {hr_dir}")
    report = EvalReport(dataset=lr_dir.name, variant=container.topology.name, mode=mode, crop=crop)
    plan = prepare(container)
    scale = container.topology.scale
    for name in sorted(set(lr_files) | set(hr_files)):
        if name not in lr_files:
            report.errors.append((name, "missing LR image"))
            continue
        if name not in hr_files:
            report.errors.append((name, "missing HR image"))
            continue
        lr = read_png(lr_files[name])
        hr = read_png(hr_files[name])
        want = (lr.shape[0] * scale, lr.shape[1] * scale, 3)
        if hr.shape != want:
            report.errors.append(
                (name, f"HR is {hr.shape[1]}x{hr.shape[0]}, expected {want[1]}x{want[0]}")
            )
            continue
        try:
            sr = super_resolve(lr, container, plan=plan)
            report.images.append(
                ImageResult(name, psnr(sr, hr, mode, crop), ssim(sr, hr, mode, crop))
            )
        except ValueError as e:
            report.errors.append((name, str(e)))
    return report


@dataclass
class TimingSummary:
    width: int
    height: int
    iters: int
    threads: int
    samples_ms: list[float]

    @property
    def median_ms(self) -> float:
        return float(np.median(self.samples_ms))

    @property
    def min_ms(self) -> float:
        return float(np.min(self.samples_ms))


def bench_engine(
    container: LutContainer, width: int, height: int, iters: int, threads: int = 1
) -> TimingSummary:
    """Time super-resolution of a fixed pseudo-random image.

    Table widening and input synthesis happen before the clock starts; one
    warmup run is excluded from the samples.
    """
    if iters < 3:
        raise ValueError("need at least 3 iterations for a stable median")
    if width < 2 or height < 2:
        raise ValueError("benchmark image must be at least 2x2")
    img = SplitMix64(0xB5EED).fill_bytes(height * width * 3).reshape(height, width, 3)
    plan = prepare(container)
    super_resolve(img, container, threads=threads, plan=plan)
    samples = []
    for _ in range(iters):
        t0 = time.perf_counter()
        super_resolve(img, container, threads=threads, plan=plan)
        samples.append((time.perf_counter() - t0) * 1e3)
    return TimingSummary(width, height, iters, threads, samples)
