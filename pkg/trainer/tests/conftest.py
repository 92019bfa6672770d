"""Shared fixtures: a synthetic PNG corpus and session-scoped training runs.

CPU training dominates the suite's runtime, so the two trained artifacts —
a 200-iteration run for the loss-trend and bridge checks, and a short
25-iteration run for float/engine parity — are produced once per session
and shared by every test that needs one.
"""

import shutil
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from lutsr_trainer import LutNet, TrainConfig, downscale, export, train

# Desk-scale recipe: batch 16 on 24-px LR crops keeps 200 iterations under
# two minutes on one core while leaving the loss trend unambiguous.
RECIPE = dict(
    variant="S",
    v_f=16,
    lr=1e-3,
    batch_size=16,
    crop=24,
    seed=7,
    loader_threads=2,
)


def make_image(seed: int, size: int = 192) -> np.ndarray:
    """Synthetic photo stand-in: textured everywhere, values in midtones.

    A mix of smooth sinusoids and tanh-sharpened stripes puts gradient signal
    in every crop, which keeps short training runs from stalling on flat
    patches.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / size
    base = np.zeros((size, size))
    for _ in range(4):
        fx, fy = rng.uniform(0.8, 5.0, 2)
        phase = rng.uniform(0, 2 * np.pi)
        base += rng.uniform(0.4, 1.0) * np.sin(2 * np.pi * (fx * xx + fy * yy) + phase)
    for _ in range(2):
        fx, fy = rng.uniform(1.5, 4.5, 2)
        sharp = rng.uniform(2.5, 4.0)
        phase = rng.uniform(0, 2 * np.pi)
        wave = np.sin(2 * np.pi * (fx * xx + fy * yy) + phase)
        base += rng.uniform(0.6, 1.0) * np.tanh(wave * sharp)
    base -= base.min()
    base /= base.max()
    img = np.zeros((size, size, 3))
    gains = rng.uniform(0.85, 1.0, 3)
    for ch in range(3):
        img[..., ch] = 48 + base * 160 * gains[ch]
    return np.clip(img + 0.5, 0, 255).astype(np.uint8)


@dataclass
class Corpus:
    hr_dir: Path
    holdout_hr: Path
    holdout_lr: Path


@pytest.fixture(scope="session")
def corpus(tmp_path_factory) -> Corpus:
    """Ten 192x192 training images plus one held-out image and its LR copy."""
    root = tmp_path_factory.mktemp("corpus")
    hr_dir = root / "hr"
    hr_dir.mkdir()
    for i in range(10):
        Image.fromarray(make_image(100 + i)).save(hr_dir / f"{i:02d}.png")
    holdout_hr = root / "holdout.png"
    holdout = make_image(110)
    Image.fromarray(holdout).save(holdout_hr)
    holdout_lr = root / "holdout_lr.png"
    Image.fromarray(downscale(holdout, 4)).save(holdout_lr)
    return Corpus(hr_dir, holdout_hr, holdout_lr)


@dataclass
class Run:
    cfg: TrainConfig
    net: LutNet
    losses: list
    weights: Path
    loss_log: Path
    seconds: float


def _run(corpus: Corpus, tmp_path_factory, tag: str, iterations: int) -> Run:
    out = tmp_path_factory.mktemp(tag)
    cfg = TrainConfig(hr_dir=str(corpus.hr_dir), iterations=iterations, **RECIPE)
    loss_log = out / "loss.csv"
    start = time.monotonic()
    result = train(cfg, loss_log=loss_log)
    seconds = time.monotonic() - start
    weights = out / "weights.spwt"
    export(result.net, weights)
    return Run(cfg, result.net, result.losses, weights, loss_log, seconds)


@pytest.fixture(scope="session")
def smoke_run(corpus, tmp_path_factory) -> Run:
    return _run(corpus, tmp_path_factory, "smoke", 200)


@pytest.fixture(scope="session")
def parity_run(corpus, tmp_path_factory) -> Run:
    # Lightly trained on purpose: longer training parks many aggregation sums
    # near rounding boundaries, where the engine's int8 table snapping flips
    # a code and reads an entirely different table row than the float pass.
    return _run(corpus, tmp_path_factory, "parity", 25)


@pytest.fixture(scope="session")
def lutsr_cli() -> str:
    path = shutil.which("lutsr")
    if path is None:
        pytest.fail("lutsr CLI not on PATH; the bridge tests require the engine")
    return path
