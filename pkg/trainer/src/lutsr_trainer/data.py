"""Training data: HR PNG directories, bicubic LR synthesis, crop sampling.

Low-resolution inputs are synthesized with the same convention the engine's
evaluation path uses: separable bicubic with a = -0.5 at half-pixel centers,
borders replicated, result rounded half away from zero. Batches are a pure
function of (seed, iteration), so sampling is reproducible no matter how
many loader threads assemble them.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

_BICUBIC_A = -0.5


def _kernel(x: np.ndarray) -> np.ndarray:
    a = _BICUBIC_A
    x = np.abs(x)
    near = (a + 2.0) * x**3 - (a + 3.0) * x**2 + 1.0
    far = a * x**3 - 5.0 * a * x**2 + 8.0 * a * x - 4.0 * a
    return np.where(x < 1.0, near, np.where(x < 2.0, far, 0.0))


def _taps(n_out: int, factor: int, n_in: int):
    # Output j samples input coordinate (j + 0.5) * factor - 0.5.
    u = (np.arange(n_out) + 0.5) * factor - 0.5
    k0 = np.floor(u).astype(np.int64) - 1
    idx = k0[:, None] + np.arange(4)[None, :]
    w = _kernel(u[:, None] - idx)
    return np.clip(idx, 0, n_in - 1), w


def downscale(hr: np.ndarray, factor: int) -> np.ndarray:
    """Bicubic downscale by an integer factor; dimensions must divide."""
    h, w = hr.shape[:2]
    if h % factor or w % factor:
        raise ValueError(f"dimensions {w}x{h} not divisible by factor {factor}")
    acc = hr.astype(np.float64)
    ridx, rw = _taps(h // factor, factor, h)
    acc = np.einsum("ot,othc->ohc", rw, acc[ridx])
    cidx, cw = _taps(w // factor, factor, w)
    acc = np.einsum("ot,hotc->hoc", cw, acc[:, cidx])
    rounded = np.copysign(np.floor(np.abs(acc) + 0.5), acc)
    return np.clip(rounded, 0, 255).astype(np.uint8)


def load_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


class CropDataset:
    """HR images plus their synthesized LR counterparts, ready to crop.

    HR images are trimmed to dimensions divisible by the scale. Every image
    must fit at least one LR crop; smaller files are a configuration error,
    reported with the offending file name.
    """

    def __init__(self, hr_dir, crop: int, scale: int = 4):
        paths = sorted(Path(hr_dir).glob("*.png"))
        if not paths:
            raise ValueError(f"no PNG images found in {hr_dir}")
        if crop < 2:
            raise ValueError("crop must be at least 2")
        self.crop = crop
        self.scale = scale
        self.pairs = []
        for p in paths:
            hr = load_png(p)
            h, w = hr.shape[:2]
            th, tw = h - h % scale, w - w % scale
            if th < crop * scale or tw < crop * scale:
                raise ValueError(
                    f"{p.name}: {w}x{h} is smaller than the "
                    f"{crop * scale}x{crop * scale} HR crop"
                )
            hr = hr[:th, :tw]
            self.pairs.append((downscale(hr, scale), hr))

    def __len__(self) -> int:
        return len(self.pairs)

    def batch(self, seed: int, iteration: int, batch_size: int,
              rotate: bool, flip: bool):
        """Deterministic (lr, hr) uint8 batch for one training iteration."""
        rng = np.random.default_rng([seed, iteration])
        c, s = self.crop, self.scale
        lrs, hrs = [], []
        for _ in range(batch_size):
            lr, hr = self.pairs[rng.integers(len(self.pairs))]
            lh, lw = lr.shape[:2]
            y = int(rng.integers(lh - c + 1))
            x = int(rng.integers(lw - c + 1))
            lc = lr[y : y + c, x : x + c]
            hc = hr[s * y : s * (y + c), s * x : s * (x + c)]
            k = int(rng.integers(4)) if rotate else 0
            f = bool(rng.integers(2)) if flip else False
            if k:
                lc, hc = np.rot90(lc, k), np.rot90(hc, k)
            if f:
                lc, hc = lc[:, ::-1], hc[:, ::-1]
            lrs.append(np.ascontiguousarray(lc))
            hrs.append(np.ascontiguousarray(hc))
        return np.stack(lrs), np.stack(hrs)
