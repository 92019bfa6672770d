"""8-bit image and integer feature-map primitives.

Conventions used across the package:

* RGB images are ``(H, W, 3)`` uint8 arrays, loaded from / saved to PNG.
* 4-bit code planes are ``(H, W)`` (or channel-batched ``(..., H, W)``)
  integer arrays with values in ``[0, 16)``.
* Feature maps are channels-last ``(..., H, W, C)`` int32 arrays whose
  values are in sixteenths, i.e. the stored integer is 16x the represented
  value. ``round_half_away`` converts sixteenths back to whole units.
* Out-of-range neighbor access reflects without repeating the border
  sample: index -1 maps to 1 and index ``length`` maps to ``length - 2``.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from PIL import Image


class Bitplanes(NamedTuple):
    """Most/least significant 4-bit planes of an 8-bit image."""

    msb: np.ndarray
    lsb: np.ndarray


def read_png(path) -> np.ndarray:
    """Load a PNG as (H, W, 3) uint8; alpha is dropped, grayscale replicated."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def write_png(path, img: np.ndarray) -> None:
    img = np.asarray(img)
    check_rgb8(img)
    Image.fromarray(img, "RGB").save(path)


def check_rgb8(img: np.ndarray, min_size: int = 1) -> None:
    """Reject arrays that are not (H, W, 3) uint8 of at least min_size^2 pixels."""
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError(
            f"expected an (H, W, 3) uint8 image, got shape {img.shape} dtype {img.dtype}"
        )
    if img.shape[0] < min_size or img.shape[1] < min_size:
        raise ValueError(
            f"image must be at least {min_size}x{min_size}, got {img.shape[1]}x{img.shape[0]}"
        )


def split_bitplanes(img: np.ndarray) -> Bitplanes:
    """Split 8-bit samples into 4-bit code pairs: msb = p >> 4, lsb = p & 15."""
    img = np.asarray(img, dtype=np.uint8)
    return Bitplanes(msb=img >> 4, lsb=img & 15)


def reflect_index(i: int, length: int) -> int:
    """Reflect a one-step out-of-range index without repeating the border.

    Only single-step overreach is meaningful here (neighbor access during
    pattern extraction), so indices below -1 or above ``length`` are rejected.
    """
    if length < 2:
        raise ValueError("reflection needs length >= 2")
    if i < -1 or i > length:
        raise ValueError(f"index {i} is more than one step outside [0, {length})")
    if i < 0:
        return -i
    if i >= length:
        return 2 * length - 2 - i
    return i


def round_half_away(v):
    """Sixteenths -> units with ties rounded away from zero (24 -> 2, -24 -> -2)."""
    v = np.asarray(v)
    r = (np.abs(v) + 8) >> 4
    out = np.where(v < 0, -r, r)
    return int(out) if out.ndim == 0 else out


def round_half_away_float(x):
    """Float rounding with ties away from zero (0.5 -> 1.0, -0.5 -> -1.0)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.copysign(np.floor(np.abs(x) + 0.5), x)
    return float(out) if out.ndim == 0 else out


def quantize_to_bins(v, bins: int):
    """Round sixteenths to unit codes and clamp into [0, bins)."""
    if bins < 2:
        raise ValueError("need at least 2 bins")
    r = np.clip(round_half_away(v), 0, bins - 1)
    return int(r) if np.ndim(r) == 0 else r


def pixel_shuffle(feat: np.ndarray) -> np.ndarray:
    """Rearrange (..., H, W, s*s) into (..., H*s, W*s).

    Channel dy*s + dx of the input lands at spatial offset (dy, dx) inside
    each s x s output cell, so out[y*s+dy, x*s+dx] = feat[y, x, dy*s+dx].
    """
    feat = np.asarray(feat)
    if feat.ndim < 3:
        raise ValueError("pixel_shuffle expects a (..., H, W, C) array")
    c = feat.shape[-1]
    s = math.isqrt(c)
    if s * s != c:
        raise ValueError(f"channel count {c} is not a perfect square")
    *lead, h, w, _ = feat.shape
    out = feat.reshape(*lead, h, w, s, s)
    out = np.moveaxis(out, -2, -3)  # (..., h, s, w, s)
    return out.reshape(*lead, h * s, w * s)


# Bicubic kernel parameter; the common convolutional interpolation choice.
_BICUBIC_A = -0.5


def _bicubic_kernel(x: np.ndarray) -> np.ndarray:
    a = _BICUBIC_A
    x = np.abs(x)
    near = (a + 2.0) * x**3 - (a + 3.0) * x**2 + 1.0
    far = a * x**3 - 5.0 * a * x**2 + 8.0 * a * x - 4.0 * a
    return np.where(x < 1.0, near, np.where(x < 2.0, far, 0.0))


def _axis_taps(n_out: int, factor: int, n_in: int):
    # Half-pixel centers: output j samples input coordinate (j + 0.5)*f - 0.5.
    u = (np.arange(n_out) + 0.5) * factor - 0.5
    k0 = np.floor(u).astype(np.int64) - 1
    idx = k0[:, None] + np.arange(4)[None, :]
    w = _bicubic_kernel(u[:, None] - idx)
    idx = np.clip(idx, 0, n_in - 1)  # replicate at borders
    return idx, w


def downscale_bicubic(hr: np.ndarray, factor: int) -> np.ndarray:
    """Separable bicubic (a = -0.5) downscale by an integer factor.

    Height and width must be divisible by the factor. The result is clamped
    to [0, 255] and rounded with ties away from zero.
    """
    hr = np.asarray(hr)
    check_rgb8(hr)
    if factor < 1:
        raise ValueError("factor must be >= 1")
    h, w = hr.shape[:2]
    if h % factor or w % factor:
        raise ValueError(f"dimensions {w}x{h} not divisible by factor {factor}")
    if factor == 1:
        return hr.copy()
    acc = hr.astype(np.float64)
    ridx, rw = _axis_taps(h // factor, factor, h)
    acc = np.einsum("ot,othc->ohc", rw, acc[ridx])
    cidx, cw = _axis_taps(w // factor, factor, w)
    acc = np.einsum("ot,hotc->hoc", cw, acc[:, cidx])
    return np.clip(round_half_away_float(acc), 0, 255).astype(np.uint8)
