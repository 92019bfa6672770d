"""Float mapping modules, table transfer, and the quantized reference path.

Each table in the integer model is distilled from a small float network
("mapping module"): a head layer over the 4 pattern codes, two hidden
layers of width 64 with gelu activations, and a linear output layer.
Transfer enumerates every pattern, evaluates the module, and quantizes the
outputs onto the table's int8 grid.

``reference_pipeline`` is a second, independently written implementation of
the branch dataflow that sources every lookup from those quantized module
outputs. It is float-based (all values are exact dyadic rationals, so float64
arithmetic is exact) and exists to cross-check the integer engine bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import model as _model
from .image import check_rgb8, round_half_away_float, split_bitplanes
from .model import (
    LSB,
    MSB,
    LutContainer,
    LutTable,
    ModelTopology,
    QueryBlock,
    stage_bins,
    stage_scale_exp,
)
from .rng import SplitMix64

HIDDEN = 64

# Head geometry (kh, kw, in_ch) per table kind. The flat pattern order is
# channel-major then position-minor, which equals a C-order flatten of
# (in_ch, kh, kw) kernels.
KIND_GEOMETRY = {
    _model.KIND_WH: (2, 2, 1),
    _model.KIND_WC: (1, 2, 2),
    _model.KIND_HC: (2, 1, 2),
}
_GEOMETRY_KIND = {v: k for k, v in KIND_GEOMETRY.items()}

_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x):
    """tanh-form gelu: 0.5 * x * (1 + tanh(sqrt(2/pi) * (x + 0.044715 x^3)))."""
    x = np.asarray(x, dtype=np.float64)
    out = 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + 0.044715 * (x * x * x))))
    return float(out) if out.ndim == 0 else out


@dataclass(eq=False)
class MappingModule:
    """Four dense layers; the head consumes the 4 pattern codes."""

    kh: int
    kw: int
    in_ch: int
    out_ch: int
    layers: tuple  # ((w, b) x 4), float32, w shapes (64,4),(64,64),(64,64),(out,64)

    @property
    def kind(self) -> str:
        return _GEOMETRY_KIND[(self.kh, self.kw, self.in_ch)]


@dataclass(eq=False)
class WeightSet:
    topology: ModelTopology
    modules: dict[tuple[int, int, int], MappingModule]


def module_specs(topo: ModelTopology) -> Iterator[tuple[int, int, int, str, int]]:
    """Canonical (branch, stage, slot, kind, out_ch) order, matching tables."""
    for branch, stage, slot, kind, _, out_ch, _ in _model.table_specs(topo):
        yield branch, stage, slot, kind, out_ch


def mapping_forward(module: MappingModule, patterns) -> np.ndarray:
    """Evaluate the module on (..., 4) pattern code arrays in float64."""
    x = np.asarray(patterns, dtype=np.float64)
    if x.shape[-1] != 4:
        raise ValueError("patterns must have 4 codes in the last axis")
    (w0, b0), (w1, b1), (w2, b2), (w3, b3) = module.layers
    h = gelu(x @ w0.T.astype(np.float64) + b0)
    h = gelu(h @ w1.T.astype(np.float64) + b1)
    h = gelu(h @ w2.T.astype(np.float64) + b2)
    return h @ w3.T.astype(np.float64) + b3


def all_patterns(bins: int) -> np.ndarray:
    """All bins**4 patterns as an (N, 4) int array in flat-index order."""
    idx = np.arange(bins**4)
    v3 = idx % bins
    idx //= bins
    v2 = idx % bins
    idx //= bins
    v1 = idx % bins
    v0 = idx // bins
    return np.stack([v0, v1, v2, v3], axis=-1)


def quantize_entries(values: np.ndarray, scale_exp: int) -> np.ndarray:
    """Snap float values onto the int8 grid with step 2**scale_exp."""
    raw = round_half_away_float(values * 2.0**-scale_exp)
    return np.clip(raw, -128, 127).astype(np.int8)


def transfer_to_lut(module: MappingModule, bins: int, scale_exp: int) -> LutTable:
    """Enumerate every pattern and quantize the module outputs into a table."""
    n = bins**4
    raw = np.empty((n, module.out_ch), dtype=np.int8)
    pats = all_patterns(bins)
    step = 1 << 16
    for lo in range(0, n, step):
        out = mapping_forward(module, pats[lo : lo + step])
        raw[lo : lo + step] = quantize_entries(out, scale_exp)
    return LutTable(module.kind, bins, module.out_ch, scale_exp, raw)


def transfer_container(weights: WeightSet) -> LutContainer:
    """Build the full integer container for a weight set."""
    topo = weights.topology
    _model.validate_topology(topo)
    tables = {}
    for branch, stage, slot, kind, out_ch in module_specs(topo):
        module = weights.modules[(branch, stage, slot)]
        if module.kind != kind or module.out_ch != out_ch:
            raise ValueError(f"module {(branch, stage, slot)} does not match topology")
        tables[(branch, stage, slot)] = transfer_to_lut(
            module, stage_bins(topo, stage), stage_scale_exp(topo, stage)
        )
    return LutContainer(topo, tables)


# random_weights aims the output RMS at this many quantization steps: wide
# enough to spread entries over the int8 grid, low enough to clamp rarely.
_INIT_TARGET_STEPS = 24.0


def random_weights(topo: ModelTopology, seed: int) -> WeightSet:
    """Reproducible random weight set whose transferred tables come out dense.

    Head weights shrink with the stage's code magnitude and hidden layers use
    fan-in scaling, keeping activations at unit order; the output layer is
    then rescaled against a probe batch of random patterns so module outputs
    land at table-entry scale instead of washing out to zero when quantized.
    Draw order is fixed (canonical module order, weights row-major then bias
    per layer, probe batch last), so a (topology, seed) pair pins every byte
    of the result.
    """
    _model.validate_topology(topo)
    stream = SplitMix64(seed)
    modules = {}
    for branch, stage, slot, kind, out_ch in module_specs(topo):
        kh, kw, in_ch = KIND_GEOMETRY[kind]
        bins = stage_bins(topo, stage)
        code_ms = (bins - 1) * (2 * bins - 1) / 6.0  # mean square of a code
        head_a = math.sqrt(6.0 / (4 * code_ms))
        hidden_a = math.sqrt(6.0 / HIDDEN)
        shapes = [
            (HIDDEN, kh * kw * in_ch, head_a),
            (HIDDEN, HIDDEN, hidden_a),
            (HIDDEN, HIDDEN, hidden_a),
            (out_ch, HIDDEN, hidden_a),
        ]
        layers = []
        for rows, cols, a in shapes:
            w = (stream.fill_floats(rows * cols) - 0.5) * (2.0 * a)
            b = (stream.fill_floats(rows) - 0.5) * a
            layers.append(
                (w.astype(np.float32).reshape(rows, cols), b.astype(np.float32))
            )
        module = MappingModule(kh, kw, in_ch, out_ch, tuple(layers))
        probe = (stream.fill_floats(4096 * 4).reshape(4096, 4) * bins).astype(np.int64)
        rms = float(np.sqrt(np.mean(mapping_forward(module, probe) ** 2)))
        if rms > 0.0:
            gain = _INIT_TARGET_STEPS * 2.0 ** stage_scale_exp(topo, stage) / rms
            w3, b3 = layers[3]
            layers[3] = (
                (w3 * gain).astype(np.float32),
                (b3 * gain).astype(np.float32),
            )
        modules[(branch, stage, slot)] = MappingModule(kh, kw, in_ch, out_ch, tuple(layers))
    return WeightSet(topo, modules)


# --- reference dataflow -----------------------------------------------------
#
# Everything below deliberately avoids the integer engine's helpers: padding
# uses np.pad reflection, lookups index 4-D shaped tables with code tuples,
# and values stay in float64 units.


def _ref_value_tables(weights: WeightSet, quantize: bool):
    topo = weights.topology
    tables = {}
    for branch, stage, slot, kind, out_ch in module_specs(topo):
        bins = stage_bins(topo, stage)
        exp = stage_scale_exp(topo, stage)
        vals = mapping_forward(weights.modules[(branch, stage, slot)], all_patterns(bins))
        if quantize:
            vals = quantize_entries(vals, exp).astype(np.float64) * 2.0**exp
        tables[(branch, stage, slot)] = vals.reshape((bins,) * 4 + (out_ch,))
    return tables


def _ref_spatial(codes: np.ndarray, table5d: np.ndarray) -> np.ndarray:
    padded = np.pad(codes, ((0, 1), (0, 1)), mode="reflect")
    p00 = padded[:-1, :-1]
    p01 = padded[:-1, 1:]
    p10 = padded[1:, :-1]
    p11 = padded[1:, 1:]
    return table5d[p00, p01, p10, p11]


def _ref_aggregate(ga: np.ndarray, gb: np.ndarray, direction: str, bins: int) -> np.ndarray:
    if direction == _model.DIR_W:
        shifted = np.pad(ga, ((0, 0), (1, 0), (0, 0)), mode="reflect")[:, :-1, :]
    else:
        shifted = np.pad(ga, ((1, 0), (0, 0), (0, 0)), mode="reflect")[:-1, :, :]
    merged = shifted + gb
    return np.clip(round_half_away_float(merged), 0, bins - 1).astype(np.int64)


def _ref_query(feat: np.ndarray, block: QueryBlock, table_for_slot, bins: int) -> np.ndarray:
    agg_codes = []
    for agg in block.aggregations:
        a, b = agg.groups
        agg_codes.append(
            _ref_aggregate(
                feat[:, :, 2 * a : 2 * a + 2], feat[:, :, 2 * b : 2 * b + 2], agg.direction, bins
            )
        )
    out = None
    for slot, lut in enumerate(block.luts):
        m = agg_codes[lut.source]
        if lut.kind == _model.KIND_WC:
            nxt = np.pad(m, ((0, 0), (0, 1), (0, 0)), mode="reflect")[:, 1:, :]
        else:
            nxt = np.pad(m, ((0, 1), (0, 0), (0, 0)), mode="reflect")[1:, :, :]
        vals = table_for_slot(slot)[m[:, :, 0], nxt[:, :, 0], m[:, :, 1], nxt[:, :, 1]]
        out = vals if out is None else out + vals
    return out


def _ref_branch(codes: np.ndarray, branch: int, topo: ModelTopology, tables, skip_unit: int):
    sc1, sc2, sc3 = topo.skips
    feat = _ref_spatial(codes, tables[(branch, 0, 0)])
    if sc1:
        feat = feat + codes[:, :, None]
    last = len(topo.blocks) - 1
    for stage in range(1, last):
        block = topo.blocks[stage]
        out = _ref_query(feat, block, lambda s: tables[(branch, stage, s)], topo.v_f)
        feat = out + feat if sc2 else out
    final = _ref_query(
        feat, topo.blocks[last], lambda s: tables[(branch, last, s)], topo.v_f
    )
    if sc3:
        final = final + (codes * skip_unit)[:, :, None].astype(np.float64)
    s = topo.scale
    h, w = codes.shape
    return final.reshape(h, w, s, s).transpose(0, 2, 1, 3).reshape(h * s, w * s)


def reference_pipeline(
    image: np.ndarray, weights: WeightSet, quantize: bool = True, tables=None
) -> np.ndarray:
    """Run the branch dataflow from float modules; the engine's ground truth.

    With ``quantize=False`` the int8 snapping of module outputs is skipped,
    which must break bit-equality with the engine; tests rely on that to show
    the oracle is genuinely quantized. Enumerating the value tables dominates
    the cost, so multi-image callers may precompute them once with
    ``_ref_value_tables`` and pass them in.
    """
    image = np.asarray(image)
    check_rgb8(image, min_size=2)
    topo = weights.topology
    if tables is None:
        tables = _ref_value_tables(weights, quantize)
    h, w = image.shape[:2]
    msb, lsb = split_bitplanes(image)
    out = np.zeros((h * topo.scale, w * topo.scale, 3), dtype=np.float64)
    for ch in range(3):
        for branch, planes, unit in ((MSB, msb, 16), (LSB, lsb, 1)):
            codes = planes[:, :, ch].astype(np.int64)
            out[:, :, ch] += _ref_branch(codes, branch, topo, tables, unit)
    return np.clip(round_half_away_float(out), 0, 255).astype(np.uint8)


def verify_equivalence(weights: WeightSet, container: LutContainer, images: int, seed: int):
    """Compare engine output against the reference on random images.

    Returns (ok, detail). On the first mismatch, detail carries the image
    index and the first differing pixel.
    """
    from .engine import super_resolve

    if weights.topology != container.topology:
        raise ValueError("weight and container topologies differ")
    if images < 1:
        raise ValueError("need at least one image")
    tables = _ref_value_tables(weights, quantize=True)
    stream = SplitMix64(seed)
    for i in range(images):
        w = 2 + stream.next_below(31)
        h = 2 + stream.next_below(31)
        img = stream.fill_bytes(h * w * 3).reshape(h, w, 3)
        got = super_resolve(img, container)
        want = reference_pipeline(img, weights, tables=tables)
        if not np.array_equal(got, want):
            ys, xs, cs = np.nonzero(got != want)
            detail = (
                f"image {i} ({w}x{h}): first mismatch at x={xs[0]} y={ys[0]} "
                f"ch={cs[0]}: engine {got[ys[0], xs[0], cs[0]]} "
                f"reference {want[ys[0], xs[0], cs[0]]}"
            )
            return False, detail
    return True, f"{images} images bit-exact"
