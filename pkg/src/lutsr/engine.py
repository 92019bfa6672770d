"""Retrieval-only super-resolution: the integer lookup-and-add dataflow.

Per 4-bit branch: a spatial block turns every 2x2 code pattern into C_f
feature channels, query blocks aggregate channel pairs into new code maps
and sum further table reads, and a pixel shuffle expands the final 16
channels into the x4 output. All features are int32 in sixteenths; the only
arithmetic on the hot path is gathers, adds, shifts and clamps.

Public single-plane ops (``spatial_block``, ``aggregate``, ``query_block``,
``run_branch``) validate their inputs; ``super_resolve`` runs the fused fast
path over all three channels at once.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import model as _model
from .image import check_rgb8, pixel_shuffle, round_half_away, split_bitplanes
from .model import (
    LSB,
    MSB,
    LutContainer,
    LutTable,
    ModelTopology,
    QueryBlock,
    stage_bins,
)

_FEATURE_LIMIT = 1 << 24  # |sixteenths| stay far below int32 range


@dataclass(eq=False)
class EnginePlan:
    """Container tables widened to int32 sixteenths for direct gathering."""

    topology: ModelTopology
    stage_tables: dict[tuple[int, int], list[np.ndarray]]
    bound: tuple[int, int, int, int]


def prepare(container: LutContainer) -> EnginePlan:
    _model.validate_container(container)
    topo = container.topology
    stage_tables: dict[tuple[int, int], list[np.ndarray]] = {}
    for branch, stage, slot, t in container.iter_tables():
        stage_tables.setdefault((branch, stage), []).append(_widen(t))
    return EnginePlan(topo, stage_tables, influence_bound(topo))


def _widen(t: LutTable) -> np.ndarray:
    shift = t.scale_exp + 4
    if shift < 0:
        raise ValueError(
            f"scale_exp {t.scale_exp} below -4 cannot be represented in sixteenths"
        )
    return t.entries.astype(np.int32) << shift


def _next_reflect(a: np.ndarray, axis: int) -> np.ndarray:
    """a shifted one step toward lower index (reads i+1, reflecting at the end)."""
    main = [slice(None)] * a.ndim
    edge = [slice(None)] * a.ndim
    main[axis] = slice(1, None)
    edge[axis] = slice(-2, -1)
    return np.concatenate([a[tuple(main)], a[tuple(edge)]], axis=axis)


def _prev_reflect(a: np.ndarray, axis: int) -> np.ndarray:
    """a shifted one step toward higher index (reads i-1, reflecting at the start)."""
    main = [slice(None)] * a.ndim
    edge = [slice(None)] * a.ndim
    main[axis] = slice(None, -1)
    edge[axis] = slice(1, 2)
    return np.concatenate([a[tuple(edge)], a[tuple(main)]], axis=axis)


def _check_codes(codes: np.ndarray, bins: int) -> np.ndarray:
    codes = np.asarray(codes)
    if codes.ndim < 2 or codes.shape[-1] < 2 or codes.shape[-2] < 2:
        raise ValueError("code planes must be at least 2x2")
    if np.any(codes < 0) or np.any(codes >= bins):
        raise ValueError(f"codes outside [0, {bins})")
    return codes.astype(np.int32)


def _spatial_index(codes: np.ndarray) -> np.ndarray:
    right = _next_reflect(codes, -1)
    down = _next_reflect(codes, -2)
    downright = _next_reflect(right, -2)
    # 4-bit codes: packing is pure shift/or
    return ((codes << 4 | right) << 4 | down) << 4 | downright


def spatial_block(codes: np.ndarray, table: LutTable) -> np.ndarray:
    """All 2x2 patterns of a code plane through one WH table -> (H, W, C)."""
    if table.kind != _model.KIND_WH:
        raise ValueError("spatial blocks need a WH table")
    codes = _check_codes(codes, _model.SPATIAL_BINS)
    return _widen(table)[_spatial_index(codes)]


def _quantize(merged: np.ndarray, bins: int) -> np.ndarray:
    r = (np.abs(merged) + 8) >> 4
    r = np.where(merged < 0, -r, r)
    return np.clip(r, 0, bins - 1, out=r)


def aggregate(ga: np.ndarray, gb: np.ndarray, direction: str, bins: int) -> np.ndarray:
    """Shifted add of two feature groups, quantized to [0, bins) codes.

    The first operand is read one step back along x (direction "W") or y
    ("H"), reflecting at the leading border, so the merged map sees a
    two-position window while staying aligned with the second operand.
    """
    ga = np.asarray(ga)
    gb = np.asarray(gb)
    if ga.shape != gb.shape or ga.ndim < 3:
        raise ValueError("aggregation operands must be equal (..., H, W, C) maps")
    if direction not in (_model.DIR_W, _model.DIR_H):
        raise ValueError(f"bad direction {direction!r}")
    if bins not in _model.QUERY_BINS:
        raise ValueError(f"bins {bins} not in {_model.QUERY_BINS}")
    axis = -2 if direction == _model.DIR_W else -3
    return _quantize(_prev_reflect(ga, axis) + gb, bins)


def _query(feat: np.ndarray, block: QueryBlock, tables: list[np.ndarray], bins: int):
    agg_codes = []
    for agg in block.aggregations:
        a, b = agg.groups
        axis = -2 if agg.direction == _model.DIR_W else -3
        merged = _prev_reflect(feat[..., 2 * a : 2 * a + 2], axis) + feat[..., 2 * b : 2 * b + 2]
        agg_codes.append(_quantize(merged, bins))
    out = None
    for slot, lut in enumerate(block.luts):
        m = agg_codes[lut.source]
        axis = -2 if lut.kind == _model.KIND_WC else -3
        nxt = _next_reflect(m, axis)
        idx = ((m[..., 0] * bins + nxt[..., 0]) * bins + m[..., 1]) * bins + nxt[..., 1]
        vals = tables[slot][idx]
        if out is None:
            out = vals
        else:
            out += vals
    return out


def query_block(
    feat: np.ndarray, block: QueryBlock, tables: list[LutTable], bins: int
) -> np.ndarray:
    """One query block over a (H, W, C) feature map with per-slot tables."""
    feat = np.asarray(feat)
    if feat.ndim < 3 or feat.shape[-1] < 2:
        raise ValueError("feature map must be (..., H, W, C)")
    if len(tables) != len(block.luts):
        raise ValueError(f"{len(block.luts)} slots need {len(block.luts)} tables")
    widened = []
    for lut, t in zip(block.luts, tables):
        if t.kind != lut.kind or t.out_ch != lut.out_ch or t.bins != bins:
            raise ValueError("table does not match its slot")
        widened.append(_widen(t))
    _assert_features(feat)
    return _query(feat, block, widened, bins)


def _assert_features(feat: np.ndarray) -> None:
    if feat.size and int(np.abs(feat).max()) >= _FEATURE_LIMIT:
        raise AssertionError("feature magnitude escaped the 2^24 envelope")


def _run_branch(
    codes: np.ndarray, plan: EnginePlan, branch: int, skip_unit: int, checks: bool
) -> np.ndarray:
    topo = plan.topology
    sc1, sc2, sc3 = topo.skips
    feat = plan.stage_tables[(branch, 0)][0][_spatial_index(codes)]
    if sc1:
        # input codes broadcast as whole units (16 sixteenths per code step)
        feat = feat + (codes << 4)[..., None]
    last = len(topo.blocks) - 1
    for stage in range(1, last):
        if checks:
            _assert_features(feat)
        out = _query(feat, topo.blocks[stage], plan.stage_tables[(branch, stage)], topo.v_f)
        feat = out + feat if sc2 else out
    if checks:
        _assert_features(feat)
    final = _query(feat, topo.blocks[last], plan.stage_tables[(branch, last)], topo.v_f)
    if sc3:
        shift = 4 + (4 if skip_unit == 16 else 0)
        final = final + (codes << shift)[..., None]
    if checks:
        _assert_features(final)
    return pixel_shuffle(final)


def run_branch(
    codes: np.ndarray,
    tables: dict[int, list[LutTable]],
    skip_unit: int,
    topo: ModelTopology,
) -> np.ndarray:
    """One branch over a single code plane; tables keyed by stage index."""
    _model.validate_topology(topo)
    if skip_unit not in (1, 16):
        raise ValueError("skip unit is 16 for the high plane, 1 for the low plane")
    codes = _check_codes(codes, _model.SPATIAL_BINS)
    branch = MSB if skip_unit == 16 else LSB
    stage_tables = {}
    for stage in range(len(topo.blocks)):
        ts = tables[stage]
        for t in ts:
            if t.bins != stage_bins(topo, stage):
                raise ValueError(f"stage {stage} table has wrong bin count")
        stage_tables[(branch, stage)] = [_widen(t) for t in ts]
    plan = EnginePlan(topo, stage_tables, influence_bound(topo))
    return _run_branch(codes, plan, branch, skip_unit, checks=True)


def _sr_planes(image: np.ndarray, plan: EnginePlan, checks: bool) -> np.ndarray:
    msb, lsb = split_bitplanes(image)
    msb = np.moveaxis(msb, -1, 0).astype(np.int32)
    lsb = np.moveaxis(lsb, -1, 0).astype(np.int32)
    acc = _run_branch(msb, plan, MSB, 16, checks)
    acc += _run_branch(lsb, plan, LSB, 1, checks)
    return acc


def _finish(acc: np.ndarray) -> np.ndarray:
    pix = np.clip(round_half_away(acc), 0, 255).astype(np.uint8)
    return np.moveaxis(pix, 0, -1)


def super_resolve(
    image: np.ndarray,
    container: LutContainer,
    threads: int = 1,
    plan: EnginePlan | None = None,
) -> np.ndarray:
    """x4 upscale of an (H, W, 3) uint8 image. Deterministic for any thread count."""
    image = np.asarray(image)
    check_rgb8(image, min_size=2)
    if plan is None:
        plan = prepare(container)
    if threads < 1:
        raise ValueError("threads must be >= 1")
    h = image.shape[0]
    s = plan.topology.scale
    if threads == 1 or h < 2 * threads:
        return _finish(_sr_planes(image, plan, checks=False))
    # Row bands with enough halo that band-local reflection cannot leak into
    # the kept rows; outputs are bit-identical to the single-band run.
    lo_x, hi_x, lo_y, hi_y = plan.bound
    margin = (hi_y - lo_y) + 1
    edges = np.linspace(0, h, threads + 1, dtype=int)
    out = np.empty((3, h * s, image.shape[1] * s), dtype=np.int32)

    def work(i: int):
        r0, r1 = int(edges[i]), int(edges[i + 1])
        a, b = max(0, r0 - margin), min(h, r1 + margin)
        acc = _sr_planes(image[a:b], plan, checks=False)
        out[:, r0 * s : r1 * s] = acc[:, (r0 - a) * s : (r1 - a) * s]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(work, range(threads)))
    return _finish(out)


# --- influence geometry ------------------------------------------------------


def influence_bound(topo: ModelTopology) -> tuple[int, int, int, int]:
    """Input-window offsets (lo_x, hi_x, lo_y, hi_y) feeding one output cell.

    The pre-shuffle feature at grid position p depends only on input codes at
    p + (dx, dy) with lo_x <= dx <= hi_x and lo_y <= dy <= hi_y: the spatial
    block reads one step right/down, every aggregation one step back along
    its axis, and every table read one step forward along its axis.
    """
    win = [0, 1, 0, 1]
    last = len(topo.blocks) - 1
    for stage in range(1, last + 1):
        block = topo.blocks[stage]
        paths = []
        for lut in block.luts:
            agg = block.aggregations[lut.source]
            p = list(win)
            if agg.direction == _model.DIR_W:
                p[0] -= 1
            else:
                p[2] -= 1
            if lut.kind == _model.KIND_WC:
                p[1] += 1
            else:
                p[3] += 1
            paths.append(p)
        if stage != last and topo.skips[1]:
            paths.append(list(win))
        win = [
            min(p[0] for p in paths),
            max(p[1] for p in paths),
            min(p[2] for p in paths),
            max(p[3] for p in paths),
        ]
    return tuple(win)


def influence_sr_box(
    topo: ModelTopology, probe: tuple[int, int], width: int, height: int
) -> tuple[int, int, int, int]:
    """Largest SR-pixel box (x0, y0, x1, y1 inclusive) probe may influence."""
    lo_x, hi_x, lo_y, hi_y = influence_bound(topo)
    px, py = probe
    s = topo.scale
    x0 = max(0, (px - hi_x) * s)
    y0 = max(0, (py - hi_y) * s)
    x1 = min(width * s - 1, (px - lo_x) * s + s - 1)
    y1 = min(height * s - 1, (py - lo_y) * s + s - 1)
    return x0, y0, x1, y1


_PERTURB_VALUES = (0, 15, 64, 85, 128, 170, 192, 240, 255)


def influence_extent(
    container: LutContainer,
    probe: tuple[int, int],
    image: np.ndarray | None = None,
    values: tuple[int, ...] = _PERTURB_VALUES,
):
    """Measured SR bounding box (x0, y0, x1, y1) that reacts to the probe pixel.

    Replaces the probe pixel (all channels) with each candidate value and
    unions the bounding boxes of changed SR pixels. Returns None if nothing
    changes. The default image is a deterministic random field big enough to
    hold the probe's full reach.
    """
    from .rng import SplitMix64

    px, py = probe
    if image is None:
        w, h = px + 10, py + 10
        image = SplitMix64(0x1A6E).fill_bytes(h * w * 3).reshape(h, w, 3)
    image = np.asarray(image)
    check_rgb8(image, min_size=2)
    if not (0 <= px < image.shape[1] and 0 <= py < image.shape[0]):
        raise ValueError("probe outside the image")
    plan = prepare(container)
    base = super_resolve(image, container, plan=plan)
    box = None
    for v in values:
        if (image[py, px] == v).all():
            continue
        probed = image.copy()
        probed[py, px] = v
        diff = np.any(super_resolve(probed, container, plan=plan) != base, axis=-1)
        ys, xs = np.nonzero(diff)
        if len(ys):
            cand = (xs.min(), ys.min(), xs.max(), ys.max())
            if box is None:
                box = cand
            else:
                box = (
                    min(box[0], cand[0]),
                    min(box[1], cand[1]),
                    max(box[2], cand[2]),
                    max(box[3], cand[3]),
                )
    return box
