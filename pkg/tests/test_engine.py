"""Engine dataflow tests against scalar per-pixel oracles.

The oracles below recompute each stage with plain loops and explicit
reflection, sharing nothing with the vectorized implementation.
"""

import numpy as np
import pytest

from lutsr import engine, model
from lutsr.model import LSB, MSB
from lutsr.rng import SplitMix64


def _reflect(i, n):
    if i < 0:
        return -i
    if i >= n:
        return 2 * n - 2 - i
    return i


def _random_table(kind, bins, out_ch, seed, scale_exp=-4):
    stream = SplitMix64(seed)
    raw = (stream.fill_floats(bins**4 * out_ch) * 200 - 100).astype(np.int8)
    return model.LutTable(kind, bins, out_ch, scale_exp, raw.reshape(bins**4, out_ch))


def _random_codes(h, w, bins, seed):
    stream = SplitMix64(seed)
    return (stream.fill_floats(h * w) * bins).astype(np.int32).reshape(h, w)


# --- spatial block -----------------------------------------------------


def _oracle_spatial(codes, table):
    h, w = codes.shape
    shift = table.scale_exp + 4
    out = np.zeros((h, w, table.out_ch), dtype=np.int64)
    for y in range(h):
        for x in range(w):
            p = (
                codes[y, x],
                codes[y, _reflect(x + 1, w)],
                codes[_reflect(y + 1, h), x],
                codes[_reflect(y + 1, h), _reflect(x + 1, w)],
            )
            idx = ((p[0] * 16 + p[1]) * 16 + p[2]) * 16 + p[3]
            out[y, x] = table.entries[idx].astype(np.int64) << shift
    return out


def test_spatial_block_uses_packed_2x2_pattern():
    # plane [[1,2],[3,4]]: position (0,0) reads flat index 4660
    table = _random_table(model.KIND_WH, 16, 3, 50)
    codes = np.array([[1, 2], [3, 4]], dtype=np.int32)
    out = engine.spatial_block(codes, table)
    assert np.array_equal(out[0, 0], table.entries[4660].astype(np.int32))


def test_spatial_block_matches_oracle():
    table = _random_table(model.KIND_WH, 16, 4, 51)
    codes = _random_codes(5, 5, 16, 52)
    assert np.array_equal(engine.spatial_block(codes, table), _oracle_spatial(codes, table))


def test_spatial_block_2x2_minimum():
    table = _random_table(model.KIND_WH, 16, 2, 53)
    codes = _random_codes(2, 2, 16, 54)
    assert np.array_equal(engine.spatial_block(codes, table), _oracle_spatial(codes, table))


def test_spatial_block_validation():
    table = _random_table(model.KIND_WC, 16, 2, 55)
    with pytest.raises(ValueError):
        engine.spatial_block(np.zeros((3, 3), np.int32), table)
    wh = _random_table(model.KIND_WH, 16, 2, 56)
    with pytest.raises(ValueError):
        engine.spatial_block(np.full((3, 3), 16, np.int32), wh)
    with pytest.raises(ValueError):
        engine.spatial_block(np.zeros((1, 3), np.int32), wh)


# --- aggregation -------------------------------------------------------


def test_aggregate_frozen_example():
    # gA row [16,32,48] with gB row [64,80,96] in sixteenths -> codes [6,6,8]
    ga = np.array([16, 32, 48], np.int32).reshape(1, 3, 1)
    gb = np.array([64, 80, 96], np.int32).reshape(1, 3, 1)
    out = engine.aggregate(ga, gb, "W", 16)
    assert out.tolist() == [[[6], [6], [8]]]


def _oracle_aggregate(ga, gb, direction, bins):
    h, w, c = ga.shape
    out = np.zeros((h, w, c), dtype=np.int64)
    for y in range(h):
        for x in range(w):
            if direction == "W":
                sy, sx = y, _reflect(x - 1, w)
            else:
                sy, sx = _reflect(y - 1, h), x
            for k in range(c):
                v = int(ga[sy, sx, k]) + int(gb[y, x, k])
                r = (abs(v) + 8) >> 4
                r = -r if v < 0 else r
                out[y, x, k] = min(max(r, 0), bins - 1)
    return out


def test_aggregate_matches_oracle():
    stream = SplitMix64(60)
    for direction in ("W", "H"):
        for bins in (8, 16, 24):
            ga = (stream.fill_floats(7 * 7 * 2) * 700 - 350).astype(np.int32).reshape(7, 7, 2)
            gb = (stream.fill_floats(7 * 7 * 2) * 700 - 350).astype(np.int32).reshape(7, 7, 2)
            got = engine.aggregate(ga, gb, direction, bins)
            assert np.array_equal(got, _oracle_aggregate(ga, gb, direction, bins))


def test_aggregate_validation():
    ga = np.zeros((3, 3, 2), np.int32)
    with pytest.raises(ValueError):
        engine.aggregate(ga, np.zeros((3, 4, 2), np.int32), "W", 16)
    with pytest.raises(ValueError):
        engine.aggregate(ga, ga, "X", 16)
    with pytest.raises(ValueError):
        engine.aggregate(ga, ga, "W", 6)


# --- query block -------------------------------------------------------


def _oracle_query(feat, block, tables, bins):
    h, w = feat.shape[:2]
    aggs = []
    for agg in block.aggregations:
        a, b = agg.groups
        aggs.append(
            _oracle_aggregate(
                feat[:, :, 2 * a : 2 * a + 2], feat[:, :, 2 * b : 2 * b + 2], agg.direction, bins
            )
        )
    total = None
    for slot, lut in enumerate(block.luts):
        m = aggs[lut.source]
        shift = tables[slot].scale_exp + 4
        vals = np.zeros((h, w, lut.out_ch), dtype=np.int64)
        for y in range(h):
            for x in range(w):
                if lut.kind == model.KIND_WC:
                    ny, nx = y, _reflect(x + 1, w)
                else:
                    ny, nx = _reflect(y + 1, h), x
                pat = (m[y, x, 0], m[ny, nx, 0], m[y, x, 1], m[ny, nx, 1])
                idx = ((pat[0] * bins + pat[1]) * bins + pat[2]) * bins + pat[3]
                vals[y, x] = tables[slot].entries[idx].astype(np.int64) << shift
        total = vals if total is None else total + vals
    return total


def test_query_block_matches_oracle_two_slot():
    topo = model.builtin_topology("M", 12)
    block = topo.blocks[1]
    tables = [
        _random_table(lut.kind, 12, lut.out_ch, 70 + i) for i, lut in enumerate(block.luts)
    ]
    stream = SplitMix64(71)
    feat = (stream.fill_floats(6 * 5 * 8) * 400 - 200).astype(np.int32).reshape(6, 5, 8)
    got = engine.query_block(feat, block, tables, 12)
    assert np.array_equal(got, _oracle_query(feat, block, tables, 12))


def test_query_block_matches_oracle_four_slot_final():
    topo = model.builtin_topology("L", 8)
    block = topo.blocks[2]
    tables = [
        _random_table(lut.kind, 8, lut.out_ch, 80 + i, scale_exp=-1)
        for i, lut in enumerate(block.luts)
    ]
    stream = SplitMix64(81)
    feat = (stream.fill_floats(5 * 6 * 16) * 300 - 150).astype(np.int32).reshape(5, 6, 16)
    got = engine.query_block(feat, block, tables, 8)
    assert np.array_equal(got, _oracle_query(feat, block, tables, 8))


# --- run_branch and super_resolve ---------------------------------------


def test_run_branch_zero_tables_is_scaled_input():
    topo = model.builtin_topology("M", 16)
    c = model.zero_container(topo)
    codes = _random_codes(4, 6, 16, 90)
    tables = {stage: [c.table(MSB, stage, s) for s in range(_slots(topo, stage))]
              for stage in range(len(topo.blocks))}
    out = engine.run_branch(codes, tables, 16, topo)
    want = np.repeat(np.repeat(codes, 4, 0), 4, 1) << 8  # unit 16, sixteenths
    assert np.array_equal(out, want)
    tables = {stage: [c.table(LSB, stage, s) for s in range(_slots(topo, stage))]
              for stage in range(len(topo.blocks))}
    out = engine.run_branch(codes, tables, 1, topo)
    assert np.array_equal(out, np.repeat(np.repeat(codes, 4, 0), 4, 1) << 4)


def _slots(topo, stage):
    return 1 if stage == 0 else len(topo.blocks[stage].luts)


def test_super_resolve_zero_tables_is_nearest_neighbor():
    stream = SplitMix64(91)
    for name in ("S", "1-2"):
        topo = model.builtin_topology(name, 16)
        c = model.zero_container(topo)
        img = stream.fill_bytes(6 * 9 * 3).reshape(6, 9, 3)
        sr = engine.super_resolve(img, c)
        assert np.array_equal(sr, np.repeat(np.repeat(img, 4, 0), 4, 1))


def test_super_resolve_channels_are_independent():
    topo = model.builtin_topology("S", 8)
    c = model.random_container(topo, 92)
    stream = SplitMix64(93)
    img = stream.fill_bytes(8 * 8 * 3).reshape(8, 8, 3)
    base = engine.super_resolve(img, c)
    probed = img.copy()
    probed[:, :, 1] = stream.fill_bytes(64).reshape(8, 8)
    out = engine.super_resolve(probed, c)
    assert np.array_equal(base[:, :, 0], out[:, :, 0])
    assert np.array_equal(base[:, :, 2], out[:, :, 2])
    assert not np.array_equal(base[:, :, 1], out[:, :, 1])


def test_super_resolve_translation_covariance():
    topo = model.builtin_topology("M", 16)
    c = model.random_container(topo, 94)
    big = SplitMix64(95).fill_bytes(28 * 28 * 3).reshape(28, 28, 3)
    dx, dy = 2, 1
    a = engine.super_resolve(big[:20, :20], c)
    b = engine.super_resolve(big[dy : 20 + dy, dx : 20 + dx], c)
    # compare far enough from every crop border that reflection can't differ
    m = 4
    region_a = a[4 * (m + dy) : 4 * (20 - m), 4 * (m + dx) : 4 * (20 - m)]
    region_b = b[4 * m : 4 * (20 - m - dy), 4 * m : 4 * (20 - m - dx)]
    assert region_a.size
    assert np.array_equal(region_a, region_b)


def test_super_resolve_deterministic_and_thread_invariant():
    topo = model.builtin_topology("M", 8)
    c = model.random_container(topo, 96)
    img = SplitMix64(97).fill_bytes(24 * 17 * 3).reshape(24, 17, 3)
    a = engine.super_resolve(img, c, threads=1)
    b = engine.super_resolve(img, c, threads=1)
    assert np.array_equal(a, b)
    for threads in (2, 3, 5):
        assert np.array_equal(engine.super_resolve(img, c, threads=threads), a)


def test_super_resolve_validation():
    topo = model.builtin_topology("S", 8)
    c = model.random_container(topo, 98)
    with pytest.raises(ValueError):
        engine.super_resolve(np.zeros((1, 5, 3), np.uint8), c)
    with pytest.raises(ValueError):
        engine.super_resolve(np.zeros((5, 5), np.uint8), c)
    with pytest.raises(ValueError):
        engine.super_resolve(np.zeros((5, 5, 3), np.uint8), c, threads=0)


def test_prepare_rejects_unrepresentable_scale():
    topo = model.builtin_topology("S", 8)
    c = model.random_container(topo, 99)
    t = c.table(0, 0, 0)
    c.tables[(0, 0, 0)] = model.LutTable(t.kind, t.bins, t.out_ch, -6, t.entries)
    with pytest.raises(ValueError):
        engine.prepare(c)


# --- influence ----------------------------------------------------------


def test_influence_bound_values():
    for name in ("S", "M", "L"):
        assert engine.influence_bound(model.builtin_topology(name)) == (-2, 3, -2, 3)
    for name in ("1-2", "1-4"):
        assert engine.influence_bound(model.builtin_topology(name)) == (-1, 2, -1, 2)


def test_influence_zero_tables_is_own_cell():
    topo = model.builtin_topology("M", 16)
    c = model.zero_container(topo)
    box = engine.influence_extent(c, (5, 4))
    assert box == (20, 16, 23, 19)  # exactly the probe's 4x4 output cell


def test_influence_random_tables_within_bound_and_beyond_3x3():
    topo = model.builtin_topology("M", 16)
    c = model.random_container(topo, 7)
    probe = (6, 6)
    box = engine.influence_extent(c, probe)
    assert box is not None
    x0, y0, x1, y1 = box
    bx0, by0, bx1, by1 = engine.influence_sr_box(topo, probe, 16, 16)
    assert bx0 <= x0 and by0 <= y0 and x1 <= bx1 and y1 <= by1
    # strictly wider than the 3x3 input neighborhood in at least one direction
    n3 = (4 * (probe[0] - 1), 4 * (probe[1] - 1), 4 * (probe[0] + 1) + 3, 4 * (probe[1] + 1) + 3)
    assert x0 < n3[0] or y0 < n3[1] or x1 > n3[2] or y1 > n3[3]
