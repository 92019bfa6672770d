"""Per-pixel scalar kernel with arithmetic auditing.

This is a deliberately plain re-statement of the engine dataflow, one value
at a time, used by tests to pin the vectorized path down and to demonstrate
the operation mix: with auditing on, every hot-path step is routed through
the counters, and none of them is a multiply or divide. Even flat table
indices are formed from small per-code stride tables (built once per run by
repeated addition), so pattern packing is lookup-and-add as well.

Only suitable for tiny images; cost grows per pixel times table reads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model as _model
from .image import check_rgb8, reflect_index
from .model import LSB, MSB, LutContainer, stage_bins


@dataclass
class OpAudit:
    """Counts of hot-path operations by kind."""

    lookups: int = 0
    adds: int = 0
    shifts: int = 0
    compares: int = 0
    muls: int = 0
    divs: int = 0

    def total(self) -> int:
        return self.lookups + self.adds + self.shifts + self.compares + self.muls + self.divs


def _stride_tables(bins: int) -> tuple[list[int], list[int], list[int]]:
    """Per-code flat-index contributions (code * bins^k) built by addition only."""
    s1 = [0]
    for _ in range(bins - 1):
        s1.append(s1[-1] + bins)
    step2 = s1[-1] + bins  # bins^2
    s2 = [0]
    for _ in range(bins - 1):
        s2.append(s2[-1] + step2)
    step3 = 0
    for _ in range(bins):
        step3 += step2  # bins^3
    s3 = [0]
    for _ in range(bins - 1):
        s3.append(s3[-1] + step3)
    return s1, s2, s3


class _Kernel:
    def __init__(self, container: LutContainer, audit: OpAudit):
        _model.validate_container(container)
        self.topo = container.topology
        self.audit = audit
        # setup work (not audited): entry grids and stride tables
        self.tables = {
            key: (t.entries, t.scale_exp + 4) for key, t in container.tables.items()
        }
        self.strides = {bins: _stride_tables(bins) for bins in {16, self.topo.v_f}}

    # audited primitives ------------------------------------------------

    def _add(self, a: int, b: int) -> int:
        self.audit.adds += 1
        return a + b

    def _shift(self, v: int, by: int) -> int:
        self.audit.shifts += 1
        return v << by

    def _round_units(self, v: int) -> int:
        # sixteenths -> units, ties away from zero
        self.audit.compares += 1
        if v < 0:
            self.audit.adds += 2  # negate, bias
            self.audit.shifts += 1
            return -((-v + 8) >> 4)
        self.audit.adds += 1
        self.audit.shifts += 1
        return (v + 8) >> 4

    def _clamp(self, v: int, lo: int, hi: int) -> int:
        self.audit.compares += 2
        if v < lo:
            return lo
        if v > hi:
            return hi
        return v

    def _read(self, key, idx: int, ch: int) -> int:
        entries, shift = self.tables[key]
        self.audit.lookups += 1
        raw = int(entries[idx, ch])
        return self._shift(raw, shift)

    def _pack(self, bins: int, v0: int, v1: int, v2: int, v3: int) -> int:
        s1, s2, s3 = self.strides[bins]
        self.audit.lookups += 3
        return self._add(self._add(self._add(s3[v0], s2[v1]), s1[v2]), v3)

    # dataflow ------------------------------------------------------------

    def spatial(self, codes, branch: int):
        h, w = len(codes), len(codes[0])
        key = (branch, 0, 0)
        out_ch = self.topo.blocks[0].out_ch
        feat = [[None] * w for _ in range(h)]
        for y in range(h):
            yn = reflect_index(y + 1, h)
            for x in range(w):
                xn = reflect_index(x + 1, w)
                idx = self._pack(
                    16, codes[y][x], codes[y][xn], codes[yn][x], codes[yn][xn]
                )
                feat[y][x] = [self._read(key, idx, c) for c in range(out_ch)]
        return feat

    def query(self, feat, branch: int, stage: int):
        topo = self.topo
        block = topo.blocks[stage]
        bins = stage_bins(topo, stage)
        h, w = len(feat), len(feat[0])
        agg_maps = []
        for agg in block.aggregations:
            ga, gb = agg.groups
            m = [[None] * w for _ in range(h)]
            for y in range(h):
                for x in range(w):
                    if agg.direction == _model.DIR_W:
                        sy, sx = y, reflect_index(x - 1, w)
                    else:
                        sy, sx = reflect_index(y - 1, h), x
                    pair = []
                    for k in (0, 1):
                        v = self._add(feat[sy][sx][2 * ga + k], feat[y][x][2 * gb + k])
                        pair.append(self._clamp(self._round_units(v), 0, bins - 1))
                    m[y][x] = pair
            agg_maps.append(m)
        out = None
        for slot, lut in enumerate(block.luts):
            m = agg_maps[lut.source]
            key = (branch, stage, slot)
            vals = [[None] * w for _ in range(h)]
            for y in range(h):
                for x in range(w):
                    if lut.kind == _model.KIND_WC:
                        ny, nx = y, reflect_index(x + 1, w)
                    else:
                        ny, nx = reflect_index(y + 1, h), x
                    idx = self._pack(bins, m[y][x][0], m[ny][nx][0], m[y][x][1], m[ny][nx][1])
                    vals[y][x] = [self._read(key, idx, c) for c in range(lut.out_ch)]
            if out is None:
                out = vals
            else:
                for y in range(h):
                    for x in range(w):
                        out[y][x] = [
                            self._add(a, b) for a, b in zip(out[y][x], vals[y][x])
                        ]
        return out

    def branch(self, codes, branch: int, skip_unit: int):
        topo = self.topo
        sc1, sc2, sc3 = topo.skips
        h, w = len(codes), len(codes[0])
        feat = self.spatial(codes, branch)
        if sc1:
            for y in range(h):
                for x in range(w):
                    units = self._shift(codes[y][x], 4)
                    feat[y][x] = [self._add(v, units) for v in feat[y][x]]
        last = len(topo.blocks) - 1
        for stage in range(1, last):
            out = self.query(feat, branch, stage)
            if sc2:
                for y in range(h):
                    for x in range(w):
                        out[y][x] = [
                            self._add(a, b) for a, b in zip(out[y][x], feat[y][x])
                        ]
            feat = out
        final = self.query(feat, branch, last)
        if sc3:
            shift = 8 if skip_unit == 16 else 4
            for y in range(h):
                for x in range(w):
                    bump = self._shift(codes[y][x], shift)
                    final[y][x] = [self._add(v, bump) for v in final[y][x]]
        # pixel shuffle: channel dy*s+dx lands at output offset (dy, dx)
        s = topo.scale
        sr = [[0] * (w * s) for _ in range(h * s)]
        for dy in range(s):
            for dx in range(s):
                ch = dy * s + dx
                for y in range(h):
                    for x in range(w):
                        sr[y * s + dy][x * s + dx] = final[y][x][ch]
        return sr


def super_resolve_scalar(image, container: LutContainer, audit: OpAudit | None = None):
    """Scalar twin of engine.super_resolve; returns an (H*4, W*4, 3) uint8 array."""
    image = np.asarray(image)
    check_rgb8(image, min_size=2)
    audit = audit if audit is not None else OpAudit()
    kernel = _Kernel(container, audit)
    s = container.topology.scale
    h, w = image.shape[:2]
    out = np.zeros((h * s, w * s, 3), dtype=np.uint8)
    for ch in range(3):
        planes = {}
        for branch, unit in ((MSB, 16), (LSB, 1)):
            codes = [
                [int(image[y, x, ch]) >> 4 if branch == MSB else int(image[y, x, ch]) & 15
                 for x in range(w)]
                for y in range(h)
            ]
            planes[branch] = kernel.branch(codes, branch, unit)
        for y in range(h * s):
            for x in range(w * s):
                acc = kernel._add(planes[MSB][y][x], planes[LSB][y][x])
                out[y, x, ch] = kernel._clamp(kernel._round_units(acc), 0, 255)
    return out
