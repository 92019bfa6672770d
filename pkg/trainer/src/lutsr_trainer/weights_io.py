"""Reader/writer for the engine's little-endian binary weight files.

Layout (all integers little-endian):

* magic ``SPWT``, version u16
* topology: name (u8 length + utf-8), scale u8, c_f u16, v_f u16, skip
  flags u8 (bit i = flag i), block count u8, then per block either
  ``00 out_ch`` for the spatial table or ``01`` + aggregations
  (direction u8, two group indices u8) + table slots (kind u8, source u8,
  out_ch u8) for a query block
* module count u16, then per module in canonical order: branch, stage,
  slot, kh, kw (u8 each), in_ch u16, out_ch u16, and four dense layers as
  rows u16, cols u16, float32 row-major weights, float32 bias.

This is a from-scratch implementation of the same contract the engine
ships; the bridge tests prove byte compatibility by feeding exported files
through the engine's own CLI.
"""

from __future__ import annotations

import struct

import numpy as np

from . import topo as T

MAGIC = b"SPWT"
VERSION = 1

_KIND_CODES = {T.KIND_WH: 0, T.KIND_WC: 1, T.KIND_HC: 2}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}
_DIR_CODES = {T.DIR_W: 0, T.DIR_H: 1}
_DIR_NAMES = {v: k for k, v in _DIR_CODES.items()}

# Layer shapes of one module: head over the 4 pattern codes, two hidden
# layers, linear output.
def layer_shapes(out_ch: int) -> list[tuple[int, int]]:
    return [
        (T.HIDDEN, 4),
        (T.HIDDEN, T.HIDDEN),
        (T.HIDDEN, T.HIDDEN),
        (out_ch, T.HIDDEN),
    ]


def _pack_topology(topology: T.Topology) -> bytes:
    name = topology.name.encode("utf-8")
    out = [struct.pack("<B", len(name)), name]
    out.append(struct.pack("<BHH", topology.scale, topology.c_f, topology.v_f))
    flags = sum(1 << i for i, f in enumerate(topology.skips) if f)
    out.append(struct.pack("<BB", flags, len(topology.blocks)))
    for block in topology.blocks:
        if isinstance(block, T.SpatialBlock):
            out.append(struct.pack("<BB", 0, block.out_ch))
        else:
            out.append(struct.pack("<BB", 1, len(block.aggregations)))
            for agg in block.aggregations:
                out.append(struct.pack("<BBB", _DIR_CODES[agg.direction], *agg.groups))
            out.append(struct.pack("<B", len(block.luts)))
            for lut in block.luts:
                out.append(
                    struct.pack("<BBB", _KIND_CODES[lut.kind], lut.source, lut.out_ch)
                )
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self._data = bytes(data)
        self._pos = 0

    def take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise ValueError(f"truncated file at offset {self._pos}")
        out = self._data[self._pos : self._pos + n]
        self._pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def done(self) -> None:
        if self._pos != len(self._data):
            raise ValueError(f"{len(self._data) - self._pos} trailing bytes")


def _read_topology(r: _Reader) -> T.Topology:
    name = r.take(r.u8()).decode("utf-8")
    scale = r.u8()
    c_f = r.u16()
    v_f = r.u16()
    flags = r.u8()
    skips = tuple(bool(flags >> i & 1) for i in range(3))
    blocks = []
    for _ in range(r.u8()):
        tag = r.u8()
        if tag == 0:
            blocks.append(T.SpatialBlock(r.u8()))
        elif tag == 1:
            aggs = tuple(
                T.Aggregation(_DIR_NAMES[r.u8()], (r.u8(), r.u8()))
                for _ in range(r.u8())
            )
            luts = tuple(
                T.LutSlot(_KIND_NAMES[r.u8()], r.u8(), r.u8()) for _ in range(r.u8())
            )
            blocks.append(T.QueryBlock(aggs, luts))
        else:
            raise ValueError(f"unknown block tag {tag}")
    return T.Topology(name, c_f, v_f, scale, tuple(blocks), skips)


def serialize(topology: T.Topology, modules: dict) -> bytes:
    """Pack {(branch, stage, slot): [(w, b) x 4]} float32 layers into a file."""
    out = [MAGIC, struct.pack("<H", VERSION)]
    out.append(_pack_topology(topology))
    specs = list(T.module_specs(topology))
    out.append(struct.pack("<H", len(specs)))
    for branch, stage, slot, kind, out_ch in specs:
        kh, kw, in_ch = T.KIND_GEOMETRY[kind]
        layers = modules[(branch, stage, slot)]
        out.append(struct.pack("<BBBBBHH", branch, stage, slot, kh, kw, in_ch, out_ch))
        for (rows, cols), (w, b) in zip(layer_shapes(out_ch), layers):
            if w.shape != (rows, cols) or b.shape != (rows,):
                raise ValueError(
                    f"module {(branch, stage, slot)} layer shape {w.shape} "
                    f"does not match {(rows, cols)}"
                )
            out.append(struct.pack("<HH", rows, cols))
            out.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
            out.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
    return b"".join(out)


def parse(data: bytes) -> tuple[T.Topology, dict]:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise ValueError("not a weight file")
    version = r.u16()
    if version != VERSION:
        raise ValueError(f"weight version {version}, expected {VERSION}")
    topology = _read_topology(r)
    specs = list(T.module_specs(topology))
    if r.u16() != len(specs):
        raise ValueError("module count does not match topology")
    modules = {}
    for branch, stage, slot, kind, out_ch in specs:
        got = (r.u8(), r.u8(), r.u8())
        if got != (branch, stage, slot):
            raise ValueError(f"module order mismatch at {got}")
        kh, kw = r.u8(), r.u8()
        in_ch, got_out = r.u16(), r.u16()
        if (kh, kw, in_ch) != T.KIND_GEOMETRY[kind] or got_out != out_ch:
            raise ValueError(f"module {got} geometry does not match topology")
        layers = []
        for rows, cols in layer_shapes(out_ch):
            if (r.u16(), r.u16()) != (rows, cols):
                raise ValueError(f"layer shape mismatch in module {got}")
            w = np.frombuffer(r.take(rows * cols * 4), dtype="<f4").reshape(rows, cols)
            b = np.frombuffer(r.take(rows * 4), dtype="<f4")
            layers.append((w.copy(), b.copy()))
        modules[(branch, stage, slot)] = layers
    r.done()
    return topology, modules


def write_weights(path, topology: T.Topology, modules: dict) -> None:
    with open(path, "wb") as f:
        f.write(serialize(topology, modules))


def read_weights(path) -> tuple[T.Topology, dict]:
    with open(path, "rb") as f:
        return parse(f.read())
