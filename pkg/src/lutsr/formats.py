"""Versioned little-endian binary formats for table containers and weights.

Container files hold the topology plus raw int8 table entries; weight files
hold the same topology plus float32 mapping-module layers. Both formats are
strict: unknown magic, unsupported version, truncation and structural
mismatches raise distinct error types so callers can map them to exit codes.
"""

from __future__ import annotations

import struct

import numpy as np

from . import model
from .model import (
    Aggregation,
    LutContainer,
    LutSlot,
    LutTable,
    ModelTopology,
    QueryBlock,
    SpatialBlock,
)

CONTAINER_MAGIC = b"SPLC"
WEIGHTS_MAGIC = b"SPWT"
FORMAT_VERSION = 1

_KIND_CODES = {model.KIND_WH: 0, model.KIND_WC: 1, model.KIND_HC: 2}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}
_DIR_CODES = {model.DIR_W: 0, model.DIR_H: 1}
_DIR_NAMES = {v: k for k, v in _DIR_CODES.items()}


class FormatError(Exception):
    """Base class for file-format failures."""


class BadMagic(FormatError):
    pass


class UnsupportedVersion(FormatError):
    pass


class Truncated(FormatError):
    pass


class InvalidStructure(FormatError):
    pass


class _Reader:
    def __init__(self, data: bytes):
        self._data = bytes(data)
        self._pos = 0

    def take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise Truncated(
                f"needed {n} bytes at offset {self._pos}, "
                f"file has {len(self._data)}"
            )
        out = self._data[self._pos : self._pos + n]
        self._pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def i8(self) -> int:
        return struct.unpack("<b", self.take(1))[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def done(self) -> None:
        if self._pos != len(self._data):
            raise InvalidStructure(f"{len(self._data) - self._pos} trailing bytes")


def _pack_topology(topo: ModelTopology) -> bytes:
    name = topo.name.encode("utf-8")
    if len(name) > 255:
        raise InvalidStructure("variant name too long")
    out = [struct.pack("<B", len(name)), name]
    out.append(struct.pack("<BHH", topo.scale, topo.c_f, topo.v_f))
    flags = sum(1 << i for i, f in enumerate(topo.skips) if f)
    out.append(struct.pack("<BB", flags, len(topo.blocks)))
    for block in topo.blocks:
        if isinstance(block, SpatialBlock):
            out.append(struct.pack("<BB", 0, block.out_ch))
        else:
            out.append(struct.pack("<BB", 1, len(block.aggregations)))
            for agg in block.aggregations:
                out.append(
                    struct.pack("<BBB", _DIR_CODES[agg.direction], *agg.groups)
                )
            out.append(struct.pack("<B", len(block.luts)))
            for lut in block.luts:
                out.append(
                    struct.pack("<BBB", _KIND_CODES[lut.kind], lut.source, lut.out_ch)
                )
    return b"".join(out)


def _read_topology(r: _Reader) -> ModelTopology:
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
            blocks.append(SpatialBlock(r.u8()))
        elif tag == 1:
            aggs = tuple(
                Aggregation(_dir_name(r.u8()), (r.u8(), r.u8()))
                for _ in range(r.u8())
            )
            luts = tuple(
                LutSlot(_kind_name(r.u8()), r.u8(), r.u8()) for _ in range(r.u8())
            )
            blocks.append(QueryBlock(aggs, luts))
        else:
            raise InvalidStructure(f"unknown block tag {tag}")
    topo = ModelTopology(name, c_f, v_f, scale, tuple(blocks), skips)
    try:
        model.validate_topology(topo)
    except ValueError as e:
        raise InvalidStructure(str(e)) from e
    return topo


def _dir_name(code: int) -> str:
    if code not in _DIR_NAMES:
        raise InvalidStructure(f"unknown aggregation direction code {code}")
    return _DIR_NAMES[code]


def _kind_name(code: int) -> str:
    if code not in _KIND_NAMES:
        raise InvalidStructure(f"unknown table kind code {code}")
    return _KIND_NAMES[code]


def serialize_container(container: LutContainer) -> bytes:
    model.validate_container(container)
    out = [CONTAINER_MAGIC, struct.pack("<H", FORMAT_VERSION)]
    out.append(_pack_topology(container.topology))
    entries = list(container.iter_tables())
    out.append(struct.pack("<H", len(entries)))
    for branch, stage, slot, t in entries:
        out.append(
            struct.pack(
                "<BBBHHb", branch, stage, _KIND_CODES[t.kind], t.bins, t.out_ch, t.scale_exp
            )
        )
        out.append(t.entries.tobytes())
    return b"".join(out)


def parse_container(data: bytes) -> LutContainer:
    r = _Reader(data)
    if r.take(4) != CONTAINER_MAGIC:
        raise BadMagic("not a table container file")
    version = r.u16()
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"container version {version}, expected {FORMAT_VERSION}")
    topo = _read_topology(r)
    specs = list(model.table_specs(topo))
    count = r.u16()
    if count != len(specs):
        raise InvalidStructure(f"{count} tables, topology wants {len(specs)}")
    tables = {}
    for branch, stage, slot, kind, bins, out_ch, _ in specs:
        got_branch, got_stage = r.u8(), r.u8()
        got_kind = _kind_name(r.u8())
        got_bins, got_out = r.u16(), r.u16()
        exp = r.i8()
        if (got_branch, got_stage, got_kind) != (branch, stage, kind):
            raise InvalidStructure(
                f"table order mismatch: got branch {got_branch} stage {got_stage} "
                f"kind {got_kind}, expected branch {branch} stage {stage} kind {kind}"
            )
        if (got_bins, got_out) != (bins, out_ch):
            raise InvalidStructure(
                f"table branch {branch} stage {stage} slot {slot} is "
                f"{got_bins} bins x {got_out} ch, topology wants {bins} x {out_ch}"
            )
        raw = np.frombuffer(r.take(bins**4 * out_ch), dtype=np.int8)
        try:
            tables[(branch, stage, slot)] = LutTable(
                kind, bins, out_ch, exp, raw.reshape(bins**4, out_ch).copy()
            )
        except ValueError as e:
            raise InvalidStructure(str(e)) from e
    r.done()
    container = LutContainer(topo, tables)
    try:
        model.validate_container(container)
    except ValueError as e:
        raise InvalidStructure(str(e)) from e
    return container


def serialize_weights(weights) -> bytes:
    # Imported lazily to keep formats free of the float-path dependency cycle.
    from .mapping import module_specs

    out = [WEIGHTS_MAGIC, struct.pack("<H", FORMAT_VERSION)]
    out.append(_pack_topology(weights.topology))
    specs = list(module_specs(weights.topology))
    out.append(struct.pack("<H", len(specs)))
    for branch, stage, slot, kind, out_ch in specs:
        m = weights.modules[(branch, stage, slot)]
        out.append(
            struct.pack("<BBBBBHH", branch, stage, slot, m.kh, m.kw, m.in_ch, m.out_ch)
        )
        for w, b in m.layers:
            out.append(struct.pack("<HH", w.shape[0], w.shape[1]))
            out.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
            out.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
    return b"".join(out)


def parse_weights(data: bytes):
    from .mapping import HIDDEN, KIND_GEOMETRY, MappingModule, WeightSet, module_specs

    r = _Reader(data)
    if r.take(4) != WEIGHTS_MAGIC:
        raise BadMagic("not a weight file")
    version = r.u16()
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"weight version {version}, expected {FORMAT_VERSION}")
    topo = _read_topology(r)
    specs = list(module_specs(topo))
    count = r.u16()
    if count != len(specs):
        raise InvalidStructure(f"{count} modules, topology wants {len(specs)}")
    modules = {}
    for branch, stage, slot, kind, out_ch in specs:
        got = (r.u8(), r.u8(), r.u8())
        kh, kw = r.u8(), r.u8()
        in_ch, got_out = r.u16(), r.u16()
        if got != (branch, stage, slot):
            raise InvalidStructure(f"module order mismatch at {got}, expected {(branch, stage, slot)}")
        if (kh, kw, in_ch) != KIND_GEOMETRY[kind] or got_out != out_ch:
            raise InvalidStructure(
                f"module {got} geometry {(kh, kw, in_ch, got_out)} does not match "
                f"kind {kind} with {out_ch} outputs"
            )
        want_shapes = [
            (HIDDEN, kh * kw * in_ch),
            (HIDDEN, HIDDEN),
            (HIDDEN, HIDDEN),
            (out_ch, HIDDEN),
        ]
        layers = []
        for rows_want, cols_want in want_shapes:
            rows, cols = r.u16(), r.u16()
            if (rows, cols) != (rows_want, cols_want):
                raise InvalidStructure(
                    f"layer shape {(rows, cols)}, expected {(rows_want, cols_want)}"
                )
            w = np.frombuffer(r.take(rows * cols * 4), dtype="<f4").reshape(rows, cols)
            b = np.frombuffer(r.take(rows * 4), dtype="<f4")
            layers.append((w.copy(), b.copy()))
        modules[(branch, stage, slot)] = MappingModule(kh, kw, in_ch, out_ch, tuple(layers))
    r.done()
    return WeightSet(topo, modules)


def load_container(path) -> LutContainer:
    with open(path, "rb") as f:
        return parse_container(f.read())


def save_container(path, container: LutContainer) -> None:
    with open(path, "wb") as f:
        f.write(serialize_container(container))


def load_weights(path):
    with open(path, "rb") as f:
        return parse_weights(f.read())


def save_weights(path, weights) -> None:
    with open(path, "wb") as f:
        f.write(serialize_weights(weights))
