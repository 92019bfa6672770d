"""Variant catalog for the table-based x4 super-resolution models.

The trainer talks to the inference engine only through its weight-file
format, so it carries its own copy of the model structure: a spatial block
over 2x2 single-channel patterns followed by query blocks whose aggregations
merge 2-channel feature groups into 4-bit-ish codes read by cross-channel
tables. Block layouts here must stay in lockstep with the engine's catalog,
otherwise exported files will not parse.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

SCALE = 4
SPATIAL_BINS = 16  # input codes are 4-bit nibbles
QUERY_BINS = (8, 12, 16, 20, 24)
MSB, LSB = 0, 1

KIND_WH = "WH"
KIND_WC = "WC"
KIND_HC = "HC"
DIR_W = "W"
DIR_H = "H"

# Entry scales the engine quantizes onto: fine step inside, half-unit final.
SCALE_EXP_INNER = -4
SCALE_EXP_FINAL = -1

# Head geometry (kh, kw, in_ch) per table kind; all heads see 4 codes.
KIND_GEOMETRY = {
    KIND_WH: (2, 2, 1),
    KIND_WC: (1, 2, 2),
    KIND_HC: (2, 1, 2),
}
HIDDEN = 64


@dataclass(frozen=True)
class SpatialBlock:
    out_ch: int


@dataclass(frozen=True)
class Aggregation:
    direction: str
    groups: tuple[int, int]


@dataclass(frozen=True)
class LutSlot:
    kind: str
    source: int
    out_ch: int


@dataclass(frozen=True)
class QueryBlock:
    aggregations: tuple[Aggregation, ...]
    luts: tuple[LutSlot, ...]


@dataclass(frozen=True)
class Topology:
    """Branch structure shared by both bit planes, plus skip flags.

    skips = (input->spatial output, residual around non-final query blocks,
    input->final stage scaled by the branch unit).
    """

    name: str
    c_f: int
    v_f: int
    scale: int
    blocks: tuple
    skips: tuple[bool, bool, bool] = (True, True, True)


def stage_bins(topo: Topology, stage: int) -> int:
    return SPATIAL_BINS if stage == 0 else topo.v_f


def stage_scale_exp(topo: Topology, stage: int) -> int:
    return SCALE_EXP_FINAL if stage == len(topo.blocks) - 1 else SCALE_EXP_INNER


def module_specs(topo: Topology) -> Iterator[tuple[int, int, int, str, int]]:
    """Canonical (branch, stage, slot, kind, out_ch) order used by the format."""
    for branch in (MSB, LSB):
        for stage, block in enumerate(topo.blocks):
            if stage == 0:
                yield branch, 0, 0, KIND_WH, block.out_ch
            else:
                for slot, lut in enumerate(block.luts):
                    yield branch, stage, slot, lut.kind, lut.out_ch


def _pair_block(c_f: int, out_ch: int) -> QueryBlock:
    # Two tables: a horizontal aggregation read by WC, a vertical one by HC.
    if c_f // 2 == 2:
        aggs = (Aggregation(DIR_W, (0, 1)), Aggregation(DIR_H, (0, 1)))
    else:
        aggs = (Aggregation(DIR_W, (0, 1)), Aggregation(DIR_H, (2, 3)))
    return QueryBlock(aggs, (LutSlot(KIND_WC, 0, out_ch), LutSlot(KIND_HC, 1, out_ch)))


def _quad_block(out_ch: int) -> QueryBlock:
    aggs = (
        Aggregation(DIR_H, (0, 1)),
        Aggregation(DIR_H, (2, 3)),
        Aggregation(DIR_W, (4, 5)),
        Aggregation(DIR_W, (6, 7)),
    )
    luts = (
        LutSlot(KIND_HC, 0, out_ch),
        LutSlot(KIND_HC, 1, out_ch),
        LutSlot(KIND_WC, 2, out_ch),
        LutSlot(KIND_WC, 3, out_ch),
    )
    return QueryBlock(aggs, luts)


_ALIASES = {"1-2-2": "M", "1-4-4": "L"}
BUILTIN_NAMES = ("S", "M", "L", "1-2", "1-4")


def builtin_topology(name: str, v_f: int = 16) -> Topology:
    key = _ALIASES.get(name, name)
    out = SCALE**2
    if key == "S":
        blocks = (SpatialBlock(4), _pair_block(4, 4), _pair_block(4, out))
    elif key == "M":
        blocks = (SpatialBlock(8), _pair_block(8, 8), _pair_block(8, out))
    elif key == "L":
        blocks = (SpatialBlock(16), _quad_block(16), _quad_block(out))
    elif key == "1-2":
        blocks = (SpatialBlock(8), _pair_block(8, out))
    elif key == "1-4":
        blocks = (SpatialBlock(16), _quad_block(out))
    else:
        raise ValueError(f"unknown variant {name!r}")
    if v_f not in QUERY_BINS:
        raise ValueError(f"v_f {v_f} not in {QUERY_BINS}")
    return Topology(key, blocks[0].out_ch, v_f, SCALE, blocks)
