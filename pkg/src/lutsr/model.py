"""Lookup-table model structures.

A model is two parallel branches (one per 4-bit plane) sharing a single
topology: a spatial 4D-pattern block followed by one or more query blocks.
Each block is backed by int8 tables whose entry ``r`` encodes the value
``r * 2**scale_exp``; table payloads dominate the model size, so reported
sizes count entry bytes only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .rng import SplitMix64

# Table kinds: spatial 2x2 patterns, and cross-channel pairs stepping in
# x (WC) or y (HC).
KIND_WH = "WH"
KIND_WC = "WC"
KIND_HC = "HC"
KINDS = (KIND_WH, KIND_WC, KIND_HC)

# Aggregation directions: "W" shifts its first operand along x, "H" along y.
DIR_W = "W"
DIR_H = "H"

SPATIAL_BINS = 16  # input codes are 4-bit nibbles
QUERY_BINS = (8, 12, 16, 20, 24)  # supported aggregation bin counts
MSB, LSB = 0, 1
SCALE = 4  # fixed upscaling factor; query blocks emit SCALE**2 channels

# Default entry scales: fine step for intermediate features, coarser
# half-unit step for the final stage whose outputs span pixel range.
SCALE_EXP_INNER = -4
SCALE_EXP_FINAL = -1


def pack_index(v0, v1, v2, v3, bins: int):
    """Pack a 4-code pattern into a flat table index, first code most significant."""
    for v in (v0, v1, v2, v3):
        if np.any(np.asarray(v) < 0) or np.any(np.asarray(v) >= bins):
            raise ValueError(f"pattern code out of range [0, {bins})")
    return ((v0 * bins + v1) * bins + v2) * bins + v3


@dataclass(frozen=True, eq=False)
class LutTable:
    """One 4D table: (bins**4, out_ch) int8 entries plus its entry scale."""

    kind: str
    bins: int
    out_ch: int
    scale_exp: int
    entries: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown table kind {self.kind!r}")
        if self.kind == KIND_WH:
            if self.bins != SPATIAL_BINS:
                raise ValueError("spatial tables index 4-bit codes, bins must be 16")
        elif self.bins not in QUERY_BINS:
            raise ValueError(f"bins {self.bins} not in {QUERY_BINS}")
        if not -7 <= self.scale_exp <= 0:
            raise ValueError(f"scale_exp {self.scale_exp} outside [-7, 0]")
        if self.out_ch < 1:
            raise ValueError("out_ch must be positive")
        want = (self.bins**4, self.out_ch)
        if self.entries.dtype != np.int8 or self.entries.shape != want:
            raise ValueError(
                f"entries must be int8 of shape {want}, got "
                f"{self.entries.dtype} {self.entries.shape}"
            )

    def lookup(self, idx):
        """Raw int8 entry row(s) for flat pattern index(es)."""
        idx = np.asarray(idx)
        if np.any(idx < 0) or np.any(idx >= self.bins**4):
            raise ValueError(f"index outside [0, {self.bins**4})")
        return self.entries[idx]

    def nbytes(self) -> int:
        return self.bins**4 * self.out_ch


def tables_equal(a: LutTable, b: LutTable) -> bool:
    return (
        a.kind == b.kind
        and a.bins == b.bins
        and a.out_ch == b.out_ch
        and a.scale_exp == b.scale_exp
        and np.array_equal(a.entries, b.entries)
    )


@dataclass(frozen=True)
class SpatialBlock:
    """First stage: one table over 2x2 single-channel patterns."""

    out_ch: int


@dataclass(frozen=True)
class Aggregation:
    """Pairwise merge of two 2-channel groups with a one-pixel shift on the first."""

    direction: str
    groups: tuple[int, int]


@dataclass(frozen=True)
class LutSlot:
    """One table read inside a query block, fed by one aggregation output."""

    kind: str
    source: int
    out_ch: int


@dataclass(frozen=True)
class QueryBlock:
    aggregations: tuple[Aggregation, ...]
    luts: tuple[LutSlot, ...]


@dataclass(frozen=True)
class ModelTopology:
    """Shared branch structure plus the skip-connection flags.

    skips = (input->spatial output, residual around non-final query blocks,
    input->final stage scaled by the branch unit).
    """

    name: str
    c_f: int
    v_f: int
    scale: int
    blocks: tuple
    skips: tuple[bool, bool, bool] = (True, True, True)


def validate_topology(topo: ModelTopology) -> None:
    if topo.scale != SCALE:
        raise ValueError(f"only x{SCALE} upscaling is supported")
    if topo.c_f < 2 or topo.c_f % 2:
        raise ValueError("c_f must be a positive even channel count")
    if topo.v_f not in QUERY_BINS:
        raise ValueError(f"v_f {topo.v_f} not in {QUERY_BINS}")
    if len(topo.blocks) < 2:
        raise ValueError("need a spatial block and at least one query block")
    if not isinstance(topo.blocks[0], SpatialBlock):
        raise ValueError("first block must be the spatial block")
    if topo.blocks[0].out_ch != topo.c_f:
        raise ValueError("spatial block must emit c_f channels")
    if len(topo.skips) != 3:
        raise ValueError("skips must be three flags")
    n_groups = topo.c_f // 2
    last = len(topo.blocks) - 1
    for stage, block in enumerate(topo.blocks[1:], start=1):
        if not isinstance(block, QueryBlock):
            raise ValueError("blocks after the first must be query blocks")
        if not block.aggregations or not block.luts:
            raise ValueError("query blocks need aggregations and table slots")
        for agg in block.aggregations:
            if agg.direction not in (DIR_W, DIR_H):
                raise ValueError(f"bad aggregation direction {agg.direction!r}")
            if len(agg.groups) != 2:
                raise ValueError("aggregations merge exactly two groups")
            for g in agg.groups:
                if not 0 <= g < n_groups:
                    raise ValueError(f"group index {g} outside [0, {n_groups})")
        want_out = SCALE**2 if stage == last else topo.c_f
        for lut in block.luts:
            if lut.kind not in (KIND_WC, KIND_HC):
                raise ValueError("query slots must be WC or HC tables")
            if not 0 <= lut.source < len(block.aggregations):
                raise ValueError(f"slot source {lut.source} has no aggregation")
            if lut.out_ch != want_out:
                raise ValueError(
                    f"stage {stage} slots must emit {want_out} channels, got {lut.out_ch}"
                )


def stage_scale_exp(topo: ModelTopology, stage: int) -> int:
    return SCALE_EXP_FINAL if stage == len(topo.blocks) - 1 else SCALE_EXP_INNER


def stage_bins(topo: ModelTopology, stage: int) -> int:
    return SPATIAL_BINS if stage == 0 else topo.v_f


def table_specs(topo: ModelTopology) -> Iterator[tuple[int, int, int, str, int, int, int]]:
    """Canonical (branch, stage, slot, kind, bins, out_ch, scale_exp) order."""
    for branch in (MSB, LSB):
        for stage, block in enumerate(topo.blocks):
            if stage == 0:
                yield branch, 0, 0, KIND_WH, SPATIAL_BINS, block.out_ch, SCALE_EXP_INNER
            else:
                for slot, lut in enumerate(block.luts):
                    yield (
                        branch,
                        stage,
                        slot,
                        lut.kind,
                        topo.v_f,
                        lut.out_ch,
                        stage_scale_exp(topo, stage),
                    )


def payload_size(topo: ModelTopology) -> int:
    """Total table entry bytes across both branches (headers excluded)."""
    validate_topology(topo)
    per_branch = SPATIAL_BINS**4 * topo.blocks[0].out_ch
    for stage, block in enumerate(topo.blocks[1:], start=1):
        per_branch += topo.v_f**4 * sum(lut.out_ch for lut in block.luts)
    return 2 * per_branch


@dataclass(eq=False)
class LutContainer:
    """A topology plus its tables keyed by (branch, stage, slot)."""

    topology: ModelTopology
    tables: dict[tuple[int, int, int], LutTable]

    def table(self, branch: int, stage: int, slot: int = 0) -> LutTable:
        return self.tables[(branch, stage, slot)]

    def iter_tables(self) -> Iterator[tuple[int, int, int, LutTable]]:
        for branch, stage, slot, *_ in table_specs(self.topology):
            yield branch, stage, slot, self.tables[(branch, stage, slot)]


def validate_container(container: LutContainer) -> None:
    topo = container.topology
    validate_topology(topo)
    seen = set()
    for branch, stage, slot, kind, bins, out_ch, _ in table_specs(topo):
        key = (branch, stage, slot)
        if key not in container.tables:
            raise ValueError(f"missing table {key}")
        t = container.tables[key]
        if (t.kind, t.bins, t.out_ch) != (kind, bins, out_ch):
            raise ValueError(
                f"table {key} is {t.kind}/{t.bins}/{t.out_ch}, "
                f"topology wants {kind}/{bins}/{out_ch}"
            )
        seen.add(key)
    extra = set(container.tables) - seen
    if extra:
        raise ValueError(f"unexpected tables {sorted(extra)}")


def containers_equal(a: LutContainer, b: LutContainer) -> bool:
    if a.topology != b.topology or set(a.tables) != set(b.tables):
        return False
    return all(tables_equal(a.tables[k], b.tables[k]) for k in a.tables)


def zero_container(topo: ModelTopology) -> LutContainer:
    tables = {}
    for branch, stage, slot, kind, bins, out_ch, exp in table_specs(topo):
        entries = np.zeros((bins**4, out_ch), dtype=np.int8)
        tables[(branch, stage, slot)] = LutTable(kind, bins, out_ch, exp, entries)
    return LutContainer(topo, tables)


def random_container(topo: ModelTopology, seed: int, spread: int = 64) -> LutContainer:
    """Dense random tables, entries uniform in [-spread, spread)."""
    validate_topology(topo)
    stream = SplitMix64(seed)
    tables = {}
    for branch, stage, slot, kind, bins, out_ch, exp in table_specs(topo):
        n = bins**4 * out_ch
        raw = (stream.fill_floats(n) * (2 * spread) - spread).astype(np.int8)
        tables[(branch, stage, slot)] = LutTable(
            kind, bins, out_ch, exp, raw.reshape(bins**4, out_ch)
        )
    return LutContainer(topo, tables)


def _query_block_pair(c_f: int, out_ch: int) -> QueryBlock:
    # Two-table layout: first half of the groups feeds a horizontal
    # aggregation read by a WC table, second half a vertical one read by HC.
    n_groups = c_f // 2
    if n_groups == 2:
        aggs = (
            Aggregation(DIR_W, (0, 1)),
            Aggregation(DIR_H, (0, 1)),
        )
    else:
        aggs = (
            Aggregation(DIR_W, (0, 1)),
            Aggregation(DIR_H, (2, 3)),
        )
    luts = (LutSlot(KIND_WC, 0, out_ch), LutSlot(KIND_HC, 1, out_ch))
    return QueryBlock(aggs, luts)


def _query_block_quad(out_ch: int) -> QueryBlock:
    # Four-table layout over eight groups: first four groups feed two
    # vertical aggregations (HC tables), last four two horizontal (WC).
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


def builtin_topology(
    name: str, v_f: int = 16, skips: tuple[bool, bool, bool] = (True, True, True)
) -> ModelTopology:
    """Catalog of the shipped variants.

    S: 4 feature channels, two-table query blocks sharing both groups.
    M: 8 channels, two-table query blocks on disjoint group pairs.
    L: 16 channels, four-table query blocks over eight groups.
    1-2 / 1-4: single query block straight to the output stage (8 / 16
    channels), trading depth for size.
    """
    key = _ALIASES.get(name, name)
    out = SCALE**2
    if key == "S":
        blocks = (SpatialBlock(4), _query_block_pair(4, 4), _query_block_pair(4, out))
    elif key == "M":
        blocks = (SpatialBlock(8), _query_block_pair(8, 8), _query_block_pair(8, out))
    elif key == "L":
        blocks = (SpatialBlock(16), _query_block_quad(16), _query_block_quad(out))
    elif key == "1-2":
        blocks = (SpatialBlock(8), _query_block_pair(8, out))
    elif key == "1-4":
        blocks = (SpatialBlock(16), _query_block_quad(out))
    else:
        raise ValueError(f"unknown variant {name!r}")
    topo = ModelTopology(key, blocks[0].out_ch, v_f, SCALE, blocks, tuple(skips))
    validate_topology(topo)
    return topo


BUILTIN_NAMES = ("S", "M", "L", "1-2", "1-4")
