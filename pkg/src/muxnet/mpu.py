"""Two-stage MUX processing unit: bit-exact, cycle-accounted inner products.

Stage 1 selects a static-table line by the weight line index; stage 2
selects one subset sum per activation bit-plane (LSB first), so a 2**n-to-1
selector is all the per-bit datapath needs.  The parallel post-lookup
merging unit (PLMU) shifts each bit-plane partial into place and
accumulates; for two's-complement activations the MSB plane is subtracted.
The result equals the direct multiply-accumulate exactly: no saturation
anywhere, widths are provisioned so overflow cannot occur for in-range
inputs.

Nothing on the value path multiplies: only table gathers, adds, and
shifts.  The vectorized entry points (``batch_inner_product``,
``pe_forward``) run the identical datapath across many cases at once.

Cycle accounting conventions (data-independent by construction):

* one stage-1 selection per weight chunk per task, counting 2**n MUX
  selects and reading n*m bits of weight memory (a decomposed mode selects
  both halves: twice the MUX selects, same total bits);
* one stage-2 selection (1 MUX select) per chunk slot per bit-plane, padded
  slots included;
* a task is one group-vector inner product and occupies one group for
  ``activation_bits`` cycles; concurrent tasks share cycles across
  ``groups`` group units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .errors import AccumulatorOverflow, BadLineIndex, ModeMismatch, ShapeError
from .quantizer import QuantizedWeightVector, activation_range
from .static_table import DecomposedTable, StaticTable, pack_line_index, split_line_index, split_line_index_array

Tables = StaticTable | DecomposedTable


@dataclass(frozen=True)
class MpuConfig:
    """Shape of the processing engine.

    Defaults are the reference configuration: 8 groups of 8-element inner
    products over n=2 chunks, i.e. 32 stage-2 MUXs busy per bit-plane.
    """

    n: int = 2
    m: int = 5
    groups: int = 8
    group_vector_len: int = 8
    activation_bits: int = 8
    activation_signed: bool = False
    accumulator_bits: int | None = None  # None: provisioned exactly (plmu_width_bound)

    def __post_init__(self) -> None:
        if self.n < 1 or self.m < 2:
            raise ValueError(f"need n >= 1 and m >= 2, got n={self.n} m={self.m}")
        if self.group_vector_len % self.n != 0:
            raise ValueError(
                f"group_vector_len {self.group_vector_len} not divisible by n={self.n}"
            )
        if self.groups < 1 or self.activation_bits < 1:
            raise ValueError("groups and activation_bits must be >= 1")

    @property
    def chunks_per_group(self) -> int:
        return self.group_vector_len // self.n

    @property
    def mux_count(self) -> int:
        """Stage-2 MUX instances busy in one fully occupied cycle."""
        return self.groups * self.group_vector_len // self.n

    @property
    def plmu_bits(self) -> int:
        return self.accumulator_bits if self.accumulator_bits is not None else plmu_width_bound(self)


def plmu_width_bound(cfg: MpuConfig) -> int:
    """Accumulator width that can never overflow for in-range inputs."""
    chunk_bits = 0 if cfg.n == 1 else math.ceil(math.log2(cfg.n))
    cpt = cfg.chunks_per_group
    tree_bits = 0 if cpt == 1 else math.ceil(math.log2(cpt))
    return cfg.m + chunk_bits + tree_bits + cfg.activation_bits + 1


@dataclass
class CycleCount:
    """Running cost counters; merged across engine instances by summation."""

    cycles: int = 0
    mux_selects: int = 0
    memory_bits_read: int = 0

    def merge(self, other: "CycleCount") -> "CycleCount":
        self.cycles += other.cycles
        self.mux_selects += other.mux_selects
        self.memory_bits_read += other.memory_bits_read
        return self

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.cycles, self.mux_selects, self.memory_bits_read)


@dataclass
class PlmuState:
    """Per-group accumulators of the post-lookup merging unit."""

    width: int
    accumulators: list[int] = field(default_factory=lambda: [0])
    current_bit: int = 0

    def add(self, group: int, value: int) -> int:
        acc = self.accumulators[group] + value
        limit = 1 << (self.width - 1)
        if not -limit <= acc < limit:
            raise AccumulatorOverflow(
                f"PLMU accumulator {acc} exceeds declared width {self.width}"
            )
        self.accumulators[group] = acc
        return acc


def stage1_select(table: StaticTable, line_index: int, counters: CycleCount | None = None) -> np.ndarray:
    """Select one table line by weight index; one MUX per key column."""
    if not 0 <= line_index < table.line_count:
        raise BadLineIndex(f"line index {line_index} out of [0, {table.line_count})")
    if counters is not None:
        counters.mux_selects += table.entries_per_line
        counters.memory_bits_read += table.n * table.m
    return table.lines[line_index]


def stage2_select(line: np.ndarray, key: int, counters: CycleCount | None = None) -> int:
    """Select one subset sum from a line; the key is masked to n bits."""
    key &= len(line) - 1
    if counters is not None:
        counters.mux_selects += 1
    return int(line[key])


def count_forward(
    counters: CycleCount,
    batch: int,
    outputs: int,
    chunks: int,
    cfg: MpuConfig,
    tables: Tables,
) -> None:
    """Apply the module-level accounting conventions for one forward call."""
    cpt = cfg.chunks_per_group
    tiles = math.ceil(chunks / cpt)
    tasks = batch * outputs * tiles
    components = 2 if isinstance(tables, DecomposedTable) else 1
    counters.cycles += math.ceil(tasks / cfg.groups) * cfg.activation_bits
    counters.mux_selects += tasks * cpt * components * (1 << cfg.n)  # stage-1
    counters.mux_selects += tasks * cpt * components * cfg.activation_bits  # stage-2
    counters.memory_bits_read += batch * outputs * chunks * cfg.n * tables.m


def _check_tables(cfg: MpuConfig, tables: Tables) -> None:
    if tables.n != cfg.n or tables.m != cfg.m:
        raise ModeMismatch(f"tables are (n={tables.n}, m={tables.m}) but config is (n={cfg.n}, m={cfg.m})")


def _select_chunk_lines(
    tables: Tables, line_index: int, counters: CycleCount | None
) -> tuple[np.ndarray, ...]:
    if isinstance(tables, DecomposedTable):
        hi_index, lo_index = split_line_index(line_index, tables.n, tables.m)
        return (
            stage1_select(tables.hi, hi_index, counters),
            stage1_select(tables.lo, lo_index, counters),
        )
    return (stage1_select(tables, line_index, counters),)


def _chunk_entry(tables: Tables, lines: tuple[np.ndarray, ...], key: int, counters: CycleCount | None) -> int:
    if isinstance(tables, DecomposedTable):
        hi_v = stage2_select(lines[0], key, counters)
        lo_v = stage2_select(lines[1], key, counters)
        return (hi_v << tables.shift) + lo_v
    return stage2_select(lines[0], key, counters)


def bitserial_inner_product(
    weights: Sequence[QuantizedWeightVector],
    activations: Sequence[int],
    cfg: MpuConfig,
    tables: Tables,
    counters: CycleCount | None = None,
    trace: IO[str] | None = None,
    group: int = 0,
    start_cycle: int = 0,
) -> int:
    """One group-vector inner product on the scalar (traceable) datapath.

    ``weights`` holds group_vector_len/n weight chunks; the result equals
    sum(code_i * x_i) exactly.  Trace rows are
    ``cycle,group,bitplane,key,selected_entry,accumulator`` with the
    accumulator shown after each chunk's shifted partial is merged.
    """
    _check_tables(cfg, tables)
    cpt = cfg.chunks_per_group
    if len(weights) != cpt:
        raise ShapeError(f"expected {cpt} weight chunks, got {len(weights)}")
    if len(activations) != cfg.group_vector_len:
        raise ShapeError(
            f"expected {cfg.group_vector_len} activations, got {len(activations)}"
        )
    lo, hi = activation_range(cfg.activation_bits, cfg.activation_signed)
    acts = [int(a) for a in activations]
    for a in acts:
        if not lo <= a <= hi:
            raise ValueError(f"activation {a} outside [{lo}, {hi}]")
    for qwv in weights:
        if qwv.n != cfg.n or qwv.m != cfg.m:
            raise ModeMismatch(
                f"weight chunk is (n={qwv.n}, m={qwv.m}) but config is (n={cfg.n}, m={cfg.m})"
            )

    chunk_lines = [
        _select_chunk_lines(tables, pack_line_index(qwv.codes, cfg.m), counters)
        for qwv in weights
    ]
    if counters is not None:
        counters.cycles += cfg.activation_bits

    k = cfg.activation_bits
    bit_fields = [a & ((1 << k) - 1) for a in acts]
    plmu = PlmuState(width=cfg.plmu_bits)
    for b in range(k):
        plane_sum = 0
        for j, lines in enumerate(chunk_lines):
            key = 0
            for i in range(cfg.n):
                key |= ((bit_fields[j * cfg.n + i] >> b) & 1) << i
            entry = _chunk_entry(tables, lines, key, counters)
            plane_sum += entry  # adder tree; integer adds are associative
            if trace is not None:
                partial = plane_sum << b
                shown = plmu.accumulators[0] + (-partial if (cfg.activation_signed and b == k - 1) else partial)
                trace.write(f"{start_cycle + b},{group},{b},{key},{entry},{shown}\n")
        partial = plane_sum << b
        if cfg.activation_signed and b == k - 1:
            partial = -partial  # MSB plane of two's-complement inputs
        plmu.add(0, partial)
        plmu.current_bit = b + 1
    return plmu.accumulators[0]


def _gather_case_entries(tables: Tables, line_indices: np.ndarray, keys: np.ndarray,
                         split: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
    """Elementwise table gather: entry for (line_indices[i], keys[i]) per cell."""
    if isinstance(tables, DecomposedTable):
        if split is None:
            split = split_line_index_array(line_indices, tables.n, tables.m)
        hi_idx, lo_idx = split
        hi = tables.hi.lines[hi_idx, keys].astype(np.int64)
        lo = tables.lo.lines[lo_idx, keys].astype(np.int64)
        return (hi << tables.shift) + lo
    return tables.lines[line_indices, keys].astype(np.int64)


def _plane_keys(ubits: np.ndarray, bit: int, n: int) -> np.ndarray:
    """Keys per chunk from bit-plane ``bit``; ubits shaped (..., chunks, n)."""
    bits = (ubits >> bit) & 1
    weights = (1 << np.arange(n, dtype=np.int64))
    return bits @ weights


def batch_inner_product(
    line_indices: np.ndarray,
    activations: np.ndarray,
    cfg: MpuConfig,
    tables: Tables,
    counters: CycleCount | None = None,
) -> np.ndarray:
    """Case-wise inner products: row i pairs its own chunks with its own inputs.

    line_indices: (cases, chunks) table line indices; activations:
    (cases, chunks*n).  Same datapath as bitserial_inner_product, batched.
    """
    _check_tables(cfg, tables)
    idx = np.asarray(line_indices, dtype=np.int64)
    acts = np.asarray(activations, dtype=np.int64)
    if idx.ndim != 2 or acts.ndim != 2 or acts.shape != (idx.shape[0], idx.shape[1] * cfg.n):
        raise ShapeError(
            f"line_indices {idx.shape} inconsistent with activations {acts.shape} at n={cfg.n}"
        )
    cases, chunks = idx.shape
    split = split_line_index_array(idx, tables.n, tables.m) if isinstance(tables, DecomposedTable) else None
    k = cfg.activation_bits
    ubits = (acts & ((1 << k) - 1)).reshape(cases, chunks, cfg.n)
    acc = np.zeros((cases,), dtype=np.int64)
    for b in range(k):
        keys = _plane_keys(ubits, b, cfg.n)  # (cases, chunks)
        plane = _gather_case_entries(tables, idx, keys, split).sum(axis=1)
        partial = plane << b
        if cfg.activation_signed and b == k - 1:
            acc -= partial
        else:
            acc += partial
    if counters is not None:
        count_forward(counters, batch=cases, outputs=1, chunks=chunks, cfg=cfg, tables=tables)
    return acc


def pe_forward(
    line_indices: np.ndarray,
    activations: np.ndarray,
    cfg: MpuConfig,
    tables: Tables,
    counters: CycleCount | None = None,
    split: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Layer-style forward: every output row sees the same activation vector.

    line_indices: (outputs, chunks); activations: (chunks*n,) or
    (batch, chunks*n).  Returns int64 (outputs,) or (batch, outputs).
    ``split`` optionally carries precomputed hi/lo indices for decomposed
    tables (the compiled-model runner caches them per layer).
    """
    _check_tables(cfg, tables)
    idx = np.asarray(line_indices, dtype=np.int64)
    acts = np.asarray(activations, dtype=np.int64)
    squeeze = acts.ndim == 1
    if squeeze:
        acts = acts[None, :]
    if idx.ndim != 2 or acts.ndim != 2 or acts.shape[1] != idx.shape[1] * cfg.n:
        raise ShapeError(
            f"line_indices {idx.shape} inconsistent with activations {acts.shape} at n={cfg.n}"
        )
    outputs, chunks = idx.shape
    batch = acts.shape[0]
    if isinstance(tables, DecomposedTable) and split is None:
        split = split_line_index_array(idx, tables.n, tables.m)
    k = cfg.activation_bits
    ubits = (acts & ((1 << k) - 1)).reshape(batch, chunks, cfg.n)
    acc = np.zeros((batch, outputs), dtype=np.int64)
    for b in range(k):
        keys = _plane_keys(ubits, b, cfg.n)  # (batch, chunks)
        if isinstance(tables, DecomposedTable):
            hi_idx, lo_idx = split
            hi = tables.hi.lines[hi_idx[None, :, :], keys[:, None, :]].astype(np.int64)
            lo = tables.lo.lines[lo_idx[None, :, :], keys[:, None, :]].astype(np.int64)
            entries = (hi << tables.shift) + lo  # (batch, outputs, chunks)
        else:
            entries = tables.lines[idx[None, :, :], keys[:, None, :]].astype(np.int64)
        plane = entries.sum(axis=2)
        partial = plane << b
        if cfg.activation_signed and b == k - 1:
            acc -= partial
        else:
            acc += partial
    if counters is not None:
        count_forward(counters, batch=batch, outputs=outputs, chunks=chunks, cfg=cfg, tables=tables)
    return acc[0] if squeeze else acc
