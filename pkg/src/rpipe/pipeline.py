"""The 5-stage timed engine and the untimed functional executor.

`run` drives the cycle-accurate kernel; `exec_functional` drives the
instruction-at-a-time oracle.  Both operate on the same predecoded program
arrays and byte-addressed memory, and must produce bit-identical
architectural results -- only the statistics differ.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .asm import ProgramImage
from .isa import (
    IllegalInstructionError,
    Mnemonic,
    RoundingMode,
    decode,
)
from .memhier import Cache, CacheConfig, CacheStats, MainMemoryConfig, Memory

DEFAULT_MAX_CYCLES = 2_000_000_000


class SimulationError(Exception):
    """Fatal trap or runaway program."""


@dataclass
class SimConfig:
    l1i: CacheConfig = field(default_factory=CacheConfig)
    l1d: CacheConfig = field(default_factory=CacheConfig)
    memory: MainMemoryConfig = field(default_factory=MainMemoryConfig)
    max_cycles: int = DEFAULT_MAX_CYCLES
    warm_icache: bool = False
    warm_dcache: bool = False
    trace_cycles: int = 0  # >0: record that many leading cycles


@dataclass
class MachineState:
    """Architectural state: registers, frm CSR, APR, memory image, PC."""

    pc: int = 0
    xregs: np.ndarray = field(default_factory=lambda: np.zeros(32, dtype=np.int64))
    fregs: np.ndarray = field(default_factory=lambda: np.zeros(32, dtype=np.float32))
    frm: int = int(RoundingMode.RNE)
    apr: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=np.float32))
    memory: np.ndarray | None = None
    halted: bool = False

    @property
    def fregs_bits(self) -> np.ndarray:
        return self.fregs.view(np.uint32)

    @property
    def apr_bits(self) -> int:
        return int(self.apr.view(np.uint32)[0])

    def copy_registers_from(self, other: "MachineState") -> None:
        self.xregs[:] = other.xregs
        self.fregs[:] = other.fregs
        self.apr[:] = other.apr
        self.frm = other.frm


def states_equal(a: MachineState, b: MachineState) -> bool:
    """Bit-exact architectural equality (registers, APR, frm, PC, memory)."""
    if a.pc != b.pc or a.frm != b.frm:
        return False
    if not np.array_equal(a.xregs, b.xregs):
        return False
    if not np.array_equal(a.fregs_bits, b.fregs_bits):
        return False
    if a.apr_bits != b.apr_bits:
        return False
    if (a.memory is None) != (b.memory is None):
        return False
    if a.memory is not None and not np.array_equal(a.memory, b.memory):
        return False
    return True


@dataclass
class RunStats:
    cycles: int = 0
    retired: int = 0
    mem_type_retired: int = 0
    stalls_load_use: int = 0
    stalls_apr_interlock: int = 0
    stalls_cache: int = 0
    flushes_branch: int = 0
    per_mnemonic: dict = field(default_factory=dict)
    l1i: CacheStats = field(default_factory=CacheStats)
    l1d: CacheStats = field(default_factory=CacheStats)
    trace: list | None = None
    trace_raw: np.ndarray | None = None

    @property
    def ipc(self) -> float:
        return self.retired / self.cycles if self.cycles else 0.0

    @property
    def l1_overall_accesses(self) -> int:
        return self.l1i.accesses + self.l1d.accesses

    def as_dict(self) -> dict:
        return {
            "cycles": self.cycles,
            "retired": self.retired,
            "ipc": self.ipc,
            "mem_type_retired": self.mem_type_retired,
            "stalls_load_use": self.stalls_load_use,
            "stalls_apr_interlock": self.stalls_apr_interlock,
            "stalls_cache": self.stalls_cache,
            "flushes_branch": self.flushes_branch,
            "per_mnemonic": dict(self.per_mnemonic),
            "l1i": self.l1i.as_dict(),
            "l1d": self.l1d.as_dict(),
            "l1_overall_accesses": self.l1_overall_accesses,
        }


@dataclass
class FunctionalStats:
    retired: int = 0
    mem_type_retired: int = 0
    per_mnemonic: dict = field(default_factory=dict)


_STATUS_MESSAGES = {
    kernels.ST_MAX_CYCLES: "max cycles exceeded (runaway program?)",
    kernels.ST_ILLEGAL: "illegal instruction",
    kernels.ST_MISALIGNED: "misaligned data access",
    kernels.ST_OOB: "data address out of range",
}


def predecode(image: ProgramImage):
    """Decode the whole image into structure-of-arrays for the kernels.

    Undecodable words are marked OP_ILLEGAL rather than raised here: they
    only trap if the pipeline actually retires one.  The result is cached
    on the image (benchmark suites rerun identical images many times).
    """
    cached = getattr(image, "_predecoded", None)
    if cached is not None:
        return cached
    n = len(image.words)
    p_op = np.full(n, kernels.OP_ILLEGAL, dtype=np.int64)
    p_rd = np.zeros(n, dtype=np.int64)
    p_rs1 = np.zeros(n, dtype=np.int64)
    p_rs2 = np.zeros(n, dtype=np.int64)
    p_imm = np.zeros(n, dtype=np.int64)
    for i, w in enumerate(image.words):
        try:
            di = decode(w)
        except IllegalInstructionError:
            continue
        p_op[i] = int(di.mnemonic)
        p_rd[i] = di.rd
        p_rs1[i] = di.rs1
        p_rs2[i] = di.rs2
        p_imm[i] = di.imm
    arrays = (p_op, p_rd, p_rs1, p_rs2, p_imm)
    image._predecoded = arrays
    return arrays


def build_memory(
    image: ProgramImage,
    data: list[tuple[int, bytes]] | None = None,
    config: MainMemoryConfig | None = None,
    pad: int = 4096,
) -> Memory:
    """Allocate a backing store covering the image and all data segments."""
    end = image.end
    for addr, blob in data or []:
        end = max(end, addr + len(blob))
    mem = Memory(end + pad, config)
    mem.load_blob(image.base, image.to_bytes()[16:])
    for addr, blob in data or []:
        mem.load_blob(addr, blob)
    return mem


def _mnemonic_counts(counters: np.ndarray) -> dict:
    out = {}
    for m in Mnemonic:
        c = int(counters[kernels.C_MNEM_BASE + int(m)])
        if c:
            out[m.text] = c
    return out


_STALL_NAMES = {
    kernels.STALL_NONE: "-",
    kernels.STALL_LOAD_USE: "load-use",
    kernels.STALL_APR: "apr",
    kernels.STALL_DCACHE: "dcache",
    kernels.STALL_ICACHE: "icache",
    kernels.STALL_FLUSH: "flush",
}


def render_trace(trace: np.ndarray, rows: int) -> list[str]:
    """Format trace rows: cycle, per-stage occupancy, stall cause, APR hex."""

    def opname(v):
        if v == kernels.TR_NONE:
            return "."
        if v == kernels.OP_ILLEGAL:
            return "<illegal>"
        return Mnemonic(v).text

    lines = []
    for r in range(rows):
        cyc, ifpc, ido, exo, memo, wbo, stall, aprbits = (int(v) for v in trace[r])
        ifs = "0x%x" % ifpc if ifpc != kernels.TR_NONE else "."
        lines.append(
            "cycle %6d  IF=%-10s ID=%-10s EX=%-10s MEM=%-10s WB=%-10s stall=%-8s apr=0x%08X"
            % (cyc, ifs, opname(ido), opname(exo), opname(memo), opname(wbo),
               _STALL_NAMES.get(stall, "?"), aprbits)
        )
    return lines


class _Session:
    """Shared setup between the timed and functional entry points."""

    def __init__(self, image, data, config, init_state):
        self.config = config or SimConfig()
        self.image = image
        self.arrays = predecode(image)
        self.memory = build_memory(image, data, self.config.memory)
        self.x = np.zeros(32, dtype=np.int64)
        self.f = np.zeros(32, dtype=np.float32)
        self.apr = np.zeros(1, dtype=np.float32)
        self.frm = int(RoundingMode.RNE)
        if init_state is not None:
            self.x[:] = init_state.xregs
            self.f[:] = init_state.fregs
            self.apr[:] = init_state.apr
            self.frm = init_state.frm
            self.x[0] = 0
        self.scr_f = np.zeros(1, dtype=np.float32)
        self.scr_u = self.scr_f.view(np.uint32)
        self.counters = np.zeros(kernels.NUM_COUNTERS, dtype=np.int64)
        self.pc_out = np.zeros(1, dtype=np.int64)

    def final_state(self) -> MachineState:
        return MachineState(
            pc=int(self.pc_out[0]),
            xregs=self.x,
            fregs=self.f,
            frm=self.frm,
            apr=self.apr,
            memory=self.memory.data,
            halted=True,
        )


def run(
    image: ProgramImage,
    data: list[tuple[int, bytes]] | None = None,
    config: SimConfig | None = None,
    init_state: MachineState | None = None,
) -> tuple[MachineState, RunStats]:
    """Run the timed 5-stage pipeline until ebreak retires.

    Raises SimulationError on fatal traps or when max_cycles is exceeded.
    """
    s = _Session(image, data, config, init_state)
    cfg = s.config
    l1i = Cache(cfg.l1i, cfg.memory.latency_cycles)
    l1d = Cache(cfg.l1d, cfg.memory.latency_cycles)
    if cfg.warm_icache:
        step = cfg.l1i.line_bytes
        l1i.warm(range(image.base, image.end, step))
    if cfg.warm_dcache and data:
        step = cfg.l1d.line_bytes
        for addr, blob in data:
            for a in range(addr - addr % step, addr + len(blob), step):
                l1d.access(a, Cache.LOAD)
        l1d.reset_stats()

    trace_cap = int(cfg.trace_cycles)
    trace = np.zeros((max(trace_cap, 1), kernels.TRACE_COLS), dtype=np.int64)

    p_op, p_rd, p_rs1, p_rs2, p_imm = s.arrays
    status = kernels.run_timed(
        p_op, p_rd, p_rs1, p_rs2, p_imm,
        np.int64(image.base), np.int64(len(image.words)),
        s.x, s.f, s.apr, s.memory.data, s.scr_f, s.scr_u,
        l1i.tags, l1i.age, l1i.dirty, l1i.stats_arr, l1i.meta,
        l1d.tags, l1d.age, l1d.dirty, l1d.stats_arr, l1d.meta,
        np.int64(cfg.memory.latency_cycles),
        s.counters, s.pc_out, np.int64(cfg.max_cycles),
        trace, np.int64(trace_cap),
    )
    if status != kernels.ST_HALT:
        raise SimulationError(
            "%s at pc=0x%x" % (_STATUS_MESSAGES[status], int(s.pc_out[0]))
        )
    c = s.counters
    stats = RunStats(
        cycles=int(c[kernels.C_CYCLES]),
        retired=int(c[kernels.C_RETIRED]),
        mem_type_retired=int(c[kernels.C_MEMTYPE]),
        stalls_load_use=int(c[kernels.C_STALL_LOAD_USE]),
        stalls_apr_interlock=int(c[kernels.C_STALL_APR]),
        stalls_cache=int(c[kernels.C_STALL_CACHE]),
        flushes_branch=int(c[kernels.C_FLUSH_BRANCH]),
        per_mnemonic=_mnemonic_counts(c),
        l1i=l1i.stats,
        l1d=l1d.stats,
    )
    if trace_cap > 0:
        stats.trace = render_trace(trace, min(stats.cycles, trace_cap))
        stats.trace_raw = trace[: min(stats.cycles, trace_cap)].copy()
    return s.final_state(), stats


def exec_functional(
    image: ProgramImage,
    data: list[tuple[int, bytes]] | None = None,
    config: SimConfig | None = None,
    init_state: MachineState | None = None,
    max_instructions: int | None = None,
) -> tuple[MachineState, FunctionalStats]:
    """Untimed architectural execution; bit-identical outcome to run()."""
    s = _Session(image, data, config, init_state)
    limit = max_instructions or s.config.max_cycles
    p_op, p_rd, p_rs1, p_rs2, p_imm = s.arrays
    status = kernels.run_functional(
        p_op, p_rd, p_rs1, p_rs2, p_imm,
        np.int64(image.base), np.int64(len(image.words)),
        s.x, s.f, s.apr, s.memory.data, s.scr_f, s.scr_u,
        s.counters, s.pc_out, np.int64(limit),
    )
    if status != kernels.ST_HALT:
        raise SimulationError(
            "%s at pc=0x%x" % (_STATUS_MESSAGES[status], int(s.pc_out[0]))
        )
    stats = FunctionalStats(
        retired=int(s.counters[kernels.C_RETIRED]),
        mem_type_retired=int(s.counters[kernels.C_MEMTYPE]),
        per_mnemonic=_mnemonic_counts(s.counters),
    )
    return s.final_state(), stats
