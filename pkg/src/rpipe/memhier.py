"""L1 instruction/data caches and flat main memory.

Both caches are set-associative, LRU-replaced, write-back + write-allocate.
A hit costs the configured hit latency; a miss adds one fixed main-memory
penalty (DRAM bank/burst behavior is collapsed into that single number).
Dirty evictions are counted as writebacks but add no extra latency (the
writeback is treated as buffered).

Cache state lives in plain numpy arrays so the pipeline kernels can operate
on it directly; the `Cache.access` method drives the exact same kernel
routine, so unit tests and the timed engine share one implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels


class MemoryError_(Exception):
    """Out-of-range or misaligned access through the python-side helpers."""


def _is_pow2(v: int) -> bool:
    return v > 0 and (v & (v - 1)) == 0


@dataclass
class CacheConfig:
    size_bytes: int = 512 * 1024
    associativity: int = 2
    line_bytes: int = 64
    hit_latency: int = 2

    def __post_init__(self):
        for name in ("size_bytes", "associativity", "line_bytes"):
            if not _is_pow2(getattr(self, name)):
                raise ValueError("%s must be a power of two" % name)
        if self.size_bytes % (self.associativity * self.line_bytes) != 0:
            raise ValueError("size must divide evenly into ways x lines")
        if not _is_pow2(self.sets):
            raise ValueError("set count must be a power of two")
        if self.hit_latency < 1:
            raise ValueError("hit latency must be >= 1")

    @property
    def sets(self) -> int:
        return self.size_bytes // (self.associativity * self.line_bytes)

    @classmethod
    def from_dict(cls, d: dict) -> "CacheConfig":
        return cls(**d)


@dataclass
class MainMemoryConfig:
    latency_cycles: int = 80
    size_bytes: int = 2 * 1024 ** 3

    def __post_init__(self):
        if self.latency_cycles < 1:
            raise ValueError("memory latency must be >= 1")
        if self.size_bytes < 4096:
            raise ValueError("address space too small")

    @classmethod
    def from_dict(cls, d: dict) -> "MainMemoryConfig":
        return cls(**d)


@dataclass
class CacheStats:
    accesses: int = 0
    hits: int = 0
    misses: int = 0
    writebacks: int = 0

    def as_dict(self) -> dict:
        return {
            "accesses": self.accesses,
            "hits": self.hits,
            "misses": self.misses,
            "writebacks": self.writebacks,
        }


class Cache:
    """One L1 cache instance: tag/LRU/dirty state plus counters."""

    IFETCH = kernels.K_IFETCH
    LOAD = kernels.K_LOAD
    STORE = kernels.K_STORE

    def __init__(self, config: CacheConfig, mem_latency: int):
        self.config = config
        self.mem_latency = int(mem_latency)
        sets, ways = config.sets, config.associativity
        self.tags = np.full((sets, ways), -1, dtype=np.int64)
        self.age = np.zeros((sets, ways), dtype=np.int64)
        self.dirty = np.zeros((sets, ways), dtype=np.uint8)
        self.stats_arr = np.zeros(5, dtype=np.int64)
        line_shift = config.line_bytes.bit_length() - 1
        set_bits = sets.bit_length() - 1
        self.meta = np.array(
            [line_shift, sets - 1, set_bits, config.hit_latency], dtype=np.int64
        )

    def access(self, addr: int, kind: int) -> int:
        """Look up `addr`; updates LRU/stats and returns the access latency."""
        if addr < 0:
            raise MemoryError_("negative address 0x%x" % addr)
        return int(
            kernels.cache_access(
                self.tags, self.age, self.dirty, self.stats_arr, self.meta,
                self.mem_latency, addr, kind,
            )
        )

    def warm(self, addrs) -> None:
        """Pre-touch lines, then discard the warm-up traffic from the stats."""
        for a in addrs:
            self.access(int(a), self.IFETCH)
        self.reset_stats()

    def reset_stats(self) -> None:
        self.stats_arr[: kernels.CS_TICK] = 0

    @property
    def stats(self) -> CacheStats:
        a = self.stats_arr
        return CacheStats(
            accesses=int(a[kernels.CS_ACCESSES]),
            hits=int(a[kernels.CS_HITS]),
            misses=int(a[kernels.CS_MISSES]),
            writebacks=int(a[kernels.CS_WRITEBACKS]),
        )


class Memory:
    """Flat little-endian backing store for one simulation instance.

    The backing array only needs to cover the program image and bound data
    regions; the configured address-space size is an upper bound that loads
    and stores are checked against.
    """

    def __init__(self, backing_bytes: int, config: MainMemoryConfig | None = None):
        self.config = config or MainMemoryConfig()
        if backing_bytes > self.config.size_bytes:
            raise MemoryError_(
                "backing %d exceeds address space %d"
                % (backing_bytes, self.config.size_bytes)
            )
        self.data = np.zeros(int(backing_bytes), dtype=np.uint8)

    def _check(self, addr: int, n: int):
        if n not in (4, 8):
            raise MemoryError_("access width must be 4 or 8, got %d" % n)
        if addr % n != 0:
            raise MemoryError_("misaligned %d-byte access at 0x%x" % (n, addr))
        if addr < 0 or addr + n > self.data.shape[0]:
            raise MemoryError_("address 0x%x out of range" % addr)

    def read_bytes(self, addr: int, n: int) -> bytes:
        self._check(addr, n)
        return self.data[addr : addr + n].tobytes()

    def write_bytes(self, addr: int, blob: bytes) -> None:
        self._check(addr, len(blob))
        self.data[addr : addr + len(blob)] = np.frombuffer(blob, dtype=np.uint8)

    def read_u32(self, addr: int) -> int:
        return int.from_bytes(self.read_bytes(addr, 4), "little")

    def read_u64(self, addr: int) -> int:
        return int.from_bytes(self.read_bytes(addr, 8), "little")

    def write_u32(self, addr: int, value: int) -> None:
        self.write_bytes(addr, (value & 0xFFFFFFFF).to_bytes(4, "little"))

    def write_u64(self, addr: int, value: int) -> None:
        self.write_bytes(addr, (value & (2 ** 64 - 1)).to_bytes(8, "little"))

    def load_blob(self, addr: int, blob: bytes) -> None:
        """Bulk image/data load (no alignment requirement)."""
        if addr < 0 or addr + len(blob) > self.data.shape[0]:
            raise MemoryError_("blob at 0x%x overruns backing store" % addr)
        self.data[addr : addr + len(blob)] = np.frombuffer(blob, dtype=np.uint8)
