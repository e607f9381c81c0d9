"""Streaming-read throughput kernels and the triad benchmark.

Read kernels issue bursts of SIMD loads; the burst depth is fixed per ISA
width (8 x 128-bit, 16 x 256-bit, 32 x 512-bit registers) so the measured
figure is bandwidth-bound rather than dependency-bound.  The triad mode
computes ``a[i] = b[i] + s*c[i]`` over three arrays and counts all three as
moved bytes, with optional non-temporal stores.

The simulated backend prices runs from per-level per-core bytes/cycle tables
plus shared-resource caps (per L3 domain, per memory node/die) carried in
the topology fixture; per-core streams are independent, so aggregate
bandwidth is the capped sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .topology import GraphKind, TopologyGraph

__all__ = [
    "BandwidthError",
    "TriadVerificationError",
    "ThroughputKernel",
    "KERNELS",
    "BandwidthRecord",
    "BandwidthSeries",
    "SimBandwidthBackend",
    "run_throughput",
    "run_triad",
    "scaling_series",
    "verify_triad",
    "bandwidth_dataset_ladder",
    "TRIAD_SCALAR",
]

TRIAD_SCALAR = 3.0
SATURATION_TOLERANCE = 0.05

_BURST_BY_WIDTH = {"w128": 8, "w256": 16, "w512": 32}


class BandwidthError(Exception):
    pass


class TriadVerificationError(BandwidthError):
    def __init__(self, index: int, expected: float, got: float):
        super().__init__(
            f"triad verification failed at index {index}: expected {expected}, got {got}"
        )
        self.index = index


@dataclass(frozen=True)
class ThroughputKernel:
    """One streaming-read kernel configuration."""

    isa_width: str  # w128 | w256 | w512
    burst_registers: int
    access: str = "read"

    def __post_init__(self):
        if self.isa_width not in _BURST_BY_WIDTH:
            raise BandwidthError(f"unknown ISA width {self.isa_width!r}")
        expected = _BURST_BY_WIDTH[self.isa_width]
        if self.burst_registers != expected:
            raise BandwidthError(
                f"{self.isa_width} uses {expected} burst registers, got {self.burst_registers}"
            )
        if self.access != "read":
            raise BandwidthError("throughput kernels are read-only")

    @property
    def width_bits(self) -> int:
        return int(self.isa_width[1:])

    @property
    def bytes_per_iteration(self) -> int:
        return self.width_bits // 8 * self.burst_registers

    @property
    def name(self) -> str:
        return f"read{self.width_bits}"


KERNELS = {
    "read128": ThroughputKernel("w128", 8),
    "read256": ThroughputKernel("w256", 16),
    "read512": ThroughputKernel("w512", 32),
}


@dataclass(frozen=True)
class BandwidthRecord:
    """One throughput result; gbps and bytes/cycle satisfy their defining
    relations against bytes_moved/elapsed exactly."""

    kernel: str
    dataset_bytes: int
    core_set: tuple[int, ...]
    level: str
    bytes_moved: int
    elapsed_cycles: float
    bandwidth_gbps: float
    bytes_per_cycle: float
    frequency_mhz: float
    backend: str
    flags: tuple[str, ...] = ()
    degraded_from: Optional[str] = None

    @classmethod
    def from_raw(
        cls,
        kernel: str,
        dataset_bytes: int,
        core_set,
        level: str,
        bytes_moved: int,
        elapsed_cycles: float,
        frequency_mhz: float,
        backend: str,
        flags=(),
        degraded_from=None,
    ) -> "BandwidthRecord":
        if elapsed_cycles <= 0:
            raise BandwidthError("elapsed cycles must be positive")
        elapsed_seconds = elapsed_cycles / (frequency_mhz * 1e6)
        return cls(
            kernel=kernel,
            dataset_bytes=dataset_bytes,
            core_set=tuple(core_set),
            level=level,
            bytes_moved=bytes_moved,
            elapsed_cycles=elapsed_cycles,
            bandwidth_gbps=bytes_moved / elapsed_seconds / 1e9,
            bytes_per_cycle=bytes_moved / elapsed_cycles,
            frequency_mhz=frequency_mhz,
            backend=backend,
            flags=tuple(flags),
            degraded_from=degraded_from,
        )

    @classmethod
    def from_rate(
        cls,
        kernel: str,
        dataset_bytes: int,
        core_set,
        level: str,
        bandwidth_gbps: float,
        frequency_mhz: float,
        backend: str,
        bytes_moved: Optional[int] = None,
        flags=(),
        degraded_from=None,
    ) -> "BandwidthRecord":
        """Record anchored at an exact aggregate rate (simulated runs)."""
        bytes_moved = bytes_moved if bytes_moved is not None else dataset_bytes * len(tuple(core_set))
        bytes_per_cycle = bandwidth_gbps * 1000.0 / frequency_mhz
        return cls(
            kernel=kernel,
            dataset_bytes=dataset_bytes,
            core_set=tuple(core_set),
            level=level,
            bytes_moved=bytes_moved,
            elapsed_cycles=bytes_moved / bytes_per_cycle,
            bandwidth_gbps=bandwidth_gbps,
            bytes_per_cycle=bytes_per_cycle,
            frequency_mhz=frequency_mhz,
            backend=backend,
            flags=tuple(flags),
            degraded_from=degraded_from,
        )


def verify_triad(
    a: np.ndarray, b: np.ndarray, c: np.ndarray, s: float, sample_fraction: float = 1.0
) -> int:
    """Elementwise check of a = b + s*c; returns number of checked elements.

    Raises :class:`TriadVerificationError` with the first failing index.
    """
    n = len(a)
    if sample_fraction >= 1.0:
        idx = np.arange(n)
    else:
        step = max(1, int(round(1.0 / sample_fraction)))
        idx = np.arange(0, n, step)
    expected = b[idx] + s * c[idx]
    bad = np.nonzero(a[idx] != expected)[0]
    if len(bad):
        i = int(idx[bad[0]])
        raise TriadVerificationError(i, float(b[i] + s * c[i]), float(a[i]))
    return len(idx)


# ---------------------------------------------------------------------------
# Simulated backend


class SimBandwidthBackend:
    """Fixture-table bandwidth: per-core rates with shared caps."""

    name = "simulated"

    def __init__(self, topology: TopologyGraph):
        self.topology = topology
        tables = topology.bandwidth
        if not tables:
            raise BandwidthError(
                f"topology '{topology.name}' carries no bandwidth fixture tables"
            )
        self.tables = tables
        self.frequency_mhz = float(tables["frequency_mhz"])
        self.supported = list(tables.get("supported_kernels", sorted(KERNELS)))

    # -- structure helpers ---------------------------------------------------

    def _cache_bytes(self, key: str) -> int:
        caches = self.topology.caches
        mult = 1024 if key.endswith("kib") else 1024 * 1024
        return int(caches[key] * mult)

    def classify_level(self, dataset_bytes: int, core_set) -> str:
        if dataset_bytes <= self._cache_bytes("l1_kib"):
            return "L1"
        if dataset_bytes <= self._cache_bytes("l2_kib"):
            return "L2"
        # L3 capacity is per domain, shared by the run's cores in that domain.
        domains: dict[str, int] = {}
        for c in core_set:
            d = self.topology.l3_domain_of_core(c)
            domains[d] = domains.get(d, 0) + 1
        share = max(domains.values()) if domains else 1
        if dataset_bytes * share <= self._cache_bytes("l3_mib"):
            return "L3"
        return "RAM"

    def resolve_kernel(self, kernel_name: str) -> tuple[str, Optional[str]]:
        """Widest supported kernel; (actual, degraded_from or None)."""
        if kernel_name in self.supported:
            return kernel_name, None
        order = ["read512", "read256", "read128"]
        if kernel_name not in order:
            raise BandwidthError(f"unknown kernel {kernel_name!r}")
        for cand in order[order.index(kernel_name) + 1 :]:
            if cand in self.supported:
                return cand, kernel_name
        raise BandwidthError(f"no supported kernel at or below {kernel_name}")

    # -- read throughput -------------------------------------------------------

    def read_rate_gbps(self, kernel_name: str, level: str, core_set) -> float:
        per_core_bpc = self.tables["read_b_per_cycle"][level][kernel_name]
        per_core_gbps = per_core_bpc * self.frequency_mhz / 1000.0
        caps = self.tables["shared_caps_gbps"]
        g = self.topology
        if level in ("L1", "L2"):
            return per_core_gbps * len(core_set)
        if level == "L3":
            total = 0.0
            domains: dict[str, int] = {}
            for c in core_set:
                d = g.l3_domain_of_core(c)
                domains[d] = domains.get(d, 0) + 1
            for d, n in sorted(domains.items()):
                total += min(n * per_core_gbps, caps["l3_domain"])
            return total
        # RAM: cap per die (chiplet), then per memory node, then per socket.
        per_node: dict[int, float] = {}
        if g.kind is GraphKind.CHIPLET_IF and "ram_ccd" in caps:
            per_die: dict[tuple, int] = {}
            for c in core_set:
                n = g.core(c)
                per_die[(n.socket, n.numa_node, n.ccd)] = (
                    per_die.get((n.socket, n.numa_node, n.ccd), 0) + 1
                )
            for (sock, node, _ccd), n in sorted(per_die.items()):
                die_bw = min(n * per_core_gbps, caps["ram_ccd"])
                per_node[node] = per_node.get(node, 0.0) + die_bw
        else:
            for c in core_set:
                node = g.node_of_core(c)
                per_node[node] = per_node.get(node, 0.0) + per_core_gbps
        per_socket: dict[int, float] = {}
        for node, bw in sorted(per_node.items()):
            bw = min(bw, caps["ram_node"])
            sock = g.memory_controller(node).socket
            per_socket[sock] = per_socket.get(sock, 0.0) + bw
        return sum(min(bw, caps.get("ram_socket", float("inf"))) for bw in per_socket.values())

    def run_read(self, kernel_name: str, dataset_bytes: int, core_set) -> BandwidthRecord:
        actual, degraded_from = self.resolve_kernel(kernel_name)
        level = self.classify_level(dataset_bytes, core_set)
        gbps = self.read_rate_gbps(actual, level, core_set)
        flags = ("width_degraded",) if degraded_from else ()
        return BandwidthRecord.from_rate(
            kernel=actual,
            dataset_bytes=dataset_bytes,
            core_set=core_set,
            level=level,
            bandwidth_gbps=gbps,
            frequency_mhz=self.frequency_mhz,
            backend=self.name,
            flags=flags,
            degraded_from=degraded_from,
        )

    # -- triad ------------------------------------------------------------------

    def triad_rate_gbps(self, core_set, nontemporal: bool) -> float:
        t = self.tables["triad_gbps"]
        per_core = t["per_core"] * (1.0 if nontemporal else 0.75)
        g = self.topology
        per_node: dict[int, float] = {}
        if g.kind is GraphKind.CHIPLET_IF and "ccd_cap" in t:
            per_die: dict[tuple, int] = {}
            for c in core_set:
                n = g.core(c)
                key = (n.socket, n.numa_node, n.ccd)
                per_die[key] = per_die.get(key, 0) + 1
            for (sock, node, _), n in sorted(per_die.items()):
                per_node[node] = per_node.get(node, 0.0) + min(n * per_core, t["ccd_cap"])
        else:
            for c in core_set:
                node = g.node_of_core(c)
                per_node[node] = per_node.get(node, 0.0) + per_core
        per_socket: dict[int, float] = {}
        for node, bw in sorted(per_node.items()):
            bw = min(bw, t["node_cap"])
            sock = g.memory_controller(node).socket
            per_socket[sock] = per_socket.get(sock, 0.0) + bw
        return sum(min(bw, t.get("socket_cap", float("inf"))) for bw in per_socket.values())

    def run_triad(self, array_bytes: int, core_set, nontemporal: bool) -> BandwidthRecord:
        n = array_bytes // 8
        if n < 1:
            raise BandwidthError("triad arrays need at least one element")
        rng = np.random.default_rng(array_bytes ^ len(tuple(core_set)))
        b = rng.standard_normal(n)
        c = rng.standard_normal(n)
        a = b + TRIAD_SCALAR * c
        verify_triad(a, b, c, TRIAD_SCALAR)
        gbps = self.triad_rate_gbps(core_set, nontemporal)
        return BandwidthRecord.from_rate(
            kernel="triad-nt" if nontemporal else "triad",
            dataset_bytes=array_bytes,
            core_set=core_set,
            level="RAM",
            bandwidth_gbps=gbps,
            frequency_mhz=self.frequency_mhz,
            backend=self.name,
            bytes_moved=3 * array_bytes * len(tuple(core_set)),
        )


# ---------------------------------------------------------------------------
# Operations


def _validate_core_set(topology: TopologyGraph, core_set, allow_cross_socket: bool):
    cores = tuple(core_set)
    if not cores:
        raise BandwidthError("core set must not be empty")
    if len(set(cores)) != len(cores):
        raise BandwidthError("core set has duplicates")
    sockets = {topology.core(c).socket for c in cores}
    if len(sockets) > 1 and not allow_cross_socket:
        raise BandwidthError(
            "core set crossing sockets rejected in single-node mode"
        )
    return cores


def run_throughput(
    kernel: ThroughputKernel | str,
    dataset_bytes: int,
    core_set,
    policy,
    backend,
    allow_cross_socket: bool = False,
) -> BandwidthRecord:
    """One streaming-read throughput point (max-reduced over repeats)."""
    kernel_name = kernel if isinstance(kernel, str) else kernel.name
    if kernel_name not in KERNELS:
        raise BandwidthError(f"unknown kernel {kernel_name!r}")
    if dataset_bytes <= 0:
        raise BandwidthError("dataset must be non-empty")
    cores = _validate_core_set(backend.topology, core_set, allow_cross_socket)
    repeats = max(1, getattr(policy, "outer_repeats", 1))
    best: Optional[BandwidthRecord] = None
    for _ in range(repeats):
        rec = backend.run_read(kernel_name, dataset_bytes, cores)
        if best is None or rec.bandwidth_gbps > best.bandwidth_gbps:
            best = rec
    return best


def run_triad(
    array_bytes: int,
    core_set,
    nontemporal: bool,
    backend,
    allow_cross_socket: bool = True,
) -> BandwidthRecord:
    """STREAM-style triad over three arrays of ``array_bytes`` each."""
    if array_bytes < 8:
        raise BandwidthError("triad arrays need at least one 8-byte element")
    cores = _validate_core_set(backend.topology, core_set, allow_cross_socket)
    return backend.run_triad(array_bytes, cores, nontemporal)


@dataclass(frozen=True)
class BandwidthSeries:
    labels: tuple[str, ...]
    records: tuple[BandwidthRecord, ...]
    saturation_index: int

    @property
    def values_gbps(self) -> tuple[float, ...]:
        return tuple(r.bandwidth_gbps for r in self.records)

    @property
    def saturation_label(self) -> str:
        return self.labels[self.saturation_index]


def scaling_series(
    ladder: Sequence[tuple[str, Sequence[int]]],
    backend,
    kernel: Optional[str] = None,
    dataset_bytes: Optional[int] = None,
    triad_bytes: Optional[int] = None,
    nontemporal: bool = True,
    allow_cross_socket: bool = True,
) -> BandwidthSeries:
    """Bandwidth per ladder rung plus the saturation point.

    The saturation point is the smallest rung within 5% of the series
    maximum.  Rungs are (label, core id list); either a read kernel plus
    dataset size or a triad array size selects the workload.
    """
    if not ladder:
        raise BandwidthError("empty core ladder")
    records = []
    for label, cores in ladder:
        cores = _validate_core_set(backend.topology, cores, allow_cross_socket)
        if triad_bytes is not None:
            records.append(backend.run_triad(triad_bytes, cores, nontemporal))
        else:
            if kernel is None or dataset_bytes is None:
                raise BandwidthError("scaling series needs a kernel and dataset size")
            records.append(backend.run_read(kernel, dataset_bytes, cores))
    peak = max(r.bandwidth_gbps for r in records)
    sat = next(
        i
        for i, r in enumerate(records)
        if r.bandwidth_gbps >= (1.0 - SATURATION_TOLERANCE) * peak
    )
    return BandwidthSeries(
        labels=tuple(l for l, _ in ladder),
        records=tuple(records),
        saturation_index=sat,
    )


def bandwidth_dataset_ladder(topology: TopologyGraph, level: str) -> list[int]:
    """Per-level dataset presets: 1/4x, 1/2x, 1x, 2x of the level capacity."""
    caches = topology.caches
    key = {"L1": "l1_kib", "L2": "l2_kib", "L3": "l3_mib"}.get(level)
    if key is None:
        l3 = int(caches["l3_mib"] * 1024 * 1024)
        return [2 * l3, 4 * l3, 8 * l3, 16 * l3]
    cap = int(caches[key] * (1024 if key.endswith("kib") else 1024 * 1024))
    return [cap // 4, cap // 2, cap, 2 * cap]
