"""Latency measurement harness.

The measurement protocol, independent of backend:

1. pin requester / owner (/ helper) workers per the placement,
2. flush the requester's cache path,
3. drive the line into the requested coherence state with a script,
4. time serialized pointer chases over the chain,
5. subtract the calibrated timing overhead and reduce the sample matrix.

A reported point aggregates ``outer_repeats x sizes_per_level x
inner_repeats`` samples (default 10x4x3 = 120); the default reducer is the
minimum, with median recommended for noisy remote-L1 configurations.

Backends supply raw timings; the overhead/normalization algebra lives here
so the same arithmetic applies to native, synthetic, and simulated runs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .chain import ChainBuffer
from .coherence import CoherenceScript, Protocol
from .topology import GraphKind, Placement, TopologyGraph

__all__ = [
    "LEVELS",
    "HarnessError",
    "AggregationError",
    "PolicyError",
    "MeasurementPolicy",
    "SampleStats",
    "TimerSample",
    "ChaseTiming",
    "MeasurementRecord",
    "FlushPlan",
    "aggregate",
    "calibrate_overhead",
    "cycles_to_ns",
    "flush_plan",
    "measure_latency",
    "level_dataset_bytes",
    "auto_helper",
    "policy_from_env",
]

LEVELS = ("L1", "L2", "L3", "RAM")

ENV_ALIGNMENT = "MEMCHAR_ALIGNMENT"
ENV_HUGEPAGES = "MEMCHAR_HUGEPAGES"
ENV_FLUSH = {"L1": "MEMCHAR_FLUSH_L1", "L2": "MEMCHAR_FLUSH_L2", "L3": "MEMCHAR_FLUSH_L3"}


class HarnessError(Exception):
    pass


class AggregationError(HarnessError):
    pass


class PolicyError(HarnessError):
    pass


@dataclass(frozen=True)
class MeasurementPolicy:
    """Sampling shape and reduction for one reported point."""

    inner_repeats: int = 3
    outer_repeats: int = 10
    sizes_per_level: int = 4
    reducer: str = "min"
    warmup: bool = True
    flush_levels: frozenset = frozenset({"L1", "L2", "L3"})
    calibration_repeats: int = 10

    def __post_init__(self):
        if min(self.inner_repeats, self.outer_repeats, self.sizes_per_level) < 1:
            raise PolicyError("policy repeat counts must be positive")
        if self.reducer not in ("min", "max", "median"):
            raise PolicyError(f"unknown reducer {self.reducer!r}")
        if not self.flush_levels <= {"L1", "L2", "L3"}:
            raise PolicyError(f"flush_levels must be within L1/L2/L3")

    @property
    def total_samples(self) -> int:
        return self.outer_repeats * self.sizes_per_level * self.inner_repeats


def policy_from_env(**overrides) -> tuple[MeasurementPolicy, int, bool]:
    """(policy, alignment, huge_pages) honoring the MEMCHAR_* variables."""
    alignment = int(os.environ.get(ENV_ALIGNMENT, "512"))
    huge = os.environ.get(ENV_HUGEPAGES, "1") not in ("0", "off", "false")
    flush = frozenset(
        lv for lv, var in ENV_FLUSH.items() if os.environ.get(var, "1") not in ("0",)
    )
    policy = MeasurementPolicy(flush_levels=flush, **overrides)
    return policy, alignment, huge


@dataclass(frozen=True)
class TimerSample:
    """One serialized timestamp pair from a backend timer."""

    start_tsc: int
    end_tsc: int
    serialized: bool = True

    def __post_init__(self):
        if self.end_tsc < self.start_tsc:
            raise HarnessError(
                f"timer not monotonic: end {self.end_tsc} < start {self.start_tsc}"
            )

    @property
    def elapsed(self) -> int:
        return self.end_tsc - self.start_tsc


@dataclass(frozen=True)
class ChaseTiming:
    """Raw timing of one chase: elapsed cycles over `accesses` loads."""

    elapsed_cycles: float
    accesses: int


@dataclass(frozen=True)
class SampleStats:
    minimum: float
    maximum: float
    median: float
    count: int


def _median_lower(sorted_vals: Sequence[float]) -> float:
    # Lower-of-two-middles for even counts.
    return sorted_vals[(len(sorted_vals) - 1) // 2]


def aggregate(samples, policy: MeasurementPolicy) -> SampleStats:
    """Reduce an (outer x sizes x inner) sample matrix.

    The min/max/median statistics are global over all samples; shapes that
    disagree with the policy are rejected.
    """
    flat: list[float] = []
    if not samples:
        raise AggregationError("empty sample set")
    if len(samples) != policy.outer_repeats:
        raise AggregationError(
            f"outer dimension {len(samples)} != policy outer_repeats {policy.outer_repeats}"
        )
    for outer in samples:
        if len(outer) != policy.sizes_per_level:
            raise AggregationError(
                f"sizes dimension {len(outer)} != policy sizes_per_level {policy.sizes_per_level}"
            )
        for inner in outer:
            if len(inner) != policy.inner_repeats:
                raise AggregationError(
                    f"inner dimension {len(inner)} != policy inner_repeats {policy.inner_repeats}"
                )
            flat.extend(inner)
    if not flat:
        raise AggregationError("empty sample set")
    ordered = sorted(flat)
    return SampleStats(
        minimum=ordered[0],
        maximum=ordered[-1],
        median=_median_lower(ordered),
        count=len(ordered),
    )


def reduce_samples(stats: SampleStats, reducer: str) -> float:
    return {"min": stats.minimum, "max": stats.maximum, "median": stats.median}[reducer]


def cycles_to_ns(cycles: float, frequency_mhz: float) -> float:
    """Exact unit relation: ns = cycles * 1000 / MHz."""
    if frequency_mhz <= 0:
        raise HarnessError(f"frequency must be positive, got {frequency_mhz}")
    return cycles * 1000.0 / frequency_mhz


@dataclass(frozen=True)
class MeasurementRecord:
    """One reported latency point with its full sample set and environment."""

    placement: Placement
    state: str
    level: str
    dataset_bytes: int
    dataset_sizes: tuple[int, ...]
    latency_cycles: float  # policy-reduced value
    min_cycles: float
    max_cycles: float
    median_cycles: float
    samples: tuple[float, ...]
    frequency_mhz: float
    backend: str
    alignment: int
    huge_pages: bool
    seed: int
    overhead_cycles: float
    reducer: str

    def __post_init__(self):
        if self.latency_cycles < 0:
            raise HarnessError("latency must be non-negative after overhead subtraction")

    @property
    def latency_ns(self) -> float:
        return cycles_to_ns(self.latency_cycles, self.frequency_mhz)


def calibrate_overhead(backend, repeats: int = 10) -> float:
    """Minimum over `repeats` runs of the timing routine with no accesses."""
    if repeats < 1:
        raise HarnessError("calibration needs at least one repeat")
    return min(backend.time_empty() for _ in range(repeats))


def _validate_placement(placement: Placement, script: CoherenceScript) -> None:
    if script.owner != placement.owner:
        raise HarnessError(
            f"script targets core {script.owner}, placement owner is {placement.owner}"
        )
    helper = script.helper
    if helper is not None and helper == placement.owner:
        raise HarnessError("helper must be a third core, distinct from the owner")
    # requester == owner is the local case (matrix diagonals included).


def measure_latency(
    chain: Union[ChainBuffer, Sequence[ChainBuffer]],
    script: CoherenceScript,
    placement: Placement,
    policy: MeasurementPolicy,
    backend,
) -> MeasurementRecord:
    """Timed pointer chase for one placement/state/level point.

    ``chain`` is one buffer or one buffer per dataset size (the policy's
    ``sizes_per_level`` must match).  Latency per access is
    ``(elapsed - overhead) / element_count`` with the overhead taken as the
    calibrated minimum; reduction follows the policy.
    """
    chains = (chain,) if isinstance(chain, ChainBuffer) else tuple(chain)
    if len(chains) != policy.sizes_per_level:
        raise PolicyError(
            f"{len(chains)} chains given, policy expects sizes_per_level="
            f"{policy.sizes_per_level}"
        )
    alignments = {c.stride_alignment for c in chains}
    seeds = {c.seed for c in chains}
    if len(alignments) != 1 or len(seeds) != 1:
        raise HarnessError("all chains of a point must share alignment and seed")
    _validate_placement(placement, script)

    overhead = calibrate_overhead(backend, policy.calibration_repeats)
    raw = backend.run_point(chains, script, placement, policy)

    samples_matrix: list[list[list[float]]] = []
    for outer in raw:
        outer_row = []
        for per_size in outer:
            inner_row = []
            for timing in per_size:
                per_access = max(0.0, timing.elapsed_cycles - overhead) / timing.accesses
                inner_row.append(per_access)
            outer_row.append(inner_row)
        samples_matrix.append(outer_row)

    stats = aggregate(samples_matrix, policy)
    flat = tuple(v for outer in samples_matrix for row in outer for v in row)
    return MeasurementRecord(
        placement=placement,
        state=script.target_state.value,
        level=script.target_level,
        dataset_bytes=max(c.total_bytes for c in chains),
        dataset_sizes=tuple(c.total_bytes for c in chains),
        latency_cycles=reduce_samples(stats, policy.reducer),
        min_cycles=stats.minimum,
        max_cycles=stats.maximum,
        median_cycles=stats.median,
        samples=flat,
        frequency_mhz=backend.frequency_mhz,
        backend=backend.name,
        alignment=chains[0].stride_alignment,
        huge_pages=all(c.huge_pages for c in chains),
        seed=chains[0].seed,
        overhead_cycles=overhead,
        reducer=policy.reducer,
    )


# ---------------------------------------------------------------------------
# Cache flushing


@dataclass(frozen=True)
class FlushPlan:
    """Scratch-traversal plan that displaces the targeted cache levels.

    Touching a scratch region at least twice the summed capacities along the
    requester's cache path evicts prior content; the inclusive L2 takes L1
    content with it, and filling L2 spills the victims into L3.
    """

    levels: frozenset
    scratch_bytes: int
    stride: int
    implied_levels: frozenset

    @property
    def actions(self) -> tuple:
        if not self.levels:
            return ()
        return (("touch_scratch", self.scratch_bytes, self.stride),)


def flush_plan(topology: TopologyGraph, levels) -> FlushPlan:
    levels = frozenset(levels)
    if not levels <= {"L1", "L2", "L3"}:
        raise HarnessError(f"flush levels must be within L1/L2/L3, got {sorted(levels)}")
    if not levels:
        return FlushPlan(levels, 0, 64, frozenset())
    caches = topology.caches
    needed = {"L1": "l1_kib", "L2": "l2_kib", "L3": "l3_mib"}
    total = 0
    for lv in sorted(levels):
        key = needed[lv]
        if key not in caches:
            raise HarnessError(f"topology lacks cache size {key} needed to flush {lv}")
        size = caches[key] * (1024 if key.endswith("kib") else 1024 * 1024)
        total += int(size)
    implied = set(levels)
    if "L2" in levels:
        implied.add("L1")  # inclusive L2: evicting L2 evicts L1 content
    if "L2" in levels:
        implied.add("L3")  # filling L2 spills victims into the victim L3
    return FlushPlan(
        levels=levels,
        scratch_bytes=2 * total,
        stride=64,
        implied_levels=frozenset(implied),
    )


# ---------------------------------------------------------------------------
# Dataset ladders and helpers


_LEVEL_FRACTIONS = (8, 4, 2, 1)  # capacity / fraction, smallest first
_RAM_MULTIPLES = (2, 4, 8, 16)  # multiples of the L3 domain size


def level_dataset_bytes(topology: TopologyGraph, level: str, count: int = 4) -> list[int]:
    """Power-of-two dataset ladder targeting one memory level."""
    caches = topology.caches
    if level not in LEVELS:
        raise HarnessError(f"unknown level {level!r}")
    if level == "RAM":
        l3 = int(caches["l3_mib"] * 1024 * 1024)
        sizes = [m * l3 for m in _RAM_MULTIPLES]
    else:
        key = {"L1": "l1_kib", "L2": "l2_kib", "L3": "l3_mib"}[level]
        cap = caches[key] * (1024 if key.endswith("kib") else 1024 * 1024)
        sizes = [int(cap) // f for f in _LEVEL_FRACTIONS]
    return sizes[-count:] if count <= len(sizes) else sizes


def auto_helper(graph: TopologyGraph, owner: int, requester: int) -> int:
    """Helper-core policy: a sibling in the owner's L3 domain, else any
    other core; required by shared-class state preparation."""
    for c in graph.cores_of_ccx(owner):
        if c not in (owner, requester):
            return c
    for c in graph.cores:
        if c not in (owner, requester):
            return c
    raise HarnessError("no third core available for helper")


def legal_states(protocol: Protocol) -> tuple:
    return tuple(s for s in protocol.states)
