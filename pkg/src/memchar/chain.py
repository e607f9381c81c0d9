"""Randomized pointer-chase buffers for the latency kernel.

A chain is a permutation of aligned element slots forming exactly one cycle;
the latency kernel walks it with dependent loads so no two accesses overlap
and hardware prefetchers see no usable pattern.

Construction is Sattolo's algorithm (single cycle by construction, no
rejection sampling) driven by a fixed 64-bit xorshift generator:

    s ^= s << 13;  s ^= s >> 7;  s ^= s << 17      (mod 2**64)

whose state is seeded through one splitmix64 scramble of the user seed:

    z = (seed + 0x9E3779B97F4A7C15) mod 2**64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2**64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2**64
    state = z ^ (z >> 31)

Both formulas are pinned so chains are reproducible across implementations
and languages for equal (size, alignment, seed).
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass, field
from typing import Optional

__all__ = [
    "ChainBuffer",
    "ChainError",
    "ChainReport",
    "Xorshift64",
    "generate_chain",
    "verify_chain",
]

_MASK64 = (1 << 64) - 1
# xorshift state must be nonzero; the one seed mapping to zero is remapped.
_ZERO_SEED_SUBST = 0x9E3779B97F4A7C15


class ChainError(Exception):
    pass


def _splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class Xorshift64:
    """The fixed shift-register generator used for chain construction."""

    def __init__(self, seed: int):
        self.state = _splitmix64(seed & _MASK64) or _ZERO_SEED_SUBST

    def next(self) -> int:
        s = self.state
        s = (s ^ (s << 13)) & _MASK64
        s ^= s >> 7
        s = (s ^ (s << 17)) & _MASK64
        self.state = s
        return s

    def below(self, bound: int) -> int:
        return self.next() % bound


@dataclass(frozen=True)
class ChainBuffer:
    """A generated chain: successor table plus the allocation parameters.

    ``successors[i]`` is the element index the i-th element points at; byte
    offsets are ``index * stride_alignment``.  ``region`` is an opaque handle
    to backing memory when a native backend materialized the chain, else
    None (the simulated backend never allocates).
    """

    element_count: int
    stride_alignment: int
    total_bytes: int
    seed: int
    huge_pages: bool
    successors: array
    region: Optional[object] = field(default=None, compare=False)

    def offset_of(self, index: int) -> int:
        return index * self.stride_alignment

    def successor_bytes(self) -> bytes:
        """Byte-exact image of the successor table (determinism checks)."""
        return self.successors.tobytes()

    def dump_offsets(self) -> str:
        """Chain order as a text offset list, for debugging."""
        lines = []
        idx = 0
        for _ in range(self.element_count):
            lines.append(str(self.offset_of(idx)))
            idx = self.successors[idx]
        return "\n".join(lines)


def _validate_params(total_bytes: int, stride_alignment: int) -> int:
    if stride_alignment < 64 or stride_alignment & (stride_alignment - 1):
        raise ChainError(
            f"stride_alignment must be a power of two >= 64, got {stride_alignment}"
        )
    if total_bytes < stride_alignment:
        raise ChainError(
            f"total_bytes ({total_bytes}) must be >= stride_alignment ({stride_alignment})"
        )
    if total_bytes % stride_alignment:
        raise ChainError(
            f"total_bytes ({total_bytes}) must be a multiple of the alignment"
        )
    return total_bytes // stride_alignment


def generate_chain(
    total_bytes: int,
    stride_alignment: int = 512,
    seed: int = 0,
    huge_pages: bool = True,
) -> ChainBuffer:
    """Build a single-cycle chain over ``total_bytes / stride_alignment`` slots.

    Identical (total_bytes, stride_alignment, seed) inputs produce byte
    identical successor tables.
    """
    n = _validate_params(total_bytes, stride_alignment)
    perm = list(range(n))
    if n > 1:
        # Inlined Xorshift64.next(); this loop dominates generation time.
        s = Xorshift64(seed).state
        mask = _MASK64
        i = n - 1
        while i > 0:
            s = (s ^ (s << 13)) & mask
            s ^= s >> 7
            s = (s ^ (s << 17)) & mask
            j = s % i
            perm[i], perm[j] = perm[j], perm[i]
            i -= 1
    succ = array("q", perm)
    return ChainBuffer(
        element_count=n,
        stride_alignment=stride_alignment,
        total_bytes=total_bytes,
        seed=seed,
        huge_pages=huge_pages,
        successors=succ,
    )


@dataclass(frozen=True)
class ChainReport:
    """Validation result for a chain buffer."""

    element_count: int
    cycle_length: int
    first_revisit_index: int
    alignment_violations: int

    @property
    def ok(self) -> bool:
        return (
            self.cycle_length == self.element_count
            and self.first_revisit_index == self.element_count
            and self.alignment_violations == 0
        )


def verify_chain(buffer: ChainBuffer) -> ChainReport:
    """Traverse the successor table and report its cycle structure.

    A valid chain first revisits an element exactly at step ``element_count``
    (landing back on the start) having touched every element once.  The check
    is a plain walk, independent of how the chain was built.
    """
    n = buffer.element_count
    succ = buffer.successors
    violations = sum(1 for s in succ if not 0 <= s < n)
    if violations:
        return ChainReport(n, 0, 0, violations)
    # first_seen[e] = walk step at which element e was first reached, -1 if
    # never.  A revisit must occur within n steps (pigeonhole).
    first_seen = array("q", [-1]) * n
    first_seen[0] = 0
    idx = 0
    step = 0
    while True:
        idx = succ[idx]
        step += 1
        if first_seen[idx] >= 0:
            return ChainReport(
                element_count=n,
                cycle_length=step - first_seen[idx],
                first_revisit_index=step,
                alignment_violations=0,
            )
        first_seen[idx] = step
