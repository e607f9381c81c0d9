"""Measurement backends.

Every backend exposes the same narrow surface the harness drives:

* ``name`` and ``frequency_mhz``
* ``time_empty()`` -- one run of the timing routine with zero accesses
* ``run_point(chains, script, placement, policy)`` -- raw
  :class:`~memchar.harness.ChaseTiming` grid shaped (outer, sizes, inner)

The simulated backend replays the coherence script on the protocol
simulator, checks the resulting state and data source against the latency
model's expectation, and synthesizes exact timings from ``model.predict``.
The synthetic backend charges a configurable cost per access plus a timer
overhead, for algebra-oracle tests.  The native backend lives in
:mod:`memchar.native`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .chain import ChainBuffer
from .coherence import (
    Action,
    CacheEvent,
    CoherenceScript,
    CoherenceState,
    ProtocolModel,
    apply_event,
    simulate,
    verify_script,
)
from .harness import ChaseTiming, MeasurementPolicy
from .model import LatencyModel
from .topology import Placement

__all__ = [
    "BackendError",
    "ScriptPlacementError",
    "SyntheticBackend",
    "SimulatedBackend",
]


class BackendError(Exception):
    pass


class ScriptPlacementError(BackendError):
    """The script does not produce the state the placement was asked for."""


class SyntheticBackend:
    """Deterministic fake clock: `overhead + cost_per_access * n` per chase.

    ``jitter`` (optional callable sample_index -> extra cycles) models noise
    for fuzzing the overhead-subtraction algebra.
    """

    name = "synthetic"

    def __init__(
        self,
        cost_per_access: float = 10.0,
        timer_overhead: float = 0.0,
        frequency_mhz: float = 1000.0,
        jitter=None,
    ):
        self.cost_per_access = cost_per_access
        self.timer_overhead = timer_overhead
        self.frequency_mhz = frequency_mhz
        self.jitter = jitter
        self._sample_idx = 0

    def time_empty(self) -> float:
        return self.timer_overhead

    def run_point(self, chains, script, placement, policy: MeasurementPolicy):
        grid = []
        for _ in range(policy.outer_repeats):
            outer = []
            for chain in chains:
                inner = []
                for _ in range(policy.inner_repeats):
                    extra = self.jitter(self._sample_idx) if self.jitter else 0.0
                    self._sample_idx += 1
                    n = chain.element_count
                    inner.append(
                        ChaseTiming(
                            elapsed_cycles=self.timer_overhead
                            + self.cost_per_access * n
                            + extra,
                            accesses=n,
                        )
                    )
                outer.append(inner)
            grid.append(outer)
        return grid


class SimulatedBackend:
    """Protocol-simulator-backed measurement: deterministic and exact.

    For each point the backend (1) replays the flush + state-preparation
    script on a fresh protocol model and verifies the target state, (2) has
    the requester perform one read to learn which agent supplies the data,
    cross-checking the latency model's expectation, and (3) charges every
    chase access ``model.predict(...)`` cycles.  The zero-cost timer makes
    calibration return 0, so the harness algebra returns the prediction
    bit-for-bit.
    """

    name = "simulated"

    def __init__(self, model: LatencyModel):
        self.model = model
        self.graph = model.graph
        self.frequency_mhz = model.core_mhz
        self.last_trace = None
        self.last_source = None

    def time_empty(self) -> float:
        return 0.0

    # -- internals ---------------------------------------------------------

    def _protocol_model(self, placement: Placement) -> ProtocolModel:
        return ProtocolModel.from_topology(
            self.graph, self.model.protocol, home_node=placement.home_node
        )

    def _forwarder_arg(self, placement: Placement) -> Optional[int]:
        if placement.owner == placement.requester:
            return None
        return placement.owner

    def predict_placement(self, placement: Placement, state, level: str) -> float:
        return self.model.predict(
            placement.requester,
            placement.home_node,
            self._forwarder_arg(placement),
            state,
            level,
        )

    def prepare(self, script: CoherenceScript, placement: Placement):
        pmodel = self._protocol_model(placement)
        try:
            result = verify_script(script, pmodel)
        except Exception as exc:
            raise ScriptPlacementError(f"state preparation failed: {exc}") from exc
        # One probe read by the requester: which agent answers?
        state_map, source, _ = apply_event(
            pmodel, dict(result.state_map), CacheEvent(placement.requester, Action.READ)
        )
        self.last_trace = result.trace
        self.last_source = source
        expected = self.model.expected_source_kind(
            placement.requester,
            placement.home_node,
            self._forwarder_arg(placement),
            script.target_state,
            script.target_level,
        )
        if source is not None and source.kind != expected:
            raise ScriptPlacementError(
                f"simulator sourced {script.target_state.value}@{script.target_level} "
                f"from {source.kind}, model expects {expected}"
            )
        return result

    def run_point(self, chains, script, placement, policy: MeasurementPolicy):
        self.prepare(script, placement)
        per_access = self.predict_placement(
            placement, script.target_state, script.target_level
        )
        grid = []
        for _ in range(policy.outer_repeats):
            outer = []
            for chain in chains:
                n = chain.element_count
                timing = ChaseTiming(elapsed_cycles=per_access * n, accesses=n)
                outer.append([timing] * policy.inner_repeats)
            grid.append(outer)
        return grid

    def flush_state(self, plan) -> dict:
        """Flush-plan effect in simulator terms: the line leaves the
        targeted levels (a fresh all-Invalid map)."""
        from .coherence import initial_state_map

        return initial_state_map()
