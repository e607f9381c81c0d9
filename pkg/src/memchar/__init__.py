"""memchar: memory-hierarchy characterization toolkit.

Latency and bandwidth benchmarking with controlled cache-coherence states,
backed by a deterministic protocol simulator plus an analytic interconnect
latency model, so every procedure is testable at desk scale and runnable
natively on x86 servers.
"""

from .chain import ChainBuffer, generate_chain, verify_chain
from .coherence import (
    CoherenceScript,
    CoherenceState,
    Protocol,
    ProtocolModel,
    plan_state,
    protocol_step,
    simulate,
)
from .harness import (
    MeasurementPolicy,
    MeasurementRecord,
    aggregate,
    calibrate_overhead,
    cycles_to_ns,
    flush_plan,
    measure_latency,
)
from .model import LatencyMatrix, LatencyModel, compare, fit, load_fixture_model
from .topology import (
    PlacementScope,
    TopologyGraph,
    enumerate_placements,
    if_path,
    load_topology,
    mesh_route,
)

__version__ = "0.1.0"

__all__ = [
    "ChainBuffer",
    "CoherenceScript",
    "CoherenceState",
    "LatencyMatrix",
    "LatencyModel",
    "MeasurementPolicy",
    "MeasurementRecord",
    "PlacementScope",
    "Protocol",
    "ProtocolModel",
    "TopologyGraph",
    "aggregate",
    "calibrate_overhead",
    "compare",
    "cycles_to_ns",
    "enumerate_placements",
    "fit",
    "flush_plan",
    "generate_chain",
    "if_path",
    "load_fixture_model",
    "load_topology",
    "measure_latency",
    "mesh_route",
    "plan_state",
    "protocol_step",
    "simulate",
    "verify_chain",
]
