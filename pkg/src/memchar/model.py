"""Analytic latency model over a topology graph.

Latency for a placement decomposes into a base term keyed on (memory level,
coherence-state class, locality class) plus per-hop link costs:

* chiplet graphs price remote-socket accesses linearly in interconnect
  switch traversals (costs are ns per traversal per direction; a plain read
  crosses every hop twice), with intra-socket values carried as calibrated
  per-distance classes;
* mesh graphs add a per-hop gradient between requester and owner tiles for
  private-cache transfers (cost kept natively in uncore cycles).

State classes collapse the pairs the source tables report jointly (M/E and
O/S on the chiplet system; S/F on the mesh system, where M and E stay
distinct for remote L1).  Dirty three-party flows (requester, home node,
forwarding node) use a dedicated base table keyed by the effective node:
the home node, unless the requester itself is home, in which case the
forwarding node decides.

Fitting is ordinary least squares on the linear parameterization, with an
explicit rank check and disclosed ridge damping for near-singular systems.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .coherence import CoherenceState, Protocol
from .topology import (
    GraphKind,
    LinkClass,
    TopologyGraph,
    core_path,
    extra_switch_hops,
    load_topology_file,
    mesh_hops,
    fixture_path,
)

__all__ = [
    "LatencyModel",
    "LatencyMatrix",
    "ModelError",
    "FitError",
    "FitObservation",
    "FitTerm",
    "FitTemplate",
    "FitResult",
    "CompareReport",
    "load_model_file",
    "load_fixture_model",
    "fit",
    "compare",
    "classify_values",
    "ram_hop_template",
    "remote_socket_template",
    "hop_cost_template",
]

LEVELS = ("L1", "L2", "L3", "RAM")

RIDGE_LAMBDA = 1e-9


class ModelError(Exception):
    pass


class FitError(ModelError):
    pass


@dataclass(frozen=True)
class LinkCost:
    value: float
    unit: str  # "ns" | "uncore_cycles" | "fclk_cycles"


class LatencyModel:
    """Parameter set over a :class:`TopologyGraph` with predict and fit."""

    def __init__(
        self,
        graph: TopologyGraph,
        protocol: Protocol,
        base: dict[str, float],
        state_classes: dict[str, dict[str, str]],
        link_costs: dict[str, LinkCost],
        frequencies: Optional[dict[str, float]] = None,
        numa_class_by_extra_hops: Optional[dict[int, str]] = None,
        remote_anchor_extra_hops: int = 0,
        triple_base: Optional[dict[str, float]] = None,
        ccx_penalty: Optional[list[list[float]]] = None,
        mesh_gradient_levels: Sequence[str] = ("L1", "L2"),
        mesh_gradient_classes: Sequence[str] = ("M", "E", "ME"),
        clean_shared_ram_beyond: Optional[str] = None,
        name: str = "",
    ):
        self.graph = graph
        self.protocol = Protocol(protocol)
        self.base = dict(base)
        self.state_classes = state_classes
        self.link_costs = dict(link_costs)
        self.frequencies = dict(frequencies or graph.frequencies)
        self.numa_class_by_extra_hops = {
            int(k): v for k, v in (numa_class_by_extra_hops or {}).items()
        }
        self.remote_anchor_extra_hops = remote_anchor_extra_hops
        self.triple_base = dict(triple_base or {})
        self.ccx_penalty = ccx_penalty
        self.mesh_gradient_levels = frozenset(mesh_gradient_levels)
        self.mesh_gradient_classes = frozenset(mesh_gradient_classes)
        self.clean_shared_ram_beyond = clean_shared_ram_beyond
        self.name = name
        for key, v in self.base.items():
            if v < 0:
                raise ModelError(f"negative base latency for {key}")

    # -- unit conversion ---------------------------------------------------

    @property
    def core_mhz(self) -> float:
        return self.frequencies["core_mhz"]

    def link_cost_ns(self, link_class: str) -> float:
        """Cost per traversal per direction, in nanoseconds."""
        lc = self.link_costs[link_class]
        if lc.unit == "ns":
            return lc.value
        if lc.unit == "uncore_cycles":
            return lc.value * 1000.0 / self.frequencies["uncore_mhz"]
        if lc.unit == "fclk_cycles":
            return lc.value * 1000.0 / self.frequencies["fclk_mhz"]
        raise ModelError(f"unknown link cost unit {lc.unit}")

    def link_cost_core_cycles(self, link_class: str) -> float:
        lc = self.link_costs[link_class]
        if lc.unit == "uncore_cycles":
            return lc.value * self.core_mhz / self.frequencies["uncore_mhz"]
        return self.link_cost_ns(link_class) * self.core_mhz / 1000.0

    def mesh_hop_uncore_cycles(self) -> float:
        lc = self.link_costs["mesh_hop"]
        if lc.unit == "uncore_cycles":
            return lc.value
        return self.link_cost_ns("mesh_hop") * self.frequencies["uncore_mhz"] / 1000.0

    def conversion_report(self) -> dict[str, float]:
        """Frequency-domain conversion factors applied at predict time."""
        out = {"core_mhz": self.core_mhz}
        for name in self.link_costs:
            out[f"{name}_ns_per_direction"] = self.link_cost_ns(name)
            out[f"{name}_core_cycles_per_direction"] = self.link_cost_core_cycles(name)
        return out

    # -- classification ------------------------------------------------------

    def state_class(self, level: str, state: CoherenceState) -> str:
        table = self.state_classes.get(level) or self.state_classes["default"]
        try:
            return table[state.value]
        except KeyError:
            raise ModelError(
                f"state {state.value} has no class at level {level}"
            ) from None

    def locality_class(self, requester: int, owner: int) -> str:
        g = self.graph
        if requester == owner:
            return "local"
        a, b = g.core(requester), g.core(owner)
        if g.kind is GraphKind.CHIPLET_IF:
            if (a.socket, a.numa_node, a.ccd, a.ccx) == (
                b.socket,
                b.numa_node,
                b.ccd,
                b.ccx,
            ):
                return "same_ccx"
            if (a.socket, a.numa_node) == (b.socket, b.numa_node):
                return "same_ccd"
            if a.socket == b.socket:
                return self._numa_class(requester, b.numa_node)
            return "remote_socket"
        if a.socket != b.socket:
            return "remote_socket"
        return "same_snc" if a.numa_node == b.numa_node else "other_snc"

    def _numa_class(self, requester: int, node: int) -> str:
        extra = extra_switch_hops(self.graph, requester, node)
        table = self.numa_class_by_extra_hops
        if extra in table:
            return table[extra]
        # Pairs farther than the farthest calibrated distance saturate at it.
        if table and extra > max(table):
            return table[max(table)]
        raise ModelError(f"no distance class for {extra} extra switch hops")

    def _remote_snc_class(self, home: int) -> str:
        socket = self.graph.memory_controller(home).socket
        local_nodes = self.graph.numa_nodes_of_socket(socket)
        return "remote_near" if home == local_nodes[0] else "remote_far"

    # -- prediction ----------------------------------------------------------

    def _base(self, level: str, cls: str, locality: str) -> float:
        key = f"{level}/{cls}/{locality}"
        try:
            return self.base[key]
        except KeyError:
            raise ModelError(f"model has no base entry {key}") from None

    def _ram_cycles(self, requester: int, home: int) -> float:
        g = self.graph
        req_socket = g.core(requester).socket
        home_socket = g.memory_controller(home).socket
        if g.kind is GraphKind.CHIPLET_IF:
            if req_socket == home_socket:
                cls = (
                    "local"
                    if home == g.node_of_core(requester)
                    else self._numa_class(requester, home)
                )
                return self._base("RAM", "any", cls)
            extra = extra_switch_hops(g, requester, home)
            rt_switch = 2.0 * self.link_cost_core_cycles(LinkClass.IF_SWITCH_HOP.value)
            return self._base("RAM", "any", "remote_socket") + (
                extra - self.remote_anchor_extra_hops
            ) * rt_switch
        if req_socket == home_socket:
            cls = "local" if home == g.node_of_core(requester) else "other_snc"
            return self._base("RAM", "any", cls)
        return self._base("RAM", "any", self._remote_snc_class(home))

    def _mesh_gradient(self, requester: int, owner: int) -> float:
        hops = mesh_hops(self.graph, self.graph.core(requester).id, self.graph.core(owner).id)
        per_direction = self.link_cost_core_cycles(LinkClass.MESH_HOP.value)
        return 2.0 * hops * per_direction

    def _ccx_position(self, core: int) -> int:
        return self.graph.cores_of_ccx(core).index(core)

    def predict(
        self,
        requester: int,
        home: int,
        forwarder: Optional[int],
        state: CoherenceState | str,
        level: str,
    ) -> float:
        """Predicted read latency in core cycles.

        ``forwarder`` is the core holding the line; None means the line is
        local to the requester (or, for matrix scopes, held by the home
        node's first core).  A forwarder whose node differs from ``home``
        selects the dirty three-party flow.
        """
        state = CoherenceState(state)
        if level not in LEVELS:
            raise ModelError(f"unknown level {level!r}")
        if not state.valid_for(self.protocol):
            raise ModelError(f"state {state.value} not valid under {self.protocol.value}")
        g = self.graph
        if forwarder is not None and forwarder == requester:
            raise ModelError("illegal tuple: forwarder given for local access")
        if forwarder is None:
            owner = requester if level == "RAM" or state is CoherenceState.I else g.first_core_of_node(home)
        else:
            owner = forwarder

        if forwarder is not None and g.node_of_core(forwarder) != home:
            return self._predict_triple(requester, home, forwarder, state, level)

        if state is CoherenceState.I or level == "RAM":
            return self._ram_cycles(requester, home)

        locality = self.locality_class(requester, owner)
        if (
            self.clean_shared_ram_beyond is not None
            and state is CoherenceState.S
            and locality not in ("local", self.clean_shared_ram_beyond)
        ):
            # Clean shared lines are not forwarded beyond the L3 domain;
            # home memory answers.
            return self._ram_cycles(requester, home)

        cls = self.state_class(level, state)
        value = self._base(level, cls, locality)
        if g.kind is GraphKind.CHIPLET_IF:
            if (
                locality == "same_ccx"
                and self.ccx_penalty is not None
                and level in ("L1", "L2")
            ):
                value += self.ccx_penalty[self._ccx_position(requester)][
                    self._ccx_position(owner)
                ]
        else:
            if (
                locality in ("same_snc", "other_snc")
                and level in self.mesh_gradient_levels
                and cls in self.mesh_gradient_classes
            ):
                value += self._mesh_gradient(requester, owner)
        return value

    def _predict_triple(
        self, requester: int, home: int, forwarder: int, state: CoherenceState, level: str
    ) -> float:
        if self.graph.kind is not GraphKind.CHIPLET_IF:
            raise ModelError("three-party flows are modeled on chiplet graphs only")
        if state is not CoherenceState.M:
            raise ModelError("forwarder is only legal for dirty-remote (Modified) lines")
        g = self.graph
        req_node = g.node_of_core(requester)
        fwd_node = g.node_of_core(forwarder)
        if g.core(forwarder).socket != g.core(requester).socket:
            raise ModelError("three-party flow fixture covers one socket")
        # The home node decides the latency unless the requester itself is
        # home; then the forwarding node does.
        effective = home if home != req_node else fwd_node
        cls = self.state_class(level, state)
        key = f"{level}/{cls}/{self._numa_class(requester, effective)}"
        try:
            return self.triple_base[key]
        except KeyError:
            raise ModelError(f"no three-party base entry {key}") from None

    def expected_source_kind(
        self, requester: int, home: int, forwarder: Optional[int], state: CoherenceState, level: str
    ) -> str:
        """Which memory agent should supply the data ("cache"|"l3"|"ram")."""
        state = CoherenceState(state)
        if state is CoherenceState.I or level == "RAM":
            return "ram"
        owner = forwarder if forwarder is not None else requester
        locality = self.locality_class(requester, owner)
        if (
            self.clean_shared_ram_beyond is not None
            and state is CoherenceState.S
            and locality not in ("local", self.clean_shared_ram_beyond)
        ):
            return "ram"
        if level == "L3":
            return "l3"
        if self.protocol is Protocol.MESIF and state in (
            CoherenceState.S,
            CoherenceState.F,
        ) and locality != "local":
            return "l3"
        return "cache"

    # -- serialization -------------------------------------------------------

    def to_document(self) -> dict:
        return {
            "name": self.name,
            "protocol": self.protocol.value,
            "frequencies": self.frequencies,
            "base_cycles": self.base,
            "state_classes": self.state_classes,
            "link_costs": {
                k: {"value": v.value, "unit": v.unit} for k, v in self.link_costs.items()
            },
            "numa_class_by_extra_hops": {
                str(k): v for k, v in self.numa_class_by_extra_hops.items()
            },
            "remote_anchor_extra_hops": self.remote_anchor_extra_hops,
            "triple_base_cycles": self.triple_base,
            "ccx_penalty_cycles": self.ccx_penalty,
            "mesh_gradient_levels": sorted(self.mesh_gradient_levels),
            "mesh_gradient_classes": sorted(self.mesh_gradient_classes),
            "clean_shared_ram_beyond": self.clean_shared_ram_beyond,
        }

    def with_params(self, **updates) -> "LatencyModel":
        """Copy with replaced base entries / link costs (fit application)."""
        base = dict(self.base)
        base.update(updates.pop("base", {}))
        link_costs = dict(self.link_costs)
        for k, v in updates.pop("link_costs_ns", {}).items():
            link_costs[k] = LinkCost(v, "ns")
        if updates:
            raise ModelError(f"unknown model updates: {sorted(updates)}")
        return LatencyModel(
            graph=self.graph,
            protocol=self.protocol,
            base=base,
            state_classes=self.state_classes,
            link_costs=link_costs,
            frequencies=self.frequencies,
            numa_class_by_extra_hops=self.numa_class_by_extra_hops,
            remote_anchor_extra_hops=self.remote_anchor_extra_hops,
            triple_base=self.triple_base,
            ccx_penalty=self.ccx_penalty,
            mesh_gradient_levels=self.mesh_gradient_levels,
            mesh_gradient_classes=self.mesh_gradient_classes,
            clean_shared_ram_beyond=self.clean_shared_ram_beyond,
            name=self.name,
        )


def load_model(doc: dict, graph: TopologyGraph) -> LatencyModel:
    link_costs = {
        k: LinkCost(float(v["value"]), str(v["unit"]))
        for k, v in doc.get("link_costs", {}).items()
    }
    return LatencyModel(
        graph=graph,
        protocol=Protocol(doc["protocol"]),
        base={k: float(v) for k, v in doc["base_cycles"].items()},
        state_classes=doc["state_classes"],
        link_costs=link_costs,
        frequencies=doc.get("frequencies"),
        numa_class_by_extra_hops=doc.get("numa_class_by_extra_hops"),
        remote_anchor_extra_hops=int(doc.get("remote_anchor_extra_hops", 0)),
        triple_base=doc.get("triple_base_cycles"),
        ccx_penalty=doc.get("ccx_penalty_cycles"),
        mesh_gradient_levels=doc.get("mesh_gradient_levels", ["L1", "L2"]),
        mesh_gradient_classes=doc.get("mesh_gradient_classes", ["M", "E", "ME"]),
        clean_shared_ram_beyond=doc.get("clean_shared_ram_beyond"),
        name=doc.get("name", ""),
    )


def load_model_file(path: str | Path, graph: TopologyGraph) -> LatencyModel:
    with open(path) as f:
        return load_model(json.load(f), graph)


def load_fixture_model(name: str) -> LatencyModel:
    """Load a shipped (topology, model) fixture pair by system name."""
    graph = load_topology_file(fixture_path(f"{name}.json"))
    return load_model_file(fixture_path(f"{name}_latency_model.json"), graph)


# ---------------------------------------------------------------------------
# Matrices


@dataclass
class LatencyMatrix:
    """Axis-labeled latency matrix with measurement metadata."""

    row_labels: list
    col_labels: list
    entries: np.ndarray
    state: str = ""
    level: str = ""
    frequency_mhz: float = 0.0
    row_axis: str = "requester"
    col_axis: str = "home"

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        if self.entries.shape != (len(self.row_labels), len(self.col_labels)):
            raise ModelError(
                f"matrix shape {self.entries.shape} does not match labels "
                f"({len(self.row_labels)}x{len(self.col_labels)})"
            )
        if (self.entries <= 0).any():
            raise ModelError("matrix entries must be positive")

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(
                ["state", self.state, "level", self.level, "freq_mhz", repr(self.frequency_mhz)]
            )
            w.writerow([f"{self.row_axis}\\{self.col_axis}"] + [str(c) for c in self.col_labels])
            for lbl, row in zip(self.row_labels, self.entries):
                w.writerow([str(lbl)] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path: str | Path) -> "LatencyMatrix":
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        if len(rows) < 3 or rows[0][0] != "state":
            raise ModelError(f"{path}: not a latency matrix CSV")
        meta = rows[0]
        axes = rows[1][0].split("\\")
        col_labels = rows[1][1:]
        row_labels = [r[0] for r in rows[2:]]
        entries = np.array([[float(v) for v in r[1:]] for r in rows[2:]])
        return cls(
            row_labels=row_labels,
            col_labels=col_labels,
            entries=entries,
            state=meta[1],
            level=meta[3],
            frequency_mhz=float(meta[5]),
            row_axis=axes[0],
            col_axis=axes[1] if len(axes) > 1 else "home",
        )


# ---------------------------------------------------------------------------
# Fitting


@dataclass(frozen=True)
class FitObservation:
    """One measured point the design matrix is built from."""

    requester: int
    home: int
    cycles: float
    forwarder: Optional[int] = None
    state: str = ""
    level: str = "RAM"


@dataclass(frozen=True)
class FitTerm:
    name: str
    coeff: Callable[[FitObservation], float]


@dataclass(frozen=True)
class FitTemplate:
    """A linear parameterization: cycles = sum(param[i] * coeff_i(obs))."""

    name: str
    terms: tuple[FitTerm, ...]

    def design_row(self, obs: FitObservation) -> list[float]:
        return [t.coeff(obs) for t in self.terms]


@dataclass
class FitResult:
    template: FitTemplate
    params: dict[str, float]
    residuals: np.ndarray
    rank: int
    ridge_used: bool
    observations: list[FitObservation]

    def predict_observation(self, obs: FitObservation) -> float:
        return float(
            sum(self.params[t.name] * t.coeff(obs) for t in self.template.terms)
        )

    @property
    def max_abs_residual(self) -> float:
        return float(np.max(np.abs(self.residuals))) if len(self.residuals) else 0.0

    def report(self) -> str:
        lines = [f"fit template: {self.template.name}"]
        for name, value in self.params.items():
            lines.append(f"  {name} = {value!r}")
        lines.append(f"  rank = {self.rank}/{len(self.template.terms)}")
        if self.ridge_used:
            lines.append(f"  ridge damping applied (lambda={RIDGE_LAMBDA})")
        lines.append("  per-entry residuals:")
        for obs, r in zip(self.observations, self.residuals):
            lines.append(
                f"    req={obs.requester} home={obs.home} "
                f"measured={obs.cycles!r} residual={float(r)!r}"
            )
        lines.append(f"  max_abs_residual = {self.max_abs_residual!r}")
        return "\n".join(lines) + "\n"


def fit(template: FitTemplate, observations: Sequence[FitObservation]) -> FitResult:
    """Ordinary least squares via normal equations.

    Raises :class:`FitError` on a rank-deficient design matrix, naming the
    unidentifiable parameters.  Near-singular but full-rank systems are
    solved with ridge damping, disclosed in the result.
    """
    obs = list(observations)
    p = len(template.terms)
    if len(obs) < p:
        raise FitError(
            f"{len(obs)} observations cannot identify {p} parameters"
        )
    X = np.array([template.design_row(o) for o in obs], dtype=float)
    y = np.array([o.cycles for o in obs], dtype=float)
    rank = int(np.linalg.matrix_rank(X))
    if rank < p:
        _, _, vt = np.linalg.svd(X)
        null_mix = np.abs(vt[rank:]).sum(axis=0)
        bad = [t.name for t, m in zip(template.terms, null_mix) if m > 1e-9]
        raise FitError(f"rank-deficient design matrix; unidentifiable parameters: {bad}")
    xtx = X.T @ X
    xty = X.T @ y
    ridge_used = False
    cond = np.linalg.cond(xtx)
    if not np.isfinite(cond) or cond > 1e12:
        xtx = xtx + RIDGE_LAMBDA * np.eye(p)
        ridge_used = True
    beta = np.linalg.solve(xtx, xty)
    residuals = X @ beta - y
    return FitResult(
        template=template,
        params={t.name: float(b) for t, b in zip(template.terms, beta)},
        residuals=residuals,
        rank=rank,
        ridge_used=ridge_used,
        observations=obs,
    )


def _core_ghz(graph: TopologyGraph) -> float:
    return graph.frequencies["core_mhz"] / 1000.0


def ram_hop_template(graph: TopologyGraph) -> FitTemplate:
    """cycles = base + 2 * extra_switch_hops * switch_ns * f_core."""
    ghz = _core_ghz(graph)
    return FitTemplate(
        name="ram_hops",
        terms=(
            FitTerm("base_ram_cycles", lambda o: 1.0),
            FitTerm(
                "if_switch_ns",
                lambda o: 2.0 * extra_switch_hops(graph, o.requester, o.home) * ghz,
            ),
        ),
    )


def remote_socket_template(graph: TopologyGraph) -> FitTemplate:
    """Same parameterization, applied to cross-socket observations."""
    ghz = _core_ghz(graph)
    return FitTemplate(
        name="remote_socket",
        terms=(
            FitTerm("base_remote_cycles", lambda o: 1.0),
            FitTerm(
                "if_switch_ns",
                lambda o: 2.0 * extra_switch_hops(graph, o.requester, o.home) * ghz,
            ),
        ),
    )


def hop_cost_template(graph: TopologyGraph) -> FitTemplate:
    """Base plus switch and socket-link costs (socket-link counted per crossing)."""
    ghz = _core_ghz(graph)

    def xgmi_crossings(o: FitObservation) -> float:
        from .topology import if_path

        p = if_path(graph, graph.core(o.requester).id, graph.memory_controller(o.home).id)
        return float(p.count(LinkClass.XGMI))

    return FitTemplate(
        name="hop_costs",
        terms=(
            FitTerm("base_cycles", lambda o: 1.0),
            FitTerm(
                "if_switch_ns",
                lambda o: 2.0 * extra_switch_hops(graph, o.requester, o.home) * ghz,
            ),
            FitTerm("xgmi_ns", lambda o: 2.0 * xgmi_crossings(o) * ghz),
        ),
    )


# ---------------------------------------------------------------------------
# Comparison


def classify_values(
    values: dict, tolerance: float = 1.0
) -> list[tuple[float, list]]:
    """Group keys into latency classes by value; classes sorted ascending."""
    classes: list[tuple[float, list]] = []
    for key, v in sorted(values.items(), key=lambda kv: (kv[1], str(kv[0]))):
        if classes and abs(v - classes[-1][0]) <= tolerance:
            classes[-1][1].append(key)
        else:
            classes.append((v, [key]))
    return classes


@dataclass
class CompareReport:
    entries: list[tuple[FitObservation, float, float]]  # (obs, predicted, error)
    classes: list[tuple[float, list]]
    max_abs: float
    mean_abs: float
    ordering_consistent: bool

    def render(self) -> str:
        lines = [
            f"compare: {len(self.entries)} entries, "
            f"max_abs={self.max_abs!r}, mean_abs={self.mean_abs!r}, "
            f"class ordering {'consistent' if self.ordering_consistent else 'INCONSISTENT'}"
        ]
        for value, members in self.classes:
            lines.append(f"  class @ {value!r}: {members}")
        return "\n".join(lines) + "\n"


def compare(predictor, observations: Sequence[FitObservation], tolerance: float = 1.0) -> CompareReport:
    """Prediction-vs-measurement report with latency-class breakdown.

    ``predictor`` is a LatencyModel or FitResult.  Classes are formed from
    predicted values; ordering is checked against the measured ordering of
    class means.
    """
    entries = []
    predicted_by_key = {}
    measured_by_key = {}
    for obs in observations:
        if isinstance(predictor, FitResult):
            pred = predictor.predict_observation(obs)
        else:
            pred = predictor.predict(
                obs.requester, obs.home, obs.forwarder, obs.state or "I", obs.level
            )
        entries.append((obs, pred, pred - obs.cycles))
        key = (obs.requester, obs.home)
        predicted_by_key[key] = pred
        measured_by_key[key] = obs.cycles
    errors = np.array([e for _, _, e in entries])
    classes = classify_values(predicted_by_key, tolerance)
    means = [
        float(np.mean([measured_by_key[k] for k in members])) for _, members in classes
    ]
    ordering = all(a <= b + 1e-9 for a, b in zip(means, means[1:]))
    return CompareReport(
        entries=entries,
        classes=classes,
        max_abs=float(np.max(np.abs(errors))) if len(errors) else 0.0,
        mean_abs=float(np.mean(np.abs(errors))) if len(errors) else 0.0,
        ordering_consistent=ordering,
    )
