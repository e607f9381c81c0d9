"""Machine topology as an annotated graph.

Two graph kinds are supported:

* ``chiplet_if`` -- compute dies hang off a central I/O die whose switches
  form the interconnect; sockets are joined by point-to-point links.
* ``mesh_2d`` -- a per-socket grid of tiles (cores, memory controllers,
  socket-link tiles) routed vertically first, then horizontally.

Graphs are loaded from JSON documents (see ``TOPOLOGY_SCHEMA_DOC`` and the
fixtures shipped under ``memchar/fixtures``), validated, and frozen.  All
route/placement queries are pure functions over the loaded graph.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

__all__ = [
    "GraphKind",
    "NodeRole",
    "LinkClass",
    "PlacementScope",
    "TopoNode",
    "TopoEdge",
    "TopologyGraph",
    "Placement",
    "Path",
    "TopologyError",
    "SchemaError",
    "ScopeError",
    "RouteError",
    "load_topology",
    "load_topology_file",
    "serialize_topology",
    "mesh_route",
    "if_path",
    "enumerate_placements",
    "enumerate_triples",
    "fixture_path",
]

FIXTURE_DIR = Path(__file__).parent / "fixtures"


class TopologyError(Exception):
    """Base class for topology failures."""


class SchemaError(TopologyError):
    """Document does not conform to the topology schema."""


class ScopeError(TopologyError):
    """Placement scope is not valid for the graph kind."""


class RouteError(TopologyError):
    """No route exists between the requested endpoints."""


class GraphKind(str, Enum):
    CHIPLET_IF = "chiplet_if"
    MESH_2D = "mesh_2d"


class NodeRole(str, Enum):
    CORE = "core"
    L3_DOMAIN = "l3_domain"
    IF_SWITCH = "if_switch"
    IF_REPEATER = "if_repeater"
    MEMORY_CONTROLLER = "memory_controller"
    XGMI_PORT = "xgmi_port"
    UPI_PORT = "upi_port"
    MESH_TILE = "mesh_tile"


class LinkClass(str, Enum):
    IF_SWITCH_HOP = "if_switch_hop"
    IF_REPEATER_HOP = "if_repeater_hop"
    MESH_HOP = "mesh_hop"
    XGMI = "xgmi"
    UPI = "upi"
    LOCAL = "local"


class PlacementScope(str, Enum):
    LOCAL = "local"
    SAME_CCX = "same_ccx"
    SAME_CCD = "same_ccd"
    INTRA_SOCKET = "intra_socket"
    INTER_SOCKET = "inter_socket"
    ALL_PAIRS = "all_pairs"


# Default per-traversal costs (cycles in the link's frequency domain).
# if_switch_hop must be >= 2 FCLK; if_repeater_hop is 1 FCLK.
DEFAULT_LINK_COSTS = {
    LinkClass.IF_SWITCH_HOP: (2.0, "fclk"),
    LinkClass.IF_REPEATER_HOP: (1.0, "fclk"),
    LinkClass.MESH_HOP: (1.0, "uncore"),
    LinkClass.XGMI: (90.0, "fclk"),
    LinkClass.UPI: (120.0, "uncore"),
    LinkClass.LOCAL: (0.0, "core"),
}


@dataclass(frozen=True)
class TopoNode:
    """One resource in the machine graph.

    ``location`` is (socket, numa_node, ccd, ccx, core_index) for chiplet
    graphs and (socket, row, col) for mesh graphs; unused slots are None.
    """

    id: str
    role: NodeRole
    socket: int
    numa_node: Optional[int] = None
    ccd: Optional[int] = None
    ccx: Optional[int] = None
    core_index: Optional[int] = None
    row: Optional[int] = None
    col: Optional[int] = None
    frequency_domain: str = "core_clk"

    @property
    def grid(self) -> tuple[int, int]:
        if self.row is None or self.col is None:
            raise TopologyError(f"node {self.id} carries no grid coordinate")
        return (self.row, self.col)


@dataclass(frozen=True)
class TopoEdge:
    a: str
    b: str
    link_class: LinkClass

    def other(self, node_id: str) -> str:
        return self.b if node_id == self.a else self.a


@dataclass(frozen=True)
class Path:
    """An ordered route: the node ids visited and the class of each hop."""

    nodes: tuple[str, ...]
    link_classes: tuple[LinkClass, ...]

    def __len__(self) -> int:
        return len(self.link_classes)

    def count(self, link_class: LinkClass) -> int:
        return sum(1 for c in self.link_classes if c is link_class)

    def switch_count(self, graph: "TopologyGraph") -> int:
        """Number of interconnect-switch nodes traversed."""
        return sum(
            1 for n in self.nodes if graph.nodes[n].role is NodeRole.IF_SWITCH
        )


@dataclass(frozen=True)
class Placement:
    """One measurement placement: who asks, who holds, where memory lives."""

    requester: int
    owner: int
    home_node: int
    forwarder_node: Optional[int] = None
    label: str = ""

    @property
    def is_triple(self) -> bool:
        return self.forwarder_node is not None


class TopologyGraph:
    """Immutable annotated machine graph.

    Built by :func:`load_topology`; do not mutate after construction.  Safe
    to share read-only between concurrent workers.
    """

    def __init__(
        self,
        kind: GraphKind,
        socket_count: int,
        nodes: dict[str, TopoNode],
        edges: list[TopoEdge],
        frequencies: dict[str, float],
        link_costs: dict[LinkClass, tuple[float, str]],
        caches: Optional[dict] = None,
        bandwidth: Optional[dict] = None,
        name: str = "",
        source_doc: Optional[dict] = None,
    ):
        self.kind = kind
        self.socket_count = socket_count
        self.nodes = nodes
        self.edges = tuple(edges)
        self.frequencies = dict(frequencies)
        self.link_costs = dict(link_costs)
        self.caches = dict(caches) if caches else {}
        self.bandwidth = dict(bandwidth) if bandwidth else {}
        self.name = name
        self._source_doc = source_doc
        self._adj: dict[str, list[TopoEdge]] = {n: [] for n in nodes}
        for e in self.edges:
            self._adj[e.a].append(e)
            self._adj[e.b].append(e)
        self._core_by_id = {
            n.core_index: n for n in nodes.values() if n.role is NodeRole.CORE
        }
        self._validate()

    # -- queries ----------------------------------------------------------

    def core(self, core_id: int) -> TopoNode:
        try:
            return self._core_by_id[core_id]
        except KeyError:
            raise TopologyError(f"unknown core id {core_id}") from None

    @property
    def cores(self) -> list[int]:
        return sorted(self._core_by_id)

    def cores_of_node(self, numa_node: int) -> list[int]:
        return sorted(
            c for c, n in self._core_by_id.items() if n.numa_node == numa_node
        )

    def cores_of_ccx(self, core_id: int) -> list[int]:
        """All cores sharing the given core's L3 domain (CCX or SNC)."""
        me = self.core(core_id)
        if self.kind is GraphKind.CHIPLET_IF:
            return sorted(
                c
                for c, n in self._core_by_id.items()
                if (n.socket, n.numa_node, n.ccd, n.ccx)
                == (me.socket, me.numa_node, me.ccd, me.ccx)
            )
        return self.cores_of_node(me.numa_node)

    @property
    def numa_nodes(self) -> list[int]:
        return sorted(
            {n.numa_node for n in self.nodes.values() if n.numa_node is not None}
        )

    def numa_nodes_of_socket(self, socket: int) -> list[int]:
        return sorted(
            {
                n.numa_node
                for n in self.nodes.values()
                if n.socket == socket and n.numa_node is not None
            }
        )

    def node_of_core(self, core_id: int) -> int:
        return self.core(core_id).numa_node

    def memory_controller(self, numa_node: int) -> TopoNode:
        for n in self.nodes.values():
            if n.role is NodeRole.MEMORY_CONTROLLER and n.numa_node == numa_node:
                return n
        raise TopologyError(f"no memory controller for NUMA node {numa_node}")

    def l3_domain_of_core(self, core_id: int) -> str:
        me = self.core(core_id)
        if self.kind is GraphKind.MESH_2D:
            # Mesh L3 slices are shared per NUMA node (per SNC under SNC mode).
            return f"l3.snc{me.numa_node}"
        for e in self._adj[me.id]:
            other = self.nodes[e.other(me.id)]
            if other.role is NodeRole.L3_DOMAIN:
                return other.id
        raise TopologyError(f"core {core_id} has no L3 domain")

    def first_core_of_node(self, numa_node: int) -> int:
        cores = self.cores_of_node(numa_node)
        if not cores:
            raise TopologyError(f"NUMA node {numa_node} has no cores")
        return cores[0]

    def upi_tile(self, socket: int) -> TopoNode:
        for n in self.nodes.values():
            if n.role is NodeRole.UPI_PORT and n.socket == socket:
                return n
        raise TopologyError(f"socket {socket} has no UPI tile")

    def link_cost_cycles(self, link_class: LinkClass) -> tuple[float, str]:
        return self.link_costs.get(link_class, DEFAULT_LINK_COSTS[link_class])

    # -- validation -------------------------------------------------------

    def _validate(self) -> None:
        if self.socket_count < 1 or self.socket_count > 2:
            raise SchemaError(f"socket_count must be 1 or 2, got {self.socket_count}")
        if not self._core_by_id:
            raise SchemaError("graph has no cores")
        self._check_roles()
        self._check_coordinates()
        self._check_connectivity()
        sw_cost, _ = self.link_cost_cycles(LinkClass.IF_SWITCH_HOP)
        if sw_cost < 2.0:
            raise SchemaError(
                f"if_switch_hop cost must be >= 2 cycles, got {sw_cost}"
            )

    def _check_roles(self) -> None:
        for n in self.nodes.values():
            if self.kind is GraphKind.MESH_2D and n.role in (
                NodeRole.IF_SWITCH,
                NodeRole.IF_REPEATER,
            ):
                raise SchemaError(f"node {n.id}: {n.role.value} not valid in a mesh graph")
            if self.kind is GraphKind.CHIPLET_IF and n.role is NodeRole.MESH_TILE:
                raise SchemaError(f"node {n.id}: mesh_tile not valid in a chiplet graph")
            if n.role is NodeRole.CORE and n.numa_node is None:
                raise SchemaError(f"core {n.id} has no NUMA node")

    def _check_coordinates(self) -> None:
        if self.kind is not GraphKind.MESH_2D:
            return
        seen: dict[tuple[int, int, int], str] = {}
        for n in self.nodes.values():
            if n.role in (NodeRole.CORE, NodeRole.MEMORY_CONTROLLER, NodeRole.UPI_PORT):
                if n.row is None or n.col is None:
                    raise SchemaError(f"mesh node {n.id} lacks a grid coordinate")
                key = (n.socket, n.row, n.col)
                if key in seen:
                    raise SchemaError(
                        f"duplicate grid coordinate {key}: nodes {seen[key]} and {n.id}"
                    )
                seen[key] = n.id

    def _check_connectivity(self) -> None:
        # Every core must reach every memory controller.
        start = next(iter(self.nodes))
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for e in self._adj[u]:
                v = e.other(u)
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if self.kind is GraphKind.MESH_2D:
            # Mesh edges are implicit (grid neighbours); only check per-socket
            # tiles share a socket id.
            return
        missing = sorted(set(self.nodes) - seen)
        if missing:
            raise SchemaError(f"graph is disconnected; unreachable nodes: {missing}")

    # -- serialization ----------------------------------------------------

    def to_document(self) -> dict:
        if self._source_doc is None:
            raise TopologyError("graph was not loaded from a document")
        return json.loads(json.dumps(self._source_doc))


# ---------------------------------------------------------------------------
# Loading


TOPOLOGY_SCHEMA_DOC = """\
Topology document (JSON). Field names are a stable contract.

Common:
  kind            "chiplet_if" | "mesh_2d"
  name            free-form system name
  socket_count    1 or 2
  frequencies     {"core_mhz": F, "fclk_mhz": F?, "uncore_mhz": F?}
  link_costs      {class: {"cycles": C, "domain": "core"|"fclk"|"uncore"}}
  caches          {"l1_kib": K, "l2_kib": K, "l3_mib": M}   (per level;
                  l3 is per L3 domain)
  bandwidth       optional fixture tables for the simulated bandwidth
                  backend (see bandwidth module docs)

kind=chiplet_if sockets entry:
  {"id": S,
   "switches": ["sw_a", ...],
   "switch_links": [["sw_a","sw_b"], ...],
   "repeaters": [{"id": "rp1", "between": ["sw_a","sw_b"]}, ...]?,
   "xgmi_ports": [{"id": "xg1", "switch": "sw_x"}, ...],
   "numa_nodes": [{"id": N, "switch": "sw_a" | null,
                   "ccds": [{"ccxs": [[core ids], ...]}, ...]}, ...]}
  plus top-level "xgmi_links": [["s0.xg1","s1.xg1"], ...]

kind=mesh_2d sockets entry:
  {"id": S,
   "grid": {"rows": R, "cols": C},
   "snc_cols": {"0": [cols...], "1": [cols...]},
   "numa_base": first global NUMA id of this socket,
   "tiles": [{"row": r, "col": c, "core": id} |
             {"row": r, "col": c, "mc": numa_id} |
             {"row": r, "col": c, "upi": true}, ...]}
"""


def _req(doc: dict, key: str, ctx: str):
    if key not in doc:
        raise SchemaError(f"{ctx}: missing required field '{key}'")
    return doc[key]


def _parse_link_costs(doc: dict) -> dict[LinkClass, tuple[float, str]]:
    costs = dict(DEFAULT_LINK_COSTS)
    for name, spec in doc.get("link_costs", {}).items():
        try:
            cls = LinkClass(name)
        except ValueError:
            raise SchemaError(f"link_costs: unknown link class '{name}'") from None
        costs[cls] = (float(spec["cycles"]), str(spec.get("domain", "core")))
    return costs


def _load_chiplet(doc: dict) -> tuple[dict[str, TopoNode], list[TopoEdge]]:
    nodes: dict[str, TopoNode] = {}
    edges: list[TopoEdge] = []
    seen_cores: set[int] = set()

    def add(node: TopoNode) -> None:
        if node.id in nodes:
            raise SchemaError(f"duplicate node id '{node.id}'")
        nodes[node.id] = node

    for sock in _req(doc, "sockets", "topology"):
        sid = int(_req(sock, "id", "socket"))
        prefix = f"s{sid}."
        for sw in sock.get("switches", []):
            add(TopoNode(prefix + sw, NodeRole.IF_SWITCH, sid, frequency_domain="fclk"))
        for a, b in sock.get("switch_links", []):
            edges.append(TopoEdge(prefix + a, prefix + b, LinkClass.IF_SWITCH_HOP))
        for rp in sock.get("repeaters", []):
            rid = prefix + rp["id"]
            add(TopoNode(rid, NodeRole.IF_REPEATER, sid, frequency_domain="fclk"))
            a, b = rp["between"]
            edges.append(TopoEdge(prefix + a, rid, LinkClass.IF_REPEATER_HOP))
            edges.append(TopoEdge(rid, prefix + b, LinkClass.IF_REPEATER_HOP))
        for port in sock.get("xgmi_ports", []):
            pid = prefix + port["id"]
            add(TopoNode(pid, NodeRole.XGMI_PORT, sid, frequency_domain="fclk"))
            edges.append(TopoEdge(prefix + port["switch"], pid, LinkClass.LOCAL))
        for nd in _req(sock, "numa_nodes", f"socket {sid}"):
            nid = int(_req(nd, "id", "numa_node"))
            switch = nd.get("switch")
            sw_id = prefix + switch if switch else None
            mc_id = f"mc{nid}"
            add(
                TopoNode(
                    mc_id, NodeRole.MEMORY_CONTROLLER, sid, numa_node=nid,
                    frequency_domain="fclk",
                )
            )
            ccds = _req(nd, "ccds", f"numa_node {nid}")
            for ccd_i, ccd in enumerate(ccds):
                ccxs = _req(ccd, "ccxs", f"node {nid} ccd {ccd_i}")
                if not 1 <= len(ccxs) <= 2:
                    raise SchemaError(
                        f"node {nid} ccd {ccd_i}: a CCD hosts 1-2 CCXs, got {len(ccxs)}"
                    )
                for ccx_i, core_ids in enumerate(ccxs):
                    if not 1 <= len(core_ids) <= 4:
                        raise SchemaError(
                            f"node {nid} ccd {ccd_i} ccx {ccx_i}: "
                            f"a CCX holds 1-4 cores, got {len(core_ids)}"
                        )
                    l3_id = f"l3.n{nid}d{ccd_i}x{ccx_i}"
                    add(
                        TopoNode(
                            l3_id, NodeRole.L3_DOMAIN, sid, numa_node=nid,
                            ccd=ccd_i, ccx=ccx_i, frequency_domain="uncore_clk",
                        )
                    )
                    for c in core_ids:
                        c = int(c)
                        if c in seen_cores:
                            raise SchemaError(f"core id {c} appears twice")
                        seen_cores.add(c)
                        cid = f"core{c}"
                        add(
                            TopoNode(
                                cid, NodeRole.CORE, sid, numa_node=nid,
                                ccd=ccd_i, ccx=ccx_i, core_index=c,
                            )
                        )
                        edges.append(TopoEdge(cid, l3_id, LinkClass.LOCAL))
                    # IFOP: the CCX reaches the I/O die switch; CCXs on one
                    # CCD are NOT connected to each other directly.
                    if sw_id is not None:
                        edges.append(TopoEdge(l3_id, sw_id, LinkClass.LOCAL))
                    else:
                        edges.append(TopoEdge(l3_id, mc_id, LinkClass.LOCAL))
            if sw_id is not None:
                edges.append(TopoEdge(mc_id, sw_id, LinkClass.LOCAL))
    for a, b in doc.get("xgmi_links", []):
        for end in (a, b):
            if end not in nodes or nodes[end].role is not NodeRole.XGMI_PORT:
                raise SchemaError(f"xgmi_links: '{end}' is not an xGMI port")
        edges.append(TopoEdge(a, b, LinkClass.XGMI))
    return nodes, edges


def _load_mesh(doc: dict) -> tuple[dict[str, TopoNode], list[TopoEdge]]:
    nodes: dict[str, TopoNode] = {}
    seen_cores: set[int] = set()
    for sock in _req(doc, "sockets", "topology"):
        sid = int(_req(sock, "id", "socket"))
        grid = _req(sock, "grid", f"socket {sid}")
        rows, cols = int(grid["rows"]), int(grid["cols"])
        snc_cols = {
            int(k): set(v) for k, v in _req(sock, "snc_cols", f"socket {sid}").items()
        }
        numa_base = int(sock.get("numa_base", 2 * sid))

        def snc_of(col: int) -> int:
            for local, colset in snc_cols.items():
                if col in colset:
                    return numa_base + local
            raise SchemaError(f"socket {sid}: column {col} not assigned to an SNC")

        for tile in _req(sock, "tiles", f"socket {sid}"):
            r, c = int(tile["row"]), int(tile["col"])
            if not (0 <= r < rows and 0 <= c < cols):
                raise SchemaError(f"socket {sid}: tile ({r},{c}) outside {rows}x{cols} grid")
            if "core" in tile:
                core = int(tile["core"])
                if core in seen_cores:
                    raise SchemaError(f"core id {core} appears twice")
                seen_cores.add(core)
                nid = f"core{core}"
                node = TopoNode(
                    nid, NodeRole.CORE, sid, numa_node=snc_of(c),
                    core_index=core, row=r, col=c,
                )
            elif "mc" in tile:
                mc_node = int(tile["mc"])
                nid = f"mc{mc_node}"
                node = TopoNode(
                    nid, NodeRole.MEMORY_CONTROLLER, sid, numa_node=mc_node,
                    row=r, col=c, frequency_domain="uncore_clk",
                )
            elif tile.get("upi"):
                nid = f"s{sid}.upi"
                node = TopoNode(
                    nid, NodeRole.UPI_PORT, sid, row=r, col=c,
                    frequency_domain="uncore_clk",
                )
            else:
                raise SchemaError(f"socket {sid}: tile ({r},{c}) has no role")
            if nid in nodes:
                raise SchemaError(f"duplicate node id '{nid}'")
            nodes[nid] = node
    # UPI link between sockets (edges between UPI tiles).
    edges = []
    upis = [n for n in nodes.values() if n.role is NodeRole.UPI_PORT]
    if len(upis) == 2:
        a, b = sorted(upis, key=lambda n: n.id)
        edges.append(TopoEdge(a.id, b.id, LinkClass.UPI))
    return nodes, edges


def load_topology(doc: dict | str) -> TopologyGraph:
    """Validate a topology document and build the graph.

    Raises :class:`SchemaError` naming the offending node/field on schema
    violations, disconnected graphs, and duplicate coordinates.
    """
    if isinstance(doc, str):
        doc = json.loads(doc)
    kind_raw = _req(doc, "kind", "topology")
    try:
        kind = GraphKind(kind_raw)
    except ValueError:
        raise SchemaError(f"unknown topology kind '{kind_raw}'") from None
    freqs = {k: float(v) for k, v in _req(doc, "frequencies", "topology").items()}
    if freqs.get("core_mhz", 0) <= 0:
        raise SchemaError("frequencies.core_mhz must be positive")
    if kind is GraphKind.CHIPLET_IF:
        nodes, edges = _load_chiplet(doc)
    else:
        nodes, edges = _load_mesh(doc)
    return TopologyGraph(
        kind=kind,
        socket_count=int(_req(doc, "socket_count", "topology")),
        nodes=nodes,
        edges=edges,
        frequencies=freqs,
        link_costs=_parse_link_costs(doc),
        caches=doc.get("caches"),
        bandwidth=doc.get("bandwidth"),
        name=doc.get("name", ""),
        source_doc=doc,
    )


def load_topology_file(path: str | Path) -> TopologyGraph:
    with open(path) as f:
        return load_topology(json.load(f))


def serialize_topology(graph: TopologyGraph) -> str:
    """Serialize back to the source document; load(serialize(g)) == g."""
    return json.dumps(graph.to_document(), indent=2, sort_keys=True)


def fixture_path(name: str) -> Path:
    """Path of a fixture file shipped with the package."""
    p = FIXTURE_DIR / name
    if not p.exists():
        raise FileNotFoundError(f"no such fixture: {name}")
    return p


# ---------------------------------------------------------------------------
# Routing


def mesh_route(graph: TopologyGraph, a: TopoNode | str, b: TopoNode | str) -> Path:
    """YX route between two tiles: strictly vertical first, then horizontal.

    Hop count equals Manhattan distance.  Both tiles must sit on the same
    socket's mesh; mesh routing is undefined across sockets.
    """
    if graph.kind is not GraphKind.MESH_2D:
        raise ScopeError("mesh_route requires a mesh_2d graph")
    na = graph.nodes[a] if isinstance(a, str) else a
    nb = graph.nodes[b] if isinstance(b, str) else b
    if na.socket != nb.socket:
        raise RouteError(
            f"{na.id} and {nb.id} are on different sockets; "
            "mesh routing is undefined across sockets"
        )
    r, c = na.grid
    tr, tc = nb.grid
    coords = []
    step = 1 if tr >= r else -1
    for rr in range(r + step, tr + step, step) if tr != r else []:
        coords.append((rr, c))
    step = 1 if tc >= c else -1
    for cc in range(c + step, tc + step, step) if tc != c else []:
        coords.append((tr, cc))
    names = tuple([na.id] + [f"s{na.socket}.tile{r}x{c}" for (r, c) in coords[:-1]] + ([nb.id] if coords else []))
    return Path(nodes=names, link_classes=tuple([LinkClass.MESH_HOP] * len(coords)))


def mesh_hops(graph: TopologyGraph, a: TopoNode | str, b: TopoNode | str) -> int:
    return len(mesh_route(graph, a, b))


def if_path(graph: TopologyGraph, a: TopoNode | str, b: TopoNode | str) -> Path:
    """Minimum-cost route through the interconnect fabric.

    Uses per-link-class costs; ties broken by lexicographic node id so output
    is deterministic.  A path crossing sockets traverses exactly one xGMI
    edge; CCX-to-CCX paths always pass the I/O die (the graph has no direct
    CCX-CCX edges by construction).
    """
    if graph.kind is not GraphKind.CHIPLET_IF:
        raise ScopeError("if_path requires a chiplet_if graph")
    na = graph.nodes[a] if isinstance(a, str) else a
    nb = graph.nodes[b] if isinstance(b, str) else b
    if na.id == nb.id:
        return Path(nodes=(na.id,), link_classes=())

    import heapq

    def edge_cost(e: TopoEdge) -> float:
        return graph.link_cost_cycles(e.link_class)[0]

    dist: dict[str, float] = {na.id: 0.0}
    prev: dict[str, tuple[str, TopoEdge]] = {}
    heap: list[tuple[float, str]] = [(0.0, na.id)]
    while heap:
        d, u = heapq.heappop(heap)
        if u == nb.id:
            break
        if d > dist.get(u, float("inf")):
            continue
        for e in sorted(graph._adj[u], key=lambda e: e.other(u)):
            v = e.other(u)
            nd = d + edge_cost(e) + 1e-9  # epsilon prefers fewer hops on ties
            if nd < dist.get(v, float("inf")) - 1e-12:
                dist[v] = nd
                prev[v] = (u, e)
                heapq.heappush(heap, (nd, v))
    if nb.id not in prev and na.id != nb.id:
        raise RouteError(f"no route from {na.id} to {nb.id} (malformed graph)")
    rev_nodes = [nb.id]
    rev_classes = []
    cur = nb.id
    while cur != na.id:
        p, e = prev[cur]
        rev_classes.append(e.link_class)
        rev_nodes.append(p)
        cur = p
    return Path(nodes=tuple(reversed(rev_nodes)), link_classes=tuple(reversed(rev_classes)))


def core_path(graph: TopologyGraph, core_a: int, core_b: int) -> Path:
    """Interconnect path between two cores (chiplet graphs)."""
    return if_path(graph, graph.core(core_a).id, graph.core(core_b).id)


def switch_hops_to_memory(graph: TopologyGraph, core_id: int, numa_node: int) -> int:
    """Switches traversed from a core to a node's memory controller."""
    p = if_path(graph, graph.core(core_id).id, graph.memory_controller(numa_node).id)
    return p.switch_count(graph)


def extra_switch_hops(graph: TopologyGraph, core_id: int, numa_node: int) -> int:
    """Switch traversals beyond the local access (one mandatory I/O-die hop)."""
    local = switch_hops_to_memory(graph, core_id, graph.node_of_core(core_id))
    return switch_hops_to_memory(graph, core_id, numa_node) - local


# ---------------------------------------------------------------------------
# Placement enumeration


def enumerate_placements(graph: TopologyGraph, scope: PlacementScope | str) -> list[Placement]:
    """Deterministically ordered placement tuples for a measurement scope.

    Representative-core policy: matrix scopes use the first core of each
    NUMA node; cache scopes anchor at the lowest-id core.
    """
    scope = PlacementScope(scope)
    chiplet = graph.kind is GraphKind.CHIPLET_IF
    if scope in (PlacementScope.SAME_CCX, PlacementScope.SAME_CCD) and not chiplet:
        raise ScopeError(f"scope {scope.value} is only valid for chiplet graphs")

    out: list[Placement] = []
    if scope is PlacementScope.LOCAL:
        for c in graph.cores:
            out.append(Placement(c, c, graph.node_of_core(c), label="local"))
    elif scope is PlacementScope.SAME_CCX:
        anchor = graph.cores[0]
        ccx = graph.cores_of_ccx(anchor)
        for i in ccx:
            for j in ccx:
                out.append(Placement(i, j, graph.node_of_core(j), label="same_ccx"))
    elif scope is PlacementScope.SAME_CCD:
        anchor = graph.core(graph.cores[0])
        for n in graph.nodes.values():
            if (
                n.role is NodeRole.CORE
                and (n.socket, n.numa_node, n.ccd) == (anchor.socket, anchor.numa_node, anchor.ccd)
                and n.ccx != anchor.ccx
            ):
                ccx_first = min(
                    graph.cores_of_ccx(n.core_index)
                )
                if not any(p.owner == ccx_first for p in out):
                    out.append(
                        Placement(anchor.core_index, ccx_first, n.numa_node, label="same_ccd")
                    )
        out.sort(key=lambda p: p.owner)
    elif scope is PlacementScope.INTRA_SOCKET:
        anchor = graph.cores[0]
        if chiplet:
            me = graph.core(anchor)
            out.append(Placement(anchor, anchor, me.numa_node, label="local"))
            ccx = [c for c in graph.cores_of_ccx(anchor) if c != anchor]
            if ccx:
                out.append(Placement(anchor, ccx[0], me.numa_node, label="same_ccx"))
            out.extend(enumerate_placements(graph, PlacementScope.SAME_CCD))
            for nd in graph.numa_nodes_of_socket(me.socket):
                if nd == me.numa_node:
                    continue
                hops = extra_switch_hops(graph, anchor, nd)
                out.append(
                    Placement(anchor, graph.first_core_of_node(nd), nd, label=f"numa_h{hops}")
                )
        else:
            me = graph.core(anchor)
            for c in graph.cores:
                if c == anchor:
                    continue
                if graph.core(c).socket != me.socket:
                    continue
                nd = graph.node_of_core(c)
                label = "same_snc" if nd == me.numa_node else "other_snc"
                out.append(Placement(anchor, c, nd, label=label))
    elif scope is PlacementScope.INTER_SOCKET:
        if graph.socket_count < 2:
            raise ScopeError("inter_socket scope needs a 2-socket graph")
        for ni in graph.numa_nodes_of_socket(0):
            for nj in graph.numa_nodes_of_socket(1):
                out.append(
                    Placement(
                        graph.first_core_of_node(ni),
                        graph.first_core_of_node(nj),
                        nj,
                        label="inter_socket",
                    )
                )
    elif scope is PlacementScope.ALL_PAIRS:
        # Node-first-core policy: an NxN node matrix.
        for ni in graph.numa_nodes:
            for nj in graph.numa_nodes:
                out.append(
                    Placement(
                        graph.first_core_of_node(ni),
                        graph.first_core_of_node(nj),
                        nj,
                        label="all_pairs",
                    )
                )
    return out


def enumerate_triples(graph: TopologyGraph, socket: int = 0) -> list[Placement]:
    """Home/forwarder placements for dirty-remote request-flow matrices.

    The requester is the socket's first core.  When the forwarding node is
    the requester's own node, the owner is picked from another CCX so the
    request cannot be satisfied CCX-locally.
    """
    if graph.kind is not GraphKind.CHIPLET_IF:
        raise ScopeError("triples are defined on chiplet graphs")
    req = graph.first_core_of_node(graph.numa_nodes_of_socket(socket)[0])
    req_node = graph.node_of_core(req)
    req_ccx = set(graph.cores_of_ccx(req))
    out = []
    for home in graph.numa_nodes_of_socket(socket):
        for fwd in graph.numa_nodes_of_socket(socket):
            owner = graph.first_core_of_node(fwd)
            if owner in req_ccx:
                candidates = [c for c in graph.cores_of_node(fwd) if c not in req_ccx]
                if not candidates:
                    raise TopologyError(f"node {fwd} has no core outside the requester CCX")
                owner = candidates[0]
            out.append(
                Placement(req, owner, home, forwarder_node=fwd, label="triple")
            )
    return out
