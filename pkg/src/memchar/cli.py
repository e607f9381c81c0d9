"""memchar command-line front end.

Subcommands mirror the toolkit's operations: ``topo`` validates and
summarizes a topology document, ``latency``/``bandwidth``/``triad`` run
measurements (simulated or native backend), ``model-fit``/``model-predict``
drive the analytic latency model, ``report`` renders result CSVs as SVG
figures, and ``replay`` re-executes a stored manifest.

Every measurement run writes a ``manifest.json`` next to its results; on
the simulated backend a replayed manifest reproduces the CSVs byte for
byte.  Exit codes: 0 ok, 2 configuration, 3 pinning/affinity, 4 backend,
5 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import chain as chain_mod
from . import harness
from .backends import BackendError, ScriptPlacementError, SimulatedBackend
from .bandwidth import (
    BandwidthError,
    SimBandwidthBackend,
    TriadVerificationError,
    bandwidth_dataset_ladder,
    run_throughput,
    run_triad,
)
from .coherence import CoherenceError, Protocol, plan_state
from .harness import MeasurementPolicy, PolicyError, policy_from_env
from .model import (
    FitObservation,
    LatencyMatrix,
    ModelError,
    fit,
    load_fixture_model,
    load_model_file,
    ram_hop_template,
    remote_socket_template,
)
from .plots import PlotError, emit_plot
from .results import ResultError, ResultSet, RunManifest
from .topology import (
    PlacementScope,
    SchemaError,
    ScopeError,
    TopologyError,
    enumerate_placements,
    enumerate_triples,
    fixture_path,
    load_topology_file,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PINNING = 3
EXIT_BACKEND = 4
EXIT_VERIFY = 5


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.code = code


def _resolve_input(name: str, suffix: str = ".json") -> Path:
    p = Path(name)
    if p.exists():
        return p
    try:
        return fixture_path(name if name.endswith(suffix) else name + suffix)
    except FileNotFoundError:
        raise CliError(f"no such topology/model: {name}") from None


def _load_graph_and_model(args):
    topo_path = _resolve_input(args.topology)
    graph = load_topology_file(topo_path)
    model_name = getattr(args, "model", None)
    if model_name:
        model = load_model_file(_resolve_input(model_name), graph)
    else:
        candidate = topo_path.with_name(topo_path.stem + "_latency_model.json")
        if not candidate.exists():
            raise CliError(
                f"no latency model given and {candidate.name} not found next to topology"
            )
        model = load_model_file(candidate, graph)
    return graph, model


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_cores(text: str) -> list[int]:
    try:
        return [int(c) for c in text.split(",") if c != ""]
    except ValueError:
        raise CliError(f"bad core list {text!r}") from None


# ---------------------------------------------------------------------------
# Subcommands


def cmd_topo(args) -> int:
    graph = load_topology_file(_resolve_input(args.topology))
    print(f"kind: {graph.kind.value}")
    print(f"sockets: {graph.socket_count}")
    print(f"numa nodes: {graph.numa_nodes}")
    print(f"cores: {len(graph.cores)}")
    print(f"edges: {len(graph.edges)}")
    for scope in PlacementScope:
        try:
            n = len(enumerate_placements(graph, scope))
        except ScopeError:
            n = "n/a"
        except TopologyError:
            n = "n/a"
        print(f"placements[{scope.value}]: {n}")
    return EXIT_OK


def _policy_from_args(args) -> tuple[MeasurementPolicy, int, bool]:
    overrides = {}
    if args.outer is not None:
        overrides["outer_repeats"] = args.outer
    if args.inner is not None:
        overrides["inner_repeats"] = args.inner
    if args.sizes is not None:
        overrides["sizes_per_level"] = args.sizes
    if args.reducer is not None:
        overrides["reducer"] = args.reducer
    policy, alignment, huge = policy_from_env(**overrides)
    if args.alignment is not None:
        alignment = args.alignment
    return policy, alignment, huge


def cmd_latency(args) -> int:
    graph, model = _load_graph_and_model(args)
    policy, alignment, huge = _policy_from_args(args)
    if args.reducer is None and args.level == "L1" and args.scope != "local":
        # Remote-L1 samples are noisy; the median coincides with the mode.
        policy = MeasurementPolicy(
            inner_repeats=policy.inner_repeats,
            outer_repeats=policy.outer_repeats,
            sizes_per_level=policy.sizes_per_level,
            reducer="median",
            warmup=policy.warmup,
            flush_levels=policy.flush_levels,
        )
    if args.backend == "sim":
        backend = SimulatedBackend(model)
    else:
        from .native import NativeBackend

        backend = NativeBackend(graph, frequency_mhz=args.freq)

    if args.triples:
        if args.state != "M" or args.level != "L2":
            raise CliError("the home/forwarder matrix is defined for --state M --level L2")
        placements = enumerate_triples(graph)
    else:
        placements = enumerate_placements(graph, args.scope)
    if not placements:
        raise CliError(f"scope {args.scope!r} yields no placements")

    state = args.state
    protocol = model.protocol
    sizes = harness.level_dataset_bytes(graph, args.level, policy.sizes_per_level)
    chains = [
        chain_mod.generate_chain(sz, alignment, args.seed, huge) for sz in sizes
    ]
    records = []
    for placement in placements:
        helper = None
        if state in ("O", "S", "F"):
            helper = harness.auto_helper(graph, placement.owner, placement.requester)
        script = plan_state(
            state,
            protocol,
            owner=placement.owner,
            helper=helper,
            level=args.level,
            requester=placement.requester,
        )
        records.append(
            harness.measure_latency(chains, script, placement, policy, backend)
        )

    out = _out_dir(args)
    manifest = RunManifest(
        command="latency",
        topology=args.topology,
        model=args.model,
        backend=args.backend,
        out_dir=str(out),
        seed=args.seed,
        scope=args.scope,
        state=state,
        level=args.level,
        alignment=alignment,
        huge_pages=huge,
        policy={
            "inner_repeats": policy.inner_repeats,
            "outer_repeats": policy.outer_repeats,
            "sizes_per_level": policy.sizes_per_level,
            "reducer": policy.reducer,
        },
        args={"triples": args.triples},
    )
    rs = ResultSet(records=records, manifest=manifest)
    rs.to_csv(out / "results.csv")
    manifest.save(out / "manifest.json")
    print(f"{len(records)} records -> {out / 'results.csv'}")
    return EXIT_OK


def cmd_bandwidth(args) -> int:
    graph = load_topology_file(_resolve_input(args.topology))
    if args.backend == "sim":
        backend = SimBandwidthBackend(graph)
    else:
        raise CliError("native bandwidth runs are driven via the API", EXIT_BACKEND)
    cores = _parse_cores(args.cores)
    policy = MeasurementPolicy(
        outer_repeats=args.outer or 1, inner_repeats=1, sizes_per_level=1, reducer="max"
    )
    if args.bytes is not None:
        sizes = [args.bytes]
    elif args.level is not None:
        sizes = bandwidth_dataset_ladder(graph, args.level)
    else:
        raise CliError("bandwidth needs --bytes or --level")
    records = [
        run_throughput(args.kernel, sz, cores, policy, backend,
                       allow_cross_socket=args.cross_socket)
        for sz in sizes
    ]
    out = _out_dir(args)
    manifest = RunManifest(
        command="bandwidth",
        topology=args.topology,
        backend=args.backend,
        out_dir=str(out),
        level=args.level,
        args={"kernel": args.kernel, "cores": cores, "bytes": args.bytes,
              "cross_socket": args.cross_socket, "outer": args.outer},
    )
    rs = ResultSet(records=records, manifest=manifest)
    rs.to_csv(out / "bandwidth.csv")
    manifest.save(out / "manifest.json")
    print(f"{len(records)} records -> {out / 'bandwidth.csv'}")
    return EXIT_OK


def cmd_triad(args) -> int:
    graph = load_topology_file(_resolve_input(args.topology))
    backend = SimBandwidthBackend(graph)
    cores = _parse_cores(args.cores)
    record = run_triad(args.bytes, cores, args.nontemporal, backend)
    out = _out_dir(args)
    manifest = RunManifest(
        command="triad",
        topology=args.topology,
        backend=args.backend,
        out_dir=str(out),
        args={"cores": cores, "bytes": args.bytes, "nontemporal": args.nontemporal},
    )
    rs = ResultSet(records=[record], manifest=manifest)
    rs.to_csv(out / "bandwidth.csv")
    manifest.save(out / "manifest.json")
    print(
        f"triad {record.bandwidth_gbps:.1f} GB/s on {len(cores)} cores "
        f"-> {out / 'bandwidth.csv'}"
    )
    return EXIT_OK


def _observations_from_csv(path: Path, graph) -> list[FitObservation]:
    import csv as _csv

    with open(path, newline="") as fh:
        rows = list(_csv.DictReader(fh))
    if not rows:
        raise CliError(f"{path}: empty fit input")
    obs = []
    if "requester_node" in rows[0]:
        for r in rows:
            obs.append(
                FitObservation(
                    requester=graph.first_core_of_node(int(r["requester_node"])),
                    home=int(r["home_node"]),
                    cycles=float(r["cycles"]),
                )
            )
        return obs
    # Published-table format: use the RAM rows of the local socket.
    class_to_home = {"local": 0, "numa1": 1, "numa2": 2, "numa3": 3}
    req = graph.first_core_of_node(graph.numa_nodes[0])
    for r in rows:
        if r["level"] != "RAM" or r["source_class"] not in class_to_home:
            continue
        obs.append(
            FitObservation(
                requester=req,
                home=class_to_home[r["source_class"]],
                cycles=float(r["cycles"]),
            )
        )
    if not obs:
        raise CliError(f"{path}: no usable RAM rows for fitting")
    return obs


def cmd_model_fit(args) -> int:
    graph, _model = _load_graph_and_model(args)
    obs = _observations_from_csv(Path(args.input), graph)
    template = (
        ram_hop_template(graph)
        if args.template == "ram_hops"
        else remote_socket_template(graph)
    )
    result = fit(template, obs)
    out = _out_dir(args)
    (out / "fitted_params.json").write_text(
        json.dumps(result.params, indent=1, sort_keys=True) + "\n"
    )
    (out / "residuals.txt").write_text(result.report())
    manifest = RunManifest(
        command="model-fit",
        topology=args.topology,
        model=args.model,
        backend="sim",
        out_dir=str(out),
        args={"input": str(args.input), "template": args.template},
    )
    manifest.save(out / "manifest.json")
    print(result.report())
    return EXIT_OK


def cmd_model_predict(args) -> int:
    _graph, model = _load_graph_and_model(args)
    cycles = model.predict(
        args.requester, args.home, args.forwarder, args.state, args.level
    )
    ns = harness.cycles_to_ns(cycles, model.core_mhz)
    print(f"{cycles!r} cycles ({ns!r} ns @ {model.core_mhz} MHz)")
    return EXIT_OK


def cmd_report(args) -> int:
    rs = ResultSet.from_csv(Path(args.input))
    svg, txt = emit_plot(
        rs.records,
        kind=args.kind,
        out_base=Path(args.out) / args.name,
        x=args.x,
        y=args.y,
        value=args.value,
        title=args.title,
    )
    print(f"{svg}\n{txt}")
    return EXIT_OK


def cmd_replay(args) -> int:
    manifest = RunManifest.load(args.manifest)
    out = args.out or manifest.out_dir
    if manifest.command == "latency":
        ns = argparse.Namespace(
            topology=manifest.topology,
            model=manifest.model,
            backend=manifest.backend,
            scope=manifest.scope,
            state=manifest.state,
            level=manifest.level,
            seed=manifest.seed,
            alignment=manifest.alignment,
            out=out,
            outer=manifest.policy.get("outer_repeats"),
            inner=manifest.policy.get("inner_repeats"),
            sizes=manifest.policy.get("sizes_per_level"),
            reducer=manifest.policy.get("reducer"),
            triples=manifest.args.get("triples", False),
            freq=None,
        )
        return cmd_latency(ns)
    if manifest.command == "bandwidth":
        ns = argparse.Namespace(
            topology=manifest.topology,
            backend=manifest.backend,
            kernel=manifest.args["kernel"],
            cores=",".join(str(c) for c in manifest.args["cores"]),
            bytes=manifest.args.get("bytes"),
            level=manifest.level,
            cross_socket=manifest.args.get("cross_socket", False),
            outer=manifest.args.get("outer"),
            out=out,
        )
        return cmd_bandwidth(ns)
    if manifest.command == "triad":
        ns = argparse.Namespace(
            topology=manifest.topology,
            backend=manifest.backend,
            cores=",".join(str(c) for c in manifest.args["cores"]),
            bytes=manifest.args["bytes"],
            nontemporal=manifest.args.get("nontemporal", True),
            out=out,
        )
        return cmd_triad(ns)
    raise CliError(f"manifest command {manifest.command!r} cannot be replayed")


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="memchar",
        description="memory-hierarchy characterization toolkit",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, model=True):
        p.add_argument("--topology", required=True, help="topology JSON file or fixture name")
        if model:
            p.add_argument("--model", help="latency model JSON (defaults to sibling fixture)")
        p.add_argument("--out", default="results", help="output directory")

    p = sub.add_parser("topo", help="validate and summarize a topology")
    p.add_argument("--topology", required=True)
    p.set_defaults(func=cmd_topo)

    p = sub.add_parser("latency", help="coherence-state-controlled latency matrix")
    common(p)
    p.add_argument("--backend", choices=("sim", "native"), default="sim")
    p.add_argument("--scope", default="intra_socket",
                   choices=[s.value for s in PlacementScope])
    p.add_argument("--state", default="M", choices=list("MOESFI"))
    p.add_argument("--level", default="L2", choices=("L1", "L2", "L3", "RAM"))
    p.add_argument("--triples", action="store_true",
                   help="home/forwarder matrix instead of a scope")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alignment", type=int, default=None)
    p.add_argument("--outer", type=int, default=None)
    p.add_argument("--inner", type=int, default=None)
    p.add_argument("--sizes", type=int, default=None)
    p.add_argument("--reducer", choices=("min", "max", "median"), default=None)
    p.add_argument("--freq", type=float, default=None,
                   help="operator-pinned core frequency (native backend)")
    p.set_defaults(func=cmd_latency)

    p = sub.add_parser("bandwidth", help="streaming read throughput")
    common(p, model=False)
    p.add_argument("--backend", choices=("sim", "native"), default="sim")
    p.add_argument("--kernel", default="read256",
                   choices=("read128", "read256", "read512"))
    p.add_argument("--cores", default="0")
    p.add_argument("--level", choices=("L1", "L2", "L3", "RAM"), default=None)
    p.add_argument("--bytes", type=int, default=None)
    p.add_argument("--cross-socket", dest="cross_socket", action="store_true")
    p.add_argument("--outer", type=int, default=None)
    p.set_defaults(func=cmd_bandwidth)

    p = sub.add_parser("triad", help="a[i] = b[i] + s*c[i] bandwidth")
    common(p, model=False)
    p.add_argument("--backend", choices=("sim",), default="sim")
    p.add_argument("--cores", default="0")
    p.add_argument("--bytes", type=int, required=True)
    p.add_argument("--nt", dest="nontemporal", action="store_true", default=True)
    p.add_argument("--no-nt", dest="nontemporal", action="store_false")
    p.set_defaults(func=cmd_triad)

    p = sub.add_parser("model-fit", help="least-squares hop-cost fit")
    common(p)
    p.add_argument("--input", required=True, help="anchor or published-table CSV")
    p.add_argument("--template", choices=("ram_hops", "remote_socket"),
                   default="ram_hops")
    p.set_defaults(func=cmd_model_fit)

    p = sub.add_parser("model-predict", help="one latency prediction")
    common(p)
    p.add_argument("--requester", type=int, required=True)
    p.add_argument("--home", type=int, required=True)
    p.add_argument("--forwarder", type=int, default=None)
    p.add_argument("--state", default="M")
    p.add_argument("--level", default="L2")
    p.set_defaults(func=cmd_model_predict)

    p = sub.add_parser("report", help="render a result CSV as SVG + plot data")
    p.add_argument("--input", required=True)
    p.add_argument("--kind", choices=("heatmap", "grouped_bars"), default="heatmap")
    p.add_argument("--x", default="home")
    p.add_argument("--y", default="requester")
    p.add_argument("--value", default="latency_cycles")
    p.add_argument("--name", default="plot")
    p.add_argument("--title", default="")
    p.add_argument("--out", default="results")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("replay", help="re-run a stored manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_replay)

    return ap


_CONFIG_ERRORS = (
    CliError,
    SchemaError,
    ScopeError,
    TopologyError,
    PolicyError,
    ModelError,
    CoherenceError,
    ResultError,
    chain_mod.ChainError,
    harness.HarnessError,
)


def main(argv=None) -> int:
    from .native import PinningError

    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except TriadVerificationError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except PinningError as exc:
        print(f"pinning/affinity error: {exc}", file=sys.stderr)
        return EXIT_PINNING
    except ScriptPlacementError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except BandwidthError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except PermissionError as exc:
        print(f"pinning/affinity error: {exc}", file=sys.stderr)
        return EXIT_PINNING
    except OSError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
