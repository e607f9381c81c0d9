"""Result persistence: versioned CSV schemas and run manifests.

Cycles are the primary unit everywhere; nanoseconds are derived at read
time, never stored.  Column layouts are fixed per schema version so result
files diff cleanly across runs; any column change bumps the version.

Every run writes a manifest copy alongside its results; replaying a
manifest on the simulated backend reproduces the CSV byte for byte.
Floats are serialized with ``repr`` (shortest round-trip form), so
parse(write(x)) is the identity.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from .bandwidth import BandwidthRecord
from .harness import MeasurementRecord
from .topology import Placement

__all__ = [
    "SCHEMA_VERSION",
    "ResultError",
    "RunManifest",
    "ResultSet",
    "LATENCY_COLUMNS",
    "BANDWIDTH_COLUMNS",
]

SCHEMA_VERSION = 1

LATENCY_COLUMNS = [
    "backend",
    "requester",
    "owner",
    "home",
    "forwarder",
    "state",
    "level",
    "bytes",
    "samples",
    "min_cycles",
    "max_cycles",
    "median_cycles",
    "freq_mhz",
    "latency_cycles",
    "reducer",
    "sizes",
    "alignment",
    "huge_pages",
    "seed",
    "overhead_cycles",
    "label",
]

BANDWIDTH_COLUMNS = [
    "backend",
    "kernel",
    "cores",
    "level",
    "bytes",
    "bytes_moved",
    "elapsed_cycles",
    "bandwidth_gbps",
    "bytes_per_cycle",
    "freq_mhz",
    "flags",
    "degraded_from",
]


class ResultError(Exception):
    pass


def _f(x: float) -> str:
    return repr(float(x))


def _join_f(values) -> str:
    return ";".join(_f(v) for v in values)


def _join_i(values) -> str:
    return ";".join(str(int(v)) for v in values)


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce a run's result files."""

    command: str
    topology: str
    backend: str
    out_dir: str = ""
    model: Optional[str] = None
    seed: int = 0
    scope: Optional[str] = None
    state: Optional[str] = None
    level: Optional[str] = None
    alignment: int = 512
    huge_pages: bool = True
    policy: dict = field(default_factory=dict)
    args: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    _COMMANDS = (
        "topo",
        "latency",
        "bandwidth",
        "triad",
        "model-fit",
        "model-predict",
        "report",
    )

    def __post_init__(self):
        if self.command not in self._COMMANDS:
            raise ResultError(f"unknown manifest command {self.command!r}")

    def to_json(self) -> str:
        doc = {k: v for k, v in asdict(self).items()}
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        doc = json.loads(Path(path).read_text())
        return cls(**doc)


@dataclass
class ResultSet:
    """Append-only collection of records plus its manifest."""

    records: list
    manifest: Optional[RunManifest] = None
    schema_version: int = SCHEMA_VERSION

    def append(self, record) -> None:
        self.records.append(record)

    @property
    def kind(self) -> str:
        if not self.records:
            return "latency"
        return "bandwidth" if isinstance(self.records[0], BandwidthRecord) else "latency"

    # -- latency ----------------------------------------------------------

    @staticmethod
    def _latency_row(r: MeasurementRecord) -> list[str]:
        p = r.placement
        return [
            r.backend,
            str(p.requester),
            str(p.owner),
            str(p.home_node),
            "" if p.forwarder_node is None else str(p.forwarder_node),
            r.state,
            r.level,
            str(r.dataset_bytes),
            _join_f(r.samples),
            _f(r.min_cycles),
            _f(r.max_cycles),
            _f(r.median_cycles),
            _f(r.frequency_mhz),
            _f(r.latency_cycles),
            r.reducer,
            _join_i(r.dataset_sizes),
            str(r.alignment),
            "1" if r.huge_pages else "0",
            str(r.seed),
            _f(r.overhead_cycles),
            p.label,
        ]

    @staticmethod
    def _latency_record(row: dict) -> MeasurementRecord:
        placement = Placement(
            requester=int(row["requester"]),
            owner=int(row["owner"]),
            home_node=int(row["home"]),
            forwarder_node=int(row["forwarder"]) if row["forwarder"] else None,
            label=row["label"],
        )
        return MeasurementRecord(
            placement=placement,
            state=row["state"],
            level=row["level"],
            dataset_bytes=int(row["bytes"]),
            dataset_sizes=tuple(int(v) for v in row["sizes"].split(";") if v),
            latency_cycles=float(row["latency_cycles"]),
            min_cycles=float(row["min_cycles"]),
            max_cycles=float(row["max_cycles"]),
            median_cycles=float(row["median_cycles"]),
            samples=tuple(float(v) for v in row["samples"].split(";") if v),
            frequency_mhz=float(row["freq_mhz"]),
            backend=row["backend"],
            alignment=int(row["alignment"]),
            huge_pages=row["huge_pages"] == "1",
            seed=int(row["seed"]),
            overhead_cycles=float(row["overhead_cycles"]),
            reducer=row["reducer"],
        )

    # -- bandwidth ----------------------------------------------------------

    @staticmethod
    def _bandwidth_row(r: BandwidthRecord) -> list[str]:
        return [
            r.backend,
            r.kernel,
            _join_i(r.core_set),
            r.level,
            str(r.dataset_bytes),
            str(r.bytes_moved),
            _f(r.elapsed_cycles),
            _f(r.bandwidth_gbps),
            _f(r.bytes_per_cycle),
            _f(r.frequency_mhz),
            ";".join(r.flags),
            r.degraded_from or "",
        ]

    @staticmethod
    def _bandwidth_record(row: dict) -> BandwidthRecord:
        return BandwidthRecord(
            kernel=row["kernel"],
            dataset_bytes=int(row["bytes"]),
            core_set=tuple(int(v) for v in row["cores"].split(";") if v),
            level=row["level"],
            bytes_moved=int(row["bytes_moved"]),
            elapsed_cycles=float(row["elapsed_cycles"]),
            bandwidth_gbps=float(row["bandwidth_gbps"]),
            bytes_per_cycle=float(row["bytes_per_cycle"]),
            frequency_mhz=float(row["freq_mhz"]),
            backend=row["backend"],
            flags=tuple(v for v in row["flags"].split(";") if v),
            degraded_from=row["degraded_from"] or None,
        )

    # -- files ----------------------------------------------------------------

    def to_csv(self, path: str | Path) -> None:
        cols = BANDWIDTH_COLUMNS if self.kind == "bandwidth" else LATENCY_COLUMNS
        rows = (
            [self._bandwidth_row(r) for r in self.records]
            if self.kind == "bandwidth"
            else [self._latency_row(r) for r in self.records]
        )
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            w.writerows(rows)

    @classmethod
    def from_csv(cls, path: str | Path, manifest: Optional[RunManifest] = None) -> "ResultSet":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ResultError(f"{path}: empty result file") from None
            if header == LATENCY_COLUMNS:
                build, cols = cls._latency_record, LATENCY_COLUMNS
            elif header == BANDWIDTH_COLUMNS:
                build, cols = cls._bandwidth_record, BANDWIDTH_COLUMNS
            else:
                raise ResultError(
                    f"{path}: unknown result schema (header {header[:4]}...)"
                )
            records = [build(dict(zip(cols, row))) for row in reader]
        return cls(records=records, manifest=manifest)
