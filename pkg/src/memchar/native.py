"""Native x86 measurement backend.

Implements the hardware contract behind the backend interface: serialized
TSC timestamps, a dependent-load chase loop, core pinning via
``sched_setaffinity``, and NUMA-bound allocation via libnuma when present
(first-touch from the pinned owner thread otherwise, recorded in the
environment metadata).  Transparent huge pages are requested with
``madvise(MADV_HUGEPAGE)``; if unavailable, measurement proceeds with the
flag recorded as off.

The C kernels are compiled once per machine into a cache directory with the
system compiler; when no compiler or no x86-64 is available every entry
point raises :class:`BackendUnavailable` so callers can degrade cleanly.

Orchestration follows the measurement listing: workers are pinned threads
synchronized by barriers; the owner (and helper) touch the buffer to set the
coherence state while the requester waits, then the requester times the
chase.
"""

from __future__ import annotations

import ctypes
import ctypes.util
import mmap
import os
import platform
import shutil
import subprocess
import tempfile
import threading
from pathlib import Path
from typing import Optional, Sequence

from .backends import BackendError
from .chain import ChainBuffer
from .coherence import Action, CoherenceScript, WorkerRole
from .harness import ChaseTiming, FlushPlan, MeasurementPolicy, flush_plan
from .topology import Placement, TopologyGraph

__all__ = ["BackendUnavailable", "PinningError", "NativeBackend", "build_kernels"]

_SRC = Path(__file__).parent / "native_src" / "kernels.c"
MADV_HUGEPAGE = 14


class BackendUnavailable(BackendError):
    pass


class PinningError(BackendError):
    pass


def _cache_dir() -> Path:
    root = os.environ.get("XDG_CACHE_HOME", os.path.expanduser("~/.cache"))
    d = Path(root) / "memchar"
    d.mkdir(parents=True, exist_ok=True)
    return d


def build_kernels(force: bool = False) -> Path:
    """Compile the C kernels; returns the shared-object path."""
    if platform.machine() not in ("x86_64", "AMD64"):
        raise BackendUnavailable(f"native backend needs x86-64, got {platform.machine()}")
    cc = os.environ.get("CC") or shutil.which("cc") or shutil.which("gcc") or shutil.which("clang")
    if cc is None:
        raise BackendUnavailable("no C compiler found for the native kernels")
    out = _cache_dir() / "memchar_kernels.so"
    if out.exists() and not force:
        return out
    cmd = [cc, "-O2", "-shared", "-fPIC", "-msse2", str(_SRC), "-o", str(out)]
    try:
        cmd_avx = cmd[:]
        cmd_avx.insert(1, "-mavx2")
        res = subprocess.run(cmd_avx, capture_output=True, text=True)
        if res.returncode != 0:
            res = subprocess.run(cmd, capture_output=True, text=True)
        if res.returncode != 0:
            raise BackendUnavailable(f"kernel compile failed: {res.stderr[-400:]}")
    except FileNotFoundError as exc:
        raise BackendUnavailable(f"compiler not runnable: {exc}") from exc
    return out


def _load_libnuma():
    path = ctypes.util.find_library("numa")
    if not path:
        return None
    try:
        lib = ctypes.CDLL(path)
        if lib.numa_available() < 0:
            return None
        lib.numa_alloc_onnode.restype = ctypes.c_void_p
        lib.numa_alloc_onnode.argtypes = [ctypes.c_size_t, ctypes.c_int]
        lib.numa_free.argtypes = [ctypes.c_void_p, ctypes.c_size_t]
        return lib
    except OSError:
        return None


class _Region:
    """Page-aligned buffer, optionally NUMA-bound and THP-advised."""

    def __init__(self, nbytes: int, numa_node: Optional[int], libnuma, huge: bool):
        self.nbytes = nbytes
        self.libnuma = None
        self.numa_bound = False
        self.huge_pages = False
        if libnuma is not None and numa_node is not None:
            ptr = libnuma.numa_alloc_onnode(nbytes, numa_node)
            if ptr:
                self.addr = ptr
                self.libnuma = libnuma
                self.numa_bound = True
                self._mm = None
                return
        self._mm = mmap.mmap(-1, nbytes)
        if huge and hasattr(self._mm, "madvise"):
            try:
                self._mm.madvise(MADV_HUGEPAGE)
                self.huge_pages = True
            except OSError:
                pass
        self.addr = ctypes.addressof(ctypes.c_char.from_buffer(self._mm))

    def close(self):
        if self.libnuma is not None:
            self.libnuma.numa_free(self.addr, self.nbytes)
        # mmap regions are reclaimed with the object


def _pin_current_thread(core: int):
    try:
        os.sched_setaffinity(0, {core})
    except (AttributeError, OSError, ValueError) as exc:
        raise PinningError(f"cannot pin to core {core}: {exc}") from exc


class NativeBackend:
    """Pinned-thread x86 backend timing real pointer chases."""

    name = "native"

    def __init__(
        self,
        topology: TopologyGraph,
        frequency_mhz: Optional[float] = None,
        flush_levels=frozenset({"L1", "L2", "L3"}),
    ):
        self.topology = topology
        self.lib = ctypes.CDLL(str(build_kernels()))
        self.lib.mc_timer_overhead.restype = ctypes.c_uint64
        self.lib.mc_chase.restype = ctypes.c_uint64
        self.lib.mc_chase.argtypes = [ctypes.c_void_p, ctypes.c_uint64, ctypes.c_void_p]
        self.lib.mc_touch.restype = ctypes.c_uint64
        self.lib.mc_touch.argtypes = [ctypes.c_void_p, ctypes.c_uint64, ctypes.c_uint64]
        self.lib.mc_write_touch.argtypes = [
            ctypes.c_void_p, ctypes.c_uint64, ctypes.c_uint64, ctypes.c_char,
        ]
        self.lib.mc_clflush.argtypes = [ctypes.c_void_p, ctypes.c_uint64, ctypes.c_uint64]
        self.libnuma = _load_libnuma()
        # Operator-pinned frequency; the backend never adjusts clocks.
        self.frequency_mhz = frequency_mhz or self._tsc_mhz_estimate()
        self.flush_levels = frozenset(flush_levels)
        self._scratch: Optional[_Region] = None

    def _tsc_mhz_estimate(self) -> float:
        """TSC ticks per microsecond over a short sleep window."""
        import time

        self.lib.mc_tsc.restype = ctypes.c_uint64
        t0 = time.perf_counter_ns()
        c0 = self.lib.mc_tsc()
        time.sleep(0.05)
        c1 = self.lib.mc_tsc()
        t1 = time.perf_counter_ns()
        return (c1 - c0) * 1000.0 / max(1, (t1 - t0))

    def time_empty(self) -> float:
        return float(self.lib.mc_timer_overhead())

    # -- memory ------------------------------------------------------------

    def materialize_chain(self, chain: ChainBuffer, home_node: int) -> _Region:
        region = _Region(
            chain.total_bytes,
            home_node if self.libnuma else None,
            self.libnuma,
            chain.huge_pages,
        )
        base = region.addr
        align = chain.stride_alignment
        arr_t = ctypes.c_uint64 * 1
        for idx in range(chain.element_count):
            slot = arr_t.from_address(base + idx * align)
            slot[0] = base + chain.successors[idx] * align
        return region

    def _flush(self, requester_core: int):
        plan = flush_plan(self.topology, self.flush_levels)
        if not plan.actions:
            return
        if self._scratch is None or self._scratch.nbytes < plan.scratch_bytes:
            self._scratch = _Region(plan.scratch_bytes, None, None, False)
        self.lib.mc_touch(self._scratch.addr, self._scratch.nbytes, plan.stride)

    # -- measurement ---------------------------------------------------------

    def run_point(
        self,
        chains: Sequence[ChainBuffer],
        script: CoherenceScript,
        placement: Placement,
        policy: MeasurementPolicy,
    ):
        regions = {
            c: self.materialize_chain(c, placement.home_node) for c in chains
        }
        grid = []
        try:
            for _ in range(policy.outer_repeats):
                outer = []
                for chain in chains:
                    outer.append(
                        self._measure_one(
                            chain, regions[chain], script, placement, policy
                        )
                    )
                grid.append(outer)
        finally:
            for r in regions.values():
                r.close()
        return grid

    def _measure_one(self, chain, region, script, placement, policy):
        results: list[ChaseTiming] = []
        errors: list[BaseException] = []
        same_core = all(
            c == placement.requester for c in script.worker_cores.values()
        )
        if same_core:
            # Local placement: one pinned thread prepares and measures.
            _pin_current_thread(placement.requester)
            self._flush(placement.requester)
            for rep in range(policy.inner_repeats):
                self._apply_script(script, region, chain, pin=False)
                if policy.warmup and rep == 0:
                    self.lib.mc_touch(region.addr, region.nbytes, chain.stride_alignment)
                    self._chase(region, chain.element_count)
                    self._apply_script(script, region, chain, pin=False)
                elapsed = self._chase(region, chain.element_count)
                results.append(ChaseTiming(float(elapsed), chain.element_count))
            return results

        ready = threading.Barrier(2, timeout=60)
        done = threading.Barrier(2, timeout=60)

        def preparer():
            # Executes each script step pinned to that step's worker core, so
            # accesses land in the right caches.
            try:
                for _ in range(policy.inner_repeats):
                    ready.wait()
                    self._apply_script(script, region, chain, pin=True)
                    done.wait()
            except threading.BrokenBarrierError:
                pass
            except BaseException as exc:
                errors.append(exc)
                for b in (ready, done):
                    try:
                        b.abort()
                    except Exception:
                        pass

        worker = threading.Thread(target=preparer, daemon=True)
        worker.start()
        try:
            _pin_current_thread(placement.requester)
            self._flush(placement.requester)
            if policy.warmup:
                self.lib.mc_touch(region.addr, region.nbytes, chain.stride_alignment)
            for _ in range(policy.inner_repeats):
                ready.wait()
                done.wait()  # state prepared on the owner/helper cores
                elapsed = self._chase(region, chain.element_count)
                results.append(ChaseTiming(float(elapsed), chain.element_count))
        except threading.BrokenBarrierError:
            pass
        finally:
            for b in (ready, done):
                try:
                    b.abort()
                except Exception:
                    pass
            worker.join(timeout=60)
        if errors:
            raise errors[0]
        if len(results) != policy.inner_repeats:
            raise BackendError("native measurement aborted before completing")
        return results

    def _chase(self, region, count: int) -> int:
        sink = ctypes.c_void_p()
        return self.lib.mc_chase(region.addr, count, ctypes.byref(sink))

    def _apply_script(self, script: CoherenceScript, region, chain: ChainBuffer, pin: bool):
        # Touch data correctly for the target state, stepping through the
        # script on each worker's core in order.
        stride = chain.stride_alignment
        for step in script.steps:
            core = script.worker_cores.get(step.worker)
            if core is None:
                continue
            if pin:
                _pin_current_thread(core)
            if step.action is Action.READ:
                self.lib.mc_touch(region.addr, region.nbytes, stride)
            elif step.action is Action.WRITE:
                # Dirty the line next to the pointer; the chase stays intact.
                self.lib.mc_write_touch(region.addr + 8, region.nbytes - 8, stride, b"\x01")
            elif step.action is Action.FLUSH:
                self.lib.mc_clflush(region.addr, region.nbytes, 64)
            elif step.action in (Action.EVICT_L1, Action.EVICT_L2):
                # Capacity eviction: displace with a scratch sweep sized to
                # the level being vacated.
                caches = self.topology.caches
                kib = caches.get("l1_kib", 32) if step.action is Action.EVICT_L1 else caches.get("l2_kib", 512)
                nbytes = 2 * int(kib) * 1024
                if self._scratch is None or self._scratch.nbytes < nbytes:
                    self._scratch = _Region(nbytes, None, None, False)
                self.lib.mc_touch(self._scratch.addr, nbytes, 64)


class NativeBandwidthBackend:
    """Compiled streaming-read and triad kernels on the host CPU.

    Reports TSC-tick cycle counts; the bandwidth derives from the
    operator-pinned frequency, which this backend records but never sets.
    Used by the hardware-gated smoke checks; the simulated backend is the
    regression surface.
    """

    name = "native"

    def __init__(self, topology: TopologyGraph, frequency_mhz: Optional[float] = None):
        self.topology = topology
        self.lib = ctypes.CDLL(str(build_kernels()))
        for fn in ("mc_read128", "mc_read256"):
            if hasattr(self.lib, fn):
                getattr(self.lib, fn).restype = ctypes.c_uint64
                getattr(self.lib, fn).argtypes = [
                    ctypes.c_void_p, ctypes.c_uint64, ctypes.c_uint64, ctypes.c_void_p,
                ]
        self.lib.mc_triad.restype = ctypes.c_uint64
        self.lib.mc_triad.argtypes = [
            ctypes.c_void_p, ctypes.c_void_p, ctypes.c_void_p,
            ctypes.c_double, ctypes.c_uint64, ctypes.c_int,
        ]
        self.lib.mc_tsc.restype = ctypes.c_uint64
        if frequency_mhz is None:
            import time

            t0 = time.perf_counter_ns()
            c0 = self.lib.mc_tsc()
            time.sleep(0.05)
            c1 = self.lib.mc_tsc()
            t1 = time.perf_counter_ns()
            frequency_mhz = (c1 - c0) * 1000.0 / max(1, t1 - t0)
        self.frequency_mhz = frequency_mhz

    def _kernel_fn(self, kernel_name: str):
        fn = {"read128": "mc_read128", "read256": "mc_read256"}.get(kernel_name)
        if fn is None or not hasattr(self.lib, fn):
            raise BackendUnavailable(f"kernel {kernel_name} not compiled on this host")
        return getattr(self.lib, fn)

    def run_read(self, kernel_name: str, dataset_bytes: int, core_set):
        from .bandwidth import BandwidthRecord

        cores = tuple(core_set)
        degraded_from = None
        if kernel_name == "read512":
            # No AVX-512 kernel is compiled; degrade loudly, never silently.
            degraded_from, kernel_name = "read512", "read256"
        fn = self._kernel_fn(kernel_name)
        reps = max(1, (64 << 20) // dataset_bytes)
        if len(cores) == 1:
            _pin_current_thread(cores[0])
            region = _Region(dataset_bytes, None, None, False)
            self.lib.mc_write_touch(region.addr, dataset_bytes, 64, b"\x01")
            check = ctypes.c_uint64()
            best = min(
                fn(region.addr, dataset_bytes, reps, ctypes.byref(check))
                for _ in range(3)
            )
            elapsed, total = best, dataset_bytes * reps
        else:
            results = []
            barrier = threading.Barrier(len(cores), timeout=120)

            def worker(core):
                _pin_current_thread(core)
                region = _Region(dataset_bytes, None, None, False)
                self.lib.mc_write_touch(region.addr, dataset_bytes, 64, b"\x01")
                check = ctypes.c_uint64()
                barrier.wait()
                t = fn(region.addr, dataset_bytes, reps, ctypes.byref(check))
                results.append(t)

            threads = [threading.Thread(target=worker, args=(c,)) for c in cores]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            elapsed = max(results)  # aggregate elapsed = slowest worker
            total = dataset_bytes * reps * len(cores)
        from .bandwidth import SimBandwidthBackend  # level classification helper

        level = "RAM"
        caches = self.topology.caches
        if dataset_bytes <= caches.get("l1_kib", 0) * 1024:
            level = "L1"
        elif dataset_bytes <= caches.get("l2_kib", 0) * 1024:
            level = "L2"
        elif dataset_bytes <= caches.get("l3_mib", 0) * 1024 * 1024:
            level = "L3"
        flags = ("width_degraded",) if degraded_from else ()
        return BandwidthRecord.from_raw(
            kernel_name, dataset_bytes, cores, level, total, float(elapsed),
            self.frequency_mhz, self.name, flags=flags, degraded_from=degraded_from,
        )

    def run_triad(self, array_bytes: int, core_set, nontemporal: bool):
        from .bandwidth import BandwidthRecord, TRIAD_SCALAR, verify_triad
        import numpy as np

        cores = tuple(core_set)
        _pin_current_thread(cores[0])
        n = array_bytes // 8
        a = np.zeros(n)
        b = np.random.default_rng(1).standard_normal(n)
        c = np.random.default_rng(2).standard_normal(n)
        ticks = self.lib.mc_triad(
            a.ctypes.data, b.ctypes.data, c.ctypes.data,
            TRIAD_SCALAR, n, 1 if nontemporal else 0,
        )
        verify_triad(a, b, c, TRIAD_SCALAR, sample_fraction=0.01)
        return BandwidthRecord.from_raw(
            "triad-nt" if nontemporal else "triad",
            array_bytes, cores, "RAM", 3 * array_bytes, float(ticks),
            self.frequency_mhz, self.name,
        )
