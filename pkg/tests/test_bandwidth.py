"""Throughput kernels, triad, scaling/saturation analysis."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memchar.bandwidth import (
    KERNELS,
    BandwidthError,
    BandwidthRecord,
    SimBandwidthBackend,
    ThroughputKernel,
    TriadVerificationError,
    bandwidth_dataset_ladder,
    run_throughput,
    run_triad,
    scaling_series,
    verify_triad,
)
from memchar.harness import MeasurementPolicy
from memchar.topology import fixture_path, load_topology_file

POL = MeasurementPolicy(inner_repeats=1, outer_repeats=1, sizes_per_level=1, reducer="max")


@pytest.fixture(scope="module")
def rome_bw():
    return SimBandwidthBackend(load_topology_file(fixture_path("rome_2s.json")))


@pytest.fixture(scope="module")
def clx_bw():
    return SimBandwidthBackend(load_topology_file(fixture_path("clx_2s.json")))


class TestKernels:
    def test_burst_configuration(self):
        assert KERNELS["read128"].burst_registers == 8
        assert KERNELS["read256"].burst_registers == 16
        assert KERNELS["read512"].burst_registers == 32

    def test_bytes_per_iteration(self):
        assert KERNELS["read128"].bytes_per_iteration == 128
        assert KERNELS["read256"].bytes_per_iteration == 512
        assert KERNELS["read512"].bytes_per_iteration == 2048

    def test_wrong_burst_rejected(self):
        with pytest.raises(BandwidthError, match="burst"):
            ThroughputKernel("w256", 8)

    def test_read_only(self):
        with pytest.raises(BandwidthError, match="read-only"):
            ThroughputKernel("w128", 8, access="write")


class TestReadThroughput:
    def test_rome_l1_avx_is_64_bytes_per_cycle(self, rome_bw):
        rec = run_throughput("read256", 16 * 1024, [0], POL, rome_bw)
        assert rec.level == "L1"
        assert rec.bytes_per_cycle == 64.0
        assert rec.bandwidth_gbps == 128.0

    def test_clx_l1_avx512_is_116_25(self, clx_bw):
        rec = run_throughput("read512", 16 * 1024, [0], POL, clx_bw)
        assert rec.bytes_per_cycle == 116.25
        assert rec.bandwidth_gbps == 186.0

    def test_zero_dataset_is_an_error(self, rome_bw):
        with pytest.raises(BandwidthError, match="non-empty"):
            run_throughput("read256", 0, [0], POL, rome_bw)

    def test_cross_socket_rejected_in_single_node_mode(self, rome_bw):
        with pytest.raises(BandwidthError, match="crossing sockets"):
            run_throughput("read256", 16 * 1024, [0, 64], POL, rome_bw)
        rec = run_throughput(
            "read256", 16 * 1024, [0, 64], POL, rome_bw, allow_cross_socket=True
        )
        assert rec.bandwidth_gbps == 256.0

    def test_width_degrades_with_flag(self, rome_bw):
        rec = run_throughput("read512", 16 * 1024, [0], POL, rome_bw)
        assert rec.kernel == "read256"
        assert rec.degraded_from == "read512"
        assert "width_degraded" in rec.flags

    def test_l3_domain_cap_binds(self, rome_bw):
        # 4 cores of one CCX: 4 x 46 GB/s capped at 151 GB/s.
        rec = run_throughput("read256", 2 << 20, [0, 1, 2, 3], POL, rome_bw)
        assert rec.level == "L3"
        assert rec.bandwidth_gbps == 151.0
        assert rec.bytes_per_cycle / 4 == pytest.approx(18.875)

    def test_ram_ccd_saturates_at_three_cores(self, rome_bw):
        rates = {
            n: run_throughput("read256", 64 << 20, list(range(n)), POL, rome_bw).bandwidth_gbps
            for n in (1, 2, 3, 4)
        }
        assert rates[1] == 13.0
        assert rates[2] == 26.0
        assert rates[3] == 38.0  # capped
        assert rates[4] == 38.0

    def test_second_ccd_raises_node_bandwidth_slightly(self, rome_bw):
        one_ccd = run_throughput("read256", 64 << 20, list(range(8)), POL, rome_bw)
        two_ccds = run_throughput("read256", 64 << 20, list(range(16)), POL, rome_bw)
        assert one_ccd.bandwidth_gbps == 38.0
        assert two_ccds.bandwidth_gbps == 40.0

    def test_aggregate_never_exceeds_caps(self, rome_bw):
        rng = np.random.default_rng(0)
        cores = list(range(64))
        for _ in range(20):
            picked = sorted(rng.choice(cores, size=rng.integers(1, 12), replace=False).tolist())
            rec = run_throughput("read256", 64 << 20, picked, POL, rome_bw)
            per_core = 6.5 * 2.0  # B/cycle x GHz
            assert rec.bandwidth_gbps <= per_core * len(picked) + 1e-9
            assert rec.bandwidth_gbps <= 160.0 + 1e-9


class TestTriad:
    def test_single_element(self, rome_bw):
        rec = run_triad(8, [0], nontemporal=True, backend=rome_bw)
        assert rec.bandwidth_gbps > 0
        assert rec.bytes_moved == 24

    def test_verify_catches_first_failing_index(self):
        b = np.arange(10.0)
        c = np.ones(10)
        a = b + 3.0 * c
        a[7] = -1.0
        with pytest.raises(TriadVerificationError) as err:
            verify_triad(a, b, c, 3.0)
        assert err.value.index == 7

    def test_sampled_verification(self):
        n = 1000
        b = np.zeros(n)
        c = np.zeros(n)
        a = np.zeros(n)
        checked = verify_triad(a, b, c, 3.0, sample_fraction=0.01)
        assert checked == 10

    def test_rome_node_plateau(self, rome_bw):
        # Two CCDs, two cores each: the published node plateau.
        rec = run_triad(8 << 20, [0, 4, 8, 12], nontemporal=True, backend=rome_bw)
        assert rec.bandwidth_gbps == 42.9
        # One core per CCD sits just below it.
        rec1 = run_triad(8 << 20, [0, 8], nontemporal=True, backend=rome_bw)
        assert rec1.bandwidth_gbps == 42.3

    def test_rome_full_socket(self, rome_bw):
        cores = []
        for node in range(4):
            base = 16 * node
            cores += [base, base + 4, base + 8, base + 12]
        rec = run_triad(8 << 20, cores, nontemporal=True, backend=rome_bw)
        assert rec.bandwidth_gbps == pytest.approx(4 * 42.9)

    def test_non_temporal_beats_regular_stores(self, rome_bw):
        nt = run_triad(8 << 20, [0], nontemporal=True, backend=rome_bw)
        reg = run_triad(8 << 20, [0], nontemporal=False, backend=rome_bw)
        assert nt.bandwidth_gbps > reg.bandwidth_gbps

    def test_triad_arrays_must_hold_an_element(self, rome_bw):
        with pytest.raises(BandwidthError):
            run_triad(4, [0], nontemporal=True, backend=rome_bw)


class TestScalingSeries:
    def test_constant_series_saturates_at_first_rung(self, rome_bw):
        ladder = [("1", [0]), ("2", [0, 1])]
        # L1 is private: per-core bandwidth, but relative to max the first
        # rung of a constant per-core series is NOT within 5%; use a truly
        # constant series instead: repeated identical core sets.
        series = scaling_series(
            [("a", [0]), ("b", [0]), ("c", [0])],
            rome_bw,
            kernel="read256",
            dataset_bytes=16 * 1024,
        )
        assert series.saturation_index == 0

    def test_rome_ram_ladder_saturates_at_one_core_per_ccd(self, rome_bw):
        ladder = [
            ("1c", [0]),
            ("2c_ccx", [0, 1]),
            ("4c_ccx", [0, 1, 2, 3]),
            ("2ccd_1c", [0, 8]),
            ("2ccd_2c", [0, 4, 8, 12]),
        ]
        series = scaling_series(ladder, rome_bw, triad_bytes=8 << 20)
        assert series.saturation_label == "2ccd_1c"
        assert series.records[-1].bandwidth_gbps == 42.9

    def test_clx_snc_ram_saturates_at_eight_cores(self, clx_bw):
        snc0 = [c for c in clx_bw.topology.cores_of_node(0)]
        ladder = [(str(n), snc0[:n]) for n in range(1, 11)]
        series = scaling_series(ladder, clx_bw, kernel="read512", dataset_bytes=256 << 20)
        assert series.saturation_label == "8"

    def test_empty_ladder_rejected(self, rome_bw):
        with pytest.raises(BandwidthError):
            scaling_series([], rome_bw, kernel="read256", dataset_bytes=1024)


class TestRecordArithmetic:
    @given(
        bytes_moved=st.integers(min_value=1, max_value=2**40),
        cycles=st.floats(min_value=1.0, max_value=1e12, allow_nan=False),
        freq=st.floats(min_value=100.0, max_value=5000.0, allow_nan=False),
    )
    @settings(max_examples=200, deadline=None)
    def test_defining_relations_exact(self, bytes_moved, cycles, freq):
        rec = BandwidthRecord.from_raw(
            "read128", bytes_moved, [0], "L1", bytes_moved, cycles, freq, "test"
        )
        assert rec.bytes_per_cycle == bytes_moved / cycles
        assert rec.bandwidth_gbps == bytes_moved / (cycles / (freq * 1e6)) / 1e9

    def test_ladder_presets(self, rome_bw):
        topo = rome_bw.topology
        assert bandwidth_dataset_ladder(topo, "L1") == [8192, 16384, 32768, 65536]
        assert bandwidth_dataset_ladder(topo, "RAM")[0] == 32 << 20
