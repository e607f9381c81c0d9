"""Latency model: prediction, fitting, comparison."""

import csv
import math

import numpy as np
import pytest

from memchar.model import (
    FitError,
    FitObservation,
    FitTerm,
    FitTemplate,
    LatencyMatrix,
    ModelError,
    classify_values,
    compare,
    fit,
    hop_cost_template,
    load_fixture_model,
    ram_hop_template,
    remote_socket_template,
)
from memchar.topology import fixture_path


@pytest.fixture(scope="module")
def rome():
    return load_fixture_model("rome_2s")


@pytest.fixture(scope="module")
def clx():
    return load_fixture_model("clx_2s")


def read_table(name):
    with open(fixture_path(name), newline="") as fh:
        return list(csv.DictReader(fh))


class TestPredict:
    def test_local_l1_is_four_cycles_on_both_systems(self, rome, clx):
        for model, state in ((rome, "M"), (rome, "E"), (clx, "M"), (clx, "E")):
            assert model.predict(0, 0, None, state, "L1") == 4.0

    def test_rome_numa1_modified_l2(self, rome):
        owner = rome.graph.first_core_of_node(1)
        assert rome.predict(0, 1, owner, "M", "L2") == 263.0

    def test_triple_is_decided_by_home_node(self, rome):
        g = rome.graph
        p2 = rome.predict(0, 1, g.first_core_of_node(2), "M", "L2")
        p3 = rome.predict(0, 1, g.first_core_of_node(3), "M", "L2")
        assert p2 == p3
        assert 322 - 3 <= p2 <= 324 + 3

    def test_triple_diagonal_equals_plain_remote(self, rome):
        owner = rome.graph.first_core_of_node(1)
        diag = rome.predict(0, 1, owner, "M", "L2")
        assert diag == 263.0

    def test_forwarder_for_local_access_is_illegal(self, rome):
        with pytest.raises(ModelError, match="forwarder"):
            rome.predict(0, 0, 0, "M", "L2")

    def test_forwarder_only_for_dirty_lines(self, rome):
        fwd = rome.graph.first_core_of_node(2)
        with pytest.raises(ModelError, match="dirty-remote"):
            rome.predict(0, 1, fwd, "E", "L2")

    def test_invalid_lines_fetch_from_ram_at_all_levels(self, rome):
        owner = rome.graph.first_core_of_node(1)
        for level in ("L1", "L2", "L3", "RAM"):
            assert rome.predict(0, 1, owner, "I", level) == 230.0

    def test_clean_shared_beyond_ccx_reads_ram(self, rome):
        # S on another CCX: home memory answers; O still forwards.
        assert rome.predict(0, 0, 4, "S", "L1") == 220.0
        assert rome.predict(0, 0, 4, "O", "L1") == 205.0
        # Within the CCX the shared line is served from the sibling cache.
        assert rome.predict(0, 0, 1, "S", "L1") == 72.0

    def test_ccx_core3_penalty_carried_as_data(self, rome):
        assert rome.predict(0, 0, 3, "M", "L1") == 78.0 + 6.0
        assert rome.predict(0, 0, 1, "M", "L1") == 78.0
        assert rome.predict(0, 0, 3, "M", "L3") == 39.0  # L3 stays uniform

    def test_remote_socket_ram_anchors(self, rome):
        g = rome.graph
        assert rome.predict(0, 6, None, "I", "RAM") == 407.0
        assert rome.predict(g.first_core_of_node(2), 4, None, "I", "RAM") == 407.0
        assert rome.predict(g.first_core_of_node(1), 5, None, "I", "RAM") == pytest.approx(436.0)
        assert rome.predict(g.first_core_of_node(3), 7, None, "I", "RAM") == pytest.approx(436.0)

    def test_clx_snc_classes(self, clx):
        assert clx.predict(0, 0, None, "I", "RAM") == 200.0
        assert clx.predict(0, 1, None, "I", "RAM") == 216.0
        near = clx.predict(0, 2, None, "I", "RAM")
        far = clx.predict(0, 3, None, "I", "RAM")
        assert far - near == 25.0  # 10 ns at 2.5 GHz

    def test_clx_mesh_gradient_on_private_caches(self, clx):
        # core 0 at (1,0); core 8 at (1,1) is 1 hop; core 16 at (1,5)
        # is 5 hops but in the other SNC; use core 4 at (1,2): 2 hops.
        ratio = 2500.0 / 2400.0
        assert clx.predict(0, 0, 8, "M", "L1") == 125.0 + 2 * 1 * ratio
        assert clx.predict(0, 0, 4, "M", "L1") == 125.0 + 2 * 2 * ratio
        # Shared/Forward lines come from L3: flat.
        assert clx.predict(0, 0, 8, "F", "L1") == 50.0
        assert clx.predict(0, 0, 8, "S", "L2") == 50.0

    def test_mesh_worst_case_in_uncore_cycles(self, clx):
        from memchar.topology import mesh_hops

        g = clx.graph
        tiles = [n for n in g.nodes.values() if n.socket == 0 and n.row is not None]
        worst = max(
            mesh_hops(g, a.id, b.id) for a in tiles for b in tiles
        )
        assert worst == 9
        per_hop_round_trip = 2.0 * clx.mesh_hop_uncore_cycles()
        assert worst * per_hop_round_trip == 18.0

    def test_class_ordering_matches_published_tables(self, rome, clx):
        # Predicted latencies must be non-decreasing along the published
        # distance ladder for every state and level.
        g = rome.graph
        ladders = {
            "rome": (
                rome,
                [0, 1, 4, g.first_core_of_node(1), g.first_core_of_node(2),
                 g.first_core_of_node(3), g.first_core_of_node(6)],
                ("M", "O", "E", "S"),
            ),
            "clx": (
                clx,
                [0, 8, clx.graph.first_core_of_node(1), clx.graph.first_core_of_node(2)],
                ("M", "E", "S", "F"),
            ),
        }
        for name, (model, owners, states) in ladders.items():
            for state in states:
                for level in ("L1", "L2", "L3"):
                    values = []
                    for owner in owners:
                        fwd = None if owner == 0 else owner
                        values.append(
                            model.predict(0, model.graph.node_of_core(owner), fwd, state, level)
                        )
                    assert values == sorted(values), (name, state, level, values)

    def test_conversion_factors_reported(self, rome):
        rep = rome.conversion_report()
        assert rep["core_mhz"] == 2000.0
        assert rep["if_switch_hop_ns_per_direction"] == pytest.approx(29 / 12)


class TestFit:
    def test_ram_row_recovers_switch_cost_in_band(self, rome):
        rows = [r for r in read_table("table2_rome.csv") if r["level"] == "RAM"]
        homes = {"local": 0, "numa1": 1, "numa2": 2, "numa3": 3}
        obs = [
            FitObservation(requester=0, home=homes[r["source_class"]], cycles=float(r["cycles"]))
            for r in rows
            if r["source_class"] in homes
        ]
        assert sorted(o.cycles for o in obs) == [220, 230, 248, 255]
        result = fit(ram_hop_template(rome.graph), obs)
        assert 2.0 <= result.params["if_switch_ns"] <= 2.5
        assert result.params["if_switch_ns"] == pytest.approx(2.2)

    def test_single_observation_interpolates_exactly(self, rome):
        template = FitTemplate("base_only", (FitTerm("base", lambda o: 1.0),))
        result = fit(template, [FitObservation(0, 0, cycles=123.0)])
        assert result.params["base"] == 123.0
        assert result.max_abs_residual == 0.0

    def test_rank_deficiency_names_parameters(self, rome):
        template = FitTemplate(
            "degenerate",
            (
                FitTerm("a", lambda o: 1.0),
                FitTerm("b", lambda o: 2.0),  # collinear with a
            ),
        )
        obs = [FitObservation(0, 0, cycles=10.0), FitObservation(0, 1, cycles=10.0)]
        with pytest.raises(FitError, match=r"unidentifiable.*'a'"):
            fit(template, obs)

    def test_underdetermined_rejected(self, rome):
        with pytest.raises(FitError, match="observations"):
            fit(ram_hop_template(rome.graph), [FitObservation(0, 0, cycles=1.0)])

    def test_synthetic_round_trip(self, rome):
        rng = np.random.default_rng(5)
        g = rome.graph
        template = hop_cost_template(g)
        pairs = [(i, j) for i in range(8) for j in range(8)]
        for _ in range(10):
            base = float(rng.uniform(150, 300))
            c_sw = float(rng.uniform(1.0, 5.0))
            c_x = float(rng.uniform(10.0, 80.0))
            truth = {"base_cycles": base, "if_switch_ns": c_sw, "xgmi_ns": c_x}
            obs = []
            for i, j in pairs:
                o = FitObservation(g.first_core_of_node(i), j, cycles=0.0)
                cycles = sum(truth[t.name] * t.coeff(o) for t in template.terms)
                obs.append(FitObservation(o.requester, o.home, cycles=cycles))
            result = fit(template, obs)
            for name, value in truth.items():
                assert abs(result.params[name] - value) <= 1e-6 * abs(value)

    def test_linearity_finite_difference(self, rome):
        # predict is affine in each link cost: the finite-difference slope
        # equals the analytic coefficient.
        g = rome.graph
        obs = FitObservation(0, 3, cycles=0.0)
        template = ram_hop_template(g)
        coeff = template.terms[1].coeff(obs)
        base = {"base_ram_cycles": 220.0, "if_switch_ns": 2.0}
        bumped = {"base_ram_cycles": 220.0, "if_switch_ns": 3.0}

        def predict(params):
            return sum(params[t.name] * t.coeff(obs) for t in template.terms)

        assert predict(bumped) - predict(base) == coeff

    def test_fit_report_discloses_ridge_and_residuals(self, rome):
        obs = [
            FitObservation(0, h, cycles=c)
            for h, c in ((0, 220.0), (1, 230.0), (2, 248.0), (3, 255.0))
        ]
        result = fit(ram_hop_template(rome.graph), obs)
        text = result.report()
        assert "if_switch_ns" in text
        assert "residual" in text
        assert not result.ridge_used


class TestCompare:
    def test_model_vs_itself_has_zero_error(self, rome):
        obs = []
        for home in range(4):
            obs.append(
                FitObservation(
                    0, home, cycles=rome.predict(0, home, None, "I", "RAM"),
                    state="I", level="RAM",
                )
            )
        report = compare(rome, obs)
        assert report.max_abs == 0.0
        assert report.ordering_consistent

    def test_intersocket_classes_from_anchor_fit(self, rome):
        g = rome.graph
        anchors = []
        with open(fixture_path("fig9a_rome_anchors.csv"), newline="") as fh:
            for row in csv.DictReader(fh):
                anchors.append(
                    FitObservation(
                        requester=g.first_core_of_node(int(row["requester_node"])),
                        home=int(row["home_node"]),
                        cycles=float(row["cycles"]),
                    )
                )
        result = fit(remote_socket_template(g), anchors)
        preds = {
            (i, j): result.predict_observation(
                FitObservation(g.first_core_of_node(i), j, cycles=0.0)
            )
            for i in range(4)
            for j in range(4, 8)
        }
        classes = classify_values(preds, tolerance=1.0)
        assert set(classes[0][1]) == {(0, 6), (2, 4)}
        assert 406 <= classes[0][0] <= 408
        assert set(classes[-1][1]) == {(1, 5), (3, 7)}
        assert 430 <= classes[-1][0] <= 440

    def test_clx_remote_snc_delta_is_ten_ns(self, clx):
        near = clx.predict(0, 2, None, "I", "RAM")
        far = clx.predict(0, 3, None, "I", "RAM")
        delta_ns = (far - near) * 1000.0 / clx.core_mhz
        assert delta_ns == pytest.approx(10.0)

    def test_argmin_invariant_under_cost_scaling(self, rome):
        # Uniform scaling of all link costs keeps the fastest pair fastest.
        g = rome.graph
        template = remote_socket_template(g)
        pairs = [(i, j) for i in range(4) for j in range(4, 8)]

        def argmin_for(scale):
            params = {"base_remote_cycles": 378.0, "if_switch_ns": 2.4 * scale}
            vals = {}
            for i, j in pairs:
                o = FitObservation(g.first_core_of_node(i), j, cycles=0.0)
                vals[(i, j)] = sum(params[t.name] * t.coeff(o) for t in template.terms)
            best = min(vals.values())
            return {k for k, v in vals.items() if v == best}

        assert argmin_for(1.0) == argmin_for(4.0) == {(0, 6), (2, 4)}


class TestMatrix:
    def test_csv_round_trip(self, tmp_path):
        m = LatencyMatrix(
            row_labels=["0", "1"],
            col_labels=["4", "5"],
            entries=[[406.0, 417.5], [416.0, 436.0]],
            state="I",
            level="RAM",
            frequency_mhz=2000.0,
        )
        path = tmp_path / "m.csv"
        m.to_csv(path)
        again = LatencyMatrix.from_csv(path)
        assert again.row_labels == m.row_labels
        assert again.col_labels == m.col_labels
        assert (again.entries == m.entries).all()
        assert (again.state, again.level, again.frequency_mhz) == ("I", "RAM", 2000.0)

    def test_non_positive_entries_rejected(self):
        with pytest.raises(ModelError, match="positive"):
            LatencyMatrix(["a"], ["b"], [[0.0]])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ModelError, match="shape"):
            LatencyMatrix(["a"], ["b", "c"], [[1.0]])
