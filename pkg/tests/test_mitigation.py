"""Router post-selection: projector algebra and the weighted estimator."""

import numpy as np
import pytest

from qramsim import ecs, mitigation, noise
from qramsim.model import (
    AddressState,
    CircuitIR,
    ClassicalData,
    GateApp,
    QramGeometry,
    build_query_circuit,
)


def _blank_state(geometry, rows):
    """Component state with explicit tag rows, validated against the norm."""
    amps, tag_rows = zip(*rows)
    tags = np.zeros((len(rows), geometry.qubit_count), dtype=np.uint8)
    for i, assignments in enumerate(tag_rows):
        for qubit, tag in assignments.items():
            tags[i, qubit] = tag
    return ecs.EcsState(
        geometry.qubit_count,
        np.asarray(amps, dtype=np.complex128),
        tags,
        4 * len(rows),
    )


class TestConfig:
    def test_scope_qubits_first_layer(self):
        geom = QramGeometry(2)
        config = mitigation.MitigationConfig(k_layers=1)
        assert config.scope_nodes(geom) == (1,)
        assert config.scope_qubits(geom) == (3, 6)

    def test_scope_grows_with_layer_count(self):
        geom = QramGeometry(3)
        sizes = [
            len(mitigation.MitigationConfig(k_layers=k).scope_qubits(geom))
            for k in range(4)
        ]
        assert sizes == [0, 2, 6, 14]

    def test_queried_branch_scope(self):
        geom = QramGeometry(2)
        address = AddressState.bell("00", "01")
        config = mitigation.MitigationConfig.for_address(
            2, "QueriedBranchesOnly", address
        )
        assert config.queried_leaves == frozenset({0, 1})
        assert set(config.scope_nodes(geom)) == {1, 2}

    def test_unqueried_branch_scope(self):
        geom = QramGeometry(2)
        address = AddressState.bell("00", "01")
        config = mitigation.MitigationConfig.for_address(
            2, "UnqueriedBranchesOnly", address
        )
        assert set(config.scope_nodes(geom)) == {3}

    def test_modes_partition_the_layer(self):
        geom = QramGeometry(3)
        address = AddressState.uniform(3)
        both = set()
        for mode in ("QueriedBranchesOnly", "UnqueriedBranchesOnly"):
            config = mitigation.MitigationConfig.for_address(3, mode, address)
            both.update(config.scope_nodes(geom))
        everything = mitigation.MitigationConfig(k_layers=3).scope_nodes(geom)
        assert both == set(everything)

    def test_validation_errors(self):
        with pytest.raises(mitigation.MitigationError):
            mitigation.MitigationConfig(k_layers=-1)
        with pytest.raises(mitigation.MitigationError):
            mitigation.MitigationConfig(k_layers=1, mode="Sideways")
        with pytest.raises(mitigation.MitigationError):
            mitigation.MitigationConfig(k_layers=1, mode="QueriedBranchesOnly")
        config = mitigation.MitigationConfig(k_layers=4)
        with pytest.raises(mitigation.MitigationError):
            config.scope_nodes(QramGeometry(2))


class TestPostselect:
    def test_clean_state_is_kept_whole(self):
        geom = QramGeometry(2)
        address = AddressState.uniform(2)
        data = ClassicalData.from_spec("0110", 4)
        state = ecs.run_circuit(
            ecs.init_state(geom, address), build_query_circuit(geom, data)
        )
        for k in range(3):
            config = mitigation.MitigationConfig(k_layers=k)
            projected, keep = mitigation.postselect(state, config, geom)
            assert keep == pytest.approx(1.0, abs=1e-12)
            assert ecs.query_fidelity(projected, geom, address, data) == pytest.approx(
                1.0, abs=1e-12
            )

    def test_excited_component_is_dropped(self):
        geom = QramGeometry(2)
        state = _blank_state(
            geom,
            [
                (0.6, {geom.control_qubit(1): ecs.ONE}),
                (0.8, {}),
            ],
        )
        config = mitigation.MitigationConfig(k_layers=1)
        projected, keep = mitigation.postselect(state, config, geom)
        assert keep == pytest.approx(0.64, abs=1e-12)
        assert projected.n_components == 1
        assert projected.norm_squared() == pytest.approx(1.0, abs=1e-12)

    def test_half_excited_qubit_costs_half_the_weight(self):
        geom = QramGeometry(2)
        state = _blank_state(geom, [(1.0, {geom.incident_qubit(1): ecs.PLUS})])
        config = mitigation.MitigationConfig(k_layers=1)
        projected, keep = mitigation.postselect(state, config, geom)
        assert keep == pytest.approx(0.5, abs=1e-12)
        assert projected.tags[0, geom.incident_qubit(1)] == ecs.ZERO

    def test_plus_and_minus_project_with_equal_sign(self):
        # (|+> + |->)/sqrt(2) is |0>, so the projection must keep everything
        geom = QramGeometry(1)
        q = geom.control_qubit(1)
        amp = 1.0 / np.sqrt(2.0)
        state = _blank_state(
            geom, [(amp, {q: ecs.PLUS}), (amp, {q: ecs.MINUS})]
        )
        config = mitigation.MitigationConfig(k_layers=1)
        _, keep = mitigation.postselect(state, config, geom)
        assert keep == pytest.approx(1.0, abs=1e-12)

    def test_fully_rejected_state_comes_back_empty(self):
        # (|+> - |->)/sqrt(2) is |1> and has no overlap with |0>
        geom = QramGeometry(1)
        q = geom.control_qubit(1)
        amp = 1.0 / np.sqrt(2.0)
        state = _blank_state(
            geom, [(amp, {q: ecs.PLUS}), (-amp, {q: ecs.MINUS})]
        )
        config = mitigation.MitigationConfig(k_layers=1)
        projected, keep = mitigation.postselect(state, config, geom)
        assert keep == 0.0
        assert projected.n_components == 0

    def test_projection_is_idempotent(self):
        geom = QramGeometry(2)
        state = _blank_state(
            geom,
            [
                (0.5, {geom.control_qubit(2): ecs.PLUS}),
                (0.5, {geom.control_qubit(1): ecs.ONE}),
                (np.sqrt(0.5), {geom.incident_qubit(3): ecs.MINUS}),
            ],
        )
        config = mitigation.MitigationConfig(k_layers=2)
        once, keep_once = mitigation.postselect(state, config, geom)
        twice, keep_twice = mitigation.postselect(once, config, geom)
        assert keep_twice == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(twice.amps, once.amps, atol=1e-12)
        assert np.array_equal(twice.tags, once.tags)

    def test_keep_probability_shrinks_with_deeper_scope(self):
        geom = QramGeometry(3)
        address = AddressState.uniform(3)
        data = ClassicalData.from_spec("10011010", 8)
        circuit = build_query_circuit(geom, data)
        model = noise.NoiseModel(e_t=1e-2)
        table = noise.build_slot_table(circuit, model)
        seen_below_one = False
        for s in range(6):
            cfg = noise.sample_configuration(circuit, model, 314, s, table=table)
            state = ecs.run_circuit(ecs.init_state(geom, address), circuit, errors=cfg)
            keeps = []
            for k in range(4):
                config = mitigation.MitigationConfig(k_layers=k)
                _, keep = mitigation.postselect(state, config, geom)
                keeps.append(keep)
            assert keeps[0] == pytest.approx(1.0, abs=1e-12)
            for lo, hi in zip(keeps[1:], keeps):
                assert lo <= hi + 1e-12
            seen_below_one = seen_below_one or keeps[-1] < 1.0 - 1e-6
        assert seen_below_one


class TestMitigatedQuery:
    def test_zero_noise_keeps_unit_fidelity(self):
        geom = QramGeometry(2)
        address = AddressState.uniform(2)
        data = ClassicalData.from_spec("1111", 4)
        circuit = build_query_circuit(geom, data)
        model = noise.NoiseModel(e_t=0.0, e_s=0.0)
        for k in (0, 1, 2):
            config = mitigation.MitigationConfig(k_layers=k)
            result = mitigation.mitigated_query(
                circuit, address, data, model, config, 100, seed=7
            )
            assert result.fidelity == pytest.approx(1.0, abs=1e-12)
            assert result.valid_fraction == pytest.approx(1.0, abs=1e-12)
            assert result.fidelity_ci == pytest.approx(0.0, abs=1e-12)

    def test_empty_scope_matches_plain_average(self):
        geom = QramGeometry(2)
        address = AddressState.uniform(2)
        data = ClassicalData.from_spec("0101", 4)
        circuit = build_query_circuit(geom, data)
        model = noise.NoiseModel(e_t=1e-3)
        config = mitigation.MitigationConfig(k_layers=0)
        n = 150
        result = mitigation.mitigated_query(
            circuit, address, data, model, config, n, seed=99
        )
        table = noise.build_slot_table(circuit, model)
        fids = []
        for s in range(n):
            cfg = noise.sample_configuration(circuit, model, 99, s, table=table)
            state = ecs.run_circuit(ecs.init_state(geom, address), circuit, errors=cfg)
            fids.append(ecs.query_fidelity(state, geom, address, data))
        assert result.valid_fraction == 1.0
        assert result.valid_fraction_ci == 0.0
        assert result.fidelity == pytest.approx(np.mean(fids), abs=1e-12)

    def test_postselection_beats_plain_average(self):
        address = AddressState.uniform(3)
        geom = QramGeometry(3)
        data = ClassicalData.from_spec("11111111", 8)
        circuit = build_query_circuit(geom, data)
        model = noise.NoiseModel(e_t=1e-5)
        n, seed = 4000, 2024
        plain = mitigation.mitigated_query(
            circuit, address, data, model,
            mitigation.MitigationConfig(k_layers=0), n, seed,
        )
        selected = mitigation.mitigated_query(
            circuit, address, data, model,
            mitigation.MitigationConfig(k_layers=2), n, seed,
        )
        assert selected.fidelity > plain.fidelity
        assert selected.valid_fraction < 1.0

    def test_full_scope_cuts_infidelity_by_half_or_better(self):
        # exact first-order sums put the improvement factor at 2.58 for this
        # setting; errors that reach the address register before readout are
        # invisible to router detection and bound it away from larger factors
        address = AddressState.uniform(4)
        geom = QramGeometry(4)
        data = ClassicalData.from_spec("1" * 16, 16)
        circuit = build_query_circuit(geom, data)
        model = noise.NoiseModel(e_t=1e-5)
        n, seed = 2000, 11
        plain = mitigation.mitigated_query(
            circuit, address, data, model,
            mitigation.MitigationConfig(k_layers=0), n, seed,
        )
        selected = mitigation.mitigated_query(
            circuit, address, data, model,
            mitigation.MitigationConfig(k_layers=4), n, seed,
        )
        assert 1.0 - selected.fidelity <= (1.0 - plain.fidelity) / 2.0

    def test_queried_scope_not_worse_than_unqueried(self):
        # the two modes may tie within noise; only a significant reversal fails
        geom = QramGeometry(2)
        address = AddressState.bell("00", "01")
        data = ClassicalData.from_spec("1111", 4)
        circuit = build_query_circuit(geom, data)
        model = noise.NoiseModel(e_t=1e-3)
        n, seed = 2000, 5150
        results = {}
        for mode in ("QueriedBranchesOnly", "UnqueriedBranchesOnly"):
            config = mitigation.MitigationConfig.for_address(2, mode, address)
            results[mode] = mitigation.mitigated_query(
                circuit, address, data, model, config, n, seed
            )
        queried = results["QueriedBranchesOnly"]
        unqueried = results["UnqueriedBranchesOnly"]
        gap = unqueried.fidelity - queried.fidelity
        assert gap < queried.fidelity_ci + unqueried.fidelity_ci

    def test_strict_sampling_agrees_with_exact_weights(self):
        geom = QramGeometry(2)
        address = AddressState.uniform(2)
        data = ClassicalData.from_spec("0110", 4)
        circuit = build_query_circuit(geom, data)
        model = noise.NoiseModel(e_t=3e-3)
        n, seed = 3000, 42
        config = mitigation.MitigationConfig(k_layers=2)
        strict_config = mitigation.MitigationConfig(k_layers=2, strict_sampling=True)
        exact = mitigation.mitigated_query(
            circuit, address, data, model, config, n, seed
        )
        strict = mitigation.mitigated_query(
            circuit, address, data, model, strict_config, n, seed
        )
        sigma = np.sqrt(exact.valid_fraction * (1 - exact.valid_fraction) / n)
        assert abs(strict.valid_fraction - exact.valid_fraction) < 3 * sigma + 1e-9
        assert abs(strict.fidelity - exact.fidelity) < 3 * (
            strict.fidelity_ci + exact.fidelity_ci
        )
        assert set(np.unique([strict.valid_fraction * n])) <= set(
            np.arange(n + 1, dtype=float)
        )

    def test_total_rejection_raises(self):
        geom = QramGeometry(1)
        address = AddressState.basis("0")
        data = ClassicalData.from_spec("11", 2)
        circuit = CircuitIR(
            (
                GateApp(
                    kind="X",
                    qubits=(geom.control_qubit(1),),
                    phase="DataLoading",
                    node=1,
                ),
            )
        )
        model = noise.NoiseModel(e_t=0.0, e_s=0.0)
        config = mitigation.MitigationConfig(k_layers=1)
        with pytest.raises(mitigation.MitigationError):
            mitigation.mitigated_query(
                circuit, address, data, model, config, 100, seed=1
            )

    def test_sample_floor_is_enforced(self):
        geom = QramGeometry(1)
        address = AddressState.basis("0")
        data = ClassicalData.from_spec("00", 2)
        circuit = build_query_circuit(geom, data)
        model = noise.NoiseModel(e_t=0.0)
        config = mitigation.MitigationConfig(k_layers=0)
        with pytest.raises(mitigation.MitigationError):
            mitigation.mitigated_query(
                circuit, address, data, model, config, 99, seed=1
            )


class TestRequiredSamples:
    def test_textbook_point(self):
        assert mitigation.required_samples(0.01, 0.5) == 9604

    def test_coefficient_at_percent_precision(self):
        assert 1.96**2 / 0.01**2 == pytest.approx(38416.0, rel=1e-12)

    def test_degenerate_proportions_need_nothing(self):
        assert mitigation.required_samples(0.01, 0.0) == 0
        assert mitigation.required_samples(0.01, 1.0) == 0

    def test_shrinking_width_grows_quadratically(self):
        wide = mitigation.required_samples(0.02, 0.5)
        narrow = mitigation.required_samples(0.01, 0.5)
        assert narrow == 4 * wide

    def test_invalid_arguments(self):
        with pytest.raises(mitigation.MitigationError):
            mitigation.required_samples(0.0, 0.5)
        with pytest.raises(mitigation.MitigationError):
            mitigation.required_samples(-0.1, 0.5)
        with pytest.raises(mitigation.MitigationError):
            mitigation.required_samples(0.01, 1.5)
