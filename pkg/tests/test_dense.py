"""Tests for the exact state-vector engine."""

import numpy as np
import pytest

from qramsim import dense, gates, model


def _random_state(n_qubits, rng):
    v = rng.standard_normal(2**n_qubits) + 1j * rng.standard_normal(2**n_qubits)
    v /= np.linalg.norm(v)
    return v.reshape((2,) * n_qubits)


def _embed(matrix, positions, n_qubits):
    # expand an operator on the given qubit positions to the full register
    k = len(positions)
    op = matrix.reshape((2,) * (2 * k))
    state = np.eye(2**n_qubits, dtype=complex).reshape((2,) * n_qubits + (2**n_qubits,))
    moved = np.tensordot(op, state, axes=(list(range(k, 2 * k)), list(positions)))
    moved = np.moveaxis(moved, range(k), positions)
    return moved.reshape(2**n_qubits, 2**n_qubits)


def _load_vec(state, qubit_order):
    # amplitude tensor with axes rearranged to the requested qubit order
    axes = [state._axes[q] for q in qubit_order]
    return np.moveaxis(state.vector, axes, range(len(axes)))


def test_single_qubit_primitives_match_matrices():
    rng = np.random.default_rng(11)
    for name, matrix, applier in (
        ("H", gates.H_MATRIX, dense.DenseState.apply_h),
        ("X", gates.X_MATRIX, dense.DenseState.apply_x),
        ("Y", gates.Y_MATRIX, dense.DenseState.apply_y),
        ("Z", gates.Z_MATRIX, dense.DenseState.apply_z),
    ):
        for _ in range(5):
            vec = _random_state(3, rng)
            s = dense.DenseState()
            s.ensure(0, 1, 2)
            s._vec = vec.copy()
            target = int(rng.integers(3))
            applier(s, target)
            expected = (_embed(matrix, [target], 3) @ vec.reshape(-1)).reshape(vec.shape)
            assert np.max(np.abs(s.vector - expected)) < 1e-12, name


def test_two_qubit_primitives_match_matrices():
    rng = np.random.default_rng(12)
    cnot = np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    )
    for matrix, applier in (
        (gates.SWAP_MATRIX, dense.DenseState.apply_swap),
        (gates.CZ_MATRIX, dense.DenseState.apply_cz),
        (cnot, dense.DenseState.apply_cnot),
    ):
        for _ in range(5):
            vec = _random_state(3, rng)
            s = dense.DenseState()
            s.ensure(0, 1, 2)
            s._vec = vec.copy()
            a, b = rng.permutation(3)[:2]
            applier(s, int(a), int(b))
            expected = (
                _embed(matrix, [int(a), int(b)], 3) @ vec.reshape(-1)
            ).reshape(vec.shape)
            assert np.max(np.abs(s.vector - expected)) < 1e-12


def test_router_matches_unitary_composition():
    rng = np.random.default_rng(13)
    uprime = gates.routing_unitary("UPrime").matrix
    x_on_control = _embed(gates.X_MATRIX, [0], 3)
    lobe_l = x_on_control @ uprime @ x_on_control  # acts on (c, i, left)
    for _ in range(5):
        vec = _random_state(4, rng)
        s = dense.DenseState()
        s.ensure(0, 1, 2, 3)
        s._vec = vec.copy()
        s.apply_router(0, 1, 2, 3)
        full = _embed(lobe_l, [0, 1, 2], 4)
        full = _embed(uprime, [0, 1, 3], 4) @ full
        expected = (full @ vec.reshape(-1)).reshape(vec.shape)
        assert np.max(np.abs(s.vector - expected)) < 1e-12


def test_router_lobes_commute():
    rng = np.random.default_rng(14)
    vec = _random_state(4, rng)
    a = dense.DenseState()
    a.ensure(0, 1, 2, 3)
    a._vec = vec.copy()
    a.apply_routing_lobe(0, 1, 2, conjugated=True)
    a.apply_routing_lobe(0, 1, 3, conjugated=False)
    b = dense.DenseState()
    b.ensure(0, 1, 2, 3)
    b._vec = vec.copy()
    b.apply_routing_lobe(0, 1, 3, conjugated=False)
    b.apply_routing_lobe(0, 1, 2, conjugated=True)
    assert np.max(np.abs(a.vector - b.vector)) < 1e-12


def test_norm_preserved_by_gates():
    rng = np.random.default_rng(15)
    s = dense.DenseState()
    s.ensure(0, 1, 2, 3)
    s._vec = _random_state(4, rng)
    s.apply_h(0)
    s.apply_router(0, 1, 2, 3)
    s.apply_swap(1, 3)
    s.apply_cz(0, 2)
    assert abs(s.norm() - 1.0) < 1e-10


def test_lazy_activation_and_cap():
    s = dense.DenseState()
    assert s.active_qubits == ()
    s.ensure(5)
    s.ensure(2)
    assert s.active_qubits == (5, 2)
    assert s.prob_one(5) == 0.0
    assert s.prob_one(99) == 0.0
    big = dense.DenseState()
    big.ensure(*range(dense.MAX_ACTIVE_QUBITS))
    with pytest.raises(dense.DenseEngineError):
        big.ensure(dense.MAX_ACTIVE_QUBITS)


# --- full circuit checks ----------------------------------------------------


def _run(layers, data_text, address):
    g = model.QramGeometry(layers)
    data = model.ClassicalData.from_spec(data_text, g.memory_size)
    circuit = model.build_query_circuit(g, data)
    state = dense.dense_run(g, circuit, address)
    return g, data, state


def test_basis_query_reads_stored_bit():
    g, data, state = _run(2, "0101", model.AddressState.basis("10"))
    addr = model.AddressState.basis("10")
    assert dense.dense_query_fidelity(state, g, addr, data) > 1.0 - 1e-10
    # leaves keep their bits, routers return to zero
    for leaf, bit in enumerate(data.bits):
        assert state.prob_one(g.leaf_qubit(leaf)) == pytest.approx(bit, abs=1e-12)
    for node in range(1, g.memory_size):
        assert state.prob_one(g.control_qubit(node)) < 1e-12
        assert state.prob_one(g.incident_qubit(node)) < 1e-12


def test_all_ones_lookup():
    g, data, state = _run(2, "1111", model.AddressState.basis("11"))
    assert state.prob_one(g.data_qubit()) == pytest.approx(1.0, abs=1e-12)
    assert dense.dense_query_fidelity(
        state, g, model.AddressState.basis("11"), data
    ) > 1.0 - 1e-10


def test_all_zero_data_is_identity_on_address_and_data():
    for address in (
        model.AddressState.basis("01"),
        model.AddressState.uniform(2),
        model.AddressState.bell("00", "10"),
    ):
        g, data, state = _run(2, "all-zeros", address)
        assert dense.dense_query_fidelity(state, g, address, data) > 1.0 - 1e-10
        assert state.prob_one(g.data_qubit()) < 1e-12


def test_ghz_preparation():
    address = model.AddressState.bell("00", "11")
    g, data, state = _run(2, "0101", address)
    assert dense.dense_query_fidelity(state, g, address, data) > 1.0 - 1e-10
    rho = dense.reduced_density(
        state, (g.address_qubit(1), g.address_qubit(2), g.data_qubit())
    )
    # GHZ on (A1, A2, D): support on |000> and |111> with full coherence
    assert rho[0, 0] == pytest.approx(0.5, abs=1e-10)
    assert rho[7, 7] == pytest.approx(0.5, abs=1e-10)
    assert abs(rho[0, 7]) == pytest.approx(0.5, abs=1e-10)


def test_uniform_address_noiseless_fidelity_all_data():
    g = model.QramGeometry(2)
    address = model.AddressState.uniform(2)
    for value in range(16):
        text = format(value, "04b")
        data = model.ClassicalData.from_spec(text, 4)
        circuit = model.build_query_circuit(g, data)
        state = dense.dense_run(g, circuit, address)
        assert dense.dense_query_fidelity(state, g, address, data) > 1.0 - 1e-10


def test_dense_run_applies_error_events():
    class Event:
        def __init__(self, position, paulis):
            self.position = position
            self.paulis = paulis

    class Errors:
        def __init__(self, events, injections=()):
            self.events = events
            self.injections = injections

    g = model.QramGeometry(1)
    data = model.ClassicalData.from_spec("10", 2)
    circuit = model.build_query_circuit(g, data)
    address = model.AddressState.basis("0")
    # an X right after the data-loading X cancels it, turning the read into 0
    x_pos = next(
        i for i, a in enumerate(circuit.gates) if a.kind == "X"
    )
    errors = Errors([Event(x_pos, ((g.leaf_qubit(0), "X"),))])
    state = dense.dense_run(g, circuit, address, errors)
    assert state.prob_one(g.data_qubit()) < 1e-12
    assert dense.dense_query_fidelity(state, g, address, data) < 1e-12


def test_boundary_position():
    g = model.QramGeometry(2)
    circuit = model.build_query_circuit(g, model.ClassicalData.from_spec("0101", 4))
    assert dense.boundary_position(circuit, "AddressLoading") == 5
    assert dense.boundary_position(circuit, "DataLoading") == 7
    assert dense.boundary_position(circuit, "AddressRetrieval") == len(circuit) - 1
    # with no data-loading gates the boundary falls back to the prior phase
    empty = model.build_query_circuit(g, model.ClassicalData.from_spec("all-zeros", 4))
    assert dense.boundary_position(empty, "DataLoading") == 5
    with pytest.raises(model.ModelError):
        dense.boundary_position(circuit, "Teatime")


def test_injection_at_boundary_flips_readout():
    class Injection:
        def __init__(self, phase, qubit, pauli):
            self.phase = phase
            self.qubit = qubit
            self.pauli = pauli

    class Errors:
        events = ()

        def __init__(self, injections):
            self.injections = injections

    g = model.QramGeometry(1)
    data = model.ClassicalData.from_spec("00", 2)
    circuit = model.build_query_circuit(g, data)
    address = model.AddressState.basis("1")
    inj = Injection("DataLoading", g.leaf_qubit(1), "X")
    state = dense.dense_run(g, circuit, address, Errors([inj]))
    # the injected X writes a spurious 1 that the query then reads out
    assert state.prob_one(g.data_qubit()) == pytest.approx(1.0, abs=1e-12)


# --- reduced density and entropy --------------------------------------------


def test_reduced_density_pure_product():
    s = dense.DenseState()
    s.ensure(0, 1)
    s.apply_h(0)
    rho = dense.reduced_density(s, (0,))
    assert np.trace(rho) == pytest.approx(1.0, abs=1e-12)
    assert np.trace(rho @ rho).real == pytest.approx(1.0, abs=1e-12)


def test_reduced_density_validations():
    s = dense.DenseState()
    s.ensure(0)
    with pytest.raises(dense.DenseEngineError):
        dense.reduced_density(s, (1,))
    with pytest.raises(dense.DenseEngineError):
        dense.reduced_density(s, tuple(range(11)))


def test_entropy_basics():
    assert dense.entanglement_entropy(np.diag([0.5, 0.5])) == pytest.approx(1.0)
    assert dense.entanglement_entropy(np.diag([1.0, 0.0])) == pytest.approx(0.0)
    with pytest.raises(dense.DenseEngineError):
        dense.entanglement_entropy(np.diag([1.5, -0.5]))
    with pytest.raises(dense.DenseEngineError):
        dense.entanglement_entropy(np.array([[0.5, 0.3], [0.0, 0.5]]))


def _entropy_of(matrix):
    eigs = np.linalg.eigvalsh(matrix)
    eigs = eigs[eigs > 0]
    return float(-np.sum(eigs * np.log2(eigs)))


def test_entropy_of_reference_mixtures():
    plus = np.array([[0.5, 0.5], [0.5, 0.5]])
    zero = np.diag([1.0, 0.0])
    mix2 = 0.5 * plus + 0.5 * zero
    mix3 = 0.25 * plus + 0.75 * zero
    assert dense.entanglement_entropy(mix2) == pytest.approx(0.6009, abs=1e-3)
    assert dense.entanglement_entropy(mix3) == pytest.approx(0.4838, abs=1e-3)
    assert dense.entanglement_entropy(mix2) == pytest.approx(_entropy_of(mix2), abs=1e-12)


def test_router_entropies_after_plus_loading():
    g = model.QramGeometry(3)
    data = model.ClassicalData.from_spec("all-zeros", 8)
    circuit = model.build_query_circuit(g, data)
    loading = model.CircuitIR(circuit.phase_slice("AddressLoading"))
    state = dense.dense_run(g, loading, model.AddressState.uniform(3))
    assert len(state.active_qubits) == 17

    rho1 = dense.reduced_density(state, (g.control_qubit(1),))
    rho2 = dense.reduced_density(state, (g.control_qubit(2),))
    rho4 = dense.reduced_density(state, (g.control_qubit(4),))
    expected1 = np.array([[0.5, 0.125], [0.125, 0.5]])
    expected2 = np.array([[0.75, 0.125], [0.125, 0.25]])
    expected4 = np.array([[0.875, 0.125], [0.125, 0.125]])
    assert np.max(np.abs(rho1 - expected1)) < 1e-10
    assert np.max(np.abs(rho2 - expected2)) < 1e-10
    assert np.max(np.abs(rho4 - expected4)) < 1e-10

    s1 = dense.entanglement_entropy(rho1)
    s2 = dense.entanglement_entropy(rho2)
    s4 = dense.entanglement_entropy(rho4)
    assert s1 == pytest.approx(_entropy_of(expected1), abs=1e-9)
    assert s2 == pytest.approx(_entropy_of(expected2), abs=1e-9)
    assert s4 == pytest.approx(_entropy_of(expected4), abs=1e-9)
    assert s1 > s2 > s4
    # within-layer symmetry
    rho3 = dense.reduced_density(state, (g.control_qubit(3),))
    assert np.max(np.abs(rho3 - rho2)) < 1e-10
    for node in (5, 6, 7):
        rho = dense.reduced_density(state, (g.control_qubit(node),))
        assert np.max(np.abs(rho - rho4)) < 1e-10


# --- teleportation ----------------------------------------------------------

_CARDINAL = {
    "zero": (1.0, 0.0),
    "one": (0.0, 1.0),
    "plus": (1 / np.sqrt(2), 1 / np.sqrt(2)),
    "minus": (1 / np.sqrt(2), -1 / np.sqrt(2)),
    "plus_i": (1 / np.sqrt(2), 1j / np.sqrt(2)),
    "minus_i": (1 / np.sqrt(2), -1j / np.sqrt(2)),
}


def _prepare_single(alpha, beta):
    s = dense.DenseState()
    s.ensure(0)
    prep = np.array([[alpha, -np.conj(beta)], [beta, np.conj(alpha)]])
    s.apply_single(0, prep)
    return s


def test_teleport_postselect_cardinal_states():
    for name, (alpha, beta) in _CARDINAL.items():
        s = _prepare_single(alpha, beta)
        out, keep = dense.teleport_retrieval(s, 0, 1, 2, "PostSelect")
        assert keep == pytest.approx(0.25, abs=1e-12), name
        rho = dense.reduced_density(out, (2,))
        target = np.array([alpha, beta])
        fid = float(np.real(np.conj(target) @ rho @ target))
        assert fid == pytest.approx(1.0, abs=1e-10), name


def test_teleport_feedforward_exact_per_shot():
    rng = np.random.default_rng(77)
    counts = np.zeros(4, dtype=int)
    alpha, beta = _CARDINAL["plus_i"]
    target = np.array([alpha, beta])
    for _ in range(400):
        s = _prepare_single(alpha, beta)
        before = s._front(0)[:].copy()
        out, keep = dense.teleport_retrieval(s, 0, 1, 2, "Feedforward", rng)
        assert keep == 1.0
        rho = dense.reduced_density(out, (2,))
        fid = float(np.real(np.conj(target) @ rho @ target))
        assert fid == pytest.approx(1.0, abs=1e-10)
        v = _load_vec(out, (0, 1))
        outcome = int(np.argmax([np.abs(v[m1, m2]).sum() for m1 in (0, 1) for m2 in (0, 1)]))
        counts[outcome] += 1
        del before
    # all four Bell outcomes occur at the uniform rate, loosely bounded
    assert counts.min() > 50


def test_teleport_preserves_entanglement():
    s = dense.DenseState()
    s.ensure(0, 1)
    s.apply_h(0)
    s.apply_cnot(0, 1)
    out, keep = dense.teleport_retrieval(s, 1, 2, 3, "PostSelect")
    assert keep == pytest.approx(0.25, abs=1e-12)
    v = _load_vec(out, (0, 3)).reshape(2, 2, -1)
    bell = np.zeros(4, dtype=complex)
    bell[0] = bell[3] = 1 / np.sqrt(2)
    overlap = np.abs(bell.conj() @ v.reshape(4, -1)) ** 2
    assert overlap.sum() == pytest.approx(1.0, abs=1e-10)


def test_teleport_rejects_dirty_ancilla():
    s = dense.DenseState()
    s.ensure(0, 1)
    s.apply_x(1)
    with pytest.raises(dense.DenseEngineError):
        dense.teleport_retrieval(s, 0, 1, 2, "PostSelect")
    s2 = dense.DenseState()
    s2.ensure(0)
    with pytest.raises(dense.DenseEngineError):
        dense.teleport_retrieval(s2, 0, 1, 2, "Sideways")
