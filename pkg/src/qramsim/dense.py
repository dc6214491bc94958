"""Exact state-vector engine for small systems.

Serves as ground truth for the sparse engine: same gate semantics, brute
force amplitudes.  Qubits activate lazily as gates touch them, so partial
phase studies stay small even when the full circuit would need every qubit.
A hard cap of 26 active qubits keeps the vector at or under 1 GiB.

Gates are applied as slice operations on a view with the operand axes moved
to the front, which keeps temporaries at half the state size or less.
"""

from __future__ import annotations

import numpy as np

from .model import ROUTING_GATE_KINDS, QramGeometry, boundary_position

_SQRT_HALF = 1.0 / np.sqrt(2.0)

MAX_ACTIVE_QUBITS = 26


class DenseEngineError(ValueError):
    """Raised for qubit-cap violations, bad subsets, or invalid inputs."""


class DenseState:
    """Amplitude vector over the active qubits, axes in activation order."""

    def __init__(self) -> None:
        self._axes: dict[int, int] = {}
        self._vec = np.ones((), dtype=np.complex128)

    @property
    def active_qubits(self) -> tuple[int, ...]:
        return tuple(sorted(self._axes, key=self._axes.get))

    @property
    def vector(self) -> np.ndarray:
        return self._vec

    def copy(self) -> "DenseState":
        out = DenseState()
        out._axes = dict(self._axes)
        out._vec = self._vec.copy()
        return out

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self._vec) ** 2)))

    def ensure(self, *qubits: int) -> None:
        for q in qubits:
            if q in self._axes:
                continue
            if len(self._axes) >= MAX_ACTIVE_QUBITS:
                raise DenseEngineError(
                    f"activating qubit {q} would exceed {MAX_ACTIVE_QUBITS} active qubits"
                )
            grown = np.zeros(self._vec.shape + (2,), dtype=np.complex128)
            grown[..., 0] = self._vec
            self._vec = grown
            self._axes[q] = self._vec.ndim - 1

    def _front(self, *qubits: int) -> np.ndarray:
        axes = [self._axes[q] for q in qubits]
        return np.moveaxis(self._vec, axes, range(len(axes)))

    def prob_one(self, qubit: int) -> float:
        """Probability of reading |1> on a qubit; inactive qubits are |0>."""
        if qubit not in self._axes:
            return 0.0
        v = self._front(qubit)
        return float(np.sum(np.abs(v[1]) ** 2))

    # --- gate primitives ----------------------------------------------

    def apply_single(self, qubit: int, matrix: np.ndarray) -> None:
        self.ensure(qubit)
        v = self._front(qubit)
        a = v[0].copy()
        b = v[1].copy()
        v[0] = matrix[0, 0] * a + matrix[0, 1] * b
        v[1] = matrix[1, 0] * a + matrix[1, 1] * b

    def apply_h(self, qubit: int) -> None:
        self.ensure(qubit)
        v = self._front(qubit)
        a = v[0].copy()
        v[0] += v[1]
        v[0] *= _SQRT_HALF
        v[1] *= -1.0
        v[1] += a
        v[1] *= _SQRT_HALF

    def apply_x(self, qubit: int) -> None:
        self.ensure(qubit)
        v = self._front(qubit)
        tmp = v[0].copy()
        v[0] = v[1]
        v[1] = tmp

    def apply_y(self, qubit: int) -> None:
        self.ensure(qubit)
        v = self._front(qubit)
        tmp = v[0].copy()
        v[0] = v[1]
        v[0] *= -1.0j
        v[1] = tmp
        v[1] *= 1.0j

    def apply_z(self, qubit: int) -> None:
        self.ensure(qubit)
        v = self._front(qubit)
        v[1] *= -1.0

    def apply_cz(self, a: int, b: int) -> None:
        self.ensure(a, b)
        v = self._front(a, b)
        v[1, 1] *= -1.0

    def apply_swap(self, a: int, b: int) -> None:
        self.ensure(a, b)
        v = self._front(a, b)
        tmp = v[0, 1].copy()
        v[0, 1] = v[1, 0]
        v[1, 0] = tmp

    def apply_cnot(self, control: int, target: int) -> None:
        self.ensure(control, target)
        v = self._front(control, target)
        tmp = v[1, 0].copy()
        v[1, 0] = v[1, 1]
        v[1, 1] = tmp

    def apply_routing_lobe(
        self, control: int, incident: int, child: int, conjugated: bool
    ) -> None:
        """One half of a router: swap incident and child, minus on |111>.

        The conjugated form acts in the control-zero subspace instead, which
        is how X-conjugation on the control enters without extra gates.
        """
        self.ensure(control, incident, child)
        v = self._front(control, incident, child)
        w = v[0] if conjugated else v[1]
        tmp = w[0, 1].copy()
        w[0, 1] = w[1, 0]
        w[1, 0] = tmp
        w[1, 1] *= -1.0

    def apply_router(self, control: int, incident: int, left: int, right: int) -> None:
        self.apply_routing_lobe(control, incident, left, conjugated=True)
        self.apply_routing_lobe(control, incident, right, conjugated=False)


_PAULI_APPLIERS = {
    "X": DenseState.apply_x,
    "Y": DenseState.apply_y,
    "Z": DenseState.apply_z,
}


def apply_app(state: DenseState, app) -> None:
    kind = app.kind
    if kind in ROUTING_GATE_KINDS:
        c, i, lo, ro = app.qubits
        state.apply_router(c, i, lo, ro)
    elif kind == "SWAP":
        state.apply_swap(*app.qubits)
    elif kind == "CZ":
        state.apply_cz(*app.qubits)
    elif kind == "H":
        state.apply_h(*app.qubits)
    elif kind in ("X", "PauliX"):
        state.apply_x(*app.qubits)
    elif kind == "PauliY":
        state.apply_y(*app.qubits)
    elif kind == "PauliZ":
        state.apply_z(*app.qubits)
    else:
        raise DenseEngineError(f"unsupported gate kind {kind!r}")


def apply_pauli(state: DenseState, qubit: int, pauli: str) -> None:
    try:
        _PAULI_APPLIERS[pauli](state, qubit)
    except KeyError:
        raise DenseEngineError(f"unknown Pauli {pauli!r}") from None


def init_dense_state(geometry: QramGeometry, address) -> DenseState:
    """Address register loaded with the given superposition, rest untouched."""
    state = DenseState()
    L = geometry.layers
    state.ensure(*(geometry.address_qubit(l) for l in range(1, L + 1)))
    vec = np.zeros((2,) * L, dtype=np.complex128)
    for amp, bits in address.components:
        vec[bits] = amp
    state._vec = vec
    return state


def dense_run(
    geometry: QramGeometry,
    circuit,
    address,
    errors=None,
    state: DenseState | None = None,
) -> DenseState:
    """Evolve the address state through the circuit, inserting sampled errors.

    Error events attach to gate positions and are applied right after their
    gate; injected Paulis fire at phase boundaries, after the last gate whose
    phase sorts at or before the injection's phase.
    """
    if state is None:
        state = init_dense_state(geometry, address)
    events_at: dict[int, list] = {}
    if errors is not None:
        for ev in errors.events:
            events_at.setdefault(ev.position, []).append(ev)
    boundary_at: dict[int, list] = {}
    if errors is not None and errors.injections:
        for inj in errors.injections:
            pos = boundary_position(circuit, inj.phase)
            boundary_at.setdefault(pos, []).append(inj)
        for inj in boundary_at.get(-1, ()):
            apply_pauli(state, inj.qubit, inj.pauli)
    for pos, app in enumerate(circuit.gates):
        apply_app(state, app)
        for ev in events_at.get(pos, ()):
            for qubit, pauli in ev.paulis:
                apply_pauli(state, qubit, pauli)
        for inj in boundary_at.get(pos, ()):
            apply_pauli(state, inj.qubit, inj.pauli)
    return state


def dense_query_fidelity(state: DenseState, geometry: QramGeometry, address, data) -> float:
    """Overlap of the (A, D) marginal with the ideal query outcome.

    The ideal outcome entangles each address component with its stored bit;
    everything else is traced out.
    """
    L = geometry.layers
    ad = [geometry.address_qubit(l) for l in range(1, L + 1)]
    ad.append(geometry.data_qubit())
    state.ensure(*ad)
    front = state._front(*ad)
    flat = 1 if front.ndim == L + 1 else -1
    rest = front.reshape((2,) * (L + 1) + (flat,))
    proj = np.zeros(rest.shape[-1], dtype=np.complex128)
    for amp, bits in address.components:
        leaf = geometry.leaf_of_bits(bits)
        idx = bits + (data.bits[leaf],)
        proj += np.conj(amp) * rest[idx]
    return float(np.sum(np.abs(proj) ** 2))


def reduced_density(state: DenseState, qubits) -> np.ndarray:
    qubits = tuple(qubits)
    if len(qubits) > 10:
        raise DenseEngineError(f"reduced_density limited to 10 qubits, got {len(qubits)}")
    missing = [q for q in qubits if q not in state._axes]
    if missing:
        raise DenseEngineError(f"qubits {missing} are not active")
    front = state._front(*qubits)
    m = front.reshape(1 << len(qubits), -1)
    rho = m @ m.conj().T
    return rho


def entanglement_entropy(rho: np.ndarray) -> float:
    """Von Neumann entropy in bits, with 0 log 0 taken as 0."""
    rho = np.asarray(rho, dtype=np.complex128)
    herm_dev = np.max(np.abs(rho - rho.conj().T))
    if herm_dev > 1e-9:
        raise DenseEngineError(f"density matrix not Hermitian, deviation {herm_dev:.3e}")
    eigs = np.linalg.eigvalsh(rho)
    if eigs.min() < -1e-9:
        raise DenseEngineError(f"density matrix not PSD, min eigenvalue {eigs.min():.3e}")
    eigs = np.clip(eigs, 0.0, None)
    positive = eigs[eigs > 0.0]
    return float(-np.sum(positive * np.log2(positive)))


def teleport_retrieval(
    state: DenseState,
    source: int,
    ancilla: int,
    destination: int,
    mode: str,
    rng: np.random.Generator | None = None,
):
    """Move the source qubit's state onto the destination via a Bell pair.

    PostSelect keeps only the instances where the Bell measurement lands on
    the pair's own basis state, exactly a quarter of them.  Feedforward keeps
    every shot and repairs the destination with the standard Pauli fix-up.
    """
    for q in (ancilla, destination):
        if q in state._axes and state.prob_one(q) > 1e-12:
            raise DenseEngineError(f"qubit {q} must start in |0>")
    state.ensure(source, ancilla, destination)

    state.apply_h(ancilla)
    state.apply_cnot(ancilla, destination)
    state.apply_cnot(source, ancilla)
    state.apply_h(source)

    v = state._front(source, ancilla)
    if mode == "PostSelect":
        keep = float(np.sum(np.abs(v[0, 0]) ** 2))
        kept = v[0, 0].copy()
        v[...] = 0.0
        v[0, 0] = kept / np.sqrt(keep)
        return state, keep
    if mode == "Feedforward":
        if rng is None:
            rng = np.random.default_rng()
        probs = np.array(
            [float(np.sum(np.abs(v[m1, m2]) ** 2)) for m1 in (0, 1) for m2 in (0, 1)]
        )
        outcome = int(rng.choice(4, p=probs / probs.sum()))
        m1, m2 = outcome >> 1, outcome & 1
        kept = v[m1, m2].copy()
        v[...] = 0.0
        v[m1, m2] = kept / np.sqrt(probs[outcome])
        if m2:
            state.apply_x(destination)
        if m1:
            state.apply_z(destination)
        return state, 1.0
    raise DenseEngineError(f"unknown teleport mode {mode!r}")
