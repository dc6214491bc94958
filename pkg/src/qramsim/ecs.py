"""Sparse product-component engine.

Represents the register as a superposition of product components whose
per-qubit states are restricted to {|0>, |1>, |+>, |->}, stored as a complex
amplitude vector plus a tag matrix (components x qubits).  Every gate in the
query circuit maps this set to itself, except a routing unitary fed a
non-computational operand, which first splits the offending component into
its computational halves.  Components are generally non-orthogonal, so norms
and fidelities go through the Gram matrix of tag overlaps.

Costs stay polynomial in the number of address components: gates touch one
tag column, fidelity is quadratic in the component count.
"""

from __future__ import annotations

import numpy as np

from .model import ROUTING_GATE_KINDS, QramGeometry, boundary_position

ZERO, ONE, PLUS, MINUS = 0, 1, 2, 3

_TAG_CHARS = "01+-"
_SQRT_HALF = 1.0 / np.sqrt(2.0)

# overlap[a, b] = <tag_a|tag_b>; the sign convention fixes <1|-> = -1/sqrt(2)
OVERLAP = np.array(
    [
        [1.0, 0.0, _SQRT_HALF, _SQRT_HALF],
        [0.0, 1.0, _SQRT_HALF, -_SQRT_HALF],
        [_SQRT_HALF, _SQRT_HALF, 1.0, 0.0],
        [_SQRT_HALF, -_SQRT_HALF, 0.0, 1.0],
    ]
)

_H_MAP = np.array([PLUS, MINUS, ZERO, ONE], dtype=np.uint8)
_X_MAP = np.array([ONE, ZERO, PLUS, MINUS], dtype=np.uint8)
_Z_MAP = np.array([ZERO, ONE, MINUS, PLUS], dtype=np.uint8)
_Y_MAP = np.array([ONE, ZERO, MINUS, PLUS], dtype=np.uint8)
_Y_FACTOR = np.array([1.0j, -1.0j, -1.0j, 1.0j])

_TAG_VECTORS = np.array(
    [
        [1.0, 0.0],
        [0.0, 1.0],
        [_SQRT_HALF, _SQRT_HALF],
        [_SQRT_HALF, -_SQRT_HALF],
    ],
    dtype=np.complex128,
)


class EcsEngineError(ValueError):
    """Raised on component-cap overflow or invalid engine input."""


class EcsState:
    """Component amplitudes and tags for one register."""

    __slots__ = ("qubit_count", "amps", "tags", "cap")

    def __init__(self, qubit_count: int, amps: np.ndarray, tags: np.ndarray, cap: int):
        self.qubit_count = qubit_count
        self.amps = np.asarray(amps, dtype=np.complex128)
        self.tags = np.asarray(tags, dtype=np.uint8)
        self.cap = cap
        if self.tags.shape != (len(self.amps), qubit_count):
            raise EcsEngineError(
                f"tag matrix shape {self.tags.shape} does not match "
                f"{len(self.amps)} components x {qubit_count} qubits"
            )

    @property
    def n_components(self) -> int:
        return len(self.amps)

    def copy(self) -> "EcsState":
        return EcsState(self.qubit_count, self.amps.copy(), self.tags.copy(), self.cap)

    def gram(self, columns=None) -> np.ndarray:
        """Pairwise component overlaps over the given columns (default all)."""
        n = self.n_components
        g = np.ones((n, n))
        cols = range(self.qubit_count) if columns is None else columns
        for q in cols:
            col = self.tags[:, q]
            if n > 1 and np.all(col == col[0]):
                continue
            g *= OVERLAP[col[:, None], col[None, :]]
        return g

    def norm_squared(self) -> float:
        g = self.gram()
        value = np.real(np.conj(self.amps) @ g @ self.amps)
        return float(value)

    def dump(self) -> str:
        lines = []
        for amp, row in zip(self.amps, self.tags):
            tag_text = "".join(_TAG_CHARS[t] for t in row)
            lines.append(f"({amp.real:+.12g}{amp.imag:+.12g}j) {tag_text}")
        return "\n".join(lines) + "\n"


def init_state(geometry: QramGeometry, address, cap: int | None = None) -> EcsState:
    """One component per address term; every non-address qubit starts |0>."""
    n = address.n_components
    if cap is None:
        cap = 4 * n
    amps = np.array([amp for amp, _ in address.components], dtype=np.complex128)
    tags = np.zeros((n, geometry.qubit_count), dtype=np.uint8)
    for row, (_, bits) in enumerate(address.components):
        for level, bit in enumerate(bits, start=1):
            tags[row, geometry.address_qubit(level)] = ONE if bit else ZERO
    return EcsState(geometry.qubit_count, amps, tags, cap)


# ---------------------------------------------------------------------------
# gate application


def _check_operands(state: EcsState, qubits) -> None:
    for q in qubits:
        if not 0 <= q < state.qubit_count:
            raise EcsEngineError(f"operand {q} outside 0..{state.qubit_count - 1}")


def _split_column(state: EcsState, q: int) -> None:
    """Rewrite Plus/Minus tags on one column as computational pairs."""
    col = state.tags[:, q]
    mask = col >= PLUS
    if not mask.any():
        return
    idx = np.flatnonzero(mask)
    reps = np.ones(state.n_components, dtype=np.intp)
    reps[idx] = 2
    starts = np.cumsum(reps) - reps
    pos0 = starts[idx]
    pos1 = pos0 + 1
    minus = state.tags[idx, q] == MINUS
    amps = np.repeat(state.amps, reps)
    tags = np.repeat(state.tags, reps, axis=0)
    amps[pos0] *= _SQRT_HALF
    amps[pos1] *= np.where(minus, -_SQRT_HALF, _SQRT_HALF)
    tags[pos0, q] = ZERO
    tags[pos1, q] = ONE
    if len(amps) > state.cap:
        raise EcsEngineError(
            f"component count {len(amps)} exceeds cap {state.cap} after splitting"
        )
    state.amps = amps
    state.tags = tags


def apply_h(state: EcsState, q: int) -> None:
    state.tags[:, q] = _H_MAP[state.tags[:, q]]


def apply_x(state: EcsState, q: int) -> None:
    col = state.tags[:, q]
    state.amps[col == MINUS] *= -1.0
    state.tags[:, q] = _X_MAP[col]


def apply_z(state: EcsState, q: int) -> None:
    col = state.tags[:, q]
    state.amps[col == ONE] *= -1.0
    state.tags[:, q] = _Z_MAP[col]


def apply_y(state: EcsState, q: int) -> None:
    col = state.tags[:, q]
    state.amps *= _Y_FACTOR[col]
    state.tags[:, q] = _Y_MAP[col]


def apply_swap(state: EcsState, a: int, b: int) -> None:
    state.tags[:, [a, b]] = state.tags[:, [b, a]]


def apply_cz(state: EcsState, a: int, b: int) -> None:
    col_a = state.tags[:, a]
    col_b = state.tags[:, b]
    if np.all(col_a <= ONE):
        hot = col_a == ONE
        sub = state.tags[hot, b]
        state.amps[np.flatnonzero(hot)[sub == ONE]] *= -1.0
        state.tags[hot, b] = _Z_MAP[sub]
        return
    if np.all(col_b <= ONE):
        apply_cz(state, b, a)
        return
    _split_column(state, a)
    apply_cz(state, a, b)


def apply_routing_lobe(
    state: EcsState, control: int, incident: int, child: int, conjugated: bool
) -> None:
    """Half a router: swap incident and child tags, minus on all-ones.

    The conjugated form routes when the control reads |0>; it is the
    X-sandwiched variant baked into one update.  Non-computational operands
    split first, so the signed permutation always sees definite bits.
    """
    for q in (control, incident, child):
        _split_column(state, q)
    tc = state.tags[:, control]
    active = tc == (ZERO if conjugated else ONE)
    if not active.any():
        return
    rows = np.flatnonzero(active)
    ti = state.tags[rows, incident].copy()
    tx = state.tags[rows, child].copy()
    state.amps[rows[(ti == ONE) & (tx == ONE)]] *= -1.0
    state.tags[rows, incident] = tx
    state.tags[rows, child] = ti


def apply_router(
    state: EcsState, control: int, incident: int, left: int, right: int
) -> None:
    apply_routing_lobe(state, control, incident, left, conjugated=True)
    apply_routing_lobe(state, control, incident, right, conjugated=False)


_PAULI_APPLIERS = {"X": apply_x, "Y": apply_y, "Z": apply_z}


def apply_pauli(state: EcsState, q: int, pauli: str) -> None:
    try:
        _PAULI_APPLIERS[pauli](state, q)
    except KeyError:
        raise EcsEngineError(f"unknown Pauli {pauli!r}") from None


def apply_gate(state: EcsState, app) -> EcsState:
    _check_operands(state, app.qubits)
    kind = app.kind
    if kind in ROUTING_GATE_KINDS:
        apply_router(state, *app.qubits)
    elif kind == "SWAP":
        apply_swap(state, *app.qubits)
    elif kind == "CZ":
        apply_cz(state, *app.qubits)
    elif kind == "H":
        apply_h(state, *app.qubits)
    elif kind in ("X", "PauliX"):
        apply_x(state, *app.qubits)
    elif kind == "PauliY":
        apply_y(state, *app.qubits)
    elif kind == "PauliZ":
        apply_z(state, *app.qubits)
    else:
        raise EcsEngineError(f"unsupported gate kind {kind!r}")
    return state


def run_circuit(state: EcsState, circuit, errors=None) -> EcsState:
    """Apply the circuit, inserting sampled Pauli events after their gates.

    Injections fire at phase boundaries, mirroring the dense engine exactly.
    """
    events_at: dict[int, list] = {}
    boundary_at: dict[int, list] = {}
    if errors is not None:
        for ev in errors.events:
            events_at.setdefault(ev.position, []).append(ev)
        for inj in errors.injections:
            pos = boundary_position(circuit, inj.phase)
            boundary_at.setdefault(pos, []).append(inj)
        for inj in boundary_at.get(-1, ()):
            apply_pauli(state, inj.qubit, inj.pauli)
    for pos, app in enumerate(circuit.gates):
        apply_gate(state, app)
        for ev in events_at.get(pos, ()):
            for qubit, pauli in ev.paulis:
                apply_pauli(state, qubit, pauli)
        for inj in boundary_at.get(pos, ()):
            apply_pauli(state, inj.qubit, inj.pauli)
    return state


# ---------------------------------------------------------------------------
# fidelity and diagnostics


def query_fidelity(state: EcsState, geometry: QramGeometry, address, data) -> float:
    """Overlap of the traced (address, data) block with the ideal outcome.

    F = sum_{k,l} v_k conj(v_l) <R_l|R_k> with v_k the component amplitude
    times its projection onto the ideal address-data state; all overlaps are
    products of single-qubit tag inner products.  Raises if the state norm
    has drifted beyond 1e-9, since every gate here is unitary.
    """
    L = geometry.layers
    n = state.n_components
    ad_cols = [geometry.address_qubit(l) for l in range(1, L + 1)]
    ad_cols.append(geometry.data_qubit())
    router_cols = [q for q in range(state.qubit_count) if q not in set(ad_cols)]

    bit_rows = np.empty((address.n_components, L + 1), dtype=np.intp)
    alphas = np.empty(address.n_components, dtype=np.complex128)
    for row, (amp, bits) in enumerate(address.components):
        alphas[row] = amp
        bit_rows[row, :L] = bits
        bit_rows[row, L] = data.bits[geometry.leaf_of_bits(bits)]

    proj = np.ones((address.n_components, n))
    for idx, q in enumerate(ad_cols):
        proj = proj * OVERLAP[bit_rows[:, idx][:, None], state.tags[None, :, q]]
    u = np.conj(alphas) @ proj.astype(np.complex128)

    g_router = state.gram(router_cols)
    v = state.amps * u
    value = np.conj(v) @ g_router @ v

    g_all = g_router * state.gram(ad_cols)
    norm = float(np.real(np.conj(state.amps) @ g_all @ state.amps))
    if abs(norm - 1.0) > 1e-9:
        raise EcsEngineError(f"state norm {norm} drifted beyond 1e-9")

    fidelity = float(np.real(value))
    return min(max(fidelity, 0.0), 1.0)


def error_free_amplitude_mass(address, errors, circuit, geometry: QramGeometry) -> float:
    """Squared amplitude over address branches whose path saw no error.

    Gate-attached events charge the gate's home node; injected Paulis charge
    the node owning the struck qubit.  A branch is excluded when any node on
    its root-to-leaf path (leaf node included) is charged.
    """
    charged: set[int] = set()
    if errors is not None:
        for ev in errors.events:
            charged.add(circuit.gates[ev.position].node)
        for inj in errors.injections:
            charged.add(geometry.node_of_qubit(inj.qubit))
    if not charged:
        return 1.0
    mass = 0.0
    for amp, bits in address.components:
        path = geometry.path_nodes(geometry.leaf_of_bits(bits))
        if not charged.intersection(path):
            mass += abs(amp) ** 2
    return float(mass)


def canonicalize(state: EcsState, drop_below: float = 1e-14) -> EcsState:
    """Merge identical-tag components; drop merged amplitudes near zero."""
    tags, inverse = np.unique(state.tags, axis=0, return_inverse=True)
    amps = np.zeros(len(tags), dtype=np.complex128)
    np.add.at(amps, inverse, state.amps)
    keep = np.abs(amps) > drop_below
    if not keep.any():
        keep[0] = True
    state.amps = amps[keep]
    state.tags = tags[keep]
    return state


def materialize(state: EcsState) -> np.ndarray:
    """Dense amplitude tensor of shape (2,) * qubit_count; tests only."""
    if state.qubit_count > 22:
        raise EcsEngineError("materialize is limited to 22 qubits")
    vec = np.zeros((2,) * state.qubit_count, dtype=np.complex128)
    for amp, row in zip(state.amps, state.tags):
        term = np.array([amp], dtype=np.complex128).reshape((1,) * state.qubit_count)
        for q, tag in enumerate(row):
            shape = [1] * state.qubit_count
            shape[q] = 2
            term = term * _TAG_VECTORS[tag].reshape(shape)
        vec += term
    return vec
