"""Memory-tree geometry, circuit representation, and the query constructor.

A depth-L binary tree serves N = 2^L addresses.  Tree nodes are heap-indexed
(node k has children 2k and 2k+1, the root is 1) and each real node carries a
control qubit C_k and an incident qubit I_k.  Leaf data qubits F_0..F_{N-1}
sit under the layer-L nodes, and leaf i is also addressable as virtual node
N + i, which makes root-to-leaf paths uniform: node N + i right-shifted s
times walks up to the root.

The flat qubit index space is ordered A_1..A_L, D, C_1..C_{N-1}, I_1..I_{N-1},
F_0..F_{N-1}.  Address bit 1 is the most significant bit and routes at the
root, so leaf index i reads off the routing bits root to leaf.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gates import GateLibraryError  # noqa: F401  (re-exported error hierarchy root)

PHASES = (
    "AddressLoading",
    "DataLoading",
    "DataWriting",
    "DataRetrieval",
    "AddressRetrieval",
)

GATE_KINDS = (
    "H",
    "X",
    "SWAP",
    "RoutingDown",
    "RoutingUp",
    "CZ",
    "PauliX",
    "PauliY",
    "PauliZ",
)

ROUTING_GATE_KINDS = ("RoutingDown", "RoutingUp")

DEFAULT_ROUTING_CASE = "control-adjacent-one-target"


class ModelError(ValueError):
    """Raised for inconsistent geometry, data, address, or circuit input."""


@dataclass(frozen=True)
class QramGeometry:
    """Tree shape and the role-to-index map for one memory size."""

    layers: int

    def __post_init__(self) -> None:
        if self.layers < 1:
            raise ModelError(f"layers must be >= 1, got {self.layers}")
        assert self.qubit_count == self.layers + 1 + 2 * (self.memory_size - 1) + self.memory_size

    @property
    def memory_size(self) -> int:
        return 1 << self.layers

    @property
    def node_count(self) -> int:
        return self.memory_size - 1

    @property
    def qubit_count(self) -> int:
        n = self.memory_size
        return self.layers + 1 + 2 * (n - 1) + n

    # --- role map -----------------------------------------------------

    def address_qubit(self, level: int) -> int:
        if not 1 <= level <= self.layers:
            raise ModelError(f"address level {level} outside 1..{self.layers}")
        return level - 1

    def data_qubit(self) -> int:
        return self.layers

    def control_qubit(self, node: int) -> int:
        self._check_node(node)
        return self.layers + 1 + (node - 1)

    def incident_qubit(self, node: int) -> int:
        self._check_node(node)
        return self.layers + 1 + self.node_count + (node - 1)

    def leaf_qubit(self, leaf: int) -> int:
        if not 0 <= leaf < self.memory_size:
            raise ModelError(f"leaf index {leaf} outside 0..{self.memory_size - 1}")
        return self.layers + 1 + 2 * self.node_count + leaf

    def _check_node(self, node: int) -> None:
        if not 1 <= node <= self.node_count:
            raise ModelError(f"node {node} outside 1..{self.node_count}")

    def role_name(self, qubit: int) -> str:
        L, n = self.layers, self.memory_size
        if 0 <= qubit < L:
            return f"A{qubit + 1}"
        if qubit == L:
            return "D"
        if qubit < L + 1 + (n - 1):
            return f"C{qubit - L}"
        if qubit < L + 1 + 2 * (n - 1):
            return f"I{qubit - (L + n) + 1}"
        if qubit < self.qubit_count:
            return f"F{qubit - (L + 1 + 2 * (n - 1))}"
        raise ModelError(f"qubit index {qubit} outside 0..{self.qubit_count - 1}")

    def qubit_index(self, name: str) -> int:
        if name == "D":
            return self.data_qubit()
        prefix, rest = name[:1], name[1:]
        try:
            value = int(rest)
        except ValueError:
            raise ModelError(f"bad qubit name {name!r}") from None
        if prefix == "A":
            return self.address_qubit(value)
        if prefix == "C":
            return self.control_qubit(value)
        if prefix == "I":
            return self.incident_qubit(value)
        if prefix == "F":
            return self.leaf_qubit(value)
        raise ModelError(f"bad qubit name {name!r}")

    # --- tree navigation ----------------------------------------------

    def node_layer(self, node: int) -> int:
        if not 1 <= node < 2 * self.memory_size:
            raise ModelError(f"node {node} outside the (possibly virtual) heap")
        return node.bit_length()

    def nodes_at_layer(self, layer: int) -> range:
        if not 1 <= layer <= self.layers:
            raise ModelError(f"layer {layer} outside 1..{self.layers}")
        return range(1 << (layer - 1), 1 << layer)

    def children(self, node: int) -> tuple[int, int]:
        self._check_node(node)
        return 2 * node, 2 * node + 1

    def leaf_node(self, leaf: int) -> int:
        """Virtual heap index of leaf i, one layer below the real nodes."""
        if not 0 <= leaf < self.memory_size:
            raise ModelError(f"leaf index {leaf} outside 0..{self.memory_size - 1}")
        return self.memory_size + leaf

    def path_nodes(self, leaf: int, include_leaf: bool = True) -> tuple[int, ...]:
        """Heap nodes from the root to leaf i, leaf-node last."""
        v = self.leaf_node(leaf)
        path = tuple(v >> s for s in range(self.layers, -1, -1))
        return path if include_leaf else path[:-1]

    def leaf_of_bits(self, bits) -> int:
        leaf = 0
        for b in bits:
            leaf = (leaf << 1) | int(b)
        return leaf

    def node_of_qubit(self, qubit: int) -> int:
        """Tree node an error on this qubit is attributed to.

        Address and data qubits count as trunk errors at the root; leaf
        qubits map to their virtual node below layer L.
        """
        name = self.role_name(qubit)
        if name[0] in ("A", "D"):
            return 1
        value = int(name[1:])
        if name[0] in ("C", "I"):
            return value
        return self.leaf_node(value)


@dataclass(frozen=True)
class ClassicalData:
    """Stored bits, indexed by the big-endian integer value of the address."""

    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(b not in (0, 1) for b in self.bits):
            raise ModelError("data bits must be 0 or 1")
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))

    @classmethod
    def from_spec(cls, text: str, memory_size: int) -> "ClassicalData":
        if text == "all-zeros":
            bits = (0,) * memory_size
        elif text == "all-ones":
            bits = (1,) * memory_size
        else:
            if not set(text) <= {"0", "1"}:
                raise ModelError(f"bad data spec {text!r}")
            bits = tuple(int(c) for c in text)
        if len(bits) != memory_size:
            raise ModelError(
                f"data length {len(bits)} does not match memory size {memory_size}"
            )
        return cls(bits)

    def __len__(self) -> int:
        return len(self.bits)


@dataclass(frozen=True)
class AddressState:
    """Input address superposition as explicit (amplitude, bitstring) terms."""

    components: tuple[tuple[complex, tuple[int, ...]], ...]

    def __post_init__(self) -> None:
        comps = tuple(
            (complex(a), tuple(int(b) for b in bits)) for a, bits in self.components
        )
        if not comps:
            raise ModelError("address state needs at least one component")
        L = len(comps[0][1])
        if any(len(bits) != L for _, bits in comps):
            raise ModelError("address bitstrings must share one length")
        if any(b not in (0, 1) for _, bits in comps for b in bits):
            raise ModelError("address bits must be 0 or 1")
        seen = {bits for _, bits in comps}
        if len(seen) != len(comps):
            raise ModelError("address bitstrings must be pairwise distinct")
        if len(comps) > (1 << L):
            raise ModelError("more address components than addresses")
        norm = sum(abs(a) ** 2 for a, _ in comps)
        if abs(norm - 1.0) > 1e-12:
            raise ModelError(f"address norm {norm} deviates from 1 beyond 1e-12")
        object.__setattr__(self, "components", comps)

    @property
    def layers(self) -> int:
        return len(self.components[0][1])

    @property
    def n_components(self) -> int:
        return len(self.components)

    @classmethod
    def basis(cls, bits: str) -> "AddressState":
        return cls(((1.0, tuple(int(c) for c in bits)),))

    @classmethod
    def uniform(cls, layers: int) -> "AddressState":
        n = 1 << layers
        amp = 1.0 / np.sqrt(n)
        comps = tuple(
            (amp, tuple((i >> s) & 1 for s in range(layers - 1, -1, -1)))
            for i in range(n)
        )
        return cls(comps)

    @classmethod
    def bell(cls, bits_a: str, bits_b: str) -> "AddressState":
        amp = 1.0 / np.sqrt(2.0)
        return cls(
            (
                (amp, tuple(int(c) for c in bits_a)),
                (amp, tuple(int(c) for c in bits_b)),
            )
        )

    @classmethod
    def from_spec(cls, text: str, layers: int) -> "AddressState":
        if text == "uniform":
            return cls.uniform(layers)
        if text.startswith("basis:"):
            state = cls.basis(text[len("basis:"):])
        elif text.startswith("bell:"):
            parts = text[len("bell:"):].split(",")
            if len(parts) != 2:
                raise ModelError(f"bell spec needs two bitstrings, got {text!r}")
            state = cls.bell(parts[0], parts[1])
        else:
            raise ModelError(f"bad address spec {text!r}")
        if state.layers != layers:
            raise ModelError(
                f"address length {state.layers} does not match {layers} layers"
            )
        return state


@dataclass(frozen=True)
class GateApp:
    """One gate application: kind, flat qubit operands, phase, home node."""

    kind: str
    qubits: tuple[int, ...]
    phase: str
    node: int
    case: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in GATE_KINDS:
            raise ModelError(f"unknown gate kind {self.kind!r}")
        if self.phase not in PHASES:
            raise ModelError(f"unknown phase {self.phase!r}")
        expected = {
            "H": 1, "X": 1, "PauliX": 1, "PauliY": 1, "PauliZ": 1,
            "SWAP": 2, "CZ": 2, "RoutingDown": 4, "RoutingUp": 4,
        }[self.kind]
        if len(self.qubits) != expected:
            raise ModelError(
                f"{self.kind} takes {expected} operand(s), got {len(self.qubits)}"
            )


@dataclass(frozen=True)
class CircuitIR:
    """Ordered gate list with the five query phases in canonical order."""

    gates: tuple[GateApp, ...]

    def __post_init__(self) -> None:
        order = {p: i for i, p in enumerate(PHASES)}
        last = -1
        for app in self.gates:
            idx = order[app.phase]
            if idx < last:
                raise ModelError(
                    f"phase {app.phase} appears after {PHASES[last]}"
                )
            last = idx

    def __len__(self) -> int:
        return len(self.gates)

    def phase_slice(self, phase: str) -> tuple[GateApp, ...]:
        return tuple(app for app in self.gates if app.phase == phase)

    def dump(self, geometry: QramGeometry) -> str:
        lines = []
        for app in self.gates:
            names = " ".join(geometry.role_name(q) for q in app.qubits)
            lines.append(f"{app.phase} {app.kind} {names}")
        return "\n".join(lines) + "\n"


def parse_circuit(text: str, geometry: QramGeometry) -> CircuitIR:
    """Rebuild a circuit from its dump; node and case are re-derived."""
    apps = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 3:
            raise ModelError(f"line {ln}: expected 'PHASE GATE qubits...'")
        phase, kind, names = parts[0], parts[1], parts[2:]
        try:
            qubits = tuple(geometry.qubit_index(n) for n in names)
        except ModelError as exc:
            raise ModelError(f"line {ln}: {exc}") from None
        node = _derive_node(geometry, kind, qubits, names)
        case = DEFAULT_ROUTING_CASE if kind in ROUTING_GATE_KINDS else None
        apps.append(GateApp(kind, qubits, phase, node, case))
    return CircuitIR(tuple(apps))


def _derive_node(geometry, kind, qubits, names) -> int:
    if kind in ROUTING_GATE_KINDS:
        return int(names[0][1:])
    for prefix in ("C", "I"):
        for name in names:
            if name[0] == prefix:
                return int(name[1:])
    for name in names:
        if name[0] == "F":
            return geometry.leaf_node(int(name[1:]))
    return 1


def build_query_circuit(geometry: QramGeometry, data: ClassicalData) -> CircuitIR:
    """Construct the canonical five-phase query circuit.

    AddressLoading deposits address bit l into the layer-l controls: SWAP the
    bit into the root incident, route it down l-1 layers, then SWAP incident
    into control across layer l.  DataLoading writes the classical bits onto
    the leaves with X.  DataWriting routes leaf data one step up into the
    layer-L incidents.  DataRetrieval routes the selected datum the rest of
    the way to the root incident, copies it into D through a CZ between
    Hadamards, then reverses the climb so leaves and routers are restored.
    AddressRetrieval is AddressLoading reversed; every gate involved is its
    own inverse, so the reversed list reuses identical gates.
    """
    if len(data) != geometry.memory_size:
        raise ModelError(
            f"data length {len(data)} does not match memory size {geometry.memory_size}"
        )
    g = geometry
    apps: list[GateApp] = []

    def routing(kind: str, node: int, phase: str) -> GateApp:
        if g.node_layer(node) == g.layers:
            left, right = g.children(node)
            lo = g.leaf_qubit(left - g.memory_size)
            ro = g.leaf_qubit(right - g.memory_size)
        else:
            left, right = g.children(node)
            lo = g.incident_qubit(left)
            ro = g.incident_qubit(right)
        return GateApp(
            kind,
            (g.control_qubit(node), g.incident_qubit(node), lo, ro),
            phase,
            node,
            DEFAULT_ROUTING_CASE,
        )

    loading: list[GateApp] = []
    for level in range(1, g.layers + 1):
        loading.append(
            GateApp(
                "SWAP",
                (g.address_qubit(level), g.incident_qubit(1)),
                "AddressLoading",
                1,
            )
        )
        for layer in range(1, level):
            for node in g.nodes_at_layer(layer):
                loading.append(routing("RoutingDown", node, "AddressLoading"))
        for node in g.nodes_at_layer(level):
            loading.append(
                GateApp(
                    "SWAP",
                    (g.incident_qubit(node), g.control_qubit(node)),
                    "AddressLoading",
                    node,
                )
            )
    apps.extend(loading)

    for leaf, bit in enumerate(data.bits):
        if bit:
            apps.append(
                GateApp(
                    "X", (g.leaf_qubit(leaf),), "DataLoading", g.leaf_node(leaf)
                )
            )

    for node in g.nodes_at_layer(g.layers):
        apps.append(routing("RoutingUp", node, "DataWriting"))

    for layer in range(g.layers - 1, 0, -1):
        for node in g.nodes_at_layer(layer):
            apps.append(routing("RoutingUp", node, "DataRetrieval"))
    d = g.data_qubit()
    apps.append(GateApp("H", (d,), "DataRetrieval", 1))
    apps.append(GateApp("CZ", (g.incident_qubit(1), d), "DataRetrieval", 1))
    apps.append(GateApp("H", (d,), "DataRetrieval", 1))
    for layer in range(1, g.layers + 1):
        for node in g.nodes_at_layer(layer):
            apps.append(routing("RoutingUp", node, "DataRetrieval"))

    for app in reversed(loading):
        apps.append(
            GateApp(app.kind, app.qubits, "AddressRetrieval", app.node, app.case)
        )

    return CircuitIR(tuple(apps))


# ---------------------------------------------------------------------------
# CZ accounting


@dataclass(frozen=True)
class GateStats:
    optimized_cz: int
    baseline_cz: int
    optimized_depth: int
    baseline_depth: int
    count_reduction: float | None
    depth_reduction: float | None
    per_phase: dict[str, tuple[int, int]] = field(default_factory=dict)


def boundary_position(circuit: CircuitIR, phase: str) -> int:
    """Index of the last gate at or before the named phase, -1 if none.

    Injected errors fire at phase boundaries; when a phase contributes no
    gates (all-zero data loading, say) the boundary falls back to the end of
    the preceding phase.
    """
    if phase not in PHASES:
        raise ModelError(f"unknown phase {phase!r}")
    cutoff = PHASES.index(phase)
    last = -1
    for pos, app in enumerate(circuit.gates):
        if PHASES.index(app.phase) <= cutoff:
            last = pos
    return last


def _booking_units(app: GateApp, registry, scheme: str):
    """Expand one application into (qubits, cz_weight) scheduling units.

    Routing under the three-qubit cases books one unit per lobe, matching
    the two-CSWAP structure of a router; the four-qubit star case books a
    single unit over all operands.  The baseline scheme replaces routing
    unitaries with standard CSWAPs at the same connectivity.
    """
    kind = app.kind
    if kind in ROUTING_GATE_KINDS:
        if app.case is None:
            raise ModelError(f"routing application at node {app.node} lacks a case")
        op = kind if scheme == "optimized" else "CSWAP"
        weight = registry.cz_count(op, app.case)
        c, i, lo, ro = app.qubits
        if app.case == "star-four-qubit":
            return [((c, i, lo, ro), weight)]
        return [((c, i, lo), weight), ((c, i, ro), weight)]
    if kind == "SWAP":
        weight = registry.cz_count("SWAP", app.case or DEFAULT_ROUTING_CASE)
        return [(app.qubits, weight)]
    if kind == "CZ":
        return [(app.qubits, 1)]
    return []


def circuit_stats(circuit: CircuitIR, registry) -> GateStats:
    """Count CZ gates and schedule CZ depth under both decomposition schemes.

    Depth is the greedy qubit-disjointness schedule: each unit starts at the
    earliest slot where all its qubits are free and occupies cz_weight
    consecutive slots; gates without CZ content do not occupy slots.
    """
    totals = {}
    depths = {}
    per_phase: dict[str, dict[str, int]] = {}
    for scheme in ("optimized", "baseline"):
        total = 0
        next_free: dict[int, int] = {}
        depth = 0
        for app in circuit.gates:
            for qubits, weight in _booking_units(app, registry, scheme):
                total += weight
                phase_bucket = per_phase.setdefault(app.phase, {"optimized": 0, "baseline": 0})
                phase_bucket[scheme] += weight
                if weight == 0:
                    continue
                start = max((next_free.get(q, 0) for q in qubits), default=0)
                end = start + weight
                for q in qubits:
                    next_free[q] = end
                depth = max(depth, end)
        totals[scheme] = total
        depths[scheme] = depth
    count_red = None
    depth_red = None
    if totals["baseline"] > 0:
        count_red = (totals["baseline"] - totals["optimized"]) / totals["baseline"]
    if depths["baseline"] > 0:
        depth_red = (depths["baseline"] - depths["optimized"]) / depths["baseline"]
    return GateStats(
        optimized_cz=totals["optimized"],
        baseline_cz=totals["baseline"],
        optimized_depth=depths["optimized"],
        baseline_depth=depths["baseline"],
        count_reduction=count_red,
        depth_reduction=depth_red,
        per_phase={
            p: (v["optimized"], v["baseline"]) for p, v in per_phase.items()
        },
    )
