"""Routing-gate library.

Exact unitaries for the three-qubit routing operations of a bucket-brigade
memory tree, a registry of two-qubit gate costs for those operations under
different connectivity constraints, and structural verification predicates
that pin down what "routes correctly" means independently of any particular
matrix realization.

Basis convention for three-qubit operators: |c t1 t2> with the control qubit
as the most significant bit, so basis index j = 4*c + 2*t1 + t2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_SQRT_HALF = 1.0 / np.sqrt(2.0)

# Signed permutations defining the routing unitaries.  UPrime swaps the two
# targets when the control is set and flips the sign of |111>.  UDoublePrime
# is the upward-merging variant: it agrees with CSWAP on every control-zero
# basis state and differs on the control-one block.
_UPRIME_PERM = (0, 1, 2, 3, 4, 6, 5, 7)
_UPRIME_SIGN = (1, 1, 1, 1, 1, 1, 1, -1)
_UDOUBLEPRIME_PERM = (0, 7, 2, 6, 4, 3, 5, 1)
_UDOUBLEPRIME_SIGN = (1, 1, 1, 1, 1, 1, 1, -1)
_CSWAP_PERM = (0, 1, 2, 3, 4, 6, 5, 7)
_CSWAP_SIGN = (1, 1, 1, 1, 1, 1, 1, 1)

ROUTING_KINDS = ("UPrime", "UDoublePrime", "CSWAP")

# Connectivity cases for a three-qubit routing site.  Allowed CZ pairs refer
# to operand slots (0 = control, 1 = first target, 2 = second target):
#   control-adjacent-one-target   chain c - t1 - t2
#   control-adjacent-two-targets  star around c, targets not coupled
# The four-qubit star case couples the incident qubit to control and both
# child-side qubits; it only arises for whole-router applications.
CONNECTIVITY_CASES = (
    "control-adjacent-one-target",
    "control-adjacent-two-targets",
    "star-four-qubit",
)

_ALLOWED_CZ_SLOTS = {
    "control-adjacent-one-target": {(0, 1), (1, 2)},
    "control-adjacent-two-targets": {(0, 1), (0, 2)},
}


class GateLibraryError(ValueError):
    """Raised for unknown gate kinds, malformed circuits, or registry misuse."""


@dataclass(frozen=True)
class GateUnitary:
    """A named unitary with its matrix pinned at construction time."""

    name: str
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise GateLibraryError(f"{self.name}: matrix must be square, got {m.shape}")
        dim = m.shape[0]
        if dim not in (2, 4, 8):
            raise GateLibraryError(f"{self.name}: unsupported dimension {dim}")
        dev = np.max(np.abs(m.conj().T @ m - np.eye(dim)))
        if dev > 1e-12:
            raise GateLibraryError(f"{self.name}: not unitary, deviation {dev:.3e}")
        object.__setattr__(self, "matrix", m)

    @property
    def qubits(self) -> int:
        return int(np.log2(self.matrix.shape[0]))


def _signed_permutation(perm, sign) -> np.ndarray:
    dim = len(perm)
    m = np.zeros((dim, dim), dtype=complex)
    for col, (row, s) in enumerate(zip(perm, sign)):
        m[row, col] = s
    return m


H_MATRIX = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) * _SQRT_HALF
X_MATRIX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
Y_MATRIX = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
Z_MATRIX = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
CZ_MATRIX = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)
SWAP_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)

SINGLE_QUBIT_MATRICES = {
    "H": H_MATRIX,
    "X": X_MATRIX,
    "PauliX": X_MATRIX,
    "PauliY": Y_MATRIX,
    "PauliZ": Z_MATRIX,
}


def routing_unitary(kind: str) -> GateUnitary:
    """Return the exact 8x8 unitary for a routing gate kind."""
    if kind == "UPrime":
        return GateUnitary("UPrime", _signed_permutation(_UPRIME_PERM, _UPRIME_SIGN))
    if kind == "UDoublePrime":
        return GateUnitary(
            "UDoublePrime", _signed_permutation(_UDOUBLEPRIME_PERM, _UDOUBLEPRIME_SIGN)
        )
    if kind == "CSWAP":
        return GateUnitary("CSWAP", _signed_permutation(_CSWAP_PERM, _CSWAP_SIGN))
    raise GateLibraryError(f"unknown routing kind {kind!r}")


# ---------------------------------------------------------------------------
# Structural verification


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    deviation: float


@dataclass(frozen=True)
class VerificationReport:
    scenario: str
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def max_deviation(self) -> float:
        return max(c.deviation for c in self.checks)

    def __str__(self) -> str:
        lines = [f"scenario {self.scenario}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            lines.append(f"  [{status}] {c.name} (deviation {c.deviation:.3e})")
        return "\n".join(lines)


def _column_check(m: np.ndarray, col: int, row: int, tol: float) -> float:
    target = np.zeros(8, dtype=complex)
    target[row] = 1.0
    return float(np.max(np.abs(m[:, col] - target)))


def verify_routing_equivalence(
    candidate: np.ndarray, scenario: str, tol: float = 1e-9
) -> VerificationReport:
    """Check whether an 8x8 unitary implements the routing behaviour.

    UpwardConstraints pins the merge direction: control-zero states pass
    through untouched, |100> is fixed, |110> maps to |101>, and the span of
    {|101>, |111>} maps unitarily onto the span of {|110>, |111>}.  Phase
    freedom inside that final block is deliberately unconstrained, which is
    what makes several distinct matrices (UPrime among them) all valid.

    DownwardConstraints requires agreement with CSWAP on every basis state
    with the second target clear, the states a downward routing step can
    actually encounter.
    """
    m = np.asarray(candidate, dtype=complex)
    if m.shape != (8, 8):
        raise GateLibraryError(f"candidate must be 8x8, got {m.shape}")
    udev = np.max(np.abs(m.conj().T @ m - np.eye(8)))
    checks = [CheckResult("unitary", udev <= tol, float(udev))]

    if scenario == "UpwardConstraints":
        for j in range(4):
            dev = _column_check(m, j, j, tol)
            checks.append(
                CheckResult(f"control-zero passthrough |0{j >> 1}{j & 1}>", dev <= tol, dev)
            )
        dev = _column_check(m, 4, 4, tol)
        checks.append(CheckResult("|100> fixed", dev <= tol, dev))
        dev = _column_check(m, 6, 5, tol)
        checks.append(CheckResult("|110> maps to |101>", dev <= tol, dev))
        block = m[np.ix_([6, 7], [5, 7])]
        leak = np.delete(m[:, [5, 7]], [6, 7], axis=0)
        leak_dev = float(np.max(np.abs(leak)))
        block_dev = float(np.max(np.abs(block.conj().T @ block - np.eye(2))))
        dev = max(leak_dev, block_dev)
        checks.append(
            CheckResult("span{|101>,|111>} maps onto span{|110>,|111>}", dev <= tol, dev)
        )
    elif scenario == "DownwardConstraints":
        cswap = routing_unitary("CSWAP").matrix
        for j in (0, 2, 4, 6):
            dev = float(np.max(np.abs(m[:, j] - cswap[:, j])))
            checks.append(
                CheckResult(
                    f"CSWAP agreement on |{j >> 2}{(j >> 1) & 1}0>", dev <= tol, dev
                )
            )
    else:
        raise GateLibraryError(f"unknown scenario {scenario!r}")

    return VerificationReport(scenario, tuple(checks))


# ---------------------------------------------------------------------------
# Decomposition cost registry

# Pinned two-qubit gate counts per operation and connectivity case.  The
# single-qubit counts are the accompanying noise-model defaults, not an
# exact tally of any bundled circuit.
_PINNED_COSTS = {
    ("RoutingDown", "control-adjacent-one-target"): (5, 8),
    ("RoutingDown", "control-adjacent-two-targets"): (7, 10),
    ("RoutingDown", "star-four-qubit"): (10, 16),
    ("RoutingUp", "control-adjacent-one-target"): (5, 8),
    ("RoutingUp", "control-adjacent-two-targets"): (8, 12),
    ("RoutingUp", "star-four-qubit"): (12, 16),
    ("CSWAP", "control-adjacent-one-target"): (8, 10),
    ("CSWAP", "control-adjacent-two-targets"): (10, 12),
    ("CSWAP", "star-four-qubit"): (16, 16),
    ("SWAP", "control-adjacent-one-target"): (3, 4),
    ("SWAP", "control-adjacent-two-targets"): (3, 4),
    ("SWAP", "star-four-qubit"): (3, 4),
}


@dataclass(frozen=True)
class DecompositionEntry:
    operation: str
    case: str
    cz_count: int
    sq_count: int
    # Optional realization as a list of (gate, operand slots) steps over the
    # operation's abstract operands; only CZ and single-qubit gates appear.
    circuit: tuple[tuple[str, tuple[int, ...]], ...] | None = None


@dataclass
class DecompositionRegistry:
    """Lookup table of gate costs keyed by (operation, connectivity case)."""

    entries: dict[tuple[str, str], DecompositionEntry] = field(default_factory=dict)

    def add(self, entry: DecompositionEntry) -> None:
        if entry.circuit is not None:
            cz = sum(1 for g, _ in entry.circuit if g == "CZ")
            if cz != entry.cz_count:
                raise GateLibraryError(
                    f"{entry.operation}/{entry.case}: circuit has {cz} CZ gates, "
                    f"entry claims {entry.cz_count}"
                )
        self.entries[(entry.operation, entry.case)] = entry

    def lookup(self, operation: str, case: str) -> DecompositionEntry:
        try:
            return self.entries[(operation, case)]
        except KeyError:
            raise GateLibraryError(
                f"no decomposition entry for {operation!r} under case {case!r}"
            ) from None

    def cz_count(self, operation: str, case: str) -> int:
        return self.lookup(operation, case).cz_count


# SWAP as three CZ gates with basis-change H pairs: three CNOTs with
# alternating orientation, each CNOT written as H on the target around a CZ.
_SWAP_REFERENCE_CIRCUIT = (
    ("H", (1,)),
    ("CZ", (0, 1)),
    ("H", (1,)),
    ("H", (0,)),
    ("CZ", (0, 1)),
    ("H", (0,)),
    ("H", (1,)),
    ("CZ", (0, 1)),
    ("H", (1,)),
)


def default_registry() -> DecompositionRegistry:
    reg = DecompositionRegistry()
    for (op, case), (cz, sq) in _PINNED_COSTS.items():
        circuit = None
        if op == "SWAP" and case == "control-adjacent-one-target":
            circuit = _SWAP_REFERENCE_CIRCUIT
        reg.add(DecompositionEntry(op, case, cz, sq, circuit))
    return reg


def compose_circuit(steps, n_qubits: int) -> np.ndarray:
    """Multiply a list of (gate, operand) steps into one unitary.

    Operands are qubit positions with qubit 0 as the most significant bit of
    the basis index.  Intended for small verification circuits only.
    """
    if n_qubits > 6:
        raise GateLibraryError("compose_circuit is limited to 6 qubits")
    dim = 2**n_qubits
    state = np.eye(dim, dtype=complex).reshape([2] * n_qubits + [dim])
    for gate, qubits in steps:
        if gate == "CZ":
            a, b = qubits
            idx = [slice(None)] * (n_qubits + 1)
            idx[a] = 1
            idx[b] = 1
            state[tuple(idx)] *= -1.0
            continue
        if gate in SINGLE_QUBIT_MATRICES:
            (q,) = qubits
            m = SINGLE_QUBIT_MATRICES[gate]
            state = np.moveaxis(
                np.tensordot(m, state, axes=([1], [q])), 0, q
            )
            continue
        raise GateLibraryError(f"compose_circuit: unsupported gate {gate!r}")
    return state.reshape(dim, dim)


def verify_reference_circuit(
    registry: DecompositionRegistry, operation: str, case: str
) -> VerificationReport:
    """Validate a registry entry's bundled circuit against its operation.

    Three families of checks: the composed unitary matches the operation's
    matrix, every CZ respects the declared connectivity case, and a mutation
    probe (dropping one CZ) breaks the match, guarding against a vacuous
    comparison.
    """
    entry = registry.lookup(operation, case)
    if entry.circuit is None:
        raise GateLibraryError(f"{operation}/{case} has no bundled circuit")
    if operation == "SWAP":
        target = SWAP_MATRIX
        n_qubits = 2
    elif operation in ROUTING_KINDS or operation in ("RoutingDown", "RoutingUp"):
        target = routing_unitary("CSWAP" if operation == "CSWAP" else "UPrime").matrix
        n_qubits = 3
    else:
        raise GateLibraryError(f"no target unitary for {operation!r}")

    composed = compose_circuit(entry.circuit, n_qubits)
    dev = float(np.max(np.abs(composed - target)))
    checks = [CheckResult("composes to target unitary", dev <= 1e-9, dev)]

    if n_qubits == 2:
        conn_ok = True
    else:
        allowed = _ALLOWED_CZ_SLOTS.get(case)
        conn_ok = allowed is not None and all(
            tuple(sorted(q)) in allowed for g, q in entry.circuit if g == "CZ"
        )
    checks.append(CheckResult("CZ placement respects connectivity", conn_ok, 0.0))

    cz_positions = [i for i, (g, _) in enumerate(entry.circuit) if g == "CZ"]
    mutation_dev = 0.0
    for pos in cz_positions:
        mutated = entry.circuit[:pos] + entry.circuit[pos + 1 :]
        mdev = float(np.max(np.abs(compose_circuit(mutated, n_qubits) - target)))
        mutation_dev = mdev if mutation_dev == 0.0 else min(mutation_dev, mdev)
    checks.append(
        CheckResult("dropping any CZ breaks the match", mutation_dev > 0.1, mutation_dev)
    )
    return VerificationReport(f"reference:{operation}/{case}", tuple(checks))


def parse_reference_circuit(text: str) -> tuple[tuple[str, tuple[int, ...]], ...]:
    """Parse a line-oriented circuit listing into (gate, operands) steps.

    Each nonempty line reads "GATE q0 [q1 ...]" with integer operand slots;
    lines starting with # are comments.
    """
    steps = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        gate, operands = parts[0], parts[1:]
        if gate not in ("CZ",) and gate not in SINGLE_QUBIT_MATRICES:
            raise GateLibraryError(f"line {ln}: unknown gate {gate!r}")
        try:
            qubits = tuple(int(tok) for tok in operands)
        except ValueError:
            raise GateLibraryError(f"line {ln}: operands must be integers") from None
        expected = 2 if gate == "CZ" else 1
        if len(qubits) != expected:
            raise GateLibraryError(
                f"line {ln}: {gate} takes {expected} operand(s), got {len(qubits)}"
            )
        steps.append((gate, qubits))
    return tuple(steps)
