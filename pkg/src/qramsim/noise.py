"""Pauli noise channels, Monte Carlo sampling, and readout correction.

Rate convention, fixed across the package: a rate e is the TOTAL probability
of a non-identity Pauli.  Single-qubit channels draw X, Y, Z at e_s/3 each;
two-qubit channels draw each of the 15 non-identity Pauli pairs at e_t/15.
By default e_s = e_t/10.

Composite gates (SWAP, routing unitaries) carry a noise recipe of constituent
counts: cz two-qubit slots and sq single-qubit slots, defaulting to the
decomposition registry's counts.  Every constituent samples independently and
the drawn Paulis are applied in constituent order AFTER the ideal composite
unitary, never interleaved inside it.  Slot operands are assigned by a fixed
cyclic rule over the unit's qubits, so identical (circuit, model, seed)
always produce identical configurations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gates as gates_mod
from .model import DEFAULT_ROUTING_CASE, PHASES, ROUTING_GATE_KINDS

_MASK64 = (1 << 64) - 1

PAULI_PAIRS = tuple(
    (a, b) for a in "IXYZ" for b in "IXYZ" if not (a == "I" and b == "I")
)
assert len(PAULI_PAIRS) == 15

_SINGLE_PAULIS = "XYZ"


class NoiseError(ValueError):
    """Raised for invalid rates, malformed configs, or singular responses."""


@dataclass(frozen=True)
class InjectionSpec:
    """A targeted Pauli source: one qubit, one phase boundary, probability p."""

    qubit: int
    phase: str
    p: float

    def __post_init__(self) -> None:
        if self.phase not in PHASES:
            raise NoiseError(f"unknown phase {self.phase!r}")
        if not 0.0 <= self.p <= 1.0:
            raise NoiseError(f"injection probability {self.p} outside [0, 1]")


def _default_recipes() -> dict[tuple[str, str], tuple[int, int]]:
    reg = gates_mod.default_registry()
    out = {}
    for (op, case), entry in reg.entries.items():
        if op in ROUTING_GATE_KINDS or op == "SWAP":
            out[(op, case)] = (entry.cz_count, entry.sq_count)
    return out


@dataclass(frozen=True)
class NoiseModel:
    """Rates plus composite recipes plus injection sources."""

    e_t: float
    e_s: float | None = None
    recipes: dict[tuple[str, str], tuple[int, int]] | None = None
    injections: tuple[InjectionSpec, ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 <= self.e_t <= 1.0:
            raise NoiseError(f"e_t {self.e_t} outside [0, 1]")
        e_s = self.e_t / 10.0 if self.e_s is None else self.e_s
        if not 0.0 <= e_s <= 1.0:
            raise NoiseError(f"e_s {e_s} outside [0, 1]")
        object.__setattr__(self, "e_s", float(e_s))
        recipes = dict(_default_recipes() if self.recipes is None else self.recipes)
        object.__setattr__(self, "recipes", recipes)
        object.__setattr__(self, "injections", tuple(self.injections))

    def recipe(self, op: str, case: str) -> tuple[int, int]:
        try:
            return self.recipes[(op, case)]
        except KeyError:
            raise NoiseError(f"no noise recipe for {op!r} under case {case!r}") from None


@dataclass(frozen=True)
class PauliEvent:
    """Sampled Paulis to apply right after one gate position."""

    position: int
    paulis: tuple[tuple[int, str], ...]


@dataclass(frozen=True)
class InjectedPauli:
    phase: str
    qubit: int
    pauli: str


@dataclass(frozen=True)
class ErrorConfiguration:
    events: tuple[PauliEvent, ...] = ()
    injections: tuple[InjectedPauli, ...] = ()

    @property
    def is_empty(self) -> bool:
        return not self.events and not self.injections


EMPTY_CONFIGURATION = ErrorConfiguration()


# ---------------------------------------------------------------------------
# slot tables and sampling


@dataclass
class SlotTable:
    """Flattened noise slots for one circuit under one model."""

    rates: np.ndarray
    is_pair: np.ndarray
    qubit_a: np.ndarray
    qubit_b: np.ndarray
    position: np.ndarray
    injections: tuple[InjectionSpec, ...]

    def __len__(self) -> int:
        return len(self.rates)

    @property
    def expected_events(self) -> float:
        return float(self.rates.sum())


def _unit_slots(qubits, cz: int, sq: int):
    """Cyclic slot assignment: pair slots hub the second operand of a lobe."""
    hub = qubits[1] if len(qubits) >= 3 else qubits[0]
    partners = [q for q in qubits if q != hub]
    for j in range(cz):
        yield True, hub, partners[j % len(partners)]
    for j in range(sq):
        yield False, qubits[j % len(qubits)], -1


def _app_units(app, model: NoiseModel):
    kind = app.kind
    if kind in ROUTING_GATE_KINDS:
        cz, sq = model.recipe(kind, app.case or DEFAULT_ROUTING_CASE)
        c, i, lo, ro = app.qubits
        if app.case == "star-four-qubit":
            return [((c, i, lo, ro), cz, sq)]
        return [((c, i, lo), cz, sq), ((c, i, ro), cz, sq)]
    if kind == "SWAP":
        cz, sq = model.recipe("SWAP", app.case or DEFAULT_ROUTING_CASE)
        return [(app.qubits, cz, sq)]
    if kind == "CZ":
        return [(app.qubits, 1, 0)]
    if kind in ("H", "X"):
        return [(app.qubits, 0, 1)]
    # Pauli kinds carry no noise of their own
    return []


def build_slot_table(circuit, model: NoiseModel) -> SlotTable:
    rates, is_pair, qa, qb, pos = [], [], [], [], []
    for position, app in enumerate(circuit.gates):
        for qubits, cz, sq in _app_units(app, model):
            for pair, a, b in _unit_slots(qubits, cz, sq):
                rates.append(model.e_t if pair else model.e_s)
                is_pair.append(pair)
                qa.append(a)
                qb.append(b)
                pos.append(position)
    return SlotTable(
        rates=np.asarray(rates, dtype=np.float64),
        is_pair=np.asarray(is_pair, dtype=bool),
        qubit_a=np.asarray(qa, dtype=np.intp),
        qubit_b=np.asarray(qb, dtype=np.intp),
        position=np.asarray(pos, dtype=np.intp),
        injections=model.injections,
    )


def sample_rng(master_seed: int, sample_index: int) -> np.random.Generator:
    """Counter-based stream for one sample: key = (master seed, index)."""
    key = [master_seed & _MASK64, sample_index & _MASK64]
    return np.random.Generator(np.random.Philox(key=key))


def sample_configuration(
    circuit,
    model: NoiseModel,
    master_seed: int,
    sample_index: int = 0,
    table: SlotTable | None = None,
) -> ErrorConfiguration:
    """Draw one error configuration.

    Draw order is fixed: one uniform per slot, one uniform per injection,
    then Pauli picks for triggered slots in slot order, then picks for
    triggered injections.  This makes the stream independent of how samples
    are scheduled across threads.
    """
    if table is None:
        table = build_slot_table(circuit, model)
    rng = sample_rng(master_seed, sample_index)
    m = len(table)
    u = rng.random(m)
    inj_u = rng.random(len(table.injections))
    hits = np.flatnonzero(u < table.rates)
    events = []
    for idx in hits:
        if table.is_pair[idx]:
            p1, p2 = PAULI_PAIRS[int(rng.integers(15))]
            paulis = tuple(
                (int(q), p)
                for q, p in ((table.qubit_a[idx], p1), (table.qubit_b[idx], p2))
                if p != "I"
            )
        else:
            paulis = ((int(table.qubit_a[idx]), _SINGLE_PAULIS[int(rng.integers(3))]),)
        events.append(PauliEvent(int(table.position[idx]), paulis))
    injected = []
    for k, spec in enumerate(table.injections):
        if inj_u[k] < spec.p:
            injected.append(
                InjectedPauli(spec.phase, spec.qubit, _SINGLE_PAULIS[int(rng.integers(3))])
            )
    if not events and not injected:
        return EMPTY_CONFIGURATION
    return ErrorConfiguration(tuple(events), tuple(injected))


def injection_rate(p: float) -> float:
    """Depolarizing rate e_d = 4p/3 for a Pauli source of strength p."""
    if not 0.0 <= p <= 0.75:
        raise NoiseError(f"injection strength {p} outside [0, 3/4]")
    return 4.0 * p / 3.0


# ---------------------------------------------------------------------------
# serialization

def model_to_config(model: NoiseModel, geometry) -> str:
    """Flat key=value text form; qubits appear as role names."""
    lines = [f"e_t={model.e_t!r}", f"e_s={model.e_s!r}"]
    for (op, case) in sorted(model.recipes):
        cz, sq = model.recipes[(op, case)]
        lines.append(f"recipe.{op}.{case}.cz={cz}")
        lines.append(f"recipe.{op}.{case}.sq={sq}")
    for n, spec in enumerate(model.injections):
        lines.append(f"inject.{n}.qubit={geometry.role_name(spec.qubit)}")
        lines.append(f"inject.{n}.phase={spec.phase}")
        lines.append(f"inject.{n}.p={spec.p!r}")
    return "\n".join(lines) + "\n"


def model_from_config(text: str, geometry) -> NoiseModel:
    e_t = None
    e_s = None
    recipes: dict[tuple[str, str], list[int | None]] = {}
    inject_fields: dict[int, dict[str, str]] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise NoiseError(f"line {ln}: expected key=value")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if key == "e_t":
            e_t = float(value)
        elif key == "e_s":
            e_s = float(value)
        elif key.startswith("recipe."):
            parts = key.split(".")
            if len(parts) != 4 or parts[3] not in ("cz", "sq"):
                raise NoiseError(f"line {ln}: bad recipe key {key!r}")
            slot = recipes.setdefault((parts[1], parts[2]), [None, None])
            slot[0 if parts[3] == "cz" else 1] = int(value)
        elif key.startswith("inject."):
            parts = key.split(".")
            if len(parts) != 3 or parts[2] not in ("qubit", "phase", "p"):
                raise NoiseError(f"line {ln}: bad injection key {key!r}")
            inject_fields.setdefault(int(parts[1]), {})[parts[2]] = value
        else:
            raise NoiseError(f"line {ln}: unknown key {key!r}")
    if e_t is None:
        raise NoiseError("config lacks e_t")
    full_recipes = _default_recipes()
    for pair, (cz, sq) in recipes.items():
        base = full_recipes.get(pair, (0, 0))
        full_recipes[pair] = (
            base[0] if cz is None else cz,
            base[1] if sq is None else sq,
        )
    injections = []
    for n in sorted(inject_fields):
        fields = inject_fields[n]
        missing = {"qubit", "phase", "p"} - set(fields)
        if missing:
            raise NoiseError(f"injection {n} lacks {sorted(missing)}")
        injections.append(
            InjectionSpec(
                qubit=geometry.qubit_index(fields["qubit"]),
                phase=fields["phase"],
                p=float(fields["p"]),
            )
        )
    return NoiseModel(e_t=e_t, e_s=e_s, recipes=full_recipes, injections=tuple(injections))


# ---------------------------------------------------------------------------
# readout correction


def _project_simplex(v: np.ndarray) -> np.ndarray:
    # Euclidean projection onto the probability simplex
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, len(v) + 1) > (css - 1.0))[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def correct_readout(histogram, responses, clip: bool = False) -> np.ndarray:
    """Undo per-qubit readout response matrices on a measured histogram.

    responses[q][i, j] = P(measured i | true j); the correction applies the
    tensor product of the inverses.  Entries of the result may dip slightly
    negative; clip=True projects onto the probability simplex instead.
    """
    hist = np.asarray(histogram, dtype=np.float64)
    n = len(responses)
    if hist.shape != (1 << n,):
        raise NoiseError(
            f"histogram length {hist.shape} does not match {n} response matrices"
        )
    if abs(hist.sum() - 1.0) > 1e-9:
        raise NoiseError(f"histogram sums to {hist.sum()}, expected 1")
    inverses = []
    for q, r in enumerate(responses):
        r = np.asarray(r, dtype=np.float64)
        if r.shape != (2, 2):
            raise NoiseError(f"response {q} is not 2x2")
        if np.any(np.abs(r.sum(axis=0) - 1.0) > 1e-9):
            raise NoiseError(f"response {q} is not column-stochastic")
        try:
            inverses.append(np.linalg.inv(r))
        except np.linalg.LinAlgError:
            raise NoiseError(f"response {q} is singular") from None
    cube = hist.reshape((2,) * n)
    for q, inv in enumerate(inverses):
        cube = np.moveaxis(np.tensordot(inv, cube, axes=([1], [q])), 0, q)
    out = cube.reshape(-1)
    assert abs(out.sum() - 1.0) < 1e-9
    if clip:
        out = _project_simplex(out)
        out /= out.sum()
    return out


# ---------------------------------------------------------------------------
# composite-noise calibration study


def routing_decomposition():
    """Exact chain-connectivity realization of the routing unitary.

    Qubits (0, 1, 2) = (control, input, output) on a line, CZ allowed on
    (0,1) and (1,2) only.  Five CZ gates and eight Ry rotations arranged as
    a palindrome around the single control-side CZ; composes to the routing
    unitary to machine precision, matching the registry's one-target counts.
    Steps are (kind, qubits, angle) with angle None for CZ.
    """
    quarter = np.pi / 4
    half = np.pi / 2
    return (
        ("Ry", (2,), half),
        ("CZ", (1, 2), None),
        ("Ry", (1,), quarter),
        ("Ry", (2,), -half),
        ("CZ", (1, 2), None),
        ("Ry", (1,), -quarter),
        ("CZ", (0, 1), None),
        ("Ry", (1,), quarter),
        ("CZ", (1, 2), None),
        ("Ry", (1,), -quarter),
        ("Ry", (2,), half),
        ("CZ", (1, 2), None),
        ("Ry", (2,), -half),
    )


def _ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


_PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": gates_mod.X_MATRIX,
    "Y": gates_mod.Y_MATRIX,
    "Z": gates_mod.Z_MATRIX,
}


def _embed_3q(matrix, positions):
    ops = [np.eye(2, dtype=complex)] * 3
    if matrix.shape == (2, 2):
        ops[positions[0]] = matrix
        out = np.kron(np.kron(ops[0], ops[1]), ops[2])
        return out
    # two-qubit matrix on arbitrary positions via tensor reshuffling
    full = np.eye(8, dtype=complex).reshape((2,) * 6)
    m = matrix.reshape(2, 2, 2, 2)
    full = np.tensordot(m, full, axes=([2, 3], list(positions)))
    full = np.moveaxis(full, [0, 1], list(positions))
    return full.reshape(8, 8)


def compose_constituents(steps) -> np.ndarray:
    out = np.eye(8, dtype=complex)
    for kind, qubits, angle in steps:
        m = gates_mod.CZ_MATRIX if kind == "CZ" else _ry(angle)
        out = _embed_3q(m, qubits) @ out
    return out


def _pauli_string_matrix(chars, qubits):
    out = np.eye(8, dtype=complex)
    for ch, q in zip(chars, qubits):
        out = _embed_3q(_PAULI_MATRICES[ch], (q,)) @ out
    return out


def _depolarize_single(rho, qubit, rate):
    out = (1.0 - rate) * rho
    for ch in "XYZ":
        p = _embed_3q(_PAULI_MATRICES[ch], (qubit,))
        out += (rate / 3.0) * (p @ rho @ p.conj().T)
    return out


def _depolarize_pair(rho, qa, qb, rate):
    out = (1.0 - rate) * rho
    for p1, p2 in PAULI_PAIRS:
        m = _pauli_string_matrix((p1, p2), (qa, qb))
        out += (rate / 15.0) * (m @ rho @ m.conj().T)
    return out


def _depolarize_lumped(rho, rate):
    out = (1.0 - rate) * rho
    strings = [
        (a, b, c) for a in "IXYZ" for b in "IXYZ" for c in "IXYZ"
    ][1:]
    for chars in strings:
        m = _pauli_string_matrix(chars, (0, 1, 2))
        out += (rate / 63.0) * (m @ rho @ m.conj().T)
    return out


def trace_distance(rho, sigma) -> float:
    eigs = np.linalg.eigvalsh(rho - sigma)
    return float(0.5 * np.sum(np.abs(eigs)))


CALIBRATION_PROBES = {
    "000": np.array([1, 0, 0, 0, 0, 0, 0, 0], dtype=complex),
    "1+0": np.kron(
        np.kron([0.0, 1.0], [2**-0.5, 2**-0.5]), [1.0, 0.0]
    ).astype(complex),
    "110": np.array([0, 0, 0, 0, 0, 0, 1, 0], dtype=complex),
    "+++": np.full(8, 8**-0.5, dtype=complex),
}


def calibration_comparison(e_t: float, e_s: float | None = None):
    """Trace distances of the two lumped-noise schemes from the exact channel.

    Reference: each constituent gate applied ideally, followed by its own
    depolarizing error (the fully interleaved circuit-level channel).
    Scheme A: the ideal composite unitary, then every constituent's error
    sequentially.  Scheme B: the ideal composite, then one three-qubit
    depolarizing whose strength matches the total no-error probability.
    Returns {probe: (distance_A, distance_B)}.
    """
    if e_s is None:
        e_s = e_t / 10.0
    steps = routing_decomposition()
    uprime = gates_mod.routing_unitary("UPrime").matrix
    total_clean = 1.0
    for kind, _, _ in steps:
        total_clean *= (1.0 - e_t) if kind == "CZ" else (1.0 - e_s)
    lumped_rate = 1.0 - total_clean

    results = {}
    for name, probe in CALIBRATION_PROBES.items():
        rho0 = np.outer(probe, probe.conj())
        ref = rho0
        for kind, qubits, angle in steps:
            m = gates_mod.CZ_MATRIX if kind == "CZ" else _ry(angle)
            u = _embed_3q(m, qubits)
            ref = u @ ref @ u.conj().T
            if kind == "CZ":
                ref = _depolarize_pair(ref, qubits[0], qubits[1], e_t)
            else:
                ref = _depolarize_single(ref, qubits[0], e_s)
        seq = uprime @ rho0 @ uprime.conj().T
        for kind, qubits, _ in steps:
            if kind == "CZ":
                seq = _depolarize_pair(seq, qubits[0], qubits[1], e_t)
            else:
                seq = _depolarize_single(seq, qubits[0], e_s)
        lump = uprime @ rho0 @ uprime.conj().T
        lump = _depolarize_lumped(lump, lumped_rate)
        results[name] = (trace_distance(seq, ref), trace_distance(lump, ref))
    return results
