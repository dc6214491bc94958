"""Command-line front end.

Builds and inspects query circuits, verifies the routing gates, runs the
simulation engines on single settings, and drives the experiment sweeps
with CSV/JSON output.  Every run can be dumped to a flat key=value config
file and replayed with --config for bit-exact reproduction.

Exit codes: 0 success, 2 configuration error, 3 statistical-failure flags
(outputs are still written).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import dense, ecs, experiments, gates, mitigation, noise
from .gates import GateLibraryError
from .model import (
    PHASES,
    AddressState,
    ClassicalData,
    ModelError,
    QramGeometry,
    build_query_circuit,
    circuit_stats,
)

OUTDIR_ENV = "QRAMSIM_OUTDIR"
FORMATS = ("csv", "json", "both")


class CliError(Exception):
    """Configuration problem; maps to exit code 2."""


# ---------------------------------------------------------------------------
# Flag registry


@dataclass(frozen=True)
class Param:
    name: str
    help: str


# Keys listed here are the complete config-file vocabulary per command;
# repeatable families (grid.<layers>, inject.<n>) are declared separately.
REGISTRY: dict[str, tuple[Param, ...]] = {
    "build": (
        Param("layers", "tree depth (required)"),
        Param("data", "stored bits: bitstring, all-ones, all-zeros (default: all-ones)"),
    ),
    "stats": (
        Param("layers", "tree depth (required)"),
        Param("data", "stored bits (default: all-ones)"),
    ),
    "verify-gates": (
        Param("tol", "deviation tolerance for the structural checks (default: 1e-9)"),
    ),
    "simulate": (
        Param("layers", "tree depth (required)"),
        Param("data", "stored bits (default: all-ones)"),
        Param("address", "address spec: uniform, basis:<bits>, bell:<b1>,<b2>, file:<path> (default: uniform)"),
        Param("e_t", "two-qubit Pauli error rate (default: 0)"),
        Param("e_s", "single-qubit rate; empty tracks e_t/10 (default: empty)"),
        Param("k", "postselection scope depth (default: 0, off)"),
        Param("mode", "router selection: All, QueriedBranchesOnly, UnqueriedBranchesOnly (default: All)"),
        Param("samples", "Monte Carlo trajectories when noise is on (default: 2000)"),
        Param("seed", "master seed (default: 0)"),
        Param("threads", "worker cap; results do not depend on it (default: 1)"),
    ),
    "scaling": (
        Param("layers", "depth span, e.g. 2..6 or 2,4,6 (default: 2..6)"),
        Param("e_t", "two-qubit error rate (default: 1e-4)"),
        Param("samples", "trajectories per depth (default: 10000)"),
        Param("seed", "master seed (default: 0)"),
        Param("out", "output stem; .csv/.json suffixes are added"),
        Param("format", "csv, json, or both (default: both)"),
        Param("threads", "worker cap; results do not depend on it (default: 1)"),
    ),
    "mitigate": (
        Param("layers", "tree depth (default: 3)"),
        Param("e_t", "two-qubit error rate (default: 1e-5)"),
        Param("k", "scope span, e.g. 0..3 or 0,2 (default: 0..layers)"),
        Param("samples", "shared trajectories (default: 2000)"),
        Param("seed", "master seed (default: 0)"),
        Param("out", "output stem; .csv/.json suffixes are added"),
        Param("format", "csv, json, or both (default: both)"),
        Param("threads", "worker cap; results do not depend on it (default: 1)"),
    ),
    "inject": (
        Param("nodes", "router nodes to kick, bottom layer of the 3-level tree (default: 4,7)"),
        Param("p_grid", "injection strengths (default: 0,0.15,0.3,0.45)"),
        Param("samples", "trajectories per point (default: 2000)"),
        Param("seed", "master seed (default: 0)"),
        Param("e_t", "background two-qubit rate (default: 0)"),
        Param("out", "output stem; .csv/.json suffixes are added"),
        Param("format", "csv, json, or both (default: both)"),
        Param("threads", "worker cap; results do not depend on it (default: 1)"),
    ),
    "entropy": (
        Param("layers", "tree depth, capped at 3 by the dense engine (default: 3)"),
        Param("address", "address spec (default: uniform)"),
        Param("out", "output stem; .csv/.json suffixes are added"),
        Param("format", "csv, json, or both (default: both)"),
    ),
    "contour": (
        Param("layers", "depth span (default: 2..4)"),
        Param("e_t_grid", "shared rate grid, e.g. 1e-4,5e-4,1e-3"),
        Param("targets", "target fidelities (default: 0.95)"),
        Param("samples", "trajectories per grid point (default: 2000)"),
        Param("seed", "master seed (default: 0)"),
        Param("out", "output stem; .csv/.json suffixes are added"),
        Param("format", "csv, json, or both (default: both)"),
        Param("threads", "worker cap; results do not depend on it (default: 1)"),
    ),
    "teleport": (
        Param("state", "input: zero, one, plus, minus, plus-i, minus-i, all (default: all)"),
        Param("mode", "PostSelect or Feedforward (default: PostSelect)"),
        Param("samples", "shots for Feedforward averaging (default: 500)"),
        Param("seed", "master seed (default: 0)"),
    ),
    "readout-correct": (
        Param("probs", "true histogram, length a power of two (default: 0.5,0.1,0.1,0.3)"),
        Param("flip0", "P(measure 1 | prepared 0) per qubit (default: 0.02)"),
        Param("flip1", "P(measure 0 | prepared 1) per qubit (default: 0.05)"),
    ),
}

# Repeatable flags that expand into numbered/keyed config entries.
FAMILIES: dict[str, tuple[tuple[str, str, str], ...]] = {
    "contour": (("grid", "grid.<layers>", "per-depth rate grid as <layers>:<rate>,<rate>,..."),),
    "simulate": (("inject", "inject.<n>", "extra Pauli source as <role>:<phase>:<p>, e.g. C4:DataLoading:0.1"),),
}

COMMAND_HELP = {
    "build": "print the query circuit for a given depth and data",
    "stats": "CZ count and depth under router vs CSWAP decompositions",
    "verify-gates": "structural verification of the routing unitaries",
    "simulate": "run one query, optionally noisy and postselected",
    "scaling": "infidelity against tree depth at fixed gate error",
    "mitigate": "postselected infidelity against scope depth",
    "inject": "fidelity against a localized depolarizing source",
    "entropy": "entanglement entropy per layer after address loading",
    "contour": "gate-error threshold for target fidelities by depth",
    "teleport": "teleport the retrieved qubit through a Bell pair",
    "readout-correct": "invert per-qubit readout response on a histogram",
}


# ---------------------------------------------------------------------------
# Run configuration


class RunConfig:
    """A command plus raw string parameters, each with a reporting origin.

    Values stay in their textual form until a handler converts them; the
    getters fill in defaults so a dumped config always replays the exact
    same run.
    """

    def __init__(self, command: str, values: dict[str, str],
                 origins: dict[str, str], dump_path: str | None = None):
        self.command = command
        self.values = values
        self.origins = origins
        self.dump_path = dump_path

    def _where(self, name: str) -> str:
        origin = self.origins.get(name, "default")
        if origin.startswith("option") or origin == "default":
            return f"option --{name}"
        return f"{origin}: field {name}"

    def fail(self, name: str, message: str) -> None:
        raise CliError(f"{self._where(name)}: {message}")

    def _raw(self, name: str, default: str | None) -> str:
        if name in self.values:
            return self.values[name]
        if default is None:
            raise CliError(f"command {self.command}: --{name} is required")
        self.values[name] = default
        self.origins[name] = "default"
        return default

    def get_str(self, name: str, default: str | None = None) -> str:
        return self._raw(name, default)

    def get_choice(self, name: str, default: str | None, choices) -> str:
        value = self._raw(name, default)
        if value not in choices:
            self.fail(name, f"expected one of {', '.join(choices)}, got {value!r}")
        return value

    def get_int(self, name: str, default: str | None = None,
                lo: int | None = None, hi: int | None = None) -> int:
        raw = self._raw(name, default)
        try:
            value = int(raw)
        except ValueError:
            self.fail(name, f"expected an integer, got {raw!r}")
        if (lo is not None and value < lo) or (hi is not None and value > hi):
            self.fail(name, f"{value} outside [{lo}, {hi}]")
        return value

    def get_float(self, name: str, default: str | None = None,
                  lo: float | None = None, hi: float | None = None) -> float:
        raw = self._raw(name, default)
        try:
            value = float(raw)
        except ValueError:
            self.fail(name, f"expected a number, got {raw!r}")
        if (lo is not None and value < lo) or (hi is not None and value > hi):
            self.fail(name, f"{value} outside [{lo}, {hi}]")
        return value

    def get_optional_float(self, name: str, lo: float | None = None,
                           hi: float | None = None) -> float | None:
        raw = self._raw(name, "")
        if raw == "":
            return None
        return self.get_float(name, lo=lo, hi=hi)

    def get_int_list(self, name: str, default: str | None = None) -> tuple[int, ...]:
        raw = self._raw(name, default).strip()
        if ".." in raw:
            lo_text, _, hi_text = raw.partition("..")
            try:
                lo_v, hi_v = int(lo_text), int(hi_text)
            except ValueError:
                self.fail(name, f"expected '<lo>..<hi>', got {raw!r}")
            if hi_v < lo_v:
                self.fail(name, f"span {raw!r} is empty")
            return tuple(range(lo_v, hi_v + 1))
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        if not parts:
            self.fail(name, "expected at least one integer")
        try:
            return tuple(int(p) for p in parts)
        except ValueError:
            self.fail(name, f"expected integers, got {raw!r}")

    def _floats(self, name: str, raw: str) -> tuple[float, ...]:
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        if not parts:
            self.fail(name, "expected at least one number")
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            self.fail(name, f"expected numbers, got {raw!r}")

    def get_float_list(self, name: str, default: str | None = None) -> tuple[float, ...]:
        return self._floats(name, self._raw(name, default))

    def get_data(self, geometry: QramGeometry, default: str = "all-ones") -> ClassicalData:
        raw = self._raw("data", default)
        try:
            return ClassicalData.from_spec(raw, geometry.memory_size)
        except ModelError as err:
            self.fail("data", str(err))

    def get_address(self, layers: int, default: str = "uniform") -> AddressState:
        raw = self._raw("address", default)
        if raw.startswith("file:"):
            return _address_from_file(raw[len("file:"):], layers)
        try:
            return AddressState.from_spec(raw, layers)
        except ModelError as err:
            self.fail("address", str(err))

    def get_grid_family(self) -> dict[int, tuple[float, ...]]:
        grids: dict[int, tuple[float, ...]] = {}
        for key in sorted(self.values):
            if not key.startswith("grid."):
                continue
            suffix = key[len("grid."):]
            if not suffix.isdigit():
                self.fail(key, "grid keys look like grid.<layers>")
            grids[int(suffix)] = self._floats(key, self.values[key])
        return grids

    def get_injections(self, geometry: QramGeometry) -> tuple[noise.InjectionSpec, ...]:
        numbered = []
        for key in self.values:
            if not key.startswith("inject."):
                continue
            suffix = key[len("inject."):]
            if not suffix.isdigit():
                self.fail(key, "injection keys look like inject.<n>")
            numbered.append((int(suffix), key))
        specs = []
        for _, key in sorted(numbered):
            raw = self.values[key]
            parts = [p.strip() for p in raw.split(":")]
            if len(parts) != 3:
                self.fail(key, f"expected '<role>:<phase>:<p>', got {raw!r}")
            role, phase, p_text = parts
            try:
                qubit = geometry.qubit_index(role)
            except ModelError as err:
                self.fail(key, str(err))
            if phase not in PHASES:
                self.fail(key, f"unknown phase {phase!r}")
            try:
                strength = float(p_text)
            except ValueError:
                self.fail(key, f"strength must be a number, got {p_text!r}")
            try:
                specs.append(noise.InjectionSpec(qubit=qubit, phase=phase, p=strength))
            except noise.NoiseError as err:
                self.fail(key, str(err))
        return tuple(specs)

    def resolve_stem(self, experiment: str, seed: int) -> str:
        stem = self.values.get("out")
        if stem:
            if stem.endswith(".csv") or stem.endswith(".json"):
                stem = stem.rsplit(".", 1)[0]
        else:
            outdir = os.environ.get(OUTDIR_ENV, ".")
            stem = os.path.join(outdir, f"{experiment}_seed{seed}")
        self.values["out"] = stem
        self.origins.setdefault("out", "default")
        return stem

    def maybe_dump(self) -> None:
        if not self.dump_path:
            return
        lines = [f"command={self.command}"]
        lines.extend(f"{key}={self.values[key]}" for key in sorted(self.values))
        parent = os.path.dirname(self.dump_path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(self.dump_path, "w") as handle:
            handle.write("\n".join(lines) + "\n")
        print(f"wrote config {self.dump_path}")


def _known_key(command: str, key: str) -> bool:
    if any(param.name == key for param in REGISTRY[command]):
        return True
    for flag, _, _ in FAMILIES.get(command, ()):
        prefix = f"{flag}."
        if key.startswith(prefix) and key[len(prefix):].isdigit():
            return True
    return False


def _load_config_file(path: str) -> RunConfig:
    try:
        with open(path) as handle:
            text = handle.read()
    except OSError as err:
        raise CliError(f"cannot read config {path}: {err.strerror or err}")
    command = None
    values: dict[str, str] = {}
    origins: dict[str, str] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{path}:{ln}: expected key=value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key == "command":
            if command is not None:
                raise CliError(f"{path}:{ln}: duplicate command line")
            if value not in REGISTRY:
                raise CliError(f"{path}:{ln}: unknown command {value!r}")
            command = value
            continue
        if command is None:
            raise CliError(f"{path}:{ln}: command= must come before other keys")
        if not _known_key(command, key):
            raise CliError(f"{path}:{ln}: unknown key {key!r} for command {command!r}")
        if key in values:
            raise CliError(f"{path}:{ln}: duplicate key {key!r}")
        values[key] = value
        origins[key] = f"{path}:{ln}"
    if command is None:
        raise CliError(f"{path}: config lacks a command= line")
    return RunConfig(command, values, origins)


def _address_from_file(path: str, layers: int) -> AddressState:
    try:
        with open(path) as handle:
            lines = handle.read().splitlines()
    except OSError as err:
        raise CliError(f"cannot read address file {path}: {err.strerror or err}")
    components: list[tuple[complex, tuple[int, ...]]] = []
    for ln, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise CliError(f"{path}:{ln}: expected '<bits> <re> [<im>]', got {raw.strip()!r}")
        bits = parts[0]
        if not bits or not set(bits) <= {"0", "1"}:
            raise CliError(f"{path}:{ln}: address bits must be 0/1, got {bits!r}")
        try:
            re_part = float(parts[1])
            im_part = float(parts[2]) if len(parts) == 3 else 0.0
        except ValueError:
            raise CliError(f"{path}:{ln}: amplitude parts must be numbers")
        components.append((complex(re_part, im_part), tuple(int(c) for c in bits)))
    if not components:
        raise CliError(f"{path}: no address components found")
    norm = math.sqrt(sum(abs(a) ** 2 for a, _ in components))
    if norm <= 0.0:
        raise CliError(f"{path}: address components have zero norm")
    try:
        state = AddressState(tuple((a / norm, b) for a, b in components))
    except ModelError as err:
        raise CliError(f"{path}: {err}")
    if state.layers != layers:
        raise CliError(
            f"{path}: address length {state.layers} does not match {layers} layers"
        )
    return state


# ---------------------------------------------------------------------------
# Argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qramsim",
        description="Bucket-brigade memory query simulator and experiment runner.",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    for command, params in REGISTRY.items():
        sub = subparsers.add_parser(command, help=COMMAND_HELP[command])
        for param in params:
            sub.add_argument(f"--{param.name}", type=str, default=None,
                             metavar="V", help=param.help)
        for flag, _, help_text in FAMILIES.get(command, ()):
            sub.add_argument(f"--{flag}", action="append", default=None,
                             metavar="V", help=help_text + " (repeatable)")
        sub.add_argument("--dump-config", type=str, default=None, metavar="PATH",
                         help="write the resolved run configuration, then run")
    return parser


def _parse_args(argv: list[str]) -> RunConfig:
    parser = _build_parser()
    namespace = parser.parse_args(argv)
    if namespace.command is None:
        parser.print_usage(sys.stderr)
        raise CliError("a command is required")
    command = namespace.command
    values: dict[str, str] = {}
    origins: dict[str, str] = {}
    for param in REGISTRY[command]:
        raw = getattr(namespace, param.name.replace("-", "_"))
        if raw is not None:
            values[param.name] = raw
            origins[param.name] = f"option --{param.name}"
    for flag, _, _ in FAMILIES.get(command, ()):
        for index, item in enumerate(getattr(namespace, flag) or ()):
            if flag == "grid":
                depth, sep, rest = item.partition(":")
                if not sep or not depth.strip().isdigit() or not rest.strip():
                    raise CliError(
                        f"option --grid: expected '<layers>:<rate>,<rate>,...', got {item!r}"
                    )
                key = f"grid.{int(depth)}"
                if key in values:
                    raise CliError(f"option --grid: duplicate entry for depth {int(depth)}")
            else:
                key = f"{flag}.{index}"
            values[key] = item if flag != "grid" else rest.strip()
            origins[key] = f"option --{flag}"
    return RunConfig(command, values, origins, namespace.dump_config)


# ---------------------------------------------------------------------------
# Output helpers


def _write_result(result, stem: str, fmt: str) -> None:
    parent = os.path.dirname(stem)
    if parent:
        os.makedirs(parent, exist_ok=True)
    if fmt in ("csv", "both"):
        path = stem + ".csv"
        experiments.write_csv(result, path)
        print(f"wrote {path} ({len(result.rows)} rows)")
    if fmt in ("json", "both"):
        path = stem + ".json"
        experiments.write_json(result, path)
        print(f"wrote {path}")


def _print_fits(result) -> None:
    for fit in result.fits:
        rows = ", ".join(str(i) for i in fit.rows)
        label = fit.domain or "linear"
        print(f"fit {label}: slope {fit.slope:.6g} stderr {fit.stderr:.6g} rows [{rows}]")
    for point in result.thresholds:
        note = " (degenerate)" if point.degenerate else ""
        print(
            f"threshold layers={point.layers} target={point.f_target:g}: "
            f"e_t*={point.epsilon_star:.6g}{note}"
        )


def _flag_exit(result) -> int:
    flagged = sum(1 for row in result.rows if row.flagged)
    if flagged:
        print(
            f"warning: {flagged} row(s) flagged, interval wider than the infidelity",
            file=sys.stderr,
        )
        return 3
    return 0


# ---------------------------------------------------------------------------
# Command handlers


def _cmd_build(cfg: RunConfig) -> int:
    layers = cfg.get_int("layers", lo=1, hi=9)
    geometry = QramGeometry(layers)
    data = cfg.get_data(geometry)
    cfg.maybe_dump()
    circuit = build_query_circuit(geometry, data)
    sys.stdout.write(circuit.dump(geometry))
    return 0


def _cmd_stats(cfg: RunConfig) -> int:
    layers = cfg.get_int("layers", lo=1, hi=9)
    geometry = QramGeometry(layers)
    data = cfg.get_data(geometry)
    cfg.maybe_dump()
    circuit = build_query_circuit(geometry, data)
    stats = circuit_stats(circuit, gates.default_registry())
    print(f"layers {layers}  qubits {geometry.qubit_count}  gates {len(circuit)}")
    print(f"cz count: optimized {stats.optimized_cz}  baseline {stats.baseline_cz}")
    print(f"cz depth: optimized {stats.optimized_depth}  baseline {stats.baseline_depth}")
    if stats.count_reduction is not None:
        print(f"count reduction {100.0 * stats.count_reduction:.2f}%")
    if stats.depth_reduction is not None:
        print(f"depth reduction {100.0 * stats.depth_reduction:.2f}%")
    for phase, (optimized, baseline) in stats.per_phase.items():
        print(f"  {phase}: {optimized} vs {baseline}")
    return 0


def _cmd_verify_gates(cfg: RunConfig) -> int:
    tol = cfg.get_float("tol", "1e-9", lo=0.0)
    cfg.maybe_dump()
    upward = gates.verify_routing_equivalence(
        gates.routing_unitary("UPrime").matrix, "UpwardConstraints", tol=tol
    )
    downward = gates.verify_routing_equivalence(
        gates.routing_unitary("UDoublePrime").matrix, "DownwardConstraints", tol=tol
    )
    print("UPrime")
    print(upward)
    print("UDoublePrime")
    print(downward)
    matrix = gates.routing_unitary("UPrime").matrix
    deviation = float(np.max(np.abs(matrix @ matrix - np.eye(8))))
    involutive = deviation == 0.0
    print(f"UPrime involution: {'PASS' if involutive else 'FAIL'} (deviation {deviation:.3e})")
    return 0 if upward.passed and downward.passed and involutive else 3


def _cmd_simulate(cfg: RunConfig) -> int:
    layers = cfg.get_int("layers", lo=1, hi=9)
    geometry = QramGeometry(layers)
    data = cfg.get_data(geometry)
    address = cfg.get_address(layers)
    e_t = cfg.get_float("e_t", "0", lo=0.0, hi=1.0)
    e_s = cfg.get_optional_float("e_s", lo=0.0, hi=1.0)
    k_layers = cfg.get_int("k", "0", lo=0, hi=layers)
    mode = cfg.get_choice("mode", "All", mitigation.SELECTION_MODES)
    samples = cfg.get_int("samples", "2000", lo=1)
    seed = cfg.get_int("seed", "0", lo=0)
    cfg.get_int("threads", "1", lo=1)
    injections = cfg.get_injections(geometry)
    cfg.maybe_dump()

    circuit = build_query_circuit(geometry, data)
    model = noise.NoiseModel(e_t=e_t, e_s=e_s, injections=injections)
    if mode == "All":
        selection = mitigation.MitigationConfig(k_layers=k_layers)
    else:
        selection = mitigation.MitigationConfig.for_address(k_layers, mode, address)

    if e_t == 0.0 and model.e_s == 0.0 and not injections:
        state = ecs.run_circuit(ecs.init_state(geometry, address), circuit)
        keep = 1.0
        if k_layers > 0:
            state, keep = mitigation.postselect(state, selection, geometry)
        fidelity = ecs.query_fidelity(state, geometry, address, data)
        print(f"fidelity {fidelity:.6f}")
        print(f"valid_fraction {keep:.6f}")
        return 0

    estimate = mitigation.mitigated_query(
        circuit, address, data, model, selection, samples, seed
    )
    print(f"fidelity {estimate.fidelity:.6f} +- {estimate.fidelity_ci:.6f}")
    print(
        f"valid_fraction {estimate.valid_fraction:.6f} "
        f"+- {estimate.valid_fraction_ci:.6f}"
    )
    print(f"samples {estimate.n_samples} seed {seed}")
    if estimate.fidelity_ci > 1.0 - estimate.fidelity:
        print("warning: interval wider than the infidelity", file=sys.stderr)
        return 3
    return 0


def _cmd_scaling(cfg: RunConfig) -> int:
    layers = cfg.get_int_list("layers", "2..6")
    e_t = cfg.get_float("e_t", "1e-4", lo=0.0, hi=1.0)
    samples = cfg.get_int("samples", "10000", lo=1)
    seed = cfg.get_int("seed", "0", lo=0)
    fmt = cfg.get_choice("format", "both", FORMATS)
    cfg.get_int("threads", "1", lo=1)
    stem = cfg.resolve_stem("scaling", seed)
    cfg.maybe_dump()
    result = experiments.scaling_experiment(layers, e_t, samples, seed)
    _write_result(result, stem, fmt)
    _print_fits(result)
    return _flag_exit(result)


def _cmd_mitigate(cfg: RunConfig) -> int:
    layers = cfg.get_int("layers", "3", lo=1, hi=9)
    e_t = cfg.get_float("e_t", "1e-5", lo=0.0, hi=1.0)
    scopes = cfg.get_int_list("k", f"0..{layers}")
    samples = cfg.get_int("samples", "2000", lo=1)
    seed = cfg.get_int("seed", "0", lo=0)
    fmt = cfg.get_choice("format", "both", FORMATS)
    cfg.get_int("threads", "1", lo=1)
    stem = cfg.resolve_stem("mitigation", seed)
    cfg.maybe_dump()
    result = experiments.mitigation_sweep(layers, e_t, scopes, samples, seed)
    _write_result(result, stem, fmt)
    _print_fits(result)
    return _flag_exit(result)


def _cmd_inject(cfg: RunConfig) -> int:
    nodes = cfg.get_int_list("nodes", "4,7")
    p_grid = cfg.get_float_list("p_grid", "0,0.15,0.3,0.45")
    samples = cfg.get_int("samples", "2000", lo=1)
    seed = cfg.get_int("seed", "0", lo=0)
    e_t = cfg.get_float("e_t", "0", lo=0.0, hi=1.0)
    fmt = cfg.get_choice("format", "both", FORMATS)
    cfg.get_int("threads", "1", lo=1)
    stem = cfg.resolve_stem("injection", seed)
    cfg.maybe_dump()
    result = experiments.injection_experiment(nodes, p_grid, samples, seed, e_t=e_t)
    _write_result(result, stem, fmt)
    _print_fits(result)
    return _flag_exit(result)


def _cmd_entropy(cfg: RunConfig) -> int:
    # The dense engine holds every touched qubit; depth 4 already needs
    # ~40 active qubits during loading, far past desk memory.
    layers = cfg.get_int("layers", "3", lo=1, hi=3)
    address = cfg.get_address(layers)
    fmt = cfg.get_choice("format", "both", FORMATS)
    stem = cfg.resolve_stem("entropy", 0)
    cfg.maybe_dump()
    result = experiments.entropy_by_layer(layers, address)
    _write_result(result, stem, fmt)
    for row in result.rows:
        print(
            f"layer {int(row.param('layer'))} node {int(row.param('node'))}: "
            f"S = {row.fidelity:.6f} bits"
        )
    return 0


def _cmd_contour(cfg: RunConfig) -> int:
    layers = cfg.get_int_list("layers", "2..4")
    targets = cfg.get_float_list("targets", "0.95")
    samples = cfg.get_int("samples", "2000", lo=1)
    seed = cfg.get_int("seed", "0", lo=0)
    fmt = cfg.get_choice("format", "both", FORMATS)
    cfg.get_int("threads", "1", lo=1)
    per_layer = cfg.get_grid_family()
    shared_raw = cfg.values.get("e_t_grid")
    if per_layer and shared_raw is not None:
        cfg.fail("e_t_grid", "give either a shared grid or per-depth grid.<layers> entries, not both")
    if per_layer:
        missing = [L for L in layers if L not in per_layer]
        if missing:
            raise CliError(
                f"command contour: no grid for depth(s) {', '.join(map(str, missing))}; "
                f"add --grid entries or keys grid.<layers>"
            )
        grids: dict[int, tuple[float, ...]] | tuple[float, ...] = {
            L: per_layer[L] for L in layers
        }
    elif shared_raw is not None:
        grids = cfg.get_float_list("e_t_grid")
    else:
        raise CliError(
            "command contour: provide --e_t_grid or per-depth --grid entries"
        )
    stem = cfg.resolve_stem("contour", seed)
    cfg.maybe_dump()
    result = experiments.threshold_contour(layers, grids, targets, samples, seed)
    _write_result(result, stem, fmt)
    _print_fits(result)
    return _flag_exit(result)


# Cardinal states of the Bloch sphere, as (amp0, amp1) pairs.
_SQRT_HALF = 1.0 / math.sqrt(2.0)
CARDINAL_STATES: dict[str, tuple[complex, complex]] = {
    "zero": (1.0, 0.0),
    "one": (0.0, 1.0),
    "plus": (_SQRT_HALF, _SQRT_HALF),
    "minus": (_SQRT_HALF, -_SQRT_HALF),
    "plus-i": (_SQRT_HALF, _SQRT_HALF * 1j),
    "minus-i": (_SQRT_HALF, -_SQRT_HALF * 1j),
}


def _prepare_source(state: dense.DenseState, amplitudes) -> None:
    a, b = complex(amplitudes[0]), complex(amplitudes[1])
    state.ensure(0)
    state.apply_single(0, np.array([[a, -np.conj(b)], [b, np.conj(a)]], dtype=complex))


def _destination_fidelity(state: dense.DenseState, amplitudes) -> float:
    target = np.array(amplitudes, dtype=complex)
    rho = dense.reduced_density(state, (2,))
    return float(np.real(np.conj(target) @ rho @ target))


def _cmd_teleport(cfg: RunConfig) -> int:
    which = cfg.get_choice("state", "all", tuple(CARDINAL_STATES) + ("all",))
    mode = cfg.get_choice("mode", "PostSelect", ("PostSelect", "Feedforward"))
    samples = cfg.get_int("samples", "500", lo=1)
    seed = cfg.get_int("seed", "0", lo=0)
    cfg.maybe_dump()
    names = tuple(CARDINAL_STATES) if which == "all" else (which,)
    for name in names:
        amplitudes = CARDINAL_STATES[name]
        if mode == "PostSelect":
            state = dense.DenseState()
            _prepare_source(state, amplitudes)
            state, keep = dense.teleport_retrieval(state, 0, 1, 2, "PostSelect")
            fidelity = _destination_fidelity(state, amplitudes)
            print(f"state {name:8s} fidelity {fidelity:.6f} keep {keep:.6f}")
        else:
            fidelities = []
            for s in range(samples):
                state = dense.DenseState()
                _prepare_source(state, amplitudes)
                state, _ = dense.teleport_retrieval(
                    state, 0, 1, 2, "Feedforward", rng=noise.sample_rng(seed, s)
                )
                fidelities.append(_destination_fidelity(state, amplitudes))
            print(
                f"state {name:8s} fidelity {float(np.mean(fidelities)):.6f} "
                f"keep 1.000000 samples {samples}"
            )
    return 0


def _cmd_readout_correct(cfg: RunConfig) -> int:
    probs = np.asarray(cfg.get_float_list("probs", "0.5,0.1,0.1,0.3"))
    flip0 = cfg.get_float("flip0", "0.02", lo=0.0, hi=1.0)
    flip1 = cfg.get_float("flip1", "0.05", lo=0.0, hi=1.0)
    n_states = len(probs)
    n_qubits = n_states.bit_length() - 1
    if n_states < 2 or n_states != 1 << n_qubits:
        cfg.fail("probs", f"histogram length {n_states} is not a power of two")
    if n_states > 256:
        cfg.fail("probs", f"histogram length {n_states} above the 256 supported")
    if np.any(probs < 0.0):
        cfg.fail("probs", "entries must be nonnegative")
    total = float(probs.sum())
    if abs(total - 1.0) > 1e-9:
        cfg.fail("probs", f"entries sum to {total:.6g}, expected 1")
    cfg.maybe_dump()
    response = np.array([[1.0 - flip0, flip1], [flip0, 1.0 - flip1]])
    full = np.array([[1.0]])
    for _ in range(n_qubits):
        full = np.kron(full, response)
    measured = full @ probs
    recovered = noise.correct_readout(measured, [response] * n_qubits)
    deviation = float(np.max(np.abs(recovered - probs)))
    print(f"qubits {n_qubits}  flip0 {flip0:g}  flip1 {flip1:g}")
    print("true      " + " ".join(f"{v:.6f}" for v in probs))
    print("measured  " + " ".join(f"{v:.6f}" for v in measured))
    print("recovered " + " ".join(f"{v:.6f}" for v in recovered))
    print(f"max deviation {deviation:.3e}")
    return 0 if deviation <= 1e-9 else 3


_HANDLERS = {
    "build": _cmd_build,
    "stats": _cmd_stats,
    "verify-gates": _cmd_verify_gates,
    "simulate": _cmd_simulate,
    "scaling": _cmd_scaling,
    "mitigate": _cmd_mitigate,
    "inject": _cmd_inject,
    "entropy": _cmd_entropy,
    "contour": _cmd_contour,
    "teleport": _cmd_teleport,
    "readout-correct": _cmd_readout_correct,
}


# ---------------------------------------------------------------------------
# Entry points


def run(argv: list[str] | None = None) -> int:
    args = list(sys.argv[1:] if argv is None else argv)
    try:
        if args and args[0] == "--config":
            if len(args) != 2:
                raise CliError("--config takes exactly one path and no other options")
            cfg = _load_config_file(args[1])
        else:
            try:
                cfg = _parse_args(args)
            except SystemExit as bail:
                # argparse already printed its own message (bad flag or -h)
                return int(bail.code or 0)
        return _HANDLERS[cfg.command](cfg)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (
        ModelError,
        GateLibraryError,
        ecs.EcsEngineError,
        dense.DenseEngineError,
        noise.NoiseError,
        mitigation.MitigationError,
        experiments.ExperimentError,
    ) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
