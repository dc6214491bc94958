"""Router post-selection: project early-layer routers onto |0> and reweigh.

The first k router layers are measured conceptually at the end of a query;
samples where any in-scope qubit is excited are discarded.  On component
states the projector acts per qubit: One drops the component, Plus/Minus
collapse to Zero at amplitude factor 1/sqrt(2) (the <0|+> = <0|-> overlap),
Zero passes.  By default each sample keeps its exact acceptance probability
as a weight; strict_sampling replaces the weight with a Bernoulli draw so
the statistics match a real measure-and-discard experiment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ecs, noise
from .model import QramGeometry

SELECTION_MODES = ("QueriedBranchesOnly", "UnqueriedBranchesOnly", "All")

_SQRT_HALF = 1.0 / np.sqrt(2.0)


class MitigationError(ValueError):
    """Raised for invalid configuration or fully rejected sample sets."""


@dataclass(frozen=True)
class MitigationConfig:
    """Scope of the router projection.

    k_layers counts tree layers from the root; the scope is the control and
    incident qubit of every node in layers 1..k_layers, optionally filtered
    to the branches a given address does or does not traverse.
    """

    k_layers: int
    mode: str = "All"
    queried_leaves: frozenset[int] | None = None
    strict_sampling: bool = False

    def __post_init__(self) -> None:
        if self.k_layers < 0:
            raise MitigationError(f"k_layers {self.k_layers} is negative")
        if self.mode not in SELECTION_MODES:
            raise MitigationError(f"unknown selection mode {self.mode!r}")
        if self.mode != "All" and self.queried_leaves is None:
            raise MitigationError(f"mode {self.mode!r} needs queried_leaves")
        if self.queried_leaves is not None:
            object.__setattr__(self, "queried_leaves", frozenset(self.queried_leaves))

    @classmethod
    def for_address(cls, k_layers: int, mode: str, address, **kwargs) -> "MitigationConfig":
        """Derive the queried-branch set from the address support."""
        leaves = set()
        for amp, bits in address.components:
            if abs(amp) > 1e-12:
                leaf = 0
                for b in bits:
                    leaf = 2 * leaf + b
                leaves.add(leaf)
        return cls(k_layers=k_layers, mode=mode, queried_leaves=frozenset(leaves), **kwargs)

    def scope_nodes(self, geometry: QramGeometry) -> tuple[int, ...]:
        if self.k_layers > geometry.layers:
            raise MitigationError(
                f"k_layers {self.k_layers} exceeds tree depth {geometry.layers}"
            )
        queried: set[int] = set()
        if self.mode != "All":
            for leaf in self.queried_leaves:
                queried.update(geometry.path_nodes(leaf, include_leaf=False))
        nodes = []
        for layer in range(1, self.k_layers + 1):
            for node in geometry.nodes_at_layer(layer):
                if self.mode == "QueriedBranchesOnly" and node not in queried:
                    continue
                if self.mode == "UnqueriedBranchesOnly" and node in queried:
                    continue
                nodes.append(node)
        return tuple(nodes)

    def scope_qubits(self, geometry: QramGeometry) -> tuple[int, ...]:
        qubits = []
        for node in self.scope_nodes(geometry):
            qubits.append(geometry.control_qubit(node))
            qubits.append(geometry.incident_qubit(node))
        return tuple(sorted(qubits))


def postselect(state: ecs.EcsState, config: MitigationConfig, geometry: QramGeometry):
    """Project every in-scope qubit onto |0>.

    Returns (projected state, keep_probability).  The projected state is
    renormalized; zero keep probability returns an empty (zero-component)
    state as the rejected marker.
    """
    qubits = config.scope_qubits(geometry)
    out = state.copy()
    if not qubits or out.n_components == 0:
        return out, (1.0 if out.n_components else 0.0)
    sel = out.tags[:, qubits]
    keep_rows = ~(sel == ecs.ONE).any(axis=1)
    amps = out.amps[keep_rows]
    tags = out.tags[keep_rows]
    sel = sel[keep_rows]
    half_counts = ((sel == ecs.PLUS) | (sel == ecs.MINUS)).sum(axis=1)
    amps = amps * _SQRT_HALF**half_counts
    tags[:, qubits] = ecs.ZERO
    projected = ecs.EcsState(out.qubit_count, amps, tags, out.cap)
    keep = projected.norm_squared()
    if keep <= 0.0:
        empty = ecs.EcsState(
            out.qubit_count,
            np.zeros(0, dtype=np.complex128),
            np.zeros((0, out.qubit_count), dtype=np.uint8),
            out.cap,
        )
        return empty, 0.0
    projected.amps = projected.amps / np.sqrt(keep)
    return projected, float(keep)


@dataclass(frozen=True)
class MitigatedEstimate:
    fidelity: float
    fidelity_ci: float
    valid_fraction: float
    valid_fraction_ci: float
    n_samples: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.valid_fraction <= 1.0:
            raise MitigationError(f"valid_fraction {self.valid_fraction} outside [0, 1]")
        if self.fidelity_ci < 0 or self.valid_fraction_ci < 0:
            raise MitigationError("confidence half-widths must be nonnegative")


def _accept_rng(master_seed: int, sample_index: int) -> np.random.Generator:
    # separate stream from the error sampler so draws never alias
    return noise.sample_rng(master_seed ^ 0x9E3779B97F4A7C15, sample_index)


def mitigated_query(
    circuit,
    address,
    data,
    model: noise.NoiseModel,
    config: MitigationConfig,
    n_samples: int,
    seed: int,
) -> MitigatedEstimate:
    """Monte Carlo estimate of the post-selected query fidelity.

    Each sample draws an error configuration, runs the circuit, projects the
    in-scope routers, and records (weight, fidelity).  The fidelity estimate
    is the weighted mean sum(w F)/sum(w) with a delta-method confidence
    interval; valid_fraction is mean(w) with a normal interval.
    """
    if n_samples < 100:
        raise MitigationError(f"need at least 100 samples, got {n_samples}")
    geometry = QramGeometry(address.layers)
    table = noise.build_slot_table(circuit, model)
    weights = np.empty(n_samples)
    fids = np.empty(n_samples)
    clean: tuple[float, float] | None = None
    for s in range(n_samples):
        cfg = noise.sample_configuration(circuit, model, seed, s, table=table)
        if cfg.is_empty and clean is not None:
            w, f = clean
        else:
            state = ecs.run_circuit(ecs.init_state(geometry, address), circuit, errors=cfg)
            projected, w = postselect(state, config, geometry)
            f = ecs.query_fidelity(projected, geometry, address, data) if w > 0 else 0.0
            if cfg.is_empty:
                clean = (w, f)
        if config.strict_sampling:
            accepted = _accept_rng(seed, s).random() < w
            w = 1.0 if accepted else 0.0
            if not accepted:
                f = 0.0
        weights[s] = w
        fids[s] = f
    return estimate_from_samples(weights, fids)


def estimate_from_samples(weights, fids) -> MitigatedEstimate:
    """Fold per-sample (weight, fidelity) pairs into a MitigatedEstimate."""
    weights = np.asarray(weights, dtype=float)
    fids = np.asarray(fids, dtype=float)
    n = len(weights)
    if n == 0 or len(fids) != n:
        raise MitigationError("weights and fidelities must be equal-length, nonempty")
    total_weight = weights.sum()
    if total_weight <= 0.0:
        raise MitigationError("every sample was rejected by post-selection")
    estimate = float(weights @ fids / total_weight)
    vf = float(weights.mean())
    x = weights * fids
    y = weights
    if n > 1:
        cov = np.cov(np.vstack([x, y]), ddof=1)
        var_ratio = (
            cov[0, 0] - 2 * estimate * cov[0, 1] + estimate**2 * cov[1, 1]
        ) / (n * vf**2)
        fid_ci = 1.96 * math.sqrt(max(var_ratio, 0.0))
        vf_ci = 1.96 * float(np.std(y, ddof=1)) / math.sqrt(n)
    else:
        fid_ci = vf_ci = 0.0
    return MitigatedEstimate(
        fidelity=estimate,
        fidelity_ci=fid_ci,
        valid_fraction=vf,
        valid_fraction_ci=vf_ci,
        n_samples=n,
    )


def required_samples(delta: float, p_hat: float) -> int:
    """Sample count for a 95% interval of half-width delta on proportion p."""
    if delta <= 0:
        raise MitigationError(f"interval half-width must be positive, got {delta}")
    if not 0.0 <= p_hat <= 1.0:
        raise MitigationError(f"proportion estimate {p_hat} outside [0, 1]")
    value = 1.96**2 * p_hat * (1.0 - p_hat) / delta**2
    # float dust must not bump an exact integer to its successor
    return math.ceil(value - 1e-9)
