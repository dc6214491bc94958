"""Scripted sweeps over the simulator with fits, CIs, and CSV/JSON output.

Every runner returns an ExperimentResult: one row per parameter point with a
fidelity estimate, confidence half-widths, the sample count, and the master
seed, plus least-squares fits over declared row subsets.  Identical inputs
reproduce byte-identical output files; sampling is keyed by (seed, sample
index) so no scheduling choice can perturb a draw.  Fits are ordinary least
squares unless the per-row CI half-widths spread by more than a factor of
three, in which case inverse-variance weights are used and recorded.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import dense, ecs, mitigation, noise
from .model import (
    AddressState,
    CircuitIR,
    ClassicalData,
    QramGeometry,
    build_query_circuit,
)


class ExperimentError(ValueError):
    """Raised for invalid sweep parameters or unsatisfiable fit domains."""


@dataclass(frozen=True)
class ResultRow:
    """One parameter point of a sweep."""

    params: tuple[tuple[str, float], ...]
    fidelity: float
    fidelity_ci: float
    valid_fraction: float
    valid_fraction_ci: float
    n_samples: int
    seed: int
    flagged: bool = False

    @property
    def infidelity(self) -> float:
        return 1.0 - self.fidelity

    def param(self, name: str) -> float:
        for key, value in self.params:
            if key == name:
                return value
        raise KeyError(name)


@dataclass(frozen=True)
class FitReport:
    slope: float
    intercept: float
    stderr: float
    rows: tuple[int, ...]
    weighted: bool = False
    domain: str = ""


@dataclass(frozen=True)
class ThresholdPoint:
    """Gate error rate at which one tree depth crosses a target fidelity."""

    layers: int
    f_target: float
    epsilon_star: float
    degenerate: bool = False


@dataclass(frozen=True)
class ExperimentResult:
    experiment: str
    rows: tuple[ResultRow, ...]
    fits: tuple[FitReport, ...] = ()
    thresholds: tuple[ThresholdPoint, ...] = ()

    @property
    def any_flagged(self) -> bool:
        return any(row.flagged for row in self.rows)


# ---------------------------------------------------------------------------
# shared sampling core


def _run_configs(geometry, circuit, address, data, model, configs, n, seed):
    """Per-sample (weight, fidelity) arrays for several scopes at once.

    Each trajectory is simulated once and postselected under every config,
    so rows that differ only in scope share their error draws exactly.
    Repeated error configurations are served from a cache; the clean
    trajectory dominates at small rates, so most samples cost one lookup.
    """
    table = noise.build_slot_table(circuit, model)
    weights = np.ones((len(configs), n))
    fids = np.ones((len(configs), n))
    cache: dict = {}
    for s in range(n):
        cfg = noise.sample_configuration(circuit, model, seed, s, table=table)
        hit = cache.get(cfg)
        if hit is None:
            state = ecs.run_circuit(
                ecs.init_state(geometry, address), circuit, errors=cfg
            )
            w_cols = np.empty(len(configs))
            f_cols = np.empty(len(configs))
            for j, config in enumerate(configs):
                projected, w = mitigation.postselect(state, config, geometry)
                f = (
                    ecs.query_fidelity(projected, geometry, address, data)
                    if w > 0
                    else 0.0
                )
                w_cols[j] = w
                f_cols[j] = f
            hit = (w_cols, f_cols)
            if len(cache) < 100_000:
                cache[cfg] = hit
        weights[:, s], fids[:, s] = hit
    return weights, fids


def _row_from_estimate(params, est, seed) -> ResultRow:
    return ResultRow(
        params=tuple(params),
        fidelity=est.fidelity,
        fidelity_ci=est.fidelity_ci,
        valid_fraction=est.valid_fraction,
        valid_fraction_ci=est.valid_fraction_ci,
        n_samples=est.n_samples,
        seed=seed,
        flagged=est.fidelity_ci > (1.0 - est.fidelity),
    )


def _fit(x, y, ci=None, rows=(), domain="") -> FitReport:
    """Least squares with slope standard error; weighted when CIs spread 3x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        raise ExperimentError(f"fit needs at least two points, got {len(x)}")
    w = np.ones_like(x)
    weighted = False
    if ci is not None:
        ci = np.asarray(ci, dtype=float)
        positive = ci[ci > 0]
        if len(positive) == len(ci) and positive.max() / positive.min() > 3.0:
            weighted = True
            w = 1.0 / ci**2
    total = w.sum()
    x_bar = float(w @ x) / total
    y_bar = float(w @ y) / total
    sxx = float(w @ (x - x_bar) ** 2)
    if sxx == 0.0:
        raise ExperimentError("fit abscissa is a single value")
    slope = float(w @ ((x - x_bar) * (y - y_bar))) / sxx
    intercept = y_bar - slope * x_bar
    residuals = y - intercept - slope * x
    dof = len(x) - 2
    if dof > 0:
        stderr = math.sqrt(max(float(w @ residuals**2) / dof, 0.0) / sxx)
    else:
        stderr = 0.0
    return FitReport(
        slope=slope,
        intercept=intercept,
        stderr=stderr,
        rows=tuple(rows),
        weighted=weighted,
        domain=domain,
    )


def _as_layer_tuple(layer_range, lo, hi) -> tuple[int, ...]:
    layers = tuple(int(L) for L in layer_range)
    if not layers:
        raise ExperimentError("layer range is empty")
    if any(not lo <= L <= hi for L in layers):
        raise ExperimentError(f"layers {layers} outside {lo}..{hi}")
    if len(set(layers)) != len(layers):
        raise ExperimentError(f"layers {layers} repeat a value")
    return layers


def _all_ones(layers: int) -> ClassicalData:
    return ClassicalData.from_spec("1" * (1 << layers), 1 << layers)


# ---------------------------------------------------------------------------
# runners


def scaling_experiment(layer_range, e_t, samples, seed) -> ExperimentResult:
    """Query infidelity against tree depth for the uniform address.

    Fits log(1 - F) against log(L) over the rows with nonzero infidelity;
    zero-noise runs carry no fit.  A row whose CI half-width exceeds its
    own infidelity is flagged as statistically unresolved.
    """
    layers = _as_layer_tuple(layer_range, 2, 9)
    if samples < 1000:
        raise ExperimentError(f"need at least 1000 samples per point, got {samples}")
    model = noise.NoiseModel(e_t=e_t)
    config = mitigation.MitigationConfig(k_layers=0)
    rows = []
    for L in layers:
        geometry = QramGeometry(L)
        address = AddressState.uniform(L)
        data = _all_ones(L)
        circuit = build_query_circuit(geometry, data)
        weights, fids = _run_configs(
            geometry, circuit, address, data, model, [config], samples, seed
        )
        est = mitigation.estimate_from_samples(weights[0], fids[0])
        rows.append(_row_from_estimate([("layers", L), ("e_t", e_t)], est, seed))
    fits = []
    usable = [i for i, row in enumerate(rows) if row.infidelity > 0.0]
    if len(usable) >= 2:
        fits.append(
            _fit(
                [math.log(rows[i].param("layers")) for i in usable],
                [math.log(rows[i].infidelity) for i in usable],
                ci=[rows[i].fidelity_ci / rows[i].infidelity for i in usable],
                rows=usable,
                domain="log-infidelity vs log-layers",
            )
        )
    return ExperimentResult("scaling", tuple(rows), tuple(fits))


def mitigation_sweep(layers, e_t, k_range, samples, seed) -> ExperimentResult:
    """Postselected infidelity and valid fraction across scope depths.

    All scope depths share one set of sampled trajectories, so the k = 0
    row reproduces the unmitigated estimate on the same draws exactly.
    The fit covers log(1 - F') against log(k) for k >= 2.
    """
    ks = tuple(int(k) for k in k_range)
    if not ks:
        raise ExperimentError("scope range is empty")
    if any(not 0 <= k <= layers for k in ks):
        raise ExperimentError(f"scope depths {ks} outside 0..{layers}")
    if samples < 100:
        raise ExperimentError(f"need at least 100 samples, got {samples}")
    geometry = QramGeometry(layers)
    address = AddressState.uniform(layers)
    data = _all_ones(layers)
    circuit = build_query_circuit(geometry, data)
    model = noise.NoiseModel(e_t=e_t)
    configs = [mitigation.MitigationConfig(k_layers=k) for k in ks]
    weights, fids = _run_configs(
        geometry, circuit, address, data, model, configs, samples, seed
    )
    rows = []
    for j, k in enumerate(ks):
        est = mitigation.estimate_from_samples(weights[j], fids[j])
        rows.append(
            _row_from_estimate(
                [("layers", layers), ("e_t", e_t), ("k_layers", k)], est, seed
            )
        )
    fits = []
    usable = [
        i for i, row in enumerate(rows)
        if row.param("k_layers") >= 2 and row.infidelity > 0.0
    ]
    if len(usable) >= 2:
        fits.append(
            _fit(
                [math.log(rows[i].param("k_layers")) for i in usable],
                [math.log(rows[i].infidelity) for i in usable],
                ci=[rows[i].fidelity_ci / rows[i].infidelity for i in usable],
                rows=usable,
                domain="log-infidelity vs log-scope, k >= 2",
            )
        )
    return ExperimentResult("mitigation", tuple(rows), tuple(fits))


INJECTION_LAYERS = 3
INJECTION_DATA = "01010101"


def _injection_setting():
    geometry = QramGeometry(INJECTION_LAYERS)
    address = AddressState.bell("000", "001")
    data = ClassicalData.from_spec(INJECTION_DATA, 1 << INJECTION_LAYERS)
    return geometry, address, build_query_circuit(geometry, data), data


def injection_experiment(nodes, p_grid, samples, seed, e_t=0.0) -> ExperimentResult:
    """Fidelity against a depolarizing kick on one router's control qubit.

    The kick fires right after data loading at strength p, equivalent to a
    depolarizing rate of 4p/3; the address superposes leaves 0 and 1 so the
    leftmost bottom router is on the queried path and the rightmost is
    maximally distant.  One linear fit of fidelity against the rate is
    reported per target node.
    """
    if isinstance(nodes, int):
        nodes = (nodes,)
    nodes = tuple(int(node) for node in nodes)
    geometry, address, circuit, data = _injection_setting()
    for node in nodes:
        if node.bit_length() != INJECTION_LAYERS:
            raise ExperimentError(
                f"node {node} is not in layer {INJECTION_LAYERS}"
            )
    ps = tuple(float(p) for p in p_grid)
    if len(ps) < 2:
        raise ExperimentError("need at least two kick strengths")
    if samples < 100:
        raise ExperimentError(f"need at least 100 samples, got {samples}")
    config = mitigation.MitigationConfig(k_layers=0)
    rows = []
    for node in nodes:
        for p in ps:
            e_d = noise.injection_rate(p)
            model = noise.NoiseModel(
                e_t=e_t,
                injections=(
                    noise.InjectionSpec(
                        qubit=geometry.control_qubit(node),
                        phase="DataLoading",
                        p=p,
                    ),
                ),
            )
            weights, fids = _run_configs(
                geometry, circuit, address, data, model, [config], samples, seed
            )
            est = mitigation.estimate_from_samples(weights[0], fids[0])
            rows.append(
                _row_from_estimate(
                    [("node", node), ("p", p), ("e_d", e_d)], est, seed
                )
            )
    fits = []
    per_node = len(ps)
    for j, node in enumerate(nodes):
        indices = list(range(j * per_node, (j + 1) * per_node))
        fits.append(
            _fit(
                [rows[i].param("e_d") for i in indices],
                [rows[i].fidelity for i in indices],
                rows=indices,
                domain=f"fidelity vs rate, node {node}",
            )
        )
    return ExperimentResult("injection", tuple(rows), tuple(fits))


def injection_exact_line(node) -> tuple[float, float]:
    """Exact (intercept, slope) of fidelity against the kick rate.

    Evaluates the four deterministic branches (no kick, X, Y, Z) once each;
    the mixture is affine in the rate, F(e) = (1 - 3e/4) F_clean +
    (e/4)(F_X + F_Y + F_Z).
    """
    geometry, address, circuit, data = _injection_setting()
    node = int(node)
    if node.bit_length() != INJECTION_LAYERS:
        raise ExperimentError(f"node {node} is not in layer {INJECTION_LAYERS}")
    qubit = geometry.control_qubit(node)
    branch = {}
    for pauli in (None, "X", "Y", "Z"):
        errors = None
        if pauli is not None:
            errors = noise.ErrorConfiguration(
                injections=(
                    noise.InjectedPauli(phase="DataLoading", qubit=qubit, pauli=pauli),
                )
            )
        state = ecs.run_circuit(
            ecs.init_state(geometry, address), circuit, errors=errors
        )
        branch[pauli] = ecs.query_fidelity(state, geometry, address, data)
    pauli_mean = (branch["X"] + branch["Y"] + branch["Z"]) / 3.0
    intercept = branch[None]
    slope = 0.75 * (pauli_mean - branch[None])
    return intercept, slope


def entropy_by_layer(layers=3, address=None) -> ExperimentResult:
    """Entanglement entropy of each router control after address loading.

    Runs the dense engine on the loading prefix only and reports one row
    per router, the entropy in the fidelity column; entropies within a
    layer agree by symmetry when the address is the uniform superposition.
    """
    geometry = QramGeometry(layers)
    if address is None:
        address = AddressState.uniform(layers)
    data = ClassicalData.from_spec("all-zeros", geometry.memory_size)
    circuit = build_query_circuit(geometry, data)
    prefix = CircuitIR(circuit.phase_slice("AddressLoading"))
    state = dense.dense_run(geometry, prefix, address)
    rows = []
    for layer in range(1, layers + 1):
        for node in geometry.nodes_at_layer(layer):
            rho = dense.reduced_density(state, [geometry.control_qubit(node)])
            entropy = dense.entanglement_entropy(rho)
            rows.append(
                ResultRow(
                    params=(("layer", layer), ("node", node)),
                    fidelity=entropy,
                    fidelity_ci=0.0,
                    valid_fraction=1.0,
                    valid_fraction_ci=0.0,
                    n_samples=0,
                    seed=0,
                )
            )
    return ExperimentResult("entropy", tuple(rows))


FIT_FIDELITY_FLOOR = 0.8


def threshold_contour(layer_range, e_t_grid, f_targets, samples, seed) -> ExperimentResult:
    """Gate error rate needed to hit target fidelities, by tree depth.

    Per depth, fidelity is fitted linearly against the rate over the rows
    with fidelity at or above 0.8 and inverted at each target; the final
    fit reports the power-law exponent of the threshold against depth.
    The grid may be a single list or a mapping from depth to its own list,
    as deeper trees need proportionally smaller rates to stay in the
    linear window.  Targets must be bracketed by the measured fidelities;
    a target of exactly 1 is reported as the degenerate zero threshold.
    """
    layers = _as_layer_tuple(layer_range, 2, 9)
    targets = tuple(float(t) for t in f_targets)
    if not targets:
        raise ExperimentError("no target fidelities given")
    if any(not 0.0 < t <= 1.0 for t in targets):
        raise ExperimentError(f"targets {targets} outside (0, 1]")
    if samples < 100:
        raise ExperimentError(f"need at least 100 samples, got {samples}")
    if isinstance(e_t_grid, dict):
        grids = {L: tuple(float(e) for e in e_t_grid[L]) for L in layers}
    else:
        shared = tuple(float(e) for e in e_t_grid)
        grids = {L: shared for L in layers}
    config = mitigation.MitigationConfig(k_layers=0)
    rows = []
    fits = []
    thresholds = []
    row_index = {}
    for L in layers:
        geometry = QramGeometry(L)
        address = AddressState.uniform(L)
        data = _all_ones(L)
        circuit = build_query_circuit(geometry, data)
        for e_t in grids[L]:
            model = noise.NoiseModel(e_t=e_t)
            weights, fids = _run_configs(
                geometry, circuit, address, data, model, [config], samples, seed
            )
            est = mitigation.estimate_from_samples(weights[0], fids[0])
            row_index[(L, e_t)] = len(rows)
            rows.append(
                _row_from_estimate([("layers", L), ("e_t", e_t)], est, seed)
            )
    for L in layers:
        indices = [row_index[(L, e_t)] for e_t in grids[L]]
        in_window = [i for i in indices if rows[i].fidelity >= FIT_FIDELITY_FLOOR]
        if len(in_window) < 2:
            raise ExperimentError(
                f"fewer than two rows at layers={L} reach fidelity "
                f"{FIT_FIDELITY_FLOOR}; shrink the rate grid"
            )
        line = _fit(
            [rows[i].param("e_t") for i in in_window],
            [rows[i].fidelity for i in in_window],
            rows=in_window,
            domain=f"fidelity vs rate, layers {L}, F >= {FIT_FIDELITY_FLOOR}",
        )
        fits.append(line)
        measured = [rows[i].fidelity for i in indices]
        for target in targets:
            if target == 1.0:
                thresholds.append(ThresholdPoint(L, target, 0.0, degenerate=True))
                continue
            if not min(measured) <= target <= max(measured):
                raise ExperimentError(
                    f"target fidelity {target} not bracketed at layers={L}; "
                    f"measured range [{min(measured):.4f}, {max(measured):.4f}]"
                )
            epsilon = (target - line.intercept) / line.slope
            if not epsilon > 0.0:
                raise ExperimentError(
                    f"inverted threshold at layers={L}, target {target} "
                    f"is not positive"
                )
            thresholds.append(ThresholdPoint(L, target, epsilon))
    for target in targets:
        points = [t for t in thresholds if t.f_target == target and not t.degenerate]
        if len(points) >= 2:
            fits.append(
                _fit(
                    [math.log(t.layers) for t in points],
                    [math.log(t.epsilon_star) for t in points],
                    rows=(),
                    domain=f"log-threshold vs log-layers, target {target:g}",
                )
            )
    return ExperimentResult("contour", tuple(rows), tuple(fits), tuple(thresholds))


# ---------------------------------------------------------------------------
# serialization

FIXED_COLUMNS = (
    "fidelity",
    "fidelity_ci",
    "infidelity",
    "valid_fraction",
    "valid_fraction_ci",
    "n_samples",
    "seed",
)


def _format_value(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def _param_names(result: ExperimentResult) -> tuple[str, ...]:
    names = tuple(name for name, _ in result.rows[0].params)
    for row in result.rows:
        if tuple(name for name, _ in row.params) != names:
            raise ExperimentError("rows disagree on parameter columns")
    return names


def write_csv(result: ExperimentResult, path) -> None:
    if not result.rows:
        raise ExperimentError("refusing to write a result with no rows")
    names = _param_names(result)
    lines = [",".join([f"param.{n}" for n in names] + list(FIXED_COLUMNS))]
    for row in result.rows:
        values = [_format_value(value) for _, value in row.params]
        values += [
            _format_value(row.fidelity),
            _format_value(row.fidelity_ci),
            _format_value(row.infidelity),
            _format_value(row.valid_fraction),
            _format_value(row.valid_fraction_ci),
            str(row.n_samples),
            str(row.seed),
        ]
        lines.append(",".join(values))
    for fit in result.fits:
        rows_list = ",".join(str(i) for i in fit.rows)
        lines.append(
            f"# fit slope={_format_value(fit.slope)} "
            f"stderr={_format_value(fit.stderr)} rows=[{rows_list}]"
        )
    with open(path, "w", newline="") as handle:
        handle.write("\n".join(lines) + "\n")


def write_json(result: ExperimentResult, path) -> None:
    if not result.rows:
        raise ExperimentError("refusing to write a result with no rows")
    names = _param_names(result)
    rows = []
    for row in result.rows:
        entry = {f"param.{name}": value for name, value in row.params}
        entry.update(
            fidelity=row.fidelity,
            fidelity_ci=row.fidelity_ci,
            infidelity=row.infidelity,
            valid_fraction=row.valid_fraction,
            valid_fraction_ci=row.valid_fraction_ci,
            n_samples=row.n_samples,
            seed=row.seed,
        )
        rows.append(entry)
    payload = {
        "experiment": result.experiment,
        "columns": [f"param.{n}" for n in names] + list(FIXED_COLUMNS),
        "rows": rows,
        "fits": [
            {
                "slope": fit.slope,
                "intercept": fit.intercept,
                "stderr": fit.stderr,
                "rows": list(fit.rows),
                "weighted": fit.weighted,
                "domain": fit.domain,
            }
            for fit in result.fits
        ],
    }
    if result.thresholds:
        payload["thresholds"] = [
            {
                "layers": point.layers,
                "f_target": point.f_target,
                "epsilon_star": point.epsilon_star,
                "degenerate": point.degenerate,
            }
            for point in result.thresholds
        ]
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")
