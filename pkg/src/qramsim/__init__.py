"""Bucket-brigade memory simulator with noise, mitigation, and sweeps.

The submodules split along the pipeline: ``model`` builds geometries,
address states, and query circuits; ``gates`` carries decomposition
bookkeeping and routing-unitary checks; ``ecs`` and ``dense`` are the two
engines (sparse per-component tracking vs. straight state vectors);
``noise`` samples Pauli error configurations; ``mitigation`` postselects
router registers; ``experiments`` drives the scripted sweeps; ``cli`` is
the ``qramsim`` command.  The names below cover the common entry points.
"""

from .ecs import init_state, query_fidelity, run_circuit
from .experiments import (
    ExperimentResult,
    entropy_by_layer,
    injection_experiment,
    mitigation_sweep,
    scaling_experiment,
    threshold_contour,
    write_csv,
    write_json,
)
from .mitigation import MitigationConfig, mitigated_query, required_samples
from .model import (
    AddressState,
    CircuitIR,
    ClassicalData,
    QramGeometry,
    build_query_circuit,
    circuit_stats,
)
from .noise import ErrorConfiguration, NoiseModel, sample_configuration

__version__ = "0.1.0"

__all__ = [
    "AddressState",
    "CircuitIR",
    "ClassicalData",
    "ErrorConfiguration",
    "ExperimentResult",
    "MitigationConfig",
    "NoiseModel",
    "QramGeometry",
    "build_query_circuit",
    "circuit_stats",
    "entropy_by_layer",
    "init_state",
    "injection_experiment",
    "mitigated_query",
    "mitigation_sweep",
    "query_fidelity",
    "required_samples",
    "run_circuit",
    "sample_configuration",
    "scaling_experiment",
    "threshold_contour",
    "write_csv",
    "write_json",
]
