"""halfwave: staggered-grid wave simulation with configurable precision."""

from halfwave.acoustic import AcousticSolver
from halfwave.config import DT16, PRESETS, ConfigError, SimConfig, parse_config
from halfwave.diagnostics import (
    RangeFailureError,
    RunOutput,
    compare_traces,
    energy_drift,
)
from halfwave.efsum import Variant, compensated_sum, sum_3op, sum_6op
from halfwave.elastic import ElasticSolver
from halfwave.grids import (
    CFL_LIMIT,
    Boundary,
    GridSpec,
    Medium,
    build_homogeneous_acoustic,
    build_layered_elastic,
    load_medium,
    save_medium,
)
from halfwave.precision import (
    FORMATS,
    FloatFormat,
    Precision,
    PScalar,
    p_add,
    p_div,
    p_mul,
    p_sub,
    round_to,
)
from halfwave.sources import RickerSpec, SourceKind, SourceSpec

__all__ = [
    "AcousticSolver",
    "Boundary",
    "CFL_LIMIT",
    "ConfigError",
    "DT16",
    "ElasticSolver",
    "FORMATS",
    "FloatFormat",
    "GridSpec",
    "Medium",
    "PRESETS",
    "PScalar",
    "Precision",
    "RangeFailureError",
    "RickerSpec",
    "RunOutput",
    "SimConfig",
    "SourceKind",
    "SourceSpec",
    "Variant",
    "build_homogeneous_acoustic",
    "build_layered_elastic",
    "compare_traces",
    "compensated_sum",
    "energy_drift",
    "load_medium",
    "p_add",
    "p_div",
    "p_mul",
    "p_sub",
    "parse_config",
    "round_to",
    "save_medium",
    "sum_3op",
    "sum_6op",
]

__version__ = "0.1.0"
