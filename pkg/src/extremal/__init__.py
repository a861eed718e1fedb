"""Minima of random fields: samplers, exact argmin densities, and checks.

The model: a strictly positive rate field lambda on a box domain, an offset
field g, and the extremal noise whose minimum over any closed set is
exponential with rate integral(lambda).  The package samples realizations
(i.i.d. construction and record construction), evaluates the analytic
densities of the first k argmin locations and of the minimum value, and
verifies the two against each other.
"""

from __future__ import annotations

from ._kernels import BACKEND as kernel_backend
from .density import (
    DensityGrid,
    MinValueDensity,
    ShiftedOffset,
    adaptive_simpson,
    closed_form_rho_delta,
    eval_Phi,
    eval_Psi,
    joint_density_grid,
    joint_density_k,
    joint_density_k_mc,
    joint_location_value_grid,
    marginal_argmin_density,
    min_value_density,
    rho_delta_integral,
)
from .errors import (
    ConfigError,
    EmptyFunctionError,
    ExtremalError,
    InternalConsistencyError,
    InvalidFieldError,
    NonterminationError,
    QuadratureError,
    RatePositivityError,
    SampleSizeError,
)
from .field import (
    BoxDomain,
    MeasureTable,
    ScalarField,
    build_measure_table,
    eval_H,
    eval_I,
)
from .kargmin import KArgminRecord, extract_k_argmins
from .sampler import (
    DEFAULT_MAX_RECORD_POINTS,
    NoiseSpec,
    RngSeed,
    SampleFunction,
    batch_construction_a_first_argmin,
    batch_construction_a_interval_mins,
    batch_fn_first_argmin,
    batch_records,
    box_rate,
    sample_W_construction_a,
    sample_W_records,
    sample_fn,
)
from .verify import (
    SUITES,
    TestReport,
    histogram_vs_density,
    independence_check,
    ks_exponential,
    ks_two_sample,
    value_vs_density,
)

__version__ = "0.1.0"

__all__ = [
    "BoxDomain",
    "ConfigError",
    "DEFAULT_MAX_RECORD_POINTS",
    "DensityGrid",
    "EmptyFunctionError",
    "ExtremalError",
    "InternalConsistencyError",
    "InvalidFieldError",
    "KArgminRecord",
    "MeasureTable",
    "MinValueDensity",
    "NoiseSpec",
    "NonterminationError",
    "QuadratureError",
    "RatePositivityError",
    "RngSeed",
    "SUITES",
    "SampleFunction",
    "SampleSizeError",
    "ScalarField",
    "ShiftedOffset",
    "TestReport",
    "adaptive_simpson",
    "batch_construction_a_first_argmin",
    "batch_construction_a_interval_mins",
    "batch_fn_first_argmin",
    "batch_records",
    "box_rate",
    "build_measure_table",
    "closed_form_rho_delta",
    "eval_H",
    "eval_I",
    "eval_Phi",
    "eval_Psi",
    "extract_k_argmins",
    "histogram_vs_density",
    "independence_check",
    "joint_density_grid",
    "joint_density_k",
    "joint_density_k_mc",
    "joint_location_value_grid",
    "kernel_backend",
    "ks_exponential",
    "ks_two_sample",
    "marginal_argmin_density",
    "min_value_density",
    "rho_delta_integral",
    "sample_W_construction_a",
    "sample_W_records",
    "sample_fn",
    "value_vs_density",
]
