"""Spectral filters on symmetric operators, threshold-constrained (FDT)
filter banks, perturbation-stability verification, and a wireless
power-allocation experiment."""

__version__ = "0.1.0"

from .errors import InputValidationError, NumericalError
from .filters import (
    FdtFilterSpec,
    FilterValidationReport,
    PolyFilter,
    build_fdt_spec,
    fdt_filter_apply,
    fit_polynomial_to_fdt,
    frequency_response,
    poly_filter_apply,
    project_group_constants,
    validate_assumption,
)
from .mnn import MnnParams, activation_apply, forward, gradient, init_mnn_params
from .perturbation_lab import (
    PerturbationConfig,
    StabilityReport,
    davis_kahan_check,
    filter_stability_bound,
    lognormal_perturbation,
    nn_stability_bound,
    random_symmetric_perturbation,
    run_filter_stability_trial,
    run_nn_stability_trial,
    weyl_check,
)
from .spectral_core import (
    EigenSystem,
    SymmetricOperator,
    apply,
    build_cycle_laplacian,
    build_graph_laplacian,
    build_torus_laplacian,
    spectral_norm,
    sym_eig,
    symmetric_operator,
)
from .spectrum_partition import (
    SpectrumPartition,
    partition_spectrum,
    weyl_gap_index,
    weyl_law_fit,
)
