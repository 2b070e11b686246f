"""Simulation and SVD-based separation of dynamic OCT signals."""

from dynoct.errors import (
    DegenerateFitError,
    DegenerateInputError,
    ManifestError,
    OutOfSupportError,
)
from dynoct.medium import (
    CollagenField,
    MediumState,
    MetabolicMap,
    PixelGrid,
    collagen_density,
    default_phantom,
    generate_collagen_field,
    metabolic_density,
)
from dynoct.forward import (
    OpticsConfig,
    SignalRecord,
    calibrate_dominance,
    simulate_signals,
    single_particle_signal,
)
from dynoct.sep import (
    CasoratiMatrix,
    IntensityMap,
    SingularIndexSet,
    SvdResult,
    build_casorati,
    compute_svd,
    filter_matrix,
    reconstruct_intensity,
    select_cutoff,
    select_index_set,
    tv_seminorm,
)
from dynoct.spectral import (
    CorrelationKernel,
    PerturbationReport,
    correlation_kernel,
    cross_bound_check,
    nonorthogonality_check,
    perturbation_report,
    trace_dominance,
)

__version__ = "0.1.0"
