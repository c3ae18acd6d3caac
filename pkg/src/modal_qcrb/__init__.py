"""Quantum Fisher information and Cramer-Rao bounds for mode-encoded parameters.

The library computes information matrices, attainability diagnostics and
detection modes for parameters that deform the spatial or spectral modes
of light while leaving the quantum state fixed in the co-moving basis.
"""

__version__ = "0.1.0"

from .engine import (
    AttainabilityResult,
    GeneratorCoefficients,
    QfimReport,
    ReadoutMeans,
    SingleModeAttainability,
    attainability,
    attainability_single_mode,
    build_generators,
    commutator_from_overlaps,
    crb_bounds,
    detection_modes_for,
    generators_from_modes,
    gram_schmidt_readout,
    mean_field_fluctuation_check,
    number_information,
    qfim_mean_field,
    qfim_mode_split,
    qfim_single_mode,
    qfim_unitary,
    readout_means,
)
from .errors import (
    ConfigError,
    CutoffError,
    EvaluationError,
    GridMismatchError,
    GridResolutionError,
    ModalQcrbError,
    PreconditionError,
    RankDeficiencyError,
    StructuralError,
)
from .families import (
    FAMILY_REGISTRY,
    BeamGeometry,
    ParameterFamily,
    PulseSpectrum,
    build_family,
    displaced_beam_family,
    gaussian_beam_family,
    gaussian_pulse_family,
    spectral_grid,
    transverse_grid,
)
from .modes import (
    DetectionMode,
    GramSchmidtResult,
    Mode,
    ModeBasis,
    SampleGrid,
    derivative_mode,
    detection_mode,
    gram_schmidt,
    inner_product,
    mode_norm,
    normalized,
    vacuum_overlap,
)
from .states import (
    DensityState,
    FockSpace,
    GaussianState,
    first_moments,
    make_state,
    number_moments,
    operator_matrix_elements,
    quadrature_covariance,
    state_from_spec,
)

__all__ = [
    "__version__",
    # modes
    "SampleGrid",
    "Mode",
    "ModeBasis",
    "DetectionMode",
    "GramSchmidtResult",
    "inner_product",
    "mode_norm",
    "normalized",
    "gram_schmidt",
    "derivative_mode",
    "detection_mode",
    "vacuum_overlap",
    # states
    "FockSpace",
    "DensityState",
    "GaussianState",
    "make_state",
    "state_from_spec",
    "first_moments",
    "operator_matrix_elements",
    "number_moments",
    "quadrature_covariance",
    # engine
    "GeneratorCoefficients",
    "QfimReport",
    "AttainabilityResult",
    "SingleModeAttainability",
    "ReadoutMeans",
    "build_generators",
    "generators_from_modes",
    "qfim_unitary",
    "qfim_mode_split",
    "qfim_single_mode",
    "qfim_mean_field",
    "mean_field_fluctuation_check",
    "number_information",
    "attainability",
    "attainability_single_mode",
    "commutator_from_overlaps",
    "crb_bounds",
    "gram_schmidt_readout",
    "readout_means",
    "detection_modes_for",
    # families
    "ParameterFamily",
    "BeamGeometry",
    "PulseSpectrum",
    "gaussian_beam_family",
    "gaussian_pulse_family",
    "displaced_beam_family",
    "transverse_grid",
    "spectral_grid",
    "build_family",
    "FAMILY_REGISTRY",
    # errors
    "ModalQcrbError",
    "GridMismatchError",
    "StructuralError",
    "RankDeficiencyError",
    "EvaluationError",
    "CutoffError",
    "GridResolutionError",
    "PreconditionError",
    "ConfigError",
]
