"""Simulation and dual-frequency spectral analysis of replicated modulated
cyclic time series: multitaper two-frequency spectra and coherence, FDR
thresholding against the stationary null, and population decomposition of
trial coherence matrices by SVD and k-means."""

from .errors import (
    DualFreqError,
    ModelError,
    ModelWarning,
    NumericalError,
    ValidationError,
)
from .estimation import (
    DualFrequencyMatrix,
    FrequencyGrid,
    coherency,
    loeve_periodogram,
    magnitude_average,
    multitaper_spectrum,
    replicate_average,
    tapered_fft,
)
from .models import (
    BaseProcessSpec,
    ComponentSpec,
    ModelSpec,
    ReplicateParams,
    ReplicateVariation,
    TrialMatrix,
    theoretical_covariance,
    theoretical_loeve_spectrum,
)
from .moments import (
    ComplexMoment,
    KSReport,
    null_coherence_distribution_check,
    periodogram_moments,
)
from .population import (
    ClusterResult,
    SparsityRecord,
    SvdResult,
    TrialStack,
    batch_magnitude_means,
    build_stack,
    kmeans_loadings,
    sparsity_metrics,
    svd_stack,
)
from .significance import (
    TestConfig,
    ThresholdResult,
    fdr_threshold,
    pvalue_null,
    subsample_hermitian,
)
from .simulate import (
    draw_replicate_params,
    simulate_base_process,
    simulate_cyclostationary,
    simulate_modulated,
)
from .tapers import TaperSet, dpss

__version__ = "0.1.0"

__all__ = [
    "BaseProcessSpec",
    "ClusterResult",
    "ComplexMoment",
    "ComponentSpec",
    "DualFreqError",
    "DualFrequencyMatrix",
    "FrequencyGrid",
    "KSReport",
    "ModelError",
    "ModelSpec",
    "ModelWarning",
    "NumericalError",
    "ReplicateParams",
    "ReplicateVariation",
    "SparsityRecord",
    "SvdResult",
    "TaperSet",
    "TestConfig",
    "ThresholdResult",
    "TrialMatrix",
    "TrialStack",
    "ValidationError",
    "batch_magnitude_means",
    "build_stack",
    "coherency",
    "dpss",
    "draw_replicate_params",
    "fdr_threshold",
    "kmeans_loadings",
    "loeve_periodogram",
    "magnitude_average",
    "multitaper_spectrum",
    "null_coherence_distribution_check",
    "periodogram_moments",
    "pvalue_null",
    "replicate_average",
    "simulate_base_process",
    "simulate_cyclostationary",
    "simulate_modulated",
    "sparsity_metrics",
    "subsample_hermitian",
    "svd_stack",
    "tapered_fft",
    "theoretical_covariance",
    "theoretical_loeve_spectrum",
]
