"""
Servizi di constrex: inferenza, teoria e I/O
"""

from .file_service import FileService
from .inference_service import (
    INFERENCE_COLUMNS,
    ContrastInference,
    CoordinateInference,
    InferenceReport,
    InferenceService,
    VarianceKind,
    VarianceModel,
    cls_asymptotic_variance,
    cls_contrast_variance,
    contrast_inference,
    coordinate_inference,
    estimate_noise_variance,
    holm_bonferroni,
    inference_frame,
    jackknife_contrast_variance,
    jackknife_replicates,
    jackknife_variance,
    ols_asymptotic_variance,
    projected_oracle_variance,
)
from .theory_service import (
    GainReport,
    RiskReport,
    TheoryParams,
    TheoryService,
    asymptotic_risk,
    conditional_expected_gain,
    conditional_minimax_risk,
    deterministic_gain_weights,
    expected_gain,
    gain_eigen_weights,
    gain_from_dataset,
    null_space_trace_risk,
    parse_theory_params,
)

__all__ = [
    'INFERENCE_COLUMNS',
    'ContrastInference',
    'CoordinateInference',
    'FileService',
    'GainReport',
    'InferenceReport',
    'InferenceService',
    'RiskReport',
    'TheoryParams',
    'TheoryService',
    'VarianceKind',
    'VarianceModel',
    'asymptotic_risk',
    'cls_asymptotic_variance',
    'cls_contrast_variance',
    'conditional_expected_gain',
    'conditional_minimax_risk',
    'contrast_inference',
    'coordinate_inference',
    'deterministic_gain_weights',
    'estimate_noise_variance',
    'expected_gain',
    'gain_eigen_weights',
    'gain_from_dataset',
    'holm_bonferroni',
    'inference_frame',
    'jackknife_contrast_variance',
    'jackknife_replicates',
    'jackknife_variance',
    'null_space_trace_risk',
    'ols_asymptotic_variance',
    'parse_theory_params',
    'projected_oracle_variance',
]
