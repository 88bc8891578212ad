"""
Modelli di dominio di constrex
"""

from .domain import (
    AspectRatios,
    ConstraintSet,
    CovarianceSpec,
    CovarianceVariant,
    Dataset,
    EstimateResult,
    EstimatorKind,
    ProjectorPair,
    TrueModel,
)
from .constraints import (
    build_reference_constraints,
    realize_covariance,
    sample_second_moment,
    selection_matrix,
    validate_constraints,
)

__all__ = [
    'AspectRatios',
    'ConstraintSet',
    'CovarianceSpec',
    'CovarianceVariant',
    'Dataset',
    'EstimateResult',
    'EstimatorKind',
    'ProjectorPair',
    'TrueModel',
    'build_reference_constraints',
    'realize_covariance',
    'sample_second_moment',
    'selection_matrix',
    'validate_constraints',
]
