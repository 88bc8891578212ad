"""
Stimatori puntuali di constrex
"""

from typing import Any, Dict, Union

from constrex.models.domain import EstimatorKind

from .base_estimator import BaseEstimator
from .projection import orthogonal_projector, project_estimate, range_projector
from .least_squares import (
    ClsEstimator,
    OlsEstimator,
    ProjectedEstimator,
    cls_null_space_form,
    fit_cls,
    fit_ols,
    fit_projected,
    solve_kkt,
)
from .oracle import OracleEstimator, ProjectedOracleEstimator, fit_oracle, fit_projected_oracle
from .highdim import (
    ChebConfig,
    ChebMomEstimator,
    GlmEstimator,
    GlmLink,
    LinkVariant,
    cheb_coefficients,
    fit_cheb_mom,
    fit_glm,
    fit_glm_projected,
    glm_f,
    ustat_moment,
    ustat_moment_vector,
)


def estimator_config(app_config: Dict[str, Any]) -> Dict[str, Any]:
    """Configurazione piatta per gli stimatori a partire dalle sezioni numerics e highdim"""
    merged: Dict[str, Any] = {}
    merged.update(app_config.get('numerics', {}))
    merged.update(app_config.get('highdim', {}))
    merged.update(app_config.get('estimators', {}))
    return merged


def create_estimator(kind: Union[EstimatorKind, str], config: Dict[str, Any]) -> BaseEstimator:
    """
    Crea lo stimatore corrispondente al tipo richiesto

    Args:
        kind: Tipo di stimatore
        config: Configurazione piatta (vedi estimator_config)

    Returns:
        Istanza di BaseEstimator
    """
    kind = EstimatorKind(kind)
    if kind is EstimatorKind.OLS:
        return OlsEstimator(config)
    if kind is EstimatorKind.PROJECTED:
        return ProjectedEstimator(config)
    if kind is EstimatorKind.CLS:
        return ClsEstimator(config)
    if kind is EstimatorKind.ORACLE:
        return OracleEstimator(config)
    if kind is EstimatorKind.PROJECTED_ORACLE:
        return ProjectedOracleEstimator(config)
    if kind is EstimatorKind.CHEB_MOM:
        return ChebMomEstimator(config)
    return GlmEstimator(config, projected=kind is EstimatorKind.GLM)


__all__ = [
    'BaseEstimator',
    'ChebConfig',
    'ChebMomEstimator',
    'ClsEstimator',
    'GlmEstimator',
    'GlmLink',
    'LinkVariant',
    'OlsEstimator',
    'OracleEstimator',
    'ProjectedEstimator',
    'ProjectedOracleEstimator',
    'cheb_coefficients',
    'cls_null_space_form',
    'create_estimator',
    'estimator_config',
    'fit_cheb_mom',
    'fit_cls',
    'fit_glm',
    'fit_glm_projected',
    'fit_oracle',
    'fit_ols',
    'fit_projected',
    'fit_projected_oracle',
    'glm_f',
    'orthogonal_projector',
    'project_estimate',
    'range_projector',
    'solve_kkt',
    'ustat_moment',
    'ustat_moment_vector',
]
