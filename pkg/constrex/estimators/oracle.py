"""
Stimatori oracolo con Σ di popolazione nota
"""

import logging
from typing import Any, Dict, List, Optional

import numpy as np

from constrex.exceptions import DimensionMismatch, InputError
from constrex.estimators.base_estimator import BaseEstimator
from constrex.estimators.projection import project_estimate
from constrex.linalg import cho_solve, cholesky, condition_number
from constrex.models.domain import ConstraintSet, Dataset, EstimateResult, EstimatorKind

logger = logging.getLogger(__name__)


def check_sigma_matrix(sigma_matrix: Any, p: int) -> np.ndarray:
    """Converte Σ in array e ne verifica la forma p × p"""
    if sigma_matrix is None:
        raise InputError("Lo stimatore oracolo richiede la matrice Σ")
    sigma = np.asarray(sigma_matrix, dtype=float)
    if sigma.shape != (p, p):
        raise DimensionMismatch(f"Σ di forma {sigma.shape}, attesa ({p}, {p})")
    return sigma


def oracle_cross_moment(data: Dataset, sigma_matrix: np.ndarray) -> np.ndarray:
    """Σ⁻¹Xᵀy/n tramite fattorizzazione di Cholesky"""
    sigma = check_sigma_matrix(sigma_matrix, data.p)
    factor = cholesky(sigma, label="Σ")
    return cho_solve(factor, data.x.T @ data.y) / data.n


def fit_oracle(data: Dataset, sigma_matrix: np.ndarray) -> EstimateResult:
    """
    Stimatore oracolo β̂_Σ = Σ⁻¹Xᵀy/n, valido anche per p ≥ n

    Raises:
        NotPositiveDefinite: se Σ non ammette fattorizzazione di Cholesky
    """
    beta = oracle_cross_moment(data, sigma_matrix)
    return EstimateResult(beta_hat=beta, kind=EstimatorKind.ORACLE,
                          gram_condition=condition_number(np.asarray(sigma_matrix, dtype=float)))


def fit_projected_oracle(data: Dataset, sigma_matrix: np.ndarray, cs: ConstraintSet) -> EstimateResult:
    """
    Oracolo proiettato β̂_{Σ,P} = P_{A⊥}Σ⁻¹Xᵀy/n + Aᵀ(AAᵀ)⁻¹c
    """
    if cs.p != data.p:
        raise DimensionMismatch(f"Vincoli su p={cs.p} ma il disegno ha p={data.p}")
    beta_oracle = oracle_cross_moment(data, sigma_matrix)
    beta, residual = project_estimate(beta_oracle, cs)
    return EstimateResult(beta_hat=beta, kind=EstimatorKind.PROJECTED_ORACLE,
                          gram_condition=condition_number(np.asarray(sigma_matrix, dtype=float)),
                          feasibility_residual=residual)


class OracleEstimator(BaseEstimator):
    """Stimatore oracolo Σ⁻¹Xᵀy/n"""

    kind = EstimatorKind.ORACLE

    def __init__(self, config: Dict[str, Any]):
        super().__init__("OracleEstimator", config)

    def fit(self, data: Dataset, cs: Optional[ConstraintSet] = None,
            sigma_matrix: Optional[np.ndarray] = None) -> EstimateResult:
        return self.execute_with_stats(fit_oracle, data, sigma_matrix)

    def get_capabilities(self) -> List[str]:
        return ['sigma_matrix', 'p_ge_n']


class ProjectedOracleEstimator(BaseEstimator):
    """Stimatore oracolo proiettato"""

    kind = EstimatorKind.PROJECTED_ORACLE

    def __init__(self, config: Dict[str, Any]):
        super().__init__("ProjectedOracleEstimator", config)

    def fit(self, data: Dataset, cs: Optional[ConstraintSet] = None,
            sigma_matrix: Optional[np.ndarray] = None) -> EstimateResult:
        cs = self._require_constraints(data, cs)
        return self.execute_with_stats(fit_projected_oracle, data, sigma_matrix, cs)

    def get_capabilities(self) -> List[str]:
        return ['constraints', 'sigma_matrix', 'p_ge_n']
