"""
Stimatori ai minimi quadrati: OLS, OLS proiettato e minimi quadrati vincolati (CLS)
"""

import logging
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import solve_triangular

from constrex.exceptions import (
    DimensionMismatch,
    InputError,
    NTooSmall,
    RankDeficient,
    SingularGram,
)
from constrex.estimators.base_estimator import BaseEstimator
from constrex.estimators.projection import orthogonal_projector, project_estimate
from constrex.linalg import CONDITION_CAP, cho_solve, cholesky, condition_number, null_space_basis
from constrex.models.domain import ConstraintSet, Dataset, EstimateResult, EstimatorKind

logger = logging.getLogger(__name__)

CLS_METHODS = ('lagrangian', 'null_space', 'kkt')


def _qr_least_squares(data: Dataset, condition_cap: float = CONDITION_CAP) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Risolve i minimi quadrati via QR ridotta

    Returns:
        (β̂_LS, fattore R, condizionamento di Σ̂ₙ)
    """
    if data.n <= data.p:
        raise NTooSmall(f"Servono n > p per i minimi quadrati: n={data.n}, p={data.p}")
    q_mat, r = np.linalg.qr(data.x)
    # cond(Σ̂ₙ) = cond(R)²
    gram_condition = condition_number(r) ** 2
    if not np.isfinite(gram_condition) or gram_condition > condition_cap:
        raise SingularGram(f"Matrice di Gram numericamente singolare (cond={gram_condition:.3e})")
    beta = solve_triangular(r, q_mat.T @ data.y)
    return beta, r, gram_condition


def _check_dims(data: Dataset, cs: ConstraintSet):
    if cs.p != data.p:
        raise DimensionMismatch(f"Vincoli su p={cs.p} ma il disegno ha p={data.p}")


def fit_ols(data: Dataset, condition_cap: float = CONDITION_CAP) -> EstimateResult:
    """
    Stimatore OLS β̂_LS = (XᵀX)⁻¹Xᵀy

    Args:
        data: Campione con n > p
        condition_cap: Limite sul condizionamento di Σ̂ₙ

    Returns:
        EstimateResult di tipo OLS
    """
    beta, _, gram_condition = _qr_least_squares(data, condition_cap)
    return EstimateResult(beta_hat=beta, kind=EstimatorKind.OLS, gram_condition=gram_condition)


def fit_projected(data: Dataset, cs: ConstraintSet, condition_cap: float = CONDITION_CAP) -> EstimateResult:
    """
    Stimatore proiettato β̂_P = P_{A⊥}β̂_LS + Aᵀ(AAᵀ)⁻¹c
    """
    _check_dims(data, cs)
    beta_ls, _, gram_condition = _qr_least_squares(data, condition_cap)
    beta, residual = project_estimate(beta_ls, cs)
    return EstimateResult(beta_hat=beta, kind=EstimatorKind.PROJECTED,
                          gram_condition=gram_condition, feasibility_residual=residual)


def _lagrangian_correction(beta_ls: np.ndarray, r: np.ndarray, cs: ConstraintSet) -> np.ndarray:
    """
    β̃ = β̂_LS − Σ̂ₙ⁻¹Aᵀ(AΣ̂ₙ⁻¹Aᵀ)⁻¹(Aβ̂_LS − c), con Σ̂ₙ⁻¹ ricavata dal fattore R
    """
    # W = R⁻ᵀAᵀ, quindi AΣ̂ₙ⁻¹Aᵀ ∝ WᵀW e Σ̂ₙ⁻¹Aᵀ ∝ R⁻¹W (la costante n si semplifica)
    w = solve_triangular(r, cs.a.T, trans='T')
    k_factor = cholesky(w.T @ w, error=RankDeficient, label="AΣ̂ₙ⁻¹Aᵀ")
    lam = cho_solve(k_factor, cs.a @ beta_ls - cs.c)
    return beta_ls - solve_triangular(r, w @ lam)


def cls_null_space_form(data: Dataset, cs: ConstraintSet) -> np.ndarray:
    """
    Forma nel nucleo: β̃ = x₀ + V(VᵀΣ̂ₙV)⁻¹Vᵀ(Xᵀy/n − Σ̂ₙx₀)

    Args:
        data: Campione
        cs: Vincoli validati

    Returns:
        β̃ calcolato tramite la base ortonormale V del nucleo di A
    """
    _check_dims(data, cs)
    x0 = orthogonal_projector(cs).feasible_point
    v = null_space_basis(cs.a)
    xv = data.x @ v
    q_mat, r = np.linalg.qr(xv)
    if condition_number(r) ** 2 > CONDITION_CAP:
        raise SingularGram("VᵀΣ̂ₙV numericamente singolare")
    z = solve_triangular(r, q_mat.T @ (data.y - data.x @ x0))
    return x0 + v @ z


def solve_kkt(data: Dataset, cs: ConstraintSet) -> np.ndarray:
    """
    Risolve direttamente il sistema KKT (p+q) × (p+q)

        [XᵀX  Aᵀ] [β]   [Xᵀy]
        [A    0 ] [λ] = [c  ]

    Returns:
        β soluzione del problema quadratico vincolato
    """
    _check_dims(data, cs)
    p, q = data.p, cs.q
    kkt = np.zeros((p + q, p + q))
    kkt[:p, :p] = data.x.T @ data.x
    kkt[:p, p:] = cs.a.T
    kkt[p:, :p] = cs.a
    rhs = np.concatenate([data.x.T @ data.y, cs.c])
    try:
        solution = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError as e:
        raise SingularGram(f"Sistema KKT singolare: {e}") from e
    return solution[:p]


def _fit_cls_identity_fallback(data: Dataset, cs: ConstraintSet) -> EstimateResult:
    """Ripiego Σ̂_{n,inv} = I: proiezione della soluzione ai minimi quadrati di norma minima"""
    beta_ls = np.linalg.lstsq(data.x, data.y, rcond=None)[0]
    beta, residual = project_estimate(beta_ls, cs)
    sample_condition = condition_number(data.gram())
    return EstimateResult(
        beta_hat=beta,
        kind=EstimatorKind.CLS,
        gram_condition=1.0,
        feasibility_residual=residual,
        diagnostics={
            'fallback_identity_gram': True,
            'sample_gram_condition': sample_condition if np.isfinite(sample_condition) else None,
        },
    )


def fit_cls(data: Dataset, cs: ConstraintSet, fallback_identity: bool = False,
            method: str = 'lagrangian', condition_cap: float = CONDITION_CAP) -> EstimateResult:
    """
    Minimi quadrati vincolati: argmin ‖y − Xβ‖² con Aβ = c

    Args:
        data: Campione
        cs: Vincoli (l'insieme vuoto restituisce OLS)
        fallback_identity: Se True, con Σ̂ₙ singolare usa Σ̂_{n,inv} = I invece di sollevare
        method: 'lagrangian' (default), 'null_space' oppure 'kkt'
        condition_cap: Limite sul condizionamento di Σ̂ₙ

    Returns:
        EstimateResult di tipo CLS
    """
    _check_dims(data, cs)
    if method not in CLS_METHODS:
        raise InputError(f"Metodo CLS non supportato: {method}")

    try:
        beta_ls, r, gram_condition = _qr_least_squares(data, condition_cap)
    except (NTooSmall, SingularGram) as e:
        if not fallback_identity:
            raise
        logger.warning(f"Σ̂ₙ non invertibile ({e}): uso il ripiego Σ̂_{{n,inv}} = I")
        return _fit_cls_identity_fallback(data, cs)

    if cs.is_empty:
        beta = beta_ls
    elif method == 'lagrangian':
        beta = _lagrangian_correction(beta_ls, r, cs)
    elif method == 'null_space':
        beta = cls_null_space_form(data, cs)
    else:
        beta = solve_kkt(data, cs)

    return EstimateResult(
        beta_hat=beta,
        kind=EstimatorKind.CLS,
        gram_condition=gram_condition,
        feasibility_residual=None if cs.is_empty else cs.residual(beta),
        diagnostics={'method': method},
    )


class OlsEstimator(BaseEstimator):
    """Stimatore OLS, ignora i vincoli"""

    kind = EstimatorKind.OLS

    def __init__(self, config: Dict[str, Any]):
        super().__init__("OlsEstimator", config)

    def fit(self, data: Dataset, cs: Optional[ConstraintSet] = None,
            sigma_matrix: Optional[np.ndarray] = None) -> EstimateResult:
        return self.execute_with_stats(fit_ols, data, condition_cap=self.condition_cap)

    def get_capabilities(self) -> List[str]:
        return ['n_gt_p']


class ProjectedEstimator(BaseEstimator):
    """OLS proiettato ortogonalmente sull'insieme ammissibile"""

    kind = EstimatorKind.PROJECTED

    def __init__(self, config: Dict[str, Any]):
        super().__init__("ProjectedEstimator", config)

    def fit(self, data: Dataset, cs: Optional[ConstraintSet] = None,
            sigma_matrix: Optional[np.ndarray] = None) -> EstimateResult:
        cs = self._require_constraints(data, cs)
        return self.execute_with_stats(fit_projected, data, cs, condition_cap=self.condition_cap)

    def get_capabilities(self) -> List[str]:
        return ['constraints', 'n_gt_p']


class ClsEstimator(BaseEstimator):
    """Minimi quadrati vincolati"""

    kind = EstimatorKind.CLS

    def __init__(self, config: Dict[str, Any]):
        super().__init__("ClsEstimator", config)
        self.fallback_identity = bool(self.config.get('fallback_identity_gram', False))
        self.method = self.config.get('cls_method', 'lagrangian')

    def fit(self, data: Dataset, cs: Optional[ConstraintSet] = None,
            sigma_matrix: Optional[np.ndarray] = None) -> EstimateResult:
        cs = self._require_constraints(data, cs)
        return self.execute_with_stats(fit_cls, data, cs, fallback_identity=self.fallback_identity,
                                       method=self.method, condition_cap=self.condition_cap)

    def get_capabilities(self) -> List[str]:
        capabilities = ['constraints', 'n_gt_p']
        if self.fallback_identity:
            capabilities.append('p_ge_n')
        return capabilities
