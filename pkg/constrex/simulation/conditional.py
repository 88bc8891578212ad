"""
Esperimenti condizionati a X: si riestrae solo il rumore su un disegno fisso
"""

import logging
from dataclasses import dataclass

import numpy as np

from constrex.estimators import orthogonal_projector
from constrex.exceptions import DimensionMismatch, InputError, NegativeVariance, NTooSmall
from constrex.linalg import check_gram, cls_operator, row_space_basis, spd_inverse
from constrex.models.domain import ConstraintSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConditionalDraws:
    """Errori quadratici per estrazione di rumore e n·G_n/σ²"""

    cls_sq_errors: np.ndarray
    ols_sq_errors: np.ndarray
    projected_sq_errors: np.ndarray
    scaled_gain: np.ndarray

    @property
    def draws(self) -> int:
        return self.cls_sq_errors.shape[0]


def conditional_error_draws(x: np.ndarray, cs: ConstraintSet, beta_star: np.ndarray, sigma: float,
                            draws: int, seed: int, batch_size: int = 10000) -> ConditionalDraws:
    """
    Riestrae ε ~ N(0, σ²I) sul disegno fisso x e calcola gli errori degli stimatori

    Con β* ammissibile gli errori sono lineari in ε: β̂_LS − β* = (XᵀX)⁻¹Xᵀε,
    β̂_P − β* = P_{A⊥}(β̂_LS − β*) e β̃ − β* = C_{A⊥}(β̂_LS − β*).

    Args:
        x: Disegno n × p con n > p
        cs: Vincoli
        beta_star: Parametro vero, ammissibile per cs
        sigma: Deviazione standard del rumore (> 0)
        draws: Numero di estrazioni
        seed: Seme del generatore
        batch_size: Estrazioni per blocco vettorizzato

    Returns:
        ConditionalDraws
    """
    x = np.asarray(x, dtype=float)
    beta_star = np.asarray(beta_star, dtype=float)
    n, p = x.shape
    if n <= p:
        raise NTooSmall(f"Servono n > p: n={n}, p={p}")
    if beta_star.shape != (p,) or cs.p != p:
        raise DimensionMismatch(f"β* {beta_star.shape} o vincoli su p={cs.p} incompatibili con X {x.shape}")
    if not sigma > 0:
        raise NegativeVariance(f"σ deve essere positivo: {sigma}")
    if draws < 1:
        raise InputError(f"Numero di estrazioni non valido: {draws}")
    if not cs.is_empty and cs.residual(beta_star) > 1e-8 * max(1.0, float(np.max(np.abs(cs.c)))):
        raise InputError("β* non soddisfa i vincoli")

    gram = x.T @ x
    check_gram(gram / n)
    ols_map = spd_inverse(gram, label="XᵀX") @ x.T
    cls_map = cls_operator(gram, cs.a) @ ols_map
    projected_map = orthogonal_projector(cs).p_orth @ ols_map
    gain_map = row_space_basis(cs.a).T @ ols_map

    rng = np.random.Generator(np.random.Philox(key=seed))
    chunks = {'cls': [], 'ols': [], 'projected': [], 'gain': []}
    remaining = draws
    while remaining > 0:
        size = min(batch_size, remaining)
        noise = sigma * rng.standard_normal((size, n))
        chunks['ols'].append(np.sum((noise @ ols_map.T) ** 2, axis=1))
        chunks['cls'].append(np.sum((noise @ cls_map.T) ** 2, axis=1))
        chunks['projected'].append(np.sum((noise @ projected_map.T) ** 2, axis=1))
        chunks['gain'].append(np.sum((noise @ gain_map.T) ** 2, axis=1))
        remaining -= size

    logger.debug(f"Estrazioni condizionate completate: {draws} su n={n}, p={p}, q={cs.q}")
    return ConditionalDraws(
        cls_sq_errors=np.concatenate(chunks['cls']),
        ols_sq_errors=np.concatenate(chunks['ols']),
        projected_sq_errors=np.concatenate(chunks['projected']),
        scaled_gain=n * np.concatenate(chunks['gain']) / sigma ** 2,
    )
