"""
Proiezione ortogonale sull'insieme affine {β : Aβ = c}
"""

import logging
from typing import Optional, Tuple

import numpy as np

from constrex.exceptions import DimensionMismatch, RankDeficient
from constrex.linalg import cho_solve, cholesky, symmetrize
from constrex.models.domain import ConstraintSet, ProjectorPair

logger = logging.getLogger(__name__)


def orthogonal_projector(cs: ConstraintSet) -> ProjectorPair:
    """
    Calcola P_{A⊥} = I − Aᵀ(AAᵀ)⁻¹A e il punto Aᵀ(AAᵀ)⁻¹c

    Args:
        cs: Vincoli validati

    Returns:
        ProjectorPair

    Raises:
        RankDeficient: se la fattorizzazione di AAᵀ fallisce
    """
    p = cs.p
    if cs.is_empty:
        return ProjectorPair(p_orth=np.eye(p), feasible_point=np.zeros(p))

    a = cs.a
    factor = cholesky(a @ a.T, error=RankDeficient, label="AAᵀ")
    p_orth = symmetrize(np.eye(p) - a.T @ cho_solve(factor, a))
    feasible_point = a.T @ cho_solve(factor, cs.c)
    return ProjectorPair(p_orth=p_orth, feasible_point=feasible_point)


def range_projector(cs: ConstraintSet) -> np.ndarray:
    """P_A = Aᵀ(AAᵀ)⁻¹A"""
    return np.eye(cs.p) - orthogonal_projector(cs).p_orth


def project_estimate(beta: np.ndarray, cs: ConstraintSet,
                     projector: Optional[ProjectorPair] = None) -> Tuple[np.ndarray, Optional[float]]:
    """
    Proietta una stima nell'insieme ammissibile

    Returns:
        (β proiettato, residuo di ammissibilità oppure None se q = 0)
    """
    if beta.shape[0] != cs.p:
        raise DimensionMismatch(f"Stima di lunghezza {beta.shape[0]} con vincoli su p={cs.p}")
    if cs.is_empty:
        return np.array(beta, dtype=float), None
    projector = projector or orthogonal_projector(cs)
    projected = projector.project(beta)
    return projected, cs.residual(projected)
