"""
Validazione dei vincoli, costruzione tramite popolazione di riferimento e realizzazione di Σ
"""

import logging
from typing import Any

import numpy as np

from constrex.exceptions import (
    DimensionMismatch,
    NonFiniteInput,
    NotPositiveDefinite,
    QNotLessThanP,
    RankDeficient,
)
from constrex.linalg import cholesky, condition_number, numerical_rank
from constrex.models.domain import ConstraintSet, CovarianceSpec, CovarianceVariant

logger = logging.getLogger(__name__)


def validate_constraints(a: Any, c: Any, rank_tol: float = 1e-10) -> ConstraintSet:
    """
    Valida la coppia (A, c) e restituisce un ConstraintSet

    Args:
        a: Matrice dei vincoli q × p
        c: Vettore dei vincoli di lunghezza q
        rank_tol: Soglia relativa al valore singolare massimo per il rango numerico

    Returns:
        ConstraintSet con rango pieno per righe e q < p

    Raises:
        DimensionMismatch, NonFiniteInput, RankDeficient, QNotLessThanP
    """
    a = np.asarray(a, dtype=float)
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2 or c.ndim != 1:
        raise DimensionMismatch(f"Forme non valide: a {a.shape}, c {c.shape}")
    if a.shape[0] != c.shape[0]:
        raise DimensionMismatch(f"a ha {a.shape[0]} righe ma c ha lunghezza {c.shape[0]}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(c))):
        raise NonFiniteInput("Vincoli con valori non finiti")

    q, p = a.shape
    if q > 0:
        rank = numerical_rank(a, rank_tol)
        if rank < q:
            raise RankDeficient(f"Matrice dei vincoli con rango {rank} < q={q}")
    if q >= p:
        raise QNotLessThanP(f"Numero di vincoli q={q} non inferiore alla dimensione p={p}")

    logger.debug(f"Vincoli validati - q={q}, p={p}")
    return ConstraintSet(a, c)


def sample_second_moment(ref_x: np.ndarray) -> np.ndarray:
    """Σ̃_N = ref_xᵀ·ref_x / N"""
    ref_x = np.asarray(ref_x, dtype=float)
    if ref_x.ndim != 2 or ref_x.shape[0] < 1:
        raise DimensionMismatch(f"Campione di riferimento non valido: forma {ref_x.shape}")
    return ref_x.T @ ref_x / ref_x.shape[0]


def build_reference_constraints(b: Any, ref_x: Any, beta_star: Any, rank_tol: float = 1e-10) -> ConstraintSet:
    """
    Costruisce i vincoli A = B·Σ̃_N e c = A·β* da una popolazione di riferimento

    Args:
        b: Matrice di selezione q × p
        ref_x: Campione di riferimento N × p
        beta_star: Parametro vero di lunghezza p

    Returns:
        ConstraintSet ammissibile per beta_star per costruzione
    """
    b = np.asarray(b, dtype=float)
    if b.ndim == 1:
        b = b.reshape(1, -1)
    beta_star = np.asarray(beta_star, dtype=float)
    sigma_tilde = sample_second_moment(ref_x)
    if b.shape[1] != sigma_tilde.shape[0] or beta_star.shape != (sigma_tilde.shape[0],):
        raise DimensionMismatch(
            f"Dimensioni incompatibili: B {b.shape}, Σ̃_N {sigma_tilde.shape}, β* {beta_star.shape}"
        )
    a = b @ sigma_tilde
    return validate_constraints(a, a @ beta_star, rank_tol=rank_tol)


def selection_matrix(q: int, p: int) -> np.ndarray:
    """B = [I_q : 0_{p−q}]"""
    return np.eye(q, p)


def realize_covariance(spec: CovarianceSpec) -> np.ndarray:
    """
    Restituisce la matrice densa SPD descritta da spec

    Raises:
        NotPositiveDefinite: se la matrice esplicita non è simmetrica o non ammette Cholesky
    """
    p = spec.p
    if spec.variant is CovarianceVariant.ISOTROPIC:
        return np.eye(p)
    if spec.variant is CovarianceVariant.EQUICORRELATED:
        return (1.0 - spec.rho) * np.eye(p) + spec.rho * np.ones((p, p))

    matrix = np.array(spec.matrix, dtype=float)
    scale = max(float(np.max(np.abs(matrix))), 1.0)
    if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-12 * scale):
        raise NotPositiveDefinite("Matrice di covarianza non simmetrica")
    cholesky(matrix, error=NotPositiveDefinite, label="Σ")
    cond = condition_number(matrix)
    if not np.isfinite(cond):
        raise NotPositiveDefinite("Matrice di covarianza con condizionamento infinito")
    return matrix
