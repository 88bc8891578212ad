"""
Utilità di algebra lineare densa condivise da stimatori, inferenza e teoria
"""

import logging
from typing import Tuple

import numpy as np
from scipy import linalg as sla

from constrex.exceptions import NotPositiveDefinite, RankDeficient, SingularGram

logger = logging.getLogger(__name__)

CONDITION_CAP = 1e12


def cholesky(matrix: np.ndarray, error=NotPositiveDefinite, label: str = "matrice") -> Tuple[np.ndarray, bool]:
    """
    Fattorizzazione di Cholesky con conversione dell'errore nel dominio

    Args:
        matrix: Matrice simmetrica definita positiva
        error: Classe di eccezione da sollevare in caso di fallimento
        label: Nome della matrice per il messaggio d'errore

    Returns:
        Fattore nel formato di scipy.linalg.cho_factor
    """
    try:
        return sla.cho_factor(matrix, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, sla.LinAlgError, ValueError) as e:
        raise error(f"Fattorizzazione di Cholesky fallita per {label}: {e}") from e


def cho_solve(factor: Tuple[np.ndarray, bool], rhs: np.ndarray) -> np.ndarray:
    return sla.cho_solve(factor, rhs, check_finite=False)


def spd_inverse(matrix: np.ndarray, error=NotPositiveDefinite, label: str = "matrice") -> np.ndarray:
    """Inversa esplicita di una matrice SPD, simmetrizzata"""
    factor = cholesky(matrix, error=error, label=label)
    inverse = cho_solve(factor, np.eye(matrix.shape[0]))
    return symmetrize(inverse)


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def condition_number(matrix: np.ndarray) -> float:
    """Numero di condizionamento in norma 2 (inf se singolare)"""
    if matrix.size == 0:
        return 1.0
    singular_values = np.linalg.svd(matrix, compute_uv=False)
    if singular_values[-1] <= 0.0:
        return float(np.inf)
    return float(singular_values[0] / singular_values[-1])


def check_gram(gram: np.ndarray, condition_cap: float = CONDITION_CAP) -> float:
    """
    Verifica che la matrice di Gram sia invertibile entro il limite di condizionamento

    Returns:
        Numero di condizionamento

    Raises:
        SingularGram: se il condizionamento supera condition_cap
    """
    cond = condition_number(gram)
    if not np.isfinite(cond) or cond > condition_cap:
        raise SingularGram(f"Matrice di Gram numericamente singolare (cond={cond:.3e})")
    return cond


def numerical_rank(matrix: np.ndarray, rank_tol: float = 1e-10) -> int:
    """Rango numerico: valori singolari sopra rank_tol volte il massimo"""
    if matrix.size == 0:
        return 0
    singular_values = np.linalg.svd(matrix, compute_uv=False)
    if singular_values[0] == 0.0:
        return 0
    return int(np.sum(singular_values > rank_tol * singular_values[0]))


def null_space_basis(a: np.ndarray) -> np.ndarray:
    """
    Base ortonormale del nucleo di A (p × (p−q)) tramite SVD completa

    Args:
        a: Matrice dei vincoli q × p a rango pieno per righe

    Returns:
        Matrice V con colonne ortonormali e A·V = 0
    """
    q, p = a.shape
    if q == 0:
        return np.eye(p)
    _, _, vt = np.linalg.svd(a, full_matrices=True)
    return vt[q:].T.copy()


def row_space_basis(a: np.ndarray) -> np.ndarray:
    """Base ortonormale dello spazio riga di A (p × q)"""
    q, p = a.shape
    if q == 0:
        return np.zeros((p, 0))
    _, _, vt = np.linalg.svd(a, full_matrices=False)
    return vt[:q].T.copy()


def constrained_precision(gram: np.ndarray, a: np.ndarray, error=NotPositiveDefinite) -> np.ndarray:
    """
    Calcola G⁻¹ − G⁻¹Aᵀ(AG⁻¹Aᵀ)⁻¹AG⁻¹

    Con G = Σ fornisce la matrice di cui s_{C,j} sono gli elementi diagonali;
    con G = Σ̂ₙ la sua traccia è la traccia di C_{A⊥}Σ̂ₙ⁻¹.
    """
    gram_inv = spd_inverse(gram, error=error, label="matrice di Gram")
    if a.shape[0] == 0:
        return gram_inv
    w = gram_inv @ a.T
    k_factor = cholesky(a @ w, error=RankDeficient, label="AG⁻¹Aᵀ")
    return symmetrize(gram_inv - w @ cho_solve(k_factor, w.T))


def cls_operator(gram: np.ndarray, a: np.ndarray, error=NotPositiveDefinite) -> np.ndarray:
    """Operatore C_{A⊥} = I − G⁻¹Aᵀ(AG⁻¹Aᵀ)⁻¹A"""
    p = gram.shape[0]
    if a.shape[0] == 0:
        return np.eye(p)
    factor = cholesky(gram, error=error, label="matrice di Gram")
    w = cho_solve(factor, a.T)
    k_factor = cholesky(a @ w, error=RankDeficient, label="AG⁻¹Aᵀ")
    return np.eye(p) - w @ cho_solve(k_factor, a)
