"""
Tipi di dominio: dati, vincoli, covarianze, modello vero e risultati di stima
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np

from constrex.exceptions import (
    DimensionMismatch,
    InputError,
    NonFiniteInput,
    NotPositiveDefinite,
    RatioOutOfRange,
)

logger = logging.getLogger(__name__)


def _frozen_array(values: Any, ndim: int, label: str) -> np.ndarray:
    array = np.array(values, dtype=float)
    if array.ndim != ndim:
        raise DimensionMismatch(f"{label}: attese {ndim} dimensioni, trovate {array.ndim}")
    if not np.all(np.isfinite(array)):
        raise NonFiniteInput(f"{label}: valori non finiti")
    array.setflags(write=False)
    return array


class EstimatorKind(str, Enum):
    """Identità degli stimatori disponibili"""

    OLS = "ols"
    PROJECTED = "projected"
    CLS = "cls"
    ORACLE = "oracle"
    PROJECTED_ORACLE = "projected_oracle"
    CHEB_MOM = "cheb_mom"
    GLM = "glm"
    GLM_COORDINATE = "glm_coordinate"

    @property
    def needs_sigma(self) -> bool:
        return self in (EstimatorKind.ORACLE, EstimatorKind.PROJECTED_ORACLE,
                        EstimatorKind.GLM, EstimatorKind.GLM_COORDINATE)

    @property
    def needs_n_gt_p(self) -> bool:
        return self in (EstimatorKind.OLS, EstimatorKind.PROJECTED, EstimatorKind.CLS)


@dataclass(frozen=True)
class Dataset:
    """Campione della popolazione target: disegno X (n × p) e risposta y (n)"""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = _frozen_array(self.x, 2, "x")
        y = _frozen_array(self.y, 1, "y")
        if x.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"x ha {x.shape[0]} righe ma y ha lunghezza {y.shape[0]}")
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise DimensionMismatch(f"Dataset vuoto: forma {x.shape}")
        object.__setattr__(self, 'x', x)
        object.__setattr__(self, 'y', y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def gram(self) -> np.ndarray:
        """Σ̂ₙ = XᵀX/n"""
        return self.x.T @ self.x / self.n

    def without_row(self, index: int) -> 'Dataset':
        keep = np.arange(self.n) != index
        return Dataset(self.x[keep], self.y[keep])


@dataclass(frozen=True)
class ConstraintSet:
    """Vincoli affini Aβ = c, con A di dimensione q × p"""

    a: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        a = _frozen_array(self.a, 2, "a")
        c = _frozen_array(self.c, 1, "c")
        if a.shape[0] != c.shape[0]:
            raise DimensionMismatch(f"a ha {a.shape[0]} righe ma c ha lunghezza {c.shape[0]}")
        object.__setattr__(self, 'a', a)
        object.__setattr__(self, 'c', c)

    @classmethod
    def empty(cls, p: int) -> 'ConstraintSet':
        """Insieme vuoto (q = 0): gli stimatori vincolati tornano alla versione libera"""
        return cls(np.zeros((0, p)), np.zeros(0))

    @property
    def q(self) -> int:
        return self.a.shape[0]

    @property
    def p(self) -> int:
        return self.a.shape[1]

    @property
    def is_empty(self) -> bool:
        return self.q == 0

    def residual(self, beta: np.ndarray) -> float:
        """‖Aβ − c‖_∞ (0 per l'insieme vuoto)"""
        if self.is_empty:
            return 0.0
        return float(np.max(np.abs(self.a @ beta - self.c)))


class CovarianceVariant(str, Enum):
    ISOTROPIC = "isotropic"
    EQUICORRELATED = "equicorrelated"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class CovarianceSpec:
    """Dispersione di popolazione Σ: isotropa, equicorrelata o matrice esplicita"""

    variant: CovarianceVariant
    p: int
    rho: float = 0.0
    matrix: Optional[np.ndarray] = None

    def __post_init__(self):
        variant = CovarianceVariant(self.variant)
        object.__setattr__(self, 'variant', variant)
        if self.p < 1:
            raise DimensionMismatch(f"Dimensione p non valida: {self.p}")
        if variant is CovarianceVariant.EQUICORRELATED:
            lower = -1.0 / (self.p - 1) if self.p > 1 else -np.inf
            if not (lower < self.rho < 1.0):
                raise NotPositiveDefinite(
                    f"rho={self.rho} fuori da ({lower}, 1): matrice equicorrelata non definita positiva"
                )
        if variant is CovarianceVariant.EXPLICIT:
            if self.matrix is None:
                raise InputError("CovarianceSpec esplicita senza matrice")
            matrix = _frozen_array(self.matrix, 2, "sigma")
            if matrix.shape != (self.p, self.p):
                raise DimensionMismatch(f"Matrice di covarianza {matrix.shape} incompatibile con p={self.p}")
            object.__setattr__(self, 'matrix', matrix)

    @classmethod
    def isotropic(cls, p: int) -> 'CovarianceSpec':
        return cls(CovarianceVariant.ISOTROPIC, p)

    @classmethod
    def equicorrelated(cls, p: int, rho: float) -> 'CovarianceSpec':
        return cls(CovarianceVariant.EQUICORRELATED, p, rho=float(rho))

    @classmethod
    def explicit(cls, matrix: Any) -> 'CovarianceSpec':
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2:
            raise DimensionMismatch("La matrice di covarianza deve essere bidimensionale")
        return cls(CovarianceVariant.EXPLICIT, matrix.shape[0], matrix=matrix)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], p: Optional[int] = None) -> 'CovarianceSpec':
        """
        Costruisce la descrizione della covarianza dal JSON

        Args:
            data: ad es. {"variant": "equicorrelated", "p": 100, "rho": 0.5}
            p: dimensione da usare se assente nel dizionario
        """
        try:
            variant = CovarianceVariant(str(data.get('variant', 'isotropic')).lower())
        except ValueError as e:
            raise InputError(f"Variante di covarianza non supportata: {data.get('variant')}") from e
        if variant is CovarianceVariant.EXPLICIT:
            return cls.explicit(data['matrix'])
        dim = data.get('p', p)
        if dim is None:
            raise InputError("Dimensione p mancante nella specifica di covarianza")
        if variant is CovarianceVariant.ISOTROPIC:
            return cls.isotropic(int(dim))
        return cls.equicorrelated(int(dim), float(data.get('rho', 0.0)))

    def to_dict(self) -> Dict[str, Any]:
        result: Dict[str, Any] = {'variant': self.variant.value, 'p': self.p}
        if self.variant is CovarianceVariant.EQUICORRELATED:
            result['rho'] = self.rho
        if self.variant is CovarianceVariant.EXPLICIT:
            result['matrix'] = self.matrix.tolist()
        return result

    @property
    def is_isotropic(self) -> bool:
        return self.variant is CovarianceVariant.ISOTROPIC


@dataclass(frozen=True)
class TrueModel:
    """Parametro vero β*, deviazione standard del rumore e covarianza del disegno"""

    beta_star: np.ndarray
    sigma: float
    covariance: CovarianceSpec

    def __post_init__(self):
        beta = _frozen_array(self.beta_star, 1, "beta_star")
        if beta.shape[0] != self.covariance.p:
            raise DimensionMismatch(f"beta_star ha lunghezza {beta.shape[0]}, attesa {self.covariance.p}")
        # sigma = 0 ammesso: modalità senza rumore
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise InputError(f"sigma deve essere non negativo: {self.sigma}")
        object.__setattr__(self, 'beta_star', beta)

    @property
    def sigma_sq(self) -> float:
        return float(self.sigma) ** 2

    def is_feasible(self, cs: ConstraintSet, tol: float = 1e-8) -> bool:
        return cs.residual(self.beta_star) <= tol


@dataclass(frozen=True)
class AspectRatios:
    """Rapporti α = p/n e γ = q/p"""

    alpha: float
    gamma: float

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise RatioOutOfRange(f"alpha deve essere in [0, ∞): {self.alpha}")
        if not (0.0 <= self.gamma < 1.0):
            raise RatioOutOfRange(f"gamma deve essere in [0, 1): {self.gamma}")

    @classmethod
    def from_dims(cls, n: int, p: int, q: int) -> 'AspectRatios':
        return cls(alpha=p / n, gamma=q / p)

    @property
    def effective(self) -> float:
        """(1 − γ)α"""
        return (1.0 - self.gamma) * self.alpha

    @property
    def correction(self) -> float:
        """1 − (1 − γ)α"""
        return 1.0 - self.effective

    def require_moderate(self) -> 'AspectRatios':
        if self.effective >= 1.0:
            raise RatioOutOfRange(
                f"(1−γ)α = {self.effective:.4f} ≥ 1: formula valida solo nel regime moderatamente alto-dimensionale"
            )
        return self


@dataclass(frozen=True)
class EstimateResult:
    """Vettore stimato con identità dello stimatore e diagnostica"""

    beta_hat: np.ndarray
    kind: EstimatorKind
    gram_condition: float
    feasibility_residual: Optional[float] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'beta_hat', _frozen_array(self.beta_hat, 1, "beta_hat"))
        object.__setattr__(self, 'kind', EstimatorKind(self.kind))

    @property
    def p(self) -> int:
        return self.beta_hat.shape[0]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind.value,
            'gram_condition': self.gram_condition,
            'feasibility_residual': self.feasibility_residual,
            'diagnostics': self.diagnostics,
        }


@dataclass(frozen=True)
class ProjectorPair:
    """Proiettore ortogonale sul nucleo di A e punto ammissibile di norma minima"""

    p_orth: np.ndarray
    feasible_point: np.ndarray

    def project(self, beta: np.ndarray) -> np.ndarray:
        return self.p_orth @ beta + self.feasible_point
