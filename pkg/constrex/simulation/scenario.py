"""
Configurazione degli scenari Monte Carlo e generazione dei dati sintetici
"""

import logging
import math
from enum import Enum
from functools import lru_cache
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from scipy.linalg import cholesky as dense_cholesky

from constrex.estimators.highdim import GlmLink
from constrex.exceptions import ConfigInvalid, ConstrexError, QNotLessThanP
from constrex.models.constraints import build_reference_constraints, realize_covariance, selection_matrix
from constrex.models.domain import ConstraintSet, CovarianceSpec, Dataset, EstimatorKind, TrueModel

logger = logging.getLogger(__name__)

# Scopi dei flussi casuali derivati
STREAM_ITERATION = 0
STREAM_FIXED_BETA = 1
STREAM_FIXED_REFERENCE = 2


class QRuleKind(str, Enum):
    FIXED = "fixed"
    HALF_P_PLUS_ONE = "half_p_plus_one"
    GRID = "grid"


class QRule(BaseModel):
    """Regola che associa a ogni p i valori di q da simulare"""

    model_config = ConfigDict(extra='forbid')

    kind: QRuleKind
    value: Optional[int] = Field(default=None, ge=0)
    grid: Optional[List[int]] = None

    @model_validator(mode='after')
    def _check_kind(self) -> 'QRule':
        if self.kind is QRuleKind.FIXED and self.value is None:
            raise ValueError("q_rule 'fixed' richiede il campo value")
        if self.kind is QRuleKind.GRID and not self.grid:
            raise ValueError("q_rule 'grid' richiede una lista grid non vuota")
        if self.grid is not None and any(q < 0 for q in self.grid):
            raise ValueError("Valori di q negativi nella griglia")
        return self

    def values(self, p: int) -> List[int]:
        if self.kind is QRuleKind.FIXED:
            return [self.value]
        if self.kind is QRuleKind.HALF_P_PLUS_ONE:
            return [p // 2 + 1]
        return list(self.grid)


class BetaPrior(BaseModel):
    """Coordinate di β* i.i.d. N(mean, sd²), opzionalmente riscalate a norma fissata"""

    model_config = ConfigDict(extra='forbid')

    mean: float = 5.0
    sd: float = Field(default=math.sqrt(5.0), ge=0)
    norm: Optional[float] = Field(default=None, gt=0)

    def draw(self, rng: np.random.Generator, p: int) -> np.ndarray:
        beta = self.mean + self.sd * rng.standard_normal(p)
        if self.norm is not None:
            length = np.linalg.norm(beta)
            if length > 0:
                beta = beta * (self.norm / length)
        return beta


class CovarianceSettings(BaseModel):
    model_config = ConfigDict(extra='forbid')

    variant: str = 'isotropic'
    rho: float = 0.0

    def spec(self, p: int) -> CovarianceSpec:
        return CovarianceSpec.from_dict({'variant': self.variant, 'rho': self.rho}, p=p)


class GlmSettings(BaseModel):
    model_config = ConfigDict(extra='forbid')

    link: str = 'logistic'
    quadrature_nodes: int = Field(default=64, ge=2)

    @field_validator('link')
    @classmethod
    def _known_link(cls, value: str) -> str:
        if value not in ('identity', 'logistic'):
            raise ValueError(f"Link non supportato: {value}")
        return value


class ChebSettings(BaseModel):
    model_config = ConfigDict(extra='forbid')

    order_j: int = Field(default=3, ge=0)
    spectral_bounds: Tuple[float, float] = (0.2, 5.0)


class ScenarioConfig(BaseModel):
    """Scenario Monte Carlo letto da JSON"""

    model_config = ConfigDict(extra='forbid')

    name: str
    n: int = Field(gt=1)
    ref_n: int = Field(default=1000, gt=0)
    p_grid: List[int] = Field(min_length=1)
    q_rule: QRule
    covariance: CovarianceSettings = Field(default_factory=CovarianceSettings)
    sigma: float = Field(default=1.0, ge=0)
    beta_prior: BetaPrior = Field(default_factory=BetaPrior)
    iterations: int = Field(ge=1)
    seed: int = Field(ge=0, lt=2 ** 64)
    estimators: List[EstimatorKind] = Field(min_length=1)
    glm: Optional[GlmSettings] = None
    fixed_beta: bool = False
    fixed_reference: bool = False
    inference: bool = False
    level: float = Field(default=0.05, gt=0, lt=1)
    holdout: int = Field(default=100, ge=1)
    cheb: ChebSettings = Field(default_factory=ChebSettings)

    @field_validator('p_grid')
    @classmethod
    def _positive_p(cls, value: List[int]) -> List[int]:
        if any(p < 1 for p in value):
            raise ValueError("Valori di p non positivi")
        return value

    @model_validator(mode='after')
    def _check_regime(self) -> 'ScenarioConfig':
        needs_n_gt_p = [kind.value for kind in self.estimators if kind.needs_n_gt_p]
        if needs_n_gt_p and max(self.p_grid) >= self.n:
            raise ValueError(f"Gli stimatori {needs_n_gt_p} richiedono n > p (n={self.n}, p max={max(self.p_grid)})")
        for p in self.p_grid:
            try:
                self.covariance.spec(p)
            except ConstrexError as e:
                raise ValueError(str(e)) from e
        return self

    @property
    def logistic_outcome(self) -> bool:
        return self.glm is not None and self.glm.link == 'logistic'

    def grid_points(self) -> List[Tuple[int, int]]:
        """Coppie (p, q) nell'ordine della configurazione"""
        return [(p, q) for p in self.p_grid for q in self.q_rule.values(p)]

    def estimator_settings(self) -> Dict[str, Any]:
        """Impostazioni piatte per create_estimator"""
        return {
            'cheb_order': self.cheb.order_j,
            'spectral_bounds': list(self.cheb.spectral_bounds),
            'link': self.glm.link if self.glm is not None else 'identity',
            'quadrature_nodes': self.glm.quadrature_nodes if self.glm is not None else 64,
        }


def parse_scenario(data: Dict[str, Any]) -> ScenarioConfig:
    """
    Valida la configurazione di uno scenario

    Raises:
        ConfigInvalid: con il primo errore di validazione
    """
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        location = '.'.join(str(part) for part in first['loc'])
        raise ConfigInvalid(f"Scenario non valido ({location or 'radice'}): {first['msg']}") from e
    except ValueError as e:
        raise ConfigInvalid(f"Scenario non valido: {e}") from e


def stream(seed: int, p: int, q: int, iter_index: int, purpose: int = STREAM_ITERATION) -> np.random.Generator:
    """
    Flusso casuale counter-based per (seed, p, q, iter_index)

    La chiave Philox contiene seed e scopo, il contatore contiene (iterazione, p, q):
    flussi diversi non dipendono dall'ordine di esecuzione.
    """
    counter = np.array([0, iter_index, p, q], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=seed + (purpose << 64), counter=counter))


@lru_cache(maxsize=32)
def _covariance_factor(variant: str, rho: float, p: int) -> Tuple[np.ndarray, np.ndarray]:
    sigma = realize_covariance(CovarianceSpec.from_dict({'variant': variant, 'rho': rho}, p=p))
    factor = dense_cholesky(sigma, lower=True)
    sigma.setflags(write=False)
    factor.setflags(write=False)
    return sigma, factor


def population_covariance(cfg: ScenarioConfig, p: int) -> Tuple[np.ndarray, np.ndarray]:
    """(Σ, L) con Σ = L·Lᵀ per la dimensione p"""
    return _covariance_factor(cfg.covariance.variant, float(cfg.covariance.rho), p)


def _gaussian_rows(rng: np.random.Generator, rows: int, factor: np.ndarray) -> np.ndarray:
    return rng.standard_normal((rows, factor.shape[0])) @ factor.T


def _outcome(rng: np.random.Generator, x: np.ndarray, beta: np.ndarray, cfg: ScenarioConfig) -> np.ndarray:
    eta = x @ beta
    if cfg.logistic_outcome:
        return (rng.random(x.shape[0]) < GlmLink.logistic().mean(eta)).astype(float)
    return eta + cfg.sigma * rng.standard_normal(x.shape[0])


def generate_iteration(cfg: ScenarioConfig, p: int, q: int,
                       iter_index: int) -> Tuple[Dataset, ConstraintSet, TrueModel, Dataset]:
    """
    Genera i dati di un'iterazione

    Ordine delle estrazioni: β* (se non fisso), campione di riferimento (se non fisso),
    X, errori, X di holdout, errori di holdout.

    Args:
        cfg: Scenario validato
        p: Dimensione
        q: Numero di vincoli (q < p)
        iter_index: Indice dell'iterazione

    Returns:
        (campione, vincoli, modello vero, holdout)
    """
    if q >= p:
        raise QNotLessThanP(f"Punto di griglia con q={q} ≥ p={p}")
    sigma_matrix, factor = population_covariance(cfg, p)
    rng = stream(cfg.seed, p, q, iter_index)

    if cfg.fixed_beta:
        beta = cfg.beta_prior.draw(stream(cfg.seed, p, q, 0, STREAM_FIXED_BETA), p)
    else:
        beta = cfg.beta_prior.draw(rng, p)

    if cfg.fixed_reference:
        reference = _gaussian_rows(stream(cfg.seed, p, q, 0, STREAM_FIXED_REFERENCE), cfg.ref_n, factor)
    else:
        reference = _gaussian_rows(rng, cfg.ref_n, factor)
    cs = ConstraintSet.empty(p) if q == 0 else build_reference_constraints(selection_matrix(q, p), reference, beta)

    x = _gaussian_rows(rng, cfg.n, factor)
    y = _outcome(rng, x, beta, cfg)
    x_new = _gaussian_rows(rng, cfg.holdout, factor)
    y_new = _outcome(rng, x_new, beta, cfg)

    truth = TrueModel(beta_star=beta, sigma=cfg.sigma, covariance=cfg.covariance.spec(p))
    return Dataset(x, y), cs, truth, Dataset(x_new, y_new)
