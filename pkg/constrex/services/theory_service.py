"""
Servizio teorico: rischio minimax condizionato, rischio asintotico e guadagno della proiezione
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from constrex.estimators import fit_ols, project_estimate
from constrex.exceptions import ConfigInvalid, DimensionMismatch, NTooSmall, RatioOutOfRange, SingularGram
from constrex.linalg import (
    check_gram,
    cho_solve,
    cholesky,
    constrained_precision,
    null_space_basis,
    row_space_basis,
    spd_inverse,
    symmetrize,
)
from constrex.models.constraints import realize_covariance, selection_matrix, validate_constraints
from constrex.models.domain import AspectRatios, ConstraintSet, CovarianceSpec, Dataset

logger = logging.getLogger(__name__)

EIGEN_CUTOFF = 1e-8


@dataclass(frozen=True)
class RiskReport:
    """
    Rischio di stima del CLS

    finite_sample_trace_risk è la forma condizionata a X quando X è noto, altrimenti la sua
    attesa esatta sotto disegno gaussiano σ²·Tr((VᵀΣV)⁻¹)/(n − (p−q) − 1).
    """

    finite_sample_trace_risk: Optional[float]
    asymptotic_risk: float
    isotropic_closed_form: Optional[float] = None

    def __post_init__(self):
        for name in ('finite_sample_trace_risk', 'asymptotic_risk', 'isotropic_closed_form'):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} negativo: {value}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'finite_sample_trace_risk': self.finite_sample_trace_risk,
            'asymptotic_risk': self.asymptotic_risk,
            'isotropic_closed_form': self.isotropic_closed_form,
        }


@dataclass(frozen=True)
class GainReport:
    expected_gain: Optional[float]
    eigen_weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    empirical_gain: Optional[float] = None
    conditional_expected_gain: Optional[float] = None

    def __post_init__(self):
        weights = np.asarray(self.eigen_weights, dtype=float)
        if weights.size and (np.any(np.diff(weights) > 0) or np.any(weights < -1e-10)):
            raise ValueError("Pesi del guadagno non ordinati o negativi")
        object.__setattr__(self, 'eigen_weights', weights)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'expected_gain': self.expected_gain,
            'eigen_weights': self.eigen_weights.tolist(),
            'empirical_gain': self.empirical_gain,
            'conditional_expected_gain': self.conditional_expected_gain,
        }


def _sample_precision(x: np.ndarray) -> np.ndarray:
    """Σ̂ₙ⁻¹ con controllo di invertibilità"""
    x = np.asarray(x, dtype=float)
    n, p = x.shape
    if n <= p:
        raise NTooSmall(f"Σ̂ₙ non invertibile con n={n} ≤ p={p}")
    gram = x.T @ x / n
    check_gram(gram)
    return spd_inverse(symmetrize(gram), label="Σ̂ₙ")


def conditional_minimax_risk(x: np.ndarray, cs: ConstraintSet, sigma_sq: float) -> float:
    """
    Rischio condizionato a X: (σ²/n)·Tr(C_{A⊥}Σ̂ₙ⁻¹)

    Sotto errori gaussiani coincide con E[‖β̃ − β*‖² | X].

    Raises:
        SingularGram: se Σ̂ₙ è numericamente singolare
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if cs.p != x.shape[1]:
        raise DimensionMismatch(f"Vincoli su p={cs.p} ma il disegno ha p={x.shape[1]}")
    gram = x.T @ x / n
    check_gram(gram)
    return float(sigma_sq / n * np.trace(constrained_precision(gram, cs.a, error=SingularGram)))


def null_space_trace_risk(x: np.ndarray, cs: ConstraintSet, sigma_sq: float) -> float:
    """Stessa quantità calcolata come (σ²/n)·Tr((VᵀΣ̂ₙV)⁻¹) sulla base V del nucleo di A"""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    v = null_space_basis(cs.a) if not cs.is_empty else np.eye(x.shape[1])
    xv = x @ v
    reduced = xv.T @ xv / n
    check_gram(reduced)
    return float(sigma_sq / n * np.trace(spd_inverse(symmetrize(reduced), label="VᵀΣ̂ₙV")))


def asymptotic_risk(sigma_sq: float, sigma_matrix: np.ndarray, cs: ConstraintSet, ratios: AspectRatios,
                    n: Optional[int] = None) -> RiskReport:
    """
    Rischio asintotico: σ²/(1 − (1−γ)α) · (α/p)·Tr(Σ⁻¹ − Σ⁻¹Aᵀ(AΣ⁻¹Aᵀ)⁻¹AΣ⁻¹)

    Args:
        sigma_sq: Varianza del rumore
        sigma_matrix: Σ di popolazione
        cs: Vincoli
        ratios: Rapporti (α, γ)
        n: Numerosità, se nota abilita la forma attesa a campione finito

    Returns:
        RiskReport; isotropic_closed_form valorizzato quando Σ = I

    Raises:
        RatioOutOfRange: se (1−γ)α ≥ 1
    """
    ratios.require_moderate()
    sigma = np.asarray(sigma_matrix, dtype=float)
    p = sigma.shape[0]
    if cs.p != p:
        raise DimensionMismatch(f"Vincoli su p={cs.p} ma Σ ha dimensione {p}")

    trace = float(np.trace(constrained_precision(sigma, cs.a)))
    risk = max(sigma_sq * ratios.alpha / p * trace / ratios.correction, 0.0)

    finite = None
    if n is not None:
        dof = n - (p - cs.q) - 1
        if dof > 0:
            finite = max(sigma_sq * trace / dof, 0.0)

    closed_form = None
    if np.array_equal(sigma, np.eye(p)):
        closed_form = sigma_sq * ratios.effective / ratios.correction

    return RiskReport(finite_sample_trace_risk=finite, asymptotic_risk=risk, isotropic_closed_form=closed_form)


def expected_gain(n: int, q: int, sigma_sq: float, ratios: AspectRatios) -> float:
    """
    Guadagno atteso al primo ordine sotto isotropia: qσ²/(n(1 − α))

    Raises:
        RatioOutOfRange: se α ≥ 1
    """
    if ratios.alpha >= 1.0:
        raise RatioOutOfRange(f"Il guadagno atteso richiede α < 1: α={ratios.alpha}")
    if q == 0:
        return 0.0
    return q * sigma_sq / (n * (1.0 - ratios.alpha))


def gain_eigen_weights(x: np.ndarray, cs: ConstraintSet) -> np.ndarray:
    """
    Pesi wᵢ della miscela Σwᵢχ²₁ per n·G_n/σ² dato X

    Sono gli autovalori non nulli di (1/n)·XΣ̂ₙ⁻¹P_AΣ̂ₙ⁻¹Xᵀ (ordinati in modo decrescente),
    con somma Tr(P_AΣ̂ₙ⁻¹).

    Args:
        x: Disegno n × p con n > p
        cs: Vincoli con q ≥ 1

    Returns:
        Vettore di lunghezza q
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if cs.is_empty:
        return np.zeros(0)
    precision = _sample_precision(x)
    q_basis = row_space_basis(cs.a)
    sandwich = x @ precision @ q_basis
    eigenvalues = np.linalg.eigvalsh(symmetrize(sandwich @ sandwich.T / n))[::-1]

    weights = eigenvalues[:cs.q]
    rest = eigenvalues[cs.q:]
    if rest.size and weights[0] > 0 and np.max(np.abs(rest)) > EIGEN_CUTOFF * weights[0]:
        logger.warning(f"Autovalori residui non trascurabili: {np.max(np.abs(rest)):.3e}")
    return np.maximum(weights, 0.0)


def deterministic_gain_weights(sigma_matrix: np.ndarray, cs: ConstraintSet, ratios: AspectRatios) -> np.ndarray:
    """Pesi del guadagno con Σ̂ₙ⁻¹ sostituita dal suo equivalente deterministico Σ⁻¹/(1 − α)"""
    if ratios.alpha >= 1.0:
        raise RatioOutOfRange(f"Equivalente deterministico definito solo per α < 1: α={ratios.alpha}")
    if cs.is_empty:
        return np.zeros(0)
    q_basis = row_space_basis(cs.a)
    factor = cholesky(np.asarray(sigma_matrix, dtype=float), label="Σ")
    reduced = symmetrize(q_basis.T @ cho_solve(factor, q_basis)) / (1.0 - ratios.alpha)
    return np.maximum(np.linalg.eigvalsh(reduced)[::-1], 0.0)


def conditional_expected_gain(x: np.ndarray, cs: ConstraintSet, sigma_sq: float) -> float:
    """E[G_n | X] = (σ²/n)·Tr(P_AΣ̂ₙ⁻¹)"""
    x = np.asarray(x, dtype=float)
    if cs.is_empty:
        return 0.0
    precision = _sample_precision(x)
    q_basis = row_space_basis(cs.a)
    return float(sigma_sq / x.shape[0] * np.trace(q_basis.T @ precision @ q_basis))


class TheoryParams(BaseModel):
    """Parametri del comando theory"""

    n: int = Field(gt=0)
    p: int = Field(gt=0)
    q: int = Field(ge=0)
    sigma_sq: float = Field(ge=0)
    covariance: Dict[str, Any] = Field(default_factory=lambda: {'variant': 'isotropic'})
    a_csv: Optional[str] = None
    c_csv: Optional[str] = None
    x_csv: Optional[str] = None

    @model_validator(mode='after')
    def _paired_constraints(self) -> 'TheoryParams':
        if (self.a_csv is None) != (self.c_csv is None):
            raise ValueError("a_csv e c_csv devono essere entrambi presenti o entrambi assenti")
        return self


def parse_theory_params(data: Dict[str, Any]) -> TheoryParams:
    try:
        return TheoryParams.model_validate(data)
    except ValidationError as e:
        raise ConfigInvalid(f"Parametri theory non validi: {e.errors()[0]['msg']}") from e


class TheoryService:
    """Valuta le formule chiuse di rischio e guadagno a partire da un file di parametri"""

    def __init__(self, config: Dict[str, Any], file_service=None):
        """
        Inizializza il servizio teorico

        Args:
            config: Configurazione completa
            file_service: FileService per leggere i CSV referenziati dai parametri
        """
        self.config = config
        self.rank_tol = float(config.get('numerics', {}).get('rank_tol', 1e-10))
        self.file_service = file_service
        logger.info("TheoryService inizializzato")

    def _resolve(self, path: str, base_dir: Optional[Path]) -> Path:
        resolved = Path(path)
        if not resolved.is_absolute() and base_dir is not None:
            resolved = base_dir / resolved
        return resolved

    def build_constraints(self, params: TheoryParams, sigma: np.ndarray,
                          base_dir: Optional[Path] = None) -> ConstraintSet:
        """Vincoli dai CSV, oppure l'analogo di popolazione A = [I_q : 0]·Σ, c = 0"""
        if params.a_csv is not None:
            a = self.file_service.read_matrix(self._resolve(params.a_csv, base_dir))
            c = self.file_service.read_vector(self._resolve(params.c_csv, base_dir))
            return validate_constraints(a, c, self.rank_tol)
        if params.q == 0:
            return ConstraintSet.empty(params.p)
        return validate_constraints(selection_matrix(params.q, params.p) @ sigma, np.zeros(params.q), self.rank_tol)

    def report(self, params: TheoryParams, base_dir: Optional[Path] = None) -> Dict[str, Any]:
        """
        Calcola RiskReport e GainReport

        Args:
            params: Parametri validati
            base_dir: Directory rispetto a cui risolvere i percorsi relativi

        Returns:
            Dizionario serializzabile in JSON
        """
        spec = CovarianceSpec.from_dict(params.covariance, p=params.p)
        if spec.p != params.p:
            raise DimensionMismatch(f"Covarianza di dimensione {spec.p}, attesa {params.p}")
        sigma = realize_covariance(spec)
        cs = self.build_constraints(params, sigma, base_dir)
        if cs.q != params.q:
            raise DimensionMismatch(f"Vincoli con q={cs.q}, attesi q={params.q}")
        ratios = AspectRatios.from_dims(params.n, params.p, params.q)

        risk = asymptotic_risk(params.sigma_sq, sigma, cs, ratios, n=params.n)
        # guadagno definito solo per α < 1
        has_gain = ratios.alpha < 1.0
        gain = expected_gain(params.n, params.q, params.sigma_sq, ratios) if has_gain else None

        if params.x_csv is not None:
            x = self.file_service.read_matrix(self._resolve(params.x_csv, base_dir))
            if x.shape != (params.n, params.p):
                raise DimensionMismatch(f"X di forma {x.shape}, attesa ({params.n}, {params.p})")
            risk = RiskReport(
                finite_sample_trace_risk=conditional_minimax_risk(x, cs, params.sigma_sq),
                asymptotic_risk=risk.asymptotic_risk,
                isotropic_closed_form=risk.isotropic_closed_form,
            )
            if has_gain:
                gain_report = GainReport(
                    expected_gain=gain,
                    eigen_weights=gain_eigen_weights(x, cs),
                    conditional_expected_gain=conditional_expected_gain(x, cs, params.sigma_sq),
                )
            else:
                gain_report = GainReport(expected_gain=None)
        elif has_gain:
            gain_report = GainReport(expected_gain=gain, eigen_weights=deterministic_gain_weights(sigma, cs, ratios))
        else:
            gain_report = GainReport(expected_gain=None)

        logger.info(f"Report teorico - n={params.n}, p={params.p}, q={params.q}, rischio {risk.asymptotic_risk:.6g}")
        return {
            'n': params.n,
            'p': params.p,
            'q': params.q,
            'sigma_sq': params.sigma_sq,
            'alpha': ratios.alpha,
            'gamma': ratios.gamma,
            'risk': risk.to_dict(),
            'gain': gain_report.to_dict(),
            'asymptotic_risk': risk.asymptotic_risk,
            'expected_gain': gain,
        }


def gain_from_dataset(data: Dataset, cs: ConstraintSet, beta_star: np.ndarray) -> float:
    """G_n = ‖β̂_LS − β*‖² − ‖β̂_P − β*‖² su un singolo campione"""
    beta_ls = fit_ols(data).beta_hat
    beta_p, _ = project_estimate(beta_ls, cs)
    return float(np.sum((beta_ls - beta_star) ** 2) - np.sum((beta_p - beta_star) ** 2))
