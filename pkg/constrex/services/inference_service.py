"""
Servizio di inferenza: varianze asintotiche, jackknife corretto, intervalli e test multipli
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats
from scipy.linalg import solve_triangular

from constrex.estimators import create_estimator, estimator_config, fit_cls, orthogonal_projector
from constrex.estimators.least_squares import _qr_least_squares
from constrex.exceptions import (
    DimensionMismatch,
    InputError,
    LevelOutOfRange,
    NegativeVariance,
    NTooSmall,
    ProbabilityOutOfRange,
    RankDeficient,
    SingularGram,
)
from constrex.linalg import CONDITION_CAP, cho_solve, cholesky, constrained_precision, spd_inverse
from constrex.models.domain import (
    AspectRatios,
    ConstraintSet,
    Dataset,
    EstimateResult,
    EstimatorKind,
)

logger = logging.getLogger(__name__)

INFERENCE_COLUMNS = ['index', 'estimate', 'std_error', 'ci_low', 'ci_high', 'p_value', 'p_adjusted', 'rejected']
JACKKNIFE_METHODS = ('sherman_morrison', 'refit')


class VarianceKind(str, Enum):
    CLS_ASYMPTOTIC = "cls_asymptotic"
    OLS_ASYMPTOTIC = "ols_asymptotic"
    JACKKNIFE_CORRECTED = "jackknife_corrected"
    PROJECTED_ORACLE_ASYMPTOTIC = "projected_oracle_asymptotic"


@dataclass(frozen=True)
class VarianceModel:
    """
    Varianze per coordinata sulla scala √n: per_coordinate[j] è la varianza di √n(β̂ⱼ − β*ⱼ)

    raw_per_coordinate è valorizzato solo per il jackknife (valore prima della correzione).
    """

    kind: VarianceKind
    per_coordinate: np.ndarray
    raw_per_coordinate: Optional[np.ndarray] = None
    approximate: bool = False

    def __post_init__(self):
        per = np.array(self.per_coordinate, dtype=float)
        if per.ndim != 1 or np.any(per < 0) or not np.all(np.isfinite(per)):
            raise NegativeVariance("Varianze per coordinata negative o non finite")
        per.setflags(write=False)
        object.__setattr__(self, 'per_coordinate', per)
        object.__setattr__(self, 'kind', VarianceKind(self.kind))

    def standard_errors(self, n: int) -> np.ndarray:
        return np.sqrt(self.per_coordinate / n)


@dataclass(frozen=True)
class CoordinateInference:
    index: int
    estimate: float
    std_error: float
    ci_low: float
    ci_high: float
    p_value: float
    p_adjusted: float
    rejected: bool


@dataclass(frozen=True)
class ContrastInference:
    contrast: np.ndarray
    estimate: float
    std_error: float
    ci_low: float
    ci_high: float
    p_value: float


@dataclass(frozen=True)
class InferenceReport:
    """Risultato completo di InferenceService.infer"""

    estimate: EstimateResult
    variance: VarianceModel
    table: List[CoordinateInference]
    sigma_sq: Optional[float]
    level: float

    def to_frame(self) -> pd.DataFrame:
        return inference_frame(self.table)


def _check_level(level: float):
    if not (0.0 < level < 1.0):
        raise LevelOutOfRange(f"Livello {level} fuori da (0, 1)")


def _check_sigma_sq(sigma_sq: float):
    if not np.isfinite(sigma_sq) or sigma_sq < 0:
        raise NegativeVariance(f"σ² non valido: {sigma_sq}")


# ---------------------------------------------------------------------------
# Varianze asintotiche
# ---------------------------------------------------------------------------

def cls_asymptotic_variance(sigma_sq: float, sigma_matrix: np.ndarray, cs: ConstraintSet,
                            ratios: AspectRatios) -> VarianceModel:
    """
    Varianza di √n(β̃ⱼ − β*ⱼ): σ²·s_{C,j} / (1 − (1−γ)α)

    Args:
        sigma_sq: Varianza del rumore
        sigma_matrix: Σ di popolazione
        cs: Vincoli
        ratios: Rapporti (α, γ)

    Returns:
        VarianceModel di tipo ClsAsymptotic

    Raises:
        RatioOutOfRange: se (1−γ)α ≥ 1
    """
    _check_sigma_sq(sigma_sq)
    ratios.require_moderate()
    s_c = np.clip(np.diag(constrained_precision(np.asarray(sigma_matrix, dtype=float), cs.a)), 0.0, None)
    return VarianceModel(VarianceKind.CLS_ASYMPTOTIC, sigma_sq * s_c / ratios.correction)


def ols_asymptotic_variance(sigma_sq: float, sigma_matrix: np.ndarray, ratios: AspectRatios) -> VarianceModel:
    """Varianza OLS nel regime proporzionale: σ²·diag(Σ⁻¹) / (1 − α)"""
    _check_sigma_sq(sigma_sq)
    unconstrained = AspectRatios(alpha=ratios.alpha, gamma=0.0).require_moderate()
    diag = np.clip(np.diag(spd_inverse(np.asarray(sigma_matrix, dtype=float), label="Σ")), 0.0, None)
    return VarianceModel(VarianceKind.OLS_ASYMPTOTIC, sigma_sq * diag / unconstrained.correction)


def cls_contrast_variance(v: np.ndarray, sigma_sq: float, sigma_matrix: np.ndarray, cs: ConstraintSet,
                          ratios: AspectRatios) -> float:
    """Varianza di √n·vᵀ(β̃ − β*) per un contrasto normalizzato v"""
    _check_sigma_sq(sigma_sq)
    ratios.require_moderate()
    v = unit_contrast(v, cs.p)
    s_c = constrained_precision(np.asarray(sigma_matrix, dtype=float), cs.a)
    return float(max(sigma_sq * (v @ s_c @ v), 0.0) / ratios.correction)


def projected_oracle_variance(beta_star: np.ndarray, sigma_sq: float, sigma_matrix: np.ndarray,
                              cs: ConstraintSet, plug_in: bool = False,
                              projected_signal: bool = False) -> VarianceModel:
    """
    Varianza di √n(β̂_{Σ,P,j} − β*ⱼ): (β*ⱼ)² + (σ² + β*ᵀΣβ*)·s_{P,j}

    Args:
        beta_star: β* (oppure la stima, in modalità plug-in)
        sigma_sq: Varianza del rumore
        sigma_matrix: Σ di popolazione
        cs: Vincoli
        plug_in: Segna il modello come approssimato
        projected_signal: Usa (P_{A⊥}β*)ⱼ² al posto di (β*ⱼ)²

    Returns:
        VarianceModel di tipo ProjectedOracleAsymptotic
    """
    _check_sigma_sq(sigma_sq)
    sigma = np.asarray(sigma_matrix, dtype=float)
    beta_star = np.asarray(beta_star, dtype=float)
    if beta_star.shape != (sigma.shape[0],):
        raise DimensionMismatch(f"β* di forma {beta_star.shape} con Σ {sigma.shape}")
    sigma_inv = spd_inverse(sigma, label="Σ")
    p_orth = orthogonal_projector(cs).p_orth
    s_p = np.clip(np.einsum('ij,jk,ki->i', p_orth, sigma_inv, p_orth), 0.0, None)
    signal = float(beta_star @ sigma @ beta_star)
    coordinate_signal = (p_orth @ beta_star) ** 2 if projected_signal else beta_star ** 2
    return VarianceModel(VarianceKind.PROJECTED_ORACLE_ASYMPTOTIC,
                         coordinate_signal + (sigma_sq + signal) * s_p,
                         approximate=plug_in)


# ---------------------------------------------------------------------------
# Jackknife
# ---------------------------------------------------------------------------

def _leave_one_out_sherman_morrison(data: Dataset, cs: ConstraintSet,
                                    condition_cap: float = CONDITION_CAP) -> np.ndarray:
    """
    Stime CLS leave-one-out tramite aggiornamenti di rango uno di (XᵀX)⁻¹ e di AG⁻¹Aᵀ

    Returns:
        Matrice n × p con la stima senza l'osservazione i nella riga i
    """
    x, y = data.x, data.y
    beta_ls, r, _ = _qr_least_squares(data, condition_cap)

    def gram_solve(rhs: np.ndarray) -> np.ndarray:
        return solve_triangular(r, solve_triangular(r, rhs, trans='T'))

    u = gram_solve(x.T)
    leverage = np.einsum('ij,ji->i', x, u)
    d = 1.0 - leverage
    if np.any(d <= 1e-12):
        raise SingularGram("Matrice di Gram leave-one-out singolare (leva pari a 1)")
    scaled_residuals = (y - x @ beta_ls) / d
    beta_loo = beta_ls[:, None] - u * scaled_residuals

    if cs.is_empty:
        return beta_loo.T

    b = gram_solve(cs.a.T)
    k_factor = cholesky(cs.a @ b, error=RankDeficient, label="AG⁻¹Aᵀ")
    a_cols = cs.a @ u
    residuals = cs.a @ beta_loo - cs.c[:, None]
    k_a = cho_solve(k_factor, a_cols)
    k_r = cho_solve(k_factor, residuals)
    lam = k_r - k_a * (np.sum(a_cols * k_r, axis=0) / (d + np.sum(a_cols * k_a, axis=0)))
    correction = b @ lam + u * (np.sum(a_cols * lam, axis=0) / d)
    return (beta_loo - correction).T


def _leave_one_out_refit(data: Dataset, cs: ConstraintSet, workers: int = 1,
                         condition_cap: float = CONDITION_CAP) -> np.ndarray:
    def refit(i: int) -> np.ndarray:
        return fit_cls(data.without_row(i), cs, condition_cap=condition_cap).beta_hat

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(refit, range(data.n)))
    else:
        rows = [refit(i) for i in range(data.n)]
    return np.vstack(rows)


def jackknife_replicates(data: Dataset, cs: ConstraintSet, method: str = 'sherman_morrison',
                         workers: int = 1, condition_cap: float = CONDITION_CAP) -> Tuple[np.ndarray, np.ndarray]:
    """
    Stima CLS completa e repliche leave-one-out

    Returns:
        (β̃, matrice n × p delle repliche)
    """
    if data.n <= data.p + 1:
        raise NTooSmall(f"Il jackknife richiede n > p + 1: n={data.n}, p={data.p}")
    if method not in JACKKNIFE_METHODS:
        raise InputError(f"Metodo jackknife non supportato: {method}")
    full = fit_cls(data, cs, condition_cap=condition_cap).beta_hat
    if method == 'sherman_morrison':
        replicates = _leave_one_out_sherman_morrison(data, cs, condition_cap)
    else:
        replicates = _leave_one_out_refit(data, cs, workers, condition_cap)
    return full, replicates


def jackknife_variance(data: Dataset, cs: ConstraintSet, ratios: AspectRatios,
                       method: str = 'sherman_morrison', workers: int = 1,
                       condition_cap: float = CONDITION_CAP) -> VarianceModel:
    """
    Varianza jackknife di β̃ corretta per il fattore 1 − (1−γ)α

    Il jackknife grezzo sovrastima Var(β̃ⱼ) di 1/(1 − (1−γ)α) nel regime proporzionale.
    Entrambe le versioni sono restituite sulla scala √n (moltiplicate per n).

    Args:
        data: Campione con n > p + 1
        cs: Vincoli
        ratios: Rapporti (α, γ)
        method: 'sherman_morrison' (default) oppure 'refit'
        workers: Thread per la modalità refit

    Returns:
        VarianceModel di tipo JackknifeCorrected
    """
    ratios.require_moderate()
    full, replicates = jackknife_replicates(data, cs, method, workers, condition_cap)
    n = data.n
    raw = (n - 1) / n * np.sum((replicates - full) ** 2, axis=0)
    corrected = raw * ratios.correction
    logger.debug(f"Jackknife ({method}) - fattore di correzione {ratios.correction:.4f}")
    return VarianceModel(VarianceKind.JACKKNIFE_CORRECTED, n * corrected, raw_per_coordinate=n * raw)


def jackknife_contrast_variance(data: Dataset, cs: ConstraintSet, ratios: AspectRatios, v: np.ndarray,
                                method: str = 'sherman_morrison') -> float:
    """Varianza jackknife corretta di √n·vᵀβ̃ per un contrasto normalizzato v"""
    ratios.require_moderate()
    v = unit_contrast(v, data.p)
    full, replicates = jackknife_replicates(data, cs, method)
    n = data.n
    raw = (n - 1) / n * np.sum((replicates @ v - full @ v) ** 2)
    return float(n * raw * ratios.correction)


# ---------------------------------------------------------------------------
# Intervalli, p-value e correzione di Holm
# ---------------------------------------------------------------------------

def holm_bonferroni(p_values: Any, level: float = 0.05) -> Tuple[np.ndarray, np.ndarray]:
    """
    Procedura step-down di Holm–Bonferroni

    Si rifiuta p_(k) finché p_(k) < level/(m−k+1) (confronto stretto). I p-value corretti
    sono i massimi cumulati di (m−k+1)·p_(k), troncati a 1.

    Args:
        p_values: Vettore di p-value in [0, 1]
        level: Livello di controllo del FWER

    Returns:
        (p-value corretti, maschera dei rifiuti) nell'ordine originale
    """
    _check_level(level)
    p = np.asarray(p_values, dtype=float).ravel()
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise ProbabilityOutOfRange("p-value fuori da [0, 1]")
    m = p.size
    if m == 0:
        return np.zeros(0), np.zeros(0, dtype=bool)

    order = np.argsort(p, kind='stable')
    sorted_p = p[order]
    multipliers = m - np.arange(m)
    adjusted_sorted = np.minimum(1.0, np.maximum.accumulate(multipliers * sorted_p))
    passes = sorted_p < level / multipliers
    n_rejected = m if passes.all() else int(np.argmin(passes))

    adjusted = np.empty(m)
    adjusted[order] = adjusted_sorted
    rejected = np.zeros(m, dtype=bool)
    rejected[order[:n_rejected]] = True
    return adjusted, rejected


def _normal_summary(estimate: float, std_error: float, z: float) -> Tuple[float, float, float]:
    if std_error > 0:
        p_value = float(2.0 * stats.norm.sf(abs(estimate) / std_error))
    else:
        p_value = 0.0 if estimate != 0 else 1.0
    return estimate - z * std_error, estimate + z * std_error, p_value


def coordinate_inference(est: EstimateResult, vm: VarianceModel, n: int,
                         level: float = 0.05) -> List[CoordinateInference]:
    """
    Intervalli normali e test di H₀: β*ⱼ = 0 per coordinata, con correzione di Holm

    Args:
        est: Stima puntuale
        vm: Modello di varianza sulla scala √n
        n: Numerosità campionaria
        level: Livello (CI al 1 − level)

    Returns:
        Lista di CoordinateInference
    """
    _check_level(level)
    if vm.per_coordinate.shape != est.beta_hat.shape:
        raise DimensionMismatch(
            f"Varianze di lunghezza {vm.per_coordinate.shape[0]} per una stima di lunghezza {est.p}"
        )
    z = float(stats.norm.ppf(1.0 - level / 2.0))
    std_errors = vm.standard_errors(n)

    summaries = [_normal_summary(float(b), float(se), z) for b, se in zip(est.beta_hat, std_errors)]
    adjusted, rejected = holm_bonferroni([s[2] for s in summaries], level)

    return [
        CoordinateInference(
            index=j,
            estimate=float(est.beta_hat[j]),
            std_error=float(std_errors[j]),
            ci_low=summaries[j][0],
            ci_high=summaries[j][1],
            p_value=summaries[j][2],
            p_adjusted=float(adjusted[j]),
            rejected=bool(rejected[j]),
        )
        for j in range(est.p)
    ]


def unit_contrast(v: Any, p: int) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    if v.shape != (p,):
        raise DimensionMismatch(f"Contrasto di lunghezza {v.shape[0]}, atteso {p}")
    norm = np.linalg.norm(v)
    if norm == 0 or not np.isfinite(norm):
        raise InputError("Contrasto nullo o non finito")
    return v / norm


def contrast_inference(v: Any, beta_hat: np.ndarray, variance: float, n: int,
                       level: float = 0.05) -> ContrastInference:
    """
    Intervallo e test per un contrasto normalizzato vᵀβ

    Args:
        v: Contrasto (normalizzato internamente)
        beta_hat: Stima
        variance: Varianza di √n·vᵀβ̂ (vedi cls_contrast_variance, jackknife_contrast_variance)
        n: Numerosità campionaria
        level: Livello
    """
    _check_level(level)
    _check_sigma_sq(variance)
    v = unit_contrast(v, len(beta_hat))
    estimate = float(v @ beta_hat)
    std_error = float(np.sqrt(variance / n))
    z = float(stats.norm.ppf(1.0 - level / 2.0))
    ci_low, ci_high, p_value = _normal_summary(estimate, std_error, z)
    return ContrastInference(contrast=v, estimate=estimate, std_error=std_error,
                             ci_low=ci_low, ci_high=ci_high, p_value=p_value)


def estimate_noise_variance(data: Dataset, beta_hat: np.ndarray, q: int) -> float:
    """σ̂² = ‖y − Xβ̂‖² / (n − (p − q))"""
    df = data.n - (data.p - q)
    if df <= 0:
        raise NTooSmall(f"Gradi di libertà non positivi: n − (p − q) = {df}")
    residuals = data.y - data.x @ beta_hat
    return float(residuals @ residuals / df)


def inference_frame(table: List[CoordinateInference]) -> pd.DataFrame:
    """Tabella di inferenza con lo schema di colonne stabile"""
    return pd.DataFrame(
        [[row.index, row.estimate, row.std_error, row.ci_low, row.ci_high,
          row.p_value, row.p_adjusted, row.rejected] for row in table],
        columns=INFERENCE_COLUMNS,
    )


class InferenceService:
    """Servizio che concatena stima, modello di varianza e tabella per coordinata"""

    SUPPORTED_KINDS = (EstimatorKind.OLS, EstimatorKind.CLS, EstimatorKind.ORACLE, EstimatorKind.PROJECTED_ORACLE)

    def __init__(self, config: Dict[str, Any]):
        """
        Inizializza il servizio di inferenza

        Args:
            config: Configurazione completa (sezioni inference e numerics)
        """
        inference_config = config.get('inference', {})
        self.level = float(inference_config.get('level', 0.05))
        self.sigma_mode = inference_config.get('sigma_mode', 'known')
        self.jackknife_method = inference_config.get('jackknife_method', 'sherman_morrison')
        self.workers = int(config.get('simulation', {}).get('threads', 1))
        self.estimator_config = estimator_config(config)
        self.condition_cap = float(self.estimator_config.get('condition_cap', CONDITION_CAP))

        logger.info(f"InferenceService inizializzato - livello {self.level}, σ² {self.sigma_mode}")

    def infer(self, data: Dataset, cs: Optional[ConstraintSet] = None, kind: Any = EstimatorKind.CLS,
              sigma_matrix: Optional[np.ndarray] = None, sigma_sq: Optional[float] = None,
              variance: str = 'asymptotic', level: Optional[float] = None) -> InferenceReport:
        """
        Esegue stima e inferenza per coordinata

        Args:
            data: Campione
            cs: Vincoli (None = nessun vincolo)
            kind: ols, cls, oracle o projected_oracle
            sigma_matrix: Σ di popolazione (richiesta dalle varianze asintotiche)
            sigma_sq: σ² nota; se assente viene stimata con df = n − (p − q)
            variance: 'asymptotic' oppure 'jackknife'
            level: Livello (default da configurazione)

        Returns:
            InferenceReport
        """
        kind = EstimatorKind(kind)
        level = self.level if level is None else float(level)
        _check_level(level)
        if kind not in self.SUPPORTED_KINDS:
            raise InputError(f"Inferenza non disponibile per lo stimatore {kind.value}")
        if variance not in ('asymptotic', 'jackknife'):
            raise InputError(f"Modello di varianza non supportato: {variance}")

        cs = cs if cs is not None else ConstraintSet.empty(data.p)
        if kind in (EstimatorKind.OLS, EstimatorKind.ORACLE):
            cs = ConstraintSet.empty(data.p)

        estimate = create_estimator(kind, self.estimator_config).fit(data, cs, sigma_matrix)

        if sigma_sq is None or self.sigma_mode == 'estimated':
            sigma_sq = estimate_noise_variance(data, estimate.beta_hat, cs.q)
            logger.info(f"σ² stimata: {sigma_sq:.6g}")

        ratios = AspectRatios.from_dims(data.n, data.p, cs.q)

        if variance == 'jackknife':
            if kind not in (EstimatorKind.OLS, EstimatorKind.CLS):
                raise InputError("Il jackknife è disponibile solo per OLS e CLS")
            vm = jackknife_variance(data, cs, ratios, method=self.jackknife_method,
                                    workers=self.workers, condition_cap=self.condition_cap)
        else:
            if sigma_matrix is None:
                raise InputError("Le varianze asintotiche richiedono Σ; con sola Σ̂ₙ usare il jackknife")
            if kind is EstimatorKind.CLS:
                vm = cls_asymptotic_variance(sigma_sq, sigma_matrix, cs, ratios)
            elif kind is EstimatorKind.OLS:
                vm = ols_asymptotic_variance(sigma_sq, sigma_matrix, ratios)
            else:
                vm = projected_oracle_variance(estimate.beta_hat, sigma_sq, sigma_matrix, cs, plug_in=True)

        table = coordinate_inference(estimate, vm, data.n, level)
        n_rejected = sum(row.rejected for row in table)
        logger.info(f"Inferenza {kind.value}/{vm.kind.value} completata - {n_rejected} coordinate significative")
        return InferenceReport(estimate=estimate, variance=vm, table=table, sigma_sq=sigma_sq, level=level)
