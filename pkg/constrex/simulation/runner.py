"""
Esecuzione degli scenari Monte Carlo e aggregazione dei risultati
"""

import logging
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from scipy import stats
from tqdm import tqdm

from constrex.estimators import create_estimator, estimator_config
from constrex.exceptions import ConstrexError
from constrex.models.domain import AspectRatios, ConstraintSet, EstimatorKind
from constrex.services.inference_service import (
    cls_asymptotic_variance,
    ols_asymptotic_variance,
    projected_oracle_variance,
)
from constrex.services.theory_service import conditional_minimax_risk
from constrex.simulation.scenario import ScenarioConfig, generate_iteration, population_covariance

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    'scenario', 'n', 'p', 'q', 'estimator', 'mse_mean', 'mse_sd', 'pred_mse_mean',
    'gain_mean', 'gain_sd', 'coverage_rate', 'ks_stat', 'iters_ok', 'iters_skipped',
]


@dataclass
class EstimatorStats:
    estimator: str
    mse_mean: float = np.nan
    mse_sd: float = np.nan
    pred_mse_mean: float = np.nan
    gain_mean: float = np.nan
    gain_sd: float = np.nan
    coverage_rate: float = np.nan
    ks_stat: float = np.nan
    coord1_error_mean: float = np.nan
    coord1_error_sd: float = np.nan


@dataclass
class McReport:
    """Risultati aggregati di un punto di griglia (n, p, q)"""

    scenario: str
    n: int
    p: int
    q: int
    iterations_completed: int
    iterations_skipped: int
    estimators: Dict[str, EstimatorStats]
    skip_reasons: Dict[str, int] = field(default_factory=dict)
    conditional_risk_mean: float = np.nan
    conditional_risk_sd: float = np.nan

    def summary(self) -> Dict[str, Any]:
        return {
            'n': self.n,
            'p': self.p,
            'q': self.q,
            'iters_ok': self.iterations_completed,
            'iters_skipped': self.iterations_skipped,
            'skip_reasons': dict(self.skip_reasons),
            'conditional_risk_mean': _json_float(self.conditional_risk_mean),
            'conditional_risk_sd': _json_float(self.conditional_risk_sd),
            'coord1_error': {
                name: {'mean': _json_float(s.coord1_error_mean), 'sd': _json_float(s.coord1_error_sd)}
                for name, s in self.estimators.items()
            },
        }


@dataclass
class _IterationOutcome:
    ok: bool
    reason: Optional[str] = None
    sq_errors: Dict[str, float] = field(default_factory=dict)
    pred_mse: Dict[str, float] = field(default_factory=dict)
    coord1_errors: Dict[str, float] = field(default_factory=dict)
    z_scores: Dict[str, float] = field(default_factory=dict)
    gain: Optional[float] = None
    conditional_risk: Optional[float] = None


def _json_float(value: float) -> Optional[float]:
    return None if value is None or not np.isfinite(value) else float(value)


def _mean_sd(values: List[float]):
    if not values:
        return np.nan, np.nan
    array = np.asarray(values, dtype=float)
    return float(np.mean(array)), float(np.std(array, ddof=1)) if array.size > 1 else np.nan


class ScenarioRunner:
    """Esegue uno scenario punto per punto, con iterazioni eventualmente parallele"""

    def __init__(self, cfg: ScenarioConfig, config: Optional[Dict[str, Any]] = None,
                 workers: int = 1, progress: bool = False):
        """
        Inizializza il runner

        Args:
            cfg: Scenario validato
            config: Configurazione applicativa (sezioni numerics, highdim)
            workers: Thread per le iterazioni
            progress: Mostra una barra tqdm
        """
        self.cfg = cfg
        self.workers = max(1, int(workers))
        self.progress = progress
        settings = estimator_config(config or {})
        settings.update(cfg.estimator_settings())
        self.estimators = {kind: create_estimator(kind, settings) for kind in cfg.estimators}
        self.z_crit = float(stats.norm.ppf(1.0 - cfg.level / 2.0))
        self.track_gain = EstimatorKind.OLS in self.estimators and EstimatorKind.PROJECTED in self.estimators
        logger.info(f"ScenarioRunner '{cfg.name}' inizializzato - {len(cfg.grid_points())} punti, "
                    f"{cfg.iterations} iterazioni, {self.workers} thread")

    def _coordinate_variance(self, kind: EstimatorKind, sigma_matrix: np.ndarray, cs: ConstraintSet,
                             beta_star: np.ndarray, p: int) -> Optional[float]:
        """Varianza asintotica di √n(β̂₁ − β*₁), se disponibile per lo stimatore"""
        sigma_sq = self.cfg.sigma ** 2
        n = self.cfg.n
        if kind is EstimatorKind.CLS:
            ratios = AspectRatios.from_dims(n, p, cs.q)
            return float(cls_asymptotic_variance(sigma_sq, sigma_matrix, cs, ratios).per_coordinate[0])
        if kind is EstimatorKind.OLS:
            ratios = AspectRatios.from_dims(n, p, 0)
            return float(ols_asymptotic_variance(sigma_sq, sigma_matrix, ratios).per_coordinate[0])
        if kind is EstimatorKind.ORACLE:
            return float(projected_oracle_variance(beta_star, sigma_sq, sigma_matrix,
                                                   ConstraintSet.empty(p)).per_coordinate[0])
        if kind is EstimatorKind.PROJECTED_ORACLE:
            return float(projected_oracle_variance(beta_star, sigma_sq, sigma_matrix, cs).per_coordinate[0])
        return None

    def run_iteration(self, p: int, q: int, iter_index: int) -> _IterationOutcome:
        """Esegue un'iterazione; gli errori la marcano come saltata"""
        try:
            data, cs, truth, holdout = generate_iteration(self.cfg, p, q, iter_index)
            sigma_matrix, _ = population_covariance(self.cfg, p)
            beta_star = truth.beta_star
            outcome = _IterationOutcome(ok=True)
            fitted = {}

            for kind, estimator in self.estimators.items():
                beta = estimator.fit(data, cs, sigma_matrix).beta_hat
                fitted[kind] = beta
                error = beta - beta_star
                outcome.sq_errors[kind.value] = float(error @ error)
                residual = holdout.y - holdout.x @ beta
                outcome.pred_mse[kind.value] = float(np.mean(residual ** 2))
                outcome.coord1_errors[kind.value] = float(error[0])

                if self.cfg.inference:
                    variance = self._coordinate_variance(kind, sigma_matrix, cs, beta_star, p)
                    if variance is not None and variance > 0:
                        outcome.z_scores[kind.value] = float(np.sqrt(data.n) * error[0] / np.sqrt(variance))

            if self.track_gain:
                outcome.gain = (outcome.sq_errors[EstimatorKind.OLS.value]
                                - outcome.sq_errors[EstimatorKind.PROJECTED.value])
            if EstimatorKind.CLS in fitted:
                outcome.conditional_risk = conditional_minimax_risk(data.x, cs, truth.sigma_sq)
            return outcome
        except (ConstrexError, np.linalg.LinAlgError) as e:
            logger.warning(f"Iterazione {iter_index} (p={p}, q={q}) saltata: {e}")
            return _IterationOutcome(ok=False, reason=type(e).__name__)

    def _aggregate(self, p: int, q: int, outcomes: List[_IterationOutcome]) -> McReport:
        completed = [o for o in outcomes if o.ok]
        reasons = Counter(o.reason for o in outcomes if not o.ok)
        per_estimator = {}
        for kind in self.estimators:
            name = kind.value
            stats_row = EstimatorStats(estimator=name)
            if completed:
                stats_row.mse_mean, stats_row.mse_sd = _mean_sd([o.sq_errors[name] for o in completed])
                stats_row.pred_mse_mean = float(np.mean([o.pred_mse[name] for o in completed]))
                stats_row.coord1_error_mean, stats_row.coord1_error_sd = _mean_sd(
                    [o.coord1_errors[name] for o in completed]
                )
                if kind is EstimatorKind.PROJECTED and self.track_gain:
                    stats_row.gain_mean, stats_row.gain_sd = _mean_sd([o.gain for o in completed])
                z_scores = np.array([o.z_scores[name] for o in completed if name in o.z_scores])
                if z_scores.size:
                    stats_row.coverage_rate = float(np.mean(np.abs(z_scores) <= self.z_crit))
                    stats_row.ks_stat = float(stats.kstest(z_scores, 'norm').statistic)
            per_estimator[name] = stats_row

        risk_mean, risk_sd = _mean_sd([o.conditional_risk for o in completed if o.conditional_risk is not None])
        return McReport(
            scenario=self.cfg.name, n=self.cfg.n, p=p, q=q,
            iterations_completed=len(completed),
            iterations_skipped=len(outcomes) - len(completed),
            estimators=per_estimator,
            skip_reasons=dict(reasons),
            conditional_risk_mean=risk_mean,
            conditional_risk_sd=risk_sd,
        )

    def _skipped_point(self, p: int, q: int) -> McReport:
        logger.warning(f"Punto (p={p}, q={q}) saltato: q ≥ p")
        return McReport(
            scenario=self.cfg.name, n=self.cfg.n, p=p, q=q,
            iterations_completed=0,
            iterations_skipped=self.cfg.iterations,
            estimators={kind.value: EstimatorStats(estimator=kind.value) for kind in self.estimators},
            skip_reasons={'QNotLessThanP': self.cfg.iterations},
        )

    def run_point(self, p: int, q: int) -> McReport:
        if q >= p:
            return self._skipped_point(p, q)

        def work(iter_index: int) -> _IterationOutcome:
            return self.run_iteration(p, q, iter_index)

        indices = range(self.cfg.iterations)
        description = f"{self.cfg.name} p={p} q={q}"
        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as executor:
                # map restituisce i risultati nell'ordine delle iterazioni
                outcomes = list(tqdm(executor.map(work, indices), total=self.cfg.iterations,
                                     desc=description, disable=not self.progress, leave=False))
        else:
            outcomes = [work(i) for i in tqdm(indices, desc=description, disable=not self.progress, leave=False)]
        return self._aggregate(p, q, outcomes)

    def run(self) -> List[McReport]:
        """
        Esegue tutti i punti di griglia

        Returns:
            Lista di McReport nell'ordine della griglia
        """
        start_time = time.time()
        reports = [self.run_point(p, q) for p, q in self.cfg.grid_points()]
        skipped = sum(r.iterations_skipped for r in reports)
        logger.info(f"Scenario '{self.cfg.name}' completato in {time.time() - start_time:.2f}s "
                    f"({skipped} iterazioni saltate)")
        return reports


def run_scenario(cfg: ScenarioConfig, config: Optional[Dict[str, Any]] = None, workers: int = 1,
                 progress: bool = False) -> List[McReport]:
    """Esegue lo scenario e restituisce un McReport per punto di griglia"""
    return ScenarioRunner(cfg, config, workers=workers, progress=progress).run()


def reports_to_frame(reports: List[McReport]) -> pd.DataFrame:
    """Una riga per punto di griglia e stimatore, con lo schema di colonne stabile"""
    rows = []
    for report in reports:
        for name, s in report.estimators.items():
            rows.append([
                report.scenario, report.n, report.p, report.q, name,
                s.mse_mean, s.mse_sd, s.pred_mse_mean, s.gain_mean, s.gain_sd,
                s.coverage_rate, s.ks_stat, report.iterations_completed, report.iterations_skipped,
            ])
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def reports_summary(cfg: ScenarioConfig, reports: List[McReport]) -> Dict[str, Any]:
    """Riepilogo JSON con le grandezze escluse dal CSV"""
    return {
        'scenario': cfg.name,
        'seed': cfg.seed,
        'iterations': cfg.iterations,
        'points': [report.summary() for report in reports],
    }
