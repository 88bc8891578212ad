"""
Classe base per tutti gli stimatori
"""

import logging
import threading
from abc import ABC, abstractmethod
from datetime import datetime
from typing import Any, Dict, List, Optional

import numpy as np

from constrex.models.domain import ConstraintSet, Dataset, EstimateResult, EstimatorKind

logger = logging.getLogger(__name__)


class BaseEstimator(ABC):
    """Classe base astratta: configurazione, dispatch e statistiche d'uso"""

    kind: EstimatorKind

    def __init__(self, name: str, config: Dict[str, Any]):
        """
        Inizializza lo stimatore base

        Args:
            name: Nome dello stimatore
            config: Configurazione numerica (rank_tol, condition_cap, ...)
        """
        self.name = name
        self.config = dict(config)
        self.enabled = self.config.get('enabled', True)
        self.condition_cap = float(self.config.get('condition_cap', 1e12))
        self.rank_tol = float(self.config.get('rank_tol', 1e-10))
        self.feasibility_tol = float(self.config.get('feasibility_tol', 1e-8))

        self._lock = threading.Lock()
        self.stats = self._empty_stats()

        logger.info(f"Stimatore {self.name} inizializzato - Enabled: {self.enabled}")

    @staticmethod
    def _empty_stats() -> Dict[str, Any]:
        return {
            'fits_processed': 0,
            'total_processing_time': 0.0,
            'last_used': None,
            'errors': 0
        }

    @abstractmethod
    def fit(self, data: Dataset, cs: Optional[ConstraintSet] = None,
            sigma_matrix: Optional[np.ndarray] = None) -> EstimateResult:
        """
        Stima β sui dati

        Args:
            data: Campione target
            cs: Vincoli (ignorati dagli stimatori non vincolati)
            sigma_matrix: Σ di popolazione per gli stimatori oracolo

        Returns:
            EstimateResult
        """

    @abstractmethod
    def get_capabilities(self) -> List[str]:
        """
        Restituisce i requisiti e le proprietà dello stimatore

        Returns:
            Lista di etichette (ad es. 'constraints', 'sigma_matrix', 'p_ge_n')
        """

    def can_handle(self, n: int, p: int) -> bool:
        """True se lo stimatore è applicabile alle dimensioni (n, p)"""
        if not self.enabled:
            return False
        return 'p_ge_n' in self.get_capabilities() or n > p

    def execute_with_stats(self, func, *args, **kwargs):
        """
        Esegue una funzione tracciando le statistiche

        Args:
            func: Funzione da eseguire
            *args: Argomenti posizionali
            **kwargs: Argomenti nominali

        Returns:
            Risultato della funzione
        """
        start_time = datetime.now()

        try:
            result = func(*args, **kwargs)
        except Exception as e:
            with self._lock:
                self.stats['errors'] += 1
            logger.debug(f"Errore nello stimatore {self.name}: {e}")
            raise

        processing_time = (datetime.now() - start_time).total_seconds()
        with self._lock:
            self.stats['fits_processed'] += 1
            self.stats['last_used'] = start_time
            self.stats['total_processing_time'] += processing_time

        self._check_feasibility(result)
        logger.debug(f"Stimatore {self.name} - stima completata in {processing_time:.4f}s")
        return result

    def _check_feasibility(self, result: EstimateResult):
        residual = result.feasibility_residual
        if residual is None:
            return
        scale = max(1.0, float(np.max(np.abs(result.beta_hat))))
        if residual > self.feasibility_tol * scale:
            logger.warning(f"Stimatore {self.name}: residuo dei vincoli {residual:.3e} oltre la tolleranza")

    @staticmethod
    def _require_constraints(data: Dataset, cs: Optional[ConstraintSet]) -> ConstraintSet:
        return cs if cs is not None else ConstraintSet.empty(data.p)

    def get_stats(self) -> Dict[str, Any]:
        """
        Restituisce le statistiche dello stimatore

        Returns:
            Dizionario con le statistiche
        """
        with self._lock:
            stats = dict(self.stats)

        avg_processing_time = 0.0
        if stats['fits_processed'] > 0:
            avg_processing_time = stats['total_processing_time'] / stats['fits_processed']

        return {
            'name': self.name,
            'kind': self.kind.value,
            'enabled': self.enabled,
            'capabilities': self.get_capabilities(),
            'fits_processed': stats['fits_processed'],
            'total_processing_time': stats['total_processing_time'],
            'average_processing_time': avg_processing_time,
            'last_used': stats['last_used'].isoformat() if stats['last_used'] else None,
            'errors': stats['errors'],
        }

    def reset_stats(self):
        """Resetta le statistiche dello stimatore"""
        with self._lock:
            self.stats = self._empty_stats()
        logger.info(f"Statistiche dello stimatore {self.name} resettate")

    def __str__(self):
        return f"Estimator({self.name}, kind={self.kind.value}, enabled={self.enabled})"

    def __repr__(self):
        return self.__str__()
