"""
Stimatori per Σ ignota (metodo dei momenti con polinomi di Chebyshev e U-statistiche)
e stimatore GLM proiettato
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial
from scipy import integrate, optimize
from scipy.special import expit

from constrex.exceptions import (
    DimensionMismatch,
    InputError,
    InvalidBounds,
    NegativeVariance,
    NoRoot,
    NTooSmall,
    TooLarge,
)
from constrex.estimators.base_estimator import BaseEstimator
from constrex.estimators.oracle import check_sigma_matrix
from constrex.estimators.projection import project_estimate
from constrex.linalg import cho_solve, cholesky, condition_number
from constrex.models.domain import ConstraintSet, Dataset, EstimateResult, EstimatorKind

logger = logging.getLogger(__name__)

USTAT_MAX_TERMS = 1e8
# oltre questa varianza la regola di Gauss–Hermite perde accuratezza per il legame logistico
HERMITE_MAX_VARIANCE = 4.0


# ---------------------------------------------------------------------------
# Approssimazione di Chebyshev di 1/t
# ---------------------------------------------------------------------------

def cheb_coefficients(spectral_bounds: Sequence[float], order_j: int) -> np.ndarray:
    """
    Coefficienti c₀..c_J nella base monomiale di un'approssimazione di Chebyshev di 1/t

    Il polinomio interpola 1/t nei nodi di Chebyshev di prima specie mappati su [a, b]
    e viene poi riespanso in potenze di t, così che Σ c_ℓ t^ℓ ≈ 1/t.

    Args:
        spectral_bounds: Coppia (a, b) con 0 < a < b
        order_j: Grado J ≥ 0

    Returns:
        Vettore di lunghezza J + 1
    """
    a, b = (float(v) for v in spectral_bounds)
    if not (a > 0.0 and a < b):
        raise InvalidBounds(f"Intervallo spettrale non valido: ({a}, {b})")
    if order_j < 0:
        raise InputError(f"Grado J negativo: {order_j}")

    series = Chebyshev.interpolate(np.reciprocal, deg=int(order_j), domain=[a, b])
    coefficients = series.convert(kind=Polynomial).coef
    return np.pad(coefficients, (0, int(order_j) + 1 - coefficients.shape[0]))


def cheb_sup_error(coefficients: np.ndarray, spectral_bounds: Sequence[float], grid_points: int = 1000) -> float:
    """Errore massimo di Σ c_ℓ t^ℓ rispetto a 1/t su una griglia di [a, b]"""
    a, b = spectral_bounds
    grid = np.linspace(a, b, grid_points)
    return float(np.max(np.abs(Polynomial(coefficients)(grid) - 1.0 / grid)))


@dataclass(frozen=True)
class ChebConfig:
    """Grado, intervallo spettrale e coefficienti monomiali dell'approssimazione di Σ⁻¹"""

    order_j: int
    spectral_bounds: Tuple[float, float]
    coefficients: np.ndarray

    def __post_init__(self):
        a, b = (float(v) for v in self.spectral_bounds)
        if not (a > 0.0 and a < b):
            raise InvalidBounds(f"Intervallo spettrale non valido: ({a}, {b})")
        coefficients = np.array(self.coefficients, dtype=float)
        if coefficients.shape != (self.order_j + 1,):
            raise DimensionMismatch(
                f"Attesi {self.order_j + 1} coefficienti, trovati {coefficients.shape}"
            )
        coefficients.setflags(write=False)
        object.__setattr__(self, 'spectral_bounds', (a, b))
        object.__setattr__(self, 'coefficients', coefficients)

    @classmethod
    def build(cls, spectral_bounds: Sequence[float] = (0.2, 5.0), order_j: int = 3) -> 'ChebConfig':
        return cls(order_j=int(order_j), spectral_bounds=tuple(spectral_bounds),
                   coefficients=cheb_coefficients(spectral_bounds, order_j))

    def approximation_error(self, grid_points: int = 1000) -> float:
        return cheb_sup_error(self.coefficients, self.spectral_bounds, grid_points)


# ---------------------------------------------------------------------------
# U-statistiche per enumerazione
# ---------------------------------------------------------------------------

def _check_enumeration(n: int, ell: int, max_terms: float):
    if ell < 0:
        raise InputError(f"Ordine ℓ negativo: {ell}")
    if n < ell + 1:
        raise NTooSmall(f"Servono almeno ℓ+1={ell + 1} osservazioni, trovate {n}")
    if float(n) ** (ell + 1) > max_terms:
        raise TooLarge(f"Enumerazione troppo costosa: n^(ℓ+1) = {float(n) ** (ell + 1):.3e} > {max_terms:.3e}")


def _outer_partial(x: np.ndarray, y: np.ndarray, inner: np.ndarray, ell: int, first: int) -> np.ndarray:
    """
    Somma dei termini con primo indice fissato

    Il termine per la tupla (i₁, …, i_{ℓ+1}) vale
    y_{i₁}·Π_s ⟨X_{i_s}, X_{i_{s+1}}⟩·X_{i_{ℓ+1}}.
    """
    n = x.shape[0]
    if ell == 0:
        return y[first] * x[first]

    acc = np.zeros(x.shape[1])
    others = [i for i in range(n) if i != first]
    for middle in itertools.permutations(others, ell - 1):
        chain = (first,) + middle
        weight = y[first]
        for left, right in zip(chain[:-1], chain[1:]):
            weight *= inner[left, right]
        # l'ultimo indice percorre le osservazioni non ancora usate
        free = np.ones(n, dtype=bool)
        free[list(chain)] = False
        acc += weight * (inner[chain[-1], free] @ x[free])
    return acc


def ustat_moment_vector(data: Dataset, ell: int, max_terms: float = USTAT_MAX_TERMS,
                        workers: int = 1) -> np.ndarray:
    """
    U-statistica di ordine ℓ per tutte le coordinate

    Stima senza distorsione β*ᵀΣ^{ℓ+1} mediando sulle tuple ordinate di indici distinti.
    Il lavoro è partizionato sul primo indice; le somme parziali sono ridotte in ordine fisso,
    quindi il risultato non dipende da workers.

    Args:
        data: Campione
        ell: Ordine ℓ ≥ 0
        max_terms: Limite su n^(ℓ+1)
        workers: Thread per le somme parziali

    Returns:
        Vettore di lunghezza p
    """
    n = data.n
    _check_enumeration(n, ell, max_terms)
    x, y = data.x, data.y
    inner = x @ x.T

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            partials = list(executor.map(lambda i: _outer_partial(x, y, inner, ell, i), range(n)))
    else:
        partials = [_outer_partial(x, y, inner, ell, i) for i in range(n)]

    total = np.zeros(data.p)
    for partial in partials:
        total = total + partial
    return total / math.perm(n, ell + 1)


def ustat_moment(data: Dataset, ell: int, k: int, max_terms: float = USTAT_MAX_TERMS,
                 workers: int = 1) -> float:
    """
    U-statistica β̂_k^{(ℓ)} per la coordinata k (indice da 0)
    """
    if not (0 <= k < data.p):
        raise DimensionMismatch(f"Coordinata {k} fuori da [0, {data.p})")
    return float(ustat_moment_vector(data, ell, max_terms=max_terms, workers=workers)[k])


def fit_cheb_mom(data: Dataset, cfg: ChebConfig, cs: ConstraintSet,
                 max_terms: float = USTAT_MAX_TERMS, workers: int = 1) -> EstimateResult:
    """
    Stimatore a momenti: β̂ = Σ_ℓ c_ℓ·β̂^{(ℓ)}, poi proiezione affine

    Args:
        data: Campione (anche con p ≥ n)
        cfg: Configurazione di Chebyshev
        cs: Vincoli

    Returns:
        EstimateResult di tipo ChebMom
    """
    if cs.p != data.p:
        raise DimensionMismatch(f"Vincoli su p={cs.p} ma il disegno ha p={data.p}")
    _check_enumeration(data.n, cfg.order_j, max_terms)

    beta = np.zeros(data.p)
    for ell, coefficient in enumerate(cfg.coefficients):
        beta = beta + coefficient * ustat_moment_vector(data, ell, max_terms=max_terms, workers=workers)

    projected, residual = project_estimate(beta, cs)
    return EstimateResult(
        beta_hat=projected,
        kind=EstimatorKind.CHEB_MOM,
        gram_condition=1.0,
        feasibility_residual=residual,
        diagnostics={'order_j': cfg.order_j, 'spectral_bounds': list(cfg.spectral_bounds)},
    )


# ---------------------------------------------------------------------------
# GLM
# ---------------------------------------------------------------------------

class LinkVariant(str, Enum):
    IDENTITY = "identity"
    LOGISTIC = "logistic"


@lru_cache(maxsize=8)
def _hermite_rule(nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.polynomial.hermite.hermgauss(nodes)


@dataclass(frozen=True)
class GlmLink:
    """Funzione di legame, regola di quadratura per f e parametri della ricerca di h"""

    variant: LinkVariant = LinkVariant.IDENTITY
    quadrature_nodes: int = 64
    t_max: float = 1e6
    root_xtol: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, 'variant', LinkVariant(self.variant))
        if self.quadrature_nodes < 1:
            raise InputError(f"Numero di nodi di quadratura non valido: {self.quadrature_nodes}")

    @classmethod
    def logistic(cls, **kwargs) -> 'GlmLink':
        return cls(LinkVariant.LOGISTIC, **kwargs)

    def mean(self, eta: np.ndarray) -> np.ndarray:
        """g(η): valore atteso della risposta"""
        if self.variant is LinkVariant.IDENTITY:
            return np.asarray(eta, dtype=float)
        return expit(eta)

    def derivative(self, z: np.ndarray) -> np.ndarray:
        """g′(z)"""
        if self.variant is LinkVariant.IDENTITY:
            return np.ones_like(np.asarray(z, dtype=float))
        s = expit(z)
        return s * (1.0 - s)

    def f(self, t: float) -> float:
        return glm_f(self, t)

    def solve_q(self, u: float) -> float:
        """
        Risolve f(t)²·t = u per bisezione su [0, t_max]

        Raises:
            NoRoot: se u < 0 o se u supera il valore della mappa in t_max
        """
        if not np.isfinite(u) or u < 0.0:
            raise NoRoot(f"Û = {u} negativo: nessuna soluzione per Q")
        if u == 0.0:
            return 0.0
        if self.variant is LinkVariant.IDENTITY:
            if u > self.t_max:
                raise NoRoot(f"Û = {u} oltre t_max = {self.t_max}")
            return float(u)

        def gap(t: float) -> float:
            return glm_f(self, t) ** 2 * t - u

        if gap(self.t_max) < 0.0:
            raise NoRoot(f"Û = {u} oltre l'immagine di t ↦ f(t)²t su [0, {self.t_max}]")
        try:
            return float(optimize.bisect(gap, 0.0, self.t_max, xtol=self.root_xtol, maxiter=500))
        except (RuntimeError, ValueError) as e:
            raise NoRoot(f"Bisezione fallita: {e}") from e


def glm_f(link: GlmLink, t: float) -> float:
    """
    f(t) = E[g′(Z)] con Z ~ N(0, t): quadratura di Gauss–Hermite per t piccolo,
    integrazione adattiva sulla densità di Z altrimenti

    Raises:
        NegativeVariance: se t < 0
    """
    if t < 0:
        raise NegativeVariance(f"Varianza negativa: t={t}")
    if link.variant is LinkVariant.IDENTITY:
        return 1.0
    if t == 0:
        return float(link.derivative(np.array(0.0)))
    if t > HERMITE_MAX_VARIANCE:
        scale = np.sqrt(t)
        value, _ = integrate.quad(
            lambda z: float(link.derivative(z)) * np.exp(-0.5 * z * z / t) / (scale * np.sqrt(2.0 * np.pi)),
            -60.0, 60.0, points=[0.0], limit=200, epsabs=1e-13,
        )
        return float(value)
    nodes, weights = _hermite_rule(link.quadrature_nodes)
    values = link.derivative(np.sqrt(2.0 * t) * nodes)
    return float(weights @ values / np.sqrt(np.pi))


def glm_statistics(data: Dataset, sigma_matrix: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Û = Σ_{i≠j} yᵢyⱼXᵢᵀΣ⁻¹Xⱼ / (n(n−1)) e V̂ = Σ⁻¹Xᵀy/n

    Returns:
        (Û, V̂)
    """
    n = data.n
    if n < 2:
        raise NTooSmall(f"Servono almeno 2 osservazioni, trovate {n}")
    sigma = check_sigma_matrix(sigma_matrix, data.p)
    factor = cholesky(sigma, label="Σ")
    x, y = data.x, data.y
    whitened = cho_solve(factor, x.T)
    kernel = x @ whitened
    u_hat = (y @ kernel @ y - np.sum(y * y * np.diag(kernel))) / (n * (n - 1))
    v_hat = cho_solve(factor, x.T @ y) / n
    return float(u_hat), v_hat


def _fit_glm(data: Dataset, sigma_matrix: np.ndarray, link: GlmLink) -> Tuple[np.ndarray, Dict[str, Any]]:
    u_hat, v_hat = glm_statistics(data, sigma_matrix)
    q_hat = link.solve_q(u_hat)
    f_q = glm_f(link, q_hat)
    logger.debug(f"GLM - Û={u_hat:.6g}, Q̂={q_hat:.6g}, f(Q̂)={f_q:.6g}")
    return v_hat / f_q, {'link': link.variant.value, 'u_hat': u_hat, 'q_hat': q_hat, 'f_q': f_q}


def fit_glm(data: Dataset, sigma_matrix: np.ndarray, link: GlmLink) -> EstimateResult:
    """Stimatore GLM per coordinate, senza proiezione"""
    beta, diagnostics = _fit_glm(data, sigma_matrix, link)
    return EstimateResult(beta_hat=beta, kind=EstimatorKind.GLM_COORDINATE,
                          gram_condition=condition_number(np.asarray(sigma_matrix, dtype=float)),
                          diagnostics=diagnostics)


def fit_glm_projected(data: Dataset, sigma_matrix: np.ndarray, link: GlmLink, cs: ConstraintSet) -> EstimateResult:
    """
    Stimatore GLM proiettato: β̂ⱼ = V̂ⱼ / f(Q̂) con Q̂ = h(Û), poi proiezione affine

    Args:
        data: Campione
        sigma_matrix: Σ nota
        link: Funzione di legame
        cs: Vincoli

    Returns:
        EstimateResult di tipo Glm
    """
    if cs.p != data.p:
        raise DimensionMismatch(f"Vincoli su p={cs.p} ma il disegno ha p={data.p}")
    beta, diagnostics = _fit_glm(data, sigma_matrix, link)
    projected, residual = project_estimate(beta, cs)
    return EstimateResult(beta_hat=projected, kind=EstimatorKind.GLM,
                          gram_condition=condition_number(np.asarray(sigma_matrix, dtype=float)),
                          feasibility_residual=residual, diagnostics=diagnostics)


class ChebMomEstimator(BaseEstimator):
    """Stimatore a momenti di Chebyshev per Σ ignota"""

    kind = EstimatorKind.CHEB_MOM

    def __init__(self, config: Dict[str, Any]):
        super().__init__("ChebMomEstimator", config)
        self.cheb_config = ChebConfig.build(
            self.config.get('spectral_bounds', (0.2, 5.0)),
            int(self.config.get('cheb_order', 3)),
        )
        self.max_terms = float(self.config.get('ustat_max_terms', USTAT_MAX_TERMS))
        self.workers = int(self.config.get('ustat_workers', 1))

    def fit(self, data: Dataset, cs: Optional[ConstraintSet] = None,
            sigma_matrix: Optional[np.ndarray] = None) -> EstimateResult:
        cs = self._require_constraints(data, cs)
        return self.execute_with_stats(fit_cheb_mom, data, self.cheb_config, cs,
                                       max_terms=self.max_terms, workers=self.workers)

    def get_capabilities(self) -> List[str]:
        return ['constraints', 'p_ge_n', 'unknown_sigma']


class GlmEstimator(BaseEstimator):
    """Stimatore GLM, proiettato o per coordinate"""

    def __init__(self, config: Dict[str, Any], projected: bool = True):
        self.projected = projected
        self.kind = EstimatorKind.GLM if projected else EstimatorKind.GLM_COORDINATE
        super().__init__("GlmEstimator" if projected else "GlmCoordinateEstimator", config)
        self.link = GlmLink(
            variant=self.config.get('link', 'logistic'),
            quadrature_nodes=int(self.config.get('quadrature_nodes', 64)),
            t_max=float(self.config.get('root_t_max', 1e6)),
        )

    def fit(self, data: Dataset, cs: Optional[ConstraintSet] = None,
            sigma_matrix: Optional[np.ndarray] = None) -> EstimateResult:
        if not self.projected:
            return self.execute_with_stats(fit_glm, data, sigma_matrix, self.link)
        cs = self._require_constraints(data, cs)
        return self.execute_with_stats(fit_glm_projected, data, sigma_matrix, self.link, cs)

    def get_capabilities(self) -> List[str]:
        capabilities = ['sigma_matrix', 'p_ge_n', f"link:{self.link.variant.value}"]
        if self.projected:
            capabilities.insert(0, 'constraints')
        return capabilities
