"""
Fixture condivise dai test di constrex
"""

import numpy as np
import pytest

from constrex.models.constraints import validate_constraints
from constrex.models.domain import ConstraintSet, Dataset

FIXED_X = np.array([
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 1.0, 0.0],
    [0.0, 1.0, 1.0],
    [1.0, 0.0, 1.0],
])
FIXED_Y = np.array([1.0, 2.0, 3.0, 3.0, 5.0, 4.0])
FIXED_A = np.array([[1.0, 1.0, 1.0]])
FIXED_C = np.array([6.0])


def kkt_solution(x: np.ndarray, y: np.ndarray, a: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Soluzione di riferimento del sistema KKT (p+q) × (p+q), indipendente dalla libreria"""
    p, q = x.shape[1], a.shape[0]
    system = np.block([[x.T @ x, a.T], [a, np.zeros((q, q))]])
    rhs = np.concatenate([x.T @ y, c])
    return np.linalg.solve(system, rhs)[:p]


def random_problem(rng: np.random.Generator, n: int, p: int, q: int, noise: float = 1.0):
    """Disegno gaussiano, vincoli casuali a rango pieno e β* ammissibile"""
    x = rng.standard_normal((n, p))
    beta_star = rng.standard_normal(p)
    y = x @ beta_star + noise * rng.standard_normal(n)
    if q == 0:
        cs = ConstraintSet.empty(p)
    else:
        a = rng.standard_normal((q, p))
        cs = validate_constraints(a, a @ beta_star)
    return Dataset(x, y), cs, beta_star


@pytest.fixture
def rng():
    """Generatore con seme fisso"""
    return np.random.default_rng(12345)


@pytest.fixture
def fixed_instance():
    """Istanza fissa n=6, p=3, q=1"""
    return Dataset(FIXED_X, FIXED_Y), validate_constraints(FIXED_A, FIXED_C)


@pytest.fixture
def app_config():
    """Configurazione di default"""
    from constrex import get_default_config
    return get_default_config()
