"""
Test per i tipi di dominio e la costruzione dei vincoli
"""

import numpy as np
import pytest

from constrex.estimators import orthogonal_projector, project_estimate, range_projector
from constrex.exceptions import (
    DimensionMismatch,
    NonFiniteInput,
    NotPositiveDefinite,
    QNotLessThanP,
    RankDeficient,
    RatioOutOfRange,
)
from constrex.models import (
    AspectRatios,
    ConstraintSet,
    CovarianceSpec,
    Dataset,
    TrueModel,
    build_reference_constraints,
    realize_covariance,
    selection_matrix,
    validate_constraints,
)


class TestValidateConstraints:
    """Test per validate_constraints"""

    def test_single_unit_row(self):
        """Test vincolo su una coordinata"""
        cs = validate_constraints([[1.0, 0.0, 0.0]], [2.0])
        assert cs.q == 1
        assert cs.p == 3

    def test_rank_deficient(self):
        """Test righe proporzionali"""
        with pytest.raises(RankDeficient):
            validate_constraints([[1.0, 0.0], [2.0, 0.0]], [0.0, 0.0])

    def test_q_not_less_than_p(self):
        """Test q = p"""
        with pytest.raises(QNotLessThanP):
            validate_constraints(np.eye(3), np.zeros(3))

    def test_shape_mismatch(self):
        """Test lunghezza di c incompatibile"""
        with pytest.raises(DimensionMismatch):
            validate_constraints([[1.0, 0.0, 0.0]], [1.0, 2.0])

    def test_non_finite(self):
        """Test valori non finiti"""
        with pytest.raises(NonFiniteInput):
            validate_constraints([[np.nan, 0.0, 0.0]], [1.0])

    def test_empty_sentinel(self):
        """Test insieme vuoto"""
        cs = ConstraintSet.empty(4)
        assert cs.is_empty
        assert cs.q == 0 and cs.p == 4
        assert cs.residual(np.ones(4)) == 0.0

    def test_arrays_are_read_only(self):
        """Test immutabilità"""
        cs = validate_constraints([[1.0, 0.0, 0.0]], [2.0])
        with pytest.raises(ValueError):
            cs.a[0, 0] = 5.0


class TestReferenceConstraints:
    """Test per build_reference_constraints"""

    def test_identity_sample(self):
        """Test con Σ̃_N = I"""
        n_ref, p = 9, 3
        ref_x = np.sqrt(n_ref / p) * np.vstack([np.eye(p)] * (n_ref // p))
        beta_star = np.array([3.0, -1.0, 2.0])
        cs = build_reference_constraints([[1.0, 0.0, 0.0]], ref_x, beta_star)
        np.testing.assert_allclose(cs.a, [[1.0, 0.0, 0.0]], atol=1e-12)
        np.testing.assert_allclose(cs.c, [3.0], atol=1e-12)

    def test_selection_construction_is_feasible(self, rng):
        """Test ammissibilità per costruzione con B = [I_q : 0]"""
        p, q = 20, 6
        ref_x = rng.standard_normal((1000, p))
        beta_star = 5.0 + np.sqrt(5.0) * rng.standard_normal(p)
        cs = build_reference_constraints(selection_matrix(q, p), ref_x, beta_star)
        assert cs.q == q
        assert cs.residual(beta_star) <= 1e-12 * np.max(np.abs(cs.c))

    def test_zero_beta_gives_zero_c(self, rng):
        """Test β* = 0"""
        cs = build_reference_constraints(rng.standard_normal((2, 4)), rng.standard_normal((50, 4)), np.zeros(4))
        np.testing.assert_array_equal(cs.c, np.zeros(2))


class TestCovariance:
    """Test per CovarianceSpec e realize_covariance"""

    def test_isotropic(self):
        """Test Σ = I"""
        np.testing.assert_array_equal(realize_covariance(CovarianceSpec.isotropic(3)), np.eye(3))

    def test_equicorrelated(self):
        """Test m2"""
        np.testing.assert_allclose(realize_covariance(CovarianceSpec.equicorrelated(2, 0.5)),
                                   [[1.0, 0.5], [0.5, 1.0]])

    def test_explicit_not_positive_definite(self):
        """Test autovalori 3 e −1"""
        with pytest.raises(NotPositiveDefinite):
            realize_covariance(CovarianceSpec.explicit([[1.0, 2.0], [2.0, 1.0]]))

    def test_equicorrelated_out_of_range(self):
        """Test rho fuori dall'intervallo ammesso"""
        with pytest.raises(NotPositiveDefinite):
            CovarianceSpec.equicorrelated(4, -0.5)

    def test_from_dict_round_trip(self):
        """Test descrizione JSON"""
        spec = CovarianceSpec.from_dict({'variant': 'equicorrelated', 'rho': 0.3}, p=5)
        assert spec.to_dict() == {'variant': 'equicorrelated', 'p': 5, 'rho': 0.3}
        assert not spec.is_isotropic


class TestAspectRatios:
    """Test per AspectRatios"""

    def test_from_dims(self):
        """Test α e γ"""
        ratios = AspectRatios.from_dims(200, 100, 50)
        assert ratios.alpha == 0.5
        assert ratios.gamma == 0.5
        assert ratios.correction == pytest.approx(0.75)

    def test_gamma_out_of_range(self):
        """Test γ = 1"""
        with pytest.raises(RatioOutOfRange):
            AspectRatios(alpha=0.5, gamma=1.0)

    def test_require_moderate(self):
        """Test (1−γ)α ≥ 1"""
        with pytest.raises(RatioOutOfRange):
            AspectRatios(alpha=1.2, gamma=0.0).require_moderate()
        assert AspectRatios(alpha=1.2, gamma=0.5).require_moderate().effective == pytest.approx(0.6)


class TestDataset:
    """Test per Dataset e TrueModel"""

    def test_mismatched_lengths(self):
        """Test righe di x diverse dalla lunghezza di y"""
        with pytest.raises(DimensionMismatch):
            Dataset(np.ones((4, 2)), np.ones(3))

    def test_without_row(self):
        """Test rimozione di un'osservazione"""
        data = Dataset(np.arange(6.0).reshape(3, 2), np.array([1.0, 2.0, 3.0]))
        reduced = data.without_row(1)
        assert reduced.n == 2
        np.testing.assert_array_equal(reduced.y, [1.0, 3.0])

    def test_noiseless_model_allowed(self):
        """Test σ = 0"""
        truth = TrueModel(np.zeros(3), 0.0, CovarianceSpec.isotropic(3))
        assert truth.sigma_sq == 0.0

    def test_negative_sigma_rejected(self):
        """Test σ < 0"""
        with pytest.raises(ValueError):
            TrueModel(np.zeros(3), -1.0, CovarianceSpec.isotropic(3))


class TestProjector:
    """Test per orthogonal_projector"""

    def test_axis_aligned(self):
        """Test A = e₁ᵀ, c = 5"""
        pair = orthogonal_projector(validate_constraints([[1.0, 0.0, 0.0]], [5.0]))
        np.testing.assert_allclose(pair.p_orth, np.diag([0.0, 1.0, 1.0]), atol=1e-15)
        np.testing.assert_allclose(pair.feasible_point, [5.0, 0.0, 0.0], atol=1e-15)

    def test_scaled_row(self):
        """Test A ∝ (1, 1)"""
        pair = orthogonal_projector(validate_constraints([[3.7, 3.7]], [0.0]))
        np.testing.assert_allclose(pair.p_orth, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-14)

    def test_random_properties(self, rng):
        """Test A·P = 0 e idempotenza"""
        cs = validate_constraints(rng.standard_normal((2, 5)), rng.standard_normal(2))
        p_orth = orthogonal_projector(cs).p_orth
        np.testing.assert_allclose(cs.a @ p_orth, 0.0, atol=1e-12)
        np.testing.assert_allclose(p_orth @ p_orth, p_orth, atol=1e-12)
        np.testing.assert_allclose(range_projector(cs) + p_orth, np.eye(5), atol=1e-12)

    def test_projection_is_feasible(self, rng):
        """Test ammissibilità della proiezione"""
        cs = validate_constraints(rng.standard_normal((2, 5)), rng.standard_normal(2))
        projected, residual = project_estimate(rng.standard_normal(5), cs)
        assert residual < 1e-12
        assert cs.residual(projected) == residual
