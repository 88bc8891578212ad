"""
Test per il servizio teorico: rischio e guadagno della proiezione
"""

import numpy as np
import pytest
from scipy import stats

from conftest import FIXED_X, random_problem
from constrex.exceptions import ConfigInvalid, NTooSmall, RatioOutOfRange, SingularGram
from constrex.linalg import row_space_basis
from constrex.models import AspectRatios, ConstraintSet, selection_matrix, validate_constraints
from constrex.services import (
    FileService,
    TheoryService,
    asymptotic_risk,
    conditional_expected_gain,
    conditional_minimax_risk,
    deterministic_gain_weights,
    expected_gain,
    gain_eigen_weights,
    gain_from_dataset,
    null_space_trace_risk,
    parse_theory_params,
)
from constrex.simulation import conditional_error_draws


class TestConditionalRisk:
    """Test per conditional_minimax_risk"""

    def test_matches_null_space_form(self, rng):
        """Test forma lagrangiana contro forma nel nucleo"""
        x = rng.standard_normal((40, 7))
        cs = validate_constraints(rng.standard_normal((3, 7)), rng.standard_normal(3))
        assert conditional_minimax_risk(x, cs, 1.3) == pytest.approx(null_space_trace_risk(x, cs, 1.3), rel=1e-10)

    def test_unconstrained_is_ols_risk(self, rng):
        """Test q = 0: (σ²/n)·Tr(Σ̂ₙ⁻¹)"""
        x = rng.standard_normal((30, 4))
        expected = 2.0 / 30 * np.trace(np.linalg.inv(x.T @ x / 30))
        assert conditional_minimax_risk(x, ConstraintSet.empty(4), 2.0) == pytest.approx(expected, rel=1e-10)

    def test_decreasing_in_nested_constraints(self, rng):
        """Test rischio non crescente aggiungendo righe a A"""
        x = rng.standard_normal((50, 8))
        a = rng.standard_normal((5, 8))
        risks = [conditional_minimax_risk(x, validate_constraints(a[:q], np.zeros(q)) if q else ConstraintSet.empty(8), 1.0)
                 for q in range(6)]
        assert all(left >= right - 1e-12 for left, right in zip(risks[:-1], risks[1:]))

    def test_singular_design(self):
        """Test Σ̂ₙ singolare"""
        x = np.column_stack([np.ones(10), np.ones(10), np.arange(10.0)])
        with pytest.raises(SingularGram):
            conditional_minimax_risk(x, validate_constraints([[0.0, 0.0, 1.0]], [0.0]), 1.0)

    @pytest.mark.slow
    def test_conditional_monte_carlo(self, fixed_instance):
        """Test media di ‖β̃ − β*‖² su 10⁵ estrazioni di rumore entro 3 errori standard"""
        _, cs = fixed_instance
        beta_star = np.array([1.0, 2.0, 3.0])
        draws = conditional_error_draws(FIXED_X, cs, beta_star, sigma=1.0, draws=100_000, seed=17)
        standard_error = draws.cls_sq_errors.std(ddof=1) / np.sqrt(draws.draws)
        risk = conditional_minimax_risk(FIXED_X, cs, 1.0)
        assert abs(draws.cls_sq_errors.mean() - risk) < 3.0 * standard_error


class TestAsymptoticRisk:
    """Test per asymptotic_risk"""

    def test_isotropic_example(self):
        """Test σ² = 1, α = 0.5, γ = 0.5: 1/3"""
        report = asymptotic_risk(1.0, np.eye(100), validate_constraints(selection_matrix(50, 100), np.zeros(50)),
                                 AspectRatios.from_dims(200, 100, 50), n=200)
        assert report.asymptotic_risk == pytest.approx(1.0 / 3.0, rel=1e-10)
        assert report.isotropic_closed_form == pytest.approx(report.asymptotic_risk, rel=1e-10)
        assert report.finite_sample_trace_risk == pytest.approx(50.0 / 149.0, rel=1e-10)

    def test_unconstrained_isotropic(self):
        """Test γ = 0: σ²α/(1 − α) = 1"""
        report = asymptotic_risk(1.0, np.eye(50), ConstraintSet.empty(50), AspectRatios.from_dims(100, 50, 0))
        assert report.asymptotic_risk == pytest.approx(1.0, rel=1e-10)
        assert report.finite_sample_trace_risk is None

    def test_nearly_fully_constrained(self):
        """Test q = p − 1: rischio O(1/p)"""
        p = 200
        report = asymptotic_risk(1.0, np.eye(p), validate_constraints(selection_matrix(p - 1, p), np.zeros(p - 1)),
                                 AspectRatios.from_dims(2 * p, p, p - 1))
        assert report.asymptotic_risk < 2.0 / p

    def test_trace_form_with_random_constraints(self, rng):
        """Test forma della traccia contro la forma chiusa con A generica e Σ = I"""
        cs = validate_constraints(rng.standard_normal((12, 40)), np.zeros(12))
        report = asymptotic_risk(2.5, np.eye(40), cs, AspectRatios.from_dims(100, 40, 12))
        assert report.asymptotic_risk == pytest.approx(report.isotropic_closed_form, rel=1e-10)

    def test_no_closed_form_for_correlated_design(self):
        """Test Σ equicorrelata: nessuna forma chiusa"""
        sigma = 0.5 * np.eye(10) + 0.5
        report = asymptotic_risk(1.0, sigma, ConstraintSet.empty(10), AspectRatios.from_dims(40, 10, 0))
        assert report.isotropic_closed_form is None
        # α·Tr(Σ⁻¹)/p/(1 − α)
        expected = 0.25 * np.trace(np.linalg.inv(sigma)) / 10 / 0.75
        assert report.asymptotic_risk == pytest.approx(expected, rel=1e-10)

    def test_outside_moderate_regime(self):
        """Test (1−γ)α ≥ 1"""
        with pytest.raises(RatioOutOfRange):
            asymptotic_risk(1.0, np.eye(3), ConstraintSet.empty(3), AspectRatios(alpha=1.2, gamma=0.0))


class TestGain:
    """Test per il guadagno della proiezione"""

    def test_expected_gain_example(self):
        """Test n = 200, q = 10, σ² = 1, α = 0.5: 0.1"""
        assert expected_gain(200, 10, 1.0, AspectRatios(alpha=0.5, gamma=0.1)) == pytest.approx(0.1)

    def test_no_constraints_no_gain(self):
        """Test q = 0"""
        assert expected_gain(200, 0, 1.0, AspectRatios(alpha=0.5, gamma=0.0)) == 0.0

    def test_requires_alpha_below_one(self):
        """Test α ≥ 1"""
        with pytest.raises(RatioOutOfRange):
            expected_gain(100, 10, 1.0, AspectRatios(alpha=1.0, gamma=0.1))

    def test_eigen_weights_properties(self, rng):
        """Test q pesi ordinati con somma Tr(P_AΣ̂ₙ⁻¹)"""
        x = rng.standard_normal((60, 10))
        cs = validate_constraints(rng.standard_normal((4, 10)), np.zeros(4))
        weights = gain_eigen_weights(x, cs)
        assert weights.shape == (4,)
        assert np.all(np.diff(weights) <= 0)
        q_basis = row_space_basis(cs.a)
        reduced = q_basis.T @ np.linalg.inv(x.T @ x / 60) @ q_basis
        assert weights.sum() == pytest.approx(np.trace(reduced), rel=1e-9)
        np.testing.assert_allclose(weights, np.sort(np.linalg.eigvalsh(reduced))[::-1], rtol=1e-8)

    def test_conditional_expected_gain(self, rng):
        """Test E[G_n | X] = (σ²/n)·Σwᵢ"""
        x = rng.standard_normal((60, 10))
        cs = validate_constraints(rng.standard_normal((4, 10)), np.zeros(4))
        expected = 2.0 / 60 * gain_eigen_weights(x, cs).sum()
        assert conditional_expected_gain(x, cs, 2.0) == pytest.approx(expected, rel=1e-9)

    def test_eigen_weights_require_invertible_gram(self, rng):
        """Test n ≤ p"""
        cs = validate_constraints(rng.standard_normal((1, 10)), [0.0])
        with pytest.raises(NTooSmall):
            gain_eigen_weights(rng.standard_normal((8, 10)), cs)

    def test_deterministic_weights_isotropic(self):
        """Test Σ = I: q pesi pari a 1/(1 − α)"""
        cs = validate_constraints(selection_matrix(5, 20), np.zeros(5))
        weights = deterministic_gain_weights(np.eye(20), cs, AspectRatios.from_dims(40, 20, 5))
        np.testing.assert_allclose(weights, np.full(5, 2.0), rtol=1e-12)

    def test_gain_is_non_negative(self, rng):
        """Test G_n ≥ 0 con β* ammissibile"""
        data, cs, beta_star = random_problem(rng, 40, 6, 2)
        assert gain_from_dataset(data, cs, beta_star) >= -1e-12

    @pytest.mark.slow
    def test_conditional_gain_distribution(self, fixed_instance):
        """Test n·G_n/σ² ~ w₁·χ²₁ sull'istanza fissa (KS, p > 0.01)"""
        _, cs = fixed_instance
        (w1,) = gain_eigen_weights(FIXED_X, cs)
        draws = conditional_error_draws(FIXED_X, cs, np.array([1.0, 2.0, 3.0]), sigma=1.0, draws=100_000, seed=23)
        result = stats.kstest(draws.scaled_gain, 'chi2', args=(1, 0.0, w1))
        assert result.pvalue > 0.01
        assert draws.scaled_gain.var() == pytest.approx(2.0 * w1 ** 2, rel=0.05)

    @pytest.mark.slow
    def test_conditional_gain_mixture_two_constraints(self):
        """Test n=40, p=10, q=2: n·G_n/σ² contro w₁·χ²₁ + w₂·χ²₁ (KS a due campioni, p > 0.01)"""
        rng = np.random.default_rng(41)
        data, cs, beta_star = random_problem(rng, 40, 10, 2)
        weights = gain_eigen_weights(data.x, cs)
        assert weights.shape == (2,)
        draws = conditional_error_draws(data.x, cs, beta_star, sigma=1.0, draws=100_000, seed=29)
        mixture = rng.chisquare(1, size=(1_000_000, 2)) @ weights
        assert stats.ks_2samp(draws.scaled_gain, mixture).pvalue > 0.01
        assert draws.scaled_gain.mean() == pytest.approx(weights.sum(), rel=0.02)

    @pytest.mark.slow
    def test_monte_carlo_gain(self):
        """Test media di G_n su 2000 semi con n=200, p=100, q=10, σ=1 entro il 10% di 0.1"""
        from constrex.simulation import ScenarioConfig, generate_iteration

        cfg = ScenarioConfig(name='guadagno', n=200, p_grid=[100], q_rule={'kind': 'fixed', 'value': 10},
                             iterations=2000, seed=20240501, estimators=['ols', 'projected'])
        gains = []
        for i in range(cfg.iterations):
            data, cs, truth, _ = generate_iteration(cfg, 100, 10, i)
            gains.append(gain_from_dataset(data, cs, truth.beta_star))
        assert np.mean(gains) == pytest.approx(0.1, rel=0.1)


class TestTheoryService:
    """Test per TheoryService e parse_theory_params"""

    @pytest.fixture
    def service(self, app_config):
        return TheoryService(app_config, FileService(app_config.get('io', {})))

    def test_isotropic_report(self, service):
        """Test report con vincoli di default"""
        params = parse_theory_params({'n': 200, 'p': 100, 'q': 50, 'sigma_sq': 1.0})
        report = service.report(params)
        assert report['asymptotic_risk'] == pytest.approx(1.0 / 3.0, rel=1e-10)
        assert report['alpha'] == 0.5 and report['gamma'] == 0.5
        assert report['gain']['eigen_weights'] == pytest.approx([2.0] * 50)
        assert report['expected_gain'] == pytest.approx(0.5)

    def test_no_constraints(self, service):
        """Test q = 0: guadagno nullo"""
        report = service.report(parse_theory_params({'n': 200, 'p': 100, 'q': 0, 'sigma_sq': 1.0}))
        assert report['expected_gain'] == 0.0
        assert report['gain']['eigen_weights'] == []

    def test_equicorrelated_default_constraints(self, service):
        """Test A = [I_q : 0]·Σ con Σ equicorrelata"""
        params = parse_theory_params({'n': 100, 'p': 20, 'q': 4, 'sigma_sq': 1.0,
                                      'covariance': {'variant': 'equicorrelated', 'rho': 0.5}})
        report = service.report(params)
        assert report['risk']['isotropic_closed_form'] is None
        assert report['asymptotic_risk'] > 0

    def test_design_from_csv(self, service, tmp_path, rng):
        """Test rischio condizionato con X letto da file"""
        x = rng.standard_normal((30, 5))
        a = rng.standard_normal((2, 5))
        np.savetxt(tmp_path / 'x.csv', x, delimiter=',', fmt='%.17g')
        np.savetxt(tmp_path / 'a.csv', a, delimiter=',', fmt='%.17g')
        np.savetxt(tmp_path / 'c.csv', np.zeros(2), fmt='%.17g')
        params = parse_theory_params({'n': 30, 'p': 5, 'q': 2, 'sigma_sq': 1.0,
                                      'x_csv': 'x.csv', 'a_csv': 'a.csv', 'c_csv': 'c.csv'})
        report = service.report(params, base_dir=tmp_path)
        cs = validate_constraints(a, np.zeros(2))
        assert report['risk']['finite_sample_trace_risk'] == pytest.approx(conditional_minimax_risk(x, cs, 1.0),
                                                                           rel=1e-12)
        assert len(report['gain']['eigen_weights']) == 2

    def test_more_features_than_observations(self, service):
        """Test n=200, p=300, q=250: α = 1.5 ma (1−γ)α = 0.25"""
        report = service.report(parse_theory_params({'n': 200, 'p': 300, 'q': 250, 'sigma_sq': 1.0}))
        assert report['alpha'] == pytest.approx(1.5)
        assert report['asymptotic_risk'] == pytest.approx(1.0 / 3.0, rel=1e-10)
        assert report['risk']['finite_sample_trace_risk'] == pytest.approx(50.0 / 149.0, rel=1e-10)
        assert report['expected_gain'] is None
        assert report['gain']['expected_gain'] is None
        assert report['gain']['eigen_weights'] == []

    def test_moderate_regime_violation(self, service):
        """Test α = 1.2, γ = 0"""
        with pytest.raises(RatioOutOfRange):
            service.report(parse_theory_params({'n': 100, 'p': 120, 'q': 0, 'sigma_sq': 1.0}))

    @pytest.mark.parametrize('data', [
        {'n': 0, 'p': 10, 'q': 1, 'sigma_sq': 1.0},
        {'n': 100, 'p': 10, 'q': 1, 'sigma_sq': 1.0, 'a_csv': 'a.csv'},
        {'p': 10, 'q': 1, 'sigma_sq': 1.0},
    ])
    def test_invalid_params(self, data):
        """Test parametri non validi"""
        with pytest.raises(ConfigInvalid):
            parse_theory_params(data)
