import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (
    bernoulli_factorial_moments,
    compound_poisson_pmf,
    factorial_moments_from_pmf,
    markov_entrance_factorial_moments,
)
from pbdlsp.moments import (
    DispersionCase,
    FactorialMoments,
    UnsupportedExact,
    case2_min_n,
    classify_case,
    factorial_moments,
    intensity,
    moments_from_counts,
)
from pbdlsp.processes import (
    Bernoulli,
    BernoulliShift,
    CompoundPoisson,
    Exponential,
    MarkovEntrance,
    Renewal,
)
from pbdlsp.spatial import SpatialMeasure

CHAIN = [[-1, 1, 0], [1, -9, 8], [0, 8, -8]]
EXACT_MODELS = [
    Bernoulli([0.1, 0.3, 0.5], [0.2, 0.3, 0.4]),
    BernoulliShift([0.4, 0.7], [SpatialMeasure.uniform(0, 0.5), SpatialMeasure.point_mass(0.8)]),
    CompoundPoisson([1.0, 0.5]),
    CompoundPoisson([0.3, 0.2, 0.1], base=SpatialMeasure.uniform(0.2, 0.7)),
]


class TestExactMoments:
    def test_bernoulli_example(self):
        fm = factorial_moments(Bernoulli([0.2, 0.7], [0.3, 0.3]))
        np.testing.assert_allclose(fm.theta, [0.6, 0.18, 0.0, 0.0], atol=1e-15)
        assert fm.variance == pytest.approx(0.42, abs=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0.01, 0.99), min_size=1, max_size=7))
    def test_bernoulli_against_enumeration(self, p):
        atoms = np.linspace(0, 1, len(p))
        fm = factorial_moments(Bernoulli(atoms, p))
        np.testing.assert_allclose(fm.theta, bernoulli_factorial_moments(p), rtol=1e-12, atol=1e-14)

    def test_bounded_count_kills_high_moments(self):
        fm = factorial_moments(Bernoulli([0.1, 0.9], [0.4, 0.6]))
        assert fm.theta[2] == 0 and fm.theta[3] == 0

    @pytest.mark.parametrize("lam", [0.5, 1.0, 3.7])
    def test_poisson_counts(self, lam):
        fm = factorial_moments(CompoundPoisson([lam]))
        np.testing.assert_allclose(fm.theta, [lam**r for r in range(1, 5)], rtol=1e-14)

    @pytest.mark.parametrize("rates", [[1.0, 0.5], [0.3, 0.2, 0.1], [2.0, 0.0, 0.4]])
    def test_compound_poisson_against_panjer(self, rates):
        fm = factorial_moments(CompoundPoisson(rates))
        ref = factorial_moments_from_pmf(compound_poisson_pmf(rates, 200))
        np.testing.assert_allclose(fm.theta, ref, rtol=1e-10)

    def test_compound_poisson_example(self):
        fm = factorial_moments(CompoundPoisson([1.0, 0.5]))
        assert fm.theta[:2] == (2.0, 5.0)
        assert fm.variance == 3.0

    def test_deterministic_count(self):
        fm = moments_from_counts(np.full(100, 5))
        np.testing.assert_array_equal(fm.theta, [5, 20, 60, 120])

    def test_no_exact_for_renewal(self):
        with pytest.raises(UnsupportedExact):
            factorial_moments(Renewal(Exponential(1.0)))

    @pytest.mark.parametrize("model", EXACT_MODELS)
    def test_variance_identity(self, model):
        fm = factorial_moments(model)
        t1, t2 = fm.theta[:2]
        assert fm.variance == t2 - t1 * t1 + t1


class TestMonteCarloMoments:
    @pytest.mark.parametrize("model", EXACT_MODELS)
    def test_converges_to_exact(self, model, rng):
        exact = factorial_moments(model)
        mc = factorial_moments(model, "mc", 100_000, rng)
        assert mc.source == "monte_carlo" and not mc.exact
        for e, m, se in zip(exact.theta, mc.theta, mc.standard_errors):
            assert abs(e - m) <= 4 * se + 1e-12

    def test_markov_against_matrix_exponential(self, rng):
        ref = markov_entrance_factorial_moments(CHAIN, [2])
        mc = factorial_moments(MarkovEntrance(CHAIN, [2]), "mc", 100_000, rng)
        for e, m, se in zip(ref, mc.theta, mc.standard_errors):
            assert abs(e - m) <= 4 * se

    def test_exponential_renewal_is_poisson(self, rng):
        mc = factorial_moments(Renewal(Exponential(2.0)), "mc", 100_000, rng)
        for r, (m, se) in enumerate(zip(mc.theta, mc.standard_errors), start=1):
            assert abs(m - 2.0**r) <= 4 * se


class TestClassification:
    def test_poisson_boundary_is_case1(self):
        assert classify_case(FactorialMoments((2.0, 4.0, 8.0, 16.0)), 5).case is DispersionCase.CASE1

    def test_bernoulli_case2(self):
        fm = factorial_moments(Bernoulli([0.2, 0.7], [0.3, 0.3]))
        cls = classify_case(fm, 11)
        assert cls.case is DispersionCase.CASE2 and cls.n_valid

    def test_half_mean_without_theta3_condition(self):
        fm = factorial_moments(Bernoulli([0.2, 0.7], [0.5, 0.5]))
        assert fm.variance == fm.mean / 2
        assert classify_case(fm, 10).case is DispersionCase.OUT_OF_SCOPE

    def test_half_mean_with_theta3_condition(self):
        # Var = θ1/2 requires θ2 = θ1² - θ1/2; θ3 > θ2(θ1 - 1) = 3 passes
        fm = FactorialMoments((2.0, 3.0, 4.0, 0.0))
        assert classify_case(fm, 10).case is DispersionCase.CASE2
        assert case2_min_n(fm) == 1.0
        assert classify_case(FactorialMoments((2.0, 3.0, 3.0, 0.0)), 10).case is DispersionCase.OUT_OF_SCOPE

    def test_strong_underdispersion_out_of_scope(self):
        fm = factorial_moments(Bernoulli([0.2, 0.7], [0.9, 0.9]))
        assert classify_case(fm, 10).case is DispersionCase.OUT_OF_SCOPE

    def test_min_n(self):
        fm = FactorialMoments((1.2, 1.0, 0.1, 0.0))
        expected = 1 + (1.2 * 1.0 - 1.0 - 0.1) / (1.2 * (1.2 - 2 * (1.44 - 1.0)))
        assert case2_min_n(fm) == pytest.approx(expected, rel=1e-14)
        assert not classify_case(fm, int(np.floor(expected))).n_valid
        assert classify_case(fm, int(np.floor(expected)) + 1).n_valid

    def test_mc_tie_band(self):
        rng = np.random.default_rng(1)
        fm = moments_from_counts(rng.poisson(3.0, 20_000))
        assert classify_case(fm, 5).case is DispersionCase.CASE1

    def test_zero_mean(self):
        assert classify_case(FactorialMoments((0, 0, 0, 0)), 3).case is DispersionCase.OUT_OF_SCOPE


class TestIntensity:
    def test_bernoulli(self):
        lam = intensity(Bernoulli([0.2, 0.7], [0.3, 0.3]))
        np.testing.assert_array_equal(lam.measure.atom_weights, [0.3, 0.3])
        assert lam.palm_mean(0.2) == pytest.approx(0.3, abs=1e-15)
        assert lam.kind == "atomic"

    def test_compound_poisson_density(self):
        lam = intensity(CompoundPoisson([1.0, 0.5]))
        np.testing.assert_allclose(lam.measure.refine_at(np.linspace(0.01, 0.99, 7)), 2.0)
        assert lam.kind == "piecewise_density"
        # E|Ξ_{1,x}| = θ1 + Σ i(i-1)c_i / Σ i c_i = 2 + 1/2
        assert lam.palm_mean(0.3) == pytest.approx(2.5)

    def test_exponential_renewal_flat(self, rng):
        lam = intensity(Renewal(Exponential(3.0)), "mc", 100_000, 4, rng)
        width = 1 / 16
        mass = lam.measure.heights * width
        assert np.all(np.abs(mass - 3.0 * width) <= 3 * lam.bin_se)
        with pytest.raises(ValueError):
            lam.palm_mean(0.5)

    @pytest.mark.parametrize("model", EXACT_MODELS)
    def test_total_equals_theta1(self, model):
        assert intensity(model).total == pytest.approx(factorial_moments(model).theta[0], abs=1e-12)

    @pytest.mark.parametrize("model", EXACT_MODELS)
    def test_palm_integrates_to_theta2(self, model):
        assert intensity(model).palm.total == pytest.approx(factorial_moments(model).theta[1], rel=1e-12)

    def test_palm_mean_bernoulli_shift_pointwise(self):
        m = BernoulliShift([0.4, 0.7], [SpatialMeasure.uniform(0, 0.5), SpatialMeasure.uniform(0, 0.5)])
        # both shift laws agree, so E|Ξ_{1,x}| = Σ p_i (θ1 - p_i) / θ1
        expected = (0.4 * 0.7 + 0.7 * 0.4) / 1.1
        assert intensity(m).palm_mean(0.25) == pytest.approx(expected, rel=1e-12)

    def test_mc_total_close_to_theta1(self, rng):
        model = MarkovEntrance(CHAIN, [2])
        lam = intensity(model, "mc", 50_000, 3, rng)
        fm = factorial_moments(model, "mc", 50_000, rng)
        assert abs(lam.total - fm.mean) < 4 * fm.standard_errors[0] * np.sqrt(2)
