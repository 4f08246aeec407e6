import numpy as np
import pytest

from hierstein.errors import (
    DegenerateLawError,
    DimensionMismatchError,
    ModelValidationError,
    NonZeroMeanError,
)
from hierstein.features import metrics
from hierstein.features.zero_bias import (
    SumComponents,
    ZeroBiasCoupling,
    components_for_level,
    couple_inverse_cdf,
    lemma_check,
    sample_sum_zero_bias,
    sum_zero_bias_exact,
    sum_zero_bias_sample,
    zero_bias,
)
from hierstein.laws import (
    EmpiricalSample,
    bernoulli,
    make_discrete,
    point_mass,
    rademacher,
    standardize,
    two_point,
    uniform_cdf,
    uniform_on,
)


def _random_centred_law(rng, max_atoms=6):
    n = int(rng.integers(2, max_atoms + 1))
    d = make_discrete(rng.normal(size=n), rng.uniform(0.05, 1.0, size=n))
    return d.shifted(-d.mean())


def test_rademacher_zero_bias_is_uniform():
    assert metrics.w1(zero_bias(rademacher()), uniform_cdf(-1.0, 1.0)) <= 1e-12


def test_two_point_zero_bias_is_uniform_on_its_hull():
    assert metrics.w1(zero_bias(two_point(1.0, 3.0)), uniform_cdf(-1.0, 3.0)) <= 1e-12


def test_zero_bias_rejects_bad_laws():
    with pytest.raises(DegenerateLawError):
        zero_bias(point_mass(0.0))
    with pytest.raises(NonZeroMeanError):
        zero_bias(bernoulli(0.5))


def test_zero_bias_identity_over_random_laws():
    rng = np.random.default_rng(20240517)
    for _ in range(60):
        d = _random_centred_law(rng)
        zb = zero_bias(d)
        var = d.variance()
        for p in range(1, 5):
            f = metrics.SteinTestFunction.monomial(p)
            lhs = d.raw_moment(p + 1)  # E[X f(X)]
            rhs = var * zb.expect_polynomial(f.fprime)
            assert abs(lhs - rhs) <= 1e-10


def test_inverse_cdf_coupling():
    c = ZeroBiasCoupling.of(rademacher())
    x, xs = couple_inverse_cdf(c, np.array([0.25, 0.75]))
    np.testing.assert_array_equal(x, [-1.0, 1.0])
    np.testing.assert_allclose(xs, [-0.5, 0.5])
    with pytest.raises(ValueError):
        couple_inverse_cdf(c, 1.0)


def test_sum_components_validation():
    r = rademacher()
    with pytest.raises(DimensionMismatchError):
        SumComponents((1.0, 1.0), (r,))
    with pytest.raises(ModelValidationError):
        SumComponents((1.0,), (r,))
    with pytest.raises(ModelValidationError):
        SumComponents((0.0, 0.0), (r, r))
    with pytest.raises(NonZeroMeanError):
        SumComponents((1.0, 1.0), (r, bernoulli(0.5)))
    with pytest.raises(ModelValidationError):
        SumComponents((1.0, 1.0), (r, two_point(1.0, 3.0)))


def test_weights_follow_squared_coefficients():
    s = SumComponents((1.0, 2.0), (rademacher(), rademacher()))
    np.testing.assert_allclose(s.weights, [0.2, 0.8])
    assert s.lam == pytest.approx(np.sqrt(5.0))
    assert s.couplings[0] is s.couplings[1]


def test_construction_matches_convolved_zero_bias():
    rng = np.random.default_rng(7)
    for _ in range(30):
        m = int(rng.integers(2, 5))
        laws = []
        for _ in range(m):
            n = int(rng.integers(2, 4))
            laws.append(standardize(make_discrete(rng.normal(size=n), rng.uniform(0.1, 1.0, size=n))))
        alphas = tuple(rng.uniform(0.2, 1.5, size=m) * rng.choice([-1.0, 1.0], size=m))
        s = SumComponents(alphas, tuple(laws))
        direct = zero_bias(standardize(s.law_of_sum()))
        assert metrics.w1(sum_zero_bias_exact(s), direct) <= 1e-10
        check = lemma_check(s)
        assert check.holds


def test_lemma_chain_on_equal_weights():
    s = SumComponents((1.0, 1.0), (rademacher(), rademacher()), groups=("x", "x"))
    check = lemma_check(s)
    # W1(ξ, ξ*) = 1/2 for Rademacher; coupling mean Σ|α|³/λ³·½ = 2·2^{-3/2}·½
    assert check.coupling_mean == pytest.approx(2 * 2**-1.5 * 0.5)
    assert check.right_side == pytest.approx(0.5)
    assert check.w1_exact <= check.coupling_mean + 1e-12


def test_coupled_draws_share_non_selected_components():
    s = SumComponents((1.0, 1.0), (rademacher(), rademacher()))
    U, Ustar = sum_zero_bias_sample(s, [0.1, 0.9], 0.2)
    assert U == pytest.approx(0.0)
    # index 0 selected: ξ₀ = −1 replaced by its zero-bias draw −0.8
    assert Ustar == pytest.approx((-0.8 + 1.0) / np.sqrt(2.0))
    with pytest.raises(DimensionMismatchError):
        sum_zero_bias_sample(s, [0.1], 0.2)


def test_sampled_pairs_are_reproducible_across_threads():
    s = SumComponents((1.0, 0.5, 0.5), (rademacher(), standardize(bernoulli(0.3)), rademacher()))
    a = sample_sum_zero_bias(s, 20_000, seed=3, threads=1)
    b = sample_sum_zero_bias(s, 20_000, seed=3, threads=4)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    # E|U − U*| from the closed form
    exact = lemma_check(s).coupling_mean
    assert np.mean(np.abs(a[0] - a[1])) == pytest.approx(exact, abs=0.02)


def test_components_for_level(clt_models):
    s = components_for_level(clt_models, 0, rademacher(), rademacher())
    assert s.m == 4
    assert s.groups == ("x", "x", "y", "y")
    np.testing.assert_allclose(s.weights, [0.25] * 4)


def test_tiny_second_weight_leaves_the_first_component():
    first = rademacher()
    s = SumComponents((1.0, 1e-4), (first, standardize(bernoulli(0.3))))
    # the second component moves mass by at most ~1e-4·E|ξ₂|
    assert metrics.w1(sum_zero_bias_exact(s), zero_bias(first)) <= 5e-4


def test_symmetric_components_give_a_symmetric_zero_bias():
    sym = standardize(uniform_on([-2.0, -0.5, 0.5, 2.0]))
    s = SumComponents((1.0, 0.7, 0.3), (rademacher(), sym, rademacher()))
    ustar = sum_zero_bias_exact(s)
    assert metrics.w1(ustar, ustar.scaled(-1.0)) <= 1e-12


def test_sampled_zero_bias_matches_the_exact_law():
    s = SumComponents((1.0, 0.5, 0.5), (rademacher(), standardize(bernoulli(0.3)), rademacher()))
    _, ustar = sample_sum_zero_bias(s, 400_000, seed=12, threads=2)
    assert metrics.w1(EmpiricalSample.from_draws(ustar), sum_zero_bias_exact(s)) <= 5e-3
