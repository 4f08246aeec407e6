import math

import numpy as np
import pytest
from numpy.polynomial import Polynomial

from hierstein.errors import (
    CapExceededError,
    DegenerateLawError,
    DimensionMismatchError,
    EmptyLawError,
    NegativeWeightError,
    NonFiniteValueError,
    UnsupportedLawError,
    UnsupportedMomentError,
)
from hierstein.laws import (
    STANDARD_NORMAL,
    DiscreteDistribution,
    EmpiricalSample,
    PiecewiseLinearCDF,
    bernoulli,
    cdf_eval,
    central_moment,
    from_record,
    make_discrete,
    mix,
    mixture_of_shifts,
    point_mass,
    rademacher,
    standardize,
    to_record,
    two_point,
    uniform_cdf,
)


# ---------- discrete ----------
def test_make_discrete_merges_and_normalises():
    d = make_discrete([2.0, 1.0, 1.0 + 1e-13], [2.0, 1.0, 1.0])
    np.testing.assert_array_equal(d.atoms, [1.0, 2.0])
    np.testing.assert_allclose(d.probs, [0.5, 0.5])


@pytest.mark.parametrize(
    "values, weights, exc",
    [
        ([], [], EmptyLawError),
        ([1.0, 2.0], [1.0], DimensionMismatchError),
        ([1.0, math.nan], [1.0, 1.0], NonFiniteValueError),
        ([1.0, 2.0], [1.0, math.inf], NonFiniteValueError),
        ([1.0, 2.0], [1.0, -0.5], NegativeWeightError),
        ([1.0, 2.0], [0.0, 0.0], EmptyLawError),
    ],
)
def test_make_discrete_rejects(values, weights, exc):
    with pytest.raises(exc):
        make_discrete(values, weights)


def test_arrays_are_frozen():
    d = rademacher()
    with pytest.raises(ValueError):
        d.atoms[0] = 5.0


def test_quantile_is_right_continuous():
    d = rademacher()
    assert d.quantile(0.25) == -1.0
    assert d.quantile(0.5) == 1.0  # tie goes to the larger atom
    assert d.cdf(0.0) == 0.5
    assert d.cdf_left(1.0) == 0.5
    assert d.cdf(1.0) == 1.0


def test_central_moments():
    d = standardize(bernoulli(0.2))
    assert d.mean() == pytest.approx(0.0, abs=1e-15)
    assert central_moment(d, 2) == pytest.approx(1.0, abs=1e-14)
    # skewness of Bernoulli(p): (1 − 2p)/√(p(1 − p))
    assert central_moment(d, 3) == pytest.approx(0.6 / 0.4, rel=1e-12)
    with pytest.raises(UnsupportedMomentError):
        central_moment(d, 5)


def test_standardize_point_mass_is_degenerate():
    with pytest.raises(DegenerateLawError):
        standardize(point_mass(3.0))


def test_two_point_is_centred():
    d = two_point(1.0, 3.0)
    np.testing.assert_array_equal(d.atoms, [-1.0, 3.0])
    assert d.mean() == pytest.approx(0.0, abs=1e-15)
    assert d.variance() == pytest.approx(3.0)


def test_convolve_rademachers():
    s = rademacher().convolve(rademacher())
    np.testing.assert_array_equal(s.atoms, [-2.0, 0.0, 2.0])
    np.testing.assert_allclose(s.probs, [0.25, 0.5, 0.25])


def test_convolve_respects_cap():
    with pytest.raises(CapExceededError) as err:
        rademacher().convolve(rademacher(), cap=3)
    assert err.value.exit_code == 3


def test_scaled_negative_reverses_order():
    d = two_point(1.0, 3.0).scaled(-2.0)
    np.testing.assert_array_equal(d.atoms, [-6.0, 2.0])
    np.testing.assert_allclose(d.probs, [0.25, 0.75])
    assert d.scaled(0.0).size == 1


# ---------- piecewise ----------
def test_uniform_cdf_moments_and_quantile():
    u = uniform_cdf(-1.0, 1.0)
    assert u.mean() == pytest.approx(0.0, abs=1e-15)
    assert u.variance() == pytest.approx(1.0 / 3.0)
    assert u.quantile(0.25) == pytest.approx(-0.5)
    assert u.cdf(5.0) == 1.0 and u.cdf(-5.0) == 0.0
    assert u.expect_polynomial(Polynomial([0, 0, 0, 0, 1])) == pytest.approx(0.2)


def test_piecewise_validation():
    with pytest.raises(ValueError):
        PiecewiseLinearCDF([0.0], [1.0])
    with pytest.raises(ValueError):
        PiecewiseLinearCDF([0.0, 1.0, 2.0], [0.0, 0.7, 0.6])
    with pytest.raises(ValueError):
        PiecewiseLinearCDF([0.0, 1.0], [0.0, 0.9])


def test_piecewise_scaled_negative():
    u = PiecewiseLinearCDF([0.0, 1.0, 3.0], [0.0, 0.5, 1.0]).scaled(-1.0)
    np.testing.assert_array_equal(u.breakpoints, [-3.0, -1.0, 0.0])
    np.testing.assert_allclose(u.cdf_values, [0.0, 0.5, 1.0])
    with pytest.raises(ValueError):
        u.scaled(0.0)


def test_mixture_of_shifts_glues_uniforms():
    m = mixture_of_shifts(uniform_cdf(0.0, 1.0), [0.0, 1.0], [0.5, 0.5])
    assert m.size == 3
    np.testing.assert_allclose(m.densities(), [0.5, 0.5])
    assert m.cdf(1.0) == pytest.approx(0.5)


def test_mix_and_breakpoint_cap():
    m = mix([uniform_cdf(-1.0, 0.0), uniform_cdf(0.0, 2.0)], [0.5, 0.5])
    assert m.cdf(0.0) == pytest.approx(0.5)
    assert m.densities()[0] == pytest.approx(0.5)
    with pytest.raises(CapExceededError):
        mixture_of_shifts(uniform_cdf(0.0, 1.0), [0.0, 1.0, 2.0], [1 / 3] * 3, cap=5)


# ---------- normal / empirical ----------
def test_standard_normal_is_singleton():
    from hierstein.laws import StandardNormal

    assert StandardNormal() is STANDARD_NORMAL
    assert STANDARD_NORMAL.raw_moment(4) == 3.0
    assert STANDARD_NORMAL.raw_moment(6) == 15.0
    assert STANDARD_NORMAL.cdf(0.0) == 0.5
    # E(Z − t)⁺ at t = 0 is φ(0)
    assert STANDARD_NORMAL.upper_tail_integral(0.0) == pytest.approx(1 / math.sqrt(2 * math.pi))


def test_empirical_sample():
    e = EmpiricalSample.from_draws([3.0, 1.0, 2.0, 2.0], seed=5, stream=(0, 2))
    np.testing.assert_array_equal(e.values, [1.0, 2.0, 2.0, 3.0])
    assert e.cdf(2.0) == 0.75
    assert e.cdf_left(2.0) == 0.25
    assert e.quantile(0.5) == 2.0
    np.testing.assert_array_equal(e.breakpoints(), [1.0, 2.0, 3.0])
    s = e.standardized()
    assert s.mean() == pytest.approx(0.0, abs=1e-15)
    assert s.variance() == pytest.approx(1.0)
    with pytest.raises(DegenerateLawError):
        EmpiricalSample.from_draws([1.0, 1.0]).standardized()


def test_cdf_eval_rejects_unknown_kinds():
    assert cdf_eval(rademacher(), 0.0) == 0.5
    with pytest.raises(UnsupportedLawError):
        cdf_eval(object(), 0.0)


# ---------- records ----------
@pytest.mark.parametrize(
    "law",
    [
        standardize(bernoulli(0.2)),
        PiecewiseLinearCDF([-1.0, 0.1, 3.0], [0.0, 0.3, 1.0]),
        EmpiricalSample.from_draws([0.1, -0.2, 1 / 3], seed=9, stream=(1, 4)),
    ],
)
def test_records_keep_every_bit(law):
    back = from_record(to_record(law))
    assert type(back) is type(law)
    assert to_record(back) == to_record(law)


def test_record_of_normal_and_unknown_kind():
    assert from_record(to_record(STANDARD_NORMAL)) is STANDARD_NORMAL
    with pytest.raises(UnsupportedLawError):
        from_record("gamma n=0\n")
    assert isinstance(from_record("discrete n=1\n0 1\n"), DiscreteDistribution)


# ---------- invariants over random laws ----------
def _random_discrete(rng, max_atoms=8):
    n = int(rng.integers(2, max_atoms + 1))
    return make_discrete(rng.normal(size=n) * 3, rng.uniform(0.05, 1.0, size=n))


def _random_piecewise(rng):
    n = int(rng.integers(2, 7))
    x = np.sort(rng.normal(size=n) * 2)
    F = np.concatenate(([0.0], np.sort(rng.uniform(size=n - 2)), [1.0]))
    return PiecewiseLinearCDF(x, F)


def test_standardize_is_idempotent():
    rng = np.random.default_rng(41)
    for _ in range(60):
        once = standardize(_random_discrete(rng))
        twice = standardize(once)
        assert twice.size == once.size
        np.testing.assert_allclose(twice.atoms, once.atoms, rtol=0, atol=1e-12)
        np.testing.assert_array_equal(twice.probs, once.probs)


def test_make_discrete_is_idempotent():
    rng = np.random.default_rng(42)
    for _ in range(60):
        d = _random_discrete(rng)
        again = make_discrete(d.atoms, d.probs)
        np.testing.assert_array_equal(again.atoms, d.atoms)
        np.testing.assert_allclose(again.probs, d.probs, rtol=0, atol=1e-15)


def test_cdf_eval_is_monotone_on_random_grids():
    rng = np.random.default_rng(43)
    for i in range(60):
        law = _random_discrete(rng) if i % 2 else _random_piecewise(rng)
        grid = np.sort(rng.normal(size=200) * 4)
        values = np.asarray(cdf_eval(law, grid))
        assert np.all(np.diff(values) >= 0)
        assert values.min() >= 0.0 and values.max() <= 1.0


def test_merge_runs_are_anchored_at_their_first_atom():
    from hierstein.utils.numeric import merge_atoms

    # every neighbouring gap is below tol, but the chain spans 3.6e-12
    v, w = merge_atoms(np.array([0.0, 0.9e-12, 1.8e-12, 2.7e-12, 3.6e-12]), np.ones(5))
    np.testing.assert_array_equal(v, [0.0, 1.8e-12, 3.6e-12])
    np.testing.assert_array_equal(w, [2.0, 2.0, 1.0])
    assert np.all(np.diff(v) > 1e-12)
    v2, w2 = merge_atoms(v, w)
    np.testing.assert_array_equal(v2, v)
    np.testing.assert_array_equal(w2, w)


def test_bad_law_arrays_raise_package_errors():
    from hierstein.errors import HierSteinError, InvalidLawError

    with pytest.raises(InvalidLawError) as err:
        DiscreteDistribution([1.0, 0.0], [0.5, 0.5])
    assert isinstance(err.value, HierSteinError)
    assert err.value.exit_code == 2
    with pytest.raises(InvalidLawError):
        DiscreteDistribution([0.0, 1.0], [0.5, 0.4])
    with pytest.raises(InvalidLawError):
        PiecewiseLinearCDF([0.0, 1.0], [0.0, 0.9])
    with pytest.raises(InvalidLawError):
        bernoulli(1.5)
