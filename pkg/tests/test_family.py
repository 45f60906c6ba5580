import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from sqrgm.errors import EmptySliceError, InvalidParamsError
from sqrgm.family import (
    FamilyTag,
    node_conditional_valid,
    node_log_partition,
    node_log_partition_and_grad,
    node_log_partition_grad,
    node_log_partition_quadrature,
    node_mode,
    node_moments_quadrature,
    poisson_support_size,
    sample_node_conditional,
    slice_interval,
    sqrt_stat,
    sufficient_stat,
)

EXP, POIS, GAUSS = FamilyTag.EXPONENTIAL, FamilyTag.POISSON, FamilyTag.GAUSSIAN

# 30-digit mpmath quadrature / summation, frozen
FROZEN = [
    (EXP, (-1.0, 1.0), 1.0043874786615189),
    (EXP, (-2.0, -3.0), -2.1791445681609824),
    (EXP, (-0.1, 5.0), 68.135680494849865),
    (EXP, (0.0, -1.0), 0.69314718055994531),
    (POIS, (-1.0, 0.5), 0.56857819821914341),
    (POIS, (2.0, -2.0), 2.6840542489062499),
    (POIS, (2.0, 2.0), 13.223572904580053),
]


@pytest.mark.parametrize("tag,params,expected", FROZEN)
def test_frozen_oracle_values(tag, params, expected):
    assert node_log_partition(tag, params) == pytest.approx(expected, rel=1e-13, abs=1e-13)


def test_trivial_closed_forms():
    # eta2 = 0 reduces to the plain exponential / Poisson / Gaussian
    assert node_log_partition(EXP, (-2.0, 0.0)) == pytest.approx(-np.log(2.0), abs=1e-14)
    assert node_log_partition(POIS, (0.0, 0.0)) == pytest.approx(1.0, abs=1e-14)
    assert node_log_partition(GAUSS, (-0.5, 0.0)) == pytest.approx(0.5 * np.log(2 * np.pi), abs=1e-14)


def test_family_parse():
    assert FamilyTag.parse(" Poisson ") is POIS
    assert not POIS.continuous and EXP.continuous
    with pytest.raises(ValueError, match="unknown family"):
        FamilyTag.parse("gamma")


def test_gaussian_sqrt_stat_is_signed():
    x = np.array([-2.0, 0.0, 3.0])
    assert np.array_equal(sqrt_stat(GAUSS, x), x)
    assert np.array_equal(sufficient_stat(GAUSS, x), x * x)
    assert np.allclose(sqrt_stat(EXP, [4.0, 9.0]), [2.0, 3.0])


@pytest.mark.parametrize(
    "tag,params,valid",
    [
        (EXP, (-1.0, 3.0), True),
        (EXP, (0.0, -1.0), True),
        (EXP, (0.0, 0.0), False),
        (EXP, (0.0, 1.0), False),
        (EXP, (0.1, -5.0), False),
        (POIS, (5.0, 5.0), True),
        (POIS, (-5.0, -5.0), True),
        (GAUSS, (-1e-3, 100.0), True),
        (GAUSS, (0.0, -1.0), False),
    ],
)
def test_validity_rules(tag, params, valid):
    assert bool(node_conditional_valid(tag, params)) is valid
    if not valid:
        with pytest.raises(InvalidParamsError):
            node_log_partition(tag, params)


def test_vectorised_evaluation_matches_scalar():
    e1 = np.array([-1.0, -0.3, -4.0])
    e2 = np.array([2.0, -1.0, 0.5])
    for tag in (EXP, POIS, GAUSS):
        vec = node_log_partition(tag, (e1, e2))
        assert np.allclose(vec, [node_log_partition(tag, (a, b)) for a, b in zip(e1, e2)], rtol=1e-14)


def test_extreme_branches_agree_with_quadrature():
    # large -eta2 / sqrt(-eta1) exercises the asymptotic series
    for params in [(-0.01, -5.0), (-1.0, -20.0), (-1e-4, -1.0), (-3.0, 40.0)]:
        assert node_log_partition(EXP, params) == pytest.approx(
            node_log_partition_quadrature(EXP, params), abs=1e-8
        )


@pytest.mark.parametrize("tag", [EXP, POIS, GAUSS])
def test_gradient_matches_moments(tag):
    for params in [(-1.0, 0.7), (-0.4, -2.0), (-2.5, 3.0)]:
        _, g1, g2 = node_log_partition_and_grad(tag, params)
        m1, m2 = node_moments_quadrature(tag, params)
        assert g1 == pytest.approx(m1, rel=1e-9)
        assert g2 == pytest.approx(m2, rel=1e-9, abs=1e-12)


def test_forward_difference_gradient_is_coarse_but_close():
    exact = node_log_partition_grad(EXP, (-1.0, 0.5))
    fwd = node_log_partition_grad(EXP, (-1.0, 0.5), eps=1e-3, method="forward")
    assert np.allclose(fwd, exact, rtol=5e-3)
    with pytest.raises(ValueError):
        node_log_partition_grad(EXP, (-1.0, 0.5), method="central")


@settings(max_examples=60, deadline=None)
@given(
    e1=st.floats(-8.0, -0.05),
    e2a=st.floats(-6.0, 6.0),
    e2b=st.floats(-6.0, 6.0),
)
def test_exponential_log_partition_is_increasing_in_eta2(e1, e2a, e2b):
    lo, hi = sorted((e2a, e2b))
    assert node_log_partition(EXP, (e1, lo)) <= node_log_partition(EXP, (e1, hi)) + 1e-12


@settings(max_examples=60, deadline=None)
@given(e1=st.floats(-6.0, 3.0), e2=st.floats(-6.0, 6.0))
def test_poisson_gradient_is_positive_and_finite(e1, e2):
    a, g1, g2 = node_log_partition_and_grad(POIS, (e1, e2))
    assert np.isfinite(a)
    # E[x] >= E[sqrt x] >= 0 for counts
    assert g1 >= g2 - 1e-12 >= -1e-12


def test_poisson_support_grows_with_mean():
    assert poisson_support_size(-2.0, 0.0) < poisson_support_size(2.0, 0.0) < poisson_support_size(4.0, 0.0)


def test_slice_interval_endpoints_sit_on_the_level():
    eta1, eta2 = -1.0, 2.0
    g = lambda x: eta1 * x + eta2 * np.sqrt(x)
    mode = node_mode(EXP, (eta1, eta2))
    assert mode == pytest.approx(1.0)
    level = g(mode) - 0.7
    lo, hi = slice_interval((eta1, eta2), level)
    assert lo < mode < hi
    assert g(lo) == pytest.approx(level, abs=1e-12)
    assert g(hi) == pytest.approx(level, abs=1e-12)
    # a level below g(0) keeps the boundary at zero
    assert slice_interval((eta1, eta2), -1.0)[0] == 0.0
    with pytest.raises(EmptySliceError):
        slice_interval((eta1, eta2), g(mode) + 0.1)


def test_gaussian_slice_is_symmetric_about_the_mode():
    lo, hi = slice_interval((-0.5, 1.0), -1.0, tag=GAUSS)
    assert (lo + hi) / 2 == pytest.approx(1.0)


@pytest.mark.parametrize(
    "tag,params,ref",
    [
        (EXP, (-2.0, 0.0), stats.expon(scale=0.5)),
        (GAUSS, (-0.5, 1.0), stats.norm(1.0, 1.0)),
    ],
)
def test_slice_sampler_marginal(tag, params, ref):
    rng = np.random.default_rng(1)
    x = sample_node_conditional(tag, params, slice_steps=10, rng=rng, size=4000)
    assert stats.kstest(x, ref.cdf).pvalue > 0.01


def test_slice_sampler_with_sqrt_term_matches_moments():
    params = (-1.0, 1.5)
    rng = np.random.default_rng(2)
    x = sample_node_conditional(EXP, params, slice_steps=20, rng=rng, size=20000)
    m1, m2 = node_moments_quadrature(EXP, params)
    assert abs(x.mean() - m1) < 4 * x.std() / np.sqrt(x.size)
    assert abs(np.sqrt(x).mean() - m2) < 4 * np.sqrt(x).std() / np.sqrt(x.size)


def test_poisson_draw_matches_pmf():
    params = (0.3, -0.8)
    rng = np.random.default_rng(3)
    x = sample_node_conditional(POIS, params, slice_steps=1, rng=rng, size=20000)
    m1, _ = node_moments_quadrature(POIS, params)
    assert abs(x.mean() - m1) < 4 * x.std() / np.sqrt(x.size)
    assert np.all(x == np.floor(x)) and x.min() >= 0
