import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from bdqcd.distributions import (
    DensityModel, HypothesisSet, bernoulli, closest_alternatives, exponential, gaussian,
    kl_between, kl_divergence, llr_second_moment, llr_variance_between, log_likelihood_ratio,
)
from bdqcd.errors import ConfigurationError, DomainError, InvalidArgumentError

HS013 = HypothesisSet.gaussian_means([0, 1, 3], 1.0)


def scipy_kl(p, q):
    """Independent oracle: integrate scipy.stats densities directly."""
    if p.family == "gaussian":
        P = stats.norm(p.params["mean"], math.sqrt(p.params["variance"]))
        Qd = stats.norm(q.params["mean"], math.sqrt(q.params["variance"]))
        lo, hi = P.ppf(1e-15), P.isf(1e-15)
        return integrate.quad(lambda x: P.pdf(x) * (P.logpdf(x) - Qd.logpdf(x)), lo, hi,
                              epsabs=1e-12, limit=500)[0]
    if p.family == "exponential":
        P, Qd = stats.expon(scale=1 / p.params["rate"]), stats.expon(scale=1 / q.params["rate"])
        return integrate.quad(lambda x: P.pdf(x) * (P.logpdf(x) - Qd.logpdf(x)), 0, np.inf,
                              epsabs=1e-12, limit=500)[0]
    P, Qd = stats.bernoulli(p.params["p"]), stats.bernoulli(q.params["p"])
    return sum(P.pmf(k) * (P.logpmf(k) - Qd.logpmf(k)) for k in (0, 1))


def test_llr_gaussian_value():
    # log N(x;1,1) - log N(x;0,1) = x - 1/2
    assert log_likelihood_ratio(HS013, 1, 0, 0.3) == pytest.approx(-0.2, abs=1e-12)
    assert log_likelihood_ratio(HS013, 0, 1, 0.3) == pytest.approx(0.2, abs=1e-12)


def test_llr_errors():
    with pytest.raises(InvalidArgumentError):
        log_likelihood_ratio(HS013, 1, 1, 0.0)
    hs = HypothesisSet([exponential(1.0), exponential(2.0)])
    with pytest.raises(DomainError):
        log_likelihood_ratio(hs, 1, 0, -1.0)
    hb = HypothesisSet([bernoulli(0.3), bernoulli(0.6)])
    with pytest.raises(DomainError):
        log_likelihood_ratio(hb, 1, 0, 0.5)


def test_kl_examples():
    assert kl_divergence(HS013, 1, 0) == pytest.approx(0.5)
    assert kl_divergence(HS013, 2, 0) == pytest.approx(4.5)
    assert kl_divergence(HS013, 2, 1) == pytest.approx(2.0)
    assert kl_divergence(HS013, 0, 2) == pytest.approx(4.5)


def test_closest_alternatives_013():
    alt = closest_alternatives(HS013)
    assert alt.I_q[1:] == (0.5, 2.0)
    assert alt.j_star[1:] == (0, 1)
    assert alt.I0 == 0.5 and alt.j0_star == 1
    assert alt.I_star == 0.5
    assert alt.assumption1_ok


def test_closest_alternatives_tie_flagged():
    alt = closest_alternatives(HypothesisSet.gaussian_means([0, 1, -1], 1.0))
    assert alt.I0 == 0.5
    assert alt.j0_star == 1  # tie between 1 and 2 broken toward the smallest index
    assert alt.ties and not alt.assumption1_ok


@pytest.mark.parametrize("p,q", [
    (gaussian(0, 1), gaussian(1, 1)),
    (gaussian(0.5, 2.0), gaussian(-1, 0.5)),
    (exponential(1.0), exponential(2.5)),
    (exponential(3.0), exponential(0.4)),
    (bernoulli(0.2), bernoulli(0.7)),
])
def test_kl_quad_matches_closed_form(p, q):
    closed = kl_between(p, q, "closed")
    quad = kl_between(p, q, "quad")
    assert quad == pytest.approx(closed, rel=1e-6)
    assert closed == pytest.approx(scipy_kl(p, q), rel=1e-6)


@pytest.mark.parametrize("p,q", [
    (gaussian(0, 1), gaussian(1, 1)),
    (gaussian(0.5, 2.0), gaussian(-1, 0.5)),
    (exponential(1.0), exponential(2.5)),
    (bernoulli(0.2), bernoulli(0.7)),
])
def test_llr_variance_quad_matches_closed_form(p, q):
    assert llr_variance_between(p, q, "quad") == pytest.approx(
        llr_variance_between(p, q, "closed"), rel=1e-6)


def test_llr_variance_gaussian_unit():
    assert llr_second_moment(HS013, 1, 0) == pytest.approx(1.0)


def test_cross_family_uses_quadrature():
    # N(0,1) has mass below zero, Exp(1) does not: support not covered
    assert kl_between(gaussian(0, 1), exponential(1.0)) == math.inf
    hs = HypothesisSet([gaussian(0, 1), exponential(1.0)])
    assert hs.cross_family
    with pytest.raises(ConfigurationError):
        hs.validate()


def test_invalid_parameters():
    with pytest.raises(InvalidArgumentError):
        gaussian(0, 0)
    with pytest.raises(InvalidArgumentError):
        bernoulli(1.0)
    with pytest.raises(InvalidArgumentError):
        exponential(-1)
    with pytest.raises(InvalidArgumentError):
        DensityModel("cauchy", {})


def test_sampling_reproducible():
    d = gaussian(1.0, 2.0)
    a = d.sample(np.random.default_rng(5), 100)
    b = d.sample(np.random.default_rng(5), 100)
    assert np.array_equal(a, b)


def test_sampling_moments():
    x = exponential(2.0).sample(np.random.default_rng(0), 200_000)
    assert x.mean() == pytest.approx(0.5, rel=0.01)
    x = bernoulli(0.3).sample(np.random.default_rng(0), 200_000)
    assert set(np.unique(x)) <= {0.0, 1.0}
    assert x.mean() == pytest.approx(0.3, abs=0.005)


def test_logpdf_table_shape_independent():
    x = np.random.default_rng(1).standard_normal((7, 3))
    tab = HS013.logpdf_table(x)
    assert tab.shape == (7, 3, 3)
    assert tab[4, 2, 1] == HS013.logpdf_table(float(x[4, 2]))[1]


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 5), st.floats(0.1, 5))
def test_kl_nonnegative_and_zero_only_on_equal(m1, m2, v1, v2):
    k = kl_between(gaussian(m1, v1), gaussian(m2, v2))
    assert k >= 0
    if m1 == m2 and v1 == v2:
        assert k == pytest.approx(0.0, abs=1e-15)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-10, 10))
def test_llr_antisymmetric(m1, m2, x):
    hs = HypothesisSet.gaussian_means([0.0, m1, m2], 1.0)
    assert log_likelihood_ratio(hs, 1, 2, x) == pytest.approx(
        -log_likelihood_ratio(hs, 2, 1, x), abs=1e-9)


@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_bernoulli_logpdf_finite_on_support(p, q):
    hs = HypothesisSet([bernoulli(p), bernoulli(q)])
    for x in (0.0, 1.0):
        assert np.isfinite(hs.logpdf_table(x)).all()
