import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wprior.dist import BaseDensity, Exponential, LocationScale, NormalLinReg, Reparameterized, SkewNormal, SkewNormal3
from wprior.errors import CapabilityError, DomainError
from wprior.wim import (
    WimMatrix,
    check_local_expansion,
    sn_alpha_wim,
    wasserstein2_distance,
    wim,
    wim_closed_form,
    wim_generic,
    wim_reparam,
)


def test_logistic_second_moment():
    W = wim_generic(LocationScale(BaseDensity("logistic")), [0.3, 1.2]).entries
    assert np.allclose(W, np.diag([1.0, math.pi ** 2 / 3]), atol=1e-8)


def test_skew_normal_alpha_integral_form_matches_generic():
    for alpha in (-3.0, 0.0, 0.5, 2.0, 8.0):
        gen = wim_generic(SkewNormal(), [alpha], tol=0.0, rel_tol=1e-10).entries[0, 0]
        assert sn_alpha_wim(alpha) == pytest.approx(gen, rel=1e-8)


def test_skew_normal_alpha_large_alpha_order():
    # alpha^5 W(alpha) tends to a constant near 0.7206
    vals = [a ** 5 * sn_alpha_wim(a) for a in (200.0, 400.0, 800.0)]
    assert max(vals) / min(vals) - 1 < 1e-3
    assert vals[-1] == pytest.approx(0.7206, abs=5e-4)


def test_skew_normal3_wim_is_positive_definite():
    W = wim_generic(SkewNormal3(), [10.0, 1.0, 3.0])
    assert W.is_psd() and W.min_eigenvalue() > 0
    # the (alpha, alpha) block of the three-parameter WIM equals the one-parameter WIM
    assert W.entries[2, 2] == pytest.approx(sn_alpha_wim(3.0), rel=1e-7)


def test_sigma_scaling_for_skew_normal3():
    a = wim_generic(SkewNormal3(), [0.0, 1.0, 1.5]).entries
    b = wim_generic(SkewNormal3(), [5.0, 2.0, 1.5]).entries
    # location/scale entries are scale free; alpha entries scale with sigma^2 and sigma
    scale = np.array([[1, 1, 2], [1, 1, 2], [2, 2, 4]], dtype=float)
    assert np.allclose(b, a * scale, rtol=1e-6, atol=1e-9)


def test_regression_conventions():
    X = np.column_stack([np.ones(5), np.arange(5.0)])
    model = NormalLinReg(X)
    unit = wim_closed_form(model, [0, 1, 1]).entries
    additive = wim_closed_form(model, [0, 1, 1], convention="additive").entries
    assert unit[-1, -1] == 1.0 and additive[-1, -1] == 5.0
    assert np.allclose(unit[:2, :2], X.T @ X)
    with pytest.raises(DomainError):
        wim_closed_form(model, [0, 1, 1], convention="other")


def test_wim_dispatch():
    assert wim(Exponential(), [3.0]).method == "closed_form"
    assert wim(SkewNormal3(), [0.0, 1.0, 1.0]).method == "quadrature"
    with pytest.raises(CapabilityError):
        wim_closed_form(SkewNormal3(), [0.0, 1.0, 1.0])


def test_wim_matrix_validation():
    with pytest.raises(DomainError):
        WimMatrix([[1.0, 0.5], [0.0, 1.0]], "closed_form")
    W = WimMatrix([[2.0, 1.0], [1.0, 2.0]], "closed_form")
    assert W.det() == pytest.approx(3.0)
    with pytest.raises(ValueError):
        W.entries[0, 0] = 5.0
    assert W.to_json()["method"] == "closed_form"


def test_reparam_chain_rule_and_validation():
    W = wim_closed_form(LocationScale(), [0.0, 2.0])
    J = np.diag([1.0, 2.0])
    assert np.allclose(wim_reparam(W, J).entries, np.diag([1.0, 4.0]))
    with pytest.raises(DomainError):
        wim_reparam(W, np.eye(3))


def test_generic_reparameterized_log_scale():
    model = Reparameterized(LocationScale(), to_base=lambda phi: np.array([phi[0], math.exp(phi[1])]),
                            jacobian=lambda phi: np.diag([1.0, math.exp(phi[1])]))
    W = wim_generic(model, [0.0, math.log(3.0)]).entries
    assert np.allclose(W, np.diag([1.0, 9.0]), atol=1e-8)


def test_w2_exponential_closed_form():
    # W2^2 between scales a and b is 2 (a - b)^2
    d = wasserstein2_distance(Exponential(), [1.0], Exponential(), [3.0])
    assert d == pytest.approx(2.0 * math.sqrt(2.0), rel=1e-9)


def test_w2_across_families():
    d = wasserstein2_distance(LocationScale(), [0.0, 1.0], SkewNormal3(), [0.0, 1.0, 0.0])
    assert d == pytest.approx(0.0, abs=1e-7)


def test_skew_normal_local_expansion_is_superquadratic():
    deltas = [0.4, 0.2, 0.1, 0.05]
    res = [check_local_expansion(SkewNormal(), [1.0], [h], tol=1e-11) for h in deltas]
    ratios = [b / a for a, b in zip(res, res[1:])]
    assert all(r < 0.25 for r in ratios)
    assert res[-1] < 1e-4


def test_local_expansion_rejects_bad_delta():
    with pytest.raises(DomainError):
        check_local_expansion(LocationScale(), [0.0, 1.0], [0.1])
    with pytest.raises(DomainError):
        check_local_expansion(LocationScale(), [0.0, 1.0], [0.0, -2.0])
    assert check_local_expansion(LocationScale(), [0.0, 1.0], [0.0, 0.0]) == 0.0


@settings(max_examples=25, deadline=None)
@given(st.floats(-20, 20))
def test_skew_normal_alpha_wim_is_even_and_positive(alpha):
    w = sn_alpha_wim(alpha)
    assert w > 0
    assert w == pytest.approx(sn_alpha_wim(-alpha), rel=1e-12)
    assert w <= 2 / math.pi + 1e-12


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 20))
def test_exponential_wim_is_constant(theta):
    assert wim_generic(Exponential(), [theta]).entries[0, 0] == pytest.approx(2.0, abs=1e-7)


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, 3), st.floats(0.2, 3), st.floats(-3, 3))
def test_w2_normal_formula(mu, sigma, shift):
    # W2^2(N(m1, s1), N(m2, s2)) = (m1 - m2)^2 + (s1 - s2)^2
    d = wasserstein2_distance(LocationScale(), [mu, sigma], LocationScale(), [mu + shift, 1.0])
    assert d == pytest.approx(math.hypot(shift, sigma - 1.0), abs=1e-7)
