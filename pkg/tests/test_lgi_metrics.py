import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from qndlg.errors import DomainError, ParameterError
from qndlg.lgi_metrics import (
    MeasurementRecord,
    corr_sign,
    k3_triple,
    k_n,
    pairwise_correlators,
    sign_correlation,
)


def arctan_form(a, b, c):
    """Correlator written with the arctangent, used as an independent cross-check."""
    alpha = math.atan(math.sqrt(a * c / b ** 2 - 1))
    return (1 - 2 * alpha / math.pi) * math.copysign(1.0, b)


def test_corr_sign_examples():
    assert corr_sign(1, 0, 1) == 0.0
    assert corr_sign(1, 1, 1) == 1.0
    assert corr_sign(1, -1, 1) == -1.0
    assert corr_sign(1, 0.5, 1) == pytest.approx(1 / 3, abs=1e-15)


@pytest.mark.parametrize("a,b,c", [(1, 0.3, 2), (5, -4.9, 5), (4.375e8, 3.125e8, 4.375e8),
                                   (0.01, 1e-4, 3.0)])
def test_corr_sign_matches_arctan_form(a, b, c):
    assert corr_sign(a, b, c) == pytest.approx(arctan_form(a, b, c), abs=1e-12)


@pytest.mark.parametrize("a,b,c", [(0, 0, 1), (1, 0, -1), (1, 1.1, 1)])
def test_corr_sign_domain(a, b, c):
    with pytest.raises(DomainError):
        corr_sign(a, b, c)


def test_corr_sign_rounding_slack():
    # b^2 exceeding a*c by rounding only is accepted and saturates
    assert corr_sign(1.0, 1.0 + 1e-12, 1.0) == 1.0


pos = st.floats(1e-3, 1e3)
unit = st.floats(-1, 1)


@given(a=pos, c=pos, r=unit)
def test_corr_sign_odd_and_bounded(a, c, r):
    b = r * math.sqrt(a * c)
    v = corr_sign(a, b, c)
    assert -1 <= v <= 1
    assert corr_sign(a, -b, c) == -v


@given(a=pos, c=pos, r1=unit, r2=unit)
def test_corr_sign_monotone(a, c, r1, r2):
    assume(r1 < r2)
    s = math.sqrt(a * c)
    assert corr_sign(a, r1 * s, c) <= corr_sign(a, r2 * s, c)


@given(a=pos, c=pos, r=unit, scale=st.floats(1e-6, 1e6))
def test_corr_sign_scale_invariant(a, c, r, scale):
    b = r * math.sqrt(a * c)
    # asin has infinite slope at |rho| = 1, where one ulp in rho moves the result by ~1e-8
    tol = 1e-12 + 4e-16 / max(math.sqrt(1 - r * r), 1e-8)
    assert abs(corr_sign(scale * a, scale * b, scale * c) - corr_sign(a, b, c)) <= tol


def test_sign_correlation_vectorized():
    np.testing.assert_allclose(sign_correlation([0.0, 0.5, 1.0, 1.0000001]), [0, 1 / 3, 1, 1])


def test_pairwise_diagonal_record():
    rec = MeasurementRecord(labels=(1, 2, 3), mu=np.zeros(3), gamma_y=np.diag([1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(pairwise_correlators(rec), np.eye(3))


def test_pairwise_two_ideal_pulses():
    # two theta=0 QND readouts with the default parameters share var(J_z) = N_A/2
    gamma = np.array([[4.375e8, 3.125e8], [3.125e8, 4.375e8]])
    rec = MeasurementRecord(labels=(1, 2), mu=np.zeros(2), gamma_y=gamma)
    C = pairwise_correlators(rec)
    # closed form, confirmed by a 10^7-sample simulation (0.50624 +- 0.00027)
    assert C[1, 0] == pytest.approx(0.5064965711423003, abs=1e-12)


@settings(max_examples=30)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(2, 6))
def test_pairwise_permutation_equivariance(seed, n):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n + 2))
    gamma = A @ A.T
    perm = rng.permutation(n)
    rec = MeasurementRecord(labels=tuple(range(1, n + 1)), mu=np.zeros(n), gamma_y=gamma)
    prec = MeasurementRecord(labels=tuple(perm + 1), mu=np.zeros(n), gamma_y=gamma[np.ix_(perm, perm)])
    np.testing.assert_allclose(pairwise_correlators(prec),
                               pairwise_correlators(rec)[np.ix_(perm, perm)], atol=1e-15)


def test_pairwise_needs_two():
    with pytest.raises(ParameterError):
        pairwise_correlators(MeasurementRecord(labels=(1,), mu=[0.0], gamma_y=[[1.0]]))


def test_record_rejects_nonpositive_variance():
    with pytest.raises(DomainError):
        MeasurementRecord(labels=(1, 2), mu=np.zeros(2), gamma_y=np.diag([1.0, 0.0]))


def _matrix(n, value):
    C = np.full((n, n), float(value))
    np.fill_diagonal(C, 1.0)
    return C


@pytest.mark.parametrize("value,expected", [(0.0, 1.0), (-1.0, -2.0), (-0.5, -0.5)])
def test_k3_values(value, expected):
    res = k_n(_matrix(3, value))
    assert res.k_value == expected
    assert res.k_reduced == expected
    assert res.violated == (expected < 0)


def test_k_n_reduced():
    res = k_n(_matrix(7, 0.0))
    assert res.k_value == 3 and res.k_reduced == 1.0
    res = k_n(_matrix(9, 0.1))
    assert res.k_value == pytest.approx(36 * 0.1 + 4)
    assert res.k_reduced == pytest.approx((36 * 0.1 + 4) / 4)


def test_k_n_too_small():
    with pytest.raises(ParameterError):
        k_n(np.eye(2))


def test_k3_triple():
    C = np.eye(7)
    assert k3_triple(C, 3, 5, 7) == 1.0
    C[2, 4] = C[4, 2] = C[4, 6] = C[6, 4] = -1.0
    C[2, 6] = C[6, 2] = 1.0
    assert k3_triple(C, 3, 5, 7) == 0.0
    C[2, 6] = C[6, 2] = 0.0
    assert k3_triple(C, 3, 5, 7) == -1.0


@pytest.mark.parametrize("abc", [(3, 3, 5), (5, 3, 7), (0, 1, 2), (1, 2, 8)])
def test_k3_triple_bad_indices(abc):
    with pytest.raises(ParameterError):
        k3_triple(np.eye(7), *abc)


@pytest.mark.parametrize("n", range(3, 10))
def test_deterministic_assignments_obey_bound(n):
    # every deterministic +-1 assignment satisfies K_n >= 0; mixtures follow by linearity
    worst = math.inf
    for q in itertools.product((-1.0, 1.0), repeat=n):
        q = np.array(q)
        worst = min(worst, k_n(np.outer(q, q)).k_value)
    assert worst >= 0
    # the bound is tight for odd n
    if n % 2:
        assert worst == 0
