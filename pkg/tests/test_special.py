import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from elliptic_gas import special as sp

mpmath.mp.dps = 40


def rel(a, b):
    return abs(a - b) / abs(b)


def test_erfc_at_zero():
    assert sp.erfc(0.0) == 1.0


def test_erfc_saturates_at_minus_eight():
    tail = float(mpmath.erfc(8))
    assert rel(sp.erfc(8.0), tail) < 1e-13
    assert sp.erfc(-8.0) == 2.0 - tail


def test_erfc_one_matches_both_evaluations():
    assert rel(sp.erfc(1.0), 0.157299207050285130658779364917) < 1e-13
    x = np.array([1.0])
    series = 1.0 - sp._erf_series(x)[0]
    cf = sp._erfc_cf(x)[0]
    assert rel(series, cf) < 1e-13


def test_erfc_branches_agree_across_split():
    x = np.linspace(1.2, 2.0, 17)
    assert np.all(np.abs(1.0 - sp._erf_series(x) - sp._erfc_cf(x)) / sp._erfc_cf(x) < 1e-13)


@given(st.floats(-8, 8))
def test_erfc_relative_accuracy(x):
    assert rel(sp.erfc(x), float(mpmath.erfc(x))) <= 1e-13


@given(st.floats(-8, 8))
def test_erfc_reflection(x):
    assert abs(sp.erfc(x) + sp.erfc(-x) - 2.0) <= 1e-14


def test_erfc_monotone_and_vectorized():
    x = np.linspace(-8, 8, 4001)
    y = sp.erfc(x)
    assert isinstance(y, np.ndarray) and y.shape == x.shape
    assert np.all(np.diff(y) <= 0)


def test_elliptic_trivial_values():
    assert sp.ellip_K(0.0) == pytest.approx(math.pi / 2, rel=1e-15)
    assert sp.ellip_E(0.0) == pytest.approx(math.pi / 2, rel=1e-15)
    assert sp.ellip_E(1.0) == 1.0
    with pytest.raises(ValueError):
        sp.ellip_K(1.0)


def _quad_K(k):
    return float(mpmath.quad(lambda th: 1 / mpmath.sqrt(1 - k ** 2 * mpmath.sin(th) ** 2), [0, mpmath.pi / 2]))


def _quad_E(k):
    return float(mpmath.quad(lambda th: mpmath.sqrt(1 - k ** 2 * mpmath.sin(th) ** 2), [0, mpmath.pi / 2]))


def test_elliptic_at_table_modulus():
    k = 2 * math.sqrt(0.5) / 1.5
    assert rel(sp.ellip_K(k), _quad_K(k)) < 1e-12
    assert rel(sp.ellip_E(k), _quad_E(k)) < 1e-12


def test_elliptic_against_quadrature_on_fifty_moduli():
    for k in np.linspace(0.01, 0.99, 50):
        K, E = sp.ellip_K(k), sp.ellip_E(k)
        assert E <= K
        assert rel(K, _quad_K(k)) < 1e-11
        assert rel(E, _quad_E(k)) < 1e-11


def test_log_factorial_examples():
    assert sp.log_factorial(0) == 0.0
    assert sp.log_factorial(5) == pytest.approx(math.log(120), abs=1e-15)
    exact = math.fsum(math.log(i) for i in range(2, 301))
    assert abs(sp.log_factorial(300) - exact) < 1e-12
    with pytest.raises(ValueError):
        sp.log_factorial(-1)


def test_log_factorial_stirling_boundary():
    for j in (255, 256, 257, 258, 1000, 10 ** 6):
        assert abs(sp.log_factorial(j) - float(mpmath.loggamma(j + 1))) < 1e-12 * max(1.0, j / 1e4)


def test_log_factorial_increments():
    j = np.arange(0, 10_000)
    vals = np.array([sp.log_factorial(int(k)) for k in range(0, 10_001)])
    # differences of large values are limited by a few ulps of the values
    tol = 4 * np.spacing(vals[1:]) + 1e-13
    assert np.all(np.abs(np.diff(vals) - np.log(j + 1.0)) <= tol)


def test_logsumexp_examples():
    assert sp.logsumexp_accumulate([0.0]) == 0.0
    assert sp.logsumexp_accumulate([math.log(2), math.log(3)]) == pytest.approx(math.log(5), abs=1e-15)
    assert sp.logsumexp_accumulate([-math.inf]) == -math.inf
    with pytest.raises(ValueError):
        sp.logsumexp_accumulate([])


def test_logsumexp_streaming_against_high_precision():
    rng = np.random.default_rng(3)
    terms = rng.uniform(-700, 700, 10_000)
    ref = mpmath.log(mpmath.fsum(mpmath.exp(mpmath.mpf(float(t))) for t in terms))
    got = sp.logsumexp_accumulate(iter(terms))
    assert abs(got - float(ref)) / abs(float(ref)) < 1e-12


@given(st.lists(st.floats(-1e4, 1e4), min_size=1, max_size=30))
def test_logsumexp_bounds(terms):
    got = sp.logsumexp_accumulate(terms)
    assert max(terms) - 1e-9 <= got <= max(terms) + math.log(len(terms)) + 1e-9


def test_array_accumulator_matches_scalar():
    rng = np.random.default_rng(1)
    terms = rng.uniform(-50, 50, (20, 3))
    acc = sp.LogSumAccumulator(3)
    for row in terms:
        acc.add(row)
    for c in range(3):
        assert acc.result()[c] == pytest.approx(sp.logsumexp_accumulate(terms[:, c]), abs=1e-12)


def test_scaled_sum_accumulator():
    acc = sp.ScaledSumAccumulator(())
    acc.add(1 + 1j, 1000.0)
    acc.add(2 - 1j, 1000.0 + math.log(2))
    res = acc.result()
    want = (1 + 1j) + 2 * (2 - 1j)
    assert res.log_mag == pytest.approx(1000 + math.log(abs(want)), abs=1e-12)
    assert res.phase == pytest.approx(np.angle(want), abs=1e-12)


def test_scaled_complex_round_trip_and_extreme_range():
    z = 3 - 4j
    s = sp.ScaledComplex.from_complex(z)
    assert s.value() == pytest.approx(z, rel=1e-15)
    big = sp.ScaledComplex.from_log(1e6 + 0.5j)
    small = sp.ScaledComplex.from_log(-1e6 - 0.25j)
    prod = big * small
    assert math.isfinite(big.log_mag) and math.isfinite(small.log_mag)
    assert prod.value() == pytest.approx(np.exp(0.25j), rel=1e-9)
    assert big.conj().phase == pytest.approx(-0.5)
    assert big.scale_by(-1e6).value() == pytest.approx(np.exp(0.5j), rel=1e-9)
    zero = sp.ScaledComplex.from_parts(0.0, 5.0)
    assert zero.log_mag == -math.inf
