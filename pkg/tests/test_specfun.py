import math

import mpmath
import numpy as np
import pytest

from glvort import specfun as sf

# mpmath at 30 digits, frozen
I_REF = {(0, 1.0): 1.2660658777520083356, (1, 1.0): 0.56515910399248502721,
         (0, 2.0): 2.2795853023360672674, (1, 2.0): 1.5906368546373290634,
         (3, 0.5): 0.0026451119689902858564, (2, 5.0): 17.505614966624236015}
K_REF = {(0, 1.0): 0.42102443824070833334, (1, 1.0): 0.60190723019723457474,
         (0, 2.0): 0.11389387274953343565, (1, 2.0): 0.13986588181652242728,
         (0, 0.1): 2.4270690247020165578, (0, 10.0): 0.000017780062316167651811}


@pytest.mark.parametrize("key", sorted(I_REF))
def test_i_frozen(key):
    n, x = key
    assert sf.bessel_i(n, x) == pytest.approx(I_REF[key], rel=2e-15)


@pytest.mark.parametrize("key", sorted(K_REF))
def test_k_frozen(key):
    n, x = key
    # K0 at x = 10 loses about four digits to cancellation between I0 log terms
    rel = 1e-11 if x >= 10 else 1e-14
    assert sf.bessel_k(n, x) == pytest.approx(K_REF[key], rel=rel)


def test_live_mpmath_grid():
    mpmath.mp.dps = 30
    for x in np.linspace(0.05, 8.0, 23):
        for n in (0, 1, 4):
            assert sf.bessel_i(n, x) == pytest.approx(float(mpmath.besseli(n, x)), rel=1e-14)
        assert sf.bessel_k(0, x) == pytest.approx(float(mpmath.besselk(0, x)), rel=1e-12)
        assert sf.bessel_k(1, x) == pytest.approx(float(mpmath.besselk(1, x)), rel=1e-12)


def test_derivatives_match_recurrences():
    for x in (0.3, 1.0, 4.0):
        assert sf.evaluate_i(0, x, 1).value == pytest.approx(sf.bessel_i(1, x), rel=1e-14)
        assert sf.evaluate_k(0, x, 1).value == pytest.approx(-sf.bessel_k(1, x), rel=1e-13)
        # I1' = I0 - I1/x
        assert sf.evaluate_i(1, x, 1).value == pytest.approx(sf.bessel_i(0, x) - sf.bessel_i(1, x) / x, rel=1e-13)


def test_values_at_zero():
    assert sf.bessel_i(0, 0.0) == 1.0
    assert sf.bessel_i(3, 0.0) == 0.0


@pytest.mark.parametrize("bad", [(-1, 1.0), (1.5, 1.0), (51, 1.0), (0, -1.0), (0, math.nan), (0, math.inf)])
def test_i_domain(bad):
    with pytest.raises(sf.BesselDomainError):
        sf.evaluate_i(*bad)


@pytest.mark.parametrize("bad", [(0, 0.0), (2, 1.0), (0, -0.5)])
def test_k_domain(bad):
    with pytest.raises(sf.BesselDomainError):
        sf.evaluate_k(*bad)


def test_ode_residuals_small():
    for x in np.linspace(0.2, 6.0, 15):
        assert abs(sf.ode_residual(0, x, "i")) < 1e-10
        assert abs(sf.ode_residual(0, x, "k")) < 1e-10
        assert abs(sf.ode_residual(3, x, "i")) < 1e-10 * max(1.0, sf.bessel_i(3, x) * x * x)


def test_terms_reported():
    v = sf.evaluate_i(0, 1.0)
    assert 5 < v.terms_used < sf.MAX_TERMS


def test_arrays_agree_with_scalar():
    x = np.linspace(0.1, 5.0, 40)
    np.testing.assert_allclose(sf.i_array(0, x), [sf.bessel_i(0, t) for t in x], rtol=1e-14)
    np.testing.assert_allclose(sf.i_array(2, x, 1), [sf.evaluate_i(2, t, 1).value for t in x], rtol=1e-13)
    np.testing.assert_allclose(sf.k0_array(x), [sf.bessel_k(0, t) for t in x], rtol=1e-12)
    np.testing.assert_allclose(sf.k0_array(x, 1), [-sf.bessel_k(1, t) for t in x], rtol=1e-12)


def test_array_domain():
    with pytest.raises(sf.BesselDomainError):
        sf.k0_array([0.0, 1.0])
    with pytest.raises(sf.BesselDomainError):
        sf.i_array(0, [-1.0])


def test_displayed_ode_at_one_and_a_half():
    assert abs(sf.ode_residual(0, 1.5, "i")) < 1e-12
    assert abs(sf.ode_residual(0, 1.5, "k")) < 1e-12
