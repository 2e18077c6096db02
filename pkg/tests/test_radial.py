import math

import numpy as np
import pytest
from scipy import special

from glvort import fields as fl
from glvort import radial as rd

# mpmath, 30 digits
CEILING = 1.2280369298189079757
F_ONE = 1.0382709807893178155
F_STAR = 1.9023958367490785315
R_STAR_OUTER = 2.6945909125756766137
R_MIN = 1.1933125005306973198


def scipy_slope(rho):
    """Independent double-precision route through scipy.special."""
    den = special.k0(2) * special.i0(rho) - special.i0(2) * special.k0(rho)
    a, b = -special.k0(rho) / den, special.i0(rho) / den
    return a * special.i1(2) - b * special.k1(2)


def test_slope_ceiling():
    assert rd.slope_ceiling() == pytest.approx(CEILING, rel=1e-14)


@pytest.mark.parametrize("r", [0.3, 1.0, 1.5, 1.9])
def test_inner_slope_two_routes(r):
    assert rd.inner_slope(r) == pytest.approx(scipy_slope(r), rel=1e-12)


def test_frozen_slopes():
    assert rd.inner_slope(1.0) == pytest.approx(F_ONE, rel=1e-13)
    assert rd.inner_slope(1.5) == pytest.approx(F_STAR, rel=1e-13)


def test_outer_slope_tends_to_ceiling():
    assert -rd.outer_slope(12.0) == pytest.approx(-scipy_slope(12.0), rel=1e-12)
    assert 0 < -rd.outer_slope(12.0) - CEILING < 1e-8
    assert -rd.outer_slope(3.0) > CEILING


def test_match_at_one_and_a_half():
    m = rd.match_annulus(1.5)
    assert m.R == pytest.approx(R_STAR_OUTER, abs=1e-10)
    assert m.match_residual < 1e-10
    assert m.elapsed < 1.0
    assert max(abs(v) for v in m.coefficients.boundary_residuals()) < 1e-13


@pytest.mark.parametrize("r", [0.05, 1.0, 1.19])
def test_no_match_below_threshold(r):
    with pytest.raises(rd.NoMatch):
        rd.match_annulus(r)


def test_smallest_matchable_radius():
    assert rd.smallest_matchable_radius() == pytest.approx(R_MIN, abs=1e-9)
    m = rd.match_annulus(1.2)
    assert m.R > 4 and m.match_residual < 1e-10


@pytest.mark.parametrize("r", [0.0, -1.0, 2.0, 3.0])
def test_inner_radius_validation(r):
    with pytest.raises(ValueError):
        rd.inner_slope(r)


def test_profile_pieces():
    c = rd.match_annulus(1.5).coefficients
    rho = np.array([1.5, 2.0, c.R])
    np.testing.assert_allclose(c.profile(rho), [0.0, 1.0, 0.0], atol=1e-13)
    # ridge slopes balance
    e = 1e-6
    left = (c.h1(2.0) - c.h1(2.0 - e)) / e
    right = (c.h2(2.0 + e) - c.h2(2.0)) / e
    assert left == pytest.approx(-right, rel=1e-5)


def test_annulus_field_and_grid():
    m = rd.match_annulus(1.5)
    f = rd.annulus_field(m, rd.annulus_grid(m, 64))
    X, Y = f.coords()
    assert not f.valid[np.hypot(X, Y) < 0.75].any()
    with pytest.raises(fl.GridError):
        rd.annulus_field(m, fl.GridSpec.square(2.0, 64))


def test_multiline_zero_set():
    for n in (2, 3, 5):
        th = rd.multiline_angles(n)
        f = rd.multiline_field(n, fl.GridSpec.square(1.0, 33))
        vals, _ = fl.interpolate_cubic(f, 0.5 * np.cos(th), 0.5 * np.sin(th))
        assert np.all(np.abs(vals) < 5e-3)
        assert np.all(f.values >= 0)
    with pytest.raises(ValueError):
        rd.multiline_field(1, fl.GridSpec.square(1.0, 33))
    with pytest.raises(ValueError):
        rd.multiline_field(13, fl.GridSpec.square(1.0, 33))


def test_flip_exponent():
    x = np.array([-0.8, -0.2, 0.0, 0.3, 0.6])
    G = rd.flip_exponent(x, [-0.5, 0.5])
    # slope +1 left of -0.5, -1 on (-0.5, 0.5), +1 right of 0.5
    np.testing.assert_allclose(G, [0.2, 0.2, 0.0, -0.3, -0.4], atol=1e-15)
    np.testing.assert_allclose(rd.flip_exponent(x, []), x)


def test_nonbv_validation():
    spec = fl.GridSpec.square(1.0, 33)
    with pytest.raises(ValueError):
        rd.nonbv_field([0.5, 0.2], spec)
    with pytest.raises(ValueError):
        rd.nonbv_field([1.5], spec)
    f = rd.nonbv_field([0.0], spec)
    assert f.values.max() == pytest.approx(1.0)


def test_slab_and_disk_fields():
    f = rd.slab_field(fl.GridSpec.square(1.0, 33))
    assert f.values.max() == 1.0
    d = rd.disk_solution_field(fl.GridSpec.square(1.0, 33))
    assert d.values[0, 16] == pytest.approx(1.0, abs=1e-14)
    assert d.values[16, 16] == pytest.approx(1 / special.i0(1.0), rel=1e-14)


def test_slopes_blow_up_near_ridge():
    assert rd.inner_slope(1.999) > 100
    assert rd.outer_slope(2.001) < -100
    c = rd.annulus_coefficients(1.999, 3.0)
    assert max(abs(v) for v in c.boundary_residuals()) < 1e-10
