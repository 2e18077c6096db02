import math

import numpy as np
import pytest
from scipy import integrate

from glvort import fields as fl
from glvort import measure as ms
from conftest import annulus, extracted, matched, multiline, obstacle, slab


def cfield(fn, n=65):
    t = fl.GridField.from_function(lambda x, y: 0 * x, fl.GridSpec.square(1.0, n))
    X, Y = t.coords()
    return ms.ComplexGridField.from_array(t, fn(X + 1j * Y))


def test_dz_of_quadratic():
    f = fl.GridField.from_function(lambda x, y: x * x - y * y, fl.GridSpec.square(1.0, 33))
    X, Y = f.coords()
    s = (slice(2, -2), slice(2, -2))
    np.testing.assert_allclose(ms.dz(f, "central")[s], (X + 1j * Y)[s], atol=1e-12)


def test_sqrt_branch_squares_back():
    w = cfield(lambda z: (z + 2.0) ** 2 * np.exp(1j * z.real))
    g = ms.sqrt_branch(w, (0.0, 0.0), 0.6)
    d = g.valid
    np.testing.assert_allclose((g.values**2)[d], w.values[d], rtol=1e-13)
    # continuous: neighbouring nodes never differ by a sign flip
    jumps = np.abs(np.diff(g.values, axis=1))[d[:, 1:] & d[:, :-1]]
    assert jumps.max() < 0.2


def test_log_branch_winds_continuously():
    # w = z^3 around a disk avoiding the origin winds by less than a full turn
    w = cfield(lambda z: z**3)
    base = ms.principal_log_at(w, (0.5, 0.0))
    v = ms.log_branch(w, (0.5, 0.0), 0.4, base)
    np.testing.assert_allclose(np.exp(v.values[v.valid]), w.values[v.valid], rtol=1e-12)
    assert np.abs(v.values.imag[v.valid]).max() < math.pi


def test_branch_errors():
    w = cfield(lambda z: z)
    with pytest.raises(ms.BranchError):
        ms.principal_log_at(w, (0.0, 0.0))
    with pytest.raises(ms.BranchError):
        ms.log_branch(w, (0.5, 0.0), 0.3, 0.0)  # exp(0) != w(center)
    with pytest.raises(ms.BranchError):
        ms.sqrt_branch(w, (0.3, 0.0), 0.5)  # disk contains the zero


def test_sign_field_and_flip():
    h = slab(128)
    w = ms.ComplexGridField.from_array(h, ms.dz(h) ** 2)
    g = ms.sqrt_branch(w, (0.3, 0.0), 0.5)
    theta = ms.sign_field(h, g, 0.1)
    flipped = ms.sign_field(h, ms.ComplexGridField.from_array(h, -g.values, mask=g.valid), 0.1)
    np.testing.assert_array_equal(flipped.values, -theta.values)
    assert set(np.unique(theta.values[theta.valid])) <= {-1.0, 1.0}


def test_potential_of_constant():
    g = cfield(lambda z: np.ones_like(z))
    P = ms.potential(g, base=1.0, center=(0.0, 0.0))
    X, _ = P.field.coords()
    np.testing.assert_allclose(P.field.values, 2 * X + 1.0, atol=1e-12)
    assert P.discrepancy < 1e-12


def test_potential_rejects_curl():
    g = cfield(lambda z: 1j * z.real)  # grad H = (0, -2x) is not a gradient
    with pytest.raises(ms.PotentialError):
        ms.potential(g, tol=1e-6)


def test_slab_curve():
    r = extracted("slab", 128)
    h = r.field
    c = r.curve
    assert len(c.components) == 1
    V = c.vertices()
    assert np.abs(V[:, 0]).max() < 2 * h.dx
    comp = c.components[0]
    assert comp.sigma == 1 and comp.sigma_constant
    assert comp.h_spread < 1e-3
    np.testing.assert_allclose(comp.density, 2.0, rtol=0.01)


def test_slab_decomposition():
    r = extracted("slab", 128)
    bumps = [fl.TestFunction((0.0, y), 0.3) for y in (-0.4, 0.0, 0.4)]
    rep = ms.decomposition_check(r.field, r.curve, bumps, r.flat_mask)
    assert np.all(np.abs(rep.residuals) < 0.01 * np.abs(rep.pairings))
    d = rep.to_dict()
    assert d["curve_components"] == 1 and len(d["bumps"]) == 3


def test_annulus_curve():
    r = extracted("annulus", 128)
    m = matched()
    V = r.curve.vertices()
    assert np.abs(np.hypot(V[:, 0], V[:, 1]) - 2.0).max() < r.field.dx
    comp = r.curve.components[0]
    assert len(r.curve.components) == 1 and comp.closed and comp.sigma_constant
    np.testing.assert_allclose(comp.density, 2 * m.inner_slope_value, rtol=0.03)
    assert comp.length == pytest.approx(4 * math.pi, rel=1e-3)


def test_multiline_diameters():
    h = multiline(2, 128)
    r = ms.extract_measure(h)
    fit = ms.fit_diameters(r.curve, 2)
    assert fit.errors_deg.max() < 1.0 and fit.two_sided.all()


def test_obstacle_curve_empty():
    s = obstacle(4.0, 128)
    r = ms.extract_measure(s.field)
    assert r.curve.empty
    inside = r.flat_mask & s.coincidence_mask
    assert inside.sum() >= 0.9 * s.coincidence_mask.sum()


def test_thresholds_scale():
    h = slab(128)
    assert ms.default_grad_threshold(h) > ms.default_flat_threshold(h) > 0


def test_fit_diameters_too_few():
    empty = ms.CurveMeasure([])
    with pytest.raises(ValueError):
        ms.fit_diameters(empty, 2)


def test_line_integral_quadrature():
    # straight vertical curve with density 2: integral of 2 phi along x = 0
    r = extracted("slab", 128)
    phi = fl.TestFunction((0.0, 0.1), 0.4)
    exact, _ = integrate.quad(lambda y: 2 * phi(0.0, y), -0.3, 0.5)
    assert r.curve.line_integral(phi) == pytest.approx(exact, rel=1e-3)
