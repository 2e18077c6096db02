import math

import numpy as np
import pytest

from glvort import fields as fl
from glvort import obstacle as ob
from glvort.specfun import bessel_i

THRESHOLD = 2.379233835712049956  # mpmath


def test_activation_threshold():
    assert ob.activation_threshold() == pytest.approx(THRESHOLD, rel=1e-14)
    assert 1 / bessel_i(0, 1.0) == pytest.approx(1 - 1 / (2 * THRESHOLD), rel=1e-14)


@pytest.mark.parametrize("kw", [dict(lam=0.0), dict(lam=1.0, tolerance=1e-13), dict(lam=1.0, omega=2.0)])
def test_problem_validation(kw):
    lam = kw.pop("lam")
    with pytest.raises(ValueError):
        ob.disk_problem(lam, 33, **kw)


def test_annulus_domain_rejected():
    with pytest.raises(ValueError):
        ob.ObstacleProblem(4.0, fl.DomainGeometry.annulus(0.2, 1.0), fl.GridSpec.square(1.0, 33))


def test_below_threshold_no_contact():
    s = ob.solve_obstacle(ob.disk_problem(2.0, 64))
    assert not s.coincidence_mask.any()
    assert s.complementarity_residual < 1e-9


def test_contact_and_energy():
    s = ob.solve_obstacle(ob.disk_problem(4.0, 96))
    assert s.coincidence_mask.any()
    assert s.psi == 0.875
    assert s.field.values[s.field.valid].min() >= s.psi
    assert s.complementarity_residual < 1e-9
    e = np.array(s.energies)
    assert np.all(np.diff(e) <= 1e-12 * abs(e[0]))


def test_contact_radius_near_radial_oracle():
    # radial free boundary for lambda = 4 is at rho = 0.394143 (1-D shooting oracle)
    s = ob.solve_obstacle(ob.disk_problem(4.0, 128))
    assert s.coincidence_area == pytest.approx(math.pi * 0.394143**2, rel=0.1)


def test_smallest_activating():
    lam, s = ob.smallest_activating((1, 2, 4, 8), 64)
    assert lam == 4.0 and s.coincidence_mask.any()


def test_nonconvergence():
    with pytest.raises(ob.NonConvergence) as info:
        ob.solve_obstacle(ob.disk_problem(4.0, 64, max_iterations=5))
    assert info.value.iterations == 5 and info.value.residual > 0


def test_square_domain():
    s = ob.solve_obstacle(ob.square_problem(8.0, 48))
    assert s.coincidence_mask.any() and s.complementarity_residual < 1e-9


def test_coincidence_measure_inside():
    s = ob.solve_obstacle(ob.disk_problem(4.0, 128))
    phi = fl.TestFunction((0.0, 0.0), 0.25)
    pairing, flat = ob.coincidence_measure(s, phi)
    assert pairing == pytest.approx(flat, rel=0.02)


def test_operator_and_omega():
    g = fl.GridSpec.square(1.0, 33)
    assert 1 < ob.optimal_omega(g) < 2
    h = np.ones((9, 9))
    np.testing.assert_allclose(ob.apply_operator(h, 0.1)[1:-1, 1:-1], 1.0)


def test_pairing_outside_contact_negligible():
    s = ob.solve_obstacle(ob.disk_problem(4.0, 128))
    phi = fl.TestFunction((0.65, 0.0), 0.2)
    pairing, flat = ob.coincidence_measure(s, phi)
    assert flat == 0.0
    assert abs(pairing) < 1e-4 * s.psi * phi.integral()
