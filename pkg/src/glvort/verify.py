"""Stress-energy tensor and the weak residuals built on it.

T_h = 2 grad h (x) grad h - (|grad h|^2 + h^2) I. A field is stationary
when int T_h grad(phi) = 0 for every test function; the same constraint
reads d_zbar[(d_z h)^2] = 1/4 d_z(h^2) in complex notation, with
d_z = (d_1 - i d_2)/2. Its integral consequence on a domain is the
Pohozaev identity, evaluated here by boundary quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import (DomainGeometry, GridField, SupportError, TestFunction, _support_nodes,
                     boundary_integrals, gradient, interior_integral, laplacian)

GRADIENT_SCHEME = "eno"

CONSISTENT = "CONSISTENT"
INCONSISTENT = "INCONSISTENT"
NOT_STATIONARY = "NOT_STATIONARY"


class NotStarShaped(ValueError):
    pass


class BoundaryDataNonzero(ValueError):
    """Star-shaped check needs h = 0 on the boundary."""


@dataclass(frozen=True, eq=False)
class TensorField:
    T11: GridField
    T12: GridField
    T22: GridField

    @property
    def T21(self) -> GridField:
        return self.T12


def stress_tensor(h: GridField, scheme: str = GRADIENT_SCHEME) -> TensorField:
    hx, hy = gradient(h, scheme)
    a, b, u = hx.values, hy.values, h.values
    t11 = a * a - b * b - u * u
    t22 = -t11 - 2 * u * u
    t12 = 2 * a * b
    return TensorField(h.with_values(t11), h.with_values(t12), h.with_values(t22))


def _window(f: GridField, phi: TestFunction):
    sj, si, _ = _support_nodes(f, phi)
    X, Y = np.meshgrid(f.x[si], f.y[sj])
    return (sj, si), X, Y


def weak_divergence(T: TensorField, phi: TestFunction) -> tuple[float, float]:
    """(int T_row1 . grad phi, int T_row2 . grad phi) by the midpoint rule."""
    w, X, Y = _window(T.T11, phi)
    px, py = phi.grad(X, Y)
    dA = T.T11.dx * T.T11.dy
    d1 = np.sum(T.T11.values[w] * px + T.T12.values[w] * py) * dA
    d2 = np.sum(T.T21.values[w] * px + T.T22.values[w] * py) * dA
    return float(d1), float(d2)


def complex_residual(h: GridField, phi: TestFunction, scheme: str = GRADIENT_SCHEME) -> complex:
    """<d_zbar W - 1/4 d_z(h^2), phi> with W = (d_z h)^2, all derivatives moved onto phi:

        -int W d_zbar(phi) + 1/4 int h^2 d_z(phi).

    For real phi this equals -D1/8 + i D2/8 in terms of weak_divergence.
    """
    w, X, Y = _window(h, phi)
    hx, hy = gradient(h, scheme)
    dzh = 0.5 * (hx.values[w] - 1j * hy.values[w])
    W = dzh * dzh
    px, py = phi.grad(X, Y)
    dz_phi = 0.5 * (px - 1j * py)
    dzbar_phi = 0.5 * (px + 1j * py)
    u2 = h.values[w] ** 2
    return complex(np.sum(-W * dzbar_phi + 0.25 * u2 * dz_phi) * h.dx * h.dy)


def divergence_battery(h: GridField, bumps, scheme: str = GRADIENT_SCHEME) -> np.ndarray:
    """|(D1, D2)| for each bump in the battery."""
    T = stress_tensor(h, scheme)
    return np.array([math.hypot(*weak_divergence(T, phi)) for phi in bumps])


def complex_battery(h: GridField, bumps, scheme: str = GRADIENT_SCHEME) -> np.ndarray:
    return np.array([abs(complex_residual(h, phi, scheme)) for phi in bumps])


@dataclass(frozen=True)
class PohozaevTerms:
    boundary_normal: float  # 1/2 int (x.nu)(h_tau^2 - h_nu^2 + h^2)
    boundary_tangent: float  # int (x.tau) h_tau h_nu
    bulk: float  # int h^2

    @property
    def residual(self) -> float:
        return self.boundary_normal - self.boundary_tangent - self.bulk


def pohozaev_terms(h: GridField, geom: DomainGeometry, origin=(0.0, 0.0)) -> PohozaevTerms:
    tr = boundary_integrals(h, geom)
    x = geom.points - np.asarray(origin, dtype=float)
    xnu = np.einsum("ij,ij->i", x, geom.normals)
    xtau = np.einsum("ij,ij->i", x, geom.tangents)
    w = geom.weights
    bn = 0.5 * np.sum(w * xnu * (tr.dtau**2 - tr.dnu**2 + tr.value**2))
    bt = np.sum(w * xtau * tr.dtau * tr.dnu)
    bulk = interior_integral(h, geom, h.values**2)
    return PohozaevTerms(float(bn), float(bt), float(bulk))


def pohozaev_residual(h: GridField, geom: DomainGeometry, origin=(0.0, 0.0)) -> float:
    """1/2 int_bd (x.nu)(h_tau^2 - h_nu^2 + h^2) - int_bd (x.tau) h_tau h_nu - int h^2."""
    return pohozaev_terms(h, geom, origin).residual


@dataclass(frozen=True)
class StarShapedReport:
    status: str
    bulk: float  # int h^2
    boundary_term: float  # -1/2 int (x.nu) h_nu^2
    residual: float


def starshaped_conclusion(h: GridField, geom: DomainGeometry, origin=(0.0, 0.0),
                          boundary_tol: float = 1e-6, bulk_tol: float = 1e-8,
                          identity_tol: float = 1e-3) -> StarShapedReport:
    """Zero boundary data on a star-shaped domain forces int h^2 = 0 for a stationary field.

    CONSISTENT: int h^2 below ``bulk_tol``. INCONSISTENT: int h^2 is large
    although the identity residual is small, which a genuine solution
    cannot do. NOT_STATIONARY: the identity itself fails, so nothing is
    concluded.
    """
    if not geom.is_star_shaped(origin):
        raise NotStarShaped("some boundary node has x.nu < 0")
    tr = boundary_integrals(h, geom)
    worst = float(np.max(np.abs(tr.value)))
    if worst > boundary_tol:
        raise BoundaryDataNonzero(f"max |h| on the boundary is {worst:.3g} > {boundary_tol:g}")
    x = geom.points - np.asarray(origin, dtype=float)
    xnu = np.einsum("ij,ij->i", x, geom.normals)
    boundary_term = float(-0.5 * np.sum(geom.weights * xnu * tr.dnu**2))
    terms = pohozaev_terms(h, geom, origin)
    res = terms.residual
    if terms.bulk <= bulk_tol:
        status = CONSISTENT
    elif abs(res) <= identity_tol:
        status = INCONSISTENT
    else:
        status = NOT_STATIONARY
    return StarShapedReport(status, terms.bulk, boundary_term, res)


# ---------------------------------------------------------------------------
# second-derivative total variation


@dataclass(frozen=True)
class TVReport:
    second: dict  # keys "xx", "xy", "yx", "yy": ||d_j d_i h||(ball)
    mu_abs: float
    sup_h: float
    area: float
    extra: dict = field(default_factory=dict)

    def excess(self) -> float:
        """Largest TV minus |mu|(ball), relative to sup|h| * area."""
        worst = max(self.second.values())
        return (worst - self.mu_abs) / (self.sup_h * self.area) if self.sup_h > 0 else 0.0


def _check_ball(h: GridField, center, radius: float) -> np.ndarray:
    xmin, xmax, ymin, ymax = h.bounds
    cx, cy = center
    pad = 2 * max(h.dx, h.dy)
    if cx - radius - pad < xmin or cx + radius + pad > xmax or cy - radius - pad < ymin or cy + radius + pad > ymax:
        raise SupportError("ball reaches the grid edge")
    X, Y = h.coords()
    near = np.hypot(X - cx, Y - cy) <= radius + pad
    if np.any(near & ~h.valid):
        raise SupportError("ball overlaps masked nodes")
    return X, Y


def _hat_aggregate(dens: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pair a node density with the tensor-hat partition of unity on a lattice of stride m.

    Returns the pairings and the (row, column) indices of the hat centres.
    """
    k = np.arange(-m + 1, m)
    hat = 1.0 - np.abs(k) / m
    ny, nx = dens.shape
    cj = np.arange(0, ny, m)
    ci = np.arange(0, nx, m)
    # separable: rows then columns
    rows = np.zeros((cj.size, nx))
    for a, c in enumerate(cj):
        lo, hi = max(c - m + 1, 0), min(c + m, ny)
        rows[a] = hat[lo - c + m - 1:hi - c + m - 1] @ dens[lo:hi]
    out = np.zeros((cj.size, ci.size))
    for b, c in enumerate(ci):
        lo, hi = max(c - m + 1, 0), min(c + m, nx)
        out[:, b] = rows[:, lo:hi] @ hat[lo - c + m - 1:hi - c + m - 1]
    return out, cj, ci


def tv_second_derivatives(h: GridField, center, radius: float, hat_stride: int = 4,
                          scheme: str = GRADIENT_SCHEME) -> TVReport:
    """Discrete ||d_j d_i h|| over a ball, |mu|(ball), sup|h| and the ball area.

    ||d_j d_i h|| sums |difference of d_i h| across node pairs adjacent in
    direction j whose midpoint lies in the ball, times the transverse
    spacing. |mu| is estimated by pairing the five-point density
    -Lap h + h with a partition of unity of tent functions of half-width
    ``hat_stride`` nodes and summing absolute values over tents centred in
    the ball.
    """
    if not radius > 0:
        raise ValueError("ball radius must be positive")
    X, Y = _check_ball(h, center, radius)
    cx, cy = center
    grads = dict(zip("xy", gradient(h, scheme)))
    second = {}
    for i, gi in grads.items():
        v = gi.values
        # along x: pairs (j, k), (j, k+1)
        mx = np.hypot(0.5 * (X[:, 1:] + X[:, :-1]) - cx, Y[:, 1:] - cy) < radius
        second[i + "x"] = float(np.sum(np.abs(np.diff(v, axis=1))[mx]) * h.dy)
        my = np.hypot(X[1:, :] - cx, 0.5 * (Y[1:, :] + Y[:-1, :]) - cy) < radius
        second[i + "y"] = float(np.sum(np.abs(np.diff(v, axis=0))[my]) * h.dx)
    lap = laplacian(h)
    dens = np.where(lap.valid, -lap.values + h.values, 0.0) * h.dx * h.dy
    pairs, cj, ci = _hat_aggregate(dens, hat_stride)
    CX, CY = np.meshgrid(h.x[ci], h.y[cj])
    inside = np.hypot(CX - cx, CY - cy) < radius
    mu_abs = float(np.sum(np.abs(pairs[inside])))
    ball = np.hypot(X - cx, Y - cy) < radius
    sup_h = float(np.max(np.abs(h.values[ball]))) if ball.any() else 0.0
    return TVReport(second, mu_abs, sup_h, math.pi * radius**2)


# ---------------------------------------------------------------------------
# refinement reports


@dataclass(frozen=True)
class VerificationReport:
    check: str
    residuals: list
    dx: list
    order: float | None = None

    def to_dict(self) -> dict:
        out = {"check": self.check, "residuals": list(self.residuals), "dx": list(self.dx)}
        if self.order is not None:
            out["order"] = self.order
        return out


def observed_order(coarse: float, fine: float, ratio: float = 2.0) -> float:
    if fine == 0.0:
        return math.inf if coarse > 0 else 0.0
    if coarse == 0.0:
        return -math.inf
    return math.log(coarse / fine) / math.log(ratio)


def refinement_report(check: str, residuals, dxs) -> VerificationReport:
    """Report with the observed order between consecutive grids when two or more are given."""
    residuals = [float(r) for r in residuals]
    dxs = [float(d) for d in dxs]
    order = None
    if len(residuals) >= 2:
        order = observed_order(residuals[-2], residuals[-1], dxs[-2] / dxs[-1])
    return VerificationReport(check, residuals, dxs, order)
