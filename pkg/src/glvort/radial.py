"""Explicit solution families: the matched annulus, n-line fields, slab and
finite-flip exponential profiles.

Annulus: on r < rho < 2 the field is h1 = alpha I0 + beta K0 with h1(r) = 0,
h1(2) = 1; on 2 < rho < R it is h2 = gamma I0 + delta K0 with h2(2) = 1,
h2(R) = 0. The two pieces form a stationary field when the ridge slopes
balance, f(r) = h1'(2) = -h2'(2) = -g(R).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import specfun as sf
from .fields import GridError, GridField, GridSpec

RIDGE = 2.0
BISECT_TOL = 1e-12
R_LOWER = RIDGE + 1e-9
R_START = 4.0
# Beyond this the outer slope differs from its limit by ~exp(-2R) and the K0
# series loses its digits to cancellation; no bracket is found past it.
R_CEILING = 32.0
MAX_LINES = 12


class NoMatch(ArithmeticError):
    """No outer radius balances the inner slope."""


class SingularDenominator(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class AnnulusCoefficients:
    r: float
    R: float
    alpha: float
    beta: float
    gamma: float
    delta: float

    def h1(self, rho):
        rho = np.asarray(rho, dtype=float)
        return self.alpha * sf.i_array(0, rho) + self.beta * sf.k0_array(rho)

    def h2(self, rho):
        rho = np.asarray(rho, dtype=float)
        return self.gamma * sf.i_array(0, rho) + self.delta * sf.k0_array(rho)

    def profile(self, rho):
        """Piecewise radial profile, h1 inside the ridge and h2 outside."""
        rho = np.asarray(rho, dtype=float)
        return np.where(rho <= RIDGE, self.h1(rho), self.h2(rho))

    def boundary_residuals(self) -> tuple[float, float, float, float]:
        i0 = sf.bessel_i
        k0 = lambda x: sf.bessel_k(0, x)  # noqa: E731
        a, b, c, d = self.alpha, self.beta, self.gamma, self.delta
        return (a * i0(0, self.r) + b * k0(self.r),
                a * i0(0, RIDGE) + b * k0(RIDGE) - 1.0,
                c * i0(0, RIDGE) + d * k0(RIDGE) - 1.0,
                c * i0(0, self.R) + d * k0(self.R))


def _two_point(rho: float) -> tuple[float, float]:
    """(a, b) with a I0 + b K0 equal to 0 at rho and 1 at the ridge."""
    i_r, k_r = sf.bessel_i(0, rho), sf.bessel_k(0, rho)
    i_2, k_2 = sf.bessel_i(0, RIDGE), sf.bessel_k(0, RIDGE)
    den = k_2 * i_r - i_2 * k_r
    if den == 0.0 or not math.isfinite(den):
        raise SingularDenominator(f"K0(2)I0({rho}) - I0(2)K0({rho}) vanishes")
    return -k_r / den, i_r / den


def _check_inner(r: float) -> float:
    r = float(r)
    if not 0.0 < r < RIDGE:
        raise ValueError(f"inner radius must lie in (0, 2), got {r}")
    return r


def _check_outer(R: float) -> float:
    R = float(R)
    if not R > RIDGE or not math.isfinite(R):
        raise ValueError(f"outer radius must exceed 2, got {R}")
    return R


def annulus_coefficients(r: float, R: float) -> AnnulusCoefficients:
    r, R = _check_inner(r), _check_outer(R)
    alpha, beta = _two_point(r)
    gamma, delta = _two_point(R)
    return AnnulusCoefficients(r, R, alpha, beta, gamma, delta)


def _ridge_slope(a: float, b: float) -> float:
    # d/drho (a I0 + b K0) at the ridge, using I0' = I1 and K0' = -K1
    return a * sf.bessel_i(1, RIDGE) - b * sf.bessel_k(1, RIDGE)


def inner_slope(r: float) -> float:
    """f(r) = h1'(2) = alpha I1(2) - beta K1(2)."""
    return _ridge_slope(*_two_point(_check_inner(r)))


def outer_slope(R: float) -> float:
    """g(R) = h2'(2) = gamma I1(2) - delta K1(2)."""
    return _ridge_slope(*_two_point(_check_outer(R)))


def slope_ceiling() -> float:
    """K1(2)/K0(2): the limit of -g(R) as R grows."""
    return sf.bessel_k(1, RIDGE) / sf.bessel_k(0, RIDGE)


@dataclass(frozen=True)
class MatchedAnnulus:
    coefficients: AnnulusCoefficients
    inner_slope_value: float
    match_residual: float
    elapsed: float = 0.0

    @property
    def r(self) -> float:
        return self.coefficients.r

    @property
    def R(self) -> float:
        return self.coefficients.R


def match_annulus(r: float) -> MatchedAnnulus:
    """Outer radius R > 2 with f(r) + g(R) = 0, by bracketed bisection.

    The bracket starts at [2 + 1e-9, 4] and its upper end doubles until
    f(r) + g(R) changes sign. Raises NoMatch when f(r) does not exceed
    K1(2)/K0(2), or when no sign change appears below ``R_CEILING``.
    """
    t0 = time.perf_counter()
    fr = inner_slope(r)
    ceiling = slope_ceiling()
    if not fr > ceiling:
        raise NoMatch(f"f({r}) = {fr:.6g} does not exceed K1(2)/K0(2) = {ceiling:.6g}")

    def F(R):
        return fr + outer_slope(R)

    lo, hi = R_LOWER, R_START
    f_lo = F(lo)
    f_hi = F(hi)
    while f_hi * f_lo > 0:
        if hi >= R_CEILING:
            raise NoMatch(f"no sign change of f(r) + g(R) for R up to {R_CEILING}")
        hi = min(2 * hi, R_CEILING)
        f_hi = F(hi)
    while hi - lo > BISECT_TOL:
        mid = 0.5 * (lo + hi)
        f_mid = F(mid)
        if f_mid == 0.0:
            lo = hi = mid
            break
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    # endpoint with the smaller residual
    cands = [(abs(F(x)), x) for x in (lo, hi)]
    res, R = min(cands)
    coeffs = annulus_coefficients(r, R)
    return MatchedAnnulus(coeffs, fr, res, time.perf_counter() - t0)


def smallest_matchable_radius(tol: float = 1e-10) -> float:
    """Bisection for r with f(r) = K1(2)/K0(2); matches exist only above it."""
    target = slope_ceiling()
    lo, hi = 0.05, 1.999
    if not (inner_slope(lo) < target < inner_slope(hi)):
        raise NoMatch("threshold not bracketed")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if inner_slope(mid) > target:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# grid fixtures


def _polar(spec: GridSpec):
    X, Y = spec.coords()
    return X, Y, np.hypot(X, Y), np.arctan2(Y, X)


def annulus_grid(m: MatchedAnnulus, n: int, margin: float = 0.1) -> GridSpec:
    """Square n x n grid centred at the origin covering the outer circle with a margin."""
    return GridSpec.square(m.R * (1.0 + margin), n)


def annulus_field(m: MatchedAnnulus, spec: GridSpec) -> GridField:
    """Matched annulus field on a Cartesian grid.

    Both pieces are analytic in rho > 0, so each is continued a little past
    its Dirichlet circle (down to rho = r/2 inside, out to the grid edge
    outside). The continuation gives boundary stencils real data; nodes
    with rho < r/2 are masked.
    """
    c = m.coefficients
    xmin, xmax = spec.x0, spec.x0 + (spec.nx - 1) * spec.dx
    ymin, ymax = spec.y0, spec.y0 + (spec.ny - 1) * spec.dy
    pad = 2 * max(spec.dx, spec.dy)
    if min(-xmin, xmax, -ymin, ymax) < c.R + pad:
        raise GridError(f"grid does not cover the outer circle of radius {c.R:.6g}")
    inner_cut = 0.5 * c.r
    return GridField.from_function(lambda x, y: c.profile(np.hypot(x, y)), spec,
                                   mask_fn=lambda x, y: np.hypot(x, y) >= inner_cut)


def multiline_field(n: int, spec: GridSpec) -> GridField:
    """h = |I_n(rho) cos(n theta)|, whose zero set is n diameters."""
    if int(n) != n or not 2 <= n <= MAX_LINES:
        raise ValueError(f"line count must be an integer in [2, {MAX_LINES}], got {n}")
    n = int(n)

    def f(x, y):
        rho = np.hypot(x, y)
        return np.abs(sf.i_array(n, rho) * np.cos(n * np.arctan2(y, x)))

    return GridField.from_function(f, spec)


def multiline_angles(n: int) -> np.ndarray:
    """Directions in [0, pi) of the n zero diameters."""
    return np.pi / (2 * n) + np.pi * np.arange(n) / n


def slab_field(spec: GridSpec) -> GridField:
    """h = exp(-|x|): e^x left of the line x = 0 and e^-x right of it."""
    return GridField.from_function(lambda x, y: np.exp(-np.abs(x)) + 0.0 * y, spec)


def flip_exponent(x, flips) -> np.ndarray:
    """G(x) = integral from 0 to x of g, g = +1 left of flips[0], changing sign at each flip."""
    x = np.asarray(x, dtype=float)
    p = list(flips)
    if not p:
        return x.copy()
    # F(x) = integral of g from a fixed reference; G = F(x) - F(0)
    def F(t):
        out = np.minimum(t, p[0])
        for k in range(1, len(p) + 1):
            a = p[k - 1]
            b = p[k] if k < len(p) else np.inf
            out = out + (-1) ** k * np.clip(t - a, 0.0, b - a)
        return out
    return F(x) - F(np.zeros(()))


def nonbv_field(jump_positions, spec: GridSpec) -> GridField:
    """h = exp(G(x)) with unit slope magnitude and sign flips at the given positions."""
    p = [float(v) for v in jump_positions]
    if any(not math.isfinite(v) or not -1.0 < v < 1.0 for v in p):
        raise ValueError("flip positions must lie strictly inside (-1, 1)")
    if any(b <= a for a, b in zip(p, p[1:])):
        raise ValueError("flip positions must be strictly increasing")
    return GridField.from_function(lambda x, y: np.exp(flip_exponent(x, p)) + 0.0 * y, spec)


def disk_solution_field(spec: GridSpec, radius: float = 1.0) -> GridField:
    """I0(rho)/I0(radius): the smooth solution equal to 1 on the circle of the given radius."""
    scale = 1.0 / sf.bessel_i(0, radius)
    return GridField.from_function(lambda x, y: scale * sf.i_array(0, np.hypot(x, y)), spec)
