"""Modified Bessel functions evaluated from their power series.

Scalar evaluators sum the series in 40-digit decimal arithmetic and round
once to a double; the logarithmic K0 series cancels heavily for arguments
near 10, and double accumulation would lose about eight digits there.
The ``*_array`` evaluators sum the same series in float64 over numpy
arrays and are meant for sampling fields on grids, where arguments stay
small.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext

import numpy as np

MAX_ORDER = 50
MAX_TERMS = 200
REL_TOL = 1e-16
_PREC = 40
_DREL_TOL = Decimal("1e-16")

EULER_GAMMA = Decimal("0.5772156649015328606065120900824024310421593359399")


class BesselDomainError(ValueError):
    """Argument or order outside the supported range."""


@dataclass(frozen=True)
class BesselValue:
    order: int
    argument: float
    value: float
    terms_used: int
    kind: str = "i"


def _check_order(order: int) -> None:
    if int(order) != order or order < 0:
        raise BesselDomainError(f"order must be a nonnegative integer, got {order!r}")
    if order > MAX_ORDER:
        raise BesselDomainError(f"order {order} above ceiling {MAX_ORDER}")


def _check_x(x: float, strict: bool) -> None:
    if not math.isfinite(x):
        raise BesselDomainError(f"argument must be finite, got {x!r}")
    if x < 0 or (strict and x == 0):
        bound = "> 0" if strict else ">= 0"
        raise BesselDomainError(f"argument must be {bound}, got {x!r}")


def _falling(p: int, m: int) -> int:
    out = 1
    for i in range(m):
        out *= p - i
    return out


def _i_series(order: int, x: float, deriv: int) -> tuple[Decimal, int]:
    """m-th derivative of I_order at x > 0, summed term by term."""
    with localcontext() as ctx:
        ctx.prec = _PREC
        X = Decimal(x)
        half_sq = (X / 2) ** 2
        # a_k = (x/2)^(2k+n) / (k! (k+n)!)
        a = (X / 2) ** order / math.factorial(order)
        xm = X**deriv
        total = Decimal(0)
        for k in range(MAX_TERMS):
            p = 2 * k + order
            term = a * _falling(p, deriv) / xm
            total += term
            if total != 0 and abs(term) < _DREL_TOL * abs(total):
                return +total, k + 1
            a = a * half_sq / ((k + 1) * (k + 1 + order))
    raise BesselDomainError(f"I series for x={x} did not settle within {MAX_TERMS} terms")


def _log_derivative(X: Decimal, L: Decimal, j: int) -> Decimal:
    if j == 0:
        return L
    return Decimal((-1) ** (j - 1) * math.factorial(j - 1)) / X**j


def _k0_series(x: float, deriv: int) -> tuple[Decimal, int]:
    """m-th derivative of K0 at x > 0.

    K0(x) = sum_k (x/2)^(2k)/(k!)^2 * (H_k - gamma - log(x/2)), H_k the
    harmonic numbers. Stopping is judged against the combined running sum,
    not the two large partial sums that cancel.
    """
    with localcontext() as ctx:
        ctx.prec = _PREC
        X = Decimal(x)
        L = (X / 2).ln()
        half_sq = (X / 2) ** 2
        dlog = [_log_derivative(X, L, j) for j in range(deriv + 1)]
        u = Decimal(1)  # (x/2)^(2k)
        fact_sq = Decimal(1)  # (k!)^2
        harmonic = Decimal(0)
        total = Decimal(0)
        for k in range(MAX_TERMS):
            if k > 0:
                harmonic += Decimal(1) / k
                u *= half_sq
                fact_sq *= k * k
            # D^i u = falling(2k, i) u / x^i
            du = [u * _falling(2 * k, i) / X**i for i in range(deriv + 1)]
            d_uL = sum(math.comb(deriv, j) * du[deriv - j] * dlog[j] for j in range(deriv + 1))
            term = ((harmonic - EULER_GAMMA) * du[deriv] - d_uL) / fact_sq
            total += term
            if k >= 1 and total != 0 and abs(term) < _DREL_TOL * abs(total):
                return +total, k + 1
    raise BesselDomainError(f"K series for x={x} did not settle within {MAX_TERMS} terms")


def evaluate_i(order: int, x: float, deriv: int = 0) -> BesselValue:
    """I_order(x) (or its ``deriv``-th derivative) with the number of terms summed."""
    _check_order(order)
    x = float(x)
    _check_x(x, strict=deriv > 0)
    if x == 0.0:
        return BesselValue(order, x, 1.0 if order == 0 else 0.0, 1, "i")
    total, used = _i_series(order, x, deriv)
    return BesselValue(order, x, float(total), used, "i")


def evaluate_k(order: int, x: float, deriv: int = 0) -> BesselValue:
    """K0 or K1 = -K0' at x > 0, optionally differentiated."""
    if order not in (0, 1):
        raise BesselDomainError(f"K is provided for orders 0 and 1 only, got {order!r}")
    x = float(x)
    _check_x(x, strict=True)
    if order == 0:
        total, used = _k0_series(x, deriv)
        return BesselValue(0, x, float(total), used, "k")
    total, used = _k0_series(x, deriv + 1)
    return BesselValue(1, x, float(-total), used, "k")


def bessel_i(order: int, x: float) -> float:
    return evaluate_i(order, x).value


def bessel_k(order: int, x: float) -> float:
    return evaluate_k(order, x).value


def ode_residual(order: int, x: float, which: str = "i") -> float:
    """Residual of the modified Bessel equation at x for I_order or K_order.

    Order 0 uses ``-y'' - y'/x + y``; higher orders use
    ``x^2 y'' + x y' - (x^2 + n^2) y``.
    """
    which = which.lower()
    if which not in ("i", "k"):
        raise BesselDomainError(f"which must be 'i' or 'k', got {which!r}")
    x = float(x)
    _check_x(x, strict=True)
    ev = evaluate_i if which == "i" else evaluate_k
    y, dy, d2y = (ev(order, x, m).value for m in range(3))
    if order == 0:
        return -d2y - dy / x + y
    return x * x * d2y + x * dy - (x * x + order * order) * y


# ---------------------------------------------------------------------------
# float64 array evaluators for grid sampling


def i_array(order: int, x, deriv: int = 0) -> np.ndarray:
    """Vectorized I_order (or derivative) for x >= 0 in double precision."""
    _check_order(order)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise BesselDomainError("array arguments must be finite and >= 0")
    if deriv > 0 and np.any(x == 0):
        raise BesselDomainError("derivatives are evaluated for x > 0 only")
    half_sq = (x / 2) ** 2
    a = (x / 2) ** order / math.factorial(order)
    xm = x**deriv if deriv else 1.0
    total = np.zeros_like(x)
    for k in range(MAX_TERMS):
        term = a * _falling(2 * k + order, deriv) / xm
        total = total + term
        if k > deriv and np.all(np.abs(term) <= REL_TOL * np.abs(total)):
            break
        a = a * half_sq / ((k + 1) * (k + 1 + order))
    return total


def k0_array(x, deriv: int = 0) -> np.ndarray:
    """Vectorized K0 (or derivative) for x > 0 in double precision."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise BesselDomainError("K0 needs finite arguments > 0")
    L = np.log(x / 2)
    dlog = [L] + [(-1) ** (j - 1) * math.factorial(j - 1) / x**j for j in range(1, deriv + 1)]
    half_sq = (x / 2) ** 2
    u = np.ones_like(x)
    fact_sq = 1.0
    harmonic = 0.0
    gamma = float(EULER_GAMMA)
    total = np.zeros_like(x)
    for k in range(MAX_TERMS):
        if k > 0:
            harmonic += 1.0 / k
            u = u * half_sq
            fact_sq *= k * k
        du = [u * _falling(2 * k, i) / x**i for i in range(deriv + 1)]
        d_uL = sum(math.comb(deriv, j) * du[deriv - j] * dlog[j] for j in range(deriv + 1))
        term = ((harmonic - gamma) * du[deriv] - d_uL) / fact_sq
        total = total + term
        if k >= 1 and np.all(np.abs(term) <= REL_TOL * np.abs(total)):
            break
    return total
