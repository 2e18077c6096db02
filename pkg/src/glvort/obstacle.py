"""Obstacle problem: minimize 1/2 int(|grad h|^2 + h^2) with h = 1 on the
boundary and h >= psi = 1 - 1/(2 lambda), by projected SOR.

The discrete problem uses the five-point operator A h = (4h - sum of
neighbours)/dx^2 + h on a uniform grid. Nodes outside the domain are held
at the boundary value 1 (a staircase boundary for the disk).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import DomainGeometry, GridField, GridSpec, TestFunction, _support_nodes, pair_vorticity

CHECK_EVERY = 10
ENERGY_EVERY = 50


class NonConvergence(ArithmeticError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(f"projected SOR stopped after {iterations} sweeps with residual {residual:.3e}")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class ObstacleProblem:
    lam: float
    geometry: DomainGeometry
    grid: GridSpec
    tolerance: float = 1e-9
    max_iterations: int = 50000
    omega: float | None = None
    contact_tol: float | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.tolerance < 1e-12:
            raise ValueError("tolerance must be at least 1e-12")
        if self.geometry.kind not in ("disk", "rectangle"):
            raise ValueError("obstacle domain must be a disk or a rectangle")
        if abs(self.grid.dx - self.grid.dy) > 1e-14 * self.grid.dx:
            raise ValueError("obstacle solver needs dx == dy")
        if self.omega is not None and not 0 < self.omega < 2:
            raise ValueError("relaxation factor must lie in (0, 2)")

    @property
    def psi(self) -> float:
        return 1.0 - 1.0 / (2.0 * self.lam)


def disk_problem(lam: float, n: int, **kw) -> ObstacleProblem:
    """Unit disk on an n x n grid spanning [-1, 1]^2."""
    return ObstacleProblem(lam, DomainGeometry.disk(1.0), GridSpec.square(1.0, n), **kw)


def square_problem(lam: float, n: int, **kw) -> ObstacleProblem:
    return ObstacleProblem(lam, DomainGeometry.rectangle(-1.0, 1.0, -1.0, 1.0), GridSpec.square(1.0, n), **kw)


@dataclass(frozen=True, eq=False)
class ObstacleSolution:
    field: GridField
    coincidence_mask: np.ndarray
    iterations: int
    complementarity_residual: float
    psi: float
    interior: np.ndarray
    energies: list = field(default_factory=list, repr=False)

    @property
    def coincidence_area(self) -> float:
        return float(self.coincidence_mask.sum() * self.field.dx * self.field.dy)


def _neighbour_sum(h: np.ndarray) -> np.ndarray:
    s = np.zeros_like(h)
    s[1:-1, 1:-1] = h[:-2, 1:-1] + h[2:, 1:-1] + h[1:-1, :-2] + h[1:-1, 2:]
    return s


def apply_operator(h: np.ndarray, dx: float) -> np.ndarray:
    """(4h - neighbours)/dx^2 + h; meaningful on nodes away from the array edge."""
    return (4.0 * h - _neighbour_sum(h)) / dx**2 + h


def discrete_energy(h: np.ndarray, dx: float) -> float:
    """1/2 sum over edges of squared differences plus 1/2 sum of h^2 dx^2.

    Its gradient with respect to free nodes is A h dx^2, so PSOR sweeps
    never increase it.
    """
    ex = np.diff(h, axis=1)
    ey = np.diff(h, axis=0)
    return float(0.5 * (np.sum(ex**2) + np.sum(ey**2)) + 0.5 * np.sum(h**2) * dx**2)


def complementarity(h: np.ndarray, psi: float, dx: float, interior: np.ndarray) -> float:
    """max over free nodes of |min(h - psi, A h)|, with negative parts of either term included."""
    gap = h - psi
    Ah = apply_operator(h, dx)
    r = np.abs(np.minimum(gap, Ah))
    r = np.maximum(r, np.maximum(-gap, 0.0))
    return float(r[interior].max()) if interior.any() else 0.0


def optimal_omega(grid: GridSpec) -> float:
    """2 / (1 + sin(pi dx / L)) for the longest side L of the grid box."""
    L = max((grid.nx - 1) * grid.dx, (grid.ny - 1) * grid.dy)
    return 2.0 / (1.0 + math.sin(math.pi * grid.dx / L))


def solve_obstacle(p: ObstacleProblem) -> ObstacleSolution:
    g = p.grid
    X, Y = g.coords()
    interior = p.geometry.contains(X, Y)
    interior[0, :] = interior[-1, :] = interior[:, 0] = interior[:, -1] = False
    psi, dx = p.psi, g.dx
    omega = optimal_omega(g) if p.omega is None else p.omega
    h = np.ones((g.ny, g.nx))
    J, I = np.indices(h.shape)
    colours = [interior & ((I + J) % 2 == c) for c in (0, 1)]
    denom = 4.0 + dx * dx
    energies = [discrete_energy(h, dx)]
    res = complementarity(h, psi, dx, interior)
    it = 0
    while res >= p.tolerance:
        if it >= p.max_iterations:
            raise NonConvergence(res, it)
        for sel in colours:
            gs = _neighbour_sum(h) / denom
            h[sel] = np.maximum(psi, h[sel] + omega * (gs[sel] - h[sel]))
        it += 1
        if it % ENERGY_EVERY == 0:
            energies.append(discrete_energy(h, dx))
        if it % CHECK_EVERY == 0:
            res = complementarity(h, psi, dx, interior)
    res = complementarity(h, psi, dx, interior)

    tol = 0.0 if p.contact_tol is None else p.contact_tol
    contact = interior & (h - psi <= tol)
    # keep interior nodes plus the ring of boundary nodes they touch
    ring = np.zeros_like(interior)
    ring[1:, :] |= interior[:-1, :]
    ring[:-1, :] |= interior[1:, :]
    ring[:, 1:] |= interior[:, :-1]
    ring[:, :-1] |= interior[:, 1:]
    mask = interior | ring
    fld = GridField(g.nx, g.ny, g.x0, g.y0, g.dx, g.dy, h, None if mask.all() else mask)
    contact.setflags(write=False)
    return ObstacleSolution(fld, contact, it, res, psi, interior, energies)


def coincidence_measure(s: ObstacleSolution, phi: TestFunction) -> tuple[float, float]:
    """(discrete <mu, phi>, psi * integral of phi over the coincidence set)."""
    pairing = pair_vorticity(s.field, phi)
    sj, si, _ = _support_nodes(s.field, phi)
    f = s.field
    X, Y = np.meshgrid(f.x[si], f.y[sj])
    flat = float(np.sum(phi(X, Y) * s.coincidence_mask[sj, si]) * f.dx * f.dy)
    return pairing, s.psi * flat


def activation_threshold() -> float:
    """Smallest lambda with nonempty contact for the unit disk: psi = 1/I0(1)."""
    from .specfun import bessel_i
    return 1.0 / (2.0 * (1.0 - 1.0 / bessel_i(0, 1.0)))


def smallest_activating(candidates=(1, 2, 4, 8), n: int = 128, **kw) -> tuple[float, ObstacleSolution]:
    """First lambda in ``candidates`` whose discrete solution touches the obstacle."""
    for lam in candidates:
        s = solve_obstacle(disk_problem(lam, n, **kw))
        if s.coincidence_mask.any():
            return float(lam), s
    raise ValueError(f"none of {list(candidates)} activates the constraint")
