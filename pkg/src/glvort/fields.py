"""Uniform-grid scalar fields and the discrete calculus used by every check.

Values are stored row-major as ``values[j, i] = f(x0 + i*dx, y0 + j*dy)``.
An optional boolean mask marks the nodes that carry meaningful values; the
remaining nodes hold a 0.0 sentinel that no operator reads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy.stats import qmc

MIN_NODES = 3


class GridError(ValueError):
    """Malformed grid or field data."""


class SupportError(ValueError):
    """A test function's support leaves the region where the field is valid."""


class GeometryMismatch(ValueError):
    """Boundary geometry is not covered by the field's valid nodes."""


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    x0: float
    y0: float
    dx: float
    dy: float

    @classmethod
    def square(cls, half_width: float, n: int, center=(0.0, 0.0)) -> "GridSpec":
        """n x n nodes spanning [c - w, c + w] in both directions."""
        if n < MIN_NODES:
            raise GridError(f"need at least {MIN_NODES} nodes per side, got {n}")
        h = 2.0 * half_width / (n - 1)
        return cls(n, n, center[0] - half_width, center[1] - half_width, h, h)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.x0 + self.dx * np.arange(self.nx)
        y = self.y0 + self.dy * np.arange(self.ny)
        return np.meshgrid(x, y)


@dataclass(frozen=True, eq=False)
class GridField:
    nx: int
    ny: int
    x0: float
    y0: float
    dx: float
    dy: float
    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        if self.nx < MIN_NODES or self.ny < MIN_NODES:
            raise GridError(f"grid must be at least {MIN_NODES}x{MIN_NODES}, got {self.nx}x{self.ny}")
        if not (self.dx > 0 and self.dy > 0):
            raise GridError("spacing must be positive")
        vals = np.array(self.values, dtype=float).reshape(self.ny, self.nx)
        mask = None
        if self.mask is not None:
            mask = np.array(self.mask, dtype=bool).reshape(self.ny, self.nx)
            vals = np.where(mask, vals, 0.0)
        if not np.all(np.isfinite(vals)):
            raise GridError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if mask is not None:
            mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        for name in ("x0", "y0", "dx", "dy"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))

    @classmethod
    def from_function(cls, func: Callable, spec: GridSpec, mask_fn: Callable | None = None) -> "GridField":
        X, Y = spec.coords()
        mask = None if mask_fn is None else np.asarray(mask_fn(X, Y), dtype=bool)
        if mask is not None:
            vals = np.zeros_like(X)
            vals[mask] = func(X[mask], Y[mask])
        else:
            vals = np.asarray(func(X, Y), dtype=float) * np.ones_like(X)
        return cls(spec.nx, spec.ny, spec.x0, spec.y0, spec.dx, spec.dy, vals, mask)

    @property
    def spec(self) -> GridSpec:
        return GridSpec(self.nx, self.ny, self.x0, self.y0, self.dx, self.dy)

    @property
    def valid(self) -> np.ndarray:
        if self.mask is None:
            return np.ones((self.ny, self.nx), dtype=bool)
        return self.mask

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.y0 + self.dy * np.arange(self.ny)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.x0, self.x0 + (self.nx - 1) * self.dx, self.y0, self.y0 + (self.ny - 1) * self.dy)

    def with_values(self, values, mask="same") -> "GridField":
        m = self.mask if isinstance(mask, str) and mask == "same" else mask
        return GridField(self.nx, self.ny, self.x0, self.y0, self.dx, self.dy, values, m)

    def same_grid(self, other: "GridField") -> bool:
        return (self.nx, self.ny, self.x0, self.y0, self.dx, self.dy) == (
            other.nx, other.ny, other.x0, other.y0, other.dx, other.dy)


# ---------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class TestFunction:
    """Cubic bump (1 - |x - c|^2 / a^2)_+^3, C^2 with compact support."""

    center: tuple[float, float]
    radius: float

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("bump radius must be positive")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    def _s(self, x, y):
        return 1.0 - ((x - self.center[0]) ** 2 + (y - self.center[1]) ** 2) / self.radius**2

    def __call__(self, x, y):
        s = np.maximum(self._s(x, y), 0.0)
        return s**3

    def grad(self, x, y):
        s = np.maximum(self._s(x, y), 0.0)
        c = -6.0 * s**2 / self.radius**2
        return c * (x - self.center[0]), c * (y - self.center[1])

    def integral(self) -> float:
        """Exact integral over the plane: pi a^2 / 4."""
        return math.pi * self.radius**2 / 4.0


def _support_nodes(f: GridField, phi: TestFunction, halo: int = 1) -> tuple[slice, slice, np.ndarray]:
    """Index window covering supp(phi), after checking it sits inside f's valid region."""
    cx, cy = phi.center
    xmin, xmax, ymin, ymax = f.bounds
    a = phi.radius
    if cx - a <= xmin + halo * f.dx or cx + a >= xmax - halo * f.dx or \
            cy - a <= ymin + halo * f.dy or cy + a >= ymax - halo * f.dy:
        raise SupportError(f"bump at {phi.center} radius {a} reaches the grid edge")
    i0 = max(int(math.floor((cx - a - xmin) / f.dx)) - halo, 0)
    i1 = min(int(math.ceil((cx + a - xmin) / f.dx)) + halo + 1, f.nx)
    j0 = max(int(math.floor((cy - a - ymin) / f.dy)) - halo, 0)
    j1 = min(int(math.ceil((cy + a - ymin) / f.dy)) + halo + 1, f.ny)
    sl = (slice(j0, j1), slice(i0, i1))
    if f.mask is not None:
        X, Y = f.x[sl[1]][None, :], f.y[sl[0]][:, None]
        near = (X - cx) ** 2 + (Y - cy) ** 2 < (a + halo * max(f.dx, f.dy) * 1.5) ** 2
        if np.any(near & ~f.mask[sl]):
            raise SupportError(f"bump at {phi.center} radius {a} touches masked nodes")
    return sl[0], sl[1], None


def bump_battery(f: GridField, count: int = 20, radius: float | None = None, seed: int = 0,
                 accept: Callable[[tuple[float, float], float], bool] | None = None,
                 box: tuple[float, float, float, float] | None = None) -> list[TestFunction]:
    """Deterministic Halton placement of ``count`` bumps inside the field's valid region."""
    xmin, xmax, ymin, ymax = box if box is not None else f.bounds
    if radius is None:
        radius = 0.15 * min(xmax - xmin, ymax - ymin)
    margin = radius + 2.0 * max(f.dx, f.dy)
    sampler = qmc.Halton(d=2, scramble=True, seed=seed)
    out: list[TestFunction] = []
    for _ in range(200):
        pts = sampler.random(64)
        for u, v in pts:
            c = (xmin + margin + u * (xmax - xmin - 2 * margin), ymin + margin + v * (ymax - ymin - 2 * margin))
            phi = TestFunction(c, radius)
            if accept is not None and not accept(c, radius):
                continue
            try:
                _support_nodes(f, phi)
            except SupportError:
                continue
            out.append(phi)
            if len(out) == count:
                return out
    raise SupportError(f"could only place {len(out)} of {count} bumps of radius {radius}")


# ---------------------------------------------------------------------------
# finite differences


def _shift(a: np.ndarray, k: int, axis: int, fill) -> np.ndarray:
    """out[i] = a[i + k] along axis, ``fill`` where i + k is out of range."""
    out = np.full_like(a, fill)
    n = a.shape[axis]
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if k >= 0:
        src[axis], dst[axis] = slice(k, n), slice(0, n - k)
    else:
        src[axis], dst[axis] = slice(0, n + k), slice(-k, n)
    out[tuple(dst)] = a[tuple(src)]
    return out


def _diff_axis(u: np.ndarray, ok: np.ndarray, h: float, axis: int, scheme: str) -> np.ndarray:
    um1, um2 = _shift(u, -1, axis, 0.0), _shift(u, -2, axis, 0.0)
    up1, up2 = _shift(u, 1, axis, 0.0), _shift(u, 2, axis, 0.0)
    om1, om2 = _shift(ok, -1, axis, False), _shift(ok, -2, axis, False)
    op1, op2 = _shift(ok, 1, axis, False), _shift(ok, 2, axis, False)

    cen_ok = om1 & op1
    fwd_ok = op1 & op2
    bwd_ok = om1 & om2
    central = (up1 - um1) / (2 * h)
    forward = (-3 * u + 4 * up1 - up2) / (2 * h)
    backward = (3 * u - 4 * um1 + um2) / (2 * h)

    if scheme == "central":
        out = np.where(cen_ok, central, np.where(fwd_ok, forward, np.where(bwd_ok, backward, 0.0)))
    elif scheme == "eno":
        # Prefer the centred stencil unless its second difference betrays a kink
        # that one of the one-sided stencils avoids.
        inf = np.inf
        dc = np.where(cen_ok, np.abs(up1 - 2 * u + um1), inf)
        df = np.where(fwd_ok, np.abs(u - 2 * up1 + up2), inf)
        db = np.where(bwd_ok, np.abs(u - 2 * um1 + um2), inf)
        one = np.minimum(df, db)
        one_sided = np.where(df <= db, forward, backward)
        use_c = cen_ok & ((dc <= 4.0 * one + 1e-300) | ~(fwd_ok | bwd_ok))
        out = np.where(use_c, central, np.where(fwd_ok | bwd_ok, one_sided, 0.0))
        out = np.where(cen_ok | fwd_ok | bwd_ok, out, 0.0)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    # isolated nodes: fall back to a first-order difference where one neighbour exists
    lonely = ~(cen_ok | fwd_ok | bwd_ok)
    first = np.where(op1, (up1 - u) / h, np.where(om1, (u - um1) / h, 0.0))
    out = np.where(lonely, first, out)
    return np.where(ok, out, 0.0)


def gradient(f: GridField, scheme: str = "central") -> tuple[GridField, GridField]:
    """Componentwise (d/dx f, d/dy f).

    ``central``: second-order centred differences, second-order one-sided
    stencils at the edge of the valid region. ``eno``: same stencils, but
    a one-sided stencil replaces the centred one where the centred second
    difference exceeds four times the one-sided one, so kinks are not
    smeared across neighbouring nodes.
    """
    ok = f.valid
    gx = _diff_axis(f.values, ok, f.dx, axis=1, scheme=scheme)
    gy = _diff_axis(f.values, ok, f.dy, axis=0, scheme=scheme)
    return f.with_values(gx), f.with_values(gy)


def kink_nodes(f: GridField, floor: float = 0.0) -> np.ndarray:
    """Nodes lying on a slope discontinuity, to within a fraction of a cell.

    Along some axis the centred second difference exceeds ``floor`` and four
    times both one-sided second differences: each side is smooth on its own
    and the node sits where they meet, so its two gradient components may
    come from different sides.
    """
    u, ok = f.values, f.valid
    out = np.zeros(u.shape, dtype=bool)
    for axis in (0, 1):
        um1, um2 = _shift(u, -1, axis, 0.0), _shift(u, -2, axis, 0.0)
        up1, up2 = _shift(u, 1, axis, 0.0), _shift(u, 2, axis, 0.0)
        full = ok.copy()
        for k in (-2, -1, 1, 2):
            full &= _shift(ok, k, axis, False)
        dc = np.abs(up1 - 2 * u + um1)
        df = np.abs(u - 2 * up1 + up2)
        db = np.abs(u - 2 * um1 + um2)
        out |= full & (dc > floor) & (dc > 4.0 * np.maximum(df, db))
    return out


def laplacian(f: GridField) -> GridField:
    """Five-point Laplacian; the result is masked to nodes with a full stencil."""
    u, ok = f.values, f.valid
    full = ok.copy()
    for axis in (0, 1):
        full &= _shift(ok, 1, axis, False) & _shift(ok, -1, axis, False)
    lap = ((_shift(u, 1, 1, 0.0) - 2 * u + _shift(u, -1, 1, 0.0)) / f.dx**2
           + (_shift(u, 1, 0, 0.0) - 2 * u + _shift(u, -1, 0, 0.0)) / f.dy**2)
    return f.with_values(np.where(full, lap, 0.0), mask=full)


def pair_vorticity(f: GridField, phi: TestFunction) -> float:
    """Discrete <mu, phi> for mu = -Lap f + f, as sum of (grad f . grad phi + f phi) dx dy."""
    sj, si, _ = _support_nodes(f, phi)
    gx, gy = gradient(f)
    X, Y = np.meshgrid(f.x[si], f.y[sj])
    px, py = phi.grad(X, Y)
    integrand = gx.values[sj, si] * px + gy.values[sj, si] * py + f.values[sj, si] * phi(X, Y)
    return float(integrand.sum() * f.dx * f.dy)


def pair_strong(f: GridField, phi: TestFunction) -> float:
    """sum of (-Lap f + f) phi dx dy with the five-point Laplacian (smooth fields only)."""
    sj, si, _ = _support_nodes(f, phi)
    lap = laplacian(f)
    X, Y = np.meshgrid(f.x[si], f.y[sj])
    dens = -lap.values[sj, si] + f.values[sj, si]
    return float((dens * phi(X, Y)).sum() * f.dx * f.dy)


def integrate_against(f: GridField, phi: TestFunction, values: np.ndarray | None = None) -> float:
    """Midpoint-rule integral of (values or f) * phi over the bump's support."""
    sj, si, _ = _support_nodes(f, phi)
    X, Y = np.meshgrid(f.x[si], f.y[sj])
    v = f.values if values is None else values
    return float((v[sj, si] * phi(X, Y)).sum() * f.dx * f.dy)


# ---------------------------------------------------------------------------
# interpolation


def _lagrange4(t: np.ndarray) -> list[np.ndarray]:
    # cubic Lagrange weights for nodes at -1, 0, 1, 2
    return [-t * (t - 1) * (t - 2) / 6.0,
            (t + 1) * (t - 1) * (t - 2) / 2.0,
            -(t + 1) * t * (t - 2) / 2.0,
            (t + 1) * t * (t - 1) / 6.0]


def interpolate_cubic(f: GridField, px, py, values: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Local bicubic Lagrange interpolation; returns (values, ok) where ok marks
    points whose 4x4 stencil lies on valid nodes."""
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    v = f.values if values is None else values
    ok_nodes = f.valid
    sx = (px - f.x0) / f.dx
    sy = (py - f.y0) / f.dy
    i = np.floor(sx).astype(int)
    j = np.floor(sy).astype(int)
    tx, ty = sx - i, sy - j
    wx, wy = _lagrange4(tx), _lagrange4(ty)
    out = np.zeros(px.shape)
    ok = (i >= 1) & (i <= f.nx - 3) & (j >= 1) & (j <= f.ny - 3)
    ic = np.clip(i, 1, f.nx - 3)
    jc = np.clip(j, 1, f.ny - 3)
    for a in range(4):
        for b in range(4):
            jj, ii = jc + b - 1, ic + a - 1
            out = out + wy[b] * wx[a] * v[jj, ii]
            ok &= ok_nodes[jj, ii]
    return out, ok


def interpolate_linear(f: GridField, px, py, values: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear interpolation with the same (values, ok) contract; works on complex arrays."""
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    v = f.values if values is None else values
    sx = (px - f.x0) / f.dx
    sy = (py - f.y0) / f.dy
    i = np.clip(np.floor(sx).astype(int), 0, f.nx - 2)
    j = np.clip(np.floor(sy).astype(int), 0, f.ny - 2)
    tx, ty = sx - i, sy - j
    ok = (sx >= -1e-9) & (sx <= f.nx - 1 + 1e-9) & (sy >= -1e-9) & (sy <= f.ny - 1 + 1e-9)
    vn = f.valid
    ok &= vn[j, i] & vn[j, i + 1] & vn[j + 1, i] & vn[j + 1, i + 1]
    out = ((1 - tx) * (1 - ty) * v[j, i] + tx * (1 - ty) * v[j, i + 1]
           + (1 - tx) * ty * v[j + 1, i] + tx * ty * v[j + 1, i + 1])
    return out, ok


# ---------------------------------------------------------------------------
# domains and boundary quadrature


def _circle_antideriv(x, R):
    # integral of sqrt(R^2 - x^2)
    x = np.clip(x, -R, R)
    return 0.5 * (x * np.sqrt(np.maximum(R * R - x * x, 0.0)) + R * R * np.arcsin(x / R))


def _disk_rect_area(R: float, x1, x2, y1, y2) -> np.ndarray:
    """Exact area of [x1,x2]x[y1,y2] intersected with the disk |p| <= R (vectorized)."""
    x1, x2, y1, y2 = (np.asarray(a, dtype=float) for a in (x1, x2, y1, y2))
    cands = [x1, x2, np.full_like(x1, -R), np.full_like(x1, R)]
    for yy in (y1, y2):
        s = np.sqrt(np.maximum(R * R - yy * yy, 0.0))
        cands += [-s, s]
    pts = np.stack([np.clip(c, x1, x2) for c in cands], axis=-1)
    pts.sort(axis=-1)
    total = np.zeros_like(x1)
    for k in range(pts.shape[-1] - 1):
        a, b = pts[..., k], pts[..., k + 1]
        mid = 0.5 * (a + b)
        inside = (np.abs(mid) < R) & (b > a)
        S = np.sqrt(np.maximum(R * R - mid * mid, 0.0))
        top_is_S = (S >= y1) & (S <= y2)
        top_const = np.where(S < y1, y1, y2)
        bot_is_S = (-S >= y1) & (-S <= y2)
        bot_const = np.where(-S < y1, y1, y2)
        coeff = top_is_S.astype(float) + bot_is_S.astype(float)
        const = np.where(top_is_S, 0.0, top_const) - np.where(bot_is_S, 0.0, bot_const)
        seg = coeff * (_circle_antideriv(b, R) - _circle_antideriv(a, R)) + const * (b - a)
        total = total + np.where(inside, seg, 0.0)
    return total


@dataclass(frozen=True, eq=False)
class DomainGeometry:
    """Domain shape plus boundary quadrature nodes (point, outward normal, tangent, arc weight)."""

    kind: str
    params: dict
    points: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray
    weights: np.ndarray

    @classmethod
    def disk(cls, radius: float = 1.0, center=(0.0, 0.0), n_nodes: int = 512) -> "DomainGeometry":
        t = 2 * np.pi * np.arange(n_nodes) / n_nodes
        nu = np.stack([np.cos(t), np.sin(t)], axis=1)
        pts = np.asarray(center, dtype=float) + radius * nu
        w = np.full(n_nodes, 2 * np.pi * radius / n_nodes)
        return cls("disk", {"radius": float(radius), "center": tuple(map(float, center))}, pts, nu, _rot90(nu), w)

    @classmethod
    def annulus(cls, inner: float, outer: float, center=(0.0, 0.0), n_nodes: int = 512) -> "DomainGeometry":
        if not 0 < inner < outer:
            raise ValueError("annulus needs 0 < inner < outer")
        t = 2 * np.pi * np.arange(n_nodes) / n_nodes
        e = np.stack([np.cos(t), np.sin(t)], axis=1)
        c = np.asarray(center, dtype=float)
        n_in = max(16, int(round(n_nodes * inner / outer)))
        ti = 2 * np.pi * np.arange(n_in) / n_in
        ei = np.stack([np.cos(ti), np.sin(ti)], axis=1)
        pts = np.concatenate([c + outer * e, c + inner * ei])
        nu = np.concatenate([e, -ei])
        w = np.concatenate([np.full(n_nodes, 2 * np.pi * outer / n_nodes), np.full(n_in, 2 * np.pi * inner / n_in)])
        return cls("annulus", {"inner": float(inner), "outer": float(outer), "center": tuple(map(float, c))},
                   pts, nu, _rot90(nu), w)

    @classmethod
    def rectangle(cls, xmin: float, xmax: float, ymin: float, ymax: float, n_per_side: int = 256) -> "DomainGeometry":
        pts, nus, ws = [], [], []
        sides = [((xmin, ymin), (xmax, ymin), (0.0, -1.0)), ((xmax, ymin), (xmax, ymax), (1.0, 0.0)),
                 ((xmax, ymax), (xmin, ymax), (0.0, 1.0)), ((xmin, ymax), (xmin, ymin), (-1.0, 0.0))]
        for a, b, nu in sides:
            s = (np.arange(n_per_side) + 0.5) / n_per_side
            a, b = np.asarray(a), np.asarray(b)
            pts.append(a + s[:, None] * (b - a))
            nus.append(np.tile(nu, (n_per_side, 1)))
            ws.append(np.full(n_per_side, np.linalg.norm(b - a) / n_per_side))
        nu = np.concatenate(nus)
        return cls("rectangle", {"xmin": xmin, "xmax": xmax, "ymin": ymin, "ymax": ymax},
                   np.concatenate(pts), nu, _rot90(nu), np.concatenate(ws))

    @property
    def length(self) -> float:
        p = self.params
        if self.kind == "disk":
            return 2 * math.pi * p["radius"]
        if self.kind == "annulus":
            return 2 * math.pi * (p["inner"] + p["outer"])
        return 2 * ((p["xmax"] - p["xmin"]) + (p["ymax"] - p["ymin"]))

    def contains(self, x, y) -> np.ndarray:
        p = self.params
        if self.kind == "rectangle":
            return (x > p["xmin"]) & (x < p["xmax"]) & (y > p["ymin"]) & (y < p["ymax"])
        cx, cy = p["center"]
        rho = np.hypot(np.asarray(x) - cx, np.asarray(y) - cy)
        if self.kind == "disk":
            return rho < p["radius"]
        return (rho > p["inner"]) & (rho < p["outer"])

    def contains_disk(self, center, radius: float) -> bool:
        """True if the closed disk B(center, radius) lies inside the domain."""
        x, y = center
        p = self.params
        if self.kind == "rectangle":
            return p["xmin"] < x - radius and x + radius < p["xmax"] and p["ymin"] < y - radius and y + radius < p["ymax"]
        rho = math.hypot(x - p["center"][0], y - p["center"][1])
        if self.kind == "disk":
            return rho + radius < p["radius"]
        return rho - radius > p["inner"] and rho + radius < p["outer"]

    def cell_weights(self, f: GridField) -> np.ndarray:
        """Area of each node's cell [x +- dx/2] x [y +- dy/2] that falls inside the domain."""
        X, Y = f.coords()
        x1, x2 = X - f.dx / 2, X + f.dx / 2
        y1, y2 = Y - f.dy / 2, Y + f.dy / 2
        p = self.params
        if self.kind == "rectangle":
            wx = np.clip(np.minimum(x2, p["xmax"]) - np.maximum(x1, p["xmin"]), 0, None)
            wy = np.clip(np.minimum(y2, p["ymax"]) - np.maximum(y1, p["ymin"]), 0, None)
            return wx * wy
        cx, cy = p["center"]
        if self.kind == "disk":
            return _disk_rect_area(p["radius"], x1 - cx, x2 - cx, y1 - cy, y2 - cy)
        return (_disk_rect_area(p["outer"], x1 - cx, x2 - cx, y1 - cy, y2 - cy)
                - _disk_rect_area(p["inner"], x1 - cx, x2 - cx, y1 - cy, y2 - cy))

    def is_star_shaped(self, about=(0.0, 0.0)) -> bool:
        xnu = np.einsum("ij,ij->i", self.points - np.asarray(about), self.normals)
        return bool(np.all(xnu >= -1e-12))


def _rot90(v: np.ndarray) -> np.ndarray:
    return np.stack([-v[:, 1], v[:, 0]], axis=1)


def interior_integral(f: GridField, geom: DomainGeometry, values: np.ndarray | None = None) -> float:
    """Integral over the domain of ``values`` (default f's values) with exact cut-cell weights."""
    w = geom.cell_weights(f)
    touched = w > 0
    if np.any(touched & ~f.valid):
        raise GeometryMismatch("domain overlaps cells of masked nodes")
    v = f.values if values is None else values
    return float(np.sum(np.where(touched, v, 0.0) * w))


@dataclass(frozen=True)
class BoundaryTrace:
    value: np.ndarray
    dnu: np.ndarray
    dtau: np.ndarray
    offset: np.ndarray = field(repr=False, default=None)


def _cubic_extrapolate(samples: np.ndarray, t0: np.ndarray, s: float) -> tuple[np.ndarray, np.ndarray]:
    """Value and d/dt at t = 0 of the cubic through (t0 + k s, samples[k]), k = 0..3."""
    ts = t0[None, :] + s * np.arange(4)[:, None]
    val = np.zeros(samples.shape[1])
    der = np.zeros(samples.shape[1])
    for k in range(4):
        others = [m for m in range(4) if m != k]
        denom = np.prod([ts[k] - ts[m] for m in others], axis=0)
        # L_k(0) and L_k'(0)
        prod0 = np.prod([-ts[m] for m in others], axis=0)
        dprod = sum(np.prod([-ts[m] for m in others if m != q], axis=0) for q in others)
        val += samples[k] * prod0 / denom
        der += samples[k] * dprod / denom
    return val, der


def boundary_integrals(f: GridField, geom: DomainGeometry, max_offset: int = 8) -> BoundaryTrace:
    """Trace, normal and tangential derivatives of f at the geometry's boundary nodes.

    Four samples are taken along the inward normal at distances t0 + k*s
    (s = max grid spacing) and a cubic through them is evaluated at the
    boundary; t0 is the smallest multiple of s for which every bicubic
    stencil involved sits on valid nodes. Tangential derivatives are
    centred differences along tau at each sample, extrapolated the same way.
    """
    s = max(f.dx, f.dy)
    P, nu, tau = geom.points, geom.normals, geom.tangents
    m = P.shape[0]
    value = np.zeros(m)
    dnu = np.zeros(m)
    dtau = np.zeros(m)
    offset = np.full(m, -1.0)
    todo = np.ones(m, dtype=bool)
    for k0 in range(max_offset + 1):
        if not todo.any():
            break
        idx = np.nonzero(todo)[0]
        t0 = np.full(idx.size, k0 * s)
        along, tang = [], []
        ok = np.ones(idx.size, dtype=bool)
        for k in range(4):
            q = P[idx] - (t0 + k * s)[:, None] * nu[idx]
            v, o = interpolate_cubic(f, q[:, 0], q[:, 1])
            ok &= o
            qp, qm = q + s * tau[idx], q - s * tau[idx]
            vp, op = interpolate_cubic(f, qp[:, 0], qp[:, 1])
            vm, om = interpolate_cubic(f, qm[:, 0], qm[:, 1])
            ok &= op & om
            along.append(v)
            tang.append((vp - vm) / (2 * s))
        val, dt = _cubic_extrapolate(np.array(along), t0, s)
        tv, _ = _cubic_extrapolate(np.array(tang), t0, s)
        sel = idx[ok]
        value[sel] = val[ok]
        dnu[sel] = -dt[ok]  # t runs inward, nu outward
        dtau[sel] = tv[ok]
        offset[sel] = k0 * s
        todo[sel] = False
    if todo.any():
        raise GeometryMismatch(f"{int(todo.sum())} boundary nodes have no valid interior stencil")
    return BoundaryTrace(value, dnu, dtau, offset)


# ---------------------------------------------------------------------------
# JSON file format


def field_to_json(f: GridField) -> str:
    obj = {"nx": f.nx, "ny": f.ny, "x0": f.x0, "y0": f.y0, "dx": f.dx, "dy": f.dy}
    if f.mask is not None:
        obj["mask"] = [bool(b) for b in f.mask.ravel()]
    obj["values"] = [float(v) for v in f.values.ravel()]
    return json.dumps(obj, separators=(",", ":"), allow_nan=False) + "\n"


def field_from_json(text: str) -> GridField:
    try:
        obj = json.loads(text)
        nx, ny = int(obj["nx"]), int(obj["ny"])
        vals = np.asarray(obj["values"], dtype=float)
        mask = obj.get("mask")
        if vals.size != nx * ny or (mask is not None and len(mask) != nx * ny):
            raise GridError(f"expected {nx * ny} entries")
        return GridField(nx, ny, obj["x0"], obj["y0"], obj["dx"], obj["dy"], vals.reshape(ny, nx),
                         None if mask is None else np.asarray(mask, dtype=bool).reshape(ny, nx))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise GridError(f"malformed field file: {exc}") from exc


def write_field(f: GridField, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(field_to_json(f))


def read_field(path) -> GridField:
    with open(path, encoding="utf-8") as fh:
        return field_from_json(fh.read())


def resample(f: GridField, spec: GridSpec) -> GridField:
    """Bicubic resampling onto another grid; nodes without a valid stencil are masked."""
    X, Y = spec.coords()
    v, ok = interpolate_cubic(f, X, Y)
    mask = None if ok.all() else ok
    return GridField(spec.nx, spec.ny, spec.x0, spec.y0, spec.dx, spec.dy, np.where(ok, v, 0.0), mask)


def field_diff(a: GridField, b: GridField) -> dict:
    if not a.same_grid(b):
        raise GridError("fields live on different grids")
    both = a.valid & b.valid
    d = np.abs(a.values - b.values)[both]
    return {"max_abs": float(d.max()) if d.size else 0.0,
            "l2": float(np.sqrt(np.sum(d**2) * a.dx * a.dy)),
            "nodes_compared": int(both.sum())}


def field_info(f: GridField) -> dict:
    vals = f.values[f.valid]
    xmin, xmax, ymin, ymax = f.bounds
    return {"nx": f.nx, "ny": f.ny, "dx": f.dx, "dy": f.dy, "bounds": [xmin, xmax, ymin, ymax],
            "valid_nodes": int(f.valid.sum()), "min": float(vals.min()), "max": float(vals.max())}


def iter_nodes(f: GridField) -> Iterable[tuple[int, int]]:
    js, is_ = np.nonzero(f.valid)
    return zip(js.tolist(), is_.tolist())
