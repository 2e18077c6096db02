"""Extraction of the vorticity measure mu = -Lap h + h of a stationary field.

Near a point where grad h does not vanish, w = (d_z h)^2 is continuous even
where d_z h itself flips sign. A continuous square root g of w gives
d_z h = theta g with theta = +-1, and the potential H with
g = (H_x - i H_y)/2 vanishes exactly on the support curve. There mu has
density 2 sigma |grad h| with respect to arc length; on the flat set
{grad h = 0} it is h times area.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .fields import (GridField, TestFunction, _support_nodes, gradient, interpolate_linear, kink_nodes,
                     pair_vorticity)

GRADIENT_SCHEME = "eno"
ARG_STEP = math.pi / 8  # max phase change between consecutive segment samples
MIN_SAMPLES = 8
MAX_SAMPLES = 4096
BASE_TOL = 1e-10


class BranchError(ValueError):
    """w vanishes on the disk, or the base value is not a logarithm of w(center)."""


class PotentialError(ValueError):
    """The two path integrations of grad H disagree: g is not a gradient."""


# ---------------------------------------------------------------------------
# complex fields


@dataclass(frozen=True, eq=False)
class ComplexGridField:
    re: GridField
    im: GridField

    def __post_init__(self):
        if not self.re.same_grid(self.im):
            raise ValueError("real and imaginary parts must share a grid")

    @classmethod
    def from_array(cls, template: GridField, values: np.ndarray, mask=None) -> "ComplexGridField":
        values = np.asarray(values, dtype=complex)
        m = template.mask if mask is None else mask
        return cls(template.with_values(values.real, m), template.with_values(values.imag, m))

    @property
    def values(self) -> np.ndarray:
        return self.re.values + 1j * self.im.values

    @property
    def valid(self) -> np.ndarray:
        return self.re.valid

    @property
    def grid(self) -> GridField:
        return self.re


def dz(h: GridField, scheme: str = GRADIENT_SCHEME) -> np.ndarray:
    """d_z h = (h_x - i h_y)/2 at every node."""
    hx, hy = gradient(h, scheme)
    return 0.5 * (hx.values - 1j * hy.values)


def _disk_nodes(f: GridField, center, radius: float) -> np.ndarray:
    X, Y = f.coords()
    return np.hypot(X - center[0], Y - center[1]) <= radius


def log_branch(w: ComplexGridField, center, radius: float, base_value: complex) -> ComplexGridField:
    """Continuous logarithm v of w on the disk, with v(center) = base_value.

    The phase is continued along each segment from the centre: w is
    sampled (bilinearly) at equally spaced points and the principal logs
    of consecutive ratios are summed, doubling the sample count until no
    step turns the phase by more than pi/8. The result is then snapped to
    log|w| + i(Arg w + 2 pi k), the branch of the exact logarithm nearest
    to the continued phase, so exp(v) = w to rounding.
    """
    f = w.grid
    vals = w.values
    c0, ok0 = interpolate_linear(f, np.array([center[0]]), np.array([center[1]]), vals)
    if not ok0[0]:
        raise BranchError("disk centre is not surrounded by valid nodes")
    wc = complex(c0[0])
    if abs(cmath.exp(base_value) - wc) > BASE_TOL * max(1.0, abs(wc)):
        raise BranchError(f"exp(base) = {cmath.exp(base_value)} does not match w(center) = {wc}")
    disk = _disk_nodes(f, center, radius)
    if np.any(disk & ~w.valid):
        raise BranchError("disk contains nodes where w is undefined")
    scale = np.max(np.abs(vals[disk])) if disk.any() else 1.0
    floor = 1e-12 * scale
    js, is_ = np.nonzero(disk)
    zx, zy = f.x[is_], f.y[js]
    phase = np.zeros(js.size)
    todo = np.arange(js.size)
    n = MIN_SAMPLES
    while todo.size:
        t = np.linspace(0.0, 1.0, n + 1)[None, :]
        px = center[0] + t * (zx[todo, None] - center[0])
        py = center[1] + t * (zy[todo, None] - center[1])
        s, ok = interpolate_linear(f, px, py, vals)
        if not ok.all():
            raise BranchError("segment leaves the valid region")
        if np.min(np.abs(s)) <= floor:
            raise BranchError("w vanishes on the disk")
        steps = np.angle(s[:, 1:] / s[:, :-1])
        good = np.max(np.abs(steps), axis=1) <= ARG_STEP
        phase[todo[good]] = steps[good].sum(axis=1)
        todo = todo[~good]
        n *= 2
        if n > MAX_SAMPLES and todo.size:
            raise BranchError("phase of w varies too fast to continue")
    wz = vals[js, is_]
    arg = np.angle(wz)
    target = base_value.imag + phase
    k = np.round((target - arg) / (2 * np.pi))
    v = np.zeros(vals.shape, dtype=complex)
    v[js, is_] = np.log(np.abs(wz)) + 1j * (arg + 2 * np.pi * k)
    return ComplexGridField.from_array(f, v, mask=disk)


def principal_log_at(w: ComplexGridField, center) -> complex:
    c, ok = interpolate_linear(w.grid, np.array([center[0]]), np.array([center[1]]), w.values)
    if not ok[0] or c[0] == 0:
        raise BranchError("w undefined or zero at the centre")
    return complex(np.log(c[0]))


def sqrt_branch(w: ComplexGridField, center, radius: float, base_value: complex | None = None) -> ComplexGridField:
    """g = exp(v/2) for the continuous log v; the principal root at the centre by default."""
    if base_value is None:
        base_value = principal_log_at(w, center)
    v = log_branch(w, center, radius, base_value)
    g = np.where(v.valid, np.exp(v.values / 2), 0.0)
    return ComplexGridField.from_array(w.grid, g, mask=v.valid)


def sign_field(h: GridField, g: ComplexGridField, grad_threshold: float,
               dzh: np.ndarray | None = None, exclude: np.ndarray | None = None) -> GridField:
    """theta = sign Re(d_z h / g) on nodes of g's support where |grad h| > grad_threshold.

    Nodes flagged in ``exclude`` (kink nodes) are left unclassified.
    """
    if dzh is None:
        dzh = dz(h)
    gv = g.values
    classified = g.valid & h.valid & (2 * np.abs(dzh) > grad_threshold)
    if exclude is not None:
        classified &= ~exclude
    if np.any(np.abs(gv[classified]) <= 1e-300):
        raise BranchError("g vanishes on a classified node")
    ratio = np.zeros_like(gv)
    ratio[classified] = dzh[classified] / gv[classified]
    theta = np.where(ratio.real >= 0, 1.0, -1.0)
    return h.with_values(np.where(classified, theta, 0.0), mask=classified)


def _cumtrapz_anchor(v: np.ndarray, k0: int, step: float, axis: int) -> np.ndarray:
    """Trapezoid integral along ``axis`` from index k0 to every index."""
    v = np.moveaxis(v, axis, 0)
    mid = 0.5 * (v[:-1] + v[1:]) * step
    c = np.concatenate([np.zeros((1,) + v.shape[1:]), np.cumsum(mid, axis=0)])
    return np.moveaxis(c - c[k0], 0, axis)


@dataclass(frozen=True, eq=False)
class Potential:
    field: GridField
    discrepancy: float  # max difference between the two path orders
    start: tuple[int, int]


def potential(g: ComplexGridField, base: float = 0.0, center=None, tol: float | None = None) -> Potential:
    """H with grad H = (2 Re g, -2 Im g) and H(center) = base.

    Integrated by the trapezoid rule along x-then-y and y-then-x paths
    from the node nearest ``center`` (default: centroid of g's support);
    the two are averaged. Raises PotentialError when they differ by more
    than ``tol`` (default 1% of diam * max|grad H|).
    """
    f = g.grid
    valid = g.valid
    if center is None:
        X, Y = f.coords()
        center = (X[valid].mean(), Y[valid].mean())
    i0 = int(round((center[0] - f.x0) / f.dx))
    j0 = int(round((center[1] - f.y0) / f.dy))
    if not (0 <= i0 < f.nx and 0 <= j0 < f.ny and valid[j0, i0]):
        raise PotentialError("start node outside g's support")
    gv = np.where(valid, g.values, 0.0)
    Hx, Hy = 2 * gv.real, -2 * gv.imag
    row = _cumtrapz_anchor(Hx[j0], i0, f.dx, 0)
    col = _cumtrapz_anchor(Hy[:, i0], j0, f.dy, 0)
    HA = row[None, :] + _cumtrapz_anchor(Hy, j0, f.dy, 0)
    HB = col[:, None] + _cumtrapz_anchor(Hx, i0, f.dx, 1)
    diff = float(np.max(np.abs(HA - HB)[valid])) if valid.any() else 0.0
    if tol is None:
        X, Y = f.coords()
        diam = 2 * float(np.max(np.hypot(X[valid] - f.x[i0], Y[valid] - f.y[j0]))) if valid.any() else 0.0
        tol = 0.01 * diam * float(np.max(np.hypot(Hx, Hy)[valid]) if valid.any() else 0.0)
    if diff > tol:
        raise PotentialError(f"path integrals of grad H disagree by {diff:.3e}")
    H = 0.5 * (HA + HB) + base
    return Potential(f.with_values(np.where(valid, H, 0.0), mask=valid), diff, (j0, i0))


# ---------------------------------------------------------------------------
# curves


@dataclass(frozen=True, eq=False)
class CurveComponent:
    vertices: np.ndarray  # (k, 2), chained order
    density: np.ndarray  # 2 |grad h| at each vertex
    sigma: int
    h_on_curve: np.ndarray
    vertex_sigma: np.ndarray
    closed: bool
    segments: np.ndarray  # (m, 2, 2) line segments making up the component

    @property
    def sigma_constant(self) -> bool:
        s = self.vertex_sigma[self.vertex_sigma != 0]
        return bool(s.size == 0 or np.all(s == s[0]))

    @property
    def h_spread(self) -> float:
        return float(np.ptp(self.h_on_curve)) if self.h_on_curve.size else 0.0

    @property
    def length(self) -> float:
        return float(np.sum(np.linalg.norm(self.segments[:, 1] - self.segments[:, 0], axis=1)))


@dataclass(frozen=True, eq=False)
class CurveMeasure:
    components: list
    degenerate_cells: int = 0

    @property
    def empty(self) -> bool:
        return not self.components

    def vertices(self) -> np.ndarray:
        if self.empty:
            return np.zeros((0, 2))
        return np.concatenate([c.vertices for c in self.components])

    def line_integral(self, phi: TestFunction) -> float:
        """sum over segments of the trapezoid rule for 2 sigma |grad h| phi ds."""
        total = 0.0
        for c in self.components:
            for (p, q), (dp, dq) in zip(c.segments, c._seg_density):
                fp = dp * phi(p[0], p[1])
                fq = dq * phi(q[0], q[1])
                total += 0.5 * (fp + fq) * math.hypot(q[0] - p[0], q[1] - p[1]) * c.sigma
        return float(total)


class _Vertex:
    __slots__ = ("pos", "a", "b", "t", "Hq", "tq", "hside")

    def __init__(self, pos, a, b, t, Hq, tq, hside):
        # Hq, tq: H and theta at (a2, a, b, b2), a2 and b2 the next nodes outward;
        # hside: per side, (position, h) of nodes on the line with the sign of H of that side
        self.pos, self.a, self.b, self.t = pos, a, b, t
        self.Hq, self.tq, self.hside = Hq, tq, hside

    def sigma(self) -> int:
        """sign(H at the theta = -1 node - H at the theta = +1 node), using the
        nearest pair of nodes with opposite, nonzero theta."""
        for i, k in ((1, 2), (0, 2), (1, 3), (0, 3)):
            ti, tk = self.tq[i], self.tq[k]
            if ti != 0 and tk != 0 and ti != tk:
                Hm, Hp = (self.Hq[i], self.Hq[k]) if ti < 0 else (self.Hq[k], self.Hq[i])
                return int(np.sign(Hm - Hp))
        return 0


def _edge_nodes(key):
    kind, j, i = key
    return ((j, i), (j, i + 1)) if kind == "h" else ((j, i), (j + 1, i))


def _march(H: np.ndarray, theta: np.ndarray, cells: np.ndarray, f: GridField, vertices: dict,
           segments: list, H_ok: np.ndarray, depth: int = 3) -> int:
    """Marching squares on the flagged cells; adds vertices keyed by grid edge and segments."""
    pos = H > 0
    ny, nx = H.shape
    s00, s01 = pos[:-1, :-1], pos[:-1, 1:]
    s10, s11 = pos[1:, :-1], pos[1:, 1:]
    mixed = cells & ~((s00 == s01) & (s00 == s10) & (s00 == s11))
    degenerate = 0

    def vertex(key):
        if key in vertices:
            return key
        a, b = _edge_nodes(key)
        Ha, Hb = H[a], H[b]
        t = Ha / (Ha - Hb)
        xa, ya = f.x[a[1]], f.y[a[0]]
        xb, yb = f.x[b[1]], f.y[b[0]]
        p = (xa + t * (xb - xa), ya + t * (yb - ya))
        a2 = (2 * a[0] - b[0], 2 * a[1] - b[1])
        b2 = (2 * b[0] - a[0], 2 * b[1] - a[1])
        quad = (a2, a, b, b2)
        inside = [0 <= q[0] < H.shape[0] and 0 <= q[1] < H.shape[1] for q in quad]
        Hq = tuple(H[q] if ok else 0.0 for q, ok in zip(quad, inside))
        tq = tuple(theta[q] if ok else 0.0 for q, ok in zip(quad, inside))
        d = (b[0] - a[0], b[1] - a[1])
        hside = []
        for origin, sgn, s0 in ((a, -1, 0), (b, 1, 1)):
            side = []
            for k in range(depth):
                n = (origin[0] + sgn * k * d[0], origin[1] + sgn * k * d[1])
                if not (0 <= n[0] < ny and 0 <= n[1] < nx and H_ok[n] and pos[n] == pos[origin]):
                    break
                side.append((s0 + sgn * k, float(f.values[n])))
            hside.append(side)
        vertices[key] = _Vertex(p, a, b, t, Hq, tq, hside)
        return key

    for j, i in zip(*np.nonzero(mixed)):
        c = {"00": pos[j, i], "01": pos[j, i + 1], "10": pos[j + 1, i], "11": pos[j + 1, i + 1]}
        edges = {"b": ("h", j, i), "r": ("v", j, i + 1), "t": ("h", j + 1, i), "l": ("v", j, i)}
        crossing = {"b": c["00"] != c["01"], "r": c["01"] != c["11"],
                    "t": c["10"] != c["11"], "l": c["00"] != c["10"]}
        cut = [e for e in "brtl" if crossing[e]]
        if len(cut) == 2:
            segments.append((vertex(edges[cut[0]]), vertex(edges[cut[1]])))
        elif len(cut) == 4:
            degenerate += 1
            centre = 0.25 * (H[j, i] + H[j, i + 1] + H[j + 1, i] + H[j + 1, i + 1]) > 0
            # corners whose sign differs from the centre are cut off on their own
            around = {"00": ("b", "l"), "01": ("b", "r"), "10": ("l", "t"), "11": ("r", "t")}
            for corner, (e1, e2) in around.items():
                if c[corner] != centre:
                    segments.append((vertex(edges[e1]), vertex(edges[e2])))
    return degenerate


def _components(segments: list) -> list[list[int]]:
    parent = {}

    def find(k):
        while parent.setdefault(k, k) != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    for a, b in segments:
        parent[find(a)] = find(b)
    groups: dict = {}
    for idx, (a, _) in enumerate(segments):
        groups.setdefault(find(a), []).append(idx)
    return sorted(groups.values(), key=lambda g: min(g))


def _chain(seg_idx: list, segments: list) -> tuple[list, bool]:
    adj: dict = {}
    for s in seg_idx:
        a, b = segments[s]
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    ends = sorted(k for k, v in adj.items() if len(v) == 1)
    start = ends[0] if ends else min(adj)
    order, seen = [start], {start}
    cur = start
    while True:
        nxt = [k for k in adj[cur] if k not in seen]
        if not nxt:
            break
        cur = min(nxt)
        order.append(cur)
        seen.add(cur)
    closed = not ends and len(order) > 2
    # keys that the walk missed (branching) are appended so no vertex is dropped
    order += sorted(k for k in adj if k not in seen)
    return order, closed


def _side_nodes(ok: np.ndarray, a, b, depth: int = 3):
    """Usable nodes on each side of edge a-b along its line, nearest first.

    Returns two lists of (node, s) with s the position in edge lengths
    (a at 0, b at 1); nodes not flagged in ``ok`` are skipped.
    """
    d = (b[0] - a[0], b[1] - a[1])
    ny, nx = ok.shape
    sides = []
    for origin, sign, s0 in ((a, -1, 0), (b, 1, 1)):
        found = []
        for k in range(depth):
            n = (origin[0] + sign * k * d[0], origin[1] + sign * k * d[1])
            if 0 <= n[0] < ny and 0 <= n[1] < nx and ok[n]:
                found.append((n, s0 + sign * k))
        sides.append(found)
    return sides


def _extrapolate(q: np.ndarray, side, t: float, degree: int = 1) -> float | None:
    """Polynomial through the first degree+1 side nodes, evaluated at t."""
    if not side:
        return None
    pts = side[:degree + 1]
    out = 0.0
    for k, (nk, sk) in enumerate(pts):
        w = 1.0
        for m, (_, sm) in enumerate(pts):
            if m != k:
                w *= (t - sm) / (sk - sm)
        out += w * q[nk]
    return float(out)


def _lagrange_at(pts, t: float) -> float:
    out = 0.0
    for k, (sk, vk) in enumerate(pts):
        w = 1.0
        for m, (sm, _) in enumerate(pts):
            if m != k:
                w *= (t - sm) / (sk - sm)
        out += w * vk
    return out


def _build_curve(f: GridField, vertices: dict, segments: list, grad: tuple[np.ndarray, np.ndarray],
                 degenerate: int, ok: np.ndarray, gfill: np.ndarray | None = None) -> CurveMeasure:
    """Assemble components with per-vertex density, sigma and h.

    Density: |grad h| extrapolated linearly from the two nearest ``ok``
    nodes on each side of the crossing edge and averaged; where a side has
    fewer than two such nodes within two cells, linear interpolation of
    ``gfill`` (|grad h| with kink nodes filled in) along the edge. h: each
    side's quadratic continuation along the edge line through nodes on
    that side of H = 0, averaged.
    """
    gx, gy = grad
    gnorm = np.hypot(gx, gy)
    if gfill is None:
        gfill = gnorm
    comps = []
    for seg_idx in _components(segments):
        keys, closed = _chain(seg_idx, segments)
        pts, dens, hv, vs = [], [], [], []
        info = {}
        for k in keys:
            v = vertices[k]
            pts.append(v.pos)
            sides = _side_nodes(ok, v.a, v.b, depth=2)
            if all(len(sd) == 2 for sd in sides):
                d = 2.0 * float(np.mean([_extrapolate(gnorm, sd, v.t) for sd in sides]))
            else:
                d = 2.0 * float((1 - v.t) * gfill[v.a] + v.t * gfill[v.b])
            dens.append(d)
            # h continued from each side by a quadratic along the edge line;
            # the two continuations differ at first order off the curve and
            # their mean is second-order accurate.
            hs = [_lagrange_at(sd, v.t) for sd in v.hside if sd]
            if not hs:
                hs = [(1 - v.t) * f.values[v.a] + v.t * f.values[v.b]]
            hv.append(float(np.mean(hs)))
            vs.append(v.sigma())
            info[k] = d
        vs_arr = np.array(vs, dtype=int)
        total = int(np.sign(vs_arr.sum()))
        segs = np.array([[vertices[segments[s][0]].pos, vertices[segments[s][1]].pos] for s in seg_idx])
        comp = CurveComponent(np.array(pts), np.array(dens), total if total != 0 else 1, np.array(hv),
                              vs_arr, closed, segs)
        object.__setattr__(comp, "_seg_density",
                           np.array([[info[segments[s][0]], info[segments[s][1]]] for s in seg_idx]))
        comps.append(comp)
    return CurveMeasure(comps, degenerate)


def support_curve(h: GridField, H: GridField, grad_threshold: float | None = None,
                  theta: GridField | None = None) -> CurveMeasure:
    """Zero level of H as polylines with density 2|grad h|, sign sigma and h sampled on the curve.

    Cells are contoured only where all four corners carry H. theta, if not
    given, is sign(grad H . grad h).
    """
    hx, hy = gradient(h, GRADIENT_SCHEME)
    gx, gy = hx.values, hy.values
    if grad_threshold is None:
        grad_threshold = default_grad_threshold(h, gx, gy)
    if theta is None:
        Hx, Hy = gradient(H, "central")
        th = np.sign(Hx.values * gx + Hy.values * gy)
    else:
        th = theta.values
    th = np.where(H.valid & (np.hypot(gx, gy) > grad_threshold), th, 0.0)
    ok = H.valid
    cells = ok[:-1, :-1] & ok[:-1, 1:] & ok[1:, :-1] & ok[1:, 1:]
    vertices, segments = {}, []
    deg = _march(H.values, th, cells, h, vertices, segments, H.valid)
    return _build_curve(h, vertices, segments, (gx, gy), deg, th != 0)


# ---------------------------------------------------------------------------
# full extraction


def default_grad_threshold(h: GridField, gx=None, gy=None, C: float = 1.0) -> float:
    """C sqrt(dx) max|grad h|."""
    if gx is None:
        a, b = gradient(h, GRADIENT_SCHEME)
        gx, gy = a.values, b.values
    scale = float(np.max(np.hypot(gx, gy)[h.valid]))
    return C * math.sqrt(max(h.dx, h.dy)) * scale


def default_flat_threshold(h: GridField, gx=None, gy=None, C: float = 1.0) -> float:
    """C dx max|grad h|; |grad h| vanishes to this order on the flat set."""
    if gx is None:
        a, b = gradient(h, GRADIENT_SCHEME)
        gx, gy = a.values, b.values
    scale = float(np.max(np.hypot(gx, gy)[h.valid]))
    return C * max(h.dx, h.dy) * scale


@dataclass(frozen=True, eq=False)
class DiskPatch:
    center: tuple[float, float]
    radius: float
    g: ComplexGridField
    theta: GridField
    H: Potential


@dataclass(frozen=True, eq=False)
class MeasureResult:
    field: GridField
    curve: CurveMeasure
    flat_mask: np.ndarray
    classified: np.ndarray
    patches: list
    grad_threshold: float
    flat_threshold: float
    uncovered_edges: int

    @property
    def flat_density(self) -> np.ndarray:
        return np.where(self.flat_mask, self.field.values, 0.0)


def _flip_edges(classified: np.ndarray, gx: np.ndarray, gy: np.ndarray):
    out = []
    for axis in (1, 0):
        if axis == 1:
            both = classified[:, :-1] & classified[:, 1:]
            dot = gx[:, :-1] * gx[:, 1:] + gy[:, :-1] * gy[:, 1:]
            js, is_ = np.nonzero(both & (dot < 0))
            out += [((j, i), (j, i + 1)) for j, i in zip(js.tolist(), is_.tolist())]
        else:
            both = classified[:-1, :] & classified[1:, :]
            dot = gx[:-1, :] * gx[1:, :] + gy[:-1, :] * gy[1:, :]
            js, is_ = np.nonzero(both & (dot < 0))
            out += [((j, i), (j + 1, i)) for j, i in zip(js.tolist(), is_.tolist())]
    return out


def _kink_edges(classified: np.ndarray, kinks: np.ndarray):
    """Axis edges from a classified node to a kink node, oriented (classified, kink)."""
    def nz(m):
        return zip(*(a.tolist() for a in np.nonzero(m)))

    out = [((j, i), (j, i + 1)) for j, i in nz(classified[:, :-1] & kinks[:, 1:])]
    out += [((j, i + 1), (j, i)) for j, i in nz(kinks[:, :-1] & classified[:, 1:])]
    out += [((j, i), (j + 1, i)) for j, i in nz(classified[:-1, :] & kinks[1:, :])]
    out += [((j + 1, i), (j, i)) for j, i in nz(kinks[:-1, :] & classified[1:, :])]
    return out


def _kink_offset(h: GridField, gx, gy, a, b) -> float:
    """H-value shift that puts the zero level at the kink on edge a-b.

    The kink is where the one-sided linear extrapolations of h from a and
    from b meet; returned as a fraction t in [0, 1] of the edge.
    """
    ex, ey = h.x[b[1]] - h.x[a[1]], h.y[b[0]] - h.y[a[0]]
    L = math.hypot(ex, ey)
    sa = (gx[a] * ex + gy[a] * ey) / L
    sb = (gx[b] * ex + gy[b] * ey) / L
    if sa == sb:
        return 0.5
    t = (h.values[b] - h.values[a] - sb * L) / ((sa - sb) * L)
    return float(min(max(t, 0.0), 1.0))


def extract_measure(h: GridField, grad_threshold: float | None = None, flat_threshold: float | None = None,
                    min_radius_cells: float = 4.0, max_radius_cells: float = 48.0) -> MeasureResult:
    """Curve and flat parts of mu for a sampled field.

    Nodes with |grad h| above ``grad_threshold`` (two or more nodes inside
    the valid region) are classified. Edges between classified nodes whose
    gradients point in opposite half-planes mark the curve. Disks centred
    on such edges, as large as the classified region allows, are placed
    greedily until every marked edge lies well inside one. In each disk
    the branch g, the sign theta and the potential H are built, and cells
    are contoured with the H of the disk they sit deepest in.
    """
    hx, hy = gradient(h, GRADIENT_SCHEME)
    gx, gy = hx.values, hy.values
    gnorm = np.hypot(gx, gy)
    if grad_threshold is None:
        grad_threshold = default_grad_threshold(h, gx, gy)
    if flat_threshold is None:
        flat_threshold = default_flat_threshold(h, gx, gy)
    step = max(h.dx, h.dy)
    inner = ndimage.binary_erosion(h.valid, iterations=2, border_value=0)
    steep = inner & (gnorm > grad_threshold)
    kinks = steep & kink_nodes(h, 0.5 * grad_threshold * step)
    classified = steep & ~kinks
    flat = h.valid & (gnorm <= flat_threshold)

    # w is continuous across the curve; on kink nodes, whose two gradient
    # components may come from opposite sides, it is replaced by the mean
    # over classified neighbours.
    dzh = 0.5 * (gx - 1j * gy)
    wv = dzh * dzh
    box = np.ones((3, 3))
    num = ndimage.convolve(np.where(classified, wv.real, 0.0), box, mode="constant") \
        + 1j * ndimage.convolve(np.where(classified, wv.imag, 0.0), box, mode="constant")
    cnt = ndimage.convolve(classified.astype(float), box, mode="constant")
    filled = kinks & (cnt > 0)
    wv = np.where(filled, num / np.maximum(cnt, 1.0), wv)
    support = classified | filled
    w = ComplexGridField.from_array(h, wv, mask=support)

    padded = np.pad(support, 1, constant_values=False)
    dist = ndimage.distance_transform_edt(padded, sampling=(h.dy, h.dx))[1:-1, 1:-1]
    radius_at = np.minimum(dist - 1.5 * step, max_radius_cells * step)

    edges = _flip_edges(classified, gx, gy) + _kink_edges(classified, kinks)
    patches: list[DiskPatch] = []
    seeds: list[tuple] = []
    remaining = list(edges)
    X, Y = h.coords()
    while remaining:
        best = None
        for a, b in remaining:
            for node, other in ((a, b), (b, a)):
                if not classified[node]:
                    continue
                r = radius_at[node]
                if best is None or r > best[0] or (r == best[0] and (node, other) < best[1:]):
                    best = (r, node, other)
        r, a, b = best
        if r < min_radius_cells * step:
            break
        c = (float(h.x[a[1]]), float(h.y[a[0]]))
        g = sqrt_branch(w, c, r)
        theta = sign_field(h, g, grad_threshold, dzh, exclude=kinks)
        pot = potential(g, 0.0, c)
        q = b
        if kinks[b]:
            b2 = (2 * b[0] - a[0], 2 * b[1] - a[1])
            if 0 <= b2[0] < h.ny and 0 <= b2[1] < h.nx and classified[b2]:
                q = b2
        Hv = pot.field.values
        Hgx, Hgy = theta.values * gx, theta.values * gy  # grad H = theta grad h
        ex, ey = h.x[q[1]] - h.x[a[1]], h.y[q[0]] - h.y[a[0]]
        if kinks[q]:
            shift = Hv[q]
        else:
            t = _kink_offset(h, gx, gy, a, q)
            za = Hv[a] + t * (Hgx[a] * ex + Hgy[a] * ey)
            zq = Hv[q] - (1 - t) * (Hgx[q] * ex + Hgy[q] * ey)
            shift = 0.5 * (za + zq)
        Hf = pot.field.with_values(np.where(pot.field.valid, Hv - shift, 0.0))
        patches.append(DiskPatch(c, r, g, theta, Potential(Hf, pot.discrepancy, pot.start)))
        seeds.append((c, r))
        cover = 0.75 * r
        remaining = [(p, q) for p, q in remaining
                     if math.hypot(0.5 * (h.x[p[1]] + h.x[q[1]]) - c[0], 0.5 * (h.y[p[0]] + h.y[q[0]]) - c[1]) > cover]

    vertices: dict = {}
    segments: list = []
    degenerate = 0
    if patches:
        CXc = 0.5 * (X[:-1, :-1] + X[:-1, 1:])
        CYc = 0.5 * (Y[:-1, :-1] + Y[1:, :-1])
        best_q = np.full(CXc.shape, np.inf)
        owner = np.full(CXc.shape, -1)
        for k, p in enumerate(patches):
            ok = p.H.field.valid
            cells = ok[:-1, :-1] & ok[:-1, 1:] & ok[1:, :-1] & ok[1:, 1:]
            q = np.hypot(CXc - p.center[0], CYc - p.center[1]) / p.radius
            take = cells & (q < best_q)
            best_q[take] = q[take]
            owner[take] = k
        for k, p in enumerate(patches):
            degenerate += _march(p.H.field.values, p.theta.values, owner == k, h, vertices, segments,
                                 p.H.field.valid)
    gfill = np.where(support, 2.0 * np.sqrt(np.abs(wv)), gnorm)
    curve = _build_curve(h, vertices, segments, (gx, gy), degenerate, classified, gfill)
    return MeasureResult(h, curve, flat, classified, patches, grad_threshold, flat_threshold, len(remaining))


# ---------------------------------------------------------------------------
# decomposition


@dataclass(frozen=True, eq=False)
class DecompositionReport:
    curve: CurveMeasure
    flat_mask: np.ndarray
    flat_density: np.ndarray
    pairings: np.ndarray
    curve_parts: np.ndarray
    flat_parts: np.ndarray
    flat_consistency: float = 0.0  # max |(-Lap h + h) - h| over interior flat nodes
    bumps: list = field(default_factory=list, repr=False)

    @property
    def predicted(self) -> np.ndarray:
        return self.curve_parts + self.flat_parts

    @property
    def residuals(self) -> np.ndarray:
        return self.pairings - self.predicted

    @property
    def worst(self) -> float:
        return float(np.max(np.abs(self.residuals))) if self.residuals.size else 0.0

    def to_dict(self) -> dict:
        return {"pairings": self.pairings.tolist(), "curve_parts": self.curve_parts.tolist(),
                "flat_parts": self.flat_parts.tolist(), "residuals": self.residuals.tolist(),
                "worst": self.worst, "flat_nodes": int(self.flat_mask.sum()),
                "curve_components": len(self.curve.components),
                "bumps": [{"center": list(b.center), "radius": b.radius} for b in self.bumps]}


def flat_integral(h: GridField, flat_mask: np.ndarray, phi: TestFunction) -> float:
    sj, si, _ = _support_nodes(h, phi)
    X, Y = np.meshgrid(h.x[si], h.y[sj])
    v = np.where(flat_mask[sj, si], h.values[sj, si], 0.0)
    return float(np.sum(v * phi(X, Y)) * h.dx * h.dy)


def decomposition_check(h: GridField, curves: CurveMeasure | list, bumps, flat_mask: np.ndarray | None = None
                        ) -> DecompositionReport:
    """Compare <mu, phi> with the curve integral of 2 sigma |grad h| phi plus the flat integral of h phi."""
    if isinstance(curves, CurveMeasure):
        curves = [curves]
    if flat_mask is None:
        flat_mask = h.valid & (np.hypot(*(g.values for g in gradient(h, GRADIENT_SCHEME)))
                               <= default_flat_threshold(h))
    bumps = list(bumps)
    pair = np.array([pair_vorticity(h, phi) for phi in bumps])
    cpart = np.array([sum(c.line_integral(phi) for c in curves) for phi in bumps])
    fpart = np.array([flat_integral(h, flat_mask, phi) for phi in bumps])
    from .fields import laplacian
    lap = laplacian(h)
    interior = flat_mask & lap.valid & ndimage.binary_erosion(flat_mask, iterations=1)
    cons = float(np.max(np.abs(-lap.values[interior]))) if interior.any() else 0.0
    return DecompositionReport(curves[0] if len(curves) == 1 else CurveMeasure(
        [c for cm in curves for c in cm.components]), flat_mask,
        np.where(flat_mask, h.values, 0.0), pair, cpart, fpart, cons, bumps)


# ---------------------------------------------------------------------------
# n-line fields


@dataclass(frozen=True)
class DiameterFit:
    angles: np.ndarray  # fitted directions in [0, pi), sorted
    errors_deg: np.ndarray  # against the expected directions
    two_sided: np.ndarray  # each diameter has curve on both sides of the origin


def fit_diameters(curve: CurveMeasure, n: int, expected: np.ndarray | None = None) -> DiameterFit:
    """Group curve vertices by direction mod pi into n clusters and fit one angle per cluster."""
    V = curve.vertices()
    if V.shape[0] < n:
        raise ValueError(f"curve has {V.shape[0]} vertices, cannot fit {n} diameters")
    rad = np.hypot(V[:, 0], V[:, 1])
    V = V[rad > 0]
    ang = np.mod(np.arctan2(V[:, 1], V[:, 0]), np.pi)
    order = np.argsort(ang)
    a = ang[order]
    gaps = np.diff(np.concatenate([a, [a[0] + np.pi]]))
    cuts = np.sort(np.argsort(gaps)[-n:])
    # cluster k runs from cuts[k-1]+1 to cuts[k] (cyclically)
    labels = np.zeros(a.size, dtype=int)
    for k in range(n):
        lo = cuts[k - 1] + 1 if k > 0 else cuts[-1] + 1
        hi = cuts[k]
        idx = np.arange(lo, hi + 1) if lo <= hi else np.concatenate([np.arange(lo, a.size), np.arange(0, hi + 1)])
        labels[idx] = k
    fitted, sides = [], []
    for k in range(n):
        sel = order[labels == k]
        z = np.exp(2j * ang[sel]).mean()
        th = np.mod(np.angle(z) / 2, np.pi)
        fitted.append(th)
        proj = V[sel, 0] * math.cos(th) + V[sel, 1] * math.sin(th)
        sides.append(bool(np.any(proj > 0) and np.any(proj < 0)))
    idx = np.argsort(fitted)
    fitted = np.array(fitted)[idx]
    sides = np.array(sides)[idx]
    if expected is None:
        expected = np.pi / (2 * n) + np.pi * np.arange(n) / n
    expected = np.sort(np.mod(expected, np.pi))
    diff = np.abs(fitted - expected)
    diff = np.minimum(diff, np.pi - diff)
    return DiameterFit(fitted, np.degrees(diff), sides)
