"""Boundary-element solver for planar electrode layouts.

Panels are axis-aligned rectangles in horizontal planes (the chip at y = 0
and the top plate at y = h). Charge is piecewise constant per panel with
collocation at panel centroids; the per-panel potential integral

    P(r) = integral over panel of dA' / |r - r'|

has the usual closed form (corner sums of asinh/atan2 terms), so assembly,
the dense solve and field evaluation are all exact given the mesh. The
unknowns are q_j = sigma_j / (4 pi eps0), i.e. P is multiplied by q to give
volts directly.

Meshing is graded: the target panel size grows linearly with distance from
the trap center, with the fine size set by ``layout.scale() /
panels_per_dimension``. Everything inside the layout bounding box that is
not a named electrode must be covered by ground-role polygons (the
canonical layout does this); the solver meshes whatever polygons it is
given plus the plate, and leaves the rest as open boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from numba import njit

from .errors import ConfigError, SolverError
from .model import TOP_PLATE_KEY, ElectrodeLayout


def as_rectangle(polygon: np.ndarray):
    """Return (x1, x2, z1, z2) if polygon is an axis-aligned rectangle."""
    p = np.asarray(polygon, dtype=float)
    if p.shape[0] != 4:
        return None
    xs = np.unique(p[:, 0])
    zs = np.unique(p[:, 1])
    if len(xs) != 2 or len(zs) != 2:
        return None
    want = {(x, z) for x in xs for z in zs}
    got = {(x, z) for x, z in p}
    if want != got:
        return None
    return float(xs[0]), float(xs[1]), float(zs[0]), float(zs[1])


def _subdivide(a: float, b: float, s_min: float, slope: float,
               focus: float, offset: float, edge_refine: float = 4.0) -> np.ndarray:
    """Graded 1-D knots on [a, b].

    Two size caps combine: growth with distance from `focus` (the trap
    center, with a constant out-of-plane `offset` for plate rectangles),
    and refinement toward the interval ends where the induced charge
    density is singular (electrode edges). The finest edge panel is
    s_min / edge_refine.
    """
    s_edge = s_min / edge_refine

    def allowed(lo, hi):
        d = 0.0 if lo <= focus <= hi else min(abs(lo - focus), abs(hi - focus))
        cap_center = max(s_min, slope * float(np.hypot(d, offset)))
        d_edge = min(lo - a, b - hi)
        cap_edge = max(s_edge, 0.6 * d_edge)
        return min(cap_center, cap_edge)

    knots = [a, b]
    stack = [(a, b)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo > allowed(lo, hi):
            mid = 0.5 * (lo + hi)
            knots.append(mid)
            stack.append((lo, mid))
            stack.append((mid, hi))
    return np.array(sorted(knots))


@dataclass(frozen=True)
class SolverMeta:
    panel_count: int
    residual_norm: float
    condition_estimate: float


@njit(cache=True)
def _pot_block(panels, pts, out):
    """out[i, j] = potential integral of panel j at point i (units: meters)."""
    for i in range(pts.shape[0]):
        x = pts[i, 0]
        y = pts[i, 1]
        z = pts[i, 2]
        for j in range(panels.shape[0]):
            h = y - panels[j, 4]
            acc = 0.0
            for ci in range(2):
                u = panels[j, ci] - x
                su = np.sqrt(u * u + h * h)
                for cj in range(2):
                    w = panels[j, 2 + cj] - z
                    sw = np.sqrt(w * w + h * h)
                    sgn = 1.0 if ci == cj else -1.0
                    r = np.sqrt(u * u + w * w + h * h)
                    f = 0.0
                    if sw > 0.0:
                        f += w * np.arcsinh(u / sw)
                    if su > 0.0:
                        f += u * np.arcsinh(w / su)
                    f -= h * np.arctan2(u * w, h * r)
                    acc += sgn * f
            out[i, j] = acc


@njit(cache=True)
def _grad_block(panels, pts, out):
    """out[i, j, :] = gradient of the panel-j potential integral at point i.

    Valid off the panel planes (points with y differing from every panel's
    plane are always safe; in-plane points sit on edge singularities).
    """
    for i in range(pts.shape[0]):
        x = pts[i, 0]
        y = pts[i, 1]
        z = pts[i, 2]
        for j in range(panels.shape[0]):
            h = y - panels[j, 4]
            gx = 0.0
            gy = 0.0
            gz = 0.0
            for ci in range(2):
                u = panels[j, ci] - x
                su2 = u * u + h * h
                su = np.sqrt(su2)
                for cj in range(2):
                    w = panels[j, 2 + cj] - z
                    sw = np.sqrt(w * w + h * h)
                    sgn = 1.0 if ci == cj else -1.0
                    r = np.sqrt(u * u + w * w + h * h)
                    gx -= sgn * np.arcsinh(w / su)
                    gz -= sgn * np.arcsinh(u / sw)
                    gy -= sgn * np.arctan2(u * w, h * r)
            out[i, j, 0] = gx
            out[i, j, 1] = gy
            out[i, j, 2] = gz


class BemBasis:
    """Unit-voltage potential evaluators from a boundary-element solve."""

    method = "bem"

    def __init__(self, layout: ElectrodeLayout, panels: np.ndarray,
                 charges: np.ndarray, node_names: list[str], meta: SolverMeta):
        self.layout = layout
        self.panels = panels          # (M, 5): x1, x2, z1, z2, y0
        self.charges = charges        # (M, n_nodes), q = sigma/(4 pi eps0)
        self.node_names = node_names
        self.meta = meta

    @property
    def panel_count(self) -> int:
        return self.meta.panel_count

    @property
    def residual_norm(self) -> float:
        return self.meta.residual_norm

    def _pot_matrix(self, pts: np.ndarray, chunk: int = 2048) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.empty((pts.shape[0], self.panels.shape[0]))
        for s in range(0, pts.shape[0], chunk):
            _pot_block(self.panels, pts[s:s + chunk], out[s:s + chunk])
        return out

    def _grad_matrix(self, pts: np.ndarray, chunk: int = 1024) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.empty((pts.shape[0], self.panels.shape[0], 3))
        for s in range(0, pts.shape[0], chunk):
            _grad_block(self.panels, pts[s:s + chunk], out[s:s + chunk])
        return out

    def phi_nodes(self, pts) -> np.ndarray:
        """Unit-voltage potentials, shape (n_points, n_nodes)."""
        return self._pot_matrix(pts) @ self.charges

    def grad_nodes(self, pts) -> np.ndarray:
        """Unit-voltage potential gradients, shape (n_points, n_nodes, 3)."""
        g = self._grad_matrix(pts)
        return np.einsum("ijc,jn->inc", g, self.charges)

    def charge_vector(self, weights: dict[str, float]) -> np.ndarray:
        w = np.zeros(len(self.node_names))
        for name, v in weights.items():
            if name not in self.node_names:
                raise ConfigError(f"unknown node {name!r}")
            w[self.node_names.index(name)] = v
        return self.charges @ w

    def phi_weighted(self, qvec: np.ndarray, pts) -> np.ndarray:
        return self._pot_matrix(pts) @ qvec

    def grad_weighted(self, qvec: np.ndarray, pts) -> np.ndarray:
        g = self._grad_matrix(pts)
        return np.einsum("ijc,j->ic", g, qvec)


def mesh_layout(layout: ElectrodeLayout, panels_per_dimension: int = 6,
                grading_slope: float = 0.35, max_panels: int = 20000):
    """Mesh all layout polygons plus the plate into graded rectangular panels.

    Returns (panels (M,5), owner (M,) node index; -1 for grounded surfaces,
    node order = layout.node_names).
    """
    if panels_per_dimension < 1:
        raise ConfigError("panels_per_dimension must be >= 1")
    s_min = layout.scale() / panels_per_dimension
    node_names = list(layout.node_names)
    node_index = {n: k for k, n in enumerate(node_names)}

    rects = []  # (x1, x2, z1, z2, y0, owner)
    for e in layout.electrodes:
        r = as_rectangle(e.polygon)
        if r is None:
            raise ConfigError(
                f"bem requires axis-aligned rectangular electrodes; "
                f"{e.name!r} is not one")
        owner = -1 if e.role == "ground" else node_index["rf" if e.role == "rf" else e.name]
        rects.append((*r, 0.0, owner))

    if layout.top_plate is not None:
        (xmin, zmin), (xmax, zmax) = layout.bounding_box
        h = layout.top_plate.height_m
        s = layout.top_plate.slit_halfwidth_m
        owner = node_index[TOP_PLATE_KEY]
        if s > 0:
            rects.append((xmin, -s, zmin, zmax, h, owner))
            rects.append((s, xmax, zmin, zmax, h, owner))
        else:
            rects.append((xmin, xmax, zmin, zmax, h, owner))

    panels = []
    owners = []
    for x1, x2, z1, z2, y0, owner in rects:
        xk = _subdivide(x1, x2, s_min, grading_slope, 0.0, y0)
        zk = _subdivide(z1, z2, s_min, grading_slope, 0.0, y0)
        for a, b in zip(xk[:-1], xk[1:]):
            for c, d in zip(zk[:-1], zk[1:]):
                panels.append((a, b, c, d, y0))
                owners.append(owner)
        if len(panels) > max_panels:
            raise SolverError(
                f"panel budget exceeded: > {max_panels} panels "
                f"(panels_per_dimension={panels_per_dimension})")
    return np.array(panels), np.array(owners, dtype=np.int64)


def solve_bem(layout: ElectrodeLayout, panels_per_dimension: int = 6,
              grading_slope: float = 0.35, max_panels: int = 20000) -> BemBasis:
    """Solve the induced-charge collocation system, one RHS per node.

    Each basis column is the solution with that node at 1 V and every other
    conductor (including grounds and the plate) at 0 V.
    """
    panels, owners = mesh_layout(layout, panels_per_dimension,
                                 grading_slope, max_panels)
    m = panels.shape[0]
    centroids = np.column_stack([
        0.5 * (panels[:, 0] + panels[:, 1]),
        panels[:, 4],
        0.5 * (panels[:, 2] + panels[:, 3]),
    ])
    a = np.empty((m, m))
    _pot_block(panels, centroids, a)

    node_names = list(layout.node_names)
    b = np.zeros((m, len(node_names)))
    for k in range(len(node_names)):
        b[owners == k, k] = 1.0

    anorm = np.linalg.norm(a, 1)
    try:
        lu, piv = scipy.linalg.lu_factor(a)
    except scipy.linalg.LinAlgError as exc:
        raise SolverError(f"singular collocation system: {exc}") from exc
    rcond, info = scipy.linalg.lapack.dgecon(lu, anorm, norm="1")
    if info != 0 or rcond == 0 or not np.isfinite(rcond):
        raise SolverError(f"ill-conditioned collocation system, rcond={rcond}")
    q = scipy.linalg.lu_solve((lu, piv), b)

    resid = np.linalg.norm(a @ q - b) / np.linalg.norm(b)
    meta = SolverMeta(panel_count=m, residual_norm=float(resid),
                      condition_estimate=float(1.0 / rcond))
    if resid >= 1e-8:
        raise SolverError(f"collocation residual {resid:.2e} >= 1e-8 "
                          f"(condition estimate {meta.condition_estimate:.2e})")
    return BemBasis(layout, panels, q, node_names, meta)
