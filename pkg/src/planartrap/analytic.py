"""Gapless-plane analytic potentials for planar electrode layouts.

A set of conductors tiles the y = 0 plane; everything not covered by a
named electrode is grounded, and the gaps between electrodes are taken as
zero width. For a patch S held at V with the rest of the plane grounded,
the upper-half-space potential is the solid-angle fraction

    phi(r) = V * Omega_S(r) / (2 pi),

where Omega_S is the solid angle the patch subtends at r. The solid angle
of each polygon is summed from a triangle fan (Van Oosterom-Strackee), and
its gradient from the closed-form line integral around the polygon
boundary, so both potential and field are exact for arbitrary simple
polygons. The classic five-wire strip formula is the infinite-strip limit
and is kept as a standalone function (it doubles as an oracle).

The top plate is not part of the plane; in this model it only contributes
a superposed uniform field V_top/h along -y (linear interpolation between
the grounded chip and the plate). The BEM solver is the reference when
plate loading of the other electrodes matters.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .errors import ConfigError, OutOfRegionError
from .model import TOP_PLATE_KEY, ElectrodeLayout


def strip_potential(strips, x, y):
    """Potential of infinite z-strips in an otherwise grounded plane.

    strips: iterable of (x1, x2, volts); evaluation at (x, y) with y > 0.
    Returns volts. x and y broadcast like numpy arrays.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise OutOfRegionError("strip potential requires y > 0")
    phi = np.zeros(np.broadcast(x, y).shape)
    for x1, x2, v in strips:
        if not x2 > x1:
            raise ConfigError(f"strip ({x1}, {x2}) has nonpositive width")
        phi = phi + (v / np.pi) * (np.arctan((x2 - x) / y)
                                   - np.arctan((x1 - x) / y))
    return phi


def strip_field(strips, x, y):
    """E = -grad(phi) of strip_potential; returns (Ex, Ey) in V/m."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise OutOfRegionError("strip field requires y > 0")
    ex = np.zeros(np.broadcast(x, y).shape)
    ey = np.zeros_like(ex)
    for x1, x2, v in strips:
        r1 = (x - x1) ** 2 + y ** 2
        r2 = (x - x2) ** 2 + y ** 2
        ex = ex + (v / np.pi) * (y / r2 - y / r1)
        ey = ey + (v / np.pi) * ((x2 - x) / r2 - (x1 - x) / r1)
    return ex, ey


# ---------------------------------------------------------------------------
# polygon kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _solid_angle_sum(tris, w, x, y, z):
    """Weighted sum of signed triangle solid angles at (x, y, z).

    tris: (T, 6) rows (ax, az, bx, bz, cx, cz), vertices in the y=0 plane.
    Positive for CCW (in x-z) triangles seen from y > 0.
    """
    total = 0.0
    for t in range(tris.shape[0]):
        ax = tris[t, 0] - x
        az = tris[t, 1] - z
        bx = tris[t, 2] - x
        bz = tris[t, 3] - z
        cx = tris[t, 4] - x
        cz = tris[t, 5] - z
        ay = -y
        # b x c with both y-components equal to -y, then a . (b x c)
        vx = (-y) * cz - bz * (-y)
        vy = bz * cx - bx * cz
        vz = bx * (-y) - (-y) * cx
        det = ax * vx + ay * vy + az * vz
        ra = np.sqrt(ax * ax + y * y + az * az)
        rb = np.sqrt(bx * bx + y * y + bz * bz)
        rc = np.sqrt(cx * cx + y * y + cz * cz)
        ab = ax * bx + y * y + az * bz
        ac = ax * cx + y * y + az * cz
        bc = bx * cx + y * y + bz * cz
        denom = ra * rb * rc + ab * rc + ac * rb + bc * ra
        total += w[t] * 2.0 * np.arctan2(det, denom)
    return total


@njit(cache=True)
def _edge_grad_sum(edges, w, x, y, z):
    """Weighted sum over boundary edges of grad(Omega) at (x, y, z).

    edges: (E, 4) rows (ax, az, bx, bz) traversed in polygon (CCW) order.
    Returns (gx, gy, gz) = sum_e w_e * grad Omega_e.
    """
    gx = 0.0
    gy = 0.0
    gz = 0.0
    for e in range(edges.shape[0]):
        rax = edges[e, 0] - x
        ray = -y
        raz = edges[e, 1] - z
        rbx = edges[e, 2] - x
        rby = -y
        rbz = edges[e, 3] - z
        na = np.sqrt(rax * rax + ray * ray + raz * raz)
        nb = np.sqrt(rbx * rbx + rby * rby + rbz * rbz)
        dot = rax * rbx + ray * rby + raz * rbz
        # cross ra x rb
        cx = ray * rbz - raz * rby
        cy = raz * rbx - rax * rbz
        cz = rax * rby - ray * rbx
        # grad Omega = + integral_a^b dl' x (r - r') / |r - r'|^3 for edges
        # traversed in the orientation that makes Omega positive (CCW in x-z
        # seen from y > 0); verified against finite differences.
        scale = w[e] * (na + nb) / (na * nb * (na * nb + dot))
        gx += scale * cx
        gy += scale * cy
        gz += scale * cz
    return gx, gy, gz


@njit(cache=True)
def _phi_points(tris, w, pts, out):
    inv2pi = 1.0 / (2.0 * np.pi)
    for i in range(pts.shape[0]):
        out[i] = inv2pi * _solid_angle_sum(tris, w, pts[i, 0], pts[i, 1], pts[i, 2])


@njit(cache=True)
def _grad_points(edges, w, pts, out):
    inv2pi = 1.0 / (2.0 * np.pi)
    for i in range(pts.shape[0]):
        gx, gy, gz = _edge_grad_sum(edges, w, pts[i, 0], pts[i, 1], pts[i, 2])
        out[i, 0] = gx * inv2pi
        out[i, 1] = gy * inv2pi
        out[i, 2] = gz * inv2pi


def polygon_tris(polygon: np.ndarray) -> np.ndarray:
    """Fan triangulation (v0, vi, vi+1) of a simple polygon, rows (6,)."""
    n = polygon.shape[0]
    tris = np.empty((n - 2, 6))
    for i in range(1, n - 1):
        tris[i - 1, 0::2] = (polygon[0, 0], polygon[i, 0], polygon[i + 1, 0])
        tris[i - 1, 1::2] = (polygon[0, 1], polygon[i, 1], polygon[i + 1, 1])
    return tris


def polygon_edges(polygon: np.ndarray) -> np.ndarray:
    n = polygon.shape[0]
    edges = np.empty((n, 4))
    for i in range(n):
        j = (i + 1) % n
        edges[i] = (polygon[i, 0], polygon[i, 1], polygon[j, 0], polygon[j, 1])
    return edges


class PolyGroup:
    """A weighted set of coplanar polygons with fast phi/grad evaluation."""

    def __init__(self, polys_weights):
        tris = []
        tw = []
        edges = []
        ew = []
        for poly, weight in polys_weights:
            t = polygon_tris(np.asarray(poly, dtype=float))
            tris.append(t)
            tw.extend([weight] * len(t))
            e = polygon_edges(np.asarray(poly, dtype=float))
            edges.append(e)
            ew.extend([weight] * len(e))
        self.tris = np.vstack(tris) if tris else np.zeros((0, 6))
        self.tri_w = np.asarray(tw, dtype=float)
        self.edges = np.vstack(edges) if edges else np.zeros((0, 4))
        self.edge_w = np.asarray(ew, dtype=float)

    def phi(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.empty(pts.shape[0])
        _phi_points(self.tris, self.tri_w, pts, out)
        return out

    def grad(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.empty((pts.shape[0], 3))
        _grad_points(self.edges, self.edge_w, pts, out)
        return out


class AnalyticBasis:
    """Per-node unit-voltage potential evaluators for the gapless model.

    Node order follows layout.node_names (dc nodes, "rf", then the plate).
    The plate node is the linear-interpolation approximation described in
    the module docstring.
    """

    method = "gapless-analytic"
    panel_count = 0
    residual_norm = 0.0

    def __init__(self, layout: ElectrodeLayout):
        self.layout = layout
        self.node_names = list(layout.node_names)
        self._groups: dict[str, PolyGroup] = {}
        for name in self.node_names:
            if name == TOP_PLATE_KEY:
                continue
            self._groups[name] = PolyGroup(
                [(p, 1.0) for p in layout.polygons_for(name)])
        self.plate_height = (layout.top_plate.height_m
                             if layout.top_plate is not None else None)

    def _check_region(self, pts):
        if np.any(pts[:, 1] <= 0):
            raise OutOfRegionError("analytic basis requires y > 0")

    def node_group(self, name: str) -> PolyGroup:
        return self._groups[name]

    def _plate_phi(self, pts):
        return np.clip(pts[:, 1] / self.plate_height, 0.0, 1.0)

    def _plate_grad(self, pts):
        g = np.zeros((pts.shape[0], 3))
        inside = pts[:, 1] < self.plate_height
        g[inside, 1] = 1.0 / self.plate_height
        return g

    def phi_nodes(self, pts) -> np.ndarray:
        """Unit-voltage potentials, shape (n_points, n_nodes)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        self._check_region(pts)
        out = np.empty((pts.shape[0], len(self.node_names)))
        for k, name in enumerate(self.node_names):
            if name == TOP_PLATE_KEY:
                out[:, k] = self._plate_phi(pts)
            else:
                out[:, k] = self._groups[name].phi(pts)
        return out

    def grad_nodes(self, pts) -> np.ndarray:
        """Unit-voltage potential gradients, shape (n_points, n_nodes, 3)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        self._check_region(pts)
        out = np.empty((pts.shape[0], len(self.node_names), 3))
        for k, name in enumerate(self.node_names):
            if name == TOP_PLATE_KEY:
                out[:, k, :] = self._plate_grad(pts)
            else:
                out[:, k, :] = self._groups[name].grad(pts)
        return out

    def weighted_group(self, weights: dict[str, float]) -> PolyGroup:
        """One PolyGroup combining all plane nodes with given voltages.

        The plate (if weighted) is NOT included; handle its linear term
        separately.
        """
        pw = []
        for name, w in weights.items():
            if name == TOP_PLATE_KEY or w == 0.0:
                continue
            for p in self.layout.polygons_for(name):
                pw.append((p, w))
        return PolyGroup(pw)
