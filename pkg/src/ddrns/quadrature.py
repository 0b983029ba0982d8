"""Exactness-degree-driven quadrature on mesh edges, faces and cells.

Edges use Gauss-Legendre.  Polygonal faces are fan-triangulated from the face
anchor and each triangle carries a collapsed (Duffy) tensor Gauss rule; cells
are split into tetrahedra by coning the face triangles to the cell anchor.
All rules are exact for polynomials up to the requested total degree.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from .mesh import Mesh


class DegenerateSimplexError(Exception):
    """Zero-measure simplex encountered while decomposing an entity."""


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (n, 3)
    weights: np.ndarray  # (n,)
    exactness_degree: int

    @property
    def n_points(self) -> int:
        return len(self.weights)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Contract sampled values (n, ...) against the weights."""
        return np.tensordot(self.weights, values, axes=(0, 0))


@lru_cache(maxsize=None)
def _gl01(n: int):
    x, w = leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def edge_rule_points(degree: int) -> int:
    return (degree + 2) // 2  # ceil((degree+1)/2)


def edge_rule(mesh: Mesh, edge_id: int, degree: int) -> QuadratureRule:
    e = mesh.edges[edge_id]
    if e.length <= 0.0:
        raise DegenerateSimplexError(f"edge {edge_id} has zero length")
    x, w = _gl01(edge_rule_points(max(degree, 0)))
    a = mesh.vertex_coords[e.vertices[0]]
    b = mesh.vertex_coords[e.vertices[1]]
    pts = a[None, :] + x[:, None] * (b - a)[None, :]
    return QuadratureRule(pts, w * e.length, degree)


@lru_cache(maxsize=None)
def _duffy_triangle(degree: int):
    # reference triangle {xi, eta >= 0, xi + eta <= 1}; map xi=u, eta=v(1-u)
    nu = (degree + 3) // 2
    nv = (degree + 2) // 2
    xu, wu = _gl01(nu)
    xv, wv = _gl01(nv)
    U, V = np.meshgrid(xu, xv, indexing="ij")
    W = np.outer(wu, wv) * (1.0 - U)
    xi = U.ravel()
    eta = (V * (1.0 - U)).ravel()
    return xi, eta, W.ravel()


def triangle_rule(verts: np.ndarray, degree: int):
    a, b, c = verts
    area2 = np.linalg.norm(np.cross(b - a, c - a))
    if area2 <= 0.0:
        raise DegenerateSimplexError("zero-area triangle in face decomposition")
    xi, eta, w = _duffy_triangle(max(degree, 0))
    pts = a[None, :] + np.outer(xi, b - a) + np.outer(eta, c - a)
    return pts, w * area2


@lru_cache(maxsize=None)
def _duffy_tet(degree: int):
    nu = (degree + 4) // 2
    nv = (degree + 3) // 2
    nw = (degree + 2) // 2
    xu, wu = _gl01(nu)
    xv, wv = _gl01(nv)
    xw, ww = _gl01(nw)
    U, V, W = np.meshgrid(xu, xv, xw, indexing="ij")
    wt = (wu[:, None, None] * wv[None, :, None] * ww[None, None, :]
          * (1.0 - U) ** 2 * (1.0 - V))
    xi1 = U.ravel()
    xi2 = (V * (1.0 - U)).ravel()
    xi3 = (W * (1.0 - U) * (1.0 - V)).ravel()
    return xi1, xi2, xi3, wt.ravel()


def tet_rule(verts: np.ndarray, degree: int):
    a, b, c, d = verts
    vol6 = abs(np.dot(np.cross(b - a, c - a), d - a))
    if vol6 <= 0.0:
        raise DegenerateSimplexError("zero-volume tetrahedron in cell decomposition")
    x1, x2, x3, w = _duffy_tet(max(degree, 0))
    pts = (a[None, :] + np.outer(x1, b - a) + np.outer(x2, c - a)
           + np.outer(x3, d - a))
    return pts, w * vol6


def face_rule(mesh: Mesh, face_id: int, degree: int) -> QuadratureRule:
    f = mesh.faces[face_id]
    loop = mesh.vertex_coords[f.vertex_loop]
    pts_list, w_list = [], []
    for i in range(len(loop)):
        tri = np.array([f.anchor, loop[i], loop[(i + 1) % len(loop)]])
        p, w = triangle_rule(tri, degree)
        pts_list.append(p)
        w_list.append(w)
    weights = np.concatenate(w_list)
    if abs(weights.sum() - f.area) > 1e-12 * f.area:
        raise DegenerateSimplexError(
            f"face {face_id}: fan decomposition does not recover the area")
    return QuadratureRule(np.concatenate(pts_list), weights, degree)


def cell_rule(mesh: Mesh, cell_id: int, degree: int) -> QuadratureRule:
    c = mesh.cells[cell_id]
    pts_list, w_list = [], []
    for fid in c.faces:
        f = mesh.faces[fid]
        loop = mesh.vertex_coords[f.vertex_loop]
        for i in range(len(loop)):
            tet = np.array([c.anchor, f.anchor, loop[i], loop[(i + 1) % len(loop)]])
            p, w = tet_rule(tet, degree)
            pts_list.append(p)
            w_list.append(w)
    weights = np.concatenate(w_list)
    if abs(weights.sum() - c.volume) > 1e-12 * c.volume:
        raise DegenerateSimplexError(
            f"cell {cell_id}: cone decomposition does not recover the volume")
    return QuadratureRule(np.concatenate(pts_list), weights, degree)


def rule_for(mesh: Mesh, kind: str, index: int, degree: int) -> QuadratureRule:
    """Quadrature rule on one mesh entity, exact to the given total degree."""
    if degree < 0:
        raise ValueError("degree must be >= 0")
    if kind == "edge":
        return edge_rule(mesh, index, degree)
    if kind == "face":
        return face_rule(mesh, index, degree)
    if kind == "cell":
        return cell_rule(mesh, index, degree)
    raise ValueError(f"unknown entity kind {kind!r}")
