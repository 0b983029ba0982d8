"""Independent oracles used by the test suite.

Everything here deliberately avoids the library's quadrature and basis
machinery: monomial integrals over simplices are closed-form (barycentric
multinomial expansion plus the Dirichlet formula), entities are decomposed
by fans anchored at a vertex rather than at the library's anchor points,
and projections are recomputed by raw monomial normal equations.
"""

import math
from itertools import product

import numpy as np


def _poly_mul(a: dict, b: dict) -> dict:
    out = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            key = tuple(x + y for x, y in zip(ea, eb))
            out[key] = out.get(key, 0.0) + ca * cb
    return out


def _poly_pow(a: dict, n: int, nvar: int) -> dict:
    out = {tuple([0] * nvar): 1.0}
    for _ in range(n):
        out = _poly_mul(out, a)
    return out


def monomial_over_simplex(verts: np.ndarray, powers) -> float:
    """Exact integral of prod_j x_j^powers[j] over the simplex with the given
    vertices ((d+1, 3) array), via barycentric expansion and
    int_simplex prod lambda_i^{b_i} = d! |S| prod b_i! / (sum b_i + d)!."""
    verts = np.asarray(verts, dtype=float)
    d = len(verts) - 1
    if d == 1:
        meas = np.linalg.norm(verts[1] - verts[0])
    elif d == 2:
        meas = 0.5 * np.linalg.norm(np.cross(verts[1] - verts[0],
                                             verts[2] - verts[0]))
    else:
        meas = abs(np.linalg.det(verts[1:] - verts[0])) / 6.0
    nvar = d + 1
    poly = {tuple([0] * nvar): 1.0}
    for j, p in enumerate(powers):
        coord = {}
        for i in range(nvar):
            e = [0] * nvar
            e[i] = 1
            coord[tuple(e)] = verts[i][j]
        poly = _poly_mul(poly, _poly_pow(coord, int(p), nvar))
    total = 0.0
    fact_d = math.factorial(d)
    for e, c in poly.items():
        num = 1.0
        for b in e:
            num *= math.factorial(b)
        total += c * fact_d * num / math.factorial(sum(e) + d)
    return float(total * meas)


def signed_monomial_over_cone(apex, tri, powers) -> float:
    """Signed version for cell integration by coning oriented triangles."""
    verts = np.vstack([apex, tri])
    sign = np.sign(np.linalg.det(np.asarray(tri) - np.asarray(apex)))
    return sign * monomial_over_simplex(verts, powers)


def integrate_monomial_edge(mesh, eid, powers) -> float:
    e = mesh.edges[eid]
    verts = mesh.vertex_coords[list(e.vertices)]
    return monomial_over_simplex(verts, powers)


def integrate_monomial_face(mesh, fid, powers) -> float:
    """Fan from the first loop vertex (not the library's anchor)."""
    f = mesh.faces[fid]
    pts = mesh.vertex_coords[f.vertex_loop]
    total = 0.0
    for i in range(1, len(pts) - 1):
        total += monomial_over_simplex(np.array([pts[0], pts[i], pts[i + 1]]),
                                       powers)
    return total


def integrate_monomial_cell(mesh, cid, powers) -> float:
    """Signed cones from the first cell vertex over oriented face fans."""
    c = mesh.cells[cid]
    apex = mesh.vertex_coords[c.vertex_ids[0]]
    total = 0.0
    for fid, sgn in zip(c.faces, c.face_signs):
        f = mesh.faces[fid]
        pts = mesh.vertex_coords[f.vertex_loop]
        loop = pts if sgn > 0 else pts[::-1]
        for i in range(1, len(loop) - 1):
            tri = np.array([loop[0], loop[i], loop[i + 1]])
            d = np.linalg.det(tri - apex)
            total += np.sign(d) * monomial_over_simplex(np.vstack([apex, tri]),
                                                        powers)
    return total


def integrate_monomial(mesh, kind, idx, powers) -> float:
    return {"edge": integrate_monomial_edge, "face": integrate_monomial_face,
            "cell": integrate_monomial_cell}[kind](mesh, idx, powers)


def all_powers(total_degree: int):
    for a, b, c in product(range(total_degree + 1), repeat=3):
        if a + b + c <= total_degree:
            yield (a, b, c)


def projection_normal_equations(points, weights, values, design):
    """L2 projection coefficients by raw normal equations; design is the
    (npts, nfun) matrix of the (non-orthonormal) family at the points."""
    G = design.T @ (weights[:, None] * design)
    rhs = design.T @ (weights * values)
    return np.linalg.solve(G, rhs)
