"""Orthonormal polynomial bases on mesh entities and their split subspaces.

Bases are expressed in scaled monomials ``((x - x_Y)/h_Y)^alpha`` of the
entity-local coordinates (arclength on edges, tangent-frame coordinates on
faces, ambient coordinates on cells) and orthonormalised against the entity
L2 product.  On faces and cells the full vector-valued space splits two ways,

    P^l = G^l (+) Gc^l = R^l (+) Rc^l,

with G/R the images of grad/rot (faces) or grad/curl (cells) and Gc/Rc the
complements generated by contraction with ``x - x_Y``.  The splits are direct,
not orthogonal; each factor gets its own orthonormal basis, extracted from
the generating family by SVD with a relative singular-value cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mesh import Cell, Edge, Face, Mesh
from .quadrature import QuadratureRule

RANK_RTOL = 1e-10
GRAM_COND_LIMIT = 1e12


class BasisError(Exception):
    """Gram conditioning failure or subspace rank mismatch."""


# ---------------------------------------------------------------------------
# dimensions

def dim_poly(space_dim: int, degree: int) -> int:
    """dim P^l on a d-dimensional entity; 0 for l < 0."""
    if degree < 0:
        return 0
    if space_dim == 1:
        return degree + 1
    if space_dim == 2:
        return (degree + 1) * (degree + 2) // 2
    if space_dim == 3:
        return (degree + 1) * (degree + 2) * (degree + 3) // 6
    raise ValueError(space_dim)


def subspace_dim(space_dim: int, selector: str, degree: int) -> int:
    """Analytic dimension of G/Gc/R/Rc on a face (dim 2) or cell (dim 3)."""
    l = degree
    if space_dim == 2:
        if selector in ("G", "R"):
            return max(dim_poly(2, l + 1) - 1, 0)
        if selector in ("Gc", "Rc"):
            return dim_poly(2, l - 1)
    elif space_dim == 3:
        if selector == "G":
            return max(dim_poly(3, l + 1) - 1, 0)
        if selector == "Gc":
            return 3 * dim_poly(3, l - 1) - dim_poly(3, l - 2)
        if selector == "R":
            return max(3 * dim_poly(3, l + 1) - dim_poly(3, l + 2) + 1, 0)
        if selector == "Rc":
            return dim_poly(3, l - 1)
    raise ValueError((space_dim, selector))


# ---------------------------------------------------------------------------
# monomial machinery

@lru_cache(maxsize=None)
def monomial_exponents(space_dim: int, degree: int) -> np.ndarray:
    """Exponent table for total degree <= degree, graded lexicographic."""
    if degree < 0:
        return np.zeros((0, space_dim), dtype=int)
    out = []
    for total in range(degree + 1):
        if space_dim == 1:
            out.append((total,))
        elif space_dim == 2:
            for a in range(total, -1, -1):
                out.append((a, total - a))
        else:
            for a in range(total, -1, -1):
                for b in range(total - a, -1, -1):
                    out.append((a, b, total - a - b))
    return np.array(out, dtype=int)


@lru_cache(maxsize=None)
def _mono_index(space_dim: int, degree: int):
    exps = monomial_exponents(space_dim, degree)
    return {tuple(e): i for i, e in enumerate(exps)}


def mono_eval(exps: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Evaluate monomials xi^alpha; xi has shape (npts, d) -> (npts, nm)."""
    npts = xi.shape[0]
    vals = np.ones((npts, len(exps)))
    for a in range(xi.shape[1]):
        col = xi[:, a]
        maxp = int(exps[:, a].max(initial=0))
        powers = np.ones((npts, maxp + 1))
        for p in range(1, maxp + 1):
            powers[:, p] = powers[:, p - 1] * col
        vals *= powers[:, exps[:, a]]
    return vals


@lru_cache(maxsize=None)
def deriv_matrix(space_dim: int, degree: int, axis: int) -> np.ndarray:
    """d/dxi_axis on monomial coefficients (same exponent table in and out)."""
    exps = monomial_exponents(space_dim, degree)
    idx = _mono_index(space_dim, degree)
    nm = len(exps)
    D = np.zeros((nm, nm))
    for i, e in enumerate(exps):
        if e[axis] > 0:
            tgt = list(e)
            tgt[axis] -= 1
            D[idx[tuple(tgt)], i] = e[axis]
    return D


@lru_cache(maxsize=None)
def raise_matrix(space_dim: int, degree: int, axis: int) -> np.ndarray:
    """Multiplication by xi_axis: degree table -> degree+1 table."""
    exps = monomial_exponents(space_dim, degree)
    idx_up = _mono_index(space_dim, degree + 1)
    nm_up = len(monomial_exponents(space_dim, degree + 1))
    M = np.zeros((nm_up, len(exps)))
    for i, e in enumerate(exps):
        tgt = list(e)
        tgt[axis] += 1
        M[idx_up[tuple(tgt)], i] = 1.0
    return M


def embed_coeff(coeff: np.ndarray, space_dim: int, deg_from: int, deg_to: int):
    """Zero-pad monomial coefficients to a larger exponent table."""
    if deg_to == deg_from:
        return coeff
    nm_to = len(monomial_exponents(space_dim, deg_to))
    out = np.zeros(coeff.shape[:-1] + (nm_to,)) if coeff.ndim == 2 else \
        np.zeros((coeff.shape[0], nm_to) + coeff.shape[2:])
    if coeff.ndim == 2:
        out[:, :coeff.shape[1]] = coeff
    else:
        out[:, :coeff.shape[1], :] = coeff
    return out


# ---------------------------------------------------------------------------
# entity geometry

@dataclass(frozen=True)
class EntityGeometry:
    """Local scaled coordinate chart of a mesh entity."""
    origin: np.ndarray   # x_Y
    scale: float         # h_Y
    axes: np.ndarray     # (d, 3) orthonormal rows
    measure: float
    kind: str            # edge | face | cell

    @property
    def dim(self) -> int:
        return self.axes.shape[0]

    def local_coords(self, points: np.ndarray) -> np.ndarray:
        return (points - self.origin) @ self.axes.T / self.scale

    def lift(self, comps: np.ndarray) -> np.ndarray:
        """Map local vector components (..., d) to ambient 3-vectors."""
        return comps @ self.axes


def edge_geometry(mesh: Mesh, e: Edge | int) -> EntityGeometry:
    if isinstance(e, int):
        e = mesh.edges[e]
    return EntityGeometry(e.midpoint, e.length, e.tangent[None, :], e.length, "edge")


def face_geometry(mesh: Mesh, f: Face | int) -> EntityGeometry:
    if isinstance(f, int):
        f = mesh.faces[f]
    return EntityGeometry(f.anchor, f.diameter, f.frame, f.area, "face")


def cell_geometry(mesh: Mesh, c: Cell | int) -> EntityGeometry:
    if isinstance(c, int):
        c = mesh.cells[c]
    return EntityGeometry(c.anchor, c.diameter, np.eye(3), c.volume, "cell")


# ---------------------------------------------------------------------------
# bases

@dataclass
class ScalarBasis:
    geom: EntityGeometry
    degree: int
    coeff: np.ndarray  # (nb, nm) over monomial_exponents(geom.dim, degree)

    @property
    def dim(self) -> int:
        return self.coeff.shape[0]

    def eval(self, points: np.ndarray) -> np.ndarray:
        xi = self.geom.local_coords(points)
        exps = monomial_exponents(self.geom.dim, self.degree)
        return mono_eval(exps, xi) @ self.coeff.T


@dataclass
class VectorBasis:
    """Vector-valued basis; components are in the entity frame (2 on faces)."""
    geom: EntityGeometry
    degree: int
    ncomp: int
    coeff: np.ndarray  # (nb, nm, ncomp)
    selector: str | None = None
    parent_coords: np.ndarray | None = None  # rows: coords in the parent basis

    @property
    def dim(self) -> int:
        return self.coeff.shape[0]

    def eval(self, points: np.ndarray) -> np.ndarray:
        xi = self.geom.local_coords(points)
        exps = monomial_exponents(self.geom.dim, self.degree)
        mono = mono_eval(exps, xi)
        return np.einsum("pm,bmc->pbc", mono, self.coeff)

    def eval3d(self, points: np.ndarray) -> np.ndarray:
        vals = self.eval(points)
        if self.ncomp == 3:
            return vals
        return np.einsum("pbc,cx->pbx", vals, self.geom.axes)

    def coords_in(self, target: "VectorBasis", gram: np.ndarray) -> np.ndarray:
        """Inner products of this basis against an orthonormal target basis.

        gram is the entity monomial Gram at a degree covering both bases.
        When the members lie in the target span these are exact coordinates,
        otherwise the L2 projection's.
        """
        return coords_in_vector_basis(target, self.coeff, gram)


def _orthonormalise_gram(gram: np.ndarray) -> np.ndarray:
    """Coefficients of an orthonormal basis from a Gram matrix (rows in terms
    of the original family). Cholesky, with an eigen-whitening fallback."""
    if gram.shape[0] == 0:
        return np.zeros((0, 0))
    ev = np.linalg.eigvalsh(gram)
    if ev[0] <= 0 or ev[-1] / ev[0] > GRAM_COND_LIMIT:
        w, Q = np.linalg.eigh(gram)
        if w[0] <= 1e-30 * w[-1]:
            raise BasisError(
                f"Gram matrix numerically singular (eigen range {w[0]:.3e}.."
                f"{w[-1]:.3e})")
        return (Q / np.sqrt(w)).T
    L = np.linalg.cholesky(gram)
    return np.linalg.inv(L)


def build_scalar_basis(geom: EntityGeometry, degree: int,
                       rule: QuadratureRule) -> ScalarBasis:
    """L2-orthonormal scalar basis of P^degree(Y); degree -1 gives {0}."""
    if degree < 0:
        return ScalarBasis(geom, 0, np.zeros((0, 1)))
    exps = monomial_exponents(geom.dim, degree)
    mono = mono_eval(exps, geom.local_coords(rule.points))
    gram = mono.T @ (rule.weights[:, None] * mono)
    return ScalarBasis(geom, degree, _orthonormalise_gram(gram))


def tensor_vector_basis(sb: ScalarBasis, ncomp: int) -> VectorBasis:
    """Orthonormal basis of P^l(Y)^ncomp from a scalar one (component-minor)."""
    nb, nm = sb.coeff.shape
    coeff = np.zeros((nb * ncomp, nm, ncomp))
    for i in range(nb):
        for a in range(ncomp):
            coeff[i * ncomp + a, :, a] = sb.coeff[i]
    return VectorBasis(sb.geom, sb.degree, ncomp, coeff)


def scalar_monomial_gram(geom: EntityGeometry, degree: int,
                         rule: QuadratureRule) -> np.ndarray:
    exps = monomial_exponents(geom.dim, degree)
    mono = mono_eval(exps, geom.local_coords(rule.points))
    return mono.T @ (rule.weights[:, None] * mono)


def coords_in_scalar_basis(sb: ScalarBasis, coeff: np.ndarray,
                           gram: np.ndarray) -> np.ndarray:
    """Inner products of polynomials (monomial coefficient rows) against an
    orthonormal scalar basis; gram is the entity monomial Gram at a degree
    covering both (monomial tables are prefix-nested)."""
    a = np.atleast_2d(coeff)
    return a @ gram[:a.shape[1], :sb.coeff.shape[1]] @ sb.coeff.T


def coords_in_vector_basis(vb: VectorBasis, coeff: np.ndarray,
                           gram: np.ndarray) -> np.ndarray:
    """Inner products of vector polynomials (nf, nm, ncomp) against an
    orthonormal vector basis of the same entity -> (nf, nb)."""
    G = gram[:coeff.shape[1], :vb.coeff.shape[1]]
    return np.einsum("fmc,mn,bnc->fb", coeff, G, vb.coeff, optimize=True)


@lru_cache(maxsize=None)
def _deg_table(space_dim: int):
    return {len(monomial_exponents(space_dim, l)): l for l in range(30)}


def _deg_of(space_dim: int, nm: int) -> int:
    return _deg_table(space_dim)[nm]


# ---------------------------------------------------------------------------
# split subspaces

def _generating_family(geom: EntityGeometry, selector: str, degree: int):
    """Monomial coefficients (nf, nm, ncomp) of the defining generating set."""
    d = geom.dim
    l = degree
    h = geom.scale
    if d == 2:
        ncomp = 2
    elif d == 3:
        ncomp = 3
    else:
        raise ValueError("subspaces live on faces and cells only")

    members = []
    if selector == "G" or (selector == "R" and d == 2):
        exps_src = monomial_exponents(d, l + 1)
        nm_out = len(monomial_exponents(d, max(l, 0)))
        D = [deriv_matrix(d, l + 1, a) / h for a in range(d)]
        for i in range(len(exps_src)):
            if exps_src[i].sum() == 0:
                continue
            e = np.zeros(len(exps_src))
            e[i] = 1.0
            grads = [Da @ e for Da in D]
            if selector == "G":
                members.append(np.stack(grads, axis=-1)[:nm_out])
            else:  # rot = grad rotated by -pi/2: (d2, -d1)
                members.append(np.stack([grads[1], -grads[0]], axis=-1)[:nm_out])
    elif selector == "R" and d == 3:
        exps_src = monomial_exponents(3, l + 1)
        nm_out = len(monomial_exponents(3, max(l, 0)))
        D = [deriv_matrix(3, l + 1, a) / h for a in range(3)]
        for i in range(len(exps_src)):
            if exps_src[i].sum() == 0:
                continue
            e = np.zeros(len(exps_src))
            e[i] = 1.0
            dx, dy, dz = (Da @ e for Da in D)
            zero = np.zeros_like(dx)
            # curl(f e_x), curl(f e_y), curl(f e_z)
            members.append(np.stack([zero, dz, -dy], axis=-1)[:nm_out])
            members.append(np.stack([-dz, zero, dx], axis=-1)[:nm_out])
            members.append(np.stack([dy, -dx, zero], axis=-1)[:nm_out])
    elif selector in ("Gc", "Rc"):
        if l >= 1:
            exps_src = monomial_exponents(d, l - 1)
            R = [raise_matrix(d, l - 1, a) for a in range(d)]
            pad = len(monomial_exponents(d, l)) - R[0].shape[0]
            for i in range(len(exps_src)):
                e = np.zeros(len(exps_src))
                e[i] = 1.0
                xi_m = [np.pad(Ra @ e, (0, pad)) for Ra in R]  # xi_a * m
                if d == 2:
                    if selector == "Rc":    # (x - x_F) m
                        members.append(h * np.stack([xi_m[0], xi_m[1]], axis=-1))
                    else:                   # (x - x_F)^perp m = h (xi2, -xi1) m
                        members.append(h * np.stack([xi_m[1], -xi_m[0]], axis=-1))
                else:
                    zero = np.zeros_like(xi_m[0])
                    if selector == "Rc":
                        members.append(h * np.stack(xi_m, axis=-1))
                    else:  # (x - x_T) x (m e_a) for a = x, y, z
                        members.append(h * np.stack([zero, xi_m[2], -xi_m[1]], axis=-1))
                        members.append(h * np.stack([-xi_m[2], zero, xi_m[0]], axis=-1))
                        members.append(h * np.stack([xi_m[1], -xi_m[0], zero], axis=-1))
    if not members:
        nm = len(monomial_exponents(d, max(l, 0)))
        return np.zeros((0, nm, ncomp))
    return np.array(members)


def build_subspace(geom: EntityGeometry, selector: str, degree: int,
                   parent: VectorBasis, gram: np.ndarray) -> VectorBasis:
    """Orthonormal basis of G/Gc/R/Rc^degree inside the parent full space.

    The generating family from the defining formula is reduced by SVD in the
    parent-orthonormal coordinates; singular values below RANK_RTOL times the
    largest are discarded and the extracted rank must match the analytic
    dimension.
    """
    expected = subspace_dim(geom.dim, selector, degree)
    family = _generating_family(geom, selector, degree)
    if expected == 0 or family.shape[0] == 0:
        if expected != 0:
            raise BasisError(f"{selector}^{degree}: empty family, expected "
                             f"dimension {expected}")
        nm_parent = parent.coeff.shape[1]
        return VectorBasis(geom, parent.degree, parent.ncomp,
                           np.zeros((0, nm_parent, parent.ncomp)), selector,
                           np.zeros((0, parent.dim)))
    coords = coords_in_vector_basis(parent, family, gram)
    _, sv, vt = np.linalg.svd(coords, full_matrices=False)
    rank = int(np.sum(sv > RANK_RTOL * sv[0]))
    if rank != expected:
        raise BasisError(f"{selector}^{degree} on {geom.kind}: extracted rank "
                         f"{rank} != expected {expected}")
    keep = vt[:rank]  # orthonormal rows in parent coordinates
    coeff = np.einsum("rp,pmc->rmc", keep, parent.coeff)
    return VectorBasis(geom, parent.degree, parent.ncomp, coeff, selector, keep)


# ---------------------------------------------------------------------------
# quadrature-based projections

def project_scalar(sb: ScalarBasis, rule: QuadratureRule,
                   values: np.ndarray) -> np.ndarray:
    """L2-orthogonal projection coefficients of sampled values."""
    phi = sb.eval(rule.points)
    return phi.T @ (rule.weights * values)


def project_vector(vb: VectorBasis, rule: QuadratureRule,
                   values: np.ndarray) -> np.ndarray:
    """values: (npts, ncomp) in the entity frame -> coefficients (nb,)."""
    phi = vb.eval(rule.points)
    return np.einsum("pbc,pc->b", phi, rule.weights[:, None] * values)
