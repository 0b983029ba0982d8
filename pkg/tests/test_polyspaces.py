import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddrns import polyspaces as ps
from ddrns import quadrature as quad
from conftest import get_mesh, pentagon_prism_mesh

import oracles


@pytest.fixture(scope="module")
def cube_cell():
    m = get_mesh("cubic", 1)
    geom = ps.cell_geometry(m, 0)
    rule = quad.cell_rule(m, 0, 10)
    return m, geom, rule


@pytest.fixture(scope="module")
def square_face():
    m = get_mesh("cubic", 1)
    f = m.faces[0]
    return m, ps.face_geometry(m, f), quad.face_rule(m, f.id, 10), f


def test_scalar_basis_dims_and_gram(cube_cell, square_face):
    m, geom, rule = cube_cell
    _, fgeom, frule, _ = square_face
    e = ps.edge_geometry(m, 0)
    erule = quad.edge_rule(m, 0, 8)
    b = ps.build_scalar_basis(e, 0, erule)
    assert b.dim == 1
    vals = b.eval(erule.points)
    assert np.allclose(vals, vals[0])  # the constant, L2-normalised

    bf = ps.build_scalar_basis(fgeom, 1, frule)
    assert bf.dim == 3

    bc = ps.build_scalar_basis(geom, 2, rule)
    assert bc.dim == 10
    phi = bc.eval(rule.points)
    gram = phi.T @ (rule.weights[:, None] * phi)
    assert np.abs(gram - np.eye(10)).max() < 1e-10


def test_degree_minus_one_empty(cube_cell):
    _, geom, rule = cube_cell
    assert ps.build_scalar_basis(geom, -1, rule).dim == 0
    assert ps.dim_poly(3, -1) == 0


def test_subspace_dims(cube_cell, square_face):
    _, geom, rule = cube_cell
    _, fgeom, frule, _ = square_face
    parent_f = ps.tensor_vector_basis(ps.build_scalar_basis(fgeom, 4, frule), 2)
    gram_f = ps.scalar_monomial_gram(fgeom, 4, frule)
    parent_c = ps.tensor_vector_basis(ps.build_scalar_basis(geom, 4, rule), 3)
    gram_c = ps.scalar_monomial_gram(geom, 4, rule)

    assert ps.build_subspace(fgeom, "R", -1, parent_f, gram_f).dim == 0
    rc1 = ps.build_subspace(geom, "Rc", 1, parent_c, gram_c)
    assert rc1.dim == 1  # (x - x_T) P^0(T): numeric rank of the family
    g0 = ps.build_subspace(geom, "G", 0, parent_c, gram_c)
    assert g0.dim == 3   # gradients of linears

    for sel in ("G", "Gc", "R", "Rc"):
        for l in range(-1, 4):
            assert ps.build_subspace(geom, sel, l, parent_c, gram_c).dim \
                == ps.subspace_dim(3, sel, l)
            assert ps.build_subspace(fgeom, sel, l, parent_f, gram_f).dim \
                == ps.subspace_dim(2, sel, l)


def test_direct_decomposition_ranks(cube_cell, square_face):
    _, geom, rule = cube_cell
    _, fgeom, frule, _ = square_face
    parent_f = ps.tensor_vector_basis(ps.build_scalar_basis(fgeom, 4, frule), 2)
    gram_f = ps.scalar_monomial_gram(fgeom, 4, frule)
    parent_c = ps.tensor_vector_basis(ps.build_scalar_basis(geom, 4, rule), 3)
    gram_c = ps.scalar_monomial_gram(geom, 4, rule)
    for l in range(0, 5):
        for im, co in (("G", "Gc"), ("R", "Rc")):
            a = ps.build_subspace(geom, im, l, parent_c, gram_c)
            b = ps.build_subspace(geom, co, l, parent_c, gram_c)
            stack = np.vstack([a.parent_coords, b.parent_coords])
            assert np.linalg.matrix_rank(stack, tol=1e-10) == 3 * ps.dim_poly(3, l)
            if l <= 4 - 1:
                a2 = ps.build_subspace(fgeom, im, l, parent_f, gram_f)
                b2 = ps.build_subspace(fgeom, co, l, parent_f, gram_f)
                stack = np.vstack([a2.parent_coords, b2.parent_coords])
                assert np.linalg.matrix_rank(stack, tol=1e-10) \
                    == 2 * ps.dim_poly(2, l)


def test_rot_basis_tangency(square_face):
    m, fgeom, frule, f = square_face
    parent = ps.tensor_vector_basis(ps.build_scalar_basis(fgeom, 3, frule), 2)
    gram = ps.scalar_monomial_gram(fgeom, 3, frule)
    rb = ps.build_subspace(fgeom, "R", 2, parent, gram)
    vals3 = rb.eval3d(frule.points)
    assert np.abs(vals3 @ f.normal).max() < 1e-12


def test_pentagon_face_subspaces():
    m = pentagon_prism_mesh()
    f = next(f for f in m.faces if len(f.vertex_loop) == 5)
    geom = ps.face_geometry(m, f)
    rule = quad.face_rule(m, f.id, 8)
    parent = ps.tensor_vector_basis(ps.build_scalar_basis(geom, 3, rule), 2)
    gram = ps.scalar_monomial_gram(geom, 3, rule)
    for sel in ("G", "Gc", "R", "Rc"):
        sub = ps.build_subspace(geom, sel, 2, parent, gram)
        assert sub.dim == ps.subspace_dim(2, sel, 2)
        vals = sub.eval(rule.points)
        g = np.einsum("pbc,pdc->bd", vals * rule.weights[:, None, None], vals)
        assert np.abs(g - np.eye(sub.dim)).max() < 1e-10


def test_projection_constant_and_idempotence(cube_cell):
    _, geom, rule = cube_cell
    b0 = ps.build_scalar_basis(geom, 0, rule)
    coef = ps.project_scalar(b0, rule, np.ones(rule.n_points))
    recon = b0.eval(rule.points) @ coef
    assert np.abs(recon - 1.0).max() < 1e-13


def test_projection_roly_identity(square_face):
    _, fgeom, frule, _ = square_face
    parent = ps.tensor_vector_basis(ps.build_scalar_basis(fgeom, 2, frule), 2)
    gram = ps.scalar_monomial_gram(fgeom, 2, frule)
    rk = ps.build_subspace(fgeom, "R", 2, parent, gram)
    rng = np.random.default_rng(0)
    coefs = rng.standard_normal(rk.dim)
    vals = np.einsum("pbc,b->pc", rk.eval(frule.points), coefs)
    proj = ps.project_vector(rk, frule, vals)
    assert np.abs(proj - coefs).max() < 1e-11


def test_projection_vs_normal_equations(cube_cell):
    m, geom, rule = cube_cell
    b1 = ps.build_scalar_basis(geom, 1, rule)
    vals = rule.points[:, 0] ** 2
    coef = ps.project_scalar(b1, rule, vals)
    recon = b1.eval(rule.points) @ coef
    design = ps.mono_eval(ps.monomial_exponents(3, 1),
                          geom.local_coords(rule.points))
    a = oracles.projection_normal_equations(rule.points, rule.weights, vals,
                                            design)
    assert np.abs(recon - design @ a).max() < 1e-12


def test_projector_contraction(cube_cell):
    _, geom, rule = cube_cell
    b2 = ps.build_scalar_basis(geom, 2, rule)
    rng = np.random.default_rng(1)
    for _ in range(10):
        vals = rng.standard_normal(rule.n_points)
        coef = ps.project_scalar(b2, rule, vals)
        norm_proj = np.linalg.norm(coef)
        norm_f = np.sqrt(np.sum(rule.weights * vals**2))
        assert norm_proj <= norm_f * (1 + 1e-12)
        # idempotence
        again = ps.project_scalar(b2, rule, b2.eval(rule.points) @ coef)
        assert np.abs(again - coef).max() < 1e-11


@settings(max_examples=25, deadline=None, derandomize=True)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_projection_linearity(alpha, beta):
    m = get_mesh("cubic", 1)
    geom = ps.cell_geometry(m, 0)
    rule = quad.cell_rule(m, 0, 6)
    b = ps.build_scalar_basis(geom, 2, rule)
    rng = np.random.default_rng(4)
    f = rng.standard_normal(rule.n_points)
    g = rng.standard_normal(rule.n_points)
    lhs = ps.project_scalar(b, rule, alpha * f + beta * g)
    rhs = alpha * ps.project_scalar(b, rule, f) + beta * ps.project_scalar(b, rule, g)
    assert np.abs(lhs - rhs).max() < 1e-10 * (1 + abs(alpha) + abs(beta))


def test_gram_orthonormalisation_paths():
    # well-conditioned: Cholesky route reproduces an orthonormalising map
    g = np.array([[2.0, 0.5], [0.5, 1.0]])
    C = ps._orthonormalise_gram(g)
    assert np.abs(C @ g @ C.T - np.eye(2)).max() < 1e-13
    # ill-conditioned (beyond 1e12): eigen-whitening fallback; the residual
    # from identity is limited by eps * condition number
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((3, 3)))
    g2 = q @ np.diag([1.0, 1e-6, 4e-13]) @ q.T
    C2 = ps._orthonormalise_gram(0.5 * (g2 + g2.T))
    assert np.abs(C2 @ g2 @ C2.T - np.eye(3)).max() < 1e-2
    # numerically singular Gram is refused
    g3 = np.outer([1.0, 1.0], [1.0, 1.0])
    with pytest.raises(ps.BasisError):
        ps._orthonormalise_gram(g3)
