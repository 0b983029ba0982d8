"""Error measures, convergence rates, discrete constants and property suites.

Errors mirror the scheme's analysis: discrete errors measured in the graph
norm of the curl space (velocity) and the CURL norm of the discrete pressure
gradient; potential-based errors by cellwise quadrature of reconstructed
fields against the exact ones.  The constants estimators use dense
eigen/rank computations and refuse, rather than approximate, above a
dimension cap.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .operators import DdrComplex
from .spaces import DofVector, SpaceKind

DENSE_CAP = 5000


class DimensionCapError(Exception):
    """Dense eigen/rank work refused beyond the configured cap."""


@dataclass
class ErrorReport:
    h: float
    err_u_discrete: float      # graph-norm error on the velocity
    err_p_discrete: float      # CURL norm of the discrete pressure-gradient error
    err_u_potential: float
    err_p_potential: float
    dim_condensed: int = 0
    newton_iterations: int = 0
    eoc: dict = field(default_factory=dict)

    CSV_COLUMNS = ("MeshSize", "DimCondensed", "E^d_u", "E^p_u", "E^d_p",
                   "E^p_p", "EOC_E^d_u", "EOC_E^p_u", "EOC_E^d_p", "EOC_E^p_p")

    def csv_row(self):
        vals = {"MeshSize": repr(self.h), "DimCondensed": self.dim_condensed,
                "E^d_u": repr(self.err_u_discrete),
                "E^p_u": repr(self.err_u_potential),
                "E^d_p": repr(self.err_p_discrete),
                "E^p_p": repr(self.err_p_potential)}
        for key in ("E^d_u", "E^p_u", "E^d_p", "E^p_p"):
            vals["EOC_" + key] = repr(self.eoc[key]) if key in self.eoc else ""
        return [vals[c] for c in self.CSV_COLUMNS]


def attach_eoc(reports: list[ErrorReport]) -> None:
    """Observed orders between successive reports (needs two levels)."""
    for prev, cur in zip(reports, reports[1:]):
        ratio = np.log(prev.h / cur.h)
        for key, a, b in (("E^d_u", prev.err_u_discrete, cur.err_u_discrete),
                          ("E^p_u", prev.err_u_potential, cur.err_u_potential),
                          ("E^d_p", prev.err_p_discrete, cur.err_p_discrete),
                          ("E^p_p", prev.err_p_potential, cur.err_p_potential)):
            if a > 0 and b > 0:
                cur.eoc[key] = float(np.log(a / b) / ratio)


def write_csv(reports: list[ErrorReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ErrorReport.CSV_COLUMNS)
        for r in reports:
            w.writerow(r.csv_row())


def compute_errors(cx: DdrComplex, u: DofVector, p: DofVector, exact) -> ErrorReport:
    """Discrete and potential-based errors against a manufactured solution.

    exact must provide velocity, pressure, curl_velocity and grad_pressure
    callables on (n, 3) point arrays.
    """
    iu = cx.interpolate_curl(exact.velocity)
    ip = cx.interpolate_grad(exact.pressure)
    eu = DofVector(cx.layouts[SpaceKind.CURL], u.values - iu.values)
    ep = DofVector(cx.layouts[SpaceKind.GRAD], p.values - ip.values)
    e_du = cx.graph_norm(eu)
    e_dp = cx.norm(SpaceKind.CURL, cx.global_gradient(ep))

    uc = cx.global_curl(u)
    ugp = cx.global_gradient(p)
    cl = cx.layouts[SpaceKind.CURL]
    dl = cx.layouts[SpaceKind.DIV]
    acc_u = acc_c = acc_p = 0.0
    for c, cctx in enumerate(cx.cells):
        w, pts = cctx.rule.weights, cctx.rule.points
        pv = cx.curl_potential_values(c, u.values[cl.cell_indices(c)])
        acc_u += np.sum(w * np.sum((pv - exact.velocity(pts))**2, axis=1))
        dv = cx.div_potential_values(c, uc.values[dl.cell_indices(c)])
        acc_c += np.sum(w * np.sum((dv - exact.curl_velocity(pts))**2, axis=1))
        gv = cx.curl_potential_values(c, ugp.values[cl.cell_indices(c)])
        acc_p += np.sum(w * np.sum((gv - exact.grad_pressure(pts))**2, axis=1))
    return ErrorReport(cx.mesh.h, e_du, e_dp,
                       float(np.sqrt(acc_u + acc_c)), float(np.sqrt(acc_p)))


# ---------------------------------------------------------------------------
# discrete constants


@dataclass
class ConstantsReport:
    h: float
    k: int
    poincare_curl: float
    continuity_curl: float
    continuity_div: float
    sobolev_lower_bound: float
    chi: float | None = None   # data-smallness diagnostic (can be negative)


def _dense(mat) -> np.ndarray:
    return mat.toarray() if hasattr(mat, "toarray") else np.asarray(mat)


def _complement_basis(cx: DdrComplex) -> np.ndarray:
    """Euclidean-orthonormal basis of the CURL-orthogonal complement of the
    image of the discrete gradient."""
    n = cx.layouts[SpaceKind.CURL].total_dim
    if n > DENSE_CAP:
        raise DimensionCapError(f"CURL dimension {n} exceeds the dense cap "
                                f"{DENSE_CAP}")
    G = _dense(cx.gradient_matrix())
    Mc = _dense(cx.gram_matrix(SpaceKind.CURL))
    A = G.T @ Mc                       # v in complement iff A v = 0
    _, sv, vt = np.linalg.svd(A, full_matrices=True)
    rank = int(np.sum(sv > 1e-10 * sv[0]))
    return vt[rank:].T                 # (n, n - rank)


def estimate_poincare(cx: DdrComplex) -> float:
    """Largest |v|_CURL / |uC v|_DIV over the complement of Im uG."""
    Z = _complement_basis(cx)
    Mc = _dense(cx.gram_matrix(SpaceKind.CURL))
    Md = _dense(cx.gram_matrix(SpaceKind.DIV))
    C = _dense(cx.curl_matrix())
    A = Z.T @ Mc @ Z
    B = Z.T @ (C.T @ Md @ C) @ Z
    ev = sla.eigh(A, B, eigvals_only=True)
    return float(np.sqrt(ev[-1]))


def _continuity_constant(cx: DdrComplex, kind: SpaceKind) -> float:
    """Largest |P x|_L2 / |x| over the space: consistency part vs full norm."""
    lay = cx.layouts[kind]
    if lay.total_dim > DENSE_CAP:
        raise DimensionCapError(f"{kind.value} dimension {lay.total_dim} "
                                f"exceeds the dense cap {DENSE_CAP}")
    n = lay.total_dim
    Q = np.zeros((n, n))
    M = _dense(cx.gram_matrix(kind))
    for c, cctx in enumerate(cx.cells):
        idx = lay.cell_indices(c)
        pot = cctx.pot_curl if kind == SpaceKind.CURL else cctx.pot_div
        Q[np.ix_(idx, idx)] += pot.T @ pot
    ev = sla.eigh(Q, M, eigvals_only=True)
    return float(np.sqrt(max(ev[-1], 0.0)))


def estimate_continuity_curl(cx: DdrComplex) -> float:
    return _continuity_constant(cx, SpaceKind.CURL)


def estimate_continuity_div(cx: DdrComplex) -> float:
    return _continuity_constant(cx, SpaceKind.DIV)


def _l4_potential_norm(cx: DdrComplex, v: np.ndarray) -> float:
    cl = cx.layouts[SpaceKind.CURL]
    acc = 0.0
    for c, cctx in enumerate(cx.cells):
        pv = cx.curl_potential_values(c, v[cl.cell_indices(c)])
        acc += np.sum(cctx.rule.weights * np.sum(pv**2, axis=1)**2)
    return acc ** 0.25


def estimate_sobolev_lower_bound(cx: DdrComplex, samples: int = 12,
                                 ascent_steps: int = 40,
                                 seed: int = 0) -> float:
    """Lower bound on the discrete Sobolev constant
    max |P_curl v|_L4 / |uC v|_DIV over the complement of Im uG,
    by random restarts plus projected gradient ascent on the quotient.
    The maximisation is non-quadratic; only a lower bound is claimed."""
    Z = _complement_basis(cx)
    Md = _dense(cx.gram_matrix(SpaceKind.DIV))
    C = _dense(cx.curl_matrix())
    B = Z.T @ (C.T @ Md @ C) @ Z
    cl = cx.layouts[SpaceKind.CURL]

    # assemble the L4 functional pieces once: per cell, potential evaluation
    cell_ops = []
    for c, cctx in enumerate(cx.cells):
        gather = cl.cell_indices(c)
        W = (cctx.pot_curl @ Z[gather]).reshape(cctx.phi_k.shape[1], 3, -1)
        E = np.einsum("pi,ixn->pxn", cctx.phi_k, W)
        cell_ops.append((cctx.rule.weights, E))

    def num_and_grad(y):
        acc = 0.0
        grad = np.zeros_like(y)
        for w, E in cell_ops:
            vals = np.einsum("pxn,n->px", E, y)
            m2 = np.sum(vals**2, axis=1)
            acc += np.sum(w * m2**2)
            grad += 4.0 * np.einsum("p,px,pxn->n", w * m2, vals, E)
        num = acc ** 0.25
        return num, grad / max(4.0 * num**3, 1e-300)

    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(samples):
        y = rng.standard_normal(Z.shape[1])
        y /= np.sqrt(y @ B @ y)
        val = 0.0
        for _ in range(ascent_steps):
            num, gnum = num_and_grad(y)
            den = np.sqrt(y @ B @ y)
            val = num / den
            g = gnum / den - (num / den**3) * (B @ y)
            step = 0.5
            improved = False
            for _ in range(12):
                y2 = y + step * g / max(np.linalg.norm(g), 1e-300)
                y2 /= np.sqrt(y2 @ B @ y2)
                n2, _ = num_and_grad(y2)
                if n2 > val:
                    y = y2
                    improved = True
                    break
                step *= 0.5
            if not improved:
                break
        best = max(best, val)
    return float(best)


@dataclass
class ExactnessReport:
    rank_gradient: int
    nullity_curl: int
    dim_curl_space: int

    @property
    def exact(self) -> bool:
        return self.rank_gradient == self.nullity_curl


def check_exactness(cx: DdrComplex) -> ExactnessReport:
    """Numerical rank bookkeeping: on trivial topology the kernel of the
    discrete curl is the image of the discrete gradient."""
    n = cx.layouts[SpaceKind.CURL].total_dim
    if n > DENSE_CAP:
        raise DimensionCapError(f"CURL dimension {n} exceeds the dense cap")
    G = _dense(cx.gradient_matrix())
    C = _dense(cx.curl_matrix())
    sg = np.linalg.svd(G, compute_uv=False)
    rank_g = int(np.sum(sg > 1e-10 * sg[0]))
    sc = np.linalg.svd(C, compute_uv=False)
    rank_c = int(np.sum(sc > 1e-10 * sc[0]))
    return ExactnessReport(rank_g, n - rank_c, n)


def constants_report(cx: DdrComplex, exact=None, nu: float = 1.0,
                     seed: int = 0) -> ConstantsReport:
    cp = estimate_poincare(cx)
    cc = estimate_continuity_curl(cx)
    cd = estimate_continuity_div(cx)
    cs = estimate_sobolev_lower_bound(cx, seed=seed)
    chi = None
    if exact is not None:
        i_ru = cx.interpolate_curl(exact.velocity_force)
        chi = float(nu - cd * cs**2 * cp * cx.l2_product(
            SpaceKind.CURL, i_ru, i_ru) ** 0.5 / nu)
    return ConstantsReport(cx.mesh.h, cx.k, cp, cc, cd, cs, chi)


# ---------------------------------------------------------------------------
# property suite


@dataclass
class PropertyResult:
    name: str
    passed: bool
    detail: str = ""


def run_property_suite(cases, seed: int = 0, n_random: int = 100):
    """Structural property checks over (complex,) cases.

    cases: iterable of DdrComplex.  Returns a list of PropertyResult across
    all cases, covering the complex property, polynomial consistency of the
    potentials, commutation, product symmetry/definiteness, and the
    Appendix-style norm comparisons.
    """
    results = []

    def record(name, passed, detail=""):
        results.append(PropertyResult(name, bool(passed), detail))

    for cx in cases:
        rng = np.random.default_rng(seed)
        tag = f"[k={cx.k}, n_cells={cx.mesh.n_cells}]"
        cl = cx.layouts[SpaceKind.CURL]
        gl = cx.layouts[SpaceKind.GRAD]

        # complex property on random vectors
        worst = 0.0
        for _ in range(n_random):
            q = DofVector(gl, rng.standard_normal(gl.total_dim))
            z = cx.global_curl(cx.global_gradient(q))
            ref = cx.norm(SpaceKind.CURL, cx.global_gradient(q))
            worst = max(worst, cx.norm(SpaceKind.DIV, z) / max(ref, 1e-30))
        record(f"complex {tag}", worst < 1e-12, f"max ratio {worst:.2e}")

        # polynomial consistency (monomials up to the stated degrees)
        err = _consistency_error(cx)
        record(f"consistency {tag}", err < 1e-10, f"max rel err {err:.2e}")

        err = _commutation_error(cx)
        record(f"commutation {tag}", err < 1e-11, f"max err {err:.2e}")

        # product symmetry and positivity
        x = DofVector(cl, rng.standard_normal(cl.total_dim))
        y = DofVector(cl, rng.standard_normal(cl.total_dim))
        sym = abs(cx.l2_product(SpaceKind.CURL, x, y)
                  - cx.l2_product(SpaceKind.CURL, y, x))
        pos = cx.l2_product(SpaceKind.CURL, x, x)
        record(f"product symmetry {tag}", sym < 1e-13 * max(pos, 1), f"{sym:.2e}")
        record(f"product positivity {tag}", pos > 0, f"{pos:.3e}")

        # Appendix-style norm ratios on random local vectors (cell 0)
        ratios_eq, ratios_leb, ratios_bp, ratios_bd = [], [], [], []
        cctx = cx.cells[0]
        for _ in range(n_random):
            v = rng.standard_normal(cctx.n_curl)
            t2 = cx.component_norm_cell(2.0, 0, v)
            p2 = cx.potential_norm_cell(2.0, 0, v)
            t4 = cx.component_norm_cell(4.0, 0, v)
            ratios_eq.append(p2 / t2)
            ratios_leb.append(t2 / (cctx.h ** (3 * (1/2 - 1/4)) * t4))
            pv = cx.curl_potential_values(0, v)
            pl2 = float(np.sqrt(np.sum(cctx.rule.weights
                                       * np.sum(pv**2, axis=1))))
            ratios_bp.append(pl2 / t2)
            cval = cctx.phi_k @ (cctx.curl_op @ v).reshape(-1, 3)
            cl2 = float(np.sqrt(np.sum(cctx.rule.weights
                                       * np.sum(cval**2, axis=1))))
            ratios_bd.append(cctx.h * cl2 / t2)
        record(f"norm equivalence bracket {tag}",
               max(ratios_eq) / min(ratios_eq) < 1e3,
               f"[{min(ratios_eq):.3f}, {max(ratios_eq):.3f}]")
        record(f"lebesgue bracket {tag}",
               max(ratios_leb) / min(ratios_leb) < 1e3,
               f"[{min(ratios_leb):.3f}, {max(ratios_leb):.3f}]")
        record(f"potential boundedness {tag}", max(ratios_bp) < 1e2,
               f"max {max(ratios_bp):.3f}")
        record(f"derivative boundedness {tag}", max(ratios_bd) < 1e2,
               f"max {max(ratios_bd):.3f}")

        # mesh closure invariants (anchored at x_T so any flipped omega_TF
        # perturbs the identity)
        ok = True
        for c in cx.mesh.cells:
            acc = sum(s * np.dot(cx.mesh.faces[f].anchor - c.anchor,
                                 cx.mesh.faces[f].normal)
                      * cx.mesh.faces[f].area for f, s in zip(c.faces, c.face_signs))
            ok &= abs(acc - 3 * c.volume) <= 1e-10 * 3 * c.volume
        record(f"divergence closure {tag}", ok)

        # scheme-level invariants on a small manufactured solve
        from .solutions import TrigSolution
        from .solver import NavierStokesSolver, ProblemSpec, natural_bc
        sol = TrigSolution()
        spec = ProblemSpec(nu=1.0, forcing=sol.forcing, regions=natural_bc())
        solver = NavierStokesSolver(cx, spec)
        u = rng.standard_normal(solver.n_u)
        scale = max(cx.norm(SpaceKind.CURL, DofVector(cl, u)) ** 3, 1e-30)
        skew = abs(solver.trilinear(u, u, u)) / scale
        record(f"trilinear skew {tag}", skew <= 1e-12, f"{skew:.2e}")
        try:
            res = solver.solve()
            ucu = cx.global_curl(res.u)
            lhs = spec.nu * cx.l2_product(SpaceKind.DIV, ucu, ucu)
            rhs = cx.l2_product(SpaceKind.CURL, solver.i_f, res.u)
            scale = max(abs(rhs), 1e-12 * cx.l2_product(
                SpaceKind.CURL, solver.i_f, solver.i_f), 1e-30)
            record(f"energy identity {tag}", abs(lhs - rhs) <= 1e-10 * scale,
                   f"{lhs:.6e} vs {rhs:.6e}")
            full = np.concatenate([res.u.values, res.p.values,
                                   [res.multiplier]])
            R = solver.residual(full)
            mass = np.linalg.norm(R[solver.n_u:solver.n_u + solver.n_p])
            record(f"discrete incompressibility {tag}", mass <= 1e-8,
                   f"mass residual {mass:.2e}")
        except Exception as exc:  # noqa: BLE001 - report, don't crash the suite
            record(f"scheme solve {tag}", False, repr(exc))
    return results


def _consistency_error(cx: DdrComplex) -> float:
    from . import polyspaces as ps
    k = cx.k
    worst = 0.0
    gl, cl, dl = (cx.layouts[s] for s in (SpaceKind.GRAD, SpaceKind.CURL,
                                          SpaceKind.DIV))
    exps = ps.monomial_exponents(3, k + 1)
    for i in range(len(exps)):
        co = np.zeros(len(exps))
        co[i] = 1.0
        q = lambda pts: ps.mono_eval(exps, pts) @ co
        iq = cx.interpolate_grad(q)
        for c, cctx in enumerate(cx.cells):
            pv = cx.grad_potential_values(c, iq.values[gl.cell_indices(c)])
            ref = q(cctx.rule.points)
            worst = max(worst, np.abs(pv - ref).max() / (np.abs(ref).max() + 1))
    expsk = ps.monomial_exponents(3, k)
    for i in range(len(expsk)):
        for a in range(3):
            co = np.zeros((3, len(expsk)))
            co[a, i] = 1.0
            v = lambda pts: np.stack([ps.mono_eval(expsk, pts) @ co[b]
                                      for b in range(3)], axis=-1)
            iv = cx.interpolate_curl(v)
            iw = cx.interpolate_div(v)
            for c, cctx in enumerate(cx.cells):
                ref = v(cctx.rule.points)
                scale = np.abs(ref).max() + 1
                pv = cx.curl_potential_values(c, iv.values[cl.cell_indices(c)])
                worst = max(worst, np.abs(pv - ref).max() / scale)
                dv = cx.div_potential_values(c, iw.values[dl.cell_indices(c)])
                worst = max(worst, np.abs(dv - ref).max() / scale)
    return worst


def _commutation_error(cx: DdrComplex) -> float:
    from . import polyspaces as ps
    k = cx.k
    worst = 0.0
    exps = ps.monomial_exponents(3, k + 1)
    D = [ps.deriv_matrix(3, k + 1, a) for a in range(3)]
    for i in range(len(exps)):
        co = np.zeros(len(exps))
        co[i] = 1.0
        q = lambda pts: ps.mono_eval(exps, pts) @ co
        gq = lambda pts: np.stack([ps.mono_eval(exps, pts) @ (D[a] @ co)
                                   for a in range(3)], axis=-1)
        lhs = cx.global_gradient(cx.interpolate_grad(q))
        rhs = cx.interpolate_curl(gq)
        worst = max(worst, np.abs(lhs.values - rhs.values).max())
    for i in range(len(exps)):
        for a in range(3):
            co = np.zeros((3, len(exps)))
            co[a, i] = 1.0
            v = lambda pts: np.stack([ps.mono_eval(exps, pts) @ co[b]
                                      for b in range(3)], axis=-1)
            def curl_v(pts, co=co):
                mono = ps.mono_eval(exps, pts)
                return np.stack([
                    mono @ (D[1] @ co[2]) - mono @ (D[2] @ co[1]),
                    mono @ (D[2] @ co[0]) - mono @ (D[0] @ co[2]),
                    mono @ (D[0] @ co[1]) - mono @ (D[1] @ co[0])], axis=-1)
            lhs = cx.global_curl(cx.interpolate_curl(v))
            rhs = cx.interpolate_div(curl_v)
            worst = max(worst, np.abs(lhs.values - rhs.values).max())
    return worst
