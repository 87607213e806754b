import numpy as np
import pytest
import scipy.sparse as sp

from cgdg.mesh import TriMesh, generate_square_mesh
from cgdg.operators import (
    IncompatibleSourceError,
    MassSolveError,
    MassSolver,
    Operators,
    PeriodicMeshRequired,
    assemble_operators,
    dual_nabla,
    nscheme_reconstruct,
    primary_nabla,
    project_dg_to_cg,
)
from cgdg.spaces import CGField, CGSpace, DGField, DGSpace, eval_grad_cg, interpolate_cg, interpolate_dg, triangle_quadrature
from cgdg.systems import ScalarAdvection
from conftest import operators, periodic_mesh


def sin_sin(x):
    return np.sin(2 * np.pi * x[..., 0]) * np.sin(2 * np.pi * x[..., 1])


def dense_mass_oracle(cg, rule_degree):
    """Global mass matrix assembled cell by cell with an explicit loop."""
    mesh = cg.mesh
    rule = triangle_quadrature(rule_degree)
    psi = cg.basis.eval(rule.points)
    M = np.zeros((cg.n_dofs, cg.n_dofs))
    for k in range(mesh.n_cells):
        dofs = cg.local_to_global[k]
        local = mesh.det_jacobians[k] * (psi.T * rule.weights) @ psi
        for a in range(len(dofs)):
            for b in range(len(dofs)):
                M[dofs[a], dofs[b]] += local[a, b]
    return M


# ---------------------------------------------------------------- assembly
def test_single_triangle_n0_stiffness_is_corner_normal(unit_right_triangle):
    ops = Operators(unit_right_triangle, 0)
    K = ops.stiffness[0, 0]  # (p, m) for the single DG basis function
    np.testing.assert_allclose(K[:3], unit_right_triangle.corner_normals.corner[0], atol=1e-15)
    np.testing.assert_allclose(K[:3], [[-0.5, -0.5], [0.5, 0.0], [0.0, 0.5]], atol=1e-15)


@pytest.mark.parametrize("N", range(0, 5))
def test_dg_mass_inverse(N):
    ops = operators(3, N)
    prod = np.einsum("kab,kbc->kac", ops.dg_mass, ops.dg_mass_inv)
    np.testing.assert_allclose(prod, np.broadcast_to(np.eye(ops.dg.n_local), prod.shape), atol=1e-12)


@pytest.mark.parametrize("N", [0, 1, 3])
def test_mass_matrix_against_dense_oracle(N):
    ops = Operators(generate_square_mesh(2, 2, (0, 1, 0, 1), 0.0, 0), N)
    assert ops.mesh.n_cells == 8
    M = ops.mass_matrix.toarray()
    np.testing.assert_allclose(M, dense_mass_oracle(ops.cg, 2 * ops.cg.degree + 4), atol=1e-15)
    np.testing.assert_allclose(M, M.T, atol=1e-16)
    assert np.all(np.diag(M) > 0)
    # row sums are the basis integrals; oracle by direct quadrature of psi
    rule = triangle_quadrature(2 * ops.cg.degree)
    integrals = np.zeros(ops.n_dofs)
    np.add.at(integrals, ops.cg.local_to_global, ops.mesh.det_jacobians[:, None] * (rule.weights @ ops.cg.basis.eval(rule.points)))
    np.testing.assert_allclose(M.sum(axis=1), integrals, atol=1e-15)
    np.testing.assert_allclose(ops.load_vector, integrals, atol=1e-15)
    if ops.cg.degree % 2 == 1:
        # equispaced vertex functions integrate to zero (M=2) or below (M=4)
        assert np.all(ops.load_vector > 0)


@pytest.mark.parametrize("N", [0, 2, 4])
def test_stiffness_against_high_order_quadrature(N):
    ops = operators(2, N)
    mesh = ops.mesh
    rule = triangle_quadrature(2 * N + 14)
    phi = ops.dg.basis.eval(rule.points)
    dpsi_ref = ops.cg.basis.grad(rule.points)
    for k in (0, 3, 7):
        dpsi = dpsi_ref @ mesh.inv_jacobians_t[k].T  # (nq, Lw, 2)
        oracle = mesh.det_jacobians[k] * np.einsum("q,qc,qpm->cpm", rule.weights, phi, dpsi)
        np.testing.assert_allclose(ops.stiffness[k], oracle, atol=1e-13)


def test_constant_field_has_zero_stiffness_contraction():
    ops = operators(4, 3)
    ones = np.ones(ops.n_dofs)
    np.testing.assert_allclose(ops.primary_grad(ones), 0.0, atol=1e-11)


def test_degree_mismatch_rejected():
    mesh = periodic_mesh(2)
    with pytest.raises(ValueError, match="must equal"):
        assemble_operators(mesh, DGSpace(mesh, 1), CGSpace(mesh, 3))


# ---------------------------------------------------------------- primary nabla
@pytest.mark.parametrize("N", range(0, 5))
def test_primary_grad_of_interpolated_sine_is_pointwise_gradient(N, rng):
    ops = operators(4, N)
    w = interpolate_cg(sin_sin, ops.cg)
    g = primary_nabla(ops, w).coeffs.reshape(ops.mesh.n_cells, ops.dg.n_local, 2)
    for k in rng.choice(ops.mesh.n_cells, 8, replace=False):
        lam = rng.dirichlet(np.ones(3))
        x = ops.mesh.to_physical(k, lam[1:])
        got = ops.dg.basis.eval(lam[1:]) @ g[k]
        want = eval_grad_cg(w, k, x)[0]
        assert np.abs(got - want).max() <= 1e-12 * max(1.0, np.abs(want).max())


def test_primary_grad_n0_matches_corner_normal_formula(unit_right_triangle):
    ops = Operators(unit_right_triangle, 0)
    z = np.array([0.3, -1.2, 2.0])
    cn = unit_right_triangle.corner_normals.corner[0]
    want = (cn * z[:, None]).sum(axis=0) / unit_right_triangle.areas[0]
    np.testing.assert_allclose(ops.primary_grad(z)[0, 0], want, atol=1e-14)


def test_primary_nabla_kinds():
    ops = operators(3, 1)
    w = CGField(ops.cg, np.random.default_rng(0).normal(size=(ops.n_dofs, 2)))
    g = primary_nabla(ops, w, "grad").coeffs.reshape(ops.mesh.n_cells, ops.dg.n_local, 2, 2)
    div = primary_nabla(ops, w, "div").coeffs[..., 0]
    curl = primary_nabla(ops, w, "curl").coeffs[..., 0]
    np.testing.assert_allclose(div, g[..., 0, 0] + g[..., 1, 1], atol=1e-13)
    np.testing.assert_allclose(curl, g[..., 1, 0] - g[..., 0, 1], atol=1e-13)
    with pytest.raises(ValueError):
        primary_nabla(ops, w, "laplace")


# ---------------------------------------------------------------- dual nabla
def test_dual_of_zero_is_zero():
    ops = operators(3, 2)
    u = DGField(ops.dg, np.zeros((ops.mesh.n_cells, ops.dg.n_local, 1)))
    assert np.all(dual_nabla(ops, u).coeffs == 0.0)


@pytest.mark.parametrize("N", range(0, 5))
@pytest.mark.parametrize("nx", [2, 6])
def test_discrete_schwarz_identities(N, nx, rng):
    ops = operators(nx, N)
    Z = rng.uniform(-1, 1, (ops.n_dofs, 20))
    A = np.zeros((ops.n_dofs, 20, 3))
    A[..., 2] = rng.uniform(-1, 1, (ops.n_dofs, 20))
    assert np.abs(ops.weak_curl_rhs(ops.primary_grad(Z))).max() <= 1e-11
    assert np.abs(ops.weak_div_rhs(ops.primary_curl(A)[..., :2])).max() <= 1e-11


def test_dual_operator_mass_solve_residual(rng):
    ops = operators(4, 2)
    u = rng.normal(size=(ops.mesh.n_cells, ops.dg.n_local, 2))
    rhs = ops.weak_div_rhs(u)
    g = ops.dual_div(u)
    assert np.linalg.norm(ops.mass_matrix @ g - rhs) <= 1e-12 * np.linalg.norm(rhs)


def test_dual_gradient_of_continuous_field(rng):
    """For a continuous DG input the dual gradient is the projected weak gradient."""
    ops = operators(4, 2)
    w = interpolate_cg(sin_sin, CGSpace(ops.mesh, 2))  # degree N: lies in the DG space
    cg2 = w.space
    psi = cg2.basis.eval(ops.dg.basis.nodes)
    u = np.einsum("cp,kp->kc", psi, w.coeffs[cg2.local_to_global, 0])[..., None]
    g = ops.dual_grad(u)[:, 0, :]  # (n_dofs, 2)
    # oracle: M g = int psi_p grad(w) since int (d psi_p) w = -int psi_p d w on a periodic mesh
    rule = triangle_quadrature(2 * ops.cg.degree + 2)
    psiq = ops.cg.basis.eval(rule.points)
    dref = cg2.basis.grad(rule.points)
    rhs = np.zeros((ops.n_dofs, 2))
    for k in range(ops.mesh.n_cells):
        grad_w = np.einsum("qpr,mr,p->qm", dref, ops.mesh.inv_jacobians_t[k], w.coeffs[cg2.local_to_global[k], 0])
        rhs[ops.cg.local_to_global[k]] += ops.mesh.det_jacobians[k] * np.einsum("q,qp,qm->pm", rule.weights, psiq, grad_w)
    np.testing.assert_allclose(ops.mass_matrix @ g, rhs, atol=1e-11)


def test_adjointness(rng):
    ops = operators(5, 3)
    u = rng.normal(size=(ops.mesh.n_cells, ops.dg.n_local, 2))
    ws = rng.normal(size=ops.n_dofs)
    lhs = ws @ ops.weak_div_rhs(u)
    rhs = -np.einsum("kcd,kce,ked->", u, ops.dg_mass, ops.primary_grad(ws))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_dual_operators_need_periodic_mesh():
    mesh = generate_square_mesh(3, 3, (0, 1, 0, 1), 0.0, 0, periodic=False)
    ops = Operators(mesh, 1)
    u = np.zeros((mesh.n_cells, ops.dg.n_local, 1))
    with pytest.raises(PeriodicMeshRequired):
        ops.dual_grad(u)


def test_mass_solve_iteration_cap():
    ops = operators(4, 3)
    solver = MassSolver(ops.mass_matrix, tol=1e-14, max_iter=2)
    with pytest.raises(MassSolveError):
        solver.solve(np.random.default_rng(0).normal(size=ops.n_dofs))


@pytest.mark.parametrize("method", ["cg", "direct"])
def test_mass_solvers_agree(method, rng):
    ops = operators(4, 2)
    b = rng.normal(size=(ops.n_dofs, 3))
    x = MassSolver(ops.mass_matrix, method=method).solve(b)
    assert np.linalg.norm(ops.mass_matrix @ x - b) <= 1e-12 * np.linalg.norm(b)


# ---------------------------------------------------------------- projection
@pytest.mark.parametrize("N", [1, 2, 3])
def test_projection_is_identity_on_continuous_subspace(N):
    mesh = generate_square_mesh(4, 4, (0, 1, 0, 1), 0.1, 2, periodic=False)
    ops = Operators(mesh, N)
    f = lambda x: (0.5 + x[..., 0] - 2 * x[..., 1]) ** N  # noqa: E731
    u = DGField(ops.dg, interpolate_dg(f, ops.dg).coeffs)
    w = project_dg_to_cg(ops, u, warm_start=False).coeffs[:, 0]
    np.testing.assert_allclose(w, f(ops.cg.dof_coords), atol=1e-11)


def test_projection_orthogonality(rng):
    ops = operators(4, 2)
    u = rng.normal(size=(ops.mesh.n_cells, ops.dg.n_local))
    w = ops.project(u)
    rule = triangle_quadrature(2 * ops.cg.degree + 2)
    psi = ops.cg.basis.eval(rule.points)
    phi = ops.dg.basis.eval(rule.points)
    moments = np.zeros(ops.n_dofs)
    for k in range(ops.mesh.n_cells):
        l2g = ops.cg.local_to_global[k]
        diff = psi @ w[l2g] - phi @ u[k]
        np.add.at(moments, l2g, ops.mesh.det_jacobians[k] * psi.T @ (rule.weights * diff))
    assert np.abs(moments).max() <= 1e-11


def test_warm_start_keeps_answer_and_saves_iterations():
    ops = operators(6, 2)
    from cgdg.spaces import l2_project_dg

    u = l2_project_dg(sin_sin, ops.dg).coeffs[..., 0]
    cold = ops.project(u, warm_start=False)
    it_cold = ops.mass_solver.last.iterations
    warm = ops.project(u, warm_start=True)
    it_warm = ops.mass_solver.last.iterations
    scale = np.abs(cold).max()
    assert np.abs(cold - warm).max() <= 1e-11 * scale
    assert it_warm <= it_cold


def test_projection_overshoots_near_jump():
    mesh = generate_square_mesh(16, 2, (0, 1, 0, 0.125), 0.0, 0)
    ops = Operators(mesh, 0)
    u = interpolate_dg(lambda x: (x[..., 0] > 0.5).astype(float), ops.dg).coeffs[..., 0]
    w = ops.project(u)
    assert w.max() > 1.0 and w.min() < 0.0


# ---------------------------------------------------------------- N-scheme
def test_nscheme_consistency(rng):
    ops = operators(3, 1)
    q = np.full((ops.mesh.n_cells, ops.dg.n_local, 1), 0.7)
    w = nscheme_reconstruct(ops, q, ScalarAdvection((0.3, -1.0)))
    np.testing.assert_allclose(w, 0.7, atol=1e-13)


def two_cell_mesh():
    x = np.array([[0.0, 0.0], [1.0, -1.0], [1.0, 1.0], [2.0, 0.0]])
    return TriMesh(x, np.array([[0, 1, 2], [1, 3, 2]]), (0.0, 2.0, -1.0, 1.0))


@pytest.mark.parametrize("eps", [1e-12, 1e-3])
def test_nscheme_edge_dof_is_upwind(eps):
    """Hand computation: edge weights ``|e|/2 + eps`` upwind and ``eps`` downwind."""
    mesh = two_cell_mesh()
    ops = Operators(mesh, 1)
    u = np.zeros((2, ops.dg.n_local, 1))
    u[0], u[1] = 1.0, 3.0
    w = nscheme_reconstruct(ops, u, ScalarAdvection((1.0, 0.0)), eps=eps)
    mid = np.flatnonzero(np.all(np.isclose(ops.cg.dof_coords, [1.0, 0.0]), axis=1))[0]
    half_length = 1.0
    want = ((half_length + eps) * 1.0 + eps * 3.0) / (half_length + 2 * eps)
    assert w[mid, 0] == pytest.approx(want, abs=1e-14)
    assert abs(w[mid, 0] - 1.0) <= 3 * eps


# ---------------------------------------------------------------- Poisson
def test_poisson_zero_source():
    ops = operators(4, 1)
    np.testing.assert_allclose(ops.poisson_solve(lambda x: np.zeros(x.shape[:-1])), 0.0, atol=1e-14)


def test_poisson_incompatible_source():
    ops = operators(4, 1)
    with pytest.raises(IncompatibleSourceError):
        ops.poisson_solve(lambda x: np.ones(x.shape[:-1]))


def manufactured(x):
    return np.cos(2 * np.pi * x[..., 0]) * np.cos(2 * np.pi * x[..., 1])


def manufactured_source(x):
    return -8 * np.pi**2 * manufactured(x)


def poisson_l2_error(nx, N):
    ops = operators(nx, N, perturb=0.1)
    u = ops.poisson_solve(manufactured_source)
    rule = triangle_quadrature(2 * ops.cg.degree + 4)
    psi = ops.cg.basis.eval(rule.points)
    x = ops.mesh.to_physical(np.arange(ops.mesh.n_cells)[:, None], rule.points[None])
    diff = np.einsum("qp,kp->kq", psi, u[ops.cg.local_to_global]) - manufactured(x)
    return np.sqrt(np.einsum("k,q,kq->", ops.mesh.det_jacobians, rule.weights, diff**2)), ops, u


def test_poisson_weak_divergence_residual():
    _, ops, u = poisson_l2_error(6, 1)
    from cgdg.operators import _source_vector

    v = ops.primary_grad(u)  # (nc, L, 2)
    resid = ops.weak_div_rhs(v) - _source_vector(ops, manufactured_source)
    assert np.abs(resid).max() <= 1e-10


@pytest.mark.parametrize("N", [1, 2])
def test_poisson_convergence_order(N):
    e1 = poisson_l2_error(8, N)[0]
    e2 = poisson_l2_error(16, N)[0]
    assert np.log2(e1 / e2) >= N + 1 - 0.3


# ---------------------------------------------------------------- output
def test_dump_coordinate_format(tmp_path):
    ops = operators(2, 0)
    ops.dump(tmp_path / "mass.txt")
    lines = (tmp_path / "mass.txt").read_text().splitlines()
    head = lines[0].split()
    assert head[1] == "mass" and int(head[2]) == ops.n_dofs
    rows, cols, vals = zip(*[(int(a), int(b), float(c)) for a, b, c in (ln.split() for ln in lines[1:])])
    back = sp.coo_matrix((vals, (rows, cols)), shape=(ops.n_dofs, ops.n_dofs)).toarray()
    np.testing.assert_array_equal(back, ops.mass_matrix.toarray())
