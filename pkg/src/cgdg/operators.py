"""Stiffness tensor, mass matrices and the discrete nabla operators.

The primary nabla maps a continuous field into the DG space through
``D^{-1} K`` and is exact.  The dual nabla maps a DG field back into the
continuous space through ``-K^T`` and a global mass solve; it drops all
boundary terms and is therefore only available on periodic meshes.

Array conventions: DG coefficients are ``(n_cells, L, q)``, continuous
coefficients ``(n_dofs, q)``; a trailing axis of length 2 holds the
spatial index of gradients and flux tensors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import TriMesh
from .spaces import CGField, CGSpace, DGField, DGSpace, triangle_quadrature


class PeriodicMeshRequired(ValueError):
    """Raised when a dual operator is requested on a mesh with open boundaries."""


class MassSolveError(RuntimeError):
    """Raised when the iterative mass solve fails to converge."""


class IncompatibleSourceError(ValueError):
    """Raised when a pure-Neumann/periodic Poisson source has nonzero mean."""


@dataclass
class SolveInfo:
    iterations: int = 0
    residual: float = 0.0


# ---------------------------------------------------------------- mass solve
@dataclass
class MassSolver:
    """Solve ``M X = B`` for a symmetric positive definite sparse ``M``.

    ``method="cg"`` runs Jacobi-preconditioned conjugate gradients on all
    right-hand-side columns at once; ``method="direct"`` uses a sparse LU
    factorization computed on first use.
    """

    matrix: sp.csr_matrix
    tol: float = 1e-12
    method: str = "cg"
    max_iter: int | None = None
    last: SolveInfo = field(default_factory=SolveInfo)

    def __post_init__(self):
        if self.method not in ("cg", "direct"):
            raise ValueError(f"unknown mass solver {self.method!r}")
        self._diag_inv = 1.0 / self.matrix.diagonal()
        self._lu = None

    def solve(self, b: np.ndarray, x0: np.ndarray | None = None, tol: float | None = None) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        shape = b.shape
        B = b.reshape(shape[0], -1)
        tol = self.tol if tol is None else tol
        if self.method == "direct":
            if self._lu is None:
                self._lu = spla.splu(self.matrix.tocsc())
            X = self._lu.solve(B)
            r = np.linalg.norm(B - self.matrix @ X, axis=0)
            self.last = SolveInfo(0, float(np.max(r / np.maximum(np.linalg.norm(B, axis=0), 1e-300), initial=0.0)))
            return X.reshape(shape)
        X0 = None if x0 is None else np.asarray(x0, dtype=float).reshape(B.shape)
        X, info = pcg(self.matrix, B, self._diag_inv, X0, tol, self.max_iter or 10 * shape[0])
        self.last = info
        return X.reshape(shape)


def pcg(A, B, diag_inv, X0, tol, max_iter) -> tuple[np.ndarray, SolveInfo]:
    """Jacobi-preconditioned CG, vectorised over the columns of ``B``.

    Convergence per column: ``||B - A X|| <= tol * ||B||`` (2-norm).  A zero
    right-hand side returns zero.  Converged columns are frozen by zeroing
    their step length, which keeps every array contiguous.
    """
    n, k = B.shape
    X = np.zeros((n, k)) if X0 is None else X0.copy()
    bnorm = np.linalg.norm(B, axis=0)
    X[:, bnorm == 0.0] = 0.0
    R = B - A @ X if X0 is not None else B.copy()
    goal = tol * bnorm
    active = (np.linalg.norm(R, axis=0) > goal) & (bnorm > 0.0)
    if not active.any():
        return X, SolveInfo(0, _rel(R, bnorm))
    D = diag_inv[:, None]
    Z = D * R
    P = Z.copy()
    rz = (R * Z).sum(axis=0)
    it = 0
    while active.any():
        if it >= max_iter:
            raise MassSolveError(f"mass solve did not converge in {max_iter} iterations")
        it += 1
        AP = A @ P
        pap = (P * AP).sum(axis=0)
        alpha = np.where(active, rz / np.where(active, pap, 1.0), 0.0)
        X += alpha * P
        R -= alpha * AP
        Z = D * R
        rz_new = (R * Z).sum(axis=0)
        beta = np.where(active, rz_new / np.where(active, rz, 1.0), 0.0)
        P = Z + beta * P
        rz = rz_new
        active &= np.sqrt((R * R).sum(axis=0)) > goal
    R = B - A @ X
    return X, SolveInfo(it, _rel(R, bnorm))


def _rel(R, bnorm) -> float:
    rn = np.linalg.norm(R, axis=0)
    nz = bnorm > 0
    return float(np.max(rn[nz] / bnorm[nz], initial=0.0))


# ---------------------------------------------------------------- operators
class Operators:
    """All discrete operators of the CG-DG pair of degree ``(N, N+1)``."""

    def __init__(
        self,
        mesh: TriMesh,
        degree: int,
        *,
        dg: DGSpace | None = None,
        cg: CGSpace | None = None,
        tol: float = 1e-12,
        mass_solver: str = "cg",
    ):
        self.mesh = mesh
        self.degree = degree
        self.dg = dg if dg is not None else DGSpace(mesh, degree)
        self.cg = cg if cg is not None else CGSpace(mesh, degree + 1)
        if self.cg.degree != self.dg.degree + 1:
            raise ValueError(f"CG degree {self.cg.degree} must equal DG degree {self.dg.degree} + 1")
        if self.dg.mesh is not mesh or self.cg.mesh is not mesh:
            raise ValueError("spaces must be built on the given mesh")
        self.tol = tol
        self._build_reference()
        self.mass_solver = MassSolver(self.mass_matrix, tol=tol, method=mass_solver)

    # ------------------------------------------------------------ assembly
    def _build_reference(self):
        q = triangle_quadrature(2 * self.cg.degree + 1)
        w = q.weights
        phi = self.dg.basis.eval(q.points)  # (nq, L)
        psi = self.cg.basis.eval(q.points)  # (nq, Lw)
        dpsi = self.cg.basis.grad(q.points)  # (nq, Lw, 2)
        self.ref_dg_mass = np.einsum("q,qa,qc->ac", w, phi, phi)
        self.ref_dg_mass_inv = np.linalg.inv(self.ref_dg_mass)
        self.ref_cg_mass = np.einsum("q,qa,qc->ac", w, psi, psi)
        self.ref_mixed_mass = np.einsum("q,qp,qc->pc", w, psi, phi)  # int psi_p phi_c
        self.ref_stiffness = np.einsum("q,qc,qpr->cpr", w, phi, dpsi)  # int phi_c d_r psi_p
        self.ref_laplace = np.einsum("q,qpr,qis->rspi", w, dpsi, dpsi)  # int d_r psi_p d_s psi_i
        self.ref_grad = np.einsum("ab,bpr->rap", self.ref_dg_mass_inv, self.ref_stiffness)

    @property
    def n_dofs(self) -> int:
        return self.cg.n_dofs

    @cached_property
    def stiffness(self) -> np.ndarray:
        """``K[k, c, p, m] = int_{T_k} phi_c d_m psi_p``."""
        m = self.mesh
        return np.einsum("k,kmr,cpr->kcpm", m.det_jacobians, m.inv_jacobians_t, self.ref_stiffness)

    @cached_property
    def dg_mass(self) -> np.ndarray:
        return self.mesh.det_jacobians[:, None, None] * self.ref_dg_mass

    @cached_property
    def dg_mass_inv(self) -> np.ndarray:
        return self.ref_dg_mass_inv[None] / self.mesh.det_jacobians[:, None, None]

    @cached_property
    def scatter(self) -> sp.csr_matrix:
        """0/1 matrix summing cell-local CG contributions into global dofs."""
        l2g = self.cg.local_to_global.ravel()
        return sp.csr_matrix((np.ones(l2g.size), (l2g, np.arange(l2g.size))), shape=(self.n_dofs, l2g.size))

    def _assemble(self, ref: np.ndarray) -> sp.csr_matrix:
        l2g = self.cg.local_to_global
        vals = self.mesh.det_jacobians[:, None, None] * ref[None]
        rows = np.repeat(l2g, l2g.shape[1], axis=1).ravel()
        cols = np.tile(l2g, (1, l2g.shape[1])).ravel()
        return sp.csr_matrix((vals.ravel(), (rows, cols)), shape=(self.n_dofs, self.n_dofs))

    @cached_property
    def mass_matrix(self) -> sp.csr_matrix:
        """Global CG mass matrix ``M_pq = int psi_p psi_q``."""
        return self._assemble(self.ref_cg_mass)

    @cached_property
    def laplace_matrix(self) -> sp.csr_matrix:
        """Global stiffness matrix ``int grad psi_p . grad psi_q``."""
        m = self.mesh
        ginv = np.einsum("kmr,kms->krs", m.inv_jacobians_t, m.inv_jacobians_t)
        local = np.einsum("krs,rspi->kpi", ginv, self.ref_laplace)
        l2g = self.cg.local_to_global
        vals = m.det_jacobians[:, None, None] * local
        rows = np.repeat(l2g, l2g.shape[1], axis=1).ravel()
        cols = np.tile(l2g, (1, l2g.shape[1])).ravel()
        return sp.csr_matrix((vals.ravel(), (rows, cols)), shape=(self.n_dofs, self.n_dofs))

    @cached_property
    def load_vector(self) -> np.ndarray:
        """``int psi_p`` for every global dof."""
        return np.asarray(self.mass_matrix.sum(axis=1)).ravel()

    def _require_periodic(self):
        if not self.mesh.periodic or self.cg.boundary_dofs.any():
            raise PeriodicMeshRequired("dual operators drop boundary terms and need a fully periodic mesh")

    # ------------------------------------------------------------ primary
    def gather(self, w: np.ndarray) -> np.ndarray:
        """Cell-local view ``(n_cells, Lw, ...)`` of global CG coefficients."""
        return np.asarray(w, dtype=float)[self.cg.local_to_global]

    def primary_grad(self, w: np.ndarray) -> np.ndarray:
        """Exact per-cell gradient ``(n_cells, L, q, 2)`` of CG coefficients ``(n_dofs, q)``."""
        w = np.asarray(w, dtype=float)
        scalar = w.ndim == 1
        wl = self.gather(w.reshape(self.n_dofs, -1))
        t = np.einsum("rcp,kpq->kcqr", self.ref_grad, wl)
        out = np.einsum("kcqr,kmr->kcqm", t, self.mesh.inv_jacobians_t)
        return out[:, :, 0] if scalar else out.reshape(out.shape[:2] + w.shape[1:] + (2,))

    def primary_div(self, w: np.ndarray) -> np.ndarray:
        """Divergence of a CG vector/tensor field ``(n_dofs, ..., 2)`` into the DG space."""
        w = np.asarray(w, dtype=float)
        g = self.primary_grad(w)
        return g[..., 0, 0] + g[..., 1, 1]

    def primary_curl(self, w: np.ndarray) -> np.ndarray:
        """Curl with ``d_z = 0``.

        Two components give the scalar ``d_x w_y - d_y w_x``; three components
        give the full vector ``(d_y w_z, -d_x w_z, d_x w_y - d_y w_x)``.
        """
        g = self.primary_grad(np.asarray(w, dtype=float))
        return _curl_from_grad(g)

    # ------------------------------------------------------------ dual
    def weak_grad_rhs(self, u: np.ndarray) -> np.ndarray:
        """``-sum_kc K_kcpm u_kc`` for DG coefficients ``(n_cells, L, q)``; shape ``(n_dofs, q, 2)``."""
        u = np.asarray(u, dtype=float)
        nc, L = u.shape[:2]
        uq = u.reshape(nc, L, -1)
        m = self.mesh
        t = np.einsum("k,kmr,kcq->kcqmr", m.det_jacobians, m.inv_jacobians_t, uq)
        loc = -np.einsum("kcqmr,cpr->kpqm", t, self.ref_stiffness)
        out = self.scatter @ loc.reshape(nc * loc.shape[1], -1)
        return out.reshape((self.n_dofs,) + u.shape[2:] + (2,))

    def weak_div_rhs(self, u: np.ndarray) -> np.ndarray:
        """``-sum K_kcpm u_kcm`` for a DG vector/tensor field ``(n_cells, L, ..., 2)``."""
        g = self.weak_grad_rhs(np.asarray(u, dtype=float))
        return g[..., 0, 0] + g[..., 1, 1]

    def weak_curl_rhs(self, u: np.ndarray) -> np.ndarray:
        return _curl_from_grad(self.weak_grad_rhs(np.asarray(u, dtype=float)))

    def mass_solve(self, b: np.ndarray, x0: np.ndarray | None = None, tol: float | None = None) -> np.ndarray:
        return self.mass_solver.solve(b, x0=x0, tol=tol)

    def dual_grad(self, u: np.ndarray, x0=None) -> np.ndarray:
        """Dual gradient ``(n_dofs, q, 2)`` of DG coefficients ``(n_cells, L, q)``."""
        self._require_periodic()
        return self.mass_solve(self.weak_grad_rhs(u), x0)

    def dual_div(self, u: np.ndarray, x0=None) -> np.ndarray:
        self._require_periodic()
        return self.mass_solve(self.weak_div_rhs(u), x0)

    def dual_curl(self, u: np.ndarray, x0=None) -> np.ndarray:
        self._require_periodic()
        return self.mass_solve(self.weak_curl_rhs(u), x0)

    # ------------------------------------------------------------ projection
    def projection_rhs(self, u: np.ndarray) -> np.ndarray:
        """``int psi_p u_h`` for DG coefficients ``(n_cells, L, ...)``."""
        u = np.asarray(u, dtype=float)
        nc, L = u.shape[:2]
        loc = np.einsum("k,pc,kcq->kpq", self.mesh.det_jacobians, self.ref_mixed_mass, u.reshape(nc, L, -1))
        out = self.scatter @ loc.reshape(-1, loc.shape[-1])
        return out.reshape((self.n_dofs,) + u.shape[2:])

    def project(self, u: np.ndarray, x0: np.ndarray | None = None, warm_start: bool = False, tol=None) -> np.ndarray:
        """Global L2 projection of DG coefficients onto the continuous space."""
        if x0 is None and warm_start:
            x0 = self.warm_start(u)
        return self.mass_solve(self.projection_rhs(u), x0=x0, tol=tol)

    @cached_property
    def _warm_start_matrix(self) -> sp.csr_matrix:
        """Linear map DG coefficients -> averaged stencil-local L2 reconstructions."""
        mesh, cg = self.mesh, self.cg
        l2g = cg.local_to_global
        L = self.dg.n_local
        vcls = mesh.vertex_class[mesh.triangles]
        rows, cols, vals = [], [], []
        mult = cg.multiplicity
        for k in range(mesh.n_cells):
            stencil = np.unique(np.concatenate([mesh.vertex_cells[v] for v in vcls[k]]))
            dofs, loc = np.unique(l2g[stencil], return_inverse=True)
            loc = loc.reshape(len(stencil), -1)
            n = len(dofs)
            Ms = np.zeros((n, n))
            Bs = np.zeros((n, len(stencil) * L))
            for i, c in enumerate(stencil):
                d = mesh.det_jacobians[c]
                idx = loc[i]
                Ms[np.ix_(idx, idx)] += d * self.ref_cg_mass
                Bs[idx, i * L : (i + 1) * L] += d * self.ref_mixed_mass
            R = np.linalg.solve(Ms, Bs)
            own = loc[np.flatnonzero(stencil == k)[0]]
            block = R[own] / mult[l2g[k]][:, None]
            ucols = (stencil[:, None] * L + np.arange(L)).ravel()
            rows.append(np.repeat(l2g[k], block.shape[1]))
            cols.append(np.tile(ucols, len(own)))
            vals.append(block.ravel())
        rows, cols, vals = map(np.concatenate, (rows, cols, vals))
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_dofs, mesh.n_cells * L))

    def warm_start(self, u: np.ndarray) -> np.ndarray:
        """Initial guess from stencil-local L2 solves followed by nodal averaging."""
        u = np.asarray(u, dtype=float)
        nc, L = u.shape[:2]
        out = self._warm_start_matrix @ u.reshape(nc * L, -1)
        return out.reshape((self.n_dofs,) + u.shape[2:])

    # ------------------------------------------------------------ evaluation
    @cached_property
    def dg_at_cg_nodes(self) -> np.ndarray:
        """Values of the DG basis at the reference CG nodes, ``(Lw, L)``."""
        return self.dg.basis.eval(self.cg.basis.nodes)

    def cell_states_at_cg_nodes(self, u: np.ndarray) -> np.ndarray:
        """Per-cell DG polynomial evaluated at that cell's CG nodes ``(n_cells, Lw, ...)``."""
        return np.einsum("pc,kc...->kp...", self.dg_at_cg_nodes, np.asarray(u, dtype=float))

    def cg_to_dg(self, w: np.ndarray) -> np.ndarray:
        """Restriction of a continuous field to the cells, sampled at DG nodes.

        Exact only when the field has degree ``<= N`` per cell.
        """
        psi = self.cg.basis.eval(self.dg.basis.nodes)  # (L, Lw)
        return np.einsum("cp,kp...->kc...", psi, self.gather(w))

    # ------------------------------------------------------------ extras
    def poisson_solve(self, f) -> np.ndarray:
        """Continuous Galerkin solution of ``lap u = f`` with zero mean.

        Solves ``-int grad psi_j . grad u = int psi_j f`` on a periodic (or
        pure-Neumann) domain; ``f`` must have zero mean.  The quadrature
        remainder of the mean is removed before solving.
        """
        rhs = _source_vector(self, f)
        scale = np.abs(rhs).sum()
        if abs(rhs.sum()) > 1e-6 * max(scale, 1e-300):
            raise IncompatibleSourceError(f"source has nonzero integral {rhs.sum():.3e}")
        c = self.load_vector
        rhs = rhs - c * (rhs.sum() / c.sum())
        A = -self.laplace_matrix
        n = self.n_dofs
        K = sp.bmat([[A, c[:, None]], [c[None, :], None]], format="csc")
        sol = spla.spsolve(K, np.concatenate([rhs, [0.0]]))
        return sol[:n]

    def dump(self, path, which: str = "mass") -> None:
        """Write an assembled matrix in ``row col value`` coordinate text format."""
        mats = {"mass": self.mass_matrix, "laplace": self.laplace_matrix}
        A = mats[which].tocoo()
        with Path(path).open("w") as fh:
            fh.write(f"% {which} {A.shape[0]} {A.shape[1]} {A.nnz}\n")
            for r, c, v in zip(A.row, A.col, A.data):
                fh.write(f"{r} {c} {v:.17g}\n")


def _curl_from_grad(g: np.ndarray) -> np.ndarray:
    """Curl from a gradient array ``(..., comps, 2)`` with ``d_z = 0``."""
    nvec = g.shape[-2]
    if nvec == 2:
        return g[..., 1, 0] - g[..., 0, 1]
    if nvec == 3:
        return np.stack([g[..., 2, 1], -g[..., 2, 0], g[..., 1, 0] - g[..., 0, 1]], axis=-1)
    raise ValueError("curl needs a 2- or 3-component field")


def _source_vector(ops: Operators, f) -> np.ndarray:
    q = triangle_quadrature(2 * ops.cg.degree + 6)
    psi = ops.cg.basis.eval(q.points)
    x = ops.mesh.to_physical(np.arange(ops.mesh.n_cells)[:, None], q.points[None])
    fv = np.asarray(f(x), dtype=float)
    loc = np.einsum("k,q,qp,kq->kp", ops.mesh.det_jacobians, q.weights, psi, fv)
    return ops.scatter @ loc.ravel()


# ---------------------------------------------------------------- field API
def assemble_operators(mesh: TriMesh, dg_space: DGSpace, cg_space: CGSpace, **kw) -> Operators:
    """Build the operator bundle for a compatible pair of spaces."""
    if cg_space.degree != dg_space.degree + 1:
        raise ValueError(f"CG degree {cg_space.degree} must equal DG degree {dg_space.degree} + 1")
    return Operators(mesh, dg_space.degree, dg=dg_space, cg=cg_space, **kw)


def primary_nabla(ops: Operators, w: CGField, kind: str = "grad") -> DGField:
    """Primary gradient (``kind="grad"``), divergence or curl of a CG field."""
    c = w.coeffs
    if kind == "grad":
        out = ops.primary_grad(c).reshape(ops.mesh.n_cells, ops.dg.n_local, -1)
    elif kind == "div":
        out = ops.primary_div(c.reshape(ops.n_dofs, -1, 2))
    elif kind == "curl":
        out = ops.primary_curl(c)
    else:
        raise ValueError(f"unknown operator {kind!r}")
    return DGField(ops.dg, out)


def dual_nabla(ops: Operators, u: DGField, kind: str = "grad") -> CGField:
    """Dual gradient, divergence or curl of a DG field."""
    c = u.coeffs
    if kind == "grad":
        out = ops.dual_grad(c).reshape(ops.n_dofs, -1)
    elif kind == "div":
        out = ops.dual_div(c.reshape(c.shape[0], c.shape[1], -1, 2))
    elif kind == "curl":
        out = ops.dual_curl(c)
    else:
        raise ValueError(f"unknown operator {kind!r}")
    return CGField(ops.cg, out)


def project_dg_to_cg(ops: Operators, u: DGField, tol: float | None = None, warm_start: bool = True) -> CGField:
    return CGField(ops.cg, ops.project(u.coeffs, warm_start=warm_start, tol=tol))


def nscheme_reconstruct(ops: Operators, u: DGField | np.ndarray, system, eps: float = 1e-8) -> np.ndarray:
    """Upwind-weighted nodal averaging of per-cell states.

    Each cell contributes its DG polynomial evaluated at the CG node, weighted
    by ``R (max(Lambda, 0) + eps I) R^{-1}`` of the normal Jacobian in the
    outward direction of that node: the corner normal at vertices, the edge
    normal (scaled by half the edge length) on edges and the identity inside.
    The regularisation ``eps`` is relative to ``max_speed * |n|`` at each node.
    """
    coeffs = u.coeffs if isinstance(u, DGField) else np.asarray(u, dtype=float)
    mesh, cg = ops.mesh, ops.cg
    states = ops.cell_states_at_cg_nodes(coeffs)  # (nc, Lw, m)
    nc, Lw, m = states.shape
    normals = nodal_outward_normals(ops)  # (nc, Lw, 2), zero for interior nodes
    interior = np.all(normals == 0.0, axis=-1)
    flat_s = states.reshape(-1, m)
    flat_n = normals.reshape(-1, 2)
    kplus = np.broadcast_to(np.eye(m), (nc * Lw, m, m)).copy()
    bnd = ~interior.ravel()
    scale = system.max_speed(flat_s[bnd], flat_n[bnd]) * np.linalg.norm(flat_n[bnd], axis=1)
    kplus[bnd] = system.positive_part(flat_s[bnd], flat_n[bnd], eps * np.maximum(scale, 1e-300))
    l2g = cg.local_to_global.ravel()
    # solve for the deviation from the plain nodal mean so that equal states
    # are reproduced exactly despite the near-singular weight sum
    mean = np.zeros((cg.n_dofs, m))
    np.add.at(mean, l2g, flat_s)
    mean /= np.bincount(l2g, minlength=cg.n_dofs)[:, None]
    weighted = np.einsum("iab,ib->ia", kplus, flat_s - mean[l2g])
    Nsum = np.zeros((cg.n_dofs, m, m))
    np.add.at(Nsum, l2g, kplus)
    Wsum = np.zeros((cg.n_dofs, m))
    np.add.at(Wsum, l2g, weighted)
    return mean + np.linalg.solve(Nsum, Wsum[..., None])[..., 0]


def nodal_outward_normals(ops: Operators) -> np.ndarray:
    """Outward normal per (cell, CG node); zero rows mark interior nodes."""
    mesh, cg = ops.mesh, ops.cg
    M = cg.degree
    nc = mesh.n_cells
    out = np.zeros((nc, cg.basis.size, 2))
    out[:, :3] = mesh.corner_normals.corner
    X = mesh.vertices[mesh.triangles]
    for i in range(3):
        d = X[:, (i + 1) % 3] - X[:, i]
        n = 0.5 * np.stack([d[:, 1], -d[:, 0]], axis=1)
        out[:, 3 + i * (M - 1) : 3 + (i + 1) * (M - 1)] = n[:, None]
    return out
