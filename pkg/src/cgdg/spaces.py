"""Discontinuous and continuous nodal Lagrange spaces on triangles.

The DG space holds polynomials of degree ``N`` per cell, the CG space
globally continuous polynomials of degree ``M = N + 1``.  Both use the
equispaced barycentric lattice as node set on the reference triangle
``{(r, s): r, s >= 0, r + s <= 1}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .mesh import PointLocationError, TriMesh


# ---------------------------------------------------------------- quadrature
@lru_cache(maxsize=None)
def gauss_legendre(m: int) -> tuple[np.ndarray, np.ndarray]:
    """``m``-point Gauss rule on ``[0, 1]``."""
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (nq, 2) reference coordinates
    weights: np.ndarray  # (nq,) summing to 1/2
    degree: int


@lru_cache(maxsize=None)
def triangle_quadrature(degree: int) -> QuadratureRule:
    """Collapsed Gauss-Jacobi rule exact for polynomials of total ``degree``."""
    n = max(1, (degree + 2) // 2)
    u, wu = gauss_legendre(n)
    x, wx = roots_jacobi(n, 1.0, 0.0)
    t = 0.5 * (x + 1.0)
    wt = 0.25 * wx
    U, T = np.meshgrid(u, t, indexing="ij")
    W = np.outer(wu, wt)
    pts = np.stack([(U * (1.0 - T)).ravel(), T.ravel()], axis=1)
    return QuadratureRule(pts, W.ravel(), degree)


def tensor_triangle_quadrature(m: int) -> QuadratureRule:
    """Collapsed rule with ``m`` points per direction (``m**2`` in total)."""
    return triangle_quadrature(2 * m - 1)


# ---------------------------------------------------------------- Lagrange
def lattice_nodes(n: int) -> np.ndarray:
    """Equispaced lattice of degree ``n`` ordered vertices, edges, interior.

    Edge ``i`` runs from reference vertex ``i`` to vertex ``i+1`` and its
    interior nodes are listed in that direction.
    """
    if n == 0:
        return np.array([[1.0 / 3.0, 1.0 / 3.0]])
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    nodes = [v for v in verts]
    for i in range(3):
        a, b = verts[i], verts[(i + 1) % 3]
        for k in range(1, n):
            nodes.append(a + (b - a) * k / n)
    for j in range(1, n):
        for i in range(1, n - j):
            nodes.append(np.array([i / n, j / n]))
    return np.array(nodes)


def _monomial_exponents(n: int) -> np.ndarray:
    return np.array([(a, d - a) for d in range(n + 1) for a in range(d, -1, -1)])


class LagrangeBasis:
    """Nodal Lagrange basis of degree ``n`` on the reference triangle."""

    def __init__(self, n: int):
        if n < 0:
            raise ValueError("degree must be non-negative")
        self.degree = n
        self.nodes = lattice_nodes(n)
        self.exponents = _monomial_exponents(n)
        vander = self._monomials(self.nodes)
        self.coeffs = np.linalg.inv(vander)

    @property
    def size(self) -> int:
        return len(self.nodes)

    def _monomials(self, rs):
        rs = np.asarray(rs, dtype=float) - 1.0 / 3.0
        a, b = self.exponents[:, 0], self.exponents[:, 1]
        return rs[..., 0, None] ** a * rs[..., 1, None] ** b

    def _monomial_grads(self, rs):
        rs = np.asarray(rs, dtype=float) - 1.0 / 3.0
        a, b = self.exponents[:, 0], self.exponents[:, 1]
        r, s = rs[..., 0, None], rs[..., 1, None]
        dr = np.where(a > 0, a * r ** np.maximum(a - 1, 0), 0.0) * s**b
        ds = r**a * np.where(b > 0, b * s ** np.maximum(b - 1, 0), 0.0)
        return np.stack([dr, ds], axis=-1)

    def eval(self, rs) -> np.ndarray:
        """Basis values, shape ``rs.shape[:-1] + (size,)``."""
        return self._monomials(rs) @ self.coeffs

    def grad(self, rs) -> np.ndarray:
        """Reference gradients, shape ``rs.shape[:-1] + (size, 2)``."""
        g = self._monomial_grads(rs)
        return np.einsum("...kd,ki->...id", g, self.coeffs)

    def edge_node_ids(self) -> list[np.ndarray]:
        """Local node ids on each reference edge, ordered from vertex i to i+1."""
        n = self.degree
        if n == 0:
            return [np.zeros(0, dtype=int)] * 3
        out = []
        for i in range(3):
            inner = 3 + i * (n - 1) + np.arange(n - 1)
            out.append(np.concatenate([[i], inner, [(i + 1) % 3]]))
        return out


# ---------------------------------------------------------------- spaces
class DGSpace:
    """Element-wise polynomials of degree ``N`` with a nodal basis."""

    def __init__(self, mesh: TriMesh, degree: int):
        self.mesh = mesh
        self.degree = degree
        self.basis = LagrangeBasis(degree)
        self.quad = triangle_quadrature(2 * (degree + 1) + 1)
        self.phi_q = self.basis.eval(self.quad.points)  # (nq, L)

    @property
    def n_local(self) -> int:
        return self.basis.size

    @cached_property
    def ref_mass(self) -> np.ndarray:
        w = self.quad.weights
        return np.einsum("q,qa,qc->ac", w, self.phi_q, self.phi_q)

    @cached_property
    def ref_mass_inv(self) -> np.ndarray:
        return np.linalg.inv(self.ref_mass)

    @cached_property
    def node_coords(self) -> np.ndarray:
        """Physical positions of all DG nodes, ``(nc, L, 2)``."""
        return self.mesh.to_physical(np.arange(self.mesh.n_cells)[:, None], self.basis.nodes[None])

    @cached_property
    def quad_coords(self) -> np.ndarray:
        return self.mesh.to_physical(np.arange(self.mesh.n_cells)[:, None], self.quad.points[None])


class CGSpace:
    """Globally continuous polynomials of degree ``M`` with shared nodes.

    Vertex nodes follow the periodic vertex classes of the mesh, edge nodes
    the periodic edge classes, so that periodic boundaries carry a single set
    of degrees of freedom.
    """

    def __init__(self, mesh: TriMesh, degree: int):
        if degree < 1:
            raise ValueError("continuous space needs degree >= 1")
        self.mesh = mesh
        self.degree = degree
        self.basis = LagrangeBasis(degree)
        self._number()

    def _number(self):
        mesh = self.mesh
        M = self.degree
        nc = mesh.n_cells
        L = self.basis.size
        l2g = np.empty((nc, L), dtype=np.int64)
        vcls = mesh.vertex_class
        nvc = mesh.n_vertex_classes
        l2g[:, :3] = vcls[mesh.triangles]
        ecls = mesh.edge_class[mesh.cell_edges]  # (nc, 3)
        n_ecls = int(mesh.edge_class.max()) + 1
        wrapped = mesh.wrap(mesh.vertices)
        next_id = nvc
        if M > 1:
            base = nvc + (M - 1) * ecls  # first slot of each edge class
            for i in range(3):
                a = mesh.triangles[:, i]
                b = mesh.triangles[:, (i + 1) % 3]
                xa, xb = wrapped[a], wrapped[b]
                forward = (xa[:, 0] < xb[:, 0]) | ((xa[:, 0] == xb[:, 0]) & (xa[:, 1] < xb[:, 1]))
                k = np.arange(1, M)
                slot = np.where(forward[:, None], k[None] - 1, (M - 1 - k)[None])
                l2g[:, 3 + i * (M - 1) : 3 + (i + 1) * (M - 1)] = base[:, i, None] + slot
            next_id = nvc + (M - 1) * n_ecls
        n_int = L - 3 - 3 * (M - 1)
        if n_int > 0:
            l2g[:, 3 + 3 * (M - 1) :] = next_id + np.arange(nc * n_int).reshape(nc, n_int)
            next_id += nc * n_int
        self.local_to_global = l2g
        self.n_dofs = int(next_id)
        coords = np.empty((self.n_dofs, 2))
        phys = mesh.to_physical(np.arange(nc)[:, None], self.basis.nodes[None])
        coords[l2g[::-1].ravel()] = phys[::-1].reshape(-1, 2)
        self.dof_coords = coords

    @cached_property
    def multiplicity(self) -> np.ndarray:
        """``|N_j|``: number of cells containing each dof."""
        return np.bincount(self.local_to_global.ravel(), minlength=self.n_dofs)

    @cached_property
    def boundary_dofs(self) -> np.ndarray:
        """Flags for dofs on a non-periodic boundary edge."""
        flags = np.zeros(self.n_dofs, dtype=bool)
        mesh = self.mesh
        ec = mesh.periodic_edge_cells
        open_cls = np.flatnonzero((ec[:, 1] < 0))
        if len(open_cls) == 0:
            return flags
        open_set = set(open_cls.tolist())
        edge_ids = self.basis.edge_node_ids()
        ecls = mesh.edge_class[mesh.cell_edges]
        for c in range(mesh.n_cells):
            for i in range(3):
                if ecls[c, i] in open_set:
                    flags[self.local_to_global[c, edge_ids[i]]] = True
        return flags

    @cached_property
    def dof_h(self) -> np.ndarray:
        """Characteristic length per dof: min incircle diameter over incident cells."""
        h = np.full(self.n_dofs, np.inf)
        np.minimum.at(h, self.local_to_global.ravel(), np.repeat(self.mesh.cell_h, self.basis.size))
        return h

    @cached_property
    def dof_cells(self) -> list[np.ndarray]:
        """``N_j``: cells containing each dof."""
        l2g = self.local_to_global.ravel()
        order = np.argsort(l2g, kind="stable")
        cells = (np.arange(l2g.size) // self.basis.size)[order]
        splits = np.cumsum(self.multiplicity)[:-1]
        return np.split(cells, splits)


# ---------------------------------------------------------------- fields
@dataclass
class DGField:
    """Nodal coefficients ``(nc, L, m)`` of a vector valued DG function."""

    space: DGSpace
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim == 2:
            c = c[..., None]
        if c.shape[:2] != (self.space.mesh.n_cells, self.space.n_local):
            raise ValueError("DG coefficient array does not match the space")
        self.coeffs = c

    @property
    def n_components(self) -> int:
        return self.coeffs.shape[-1]

    def eval(self, cell: int, x, tol: float = 1e-10) -> np.ndarray:
        return eval_dg(self, cell, x, tol)


@dataclass
class CGField:
    """Global nodal coefficients ``(n_dofs, m)`` of a continuous function."""

    space: CGSpace
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        if c.shape[0] != self.space.n_dofs:
            raise ValueError("CG coefficient array does not match the space")
        self.coeffs = c

    @property
    def n_components(self) -> int:
        return self.coeffs.shape[-1]

    def eval(self, x, cell: int | None = None) -> np.ndarray:
        return eval_cg(self, x, cell)


def eval_dg(field: DGField, cell: int, x, tol: float = 1e-10) -> np.ndarray:
    """Value of the DG polynomial of ``cell`` at ``x`` (which must lie in it)."""
    mesh = field.space.mesh
    lam = mesh.barycentric(cell, x)
    if np.any(lam < -tol):
        raise PointLocationError(f"point {tuple(np.asarray(x))} is not in cell {cell}")
    rs = lam[..., 1:]
    return field.space.basis.eval(rs) @ field.coeffs[cell]


def eval_cg(field: CGField, x, cell: int | None = None) -> np.ndarray:
    """Value of a CG field at ``x``; ``cell`` defaults to the located cell."""
    space = field.space
    mesh = space.mesh
    if cell is None:
        cell, lam = mesh.locate_point(x)
    else:
        lam = mesh.barycentric(cell, x)
    psi = space.basis.eval(lam[1:])
    return psi @ field.coeffs[space.local_to_global[cell]]


def eval_grad_cg(field: CGField, cell: int, x) -> np.ndarray:
    """Per-cell gradient ``(m, 2)`` of a CG field at ``x``."""
    space = field.space
    mesh = space.mesh
    rs = mesh.reference_coords(cell, x)
    g_ref = space.basis.grad(rs)  # (Lw, 2)
    g = g_ref @ mesh.inv_jacobians_t[cell].T  # (Lw, 2)
    return np.einsum("pd,pm->md", g, field.coeffs[space.local_to_global[cell]])


# ---------------------------------------------------------------- transfer
def _vectorize(f, x):
    out = np.asarray(f(x), dtype=float)
    if out.shape == x.shape[:-1]:
        out = out[..., None]
    return out


def interpolate_dg(f, space: DGSpace) -> DGField:
    """Nodal interpolation of ``f(x) -> (..., m)`` into the DG space."""
    return DGField(space, _vectorize(f, space.node_coords))


def l2_project_dg(f, space: DGSpace, quad_degree: int | None = None) -> DGField:
    """Element-wise L2 projection of ``f`` into the DG space.

    The moments use the space's own rule unless ``quad_degree`` asks for a
    finer one (useful for non-polynomial ``f``).
    """
    if quad_degree is None:
        rule, coords, phi = space.quad, space.quad_coords, space.phi_q
    else:
        rule = triangle_quadrature(quad_degree)
        coords = space.mesh.to_physical(np.arange(space.mesh.n_cells)[:, None], rule.points[None])
        phi = space.basis.eval(rule.points)
    vals = _vectorize(f, coords)  # (nc, nq, m)
    rhs = np.einsum("q,qa,kqm->kam", rule.weights, phi, vals)
    return DGField(space, np.einsum("ab,kbm->kam", space.ref_mass_inv, rhs))


def interpolate_cg(f, space: CGSpace) -> CGField:
    """Nodal interpolation of ``f`` into the CG space."""
    return CGField(space, _vectorize(f, space.dof_coords))
