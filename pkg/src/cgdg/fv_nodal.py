"""Cell-centred finite volumes with node-based multidimensional fluxes.

The lowest-order member of the CG-DG family: cell averages are updated by
nodal flux tensors contracted with corner normals.  Dual-cell discrete
operators and an entropy-stable nodal flux for the Euler equations live here.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial.distance import pdist

from .mesh import TriMesh
from .systems import Euler, EulerEntropyPair


class OpenDualCellError(ValueError):
    """A dual-cell operator was requested at a vertex whose dual cell is not closed."""


@dataclass(frozen=True)
class NodalFluxParams:
    """Viscosity switch and scale of the nodal flux.

    ``h`` and ``a`` default to the dual-cell diameter and the local maximum
    signal speed; explicit values override them for all vertices.
    """

    eps: float = 1.0
    h: float | None = None
    a: float | None = None
    guard: float = 1e-14

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("viscosity coefficient must be non-negative")
        for name in ("h", "a"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive")


class DualCellComplex:
    """Vertex-centred dual cells built from the median subcells ``omega_pc``.

    Corners are stored as flat arrays: ``corner_vertex[k]`` (periodic vertex
    class), ``corner_cell[k]`` and ``corner_normal[k] = l_pc n_pc``.
    """

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        nc = mesh.n_cells
        self.corner_cell = np.repeat(np.arange(nc), 3)
        self.corner_vertex = mesh.vertex_class[mesh.triangles].reshape(-1)
        self.corner_normal = mesh.corner_normals.corner.reshape(-1, 2)
        self.n_vertices = mesh.n_vertex_classes
        # each median subcell holds a third of its triangle
        self.subcell_areas = np.repeat(mesh.areas / 3.0, 3)
        self.areas = np.bincount(self.corner_vertex, self.subcell_areas, minlength=self.n_vertices)
        self.valence = np.bincount(self.corner_vertex, minlength=self.n_vertices)

    @cached_property
    def closed(self) -> np.ndarray:
        """True where the dual cell is closed (periodic or away from the boundary)."""
        mesh = self.mesh
        out = np.ones(self.n_vertices, dtype=bool)
        if not mesh.periodic:
            bv = np.unique(mesh.edges[mesh.boundary_edge_flags])
            out[mesh.vertex_class[bv]] = False
        return out

    @cached_property
    def diameters(self) -> np.ndarray:
        """Diameter of each dual cell (vertex, edge midpoints and centroids)."""
        mesh = self.mesh
        x = mesh.vertices[mesh.triangles]  # (nc, 3, 2)
        xc = x.mean(axis=1)
        rel = []
        for i in range(3):
            # offsets from the vertex are invariant under periodic images
            p = x[:, i]
            rel.append(
                np.stack([np.zeros_like(p), 0.5 * (x[:, (i + 1) % 3] - p), 0.5 * (x[:, i - 1] - p), xc - p], axis=1)
            )
        rel = np.stack(rel, axis=1).reshape(-1, 4, 2)  # per corner
        order = np.argsort(self.corner_vertex, kind="stable")
        splits = np.cumsum(self.valence)[:-1]
        return np.array([pdist(rel[idx].reshape(-1, 2)).max() for idx in np.split(order, splits)])

    def _scatter(self, vals):
        out = np.zeros((self.n_vertices,) + vals.shape[1:])
        np.add.at(out, self.corner_vertex, vals)
        return out

    def _mask_open(self, out):
        if not self.closed.all():
            out = out.copy()
            out[~self.closed] = np.nan
        return out

    def div_c(self, vertex_values: np.ndarray) -> np.ndarray:
        """``(1/|w_c|) sum_p <l_pc n_pc, q_p>`` from vertex-class vectors ``(nv, ..., 2)``."""
        q = vertex_values[self.corner_vertex]  # (3nc, ..., 2)
        contrib = np.einsum("kd,k...d->k...", self.corner_normal, q)
        s = contrib.reshape((self.mesh.n_cells, 3) + contrib.shape[1:]).sum(axis=1)
        return s / self.mesh.areas.reshape((-1,) + (1,) * (s.ndim - 1))

    def div_p(self, cell_values: np.ndarray) -> np.ndarray:
        """``-(1/|w_p|) sum_c <l_pc n_pc, q_c>`` from cell vectors ``(nc, ..., 2)``; NaN on open dual cells."""
        q = cell_values[self.corner_cell]
        out = -self._scatter(np.einsum("kd,k...d->k...", self.corner_normal, q))
        return self._mask_open(out / self.areas.reshape((-1,) + (1,) * (out.ndim - 1)))

    def grad_p(self, cell_values: np.ndarray) -> np.ndarray:
        """``-(1/|w_p|) sum_c l_pc q_c (x) n_pc`` from cell values ``(nc, ...)``; NaN on open dual cells."""
        q = cell_values[self.corner_cell]
        out = -self._scatter(np.einsum("k...,kd->k...d", q, self.corner_normal))
        return self._mask_open(out / self.areas.reshape((-1,) + (1,) * (out.ndim - 1)))

    def check(self, rtol: float = 1e-12) -> None:
        if np.any(self.subcell_areas <= 0):
            raise ValueError("non-positive subcell area")
        total = self.mesh.areas.sum()
        if abs(self.areas.sum() - total) > rtol * total:
            raise ValueError("dual cells do not tile the domain")


# ---------------------------------------------------------------- nodal flux
def _nodal_flux(states, corner_vertex, corner_cell, corner_normal, areas, h, n_vertices, pair, params):
    """Entropy-stable nodal flux for flat corner lists; returns ``(f_p, alpha_p, tadmor_p)``."""
    system = Euler(pair.gamma)
    counts = np.bincount(corner_vertex, minlength=n_vertices).astype(float)

    def scatter(v):
        out = np.zeros((n_vertices,) + v.shape[1:])
        np.add.at(out, corner_vertex, v)
        return out

    qk = states[corner_cell]  # (nk, 4)
    f_avg = scatter(system.flux(qk)) / counts[:, None, None]
    q_avg = scatter(qk) / counts[:, None]
    vol = areas[:, None]
    grad = -scatter(np.einsum("ki,kd->kid", pair.variables(qk), corner_normal)) / vol[..., None]
    div_psi = -scatter(np.einsum("kd,kd->k", corner_normal, pair.flux_potential(qk))) / areas
    H = pair.inverse_hessian(q_avg)  # (nv, 4, 4)
    Hg = np.einsum("pij,pjd->pid", H, grad)
    Hgg = np.einsum("pid,pid->p", Hg, grad)
    if params.a is None:
        speeds = system.max_speed(qk, corner_normal)
        a = np.zeros(n_vertices)
        np.maximum.at(a, corner_vertex, speeds)
    else:
        a = np.full(n_vertices, params.a)
    hp = np.full(n_vertices, params.h) if params.h is not None else h
    mismatch = np.einsum("pid,pid->p", f_avg, grad) - div_psi
    active = np.abs(Hgg) >= params.guard
    alpha = np.where(active, -mismatch / np.where(active, Hgg, 1.0), 0.0)
    coef = np.where(active, alpha - 0.5 * params.eps * hp * a, 0.0)
    f = f_avg + coef[:, None, None] * Hg
    tadmor = np.einsum("pid,pid->p", f, grad) - div_psi
    return f, alpha, tadmor


def entropy_stable_nodal_flux(states, corner_normals, volume, pair: EulerEntropyPair | None = None, params=None):
    """Nodal flux tensor at one vertex from the states of its cells.

    ``states`` is ``(k, 4)``, ``corner_normals`` the matching ``l_pc n_pc``
    (closing to zero around the vertex) and ``volume`` the dual-cell area.
    Returns ``(f_p, alpha_p, tadmor)`` where ``tadmor = f_p : GRAD_p(p) - DIV_p(psi)``.
    """
    pair = pair or EulerEntropyPair()
    params = params or NodalFluxParams()
    states = np.asarray(states, dtype=float)
    k = len(states)
    ln = np.asarray(corner_normals, dtype=float)
    Euler(pair.gamma).check_states(states)
    h = np.array([params.h if params.h is not None else 2.0 * np.sqrt(volume / np.pi)])
    f, alpha, tad = _nodal_flux(
        states, np.zeros(k, dtype=np.int64), np.arange(k), ln, np.array([float(volume)]), h, 1, pair, params
    )
    return f[0], float(alpha[0]), float(tad[0])


class NodalFiniteVolume:
    """Semi-discrete ``|w_c| dq_c/dt = -sum_p l_pc f_p n_pc`` on a periodic mesh."""

    def __init__(self, mesh: TriMesh, gamma: float = 1.4, params: NodalFluxParams | None = None, cfl: float = 0.4):
        if not mesh.periodic:
            raise ValueError("the nodal finite-volume scheme requires a periodic mesh")
        self.mesh = mesh
        self.dual = DualCellComplex(mesh)
        self.pair = EulerEntropyPair(gamma)
        self.system = Euler(gamma)
        self.params = params or NodalFluxParams()
        self.cfl = cfl

    def nodal_fluxes(self, q: np.ndarray):
        """``(f_p, alpha_p, tadmor_p)`` for cell states ``q`` of shape ``(nc, 4)``."""
        d = self.dual
        return _nodal_flux(
            q, d.corner_vertex, d.corner_cell, d.corner_normal, d.areas, d.diameters, d.n_vertices, self.pair, self.params
        )

    def rhs_from_nodal(self, fp: np.ndarray) -> np.ndarray:
        """``-(1/|w_c|) sum_p l_pc f_p n_pc`` for nodal fluxes ``(nv, m, 2)``."""
        return -self.dual.div_c(fp)

    def rhs(self, q: np.ndarray) -> np.ndarray:
        self.system.check_states(q)
        return self.rhs_from_nodal(self.nodal_fluxes(q)[0])

    def stable_dt(self, q: np.ndarray) -> float:
        s = float(self.system.max_speed(q).max())
        return self.cfl * float(self.mesh.cell_h.min()) / s

    def step(self, q: np.ndarray, dt: float, method: str = "ssp-rk2") -> np.ndarray:
        if dt <= 0:
            raise ValueError("time step must be positive")
        if method == "euler":
            return q + dt * self.rhs(q)
        if method == "ssp-rk2":
            q1 = q + dt * self.rhs(q)
            return 0.5 * (q + q1 + dt * self.rhs(q1))
        raise ValueError(f"unknown time integrator {method!r}")

    def integrate(self, q0: np.ndarray, t_end: float, method: str = "ssp-rk2", max_steps: int | None = None):
        q, t, n = np.array(q0, dtype=float), 0.0, 0
        while t < t_end * (1 - 1e-14) and (max_steps is None or n < max_steps):
            dt = min(self.stable_dt(q), t_end - t)
            q = self.step(q, dt, method)
            t += dt
            n += 1
        return q, t, n


def fv_step(q, mesh: TriMesh, dt: float, gamma: float = 1.4, params=None, method: str = "ssp-rk2") -> np.ndarray:
    return NodalFiniteVolume(mesh, gamma, params).step(q, dt, method)
