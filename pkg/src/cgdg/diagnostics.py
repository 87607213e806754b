"""Verification instruments for CG-DG runs.

Involution and energy monitors, pointwise and control-volume conservation
checks, the continuous-Galerkin reference evolution, convergence studies
and a 1D radial Euler reference solver.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .operators import Operators
from .spaces import gauss_legendre, triangle_quadrature
from .systems import SystemDescriptor

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- record
@dataclass
class DiagnosticsRecord:
    """Named time series plus scalar summaries of a run."""

    series: dict[str, list[tuple[float, float]]] = field(default_factory=dict)
    maxima: dict[str, float] = field(default_factory=dict)
    summary: dict[str, float] = field(default_factory=dict)

    def add(self, name: str, t: float, value: float) -> None:
        s = self.series.setdefault(name, [])
        if s and t < s[-1][0]:
            raise ValueError(f"series {name!r}: time {t} before {s[-1][0]}")
        if s and t == s[-1][0]:
            s[-1] = (t, float(value))
        else:
            s.append((float(t), float(value)))

    def track_max(self, name: str, value: float) -> None:
        self.maxima[name] = max(self.maxima.get(name, 0.0), float(value))

    def times(self, name: str) -> np.ndarray:
        return np.array([t for t, _ in self.series.get(name, [])])

    def values(self, name: str) -> np.ndarray:
        return np.array([v for _, v in self.series.get(name, [])])

    def write_csv(self, directory) -> list[Path]:
        """One ``t,value`` file per series plus ``maxima.csv`` and ``summary.csv``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        out = []
        for name in sorted(self.series):
            p = d / f"{name}.csv"
            with p.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t", "value"])
                for t, v in self.series[name]:
                    w.writerow([repr(t), repr(v)])
            out.append(p)
        for fname, table in (("maxima.csv", self.maxima), ("summary.csv", self.summary)):
            p = d / fname
            with p.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["name", "value"])
                for k in sorted(table):
                    w.writerow([k, repr(table[k])])
            out.append(p)
        return out


# ---------------------------------------------------------------- cell sampling
class CellSampler:
    """Per-cell quadrature with DG/CG basis tables in physical coordinates."""

    def __init__(self, ops: Operators, degree: int | None = None):
        self.ops = ops
        q = triangle_quadrature(degree if degree is not None else 2 * ops.cg.degree + 2)
        self.weights = ops.mesh.det_jacobians[:, None] * q.weights[None]  # (nc, nq)
        self.points = ops.mesh.to_physical(np.arange(ops.mesh.n_cells)[:, None], q.points[None])
        self.phi = ops.dg.basis.eval(q.points)  # (nq, L)
        self.psi = ops.cg.basis.eval(q.points)  # (nq, Lw)
        gref = ops.dg.basis.grad(q.points)  # (nq, L, 2)
        self.dphi = np.einsum("qcr,kmr->kqcm", gref, ops.mesh.inv_jacobians_t)

    def dg(self, u):
        return np.einsum("qc,kc...->kq...", self.phi, u)

    def cg(self, w):
        return np.einsum("qp,kp...->kq...", self.psi, self.ops.gather(w))

    def dg_grad(self, u):
        return np.einsum("kqcm,kc...->kq...m", self.dphi, u)

    def integrate(self, vals):
        return np.einsum("kq,kq...->...", self.weights, vals)


# ---------------------------------------------------------------- monitors
def involution_errors(ops: Operators, system: SystemDescriptor, u: np.ndarray) -> dict[str, dict[str, float]]:
    """L-infinity involution errors of the DG state.

    ``weak`` is the coefficient norm of the dual operator (``-K`` contraction),
    ``dual`` the same after the global mass solve and ``pointwise`` the max
    over quadrature points of the per-cell analytic curl/divergence.
    """
    out = {}
    sampler = None
    for inv in system.involutions:
        v = u[..., list(inv.components)]
        if inv.kind == "curl":
            weak = ops.weak_curl_rhs(v)
        else:
            weak = ops.weak_div_rhs(v)
        dual = ops.mass_solve(weak)
        sampler = sampler or CellSampler(ops, 2 * ops.degree)
        g = sampler.dg_grad(v)  # (nc, nq, 2, 2)
        pw = g[..., 1, 0] - g[..., 0, 1] if inv.kind == "curl" else g[..., 0, 0] + g[..., 1, 1]
        out[inv.name] = {
            "weak": float(np.abs(weak).max()),
            "dual": float(np.abs(dual).max()),
            "pointwise": float(np.abs(pw).max()),
        }
    return out


def total_energy(ops: Operators, system: SystemDescriptor, u: np.ndarray, sampler: CellSampler | None = None) -> float:
    """``int E(u_h)`` over the domain."""
    s = sampler or CellSampler(ops)
    return float(s.integrate(system.energy(s.dg(u))))


def projected_energy(ops, system, w, sampler=None) -> float:
    """``int E(w_h)`` for continuous coefficients ``w``."""
    s = sampler or CellSampler(ops)
    return float(s.integrate(system.energy(s.cg(w))))


def energy_rate(ops, system, w, du, sampler=None) -> float:
    """Semi-discrete ``dE/dt = int dE/dq(w_h) . du_h/dt``."""
    s = sampler or CellSampler(ops)
    ev = system.energy_variables(s.cg(w))
    return float(s.integrate(np.sum(ev * s.dg(du), axis=-1)))


class PointProbe:
    """Evaluates ``du_h/dt + div f_h`` at fixed points inside their cells."""

    def __init__(self, ops: Operators, points):
        self.ops = ops
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        mesh = ops.mesh
        self.cells, lam = mesh.locate_points(self.points)
        rs = lam[:, 1:]
        self.phi = ops.dg.basis.eval(rs)  # (np, L)
        g = ops.cg.basis.grad(rs)  # (np, Lw, 2)
        self.dpsi = np.einsum("ipr,imr->ipm", g, mesh.inv_jacobians_t[self.cells])

    def residual(self, du: np.ndarray, flux: np.ndarray) -> np.ndarray:
        """``|du/dt + div f|`` per point and component, shape ``(np, m)``."""
        dudt = np.einsum("ic,ic...->i...", self.phi, du[self.cells])
        fl = flux[self.ops.cg.local_to_global[self.cells]]  # (np, Lw, m, 2)
        div = np.einsum("ipd,ipmd->im", self.dpsi, fl)
        return np.abs(dudt + div)


# ---------------------------------------------------------------- control volumes
def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


class CircleControlVolume:
    """Circle approximated by a fan of isoparametric triangles of geometry degree ``n_c``.

    The outer side of each fan triangle is the degree-``n_c`` polynomial
    interpolating the circle at equispaced angles; inner sides are straight.
    """

    def __init__(self, center, radius: float, degree: int = 6, sectors: int = 8):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.degree = degree
        self.sectors = sectors
        self.n_quad = degree + 2
        # power-basis coefficients of each arc x(s), s in [0, 1]
        s_nodes = np.linspace(0.0, 1.0, degree + 1)
        self.arcs = []
        for j in range(sectors):
            th = 2 * np.pi * (j + s_nodes) / sectors
            pts = self.center + self.radius * np.stack([np.cos(th), np.sin(th)], axis=1)
            V = np.vander(s_nodes, degree + 1, increasing=True)
            self.arcs.append(np.linalg.solve(V, pts))  # (degree+1, 2)

    def arc_eval(self, j, s):
        return np.polynomial.polynomial.polyval(np.asarray(s), self.arcs[j]).T

    def arc_deriv(self, j, s):
        c = np.polynomial.polynomial.polyder(self.arcs[j])
        return np.polynomial.polynomial.polyval(np.asarray(s), c).T

    def polygon(self, per_arc: int = 64) -> np.ndarray:
        s = np.linspace(0.0, 1.0, per_arc, endpoint=False)
        return np.concatenate([self.arc_eval(j, s) for j in range(self.sectors)])

    def fan_quadrature(self, m: int | None = None):
        """Points and weights of the fan with ``m`` collapsed points per direction."""
        m = m or self.n_quad
        xg, wg = gauss_legendre(m)
        pts, wts = [], []
        for j in range(self.sectors):
            X = self.arc_eval(j, xg) - self.center  # (m, 2)
            dX = self.arc_deriv(j, xg)
            jac = _cross(X, dX)  # (m,)
            for rho, wr in zip(xg, wg):
                pts.append(self.center + rho * X)
                wts.append(wr * wg * rho * jac)
        return np.concatenate(pts), np.concatenate(wts)

    def area(self) -> float:
        _, w = self.fan_quadrature()
        return float(w.sum())

    def boundary_quadrature(self, m: int | None = None):
        """Points and weighted outward normals ``n ds`` on the curved boundary."""
        m = m or self.n_quad
        xg, wg = gauss_legendre(m)
        pts, nds = [], []
        for j in range(self.sectors):
            dX = self.arc_deriv(j, xg)
            pts.append(self.arc_eval(j, xg))
            nds.append(wg[:, None] * np.stack([dX[:, 1], -dX[:, 0]], axis=1))
        return np.concatenate(pts), np.concatenate(nds)

    def contains(self, x) -> np.ndarray:
        """Point-in-region test via winding number of a fine polygon."""
        poly = self.polygon()
        x = np.atleast_2d(x)
        a = poly[None] - x[:, None]
        b = np.roll(poly, -1, axis=0)[None] - x[:, None]
        ang = np.arctan2(_cross(a, b), np.einsum("ijk,ijk->ij", a, b))
        return np.abs(ang.sum(axis=1)) > np.pi


def _segment_curve_params(cv: CircleControlVolume, a, b):
    """Parameters along ``a -> b`` and per-arc parameters of curve crossings."""
    d = b - a
    seg_t, arc_s = [], []
    for j, c in enumerate(cv.arcs):
        # (x(s) - a) x d = 0
        shifted = c.copy()
        shifted[0] -= a
        poly = shifted[:, 0] * d[1] - shifted[:, 1] * d[0]
        roots = np.polynomial.polynomial.polyroots(poly)
        for r in roots:
            if abs(r.imag) > 1e-9 or r.real < -1e-12 or r.real > 1 + 1e-12:
                continue
            s = min(max(r.real, 0.0), 1.0)
            x = cv.arc_eval(j, s)
            t = float(np.dot(x - a, d) / np.dot(d, d))
            if -1e-12 <= t <= 1 + 1e-12:
                seg_t.append(min(max(t, 0.0), 1.0))
                arc_s.append((j, s))
    return seg_t, arc_s


class ControlVolumeBalance:
    """Exact clipping of a curved control volume against the mesh.

    Precomputes the moments ``int_{V cap T_k} phi_c`` (Green's theorem with an
    x-antiderivative, along arc pieces split at mesh-edge crossings and along
    mesh-edge pieces inside ``V``) and the boundary flux quadrature split by cell.
    """

    def __init__(self, ops: Operators, cv: CircleControlVolume, n_gauss: int | None = None):
        self.ops, self.cv = ops, cv
        mesh = ops.mesh
        N = ops.degree
        x0, x1, y0, y1 = mesh.box
        c, r = cv.center, cv.radius
        if c[0] - r <= x0 or c[0] + r >= x1 or c[1] - r <= y0 or c[1] + r >= y1:
            raise ValueError(f"control volume at {tuple(c)} with radius {r} meets the domain boundary")
        nga = n_gauss or (cv.degree * (ops.cg.degree + 1) + cv.degree) // 2 + 2
        xg, wg = gauss_legendre(nga)
        xa, wa = gauss_legendre(N // 2 + 1)  # antiderivative rule
        # candidate cells: bounding-box overlap
        X = mesh.vertices[mesh.triangles]
        lo, hi = X.min(axis=1), X.max(axis=1)
        r = cv.radius * 1.01
        near = np.flatnonzero(np.all(lo <= cv.center + r, axis=1) & np.all(hi >= cv.center - r, axis=1))
        # split arcs at crossings with edges of nearby cells
        breaks = [set([0.0, 1.0]) for _ in range(cv.sectors)]
        for k in near:
            for i in range(3):
                a, b = X[k, i], X[k, (i + 1) % 3]
                _, arc_s = _segment_curve_params(cv, a, b)
                for j, s in arc_s:
                    breaks[j].add(s)
        arc_pts, arc_w, arc_cells = [], [], []
        for j in range(cv.sectors):
            bs = np.array(sorted(breaks[j]))
            for s0, s1 in zip(bs[:-1], bs[1:]):
                if s1 - s0 < 1e-14:
                    continue
                sm = 0.5 * (s0 + s1)
                k, _ = mesh.locate_point(cv.arc_eval(j, sm))
                s = s0 + (s1 - s0) * xg
                arc_pts.append(cv.arc_eval(j, s))
                dX = cv.arc_deriv(j, s) * (s1 - s0)
                arc_w.append(wg[:, None] * np.stack([dX[:, 1], -dX[:, 0]], axis=1))  # n ds
                arc_cells.append(np.full(len(s), k))
        self.b_points = np.concatenate(arc_pts)
        self.b_nds = np.concatenate(arc_w)
        self.b_cells = np.concatenate(arc_cells)
        lam = mesh.barycentric(self.b_cells, self.b_points)
        self.b_psi = ops.cg.basis.eval(lam[:, 1:])  # (nb, Lw)
        # moments via Green: int_A g = oint G dy with G = int_{x0}^{x} g dxi
        L = ops.dg.n_local
        moments = {}

        def add_piece(k, pts, dy_w):
            x0 = mesh.centroids[k, 0]
            # G(x, y) = (x - x0) * sum_i wa_i g(x0 + (x - x0) xa_i, y)
            xs = x0 + (pts[:, None, 0] - x0) * xa[None, :]
            ys = np.broadcast_to(pts[:, None, 1], xs.shape)
            q = np.stack([xs, ys], axis=-1)
            rs = mesh.reference_coords(k, q)
            phi = ops.dg.basis.eval(rs)  # (np, na, L)
            G = (pts[:, 0] - x0)[:, None] * np.einsum("a,pac->pc", wa, phi)
            moments[k] = moments.get(k, np.zeros(L)) + np.einsum("p,pc->c", dy_w, G)

        # arc pieces: dy component of the tangent is -n_x ds ... use dy = dX_y ds
        for pts, nds, cells in zip(arc_pts, arc_w, arc_cells):
            # n ds = (dy, -dx) so dy = n_x ds
            add_piece(int(cells[0]), pts, nds[:, 0])
        # straight mesh-edge pieces inside V, oriented counter-clockwise per cell
        xe, we = gauss_legendre(N // 2 + 2)
        for k in near:
            for i in range(3):
                a, b = X[k, i], X[k, (i + 1) % 3]
                ts, _ = _segment_curve_params(cv, a, b)
                tb = np.array(sorted(set([0.0, 1.0] + ts)))
                for t0, t1 in zip(tb[:-1], tb[1:]):
                    if t1 - t0 < 1e-14:
                        continue
                    mid = a + (b - a) * 0.5 * (t0 + t1)
                    if not cv.contains(mid)[0]:
                        continue
                    tt = t0 + (t1 - t0) * xe
                    pts = a + (b - a) * tt[:, None]
                    add_piece(int(k), pts, we * (b - a)[1] * (t1 - t0))
        self.cells = np.array(sorted(moments), dtype=np.int64)
        self.moments = np.array([moments[k] for k in self.cells]).reshape(len(self.cells), L)

    def volume_integral(self, u: np.ndarray) -> np.ndarray:
        """``int_V u_h`` for DG coefficients (per component)."""
        return np.einsum("kc,kc...->...", self.moments, u[self.cells])

    def boundary_flux(self, flux: np.ndarray) -> np.ndarray:
        """``oint_{dV} f_h . n`` for continuous flux coefficients ``(n_dofs, m, 2)``."""
        fl = flux[self.ops.cg.local_to_global[self.b_cells]]  # (nb, Lw, m, 2)
        f = np.einsum("bp,bpmd->bmd", self.b_psi, fl)
        return np.einsum("bmd,bd->m", f, self.b_nds)

    def residual(self, du: np.ndarray, flux: np.ndarray) -> np.ndarray:
        return np.abs(self.volume_integral(du) + self.boundary_flux(flux))


def control_volume_balance(ops, circle: CircleControlVolume, du, flux) -> np.ndarray:
    return ControlVolumeBalance(ops, circle).residual(du, flux)


# ---------------------------------------------------------------- run monitor
class RunMonitor:
    """Collects per-stage conservation residuals and sampled series during a run."""

    def __init__(self, ops, system, points=(), circles=(), exact=None, every: int = 1, energy_rate_check=None):
        self.ops, self.system = ops, system
        self.record = DiagnosticsRecord()
        self.sampler = CellSampler(ops)
        self.probe = PointProbe(ops, points) if len(points) else None
        self.balances = [ControlVolumeBalance(ops, c) for c in circles]
        self.exact = exact
        self.every = max(1, int(every))
        if energy_rate_check is None:
            energy_rate_check = system.name in ("acoustics", "maxwell")
        self.energy_rate_check = energy_rate_check
        self.e0 = None

    def observe_stage(self, st) -> None:
        names = self.system.component_names
        rec = self.record
        if self.probe is not None:
            res = self.probe.residual(st.du, st.flux.flux)
            for i in range(res.shape[0]):
                for c, nm in enumerate(names):
                    rec.track_max(f"point{i}_{nm}", res[i, c])
        for i, b in enumerate(self.balances):
            res = b.residual(st.du, st.flux.flux)
            for c, nm in enumerate(names):
                rec.track_max(f"circle{i}_{nm}", res[c])
        if self.energy_rate_check and st.flux.eps is None:
            rate = energy_rate(self.ops, self.system, st.flux.w, st.du, self.sampler)
            rec.track_max("energy_rate", abs(rate))
        if self.system.name == "euler":
            rho, _, _, p = self.system.primitive(st.u)
            rec.track_max("neg_rho", max(0.0, -float(rho.min())))
            rec.track_max("neg_p", max(0.0, -float(p.min())))
            rec.summary["min_rho"] = min(rec.summary.get("min_rho", np.inf), float(rho.min()))
            rec.summary["min_p"] = min(rec.summary.get("min_p", np.inf), float(p.min()))

    def sample(self, u, t, solver=None) -> None:
        rec = self.record
        for name, vals in involution_errors(self.ops, self.system, u).items():
            for kind, v in vals.items():
                rec.add(f"{name}_{kind}", t, v)
        E = total_energy(self.ops, self.system, u, self.sampler)
        rec.add("energy", t, E)
        w = self.ops.project(u)
        Ew = projected_energy(self.ops, self.system, w, self.sampler)
        rec.add("energy_projected", t, Ew)
        if self.e0 is None:
            self.e0 = (E, Ew)
        rec.add("energy_error", t, E - self.e0[0])
        rec.add("energy_projected_error", t, Ew - self.e0[1])
        if self.exact is not None:
            eu, ew = l2_errors(self.ops, u, w, lambda x: self.exact(x, t), self.sampler)
            for c, nm in enumerate(self.system.component_names):
                rec.add(f"l2_u_{nm}", t, eu[c])
                rec.add(f"l2_w_{nm}", t, ew[c])

    def on_step(self, u, t, n, solver=None) -> None:
        if n % self.every == 0:
            self.sample(u, t, solver)

    def finish(self, u, t, n, solver=None) -> None:
        if not self.record.series.get("energy") or self.record.series["energy"][-1][0] != t:
            self.sample(u, t, solver)
        self.record.summary.update({"t_final": t, "steps": n})
        if self.e0 is not None:
            self.record.summary["energy_initial"] = self.e0[0]
        if solver is not None:
            self.record.summary["rhs_evaluations"] = solver.n_rhs


# ---------------------------------------------------------------- errors & convergence
def l2_errors(ops, u, w, exact, sampler=None):
    """L2 errors of the DG state and the continuous reconstruction against ``exact(x)``."""
    s = sampler or CellSampler(ops)
    q = np.asarray(exact(s.points), dtype=float)
    eu = np.sqrt(s.integrate((s.dg(u) - q) ** 2))
    ew = np.sqrt(s.integrate((s.cg(w) - q) ** 2))
    return eu, ew


@dataclass
class ConvergenceRow:
    nx: int
    err_u: np.ndarray
    err_w: np.ndarray
    rate_u: np.ndarray | None = None
    rate_w: np.ndarray | None = None


def convergence_study(
    degree: int,
    meshes,
    t_end: float = 0.2,
    components=(0, 1, 3),
    perturb: float = 0.15,
    seed: int = 0,
    steps: int | None = None,
    gamma: float = 1.4,
    mass_solver: str = "cg",
    variant: str = "stationary",
) -> list[ConvergenceRow]:
    """Isentropic-vortex L2 errors for ``u_h`` and ``w_h`` on ``[0, 10]^2``.

    ``steps=0`` measures the projection baseline without time stepping.
    """
    from .mesh import generate_square_mesh
    from .solver import CGDGSolver, SolverOptions
    from .systems import Euler, initial_condition, isentropic_vortex

    system = Euler(gamma)
    rows = []
    for nx in meshes:
        mesh = generate_square_mesh(nx, nx, (0.0, 10.0, 0.0, 10.0), perturb, seed)
        ops = Operators(mesh, degree, mass_solver=mass_solver)
        u = initial_condition("vortex", ops, system, variant=variant)
        solver = CGDGSolver(ops, system, SolverOptions())
        t = 0.0
        if steps != 0:
            u, t, _ = solver.integrate(u, t_end, max_steps=steps)
        w = ops.project(u)
        eu, ew = l2_errors(ops, u, w, lambda x: isentropic_vortex(x, t, gamma, variant=variant))
        rows.append(ConvergenceRow(nx, eu[list(components)], ew[list(components)]))
        log.info("N=%d nx=%d err_u=%s err_w=%s", degree, nx, eu, ew)
    for prev, row in zip(rows[:-1], rows[1:]):
        f = math.log(row.nx / prev.nx)
        row.rate_u = np.log(prev.err_u / row.err_u) / f
        row.rate_w = np.log(prev.err_w / row.err_w) / f
    return rows


def write_convergence_csv(rows: list[ConvergenceRow], path, which: str = "u") -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["Nx", "err_rho", "err_mom", "err_E", "rate_rho", "rate_mom", "rate_E"])
        for r in rows:
            err = r.err_u if which == "u" else r.err_w
            rate = r.rate_u if which == "u" else r.rate_w
            rate_cells = ["" for _ in err] if rate is None else [f"{x:.2f}" for x in rate]
            w.writerow([r.nx] + [f"{x:.5E}" for x in err] + rate_cells)


# ---------------------------------------------------------------- CG reference
def continuous_galerkin_evolution(ops: Operators, system, w0, dt: float, n_steps: int, integrator: str = "rk4"):
    """Classical continuous Galerkin evolution ``M dw/dt = -C . f(w)``.

    The convection matrices ``C_m[j, p] = int psi_j d_m psi_p`` are assembled
    here directly from the continuous basis.  Returns the list of states.
    """
    import scipy.sparse as sp
    from scipy.sparse.linalg import splu

    cg, mesh = ops.cg, ops.mesh
    q = triangle_quadrature(2 * cg.degree)
    psi = cg.basis.eval(q.points)
    dpsi = cg.basis.grad(q.points)
    l2g = cg.local_to_global
    Lw = cg.basis.size
    rows = np.repeat(l2g, Lw, axis=1).ravel()
    cols = np.tile(l2g, (1, Lw)).ravel()
    C = []
    for m in range(2):
        ref = np.einsum("q,qj,qpr->jpr", q.weights, psi, dpsi)
        loc = np.einsum("k,kr,jpr->kjp", mesh.det_jacobians, mesh.inv_jacobians_t[:, m, :], ref)
        C.append(sp.csr_matrix((loc.ravel(), (rows, cols)), shape=(cg.n_dofs, cg.n_dofs)))
    Mlu = splu(ops.mass_matrix.tocsc())

    def rate(w):
        f = system.flux(w)  # (n, m, 2)
        return -Mlu.solve(C[0] @ f[..., 0] + C[1] @ f[..., 1])

    w = np.array(w0, dtype=float)
    out = [w.copy()]
    for _ in range(n_steps):
        if integrator == "rk4":
            k1 = rate(w)
            k2 = rate(w + 0.5 * dt * k1)
            k3 = rate(w + 0.5 * dt * k2)
            k4 = rate(w + dt * k3)
            w = w + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        elif integrator == "ssp-rk3":
            w1 = w + dt * rate(w)
            w2 = 0.75 * w + 0.25 * (w1 + dt * rate(w1))
            w = w / 3.0 + 2.0 / 3.0 * (w2 + dt * rate(w2))
        else:
            raise ValueError(f"unsupported integrator {integrator!r}")
        out.append(w.copy())
    return out


# ---------------------------------------------------------------- radial reference
@dataclass
class RadialProfile:
    r: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    p: np.ndarray

    def sample(self, radius):
        rr = np.abs(np.asarray(radius, dtype=float))
        return tuple(np.interp(rr, self.r, a) for a in (self.rho, self.u, self.p))


def _hllc(UL, UR, gamma):
    def prim(U):
        rho = U[0]
        u = U[1] / rho
        p = (gamma - 1) * (U[2] - 0.5 * rho * u * u)
        return rho, u, p

    rl, ul, pl = prim(UL)
    rr, ur, pr = prim(UR)
    cl, cr = np.sqrt(gamma * pl / rl), np.sqrt(gamma * pr / rr)
    SL = np.minimum(ul - cl, ur - cr)
    SR = np.maximum(ul + cl, ur + cr)
    SM = (pr - pl + rl * ul * (SL - ul) - rr * ur * (SR - ur)) / (rl * (SL - ul) - rr * (SR - ur))

    def flux(U, rho, u, p):
        return np.stack([rho * u, rho * u * u + p, u * (U[2] + p)])

    FL, FR = flux(UL, rl, ul, pl), flux(UR, rr, ur, pr)

    def star(U, rho, u, p, S):
        f = rho * (S - u) / (S - SM)
        return f * np.stack([np.ones_like(f), SM, U[2] / rho + (SM - u) * (SM + p / (rho * (S - u)))])

    UsL, UsR = star(UL, rl, ul, pl, SL), star(UR, rr, ur, pr, SR)
    F = np.where(SL >= 0, FL, np.where(SM >= 0, FL + SL * (UsL - UL), np.where(SR > 0, FR + SR * (UsR - UR), FR)))
    return F


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def radial_reference_euler(
    inner=(1.0, 0.0, 1.0),
    outer=(0.125, 0.0, 0.1),
    radius: float = 0.25,
    r_max: float = 0.5,
    gamma: float = 1.4,
    t_end: float = 0.1,
    n_cells: int = 10_000,
    cfl: float = 0.8,
    alpha: int = 1,
) -> RadialProfile:
    """MUSCL-Hancock solution of the radially symmetric Euler equations.

    ``inner``/``outer`` are ``(rho, u_r, p)``; ``alpha = 1`` is cylindrical
    symmetry with geometric source ``-(alpha/r) (rho u, rho u^2, u (E + p))``
    integrated by Strang splitting.  Reflective at ``r = 0``, transmissive
    at ``r_max``.
    """
    dr = r_max / n_cells
    rc = (np.arange(n_cells) + 0.5) * dr
    inside = rc <= radius
    rho = np.where(inside, inner[0], outer[0])
    u = np.where(inside, inner[1], outer[1])
    p = np.where(inside, inner[2], outer[2])
    U = np.stack([rho, rho * u, p / (gamma - 1) + 0.5 * rho * u * u])

    def to_prim(U):
        rho = U[0]
        u = U[1] / rho
        return np.stack([rho, u, (gamma - 1) * (U[2] - 0.5 * rho * u * u)])

    def to_cons(W):
        return np.stack([W[0], W[0] * W[1], W[2] / (gamma - 1) + 0.5 * W[0] * W[1] ** 2])

    def source(U, dt):
        def S(U):
            W = to_prim(U)
            return -(alpha / rc) * np.stack([U[1], U[1] * W[1], W[1] * (U[2] + W[2])])

        U1 = U + dt * S(U)
        return 0.5 * (U + U1 + dt * S(U1))

    t = 0.0
    while t < t_end * (1 - 1e-14):
        W = to_prim(U)
        c = np.sqrt(gamma * W[2] / W[0])
        dt = min(cfl * dr / np.max(np.abs(W[1]) + c), t_end - t)
        U = source(U, 0.5 * dt)
        W = to_prim(U)
        # ghosts: reflective at r=0, transmissive at r_max
        Wg = np.concatenate([W[:, 1::-1] * np.array([[1], [-1], [1]]), W, W[:, -1:], W[:, -1:]], axis=1)
        slope = _minmod(Wg[:, 1:-1] - Wg[:, :-2], Wg[:, 2:] - Wg[:, 1:-1])
        Wc = Wg[:, 1:-1]
        WL, WR = Wc - 0.5 * slope, Wc + 0.5 * slope
        UL, UR = to_cons(WL), to_cons(WR)

        def f(Uq):
            Wq = to_prim(Uq)
            return np.stack([Uq[1], Uq[1] * Wq[1] + Wq[2], Wq[1] * (Uq[2] + Wq[2])])

        half = 0.5 * dt / dr * (f(UL) - f(UR))
        UL, UR = UL + half, UR + half
        F = _hllc(UR[:, :-1], UL[:, 1:], gamma)  # interfaces between extended cells
        U = U - dt / dr * (F[:, 1:] - F[:, :-1])
        U = source(U, 0.5 * dt)
        t += dt
    W = to_prim(U)
    return RadialProfile(rc, W[0], W[1], W[2])


def density_cut_l1(ops: Operators, system, u: np.ndarray, profile: RadialProfile, n_samples: int = 400, y: float = 0.0):
    """Mean absolute density difference along ``y = const`` against a radial profile."""
    mesh = ops.mesh
    x0, x1 = mesh.box[0], mesh.box[1]
    xs = np.linspace(x0, x1, n_samples + 2)[1:-1]
    pts = np.stack([xs, np.full_like(xs, y)], axis=1)
    cells, lam = mesh.locate_points(pts)
    phi = ops.dg.basis.eval(lam[:, 1:])
    q = np.einsum("ic,icm->im", phi, u[cells])
    rho_ref, _, _ = profile.sample(np.hypot(pts[:, 0], pts[:, 1]))
    return float(np.mean(np.abs(q[:, 0] - rho_ref)) * (x1 - x0)), xs, q, rho_ref


# ---------------------------------------------------------------- invariant suite
@dataclass
class CheckResult:
    name: str
    value: float
    tol: float
    passed: bool
    note: str = ""


def random_nodal_configuration(rng: np.random.Generator, gamma: float = 1.4):
    """Random star of triangles around the origin with admissible Euler states.

    Returns ``(states (k, 4), corner_normals (k, 2), dual_area)``.
    """
    from .systems import Euler

    k = int(rng.integers(3, 9))
    while True:
        ang = np.sort(rng.uniform(0, 2 * np.pi, k))
        gaps = np.diff(np.append(ang, ang[0] + 2 * np.pi))
        if gaps.max() < 0.9 * np.pi and gaps.min() > 0.05:
            break
    ring = rng.uniform(0.5, 1.5, k)[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    nxt = np.roll(ring, -1, axis=0)
    d = 0.5 * (ring - nxt)  # x_{p+} - x_{p-} for the corner at the origin
    normals = np.stack([d[:, 1], -d[:, 0]], axis=1)
    area = 0.5 * _cross(ring, nxt).sum() / 3.0
    rho = rng.uniform(0.1, 10.0, k)
    p = rng.uniform(0.1, 10.0, k)
    v = rng.normal(0.0, 1.0, (k, 2))
    return Euler(gamma).conserved(rho, v[:, 0], v[:, 1], p), normals, area


def tadmor_sweep(n: int = 500, seed: int = 0, gamma: float = 1.4) -> float:
    """Smallest ``f_p : GRAD_p(p) - DIV_p(psi)`` over random nodal configurations."""
    from .fv_nodal import entropy_stable_nodal_flux
    from .systems import EulerEntropyPair

    rng = np.random.default_rng(seed)
    pair = EulerEntropyPair(gamma)
    worst = np.inf
    for _ in range(n):
        q, ln, vol = random_nodal_configuration(rng, gamma)
        _, _, tad = entropy_stable_nodal_flux(q, ln, vol, pair)
        worst = min(worst, tad)
    return float(worst)


def schwarz_residuals(ops: Operators, n_trials: int = 20, seed: int = 0) -> dict[str, float]:
    """Max over random potentials of the weak and mass-solved dual curl(grad) and div(curl)."""
    rng = np.random.default_rng(seed)
    out = {"curl_grad_weak": 0.0, "div_curl_weak": 0.0, "curl_grad_dual": 0.0, "div_curl_dual": 0.0}
    Z = rng.uniform(-1.0, 1.0, (ops.n_dofs, n_trials))
    A = np.zeros((ops.n_dofs, n_trials, 3))
    A[..., 2] = rng.uniform(-1.0, 1.0, (ops.n_dofs, n_trials))
    cg_weak = ops.weak_curl_rhs(ops.primary_grad(Z))  # (n_dofs, T)
    dc_weak = ops.weak_div_rhs(ops.primary_curl(A)[..., :2])
    out["curl_grad_weak"] = float(np.abs(cg_weak).max())
    out["div_curl_weak"] = float(np.abs(dc_weak).max())
    if ops.mesh.periodic:
        out["curl_grad_dual"] = float(np.abs(ops.mass_solve(cg_weak.reshape(ops.n_dofs, -1))).max())
        out["div_curl_dual"] = float(np.abs(ops.mass_solve(dc_weak.reshape(ops.n_dofs, -1))).max())
    return out


def primary_grad_polynomial_error(ops: Operators, rng: np.random.Generator, n_points: int = 64) -> float:
    """Pointwise error of the primary gradient of a random degree-``M`` polynomial.

    The polynomial is interpolated into the continuous space (exactly, away
    from the periodic seam) and the DG gradient is compared against the
    analytic derivative at random points of cells that do not touch the seam.
    """
    from numpy.polynomial import polynomial as P

    mesh, M = ops.mesh, ops.cg.degree
    coef = np.triu(rng.uniform(-1.0, 1.0, (M + 1, M + 1)))[:, ::-1]  # total degree <= M
    dx, dy = P.polyder(coef, axis=0), P.polyder(coef, axis=1)
    x = ops.cg.dof_coords
    w = P.polyval2d(x[:, 0], x[:, 1], coef)
    g = ops.primary_grad(w)  # (nc, L, 2)
    X = mesh.vertices[mesh.triangles]
    x0, x1, y0, y1 = mesh.box
    tol = 1e-9 * max(x1 - x0, y1 - y0)
    inner = np.flatnonzero(
        np.all((X[..., 0] > x0 + tol) & (X[..., 0] < x1 - tol) & (X[..., 1] > y0 + tol) & (X[..., 1] < y1 - tol), axis=1)
    )
    if len(inner) == 0:
        inner = np.arange(mesh.n_cells) if not mesh.periodic else inner
    if len(inner) == 0:
        return 0.0
    cells = rng.choice(inner, n_points)
    lam = rng.dirichlet(np.ones(3), n_points)
    pts = mesh.to_physical(cells, lam[:, 1:])
    num = np.einsum("ic,icd->id", ops.dg.basis.eval(lam[:, 1:]), g[cells])
    exact = np.stack([P.polyval2d(pts[:, 0], pts[:, 1], dx), P.polyval2d(pts[:, 0], pts[:, 1], dy)], axis=1)
    return float(np.abs(num - exact).max())


def verification_suite(quick: bool = False, seed: int = 0) -> list[CheckResult]:
    """Discrete-calculus invariants on a fixed set of small periodic meshes."""
    from .fv_nodal import NodalFiniteVolume
    from .mesh import generate_square_mesh
    from .systems import Euler

    results = []

    def add(name, value, tol, note="", lower=False):
        ok = value >= -tol if lower else value <= tol
        results.append(CheckResult(name, float(value), tol, bool(ok), note))

    meshes = [(2, 2), (6, 6)] if quick else [(2, 2), (6, 6), (8, 8), (16, 16)]
    degrees = range(5)
    rng = np.random.default_rng(seed)
    for nx, ny in meshes:
        mesh = generate_square_mesh(nx, ny, (0.0, 1.0, 0.0, 1.0), 0.15, seed)
        tag = f"{mesh.n_cells}cells"
        cn = mesh.corner_normals.corner
        add(f"corner_normal_closure[{tag}]", np.abs(cn.sum(axis=1)).max(), 1e-14)
        for N in degrees:
            ops = Operators(mesh, N)
            res = schwarz_residuals(ops, 5 if quick else 20, seed)
            add(f"schwarz_curl_grad[N={N},{tag}]", res["curl_grad_weak"], 1e-11, f"mass-solved {res['curl_grad_dual']:.1e}")
            add(f"schwarz_div_curl[N={N},{tag}]", res["div_curl_weak"], 1e-11, f"mass-solved {res['div_curl_dual']:.1e}")
            if nx <= 8:
                # the roundoff floor of a nodal gradient grows like M^2/h
                err = primary_grad_polynomial_error(ops, rng)
                add(f"primary_grad_exact[N={N},{tag}]", err, 1e-12)
            # adjointness of the weak dual operator and the primary divergence
            u = rng.uniform(-1, 1, (mesh.n_cells, ops.dg.n_local, 2))
            ws = rng.uniform(-1, 1, ops.n_dofs)
            lhs = ws @ ops.weak_div_rhs(u)
            rhs = -np.einsum("kcd,kce,ked->", u, ops.dg_mass, ops.primary_grad(ws))
            add(f"adjoint[N={N},{tag}]", abs(lhs - rhs) / max(1.0, abs(lhs)), 1e-12)
        if nx >= 6:
            fv = NodalFiniteVolume(mesh)
            ops0 = Operators(mesh, 0)
            e = Euler()
            nc = mesh.n_cells
            q = e.conserved(rng.uniform(0.5, 2, nc), rng.normal(0, 0.3, nc), rng.normal(0, 0.3, nc), rng.uniform(0.5, 2, nc))
            fp = fv.nodal_fluxes(q)[0]
            a, b = fv.rhs_from_nodal(fp), -ops0.primary_div(fp)[:, 0]
            add(f"fv_cgdg_n0_equivalence[{tag}]", np.abs(a - b).max() / max(1.0, np.abs(a).max()), 1e-12)
    add("tadmor_min", tadmor_sweep(100 if quick else 500, seed), 1e-12, lower=True)
    return results
