"""Semi-discrete CG-DG right-hand side and explicit Runge-Kutta stepping.

The state lives in the DG space; every stage reconstructs a continuous
field from it (global L2 projection or N-scheme), evaluates the flux at the
continuous nodes, optionally applies the system's compatible viscosity and
differentiates the continuous flux exactly back into the DG space.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .operators import Operators, nscheme_reconstruct
from .systems import SystemDescriptor

log = logging.getLogger(__name__)


class SolverBlowUp(RuntimeError):
    """Raised when the state stops being finite; carries a snapshot."""

    def __init__(self, message, snapshot=None):
        super().__init__(message)
        self.snapshot = snapshot


@dataclass
class SolverOptions:
    av: bool = False
    chi: float = 1.0
    reconstruction: str = "l2"  # "l2" | "nscheme"
    integrator: str = "auto"  # "auto" | "ssp-rk3" | "rk4" | "euler"
    cfl: float = 0.4
    dt: float | None = None
    nscheme_eps: float = 1e-8
    check_states: bool = True

    def __post_init__(self):
        if self.reconstruction not in ("l2", "nscheme"):
            raise ValueError(f"unknown reconstruction {self.reconstruction!r}")
        if self.integrator not in ("auto", "ssp-rk3", "rk4", "euler"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.cfl <= 0:
            raise ValueError("CFL number must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("fixed time step must be positive")


@dataclass
class FluxField:
    """Reconstructed continuous state, its nodal flux and the viscosity used."""

    w: np.ndarray  # (n_dofs, m)
    flux: np.ndarray  # (n_dofs, m, 2)
    eps: np.ndarray | None = None  # (n_dofs,)


@dataclass
class StageInfo:
    t: float
    u: np.ndarray  # stage input state
    du: np.ndarray  # stage right-hand side
    flux: FluxField
    step: int
    stage: int


# Butcher-free Shu-Osher forms
_SSP_RK3 = ((1.0, 0.0, 1.0), (0.75, 0.25, 0.25), (1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0))
_RK4_C = (0.0, 0.5, 0.5, 1.0)


class CGDGSolver:
    def __init__(self, ops: Operators, system: SystemDescriptor, options: SolverOptions | None = None):
        self.ops = ops
        self.system = system
        self.options = options or SolverOptions()
        self._guess = None
        self.n_rhs = 0

    @property
    def integrator(self) -> str:
        if self.options.integrator != "auto":
            return self.options.integrator
        return "ssp-rk3" if self.ops.degree <= 2 else "rk4"

    # ------------------------------------------------------------ flux field
    def viscosity(self, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        """``eps_j = chi/2 * h_j/(2N+1) * s_j`` with ``s_j`` the max speed at dof ``j``."""
        ops, sys_ = self.ops, self.system
        states = ops.cell_states_at_cg_nodes(u)
        s_cell = sys_.max_speed(states)
        s = sys_.max_speed(w).copy()
        np.maximum.at(s, ops.cg.local_to_global.ravel(), s_cell.ravel())
        return 0.5 * self.options.chi * ops.cg.dof_h / (2 * ops.degree + 1) * s

    def build_flux_field(self, u: np.ndarray) -> FluxField:
        ops, sys_, opt = self.ops, self.system, self.options
        m = u.shape[-1]
        use_av = opt.av and opt.chi != 0.0
        if opt.reconstruction == "l2":
            rhs = ops.projection_rhs(u)
            if use_av:
                rhs = np.concatenate([rhs, sys_.av_rhs(ops, u)], axis=1)
            x0 = self._guess if self._guess is not None and self._guess.shape == rhs.shape else None
            sol = ops.mass_solve(rhs, x0=x0)
            self._guess = sol
            w, d = sol[:, :m], sol[:, m:]
        else:
            w = nscheme_reconstruct(ops, u, sys_, eps=opt.nscheme_eps)
            d = None
            if use_av:
                d_rhs = sys_.av_rhs(ops, u)
                x0 = self._guess if self._guess is not None and self._guess.shape == d_rhs.shape else None
                d = ops.mass_solve(d_rhs, x0=x0)
                self._guess = d
        if opt.check_states:
            sys_.check_states(w)
        if use_av:
            eps = self.viscosity(u, w)
            return FluxField(w, sys_.av_flux(w, d, eps), eps)
        return FluxField(w, sys_.flux(w), None)

    def rhs_from_flux(self, flux: np.ndarray) -> np.ndarray:
        """``-D^{-1} K . f``: minus the exact divergence of the continuous flux."""
        return -self.ops.primary_div(flux)

    def rhs(self, u: np.ndarray) -> tuple[np.ndarray, FluxField]:
        ff = self.build_flux_field(u)
        self.n_rhs += 1
        return self.rhs_from_flux(ff.flux), ff

    # ------------------------------------------------------------ stepping
    def stable_dt(self, u: np.ndarray) -> float:
        if self.options.dt is not None:
            return self.options.dt
        s = float(np.max(self.system.max_speed(u)))
        if not np.isfinite(s) or s <= 0:
            raise SolverBlowUp(f"invalid maximum signal speed {s}")
        h = float(self.ops.mesh.cell_h.min())
        return self.options.cfl * h / ((2 * self.ops.degree + 1) * s)

    def step(self, u: np.ndarray, t: float, dt: float, observer: Callable | None = None, step_index: int = 0):
        if dt <= 0:
            raise ValueError("time step must be positive")

        def stage(v, ts, k):
            du, ff = self.rhs(v)
            if observer is not None:
                observer(StageInfo(ts, v, du, ff, step_index, k))
            return du

        scheme = self.integrator
        if scheme == "euler":
            return u + dt * stage(u, t, 0)
        if scheme == "ssp-rk3":
            v = u
            times = (t, t + dt, t + 0.5 * dt)
            for k, (a, b, c) in enumerate(_SSP_RK3):
                v = a * u + b * v + c * dt * stage(v, times[k], k)
            return v
        k1 = stage(u, t, 0)
        k2 = stage(u + 0.5 * dt * k1, t + 0.5 * dt, 1)
        k3 = stage(u + 0.5 * dt * k2, t + 0.5 * dt, 2)
        k4 = stage(u + dt * k3, t + dt, 3)
        return u + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    def integrate(
        self,
        u0: np.ndarray,
        t_end: float,
        t0: float = 0.0,
        observer: Callable | None = None,
        on_step: Callable | None = None,
        max_steps: int | None = None,
    ) -> tuple[np.ndarray, float, int]:
        """Advance from ``t0`` to ``t_end`` (or ``max_steps`` steps)."""
        u, t, n = np.array(u0, dtype=float), float(t0), 0
        while t < t_end * (1 - 1e-14) and (max_steps is None or n < max_steps):
            dt = min(self.stable_dt(u), t_end - t)
            u = self.step(u, t, dt, observer, n)
            t += dt
            n += 1
            if not np.all(np.isfinite(u)):
                raise SolverBlowUp(f"non-finite state at step {n}, t={t:.6g}", snapshot={"t": t, "step": n, "u": u})
            if on_step is not None:
                on_step(u, t, n)
        return u, t, n


def build_flux_field(ops, u, system, av_on=False, reconstruction="l2", chi=1.0) -> FluxField:
    return CGDGSolver(ops, system, SolverOptions(av=av_on, chi=chi, reconstruction=reconstruction)).build_flux_field(u)


def rhs(ops, u, system, **options) -> np.ndarray:
    return CGDGSolver(ops, system, SolverOptions(**options)).rhs(u)[0]


# ---------------------------------------------------------------- run
@dataclass
class RunResult:
    u: np.ndarray
    t: float
    steps: int
    record: object
    ops: Operators = field(repr=False, default=None)
    solver: CGDGSolver = field(repr=False, default=None)


def build_mesh(cfg):
    from .mesh import generate_square_mesh, read_mesh

    if cfg.mesh_file:
        return read_mesh(cfg.mesh_file)
    return generate_square_mesh(cfg.nx, cfg.ny, cfg.box, cfg.perturb, cfg.seed, periodic=True)


def run(config) -> RunResult:
    """Execute a fully resolved :class:`cgdg.config.RunConfig`."""
    from . import diagnostics as dg
    from .systems import exact_solution, initial_condition, make_system

    cfg = config
    mesh = build_mesh(cfg)
    ops = Operators(mesh, cfg.degree, tol=cfg.tol, mass_solver=cfg.mass_solver)
    system = make_system(cfg.system, **cfg.system_params)
    u = initial_condition(cfg.preset, ops, system, **cfg.preset_params)
    if cfg.scheme == "fv0-entropy":
        return _run_fv(cfg, ops, system, u)
    options = SolverOptions(
        av=cfg.av, chi=cfg.chi, reconstruction=cfg.reconstruction, integrator=cfg.integrator, cfl=cfg.cfl, dt=cfg.dt
    )
    solver = CGDGSolver(ops, system, options)
    exact = exact_solution(cfg.preset, system, **cfg.preset_params)
    monitor = dg.RunMonitor(
        ops,
        system,
        points=cfg.points,
        circles=[dg.CircleControlVolume(c, r) for c, r in cfg.circles],
        exact=exact,
        every=cfg.every,
    )
    monitor.sample(u, 0.0, solver)
    try:
        u, t, n = solver.integrate(
            u,
            cfg.t_end,
            observer=monitor.observe_stage,
            on_step=lambda v, tt, k: monitor.on_step(v, tt, k, solver),
            max_steps=cfg.max_steps,
        )
    except Exception as exc:
        exc.record = monitor.record
        raise
    monitor.finish(u, t, n, solver)
    return RunResult(u, t, n, monitor.record, ops, solver)


def _run_fv(cfg, ops, system, u):
    from .diagnostics import DiagnosticsRecord
    from .fv_nodal import NodalFiniteVolume

    fv = NodalFiniteVolume(ops.mesh, system.gamma, cfl=cfg.cfl)
    method = cfg.integrator if cfg.integrator in ("euler", "ssp-rk2") else "ssp-rk2"
    rec = DiagnosticsRecord()
    areas = ops.mesh.areas
    q, t, n = u[:, 0, :].copy(), 0.0, 0

    def sample():
        totals = (areas[:, None] * q).sum(axis=0)
        for nm, v in zip(system.component_names, totals):
            rec.add(f"total_{nm}", t, v)
        rec.add("min_rho", t, q[:, 0].min())

    sample()
    while t < cfg.t_end * (1 - 1e-14) and (cfg.max_steps is None or n < cfg.max_steps):
        dt = min(cfg.dt or fv.stable_dt(q), cfg.t_end - t)
        q = fv.step(q, dt, method)
        t += dt
        n += 1
        if not np.all(np.isfinite(q)):
            raise SolverBlowUp(f"non-finite state at step {n}, t={t:.6g}", snapshot={"t": t, "step": n, "u": q})
        if n % cfg.every == 0:
            sample()
    sample()
    rec.summary.update({"t_final": t, "steps": n})
    return RunResult(q[:, None, :], t, n, rec, ops, None)
