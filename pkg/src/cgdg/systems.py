"""Hyperbolic systems: fluxes, eigenstructure, compatible viscosity, initial data.

State arrays carry the components on the last axis; flux tensors add a
trailing spatial axis of length 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import Operators
from .spaces import CGSpace


class NonPhysicalStateError(ValueError):
    """Raised on non-positive density or pressure; ``location`` holds the offending index."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


@dataclass(frozen=True)
class Involution:
    kind: str  # "curl" or "div"
    components: tuple[int, ...]
    name: str


def _unit(n):
    n = np.asarray(n, dtype=float)
    norm = np.linalg.norm(n, axis=-1, keepdims=True)
    return n / np.where(norm > 0, norm, 1.0), norm[..., 0]


class SystemDescriptor:
    """Base class; subclasses define the physics."""

    name = "system"
    n_components = 0
    component_names: tuple[str, ...] = ()
    involutions: tuple[Involution, ...] = ()
    symmetric = False

    # -- physics
    def flux(self, q):
        raise NotImplementedError

    def normal_jacobian(self, q, n):
        raise NotImplementedError

    def max_speed(self, q, n=None):
        raise NotImplementedError

    def energy(self, q):
        raise NotImplementedError

    def energy_variables(self, q):
        """Gradient of the energy density with respect to the state."""
        raise NotImplementedError

    def check_states(self, q):
        """Raise :class:`NonPhysicalStateError` on inadmissible states."""

    # -- eigenstructure
    def eigensystem(self, q, n):
        """Right eigenvectors, eigenvalues and inverse of the normal Jacobian."""
        A = self.normal_jacobian(q, n)
        if self.symmetric:
            lam, R = np.linalg.eigh(A)
            return R, lam, np.swapaxes(R, -1, -2)
        lam, R = np.linalg.eig(A)
        lam, R = lam.real, R.real
        return R, lam, np.linalg.inv(R)

    def positive_part(self, q, n, eps: float = 0.0):
        """``R (max(Lambda, 0) + eps I) R^{-1}`` for the (possibly scaled) normal ``n``."""
        R, lam, Rinv = self.eigensystem(q, n)
        d = np.maximum(lam, 0.0) + np.asarray(eps, dtype=float)[..., None]
        return np.einsum("...ij,...j,...jk->...ik", R, d, Rinv)

    # -- artificial viscosity
    def av_rhs(self, ops: Operators, u: np.ndarray) -> np.ndarray:
        """Weak derivatives (before the mass solve) used by the viscosity, ``(n_dofs, k)``."""
        raise NotImplementedError

    def av_flux(self, w: np.ndarray, d: np.ndarray, eps: np.ndarray) -> np.ndarray:
        """Nodal flux of the reconstructed states ``w`` modified by viscosity ``eps``."""
        raise NotImplementedError


# ---------------------------------------------------------------- acoustics
class Acoustics(SystemDescriptor):
    """Linear acoustics with state ``(rho v_x, rho v_y, p)``."""

    name = "acoustics"
    n_components = 3
    component_names = ("rho_vx", "rho_vy", "p")
    involutions = (Involution("curl", (0, 1), "curl_v"),)

    def __init__(self, rho: float = 1.0, c: float = 1.0):
        if rho <= 0 or c <= 0:
            raise ValueError("density and sound speed must be positive")
        self.rho, self.c = float(rho), float(c)
        self.symmetric = self.c == 1.0

    def flux(self, q):
        q = np.asarray(q, dtype=float)
        f = np.zeros(q.shape + (2,))
        f[..., 0, 0] = q[..., 2]
        f[..., 1, 1] = q[..., 2]
        f[..., 2, :] = self.c**2 * q[..., :2]
        return f

    def normal_jacobian(self, q, n):
        n = np.asarray(n, dtype=float)
        A = np.zeros(np.broadcast_shapes(np.shape(q)[:-1], n.shape[:-1]) + (3, 3))
        A[..., 0, 2] = n[..., 0]
        A[..., 1, 2] = n[..., 1]
        A[..., 2, 0] = self.c**2 * n[..., 0]
        A[..., 2, 1] = self.c**2 * n[..., 1]
        return A

    def eigensystem(self, q, n):
        nhat, nn = _unit(n)
        shape = np.broadcast_shapes(np.shape(q)[:-1], nhat.shape[:-1])
        nx, ny = np.broadcast_to(nhat[..., 0], shape), np.broadcast_to(nhat[..., 1], shape)
        nn = np.broadcast_to(nn, shape)
        c = self.c
        R = np.zeros(shape + (3, 3))
        R[..., 0, 0], R[..., 1, 0] = -ny, nx
        R[..., 0, 1], R[..., 1, 1], R[..., 2, 1] = nx, ny, c
        R[..., 0, 2], R[..., 1, 2], R[..., 2, 2] = -nx, -ny, c
        Rinv = np.zeros(shape + (3, 3))
        Rinv[..., 0, 0], Rinv[..., 0, 1] = -ny, nx
        Rinv[..., 1, 0], Rinv[..., 1, 1], Rinv[..., 1, 2] = 0.5 * nx, 0.5 * ny, 0.5 / c
        Rinv[..., 2, 0], Rinv[..., 2, 1], Rinv[..., 2, 2] = -0.5 * nx, -0.5 * ny, 0.5 / c
        lam = np.stack([np.zeros(shape), c * nn, -c * nn], axis=-1)
        return R, lam, Rinv

    def max_speed(self, q, n=None):
        return np.full(np.shape(q)[:-1], self.c)

    def energy(self, q):
        q = np.asarray(q, dtype=float)
        return 0.5 * (q[..., 0] ** 2 + q[..., 1] ** 2) / self.rho + 0.5 * q[..., 2] ** 2 / (self.rho * self.c**2)

    def energy_variables(self, q):
        q = np.asarray(q, dtype=float)
        return np.concatenate([q[..., :2] / self.rho, q[..., 2:] / (self.rho * self.c**2)], axis=-1)

    def av_rhs(self, ops, u):
        v = u[..., :2] / self.rho
        grad_p = ops.weak_grad_rhs(u[..., 2])  # (n_dofs, 2)
        div_v = ops.weak_div_rhs(v)  # (n_dofs,)
        return np.concatenate([grad_p, div_v[:, None]], axis=1)

    def av_flux(self, w, d, eps):
        e = np.asarray(eps)[:, None]
        q = np.empty_like(w)
        q[:, :2] = w[:, :2] - self.rho * e * d[:, :2]
        q[:, 2] = w[:, 2] - e[:, 0] * d[:, 2]
        return self.flux(q)


# ---------------------------------------------------------------- Maxwell
class Maxwell(SystemDescriptor):
    """Vacuum Maxwell equations, unit light speed, state ``(B, E)`` with ``d_z = 0``."""

    name = "maxwell"
    n_components = 6
    component_names = ("Bx", "By", "Bz", "Ex", "Ey", "Ez")
    involutions = (Involution("div", (0, 1), "div_B"), Involution("div", (3, 4), "div_E"))
    symmetric = True

    def flux(self, q):
        q = np.asarray(q, dtype=float)
        Bx, By, Bz, Ex, Ey, Ez = np.moveaxis(q, -1, 0)
        f = np.zeros(q.shape + (2,))
        f[..., 0, 1] = Ez
        f[..., 1, 0] = -Ez
        f[..., 2, 0], f[..., 2, 1] = Ey, -Ex
        f[..., 3, 1] = -Bz
        f[..., 4, 0] = Bz
        f[..., 5, 0], f[..., 5, 1] = -By, Bx
        return f

    def normal_jacobian(self, q, n):
        n = np.asarray(n, dtype=float)
        shape = np.broadcast_shapes(np.shape(q)[:-1], n.shape[:-1])
        nx = np.broadcast_to(n[..., 0], shape)
        ny = np.broadcast_to(n[..., 1], shape)
        A = np.zeros(shape + (6, 6))
        A[..., 0, 5] = ny
        A[..., 1, 5] = -nx
        A[..., 2, 4], A[..., 2, 3] = nx, -ny
        A[..., 3, 2] = -ny
        A[..., 4, 2] = nx
        A[..., 5, 1], A[..., 5, 0] = -nx, ny
        return A

    def max_speed(self, q, n=None):
        return np.ones(np.shape(q)[:-1])

    def energy(self, q):
        q = np.asarray(q, dtype=float)
        return 0.5 * np.sum(q**2, axis=-1)

    def energy_variables(self, q):
        return np.asarray(q, dtype=float)

    def av_rhs(self, ops, u):
        return np.concatenate([ops.weak_curl_rhs(u[..., :3]), ops.weak_curl_rhs(u[..., 3:])], axis=1)

    def av_flux(self, w, d, eps):
        e = np.asarray(eps)[:, None]
        q = np.empty_like(w)
        q[:, :3] = w[:, :3] - e * d[:, 3:]
        q[:, 3:] = w[:, 3:] + e * d[:, :3]
        return self.flux(q)


# ---------------------------------------------------------------- Euler
class Euler(SystemDescriptor):
    """Compressible Euler equations, ideal gas, state ``(rho, rho v_x, rho v_y, E)``."""

    name = "euler"
    n_components = 4
    component_names = ("rho", "rho_vx", "rho_vy", "E")

    def __init__(self, gamma: float = 1.4):
        if gamma <= 1:
            raise ValueError("gamma must exceed 1")
        self.gamma = float(gamma)

    def primitive(self, q):
        q = np.asarray(q, dtype=float)
        rho = q[..., 0]
        vx, vy = q[..., 1] / rho, q[..., 2] / rho
        p = (self.gamma - 1.0) * (q[..., 3] - 0.5 * rho * (vx**2 + vy**2))
        return rho, vx, vy, p

    def conserved(self, rho, vx, vy, p):
        rho, vx, vy, p = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (rho, vx, vy, p)))
        E = p / (self.gamma - 1.0) + 0.5 * rho * (vx**2 + vy**2)
        return np.stack([rho, rho * vx, rho * vy, E], axis=-1)

    def sound_speed(self, q):
        rho, _, _, p = self.primitive(q)
        return np.sqrt(self.gamma * p / rho)

    def check_states(self, q):
        rho, _, _, p = self.primitive(q)
        bad = ~((rho > 0) & (p > 0))
        if bad.any():
            loc = np.unravel_index(int(np.argmax(bad)), bad.shape)
            raise NonPhysicalStateError(
                f"non-physical state at index {tuple(int(i) for i in loc)}: rho={rho[loc]:.3e}, p={p[loc]:.3e}", loc
            )

    def flux(self, q):
        rho, vx, vy, p = self.primitive(q)
        E = np.asarray(q)[..., 3]
        f = np.empty(np.shape(q) + (2,))
        f[..., 0, 0], f[..., 0, 1] = rho * vx, rho * vy
        f[..., 1, 0], f[..., 1, 1] = rho * vx * vx + p, rho * vx * vy
        f[..., 2, 0], f[..., 2, 1] = rho * vx * vy, rho * vy * vy + p
        f[..., 3, 0], f[..., 3, 1] = vx * (E + p), vy * (E + p)
        return f

    def normal_jacobian(self, q, n):
        g = self.gamma
        rho, vx, vy, p = self.primitive(q)
        n = np.asarray(n, dtype=float)
        shape = np.broadcast_shapes(rho.shape, n.shape[:-1])
        nx, ny = np.broadcast_to(n[..., 0], shape), np.broadcast_to(n[..., 1], shape)
        vx, vy, rho, p = (np.broadcast_to(a, shape) for a in (vx, vy, rho, p))
        vn = vx * nx + vy * ny
        k = 0.5 * (vx**2 + vy**2)
        H = (g / (g - 1.0)) * p / rho + k
        A = np.zeros(shape + (4, 4))
        A[..., 0, 1], A[..., 0, 2] = nx, ny
        A[..., 1, 0] = (g - 1) * k * nx - vx * vn
        A[..., 1, 1] = vn - (g - 2) * vx * nx
        A[..., 1, 2] = vx * ny - (g - 1) * vy * nx
        A[..., 1, 3] = (g - 1) * nx
        A[..., 2, 0] = (g - 1) * k * ny - vy * vn
        A[..., 2, 1] = vy * nx - (g - 1) * vx * ny
        A[..., 2, 2] = vn - (g - 2) * vy * ny
        A[..., 2, 3] = (g - 1) * ny
        A[..., 3, 0] = vn * ((g - 1) * k - H)
        A[..., 3, 1] = H * nx - (g - 1) * vx * vn
        A[..., 3, 2] = H * ny - (g - 1) * vy * vn
        A[..., 3, 3] = g * vn
        return A

    def eigensystem(self, q, n):
        """Closed-form eigenvectors; robust where ``v.n`` is a double eigenvalue."""
        g = self.gamma
        nhat, nn = _unit(n)
        rho, vx, vy, p = self.primitive(q)
        shape = np.broadcast_shapes(rho.shape, nhat.shape[:-1])
        nx, ny = np.broadcast_to(nhat[..., 0], shape), np.broadcast_to(nhat[..., 1], shape)
        rho, vx, vy, p, nn = (np.broadcast_to(a, shape) for a in (rho, vx, vy, p, nn))
        c = np.sqrt(g * p / rho)
        k = 0.5 * (vx**2 + vy**2)
        H = c**2 / (g - 1.0) + k
        vn = vx * nx + vy * ny
        vt = -vx * ny + vy * nx
        one, zero = np.ones(shape), np.zeros(shape)
        R = np.stack(
            [
                np.stack([one, vx - c * nx, vy - c * ny, H - c * vn], axis=-1),
                np.stack([one, vx, vy, k], axis=-1),
                np.stack([zero, -ny, nx, vt], axis=-1),
                np.stack([one, vx + c * nx, vy + c * ny, H + c * vn], axis=-1),
            ],
            axis=-1,
        )
        b1 = (g - 1.0) / c**2
        b2 = b1 * k
        Rinv = np.stack(
            [
                0.5 * np.stack([b2 + vn / c, -b1 * vx - nx / c, -b1 * vy - ny / c, b1], axis=-1),
                np.stack([1.0 - b2, b1 * vx, b1 * vy, -b1], axis=-1),
                np.stack([-vt, -ny, nx, zero], axis=-1),
                0.5 * np.stack([b2 - vn / c, -b1 * vx + nx / c, -b1 * vy + ny / c, b1], axis=-1),
            ],
            axis=-2,
        )
        lam = nn[..., None] * np.stack([vn - c, vn, vn, vn + c], axis=-1)
        return R, lam, Rinv

    def max_speed(self, q, n=None):
        rho, vx, vy, p = self.primitive(q)
        c = np.sqrt(self.gamma * np.abs(p) / rho)
        if n is None:
            return np.hypot(vx, vy) + c
        nhat, _ = _unit(n)
        return np.abs(vx * nhat[..., 0] + vy * nhat[..., 1]) + c

    def energy(self, q):
        return np.asarray(q, dtype=float)[..., 3]

    def energy_variables(self, q):
        out = np.zeros(np.shape(q))
        out[..., 3] = 1.0
        return out

    def av_rhs(self, ops, u):
        return ops.weak_grad_rhs(u).reshape(ops.n_dofs, -1)

    def av_flux(self, w, d, eps):
        return self.flux(w) - np.asarray(eps)[:, None, None] * d.reshape(w.shape + (2,))


class ScalarAdvection(SystemDescriptor):
    """Linear advection ``u_t + a . grad u = 0`` (used for reconstruction checks)."""

    name = "advection"
    n_components = 1
    component_names = ("u",)

    def __init__(self, velocity=(1.0, 0.0)):
        self.velocity = np.asarray(velocity, dtype=float)

    def flux(self, q):
        return np.asarray(q, dtype=float)[..., None] * self.velocity

    def normal_jacobian(self, q, n):
        n = np.asarray(n, dtype=float)
        shape = np.broadcast_shapes(np.shape(q)[:-1], n.shape[:-1])
        return np.broadcast_to((n @ self.velocity)[..., None, None], shape + (1, 1)).copy()

    def max_speed(self, q, n=None):
        if n is None:
            return np.full(np.shape(q)[:-1], np.linalg.norm(self.velocity))
        nhat, _ = _unit(n)
        return np.abs(nhat @ self.velocity)

    def energy(self, q):
        return 0.5 * np.asarray(q, dtype=float)[..., 0] ** 2

    def energy_variables(self, q):
        return np.asarray(q, dtype=float)

    def av_rhs(self, ops, u):
        return ops.weak_grad_rhs(u).reshape(ops.n_dofs, -1)

    def av_flux(self, w, d, eps):
        return self.flux(w) - np.asarray(eps)[:, None, None] * d.reshape(w.shape + (2,))


def acoustics_descriptor(rho: float = 1.0, c: float = 1.0) -> Acoustics:
    return Acoustics(rho, c)


def maxwell_descriptor() -> Maxwell:
    return Maxwell()


def euler_descriptor(gamma: float = 1.4) -> Euler:
    return Euler(gamma)


def make_system(name: str, **params) -> SystemDescriptor:
    table = {"acoustics": Acoustics, "maxwell": Maxwell, "euler": Euler, "advection": ScalarAdvection}
    if name not in table:
        raise ValueError(f"unknown system {name!r}; expected one of {sorted(table)}")
    return table[name](**params)


# ---------------------------------------------------------------- entropy pair
@dataclass(frozen=True)
class EulerEntropyPair:
    """Concave entropy ``E = rho S`` with ``S = ln(p rho^-gamma)/(gamma-1)``.

    ``variables`` is the gradient of ``E`` with respect to the conserved
    state, ``inverse_hessian`` the matrix ``H = dq/dp`` (negative definite),
    ``flux_potential`` satisfies ``psi = f^T p - F`` and ``potential``
    satisfies ``phi = q . p - E``.
    """

    gamma: float = 1.4

    def _prim(self, q):
        return Euler(self.gamma).primitive(q)

    def specific_entropy(self, q):
        rho, _, _, p = self._prim(q)
        return np.log(p * rho ** (-self.gamma)) / (self.gamma - 1.0)

    def entropy(self, q):
        return np.asarray(q, dtype=float)[..., 0] * self.specific_entropy(q)

    def entropy_flux(self, q):
        rho, vx, vy, _ = self._prim(q)
        E = self.entropy(q)
        return np.stack([vx * E, vy * E], axis=-1)

    def variables(self, q):
        g = self.gamma
        rho, vx, vy, p = self._prim(q)
        s = np.log(p * rho ** (-g))
        b = rho / p
        return np.stack(
            [-(g - s) / (g - 1.0) + 0.5 * b * (vx**2 + vy**2), -b * vx, -b * vy, b],
            axis=-1,
        )

    def inverse_hessian(self, q):
        g = self.gamma
        q = np.asarray(q, dtype=float)
        rho, vx, vy, p = self._prim(q)
        E = q[..., 3]
        H = (E + p) / rho
        c2 = g * p / rho
        A0 = np.empty(q.shape + (4,))
        A0[..., 0, :] = np.stack([rho, rho * vx, rho * vy, E], axis=-1)
        A0[..., 1, :] = np.stack([rho * vx, rho * vx * vx + p, rho * vx * vy, rho * vx * H], axis=-1)
        A0[..., 2, :] = np.stack([rho * vy, rho * vx * vy, rho * vy * vy + p, rho * vy * H], axis=-1)
        A0[..., 3, :] = np.stack([E, rho * vx * H, rho * vy * H, rho * H * H - c2 * p / (g - 1.0)], axis=-1)
        return -A0

    def flux_potential(self, q):
        q = np.asarray(q, dtype=float)
        return -q[..., 1:3]

    def potential(self, q):
        return -np.asarray(q, dtype=float)[..., 0]


def euler_entropy_pair(gamma: float = 1.4) -> EulerEntropyPair:
    return EulerEntropyPair(gamma)


# ---------------------------------------------------------------- initial data
def _scalar_cg(f, cg: CGSpace) -> np.ndarray:
    return np.asarray(f(cg.dof_coords), dtype=float)


def init_from_scalar_potential(Z, ops: Operators) -> np.ndarray:
    """Curl-free DG vector field ``(n_cells, L, 2)``: primary gradient of interpolated ``Z``."""
    return ops.primary_grad(_scalar_cg(Z, ops.cg))


def init_from_vector_potential(A, ops: Operators) -> np.ndarray:
    """Divergence-free DG field ``(n_cells, L, 3)``: primary curl of interpolated ``A``.

    ``A`` returns three components; only the in-plane part of the result is
    constrained (``d_z = 0``).
    """
    vals = _scalar_cg(A, ops.cg)
    if vals.ndim == 1:
        vals = np.stack([np.zeros_like(vals), np.zeros_like(vals), vals], axis=1)
    return ops.primary_curl(vals)


def gaussian(x, sigma=0.05, amplitude=1.0, center=(0.0, 0.0)):
    x = np.asarray(x, dtype=float)
    r2 = (x[..., 0] - center[0]) ** 2 + (x[..., 1] - center[1]) ** 2
    return amplitude * np.exp(-0.5 * r2 / sigma**2)


def disc(x, radius=0.25, inside=1.0, outside=0.0):
    x = np.asarray(x, dtype=float)
    return np.where(np.hypot(x[..., 0], x[..., 1]) <= radius, inside, outside)


def isentropic_vortex(x, t=0.0, gamma: float = 1.4, strength: float = 5.0, center=(5.0, 5.0), variant="stationary"):
    """Stationary isentropic vortex in conserved variables.

    ``variant="published"`` adds unit background offsets to density and
    pressure; that variant is not an equilibrium and only serves comparison.
    """
    x = np.asarray(x, dtype=float)
    dx, dy = x[..., 0] - center[0], x[..., 1] - center[1]
    r2 = dx**2 + dy**2
    dT = -(gamma - 1.0) * strength**2 / (8.0 * gamma * np.pi**2) * np.exp(1.0 - r2)
    rho = (1.0 + dT) ** (1.0 / (gamma - 1.0))
    p = (1.0 + dT) ** (gamma / (gamma - 1.0))
    if variant == "published":
        rho, p = 1.0 + rho, 1.0 + p
    elif variant != "stationary":
        raise ValueError(f"unknown vortex variant {variant!r}")
    amp = strength / (2.0 * np.pi) * np.exp(0.5 * (1.0 - r2))
    return Euler(gamma).conserved(rho, -amp * dy, amp * dx, p)


SOD_INNER = (1.0, 0.0, 0.0, 1.0)  # rho, vx, vy, p
SOD_OUTER = (0.125, 0.0, 0.0, 0.1)


def sod_circular(x, gamma: float = 1.4, radius: float = 0.25, inner=SOD_INNER, outer=SOD_OUTER, width: float = 0.0):
    """Circular Riemann data; ``width > 0`` smooths the interface with a tanh profile."""
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[..., 0], x[..., 1])
    if width > 0:
        s = 0.5 * (1.0 - np.tanh((r - radius) / width))
    else:
        s = (r <= radius).astype(float)
    prim = [b + (a - b) * s for a, b in zip(inner, outer)]
    return Euler(gamma).conserved(*prim)


def mesh_spacing(mesh) -> float:
    """Edge length of a right isosceles cell with the mean cell area."""
    return float(np.sqrt(2.0 * mesh.areas.mean()))


def initial_condition(preset: str, ops: Operators, system: SystemDescriptor, **kw) -> np.ndarray:
    """DG coefficients of a named initial condition.

    Involution-constrained components come from potentials; all others are
    element-wise L2 projections.
    """
    from .spaces import l2_project_dg

    dg = ops.dg
    sigma = kw.get("sigma", 0.05)
    radius = kw.get("radius", 0.25)
    proj = lambda f: l2_project_dg(f, dg).coeffs  # noqa: E731
    nc, L = ops.mesh.n_cells, dg.n_local
    if preset == "acoustic-gaussian":
        u = np.zeros((nc, L, 3))
        u[..., 2] = proj(lambda x: gaussian(x, sigma))[..., 0]
    elif preset == "acoustic-explosion":
        u = np.zeros((nc, L, 3))
        Z = lambda x: np.sin(2 * np.pi * x[..., 0]) * np.sin(2 * np.pi * x[..., 1])  # noqa: E731
        u[..., :2] = system.rho * init_from_scalar_potential(Z, ops)
        u[..., 2] = proj(lambda x: disc(x, radius))[..., 0]
    elif preset == "maxwell-gaussian":
        u = np.zeros((nc, L, 6))
        u[..., 5] = proj(lambda x: gaussian(x, sigma))[..., 0]
    elif preset == "maxwell-explosion":
        u = np.zeros((nc, L, 6))
        A = lambda x: np.sin(2 * np.pi * x[..., 0]) * np.sin(2 * np.pi * x[..., 1])  # noqa: E731
        curl = init_from_vector_potential(A, ops)
        u[..., 0:2] = curl[..., :2]
        u[..., 3:5] = curl[..., :2]
        zc = proj(lambda x: disc(x, radius))[..., 0]
        u[..., 2] = zc
        u[..., 5] = zc
    elif preset == "vortex":
        g = system.gamma
        variant = kw.get("variant", "stationary")
        u = proj(lambda x: isentropic_vortex(x, 0.0, g, variant=variant))
    elif preset == "sod-circular":
        # a sharp jump makes the global projection undershoot into negative
        # density/pressure; the interface is smoothed over a fraction of a cell
        width = kw.get("interface_width", 0.5) * mesh_spacing(ops.mesh)
        u = proj(lambda x: sod_circular(x, system.gamma, radius, width=width))
    elif preset == "expression":
        u = _expression_initial_condition(ops, system, proj, kw)
    else:
        raise ValueError(f"unknown preset {preset!r}")
    return u


_EXPR_NAMES = {
    name: getattr(np, name)
    for name in ("sin", "cos", "tan", "exp", "log", "sqrt", "tanh", "sinh", "cosh", "arctan2", "hypot", "abs", "where")
}
_EXPR_NAMES["pi"] = np.pi


def expression_function(expr: str):
    """Vectorised ``f(x)`` from an arithmetic expression in ``x`` and ``y``."""
    code = compile(expr, "<expression>", "eval")
    for name in code.co_names:
        if name not in _EXPR_NAMES and name not in ("x", "y"):
            raise ValueError(f"unknown name {name!r} in expression {expr!r}")

    def f(pts):
        pts = np.asarray(pts, dtype=float)
        env = dict(_EXPR_NAMES, x=pts[..., 0], y=pts[..., 1])
        return np.broadcast_to(eval(code, {"__builtins__": {}}, env), pts.shape[:-1]).astype(float)

    return f


def _expression_initial_condition(ops, system, proj, kw):
    """Initial data from expressions; involution components come from potentials."""
    nc, L = ops.mesh.n_cells, ops.dg.n_local

    def field(key, default="0"):
        return proj(expression_function(str(kw.get(key, default))))[..., 0]

    if system.name == "acoustics":
        u = np.zeros((nc, L, 3))
        u[..., :2] = system.rho * init_from_scalar_potential(expression_function(str(kw.get("potential", "0"))), ops)
        u[..., 2] = field("p")
    elif system.name == "maxwell":
        u = np.zeros((nc, L, 6))
        for key, sl in (("potential_B", slice(0, 2)), ("potential_E", slice(3, 5))):
            u[..., sl] = init_from_vector_potential(expression_function(str(kw.get(key, "0"))), ops)[..., :2]
        u[..., 2] = field("Bz")
        u[..., 5] = field("Ez")
    elif system.name == "euler":
        fns = [expression_function(str(kw.get(k, d))) for k, d in (("rho", "1"), ("vx", "0"), ("vy", "0"), ("p", "1"))]
        u = proj(lambda x: system.conserved(*(f(x) for f in fns)))
    else:
        u = np.stack([field(nm) for nm in system.component_names], axis=-1)
    return u


def exact_solution(preset: str, system: SystemDescriptor, **kw):
    """Exact solution ``q(x, t)`` where one is known (stationary vortex)."""
    if preset == "vortex":
        variant = kw.get("variant", "stationary")
        return lambda x, t: isentropic_vortex(x, t, system.gamma, variant=variant)
    return None
