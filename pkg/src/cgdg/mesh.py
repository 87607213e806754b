"""Conforming triangular meshes with the geometric data used by the schemes.

A :class:`TriMesh` is immutable once built.  Derived quantities (edges,
adjacency, Jacobians, corner normals, ...) are computed lazily and cached.
Periodicity is handled by vertex identification: vertices on opposite sides
of the box are paired and collapsed into one *vertex class*, so that the
continuous space built on top of the mesh is genuinely single valued across
the periodic boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Raised for malformed, non-conforming or inverted meshes."""


class PointLocationError(ValueError):
    """Raised when a query point lies outside the triangulated domain."""


@dataclass(frozen=True)
class CornerNormalSet:
    """Weighted corner normals ``l_pc n_pc`` for every (cell, local vertex).

    ``corner[c, i]`` is the gradient of the area of cell ``c`` with respect to
    the position of its ``i``-th vertex.  ``minus``/``plus`` hold the two
    half-face contributions whose sum is ``corner``.
    """

    corner: np.ndarray
    minus: np.ndarray
    plus: np.ndarray


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    box: tuple[float, float, float, float]
    periodic_pairs: np.ndarray | None = None
    _bucket_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 2:
            raise MeshError("vertices must have shape (nv, 2)")
        if t.ndim != 2 or t.shape[1] != 3:
            raise MeshError("triangles must have shape (nc, 3)")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshError("triangle references a vertex index out of range")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "box", tuple(float(b) for b in self.box))
        if self.periodic_pairs is not None:
            pp = np.asarray(self.periodic_pairs, dtype=np.int64).reshape(-1, 2)
            if pp.size and (pp.min() < 0 or pp.max() >= len(v)):
                raise MeshError("periodic pair references a vertex out of range")
            pp.setflags(write=False)
            object.__setattr__(self, "periodic_pairs", pp)

    # ------------------------------------------------------------------ sizes
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.triangles)

    @property
    def periodic(self) -> bool:
        return self.periodic_pairs is not None and len(self.periodic_pairs) > 0

    @property
    def box_size(self) -> np.ndarray:
        x0, x1, y0, y1 = self.box
        return np.array([x1 - x0, y1 - y0])

    # --------------------------------------------------------------- geometry
    @cached_property
    def jacobians(self) -> np.ndarray:
        """Affine maps from the reference triangle, columns ``x1-x0, x2-x0``."""
        x = self.vertices[self.triangles]
        return np.stack([x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]], axis=2)

    @cached_property
    def det_jacobians(self) -> np.ndarray:
        j = self.jacobians
        return j[:, 0, 0] * j[:, 1, 1] - j[:, 0, 1] * j[:, 1, 0]

    @cached_property
    def inv_jacobians_t(self) -> np.ndarray:
        """``J^{-T}`` per cell, mapping reference gradients to physical ones."""
        j = self.jacobians
        det = self.det_jacobians
        inv_t = np.empty_like(j)
        inv_t[:, 0, 0] = j[:, 1, 1] / det
        inv_t[:, 0, 1] = -j[:, 1, 0] / det
        inv_t[:, 1, 0] = -j[:, 0, 1] / det
        inv_t[:, 1, 1] = j[:, 0, 0] / det
        return inv_t

    @cached_property
    def areas(self) -> np.ndarray:
        return 0.5 * self.det_jacobians

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def cell_h(self) -> np.ndarray:
        """Incircle diameter ``2 |T| / s`` with ``s`` the semiperimeter."""
        x = self.vertices[self.triangles]
        perim = sum(np.linalg.norm(x[:, (i + 1) % 3] - x[:, i], axis=1) for i in range(3))
        return 2.0 * self.areas / (0.5 * perim)

    @cached_property
    def corner_normals(self) -> CornerNormalSet:
        return corner_normals(self)

    # --------------------------------------------------------------- topology
    @cached_property
    def vertex_class(self) -> np.ndarray:
        """Representative id per vertex after periodic identification (0..n-1)."""
        parent = np.arange(self.n_vertices)

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        if self.periodic:
            for a, b in self.periodic_pairs:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
        roots = np.array([find(i) for i in range(self.n_vertices)])
        _, cls = np.unique(roots, return_inverse=True)
        return cls

    @property
    def n_vertex_classes(self) -> int:
        return int(self.vertex_class.max()) + 1 if self.n_vertices else 0

    @cached_property
    def _edge_data(self):
        t = self.triangles
        local = np.array([[0, 1], [1, 2], [2, 0]])
        pairs = t[:, local]  # (nc, 3, 2) directed along CCW boundary
        flat = pairs.reshape(-1, 2)
        key = np.sort(flat, axis=1)
        edges, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        inv = inv.reshape(-1)
        if np.any(counts > 2):
            bad = edges[np.argmax(counts > 2)]
            raise MeshError(f"non-conforming mesh: edge {tuple(bad)} has more than two incident cells")
        ne = len(edges)
        left = np.full(ne, -1, dtype=np.int64)
        right = np.full(ne, -1, dtype=np.int64)
        cell_ids = np.repeat(np.arange(self.n_cells), 3)
        # a cell traverses its boundary CCW, so it lies to the left of the
        # directed edge it traverses
        forward = flat[:, 0] < flat[:, 1]
        for k in range(len(flat)):
            e = inv[k]
            if forward[k]:
                if left[e] >= 0:
                    raise MeshError(f"non-conforming mesh: edge {tuple(edges[e])} traversed twice in one direction")
                left[e] = cell_ids[k]
            else:
                if right[e] >= 0:
                    raise MeshError(f"non-conforming mesh: edge {tuple(edges[e])} traversed twice in one direction")
                right[e] = cell_ids[k]
        cell_edges = inv.reshape(-1, 3)
        return edges, left, right, cell_edges

    @property
    def edges(self) -> np.ndarray:
        """Skeleton edges as sorted vertex pairs ``(low, high)``."""
        return self._edge_data[0]

    @property
    def edge_cells(self) -> np.ndarray:
        """``(ne, 2)``: cell left / right of the directed edge low->high (-1 if none)."""
        _, left, right, _ = self._edge_data
        return np.stack([left, right], axis=1)

    @property
    def cell_edges(self) -> np.ndarray:
        """Edge id of local edge ``i`` (vertices ``i, i+1``) of each cell."""
        return self._edge_data[3]

    @cached_property
    def boundary_edge_flags(self) -> np.ndarray:
        ec = self.edge_cells
        return (ec[:, 0] < 0) | (ec[:, 1] < 0)

    @cached_property
    def vertex_cells(self) -> list[np.ndarray]:
        """``C(p)``: cells touching each vertex class, sorted by id."""
        cls = self.vertex_class[self.triangles]
        order = np.argsort(cls.reshape(-1), kind="stable")
        cells = np.repeat(np.arange(self.n_cells), 3)[order]
        counts = np.bincount(cls.reshape(-1), minlength=self.n_vertex_classes)
        splits = np.cumsum(counts)[:-1]
        return [np.unique(c) for c in np.split(cells, splits)]

    def wrap(self, x) -> np.ndarray:
        """Map points on the upper/right periodic boundary onto the lower/left one."""
        x = np.array(x, dtype=float, copy=True)
        if not self.periodic:
            return x
        x0, x1, y0, y1 = self.box
        L = self.box_size
        for axis, (lo, hi) in enumerate(((x0, x1), (y0, y1))):
            on_hi = np.abs(x[..., axis] - hi) <= 1e-12 * L[axis]
            x[..., axis] = np.where(on_hi, lo, x[..., axis])
        return x

    @cached_property
    def edge_class(self) -> np.ndarray:
        """Edge id -> periodic edge id; paired boundary edges share a class."""
        ne = len(self.edges)
        cls = np.arange(ne)
        if self.periodic:
            bnd = np.flatnonzero(self.boundary_edge_flags)
            mids = self.wrap(self.vertices[self.edges[bnd]].mean(axis=1))
            scale = 1e-9 * float(self.box_size.max())
            seen: dict[tuple[int, int], int] = {}
            for e, m in zip(bnd, mids):
                key = (int(round(m[0] / scale)), int(round(m[1] / scale)))
                if key in seen:
                    cls[e] = seen[key]
                else:
                    seen[key] = e
        _, out = np.unique(cls, return_inverse=True)
        return out.reshape(-1)

    @cached_property
    def periodic_edge_cells(self) -> np.ndarray:
        """Cells on both sides of each periodic edge class (-1 on a true boundary)."""
        ecls = self.edge_class
        out = np.full((ecls.max() + 1, 2), -1, dtype=np.int64)
        for e, cells in enumerate(self.edge_cells):
            for c in cells:
                if c < 0:
                    continue
                row = out[ecls[e]]
                if row[0] < 0:
                    row[0] = c
                elif row[1] < 0:
                    row[1] = c
                else:
                    raise MeshError("periodic identification produced an edge with more than two cells")
        return out

    def check(self, area_rtol: float = 1e-12) -> None:
        """Validate orientation, conformity, tiling and the periodic map."""
        if np.any(self.areas <= 0):
            bad = int(np.argmax(self.areas <= 0))
            raise MeshError(f"cell {bad} has non-positive signed area")
        _ = self._edge_data
        box_area = float(np.prod(self.box_size))
        if abs(self.areas.sum() - box_area) > area_rtol * box_area:
            raise MeshError("cells do not tile the domain box")
        if self.periodic:
            self._check_periodic()

    def _check_periodic(self) -> None:
        L = self.box_size
        for a, b in self.periodic_pairs:
            d = np.abs(self.vertices[a] - self.vertices[b])
            ok = False
            for axis in (0, 1):
                other = 1 - axis
                if abs(d[axis] - L[axis]) <= 1e-12 * L[axis] and d[other] <= 1e-12 * L[other]:
                    ok = True
            if not ok:
                raise MeshError(f"periodic pair ({a}, {b}) is not a box translation")

    def periodic_partner(self) -> dict[int, int]:
        """The periodic map as a dict; each pair appears in both directions."""
        out: dict[int, int] = {}
        if self.periodic:
            for a, b in self.periodic_pairs:
                out[int(a)] = int(b)
                out[int(b)] = int(a)
        return out

    # ---------------------------------------------------------------- queries
    def barycentric(self, cells, x) -> np.ndarray:
        """Barycentric coordinates of points ``x`` w.r.t. ``cells`` (broadcast)."""
        cells = np.asarray(cells)
        x = np.asarray(x, dtype=float)
        x0 = self.vertices[self.triangles[cells, 0]]
        rs = np.einsum("...ji,...j->...i", self.inv_jacobians_t[cells], x - x0)
        return np.stack([1.0 - rs[..., 0] - rs[..., 1], rs[..., 0], rs[..., 1]], axis=-1)

    def reference_coords(self, cells, x) -> np.ndarray:
        """Reference coordinates ``(r, s)`` of ``x`` in the affine map of ``cells``."""
        cells = np.asarray(cells)
        x0 = self.vertices[self.triangles[cells, 0]]
        return np.einsum("...ji,...j->...i", self.inv_jacobians_t[cells], np.asarray(x, float) - x0)

    def to_physical(self, cells, rs) -> np.ndarray:
        cells = np.asarray(cells)
        x0 = self.vertices[self.triangles[cells, 0]]
        return x0 + np.einsum("...ij,...j->...i", self.jacobians[cells], np.asarray(rs, float))

    def _buckets(self):
        if "grid" not in self._bucket_cache:
            x0, x1, y0, y1 = self.box
            nb = max(1, int(np.sqrt(self.n_cells / 2)))
            xs = self.vertices[self.triangles]
            lo = xs.min(axis=1)
            hi = xs.max(axis=1)
            dx = (x1 - x0) / nb
            dy = (y1 - y0) / nb
            i0 = np.clip(((lo[:, 0] - x0) / dx).astype(int) - 1, 0, nb - 1)
            i1 = np.clip(((hi[:, 0] - x0) / dx).astype(int) + 1, 0, nb - 1)
            j0 = np.clip(((lo[:, 1] - y0) / dy).astype(int) - 1, 0, nb - 1)
            j1 = np.clip(((hi[:, 1] - y0) / dy).astype(int) + 1, 0, nb - 1)
            grid = [[[] for _ in range(nb)] for _ in range(nb)]
            for c in range(self.n_cells):
                for i in range(i0[c], i1[c] + 1):
                    for j in range(j0[c], j1[c] + 1):
                        grid[i][j].append(c)
            grid = [[np.array(g, dtype=np.int64) for g in row] for row in grid]
            self._bucket_cache["grid"] = (grid, nb, dx, dy)
        return self._bucket_cache["grid"]

    def locate_point(self, x, tol: float = 1e-12) -> tuple[int, np.ndarray]:
        """Cell containing ``x`` and the barycentric coordinates of ``x`` in it.

        Points on shared edges or vertices resolve to the lowest cell id.
        """
        x = np.asarray(x, dtype=float)
        x0, x1, y0, y1 = self.box
        span = max(x1 - x0, y1 - y0)
        if not (x0 - tol * span <= x[0] <= x1 + tol * span and y0 - tol * span <= x[1] <= y1 + tol * span):
            raise PointLocationError(f"point {tuple(x)} outside domain box {self.box}")
        grid, nb, dx, dy = self._buckets()
        i = min(max(int((x[0] - x0) / dx), 0), nb - 1)
        j = min(max(int((x[1] - y0) / dy), 0), nb - 1)
        cand = grid[i][j]
        if len(cand):
            lam = self.barycentric(cand, np.broadcast_to(x, (len(cand), 2)))
            inside = np.all(lam >= -tol, axis=1) & np.all(lam <= 1 + tol, axis=1)
            if np.any(inside):
                k = np.flatnonzero(inside)
                best = k[np.argmin(cand[k])]
                return int(cand[best]), lam[best]
        raise PointLocationError(f"point {tuple(x)} not inside any cell")

    def locate_points(self, xs, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
        xs = np.asarray(xs, dtype=float).reshape(-1, 2)
        cells = np.empty(len(xs), dtype=np.int64)
        lams = np.empty((len(xs), 3))
        for k, x in enumerate(xs):
            cells[k], lams[k] = self.locate_point(x, tol)
        return cells, lams

    def __eq__(self, other):
        if not isinstance(other, TriMesh):
            return NotImplemented
        pa = self.periodic_pairs if self.periodic else np.zeros((0, 2), dtype=np.int64)
        pb = other.periodic_pairs if other.periodic else np.zeros((0, 2), dtype=np.int64)
        return (
            self.box == other.box
            and np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.triangles, other.triangles)
            and np.array_equal(pa, pb)
        )

    __hash__ = object.__hash__


def corner_normals(mesh: TriMesh) -> CornerNormalSet:
    """Corner vectors ``l_pc n_pc = 1/2 (x_{p+} - x_{p-}) x e_z``."""
    x = mesh.vertices[mesh.triangles]  # (nc, 3, 2)
    xp = np.roll(x, -1, axis=1)
    xm = np.roll(x, 1, axis=1)

    def cross_ez(d):
        return np.stack([d[..., 1], -d[..., 0]], axis=-1)

    minus = cross_ez(0.5 * (x - xm))
    plus = cross_ez(0.5 * (xp - x))
    return CornerNormalSet(corner=minus + plus, minus=minus, plus=plus)


# ---------------------------------------------------------------- generation
def _criss_cross(nx: int, ny: int, box):
    x0, x1, y0, y1 = box
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.stack([X.ravel(), Y.ravel()], axis=1)

    def vid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if (i + j) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    return verts, np.array(tris, dtype=np.int64), vid


def _periodic_pairs(nx, ny, vid):
    pairs = []
    for j in range(ny + 1):
        pairs.append((vid(0, j), vid(nx, j)))
    for i in range(nx + 1):
        pairs.append((vid(i, 0), vid(i, ny)))
    return np.array(pairs, dtype=np.int64)


def _flip_pass(verts, tris, fixed_edges=frozenset()):
    """One sweep of Delaunay edge flips over interior edges (in place)."""
    flipped = 0
    local = np.array([[0, 1], [1, 2], [2, 0]])
    edge_map: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for c, t in enumerate(tris):
        for i, (a, b) in enumerate(local):
            key = (min(t[a], t[b]), max(t[a], t[b]))
            edge_map.setdefault(key, []).append((c, i))
    touched = set()
    for key, owners in edge_map.items():
        if len(owners) != 2 or key in fixed_edges:
            continue
        (c1, i1), (c2, i2) = owners
        if c1 in touched or c2 in touched:
            continue
        t1, t2 = tris[c1], tris[c2]
        p = t1[(i1 + 2) % 3]
        q = t2[(i2 + 2) % 3]
        a, b = t1[i1], t1[(i1 + 1) % 3]
        # opposite angles at p and q; flip if their sum exceeds pi
        def angle(o, u, v):
            du, dv = verts[u] - verts[o], verts[v] - verts[o]
            return np.arccos(np.clip(du @ dv / np.linalg.norm(du) / np.linalg.norm(dv), -1, 1))

        if angle(p, a, b) + angle(q, a, b) <= np.pi + 1e-12:
            continue
        n1 = (p, a, q)
        n2 = (p, q, b)

        def area(t):
            u, v, w = verts[list(t)]
            return 0.5 * ((v[0] - u[0]) * (w[1] - u[1]) - (v[1] - u[1]) * (w[0] - u[0]))

        if area(n1) <= 0 or area(n2) <= 0:
            continue
        tris[c1] = n1
        tris[c2] = n2
        touched.update((c1, c2))
        flipped += 1
    return flipped


def generate_square_mesh(
    nx: int,
    ny: int,
    box=(0.0, 1.0, 0.0, 1.0),
    perturb: float = 0.0,
    seed: int = 0,
    periodic: bool = True,
) -> TriMesh:
    """Jittered criss-cross triangulation of an axis aligned box.

    With ``perturb == 0`` the result is the structured pattern of alternating
    diagonals (``2 nx ny`` triangles).  Otherwise interior vertices are moved
    by up to ``perturb * h`` per coordinate and the mesh is locally
    re-triangulated by Delaunay edge flips.  Boundary vertices stay on the box
    so that the periodic pairing is exact.
    """
    if nx < 2 or ny < 2:
        raise MeshError("nx and ny must be at least 2")
    if not 0.0 <= perturb < 0.3:
        raise MeshError("perturb must lie in [0, 0.3)")
    box = tuple(float(b) for b in box)
    verts, tris, vid = _criss_cross(nx, ny, box)
    pairs = _periodic_pairs(nx, ny, vid) if periodic else None
    if perturb > 0:
        rng = np.random.default_rng(seed)
        h = min((box[1] - box[0]) / nx, (box[3] - box[2]) / ny)
        interior = np.array(
            [vid(i, j) for i in range(1, nx) for j in range(1, ny)], dtype=np.int64
        )
        base = verts.copy()
        scale = perturb
        for _attempt in range(100):
            jitter = rng.uniform(-1.0, 1.0, size=(len(interior), 2)) * scale * h
            trial = base.copy()
            trial[interior] += jitter
            x = trial[tris]
            det = (x[:, 1, 0] - x[:, 0, 0]) * (x[:, 2, 1] - x[:, 0, 1]) - (
                x[:, 1, 1] - x[:, 0, 1]
            ) * (x[:, 2, 0] - x[:, 0, 0])
            if np.all(det > 1e-3 * h * h):
                verts = trial
                break
            scale *= 0.8
        else:
            raise MeshError("could not find a valid jitter after 100 attempts")
        tris = tris.copy()
        for _ in range(3):
            if _flip_pass(verts, tris) == 0:
                break
    mesh = TriMesh(verts, tris, box, pairs)
    mesh.check()
    return mesh


# ----------------------------------------------------------------------- I/O
def write_mesh(mesh: TriMesh, path) -> None:
    """Write ``mesh`` in the plain-text ``trimesh 2`` format."""
    lines = ["trimesh 2", f"{mesh.n_vertices} {mesh.n_cells} {len(mesh.edges)}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"{a} {b} {c}" for a, b, c in mesh.triangles]
    ec = mesh.edge_cells
    lines += [f"{e[0]} {e[1]} {c[0]} {c[1]}" for e, c in zip(mesh.edges, ec)]
    x0, x1, y0, y1 = mesh.box
    lines.append(f"box {x0:.17g} {x1:.17g} {y0:.17g} {y1:.17g}")
    if mesh.periodic:
        lines.append(f"periodic {len(mesh.periodic_pairs)}")
        lines += [f"{a} {b}" for a, b in mesh.periodic_pairs]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> TriMesh:
    """Read a mesh written by :func:`write_mesh` and validate it."""
    raw = [ln.strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in raw if ln and not ln.startswith("#")]
    if not lines or lines[0].split() != ["trimesh", "2"]:
        raise MeshError("malformed header: expected 'trimesh 2'")
    try:
        nv, nc, ne = (int(s) for s in lines[1].split())
    except (IndexError, ValueError) as exc:
        raise MeshError("malformed header: expected 'nv nc ne'") from exc
    pos = 2
    try:
        verts = np.array([[float(s) for s in lines[pos + k].split()] for k in range(nv)])
        pos += nv
        tris = np.array([[int(s) for s in lines[pos + k].split()] for k in range(nc)], dtype=np.int64)
        pos += nc
        edges = np.array([[int(s) for s in lines[pos + k].split()] for k in range(ne)], dtype=np.int64)
        pos += ne
    except (IndexError, ValueError) as exc:
        raise MeshError("truncated or malformed mesh body") from exc
    if verts.shape != (nv, 2) or tris.shape != (nc, 3):
        raise MeshError("wrong number of columns in vertex or triangle block")
    if tris.size and (tris.min() < 0 or tris.max() >= nv):
        raise MeshError("triangle references a vertex index out of range")
    box = (verts[:, 0].min(), verts[:, 0].max(), verts[:, 1].min(), verts[:, 1].max())
    pairs = None
    while pos < len(lines):
        head = lines[pos].split()
        if head[0] == "box":
            box = tuple(float(s) for s in head[1:5])
            pos += 1
        elif head[0] == "periodic":
            npairs = int(head[1])
            pairs = np.array(
                [[int(s) for s in lines[pos + 1 + k].split()] for k in range(npairs)], dtype=np.int64
            ).reshape(-1, 2)
            pos += 1 + npairs
        else:
            raise MeshError(f"unexpected section '{head[0]}'")
    mesh = TriMesh(verts, tris, box, pairs)
    mesh.check()
    if ne and len(mesh.edges) != ne:
        raise MeshError(f"edge count mismatch: file lists {ne}, connectivity implies {len(mesh.edges)}")
    if ne and edges.size and not np.array_equal(np.sort(edges[:, :2], axis=1), edges[:, :2]):
        raise MeshError("edge block must list vertex pairs as (low, high)")
    return mesh
