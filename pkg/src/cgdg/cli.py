"""Command-line front end: ``cgdg run | verify | convergence | meshgen``.

``CGDG_MAX_WORKERS`` caps the number of BLAS/OpenMP threads; it must be set
before numpy is loaded, which is why the environment is touched first.
"""

from __future__ import annotations

import os

_cap = os.environ.get("CGDG_MAX_WORKERS")
if _cap:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _cap)

import argparse  # noqa: E402
import csv  # noqa: E402
import json  # noqa: E402
import logging  # noqa: E402
import sys  # noqa: E402
from importlib import resources  # noqa: E402
from pathlib import Path  # noqa: E402

import numpy as np  # noqa: E402

from .config import ConfigError, load_config  # noqa: E402

log = logging.getLogger("cgdg")

PRESET_NAMES = (
    "acoustic-gaussian",
    "acoustic-explosion",
    "maxwell-gaussian",
    "maxwell-explosion",
    "vortex",
    "sod-circular",
)


# ---------------------------------------------------------------- output
def _lattice(n: int):
    """Equispaced reference points and the ``n^2`` sub-triangles connecting them."""
    idx = {}
    pts = []
    for j in range(n + 1):
        for i in range(n + 1 - j):
            idx[i, j] = len(pts)
            pts.append((i / n, j / n))
    tris = []
    for j in range(n):
        for i in range(n - j):
            tris.append((idx[i, j], idx[i + 1, j], idx[i, j + 1]))
            if i + j < n - 1:
                tris.append((idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]))
    return np.array(pts), np.array(tris, dtype=np.int64)


def write_vtk(path, ops, u, names, title="cgdg solution") -> None:
    """Legacy ASCII VTK unstructured grid; each cell split into ``N^2`` linear triangles."""
    mesh = ops.mesh
    n = max(ops.degree, 1)
    rs, sub = _lattice(n)
    phi = ops.dg.basis.eval(rs)  # (np, L)
    nc, npc = mesh.n_cells, len(rs)
    pts = mesh.to_physical(np.arange(nc)[:, None], rs[None]).reshape(-1, 2)
    vals = np.einsum("pc,kcm->kpm", phi, u).reshape(nc * npc, -1)
    cells = (sub[None] + npc * np.arange(nc)[:, None, None]).reshape(-1, 3)
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID", f"POINTS {len(pts)} double"]
    out += [f"{x:.17g} {y:.17g} 0" for x, y in pts]
    out.append(f"CELLS {len(cells)} {4 * len(cells)}")
    out += [f"3 {a} {b} {c}" for a, b, c in cells]
    out.append(f"CELL_TYPES {len(cells)}")
    out += ["5"] * len(cells)
    out.append(f"POINT_DATA {len(pts)}")
    for m, name in enumerate(names):
        out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        out += [f"{v:.17g}" for v in vals[:, m]]
    Path(path).write_text("\n".join(out) + "\n")


def _write_table(path, header, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_residual_table(path, record, names) -> None:
    """Per observation point / circle: max residual per component over all stages."""
    locs = sorted({k[: k.index("_")] for k in record.maxima if k.startswith(("point", "circle"))})
    rows = [[loc] + [repr(record.maxima.get(f"{loc}_{nm}", float("nan"))) for nm in names] for loc in locs]
    _write_table(path, ["location"] + list(names), rows)


def _preset_path(name: str) -> Path:
    return Path(str(resources.files("cgdg") / "presets" / f"{name}.cfg"))


def resolve_config_path(arg: str) -> Path:
    p = Path(arg)
    if p.exists() or arg not in PRESET_NAMES:
        return p
    return _preset_path(arg)


# ---------------------------------------------------------------- commands
def cmd_run(args) -> int:
    from . import diagnostics as dg
    from .solver import run

    try:
        cfg = load_config(resolve_config_path(args.config), args.set or ())
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.output or cfg.output_dir)
    manifest = {"config": cfg.to_dict(), "status": "dry-run" if args.dry_run else "pending", "outputs": []}
    if args.dry_run:
        text = json.dumps(manifest, indent=2, sort_keys=True)
        print(text)
        return 0
    out.mkdir(parents=True, exist_ok=True)
    try:
        result = run(cfg)
    except Exception as exc:  # runtime failure: keep a diagnostics snapshot
        manifest["status"] = "failed"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        rec = getattr(exc, "record", None)
        if rec is not None:
            files = rec.write_csv(out / "diagnostics")
            manifest["outputs"] += [str(f.relative_to(out)) for f in files]
        snap = getattr(exc, "snapshot", None)
        if isinstance(snap, dict) and "u" in snap:
            np.save(out / "snapshot.npy", snap["u"])
            manifest["outputs"].append("snapshot.npy")
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        print(f"run failed: {manifest['error']}", file=sys.stderr)
        return 1
    from .systems import make_system

    system = make_system(cfg.system, **cfg.system_params)
    names = system.component_names
    files = result.record.write_csv(out / "diagnostics")
    manifest["outputs"] += [str(f.relative_to(out)) for f in files]
    if cfg.points or cfg.circles:
        write_residual_table(out / "residuals.csv", result.record, names)
        manifest["outputs"].append("residuals.csv")
    if cfg.vtk:
        write_vtk(out / "solution.vtk", result.ops, result.u, names)
        manifest["outputs"].append("solution.vtk")
    if cfg.cut_y is not None and cfg.system == "euler" and cfg.preset == "sod-circular":
        prm = cfg.preset_params
        profile = dg.radial_reference_euler(radius=prm.get("radius", 0.25), gamma=system.gamma, t_end=result.t)
        l1, xs, q, rho_ref = dg.density_cut_l1(result.ops, system, result.u, profile, y=cfg.cut_y)
        _write_table(
            out / "density_cut.csv", ["x", "rho", "rho_reference"], [[repr(a), repr(b), repr(c)] for a, b, c in zip(xs, q[:, 0], rho_ref)]
        )
        manifest["outputs"].append("density_cut.csv")
        manifest["density_cut_l1"] = l1
    manifest["status"] = "ok"
    manifest["summary"] = {k: (float(v) if np.isscalar(v) else v) for k, v in result.record.summary.items()}
    manifest["maxima"] = {k: float(v) for k, v in sorted(result.record.maxima.items())}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"done: t={result.t:.6g} after {result.steps} steps; outputs in {out}")
    return 0


def cmd_verify(args) -> int:
    from .diagnostics import verification_suite

    results = verification_suite(quick=args.quick, seed=args.seed)
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        note = f"  ({r.note})" if r.note else ""
        print(f"{status}  {r.name:<{width}}  {r.value:.3e}  tol {r.tol:.0e}{note}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def cmd_convergence(args) -> int:
    from .diagnostics import convergence_study, write_convergence_csv

    if args.preset != "vortex":
        print("only the vortex preset has an exact solution", file=sys.stderr)
        return 2
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for N in args.degrees:
        rows = convergence_study(
            N, args.meshes, t_end=args.t_end, steps=args.steps, perturb=args.perturb, seed=args.seed, mass_solver=args.mass_solver
        )
        for which in ("u", "w"):
            path = out / f"convergence_{which}_N{N}.csv"
            write_convergence_csv(rows, path, which)
            print(path.read_text().rstrip())
    return 0


def cmd_meshgen(args) -> int:
    from .mesh import MeshError, generate_square_mesh, write_mesh

    try:
        mesh = generate_square_mesh(args.nx, args.ny, tuple(args.box), args.perturb, args.seed, periodic=not args.open)
    except MeshError as exc:
        print(f"mesh error: {exc}", file=sys.stderr)
        return 2
    write_mesh(mesh, args.output)
    print(f"wrote {mesh.n_cells} triangles, {mesh.n_vertices} vertices to {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cgdg", description="Structure-preserving CG-DG solver")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a simulation from a config file or preset name")
    p.add_argument("config", help=f"config path or one of: {', '.join(PRESET_NAMES)}")
    p.add_argument("--dry-run", action="store_true", help="validate and print the resolved config only")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config entry")
    p.add_argument("-o", "--output", help="output directory (overrides [output] dir)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="run the discrete-calculus invariant suite")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("convergence", help="L2 convergence tables for the isentropic vortex")
    p.add_argument("--preset", default="vortex")
    p.add_argument("--degrees", type=int, nargs="+", default=[1, 2, 3])
    p.add_argument("--meshes", type=int, nargs="+", default=[10, 20, 40])
    p.add_argument("--t-end", type=float, default=0.2)
    p.add_argument("--steps", type=int, default=None, help="0 gives the projection baseline")
    p.add_argument("--perturb", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mass-solver", choices=("cg", "direct"), default="direct")
    p.add_argument("-o", "--output", default="convergence")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("meshgen", help="write a jittered periodic triangulation")
    p.add_argument("--nx", type=int, required=True)
    p.add_argument("--ny", type=int, required=True)
    p.add_argument("--box", type=float, nargs=4, default=[0.0, 1.0, 0.0, 1.0], metavar=("X0", "X1", "Y0", "Y1"))
    p.add_argument("--perturb", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--open", action="store_true", help="no periodic identification")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_meshgen)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
