"""Run configuration: a flat INI-style file with sections.

Example::

    [mesh]
    nx = 20
    ny = 20
    box = -0.5 0.5 -0.5 0.5
    perturb = 0.15
    seed = 0

    [system]
    name = euler
    gamma = 1.4

    [scheme]
    degree = 3
    av = yes

    [time]
    t_end = 0.1

    [initial]
    preset = sod-circular

    [diagnostics]
    points = 0.1 0.2; -0.3 0.05
    circles = -0.3 -0.005 0.015
    every = 10

    [output]
    dir = out/sod

Unknown sections or keys are errors; messages carry the line number.
"""

from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path

PRESETS = (
    "acoustic-gaussian",
    "acoustic-explosion",
    "maxwell-gaussian",
    "maxwell-explosion",
    "vortex",
    "sod-circular",
    "expression",
)
SYSTEMS = ("acoustics", "maxwell", "euler", "advection")
SCHEMES = ("cgdg", "fv0-entropy")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, path=None):
        where = f"{path}:" if path else ""
        where += f"{line}: " if line else (" " if path else "")
        super().__init__(f"{where}{message}")
        self.line = line


@dataclass
class RunConfig:
    # mesh
    mesh_file: str | None = None
    nx: int = 20
    ny: int = 20
    box: tuple[float, float, float, float] = (-0.5, 0.5, -0.5, 0.5)
    perturb: float = 0.15
    seed: int = 0
    # system
    system: str = "acoustics"
    system_params: dict = field(default_factory=dict)
    # scheme
    scheme: str = "cgdg"
    degree: int = 1
    reconstruction: str = "l2"
    av: bool = False
    chi: float = 1.0
    mass_solver: str = "cg"
    tol: float = 1e-12
    # time
    integrator: str = "auto"
    cfl: float = 0.4
    t_end: float = 0.1
    dt: float | None = None
    max_steps: int | None = None
    # initial data
    preset: str = "acoustic-gaussian"
    preset_params: dict = field(default_factory=dict)
    # diagnostics
    points: list = field(default_factory=list)
    circles: list = field(default_factory=list)
    every: int = 1
    cut_y: float | None = None
    # output
    output_dir: str = "out"
    vtk: bool = True

    def validate(self, lines: dict | None = None, path=None) -> "RunConfig":
        lines = lines or {}

        def fail(msg, key=None):
            raise ConfigError(msg, lines.get(key), path)

        if not 0 <= self.degree <= 4:
            fail(f"degree must be in 0..4, got {self.degree}", "degree")
        if self.system not in SYSTEMS:
            fail(f"unknown system {self.system!r}", "name")
        if self.preset not in PRESETS:
            fail(f"unknown preset {self.preset!r}", "preset")
        if self.scheme not in SCHEMES:
            fail(f"unknown scheme {self.scheme!r}", "type")
        if self.scheme == "fv0-entropy" and (self.system != "euler" or self.degree != 0):
            fail("scheme fv0-entropy needs system euler and degree 0", "type")
        if self.reconstruction not in ("l2", "nscheme"):
            fail(f"unknown reconstruction {self.reconstruction!r}", "reconstruction")
        allowed = ("auto", "euler", "ssp-rk2") if self.scheme == "fv0-entropy" else ("auto", "ssp-rk3", "rk4", "euler")
        if self.integrator not in allowed:
            fail(f"integrator {self.integrator!r} not available for scheme {self.scheme}", "integrator")
        if self.mass_solver not in ("cg", "direct"):
            fail(f"unknown mass solver {self.mass_solver!r}", "mass_solver")
        if self.mesh_file is None and (self.nx < 2 or self.ny < 2):
            fail("nx and ny must be at least 2", "nx")
        if self.t_end < 0:
            fail("t_end must be non-negative", "t_end")
        if self.cfl <= 0:
            fail("cfl must be positive", "cfl")
        if self.dt is not None and self.dt <= 0:
            fail("dt must be positive", "dt")
        if self.every < 1:
            fail("every must be at least 1", "every")
        x0, x1, y0, y1 = self.box
        if not (x1 > x0 and y1 > y0):
            fail("box must be x0 x1 y0 y1 with x1 > x0, y1 > y0", "box")
        for pt in self.points:
            if not (x0 < pt[0] < x1 and y0 < pt[1] < y1):
                fail(f"observation point {tuple(pt)} outside the domain", "points")
        for c, r in self.circles:
            if r <= 0 or not (x0 < c[0] - r and c[0] + r < x1 and y0 < c[1] - r and c[1] + r < y1):
                fail(f"circle at {tuple(c)} with radius {r} must lie strictly inside the domain", "circles")
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["box"] = list(self.box)
        d["points"] = [list(p) for p in self.points]
        d["circles"] = [[list(c), r] for c, r in self.circles]
        return d


_SECTIONS = {
    "mesh": {"file", "nx", "ny", "box", "perturb", "seed"},
    "system": None,  # name plus free parameters
    "scheme": {"type", "degree", "reconstruction", "av", "chi", "mass_solver", "tol"},
    "time": {"integrator", "cfl", "t_end", "dt", "max_steps"},
    "initial": None,  # preset plus free parameters
    "diagnostics": {"points", "circles", "every", "cut_y"},
    "output": {"dir", "vtk"},
}


def _line_numbers(text: str) -> dict:
    """``key -> line`` (first occurrence, 1-based) and ``[section] -> line``."""
    out = {}
    section = None
    for i, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            out.setdefault(f"[{section}]", i)
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m:
            key = m.group(1).strip().lower()
            out.setdefault(key, i)
            out.setdefault((section, key), i)
    return out


def _number(text):
    try:
        v = float(text)
    except ValueError:
        return text
    return int(v) if re.fullmatch(r"[+-]?\d+", text.strip()) else v


def _floats(text, n=None, what="value"):
    vals = [float(v) for v in text.replace(",", " ").split()]
    if n is not None and len(vals) != n:
        raise ValueError(f"{what} needs {n} numbers, got {len(vals)}")
    return vals


def parse_config(text: str, path=None, overrides=()) -> RunConfig:
    """Parse and validate configuration text.

    ``overrides`` are ``section.key=value`` strings applied after the file.
    """
    lines = _line_numbers(text)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        cp.read_string(text, source=str(path or "<config>"))
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if getattr(exc, "errors", None) else None
        raise ConfigError(f"cannot parse line: {exc.errors[0][1].strip()}", line, path) from exc
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None), path) from exc

    cfg = RunConfig()
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]", lines.get(f"[{section}]"), path)
        allowed = _SECTIONS[section]
        for key, value in cp.items(section):
            line = lines.get((section, key))
            try:
                _apply(cfg, section, key, value.strip(), allowed)
            except ConfigError as exc:
                raise ConfigError(str(exc), line, path) from None
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}", line, path) from None
    for item in overrides:
        target, sep, value = item.partition("=")
        section, dot, key = target.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        if section not in _SECTIONS:
            raise ConfigError(f"override {item!r}: unknown section [{section}]")
        try:
            _apply(cfg, section, key.strip().lower(), value.strip(), _SECTIONS[section])
        except ValueError as exc:
            raise ConfigError(f"override {item!r}: {exc}") from None
    return cfg.validate(lines, path)


def _bool(v: str) -> bool:
    s = v.lower()
    if s in ("1", "yes", "true", "on"):
        return True
    if s in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"expected a boolean, got {v!r}")


def _optional(v: str, cast):
    return None if v.lower() in ("", "none") else cast(v)


def _apply(cfg: RunConfig, section: str, key: str, v: str, allowed):
    if allowed is not None and key not in allowed:
        raise ConfigError(f"unknown key {key!r} in [{section}]")
    if section == "mesh":
        if key == "file":
            cfg.mesh_file = _optional(v, str)
        elif key == "box":
            cfg.box = tuple(_floats(v, 4, "box"))
        elif key in ("nx", "ny", "seed"):
            setattr(cfg, key, int(v))
        else:
            cfg.perturb = float(v)
    elif section == "system":
        if key == "name":
            cfg.system = v
        else:
            cfg.system_params[key] = _number(v)
    elif section == "scheme":
        if key == "type":
            cfg.scheme = v
        elif key == "degree":
            cfg.degree = int(v)
        elif key == "av":
            cfg.av = _bool(v)
        elif key in ("chi", "tol"):
            setattr(cfg, key, float(v))
        else:
            setattr(cfg, key, v)
    elif section == "time":
        if key == "integrator":
            cfg.integrator = v
        elif key == "dt":
            cfg.dt = _optional(v, float)
        elif key == "max_steps":
            cfg.max_steps = _optional(v, int)
        else:
            setattr(cfg, key, float(v))
    elif section == "initial":
        if key == "preset":
            cfg.preset = v
        else:
            cfg.preset_params[key] = _number(v)
    elif section == "diagnostics":
        if key == "points":
            cfg.points = [tuple(_floats(p, 2, "point")) for p in v.split(";") if p.strip()]
        elif key == "circles":
            cs = [_floats(c, 3, "circle") for c in v.split(";") if c.strip()]
            cfg.circles = [((c[0], c[1]), c[2]) for c in cs]
        elif key == "every":
            cfg.every = int(v)
        else:
            cfg.cut_y = _optional(v, float)
    elif section == "output":
        if key == "dir":
            cfg.output_dir = v
        else:
            cfg.vtk = _bool(v)


def load_config(path, overrides=()) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, p) from exc
    return parse_config(text, p, overrides)
