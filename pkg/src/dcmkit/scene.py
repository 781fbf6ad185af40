"""Scene description: convex planar facets with electromagnetic materials.

A scene is a set of convex planar polygons ("facets"), each referencing a
material with relative permittivity and conductivity.  Scenes load from a
line-oriented text format::

    # comment
    [material] name=concrete eps_r=5.31 sigma=0.13
    [facet] material=concrete v=0,0,0;10,0,0;10,10,0;0,10,0

All lengths are in meters.  `#` starts a comment anywhere on a line; blank
lines are ignored.  Facet vertices are listed in boundary order and must be
coplanar within COPLANAR_TOL.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

COPLANAR_TOL = 1e-6    # m, max vertex distance from the fitted facet plane
INTERSECT_TOL = 1e-9   # m, point-on-surface slack used by the tracer

# concrete around 5-6 GHz, used when a facet does not name a material
DEFAULT_MATERIAL_NAME = "concrete"
DEFAULT_EPS_R = 5.31
DEFAULT_SIGMA = 0.13


class SceneError(ValueError):
    """Malformed scene document; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class Material:
    """Homogeneous dielectric with conductivity, both frequency-independent."""

    name: str
    eps_r: float
    sigma: float

    def __post_init__(self):
        if not self.name:
            raise ValueError("material name must be non-empty")
        if self.eps_r < 1.0:
            raise ValueError(f"eps_r must be >= 1, got {self.eps_r}")
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


def default_material() -> Material:
    return Material(DEFAULT_MATERIAL_NAME, DEFAULT_EPS_R, DEFAULT_SIGMA)


class Facet:
    """Convex planar polygon with a material.

    Derived plane data (unit normal, offset with n.x = d, area) is computed
    at construction.  Vertices may wind either way; the normal follows the
    winding (Newell's method).
    """

    __slots__ = ("vertices", "material", "normal", "offset", "area", "centroid")

    def __init__(self, vertices, material: Material):
        verts = np.asarray(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 3 or verts.shape[0] < 3:
            raise ValueError("facet needs at least 3 vertices of 3 coordinates")
        n = _newell_normal(verts)
        area = 0.5 * float(np.linalg.norm(n))
        if area <= 0.0:
            raise ValueError("degenerate facet: zero area")
        unit_n = n / np.linalg.norm(n)
        centroid = verts.mean(axis=0)
        dist = (verts - centroid) @ unit_n
        if np.max(np.abs(dist)) > COPLANAR_TOL:
            raise ValueError(
                f"vertices deviate {np.max(np.abs(dist)):.3g} m from a common plane"
            )
        _check_convex(verts, unit_n)
        self.vertices = verts
        self.material = material
        self.normal = unit_n
        self.offset = float(unit_n @ centroid)
        self.area = area
        self.centroid = centroid

    def __repr__(self):
        return f"Facet({len(self.vertices)} vertices, material={self.material.name!r})"


def _newell_normal(verts: np.ndarray) -> np.ndarray:
    nxt = np.roll(verts, -1, axis=0)
    return np.cross(verts, nxt).sum(axis=0)


def _check_convex(verts: np.ndarray, unit_n: np.ndarray) -> None:
    m = len(verts)
    edges = np.roll(verts, -1, axis=0) - verts
    scale = np.linalg.norm(edges, axis=1)
    if np.any(scale == 0.0):
        raise ValueError("degenerate facet: repeated consecutive vertices")
    for i in range(m):
        turn = np.cross(edges[i], edges[(i + 1) % m]) @ unit_n
        # allow collinear runs, reject reflex corners
        if turn < -1e-9 * scale[i] * scale[(i + 1) % m]:
            raise ValueError("facet polygon is not convex")


@dataclass(frozen=True)
class Scene:
    """Immutable facet collection.  Safe to share across worker processes."""

    facets: tuple[Facet, ...]
    materials: dict[str, Material] = field(default_factory=dict)
    source_hash: str = ""

    @property
    def n_facets(self) -> int:
        return len(self.facets)


def scene_text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def _parse_fields(body: str, lineno: int) -> dict[str, str]:
    fields = {}
    for token in body.split():
        if "=" not in token:
            raise SceneError(f"expected key=value, got {token!r}", lineno)
        key, _, value = token.partition("=")
        if not key or not value:
            raise SceneError(f"expected key=value, got {token!r}", lineno)
        if key in fields:
            raise SceneError(f"duplicate field {key!r}", lineno)
        fields[key] = value
    return fields


def _parse_float(fields: dict, key: str, lineno: int) -> float:
    if key not in fields:
        raise SceneError(f"missing field {key!r}", lineno)
    try:
        return float(fields[key])
    except ValueError:
        raise SceneError(f"field {key!r} is not a number: {fields[key]!r}", lineno) from None


def loads_scene(text: str) -> Scene:
    """Parse a scene document from a string.  See the module docstring."""
    materials: dict[str, Material] = {}
    facets: list[Facet] = []
    pending: list[tuple[int, str, dict]] = []  # facet lines, resolved after materials

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not line.startswith("["):
            raise SceneError(f"expected a [material] or [facet] section, got {line!r}", lineno)
        head, _, body = line.partition("]")
        directive = head[1:].strip()
        if directive == "material":
            fields = _parse_fields(body, lineno)
            name = fields.get("name")
            if not name:
                raise SceneError("material needs a name", lineno)
            if name in materials:
                raise SceneError(f"duplicate material {name!r}", lineno)
            try:
                materials[name] = Material(
                    name,
                    _parse_float(fields, "eps_r", lineno),
                    _parse_float(fields, "sigma", lineno),
                )
            except ValueError as exc:
                raise SceneError(str(exc), lineno) from None
        elif directive == "facet":
            fields = _parse_fields(body, lineno)
            if "v" not in fields:
                raise SceneError("facet needs a vertex list v=x,y,z;...", lineno)
            pending.append((lineno, fields.get("material", ""), fields))
        else:
            raise SceneError(f"unknown section {directive!r}", lineno)

    for lineno, mat_name, fields in pending:
        if mat_name:
            if mat_name not in materials:
                raise SceneError(f"unknown material {mat_name!r}", lineno)
            mat = materials[mat_name]
        else:
            mat = materials.setdefault(DEFAULT_MATERIAL_NAME, default_material())
        verts = []
        for vtx in fields["v"].split(";"):
            parts = vtx.split(",")
            if len(parts) != 3:
                raise SceneError(f"vertex needs 3 coordinates, got {vtx!r}", lineno)
            try:
                verts.append([float(p) for p in parts])
            except ValueError:
                raise SceneError(f"bad vertex coordinate in {vtx!r}", lineno) from None
        if len(verts) < 3:
            raise SceneError("facet needs at least 3 vertices", lineno)
        try:
            facets.append(Facet(verts, mat))
        except ValueError as exc:
            raise SceneError(str(exc), lineno) from None

    return Scene(tuple(facets), materials, scene_text_hash(text))


def load_scene(path) -> Scene:
    """Load a scene document from a file path."""
    with open(path, "r", encoding="utf-8") as fh:
        return loads_scene(fh.read())
