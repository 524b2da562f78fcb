"""Triangle meshes, radial projection and transfer of coefficient noise.

Only the noise is synthesised from coefficients; it is added to the
original vertex positions, so detailed meshes are not smoothed by the band
limit and frame 0 is the input mesh bit for bit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .diffusion import ShapeTrajectory, sample_frames

__all__ = [
    "DuplicateAngleWarning",
    "MeshFormatError",
    "SphericalParameterization",
    "TriangleMesh",
    "icosahedron",
    "icosphere",
    "load_mesh",
    "mesh_stats",
    "radial_project",
    "save_mesh",
    "torus",
    "transfer_process",
]


class MeshFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None, path=None):
        self.line = line
        self.path = path
        loc = ""
        if path is not None:
            loc += f"{path}"
        if line is not None:
            loc += f":{line}" if loc else f"line {line}"
        super().__init__(f"{loc}: {message}" if loc else message)


class DuplicateAngleWarning(UserWarning):
    """Distinct vertices landed on (almost) the same direction from the center."""


class TriangleMesh:
    __slots__ = ("vertices", "faces")

    def __init__(self, vertices, faces):
        vertices = np.array(vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(vertices)):
            raise ValueError("vertex coordinates must be finite")
        if faces.size:
            if faces.min() < 0 or faces.max() >= len(vertices):
                raise ValueError("face index out of range")
            degenerate = (faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2])
            if degenerate.any():
                raise ValueError(f"degenerate face at position {int(np.argmax(degenerate))}")
        self.vertices = vertices
        self.faces = faces

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def translated(self, offset) -> TriangleMesh:
        return TriangleMesh(self.vertices + np.asarray(offset, dtype=np.float64), self.faces.copy())

    def __repr__(self) -> str:
        return f"TriangleMesh(n_vertices={self.n_vertices}, n_faces={self.n_faces})"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_mesh(mesh: TriangleMesh, path) -> None:
    """Write an ASCII OBJ with 17 significant digits per coordinate."""
    lines = [f"v {_fmt(x)} {_fmt(y)} {_fmt(z)}\n" for x, y, z in mesh.vertices]
    lines += [f"f {i + 1} {j + 1} {k + 1}\n" for i, j, k in mesh.faces]
    Path(path).write_text("".join(lines), encoding="ascii")


def _obj_index(token: str, n_vertices: int, lineno: int, path) -> int:
    head = token.split("/", 1)[0]
    try:
        idx = int(head)
    except ValueError:
        raise MeshFormatError(f"bad face index {token!r}", lineno, path) from None
    if idx == 0:
        raise MeshFormatError("OBJ face indices are 1-based; got 0", lineno, path)
    resolved = idx - 1 if idx > 0 else n_vertices + idx
    if not 0 <= resolved < n_vertices:
        raise MeshFormatError(f"face index {idx} out of range ({n_vertices} vertices so far)", lineno, path)
    return resolved


def _load_obj(text: str, path) -> TriangleMesh:
    vertices, faces = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tag, *rest = line.split()
        if tag == "v":
            if len(rest) < 3:
                raise MeshFormatError("vertex needs three coordinates", lineno, path)
            try:
                vertices.append([float(t) for t in rest[:3]])
            except ValueError:
                raise MeshFormatError(f"bad vertex coordinate in {line!r}", lineno, path) from None
        elif tag == "f":
            if len(rest) != 3:
                raise MeshFormatError(f"face has {len(rest)} vertices; only triangles are supported", lineno, path)
            face = [_obj_index(t, len(vertices), lineno, path) for t in rest]
            if len(set(face)) != 3:
                raise MeshFormatError("degenerate face (repeated vertex)", lineno, path)
            faces.append(face)
    return TriangleMesh(vertices, faces)


def _load_ply(text: str, path) -> TriangleMesh:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise MeshFormatError("missing 'ply' magic", 1, path)
    elements = []  # (name, count, [property names], first line of list props)
    lineno = 1
    header_end = None
    for lineno in range(2, len(lines) + 1):
        parts = lines[lineno - 1].split()
        if not parts:
            continue
        if parts[0] == "format":
            if len(parts) < 2 or parts[1] != "ascii":
                raise MeshFormatError("only ascii PLY is supported", lineno, path)
        elif parts[0] == "element":
            if len(parts) != 3:
                raise MeshFormatError("malformed element line", lineno, path)
            elements.append([parts[1], int(parts[2]), []])
        elif parts[0] == "property":
            if not elements:
                raise MeshFormatError("property before element", lineno, path)
            elements[-1][2].append(parts[-1] if parts[1] != "list" else ("list", parts[-1]))
        elif parts[0] == "end_header":
            header_end = lineno
            break
    if header_end is None:
        raise MeshFormatError("missing end_header", lineno, path)
    vertices, faces = [], []
    cursor = header_end
    for name, count, props in elements:
        for _ in range(count):
            cursor += 1
            if cursor > len(lines):
                raise MeshFormatError(f"unexpected end of file in element {name!r}", cursor, path)
            tokens = lines[cursor - 1].split()
            if name == "vertex":
                try:
                    record = dict(zip(props, (float(t) for t in tokens)))
                    vertices.append([record["x"], record["y"], record["z"]])
                except (KeyError, ValueError):
                    raise MeshFormatError("vertex record lacks x, y, z", cursor, path) from None
            elif name == "face":
                try:
                    n = int(tokens[0])
                    idx = [int(t) for t in tokens[1 : 1 + n]]
                except (IndexError, ValueError):
                    raise MeshFormatError("malformed face record", cursor, path) from None
                if n != 3 or len(idx) != 3:
                    raise MeshFormatError(f"face has {n} vertices; only triangles are supported", cursor, path)
                if any(not 0 <= i < len(vertices) for i in idx):
                    raise MeshFormatError("face index out of range", cursor, path)
                if len(set(idx)) != 3:
                    raise MeshFormatError("degenerate face (repeated vertex)", cursor, path)
                faces.append(idx)
    return TriangleMesh(vertices, faces)


def load_mesh(path) -> TriangleMesh:
    """Read a triangulated OBJ, or an ASCII PLY."""
    path = Path(path)
    text = path.read_text(encoding="ascii", errors="replace")
    if path.suffix.lower() == ".ply" or text.startswith("ply"):
        return _load_ply(text, path)
    return _load_obj(text, path)


@dataclass(frozen=True)
class SphericalParameterization:
    center: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    radius: np.ndarray

    def directions(self) -> np.ndarray:
        st = np.sin(self.theta)
        return np.stack([st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)], axis=1)

    def reconstruct(self) -> np.ndarray:
        return self.center + self.radius[:, None] * self.directions()


def radial_project(mesh: TriangleMesh, center=None, tol: float = 1e-9) -> SphericalParameterization:
    """Angular coordinates of every vertex seen from ``center`` (default: vertex centroid).

    Warns with :class:`DuplicateAngleWarning` when distinct vertices share a
    direction within ``tol`` (any non star-shaped input, e.g. a torus).
    """
    if mesh.n_vertices == 0:
        raise ValueError("cannot project an empty mesh")
    c = mesh.vertices.mean(axis=0) if center is None else np.asarray(center, dtype=np.float64)
    d = mesh.vertices - c
    r = np.linalg.norm(d, axis=1)
    if np.any(r == 0.0):
        raise ValueError(f"vertex {int(np.argmin(r))} coincides with the projection center")
    theta = np.arccos(np.clip(d[:, 2] / r, -1.0, 1.0))
    phi = np.mod(np.arctan2(d[:, 1], d[:, 0]), 2.0 * math.pi)
    param = SphericalParameterization(center=c, theta=theta, phi=phi, radius=r)
    pairs = cKDTree(d / r[:, None]).query_pairs(tol)
    if pairs:
        warnings.warn(
            f"{len(pairs)} vertex pair(s) share angular coordinates within {tol:g}; "
            "the radial projection is not injective",
            DuplicateAngleWarning,
            stacklevel=2,
        )
    return param


def transfer_process(mesh: TriangleMesh, param: SphericalParameterization, traj: ShapeTrajectory) -> list[TriangleMesh]:
    """Add each frame's noise, evaluated at the vertex angles, to the vertices."""
    disp = sample_frames(traj, (param.theta, param.phi), noise_only=True)
    out = [TriangleMesh(mesh.vertices.copy(), mesh.faces.copy())]
    for k in range(1, disp.shape[0]):
        out.append(TriangleMesh(mesh.vertices + disp[k], mesh.faces.copy()))
    return out


def mesh_stats(mesh: TriangleMesh) -> dict:
    if mesh.n_vertices == 0:
        raise ValueError("mesh is empty")
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    stats = {
        "n_vertices": mesh.n_vertices,
        "n_faces": mesh.n_faces,
        "bbox_min": lo.tolist(),
        "bbox_max": hi.tolist(),
        "mean_edge_length": math.nan,
    }
    if mesh.n_faces:
        edges = np.concatenate([mesh.faces[:, [0, 1]], mesh.faces[:, [1, 2]], mesh.faces[:, [2, 0]]])
        edges = np.unique(np.sort(edges, axis=1), axis=0)
        lengths = np.linalg.norm(mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1)
        stats["mean_edge_length"] = float(lengths.mean())
    return stats


# -- fixtures and presets -------------------------------------------------


def icosahedron() -> TriangleMesh:
    """Regular icosahedron inscribed in the unit sphere."""
    g = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, g, 0], [1, g, 0], [-1, -g, 0], [1, -g, 0],
            [0, -1, g], [0, 1, g], [0, -1, -g], [0, 1, -g],
            [g, 0, -1], [g, 0, 1], [-g, 0, -1], [-g, 0, 1],
        ],
        dtype=np.float64,
    )
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    f = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    return TriangleMesh(v, f)


def icosphere(subdivisions: int = 3) -> TriangleMesh:
    """Unit sphere from a subdivided icosahedron."""
    mesh = icosahedron()
    verts = [tuple(v) for v in mesh.vertices]
    faces = mesh.faces.tolist()
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (i, j) if i < j else (j, i)
            if key not in cache:
                m = (np.asarray(verts[i]) + np.asarray(verts[j])) / 2.0
                verts.append(tuple(m / np.linalg.norm(m)))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new_faces
    return TriangleMesh(np.array(verts), faces)


def torus(major: float = 1.0, minor: float = 0.4, n_major: int = 32, n_minor: int = 16) -> TriangleMesh:
    """Torus around the z axis. Even ``n_minor`` puts vertices on both equator rings."""
    u = 2.0 * np.pi * np.arange(n_major) / n_major
    v = 2.0 * np.pi * np.arange(n_minor) / n_minor
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ring = major + minor * np.cos(vv)
    verts = np.stack([ring * np.cos(uu), ring * np.sin(uu), minor * np.sin(vv)], axis=-1).reshape(-1, 3)
    faces = []
    for i in range(n_major):
        for j in range(n_minor):
            a = i * n_minor + j
            b = ((i + 1) % n_major) * n_minor + j
            c = ((i + 1) % n_major) * n_minor + (j + 1) % n_minor
            d = i * n_minor + (j + 1) % n_minor
            faces += [[a, b, c], [a, c, d]]
    return TriangleMesh(verts, faces)
