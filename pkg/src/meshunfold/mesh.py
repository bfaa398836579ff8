"""Indexed triangle meshes: construction, validation, OBJ/OFF I/O, and
angle diagnostics (dihedral angles, vertex angle defects).

The :class:`TriMesh` is the core data structure of the package.  It is
immutable after construction and precomputes the adjacency and per-element
geometry that the unfolding, overlap and evolution code needs, so a single
mesh can be shared by many concurrent unfoldings.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

# Faces with area at or below this (squared length units) have unreliable
# cross-product normals and are rejected.  Assumes coordinates of order 1.
EPS_AREA = 1e-12

# Coplanarity / flat-fan tolerance in radians, well above double noise for
# coordinates of order 1.
EPS_ANGLE = 1e-9


class MeshError(Exception):
    """Base class for mesh construction and query errors."""


class ParseError(MeshError):
    """Mesh file is malformed."""


class NonTriangleFace(MeshError):
    """A face in the input has more or fewer than 3 vertices."""


class NonManifold(MeshError):
    """An edge is shared by three or more faces."""


class InconsistentWinding(MeshError):
    """Two faces traverse a shared edge in the same direction."""


class DegenerateFace(MeshError):
    """A face has repeated vertices or (near-)zero area."""


class NotClosed(MeshError):
    """Mesh was asserted closed (genus 0) but is not."""


class BoundaryEdge(MeshError):
    """Dihedral angle requested for an edge with a single incident face."""


class IsolatedVertex(MeshError):
    """Angle defect requested for a vertex with no incident face."""


@dataclass(frozen=True)
class EdgeGeometry:
    """Geometry of a single mesh edge.

    ``dihedral`` is the exterior bending angle between the two incident face
    planes in radians, in [0, pi); 0 means the faces are coplanar.  ``sign``
    is +1 for convex edges, -1 for reflex edges and 0 for flat edges.
    """

    edge: int
    length: float
    dihedral: float
    sign: int


@dataclass(frozen=True)
class VertexDefect:
    """Angle defect of a vertex: 2*pi minus the incident corner angles
    (pi minus, for boundary vertices).  Negative exactly when the vertex is
    hyperbolic (saddle-like)."""

    vertex: int
    defect: float
    boundary: bool


class TriMesh:
    """Indexed triangle mesh with adjacency.

    Parameters
    ----------
    vertices : array_like, shape (V, 3)
        Vertex coordinates, float.
    faces : array_like, shape (F, 3)
        Vertex index triples with globally consistent winding.

    Raises
    ------
    DegenerateFace, NonManifold, InconsistentWinding, MeshError
        If the input violates the mesh invariants: every face must have
        three distinct valid vertex indices and area above ``EPS_AREA``,
        every edge must have one or two incident faces, and the two faces
        of an interior edge must traverse it in opposite directions.

    Notes
    -----
    Instances are immutable after construction; all derived quantities are
    cached lazily and safe to read from multiple threads.
    """

    def __init__(self, vertices, faces):
        v = np.ascontiguousarray(np.asarray(vertices, dtype=np.float64))
        f = np.ascontiguousarray(np.asarray(faces, dtype=np.int64))
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError(f"vertices must be (V, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise MeshError(f"faces must be (F, 3), got {f.shape}")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise MeshError("face references a vertex index out of range")
        dup = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 2] == f[:, 0])
        if dup.any():
            raise DegenerateFace(f"face {int(np.flatnonzero(dup)[0])} repeats a vertex")

        self.vertices = v
        self.faces = f
        self.vertices.setflags(write=False)
        self.faces.setflags(write=False)
        self._build_edges()

        small = self.face_areas <= EPS_AREA
        if small.any():
            i = int(np.flatnonzero(small)[0])
            raise DegenerateFace(f"face {i} has area {self.face_areas[i]:g} <= {EPS_AREA:g}")

    def _build_edges(self):
        f = self.faces
        # Directed edges in winding order; slot k of a face is (v_k, v_{k+1}).
        directed = np.stack([f, np.roll(f, -1, axis=1)], axis=2).reshape(-1, 2)
        lo = directed.min(axis=1)
        hi = directed.max(axis=1)
        keys = lo * len(self.vertices) + hi
        uniq, first, inverse, counts = np.unique(
            keys, return_index=True, return_inverse=True, return_counts=True
        )
        if counts.max(initial=0) > 2:
            e = int(np.argmax(counts))
            raise NonManifold(
                f"edge ({lo[first[e]]}, {hi[first[e]]}) has {counts[e]} incident faces"
            )
        # Edge ids ordered by first appearance in the face list.
        order = np.argsort(first, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        edge_of_slot = rank[inverse]

        self.edges = np.stack([lo[first[order]], hi[first[order]]], axis=1)
        self.face_edges = edge_of_slot.reshape(-1, 3)

        E = len(self.edges)
        edge_faces = np.full((E, 2), -1, dtype=np.int64)
        forward = np.zeros(E, dtype=bool)  # saw the (lo, hi) direction
        backward = np.zeros(E, dtype=bool)
        face_idx = np.repeat(np.arange(len(f)), 3)
        for slot in range(len(directed)):
            e = edge_of_slot[slot]
            is_forward = directed[slot, 0] == self.edges[e, 0]
            if is_forward:
                if forward[e]:
                    raise InconsistentWinding(
                        f"edge {tuple(self.edges[e])} traversed twice in the same direction"
                    )
                forward[e] = True
            else:
                if backward[e]:
                    raise InconsistentWinding(
                        f"edge {tuple(self.edges[e])} traversed twice in the same direction"
                    )
                backward[e] = True
            if edge_faces[e, 0] < 0:
                edge_faces[e, 0] = face_idx[slot]
            else:
                edge_faces[e, 1] = face_idx[slot]
        self.edge_faces = edge_faces
        self.edge_faces.setflags(write=False)
        self.edges.setflags(write=False)
        self.face_edges.setflags(write=False)

    # -- basic counts ------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces

    @cached_property
    def boundary_edge_mask(self) -> np.ndarray:
        return self.edge_faces[:, 1] < 0

    @cached_property
    def interior_edges(self) -> np.ndarray:
        """Ids of edges with exactly two incident faces."""
        return np.flatnonzero(~self.boundary_edge_mask)

    @property
    def is_closed(self) -> bool:
        return not self.boundary_edge_mask.any()

    def assert_closed_genus0(self):
        """Raise :class:`NotClosed` unless the mesh is closed with V-E+F = 2."""
        if not self.is_closed:
            n = int(self.boundary_edge_mask.sum())
            raise NotClosed(f"mesh has {n} boundary edges")
        if self.euler_characteristic != 2:
            raise NotClosed(f"Euler characteristic {self.euler_characteristic} != 2")

    # -- adjacency ---------------------------------------------------------

    @cached_property
    def vertex_edges(self) -> list[np.ndarray]:
        """Per-vertex incident edge ids, ascending."""
        out = [[] for _ in range(self.n_vertices)]
        for e, (a, b) in enumerate(self.edges):
            out[a].append(e)
            out[b].append(e)
        return [np.array(lst, dtype=np.int64) for lst in out]

    @cached_property
    def vertex_faces(self) -> list[np.ndarray]:
        """Per-vertex incident face ids, ascending."""
        out = [[] for _ in range(self.n_vertices)]
        for i, face in enumerate(self.faces):
            for vtx in face:
                out[vtx].append(i)
        return [np.array(lst, dtype=np.int64) for lst in out]

    # -- per-element geometry ----------------------------------------------

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 0]] - self.vertices[self.edges[:, 1]]
        return np.linalg.norm(d, axis=1)

    @cached_property
    def _face_cross(self) -> np.ndarray:
        a = self.vertices[self.faces[:, 0]]
        b = self.vertices[self.faces[:, 1]]
        c = self.vertices[self.faces[:, 2]]
        return np.cross(b - a, c - a)

    @cached_property
    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self._face_cross, axis=1)

    @cached_property
    def face_normals(self) -> np.ndarray:
        return self._face_cross / (2.0 * self.face_areas)[:, None]

    @property
    def surface_area(self) -> float:
        return float(self.face_areas.sum())

    @cached_property
    def corner_angles(self) -> np.ndarray:
        """Interior angle at each face corner, shape (F, 3)."""
        p = self.vertices[self.faces]  # (F, 3, 3)
        out = np.empty((self.n_faces, 3))
        for k in range(3):
            u = p[:, (k + 1) % 3] - p[:, k]
            w = p[:, (k + 2) % 3] - p[:, k]
            cross = np.linalg.norm(np.cross(u, w), axis=1)
            dot = np.einsum("ij,ij->i", u, w)
            out[:, k] = np.arctan2(cross, dot)
        return out

    @cached_property
    def vertex_angle_sums(self) -> np.ndarray:
        sums = np.zeros(self.n_vertices)
        np.add.at(sums, self.faces.ravel(), self.corner_angles.ravel())
        return sums

    @cached_property
    def boundary_vertex_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.edges[self.boundary_edge_mask].ravel()] = True
        return mask

    @cached_property
    def vertex_defects(self) -> np.ndarray:
        """Angle defect per vertex: 2*pi - angle sum (pi - for boundary)."""
        full = np.where(self.boundary_vertex_mask, np.pi, 2.0 * np.pi)
        return full - self.vertex_angle_sums

    @cached_property
    def dihedral_angles(self) -> np.ndarray:
        """Exterior bending angle per edge in [0, pi); NaN on boundary edges."""
        out = np.full(self.n_edges, np.nan)
        interior = self.interior_edges
        n1 = self.face_normals[self.edge_faces[interior, 0]]
        n2 = self.face_normals[self.edge_faces[interior, 1]]
        cross = np.linalg.norm(np.cross(n1, n2), axis=1)
        dot = np.einsum("ij,ij->i", n1, n2)
        out[interior] = np.arctan2(cross, dot)
        return out

    @cached_property
    def dihedral_signs(self) -> np.ndarray:
        """+1 convex, -1 reflex, 0 flat or boundary, per edge."""
        signs = np.zeros(self.n_edges, dtype=np.int8)
        for e in self.interior_edges:
            theta = self.dihedral_angles[e]
            if theta <= EPS_ANGLE:
                continue
            f0, f1 = self.edge_faces[e]
            opp = self._opposite_vertex(f1, e)
            side = float(
                np.dot(self.face_normals[f0], self.vertices[opp] - self.vertices[self.edges[e, 0]])
            )
            signs[e] = 1 if side < 0 else -1
        return signs

    def _opposite_vertex(self, face: int, edge: int) -> int:
        a, b = self.edges[edge]
        for vtx in self.faces[face]:
            if vtx != a and vtx != b:
                return int(vtx)
        raise MeshError(f"edge {edge} not part of face {face}")

    @cached_property
    def _unfold_coords(self) -> np.ndarray:
        """Planar coordinates of each face's third vertex, per directed edge.

        Entry [f, k] holds (x, y) of vertex k+2 of face f relative to the
        directed edge (v_k -> v_{k+1}): x along the edge, y > 0 to its left.
        """
        p = self.vertices[self.faces]
        out = np.empty((self.n_faces, 3, 2))
        for k in range(3):
            a = p[:, k]
            b = p[:, (k + 1) % 3]
            c = p[:, (k + 2) % 3]
            ab = b - a
            length = np.linalg.norm(ab, axis=1)
            x = np.einsum("ij,ij->i", c - a, ab) / length
            out[:, k, 0] = x
            out[:, k, 1] = 2.0 * self.face_areas / length
        return out

    @cached_property
    def mesh_hash(self) -> str:
        """SHA-256 over the canonical little-endian vertex and face buffers."""
        h = hashlib.sha256()
        h.update(b"trimesh-v1")
        h.update(np.array([self.n_vertices, self.n_faces], dtype="<i8").tobytes())
        h.update(self.vertices.astype("<f8").tobytes())
        h.update(self.faces.astype("<i8").tobytes())
        return h.hexdigest()


# -- diagnostics operations --------------------------------------------------


def dihedral_angle(mesh: TriMesh, edge: int) -> EdgeGeometry:
    """Dihedral geometry of an interior edge.

    The angle is the exterior bending angle between the incident face
    planes: 0 for coplanar faces, pi/2 for a cube edge.  Raises
    :class:`BoundaryEdge` for edges with a single incident face.
    """
    if mesh.edge_faces[edge, 1] < 0:
        raise BoundaryEdge(f"edge {edge} is a boundary edge")
    return EdgeGeometry(
        edge=int(edge),
        length=float(mesh.edge_lengths[edge]),
        dihedral=float(mesh.dihedral_angles[edge]),
        sign=int(mesh.dihedral_signs[edge]),
    )


def angle_defect(mesh: TriMesh, vertex: int) -> VertexDefect:
    """Angle defect at a vertex; raises :class:`IsolatedVertex` if the vertex
    has no incident face."""
    if len(mesh.vertex_faces[vertex]) == 0:
        raise IsolatedVertex(f"vertex {vertex} has no incident faces")
    return VertexDefect(
        vertex=int(vertex),
        defect=float(mesh.vertex_defects[vertex]),
        boundary=bool(mesh.boundary_vertex_mask[vertex]),
    )


# -- file I/O -----------------------------------------------------------------


def _detect_format(path: Path, format: str | None) -> str:
    if format is not None:
        fmt = format.lower()
    else:
        fmt = path.suffix.lower().lstrip(".")
    if fmt not in ("obj", "off"):
        raise ParseError(f"unsupported mesh format {fmt!r} for {path}")
    return fmt


def load_mesh(path, format: str | None = None, normalize: bool = False) -> TriMesh:
    """Load a triangle mesh from an OBJ or OFF file.

    Only ``v``/``f`` records of OBJ files are used (``vn``/``vt`` are
    ignored).  All faces must be triangles; quads raise
    :class:`NonTriangleFace` rather than being auto-triangulated, because the
    triangulation choice changes unfoldings and must be explicit upstream.

    With ``normalize=True``, coordinates are shifted and uniformly scaled so
    the bounding box fits in the unit cube.  This is never done silently:
    area measurements need true scale.
    """
    path = Path(path)
    fmt = _detect_format(path, format)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if fmt == "obj":
        vertices, faces = _parse_obj(text, path)
    else:
        vertices, faces = _parse_off(text, path)
    if normalize:
        vertices = np.asarray(vertices, dtype=np.float64)
        lo = vertices.min(axis=0)
        extent = (vertices.max(axis=0) - lo).max()
        if extent > 0:
            vertices = (vertices - lo) / extent
    return TriMesh(vertices, faces)


def _parse_obj(text: str, path: Path):
    vertices = []
    faces = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        tag = tokens[0]
        if tag == "v":
            if len(tokens) < 4:
                raise ParseError(f"{path}:{lineno}: vertex needs 3 coordinates")
            try:
                vertices.append([float(t) for t in tokens[1:4]])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad vertex coordinate") from exc
        elif tag == "f":
            refs = tokens[1:]
            if len(refs) != 3:
                raise NonTriangleFace(
                    f"{path}:{lineno}: face has {len(refs)} vertices (triangles only)"
                )
            idx = []
            for ref in refs:
                part = ref.split("/")[0]
                try:
                    i = int(part)
                except ValueError as exc:
                    raise ParseError(f"{path}:{lineno}: bad face index {ref!r}") from exc
                if i < 0:
                    i = len(vertices) + 1 + i  # OBJ negative indices are relative
                if not (1 <= i <= len(vertices)):
                    raise ParseError(f"{path}:{lineno}: face index {i} out of range")
                idx.append(i - 1)
            faces.append(idx)
        # vn, vt, s, o, g, usemtl, mtllib and friends are ignored
    if not vertices or not faces:
        raise ParseError(f"{path}: no triangles found")
    return vertices, faces


def _parse_off(text: str, path: Path):
    tokens = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    if not tokens or tokens[0] != "OFF":
        raise ParseError(f"{path}: missing OFF header")
    pos = 1
    try:
        nv, nf = int(tokens[pos]), int(tokens[pos + 1])
        pos += 3  # the edge count is ignored
        vertices = []
        for _ in range(nv):
            vertices.append([float(t) for t in tokens[pos : pos + 3]])
            pos += 3
        faces = []
        for _ in range(nf):
            count = int(tokens[pos])
            pos += 1
            if count != 3:
                raise NonTriangleFace(f"{path}: face has {count} vertices (triangles only)")
            faces.append([int(t) for t in tokens[pos : pos + 3]])
            pos += 3
    except (ValueError, IndexError) as exc:
        raise ParseError(f"{path}: truncated or malformed OFF data") from exc
    if not vertices or not faces:
        raise ParseError(f"{path}: no triangles found")
    return vertices, faces


def write_mesh(mesh: TriMesh, path, format: str | None = None) -> None:
    """Write a mesh as OBJ or OFF (chosen by extension unless given).

    Coordinates are written with shortest round-trip formatting, so
    ``load_mesh(write_mesh(m))`` reproduces them exactly.
    """
    path = Path(path)
    fmt = _detect_format(path, format)
    lines = []
    if fmt == "obj":
        for x, y, z in mesh.vertices:
            lines.append(f"v {x!r} {y!r} {z!r}")
        for a, b, c in mesh.faces:
            lines.append(f"f {a + 1} {b + 1} {c + 1}")
    else:
        lines.append("OFF")
        lines.append(f"{mesh.n_vertices} {mesh.n_faces} {mesh.n_edges}")
        for x, y, z in mesh.vertices:
            lines.append(f"{x!r} {y!r} {z!r}")
        for a, b, c in mesh.faces:
            lines.append(f"3 {a} {b} {c}")
    path.write_text("\n".join(lines) + "\n")
