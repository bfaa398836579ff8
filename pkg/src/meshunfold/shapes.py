"""Parametric test geometry: geodesic spheres at prescribed facet counts,
plus synthetic non-convex shapes used by the segmentation pipeline, and the
sphere area-excess metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .mesh import TriMesh


class SphereMode(str, Enum):
    """Inscribed: vertices on the sphere.  Circumscribed: the polyhedron
    contains the sphere, scaled so its nearest face planes are tangent."""

    INSCRIBED = "inscribed"
    CIRCUMSCRIBED = "circumscribed"


@dataclass(frozen=True)
class SphereSpec:
    """Request for a geodesic sphere approximation.

    The generator realizes the achievable facet count nearest
    ``target_facets`` (icosahedral frequency subdivision yields 20*nu^2
    facets: 20, 80, 180, 320, 500, ...).
    """

    target_facets: int = 80
    radius: float = 1.0
    mode: SphereMode = SphereMode.CIRCUMSCRIBED


def icosahedron() -> TriMesh:
    """Regular icosahedron with unit circumradius, outward winding."""
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    norm = math.sqrt(1.0 + phi * phi)
    a, b = 1.0 / norm, phi / norm
    vertices = np.array(
        [
            (-a, b, 0), (a, b, 0), (-a, -b, 0), (a, -b, 0),
            (0, -a, b), (0, a, b), (0, -a, -b), (0, a, -b),
            (b, 0, -a), (b, 0, a), (-b, 0, -a), (-b, 0, a),
        ]
    )
    faces = np.array(
        [
            (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
            (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
            (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
            (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
        ]
    )
    return TriMesh(vertices, faces)


def _subdivision_frequency(target_facets: int) -> int:
    """Frequency nu whose facet count 20*nu^2 is nearest the target."""
    if target_facets < 4:
        raise ValueError("target facet count must be >= 4")
    nu = max(1, round(math.sqrt(target_facets / 20.0)))
    return min((nu, nu + 1), key=lambda n: abs(20 * n * n - target_facets))


def _subdivide_projected(base: TriMesh, nu: int) -> tuple[np.ndarray, np.ndarray]:
    """Split each face into nu^2 triangles on the barycentric lattice and
    project every vertex onto the unit sphere.

    Lattice points are deduplicated structurally (by owning corner, edge or
    face), never by coordinate rounding.
    """
    verts = [p for p in base.vertices]
    edge_points: dict[tuple[int, int, int], int] = {}

    def edge_point(u: int, w: int, i: int) -> int:
        # i-th of nu-1 interior points from the lower-id endpoint
        if u > w:
            u, w, i = w, u, nu - i
        key = (u, w, i)
        if key not in edge_points:
            p = (base.vertices[u] * (nu - i) + base.vertices[w] * i) / nu
            edge_points[key] = len(verts)
            verts.append(p / np.linalg.norm(p))
        return edge_points[key]

    faces = []
    for (va, vb, vc) in base.faces:
        A, B, C = base.vertices[va], base.vertices[vb], base.vertices[vc]
        grid = {}
        for i in range(nu + 1):
            for j in range(nu + 1 - i):
                k = nu - i - j  # barycentric (k, i, j) on corners (A, B, C)
                if k == nu:
                    grid[(i, j)] = int(va)
                elif i == nu:
                    grid[(i, j)] = int(vb)
                elif j == nu:
                    grid[(i, j)] = int(vc)
                elif j == 0:
                    grid[(i, j)] = edge_point(int(va), int(vb), i)
                elif i == 0:
                    grid[(i, j)] = edge_point(int(va), int(vc), j)
                elif k == 0:
                    grid[(i, j)] = edge_point(int(vb), int(vc), j)
                else:
                    p = (A * k + B * i + C * j) / nu
                    grid[(i, j)] = len(verts)
                    verts.append(p / np.linalg.norm(p))
        for i in range(nu):
            for j in range(nu - i):
                faces.append((grid[(i, j)], grid[(i + 1, j)], grid[(i, j + 1)]))
                if i + j < nu - 1:
                    faces.append((grid[(i + 1, j)], grid[(i + 1, j + 1)], grid[(i, j + 1)]))
    return np.array(verts), np.array(faces, dtype=np.int64)


def _face_plane_distances(mesh: TriMesh) -> np.ndarray:
    a = mesh.vertices[mesh.faces[:, 0]]
    return np.abs(np.einsum("ij,ij->i", mesh.face_normals, a))


def generate_sphere(spec: SphereSpec, seed: int = 0) -> TriMesh:
    """Geodesic sphere approximation at the achievable facet count nearest
    ``spec.target_facets``.

    Inscribed mode puts every vertex at distance ``radius`` from the center.
    Circumscribed mode scales the same mesh so it contains the sphere with
    its nearest face planes tangent to it (minimum plane distance equal to
    ``radius``); for subdivided geodesics the remaining planes necessarily
    sit slightly farther out, since simultaneous tangency of all faces is
    over-constrained.

    ``seed`` is accepted for interface stability; the construction is
    deterministic and does not use it.
    """
    del seed
    nu = _subdivision_frequency(spec.target_facets)
    base = icosahedron()
    if nu == 1:
        vertices, faces = base.vertices.copy(), base.faces.copy()
    else:
        vertices, faces = _subdivide_projected(base, nu)
    mesh = TriMesh(vertices, faces)
    if spec.mode == SphereMode.INSCRIBED:
        scale = spec.radius
    else:
        scale = spec.radius / _face_plane_distances(mesh).min()
    return TriMesh(mesh.vertices * scale, mesh.faces)


def area_excess(mesh: TriMesh, r: float) -> float:
    """Signed surface-area excess over a perfect sphere of radius ``r``,
    in percent: ``100 * (A - 4*pi*r^2) / (4*pi*r^2)``."""
    sphere = 4.0 * math.pi * r * r
    return 100.0 * (mesh.surface_area - sphere) / sphere


# -- synthetic non-convex shapes ----------------------------------------------


def generate_bumpy_sphere(
    target_facets: int = 1280,
    amplitude: float = 0.25,
    lobes: int = 3,
    radius: float = 1.0,
) -> TriMesh:
    """Closed genus-0 sphere with a smooth radial perturbation, producing
    saddle (negative-defect) regions.  Stand-in for scanned statue-class
    meshes in segmentation tests and demos."""
    base = generate_sphere(SphereSpec(target_facets, 1.0, SphereMode.INSCRIBED))
    v = base.vertices
    theta = np.arccos(np.clip(v[:, 2], -1.0, 1.0))
    phi = np.arctan2(v[:, 1], v[:, 0])
    rho = 1.0 + amplitude * np.sin(lobes * theta) * np.cos(lobes * phi)
    return TriMesh(v * (radius * rho)[:, None], base.faces)


def generate_dumbbell(
    segments: int = 16,
    rings: int = 17,
    neck: float = 0.45,
    radius: float = 1.0,
    length: float = 3.0,
) -> TriMesh:
    """Closed surface of revolution: two convex lobes joined by a reflex
    neck.  Each lobe unfolds like a sphere; the joined shape does not."""
    if rings < 3 or segments < 3:
        raise ValueError("need at least 3 rings and 3 segments")
    # profile rho(t) in (0, 1): product of a lobe envelope and a neck pinch
    ts = np.linspace(0.0, 1.0, rings + 2)[1:-1]
    zs = (ts - 0.5) * length
    envelope = np.sin(np.pi * ts)
    pinch = 1.0 - (1.0 - neck) * np.exp(-(((ts - 0.5) / 0.12) ** 2))
    rho = radius * envelope * pinch

    verts = [(0.0, 0.0, -0.5 * length)]
    for z, r in zip(zs, rho):
        for k in range(segments):
            ang = 2.0 * np.pi * k / segments
            verts.append((r * np.cos(ang), r * np.sin(ang), z))
    verts.append((0.0, 0.0, 0.5 * length))
    south, north = 0, len(verts) - 1

    def ring_vertex(i, k):
        return 1 + i * segments + (k % segments)

    faces = []
    for k in range(segments):
        faces.append((south, ring_vertex(0, k + 1), ring_vertex(0, k)))
    for i in range(rings - 1):
        for k in range(segments):
            a, b = ring_vertex(i, k), ring_vertex(i, k + 1)
            c, d = ring_vertex(i + 1, k), ring_vertex(i + 1, k + 1)
            faces.append((a, b, d))
            faces.append((a, d, c))
    for k in range(segments):
        faces.append((north, ring_vertex(rings - 1, k), ring_vertex(rings - 1, k + 1)))
    return TriMesh(np.array(verts), np.array(faces, dtype=np.int64))
