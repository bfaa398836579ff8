"""Edge-weight heuristics, cut/fold assignment, and rigid unfolding of a
triangle mesh into a planar net.

The pipeline is: :func:`compute_weights` assigns a scalar to every edge,
:func:`steepest_edge_cuts` or :func:`spanning_tree_cuts` turns weights into
a :class:`CutAssignment` (fold edges forming a spanning tree of the face
adjacency graph), and :func:`unfold_net` lays the faces out in the plane and
attaches overlap/angle diagnostics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .mesh import TriMesh, NotClosed
from . import overlap as _overlap

NET_FORMAT_VERSION = 1

# Fixed symmetry-breaking tilt applied to the cut direction before the
# ascending-edge test: axis-aligned directions on symmetric meshes otherwise
# hit measure-zero height ties.
_TILT_ANGLE = 1e-3
_TILT_TARGET = np.array([0.21, 0.47, 0.85]) / np.linalg.norm([0.21, 0.47, 0.85])
_TILT_FALLBACK = np.array([1.0, 0.0, 0.0])


class UnfoldError(Exception):
    """Base class for unfolding errors."""


class MissingDirection(UnfoldError):
    """Weight method needs a direction vector but none was given."""


class InvalidCutSet(UnfoldError):
    """Selected cut edges do not induce a valid unfolding tree; retry with a
    different direction."""


class DisconnectedMesh(UnfoldError):
    """The face adjacency graph is not connected."""


class WeightMethod(str, Enum):
    STEEPEST_EDGE = "steepest-edge"
    FLAT_TREE = "flat-tree"
    UNFLAT_TREE = "unflat-tree"
    MIN_PERIMETER = "min-perimeter"
    MAX_PERIMETER = "max-perimeter"
    RANDOM = "random"
    # Historical spanning-tree variant favouring folds across flat edges
    # (dihedral-based weights).  Not one of the six canonical methods.
    DIHEDRAL_FLATNESS = "dihedral"


_NEEDS_DIRECTION = {
    WeightMethod.STEEPEST_EDGE,
    WeightMethod.FLAT_TREE,
    WeightMethod.UNFLAT_TREE,
}


class TreeMode(str, Enum):
    MIN_FOLD_WEIGHT = "min-fold-weight"
    MAX_FOLD_WEIGHT = "max-fold-weight"


@dataclass
class EdgeWeights:
    """Per-edge scalar weights; also the genome evolved by the GA.

    ``weights[e]`` is the weight of edge id ``e``.  ``method`` is None for
    raw genomes that did not come from a named heuristic.
    """

    weights: np.ndarray
    method: WeightMethod | None = None
    c: np.ndarray | None = None
    seed: int | None = None


@dataclass
class CutAssignment:
    """Partition of interior edges into cuts and folds, plus the fold tree.

    The fold edges always form a spanning tree of the face adjacency graph:
    ``parent_face[f]``/``parent_edge[f]`` give each face's parent and the
    shared fold edge (-1 at the root), and ``order`` lists faces so parents
    precede children.
    """

    cut_edges: np.ndarray
    fold_edges: np.ndarray
    root_face: int
    parent_face: np.ndarray
    parent_edge: np.ndarray
    order: np.ndarray


@dataclass
class Net:
    """Planar layout of a single developable patch.

    ``placements[f, k]`` is the 2D position of corner k of face f; all faces
    are counter-clockwise and congruent to their 3D originals.  ``boundary``
    holds closed loops of 2D points tracing the cut edges.
    """

    placements: np.ndarray
    cuts: CutAssignment
    boundary: list[np.ndarray]
    mesh_hash: str
    diagnostics: _overlap.NetDiagnostics | None = None
    method: str | None = None
    c: np.ndarray | None = None
    seed: int | None = None

    @property
    def n_faces(self) -> int:
        return len(self.placements)


def _unit(c) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (3,):
        raise ValueError("direction must be a 3-vector")
    n = np.linalg.norm(c)
    if abs(n - 1.0) > 1e-12:
        raise ValueError(f"direction must be unit length (|c| = {n:.17g})")
    return c


def tilted_direction(c: np.ndarray) -> np.ndarray:
    """Rotate ``c`` by the fixed 1e-3 rad tilt used to break height ties."""
    target = _TILT_TARGET
    axis = np.cross(c, target)
    if np.linalg.norm(axis) < 1e-8:
        axis = np.cross(c, _TILT_FALLBACK)
    axis /= np.linalg.norm(axis)
    cos, sin = math.cos(_TILT_ANGLE), math.sin(_TILT_ANGLE)
    tilted = c * cos + np.cross(axis, c) * sin + axis * np.dot(axis, c) * (1.0 - cos)
    return tilted / np.linalg.norm(tilted)


def compute_weights(
    mesh: TriMesh,
    method: WeightMethod,
    c=None,
    seed: int = 0,
) -> EdgeWeights:
    """Per-edge weights for the requested heuristic.

    Alignment methods weight an edge (v, w) by ``|<c, v - w>| / |v - w|``,
    the magnitude of its alignment with the direction ``c``; UnflatTree
    complements the min-max-normalized alignment (w' = 1 - w).  Perimeter
    methods use Euclidean edge length; Random draws i.i.d. uniform [0, 1)
    weights from ``seed``.
    """
    method = WeightMethod(method)
    cvec = None
    if method in _NEEDS_DIRECTION:
        if c is None:
            raise MissingDirection(f"method {method.value} requires a direction c")
        cvec = _unit(c)
        d = mesh.vertices[mesh.edges[:, 0]] - mesh.vertices[mesh.edges[:, 1]]
        w = np.abs(d @ cvec) / mesh.edge_lengths
        if method == WeightMethod.UNFLAT_TREE:
            span = w.max() - w.min()
            w = 1.0 - ((w - w.min()) / span if span > 0 else np.zeros_like(w))
    elif method in (WeightMethod.MIN_PERIMETER, WeightMethod.MAX_PERIMETER):
        w = mesh.edge_lengths.copy()
    elif method == WeightMethod.RANDOM:
        w = np.random.default_rng(seed).random(mesh.n_edges)
    elif method == WeightMethod.DIHEDRAL_FLATNESS:
        w = np.nan_to_num(mesh.dihedral_angles, nan=0.0)
    else:
        raise ValueError(f"unhandled method {method}")
    return EdgeWeights(weights=w, method=method, c=cvec, seed=seed)


class _UnionFind:
    __slots__ = ("parent",)

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def _assemble(mesh: TriMesh, fold_mask: np.ndarray) -> CutAssignment:
    """Build the CutAssignment (root choice, parent maps, BFS order) from a
    boolean fold-edge mask that is already known to be a spanning tree."""
    fold_edges = np.flatnonzero(fold_mask)
    cut_mask = ~fold_mask
    cut_mask[mesh.boundary_edge_mask] = True
    cut_edges = np.flatnonzero(cut_mask)

    # Root: most cut edges among its three, lowest id on ties; starts the
    # layout at the patch boundary which empirically reduces drift.
    cut_count = cut_mask[mesh.face_edges].sum(axis=1)
    root = int(np.argmax(cut_count))

    parent_face = np.full(mesh.n_faces, -1, dtype=np.int64)
    parent_edge = np.full(mesh.n_faces, -1, dtype=np.int64)
    order = np.empty(mesh.n_faces, dtype=np.int64)
    seen = np.zeros(mesh.n_faces, dtype=bool)
    seen[root] = True
    order[0] = root
    head, tail = 0, 1
    while head < tail:
        f = order[head]
        head += 1
        for e in mesh.face_edges[f]:
            if not fold_mask[e]:
                continue
            fa, fb = mesh.edge_faces[e]
            g = fb if fa == f else fa
            if g >= 0 and not seen[g]:
                seen[g] = True
                parent_face[g] = f
                parent_edge[g] = e
                order[tail] = g
                tail += 1
    if tail != mesh.n_faces:
        raise InvalidCutSet("fold edges do not reach every face")
    return CutAssignment(
        cut_edges=cut_edges,
        fold_edges=fold_edges,
        root_face=root,
        parent_face=parent_face,
        parent_edge=parent_edge,
        order=order,
    )


def spanning_tree_cuts(
    mesh: TriMesh,
    weights: EdgeWeights,
    mode: TreeMode = TreeMode.MIN_FOLD_WEIGHT,
) -> CutAssignment:
    """Fold edges = minimum (or maximum) weight spanning tree of the dual
    graph, each dual edge inheriting the weight of the mesh edge it crosses;
    cut edges are the complement.  Ties break on lowest edge id, so the
    result is deterministic and invariant to positive weight scaling.
    """
    w = weights.weights
    interior = mesh.interior_edges
    if mode == TreeMode.MIN_FOLD_WEIGHT:
        ranked = interior[np.lexsort((interior, w[interior]))]
    else:
        ranked = interior[np.lexsort((interior, -w[interior]))]

    uf = _UnionFind(mesh.n_faces)
    fold_mask = np.zeros(mesh.n_edges, dtype=bool)
    needed = mesh.n_faces - 1
    for e in ranked:
        fa, fb = mesh.edge_faces[e]
        if uf.union(fa, fb):
            fold_mask[e] = True
            needed -= 1
            if needed == 0:
                break
    if needed:
        raise DisconnectedMesh("face adjacency graph is not connected")
    return _assemble(mesh, fold_mask)


def steepest_edge_cuts(mesh: TriMesh, weights: EdgeWeights) -> CutAssignment:
    """Steepest-edge cut selection.

    Every vertex except the one highest along the direction cuts its
    incident edge of largest weight among those ascending toward the
    direction (ties to the lowest edge id).  The resulting V-1 cut edges
    must span the vertices, and their complement must form a spanning tree
    of the dual graph; otherwise :class:`InvalidCutSet` is raised and the
    caller may retry with a fresh random direction.
    """
    if weights.method != WeightMethod.STEEPEST_EDGE:
        raise ValueError("steepest_edge_cuts needs weights computed with method steepest-edge")
    if not mesh.is_closed:
        raise NotClosed("steepest-edge cutting requires a closed mesh")
    c_eff = tilted_direction(weights.c)
    height = mesh.vertices @ c_eff
    top = int(np.argmax(height))

    w = weights.weights
    cut_mask = np.zeros(mesh.n_edges, dtype=bool)
    for v in range(mesh.n_vertices):
        if v == top:
            continue
        best = -1
        best_w = -np.inf
        for e in mesh.vertex_edges[v]:
            a, b = mesh.edges[e]
            other = b if a == v else a
            if height[other] <= height[v]:
                continue
            if w[e] > best_w:
                best, best_w = int(e), float(w[e])
        if best < 0:
            raise InvalidCutSet(f"vertex {v} has no edge ascending along c")
        cut_mask[best] = True

    cut_edges = np.flatnonzero(cut_mask)
    if len(cut_edges) != mesh.n_vertices - 1:
        raise InvalidCutSet("cut edges do not count V - 1")
    uf = _UnionFind(mesh.n_vertices)
    for e in cut_edges:
        if not uf.union(int(mesh.edges[e, 0]), int(mesh.edges[e, 1])):
            raise InvalidCutSet("cut edges contain a cycle")

    fold_mask = ~cut_mask
    fold_mask[mesh.boundary_edge_mask] = False
    if int(fold_mask.sum()) != mesh.n_faces - 1:
        raise InvalidCutSet("fold edges do not count F - 1")
    uf = _UnionFind(mesh.n_faces)
    for e in np.flatnonzero(fold_mask):
        if not uf.union(int(mesh.edge_faces[e, 0]), int(mesh.edge_faces[e, 1])):
            raise InvalidCutSet("fold edges contain a cycle")
    return _assemble(mesh, fold_mask)


def cuts_from_fold_edges(mesh: TriMesh, fold_edge_ids) -> CutAssignment:
    """CutAssignment from an explicit fold-edge set (validated as a spanning
    tree of the dual graph).  Used to enumerate or replay unfoldings."""
    fold_mask = np.zeros(mesh.n_edges, dtype=bool)
    fold_mask[np.asarray(fold_edge_ids, dtype=np.int64)] = True
    if fold_mask[mesh.boundary_edge_mask].any():
        raise InvalidCutSet("boundary edges cannot be fold edges")
    if int(fold_mask.sum()) != mesh.n_faces - 1:
        raise InvalidCutSet("fold edges do not count F - 1")
    uf = _UnionFind(mesh.n_faces)
    for e in np.flatnonzero(fold_mask):
        if not uf.union(int(mesh.edge_faces[e, 0]), int(mesh.edge_faces[e, 1])):
            raise InvalidCutSet("fold edges contain a cycle")
    return _assemble(mesh, fold_mask)


# -- planar layout -------------------------------------------------------------


def _place_faces(mesh: TriMesh, cuts: CutAssignment) -> np.ndarray:
    """Rigidly lay out every face in the plane following the fold tree.

    The root face sits with its first vertex at the origin, its first edge
    along +x and its interior in the upper half-plane; every child copies
    its shared edge coordinates from the parent (exact coincidence) and
    receives its third corner from the face's precomputed local frame.
    """
    coords = mesh._unfold_coords
    faces = mesh.faces
    face_edges = mesh.face_edges
    placements = np.empty((mesh.n_faces, 3, 2))

    root = cuts.root_face
    x2, y2 = coords[root, 0]
    length = mesh.edge_lengths[face_edges[root, 0]]
    placements[root, 0] = (0.0, 0.0)
    placements[root, 1] = (length, 0.0)
    placements[root, 2] = (x2, y2)

    for f in cuts.order[1:]:
        f = int(f)
        parent = int(cuts.parent_face[f])
        e = int(cuts.parent_edge[f])
        # slot of the shared edge in each face
        ks = 0 if face_edges[f, 0] == e else (1 if face_edges[f, 1] == e else 2)
        kp = 0 if face_edges[parent, 0] == e else (1 if face_edges[parent, 1] == e else 2)
        # consistent winding: the child traverses the edge in the opposite
        # direction, so its slot-k endpoints are the parent's reversed
        pa = placements[parent, (kp + 1) % 3]
        pb = placements[parent, kp]
        ax, ay = pa
        ux, uy = pb[0] - ax, pb[1] - ay
        inv = 1.0 / math.hypot(ux, uy)
        ux *= inv
        uy *= inv
        x, y = coords[f, ks]
        placements[f, ks] = pa
        placements[f, (ks + 1) % 3] = pb
        # left normal of (ux, uy) keeps the face counter-clockwise
        placements[f, (ks + 2) % 3] = (ax + x * ux - y * uy, ay + x * uy + y * ux)
    del faces
    return placements


def _boundary_loops(mesh: TriMesh, cuts: CutAssignment, placements: np.ndarray):
    """Closed polylines tracing the net outline.

    Directed face edges whose mesh edge is cut (or mesh boundary) are linked
    by rotating around the shared vertex through glued fold edges; a
    single-patch tree unfolding yields exactly one loop.
    """
    fold_mask = np.zeros(mesh.n_edges, dtype=bool)
    fold_mask[cuts.fold_edges] = True
    face_edges = mesh.face_edges
    edge_faces = mesh.edge_faces

    slot_of_edge = {}
    for f in range(mesh.n_faces):
        for k in range(3):
            slot_of_edge[(int(face_edges[f, k]), f)] = k

    loops = []
    visited = set()
    for f0 in range(mesh.n_faces):
        for k0 in range(3):
            if fold_mask[face_edges[f0, k0]] or (f0, k0) in visited:
                continue
            loop = []
            f, k = f0, k0
            while (f, k) not in visited:
                visited.add((f, k))
                loop.append(placements[f, k])
                # advance to the next boundary edge around the head vertex
                f_next, k_next = f, (k + 1) % 3
                while fold_mask[face_edges[f_next, k_next]]:
                    e = int(face_edges[f_next, k_next])
                    fa, fb = edge_faces[e]
                    f_next = int(fb if fa == f_next else fa)
                    k_next = (slot_of_edge[(e, f_next)] + 1) % 3
                f, k = f_next, k_next
            loop.append(loop[0])
            loops.append(np.array(loop))
    return loops


def unfold_net(mesh: TriMesh, cuts: CutAssignment, method=None, c=None, seed=None) -> Net:
    """Unfold the mesh along the given cut assignment and attach overlap and
    fold-angle diagnostics."""
    placements = _place_faces(mesh, cuts)
    net = Net(
        placements=placements,
        cuts=cuts,
        boundary=_boundary_loops(mesh, cuts, placements),
        mesh_hash=mesh.mesh_hash,
        method=str(method.value) if isinstance(method, WeightMethod) else method,
        c=None if c is None else np.asarray(c, dtype=np.float64),
        seed=seed,
    )
    net.diagnostics = _overlap.diagnose(net, mesh)
    return net


def unfold_mesh(
    mesh: TriMesh,
    method: WeightMethod,
    c=None,
    seed: int = 0,
) -> Net:
    """One-call pipeline: weights -> cut assignment -> unfolded net.

    Steepest-edge goes through per-vertex cut selection; every other method
    is a spanning-tree unfolding (MinPerimeter maximizes kept fold length,
    which minimizes the cut perimeter, and MaxPerimeter the reverse).
    """
    method = WeightMethod(method)
    weights = compute_weights(mesh, method, c=c, seed=seed)
    if method == WeightMethod.STEEPEST_EDGE:
        cuts = steepest_edge_cuts(mesh, weights)
    elif method == WeightMethod.MIN_PERIMETER:
        cuts = spanning_tree_cuts(mesh, weights, TreeMode.MAX_FOLD_WEIGHT)
    else:
        cuts = spanning_tree_cuts(mesh, weights, TreeMode.MIN_FOLD_WEIGHT)
    return unfold_net(mesh, cuts, method=method, c=weights.c, seed=seed)


# -- net document I/O ----------------------------------------------------------


def net_to_dict(net: Net) -> dict:
    d = net.diagnostics
    return {
        "format_version": NET_FORMAT_VERSION,
        "mesh_hash": net.mesh_hash,
        "method": net.method,
        "c": None if net.c is None else [float(x) for x in net.c],
        "seed": net.seed,
        "root_face": int(net.cuts.root_face),
        "cut_edges": [int(e) for e in net.cuts.cut_edges],
        "fold_edges": [int(e) for e in net.cuts.fold_edges],
        "parent_face": [int(f) for f in net.cuts.parent_face],
        "parent_edge": [int(e) for e in net.cuts.parent_edge],
        "order": [int(f) for f in net.cuts.order],
        "placements": [[[float(x), float(y)] for x, y in tri] for tri in net.placements],
        "boundary": [[[float(x), float(y)] for x, y in loop] for loop in net.boundary],
        "diagnostics": None
        if d is None
        else {
            "delta0": d.delta0,
            "delta1": d.delta1,
            "total_cut_angle": d.total_cut_angle,
            "max_fold_angle": d.max_fold_angle,
        },
    }


def net_from_dict(data: dict) -> Net:
    if data.get("format_version") != NET_FORMAT_VERSION:
        raise ValueError(f"unsupported net format_version {data.get('format_version')!r}")
    cuts = CutAssignment(
        cut_edges=np.array(data["cut_edges"], dtype=np.int64),
        fold_edges=np.array(data["fold_edges"], dtype=np.int64),
        root_face=int(data["root_face"]),
        parent_face=np.array(data["parent_face"], dtype=np.int64),
        parent_edge=np.array(data["parent_edge"], dtype=np.int64),
        order=np.array(data["order"], dtype=np.int64),
    )
    d = data.get("diagnostics")
    diagnostics = None
    if d is not None:
        diagnostics = _overlap.NetDiagnostics(
            delta0=int(d["delta0"]),
            delta1=int(d["delta1"]),
            total_cut_angle=float(d["total_cut_angle"]),
            max_fold_angle=float(d["max_fold_angle"]),
        )
    return Net(
        placements=np.array(data["placements"], dtype=np.float64),
        cuts=cuts,
        boundary=[np.array(loop, dtype=np.float64) for loop in data["boundary"]],
        mesh_hash=data["mesh_hash"],
        diagnostics=diagnostics,
        method=data.get("method"),
        c=None if data.get("c") is None else np.array(data["c"], dtype=np.float64),
        seed=data.get("seed"),
    )


def save_net(net: Net, path) -> None:
    """Write the self-contained net document (JSON, format-versioned)."""
    Path(path).write_text(json.dumps(net_to_dict(net), indent=1) + "\n")


def load_net(path) -> Net:
    return net_from_dict(json.loads(Path(path).read_text()))
