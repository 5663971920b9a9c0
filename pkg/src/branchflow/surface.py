"""Weighted triangulated closed surfaces: validation, fixtures, documents,
and the cycle-inequality check for branch assignments.

A surface is purely combinatorial here: a face list over ``N`` vertices plus
a per-edge intersection weight in ``[0, pi/2]``.  All geometric content lives
in :mod:`branchflow.geometry`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DocumentError, SurfaceError

MAX_WEIGHT = math.pi / 2

FIXTURE_NAMES = ("octahedron", "icosahedron", "moebius_torus_7", "klein_quartic_24")


def edge_key(i, j):
    """Canonical unordered edge key: (min, max)."""
    return (i, j) if i < j else (j, i)


class WeightedTriangulation:
    """Closed triangulated surface with a weight on every edge.

    Validates on construction: faces must have distinct vertices, every edge
    must lie in exactly two faces, the complex must be connected, and all
    weights must lie in ``[0, pi/2]``.
    """

    def __init__(self, vertex_count, faces, weights=None, default_weight=0.0):
        self.vertex_count = int(vertex_count)
        self.faces = [tuple(int(v) for v in f) for f in faces]
        self._validate_faces()

        edge_faces = {}
        for fi, (a, b, c) in enumerate(self.faces):
            for e in (edge_key(a, b), edge_key(b, c), edge_key(c, a)):
                edge_faces.setdefault(e, []).append(fi)
        self.edges = sorted(edge_faces)
        self.edge_faces = edge_faces
        for e, fs in edge_faces.items():
            if len(fs) != 2:
                raise SurfaceError(
                    f"edge {e[0]}-{e[1]} lies in {len(fs)} face(s), expected 2"
                )

        self.default_weight = float(default_weight)
        self.weights = {}
        for e in self.edges:
            self.weights[e] = self.default_weight
        for e, w in (weights or {}).items():
            e = edge_key(*e)
            if e not in self.edge_faces:
                raise DocumentError(f"weight given for non-existent edge {e[0]}-{e[1]}")
            self.weights[e] = float(w)
        for e, w in self.weights.items():
            if not (0.0 <= w <= MAX_WEIGHT + 1e-15):
                raise SurfaceError(
                    f"weight out of range on edge {e[0]}-{e[1]}: {w!r} not in [0, pi/2]"
                )

        self.neighbors = [[] for _ in range(self.vertex_count)]
        for i, j in self.edges:
            self.neighbors[i].append(j)
            self.neighbors[j].append(i)
        for nb in self.neighbors:
            nb.sort()
        self.vertex_faces = [[] for _ in range(self.vertex_count)]
        for fi, f in enumerate(self.faces):
            for v in f:
                self.vertex_faces[v].append(fi)

        self._check_connected()

        # cached arrays for vectorized geometry
        self.face_array = np.array(self.faces, dtype=np.intp)
        self.face_weights = np.array(
            [
                [
                    self.weights[edge_key(a, b)],
                    self.weights[edge_key(b, c)],
                    self.weights[edge_key(c, a)],
                ]
                for (a, b, c) in self.faces
            ]
        )

    # -- construction checks -------------------------------------------------

    def _validate_faces(self):
        if self.vertex_count <= 0:
            raise DocumentError("vertex count must be positive")
        if not self.faces:
            raise DocumentError("face list is empty")
        for f in self.faces:
            if len(f) != 3:
                raise DocumentError(f"face {list(f)} does not have three vertices")
            if len(set(f)) != 3:
                raise DocumentError(f"degenerate face {list(f)}: repeated vertex")
            for v in f:
                if not (0 <= v < self.vertex_count):
                    raise DocumentError(f"face {list(f)}: vertex {v} out of range")
        used = {v for f in self.faces for v in f}
        if used != set(range(self.vertex_count)):
            missing = sorted(set(range(self.vertex_count)) - used)
            raise SurfaceError(f"isolated vertices {missing}: not in any face")

    def _check_connected(self):
        seen = [False] * self.vertex_count
        stack = [0]
        seen[0] = True
        while stack:
            v = stack.pop()
            for w in self.neighbors[v]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
        if not all(seen):
            bad = seen.index(False)
            raise SurfaceError(f"complex is disconnected (vertex {bad} unreachable)")

    # -- basic queries --------------------------------------------------------

    @property
    def edge_count(self):
        return len(self.edges)

    @property
    def face_count(self):
        return len(self.faces)

    def degree(self, v):
        return len(self.neighbors[v])

    def degrees(self):
        return np.array([len(nb) for nb in self.neighbors])

    def euler_characteristic(self):
        return self.vertex_count - self.edge_count + self.face_count

    def to_document(self, branch=None):
        """Canonical document form (stable key order, minimal weights map)."""
        weights = {
            f"{i}-{j}": self.weights[(i, j)]
            for (i, j) in self.edges
            if self.weights[(i, j)] != self.default_weight
        }
        doc = {
            "vertices": self.vertex_count,
            "faces": [list(f) for f in self.faces],
            "default_weight": self.default_weight,
            "weights": weights,
        }
        if branch is not None and branch.total_order() > 0:
            doc["branch"] = {
                str(i): int(b) for i, b in enumerate(branch.orders) if b > 0
            }
        return doc


@dataclass(frozen=True)
class BranchAssignment:
    """Non-negative integer branch order per vertex (0 = ordinary vertex)."""

    orders: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.orders, dtype=int)
        if arr.ndim != 1:
            raise DocumentError("branch orders must be a vector")
        if (arr < 0).any():
            raise DocumentError("branch orders must be non-negative")
        object.__setattr__(self, "orders", arr)

    @classmethod
    def zero(cls, n):
        return cls(np.zeros(n, dtype=int))

    @classmethod
    def from_pairs(cls, n, pairs):
        orders = np.zeros(n, dtype=int)
        for i, b in pairs:
            orders[int(i)] = int(b)
        return cls(orders)

    def total_order(self):
        return int(self.orders.sum())


@dataclass
class ValidationReport:
    checks: dict
    euler_characteristic: int
    degrees: list

    @property
    def ok(self):
        return all(self.checks.values())


@dataclass
class BranchCheckReport:
    status: str  # verified | partially_verified | violated
    violating_cycle: list | None
    cycles_examined: int
    skipped_nonseparating: int
    length_bound: int


# -- document I/O -------------------------------------------------------------


def load_triangulation(document):
    """Parse a triangulation document (JSON text or dict) into a surface."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise DocumentError(f"invalid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise DocumentError("document must be a JSON object")
    for key in ("vertices", "faces"):
        if key not in document:
            raise DocumentError(f"missing required key {key!r}")
    weights = {}
    for name, w in (document.get("weights") or {}).items():
        try:
            i, j = (int(p) for p in name.split("-"))
        except ValueError as exc:
            raise DocumentError(f"bad edge key {name!r}, expected 'i-j'") from exc
        weights[edge_key(i, j)] = float(w)
    return WeightedTriangulation(
        document["vertices"],
        document["faces"],
        weights=weights,
        default_weight=document.get("default_weight", 0.0),
    )


def load_branch_assignment(document, vertex_count):
    """Extract the optional branch map of a document."""
    if isinstance(document, (str, bytes)):
        document = json.loads(document)
    pairs = [(int(i), int(b)) for i, b in (document.get("branch") or {}).items()]
    return BranchAssignment.from_pairs(vertex_count, pairs)


def validate(wt):
    """Re-check the construction invariants and collect a report."""
    checks = {
        "faces_distinct_vertices": all(len(set(f)) == 3 for f in wt.faces),
        "edges_in_two_faces": all(len(fs) == 2 for fs in wt.edge_faces.values()),
        "edge_face_ratio": 2 * wt.edge_count == 3 * wt.face_count,
        "weights_in_range": all(
            0.0 <= w <= MAX_WEIGHT + 1e-15 for w in wt.weights.values()
        ),
        "degree_sum": int(wt.degrees().sum()) == 2 * wt.edge_count,
        "connected": True,  # construction would have raised otherwise
    }
    return ValidationReport(
        checks=checks,
        euler_characteristic=wt.euler_characteristic(),
        degrees=wt.degrees().tolist(),
    )


# -- fixtures -----------------------------------------------------------------

_OCTAHEDRON_FACES = [
    (0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 1),
    (5, 2, 1), (5, 3, 2), (5, 4, 3), (5, 1, 4),
]

_ICOSAHEDRON_FACES = [
    (0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 5), (0, 5, 1),
    (1, 5, 6), (1, 6, 7), (1, 7, 2), (2, 7, 8), (2, 8, 3),
    (3, 8, 9), (3, 9, 4), (4, 9, 10), (4, 10, 5), (5, 10, 6),
    (6, 10, 11), (6, 11, 7), (7, 11, 8), (8, 11, 9), (9, 11, 10),
]


def _moebius_torus_faces():
    # 7-vertex 6-regular torus: faces {i, i+1, i+3} and {i, i+2, i+3} mod 7
    faces = []
    for i in range(7):
        faces.append((i, (i + 1) % 7, (i + 3) % 7))
        faces.append((i, (i + 2) % 7, (i + 3) % 7))
    return faces


def _klein_quartic_faces():
    """The vertex-transitive {3,7} triangulation of the genus-3 surface.

    Built as the regular oriented map of the (7,2,3) triangle group quotient
    PSL(2,7): darts are group elements, vertices are cosets of <a> with a of
    order 7, faces are cosets of <ab> with ab of order 3.
    """

    def norm(m):
        # canonical representative in PSL(2,7): first nonzero entry in {1,2,3}
        m = tuple(x % 7 for x in m)
        for x in m:
            if x:
                if x > 3:
                    m = tuple((7 - y) % 7 for y in m)
                break
        return m

    def mul(m, n):
        a, b, c, d = m
        e, f, g, h = n
        return norm((a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h))

    a = norm((1, 1, 0, 1))        # order 7
    b = norm((0, 6, 1, 0))        # order 2 in PSL(2,7)
    ab = mul(a, b)                # order 3

    identity = norm((1, 0, 0, 1))
    elements = {identity}
    frontier = [identity]
    while frontier:
        g = frontier.pop()
        for s in (a, b):
            h = mul(g, s)
            if h not in elements:
                elements.add(h)
                frontier.append(h)
    assert len(elements) == 168

    def coset(g, s, order):
        cs, h = [], g
        for _ in range(order):
            cs.append(h)
            h = mul(h, s)
        return frozenset(cs)

    vertex_of = {}
    vertex_ids = {}
    for g in sorted(elements):
        c = coset(g, a, 7)
        if c not in vertex_ids:
            vertex_ids[c] = len(vertex_ids)
        vertex_of[g] = vertex_ids[c]
    assert len(vertex_ids) == 24

    faces = set()
    for g in elements:
        tri = tuple(vertex_of[h] for h in sorted(coset(g, ab, 3)))
        assert len(set(tri)) == 3
        faces.add(tri)
    assert len(faces) == 56
    return sorted(faces)


_KLEIN_FACES = None


def builtin(name, default_weight=0.0):
    """Return a named fixture with uniform weight unless overridden."""
    global _KLEIN_FACES
    if name == "octahedron":
        faces = _OCTAHEDRON_FACES
        n = 6
    elif name == "icosahedron":
        faces = _ICOSAHEDRON_FACES
        n = 12
    elif name == "moebius_torus_7":
        faces = _moebius_torus_faces()
        n = 7
    elif name == "klein_quartic_24":
        if _KLEIN_FACES is None:
            _KLEIN_FACES = _klein_quartic_faces()
        faces = _KLEIN_FACES
        n = 24
    else:
        raise DocumentError(
            f"unknown fixture {name!r}; expected one of {', '.join(FIXTURE_NAMES)}"
        )
    return WeightedTriangulation(n, faces, default_weight=default_weight)


# -- branch-structure check ---------------------------------------------------


def euler_characteristic(wt):
    return wt.euler_characteristic()


def _simple_cycles(wt, bound):
    """Yield simple cycles of length <= bound (each once, as a vertex list).

    Canonical form: smallest vertex first, second vertex smaller than the
    last.  Returns (cycles, truncated) where truncated says whether any path
    was cut off by the bound.
    """
    cycles = []
    truncated = False
    n = wt.vertex_count
    adj = wt.neighbors
    for root in range(n):
        # DFS over simple paths root -> ... with intermediate vertices > root
        stack = [(root, [root], {root})]
        while stack:
            v, path, onpath = stack.pop()
            for w in adj[v]:
                if w == root and len(path) >= 3 and path[1] < path[-1]:
                    cycles.append(path[:])
                elif w > root and w not in onpath:
                    if len(path) == bound:
                        truncated = True
                    else:
                        stack.append((w, path + [w], onpath | {w}))
    return cycles, truncated


def _cut_sides(wt, cycle):
    """Split the face set by cutting along the cycle's edges.

    Returns the list of face-index components when faces are connected
    across every edge not on the cycle.
    """
    cyc_edges = set()
    for idx, v in enumerate(cycle):
        cyc_edges.add(edge_key(v, cycle[(idx + 1) % len(cycle)]))
    parent = list(range(wt.face_count))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e, (f1, f2) in wt.edge_faces.items():
        if e not in cyc_edges:
            parent[find(f1)] = find(f2)
    comps = {}
    for fi in range(wt.face_count):
        comps.setdefault(find(fi), []).append(fi)
    return list(comps.values()), cyc_edges


def _side_euler(wt, faces):
    vs, es = set(), set()
    for fi in faces:
        a, b, c = wt.faces[fi]
        vs.update((a, b, c))
        es.update((edge_key(a, b), edge_key(b, c), edge_key(c, a)))
    return len(vs) - len(es) + len(faces), vs


def check_branch_structure(wt, beta, length_bound=12):
    """Evaluate the cycle inequality sum(pi - Phi) > 2(l+1)pi over all
    disc-bounding simple cycles of length <= length_bound.

    ``l`` is the total branch order strictly inside the disc side.  Cycles
    that do not cut off a disc are reported as skipped; the status degrades
    to partially_verified if any cycle was skipped or the bound truncated
    the enumeration.
    """
    if length_bound < 3:
        raise DocumentError("length_bound must be at least 3")
    orders = beta.orders
    cycles, truncated = _simple_cycles(wt, length_bound)
    skipped = 0
    for cycle in cycles:
        sides, cyc_edges = _cut_sides(wt, cycle)
        if len(sides) < 2:
            skipped += 1
            continue
        lhs = sum(math.pi - wt.weights[e] for e in cyc_edges)
        cycle_vs = set(cycle)
        any_disc = False
        for side in sides:
            chi_side, vs = _side_euler(wt, side)
            if chi_side != 1:
                continue
            any_disc = True
            enclosed = vs - cycle_vs
            l_gamma = int(sum(orders[v] for v in enclosed))
            if lhs <= 2 * (l_gamma + 1) * math.pi:
                return BranchCheckReport(
                    status="violated",
                    violating_cycle=cycle,
                    cycles_examined=len(cycles),
                    skipped_nonseparating=skipped,
                    length_bound=length_bound,
                )
        if not any_disc:
            skipped += 1
    status = "verified" if (not truncated and skipped == 0) else "partially_verified"
    return BranchCheckReport(
        status=status,
        violating_cycle=None,
        cycles_examined=len(cycles),
        skipped_nonseparating=skipped,
        length_bound=length_bound,
    )
