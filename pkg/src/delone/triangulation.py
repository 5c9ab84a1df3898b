"""Simplicial complexes with facet adjacency, flips, and validity checks.

Cells are stored as sorted vertex-id tuples.  A complex is treated as
immutable by readers; the flip operations mutate a complex in place and
require exclusive access to it.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateSimplexError,
    InvalidComplexError,
    NonGenericError,
    WindowError,
)
from .geometry import (
    Side,
    TAU_GEO,
    circumsphere,
    in_sphere,
    measure,
    orient2d,
    orientation,
    point_in_simplex,
)

Cell = tuple  # sorted vertex ids, length d+1
Facet = tuple  # sorted vertex ids, length d

COVERAGE_CHECK_MAX_CELLS = 10_000
COVERAGE_RTOL = 1e-8

TO_DELAUNAY = "TO_DELAUNAY"
FROM_DELAUNAY = "FROM_DELAUNAY"


@dataclass
class FlipRecord:
    facet: Facet
    before_max_circumradius: float
    after_max_circumradius: float
    direction: str = TO_DELAUNAY


@dataclass
class TriangulationComplex:
    dim: int
    points: np.ndarray
    _cells: set = field(repr=False)
    facet_adjacency: dict = field(repr=False)
    provenance: dict = field(default_factory=dict)
    _bound_q: float | None = field(default=None, repr=False)
    _cells_sorted: list | None = field(default=None, repr=False)

    # -- basic views --------------------------------------------------------

    @property
    def cells(self) -> list:
        if self._cells_sorted is None:
            self._cells_sorted = sorted(self._cells)
        return self._cells_sorted

    @property
    def n_cells(self) -> int:
        return len(self._cells)

    def has_cell(self, cell: Cell) -> bool:
        return tuple(sorted(cell)) in self._cells

    def cell_coords(self, cell: Cell) -> np.ndarray:
        return self.points[list(cell)]

    def cells_array(self) -> np.ndarray:
        return np.array(self.cells, dtype=np.int64)

    def vertices_used(self) -> np.ndarray:
        if not self._cells:
            return np.array([], dtype=np.int64)
        return np.unique(self.cells_array())

    def facets(self) -> Iterable[Facet]:
        return self.facet_adjacency.keys()

    def is_interior(self, facet: Facet) -> bool:
        return len(self.facet_adjacency.get(tuple(sorted(facet)), ())) == 2

    def interior_facets(self) -> list:
        return [f for f, cs in self.facet_adjacency.items() if len(cs) == 2]

    def boundary_facets(self) -> list:
        return [f for f, cs in self.facet_adjacency.items() if len(cs) == 1]

    def facet_cells(self, facet: Facet) -> list:
        return list(self.facet_adjacency.get(tuple(sorted(facet)), ()))

    def opposite_vertices(self, facet: Facet) -> list:
        facet = tuple(sorted(facet))
        out = []
        for cell in self.facet_adjacency[facet]:
            (v,) = set(cell) - set(facet)
            out.append(v)
        return out

    def copy(self) -> "TriangulationComplex":
        return TriangulationComplex(
            dim=self.dim,
            points=self.points,
            _cells=set(self._cells),
            facet_adjacency={f: list(cs) for f, cs in self.facet_adjacency.items()},
            provenance=dict(self.provenance),
        )

    # -- mutation (exclusive access) ----------------------------------------

    def _invalidate(self):
        self._bound_q = None
        self._cells_sorted = None

    def _add_cell(self, cell: Cell):
        cell = tuple(sorted(cell))
        self._cells.add(cell)
        for facet in itertools.combinations(cell, self.dim):
            self.facet_adjacency.setdefault(facet, []).append(cell)
        self._invalidate()

    def _remove_cell(self, cell: Cell):
        cell = tuple(sorted(cell))
        self._cells.remove(cell)
        for facet in itertools.combinations(cell, self.dim):
            entry = self.facet_adjacency[facet]
            entry.remove(cell)
            if not entry:
                del self.facet_adjacency[facet]
        self._invalidate()

    # -- metric summaries ----------------------------------------------------

    def cell_circumradii(self) -> np.ndarray:
        return np.array([circumsphere(self.cell_coords(c)).radius for c in self.cells])

    def cell_measures(self) -> np.ndarray:
        return np.array([measure(self.cell_coords(c)) for c in self.cells])

    # -- serialization -------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": 1,
                "dimension": self.dim,
                "points": [[float(x) for x in p] for p in self.points],
                "cells": [list(c) for c in self.cells],
                "provenance": self.provenance,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "TriangulationComplex":
        data = json.loads(text)
        # hull coverage is a build-time property of full triangulations;
        # serialized subcomplexes (restrictions, strip windows) are legal
        return build_complex(
            np.array(data["points"], dtype=float),
            [tuple(c) for c in data["cells"]],
            provenance=data.get("provenance", {}),
            check_coverage=False,
        )


def _hull_volume(points: np.ndarray) -> float:
    from scipy.spatial import ConvexHull

    return float(ConvexHull(points).volume)


def build_complex(
    points,
    cells: Sequence[Sequence[int]],
    *,
    provenance: dict | None = None,
    check_coverage: bool = True,
) -> TriangulationComplex:
    """Build a complex from points and d-cells, verifying its invariants.

    Coverage (sum of cell measures equals the hull volume of the used
    vertices) is only checked for complexes of at most
    ``COVERAGE_CHECK_MAX_CELLS`` cells, and can be disabled for deliberate
    subcomplexes whose union is not a convex hull.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise InvalidComplexError("points must be an (n, d) array")
    n, dim = points.shape

    cell_set = set()
    for cell in cells:
        cell = tuple(sorted(int(v) for v in cell))
        if len(cell) != dim + 1 or len(set(cell)) != dim + 1:
            raise InvalidComplexError(f"cell {cell} is not a {dim}-simplex")
        if cell[0] < 0 or cell[-1] >= n:
            raise InvalidComplexError(f"cell {cell} references missing points")
        if cell in cell_set:
            raise InvalidComplexError(f"duplicate cell {cell}")
        cell_set.add(cell)

    adjacency: dict = {}
    for cell in cell_set:
        if orientation(points[list(cell)]) == 0:
            raise DegenerateSimplexError(f"cell {cell} is degenerate")
        for facet in itertools.combinations(cell, dim):
            adjacency.setdefault(facet, []).append(cell)
    for facet, incident in adjacency.items():
        if len(incident) > 2:
            raise InvalidComplexError(
                f"facet {facet} is shared by {len(incident)} cells (non-manifold)"
            )

    cx = TriangulationComplex(
        dim=dim,
        points=points,
        _cells=cell_set,
        facet_adjacency=adjacency,
        provenance=provenance or {},
    )

    if check_coverage and cell_set and len(cell_set) <= COVERAGE_CHECK_MAX_CELLS:
        used = cx.vertices_used()
        total = cx.cell_measures().sum()
        hull = _hull_volume(points[used])
        if abs(total - hull) > COVERAGE_RTOL * max(hull, 1.0):
            raise InvalidComplexError(
                f"cell measures sum to {total}, convex hull volume is {hull}"
            )
        # Any unused point lying inside the underlying space would have to be
        # a vertex; the coverage identity makes a cell scan sufficient.
        unused = sorted(set(range(n)) - set(used.tolist()))
        for idx in unused:
            for cell in cell_set:
                if point_in_simplex(points[list(cell)], points[idx]):
                    raise InvalidComplexError(
                        f"point {idx} lies in the underlying space but is not a vertex"
                    )
    return cx


# ---------------------------------------------------------------------------
# locally-Delaunay tests and flips


def is_locally_delaunay(cx: TriangulationComplex, facet) -> bool:
    """True iff the opposite vertices of the two incident cells lie outside
    each other's circumspheres.  Raises on boundary facets and on exact
    cospherical (ON) configurations."""
    facet = tuple(sorted(facet))
    incident = cx.facet_cells(facet)
    if len(incident) != 2:
        raise InvalidComplexError(f"facet {facet} is not interior")
    c0, c1 = incident
    (v1,) = set(c1) - set(facet)
    side = in_sphere(cx.cell_coords(c0), cx.points[v1])
    if side == Side.ON:
        raise NonGenericError(f"facet {facet}: cospherical opposite vertex")
    return side == Side.OUTSIDE


def _quad_of(cx: TriangulationComplex, facet) -> tuple:
    facet = tuple(sorted(facet))
    c0, c1 = cx.facet_cells(facet)
    (a,) = set(c0) - set(facet)
    (b,) = set(c1) - set(facet)
    return facet, a, b


def _max_circumradius(cx, cells) -> float:
    return max(circumsphere(cx.cell_coords(c)).radius for c in cells)


def _do_flip(cx: TriangulationComplex, facet, direction: str) -> FlipRecord:
    (u, v), a, b = _quad_of(cx, facet)
    pa, pb = cx.points[a], cx.points[b]
    pu, pv = cx.points[u], cx.points[v]
    # strict convexity of the quadrilateral a-u-b-v
    if orient2d(*pa, *pb, *pu) * orient2d(*pa, *pb, *pv) >= 0:
        raise InvalidComplexError(
            f"facet {(u, v)}: surrounding quadrilateral is not strictly convex"
        )
    if orient2d(*pu, *pv, *pa) * orient2d(*pu, *pv, *pb) >= 0:
        raise InvalidComplexError(f"facet {(u, v)}: opposite vertices not separated")
    old = cx.facet_cells((u, v))
    before = _max_circumradius(cx, old)
    for cell in old:
        cx._remove_cell(cell)
    new = [tuple(sorted((a, b, u))), tuple(sorted((a, b, v)))]
    for cell in new:
        cx._add_cell(cell)
    after = _max_circumradius(cx, new)
    return FlipRecord(
        facet=(u, v),
        before_max_circumradius=before,
        after_max_circumradius=after,
        direction=direction,
    )


def flip(cx: TriangulationComplex, facet) -> FlipRecord:
    """Directed 2D flip of a non-locally-Delaunay interior edge.

    Replaces the diagonal of the surrounding convex quadrilateral; the
    maximum circumradius over the two cells does not increase.
    """
    if cx.dim != 2:
        raise InvalidComplexError("flips are implemented for 2D complexes only")
    if is_locally_delaunay(cx, facet):
        raise InvalidComplexError(
            f"facet {tuple(facet)} is locally Delaunay; directed flips only go "
            "toward Delaunay"
        )
    record = _do_flip(cx, facet, TO_DELAUNAY)
    if record.after_max_circumradius > record.before_max_circumradius * (1 + TAU_GEO) + TAU_GEO:
        raise InvalidComplexError("directed flip increased the larger circumradius")
    return record


def reverse_flip(cx: TriangulationComplex, facet) -> FlipRecord:
    """Undo a locally-Delaunay edge (the inverse of ``flip``), used to build
    perturbed non-Delaunay triangulations.  The quadrilateral must be strictly
    convex."""
    if cx.dim != 2:
        raise InvalidComplexError("flips are implemented for 2D complexes only")
    if not is_locally_delaunay(cx, facet):
        raise InvalidComplexError(f"facet {tuple(facet)} is not locally Delaunay")
    return _do_flip(cx, facet, FROM_DELAUNAY)


def legalize_to_delaunay(cx: TriangulationComplex):
    """Flip until every interior edge is locally Delaunay.

    Returns a new complex and the flip log; the input is left untouched.
    For generic vertices the result equals the Delaunay triangulation of the
    same vertex set.
    """
    if cx.dim != 2:
        raise InvalidComplexError("legalize_to_delaunay is 2D only")
    out = cx.copy()
    queue = deque(sorted(out.interior_facets()))
    records: list[FlipRecord] = []
    limit = 4 * (len(out._cells) + 2) ** 2 + 64
    steps = 0
    while queue:
        facet = queue.popleft()
        if len(out.facet_adjacency.get(facet, ())) != 2:
            continue
        if is_locally_delaunay(out, facet):
            continue
        (u, v), a, b = _quad_of(out, facet)
        records.append(_do_flip(out, facet, TO_DELAUNAY))
        for e in ((u, a), (u, b), (v, a), (v, b)):
            queue.append(tuple(sorted(e)))
        steps += 1
        if steps > limit:
            raise RuntimeError("flip scheduling failed to terminate")
    for facet in out.interior_facets():
        assert is_locally_delaunay(out, facet)
    return out, records


def uniform_bound_q(cx: TriangulationComplex) -> float:
    """Maximum circumradius over all cells (cached)."""
    if cx._bound_q is None:
        cx._bound_q = float(cx.cell_circumradii().max()) if cx._cells else 0.0
    return cx._bound_q


# ---------------------------------------------------------------------------
# non-uniformly-bounded prefix construction (2D)


class _PrefixBuilder:
    """Grows a triangulation of a finite planar window whose longest edge
    exceeds the phase number, by starring far-away points onto the hull."""

    def __init__(self, points: np.ndarray):
        self.points = points
        self.cells: set = set()
        self.adjacency: dict = {}
        self.hull: list = []  # CCW vertex cycle
        self.is_vertex = np.zeros(len(points), dtype=bool)
        self.long_edges: list = []

    def _add(self, cell):
        cell = tuple(sorted(cell))
        self.cells.add(cell)
        for facet in itertools.combinations(cell, 2):
            self.adjacency.setdefault(facet, []).append(cell)
        for v in cell:
            self.is_vertex[v] = True

    def _remove(self, cell):
        cell = tuple(sorted(cell))
        self.cells.remove(cell)
        for facet in itertools.combinations(cell, 2):
            entry = self.adjacency[facet]
            entry.remove(cell)
            if not entry:
                del self.adjacency[facet]

    def seed(self, i, j, k):
        pi, pj, pk = self.points[i], self.points[j], self.points[k]
        if orient2d(*pi, *pj, *pk) > 0:
            self.hull = [i, j, k]
        else:
            self.hull = [j, i, k]
        self._add((i, j, k))

    def star_exterior(self, w: int):
        """Attach exterior point w to every strictly visible hull edge."""
        pw = self.points[w]
        m = len(self.hull)
        visible = []
        for t in range(m):
            u, v = self.hull[t], self.hull[(t + 1) % m]
            if orient2d(*self.points[u], *self.points[v], *pw) < 0:
                visible.append(t)
        if not visible:
            raise InvalidComplexError(f"point {w} sees no hull edge")
        for t in visible:
            u, v = self.hull[t], self.hull[(t + 1) % m]
            self._add((v, u, w))
        # visible edges form a contiguous arc on the cycle
        vis = set(visible)
        start = next(t for t in visible if (t - 1) % m not in vis)
        run = len(visible)
        new_hull = []
        t = (start + run) % m  # first vertex after the visible arc
        for _ in range(m - run):
            new_hull.append(self.hull[t])
            t = (t + 1) % m
        new_hull.append(self.hull[start])
        new_hull.append(w)  # cycle: ..., arc start vertex, w, vertex after arc, ...
        self.hull = new_hull
        self.is_vertex[w] = True

    def point_in_space(self, idx: int) -> bool:
        p = self.points[idx]
        m = len(self.hull)
        for t in range(m):
            u, v = self.hull[t], self.hull[(t + 1) % m]
            if orient2d(*self.points[u], *self.points[v], *p) < 0:
                return False
        return True

    def _containing_cell(self, p) -> Cell | None:
        for cell in self.cells:
            if point_in_simplex(self.points[list(cell)], p):
                return cell
        return None

    def split_interior_points(self, candidates):
        """Star every covered non-vertex point into its lowest-dimensional
        containing simplex until all covered points are vertices."""
        pending = deque(candidates)
        while pending:
            w = pending.popleft()
            if self.is_vertex[w] or not self.point_in_space(w):
                continue
            pw = self.points[w]
            host = self._containing_cell(pw)
            if host is None:
                continue
            a, b, c = host
            # lowest-dimensional containing simplex: check the edges first
            on_edge = None
            for u, v in ((a, b), (b, c), (a, c)):
                if orient2d(*self.points[u], *self.points[v], *pw) == 0:
                    on_edge = (u, v)
                    break
            if on_edge is None:
                self._remove(host)
                self._add((a, b, w))
                self._add((b, c, w))
                self._add((a, c, w))
            else:
                u, v = on_edge
                key = tuple(sorted((u, v)))
                incident = list(self.adjacency.get(key, ()))
                for cell in incident:
                    (t,) = set(cell) - {u, v}
                    self._remove(cell)
                    self._add((u, w, t))
                    self._add((v, w, t))
                if len(incident) == 1:
                    # hull edge split: keep the hull cycle in step
                    m = len(self.hull)
                    for t in range(m):
                        pair = (self.hull[t], self.hull[(t + 1) % m])
                        if pair == (u, v) or pair == (v, u):
                            self.hull.insert(t + 1, w)
                            break
            self.is_vertex[w] = True


def _segment_clear(points, i, j, candidate_ids) -> bool:
    """No point of ``candidate_ids`` lies on the open segment (i, j)."""
    pi, pj = points[i], points[j]
    lo = np.minimum(pi, pj) - 1e-12
    hi = np.maximum(pi, pj) + 1e-12
    cand = np.asarray(candidate_ids)
    sub = points[cand]
    mask = ((sub >= lo) & (sub <= hi)).all(axis=1)
    for k in cand[mask]:
        if k == i or k == j:
            continue
        pk = points[k]
        if orient2d(*pi, *pj, *pk) == 0:
            t = float((pk - pi) @ (pj - pi))
            if 0.0 < t < float((pj - pi) @ (pj - pi)):
                return False
    return True


def build_unbounded_prefix(window, phases: int) -> TriangulationComplex:
    """Finite-phase construction of a triangulation that is not uniformly
    bounded: after phase k it covers every window point within distance k of
    the origin and contains an edge longer than k.

    ``window`` is a PointSetWindow-like object with ``points`` (n, 2) and
    ``window_radius``.
    """
    points = np.asarray(window.points, dtype=float)
    if points.shape[1] != 2:
        raise WindowError("build_unbounded_prefix is 2D only")
    if phases < 1:
        raise ValueError("need at least one phase")
    n = len(points)
    radii = np.linalg.norm(points, axis=1)
    order = np.lexsort((np.arange(n), radii))

    builder = _PrefixBuilder(points)
    i0, i1 = int(order[0]), int(order[1])
    all_ids = range(n)

    for phase in range(1, phases + 1):
        if not builder.cells:
            x = min(i0, i1)
            hull_prev = hull_next = None
        else:
            x = min(builder.hull)
            pos = builder.hull.index(x)
            hull_prev = builder.hull[pos - 1]
            hull_next = builder.hull[(pos + 1) % len(builder.hull)]
        y = _find_long_edge_target(
            points, builder, x, float(phase), hull_prev, hull_next, i0, i1
        )
        if not builder.cells:
            builder.seed(i0, i1, y)
        else:
            builder.star_exterior(y)
        builder.long_edges.append((x, y))

        inside = [int(k) for k in all_ids if radii[k] <= phase and not builder.is_vertex[k]]
        inside.sort(key=lambda k: (radii[k], k))
        for z in inside:
            if builder.is_vertex[z] or builder.point_in_space(z):
                continue
            builder.star_exterior(z)
        builder.split_interior_points(
            sorted((k for k in all_ids if not builder.is_vertex[k]),
                   key=lambda k: (radii[k], k))
        )

    cx = build_complex(
        points,
        builder.cells,
        provenance={
            "generator": "unbounded_prefix",
            "phases": phases,
            "long_edges": [list(e) for e in builder.long_edges],
        },
    )
    edge_set = set()
    for cell in cx.cells:
        edge_set.update(itertools.combinations(cell, 2))
    for x, y in builder.long_edges:
        if tuple(sorted((x, y))) not in edge_set:
            raise RuntimeError("a phase edge was subdivided")
    return cx


def _find_long_edge_target(points, builder, x, length, hull_prev, hull_next, i0, i1):
    """Pick y with |xy| > length whose open segment misses the complex and all
    other points, searching 64 uniformly sampled direction cones."""
    px = points[x]
    diffs = points - px
    dists = np.linalg.norm(diffs, axis=1)
    angles = np.arctan2(diffs[:, 1], diffs[:, 0])
    half = math.pi / 64.0
    for j in range(64):
        theta = -math.pi + 2.0 * math.pi * j / 64.0
        delta = np.abs(np.angle(np.exp(1j * (angles - theta))))
        in_cone = (delta <= half) & (dists > 0)
        if (dists[in_cone] <= length).any():
            continue  # cone blocked inside the ball
        ids = np.nonzero(in_cone)[0]
        ids = ids[np.lexsort((ids, dists[ids]))]
        for y in ids:
            y = int(y)
            if builder.is_vertex[y]:
                continue
            if builder.cells:
                # direction must leave the convex hull immediately at x
                py = points[y]
                s1 = orient2d(*px, *points[hull_next], *py)
                s2 = orient2d(*points[hull_prev], *px, *py)
                if s1 >= 0 and s2 >= 0:
                    continue  # stays inside the closed tangent wedge
                if builder.point_in_space(y):
                    continue
            elif orient2d(*points[i0], *points[i1], *points[y]) == 0:
                continue  # keep the seed triangle non-degenerate
            near = np.nonzero(dists <= dists[y])[0]
            if not _segment_clear(points, x, y, near):
                continue
            return y
    raise WindowError(
        f"window exhausted: no admissible edge longer than {length} from vertex {x}"
    )
