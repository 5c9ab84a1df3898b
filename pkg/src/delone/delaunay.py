"""Delaunay triangulations of finite point sets in 2D and 3D.

The 2D builder is an incremental Bowyer-Watson with ghost triangles and
exact predicates, so its combinatorics are exact for generic input and
non-generic input is detected rather than silently mis-triangulated.
The 3D builder projects the lower faces of the convex hull of the lifted
points; the hull combinatorics come from Qhull, while lower-face
classification and the emptiness verification use exact arithmetic.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

from .errors import (
    DegenerateSimplexError,
    InvalidComplexError,
    NonGenericError,
)
from .geometry import (
    Side,
    in_sphere,
    incircle2d,
    lift,
    measure,
    orient2d,
    orientation,
    point_in_simplex,
)
from .triangulation import TriangulationComplex, build_complex

GHOST = -1


# ---------------------------------------------------------------------------
# 2D incremental construction


def _on_open_segment(pa, pb, pq) -> bool:
    """Exact: pq collinear with pa-pb and strictly between them."""
    ax, ay = Fraction(pa[0]), Fraction(pa[1])
    bx, by = Fraction(pb[0]), Fraction(pb[1])
    qx, qy = Fraction(pq[0]), Fraction(pq[1])
    t = (qx - ax) * (bx - ax) + (qy - ay) * (by - ay)
    n = (bx - ax) * (bx - ax) + (by - ay) * (by - ay)
    return 0 < t < n


class _Mesh2D:
    """Triangle soup with directed-edge adjacency and hull ghost triangles."""

    def __init__(self, coords):
        self.coords = coords
        self.tri = {}
        self.edge2tri = {}
        self.next_id = 0
        self.last_real = None

    def _add(self, a, b, c):
        tid = self.next_id
        self.next_id += 1
        t = (a, b, c)
        self.tri[tid] = t
        for u, v in ((a, b), (b, c), (c, a)):
            self.edge2tri[(u, v)] = tid
        if GHOST not in t:
            self.last_real = tid
        return tid

    def _drop(self, tid):
        a, b, c = self.tri.pop(tid)
        for u, v in ((a, b), (b, c), (c, a)):
            del self.edge2tri[(u, v)]

    def seed(self, i, j, k):
        pi, pj, pk = self.coords[i], self.coords[j], self.coords[k]
        if orient2d(*pi, *pj, *pk) < 0:
            i, j = j, i
        self._add(i, j, k)
        self._add(j, i, GHOST)
        self._add(k, j, GHOST)
        self._add(i, k, GHOST)

    def _in_cavity(self, tid, qx, qy, qid) -> bool:
        t = self.tri[tid]
        if GHOST in t:
            a, b = t[0], t[1]  # ghost (a, b, GHOST): hull edge runs b -> a
            pa, pb = self.coords[a], self.coords[b]
            s = orient2d(*pa, *pb, qx, qy)
            if s > 0:
                return True
            if s == 0:
                return _on_open_segment(pa, pb, (qx, qy))
            return False
        a, b, c = t
        s = incircle2d(*self.coords[a], *self.coords[b], *self.coords[c], qx, qy)
        if s == 0:
            raise NonGenericError(
                f"point {qid} is cocircular with triangle {t}"
            )
        return s > 0

    def _locate(self, qx, qy, qid) -> int:
        tid = self.last_real
        hops = 0
        limit = 4 * len(self.tri) + 64
        while True:
            hops += 1
            if hops > limit:
                raise RuntimeError("point location walk failed to terminate")
            t = self.tri[tid]
            if GHOST in t:
                break
            a, b, c = t
            pa, pb, pc = self.coords[a], self.coords[b], self.coords[c]
            if orient2d(*pa, *pb, qx, qy) < 0:
                tid = self.edge2tri[(b, a)]
            elif orient2d(*pb, *pc, qx, qy) < 0:
                tid = self.edge2tri[(c, b)]
            elif orient2d(*pc, *pa, qx, qy) < 0:
                tid = self.edge2tri[(a, c)]
            else:
                return tid  # q in the closed triangle
        # q escaped the hull: walk the ghost ring to the edge it falls in
        start = tid
        seen = 0
        while not self._in_cavity(tid, qx, qy, qid):
            a, b, _ = self.tri[tid]
            tid = self.edge2tri[(GHOST, b)]  # next ghost along the hull
            seen += 1
            if tid == start or seen > len(self.tri):
                raise RuntimeError("hull walk failed to locate an exterior point")
        return tid

    def insert(self, qid):
        qx, qy = self.coords[qid]
        t0 = self._locate(qx, qy, qid)
        if not self._in_cavity(t0, qx, qy, qid):
            raise RuntimeError("located triangle fails the cavity test")
        cavity = {t0}
        stack = [t0]
        boundary = []
        while stack:
            tid = stack.pop()
            a, b, c = self.tri[tid]
            for u, v in ((a, b), (b, c), (c, a)):
                nb = self.edge2tri[(v, u)]
                if nb in cavity:
                    continue
                if self._in_cavity(nb, qx, qy, qid):
                    cavity.add(nb)
                    stack.append(nb)
                else:
                    boundary.append((u, v))
        for tid in cavity:
            self._drop(tid)
        for u, v in boundary:
            if u == GHOST:
                self._add(v, qid, GHOST)
            elif v == GHOST:
                self._add(qid, u, GHOST)
            else:
                self._add(u, v, qid)

    def real_cells(self):
        return [t for t in self.tri.values() if GHOST not in t]


def _serpentine_order(pts, lex):
    """Insertion order with short point-location walks: sweep x in roughly
    sqrt(n) bins, alternating the y direction per bin so consecutive
    insertions stay spatially adjacent."""
    n = len(pts)
    xmin, xmax = float(pts[:, 0].min()), float(pts[:, 0].max())
    span = xmax - xmin
    if span == 0.0 or n < 16:
        return lex
    nbins = max(1, math.isqrt(n))
    width = span / nbins
    col = np.minimum(((pts[:, 0] - xmin) / width).astype(np.int64), nbins - 1)
    ys = np.where(col % 2 == 0, pts[:, 1], -pts[:, 1])
    return np.lexsort((np.arange(n), ys, col))


def delaunay_2d(points, *, provenance=None, verify=True) -> TriangulationComplex:
    """Delaunay triangulation of >= 3 generic planar points.

    Raises ``NonGenericError`` on cocircular 4-tuples encountered during
    construction or verification, ``DegenerateSimplexError`` if all points
    are collinear, and ``ValueError`` on duplicates.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n < 3 or pts.shape[1] != 2:
        raise DegenerateSimplexError("delaunay_2d needs at least 3 planar points")
    lex = np.lexsort((pts[:, 1], pts[:, 0]))
    for s, t in zip(lex, lex[1:]):
        if pts[s][0] == pts[t][0] and pts[s][1] == pts[t][1]:
            raise ValueError(f"duplicate points {int(s)} and {int(t)}")
    order = _serpentine_order(pts, lex)

    coords = [tuple(map(float, p)) for p in pts]
    i0, i1 = int(order[0]), int(order[1])
    k = next(
        (
            int(order[m])
            for m in range(2, n)
            if orient2d(*coords[i0], *coords[i1], *coords[int(order[m])]) != 0
        ),
        None,
    )
    if k is None:
        raise DegenerateSimplexError("all points are collinear")

    mesh = _Mesh2D(coords)
    mesh.seed(i0, i1, k)
    for idx in order[2:]:
        idx = int(idx)
        if idx == k:
            continue
        mesh.insert(idx)

    cx = build_complex(pts, mesh.real_cells(), provenance=provenance or {})
    used = cx.vertices_used()
    if len(used) != n:
        raise InvalidComplexError("a point ended up unused by the triangulation")
    if verify:
        verify_empty_circumspheres(cx)
    return cx


# ---------------------------------------------------------------------------
# emptiness verification (the independent oracle for both builders)


def verify_empty_circumspheres(
    cx: TriangulationComplex, *, exhaustive_limit=200, samples=2000, seed=0
):
    """Check the defining property of the Delaunay triangulation: no vertex
    lies inside the circumsphere of any cell.

    Exhaustive up to ``exhaustive_limit`` points, randomly sampled above.
    Raises ``InvalidComplexError`` on an inside vertex and
    ``NonGenericError`` on a cospherical one.
    """
    n = len(cx.points)
    cells = cx.cells
    pairs: list
    if n <= exhaustive_limit:
        pairs = [(cell, v) for cell in cells for v in range(n) if v not in cell]
    else:
        rng = np.random.default_rng(seed)
        pairs = []
        for _ in range(samples):
            cell = cells[int(rng.integers(len(cells)))]
            v = int(rng.integers(n))
            if v not in cell:
                pairs.append((cell, v))
    for cell, v in pairs:
        side = in_sphere(cx.cell_coords(cell), cx.points[v])
        if side == Side.INSIDE:
            raise InvalidComplexError(
                f"vertex {v} lies inside the circumsphere of cell {cell}"
            )
        if side == Side.ON:
            raise NonGenericError(f"vertex {v} is cospherical with cell {cell}")


# ---------------------------------------------------------------------------
# 3D construction via the lifted lower hull


def _orientation4_sign(rows_base, apex) -> int:
    """Exact orientation of 5 points in R^4 given as (4 rows, apex)."""
    mat = np.vstack([rows_base, apex])
    return orientation(mat)


def _collinear_3d(a, b, c) -> bool:
    """Exact collinearity of three points in R^3 via the cross-product minors."""
    u = [Fraction(float(b[i])) - Fraction(float(a[i])) for i in range(3)]
    v = [Fraction(float(c[i])) - Fraction(float(a[i])) for i in range(3)]
    return (
        u[1] * v[2] == u[2] * v[1]
        and u[2] * v[0] == u[0] * v[2]
        and u[0] * v[1] == u[1] * v[0]
    )


def _find_affine_basis_3d(pts) -> bool:
    """True iff the points affinely span R^3 (greedy, exact, linear scans)."""
    n = len(pts)
    if n < 4:
        return False
    base = 0
    second = next((i for i in range(n) if not np.array_equal(pts[i], pts[base])), None)
    if second is None:
        return False
    third = next(
        (i for i in range(n) if not _collinear_3d(pts[base], pts[second], pts[i])),
        None,
    )
    if third is None:
        return False
    rows = [base, second, third]
    return any(
        orientation(pts[rows + [i]]) != 0 for i in range(n) if i not in rows
    )


def delaunay_3d(points, *, provenance=None, verify=True) -> TriangulationComplex:
    """Delaunay triangulation of >= 5 generic points in R^3, computed as the
    vertical projection of the lower convex hull of the lifted points."""
    from scipy.spatial import ConvexHull, QhullError

    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n < 5 or pts.shape[1] != 3:
        raise DegenerateSimplexError("delaunay_3d needs at least 5 points in R^3")
    if len(np.unique(pts, axis=0)) != n:
        raise ValueError("duplicate points")
    if not _find_affine_basis_3d(pts):
        raise DegenerateSimplexError("all points are coplanar")

    lifted = np.array([lift(p) for p in pts])
    try:
        hull = ConvexHull(lifted, qhull_options="Qt")
    except QhullError as exc:
        raise NonGenericError(f"lifted hull is degenerate: {exc}") from exc

    interior = lifted.mean(axis=0)
    cells = set()
    for facet in hull.simplices:
        base = lifted[facet]
        below = base.mean(axis=0)
        below[3] -= 1.0
        s_down = _orientation4_sign(base, below)
        if s_down == 0:
            continue  # vertical facet (coplanar window-boundary points)
        s_in = _orientation4_sign(base, interior)
        if s_in == 0:
            raise NonGenericError("lifted hull has a facet through its centroid")
        if s_in == s_down:
            continue  # hull lies below the facet: an upper facet
        cell = tuple(sorted(int(v) for v in facet))
        if orientation(pts[list(cell)]) == 0:
            # a coplanar 4-tuple on the window boundary lifts to a lower
            # facet whose projection is flat; it is not a 3-cell
            continue
        cells.add(cell)

    cx = build_complex(pts, cells, provenance=provenance or {})
    used = cx.vertices_used()
    if len(used) != n:
        raise NonGenericError("a point is missing from the lower hull projection")
    if verify:
        verify_empty_circumspheres(cx)
    return cx


def delaunay_of(points, *, provenance=None, verify=True) -> TriangulationComplex:
    pts = np.asarray(points, dtype=float)
    if pts.shape[1] == 2:
        return delaunay_2d(pts, provenance=provenance, verify=verify)
    if pts.shape[1] == 3:
        return delaunay_3d(pts, provenance=provenance, verify=verify)
    raise ValueError("only dimensions 2 and 3 are supported")


# ---------------------------------------------------------------------------
# Radon two-triangulations of d+2 points


def radon_two_triangulations(points):
    """Split the non-degenerate d-simplices spanned by d+2 generic points in
    convex position into the Delaunay triangulation and the other one.

    The leave-one-out simplex omitting vertex v is Delaunay iff v lies
    outside its circumsphere; the pair realizes the directed flip T -> D.
    """
    pts = np.asarray(points, dtype=float)
    n, d = pts.shape
    if n != d + 2:
        raise ValueError("radon_two_triangulations needs exactly d+2 points")
    lower, upper = [], []
    for i in range(n):
        rest = [j for j in range(n) if j != i]
        simplex = pts[rest]
        if orientation(simplex) == 0:
            raise NonGenericError(f"points without {i} are affinely degenerate")
        if point_in_simplex(simplex, pts[i]):
            raise ValueError(
                f"point {i} lies inside the convex hull of the others"
            )
        side = in_sphere(simplex, pts[i])
        if side == Side.ON:
            raise NonGenericError(f"all {n} points are cospherical")
        cell = tuple(rest)
        if side == Side.OUTSIDE:
            lower.append(cell)
        else:
            upper.append(cell)
    dcx = build_complex(pts, lower)
    tcx = build_complex(pts, upper)
    return dcx, tcx


# ---------------------------------------------------------------------------
# restriction of a Delaunay triangulation to a region


def _clip_polygon_halfplane(poly, a, b):
    """Sutherland-Hodgman step: keep the part of ``poly`` left of a->b."""
    out = []
    m = len(poly)
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        sp = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
        sq = (b[0] - a[0]) * (q[1] - a[1]) - (b[1] - a[1]) * (q[0] - a[0])
        if sp >= 0:
            out.append(p)
        if (sp > 0 > sq) or (sp < 0 < sq):
            t = sp / (sp - sq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def _poly_area(poly) -> float:
    s = 0.0
    m = len(poly)
    for i in range(m):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % m]
        s += x1 * y2 - x2 * y1
    return abs(s) / 2.0


def _tri_intersection_area(t1, t2) -> float:
    poly = [tuple(p) for p in t1]
    a, b, c = [tuple(p) for p in t2]
    if orient2d(*a, *b, *c) < 0:
        a, b, c = a, c, b
    for u, v in ((a, b), (b, c), (c, a)):
        poly = _clip_polygon_halfplane(poly, u, v)
        if len(poly) < 3:
            return 0.0
    return _poly_area(poly)


def _tet_intersection_volume(t1, t2) -> float:
    """Volume of the intersection of two tetrahedra (vertex enumeration)."""
    from scipy.spatial import ConvexHull, QhullError

    candidates = []
    for a, bset in ((t1, t2), (t2, t1)):
        for v in a:
            if point_in_simplex(bset, v):
                candidates.append(tuple(v))
    # edge-face crossing points, both ways
    for a, bset in ((t1, t2), (t2, t1)):
        for i, j in itertools.combinations(range(4), 2):
            p, q = np.asarray(a[i], float), np.asarray(a[j], float)
            for face in itertools.combinations(range(4), 3):
                tri = np.asarray(bset, float)[list(face)]
                pt = _segment_triangle_intersection(p, q, tri)
                if pt is not None:
                    candidates.append(tuple(pt))
    if len(candidates) < 4:
        return 0.0
    arr = np.unique(np.round(np.array(candidates), 12), axis=0)
    if len(arr) < 4:
        return 0.0
    try:
        return float(ConvexHull(arr, qhull_options="QJ").volume)
    except QhullError:
        return 0.0


def _segment_triangle_intersection(p, q, tri):
    n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    denom = n @ (q - p)
    if abs(denom) < 1e-14:
        return None
    t = (n @ (tri[0] - p)) / denom
    if not (0.0 <= t <= 1.0):
        return None
    x = p + t * (q - p)
    # barycentric containment check
    for i in range(3):
        a, b = tri[i], tri[(i + 1) % 3]
        if np.cross(b - a, x - a) @ n < -1e-12 * max(1.0, float(n @ n)):
            return None
    return x


def restrict_delaunay(
    dcx: TriangulationComplex, region: TriangulationComplex
) -> TriangulationComplex:
    """Subcomplex of the cells of ``dcx`` whose closed cells lie in the
    underlying space of ``region`` (containment decided by intersection
    measure, so non-convex regions are handled correctly)."""
    region_cells = set(region.cells)
    region_coords = [region.cell_coords(c) for c in region.cells]
    kept = []
    for cell in dcx.cells:
        if cell in region_cells and np.shares_memory(dcx.points, region.points):
            kept.append(cell)
            continue
        coords = dcx.cell_coords(cell)
        vol = measure(coords)
        if vol == 0.0:
            continue
        if dcx.dim == 2:
            covered = sum(_tri_intersection_area(coords, rc) for rc in region_coords)
        else:
            covered = sum(_tet_intersection_volume(coords, rc) for rc in region_coords)
        if covered >= vol * (1.0 - 1e-9):
            kept.append(cell)
    return build_complex(dcx.points, kept, check_coverage=False,
                         provenance=dict(dcx.provenance))
