"""Exact-leaning low-level geometry.

Sign predicates (orientation, in-sphere) are evaluated with a floating-point
filter backed by exact rational arithmetic, so combinatorial decisions are
never wrong.  Metric quantities (volumes, radii) are plain floating point and
are compared with the relative tolerance ``TAU_GEO``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from fractions import Fraction
import numpy as np

from .errors import DegenerateSimplexError

# Relative tolerance for metric (non-combinatorial) comparisons.
TAU_GEO = 1e-9

# A filtered determinant whose magnitude is below _FILTER_EPS times the
# Hadamard-style row bound is re-evaluated exactly.  Naive cofactor expansion
# of an n <= 5 matrix has a relative error well below 1e-13, so 1e-11 leaves
# two orders of magnitude of safety.
_FILTER_EPS = 1e-11


class Side(IntEnum):
    OUTSIDE = -1
    ON = 0
    INSIDE = 1


# ---------------------------------------------------------------------------
# determinants (generic over float / Fraction entries)

def _det2(m):
    return m[0][0] * m[1][1] - m[0][1] * m[1][0]


def _det3(m):
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )


def _det4(m):
    out = 0
    sign = 1
    for col in range(4):
        minor = [[m[r][c] for c in range(4) if c != col] for r in (1, 2, 3)]
        out = out + sign * m[0][col] * _det3(minor)
        sign = -sign
    return out


_DETS = {2: _det2, 3: _det3, 4: _det4}


def _filtered_det_sign(rows_float, rows_exact) -> int:
    """Sign of det(rows), exact.

    ``rows_float`` are float rows used for the fast path; ``rows_exact`` is a
    zero-argument callable producing the same matrix with Fraction entries.
    """
    n = len(rows_float)
    det = _DETS[n](rows_float)
    bound = 1.0
    for row in rows_float:
        bound *= sum(abs(x) for x in row)
    if abs(det) > _FILTER_EPS * bound:
        return 1 if det > 0 else -1
    det = _DETS[n](rows_exact())
    if det > 0:
        return 1
    if det < 0:
        return -1
    return 0


def orientation(simplex) -> int:
    """Orientation sign of d+1 points in R^d: +1, -1, or 0 (degenerate).

    (0,0),(1,0),(0,1) is positively oriented, as is the standard 3-simplex.
    """
    pts = np.asarray(simplex, dtype=float)
    n, d = pts.shape
    if n != d + 1:
        raise ValueError(f"orientation needs d+1 points of dimension d, got {n}x{d}")
    base = pts[0]
    rows = [[float(pts[i][j] - base[j]) for j in range(d)] for i in range(1, n)]

    def exact():
        fb = [Fraction(float(x)) for x in base]
        return [
            [Fraction(float(pts[i][j])) - fb[j] for j in range(d)]
            for i in range(1, n)
        ]

    return _filtered_det_sign(rows, exact)


def in_sphere(simplex, point) -> Side:
    """Classify ``point`` against the circumsphere of a non-degenerate simplex."""
    pts = np.asarray(simplex, dtype=float)
    q = np.asarray(point, dtype=float)
    n, d = pts.shape
    if n != d + 1 or q.shape != (d,):
        raise ValueError("in_sphere needs a d-simplex and a d-point")
    orient = orientation(pts)
    if orient == 0:
        raise DegenerateSimplexError("in_sphere: degenerate simplex")

    rows = []
    for i in range(n):
        diff = [float(pts[i][j] - q[j]) for j in range(d)]
        rows.append(diff + [sum(x * x for x in diff)])

    def exact():
        fq = [Fraction(float(x)) for x in q]
        out = []
        for i in range(n):
            diff = [Fraction(float(pts[i][j])) - fq[j] for j in range(d)]
            out.append(diff + [sum(x * x for x in diff)])
        return out

    s = _filtered_det_sign(rows, exact) * orient
    if s == 0:
        return Side.ON
    # The translated lifted determinant is positive-inside in even dimension
    # and negative-inside in odd dimension.
    inside_sign = 1 if d % 2 == 0 else -1
    return Side.INSIDE if s == inside_sign else Side.OUTSIDE


# ---------------------------------------------------------------------------
# metric quantities

@dataclass(frozen=True)
class Circumsphere:
    center: np.ndarray
    radius: float


def measure(simplex) -> float:
    """d-dimensional volume |det|/d! of a simplex; 0 if degenerate."""
    pts = np.asarray(simplex, dtype=float)
    n, d = pts.shape
    if n != d + 1:
        raise ValueError("measure needs d+1 points of dimension d")
    det = np.linalg.det(pts[1:] - pts[0])
    return abs(det) / math.factorial(d)


def circumsphere(simplex) -> Circumsphere:
    """Circumcenter and circumradius of a non-degenerate simplex."""
    pts = np.asarray(simplex, dtype=float)
    if orientation(pts) == 0:
        raise DegenerateSimplexError("degenerate simplex has no circumsphere")
    a = 2.0 * (pts[1:] - pts[0])
    b = (pts[1:] ** 2).sum(axis=1) - (pts[0] ** 2).sum()
    center = np.linalg.solve(a, b)
    dists = np.linalg.norm(pts - center, axis=1)
    radius = float(dists.mean())
    if dists.max() - dists.min() > TAU_GEO * max(radius, 1.0):
        raise DegenerateSimplexError("circumsphere solve lost accuracy")
    return Circumsphere(center=center, radius=radius)


def circumradius(simplex) -> float:
    return circumsphere(simplex).radius


def area_via_circumradius(a: float, b: float, c: float, rho: float) -> float:
    """Triangle area from its edge lengths and circumradius: a*b*c/(4*rho)."""
    if rho <= 0:
        raise ValueError("circumradius must be positive")
    if a + b <= c or b + c <= a or a + c <= b:
        raise ValueError("edge lengths violate the triangle inequality")
    return a * b * c / (4.0 * rho)


def lift(p) -> np.ndarray:
    """Lift a d-point onto the unit paraboloid in R^{d+1}: x -> (x, |x|^2)."""
    p = np.asarray(p, dtype=float)
    return np.concatenate([p, [float(p @ p)]])


def centroid(simplex) -> np.ndarray:
    return np.asarray(simplex, dtype=float).mean(axis=0)


def inradius_2d(triangle) -> float:
    """Inradius of a non-degenerate triangle: area / semiperimeter."""
    pts = np.asarray(triangle, dtype=float)
    if pts.shape != (3, 2):
        raise ValueError("inradius_2d needs a triangle in the plane")
    area = measure(pts)
    if area == 0.0:
        raise DegenerateSimplexError("degenerate triangle has no inradius")
    a = np.linalg.norm(pts[1] - pts[2])
    b = np.linalg.norm(pts[0] - pts[2])
    c = np.linalg.norm(pts[0] - pts[1])
    return float(2.0 * area / (a + b + c))


def edge_lengths(simplex) -> np.ndarray:
    """Lengths of all C(d+1, 2) edges, in index order of the vertex pairs."""
    pts = np.asarray(simplex, dtype=float)
    n = len(pts)
    return np.array(
        [np.linalg.norm(pts[i] - pts[j]) for i in range(n) for j in range(i + 1, n)]
    )


def squared_norm(p) -> float:
    p = np.asarray(p, dtype=float)
    return float(p @ p)


# Fast 2D shims used by the incremental builder; same exactness guarantees.

def orient2d(ax, ay, bx, by, cx, cy) -> int:
    ux, uy = bx - ax, by - ay
    vx, vy = cx - ax, cy - ay
    det = ux * vy - uy * vx
    bound = (abs(ux) + abs(uy)) * (abs(vx) + abs(vy))
    if det > _FILTER_EPS * bound:
        return 1
    if det < -_FILTER_EPS * bound:
        return -1
    fax, fay = Fraction(ax), Fraction(ay)
    det = (Fraction(bx) - fax) * (Fraction(cy) - fay) - (
        Fraction(by) - fay
    ) * (Fraction(cx) - fax)
    return 1 if det > 0 else (-1 if det < 0 else 0)


def incircle2d(ax, ay, bx, by, cx, cy, qx, qy) -> int:
    """Sign of the incircle determinant; positive iff q is strictly inside the
    circle through a counterclockwise a, b, c."""
    adx, ady = ax - qx, ay - qy
    bdx, bdy = bx - qx, by - qy
    cdx, cdy = cx - qx, cy - qy
    ad = adx * adx + ady * ady
    bd = bdx * bdx + bdy * bdy
    cd = cdx * cdx + cdy * cdy
    det = (
        adx * (bdy * cd - bd * cdy)
        - ady * (bdx * cd - bd * cdx)
        + ad * (bdx * cdy - bdy * cdx)
    )
    bound = (
        (abs(adx) + abs(ady) + ad)
        * (abs(bdx) + abs(bdy) + bd)
        * (abs(cdx) + abs(cdy) + cd)
    )
    if det > _FILTER_EPS * bound:
        return 1
    if det < -_FILTER_EPS * bound:
        return -1
    fqx, fqy = Fraction(qx), Fraction(qy)
    rows = []
    for px, py in ((ax, ay), (bx, by), (cx, cy)):
        dx, dy = Fraction(px) - fqx, Fraction(py) - fqy
        rows.append([dx, dy, dx * dx + dy * dy])
    det = _det3(rows)
    return 1 if det > 0 else (-1 if det < 0 else 0)


def segments_cross(p1, p2, q1, q2) -> bool:
    """True iff the open segments p1p2 and q1q2 properly intersect."""
    o1 = orient2d(*p1, *p2, *q1)
    o2 = orient2d(*p1, *p2, *q2)
    o3 = orient2d(*q1, *q2, *p1)
    o4 = orient2d(*q1, *q2, *p2)
    return o1 * o2 < 0 and o3 * o4 < 0


def point_in_simplex(simplex, point, closed: bool = True) -> bool:
    """Exact point-in-simplex test via orientation signs."""
    pts = np.asarray(simplex, dtype=float)
    n = len(pts)
    ref = orientation(pts)
    if ref == 0:
        return False
    q = np.asarray(point, dtype=float)
    for i in range(n):
        face = np.vstack([pts[:i], pts[i + 1:], q[None, :]])
        s = orientation(face) * (1 if (n - 1 - i) % 2 == 0 else -1)
        if s * ref < 0:
            return False
        if s == 0 and not closed:
            return False
    return True
