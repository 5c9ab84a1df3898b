import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from delone.errors import DegenerateSimplexError
from delone.geometry import (
    Side,
    area_via_circumradius,
    centroid,
    circumradius,
    circumsphere,
    in_sphere,
    inradius_2d,
    lift,
    measure,
    orientation,
    point_in_simplex,
)

TRI_345 = [(0.0, 0.0), (4.0, 0.0), (0.0, 3.0)]
UNIT_TET = [(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)]


def random_rigid_motion(rng, d):
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    t = rng.normal(scale=10.0, size=d)
    return lambda pts: pts @ q.T + t


def test_orientation_triangle():
    assert orientation([(0, 0), (1, 0), (0, 1)]) == 1
    assert orientation([(0, 0), (0, 1), (1, 0)]) == -1


def test_orientation_collinear():
    assert orientation([(0, 0), (1, 0), (2, 0)]) == 0


def test_orientation_standard_simplex_3d():
    assert orientation(UNIT_TET) == 1


def test_orientation_exactness_near_degenerate():
    # Points collinear up to an offset of one ulp must still be resolved.
    eps = math.ulp(1.0)
    assert orientation([(0, 0), (1, 0), (2, eps)]) == 1
    assert orientation([(0, 0), (1, 0), (2, -eps)]) == -1
    assert orientation([(0, 0), (1, 0), (2, 0)]) == 0


def test_in_sphere_inside():
    # circumcircle of the 3-4-5 triangle: center (2, 1.5), radius 2.5
    assert in_sphere(TRI_345, (1.0, 1.0)) == Side.INSIDE


def test_in_sphere_on():
    # (0,0),(1,0),(0,1),(1,1) all lie on the circle with center (.5,.5)
    assert in_sphere([(0, 0), (1, 0), (0, 1)], (1, 1)) == Side.ON


def test_in_sphere_outside():
    assert in_sphere(TRI_345, (10.0, 10.0)) == Side.OUTSIDE


def test_in_sphere_vertices_on():
    for v in TRI_345:
        assert in_sphere(TRI_345, v) == Side.ON
    for v in UNIT_TET:
        assert in_sphere(UNIT_TET, v) == Side.ON


def test_in_sphere_3d():
    c = circumsphere(UNIT_TET)
    assert in_sphere(UNIT_TET, c.center) == Side.INSIDE
    assert in_sphere(UNIT_TET, (5.0, 5.0, 5.0)) == Side.OUTSIDE


def test_in_sphere_permutation_invariance():
    rng = np.random.default_rng(5)
    pts = rng.normal(size=(4, 3))
    q = rng.normal(size=3)
    ref = in_sphere(pts, q)
    # even permutation
    assert in_sphere(pts[[1, 2, 0, 3]], q) == ref
    # odd permutation flips the raw determinant but not the classification
    assert in_sphere(pts[[1, 0, 2, 3]], q) == ref


def test_in_sphere_matches_metric_oracle():
    rng = np.random.default_rng(11)
    for _ in range(200):
        tri = rng.normal(scale=3.0, size=(3, 2))
        if orientation(tri) == 0:
            continue
        q = rng.normal(scale=3.0, size=2)
        sph = circumsphere(tri)
        gap = np.linalg.norm(q - sph.center) - sph.radius
        if abs(gap) < 1e-7:
            continue  # too close to the circle for the float oracle
        want = Side.INSIDE if gap < 0 else Side.OUTSIDE
        assert in_sphere(tri, q) == want


def test_measure():
    assert measure(TRI_345) == pytest.approx(6.0, abs=1e-12)
    assert measure(UNIT_TET) == pytest.approx(1 / 6, rel=1e-12)
    assert measure([(0, 0), (1, 0), (2, 0)]) == 0.0


def test_circumsphere_345():
    c = circumsphere(TRI_345)
    assert c.center == pytest.approx([2.0, 1.5], abs=1e-12)
    assert c.radius == pytest.approx(2.5, abs=1e-12)


def test_circumsphere_equilateral():
    tri = [(0, 0), (1, 0), (0.5, math.sqrt(3) / 2)]
    assert circumradius(tri) == pytest.approx(1 / math.sqrt(3), rel=1e-12)


def test_circumsphere_regular_tetrahedron():
    tet = [
        (0, 0, 0),
        (1, 0, 0),
        (0.5, math.sqrt(3) / 2, 0),
        (0.5, math.sqrt(3) / 6, math.sqrt(2 / 3)),
    ]
    assert circumradius(tet) == pytest.approx(math.sqrt(3 / 8), rel=1e-9)


def test_circumsphere_degenerate_raises():
    with pytest.raises(DegenerateSimplexError):
        circumsphere([(0, 0), (1, 0), (2, 0)])


def test_area_via_circumradius():
    assert area_via_circumradius(5, 4, 3, 2.5) == pytest.approx(6.0, abs=1e-12)
    assert area_via_circumradius(1, 1, 1, 1 / math.sqrt(3)) == pytest.approx(
        math.sqrt(3) / 4, rel=1e-12
    )


def test_area_via_circumradius_invalid():
    with pytest.raises(ValueError):
        area_via_circumradius(1, 1, 3, 1.0)
    with pytest.raises(ValueError):
        area_via_circumradius(3, 4, 5, 0.0)


def test_area_lower_bound_from_spacing():
    # triangles with edges >= 2r and circumradius <= q have area >= 2 r^3 / q
    rng = np.random.default_rng(7)
    r, q = 0.5, 1.25
    found = 0
    while found < 200:
        rho = rng.uniform(2 * r / math.sqrt(3), q)
        ang = np.sort(rng.uniform(0, 2 * math.pi, size=3))
        tri = rho * np.c_[np.cos(ang), np.sin(ang)]
        e = [np.linalg.norm(tri[i] - tri[j]) for i, j in ((0, 1), (1, 2), (0, 2))]
        if min(e) < 2 * r:
            continue
        found += 1
        assert measure(tri) >= 2 * r**3 / q - 1e-12


def test_agreement_area_formulas():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        tri = rng.normal(scale=5.0, size=(3, 2))
        area = measure(tri)
        if area < 1e-6:
            continue
        a = np.linalg.norm(tri[0] - tri[1])
        b = np.linalg.norm(tri[1] - tri[2])
        c = np.linalg.norm(tri[0] - tri[2])
        rho = circumradius(tri)
        assert area_via_circumradius(a, b, c, rho) == pytest.approx(area, rel=1e-9)


def test_lift():
    assert lift((1.0, 2.0)).tolist() == [1.0, 2.0, 5.0]
    assert lift((0.0, 0.0)).tolist() == [0.0, 0.0, 0.0]
    assert lift((3.0, 4.0)).tolist() == [3.0, 4.0, 25.0]


def test_lift_exact_on_graph():
    rng = np.random.default_rng(2)
    for _ in range(50):
        p = rng.normal(scale=100.0, size=3)
        lp = lift(p)
        assert lp[-1] == float(p @ p)  # bit-exact by construction


def test_inradius_345():
    assert inradius_2d([(0, 0), (3, 0), (0, 4)]) == pytest.approx(1.0, abs=1e-12)


def test_centroid():
    assert centroid(TRI_345) == pytest.approx([4 / 3, 1.0], abs=1e-12)


def test_equilateral_centroid_is_circumcenter():
    tri = np.array([(0, 0), (1, 0), (0.5, math.sqrt(3) / 2)])
    assert np.linalg.norm(centroid(tri) - circumsphere(tri).center) < 1e-12


def test_rigid_motion_invariance():
    rng = np.random.default_rng(42)
    for d in (2, 3):
        for _ in range(50):
            pts = rng.normal(scale=4.0, size=(d + 1, d))
            if orientation(pts) == 0:
                continue
            move = random_rigid_motion(rng, d)
            moved = move(pts)
            assert measure(moved) == pytest.approx(measure(pts), rel=1e-9)
            assert circumradius(moved) == pytest.approx(circumradius(pts), rel=1e-9)


def test_point_in_simplex():
    assert point_in_simplex(TRI_345, (1.0, 1.0))
    assert not point_in_simplex(TRI_345, (4.0, 3.0))
    assert point_in_simplex(TRI_345, (0.0, 0.0))  # vertex, closed
    assert not point_in_simplex(TRI_345, (0.0, 0.0), closed=False)
    assert point_in_simplex(UNIT_TET, (0.1, 0.1, 0.1))
    assert not point_in_simplex(UNIT_TET, (1.0, 1.0, 1.0))


@settings(max_examples=200, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.floats(-100, 100, allow_nan=False),
            st.floats(-100, 100, allow_nan=False),
        ),
        min_size=3,
        max_size=3,
    ),
    st.tuples(st.floats(-100, 100), st.floats(-100, 100)),
)
def test_in_sphere_total_on_nondegenerate(tri, q):
    if orientation(tri) == 0:
        return
    assert in_sphere(tri, q) in (Side.INSIDE, Side.ON, Side.OUTSIDE)
