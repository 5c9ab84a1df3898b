import numpy as np
import pytest

from delone.delaunay import (
    delaunay_2d,
    delaunay_3d,
    radon_two_triangulations,
    restrict_delaunay,
    verify_empty_circumspheres,
)
from delone.errors import DegenerateSimplexError, NonGenericError
from delone.triangulation import build_complex, legalize_to_delaunay


def jittered_grid_2d(n, seed, eta=1e-6):
    rng = np.random.default_rng(seed)
    g = np.arange(n, dtype=float)
    xs, ys = np.meshgrid(g, g)
    pts = np.c_[xs.ravel(), ys.ravel()]
    return pts + rng.uniform(-eta, eta, pts.shape)


def test_one_interior_point_star():
    pts = [(0.0, 0.0), (4.0, 0.0), (2.0, 3.0), (2.0, 1.0)]
    cx = delaunay_2d(pts)
    assert cx.n_cells == 3
    assert all(3 in cell for cell in cx.cells)
    verify_empty_circumspheres(cx)  # independent emptiness oracle


def test_quadrilateral_takes_locally_delaunay_diagonal():
    from delone.triangulation import is_locally_delaunay

    pts = [(0.0, 0.0), (3.0, 0.0), (3.2, 1.1), (0.0, 1.0)]
    cx = delaunay_2d(pts)
    (facet,) = cx.interior_facets()
    assert is_locally_delaunay(cx, facet)


def test_jittered_grid_empty_circumcircles():
    pts = jittered_grid_2d(10, seed=0)
    cx = delaunay_2d(pts)  # verify=True runs the exhaustive scan (100 points)
    from scipy.spatial import ConvexHull

    hull_size = len(ConvexHull(pts).vertices)
    assert cx.n_cells == 2 * len(pts) - 2 - hull_size  # Euler relation
    out, records = legalize_to_delaunay(cx)
    assert records == []


def test_unjittered_square_grid_is_nongeneric():
    g = np.arange(3, dtype=float)
    xs, ys = np.meshgrid(g, g)
    pts = np.c_[xs.ravel(), ys.ravel()]
    with pytest.raises(NonGenericError):
        delaunay_2d(pts)


def test_collinear_rejected():
    with pytest.raises(DegenerateSimplexError):
        delaunay_2d([(0, 0), (1, 0), (2, 0), (3, 0)])


def test_duplicates_rejected():
    with pytest.raises(ValueError):
        delaunay_2d([(0, 0), (1, 0), (0, 1), (1, 0)])


def test_big_random_cloud_sampled_verification():
    rng = np.random.default_rng(42)
    pts = rng.uniform(size=(500, 2)) * 20
    cx = delaunay_2d(pts)  # sampled emptiness verification path
    assert cx.n_cells > 900


def test_delaunay_3d_tet_plus_centroid():
    tet = np.array([(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)], dtype=float)
    pts = np.vstack([tet, tet.mean(axis=0)[None, :]])
    cx = delaunay_3d(pts)
    assert cx.n_cells == 4
    assert all(4 in cell for cell in cx.cells)


def test_delaunay_3d_jittered_grid():
    rng = np.random.default_rng(1)
    g = np.arange(3, dtype=float)
    xs, ys, zs = np.meshgrid(g, g, g)
    pts = np.c_[xs.ravel(), ys.ravel(), zs.ravel()]
    pts = pts + rng.uniform(-1e-6, 1e-6, pts.shape)
    cx = delaunay_3d(pts)  # exhaustive emptiness scan at 27 points
    from scipy.spatial import ConvexHull

    assert cx.cell_measures().sum() == pytest.approx(
        ConvexHull(pts).volume, rel=1e-9
    )


def test_delaunay_3d_distorted_cube_is_seven_tetrahedra():
    pts = []
    for i in (0, 1):
        for j in (0, 1):
            for k in (0, 1):
                d = 1.0 / (2 + abs(k))
                pts.append((float(i), float(j), k + ((-1) ** (i + j)) * d))
    cx = delaunay_3d(np.array(pts))
    assert cx.n_cells == 7


def test_delaunay_3d_coplanar_rejected():
    pts = np.zeros((6, 3))
    pts[:, 0] = np.arange(6)
    pts[:, 1] = np.arange(6) ** 2
    with pytest.raises(DegenerateSimplexError):
        delaunay_3d(pts)


def test_lower_hull_matches_exhaustive_emptiness():
    # oracle equivalence: every cell of the lower-hull route passes the
    # brute-force in_sphere scan, and the cells tile the hull volume
    rng = np.random.default_rng(7)
    for _ in range(5):
        pts = rng.normal(size=(40, 3))
        cx = delaunay_3d(pts)
        from scipy.spatial import ConvexHull

        assert cx.cell_measures().sum() == pytest.approx(
            ConvexHull(pts).volume, rel=1e-9
        )


def test_radon_2d_two_diagonals():
    pts = [(0.0, 0.0), (3.0, 0.0), (3.2, 1.1), (0.0, 1.0)]
    D, T = radon_two_triangulations(pts)
    assert D.n_cells == 2 and T.n_cells == 2
    assert set(D.cells) | set(T.cells) == {
        (0, 1, 2), (0, 2, 3), (0, 1, 3), (1, 2, 3)
    }
    assert not set(D.cells) & set(T.cells)
    # D is the Delaunay pair
    assert sorted(D.cells) == sorted(delaunay_2d(pts).cells)


def test_radon_3d_bipyramid():
    rng = np.random.default_rng(10)
    seen = 0
    while seen < 10:
        pts = rng.normal(size=(5, 3))
        try:
            D, T = radon_two_triangulations(pts)
        except ValueError:
            continue  # a point inside the hull of the others
        seen += 1
        assert {D.n_cells, T.n_cells} == {2, 3}
        assert D.cell_measures().sum() == pytest.approx(
            T.cell_measures().sum(), rel=1e-9
        )


def test_radon_rejects_interior_point():
    pts = [(0.0, 0.0), (4.0, 0.0), (2.0, 3.0), (2.0, 1.0)]
    with pytest.raises(ValueError):
        radon_two_triangulations(pts)


def test_radon_rejects_cocircular():
    with pytest.raises(NonGenericError):
        radon_two_triangulations([(0, 0), (1, 0), (1, 1), (0, 1)])


def test_restrict_delaunay_full_and_single():
    rng = np.random.default_rng(3)
    pts = rng.uniform(size=(12, 2)) * 5
    D = delaunay_2d(pts)
    assert sorted(restrict_delaunay(D, D).cells) == sorted(D.cells)
    single = build_complex(D.points, [D.cells[0]], check_coverage=False)
    assert restrict_delaunay(D, single).cells == [D.cells[0]]


def test_restrict_delaunay_radon_other_triangulation():
    pts = [(0.0, 0.0), (3.0, 0.0), (3.2, 1.1), (0.0, 1.0)]
    D, T = radon_two_triangulations(pts)
    assert sorted(restrict_delaunay(D, T).cells) == sorted(D.cells)


def test_restrict_delaunay_nonconvex_region_not_overcounted():
    # an L-shaped union: cells of D spanning the notch must be excluded
    pts = np.array([
        (0.0, 0.0), (2.0, 0.1), (4.0, 0.0),
        (0.0, 2.0), (1.9, 2.1), (4.1, 2.0),
    ])
    D = delaunay_2d(pts)
    region_cells = [c for c in D.cells if 4 not in c]
    region = build_complex(pts, region_cells, check_coverage=False)
    restricted = restrict_delaunay(D, region)
    assert sorted(restricted.cells) == sorted(region_cells)
