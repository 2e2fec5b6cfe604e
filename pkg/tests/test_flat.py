import itertools
import math

import numpy as np
import pytest

from cp1lab.qdiff import (
    GluingError, HalfTranslationSurface, SurfacePoint, detect_cylinders, flat_geodesic, l_shaped_surface,
    regular_octagon_surface, square_torus,
)

L_SQUARES = [0, 1, 1j]       # lower-left corners of the three unit squares
L_PAIRS = [((0, 1), (1, 3)), ((1, 1), (0, 3)), ((0, 2), (2, 0)), ((2, 2), (0, 0)),
           ((1, 2), (1, 0)), ((2, 1), (2, 3))]


def torus_distance(a: complex, b: complex) -> float:
    d = b - a
    return min(abs(d + m + 1j * n) for m in range(-2, 3) for n in range(-2, 3))


def random_l_point(rng):
    k = int(rng.integers(3))
    z = L_SQUARES[k] + complex(*rng.uniform(0.05, 0.95, size=2))
    return SurfacePoint(k, z)


def in_l_polygon(z: complex) -> bool:
    x, y = z.real, z.imag
    return (0 <= x <= 2 and 0 <= y <= 1) or (0 <= x <= 1 and 0 <= y <= 2)


def segment_inside_l(a: complex, b: complex, n: int = 400) -> bool:
    return all(in_l_polygon(a + s * (b - a)) for s in np.linspace(0, 1, n))


def test_cone_data():
    assert square_torus().cone_orders == [0]
    L = l_shaped_surface()
    assert L.cone_orders == [4] and L.area == pytest.approx(3.0)
    assert regular_octagon_surface().cone_orders == [4]


def test_torus_distance_matches_lattice_minimum():
    T = square_torus()
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b = (complex(*rng.uniform(0.02, 0.98, size=2)) for _ in range(2))
        r = flat_geodesic(T, SurfacePoint(0, a), SurfacePoint(0, b))
        assert r.length == pytest.approx(torus_distance(a, b), abs=1e-9)


def test_torus_fixed_displacement_class():
    T = square_torus()
    r = flat_geodesic(T, SurfacePoint(0, 0.1 + 0.1j), SurfacePoint(0, 0.9 + 0.8j), displacement=0.8 + 0.7j)
    assert r.length == pytest.approx(abs(0.8 + 0.7j), rel=1e-12)


def test_l_shape_between_covering_and_planar_bounds():
    L = l_shaped_surface()
    rng = np.random.default_rng(1)
    for _ in range(30):
        p, q = random_l_point(rng), random_l_point(rng)
        r = flat_geodesic(L, p, q)
        assert r.certified
        # the L covers the unit torus by a local isometry
        assert r.length >= torus_distance(p.z, q.z) - 1e-9
        if segment_inside_l(p.z, q.z):
            assert r.length <= abs(q.z - p.z) + 1e-9
        assert r.length == pytest.approx(sum(s.length for s in r.segments), rel=1e-12)


def test_l_shape_path_through_the_cone_point():
    L = l_shaped_surface()
    r = flat_geodesic(L, SurfacePoint(1, 1.8 + 0.2j), SurfacePoint(2, 0.8 + 1.2j))
    assert len(r.segments) == 2
    assert r.length == pytest.approx(2 * math.hypot(0.2, 0.2), rel=1e-12)


def _relabel(perm):
    polys = [None] * 3
    for old, new in enumerate(perm):
        c = L_SQUARES[old]
        polys[new] = [c, c + 1, c + 1 + 1j, c + 1j]
    pairs = [((perm[p], e), (perm[q], f)) for (p, e), (q, f) in L_PAIRS]
    return HalfTranslationSurface.from_edge_pairs(polys, pairs)


def test_relabel_and_rotation_invariance():
    L = l_shaped_surface()
    rng = np.random.default_rng(2)
    pts = [(random_l_point(rng), random_l_point(rng)) for _ in range(6)]
    base = [flat_geodesic(L, p, q).length for p, q in pts]
    for perm in itertools.permutations(range(3)):
        S = _relabel(perm)
        got = [flat_geodesic(S, SurfacePoint(perm[p.poly], p.z), SurfacePoint(perm[q.poly], q.z)).length
               for p, q in pts]
        assert np.allclose(got, base, atol=1e-10)
    # z -> -z is an isometry onto the rotated surface
    R = HalfTranslationSurface.from_edge_pairs([[-v for v in P] for P in L.polygons], L_PAIRS)
    got = [flat_geodesic(R, SurfacePoint(p.poly, -p.z), SurfacePoint(q.poly, -q.z)).length for p, q in pts]
    assert np.allclose(got, base, atol=1e-10)


def test_json_round_trip():
    L = l_shaped_surface()
    S = HalfTranslationSurface.from_json(L.to_json())
    p, q = SurfacePoint(0, 0.3 + 0.3j), SurfacePoint(1, 1.7 + 0.6j)
    assert flat_geodesic(S, p, q).length == pytest.approx(flat_geodesic(L, p, q).length)


def test_gluing_errors():
    sq = [0, 1, 1 + 1j, 1j]
    with pytest.raises(GluingError):
        HalfTranslationSurface.from_edge_pairs([sq], [((0, 0), (0, 2))])  # edges 1, 3 left open
    with pytest.raises(GluingError):
        HalfTranslationSurface.from_edge_pairs([[0, 2, 2 + 1j, 1j]], [((0, 0), (0, 1)), ((0, 2), (0, 3))])
    with pytest.raises(GluingError):
        HalfTranslationSurface.from_edge_pairs([sq[::-1]], [((0, 0), (0, 2)), ((0, 1), (0, 3))])


def test_cylinders_of_the_l_shape():
    L = l_shaped_surface()
    cyls = detect_cylinders(L, [0.0, math.pi / 2], 5.0)
    horizontal = sorted((c.circumference, round(c.width, 6)) for c in cyls if c.theta == 0.0)
    vertical = sorted((c.circumference, round(c.width, 6)) for c in cyls if c.theta != 0.0)
    assert horizontal == [(pytest.approx(1.0), 1.0), (pytest.approx(2.0), 1.0)]
    assert vertical == [(pytest.approx(1.0), 1.0), (pytest.approx(2.0), 1.0)]
    # the cylinders fill the surface in each direction
    assert sum(c.circumference * c.width for c in cyls if c.theta == 0.0) == pytest.approx(3.0, rel=1e-9)


def test_torus_cylinder_in_rational_direction():
    T = square_torus()
    [c] = detect_cylinders(T, [math.atan2(1, 1)], 3.0)
    assert c.circumference == pytest.approx(math.sqrt(2))
    assert c.circumference * c.width == pytest.approx(1.0, rel=1e-6)
