import math
import warnings

import numpy as np
import pytest

from cp1lab.hyp3 import (
    H3Point, InvalidMatrixError, InvalidMetricError, MoebiusMatrix, NearParabolicWarning, NoAxisError,
    SampledPath, apply, axis, displacement, distance_matrix, fixed_points, four_point_delta,
    frame_distance, h3_distance, lorentz, log_trace_length, quasigeodesic_fit, to_ball,
    to_hyperboloid, translation_length,
)

O = H3Point(0j, 1.0)


def random_matrix(rng, scale=1.0):
    m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    return MoebiusMatrix.from_array(scale * m)


def test_vertical_distance_is_log_ratio():
    assert h3_distance(O, H3Point(0j, math.e ** 3)) == pytest.approx(3.0, rel=1e-14)


def test_action_is_isometric():
    rng = np.random.default_rng(1)
    for _ in range(20):
        M = random_matrix(rng)
        p = H3Point(complex(*rng.normal(size=2)), float(rng.uniform(0.2, 3)))
        q = H3Point(complex(*rng.normal(size=2)), float(rng.uniform(0.2, 3)))
        assert h3_distance(apply(M, p), apply(M, q)) == pytest.approx(h3_distance(p, q), rel=1e-10)


def test_action_is_a_homomorphism():
    rng = np.random.default_rng(2)
    A, B = random_matrix(rng), random_matrix(rng)
    p = H3Point(0.3 + 0.1j, 0.7)
    lhs = apply(A @ B, p)
    rhs = apply(A, apply(B, p))
    assert h3_distance(lhs, rhs) < 1e-10


def test_apply_rejects_bad_determinant():
    with pytest.raises(InvalidMatrixError):
        apply(MoebiusMatrix(2, 0, 0, 1), O)


def test_normalized_has_unit_determinant():
    M = MoebiusMatrix(2, 1j, 3, 4).normalized()
    assert abs(M.det() - 1) < 1e-14


def test_translation_length_of_diagonal():
    M = MoebiusMatrix.diagonal(math.exp(1.5))
    assert translation_length(M) == pytest.approx(3.0, rel=1e-12)
    assert displacement(M, O) == pytest.approx(3.0, rel=1e-12)


def test_parabolic_and_elliptic_have_zero_length():
    assert translation_length(MoebiusMatrix.translation(5)) == 0.0
    assert translation_length(MoebiusMatrix.diagonal(np.exp(0.4j))) == 0.0


def test_near_parabolic_warns():
    eps = 1e-5  # tr^2 - 4 is about 4e-10
    M = MoebiusMatrix.diagonal(math.exp(eps))
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        assert translation_length(M) == 0.0
    assert any(issubclass(x.category, NearParabolicWarning) for x in w)


def test_log_trace_length_matches_direct_value():
    for L in (0.5, 10.0, 50.0):
        tr = 2 * math.cosh(L / 2)
        assert log_trace_length(math.log(tr)) == pytest.approx(L, rel=1e-12)
    assert log_trace_length(1000.0) == 2000.0


def test_axis_of_loxodromic():
    M = MoebiusMatrix.diagonal(2.0)
    ax = axis(M)
    # z -> 4z repels from 0 and attracts to infinity
    assert ax.start == 0 and ax.end == math.inf
    C = MoebiusMatrix(1, 2, 1, 3)
    N = C @ M @ C.inverse()
    ax2 = axis(N)
    assert abs(ax2.start - C.act(0)) < 1e-12
    assert abs(ax2.end - C.act(math.inf)) < 1e-12
    assert ax2.distance_to(apply(C, H3Point(0j, 7.0))) < 1e-10


def test_axis_rejects_parabolic():
    with pytest.raises(NoAxisError):
        axis(MoebiusMatrix.translation(1))


def test_fixed_points_are_fixed():
    rng = np.random.default_rng(3)
    for _ in range(10):
        M = random_matrix(rng)
        for w in fixed_points(M):
            assert abs(M.act(w) - w) < 1e-9 * max(1, abs(w))


def test_frame_distance_for_huge_matrices():
    L = 200.0
    g = MoebiusMatrix.diagonal(math.exp(L / 2))
    assert frame_distance(MoebiusMatrix.identity(), g) == pytest.approx(L, rel=1e-12)
    assert frame_distance(g, g @ MoebiusMatrix.diagonal(math.exp(0.5))) == pytest.approx(1.0, rel=1e-9)


def test_models_agree():
    p = H3Point(0.2 - 0.5j, 0.8)
    X = to_hyperboloid(p.x, p.y, p.height)
    assert lorentz(X, X) == pytest.approx(-1.0)
    b = to_ball(p)
    assert np.linalg.norm(b) < 1
    q = H3Point(1 + 1j, 2.0)
    Y = to_hyperboloid(q.x, q.y, q.height)
    assert math.acosh(-lorentz(X, Y)) == pytest.approx(h3_distance(p, q), rel=1e-12)
    assert np.allclose(to_ball(O), 0)


def test_four_point_delta_of_tree_is_zero():
    # star tree with leaves at distances 1, 2, 3, 4 from the center
    r = np.array([1, 2, 3, 4.0])
    D = r[:, None] + r[None, :]
    np.fill_diagonal(D, 0)
    assert four_point_delta(D) == 0.0


def test_four_point_delta_of_unit_square():
    s = math.sqrt(2)
    D = np.array([[0, 1, s, 1], [1, 0, 1, s], [s, 1, 0, 1], [1, s, 1, 0]])
    assert four_point_delta(D) == pytest.approx(s - 1, abs=1e-15)
    assert four_point_delta(D, relative=True) == pytest.approx((s - 1) / s)


def test_four_point_delta_rejects_non_metric():
    with pytest.raises(InvalidMetricError):
        four_point_delta(np.array([[0, 1, 5, 1], [1, 0, 1, 1], [5, 1, 0, 1], [1, 1, 1, 0]]))
    with pytest.raises(InvalidMetricError):
        four_point_delta(np.array([[0, 1], [2, 0]]))


def test_geodesic_is_quasigeodesic_with_unit_constants():
    s = np.linspace(0, 5, 11)
    path = SampledPath.from_arrays(s, np.zeros(11), np.exp(s))
    K, C = quasigeodesic_fit(path)
    assert K == pytest.approx(1.0, abs=1e-9) and C < 1e-9


def test_h3_samples_are_delta_hyperbolic():
    rng = np.random.default_rng(4)
    pts = [H3Point(complex(*rng.normal(size=2)), float(np.exp(rng.normal()))) for _ in range(12)]
    # every finite subset of H^3 is log(3)-hyperbolic in the four point sense
    assert four_point_delta(distance_matrix(pts)) <= math.log(3) + 1e-9
