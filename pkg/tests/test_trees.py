import math

import numpy as np
import pytest

from cp1lab.develop import Representation
from cp1lab.hyp3 import H3Point, MoebiusMatrix
from cp1lab.qdiff import PlanarDifferential, SurfacePoint, square_torus
from cp1lab.trees import (
    DegenerateMinimumError, AbelianFamily, approximate_center, axial_orbit_distances, class_period,
    constant_epstein_frames, cylinder_family, dual_length_function, epstein_endpoint_sample, fold_sample,
    free_orbit_delta_survey, growth_survey, ms_limit_survey, projection_sample, scale_at,
    straightness_check, survey_json, torus_family,
)

O = H3Point(0j, 1.0)
ONE = PlanarDifferential.constant(1.0)


def test_scale_of_a_diagonal_generator():
    rep = Representation({"a": MoebiusMatrix.diagonal(2.0)})
    assert scale_at(rep, ["a"], O) == pytest.approx(2 * math.log(2), rel=1e-12)
    with pytest.raises(ValueError):
        scale_at(rep, [], O)


def test_center_of_common_axis_action():
    rep = Representation({"a": MoebiusMatrix.diagonal(2.0), "b": MoebiusMatrix.diagonal(3.0)})
    c = approximate_center(rep, ["a", "b"], x0=H3Point(1 + 0j, 1.0))
    assert abs(c.point.horizontal) < 1e-9
    assert c.scale == pytest.approx(2 * math.log(3), rel=1e-9)
    assert c.certified


def test_center_with_one_fixed_point_is_degenerate():
    rep = Representation({"a": MoebiusMatrix.translation(1.0), "b": MoebiusMatrix.translation(1j)})
    with pytest.raises(DegenerateMinimumError):
        approximate_center(rep, ["a", "b"])


def test_center_of_crossing_axes_is_the_crossing_point():
    from cp1lab.trees import crossing_axes_representation
    rep = crossing_axes_representation(2.0)
    c = approximate_center(rep, ["a", "b"], x0=H3Point(0.3 + 0.2j, 1.5))
    assert c.scale == pytest.approx(2.0, rel=1e-4)
    assert abs(c.point.horizontal) < 1e-2 and abs(c.point.height - 1) < 1e-2


def test_projection_is_straight():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, 8) + 1j * rng.uniform(-1, 1, 8)
    segs = [(i, j) for i in range(8) for j in range(i + 1, 8)]
    rep = straightness_check(projection_sample(pts), ONE, segs)
    assert rep.passed and rep.worst < 1e-12


def test_fold_is_not_straight():
    pts = np.array([0j, 0.5j, 1.5j, 2j])
    rep = straightness_check(fold_sample(pts, fold_at=1.0), ONE, [(0, 1), (1, 2), (0, 3)])
    assert not rep.passed
    assert rep.entries[0].ok and not rep.entries[1].ok


def test_push_off_around_a_simple_zero():
    Z = PlanarDifferential.polynomial([0, 1])
    from cp1lab.qdiff import segment_holonomy

    def target(z):
        return complex(segment_holonomy(Z, 1 + 1j, z)).imag

    from cp1lab.trees import TreeMapSample
    pts = np.array([-1 + 0j, 1 + 0j])
    D = np.zeros((2, 2))
    sample = TreeMapSample(pts, D, target=target, metric=lambda p, q: abs(p - q))
    rep = straightness_check(sample, Z, [(0, 1)], tol=1e-6)
    assert "push-off" in rep.entries[0].note and rep.entries[0].ok


def test_constant_frames_agree_with_ode_development():
    from cp1lab.epstein import EpsteinSchwarzMap
    from cp1lab.hyp3 import h3_distance
    from cp1lab.epstein import _frame
    q = 2.0 + 0.5j
    m = EpsteinSchwarzMap(PlanarDifferential.constant(q), 0j)
    pts = [0.3 + 0.1j, -0.2 + 0.4j]
    frames = constant_epstein_frames(q, 0j, pts)
    ref = [m.point(p) for p in pts]
    for M, r in zip(frames, ref):
        assert h3_distance(_frame(M).point, r) < 1e-8


def test_rescaled_endpoint_map_approaches_the_projection():
    pts = np.array([0j, 0.1j, -0.15j, 0.05 + 0.2j])
    big = epstein_endpoint_sample(1e6, pts)
    proj = projection_sample(pts)
    assert np.max(np.abs(big.distances - proj.distances)) < 1e-2


def test_class_periods_and_heights():
    assert class_period([1, 1j], (2, -1)) == 2 - 1j
    with pytest.raises(ValueError):
        class_period([1, 1j], (1,))
    h = dual_length_function(None, [(1, 0), (0, 1), (1, 1)], [1, 1j])
    assert h((1, 0)) == 0 and h((0, 1)) == 1 and h((1, 1)) == 1


def test_length_function_on_the_torus_matches_closed_form():
    T = square_torus()
    classes = [(1, 0), (0, 1), (1, 1), (2, -1)]
    for angle in (0.0, 0.7):
        # the base point keeps the straight representatives off the vertex
        flat = dual_length_function(T, classes, [1, 1j], angle, base=SurfacePoint(0, 0.3 + 0.6j))
        closed = dual_length_function(None, classes, [1, 1j], angle)
        assert np.allclose(flat.vector(classes), closed.vector(classes), atol=1e-9)


def test_length_function_is_homogeneous():
    classes = [(1, 0), (0, 1), (1, 1)]
    h = dual_length_function(None, classes, [1, 1j], 0.4).vector(classes)
    h3 = dual_length_function(None, [(3 * a, 3 * b) for a, b in classes], [1, 1j], 0.4)
    assert np.allclose(h3.vector([(3 * a, 3 * b) for a, b in classes]), 3 * h)


def test_abelian_closed_form_matches_ode():
    fam = torus_family(0.6)
    for t in (2.0, 40.0):
        for cls in ((1, 0), (0, 1), (1, 1)):
            assert fam.ode_log_trace(t, cls) == pytest.approx(fam.log_abs_trace(t, cls), abs=1e-8)
            assert fam.ode_translation_length(t, cls) == pytest.approx(fam.translation_length(t, cls), abs=1e-7)


def test_abelian_representation_traces():
    fam = cylinder_family(1j)
    rep = fam.representation(3.0)
    tr = abs(rep.matrix("a").trace())
    assert math.log(tr) == pytest.approx(fam.log_abs_trace(3.0, (1,)), abs=1e-9)
    assert AbelianFamily.word((2, -1)) == "aaB"


def test_ms_limit_converges_for_rotated_torus():
    fam = torus_family(0.6)
    classes = [(1, 0), (0, 1), (1, 1), (1, -1)]
    rep = ms_limit_survey(fam, classes, [1e2, 1e4, 1e6])
    errs = rep.sup_errors()
    assert errs[-1] < 1e-6 and errs[-1] < errs[0]
    # orbits on a common axis are exactly tree-like
    assert all(r.delta < 1e-6 for r in rep.rows)
    assert rep.to_csv().startswith("t,")
    assert "ms_limit" in survey_json(rep)


def test_axial_distances_offset_zero_are_translation_gaps():
    fam = cylinder_family(1j)
    D = axial_orbit_distances(fam, 8.0, [(0,), (1,), (3,)])
    L = fam.translation_length(8.0, (1,))
    assert D[0, 1] == pytest.approx(L) and D[0, 2] == pytest.approx(3 * L)


def test_growth_is_linear_in_sqrt_t():
    fam = torus_family(0.6)
    g = growth_survey(fam, [(1, 0), (0, 1)], np.logspace(2, 6, 9))
    assert g.residual < 1e-2
    assert g.envelope_ratio < 1.1
    assert g.drift(0) < 1e-9


def test_growth_ode_agrees_with_closed_form():
    fam = cylinder_family(1j)
    ts = [10.0, 40.0, 160.0]
    a = growth_survey(fam, [(1,)], ts)
    b = growth_survey(fam, [(1,)], ts, method="ode")
    assert np.allclose(a.lengths, b.lengths, rtol=1e-7)


def test_free_orbit_delta_decays_like_inverse_sqrt():
    deltas, slope = free_orbit_delta_survey(np.logspace(2, 3, 3))
    assert slope == pytest.approx(-0.5, abs=0.05)
    assert np.all(deltas > 0)
