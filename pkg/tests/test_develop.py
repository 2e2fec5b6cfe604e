import cmath
import math

import mpmath
import numpy as np
import pytest

from cp1lab.develop import (
    DevelopingJet, Loop, Representation, SingularPathError, continue_jet, darboux_holonomy, euler_trace,
    monodromy, path_transport, projectivize, schwarzian_residual, segment_transport, trace_coordinates,
    translation_monodromy,
)
from cp1lab.hyp3 import MoebiusMatrix
from cp1lab.qdiff import PlanarDifferential

Z = PlanarDifferential.polynomial([0, 1])


def airy_fundamental(z: complex) -> np.ndarray:
    """Rows (u, u') for u'' = -(z/2) u, built from Ai and Bi at c z with c^3 = -1/2."""
    c = -mpmath.cbrt(0.5)
    x = c * mpmath.mpc(z)
    rows = []
    for f in (mpmath.airyai, mpmath.airybi):
        rows.append([complex(f(x)), complex(c * f(x, derivative=1))])
    return np.array(rows, dtype=complex)


@pytest.mark.parametrize("a,b", [(0j, 1.5 + 0.5j), (-1 + 1j, 2 - 1j), (0.5j, 3j)])
def test_transport_matches_airy_oracle(a, b):
    E = segment_transport(Z, a, b, tol=1e-12)
    exact = np.linalg.solve(airy_fundamental(a), airy_fundamental(b))
    assert np.max(np.abs(E - exact)) < 1e-9 * max(1, np.max(np.abs(exact)))


def test_transport_of_constant_q_is_closed_form():
    t, dz = 3.0, 0.7 + 0.2j
    k = cmath.sqrt(t / 2)
    exact = np.array([[cmath.cos(k * dz), -k * cmath.sin(k * dz)],
                      [cmath.sin(k * dz) / k, cmath.cos(k * dz)]])
    E = segment_transport(PlanarDifferential.constant(t), 0j, dz, tol=1e-12)
    assert np.max(np.abs(E - exact)) < 1e-11


def test_transport_is_unimodular_and_composes():
    E1 = segment_transport(Z, 0.5j, 1 + 1j, 1e-12)
    E2 = segment_transport(Z, 1 + 1j, 2 - 1j, 1e-12)
    E = path_transport(Z, [0.5j, 1 + 1j, 2 - 1j], 1e-12)
    assert abs(np.linalg.det(E) - 1) < 1e-10
    assert np.max(np.abs(E - E1 @ E2)) < 1e-12 * np.max(np.abs(E))


def test_jet_values():
    jet = DevelopingJet.from_values(0.3j, f=2.0, fprime=3 - 1j, ratio=0.5)
    assert jet.f == pytest.approx(2.0)
    assert jet.fprime == pytest.approx(3 - 1j)
    assert jet.log_derivative_ratio == pytest.approx(0.5)


def test_developing_map_has_schwarzian_q():
    res = schwarzian_residual(Z, [0.2j, 2 + 0.2j], [0.25, 0.5, 0.75])
    assert max(res) < 1e-5


def test_continuation_with_zero_q_is_identity_chart():
    q = PlanarDifferential((1e-300,))
    jet = continue_jet(q, [0j, 1 + 2j])
    assert jet.f == pytest.approx(1 + 2j, abs=1e-12)


def test_translation_monodromy_trace():
    for t in (1.0, 50.0):
        for c in (1.0, 1j, 2 + 0.5j):
            M = translation_monodromy(PlanarDifferential.constant(t), 0j, c, 1e-12)
            want = 2 * cmath.cos(cmath.sqrt(t / 2) * c)
            assert abs(M.trace() - want) < 1e-9 * abs(want)


def test_monodromy_around_euler_point():
    # u'' = -(c/2z^2) u has solutions z^r with r(r-1) = -c/2
    c = 0.3 + 0.1j
    q = PlanarDifferential((c,), (0, 0, 1))
    M = monodromy(q, Loop.circle(0j, 1.0, n=128), 1e-12)
    s = cmath.sqrt(1 - 2 * c)
    assert abs(M.trace() - (-2 * cmath.cos(math.pi * s))) < 1e-9


def test_monodromy_of_concatenated_loops():
    q = PlanarDifferential((0.3,), (0, -1, 1))
    a = Loop((0.5, -0.3 + 0.4j, -0.5, -0.3 - 0.4j))
    b = Loop((0.5, 1.3 - 0.4j, 1.5, 1.3 + 0.4j))
    A, B, AB = monodromy(q, a), monodromy(q, b), monodromy(q, a * b)
    assert np.max(np.abs((A @ B).as_array() - AB.as_array())) < 1e-9
    Ainv = monodromy(q, a.inverse())
    assert np.max(np.abs((A @ Ainv).as_array() - np.eye(2))) < 1e-9


def test_path_near_pole_is_rejected():
    q = PlanarDifferential((1,), (0, 0, 1))
    with pytest.raises(SingularPathError):
        monodromy(q, Loop((-1, 1, 1j)))
    with pytest.raises(ValueError):
        path_transport(Z, [0, 1], tol=1.0)


def test_loop_json_round_trip():
    loop = Loop.circle(1j, 0.5, n=5)
    assert Loop.from_json(loop.to_json()) == loop
    assert loop.waypoints[0] == loop.waypoints[-1]


def test_darboux_holonomy_for_flat_structure_returns_g():
    for g in (MoebiusMatrix(1, 2.5, 0, 1), MoebiusMatrix.diagonal(math.sqrt(3.0))):
        R = darboux_holonomy(0.0, g)
        assert np.max(np.abs(R.as_array() - g.as_array())) < 1e-12


def test_darboux_holonomy_euler_case():
    for c in (0.2, -1.5, 0.1 + 0.3j):
        q = PlanarDifferential((c,), (0, 0, 1))
        for lam in (1.5, 4.0):
            M = darboux_holonomy(q, MoebiusMatrix.diagonal(math.sqrt(lam)), 1j, 1e-12)
            assert abs(abs(M.trace()) - abs(euler_trace(c, lam))) < 1e-8


def test_representation_words():
    a = MoebiusMatrix.diagonal(2.0)
    b = MoebiusMatrix(1, 1, 0, 1)
    rep = Representation({"a": a, "b": b})
    assert rep.homomorphism_defect(["a", "b", "AB", "ba"]) < 1e-12
    assert rep.relator_defect(["aA", "bB"]) < 1e-12
    tc = trace_coordinates(rep, ["a", "b"])
    assert tc == pytest.approx([math.log(2.5 + 2), math.log(4)])
    assert projectivize([2.0, -4.0]) == pytest.approx([0.5, -1.0])
