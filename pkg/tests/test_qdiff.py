import math

import numpy as np
import pytest
import sympy as sp

from cp1lab.qdiff import (
    DegenerateDifferentialError, PlanarDifferential, PoleOrderError, beta, beta_double_pole_coefficients,
    beta_exact, compare_differentials, dbar_schwarzian_check, distance_to_zero, distance_to_zero_set,
    epsilon_bound_check, gaussian_curvature, metric_schwarzian, normalize_sign, phi_hat, phi_hat_exact,
    point_at_standoff, segment_holonomy, straight_length, trace_ray,
)

Z = PlanarDifferential.polynomial([0, 1])


def test_zeros_with_orders():
    q = PlanarDifferential.polynomial([0, -1, 0, 1])
    zs = sorted(q.zeros, key=lambda zk: zk[0].real)
    assert [k for _, k in zs] == [1, 1, 1]
    assert np.allclose([z for z, _ in zs], [-1, 0, 1])
    q2 = PlanarDifferential.polynomial([1, -2, 1])
    [(a, k)] = q2.zeros
    assert k == 2 and abs(a - 1) < 1e-6


def test_rejects_high_order_poles_and_zero():
    with pytest.raises(PoleOrderError):
        PlanarDifferential((1,), (0, 0, 0, 1))
    with pytest.raises(DegenerateDifferentialError):
        PlanarDifferential.polynomial([0, 0])
    PlanarDifferential((1,), (0, 0, 1))  # double pole is fine


def test_json_round_trip():
    q = PlanarDifferential((1, 2j), (3, 0, 1), scale=0.5 - 1j)
    r = PlanarDifferential.from_json(q.to_json())
    assert r == q
    assert r(0.3 + 0.2j) == pytest.approx(q(0.3 + 0.2j))


def test_derivatives_match_finite_differences():
    q = PlanarDifferential((1, 2, 3), (1, 0, 1))
    z, h = 0.4 + 0.7j, 1e-5
    for k in range(1, 4):
        fd = (q.derivative(z + h, k - 1) - q.derivative(z - h, k - 1)) / (2 * h)
        assert abs(q.derivative(z, k) - fd) < 1e-6 * max(1, abs(fd))


def test_beta_numeric_matches_exact():
    num, den = (1, -2, 0, 1), (2, 1)
    q = PlanarDifferential(num, den)
    b, z = beta_exact(num, den)
    f = sp.lambdify(z, b)
    rational_beta = beta(q)
    for w in (0.3 + 0.4j, -1.2 + 0.1j, 2j):
        assert q.beta_value(w) == pytest.approx(complex(f(w)), rel=1e-10)
        assert rational_beta(w) == pytest.approx(complex(f(w)), rel=1e-10)


def test_phi_hat_of_z():
    phi, z = phi_hat_exact([0, 1])
    assert sp.simplify(phi - z - sp.Rational(5, 8) / z ** 2) == 0
    ph = phi_hat(Z)
    w = 1.3 - 0.2j
    assert ph(w) == pytest.approx(w + 5 / (8 * w * w), rel=1e-12)
    assert Z.phi_hat_value(w) == pytest.approx(w + 5 / (8 * w * w), rel=1e-12)


def test_beta_vanishes_for_constant_q():
    q = PlanarDifferential.constant(3 - 1j)
    assert abs(q.beta_value(0.2 + 1j)) == 0


def test_double_pole_coefficients_at_each_simple_zero():
    out = beta_double_pole_coefficients([-1, 0, 1])
    assert len(out) == 2
    assert all(c == sp.Rational(-5, 8) and k == 1 for _, k, c in out)
    [(_, k, c)] = beta_double_pole_coefficients([0, 0, 0, 0, 1])
    assert k == 4 and c == sp.Rational(-4, 1)


def test_normalize_sign():
    assert normalize_sign(-1 - 1j) == 1 + 1j
    assert normalize_sign(-2 + 0j) == 2
    assert normalize_sign(3 - 0j) == 3


def test_holonomy_of_segment_from_zero():
    # integral of sqrt(z) from 0 to 1
    assert segment_holonomy(Z, 0, 1, allow_endpoint_zeros=True) == pytest.approx(2 / 3, rel=1e-9)
    q1 = PlanarDifferential.constant(1)
    assert segment_holonomy(q1, 1, -2 - 1j) == pytest.approx(3 + 1j, rel=1e-12)


def test_straight_length_of_z_squared():
    q = PlanarDifferential.polynomial([0, 0, 1])
    assert straight_length(q, -1, 2) == pytest.approx(2.5, rel=1e-9)


def test_distance_to_simple_zero():
    for x in (1.0, 4.0):
        r = distance_to_zero(Z, x, 0j)
        assert r.certified
        assert r.distance == pytest.approx(2 / 3 * x ** 1.5, rel=1e-9)
    assert distance_to_zero_set(PlanarDifferential.constant(1), 0j).distance == math.inf


def test_point_at_standoff():
    z = point_at_standoff(Z, 1.0, 5.0)
    assert abs(z.imag) < 1e-12
    assert 2 / 3 * z.real ** 1.5 == pytest.approx(5.0, rel=1e-9)


def test_trace_ray_follows_natural_coordinate():
    q = PlanarDifferential.constant(4.0)
    ray = trace_ray(q, 0j, 1j, 3.0)
    assert ray.completed
    assert ray.z[-1] == pytest.approx(1.5j, abs=1e-10)
    r2 = trace_ray(Z, 1.0, 1.0, 2.0)
    # sqrt(z) dz integrates to (2/3) z^(3/2); the ray is the positive axis
    assert (2 / 3) * complex(r2.z[-1]) ** 1.5 == pytest.approx(2 / 3 + 2, rel=1e-9)


def test_epsilon_bound_at_standoff():
    for d in (5.0, 12.0):
        z = point_at_standoff(Z, 1.0, d)
        [e] = epsilon_bound_check(Z, [z])
        assert e.certified and e.eps_ok and e.grad_ok
        assert e.epsilon <= 6 / d ** 2


def test_curvature_of_poincare_disk():
    eta = lambda z: math.log(2 / (1 - abs(z) ** 2))
    assert gaussian_curvature(eta, 0.3 + 0.1j, h=1e-3) == pytest.approx(-1.0, rel=1e-5)


def test_metric_schwarzian_of_flat_metric():
    q = PlanarDifferential((1, 2, 1j))
    eta = lambda z: 0.5 * math.log(2 * abs(complex(q(z))))
    z = 0.4 + 0.3j
    qq, q1, q2 = (complex(v) for v in q.jet(z, 2))
    ez = q1 / (4 * qq)
    ezz = (q2 * qq - q1 * q1) / (4 * qq * qq)
    assert metric_schwarzian(eta, z, h=1e-3) == pytest.approx(ezz - ez * ez, abs=1e-5)


def test_dbar_schwarzian_identity():
    hyp = lambda z: math.log(2 / (1 - abs(z) ** 2))
    sph = lambda z: math.log(2 / (1 + abs(z) ** 2))
    fd, closed = dbar_schwarzian_check(hyp, sph, 0.2 + 0.1j)
    assert abs(fd - closed) < 1e-6 * max(1, abs(closed))


def test_compare_nearby_differentials():
    phi = PlanarDifferential.constant(1.0)
    psi = PlanarDifferential((1.0, 0.01))
    rep = compare_differentials(phi, psi, 0j, 2.0, n_segments=4)
    assert rep.delta < 0.05
    assert rep.passed, rep.failures
