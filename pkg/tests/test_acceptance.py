"""Acceptance criteria 1-8.

Each test records one pass/fail line (printed in the terminal summary by
conftest.py) and asserts the criterion at its stated tolerance.
"""

import cmath
import json
import math
import time

import numpy as np
import sympy as sp

from cp1lab import cli, suites, trees
from cp1lab.develop import darboux_holonomy, euler_trace, translation_monodromy
from cp1lab.epstein import (
    EpsteinSchwarzMap, collapse_report, epstein_forms, first_form_defect, frame_contact_defect,
    leaf_curvature, shape_product,
)
from cp1lab.hyp3 import MoebiusMatrix, h3_distance, lorentz, to_hyperboloid, translation_length
from cp1lab.qdiff import (
    PlanarDifferential, beta_double_pole_coefficients, epsilon_bound_check, phi_hat_exact,
    point_at_standoff,
)

RESULTS = {}


def record(n, ok, detail, started):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({time.time() - started:.1f} s) {detail}"
    RESULTS[n] = line
    print(line)
    return ok


def _random_points(diff, n, seed, box=3.0, avoid=0.3):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        z = complex(rng.uniform(-box, box), rng.uniform(-box, box))
        if float(diff.distance_to_singular(z)) > avoid:
            out.append(z)
    return out


def _distance_to_line(A, B, X):
    """H^3 distance from hyperboloid point X to the geodesic through A and B."""
    G = np.array([[lorentz(A, A), lorentz(A, B)], [lorentz(B, A), lorentz(B, B)]])
    c = np.linalg.solve(G, [lorentz(X, A), lorentz(X, B)])
    W = X - c[0] * A - c[1] * B
    return math.asinh(math.sqrt(max(float(lorentz(W, W)), 0.0)))


def test_criterion_1_exact_algebra():
    t0 = time.time()
    phi, z = phi_hat_exact([0, 1])
    phi_ok = sp.simplify(phi - (z + sp.Rational(5, 8) / z ** 2)) == 0
    residues = {}
    for k in (1, 2, 3):
        [(a, order, coeff)] = beta_double_pole_coefficients([0] * k + [1])
        residues[k] = coeff
    res_ok = all(order_k == sp.Rational(-k * (k + 4), 8) for k, order_k in residues.items())
    ok = phi_ok and res_ok
    record(1, ok, f"phi_hat={phi}, residues={residues}", t0)
    assert ok


def test_criterion_2_dz_squared():
    t0 = time.time()
    q = PlanarDifferential.constant(1.0)
    m = EpsteinSchwarzMap(q, 0j, tol=1e-13)
    xs = np.linspace(-3, 3, 7)
    pts = [complex(x, y) for x in xs for y in xs]
    P = {z: m.point(z) for z in pts}
    A = to_hyperboloid(*P[-3 - 3j].as_tuple())
    B = to_hyperboloid(*P[3 + 3j].as_tuple())
    off_line = max(_distance_to_line(A, B, to_hyperboloid(*p.as_tuple())) for p in P.values())
    diam = max(collapse_report(q, complex(0, y), "horizontal", s).image_diameter for y in (0, 2) for s in (1.0, 5.0))
    o = m.point(0j)
    dist_err = max(abs(h3_distance(o, m.point(1j * s)) - math.sqrt(2) * s) / (math.sqrt(2) * s) for s in (1, 5, 20))
    ok = off_line < 1e-9 and diam < 1e-9 and dist_err < 1e-8
    record(2, ok, f"off-line {off_line:.2e}, horizontal diameter {diam:.2e}, sqrt2 distance rel err {dist_err:.2e}", t0)
    assert ok


FORM_DIFFS = {"z": [0, 1], "z^2-1": [-1, 0, 1], "z^3-z": [0, -1, 0, 1]}


def test_criterion_3_forms_consistency():
    t0 = time.time()
    fd = kk = contact = 0.0
    for seed, coeffs in enumerate(FORM_DIFFS.values()):
        q = PlanarDifferential.polynomial(coeffs)
        for z in _random_points(q, 1000, seed):
            fd = max(fd, first_form_defect(q, z))
            f = epstein_forms(q, z)
            if f.immersed:
                kk = max(kk, abs(shape_product(f) - 1))
            contact = max(contact, frame_contact_defect(q, z))
    ok = fd < 1e-6 and kk < 1e-8 and contact < 1e-6
    record(3, ok, f"FD first form rel err {fd:.2e}, |kh kv - 1| {kk:.2e}, contact {contact:.2e}", t0)
    assert ok


STANDOFFS = (5.0, 8.0, 12.0, 20.0)


def test_criterion_4_bounds_with_constants():
    t0 = time.time()
    failures, slopes = [], {}
    for name, coeffs, u in (("z", [0, 1], 1.0), ("z^2-1", [-1, 0, 1], 1j)):
        q = PlanarDifferential.polynomial(coeffs)
        rel = []
        for d in STANDOFFS:
            z = point_at_standoff(q, u, d)
            h = collapse_report(q, z, "horizontal", 1.0)
            v = collapse_report(q, z, "vertical", 5.0)
            lc = leaf_curvature(q, z)
            if not (h.passed and v.passed and lc.passed):
                failures.append((name, d, "collapse/curvature"))
            ring = [z + 0.5 * cmath.exp(2j * math.pi * k / 6) for k in range(6)] + [z]
            for e in epsilon_bound_check(q, ring):
                if not e.excluded and not (e.eps_ok and e.grad_ok):
                    failures.append((name, d, "beta"))
            rel.append(h.image_diameter / h.length)
        slopes[name] = float(np.polyfit(np.log(STANDOFFS), np.log(rel), 1)[0])
    slope_ok = all(abs(s + 2) <= 0.3 for s in slopes.values())
    ok = not failures and slope_ok
    record(4, ok, f"bound failures {failures}, collapse slopes {slopes}", t0)
    assert ok


def test_criterion_5_holonomy():
    t0 = time.time()
    tr_err = len_err = 0.0
    for t in (1.0, 1e2, 1e4):
        q = PlanarDifferential.constant(t)
        for c in (1, 1j, 1 + 1j):
            M = translation_monodromy(q, 0j, c, 1e-12)
            want = 2 * cmath.cos(cmath.sqrt(t / 2) * c)
            tr_err = max(tr_err, abs(M.trace() - want) / abs(want))
            L = math.sqrt(2 * t) * abs(c.imag if isinstance(c, complex) else 0.0)
            len_err = max(len_err, abs(translation_length(M, warn=False) - L) / max(1.0, L))
    g = MoebiusMatrix(1, 1.5, 0, 1)
    R = darboux_holonomy(0.0, g)
    flat_err = float(np.max(np.abs(R.as_array() - g.as_array())))
    euler_err = 0.0
    for c in (0.1, -2.0, 0.3 + 0.2j):
        e = PlanarDifferential(num=(c,), den=(0, 0, 1))
        for lam in (2.0, 5.0):
            M = darboux_holonomy(e, MoebiusMatrix.diagonal(math.sqrt(lam)), 1j, 1e-12)
            euler_err = max(euler_err, abs(abs(M.trace()) - abs(euler_trace(c, lam))))
    ok = tr_err < 1e-8 and len_err < 1e-8 and flat_err < 1e-8 and euler_err < 1e-6
    record(5, ok, f"trace rel err {tr_err:.2e}, length err {len_err:.2e}, "
                  f"flat darboux {flat_err:.2e}, euler |tr| {euler_err:.2e}", t0)
    assert ok


def test_criterion_6_scaling_laws():
    # The four-point delta slope is expected to fail for these abelian
    # families (their orbits lie along a common axis); see the README.
    t0 = time.time()
    res = suites.suite_scaling()
    failed = [c.id for c in res.checks if c.status == "fail"]
    detail = {c.id.split(".")[-1]: (None if c.measured is None else float(f"{c.measured:.3g}")) for c in res.checks}
    _, free_slope = trees.free_orbit_delta_survey(np.logspace(2, 4, 5))
    record(6, not failed, f"failed {failed}; measured {detail}; "
                          f"non-elementary crossing-axes delta slope {free_slope:.3f} (informational)", t0)
    assert not failed


def test_criterion_7_tree_structure():
    t0 = time.time()
    checks = []
    for suite in (suites.suite_straightness, suites.suite_tree_limit, suites.suite_abelian):
        checks += suite().checks
    failed = [c.id for c in checks if c.status == "fail"]
    detail = {c.id.split(".")[-1]: c.measured for c in checks}
    record(7, not failed, f"failed {failed}; measured {detail}", t0)
    assert not failed


def test_criterion_8_figures(tmp_path):
    t0 = time.time()
    diff = tmp_path / "q.json"
    diff.write_text(PlanarDifferential.polynomial([0, 1]).to_json())
    out = {}
    for name, grid in (("triangle", "annulus:4:12:200"), ("bubble", "disk:0.005:0.15:12:9")):
        report = tmp_path / f"{name}.json"
        rc = cli.main(["surface", "--diff", str(diff), "--grid", grid, "--out", str(tmp_path / f"{name}.ply"),
                       "--report", str(report)])
        out[name] = (rc, json.loads(report.read_text()))
    tri = out["triangle"][1]["ideal_triangle"]
    bub = out["bubble"][1]["bubble"]
    ok = out["triangle"][0] == 0 and out["bubble"][0] == 0 and tri["pass"] and bub["pass"]
    record(8, ok, f"fins {min(tri['fins']):.3g} vs corners {max(tri['corners']):.3g} (ratio {tri['ratio']:.0f}), "
                  f"bubble slope {bub['slope']:.4f}", t0)
    assert ok
