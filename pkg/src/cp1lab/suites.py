"""Verification suites behind `cp1lab verify` and `cp1lab report`.

Each suite returns a list of checks with a stable identifier naming the
module invariant it exercises, the measured value and the bound.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import trees
from .epstein import (
    C0, collapse_report, epstein_forms, first_form_defect, flat_metric_jet,
    general_fundamental_forms, height_estimate_fit, leaf_curvature, mesh_contact_defect,
    epstein_mesh, shape_product,
)
from .hyp3 import four_point_delta
from .qdiff import PlanarDifferential, epsilon_bound_check, point_at_standoff

STANDOFFS = (5.0, 8.0, 12.0, 20.0)


@dataclass
class Check:
    id: str
    status: str           # pass, fail or skip
    measured: float
    bound: object

    def as_dict(self) -> dict:
        d = asdict(self)
        d["measured"] = None if self.measured is None or not np.isfinite(self.measured) else float(self.measured)
        return d


@dataclass
class SuiteResult:
    name: str
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.status != "fail" for c in self.checks) and any(c.status == "pass" for c in self.checks)

    def add(self, id_, ok, measured, bound):
        self.checks.append(Check(id_, "pass" if ok else "fail", measured, bound))

    def as_dict(self) -> dict:
        return {"checks": [c.as_dict() for c in self.checks], "pass": self.passed}


def _direction(diff: PlanarDifferential) -> complex:
    # a ray along which the distance to the zeros grows
    if not diff.zeros:
        return 1.0
    return 1j if len(diff.zeros) > 1 else 1.0


def _standoff_points(diff: PlanarDifferential, ds=STANDOFFS):
    u = _direction(diff)
    return [(d, point_at_standoff(diff, u, d)) for d in ds]


def _random_points(diff: PlanarDifferential, n: int, seed: int, box: float = 3.0, avoid: float = 0.3):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        z = complex(rng.uniform(-box, box), rng.uniform(-box, box))
        if float(diff.distance_to_singular(z)) > avoid:
            out.append(z)
    return out


def suite_collapse(diff: PlanarDifferential, seed: int = 0, **_) -> SuiteResult:
    res = SuiteResult("collapse")
    if not diff.zeros:
        for s in (1.0, 5.0):
            h = collapse_report(diff, 0j, "horizontal", s)
            v = collapse_report(diff, 0j, "vertical", s)
            res.add(f"epstein.collapse.horizontal_exact[len={s}]", h.image_diameter < 1e-9, h.image_diameter, 1e-9)
            err = abs(v.endpoint_distance - v.length) / v.length
            res.add(f"epstein.collapse.vertical_isometry[len={s}]", err < 1e-8, err, 1e-8)
        return res
    for d, z in _standoff_points(diff):
        h = collapse_report(diff, z, "horizontal", 1.0)
        v = collapse_report(diff, z, "vertical", 5.0)
        res.add(f"epstein.collapse.horizontal[d={d:g}]", bool(h.passed), h.image_diameter, h.bound[1])
        res.add(f"epstein.collapse.vertical[d={d:g}]", bool(v.passed), v.endpoint_distance, list(v.bound))
    return res


def suite_curvature(diff: PlanarDifferential, seed: int = 0, **_) -> SuiteResult:
    res = SuiteResult("curvature")
    if diff.zeros:
        for d, z in _standoff_points(diff):
            lc = leaf_curvature(diff, z)
            res.add(f"epstein.leaf_curvature[d={d:g}]", bool(lc.passed), lc.k, 12.0 / d ** 2)
    worst = 0.0
    for z in _random_points(diff, 50, seed):
        f = epstein_forms(diff, z)
        if f.immersed:
            worst = max(worst, abs(shape_product(f) - 1))
    res.add("epstein.kappa_h_kappa_v", worst < 1e-8, worst, 1e-8)
    return res


def suite_legendrian(diff: PlanarDifferential, seed: int = 0, **_) -> SuiteResult:
    res = SuiteResult("legendrian")
    c = 4.0 + 1.0j if diff.zeros else 0j
    xs = np.linspace(-0.5, 0.5, 4)
    grid = c + xs[None, :] + 1j * xs[:, None]
    mesh = epstein_mesh(diff, grid)
    worst = mesh_contact_defect(diff, mesh)
    res.add("epstein.contact_certificate", worst < 1e-6, worst, 1e-6)
    return res


def suite_forms(diff: PlanarDifferential, seed: int = 0, n: int = 100, **_) -> SuiteResult:
    res = SuiteResult("forms")
    pts = _random_points(diff, n, seed)
    fd = max(first_form_defect(diff, z) for z in pts)
    res.add("epstein.fd_first_form", fd < 1e-6, fd, 1e-6)
    kk, ident = 0.0, 0.0
    for z in pts:
        f = epstein_forms(diff, z)
        if f.immersed:
            kk = max(kk, abs(shape_product(f) - 1))
        jet = flat_metric_jet(diff, z)  # sigma^2 = 2|q|
        g = general_fundamental_forms(jet, -complex(diff.phi_hat_value(z)) / 2)
        scale = max(1.0, abs(f.I11))
        ident = max(ident, abs(g.I20 - f.I20) / scale, abs(g.I11 - f.I11) / scale, abs(g.II11 - f.II11) / scale)
    res.add("epstein.kappa_h_kappa_v", kk < 1e-8, kk, 1e-8)
    res.add("epstein.code_path_identity", ident < 1e-12, ident, 1e-12)
    return res


def suite_height(diff: PlanarDifferential, seed: int = 0, **_) -> SuiteResult:
    res = SuiteResult("height")
    if not diff.zeros:
        r = collapse_report(diff, 0j, "general", end=3 + 4j)
        err = abs(r.endpoint_distance - r.height)
        res.add("epstein.height_estimate[exact]", err < 1e-8 * r.height, err, 1e-8 * r.height)
        return res
    rng = np.random.default_rng(seed)
    reports = []
    for d, z in _standoff_points(diff, (8.0, 12.0, 20.0)):
        for _ in range(2):
            v = complex(rng.normal(), rng.normal())
            end = z + 0.5 * v / abs(v)
            r = collapse_report(diff, z, "general", end=end)
            reports.append(r)
            slack = C0 / r.d ** 2 * r.length
            res.add(f"epstein.height_estimate[d={d:g}]", abs(r.endpoint_distance - r.height) <= slack,
                    abs(r.endpoint_distance - r.height), slack)
    K, C = height_estimate_fit(reports)
    res.checks.append(Check("epstein.height_estimate.fit", "pass", K, {"K": K, "C": C}))
    return res


def suite_beta(diff: PlanarDifferential, seed: int = 0, **_) -> SuiteResult:
    res = SuiteResult("beta")
    if not diff.zeros:
        eps = max(float(diff.epsilon(z)) for z in _random_points(diff, 10, seed))
        res.add("qdiff.beta_vanishes", eps < 1e-12, eps, 1e-12)
        return res
    for d, z in _standoff_points(diff):
        ring = [z + 0.5 * np.exp(2j * np.pi * k / 6) for k in range(6)] + [z]
        for e in epsilon_bound_check(diff, ring):
            if e.excluded:
                continue
            res.add(f"qdiff.epsilon_bound[d={d:g}]", e.eps_ok, e.epsilon, e.eps_bound)
            res.add(f"qdiff.epsilon_gradient_bound[d={d:g}]", e.grad_ok, e.gradient, e.grad_bound)
    return res


TOP_DECADE = (1e5, 10 ** 5.5, 1e6)


def suite_scaling(seed: int = 0, ode: bool = True, **_) -> SuiteResult:
    res = SuiteResult("scaling")
    cyl = trees.cylinder_family(1j)
    tor = trees.torus_family(0.6)
    ts = np.logspace(2, 6, 9)
    g = trees.growth_survey(cyl, [(1,)], TOP_DECADE, method="ode" if ode else "closed", tol=1e-9)
    drift = g.drift(0)
    res.add("trees.length_ratio_drift[cylinder]", drift < 1e-3, drift, 1e-3)
    g = trees.growth_survey(tor, [(1, 0), (0, 1), (1, 1)], TOP_DECADE)
    drift = max(g.drift(k) for k in range(3))
    res.add("trees.length_ratio_drift[torus]", drift < 1e-3, drift, 1e-3)
    for name, fam, cls in (("cylinder", cyl, [(n,) for n in range(1, 6)]),
                           ("torus", tor, [(1, 0), (0, 1), (1, 1)])):
        g = trees.growth_survey(fam, cls, ts)
        res.add(f"trees.properness_fit[{name}]", g.residual < 0.01, g.residual, 0.01)
        s = trees.ms_limit_survey(fam, cls, [1e6])
        err = float(s.sup_errors()[-1])
        res.add(f"trees.ms_projective_limit[{name}]", err < 1e-3, err, 1e-3)
        s = trees.ms_limit_survey(fam, cls, ts)
        slope = s.delta_slope()
        res.add(f"trees.four_point_delta_slope[{name}]", abs(slope + 0.5) <= 0.1, slope, [-0.6, -0.4])
    return res


def _cylinder_window(n: int = 5):
    xs = np.linspace(0.0, 0.8, n)
    ys = np.linspace(-0.2, 0.2, n)
    return (xs[None, :] + 1j * ys[:, None]).ravel()


def suite_tree_limit(seed: int = 0, t: float = 1e6, **_) -> SuiteResult:
    res = SuiteResult("tree-limit")
    pts = _cylinder_window()
    sample = trees.epstein_endpoint_sample(t, pts)
    diff = PlanarDifferential.constant(t)
    segs = [(i, j) for i in range(len(pts)) for j in range(i + 1, len(pts))]
    rep = trees.straightness_check(sample, diff, segs, tol=1e-2, height_scale=1 / math.sqrt(t))
    res.add("trees.rescaled_epstein_straight", rep.passed, rep.worst, 1e-2)
    cyl = trees.cylinder_family(1j)
    hf = cyl.heights([(n,) for n in range(-3, 4)])
    h = hf.vector([(n,) for n in range(-3, 4)])
    D = np.abs(h[:, None] - h[None, :])
    delta = four_point_delta(D)
    res.add("trees.limit_four_point", delta < 1e-9, delta, 1e-9)
    return res


def _torus_points(n: int = 6):
    xs = np.linspace(0.05, 0.95, n)
    return (xs[None, :] + 1j * xs[:, None]).ravel()


def suite_straightness(seed: int = 0, **_) -> SuiteResult:
    res = SuiteResult("straightness")
    pts = _torus_points()
    diff = PlanarDifferential.constant(1.0)
    segs = [(i, j) for i in range(len(pts)) for j in range(i + 1, len(pts))]
    pi = trees.straightness_check(trees.projection_sample(pts), diff, segs, tol=1e-12)
    res.add("trees.straightness[projection]", pi.passed, pi.worst, 1e-12)
    fold = trees.straightness_check(trees.fold_sample(pts, 0.5), diff, segs, tol=1e-12)
    res.add("trees.straightness[fold_rejected]", not fold.passed, fold.worst, "> 1e-12")
    return res


def suite_abelian(seed: int = 0, t: float = 1e4, **_) -> SuiteResult:
    res = SuiteResult("abelian")
    fam = trees.torus_family(0.0)
    classes = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2)]
    lengths = np.array([fam.ode_translation_length(t, c, 1e-11) for c in classes])
    chi = np.array([abs(trees.class_period(fam.periods, c).imag) for c in classes])
    err = float(np.max(np.abs(trees.projectivize(lengths) - trees.projectivize(chi))))
    res.add("trees.abelian_length_function", err < 1e-3, err, 1e-3)
    hf = trees.dual_length_function(None, classes, fam.periods)
    homog = max(abs(trees.dual_length_function(None, [tuple(n * k for k in c)], fam.periods)(tuple(n * k for k in c))
                    - n * hf(c)) for c in classes for n in range(1, 7))
    res.add("trees.length_homogeneity", homog < 1e-12, homog, 1e-12)
    return res


DIFF_SUITES = {
    "collapse": suite_collapse, "curvature": suite_curvature, "legendrian": suite_legendrian,
    "forms": suite_forms, "height": suite_height, "beta": suite_beta,
}
FAMILY_SUITES = {
    "scaling": suite_scaling, "tree-limit": suite_tree_limit,
    "straightness": suite_straightness, "abelian": suite_abelian,
}
SUITES = list(DIFF_SUITES) + list(FAMILY_SUITES)


def run_suite(name: str, diff: PlanarDifferential | None = None, seed: int = 0, **kw) -> SuiteResult:
    if name in DIFF_SUITES:
        diff = diff or PlanarDifferential.polynomial([0, 1])
        return DIFF_SUITES[name](diff, seed=seed, **kw)
    if name in FAMILY_SUITES:
        return FAMILY_SUITES[name](seed=seed, **kw)
    raise KeyError(name)
