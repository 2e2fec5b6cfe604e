"""Dual trees, length functions, scales and rescaled-limit surveys.

Curve classes on tori and cylinders are integer vectors of coefficients
on a list of periods.  The holonomy families here are the flat
differentials t e^{i angle} dz^2 on C modulo a lattice of translations;
their developing ODE has constant coefficients, so traces are available
in closed form and, for moderate t, by ODE continuation.
"""

from __future__ import annotations

import cmath
import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .develop import Representation, projectivize, segment_transport
from .epstein import _Ginv, _frame, epstein_matrix, flat_metric_jet, osculating_frame
from .hyp3 import (
    H3Point, MoebiusMatrix, axis, displacement, fixed_points, four_point_delta, frame_distance,
    h3_distance, log_trace_length, validate_metric,
)
from .qdiff import (
    HalfTranslationSurface, PlanarDifferential, SingularSegmentError, SurfacePoint,
    flat_geodesic, segment_holonomy,
)


class NotFoundError(LookupError):
    """No geodesic representative found for a class."""


class DegenerateMinimumError(ValueError):
    """Displacement infimum is not attained (parabolic or one common fixed point)."""


# --- scales and centers ------------------------------------------------------------

def scale_at(rep: Representation, sigma: Sequence[str], x: H3Point) -> float:
    """R(rho, x): largest displacement of x by the generators in sigma."""
    if not sigma:
        raise ValueError("empty generator set")
    return max(displacement(rep.matrix(w), x) for w in sigma)


@dataclass
class CenterResult:
    point: H3Point
    scale: float
    lattice_minimum: float
    gradient: float
    certified: bool


def _same_points(a, b, tol=1e-9) -> bool:
    def close(u, v):
        if math.isinf(abs(u)) or math.isinf(abs(v)):
            return math.isinf(abs(u)) and math.isinf(abs(v))
        return abs(u - v) <= tol * max(1.0, abs(u), abs(v))
    return len(a) == len(b) and (all(close(u, v) for u, v in zip(a, b))
                                 or (len(a) == 2 and close(a[0], b[1]) and close(a[1], b[0])))


def _common_axis(mats: list[MoebiusMatrix]):
    """'axis' if all share one pair of fixed points, 'point' if only one, else None."""
    fps = [fixed_points(M) for M in mats if not np.allclose(M.as_array(), np.eye(2))
           and not np.allclose(M.as_array(), -np.eye(2))]
    if not fps:
        return "identity"
    first = fps[0]
    if all(_same_points(f, first) for f in fps):
        return "axis" if len(first) == 2 else "point"

    def close(u, v):
        if math.isinf(abs(u)) or math.isinf(abs(v)):
            return math.isinf(abs(u)) and math.isinf(abs(v))
        return abs(u - v) <= 1e-9 * max(1.0, abs(u), abs(v))
    for p in first:
        if all(any(close(p, q) for q in f) for f in fps):
            return "point"
    return None


def _point_from(v: np.ndarray) -> H3Point:
    return H3Point(complex(v[0], v[1]), float(math.exp(v[2])))


def approximate_center(rep: Representation, sigma: Sequence[str], region=None, C: float = 1.05,
                       x0: H3Point | None = None, levels: int = 12, n: int = 7) -> CenterResult:
    """Coarse-to-fine lattice search for a C-approximate center.

    The region is a box (xmin, xmax, ymin, ymax, log tmin, log tmax); by
    default it is the bounding box of the one-letter orbit of x0 dilated
    by 2.  Actions with a common axis return the projection of x0 to it;
    a single common fixed point raises DegenerateMinimumError.
    """
    if not sigma:
        raise ValueError("empty generator set")
    x0 = x0 or H3Point(0j, 1.0)
    mats = [rep.matrix(w) for w in sigma]
    kind = _common_axis(mats)
    if kind == "identity":
        return CenterResult(x0, 0.0, 0.0, 0.0, True)
    if kind == "point":
        raise DegenerateMinimumError("generators share exactly one fixed point")
    if kind == "axis":
        ax = next(axis(M) for M in mats if len(fixed_points(M)) == 2
                  and not np.allclose(M.as_array(), np.eye(2)))
        # nearest axis point to x0: search along the line
        ss = np.linspace(-30, 30, 601)
        ds = [h3_distance(ax.point_at(s), x0) for s in ss]
        s0 = float(ss[int(np.argmin(ds))])
        for step in (0.1, 0.01, 1e-3, 1e-4, 1e-5):
            cand = [s0 + k * step for k in range(-10, 11)]
            s0 = min(cand, key=lambda s: h3_distance(ax.point_at(s), x0))
        p = ax.point_at(s0)
        R = scale_at(rep, sigma, p)
        return CenterResult(p, R, R, 0.0, True)

    def R_of(v):
        return scale_at(rep, sigma, _point_from(v))

    if region is None:
        from .hyp3 import apply
        orbit = [x0] + [apply(M, x0) for M in mats] + [apply(M.inverse(), x0) for M in mats]
        xs = np.array([p.x for p in orbit])
        ys = np.array([p.y for p in orbit])
        ls = np.log([p.height for p in orbit])
        lo = np.array([xs.min(), ys.min(), ls.min()])
        hi = np.array([xs.max(), ys.max(), ls.max()])
        mid, half = (lo + hi) / 2, np.maximum((hi - lo) / 2, 0.5) * 2
        lo, hi = mid - half, mid + half
    else:
        r = np.asarray(region, float)
        lo, hi = r[[0, 2, 4]], r[[1, 3, 5]]
    best_v, best = None, math.inf
    first_min = None
    for _ in range(levels):
        axes = [np.linspace(lo[k], hi[k], n) for k in range(3)]
        for v in itertools.product(*axes):
            v = np.array(v)
            r = R_of(v)
            if r < best:
                best, best_v = r, v
        if first_min is None:
            first_min = best
        half = (hi - lo) / (n - 1)
        lo, hi = best_v - half, best_v + half
    h = 1e-5
    grad = max(abs(R_of(best_v + h * e) - R_of(best_v - h * e)) / (2 * h) for e in np.eye(3))
    return CenterResult(_point_from(best_v), best, best, grad, best <= C * first_min)


# --- length functions ------------------------------------------------------------------

@dataclass
class HeightFunction:
    """Nonnegative values on curve classes (integer coefficient tuples)."""

    values: dict = field(default_factory=dict)

    def __call__(self, cls) -> float:
        return self.values[tuple(cls)]

    def vector(self, classes) -> np.ndarray:
        return np.array([self(c) for c in classes])


def class_period(periods: Sequence[complex], cls) -> complex:
    cls = tuple(cls)
    if len(cls) != len(periods):
        raise ValueError("class length does not match the number of periods")
    return complex(sum(n * complex(p) for n, p in zip(cls, periods)))


def dual_length_function(surface: HalfTranslationSurface | None, classes, periods: Sequence[complex],
                         angle: float = 0.0, base: SurfacePoint | None = None,
                         max_depth: int = 16) -> HeightFunction:
    """Length function of the dual tree of the horizontal foliation of e^{i angle} phi.

    With a surface, each class is realized by the straight geodesic with
    the class's developed displacement, found by unfolding, and its
    height is summed over segments.  With surface=None the lattice
    closed form |Im(e^{i angle/2} period)| is used.
    """
    rot = cmath.exp(0.5j * angle)
    out = {}
    for c in classes:
        c = tuple(int(k) for k in c)
        v = class_period(periods, c)
        if surface is None:
            out[c] = abs((rot * v).imag)
            continue
        if v == 0:
            out[c] = 0.0
            continue
        p = base or SurfacePoint(0, complex(np.mean(surface.polygons[0])))
        try:
            res = flat_geodesic(surface, p, p, max_depth=max_depth, displacement=v)
        except Exception as exc:
            raise NotFoundError(f"no geodesic for class {c}") from exc
        out[c] = float(sum(abs((rot * s.holonomy).imag) for s in res.segments))
    return HeightFunction(out)


# --- straightness ------------------------------------------------------------------

@dataclass
class TreeMapSample:
    """Source points in a chart and their targets, given by a distance matrix.

    Optionally `target` maps a chart point to a target object and
    `metric` measures distance between target objects; both are needed
    for push-off checks through new points.
    """

    sources: np.ndarray
    distances: np.ndarray
    target: Callable | None = None
    metric: Callable | None = None

    def __post_init__(self):
        self.sources = np.asarray(self.sources, complex)
        self.distances = validate_metric(np.asarray(self.distances, float), 1e-9 * max(1.0, float(np.max(self.distances, initial=0))))


@dataclass
class StraightnessEntry:
    i: int
    j: int
    height: float
    distance: float
    ok: bool
    note: str = ""


@dataclass
class StraightnessReport:
    entries: list
    tolerance: float

    @property
    def passed(self) -> bool:
        checked = [e for e in self.entries if e.note != "skipped"]
        return bool(checked) and all(e.ok for e in checked)

    @property
    def worst(self) -> float:
        errs = [abs(e.distance - e.height) for e in self.entries if e.note != "skipped"]
        return max(errs) if errs else 0.0


def _height(diff: PlanarDifferential, a: complex, b: complex, scale: float) -> float:
    return abs(complex(segment_holonomy(diff, a, b)).imag) * scale


def straightness_check(sample: TreeMapSample, diff: PlanarDifferential, segments, tol: float = 1e-9,
                       height_scale: float = 1.0, push_offset: float = 1e-3) -> StraightnessReport:
    """Check d_T(f(x), f(y)) = height(x, y) on nonsingular segments.

    Segments through a simple zero are pushed off to both sides by a
    two-segment path through a point at distance push_offset * length
    from the zero, when the sample can evaluate new points; a segment
    through a higher-order zero is skipped and flagged.
    """
    entries = []
    for i, j in segments:
        a, b = complex(sample.sources[i]), complex(sample.sources[j])
        d = float(sample.distances[i, j])
        try:
            h = _height(diff, a, b, height_scale)
            entries.append(StraightnessEntry(i, j, h, d, abs(d - h) <= tol))
            continue
        except SingularSegmentError:
            pass
        L = abs(b - a)
        u = (b - a) / L
        hits = [(z, k) for z, k in diff.zeros
                if abs(((z - a) * np.conj(u)).imag) < 1e-9 * L and 0 < ((z - a) * np.conj(u)).real < L]
        if not hits or hits[0][1] != 1 or sample.target is None or sample.metric is None:
            entries.append(StraightnessEntry(i, j, math.nan, d, False, "skipped"))
            continue
        z0 = hits[0][0]
        ok_any, best = False, None
        fa, fb = sample.target(a), sample.target(b)
        for side in (1j, -1j):
            m = z0 + side * u * push_offset * L
            fm = sample.target(m)
            pieces = [(a, m, fa, fm), (m, b, fm, fb)]
            errs = [abs(sample.metric(p, q) - _height(diff, s, e, height_scale)) for s, e, p, q in pieces]
            if best is None or max(errs) < best:
                best = max(errs)
            ok_any = ok_any or max(errs) <= tol
        entries.append(StraightnessEntry(i, j, math.nan, d, ok_any, f"push-off (worst piece error {best:.3g})"))
    return StraightnessReport(entries, tol)


def projection_sample(points, angle: float = 0.0) -> TreeMapSample:
    """pi for e^{i angle} dz^2 on a torus or cylinder: the leaf space is the line Im(e^{i angle/2} z)."""
    rot = cmath.exp(0.5j * angle)
    pts = np.asarray(points, complex)
    h = (rot * pts).imag
    return TreeMapSample(pts, np.abs(h[:, None] - h[None, :]),
                         target=lambda z: (rot * z).imag, metric=lambda p, q: abs(p - q))


def fold_sample(points, fold_at: float, angle: float = 0.0) -> TreeMapSample:
    """pi followed by a 2-Lipschitz fold of the line at fold_at.

    s <= fold_at is fixed; beyond the fold the line is folded back and
    stretched by 2.  The map is not isometric on vertical segments that
    cross or lie beyond the fold point.
    """
    rot = cmath.exp(0.5j * angle)

    def F(z):
        s = (rot * z).imag
        return s if s <= fold_at else fold_at - 2 * (s - fold_at)

    pts = np.asarray(points, complex)
    v = np.array([F(z) for z in pts])
    return TreeMapSample(pts, np.abs(v[:, None] - v[None, :]), target=F, metric=lambda p, q: abs(p - q))


def _constant_transport(q: complex, dz: complex) -> np.ndarray:
    """Closed-form E with E' = E N, N = [[0, -q/2], [1, 0]], over dz."""
    k = cmath.sqrt(q / 2)
    if k == 0:
        return np.array([[1, 0], [dz, 1]], dtype=complex)
    c, s = cmath.cos(k * dz), cmath.sin(k * dz)
    return np.array([[c, -k * s], [s / k, c]], dtype=complex)


def constant_epstein_frames(q: complex, base: complex, points) -> list[np.ndarray]:
    """Epstein-Schwarz frames of q dz^2 (q constant), developed from base in closed form."""
    diff = PlanarDifferential.constant(q)
    Y0 = -1j * _Ginv(complex(base))
    out = []
    for p in points:
        p = complex(p)
        Y = Y0 @ _constant_transport(q, p - base)
        out.append(osculating_frame(Y, p) @ epstein_matrix(p, flat_metric_jet(diff, p)))
    return out


def epstein_endpoint_sample(t: float, points, angle: float = 0.0) -> TreeMapSample:
    """Epstein-Schwarz images of t e^{i angle} dz^2, distances divided by sqrt(2t).

    Each pair is measured in the development based at one of its
    points, which keeps the frames well conditioned for large t.
    """
    q = t * cmath.exp(1j * angle)
    pts = np.asarray(points, complex)
    n = len(pts)
    D = np.zeros((n, n))
    norm = math.sqrt(2 * t)
    for i in range(n):
        frames = constant_epstein_frames(q, pts[i], pts[i + 1:])
        here = _frame(constant_epstein_frames(q, pts[i], [pts[i]])[0]).point
        for j, M in zip(range(i + 1, n), frames):
            D[i, j] = D[j, i] = h3_distance(here, _frame(M).point) / norm
    return TreeMapSample(pts, D)


# --- abelian holonomy families --------------------------------------------------------

def _log_abs_2cos(theta: complex) -> float:
    """log|2 cos(theta)|, stable for large |Im theta|."""
    b = abs(theta.imag)
    if b < 20:
        v = abs(2 * cmath.cos(theta))
        return math.log(v) if v > 0 else -math.inf
    # 2cos = e^{-i theta s}(1 + e^{2 i theta s}), s = sign(Im theta)
    s = 1 if theta.imag > 0 else -1
    return b + math.log(abs(1 + cmath.exp(2j * s * theta)))


def _ms(log_tr: float) -> float:
    """log(|tr| + 2) from log|tr|."""
    if log_tr > 30:
        return log_tr + math.log1p(2 * math.exp(-log_tr))
    return math.log(math.exp(log_tr) + 2)


@dataclass
class AbelianFamily:
    """t e^{i angle} dz^2 on C modulo the translations by `periods`.

    The translation z -> z + c has holonomy conjugate to the rotation by
    theta = sqrt(t e^{i angle} / 2) c, so tr = 2 cos(theta) and the
    translation length is 2|Im theta|.
    """

    periods: tuple
    angle: float = 0.0
    name: str = "abelian"

    def __post_init__(self):
        self.periods = tuple(complex(p) for p in self.periods)

    def differential(self, t: float) -> PlanarDifferential:
        return PlanarDifferential.constant(t * cmath.exp(1j * self.angle))

    def theta(self, t: float, cls) -> complex:
        return cmath.sqrt(t * cmath.exp(1j * self.angle) / 2) * class_period(self.periods, cls)

    def log_abs_trace(self, t: float, cls) -> float:
        return _log_abs_2cos(self.theta(t, cls))

    def ms_coordinate(self, t: float, cls) -> float:
        return _ms(self.log_abs_trace(t, cls))

    def translation_length(self, t: float, cls) -> float:
        return 2 * abs(self.theta(t, cls).imag)

    def heights(self, classes) -> HeightFunction:
        return dual_length_function(None, classes, self.periods, self.angle)

    def ode_log_trace(self, t: float, cls, tol: float = 1e-10, pieces: int | None = None) -> float:
        """log|tr| of the holonomy of cls by ODE transport, renormalized piecewise."""
        c = class_period(self.periods, cls)
        diff = self.differential(t)
        growth = 2 * abs(self.theta(t, cls))
        pieces = pieces or max(1, int(math.ceil(growth / 200)))
        E = np.eye(2, dtype=complex)
        log_scale = 0.0
        for k in range(pieces):
            a, b = c * k / pieces, c * (k + 1) / pieces
            E = E @ segment_transport(diff, a, b, tol)
            m = float(np.max(np.abs(E)))
            E = E / m
            log_scale += math.log(m)
        tr = abs(complex(np.trace(E)))
        return log_scale + math.log(tr) if tr > 0 else -math.inf

    def ode_translation_length(self, t: float, cls, tol: float = 1e-10) -> float:
        lt = self.ode_log_trace(t, cls, tol)
        if lt > 30:
            return log_trace_length(lt)
        c = class_period(self.periods, cls)
        E = segment_transport(self.differential(t), 0, c, tol)
        tr = complex(np.trace(E))
        gap = abs(tr * tr - 4)
        return 0.0 if gap < 1e-8 else 2 * abs(cmath.acosh(tr / 2).real)

    def representation(self, t: float, tol: float = 1e-11) -> Representation:
        """Generator matrices by ODE monodromy (moderate t only)."""
        letters = "abcdefgh"
        gens = {}
        for k, p in enumerate(self.periods):
            E = segment_transport(self.differential(t), 0, p, tol)
            gens[letters[k]] = MoebiusMatrix.from_array(E, normalize=False)
        return Representation(gens)

    @staticmethod
    def word(cls) -> str:
        letters = "abcdefgh"
        return "".join((letters[k] if n > 0 else letters[k].upper()) * abs(n) for k, n in enumerate(cls))


def cylinder_family(c: complex = 1j) -> AbelianFamily:
    """t dz^2 on C / <z -> z + c>."""
    return AbelianFamily((c,), 0.0, "cylinder")


def torus_family(angle: float = 0.0) -> AbelianFamily:
    """t e^{i angle} dz^2 on the square torus C / (Z + iZ)."""
    return AbelianFamily((1, 1j), angle, "torus")


def axial_orbit_distances(family: AbelianFamily, t: float, classes, offset: float = 0.0) -> np.ndarray:
    """Orbit distances of a point at distance `offset` from the common axis.

    For points on one axis with complex translations lambda_i = 2 i theta_i
    (real part: translation, imaginary part: rotation),
    cosh d = cosh^2 r cosh(dL) - sinh^2 r cos(dA); evaluated in log form
    so that huge translations do not overflow.
    """
    lam = np.array([2j * family.theta(t, c) for c in classes])
    n = len(lam)
    D = np.zeros((n, n))
    ch2, sh2 = math.cosh(offset) ** 2, math.sinh(offset) ** 2
    for i in range(n):
        for j in range(i + 1, n):
            dl = abs((lam[i] - lam[j]).real)
            da = (lam[i] - lam[j]).imag
            if dl < 30:
                A = ch2 * math.cosh(dl) - sh2 * math.cos(da)
                d = math.acosh(max(A, 1.0))
            else:
                # log A = dl + log(ch2 (1 + e^{-2dl}) / 2 - sh2 cos(da) e^{-dl})
                logA = dl + math.log(ch2 * (1 + math.exp(-2 * dl)) / 2 - sh2 * math.cos(da) * math.exp(-dl))
                d = logA + math.log1p(math.sqrt(max(0.0, 1 - math.exp(-2 * logA))))
            D[i, j] = D[j, i] = d
    return D


# --- surveys ------------------------------------------------------------------------

@dataclass
class SurveyRow:
    t: float
    ms: np.ndarray
    projective: np.ndarray
    lengths: np.ndarray
    scale: float
    delta: float
    flagged: str = ""


@dataclass
class SurveyReport:
    classes: list
    rows: list
    heights: np.ndarray

    def sup_errors(self) -> np.ndarray:
        """Sup-norm distance of projectivized trace vectors from projectivized heights."""
        hp = projectivize(self.heights)
        return np.array([float(np.max(np.abs(r.projective - hp))) for r in self.rows])

    def delta_slope(self) -> float:
        """Log-log slope of delta(t); nan when delta vanishes to roundoff at some t."""
        ts = np.array([r.t for r in self.rows])
        ds = np.array([r.delta for r in self.rows])
        if np.any(ds <= 0) or len(ds) < 2:
            return math.nan
        return float(np.polyfit(np.log(ts), np.log(ds), 1)[0])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = [str(c) for c in self.classes]
        w.writerow(["t"] + [f"trace{n}" for n in names] + [f"length{n}" for n in names] + ["scale", "delta", "flag"])
        for r in self.rows:
            w.writerow([repr(r.t)] + [repr(float(v)) for v in r.ms] + [repr(float(v)) for v in r.lengths]
                       + [repr(r.scale), repr(r.delta), r.flagged])
        return buf.getvalue()

    def summary(self) -> dict:
        errs = self.sup_errors()
        return {"classes": [list(c) for c in self.classes], "heights": self.heights.tolist(),
                "sup_error_last": float(errs[-1]) if len(errs) else None,
                "delta_slope": self.delta_slope()}


def ms_limit_survey(family: AbelianFamily, classes, ts, orbit_offset: float = 0.0,
                    delta_classes=None) -> SurveyReport:
    """Trace coordinates, projectivization, lengths, scale and rescaled four-point delta.

    The orbit is taken of a point at distance orbit_offset from the
    common axis; the Epstein-Schwarz image of a constant differential
    lies on the axis (orbit_offset = 0).  The scale is the largest
    generator translation length, attained on the axis.
    """
    classes = [tuple(c) for c in classes]
    heights = family.heights(classes).vector(classes)
    gens = [tuple(int(i == k) for i in range(len(family.periods))) for k in range(len(family.periods))]
    orbit = delta_classes or _orbit_classes(len(family.periods))
    rows = []
    for t in ts:
        try:
            ms = np.array([family.ms_coordinate(t, c) for c in classes])
            lengths = np.array([family.translation_length(t, c) for c in classes])
            R = max(family.translation_length(t, g) for g in gens)
            D = axial_orbit_distances(family, t, orbit, orbit_offset)
            delta = four_point_delta(D / R, tol=1e-6) if R > 0 else math.nan
            rows.append(SurveyRow(float(t), ms, projectivize(ms), lengths, R, delta))
        except (ValueError, OverflowError) as exc:
            nan = np.full(len(classes), np.nan)
            rows.append(SurveyRow(float(t), nan, nan, nan, math.nan, math.nan, str(exc)))
    return SurveyReport(classes, rows, heights)


def _orbit_classes(rank: int, radius: int = 2) -> list:
    rng = range(-radius, radius + 1)
    return [c for c in itertools.product(rng, repeat=rank)]


@dataclass
class GrowthReport:
    ts: np.ndarray
    lengths: np.ndarray            # (len(ts), n_classes)
    log_norm: np.ndarray           # log(1 + max |tr|)
    fit: tuple                     # slope, intercept of log_norm against sqrt(t)
    residual: float                # max relative residual of that fit
    envelope: tuple                # (A_lower, A_upper) slopes with the fitted intercept
    length_constants: np.ndarray   # (n_classes, 2): min and max of l / sqrt(t)

    @property
    def envelope_ratio(self) -> float:
        lo, hi = self.envelope
        return hi / lo if lo > 0 else math.inf

    def drift(self, k: int, top: float = 10.0) -> float:
        """Relative spread of l_k / sqrt(t) over the top factor `top` of parameters."""
        sel = self.ts >= self.ts.max() / top
        r = self.lengths[sel, k] / np.sqrt(self.ts[sel])
        return float((r.max() - r.min()) / abs(r.mean())) if r.mean() != 0 else math.inf


def growth_survey(family: AbelianFamily, classes, ts, method: str = "closed", tol: float = 1e-10) -> GrowthReport:
    """Fit lengths and log(1 + max |tr|) against sqrt(t).

    method="ode" computes lengths and traces by piecewise renormalized
    ODE transport instead of closed forms.
    """
    ts = np.asarray(ts, float)
    classes = [tuple(c) for c in classes]
    L = np.zeros((len(ts), len(classes)))
    logtr = np.zeros((len(ts), len(classes)))
    for a, t in enumerate(ts):
        for b, c in enumerate(classes):
            if method == "ode":
                lt = family.ode_log_trace(t, c, tol)
                L[a, b] = family.ode_translation_length(t, c, tol)
            else:
                lt = family.log_abs_trace(t, c)
                L[a, b] = family.translation_length(t, c)
            logtr[a, b] = lt
    m = logtr.max(axis=1)
    y = np.where(m > 30, m + np.log1p(np.exp(-np.minimum(m, 700))), np.log1p(np.exp(np.minimum(m, 700))))
    x = np.sqrt(ts)
    A, B = np.polyfit(x, y, 1)
    resid = float(np.max(np.abs(y - (A * x + B)) / np.abs(y)))
    slopes = (y - B) / x
    consts = np.stack([(L / x[:, None]).min(axis=0), (L / x[:, None]).max(axis=0)], axis=1)
    return GrowthReport(ts, L, y, (float(A), float(B)), resid,
                        (float(slopes.min()), float(slopes.max())), consts)


def survey_json(report: SurveyReport, growth: GrowthReport | None = None) -> str:
    d = {"ms_limit": report.summary()}
    if growth is not None:
        d["growth"] = {"fit": list(growth.fit), "residual": growth.residual,
                       "envelope": list(growth.envelope),
                       "length_constants": growth.length_constants.tolist()}
    return json.dumps(d, indent=2, sort_keys=True)


# --- non-elementary comparison family -----------------------------------------------

def crossing_axes_representation(L: float) -> Representation:
    """Two loxodromics of translation length L whose axes cross at right angles at (0,0,1).

    a has axis 0-infinity; b has axis -1..1 through the same point.
    """
    a = MoebiusMatrix.diagonal(cmath.exp(L / 2))
    ch, sh = math.cosh(L / 2), math.sinh(L / 2)
    # det = ch^2 - sh^2 = 1 exactly; recomputing it in floating point cancels for large L
    b = MoebiusMatrix.from_array(np.array([[ch, sh], [sh, ch]], dtype=complex), normalize=False)
    return Representation({"a": a, "b": b})


def _reduce(word: str) -> str:
    out = []
    for ch in word:
        if out and out[-1] == ch.swapcase():
            out.pop()
        else:
            out.append(ch)
    return "".join(out)


def free_orbit_delta_survey(ts, radius: int = 2) -> tuple[np.ndarray, float]:
    """Four-point delta of the rescaled orbit metric of the crossing-axes family.

    The family has translation length sqrt(t) for both generators.  Orbit
    points are the reduced words of length <= radius; distances are
    measured as d(o, w1^-1 w2 o) so that no huge matrices are subtracted.
    Returns the deltas and the log-log slope against t.  Large t
    overflows double precision (entries grow like exp(radius sqrt(t))),
    so keep t below about 1e4.
    """
    words = [""]
    for _ in range(radius):
        words += [w + ch for w in words if len(w) == len(words[-1]) for ch in "abAB"
                  if not (w and w[-1] == ch.swapcase())]
    words = list(dict.fromkeys(words))
    ident = MoebiusMatrix.identity()
    deltas = []
    for t in ts:
        rep = crossing_axes_representation(math.sqrt(t))
        n = len(words)
        D = np.zeros((n, n))
        for i, j in itertools.combinations(range(n), 2):
            w = _reduce("".join(ch.swapcase() for ch in reversed(words[i])) + words[j])
            D[i, j] = D[j, i] = frame_distance(ident, rep.matrix(w))
        deltas.append(four_point_delta(D / math.sqrt(t)))
    deltas = np.array(deltas)
    slope = float(np.polyfit(np.log(ts), np.log(deltas), 1)[0]) if np.all(deltas > 0) else math.nan
    return deltas, slope
