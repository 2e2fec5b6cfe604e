"""Epstein maps of conformal metrics and the Epstein-Schwarz map of q dz^2.

For a metric e^eta |dw| the Epstein map is the P0-orbit of

    Ep~(w) = [[1, w], [0, 1]] [[1, 0], [eta_w, 1]] diag(e^{-eta/2}, e^{eta/2}),

with P0 = (0, 0, 2).  The Epstein-Schwarz map uses the developing map f
of q and the metric sqrt(2)|q|^{1/2}|dz|.  It is evaluated in local
frames: with A(z) the Moebius map osculating f at z,
Ep(z) = A(z) Ep~_z(z) P0 where Ep~_z uses the metric written in z.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .develop import DevelopingJet, segment_transport
from .hyp3 import (H3Point, MoebiusMatrix, P0, apply, h3_distance, lorentz, to_hyperboloid,
                   quasigeodesic_fit, SampledPath)
from .integrate import dopri
from .qdiff.planar import PlanarDifferential, distance_to_zero_set

D0 = 4.0
C0 = 18.0
SQRT2 = math.sqrt(2.0)


class MetricZeroError(ValueError):
    """The metric vanishes at the requested point."""


class DegenerateJetError(ValueError):
    """The developing map is not an immersion at the point."""


@dataclass(frozen=True)
class MetricJet:
    """log-density eta of e^eta |dw| and its derivatives at one point."""

    eta: float
    eta_w: complex
    eta_ww: complex = 0j
    eta_wwbar: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.eta):
            raise MetricZeroError("log-density is not finite")

    @property
    def sigma(self) -> float:
        return math.exp(self.eta)

    @property
    def curvature(self) -> float:
        return -4 * math.exp(-2 * self.eta) * self.eta_wwbar

    @property
    def schwarzian(self) -> complex:
        """B(sigma_CP1, sigma) = eta_ww - eta_w^2 in this chart."""
        return self.eta_ww - self.eta_w ** 2

    def scaled(self, t: float) -> "MetricJet":
        """Jet of e^t sigma."""
        return MetricJet(self.eta + t, self.eta_w, self.eta_ww, self.eta_wwbar)


def flat_metric_jet(diff: PlanarDifferential, z: complex) -> MetricJet:
    """Jet of sqrt(2)|q|^{1/2}|dz| in the z chart."""
    q, dq, d2q = (complex(v) for v in diff.jet(z, 2))
    if q == 0:
        raise MetricZeroError(f"q vanishes at {z}")
    return MetricJet(0.5 * math.log(2 * abs(q)), dq / (4 * q), (d2q * q - dq * dq) / (4 * q * q), 0.0)


def epstein_matrix(w: complex, jet: MetricJet) -> np.ndarray:
    e = math.exp(jet.eta / 2)
    h = jet.eta_w
    return np.array([[(1 + w * h) / e, w * e], [h / e, e]], dtype=complex)


@dataclass(frozen=True)
class EpsteinFrame:
    point: H3Point
    ideal: complex
    matrix: MoebiusMatrix

    @property
    def hyperboloid(self) -> np.ndarray:
        return to_hyperboloid(self.point.x, self.point.y, self.point.height)


def _frame(M: np.ndarray) -> EpsteinFrame:
    mm = MoebiusMatrix.from_array(M, normalize=False)
    return EpsteinFrame(apply(mm, P0), mm.act(0), mm)


def epstein_point(w: complex, jet: MetricJet) -> EpsteinFrame:
    return _frame(epstein_matrix(complex(w), jet))


def normal_flow(frame: EpsteinFrame, t: float) -> H3Point:
    """Move the point a distance t along its unit normal toward the ideal point."""
    return apply(frame.matrix, H3Point(0j, 2 * math.exp(-t)))


def contact_defect(jet_of, w: complex, h: float = 1e-5) -> float:
    """|Re| of the upper-left entry of Ep~^-1 dEp~, relative to the form's size.

    jet_of(w) returns the MetricJet at w.  Central differences in the
    x and y directions.
    """
    M = epstein_matrix(w, jet_of(w))
    Minv = np.linalg.inv(M)
    worst = 0.0
    for d in (1.0, 1j):
        Mp = epstein_matrix(w + h * d, jet_of(w + h * d))
        Mm = epstein_matrix(w - h * d, jet_of(w - h * d))
        D = Minv @ (Mp - Mm) / (2 * h)
        worst = max(worst, abs(D[0, 0].real) / max(1.0, float(np.max(np.abs(D)))))
    return worst


# --- Epstein-Schwarz ---------------------------------------------------------------

def _G(z: complex) -> np.ndarray:
    return np.array([[0, 1], [1, -z]], dtype=complex)


def _Ginv(z: complex) -> np.ndarray:
    return np.array([[z, 1], [1, 0]], dtype=complex)


def osculating_frame(Y: np.ndarray, z: complex) -> np.ndarray:
    """Moebius map agreeing with u1/u2 to second order at z (unit determinant)."""
    return 1j * Y @ _G(z)


def epstein_schwarz(diff: PlanarDifferential, z: complex, jet: DevelopingJet) -> EpsteinFrame:
    """Epstein-Schwarz frame at z for the developing jet at z."""
    z = complex(z)
    if jet.base != z:
        raise ValueError("jet must be based at z")
    A = osculating_frame(jet.Y, z)
    return _frame(A @ epstein_matrix(z, flat_metric_jet(diff, z)))


def epstein_schwarz_pushforward(diff: PlanarDifferential, z: complex, jet: DevelopingJet) -> EpsteinFrame:
    """Same point by pushing the metric through f: eta' = eta - log|f'|."""
    fp = jet.fprime
    if fp == 0 or not np.isfinite(abs(fp)):
        raise DegenerateJetError("f' vanishes or is infinite")
    w = jet.f
    if not np.isfinite(abs(w)):
        raise DegenerateJetError("f(z) is infinite in this chart")
    mj = flat_metric_jet(diff, z)
    r = jet.log_derivative_ratio
    pushed = MetricJet(mj.eta - math.log(abs(fp)), (mj.eta_w - r / 2) / fp)
    return epstein_point(w, pushed)


class EpsteinSchwarzMap:
    """Epstein-Schwarz map developed from a base point.

    The developing map is normalized so that its osculating Moebius map
    at the base is the identity.  Points are reached by transport along
    straight chords, so the domain should be simply connected (or the
    chords chosen consistently).
    """

    def __init__(self, diff: PlanarDifferential, base: complex, tol: float = 1e-13):
        self.diff = diff
        self.base = complex(base)
        self.tol = tol
        self.Y0 = -1j * _Ginv(self.base)

    def _frame_from_Y(self, Y, z) -> np.ndarray:
        return osculating_frame(Y, z) @ epstein_matrix(z, flat_metric_jet(self.diff, z))

    def jet_along(self, points: Sequence[complex]) -> list[np.ndarray]:
        """Fundamental matrices Y at points reached along the chain base -> p1 -> p2 ..."""
        Y = self.Y0
        z = self.base
        out = []
        for p in points:
            p = complex(p)
            Y = Y @ segment_transport(self.diff, z, p, self.tol)
            z = p
            out.append(Y)
        return out

    def matrices_along(self, points: Sequence[complex]) -> list[np.ndarray]:
        return [self._frame_from_Y(Y, complex(p)) for Y, p in zip(self.jet_along(points), points)]

    def frames_along(self, points: Sequence[complex]) -> list[EpsteinFrame]:
        return [_frame(M) for M in self.matrices_along(points)]

    def frame(self, z: complex) -> EpsteinFrame:
        return self.frames_along([z])[0]

    def point(self, z: complex) -> H3Point:
        return self.frame(z).point

    def developing_jet(self, z: complex) -> DevelopingJet:
        Y = self.jet_along([z])[0]
        return DevelopingJet(complex(z), Y)


def _hyperboloid_of(M: np.ndarray) -> np.ndarray:
    p = apply(MoebiusMatrix.from_array(M, normalize=False), P0)
    return to_hyperboloid(p.x, p.y, p.height)


def local_matrices(diff: PlanarDifferential, z: complex, offsets: Sequence[complex],
                   tol: float = 1e-14) -> list[np.ndarray]:
    """Frames at z + o for the development whose osculating map at z is the identity."""
    z = complex(z)
    Y0 = -1j * _Ginv(z)
    out = []
    for o in offsets:
        p = z + o
        Y = Y0 @ segment_transport(diff, z, p, tol) if o != 0 else Y0
        out.append(osculating_frame(Y, p) @ epstein_matrix(p, flat_metric_jet(diff, p)))
    return out


def local_images(diff: PlanarDifferential, z: complex, offsets: Sequence[complex],
                 tol: float = 1e-14) -> np.ndarray:
    """Hyperboloid coordinates of Ep(z + o) for the development based at z."""
    return np.array([_hyperboloid_of(M) for M in local_matrices(diff, z, offsets, tol)])


def frame_contact_defect(diff: PlanarDifferential, z: complex, h: float = 1e-5) -> float:
    """Contact certificate of the Epstein-Schwarz frames themselves.

    |Re| of the upper-left entry of F^-1 dF, by central differences,
    relative to the size of F^-1 dF.
    """
    M0, xp, xm, yp, ym = local_matrices(diff, z, [0, h, -h, 1j * h, -1j * h])
    Minv = np.linalg.inv(M0)
    worst = 0.0
    for Mp, Mm in ((xp, xm), (yp, ym)):
        D = Minv @ (Mp - Mm) / (2 * h)
        worst = max(worst, abs(D[0, 0].real) / max(1.0, float(np.max(np.abs(D)))))
    return worst


# --- fundamental forms ---------------------------------------------------------------

@dataclass
class FormsAtPoint:
    I20: complex            # I(v) = 2 Re(I20 v^2) + I11 |v|^2
    I11: float
    II20: complex
    II11: float
    n_h: float
    n_v: float
    kappa_h: float
    kappa_v: float
    epsilon: float
    immersed: bool
    speed_bounds: dict = field(default_factory=dict)

    def first(self, v: complex) -> float:
        return 2 * (self.I20 * v * v).real + self.I11 * abs(v) ** 2

    def second(self, v: complex) -> float:
        return 2 * (self.II20 * v * v).real + self.II11 * abs(v) ** 2

    def first_matrix(self) -> np.ndarray:
        return _real_matrix(self.I20, self.I11)

    def second_matrix(self) -> np.ndarray:
        return _real_matrix(self.II20, self.II11)


def _real_matrix(c20: complex, c11: float) -> np.ndarray:
    return np.array([[c11 + 2 * c20.real, -2 * c20.imag], [-2 * c20.imag, c11 - 2 * c20.real]])


def _kappa_h_of(kv: float) -> float:
    return math.inf if abs(kv) < 1e-10 else 1 / kv


def general_fundamental_forms(jet: MetricJet, B: complex | None = None) -> FormsAtPoint:
    """First and second fundamental forms of the Epstein surface of e^eta|dw|.

    B defaults to the Schwarzian of the metric in this chart.  Principal
    curvatures come from I^-1 II; kappa_v belongs to the direction where
    I is largest.  n_h, n_v are speeds of unit vectors for the doubled
    metric 4|B| (that is 2|phi_hat| when B = -phi_hat/2).
    """
    B = jet.schwarzian if B is None else complex(B)
    s2 = jet.sigma ** 2
    K = jet.curvature
    I20 = (1 - K) * B
    I11 = 4 * abs(B) ** 2 / s2 + 0.25 * (1 - K) ** 2 * s2
    II20 = -K * B
    II11 = 4 * abs(B) ** 2 / s2 - 0.25 * (1 - K * K) * s2
    Im, IIm = _real_matrix(I20, I11), _real_matrix(II20, II11)
    det_I = float(np.linalg.det(Im))
    immersed = det_I > 1e-14 * I11 * I11
    if immersed:
        vals, vecs = np.linalg.eig(np.linalg.solve(Im, IIm))
        vals = vals.real
        vecs = vecs.real
        norms = [vecs[:, k] @ Im @ vecs[:, k] / (vecs[:, k] @ vecs[:, k]) for k in range(2)]
        kv_idx = int(np.argmax(norms))
        kv = float(vals[kv_idx])
        kh = _kappa_h_of(kv) if abs(K) < 1e-14 else float(vals[1 - kv_idx])
    else:
        kv, kh = 0.0, math.inf
    big = 2 * abs(B)
    if big > 0:
        xi2 = 1 / (2 * big)
        n_h = math.sqrt(max(0.0, (I11 - 2 * abs(I20)) * xi2))
        n_v = math.sqrt(max(0.0, (I11 + 2 * abs(I20)) * xi2))
    else:
        n_h = n_v = math.nan
    return FormsAtPoint(I20, I11, II20, II11, n_h, n_v, kh, kv, math.nan, immersed)


def epstein_forms(diff: PlanarDifferential, z: complex) -> FormsAtPoint:
    """Closed-form fundamental forms of the Epstein-Schwarz map at z."""
    phi = complex(diff(z))
    ph = complex(diff.phi_hat_value(z))
    if phi == 0:
        raise MetricZeroError(f"q vanishes at {z}")
    if ph == 0:
        raise MetricZeroError(f"phi_hat vanishes at {z}")
    a, b = abs(ph), abs(phi)
    I20 = -ph / 2
    I11 = (a * a + b * b) / (2 * b)
    II11 = (a * a - b * b) / (2 * b)
    immersed = abs(a - b) > 1e-15 * (a + b)
    kv = (a - b) / (a + b)
    kh = _kappa_h_of(kv) if immersed else math.inf
    n_h = abs(a - b) / (2 * math.sqrt(a * b))
    n_v = (a + b) / (2 * math.sqrt(a * b))
    eps = abs(complex(diff.beta_value(z)) / phi)
    bounds = {}
    if eps < 0.75:
        # the lemma states strict inequalities; equality happens when beta = 0
        bounds = {"n_h<=eps": n_h <= eps, "1<=n_v<=1+eps": 1 <= n_v <= 1 + eps + 1e-15,
                  "|kappa_v|<=eps": abs(kv) <= eps}
    return FormsAtPoint(I20, I11, 0j, II11, n_h, n_v, kh, kv, eps, immersed, bounds)


def fd_first_form(diff: PlanarDifferential, z: complex, h: float | None = None) -> np.ndarray:
    """First fundamental form (real 2x2) of the evaluated map, by Richardson-extrapolated
    central differences on the hyperboloid."""
    z = complex(z)
    if h is None:
        h = 2e-3 * min(1.0, float(diff.distance_to_singular(z)))
    dirs = (1.0, 1j)

    def derivs(hh):
        offs = []
        for d in dirs:
            offs += [hh * d, -hh * d]
        X = local_images(diff, z, offs)
        return [(X[2 * k] - X[2 * k + 1]) / (2 * hh) for k in range(2)]

    D1, D2 = derivs(h), derivs(h / 2)
    D = [(4 * b - a) / 3 for a, b in zip(D1, D2)]
    G = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            G[i, j] = float(lorentz(D[i], D[j]))
    return G


def first_form_defect(diff: PlanarDifferential, z: complex) -> float:
    """Relative deviation of the finite-difference I from the closed form."""
    fd = fd_first_form(diff, z)
    cf = epstein_forms(diff, z).first_matrix()
    return float(np.max(np.abs(fd - cf)) / np.max(np.abs(np.linalg.eigvalsh(cf))))


def shape_product(forms: FormsAtPoint) -> float:
    return forms.kappa_h * forms.kappa_v


def principal_direction_error(diff: PlanarDifferential, z: complex) -> float:
    """Angle between the eigenvector of I with the larger eigenvalue and the
    vertical direction of phi_hat."""
    f = epstein_forms(diff, z)
    vals, vecs = np.linalg.eigh(f.first_matrix())
    v = vecs[:, int(np.argmax(vals))]
    v = complex(v[0], v[1])
    ph = complex(diff.phi_hat_value(z))
    vert = 1j / cmath.sqrt(ph)
    ang = abs(cmath.phase(v / vert))
    return min(ang, abs(math.pi - ang))


# --- leaves ---------------------------------------------------------------------------

@dataclass
class LeafTrace:
    ell: np.ndarray          # sqrt(2) |phi|^{1/2}-length along the leaf
    z: np.ndarray
    holonomy: np.ndarray     # phi holonomy from the start


def trace_leaf(diff: PlanarDifferential, z0: complex, kind: str, length: float,
               n: int = 33, tol: float = 1e-12) -> LeafTrace:
    """Horizontal or vertical leaf of phi_hat through z0, sampled at n points.

    The parameter is arclength for sqrt(2)|q|^{1/2}|dz|; negative length
    runs backwards.
    """
    if kind not in ("horizontal", "vertical"):
        raise ValueError("kind must be horizontal or vertical")
    rot = 1.0 if kind == "horizontal" else 1j
    z0 = complex(z0)
    wh0 = cmath.sqrt(complex(diff.phi_hat_value(z0)))
    w0 = cmath.sqrt(complex(diff(z0)))
    sgn = 1.0 if length >= 0 else -1.0

    def rhs(s, y):
        z, wh, w = y[0], y[1], y[2]
        e = rot * abs(wh) / wh
        dz = sgn * e / (SQRT2 * abs(w))
        return np.array([dz, complex(diff.phi_hat_derivative(z)) * dz / (2 * wh),
                         complex(diff.derivative(z, 1)) * dz / (2 * w), w * dz])

    ells = np.linspace(0.0, abs(length), n)
    y = np.array([z0, wh0, w0, 0j])
    zs, hs = [z0], [0j]
    for a, b in zip(ells[:-1], ells[1:]):
        y = dopri(rhs, y, a, b, tol=tol).final
        zs.append(complex(y[0]))
        hs.append(complex(y[3]))
    return LeafTrace(sgn * ells, np.array(zs), np.array(hs))


@dataclass
class LeafCurvature:
    k: float
    bound: float
    d: float
    hypothesis: bool
    passed: bool


def _curve_curvature(X: np.ndarray, h: float) -> float:
    """Curvature at the middle of five equally spaced hyperboloid points."""
    v = (-X[4] + 8 * X[3] - 8 * X[1] + X[0]) / (12 * h)
    a = (-X[4] + 16 * X[3] - 30 * X[2] + 16 * X[1] - X[0]) / (12 * h * h)
    P = X[2]
    a_t = a + float(lorentz(a, P)) * P
    vv = float(lorentz(v, v))
    perp = a_t - float(lorentz(a_t, v)) / vv * v
    return math.sqrt(max(0.0, float(lorentz(perp, perp)))) / vv


def leaf_curvature(diff: PlanarDifferential, z: complex, h: float = 2e-2,
                   d: float | None = None) -> LeafCurvature:
    """Curvature in H^3 of the image of the vertical phi_hat leaf through z."""
    z = complex(z)
    fwd = trace_leaf(diff, z, "vertical", 2 * h, n=3)
    bwd = trace_leaf(diff, z, "vertical", -2 * h, n=3)
    pts = [bwd.z[2], bwd.z[1], z, fwd.z[1], fwd.z[2]]
    m = EpsteinSchwarzMap(diff, z, tol=1e-14)
    X = []
    for p in pts:
        M = m.matrices_along([p])[0]
        X.append(_hyperboloid_of(M))
    k = _curve_curvature(np.array(X), h)
    if d is None:
        d = distance_to_zero_set(diff, z).distance if diff.zeros else math.inf
    hyp = d > 2 * math.sqrt(3)
    bound = 12 / d ** 2
    # with no zeros the bound is 0 and the leaf images are geodesics
    ok = k < bound if np.isfinite(d) else k < 1e-8
    return LeafCurvature(k, bound, d, hyp, ok if hyp else False)


def segment_standoff(diff: PlanarDifferential, zs: Sequence[complex], samples: int = 5) -> float:
    """phi-distance to the zero set, minimized over sample points of a curve."""
    if not diff.zeros:
        return math.inf
    idx = np.unique(np.linspace(0, len(zs) - 1, samples).round().astype(int))
    return min(distance_to_zero_set(diff, complex(zs[i])).distance for i in idx)


@dataclass
class CollapseReport:
    kind: str
    length: float            # sqrt(2)-scaled phi-length
    raw_length: float
    d: float
    hypothesis: bool
    image_length: float
    image_diameter: float
    endpoint_distance: float
    height: float = math.nan
    bound: tuple = ()
    passed: bool | None = None

    @property
    def factor(self) -> float:
        return self.image_diameter / self.length


def _image_stats(diff, zs, base=None):
    m = EpsteinSchwarzMap(diff, zs[0] if base is None else base)
    pts = [f.point for f in m.frames_along(zs)]
    x = np.array([p.horizontal for p in pts])
    t = np.array([p.height for p in pts])
    from .hyp3 import h3_distance_arrays
    steps = h3_distance_arrays(x[:-1], t[:-1], x[1:], t[1:])
    X, Tt = np.meshgrid(np.arange(len(pts)), np.arange(len(pts)))
    D = h3_distance_arrays(x[X], t[X], x[Tt], t[Tt])
    return float(np.sum(steps)), float(np.max(D)), float(D[0, -1]), pts


def collapse_report(diff: PlanarDifferential, start: complex, kind: str, length: float = 1.0,
                    end: complex | None = None, n: int = 33, d: float | None = None) -> CollapseReport:
    """Measured image of a leaf segment of phi_hat, or of a phi-geodesic segment.

    kind 'horizontal'/'vertical': the leaf from start with sqrt(2)-scaled
    phi-length `length`.  kind 'general': the straight phi-segment from
    start to end.  Bounds use D0 = 4 and C0 = 18 with d the raw phi
    distance to the zeros.
    """
    if kind == "general":
        from .qdiff.planar import _integrate_sqrt, trace_ray
        if end is None:
            raise ValueError("general segments need an end point")
        w0 = cmath.sqrt(complex(diff(start)))
        hol, _, _ = _integrate_sqrt(diff, complex(start), complex(end), w_start=w0)
        ray_pts = [complex(start)]
        z, w = complex(start), w0
        for _ in range(n - 1):
            r = trace_ray(diff, z, hol, abs(hol) / (n - 1), w0=w, tol=1e-12)
            z, w = complex(r.z[-1]), complex(r.w[-1])
            ray_pts.append(z)
        zs = np.array(ray_pts)
        raw = abs(hol)
        height = SQRT2 * abs(hol.imag)
    else:
        leaf = trace_leaf(diff, start, kind, length, n)
        zs = leaf.z
        raw = abs(length) / SQRT2
        height = math.nan
    L = SQRT2 * raw
    if d is None:
        d = segment_standoff(diff, zs)
    img_len, diam, endd, _ = _image_stats(diff, zs)
    hyp = d > D0
    c = C0 / d ** 2 if np.isfinite(d) else 0.0
    if kind == "horizontal":
        bound = (0.0, c * L)
        passed = diam <= c * L if hyp else None
    elif kind == "vertical":
        bound = ((1 - c) * L, (1 + c) * L)
        passed = ((1 - c) * L < endd < (1 + c) * L) if hyp else None
    else:
        bound = ()
        passed = None
    return CollapseReport(kind, L, raw, d, hyp, img_len, diam, endd, height, bound, passed)


def height_estimate_fit(reports: Sequence[CollapseReport]) -> tuple[float, float]:
    """Smallest (K', C') with K'^-1 h - C' <= d_H3 <= K' h + C' over general segments."""
    h = np.array([r.height for r in reports])
    D = np.array([r.endpoint_distance for r in reports])
    K = max(1.0, float(np.max(D / np.maximum(h, 1e-300))), float(np.max(h / np.maximum(D, 1e-300))))
    K = min(K, 10.0) if np.all(h > 0) else K
    C = float(max(0.0, np.max(h / K - D), np.max(D - K * h)))
    return K, C


# --- meshes -----------------------------------------------------------------------------

@dataclass
class EpsteinMesh:
    z: np.ndarray                # (n, m) complex sample grid
    x: np.ndarray                # horizontal coordinate in upper half-space
    t: np.ndarray                # height
    valid: np.ndarray
    faces: list                  # triangles of flat grid indices
    channels: dict
    matrices: np.ndarray         # (n, m, 2, 2)

    @property
    def n_vertices(self) -> int:
        return int(self.z.size)


def epstein_mesh(diff: PlanarDifferential, grid: np.ndarray, standoff: float = 1e-3,
                 allow_near_zeros: bool = False, base: complex | None = None,
                 tol: float = 1e-12) -> EpsteinMesh:
    """Epstein-Schwarz images of a rectangular grid of sample points.

    Grid points closer than `standoff` (Euclidean, in z) to a zero or
    pole are dropped unless allow_near_zeros is set.  Faces across the
    locus |phi_hat| = |phi| are omitted.
    """
    grid = np.asarray(grid, dtype=complex)
    if grid.size == 0:
        return EpsteinMesh(grid, np.zeros(0, complex), np.zeros(0), np.zeros(0, bool), [], {}, np.zeros((0, 2, 2)))
    n, m = grid.shape
    ds = np.array([[float(diff.distance_to_singular(z)) if len(diff.singular_points) else math.inf
                    for z in row] for row in grid])
    qv = np.array([[complex(diff(z)) for z in row] for row in grid])
    valid = (qv != 0) & ((ds > standoff) | allow_near_zeros)
    b = grid[0, 0] if base is None else complex(base)
    mp = EpsteinSchwarzMap(diff, b, tol)
    mats = np.full((n, m, 2, 2), np.nan, dtype=complex)
    Ys = np.empty((n, m, 2, 2), dtype=complex)
    col = mp.jet_along(list(grid[:, 0]))
    for i in range(n):
        Ys[i, 0] = col[i]
        Y, zp = col[i], grid[i, 0]
        for j in range(1, m):
            Y = Y @ segment_transport(diff, zp, grid[i, j], tol)
            zp = grid[i, j]
            Ys[i, j] = Y
    x = np.full((n, m), np.nan, dtype=complex)
    t = np.full((n, m), np.nan)
    kv = np.full((n, m), np.nan)
    eps = np.full((n, m), np.nan)
    sgn = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            if not valid[i, j]:
                continue
            z = grid[i, j]
            try:
                M = mp._frame_from_Y(Ys[i, j], z)
                # long transport chains drift off det 1 at the 1e-12 level
                M = M / cmath.sqrt(complex(np.linalg.det(M)))
                fr = _frame(M)
                f = epstein_forms(diff, z)
            except (MetricZeroError, ZeroDivisionError):
                valid[i, j] = False
                continue
            mats[i, j] = M
            x[i, j] = fr.point.horizontal
            t[i, j] = fr.point.height
            kv[i, j] = f.kappa_v
            eps[i, j] = f.epsilon
            sgn[i, j] = np.sign(abs(complex(diff.phi_hat_value(z))) - abs(qv[i, j]))
    faces = []
    for i in range(n - 1):
        for j in range(m - 1):
            quad = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
            if not all(valid[a] for a in quad):
                continue
            if len({sgn[a] for a in quad}) > 1:
                continue
            k = [a[0] * m + a[1] for a in quad]
            faces.append((k[0], k[1], k[2]))
            faces.append((k[0], k[2], k[3]))
    return EpsteinMesh(grid, x, t, valid, faces, {"kappa_v": kv, "epsilon": eps, "d": ds}, mats)


def mesh_contact_defect(diff: PlanarDifferential, mesh: EpsteinMesh, h: float = 1e-5) -> float:
    """Largest frame contact defect over the valid mesh vertices."""
    worst = 0.0
    for z in mesh.z[mesh.valid]:
        worst = max(worst, frame_contact_defect(diff, complex(z), h))
    return worst
