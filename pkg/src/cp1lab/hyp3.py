"""Geometry of hyperbolic 3-space in the upper half-space model.

Isometries are unit-determinant 2x2 complex matrices acting on points
(x, t) with x complex and t > 0.  Besides the basic action and distance
this module has axes and translation lengths of loxodromics, a
quasigeodesic constant fit for sampled paths and the four-point
hyperbolicity constant of a finite metric.
"""

from __future__ import annotations

import cmath
import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DET_TOL = 1e-12
NEAR_PARABOLIC_TOL = 1e-8
RENORMALIZE_EVERY = 64

INF = math.inf


class InvalidMatrixError(ValueError):
    pass


class NoAxisError(ValueError):
    pass


class InsufficientDataError(ValueError):
    pass


class InvalidMetricError(ValueError):
    pass


class NearParabolicWarning(UserWarning):
    pass


def is_infinite(w) -> bool:
    return w is None or (not isinstance(w, complex) and math.isinf(w)) or (
        isinstance(w, complex) and (math.isinf(w.real) or math.isinf(w.imag)))


@dataclass(frozen=True)
class MoebiusMatrix:
    a: complex
    b: complex
    c: complex
    d: complex

    @classmethod
    def from_array(cls, m, normalize: bool = True) -> "MoebiusMatrix":
        m = np.asarray(m, dtype=complex)
        M = cls(complex(m[0, 0]), complex(m[0, 1]), complex(m[1, 0]), complex(m[1, 1]))
        return M.normalized() if normalize else M

    @classmethod
    def identity(cls) -> "MoebiusMatrix":
        return cls(1, 0, 0, 1)

    @classmethod
    def diagonal(cls, mu: complex) -> "MoebiusMatrix":
        mu = complex(mu)
        return cls(mu, 0, 0, 1 / mu)

    @classmethod
    def translation(cls, c: complex) -> "MoebiusMatrix":
        return cls(1, complex(c), 0, 1)

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    def trace(self) -> complex:
        return self.a + self.d

    def normalized(self) -> "MoebiusMatrix":
        """Divide by a square root of the determinant."""
        det = self.det()
        if det == 0 or not np.isfinite(det):
            raise InvalidMatrixError("singular matrix cannot be normalized")
        scale = max(abs(self.a * self.d), abs(self.b * self.c))
        if scale > 1e6 * abs(det) and abs(det - 1) <= 1e-12 * scale:
            # det is lost to cancellation and already 1 up to roundoff
            return self
        s = cmath.sqrt(det)
        return MoebiusMatrix(self.a / s, self.b / s, self.c / s, self.d / s)

    def check(self, tol: float = DET_TOL) -> "MoebiusMatrix":
        # relative to the size of the entries so that large holonomies pass
        scale = max(1.0, abs(self.a * self.d), abs(self.b * self.c))
        if abs(self.det() - 1) > tol * scale:
            raise InvalidMatrixError(f"determinant {self.det()} is not 1")
        return self

    def inverse(self) -> "MoebiusMatrix":
        return MoebiusMatrix(self.d, -self.b, -self.c, self.a)

    def __matmul__(self, other: "MoebiusMatrix") -> "MoebiusMatrix":
        return MoebiusMatrix(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def __neg__(self) -> "MoebiusMatrix":
        return MoebiusMatrix(-self.a, -self.b, -self.c, -self.d)

    def act(self, w):
        """Action on the boundary sphere; infinity is math.inf."""
        if is_infinite(w):
            return INF if self.c == 0 else self.a / self.c
        den = self.c * w + self.d
        if den == 0:
            return INF
        return (self.a * w + self.b) / den

    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))

    def classify(self, tol: float = NEAR_PARABOLIC_TOL) -> str:
        tr = self.trace()
        if abs(self.b) < tol and abs(self.c) < tol and abs(self.a - self.d) < tol:
            return "identity"
        if abs(tr * tr - 4) < tol:
            return "parabolic"
        if abs(tr.imag) < tol and abs(tr.real) < 2:
            return "elliptic"
        return "loxodromic"


def product(mats: Iterable[MoebiusMatrix]) -> MoebiusMatrix:
    """Ordered product with periodic determinant renormalization."""
    out = MoebiusMatrix.identity()
    for k, m in enumerate(mats, start=1):
        out = out @ m
        if k % RENORMALIZE_EVERY == 0:
            out = out.normalized()
    return out


@dataclass(frozen=True)
class H3Point:
    horizontal: complex
    height: float

    def __post_init__(self):
        if not self.height > 0:
            raise ValueError(f"height must be positive, got {self.height}")

    @property
    def x(self) -> float:
        return self.horizontal.real

    @property
    def y(self) -> float:
        return self.horizontal.imag

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.horizontal.real, self.horizontal.imag, self.height)


ORIGIN = H3Point(0j, 1.0)
P0 = H3Point(0j, 2.0)


def apply(M: MoebiusMatrix, p: H3Point) -> H3Point:
    """Isometric action of M on the upper half-space."""
    M.check()
    x, t = complex(p.horizontal), float(p.height)
    cxd = M.c * x + M.d
    n = abs(cxd) ** 2 + abs(M.c) ** 2 * t * t
    xn = ((M.a * x + M.b) * cxd.conjugate() + M.a * M.c.conjugate() * t * t) / n
    return H3Point(complex(xn), t / n)


def apply_many(M: MoebiusMatrix, x: np.ndarray, t: np.ndarray):
    """Vectorized action on arrays of horizontal coordinates and heights."""
    x = np.asarray(x, dtype=complex)
    t = np.asarray(t, dtype=float)
    cxd = M.c * x + M.d
    n = np.abs(cxd) ** 2 + abs(M.c) ** 2 * t * t
    xn = ((M.a * x + M.b) * np.conj(cxd) + M.a * np.conj(M.c) * t * t) / n
    return xn, t / n


def h3_distance(p: H3Point, q: H3Point) -> float:
    dx = abs(p.horizontal - q.horizontal)
    dt = p.height - q.height
    return 2.0 * math.asinh(math.hypot(dx, dt) / (2.0 * math.sqrt(p.height * q.height)))


def h3_distance_arrays(x1, t1, x2, t2) -> np.ndarray:
    x1, x2 = np.asarray(x1, complex), np.asarray(x2, complex)
    t1, t2 = np.asarray(t1, float), np.asarray(t2, float)
    r = np.hypot(np.abs(x1 - x2), t1 - t2)
    return 2.0 * np.arcsinh(r / (2.0 * np.sqrt(t1 * t2)))


def frame_distance(g: MoebiusMatrix, h: MoebiusMatrix) -> float:
    """Distance between g(o) and h(o), o = (0, 0, 1).

    Uses cosh d = |g^-1 h|_F^2 / 2, which stays accurate when the
    matrices themselves are huge but their ratio is moderate.
    """
    m = g.inverse() @ h
    fro2 = abs(m.a) ** 2 + abs(m.b) ** 2 + abs(m.c) ** 2 + abs(m.d) ** 2
    if fro2 < 10.0:
        return h3_distance(ORIGIN, apply(m.normalized(), ORIGIN))
    return math.acosh(fro2 / 2.0)


def to_ball(p: H3Point) -> np.ndarray:
    """Poincare ball coordinates with (0, 0, 1) sent to the origin."""
    x, y, t = p.as_tuple()
    return _to_ball(np.array([x]), np.array([y]), np.array([t]))[0]


def _to_ball(x, y, t):
    den = x * x + y * y + (t + 1) ** 2
    return np.stack([2 * x / den, 2 * y / den, (x * x + y * y + t * t - 1) / den], axis=-1)


def to_hyperboloid(x, y, t) -> np.ndarray:
    """Lorentz model coordinates (X0; X1, X2, X3) with X0 > 0."""
    x, y, t = (np.asarray(v, float) for v in (x, y, t))
    r2 = x * x + y * y
    return np.stack([(r2 + t * t + 1) / (2 * t), x / t, y / t, (r2 + t * t - 1) / (2 * t)], axis=-1)


def lorentz(u, v) -> np.ndarray:
    return -u[..., 0] * v[..., 0] + np.sum(u[..., 1:] * v[..., 1:], axis=-1)


# --- loxodromics ---------------------------------------------------------

def translation_length(M: MoebiusMatrix, warn: bool = True) -> float:
    """Translation length 2|Re arccosh(tr/2)|.

    Returns 0 for elliptic, parabolic and identity elements.  When the
    trace is within NEAR_PARABOLIC_TOL of +-2 without being exactly +-2
    the value is reported as 0 and a NearParabolicWarning is issued.
    """
    length, near = translation_length_info(M)
    if near and warn:
        warnings.warn("trace within tolerance of +-2; treated as parabolic",
                      NearParabolicWarning, stacklevel=2)
    return length


def translation_length_info(M: MoebiusMatrix) -> tuple[float, bool]:
    tr = M.trace()
    gap = abs(tr * tr - 4)
    if gap == 0:
        return 0.0, False
    if gap < NEAR_PARABOLIC_TOL:
        return 0.0, True
    return 2.0 * abs(cmath.acosh(tr / 2).real), False


def log_trace_length(log_abs_tr: float) -> float:
    """Translation length from log|tr| for traces too large to hold."""
    # |tr| = 2 cosh(l/2) for real traces; for large l this is l = 2 log|tr|
    if log_abs_tr < 30:
        return 2.0 * abs(cmath.acosh(math.exp(log_abs_tr) / 2).real)
    return 2.0 * log_abs_tr


@dataclass(frozen=True)
class GeodesicLine:
    """Geodesic given by its two ideal endpoints (math.inf allowed)."""
    start: complex | float
    end: complex | float

    def __post_init__(self):
        if is_infinite(self.start) and is_infinite(self.end):
            raise ValueError("endpoints coincide")
        if not is_infinite(self.start) and not is_infinite(self.end) and abs(self.start - self.end) < 1e-15:
            raise ValueError("endpoints coincide")

    def normalizer(self) -> MoebiusMatrix:
        """A Moebius map sending start to 0 and end to infinity."""
        p, q = self.start, self.end
        if is_infinite(q):
            return MoebiusMatrix(1, -p, 0, 1)
        if is_infinite(p):
            return MoebiusMatrix(0, 1, -1, q).normalized()
        return MoebiusMatrix(1, -p, 1, -q).normalized()

    def distance_to(self, pt: H3Point) -> float:
        img = apply(self.normalizer(), pt)
        return math.asinh(abs(img.horizontal) / img.height)

    def point_at(self, s: float) -> H3Point:
        """Point at signed arclength s from the foot of (0,0,1) after normalizing."""
        return apply(self.normalizer().inverse(), H3Point(0j, math.exp(s)))

    def image(self, M: MoebiusMatrix) -> "GeodesicLine":
        return GeodesicLine(M.act(self.start), M.act(self.end))


def fixed_points(M: MoebiusMatrix) -> list:
    a, b, c, d = M.a, M.b, M.c, M.d
    if abs(c) < 1e-300:
        if abs(a - d) < 1e-300:
            return [INF]
        return [b / (d - a), INF]
    # c w^2 + (d - a) w - b = 0, solved stably
    B = d - a
    disc = cmath.sqrt(B * B + 4 * b * c)
    sgn = 1 if (B.conjugate() * disc).real >= 0 else -1
    qq = -(B + sgn * disc) / 2
    roots = []
    if qq != 0:
        roots.append(qq / c)
        roots.append(-b / qq)
    else:
        roots = [0j, 0j]
    return roots


def _multiplier(M: MoebiusMatrix, w) -> complex:
    if is_infinite(w):
        return M.d / M.a if M.c == 0 else M.c  # not used for c != 0
    return 1.0 / (M.c * w + M.d) ** 2


def axis(M: MoebiusMatrix) -> GeodesicLine:
    """Axis of a loxodromic element, oriented from repelling to attracting."""
    if M.classify() != "loxodromic":
        raise NoAxisError(f"element with trace {M.trace()} is not loxodromic")
    fp = fixed_points(M)
    if len(fp) != 2:
        raise NoAxisError("could not isolate two fixed points")
    w1, w2 = fp
    m1 = abs(_multiplier(M, w1))
    m2 = abs(_multiplier(M, w2))
    # attracting fixed point has multiplier < 1
    if m1 < m2:
        return GeodesicLine(w2, w1)
    return GeodesicLine(w1, w2)


def displacement(M: MoebiusMatrix, p: H3Point) -> float:
    return h3_distance(p, apply(M, p))


# --- sampled paths ---------------------------------------------------------

@dataclass(frozen=True)
class SampledPath:
    params: tuple
    points: tuple

    def __post_init__(self):
        if len(self.params) != len(self.points):
            raise ValueError("parameter and point counts differ")
        p = np.asarray(self.params, float)
        if np.any(np.diff(p) <= 0):
            raise ValueError("parameters must be strictly increasing")

    @classmethod
    def from_arrays(cls, params, x, t) -> "SampledPath":
        pts = tuple(H3Point(complex(xi), float(ti)) for xi, ti in zip(x, t))
        return cls(tuple(float(s) for s in params), pts)

    def distance_matrix(self) -> np.ndarray:
        x = np.array([p.horizontal for p in self.points])
        t = np.array([p.height for p in self.points])
        return h3_distance_arrays(x[:, None], t[:, None], x[None, :], t[None, :])


def quasigeodesic_fit(path: SampledPath, c_budget: float = 0.0,
                      distances: np.ndarray | None = None) -> tuple[float, float]:
    """Smallest (K, C) with K^-1|b-a| - C <= d <= K|b-a| + C on all sample pairs.

    The additive constant is allowed up to c_budget when minimizing K;
    then C is the least value making the inequalities hold for that K.
    """
    n = len(path.params)
    if n < 2:
        raise InsufficientDataError("need at least two samples")
    s = np.asarray(path.params, float)
    D = path.distance_matrix() if distances is None else np.asarray(distances, float)
    iu = np.triu_indices(n, 1)
    gap = np.abs(s[:, None] - s[None, :])[iu]
    dist = D[iu]
    c = float(c_budget)
    with np.errstate(divide="ignore", invalid="ignore"):
        upper = np.where(gap > 0, (dist - c) / gap, 0.0)
        lower = np.where(dist + c > 0, gap / (dist + c), np.inf)
    K = max(1.0, float(np.max(upper)), float(np.max(lower)))
    C = float(max(0.0, np.max(gap / K - dist), np.max(dist - K * gap)))
    return K, C


# --- four point condition ------------------------------------------------------

def validate_metric(D, tol: float = 1e-9) -> np.ndarray:
    D = np.asarray(D, float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise InvalidMetricError("distance matrix must be square")
    scale = max(1.0, float(np.max(np.abs(D))) if D.size else 1.0)
    if np.any(np.abs(D - D.T) > tol * scale):
        raise InvalidMetricError("distance matrix is not symmetric")
    if np.any(np.abs(np.diag(D)) > tol * scale):
        raise InvalidMetricError("nonzero diagonal")
    if np.any(D < -tol * scale):
        raise InvalidMetricError("negative distance")
    # d_ik <= d_ij + d_jk for all triples
    viol = D[:, None, :] - D[:, :, None] - D[None, :, :].transpose(0, 2, 1)
    if D.shape[0] and np.max(viol) > tol * scale:
        raise InvalidMetricError("triangle inequality violated")
    return D


def four_point_delta(D, relative: bool = False, tol: float = 1e-9) -> float:
    """Gromov four-point constant max (L - M)/2 over all quadruples.

    L >= M >= S are the three pair sums d_ij + d_kl, d_ik + d_jl,
    d_il + d_jk.  Tree metrics give 0.  With relative=True the value is
    divided by the diameter.
    """
    D = validate_metric(D, tol)
    n = D.shape[0]
    if n < 4:
        return 0.0
    best = 0.0
    idx = np.array(list(itertools.combinations(range(n), 4)))
    for chunk in np.array_split(idx, max(1, len(idx) // 200000 + 1)):
        i, j, k, l = chunk.T
        sums = np.stack([D[i, j] + D[k, l], D[i, k] + D[j, l], D[i, l] + D[j, k]], axis=1)
        sums.sort(axis=1)
        best = max(best, float(np.max(sums[:, 2] - sums[:, 1])) / 2.0)
    if relative:
        diam = float(np.max(D))
        return best / diam if diam > 0 else 0.0
    return best


def distance_matrix(points: Sequence[H3Point]) -> np.ndarray:
    x = np.array([p.horizontal for p in points])
    t = np.array([p.height for p in points])
    return h3_distance_arrays(x[:, None], t[:, None], x[None, :], t[None, :])
