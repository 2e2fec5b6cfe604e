"""Rational quadratic differentials q(z) dz^2 on planar charts.

Covers evaluation, zeros and poles, the correction term
beta = q''/(2q) - (5/8)(q'/q)^2 and phi_hat = q - beta, segment
holonomy by quadrature of sqrt(q), flat distances to the zero set,
ray tracing in natural coordinates and the related bound checks.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial

from ..integrate import dopri

CHARTS = ("plane", "disk", "annulus", "halfplane")


class DegenerateDifferentialError(ValueError):
    pass


class SingularSegmentError(ValueError):
    pass


class PoleOrderError(ValueError):
    pass


def _poly(coeffs) -> Polynomial:
    c = np.asarray(coeffs, dtype=complex)
    if c.size == 0:
        c = np.zeros(1, complex)
    return Polynomial(c)


def _trim(p: Polynomial) -> Polynomial:
    c = p.coef
    nz = np.nonzero(np.abs(c) > 0)[0]
    if nz.size == 0:
        return Polynomial([0j])
    return Polynomial(c[: nz[-1] + 1])


def _cluster_roots(p: Polynomial, tol: float = 1e-5) -> list[tuple[complex, int]]:
    """Roots with multiplicities, merging the spray produced by multiple roots."""
    p = _trim(p)
    if p.degree() < 1:
        return []
    roots = list(p.roots())
    out: list[tuple[complex, int]] = []
    used = [False] * len(roots)
    for i, r in enumerate(roots):
        if used[i]:
            continue
        group = [r]
        used[i] = True
        for j in range(i + 1, len(roots)):
            if not used[j] and abs(roots[j] - r) < tol * max(1.0, abs(r)):
                group.append(roots[j])
                used[j] = True
        out.append((complex(np.mean(group)), len(group)))
    # polish simple roots by Newton
    dp = p.deriv()
    polished = []
    for r, k in out:
        if k == 1:
            for _ in range(5):
                d = dp(r)
                if d == 0:
                    break
                r = r - p(r) / d
        polished.append((complex(r), k))
    return polished


@dataclass(frozen=True)
class PlanarDifferential:
    """q(z) = scale * num(z) / den(z), coefficients in ascending powers.

    With validate=True (the default for user input) poles of order
    greater than two are rejected.
    """
    num: tuple
    den: tuple = (1.0,)
    chart: str = "plane"
    scale: complex = 1.0
    radius: float | None = None
    validate: bool = field(default=True, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "num", tuple(complex(c) for c in self.num))
        object.__setattr__(self, "den", tuple(complex(c) for c in self.den))
        object.__setattr__(self, "scale", complex(self.scale))
        if self.chart not in CHARTS:
            raise ValueError(f"unknown chart {self.chart!r}")
        if np.all(np.abs(self.num) == 0) or self.scale == 0:
            raise DegenerateDifferentialError("q is identically zero")
        if np.all(np.abs(self.den) == 0):
            raise ValueError("zero denominator")
        if self.validate:
            for p, k in self.poles:
                if k > 2:
                    raise PoleOrderError(f"pole of order {k} at {p}")

    # construction helpers
    @classmethod
    def polynomial(cls, coeffs, **kw) -> "PlanarDifferential":
        return cls(tuple(coeffs), **kw)

    @classmethod
    def constant(cls, t: complex, **kw) -> "PlanarDifferential":
        return cls((complex(t),), **kw)

    @classmethod
    def from_json(cls, text_or_dict) -> "PlanarDifferential":
        d = json.loads(text_or_dict) if isinstance(text_or_dict, str) else dict(text_or_dict)
        q = d.get("q")
        if not isinstance(q, dict) or "num" not in q:
            raise ValueError("field 'q' must contain 'num'")
        num = [complex(*c) if isinstance(c, (list, tuple)) else complex(c) for c in q["num"]]
        den = [complex(*c) if isinstance(c, (list, tuple)) else complex(c) for c in q.get("den", [[1, 0]])]
        sc = d.get("scale", [1, 0])
        scale = complex(*sc) if isinstance(sc, (list, tuple)) else complex(sc)
        return cls(tuple(num), tuple(den), chart=d.get("chart", "plane"), scale=scale,
                   radius=d.get("radius"))

    def to_json(self) -> str:
        enc = lambda cs: [[c.real, c.imag] for c in cs]
        d = {"chart": self.chart, "q": {"num": enc(self.num), "den": enc(self.den)},
             "scale": [self.scale.real, self.scale.imag]}
        if self.radius is not None:
            d["radius"] = self.radius
        return json.dumps(d)

    # polynomial data
    @cached_property
    def _N(self) -> Polynomial:
        return _trim(_poly(self.num) * self.scale)

    @cached_property
    def _D(self) -> Polynomial:
        return _trim(_poly(self.den))

    @cached_property
    def _derivative_numerators(self) -> list[Polynomial]:
        # q^(k) = n_k / D^(k+1), n_{k+1} = n_k' D - (k+1) n_k D'
        N, D = self._N, self._D
        out = [N]
        for k in range(5):
            n = out[-1]
            out.append(n.deriv() * D - (k + 1) * n * D.deriv())
        return out

    @property
    def is_polynomial(self) -> bool:
        return self._D.degree() == 0

    @cached_property
    def zeros(self) -> list[tuple[complex, int]]:
        return _cluster_roots(self._N)

    @cached_property
    def poles(self) -> list[tuple[complex, int]]:
        return _cluster_roots(self._D)

    @cached_property
    def singular_points(self) -> np.ndarray:
        pts = [z for z, _ in self.zeros] + [p for p, _ in self.poles]
        return np.array(pts, dtype=complex)

    def distance_to_singular(self, z) -> np.ndarray:
        z = np.asarray(z, complex)
        S = self.singular_points
        if S.size == 0:
            return np.full(z.shape, np.inf)
        return np.min(np.abs(z[..., None] - S), axis=-1)

    # evaluation
    def __call__(self, z):
        return self.derivative(z, 0)

    @cached_property
    def _horner(self) -> tuple[list, list]:
        nums = [[complex(c) for c in n.coef[::-1]] for n in self._derivative_numerators]
        return nums, [complex(c) for c in self._D.coef[::-1]]

    def derivative(self, z, k: int = 1):
        if isinstance(z, (complex, float, int)):
            # scalar fast path for ODE right-hand sides
            nums, den = self._horner
            n = d = 0j
            for c in nums[k]:
                n = n * z + c
            for c in den:
                d = d * z + c
            return n / d ** (k + 1)
        z = np.asarray(z, dtype=complex)
        D = self._D(z)
        return self._derivative_numerators[k](z) / D ** (k + 1)

    def jet(self, z, order: int = 2):
        return [self.derivative(z, k) for k in range(order + 1)]

    def scaled(self, c: complex) -> "PlanarDifferential":
        return PlanarDifferential(self.num, self.den, self.chart, self.scale * c, self.radius,
                                  validate=False)

    # beta and phi_hat
    def beta_value(self, z):
        q, q1, q2 = self.jet(z, 2)
        L = q1 / q
        return q2 / (2 * q) - 0.625 * L * L

    def beta_derivative(self, z):
        q, q1, q2, q3 = self.jet(z, 3)
        L = q1 / q
        return q3 / (2 * q) - q2 * q1 / (2 * q * q) - 1.25 * L * (q2 / q - L * L)

    def phi_hat_value(self, z):
        return self(z) - self.beta_value(z)

    def phi_hat_derivative(self, z):
        return self.derivative(z, 1) - self.beta_derivative(z)

    def epsilon(self, z):
        """The relative correction |beta / q|."""
        return np.abs(self.beta_value(z) / self(z))

    def epsilon_gradient(self, z):
        """Norm of the |q|^(1/2)-gradient of |beta/q|."""
        q, q1 = self(z), self.derivative(z, 1)
        b, b1 = self.beta_value(z), self.beta_derivative(z)
        g1 = b1 / q - b * q1 / (q * q)
        return np.abs(g1) / np.sqrt(np.abs(q))


def beta(diff: PlanarDifferential) -> PlanarDifferential:
    """beta as a rational differential (numerator and denominator not reduced)."""
    N, D = diff._N, diff._D
    P = N.deriv() * D - N * D.deriv()
    Q = N * D
    num = 4 * (P.deriv() * Q - P * Q.deriv()) - P * P
    den = 8 * Q * Q
    if np.all(np.abs(num.coef) < 1e-300):
        num = Polynomial([0j])
    return _RationalValue(tuple(num.coef), tuple(den.coef), diff.chart)


def phi_hat(diff: PlanarDifferential) -> PlanarDifferential:
    b = beta(diff)
    N, D = diff._N, diff._D
    bn, bd = _poly(b.num), _poly(b.den)
    num = N * bd - D * bn
    den = D * bd
    return PlanarDifferential(tuple(num.coef), tuple(den.coef), diff.chart, validate=False)


class _RationalValue(PlanarDifferential):
    """Rational differential that may vanish identically (used for beta)."""

    def __init__(self, num, den, chart="plane"):
        object.__setattr__(self, "num", tuple(complex(c) for c in num))
        object.__setattr__(self, "den", tuple(complex(c) for c in den))
        object.__setattr__(self, "chart", chart)
        object.__setattr__(self, "scale", 1 + 0j)
        object.__setattr__(self, "radius", None)
        object.__setattr__(self, "validate", False)

    def is_zero(self) -> bool:
        return bool(np.all(np.abs(self.num) < 1e-14 * max(1.0, np.max(np.abs(self.den)))))


# --- exact algebra -----------------------------------------------------------

def beta_exact(num, den=(1,)):
    """beta as a simplified sympy expression in z (coefficients made rational)."""
    import sympy as sp
    z = sp.Symbol("z")
    q = _sym_poly(num, z) / _sym_poly(den, z)
    b = sp.diff(q, z, 2) / (2 * q) - sp.Rational(5, 8) * (sp.diff(q, z) / q) ** 2
    return sp.cancel(sp.together(b)), z


def phi_hat_exact(num, den=(1,)):
    import sympy as sp
    b, z = beta_exact(num, den)
    q = _sym_poly(num, z) / _sym_poly(den, z)
    return sp.cancel(sp.together(q - b)), z


def beta_double_pole_coefficients(num) -> list[tuple]:
    """For polynomial q: (zero, order, coefficient of (z-a)^-2 in beta), exact."""
    import sympy as sp
    b, z = beta_exact(num)
    q = _sym_poly(num, z)
    out = []
    for a, k in sp.roots(sp.Poly(q, z)).items():
        coeff = sp.simplify(sp.limit(b * (z - a) ** 2, z, a))
        out.append((a, int(k), coeff))
    return out


def _sym_poly(coeffs, z):
    import sympy as sp
    terms = 0
    for k, c in enumerate(coeffs):
        c = complex(c) if not isinstance(c, sp.Basic) else c
        if isinstance(c, complex):
            c = sp.nsimplify(c.real) + sp.I * sp.nsimplify(c.imag)
        terms += c * z ** k
    return terms


# --- holonomy by quadrature ---------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _grade_from(diff, a, b, frac):
    L = abs(b - a)
    S = diff.singular_points
    pts = [0.0]
    s = 0.0
    a_sing = S.size and np.min(np.abs(S - a)) < 1e-14 * max(1.0, L)
    b_sing = S.size and np.min(np.abs(S - b)) < 1e-14 * max(1.0, L)
    if a_sing:
        s = 1e-15
        pts = [0.0, s]
    while s < 1.0:
        z = a + s * (b - a)
        dist = float(diff.distance_to_singular(z)) if S.size else np.inf
        step = min(1.0 - s, max(frac * dist / L, 1e-16))
        if b_sing and s + step > 1.0 - 1e-15 and step < 1.0 - s:
            pass
        s_new = min(1.0, s + step)
        if b_sing and s_new >= 1.0 - 1e-15:
            pts.append(1.0)
            break
        s = s_new
        pts.append(s)
        if len(pts) > 200000:
            raise SingularSegmentError("too many quadrature panels")
    return np.array(pts)


def _integrate_sqrt(diff: PlanarDifferential, a: complex, b: complex, w_start=None,
                    margin: float | None = None, allow_endpoint_zeros: bool = False):
    """Integral of sqrt(q) along [a, b] with the branch continued from w_start.

    Returns (integral, branch of sqrt(q) at b, branch at a).
    """
    a, b = complex(a), complex(b)
    L = abs(b - a)
    if L == 0:
        w = cmath.sqrt(complex(diff(a))) if w_start is None else w_start
        return 0j, w, w
    if margin is None:
        margin = max(1e-6 * L, 1e-300)
    S = diff.singular_points
    if S.size:
        t = np.clip(((S - a) * np.conj(b - a)).real / L ** 2, 0.0, 1.0)
        dist = np.abs(a + t * (b - a) - S)
        at_end = (np.abs(S - a) < margin) | (np.abs(S - b) < margin) | (t <= 0) | (t >= 1)
        interior = ~at_end
        if np.any(interior & (dist < margin)):
            raise SingularSegmentError("segment passes within margin of a singular point")
        if not allow_endpoint_zeros and np.any(at_end & (dist < margin)):
            raise SingularSegmentError("segment endpoint within margin of a singular point")
        pole_pts = np.array([p for p, _ in diff.poles], complex)
        if pole_pts.size and np.min(np.abs(np.concatenate([pole_pts - a, pole_pts - b]))) < margin:
            raise SingularSegmentError("segment endpoint at a pole")
    br = _grade_from(diff, a, b, 0.25)
    lo, hi = br[:-1], br[1:]
    half = (hi - lo) / 2
    mid = (hi + lo) / 2
    s = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    wts = (half[:, None] * _GL_W[None, :]).ravel()
    z = a + s * (b - a)
    w = np.sqrt(diff(z).astype(complex))
    # continuous branch along the nodes
    rel = np.ones(w.size)
    prod = (w[1:] * np.conj(w[:-1])).real
    rel[1:] = np.where(prod < 0, -1.0, 1.0)
    sign = np.cumprod(rel)
    w = w * sign
    w_a = cmath.sqrt(complex(diff(a)))
    w_b = cmath.sqrt(complex(diff(b)))
    # align the start with the requested branch (or with the first node)
    ref = w_start if w_start is not None else (w_a if abs(w_a) > 0 else w[0])
    if (w[0] * np.conj(ref)).real < 0:
        w = -w
    if abs(w_a) > 0 and (w_a * np.conj(w[0])).real < 0:
        w_a = -w_a
    if abs(w_b) > 0 and (w_b * np.conj(w[-1])).real < 0:
        w_b = -w_b
    integral = complex(np.sum(wts * w) * (b - a))
    return integral, w_b, w_a


def normalize_sign(h: complex, tol: float = 0.0) -> complex:
    """Fix the sign ambiguity: nonnegative imaginary part, then nonnegative real part."""
    if h.imag < -tol * abs(h) or (abs(h.imag) <= tol * abs(h) and h.real < 0):
        return -h
    return h


def segment_holonomy(diff: PlanarDifferential, a: complex, b: complex,
                     margin: float | None = None, allow_endpoint_zeros: bool = False) -> complex:
    """Holonomy of the straight segment [a, b]: the integral of sqrt(q), sign normalized."""
    val, _, _ = _integrate_sqrt(diff, a, b, margin=margin, allow_endpoint_zeros=allow_endpoint_zeros)
    return normalize_sign(val, 1e-14)


def path_holonomy(diff: PlanarDifferential, waypoints: Sequence[complex],
                  margin: float | None = None, normalize: bool = False) -> complex:
    """Integral of sqrt(q) along a polyline, branch continued across vertices."""
    total = 0j
    w = None
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        val, w, _ = _integrate_sqrt(diff, a, b, w_start=w, margin=margin)
        total += val
    return normalize_sign(total, 1e-14) if normalize else total


def straight_length(diff: PlanarDifferential, a: complex, b: complex,
                    allow_endpoint_zeros: bool = True) -> float:
    """|q|^(1/2)-length of the straight segment [a, b]."""
    a, b = complex(a), complex(b)
    L = abs(b - a)
    if L == 0:
        return 0.0
    br = _grade_from(diff, a, b, 0.25)
    lo, hi = br[:-1], br[1:]
    half = (hi - lo) / 2
    mid = (hi + lo) / 2
    s = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    wts = (half[:, None] * _GL_W[None, :]).ravel()
    z = a + s * (b - a)
    return float(np.sum(wts * np.sqrt(np.abs(diff(z)))) * L)


# --- rays in natural coordinates ---------------------------------------------

@dataclass
class Ray:
    s: np.ndarray
    z: np.ndarray
    w: np.ndarray
    completed: bool
    extra: np.ndarray | None = None


def trace_ray(diff: PlanarDifferential, z0: complex, direction: complex, length: float,
              w0: complex | None = None, tol: float = 1e-12, record: bool = False,
              stop_distance: float = 0.0, rhs_extra=None, extra0=None) -> Ray:
    """Follow the straight line of the natural coordinate from z0.

    The natural coordinate zeta has d(zeta) = w dz, w^2 = q.  The ray
    moves zeta in the unit direction `direction` for `length` units:
    z' = direction / w and w' = q'(z) z' / (2 w).
    """
    u = complex(direction) / abs(direction)
    w0 = cmath.sqrt(complex(diff(z0))) if w0 is None else complex(w0)
    if w0 == 0:
        raise SingularSegmentError("ray starts at a zero")
    n_extra = 0 if extra0 is None else len(extra0)

    def f(s, y):
        zz, ww = y[0], y[1]
        dz = u / ww
        dw = complex(diff.derivative(zz, 1)) * dz / (2 * ww)
        out = np.empty_like(y)
        out[0] = dz
        out[1] = dw
        if n_extra:
            out[2:] = rhs_extra(s, zz, ww, dz, y[2:])
        return out

    y0 = np.concatenate([[z0, w0], np.asarray(extra0 if extra0 is not None else [], complex)])

    def event(s, y):
        return stop_distance > 0 and float(diff.distance_to_singular(y[0])) < stop_distance

    traj = dopri(f, y0, 0.0, length, tol=tol, record=record, event=event if stop_distance > 0 else None)
    s, Y = traj.arrays()
    done = bool(abs(s[-1] - length) <= 1e-12 * max(1.0, length))
    return Ray(s, Y[:, 0], Y[:, 1], done, Y[:, 2:] if n_extra else None)


@dataclass(frozen=True)
class ZeroDistance:
    distance: float
    zero: complex
    certified: bool


def distance_to_zero(diff: PlanarDifferential, z: complex, zero: complex, certify: bool = True) -> ZeroDistance:
    """Flat distance from z to a given zero.

    The straight segment fixes a branch and a candidate geodesic direction
    in the natural coordinate; tracing that ray back to the zero certifies
    the value as a geodesic length.  Otherwise the straight segment's
    length is returned as an upper bound.
    """
    z = complex(z)
    hol, _, w_z = _integrate_sqrt(diff, z, zero, allow_endpoint_zeros=True)
    L = abs(hol)
    upper = straight_length(diff, z, zero)
    if L == 0:
        return ZeroDistance(0.0, zero, True)
    if not certify:
        return ZeroDistance(L, zero, False)
    frac = 1 - 1e-6
    try:
        ray = trace_ray(diff, z, hol, L * frac, w0=w_z, tol=1e-11)
        end = ray.z[-1]
        rest = straight_length(diff, end, zero)
        ok = ray.completed and rest <= 3e-6 * L + 1e-12
    except Exception:
        ok = False
    if ok:
        return ZeroDistance(L, zero, True)
    return ZeroDistance(upper, zero, False)


def distance_to_zero_set(diff: PlanarDifferential, z: complex, certify: bool = True) -> ZeroDistance:
    if not diff.zeros:
        return ZeroDistance(math.inf, complex("nan"), True)
    best = None
    for a, _ in diff.zeros:
        try:
            r = distance_to_zero(diff, z, a, certify)
        except SingularSegmentError:
            # the straight segment runs through another zero, which is closer
            continue
        if best is None or r.distance < best.distance:
            best = r
    if best is None:
        # z sits on a zero to within the margin
        a = min(diff.zeros, key=lambda zk: abs(zk[0] - z))[0]
        return ZeroDistance(0.0, a, False)
    return best


def point_at_standoff(diff: PlanarDifferential, u: complex, d: float, iters: int = 40) -> complex:
    """Point s*u (s > 0) whose flat distance to the zero set is d, by bisection in s.

    Assumes the distance grows along the ray, as it does outside the
    convex hull of the zeros.  Bisection uses straight-segment values;
    the result is certified once at the end.
    """
    u = complex(u)
    dist = lambda s: distance_to_zero_set(diff, s * u, certify=False).distance
    lo, hi = 0.0, 1.0
    while dist(hi) < d:
        hi *= 2
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if dist(mid) < d:
            lo = mid
        else:
            hi = mid
    r = distance_to_zero_set(diff, hi * u)
    if not r.certified or abs(r.distance - d) > 1e-8 * d:
        raise ValueError("standoff point could not be certified along this ray")
    return hi * u


def point_at_distance(diff: PlanarDifferential, direction_point: complex, d: float,
                      zero: complex | None = None) -> complex:
    """Point at flat distance d from a zero along the ray through direction_point.

    Solves |integral from zero to z of sqrt(q)| = d on the ray through
    the zero by bisection in Euclidean radius.
    """
    if zero is None:
        zero = min(diff.zeros, key=lambda zk: abs(zk[0] - direction_point))[0]
    u = (direction_point - zero) / abs(direction_point - zero)
    lo, hi = 0.0, 1.0
    while abs(segment_holonomy(diff, zero, zero + hi * u, allow_endpoint_zeros=True)) < d:
        hi *= 2
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if abs(segment_holonomy(diff, zero, zero + mid * u, allow_endpoint_zeros=True)) < d:
            lo = mid
        else:
            hi = mid
    return zero + 0.5 * (lo + hi) * u


# --- bound checks ---------------------------------------------------------------

@dataclass
class EpsilonEntry:
    z: complex
    epsilon: float
    gradient: float
    d: float
    certified: bool
    eps_bound: float
    grad_bound: float
    eps_ok: bool
    grad_ok: bool
    excluded: bool = False


def epsilon_bound_check(diff: PlanarDifferential, points: Sequence[complex]) -> list[EpsilonEntry]:
    """|beta/q| <= 6/d^2 and its gradient <= 48/d^3 at each sample point."""
    out = []
    for z in points:
        z = complex(z)
        if abs(complex(diff(z))) == 0 or float(diff.distance_to_singular(z)) < 1e-12:
            out.append(EpsilonEntry(z, math.nan, math.nan, 0.0, False, math.nan, math.nan,
                                    False, False, excluded=True))
            continue
        eps = float(diff.epsilon(z))
        grad = float(diff.epsilon_gradient(z))
        dz = distance_to_zero_set(diff, z)
        d = dz.distance
        eb = 6.0 / d ** 2 if d > 0 else math.inf
        gb = 48.0 / d ** 3 if d > 0 else math.inf
        out.append(EpsilonEntry(z, eps, grad, d, dz.certified, eb, gb, eps <= eb, grad <= gb))
    return out


# --- Schwarzian of metrics -------------------------------------------------------

def metric_schwarzian(eta, z: complex, h: float = 1e-3) -> complex:
    """(eta_zz - eta_z^2) at z for a real log-density eta(z), by finite differences."""
    ez, ezz = _wirtinger(eta, z, h)
    return ezz - ez * ez


def _wirtinger(eta, z, h):
    # d/dz = (d/dx - i d/dy)/2 ; d2/dz2 = (f_xx - f_yy - 2i f_xy)/4
    f = lambda dx, dy: eta(z + dx + 1j * dy)
    fx = (f(h, 0) - f(-h, 0)) / (2 * h)
    fy = (f(0, h) - f(0, -h)) / (2 * h)
    fxx = (f(h, 0) - 2 * f(0, 0) + f(-h, 0)) / h ** 2
    fyy = (f(0, h) - 2 * f(0, 0) + f(0, -h)) / h ** 2
    fxy = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h * h)
    return (fx - 1j * fy) / 2, (fxx - fyy - 2j * fxy) / 4


def gaussian_curvature(eta, z: complex, h: float = 1e-3) -> float:
    """K = -4 e^(-2 eta) eta_{z zbar} = -e^(-2 eta) Laplacian(eta)."""
    f = lambda dx, dy: eta(z + dx + 1j * dy)
    lap = (f(h, 0) + f(-h, 0) + f(0, h) + f(0, -h) - 4 * f(0, 0)) / h ** 2
    return float(-math.exp(-2 * eta(z)) * lap)


def dbar_schwarzian_check(eta1, eta2, z: complex, h: float = 1e-2) -> tuple[complex, complex]:
    """Compare dbar B(s1, s2) with (K1_z s1^2 - K2_z s2^2)/4 at z.

    Returns (finite-difference value, closed form).  Nested central
    differences with Richardson extrapolation keep the error small.
    """
    def B(w, hh):
        return metric_schwarzian(eta2, w, hh) - metric_schwarzian(eta1, w, hh)

    def dbar(F, hh):
        fx = (F(z + hh) - F(z - hh)) / (2 * hh)
        fy = (F(z + 1j * hh) - F(z - 1j * hh)) / (2 * hh)
        return (fx + 1j * fy) / 2

    def dz_real(G, hh):
        fx = (G(z + hh) - G(z - hh)) / (2 * hh)
        fy = (G(z + 1j * hh) - G(z - 1j * hh)) / (2 * hh)
        return (fx - 1j * fy) / 2

    def fd(hh):
        inner = hh / 4
        lhs = dbar(lambda w: B(w, inner), hh)
        K1 = lambda w: gaussian_curvature(eta1, w, inner)
        K2 = lambda w: gaussian_curvature(eta2, w, inner)
        rhs = (dz_real(K1, hh) * math.exp(2 * eta1(z)) - dz_real(K2, hh) * math.exp(2 * eta2(z))) / 4
        return lhs, rhs

    l1, r1 = fd(h)
    l2, r2 = fd(h / 2)
    return (4 * l2 - l1) / 3, (4 * r2 - r1) / 3


# --- comparing two differentials --------------------------------------------------

@dataclass
class SegmentComparison:
    zeta: tuple[complex, complex]      # endpoints in the phi natural coordinate
    z: tuple[complex, complex]
    length: float
    width: float
    height: float
    length_psi: float
    width_psi: float
    height_psi: float
    holonomy_gap: float                # |w_J - z_J|
    standoff: float                    # d_phi(J, boundary of U)
    standoff_psi_segment: float        # d_phi(J', boundary of U)
    psi_segment_found: bool
    hypothesis: bool
    checks: dict = field(default_factory=dict)
    note: str = ""

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


@dataclass
class ComparisonReport:
    center: complex
    radius: float
    delta: float                      # certified bound on sup |psi/phi - 1| over U
    delta_sampled: float              # largest sampled value
    lemma_delta_applies: bool         # delta < 1/2
    hypothesis: bool                  # delta < 1/4
    segments: list
    failures: list

    @property
    def passed(self) -> bool:
        return not self.failures


def _disk_nodes(phi, zc, rho, n_ang, n_rad, w_c):
    """Polar grid of the phi-disk of radius rho around zc: (zeta, z, w) arrays."""
    zetas, zs, ws = [0j], [complex(zc)], [w_c]
    dr = rho / n_rad
    for j in range(n_ang):
        u = cmath.exp(2j * math.pi * j / n_ang)
        z, w = complex(zc), w_c
        for k in range(1, n_rad + 1):
            ray = trace_ray(phi, z, u, dr, w0=w, tol=1e-11)
            z, w = complex(ray.z[-1]), complex(ray.w[-1])
            zetas.append(k * dr * u)
            zs.append(z)
            ws.append(w)
    return np.array(zetas), np.array(zs), np.array(ws)


def _map_from_center(phi, zc, w_c, zeta):
    if zeta == 0:
        return complex(zc), w_c
    ray = trace_ray(phi, zc, zeta, abs(zeta), w0=w_c, tol=1e-12)
    return complex(ray.z[-1]), complex(ray.w[-1])


def compare_differentials(phi: PlanarDifferential, psi: PlanarDifferential, center: complex,
                          radius: float, n_segments: int = 12, seed: int = 0,
                          n_ang: int = 48, n_rad: int = 16,
                          segments: Sequence[tuple[complex, complex]] | None = None) -> ComparisonReport:
    """Compare phi- and psi-geodesics on the phi-disk U of the given radius.

    delta is bounded over U from a polar grid in the phi natural
    coordinate plus a Lipschitz bound of psi/phi - 1.  Segments are given
    by endpoints in the natural coordinate centered at `center`, or drawn
    at random.  Violated hypotheses are reported, never raised.
    """
    zc = complex(center)
    failures = []
    d0 = distance_to_zero_set(phi, zc).distance if phi.zeros else math.inf
    if radius >= d0:
        failures.append(f"radius {radius:.6g} reaches a zero of phi at distance {d0:.6g}")
    w_c = cmath.sqrt(complex(phi(zc)))
    zetas, zs, ws = _disk_nodes(phi, zc, radius, n_ang, n_rad, w_c)
    P = np.array([complex(psi(z)) for z in zs])
    dP = np.array([complex(psi.derivative(z, 1)) for z in zs])
    Q = np.array([complex(phi(z)) for z in zs])
    dQ = np.array([complex(phi.derivative(z, 1)) for z in zs])
    F = P / Q - 1
    dF = (dP * Q - P * dQ) / Q ** 2 / ws          # derivative in the natural coordinate
    sampled = float(np.max(np.abs(F)))
    lip1 = float(np.max(np.abs(dF)))
    # variation of the derivative between neighbouring nodes
    idx = np.arange(1, len(zetas)).reshape(n_ang, n_rad)
    pairs = [(0, idx[j, 0]) for j in range(n_ang)]
    pairs += [(idx[j, k], idx[j, k + 1]) for j in range(n_ang) for k in range(n_rad - 1)]
    pairs += [(idx[j, k], idx[(j + 1) % n_ang, k]) for j in range(n_ang) for k in range(n_rad)]
    a, b = np.array(pairs).T
    lip2 = float(np.max(np.abs(dF[a] - dF[b]) / np.abs(zetas[a] - zetas[b])))
    cover = 0.5 * math.hypot(radius / n_rad, radius * 2 * math.pi / n_ang)
    delta = sampled + cover * (lip1 + cover * lip2)
    if not np.isfinite(delta):
        delta = math.inf
    lemma_ok = delta < 0.5
    hyp = delta < 0.25
    if not lemma_ok:
        failures.append(f"delta bound {delta:.4g} is not below 1/2")
    elif not hyp:
        failures.append(f"delta bound {delta:.4g} is not below 1/4: comparison hypothesis fails")

    rng = np.random.default_rng(seed)
    if segments is None:
        segments = []
        for _ in range(n_segments):
            c = 0.6 * radius * math.sqrt(rng.uniform()) * cmath.exp(2j * math.pi * rng.uniform())
            L = radius * rng.uniform(0.05, 0.6)
            u = cmath.exp(2j * math.pi * rng.uniform())
            za, zb = c - 0.5 * L * u, c + 0.5 * L * u
            m = max(abs(za), abs(zb))
            if m >= 0.95 * radius:
                za, zb = za * 0.95 * radius / m, zb * 0.95 * radius / m
            segments.append((za, zb))

    out = []
    for za_, zb_ in segments:
        out.append(_compare_segment(phi, psi, zc, w_c, radius, complex(za_), complex(zb_), delta, lemma_ok, hyp))
    for e in out:
        if e.hypothesis and not e.passed:
            failures.append(f"segment {e.zeta}: failed {[k for k, v in e.checks.items() if not v]}")
    return ComparisonReport(zc, radius, float(delta), sampled, lemma_ok, hyp, out, failures)


def _compare_segment(phi, psi, zc, w_c, rho, za, zb, delta, lemma_ok, hyp) -> SegmentComparison:
    dz = zb - za
    L = abs(dz)
    standoff = rho - max(abs(za), abs(zb))
    z_a, w_a = _map_from_center(phi, zc, w_c, za)
    v_a = cmath.sqrt(complex(psi(z_a)))
    if (v_a / w_a).real < 0:
        v_a = -v_a

    def along_phi(s, z, w, dzs, ex):
        v = ex[0]
        return np.array([complex(psi.derivative(z, 1)) * dzs / (2 * v), v * dzs])

    ray = trace_ray(phi, z_a, dz, L, w0=w_a, tol=1e-12, extra0=[v_a, 0j], rhs_extra=along_phi)
    z_b = complex(ray.z[-1])
    H = complex(ray.extra[-1, 1])
    Lp = abs(H)

    def along_psi(s, z, v, dzs, ex):
        W = ex[0]
        return np.array([complex(phi.derivative(z, 1)) * dzs / (2 * W), W * dzs])

    found = False
    standoff2 = -math.inf
    note = ""
    try:
        r2 = trace_ray(psi, z_a, H, Lp, w0=v_a, tol=1e-12, record=True,
                       extra0=[w_a, 0j], rhs_extra=along_psi)
        zeta_path = za + r2.extra[:, 1]
        standoff2 = rho - float(np.max(np.abs(zeta_path)))
        miss = abs(complex(r2.z[-1]) - z_b)
        found = r2.completed and miss < 1e-7 * (1 + abs(z_b)) and standoff2 > 0
        if not found:
            note = f"psi ray missed the endpoint by {miss:.3g}"
    except (SingularSegmentError, RuntimeError) as exc:
        note = f"psi ray failed: {exc}"
    hyp_seg = hyp and standoff > 4 * delta * L
    slack = delta * L + 1e-10 * L      # delta is any number above the sup; allow roundoff
    checks = {}
    if lemma_ok:
        checks["holonomy_gap"] = abs(H - dz) < slack
    if hyp_seg:
        checks["distance_ratio"] = L > 0.8 * Lp
        checks["psi_segment"] = found
        checks["standoff_phi"] = standoff2 > 0.25 * standoff
        checks["standoff_psi"] = (1 - delta) * standoff2 > 0.25 * standoff
        checks["length_width_height"] = max(abs(Lp - L), abs(abs(H.real) - abs(dz.real)),
                                            abs(abs(H.imag) - abs(dz.imag))) < slack
    elif hyp:
        note = (note + "; " if note else "") + "standoff hypothesis fails"
    return SegmentComparison((za, zb), (z_a, z_b), L, abs(dz.real), abs(dz.imag), Lp, abs(H.real),
                             abs(H.imag), abs(H - dz), standoff, standoff2, found, hyp_seg, checks, note)
