"""Developing maps and holonomy of projective structures.

A projective structure with Schwarzian q on a planar domain is developed
by transporting a fundamental system of u'' + (q/2) u = 0.  The state is
Y = [[u1, u1'], [u2, u2']] with Y' = Y N(z) z', N = [[0, -q/2], [1, 0]],
so det Y (the Wronskian) is constant and the developing map is
f = u1 / u2 with f' = -1 / u2^2 and f''/f' = -2 u2' / u2.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .hyp3 import MoebiusMatrix, product
from .integrate import dopri


class SingularPathError(ValueError):
    """The path comes closer than the margin to a zero or pole."""


class NotEquivariantError(ValueError):
    """The differential is not invariant under the given element."""


TOL_RANGE = (1e-14, 1e-4)


def _check_tol(tol):
    if not TOL_RANGE[0] <= tol <= TOL_RANGE[1]:
        raise ValueError(f"tolerance {tol} outside [{TOL_RANGE[0]}, {TOL_RANGE[1]}]")


@dataclass(frozen=True)
class DevelopingJet:
    base: complex
    Y: np.ndarray
    wronskian_drift: float = 0.0

    @classmethod
    def from_values(cls, base: complex, f: complex = 0.0, fprime: complex = 1.0,
                    ratio: complex = 0.0) -> "DevelopingJet":
        """Jet with f(base) = f, f'(base) = fprime and f''/f' = ratio."""
        if fprime == 0:
            raise ValueError("fprime must be nonzero")
        u2 = cmath.sqrt(-1 / complex(fprime))
        du2 = -ratio * u2 / 2
        u1 = f * u2
        du1 = (fprime * u2 * u2 + u1 * du2) / u2
        return cls(complex(base), np.array([[u1, du1], [u2, du2]], dtype=complex))

    @property
    def u(self) -> tuple[complex, complex]:
        return complex(self.Y[0, 0]), complex(self.Y[1, 0])

    @property
    def wronskian(self) -> complex:
        return complex(np.linalg.det(self.Y))

    @property
    def f(self) -> complex:
        u1, u2 = self.u
        return math.inf if u2 == 0 else u1 / u2

    @property
    def fprime(self) -> complex:
        u2 = self.Y[1, 0]
        return math.inf if u2 == 0 else complex(-self.wronskian / u2 ** 2)

    @property
    def log_derivative_ratio(self) -> complex:
        return complex(-2 * self.Y[1, 1] / self.Y[1, 0])

    @property
    def fundamental(self) -> MoebiusMatrix:
        return MoebiusMatrix.from_array(self.Y, normalize=False)


@dataclass(frozen=True)
class Loop:
    waypoints: tuple
    closed: bool = True

    def __post_init__(self):
        pts = tuple(complex(w) for w in self.waypoints)
        if self.closed and pts[0] != pts[-1]:
            pts = pts + (pts[0],)
        object.__setattr__(self, "waypoints", pts)

    @property
    def base(self) -> complex:
        return self.waypoints[0]

    def inverse(self) -> "Loop":
        return Loop(tuple(reversed(self.waypoints)), self.closed)

    def __mul__(self, other: "Loop") -> "Loop":
        """Concatenation: self first, then other."""
        return Loop(self.waypoints + other.waypoints[1:], self.closed and other.closed)

    @classmethod
    def from_json(cls, text_or_dict) -> "Loop":
        d = json.loads(text_or_dict) if isinstance(text_or_dict, str) else dict(text_or_dict)
        base = complex(*d["base"])
        pts = [complex(*p) for p in d["waypoints"]]
        if not pts or pts[0] != base:
            pts = [base] + pts
        return cls(tuple(pts), bool(d.get("closed", True)))

    def to_json(self) -> str:
        return json.dumps({"base": [self.base.real, self.base.imag],
                           "waypoints": [[w.real, w.imag] for w in self.waypoints],
                           "closed": self.closed})

    @classmethod
    def circle(cls, center: complex, radius: float, n: int = 64, start_angle: float = 0.0) -> "Loop":
        pts = [center + radius * cmath.exp(1j * (start_angle + 2 * math.pi * k / n)) for k in range(n)]
        return cls(tuple(pts), True)


def _singular_points(diff) -> np.ndarray:
    pts = getattr(diff, "singular_points", None)
    if pts is None:
        return np.zeros(0, complex)
    return np.asarray(pts, dtype=complex)


def _segment_distance(a: complex, b: complex, p: complex) -> float:
    d = b - a
    if d == 0:
        return abs(p - a)
    t = max(0.0, min(1.0, ((p - a) * d.conjugate()).real / abs(d) ** 2))
    return abs(a + t * d - p)


def refine_path(diff, waypoints: Sequence[complex], margin: float, n_arc: int = 16) -> list[complex]:
    """Replace segments passing within margin of a singular point by a detour.

    The detour follows a circle of radius 2*margin around the point,
    passing on the left of the segment's direction.
    """
    sing = _singular_points(diff)
    pts = [complex(waypoints[0])]
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        a, b = complex(a), complex(b)
        close = [p for p in sing if _segment_distance(a, b, p) < margin]
        if not close:
            pts.append(b)
            continue
        p = min(close, key=lambda s: abs(s - a))
        r = 2 * margin
        d = (b - a) / abs(b - a)
        t_p = ((p - a) * d.conjugate()).real
        enter, leave = a + (t_p - r) * d, a + (t_p + r) * d
        if t_p - r > 0:
            pts.append(enter)
        th0 = cmath.phase(enter - p)
        for k in range(1, n_arc):
            pts.append(p + r * cmath.exp(1j * (th0 - math.pi * k / n_arc)))
        pts.append(leave)
        if abs(b - leave) > 0 and t_p + r < abs(b - a):
            pts.append(b)
    return pts


def _check_margin(diff, waypoints, margin):
    sing = _singular_points(diff)
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        for p in sing:
            if _segment_distance(complex(a), complex(b), p) < margin:
                raise SingularPathError(f"segment {a} -> {b} passes within {margin} of {p}")


def _q_of(diff) -> Callable[[complex], complex]:
    return diff if callable(diff) else (lambda z: complex(diff))


def segment_transport(diff, a: complex, b: complex, tol: float = 1e-10) -> np.ndarray:
    """E with Y(b) = Y(a) E along the straight segment a -> b."""
    q = _q_of(diff)
    dz = complex(b) - complex(a)
    if dz == 0:
        return np.eye(2, dtype=complex)

    def rhs(s, y):
        z = a + s * dz
        hq = 0.5 * complex(q(z))
        # (E N)_{:,0} = E_{:,1}, (E N)_{:,1} = -q/2 E_{:,0}
        return np.array([y[1], -hq * y[0], y[3], -hq * y[2]]) * dz

    traj = dopri(rhs, np.array([1, 0, 0, 1], dtype=complex), 0.0, 1.0, tol=tol)
    return traj.final.reshape(2, 2)


def path_transport(diff, waypoints: Sequence[complex], tol: float = 1e-10,
                   margin: float = 1e-6) -> np.ndarray:
    _check_tol(tol)
    _check_margin(diff, waypoints, margin)
    E = np.eye(2, dtype=complex)
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        E = E @ segment_transport(diff, complex(a), complex(b), tol)
        m = np.max(np.abs(E))
        if m > 1e150:
            raise OverflowError("transport matrix overflow; use a shorter path")
    return E


def continue_jet(diff, path, tolerance: float = 1e-10, jet: DevelopingJet | None = None,
                 margin: float = 1e-6, auto_refine: bool = False) -> DevelopingJet:
    """Analytically continue the developing jet along a piecewise-linear path."""
    pts = list(path.waypoints) if isinstance(path, Loop) else [complex(p) for p in path]
    if auto_refine:
        pts = refine_path(diff, pts, margin)
    if jet is None:
        jet = DevelopingJet.from_values(pts[0])
    elif jet.base != pts[0]:
        raise ValueError("jet base point differs from path start")
    E = path_transport(diff, pts, tolerance, margin)
    Y = jet.Y @ E
    w0 = complex(np.linalg.det(jet.Y))
    drift = abs(complex(np.linalg.det(Y)) - w0) / max(1.0, float(np.max(np.abs(jet.Y) ** 2)) * float(np.max(np.abs(E))) ** 2)
    return DevelopingJet(pts[-1], Y, drift)


def monodromy(diff, loop, tolerance: float = 1e-10, jet: DevelopingJet | None = None,
              margin: float = 1e-6) -> MoebiusMatrix:
    """Holonomy of the developing map around a loop: f(after) = M . f(before)."""
    pts = list(loop.waypoints) if isinstance(loop, Loop) else [complex(p) for p in loop]
    if jet is None:
        jet = DevelopingJet.from_values(pts[0])
    E = path_transport(diff, pts, tolerance, margin)
    Y0 = jet.Y
    M = Y0 @ E @ np.linalg.inv(Y0)
    return MoebiusMatrix.from_array(M, normalize=False)


def translation_monodromy(diff, base: complex, c: complex, tolerance: float = 1e-10) -> MoebiusMatrix:
    """Monodromy of the cylinder loop z -> z + c for a c-periodic differential."""
    return monodromy(diff, [base, base + c], tolerance)


def schwarzian_residual(diff, path: Sequence[complex], checkpoints: Sequence[float],
                        tolerance: float = 1e-12, h: float = 1e-3) -> list[float]:
    """|S(f) - q| at points along the first path segment, by finite differences.

    S(f) = (f''/f')' - (1/2)(f''/f')^2 is rebuilt from jets continued to
    z - h, z and z + h along the path direction.
    """
    a, b = complex(path[0]), complex(path[1])
    u = (b - a) / abs(b - a)
    jet0 = DevelopingJet.from_values(a)
    out = []
    for s in checkpoints:
        z = a + s * (b - a)
        rs = []
        for off in (-h, 0.0, h):
            j = continue_jet(diff, [a, z + off * u], tolerance, jet0)
            rs.append(j.log_derivative_ratio)
        d1 = (rs[2] - rs[0]) / (2 * h * u)
        S = d1 - 0.5 * rs[1] ** 2
        out.append(abs(S - complex(_q_of(diff)(z))))
    return out


# --- half-plane construction ------------------------------------------------------

def _G(z: complex) -> np.ndarray:
    return np.array([[0, 1], [1, -z]], dtype=complex)


def osculating_matrix(Y: np.ndarray, z: complex) -> np.ndarray:
    """Moebius map agreeing with the developing map to second order at z.

    Normalized so that for the identity structure (f = z) it is -I.
    """
    return 1j * Y @ _G(z)


def check_invariance(diff, g: MoebiusMatrix, samples: Sequence[complex], tol: float = 1e-8) -> float:
    """max relative |q(gz) g'(z)^2 - q(z)| over samples; raises if above tol."""
    q = _q_of(diff)
    worst = 0.0
    for z in samples:
        den = g.c * z + g.d
        gz = (g.a * z + g.b) / den
        dg = (g.a * g.d - g.b * g.c) / den ** 2
        lhs = complex(q(gz)) * dg ** 2
        rhs = complex(q(z))
        err = abs(lhs - rhs) / max(1.0, abs(rhs))
        worst = max(worst, err)
    if worst > tol:
        raise NotEquivariantError(f"invariance defect {worst:.3e}")
    return worst


def darboux_holonomy(diff, g: MoebiusMatrix, z0: complex = 1j, tolerance: float = 1e-10,
                     margin: float = 1e-6) -> MoebiusMatrix:
    """rho(g) for the projective structure with Schwarzian q on the upper half-plane.

    The developing map starts with the jet of the identity at z0.  With
    A(z) the osculating Moebius map of the developing map at z,
    equivariance f o g = rho(g) o f gives rho(g) = A(g z0) g A(z0)^-1.
    For q = 0 this returns g.
    """
    z0 = complex(z0)
    if z0.imag <= 0:
        raise ValueError("base point must lie in the upper half-plane")
    ring = [z0 * (1 + 0.25 * cmath.exp(2j * math.pi * k / 7)) for k in range(7)]
    ring = [z for z in ring if z.imag > 0] + [z0]
    check_invariance(diff, g, ring)
    z1 = g.act(z0)
    if not (isinstance(z1, complex) and z1.imag > 0):
        raise ValueError("g does not preserve the upper half-plane at z0")
    jet0 = DevelopingJet.from_values(z0, z0, 1.0, 0.0)
    E = path_transport(diff, [z0, z1], tolerance, margin)
    Y1 = jet0.Y @ E
    A0 = osculating_matrix(jet0.Y, z0)
    A1 = osculating_matrix(Y1, z1)
    R = A1 @ g.as_array() @ np.linalg.inv(A0)
    return MoebiusMatrix.from_array(R, normalize=False)


def euler_trace(c: complex, lam: float) -> complex:
    """Trace of z -> lam z holonomy for q = c / z^2 (solutions z^r)."""
    s = cmath.sqrt(1 - 2 * c)
    return 2 * cmath.cosh(s * math.log(lam) / 2)


# --- representations -----------------------------------------------------------------

def _invert_letter(ch: str) -> str:
    return ch.lower() if ch.isupper() else ch.upper()


@dataclass
class Representation:
    """Generators are lowercase letters; the uppercase letter is the inverse."""

    generators: dict = field(default_factory=dict)

    def matrix(self, word: str) -> MoebiusMatrix:
        mats = []
        for ch in word:
            if ch in self.generators:
                mats.append(self.generators[ch])
            elif _invert_letter(ch) in self.generators:
                mats.append(self.generators[_invert_letter(ch)].inverse())
            else:
                raise KeyError(f"letter {ch!r} is not a generator")
        if not mats:
            return MoebiusMatrix.identity()
        return product(mats)

    def homomorphism_defect(self, words: Sequence[str]) -> float:
        """max over pairs of |rho(uv) -+ rho(u) rho(v)| in operator norm."""
        worst = 0.0
        for u in words:
            for v in words:
                a = self.matrix(u + v).as_array()
                b = (self.matrix(u) @ self.matrix(v)).as_array()
                scale = max(1.0, np.linalg.norm(b, 2))
                d = min(np.linalg.norm(a - b, 2), np.linalg.norm(a + b, 2)) / scale
                worst = max(worst, d)
        return worst

    def relator_defect(self, relators: Sequence[str]) -> float:
        worst = 0.0
        for r in relators:
            m = self.matrix(r).as_array()
            worst = max(worst, min(np.linalg.norm(m - np.eye(2), 2), np.linalg.norm(m + np.eye(2), 2)))
        return worst


def trace_coordinates(rep: Representation, words: Sequence[str]) -> np.ndarray:
    """log(|tr rho(w)| + 2) for each word."""
    if not words:
        return np.zeros(0)
    return np.array([math.log(abs(rep.matrix(w).trace()) + 2) for w in words])


def projectivize(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=float)
    m = float(np.max(np.abs(v))) if v.size else 0.0
    return v / m if m > 0 else v
