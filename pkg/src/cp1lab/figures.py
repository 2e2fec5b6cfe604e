"""Sample grids, foliation leaves and the two surface figures.

The ideal-triangle picture: on an annulus around the simple zero of
q = z, the Epstein-Schwarz image has three long fins (images of the
vertical prong rays) joined at three small corners (images of the
horizontal prong rays, which collapse).  The bubble picture: on a small
punctured disk around the zero the induced metric grows like
|z|^{-5/2}|dz|.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .develop import segment_transport
from .epstein import (
    EpsteinMesh, _Ginv, _frame, epstein_matrix, epstein_mesh, fd_first_form, flat_metric_jet,
    osculating_frame,
)
from .hyp3 import h3_distance
from .qdiff import PlanarDifferential, trace_ray


class GridSpecError(ValueError):
    pass


# --- grids ----------------------------------------------------------------------

@dataclass
class Grid:
    kind: str
    z: np.ndarray          # (rows, cols) complex
    params: dict


def parse_grid(spec: str) -> Grid:
    """annulus:r0:r1:NT[:NR], disk:r0:r1:NT[:NR] or rect:x0:x1:y0:y1:N[:M].

    Polar grids have one row per radius and one column per angle, with
    the first angle repeated at the end so that the ring closes.  The
    angular count is rounded up to a multiple of 6 so that the prong
    directions of a simple zero at the origin are grid columns.  Disk
    radii are log-spaced (r0 > 0 is required: the zero itself is not
    sampled).
    """
    parts = spec.split(":")
    kind = parts[0]
    try:
        nums = [float(p) for p in parts[1:]]
    except ValueError as exc:
        raise GridSpecError(f"bad number in grid spec {spec!r}") from exc
    if kind in ("annulus", "disk"):
        if len(nums) not in (3, 4):
            raise GridSpecError(f"{kind} grid needs r0:r1:NT[:NR]")
        r0, r1, nt = nums[0], nums[1], int(nums[2])
        if not (0 < r0 < r1) or nt < 6:
            raise GridSpecError("need 0 < r0 < r1 and NT >= 6")
        nt = 6 * math.ceil(nt / 6)
        nr = int(nums[3]) if len(nums) == 4 else max(8, nt // 16)
        r = np.geomspace(r0, r1, nr) if kind == "disk" else np.linspace(r0, r1, nr)
        th = 2 * np.pi * np.arange(nt + 1) / nt
        return Grid(kind, r[:, None] * np.exp(1j * th[None, :]), {"r": r, "theta": th})
    if kind == "rect":
        if len(nums) not in (5, 6):
            raise GridSpecError("rect grid needs x0:x1:y0:y1:N[:M]")
        x0, x1, y0, y1 = nums[:4]
        n = int(nums[4])
        m = int(nums[5]) if len(nums) == 6 else n
        xs, ys = np.linspace(x0, x1, m), np.linspace(y0, y1, n)
        return Grid(kind, xs[None, :] + 1j * ys[:, None], {"x": xs, "y": ys})
    raise GridSpecError(f"unknown grid kind {kind!r}")


# --- local distances ----------------------------------------------------------

def chain_distances(diff: PlanarDifferential, points, tol: float = 1e-13) -> np.ndarray:
    """Pairwise H^3 distances of Epstein-Schwarz images of points on a path.

    Row i is measured in the development whose osculating map at points[i]
    is the identity, reached along the polygonal path through the later
    points.  This keeps distances accurate even when the images sit far
    from any fixed base frame.
    """
    pts = [complex(p) for p in points]
    n = len(pts)
    steps = [segment_transport(diff, pts[k], pts[k + 1], tol) for k in range(n - 1)]
    ep = [epstein_matrix(p, flat_metric_jet(diff, p)) for p in pts]
    D = np.zeros((n, n))
    for i in range(n):
        Y = -1j * _Ginv(pts[i])
        here = _frame(osculating_frame(Y, pts[i]) @ ep[i]).point
        for j in range(i + 1, n):
            Y = Y @ steps[j - 1]
            M = osculating_frame(Y, pts[j]) @ ep[j]
            D[i, j] = D[j, i] = h3_distance(here, _frame(M).point)
    return D


def edge_length(diff: PlanarDifferential, a: complex, b: complex, tol: float = 1e-13) -> float:
    return float(chain_distances(diff, [a, b], tol)[0, 1])


# --- prongs and the ideal triangle -------------------------------------------------

def prong_angles(diff: PlanarDifferential, zero: complex, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Directions of the horizontal and vertical prongs at a zero of the given order."""
    c = complex(diff.derivative(zero, order)) / math.factorial(order)
    k2 = order + 2
    base = (-cmath.phase(c) + 2 * np.pi * np.arange(k2)) / k2
    hor = np.mod(base, 2 * np.pi)
    ver = np.mod(base + np.pi / k2, 2 * np.pi)
    return hor, ver


@dataclass
class IdealTriangleReport:
    fins: list
    corners: list
    fin_angles: list
    corner_angles: list

    @property
    def ratio(self) -> float:
        return min(self.fins) / max(self.corners) if max(self.corners) > 0 else math.inf

    @property
    def passed(self) -> bool:
        return len(self.fins) == 3 and all(f > 10 * max(self.corners) for f in self.fins)


def _column(theta: np.ndarray, angle: float) -> int:
    d = np.abs(np.angle(np.exp(1j * (theta[:-1] - angle))))
    return int(np.argmin(d))


def ideal_triangle_report(diff: PlanarDifferential, grid: Grid, zero: complex = 0j,
                          order: int = 1) -> IdealTriangleReport:
    """Fin and corner diameters on an annulus grid around a zero."""
    if grid.kind != "annulus":
        raise GridSpecError("ideal triangle report needs an annulus grid")
    hor, ver = prong_angles(diff, zero, order)
    th = grid.params["theta"]
    fins, corners = [], []
    for group, out in ((ver, fins), (hor, corners)):
        for a in group:
            j = _column(th, a)
            D = chain_distances(diff, list(zero + grid.z[:, j]))
            out.append(float(D.max()))
    return IdealTriangleReport(fins, corners, list(ver), list(hor))


# --- the bubble --------------------------------------------------------------------

@dataclass
class BubbleReport:
    radii: np.ndarray          # ring radii
    density: np.ndarray        # induced metric density, mean over sampled angles
    slope: float
    escape: float              # image distance between the innermost and outermost ring

    def passed(self, target: float = -2.5, window: float = 0.1) -> bool:
        return abs(self.slope - target) <= window


def bubble_report(diff: PlanarDifferential, grid: Grid, zero: complex = 0j, n_angles: int = 6) -> BubbleReport:
    """Log-log slope of the sampled induced metric on a disk grid.

    The metric is the finite-difference first fundamental form of the
    numerically developed Epstein-Schwarz map at mesh vertices; the
    density is the square root of its mean eigenvalue, in |dz| units.
    """
    if grid.kind != "disk":
        raise GridSpecError("bubble report needs a disk grid")
    z = zero + grid.z
    nr, nc = z.shape
    cols = np.unique(np.linspace(0, nc - 1, n_angles, endpoint=False).astype(int))
    r = grid.params["r"]
    dens = np.zeros(nr)
    for i in range(nr):
        vals = [math.sqrt(0.5 * np.trace(fd_first_form(diff, complex(z[i, j])))) for j in cols]
        dens[i] = float(np.mean(vals))
    slope = float(np.polyfit(np.log(r), np.log(dens), 1)[0])
    escape = float(chain_distances(diff, list(z[::-1, cols[0]]))[0, -1])
    return BubbleReport(r, dens, slope, escape)


def surface_mesh(diff: PlanarDifferential, grid: Grid, zero: complex = 0j, tol: float = 1e-12) -> EpsteinMesh:
    """Epstein-Schwarz mesh of a grid; disk grids use the bubble regime."""
    return epstein_mesh(diff, zero + grid.z, allow_near_zeros=(grid.kind == "disk"), tol=tol)


# --- foliation leaves -------------------------------------------------------------

@dataclass
class Leaf:
    seed: complex
    s: np.ndarray
    z: np.ndarray


def _clip(s, z, box):
    x0, x1, y0, y1 = box
    inside = (z.real >= x0) & (z.real <= x1) & (z.imag >= y0) & (z.imag <= y1)
    if not inside[0]:
        return s[:0], z[:0]
    k = len(inside) if inside.all() else int(np.argmin(inside))
    return s[:k], z[:k]


def trace_foliation(diff: PlanarDifferential, box, angle: float = 0.0, seeds: int = 12,
                    length: float | None = None, prune: float | None = None,
                    stop_distance: float = 1e-3) -> list[Leaf]:
    """Leaves of the trajectories of angle `angle` (q dz^2 in e^{i angle} R+) inside a box.

    Seeds lie on a seeds x seeds grid; a seed within `prune` of an
    already traced leaf is skipped.
    """
    x0, x1, y0, y1 = box
    if prune is None:
        prune = 0.5 * min(x1 - x0, y1 - y0) / seeds
    if length is None:
        corners = [complex(x, y) for x in (x0, x1) for y in (y0, y1)]
        qmax = max(abs(complex(diff(c))) for c in corners)
        length = 2 * math.hypot(x1 - x0, y1 - y0) * max(1.0, math.sqrt(qmax))
    direction = cmath.exp(0.5j * angle)
    xs = x0 + (np.arange(seeds) + 0.5) * (x1 - x0) / seeds
    ys = y0 + (np.arange(seeds) + 0.5) * (y1 - y0) / seeds
    leaves: list[Leaf] = []
    drawn = np.zeros(0, complex)
    for y in ys:
        for x in xs:
            seed = complex(x, y)
            if drawn.size and np.min(np.abs(drawn - seed)) < prune:
                continue
            if float(diff.distance_to_singular(seed)) < stop_distance or complex(diff(seed)) == 0:
                continue
            halves = []
            for sgn in (1, -1):
                try:
                    ray = trace_ray(diff, seed, sgn * direction, length, record=True, stop_distance=stop_distance)
                except Exception:
                    continue
                s, zz = _clip(np.asarray(ray.s), np.asarray(ray.z), box)
                halves.append((sgn * s, zz))
            if not halves:
                continue
            if len(halves) == 2:
                (sf, zf), (sb, zb) = halves
                s = np.concatenate([sb[::-1], sf[1:]])
                zz = np.concatenate([zb[::-1], zf[1:]])
            else:
                s, zz = halves[0]
            if zz.size < 2:
                continue
            leaves.append(Leaf(seed, s, zz))
            drawn = np.concatenate([drawn, zz])
    return leaves
