"""Flat surfaces glued from Euclidean polygons by maps z -> +-z + c.

The metric is the polygon metric, i.e. q = dz^2 in every polygon.
Geodesics between two points are found by unfolding: straight segments
are propagated through a triangulation as visibility windows, cone
points are joined into a visibility graph, and the shortest chain is
picked by Dijkstra.  Cylinders of periodic trajectories are detected
from first returns of the straight-line flow to polygon edges.
"""

from __future__ import annotations

import cmath
import heapq
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TOL = 1e-10


class DepthExceededError(RuntimeError):
    pass


class GluingError(ValueError):
    pass


def _cross(a: complex, b: complex) -> float:
    return a.real * b.imag - a.imag * b.real


def _angle_ccw(u: complex, v: complex) -> float:
    """CCW angle from u to v in [0, 2 pi)."""
    a = cmath.phase(v / u)
    return a + 2 * math.pi if a < 0 else a


@dataclass(frozen=True)
class Gluing:
    poly: int
    edge: int
    to_poly: int
    to_edge: int
    sign: int
    offset: complex

    def apply(self, z: complex) -> complex:
        return self.sign * z + self.offset


@dataclass(frozen=True)
class SurfacePoint:
    poly: int
    z: complex


@dataclass(frozen=True)
class FlatSegment:
    start: object
    end: object
    holonomy: complex
    start_angle: float | None = None
    end_angle: float | None = None

    @property
    def length(self) -> float:
        return abs(self.holonomy)

    @property
    def height(self) -> float:
        return abs(self.holonomy.imag)

    @property
    def width(self) -> float:
        return abs(self.holonomy.real)


@dataclass(frozen=True)
class FlatCylinder:
    itinerary: tuple
    circumference: float
    width: float
    theta: float
    transversal: tuple  # (poly, edge, position on edge, interval length on that edge)

    @property
    def height(self) -> float:
        """Height of the core curve: circumference times |sin theta|."""
        return self.circumference * abs(math.sin(self.theta))


@dataclass
class Triangle:
    poly: int
    idx: tuple            # polygon vertex indices
    pts: tuple            # local coordinates, CCW
    nbr: list = field(default_factory=lambda: [None, None, None])  # (tri, edge, sign, shift)


class HalfTranslationSurface:
    """Polygons (CCW complex vertex lists) with edge gluings.

    Edge e of polygon p runs from vertex e to vertex e+1.  A gluing
    z -> sign*z + offset carries edge (p, e) onto edge (p', e') with
    reversed orientation.
    """

    def __init__(self, polygons: Sequence[Sequence[complex]], gluings: Sequence[Gluing]):
        self.polygons = [np.asarray(P, dtype=complex) for P in polygons]
        for k, P in enumerate(self.polygons):
            if _signed_area(P) <= 0:
                raise GluingError(f"polygon {k} is not counterclockwise")
        self.glue: dict[tuple[int, int], Gluing] = {}
        for g in gluings:
            self._add(g)
            inv = Gluing(g.to_poly, g.to_edge, g.poly, g.edge, g.sign, -g.sign * g.offset)
            if (inv.poly, inv.edge) not in self.glue:
                self._add(inv)
        for k, P in enumerate(self.polygons):
            for e in range(len(P)):
                if (k, e) not in self.glue:
                    raise GluingError(f"edge {(k, e)} is not glued")
        self._vertex_classes()
        self._triangulate()
        self._corner_offsets()

    # construction -----------------------------------------------------------
    @classmethod
    def from_edge_pairs(cls, polygons, pairs) -> "HalfTranslationSurface":
        """Gluings inferred from pairs ((p, e), (p', e'))."""
        polys = [np.asarray(P, complex) for P in polygons]
        gl = []
        for (p, e), (q, f) in pairs:
            P, Q = polys[p], polys[q]
            a0, a1 = P[e], P[(e + 1) % len(P)]
            b0, b1 = Q[f], Q[(f + 1) % len(Q)]
            u, v = a1 - a0, b1 - b0
            if abs(u + v) < TOL * max(1, abs(u)):
                sign = 1
            elif abs(u - v) < TOL * max(1, abs(u)):
                sign = -1
            else:
                raise GluingError(f"edges {(p, e)} and {(q, f)} are not parallel of equal length")
            gl.append(Gluing(p, e, q, f, sign, b1 - sign * a0))
        return cls(polys, gl)

    @classmethod
    def from_json(cls, text_or_dict) -> "HalfTranslationSurface":
        d = json.loads(text_or_dict) if isinstance(text_or_dict, str) else dict(text_or_dict)
        polys = [[complex(*v) for v in P] for P in d["polygons"]]
        gl = []
        for g in d["gluings"]:
            p, e = g["edge"]
            q, f = g["to"]
            off = g.get("offset")
            if off is None:
                gl.append(None)
                continue
            gl.append(Gluing(p, e, q, f, int(g.get("sign", 1)), complex(*off)))
        if any(g is None for g in gl):
            pairs = [(tuple(g["edge"]), tuple(g["to"])) for g in d["gluings"]]
            return cls.from_edge_pairs(polys, pairs)
        return cls(polys, gl)

    def to_json(self) -> str:
        seen = set()
        gl = []
        for (p, e), g in sorted(self.glue.items()):
            key = frozenset([(p, e), (g.to_poly, g.to_edge)])
            if key in seen:
                continue
            seen.add(key)
            gl.append({"edge": [p, e], "to": [g.to_poly, g.to_edge], "sign": g.sign,
                       "offset": [g.offset.real, g.offset.imag]})
        return json.dumps({"polygons": [[[z.real, z.imag] for z in P] for P in self.polygons],
                           "gluings": gl})

    def _add(self, g: Gluing):
        P, Q = self.polygons[g.poly], self.polygons[g.to_poly]
        a0, a1 = P[g.edge], P[(g.edge + 1) % len(P)]
        b0, b1 = Q[g.to_edge], Q[(g.to_edge + 1) % len(Q)]
        if abs(g.apply(a0) - b1) > TOL * max(1, abs(a0)) or abs(g.apply(a1) - b0) > TOL * max(1, abs(a1)):
            raise GluingError(f"gluing {g} does not carry edge onto edge")
        if (g.poly, g.edge) in self.glue and self.glue[(g.poly, g.edge)] != g:
            raise GluingError(f"edge {(g.poly, g.edge)} glued twice")
        self.glue[(g.poly, g.edge)] = g

    # combinatorics -----------------------------------------------------------
    def _vertex_classes(self):
        parent = {}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for k, P in enumerate(self.polygons):
            for i in range(len(P)):
                parent[(k, i)] = (k, i)
        for (p, e), g in self.glue.items():
            n, m = len(self.polygons[p]), len(self.polygons[g.to_poly])
            for a, b in (((p, e), (g.to_poly, (g.to_edge + 1) % m)),
                         ((p, (e + 1) % n), (g.to_poly, g.to_edge))):
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[ra] = rb
        roots = {}
        self.vertex_class = {}
        for c in sorted(parent):
            r = find(c)
            roots.setdefault(r, len(roots))
            self.vertex_class[c] = roots[r]
        self.n_vertices = len(roots)
        self.cone_angles = [0.0] * self.n_vertices
        for (k, i), v in self.vertex_class.items():
            P = self.polygons[k]
            self.cone_angles[v] += _interior_angle(P, i)

    @property
    def cone_orders(self) -> list[int]:
        """k with cone angle (k + 2) pi at each vertex class."""
        return [int(round(a / math.pi)) - 2 for a in self.cone_angles]

    @property
    def area(self) -> float:
        return float(sum(_signed_area(P) for P in self.polygons))

    @property
    def singular_vertices(self) -> list[int]:
        return [v for v, a in enumerate(self.cone_angles) if abs(a - 2 * math.pi) > 1e-8]

    def check(self) -> None:
        for v, a in enumerate(self.cone_angles):
            k = a / math.pi - 2
            if abs(k - round(k)) > 1e-8 or round(k) < -1:
                raise GluingError(f"vertex class {v} has cone angle {a}")
        if not self.area > 0:
            raise GluingError("area must be positive")

    def _triangulate(self):
        self.triangles: list[Triangle] = []
        edge_owner = {}      # (poly, i, j) -> (tri, edge)
        for k, P in enumerate(self.polygons):
            for tri in _ear_clip(P):
                t = Triangle(k, tri, tuple(P[i] for i in tri))
                ti = len(self.triangles)
                self.triangles.append(t)
                for e in range(3):
                    i, j = tri[e], tri[(e + 1) % 3]
                    edge_owner[(k, i, j)] = (ti, e)
        for ti, t in enumerate(self.triangles):
            k, n = t.poly, len(self.polygons[t.poly])
            for e in range(3):
                i, j = t.idx[e], t.idx[(e + 1) % 3]
                if (k, j, i) in edge_owner:                    # diagonal
                    tj, f = edge_owner[(k, j, i)]
                    t.nbr[e] = (tj, f, 1, 0j)
                else:                                           # polygon edge
                    pe = i if (i + 1) % n == j else j
                    g = self.glue[(k, pe)]
                    m = len(self.polygons[g.to_poly])
                    a, b = g.to_edge, (g.to_edge + 1) % m
                    tj, f = edge_owner[(g.to_poly, b, a)] if (g.to_poly, b, a) in edge_owner else edge_owner[(g.to_poly, a, b)]
                    # map from neighbour coordinates back into ours: z = s (z' - c)
                    t.nbr[e] = (tj, f, g.sign, -g.sign * g.offset)

    def _corner_offsets(self):
        """Angular offset of each triangle corner inside the cone at its vertex."""
        self.corner_offset = {}
        self.corners_of = {v: [] for v in range(self.n_vertices)}
        for ti, t in enumerate(self.triangles):
            for i in range(3):
                v = self.vertex_class[(t.poly, t.idx[i])]
                self.corners_of[v].append((ti, i))
        for v, corners in self.corners_of.items():
            start = corners[0]
            cur = start
            off = 0.0
            for _ in range(len(corners) + 1):
                if cur in self.corner_offset:
                    break
                self.corner_offset[cur] = off
                ti, i = cur
                off += self.corner_angle(ti, i)
                # next corner CCW is across edge (i-1 -> i)
                e = (i - 1) % 3
                tj, f, _, _ = self.triangles[ti].nbr[e]
                cur = (tj, f)

    def corner_angle(self, ti: int, i: int) -> float:
        p = self.triangles[ti].pts
        return _angle_ccw(p[(i + 1) % 3] - p[i], p[(i - 1) % 3] - p[i])

    def direction_angle(self, ti: int, i: int, v: complex) -> float:
        """Angle of local direction v at corner (ti, i), measured in the cone."""
        p = self.triangles[ti].pts
        a = _angle_ccw(p[(i + 1) % 3] - p[i], v)
        if a > self.corner_angle(ti, i) + 1e-9:
            a = a - 2 * math.pi if a > math.pi else a
        return self.corner_offset[(ti, i)] + a

    # point location ------------------------------------------------------------
    def locate(self, pt: SurfacePoint) -> tuple[str, object]:
        """('vertex', class) or ('point', [(triangle, local z), ...])."""
        P = self.polygons[pt.poly]
        for i, v in enumerate(P):
            if abs(v - pt.z) < 1e-12 * max(1, abs(v)):
                return "vertex", self.vertex_class[(pt.poly, i)]
        hits = []
        for ti, t in enumerate(self.triangles):
            if t.poly == pt.poly and _in_triangle(t.pts, pt.z, 1e-13):
                hits.append(ti)
        if not hits:
            raise ValueError(f"point {pt} is not in polygon {pt.poly}")
        return "point", hits

    # straight-line flow ---------------------------------------------------------
    def flow(self, pt: SurfacePoint, direction: complex, length: float, vertex_tol: float = 1e-11):
        """Follow the straight line from pt; returns (end point, end direction, crossings, hit).

        crossings lists (poly, edge, parameter along edge); hit is True if
        the line ran into a vertex, in which case the end point is there.
        """
        u = direction / abs(direction)
        p, z = pt.poly, complex(pt.z)
        travelled = 0.0
        crossings = []
        last_edge = None
        for _ in range(100000):
            P = self.polygons[p]
            n = len(P)
            best = None
            for e in range(n):
                if last_edge is not None and e == last_edge:
                    continue
                a, b = P[e], P[(e + 1) % n]
                res = _ray_segment(z, u, a, b)
                if res is None:
                    continue
                tau, lam = res
                if tau <= 1e-14 * max(1.0, length):
                    continue
                if best is None or tau < best[0]:
                    best = (tau, e, lam)
            if best is None:
                raise RuntimeError("ray left the polygon without crossing an edge")
            tau, e, lam = best
            if travelled + tau >= length:
                return SurfacePoint(p, z + (length - travelled) * u), u, crossings, False
            edge_len = abs(P[(e + 1) % n] - P[e])
            if min(lam, 1 - lam) * edge_len < vertex_tol:
                return SurfacePoint(p, z + tau * u), u, crossings, True
            travelled += tau
            x = z + tau * u
            crossings.append((p, e, lam))
            g = self.glue[(p, e)]
            p, z, u = g.to_poly, g.apply(x), g.sign * u
            last_edge = g.to_edge
        raise RuntimeError("flow did not terminate")


def _signed_area(P) -> float:
    x, y = P.real, P.imag
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _interior_angle(P, i) -> float:
    n = len(P)
    return _angle_ccw(P[(i + 1) % n] - P[i], P[(i - 1) % n] - P[i])


def _in_triangle(pts, z, tol) -> bool:
    a, b, c = pts
    scale = max(abs(b - a), abs(c - b), abs(a - c))
    d1 = _cross(b - a, z - a) / scale
    d2 = _cross(c - b, z - b) / scale
    d3 = _cross(a - c, z - c) / scale
    return d1 >= -tol and d2 >= -tol and d3 >= -tol


def _ear_clip(P) -> list[tuple[int, int, int]]:
    idx = list(range(len(P)))
    out = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10 * len(P) ** 2:
            raise GluingError("ear clipping failed")
        m = len(idx)
        for k in range(m):
            i0, i1, i2 = idx[(k - 1) % m], idx[k], idx[(k + 1) % m]
            a, b, c = P[i0], P[i1], P[i2]
            if _cross(b - a, c - b) <= 1e-14:
                continue
            if any(_in_triangle((a, b, c), P[j], -1e-12) for j in idx if j not in (i0, i1, i2)):
                continue
            out.append((i0, i1, i2))
            idx.pop(k)
            break
    out.append(tuple(idx))
    return out


def _ray_segment(z, u, a, b):
    """Intersection of ray z + tau u (tau > 0) with segment [a, b]: (tau, lambda)."""
    d = b - a
    den = _cross(u, d)
    if abs(den) < 1e-15 * abs(d):
        return None
    w = a - z
    tau = _cross(w, d) / den
    lam = _cross(w, u) / den
    if lam < -1e-12 or lam > 1 + 1e-12:
        return None
    return tau, min(1.0, max(0.0, lam))


# --- unfolding -------------------------------------------------------------------

@dataclass
class Connection:
    source: object
    target: object
    vector: complex          # developed displacement, in source-local coordinates
    start_angle: float | None
    end_angle: float | None
    depth: int

    @property
    def length(self) -> float:
        return abs(self.vector)


def _window_distance(s, A, B) -> float:
    d = B - A
    t = max(0.0, min(1.0, ((s - A) * d.conjugate()).real / (abs(d) ** 2)))
    return abs(A + t * d - s)


def _clip(s, A, B, a, b):
    """Part of segment [a, b] inside the cone at s spanned by A (right) and B (left)."""
    lo, hi = 0.0, 1.0
    for p0, p1 in ((A - s, None), (None, B - s)):
        if p0 is not None:
            f0, f1 = _cross(p0, a - s), _cross(p0, b - a)
        else:
            f0, f1 = _cross(a - s, p1), _cross(b - a, p1)
        # f0 + lam f1 >= 0
        if abs(f1) < 1e-300:
            if f0 < 0:
                return None
            continue
        r = -f0 / f1
        if f1 > 0:
            lo = max(lo, r)
        else:
            hi = min(hi, r)
    if hi - lo <= 1e-13:
        return None
    return a + lo * (b - a), a + hi * (b - a)


def _in_cone(s, A, B, x, tol=1e-12) -> bool:
    v = x - s
    r = abs(v)
    if r == 0:
        return False
    return _cross(A - s, v) > tol * abs(A - s) * r and _cross(v, B - s) > tol * abs(B - s) * r


class Unfolder:
    """Straight connections from one source to a set of targets."""

    def __init__(self, surf: HalfTranslationSurface, max_depth: int = 16):
        self.surf = surf
        self.max_depth = max_depth

    def _targets_in(self, targets):
        by_tri = {}
        by_vertex = {}
        for name, loc in targets.items():
            kind, data = loc
            if kind == "vertex":
                by_vertex.setdefault(data, []).append(name)
            else:
                for ti, z in data:
                    by_tri.setdefault(ti, []).append((name, z))
        return by_tri, by_vertex

    def connections(self, source_name, source_loc, targets: dict, radius: float):
        """All straight connections of length <= radius.

        source_loc / targets values: ('vertex', class) or
        ('point', [(triangle, local z), ...]).
        Returns (connections, truncated) where truncated is the smallest
        window distance abandoned because of the depth limit (inf if none).
        """
        S = self.surf
        by_tri, by_vertex = self._targets_in(targets)
        out: list[Connection] = []
        heap = []
        counter = itertools.count()
        truncated = math.inf
        kind, data = source_loc

        def vertex_targets(ti, i):
            v = S.vertex_class[(S.triangles[ti].poly, S.triangles[ti].idx[i])]
            return by_vertex.get(v, [])

        starts = []
        if kind == "vertex":
            for ti, i in S.corners_of[data]:
                t = S.triangles[ti]
                s = t.pts[i]
                starts.append((ti, s, (ti, i)))
                for name, zz in by_tri.get(ti, []):
                    if abs(zz - s) > 0 and abs(zz - s) <= radius:
                        out.append(Connection(source_name, name, zz - s,
                                              S.direction_angle(ti, i, zz - s), None, 0))
                # the two edges at the corner are straight connections themselves
                for j in ((i + 1) % 3, (i - 1) % 3):
                    vec = t.pts[j] - s
                    if abs(vec) <= radius:
                        sa = S.direction_angle(ti, i, vec)
                        ea = S.direction_angle(ti, j, -vec)
                        for name in vertex_targets(ti, j):
                            out.append(Connection(source_name, name, vec, sa, ea, 0))
                # window: the opposite edge
                a, b = t.pts[(i + 1) % 3], t.pts[(i + 2) % 3]
                heapq.heappush(heap, (_window_distance(s, a, b), next(counter),
                                      (ti, (i + 1) % 3, 1, 0j, a, b, 0, s, (ti, i))))
        else:
            for ti, z in data:
                t = S.triangles[ti]
                s = z
                starts.append((ti, s, None))
                # targets in the same triangle
                for name, zz in by_tri.get(ti, []):
                    if name != source_name and abs(zz - s) > 0:
                        ea = None
                        out.append(Connection(source_name, name, zz - s, None, ea, 0))
                for i in range(3):
                    if abs(t.pts[i] - s) > 0:
                        vec = t.pts[i] - s
                        for name in vertex_targets(ti, i):
                            out.append(Connection(source_name, name, vec, None,
                                                  S.direction_angle(ti, i, -vec), 0))
                for e in range(3):
                    a, b = t.pts[e], t.pts[(e + 1) % 3]
                    if abs(_cross(b - a, s - a)) < 1e-14 * abs(b - a):
                        continue  # source lies on this edge
                    heapq.heappush(heap, (_window_distance(s, a, b), next(counter),
                                          (ti, e, 1, 0j, a, b, 0, s, None)))
        while heap:
            dist, _, state = heapq.heappop(heap)
            if dist > radius:
                break
            ti, e, sg, sh, A, B, depth, s, corner = state
            # A, B are developed window endpoints on edge e of triangle ti (copy map z -> sg z + sh)
            if depth >= self.max_depth:
                truncated = min(truncated, dist)
                continue
            tj, f, s2, c2 = S.triangles[ti].nbr[e]
            # neighbour developed map: z' -> sg * (s2 z' + c2) + sh
            nsg = sg * s2
            nsh = sg * c2 + sh
            tri = S.triangles[tj]
            dev = [nsg * p + nsh for p in tri.pts]
            # orient cone: A right, B left as seen from s
            if _cross(A - s, B - s) < 0:
                A, B = B, A
            apex_i = (f + 2) % 3
            apex = dev[apex_i]
            if _in_cone(s, A, B, apex) and abs(apex - s) <= radius:
                names = vertex_targets(tj, apex_i)
                if names:
                    vec = apex - s
                    sa = self._start_angle(corner, vec)
                    ea = S.direction_angle(tj, apex_i, nsg * (-vec))
                    for name in names:
                        out.append(Connection(source_name, name, vec, sa, ea, depth + 1))
            for name, zz in by_tri.get(tj, []):
                x = nsg * zz + nsh
                if _in_cone(s, A, B, x) and abs(x - s) <= radius:
                    out.append(Connection(source_name, name, x - s,
                                          self._start_angle(corner, x - s), None, depth + 1))
            for g in ((f + 1) % 3, (f + 2) % 3):
                a, b = dev[g], dev[(g + 1) % 3]
                w = _clip(s, A, B, a, b)
                if w is None:
                    continue
                heapq.heappush(heap, (_window_distance(s, *w), next(counter),
                                      (tj, g, nsg, nsh, w[0], w[1], depth + 1, s, corner)))
        return out, truncated

    def _start_angle(self, corner, vec):
        if corner is None:
            return None
        ti, i = corner
        return self.surf.direction_angle(ti, i, vec)


@dataclass
class GeodesicResult:
    segments: list
    length: float
    nodes: list
    angles: list           # (vertex class, angle on one side, angle on the other side)

    @property
    def certified(self) -> bool:
        return all(a >= math.pi - 1e-7 and b >= math.pi - 1e-7 for _, a, b in self.angles)


def _node_location(surf, pt):
    kind, data = surf.locate(pt)
    if kind == "vertex":
        return ("vertex", data)
    return ("point", [(ti, pt.z) for ti in data])


def flat_geodesic(surf: HalfTranslationSurface, p: SurfacePoint, q: SurfacePoint,
                  max_depth: int = 16, displacement: complex | None = None,
                  radius: float | None = None) -> GeodesicResult:
    """Shortest chain of straight segments from p to q meeting only at cone points.

    With `displacement` given, returns the single straight connection
    whose developed vector equals it (a fixed class of path on tori).
    """
    locs = {"p": _node_location(surf, p), "q": _node_location(surf, q)}
    unf = Unfolder(surf, max_depth)
    if displacement is not None:
        r = abs(displacement) * (1 + 1e-9) + 1e-12
        conns, _ = unf.connections("p", locs["p"], {"q": locs["q"]}, r)
        for c in conns:
            if abs(c.vector - displacement) < 1e-9 * max(1, abs(displacement)):
                return GeodesicResult([FlatSegment("p", "q", c.vector, c.start_angle, c.end_angle)],
                                      c.length, ["p", "q"], [])
        raise DepthExceededError("no straight connection with the requested displacement")

    for v in range(surf.n_vertices):
        locs[("v", v)] = ("vertex", v)
    # endpoints sitting at vertices are the vertex nodes themselves
    alias = {}
    for key in ("p", "q"):
        if locs[key][0] == "vertex":
            alias[key] = ("v", locs[key][1])
    if radius is None:
        radius = _upper_bound(surf, unf, locs)
    graph: dict = {}
    worst_trunc = math.inf
    names = [k for k in locs if k not in alias]
    for src in names:
        if src == "q":
            continue
        targets = {k: locs[k] for k in names if k != src and k != "p"}
        if src != "p" and "p" in targets:
            targets.pop("p")
        conns, trunc = unf.connections(src, locs[src], targets, radius)
        worst_trunc = min(worst_trunc, trunc)
        for c in conns:
            key = (src, c.target)
            if key not in graph or c.length < graph[key].length:
                graph[key] = c
    start = alias.get("p", "p")
    goal = alias.get("q", "q")
    if start == goal:
        return GeodesicResult([], 0.0, [start], [])
    dist = {start: 0.0}
    prev = {}
    heap = [(0.0, 0, start)]
    cnt = itertools.count(1)
    adj = {}
    for (a, b), c in graph.items():
        adj.setdefault(a, []).append((b, c, False))
        adj.setdefault(b, []).append((a, c, True))
    done = set()
    while heap:
        d, _, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == goal:
            break
        for v, c, rev in adj.get(u, []):
            if v == "p" and u != "p":
                continue
            nd = d + c.length
            if nd < dist.get(v, math.inf) - 1e-15:
                dist[v] = nd
                prev[v] = (u, c, rev)
                heapq.heappush(heap, (nd, next(cnt), v))
    if goal not in dist:
        raise DepthExceededError("no path found within search radius/depth")
    if worst_trunc < dist[goal]:
        raise DepthExceededError(f"unfolding depth {max_depth} exceeded below the best length")
    chain = []
    u = goal
    while u != start:
        v, c, rev = prev[u]
        if rev:
            seg = FlatSegment(v, u, -c.vector, c.end_angle, c.start_angle)
        else:
            seg = FlatSegment(v, u, c.vector, c.start_angle, c.end_angle)
        chain.append(seg)
        u = v
    chain.reverse()
    nodes = [chain[0].start] + [s.end for s in chain]
    angles = []
    for s_in, s_out in zip(chain[:-1], chain[1:]):
        v = s_in.end[1]
        theta = surf.cone_angles[v]
        diff = (s_out.start_angle - s_in.end_angle) % theta
        angles.append((v, diff, theta - diff))
    return GeodesicResult(chain, float(dist[goal]), nodes, angles)


def _upper_bound(surf, unf, locs) -> float:
    """Length of some path from p to q through triangle vertices."""
    # dist from a point to its triangle's vertices, then along triangle edges
    graph = {}

    def add(a, b, w):
        graph.setdefault(a, []).append((b, w))
        graph.setdefault(b, []).append((a, w))

    for ti, t in enumerate(surf.triangles):
        for i in range(3):
            va = ("v", surf.vertex_class[(t.poly, t.idx[i])])
            vb = ("v", surf.vertex_class[(t.poly, t.idx[(i + 1) % 3])])
            add(va, vb, abs(t.pts[(i + 1) % 3] - t.pts[i]))
    for key in ("p", "q"):
        kind, data = locs[key]
        if kind == "vertex":
            add(key, ("v", data), 0.0)
        else:
            for ti, z in data:
                t = surf.triangles[ti]
                for i in range(3):
                    add(key, ("v", surf.vertex_class[(t.poly, t.idx[i])]), abs(t.pts[i] - z))
                if locs["q" if key == "p" else "p"][0] == "point":
                    other = locs["q" if key == "p" else "p"][1]
                    for tj, zz in other:
                        if tj == ti:
                            add("p", "q", abs(zz - z))
    dist = {"p": 0.0}
    heap = [(0.0, 0, "p")]
    cnt = itertools.count(1)
    while heap:
        d, _, u = heapq.heappop(heap)
        if u == "q":
            return d * (1 + 1e-9) + 1e-12
        if d > dist.get(u, math.inf):
            continue
        for v, w in graph.get(u, []):
            if d + w < dist.get(v, math.inf):
                dist[v] = d + w
                heapq.heappush(heap, (d + w, next(cnt), v))
    raise DepthExceededError("surface is disconnected")


# --- cylinders -------------------------------------------------------------------

def _canonical_cycle(seq):
    seq = tuple(seq)
    if not seq:
        return seq
    return min(seq[k:] + seq[:k] for k in range(len(seq)))


def _closed_orbit(surf, pt, u, max_len, tol=1e-9):
    """Trace from pt along u; return (circumference, itinerary) on first exact return."""
    p0, z0 = pt.poly, pt.z
    # use the flow in pieces, checking each edge crossing for a return
    travelled = 0.0
    p, z, uu = p0, z0, u
    itin = []
    for _ in range(10000):
        P = surf.polygons[p]
        n = len(P)
        # distance to the start point along this chord, if the start lies on it
        if p == p0 and abs(uu - u) < 1e-12 and itin:
            w = z0 - z
            along = (w * uu.conjugate()).real
            perp = abs((w * uu.conjugate()).imag)
            if perp < tol and along > 0:
                # start point must come before the exit of this chord
                end, _, _, hit = surf.flow(SurfacePoint(p, z), uu, along * (1 - 1e-12))
                if not hit and end.poly == p:
                    return travelled + along, tuple(itin)
        end, u_end, cr, hit = surf.flow(SurfacePoint(p, z), uu, max_len - travelled + 1e-9)
        if hit:
            return None
        if not cr:
            return None
        # advance exactly one crossing
        pc, ec, lam = cr[0]
        a, b = P[ec], P[(ec + 1) % n]
        x = a + lam * (b - a)
        seg = abs(x - z)
        travelled += seg
        if travelled > max_len:
            return None
        itin.append((pc, ec))
        g = surf.glue[(pc, ec)]
        p, z, uu = g.to_poly, g.apply(x), g.sign * uu
    return None


def _line_closes(surf, pt, u, circ, itin_key, tol=1e-8):
    end, u_end, cr, hit = surf.flow(pt, u, circ)
    if hit or end.poly != pt.poly or abs(u_end - u) > 1e-9:
        return False
    if abs(end.z - pt.z) > tol * max(1.0, circ):
        return False
    return _canonical_cycle([(p, e) for p, e, _ in cr]) == itin_key


def _cylinder_width(surf, pt, u, circ, itin_key, n_scan=256):
    """Total width of the cylinder through pt, by sweeping perpendicular offsets."""
    s_max = surf.area / circ
    halves = []
    for sgn in (1, -1):
        nrm = sgn * 1j * u
        step = s_max / n_scan
        good = 0.0
        bad = None
        for k in range(1, n_scan + 1):
            s = k * step
            y, _, _, hit = surf.flow(pt, nrm, s)
            if hit or not _line_closes(surf, y, _transport_dir(surf, pt, nrm, s, u), circ, itin_key):
                bad = s
                break
            good = s
        if bad is None:
            halves.append(s_max)
            continue
        lo, hi = good, bad
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            y, _, _, hit = surf.flow(pt, nrm, mid)
            if not hit and _line_closes(surf, y, _transport_dir(surf, pt, nrm, mid, u), circ, itin_key):
                lo = mid
            else:
                hi = mid
        halves.append(0.5 * (lo + hi))
    return min(halves[0] + halves[1], s_max)


def _transport_dir(surf, pt, nrm, s, u):
    """Flow direction u carried along the perpendicular displacement."""
    _, n_end, _, _ = surf.flow(pt, nrm, s)
    # directions rotate together under +-1 gluings
    return u * (n_end / nrm)


def detect_cylinders(surf: HalfTranslationSurface, angles: Sequence[float],
                     max_circumference: float, seeds_per_edge: int = 24) -> list[FlatCylinder]:
    """Cylinders of closed trajectories in the given directions."""
    found = []
    keys = set()
    golden = (math.sqrt(5) - 1) / 2
    for theta in angles:
        u0 = cmath.exp(1j * theta)
        for (p, e), g in sorted(surf.glue.items()):
            P = surf.polygons[p]
            n = len(P)
            a, b = P[e], P[(e + 1) % n]
            d = b - a
            cr = _cross(d, u0)
            if abs(cr) < 1e-12 * abs(d):
                continue  # edge parallel to the flow
            # flow must enter the polygon: interior is to the left of the edge
            if cr <= 0:
                continue
            for k in range(seeds_per_edge):
                lam = (k + 0.5 + 0.3 * ((k * golden) % 1 - 0.5)) / seeds_per_edge
                x = a + lam * d
                pt = SurfacePoint(p, x + 1e-13 * u0)
                res = _closed_orbit(surf, pt, u0, max_circumference)
                if res is None:
                    continue
                circ, itin = res
                key_itin = _canonical_cycle(itin)
                key = (round(theta % math.pi, 9), key_itin)
                if key in keys:
                    continue
                w = _cylinder_width(surf, pt, u0, circ, key_itin)
                keys.add(key)
                # the same cylinder may show a rotated or reversed itinerary from another seed
                found.append(FlatCylinder(key_itin, circ, w, theta, (p, e, lam, w / abs(cr / abs(d)))))
    return _merge_cylinders(found)


def _merge_cylinders(cyls):
    out = []
    for c in cyls:
        dup = False
        for o in out:
            if (abs(o.circumference - c.circumference) < 1e-8 and abs(o.width - c.width) < 1e-8
                    and abs(math.sin(o.theta - c.theta)) < 1e-12 and set(o.itinerary) == set(c.itinerary)):
                dup = True
                break
        if not dup:
            out.append(c)
    return out


# --- standard surfaces ------------------------------------------------------------

def square_torus(side: float = 1.0) -> HalfTranslationSurface:
    P = [0, side, side + 1j * side, 1j * side]
    return HalfTranslationSurface.from_edge_pairs([P], [((0, 0), (0, 2)), ((0, 1), (0, 3))])


def l_shaped_surface() -> HalfTranslationSurface:
    """Three unit squares in an L; genus two with one cone point of angle 6 pi."""
    sq = lambda c: [c, c + 1, c + 1 + 1j, c + 1j]
    polys = [sq(0), sq(1), sq(1j)]
    pairs = [((0, 1), (1, 3)), ((1, 1), (0, 3)), ((0, 2), (2, 0)), ((2, 2), (0, 0)),
             ((1, 2), (1, 0)), ((2, 1), (2, 3))]
    return HalfTranslationSurface.from_edge_pairs(polys, pairs)


def regular_octagon_surface(side: float = 1.0) -> HalfTranslationSurface:
    """Regular octagon with opposite sides glued by translations."""
    r = side / (2 * math.sin(math.pi / 8))
    verts = [r * cmath.exp(1j * (math.pi / 8 + k * math.pi / 4)) for k in range(8)]
    # rotate so that two sides are horizontal
    verts = [v * cmath.exp(-1j * math.pi / 8) * cmath.exp(1j * math.pi / 8) for v in verts]
    c0 = verts[0]
    pairs = [((0, k), (0, k + 4)) for k in range(4)]
    return HalfTranslationSurface.from_edge_pairs([verts], pairs)
