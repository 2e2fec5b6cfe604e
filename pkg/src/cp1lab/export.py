"""File output: ASCII PLY meshes, CSV curves and SVG foliation drawings."""

from __future__ import annotations

import csv
import io
from typing import Iterable, TextIO

import numpy as np

from .epstein import EpsteinMesh
from .hyp3 import _to_ball

MESH_CHANNELS = ("kappa_v", "epsilon", "d")


def mesh_positions(mesh: EpsteinMesh, model: str = "halfspace") -> np.ndarray:
    """Vertex positions (n, 3) in the upper half-space or the Poincare ball."""
    x = np.asarray(mesh.x, complex).ravel()
    t = np.asarray(mesh.t, float).ravel()
    if model == "halfspace":
        return np.stack([x.real, x.imag, t], axis=-1)
    if model == "ball":
        return _to_ball(x.real, x.imag, t)
    raise ValueError(f"unknown model {model!r}")


def write_ply(mesh: EpsteinMesh, out: TextIO, model: str = "halfspace") -> int:
    """ASCII PLY with per-vertex kappa_v, epsilon and d; returns the vertex count.

    Invalid vertices are dropped and faces renumbered.
    """
    pos = mesh_positions(mesh, model)
    valid = np.asarray(mesh.valid).ravel()
    keep = np.flatnonzero(valid)
    index = -np.ones(valid.size, dtype=int)
    index[keep] = np.arange(keep.size)
    faces = [f for f in mesh.faces if all(valid[k] for k in f)]
    chans = [np.asarray(mesh.channels.get(c, np.full(mesh.z.shape, np.nan)), float).ravel() for c in MESH_CHANNELS]
    out.write("ply\nformat ascii 1.0\n")
    if model == "ball":
        out.write("comment model ball (upper half-space point (0,0,1) at the origin)\n")
    else:
        out.write("comment model upper half-space (x, y, height)\n")
    out.write(f"element vertex {keep.size}\n")
    out.write("property double x\nproperty double y\nproperty double z\n")
    for c in MESH_CHANNELS:
        out.write(f"property double {c}\n")
    out.write(f"element face {len(faces)}\nproperty list uchar int vertex_indices\nend_header\n")
    for k in keep:
        vals = list(pos[k]) + [ch[k] for ch in chans]
        out.write(" ".join(repr(float(v)) for v in vals) + "\n")
    for f in faces:
        out.write("3 " + " ".join(str(index[k]) for k in f) + "\n")
    return int(keep.size)


def read_ply_counts(text: str) -> tuple[int, int]:
    """(vertices, faces) declared in a PLY header."""
    nv = nf = 0
    for line in text.splitlines():
        if line.startswith("element vertex"):
            nv = int(line.split()[-1])
        elif line.startswith("element face"):
            nf = int(line.split()[-1])
        elif line == "end_header":
            break
    return nv, nf


def write_curve_csv(rows: Iterable, out: TextIO) -> None:
    """Rows of (parameter, x, y, t)."""
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["parameter", "x", "y", "t"])
    for s, x, y, t in rows:
        w.writerow([repr(float(s)), repr(float(x)), repr(float(y)), repr(float(t))])


def leaves_csv(leaves, out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["leaf", "s", "x", "y"])
    for k, leaf in enumerate(leaves):
        for s, z in zip(leaf.s, leaf.z):
            w.writerow([k, repr(float(s)), repr(float(z.real)), repr(float(z.imag))])


def leaves_svg(leaves, box, size: int = 600, zeros=()) -> str:
    """Polylines of leaves in the z-plane; zeros drawn as dots."""
    x0, x1, y0, y1 = box
    sx = size / (x1 - x0)
    sy = size / (y1 - y0)

    def px(z):
        return (z.real - x0) * sx, (y1 - z.imag) * sy

    buf = io.StringIO()
    buf.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
              f'viewBox="0 0 {size} {size}">\n')
    buf.write(f'<rect width="{size}" height="{size}" fill="white"/>\n')
    for leaf in leaves:
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in (px(z) for z in leaf.z))
        buf.write(f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="1"/>\n')
    for z in zeros:
        a, b = px(complex(z))
        buf.write(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3" fill="red"/>\n')
    buf.write("</svg>\n")
    return buf.getvalue()
