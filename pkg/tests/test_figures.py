import io
import math

import numpy as np
import pytest

from cp1lab.epstein import epstein_mesh
from cp1lab.export import leaves_csv, leaves_svg, mesh_positions, read_ply_counts, write_ply
from cp1lab.figures import (
    GridSpecError, bubble_report, chain_distances, ideal_triangle_report, parse_grid, prong_angles,
    trace_foliation,
)
from cp1lab.qdiff import PlanarDifferential

Z = PlanarDifferential.polynomial([0, 1])
ONE = PlanarDifferential.constant(1.0)


def test_annulus_grid_rounds_angles_to_multiple_of_six():
    g = parse_grid("annulus:1:2:20")
    assert g.z.shape == (8, 25)           # NT -> 24, ring closed by a repeated column
    assert np.allclose(g.z[:, 0], g.z[:, -1])
    assert np.allclose(np.abs(g.z[0]), 1) and np.allclose(np.abs(g.z[-1]), 2)


def test_disk_grid_is_log_spaced():
    g = parse_grid("disk:0.01:1:12:5")
    r = g.params["r"]
    assert np.allclose(np.diff(np.log(r)), math.log(10) / 2)


def test_rect_grid():
    g = parse_grid("rect:0:1:-1:1:3:4")
    assert g.z.shape == (3, 4)
    assert g.z[0, 0] == -1j and g.z[-1, -1] == 1 + 1j


@pytest.mark.parametrize("spec", ["annulus:2:1:12", "disk:0:1:12", "annulus:1:2", "rect:0:1:0:1",
                                  "annulus:a:2:12", "sphere:1:2:3", "annulus:1:2:3"])
def test_bad_grid_specs(spec):
    with pytest.raises(GridSpecError):
        parse_grid(spec)


def test_chain_distances_for_dz_squared():
    # vertical displacement s is at distance sqrt(2) s; horizontal collapses
    D = chain_distances(ONE, [0j, 0.5j, 1.5j, 1.5 + 1.5j])
    assert D[0, 1] == pytest.approx(0.5 * math.sqrt(2), rel=1e-10)
    assert D[0, 2] == pytest.approx(1.5 * math.sqrt(2), rel=1e-10)
    assert D[2, 3] < 1e-9


def test_prong_angles_of_simple_zero():
    hor, ver = prong_angles(Z, 0j, 1)
    assert np.allclose(sorted(hor), [0, 2 * np.pi / 3, 4 * np.pi / 3])
    assert np.allclose(sorted(ver), [np.pi / 3, np.pi, 5 * np.pi / 3])


def test_ideal_triangle_on_a_small_annulus():
    r = ideal_triangle_report(Z, parse_grid("annulus:3:8:48:6"))
    assert len(r.fins) == 3 and r.passed
    assert max(r.fins) == pytest.approx(min(r.fins), rel=1e-6)
    with pytest.raises(GridSpecError):
        ideal_triangle_report(Z, parse_grid("disk:0.1:1:12"))


def test_bubble_slope():
    b = bubble_report(Z, parse_grid("disk:0.005:0.15:12:9"))
    assert b.passed()
    assert b.slope == pytest.approx(-2.5, abs=1e-3)
    assert b.escape > 0


def test_foliation_of_dz_squared_is_horizontal_lines():
    box = (-1.0, 1.0, -1.0, 1.0)
    leaves = trace_foliation(ONE, box, 0.0, seeds=4)
    assert leaves
    for leaf in leaves:
        assert np.ptp(leaf.z.imag) < 1e-9
        assert np.all(np.abs(leaf.z.real) <= 1 + 1e-12)
    vert = trace_foliation(ONE, box, math.pi, seeds=4)
    assert all(np.ptp(leaf.z.real) < 1e-9 for leaf in vert)


def test_foliation_avoids_zeros():
    leaves = trace_foliation(Z, (-1.0, 1.0, -1.0, 1.0), 0.0, seeds=5)
    assert all(np.min(np.abs(leaf.z)) > 1e-4 for leaf in leaves)


def test_leaf_exports():
    box = (-1.0, 1.0, -1.0, 1.0)
    leaves = trace_foliation(ONE, box, 0.0, seeds=3)
    svg = leaves_svg(leaves, box, zeros=[0j])
    assert svg.startswith("<svg") and svg.count("<polyline") == len(leaves) and "<circle" in svg
    buf = io.StringIO()
    leaves_csv(leaves, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "leaf,s,x,y"
    assert len(lines) == 1 + sum(len(l.z) for l in leaves)


def test_ply_round_trip_counts():
    xs = np.linspace(-1, 1, 5)
    grid = xs[None, :] + 1j * xs[:, None]
    mesh = epstein_mesh(Z, grid, standoff=0.1)
    buf = io.StringIO()
    nv = write_ply(mesh, buf, "ball")
    text = buf.getvalue()
    assert read_ply_counts(text) == (nv, len([f for f in mesh.faces if all(mesh.valid.ravel()[k] for k in f)]))
    assert nv == 24
    body = text.split("end_header\n")[1].splitlines()
    assert len(body[0].split()) == 6
    pos = mesh_positions(mesh, "ball")
    assert np.all(np.linalg.norm(pos[mesh.valid.ravel()], axis=1) < 1)
    with pytest.raises(ValueError):
        mesh_positions(mesh, "klein")
