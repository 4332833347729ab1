import math

import numpy as np
import pytest

from oracles import slab_chord
from tvoed.errors import InvalidArgument
from tvoed.grid import build_grid
from tvoed.projector import (
    ConeSpace, DesignParameter2D, DesignParameter3D, ParallelSpace, assemble, assemble_cone,
    assemble_parallel, cone_rays, enumerate_designs, parallel_rays, ray_count,
)
from tvoed.raytrace import trace_ray


@pytest.mark.parametrize("w,m", [(0.25, 13), (1.0, 51), (0.5, 26)])
def test_ray_counts(w, m):
    assert ray_count(w, 51) == m
    R = assemble_parallel(build_grid(2, 20), DesignParameter2D(0.3, 0.0, w), 51)
    assert R.shape == (m, 400)


def test_full_width_rows_are_chords():
    g = build_grid(2, 30)
    p = DesignParameter2D(0.37, 0.0, 1.0)
    R = assemble_parallel(g, p, 51)
    origins, dirs = parallel_rays(p, 51)
    chords = [slab_chord(o, d) for o, d in zip(origins, dirs)]
    assert np.allclose(R.sum(axis=1).A1, chords, atol=1e-12)
    assert R.data.min() >= 0


def test_offset_bounds():
    with pytest.raises(InvalidArgument):
        assemble_parallel(build_grid(2, 8), DesignParameter2D(0.0, 0.4, 0.25), 51)
    assemble_parallel(build_grid(2, 8), DesignParameter2D(0.0, 0.375, 0.25), 51)


def test_parallel_reflection_symmetry():
    g = build_grid(2, 24)
    for angle, off in [(0.4, 0.1), (1.9, -0.3), (2.7, 0.0)]:
        a = assemble_parallel(g, DesignParameter2D(angle, off, 0.25), 51).toarray()
        b = assemble_parallel(g, DesignParameter2D(angle + math.pi, -off, 0.25), 51).toarray()
        assert np.allclose(a, b[::-1], atol=1e-12)


def test_cone_counts():
    g = build_grid(3, 8)
    full = DesignParameter3D(0.0, 0.0, None, 0.24, 2.5, 20)
    assert assemble_cone(g, full).shape[0] == 400
    for q in range(4):
        assert assemble_cone(g, DesignParameter3D(0.0, 0.0, q)).shape[0] == 100


def test_cone_quadrants_partition_full_aperture():
    g = build_grid(3, 6)
    full = assemble_cone(g, DesignParameter3D(math.pi / 4, 1.0, None))
    quads = [assemble_cone(g, DesignParameter3D(math.pi / 4, 1.0, q)) for q in range(4)]
    assert math.isclose(full.sum(), sum(Q.sum() for Q in quads), rel_tol=1e-12)


def test_cone_central_ray_through_center():
    g = build_grid(3, 10)
    p = DesignParameter3D(0.3, 2.0)
    src = p.source()
    v = np.array([math.cos(0.3) * math.cos(2.0), math.cos(0.3) * math.sin(2.0), math.sin(0.3)])
    # the central direction from the source hits the cube center
    t = np.dot(np.array([0.5, 0.5, 0.5]) - src, v)
    assert np.allclose(src + t * v, 0.5)
    idx, lens = trace_ray(g, src, v, t_lo=0.0)
    assert abs(lens.sum() - slab_chord(src, v, 0.0)) < 1e-12


def test_cone_rows_are_chords():
    g = build_grid(3, 7)
    p = DesignParameter3D(-math.pi / 4, 4.0, 2)
    src, dirs = cone_rays(p)
    R = assemble_cone(g, p)
    chords = [slab_chord(src, d, 0.0) for d in dirs]
    assert np.allclose(R.sum(axis=1).A1, chords, atol=1e-12)


def test_cone_angle_periodicity():
    g = build_grid(3, 6)
    a = assemble_cone(g, DesignParameter3D(0.2, 0.7))
    b = assemble_cone(g, DesignParameter3D(0.2, 0.7 + 2 * math.pi))
    assert abs(a - b).max() < 1e-12


def test_cone_source_inside_rejected():
    with pytest.raises(InvalidArgument):
        assemble_cone(build_grid(3, 4), DesignParameter3D(0.0, 0.0, None, 0.24, 0.1, 20))


def test_enumerate_3d_default():
    assert len(enumerate_designs(ConeSpace())) == 720


def test_enumerate_2d():
    assert len(enumerate_designs(ParallelSpace(width=0.25, n_angles=7, n_offsets=5))) == 35
    full = enumerate_designs(ParallelSpace(width=1.0, n_angles=9, n_offsets=41))
    assert len(full) == 9 and all(p.offset == 0 for p in full)
    first = enumerate_designs(ParallelSpace(width=0.5, n_angles=2, n_offsets=3))
    assert [p.offset for p in first[:3]] == [-0.25, 0.0, 0.25]


def test_assemble_dispatch():
    with pytest.raises(InvalidArgument):
        assemble(build_grid(2, 4), object())
    with pytest.raises(InvalidArgument):
        assemble_parallel(build_grid(3, 4), DesignParameter2D(0, 0, 1))
