import numpy as np
import pytest

from pnsl.errors import CoverageError, ParameterError
from pnsl.geometry import (BAND, EXTERIOR, INTERIOR, Annulus, Disk, Ellipse,
                           Grid, Hyperplane, Stadium, boundary_probe,
                           classify_grid, domain_from_dict, reflect, sdf_eval)

ALL_DOMAINS = [
    Disk(radius=1.0),
    Annulus(inner_radius=1.0, outer_radius=2.0),
    Ellipse(semi_axis_x=1.5, semi_axis_y=1.0),
    Stadium(half_length=0.5, cap_radius=1.0),
]


def test_disk_sdf_values():
    d = Disk(radius=1.0)
    assert sdf_eval(d, (0.0, 0.0)) == -1.0
    assert sdf_eval(d, (1.0, 0.0)) == 0.0
    assert sdf_eval(d, (2.0, 0.0)) == 1.0


def test_annulus_sdf_midpoint():
    a = Annulus(inner_radius=1.0, outer_radius=2.0)
    assert sdf_eval(a, (1.5, 0.0)) == -0.5
    assert sdf_eval(a, (0.5, 0.0)) == 0.5      # hole is exterior
    assert sdf_eval(a, (2.5, 0.0)) == 0.5


def test_invalid_parameters_raise():
    with pytest.raises(ParameterError):
        Disk(radius=-1.0)
    with pytest.raises(ParameterError):
        Annulus(inner_radius=2.0, outer_radius=1.0)
    with pytest.raises(ParameterError):
        Ellipse(semi_axis_x=0.0, semi_axis_y=1.0)
    with pytest.raises(ParameterError):
        Stadium(half_length=-0.5, cap_radius=1.0)


@pytest.mark.parametrize("domain", ALL_DOMAINS, ids=lambda d: d.kind)
def test_ellipse_stadium_projection_accuracy(domain):
    # |sdf| at boundary samples vanishes; iterative projections hit 1e-12
    for s in domain.boundary_samples(64):
        assert abs(float(domain.sdf(s.point))) < 1e-12


@pytest.mark.parametrize("domain", ALL_DOMAINS, ids=lambda d: d.kind)
def test_sdf_gradient_is_unit_on_boundary(domain):
    # finite-difference gradient of the signed distance at boundary samples
    delta = 1e-6
    for s in domain.boundary_samples(32):
        x, y = s.point
        gx = (domain.sdf(np.array([x + delta, y])) - domain.sdf(np.array([x - delta, y]))) / (2 * delta)
        gy = (domain.sdf(np.array([x, y + delta])) - domain.sdf(np.array([x, y - delta]))) / (2 * delta)
        assert abs(np.hypot(gx, gy) - 1.0) < 1e-8


@pytest.mark.parametrize("domain", ALL_DOMAINS, ids=lambda d: d.kind)
def test_normals_unit_and_outward(domain):
    for s in domain.boundary_samples(48):
        assert abs(np.hypot(*s.normal) - 1.0) < 1e-12
        outside = s.point + 1e-6 * s.normal
        inside = s.point - 1e-6 * s.normal
        assert domain.sdf(outside) > 0
        assert domain.sdf(inside) < 0


def test_disk_probe_curvature():
    samples = boundary_probe(Disk(radius=2.0), 4 * 8)
    kappas = [s.curvature for s in samples]
    assert all(k == 0.5 for k in kappas)
    assert max(kappas) - min(kappas) == 0.0
    for s in samples:
        assert abs(np.hypot(*(s.point)) - 2.0) < 1e-12


def test_annulus_inner_curvature_sign():
    samples = boundary_probe(Annulus(inner_radius=1.0, outer_radius=2.0), 64)
    inner = [s for s in samples if s.component == 1]
    outer = [s for s in samples if s.component == 0]
    assert inner and outer
    assert all(s.curvature == -1.0 for s in inner)
    assert all(s.curvature == 0.5 for s in outer)
    # components sampled proportionally to their lengths (1 : 2)
    assert abs(len(outer) / len(samples) - 2.0 / 3.0) < 0.1
    # inner normals point toward the center (out of the domain)
    for s in inner:
        assert float(s.normal @ s.point) < 0


def test_ellipse_curvature_closed_form():
    # kappa(t) = a b / (a^2 sin^2 t + b^2 cos^2 t)^(3/2); at t=0 this is a/b^2
    a, b = 1.5, 1.0
    e = Ellipse(semi_axis_x=a, semi_axis_y=b)
    samples = e.boundary_samples(64)
    k0 = samples[0].curvature  # arclength 0 starts at (a, 0)
    assert np.allclose(samples[0].point, [a, 0.0], atol=1e-12)
    assert abs(k0 - a / b**2) < 1e-12
    kappas = np.array([s.curvature for s in samples])
    assert abs(kappas.max() / kappas.min() - (a / b**2) / (b / a**2)) < 1e-6
    assert abs(kappas.max() / kappas.min() - 3.375) < 1e-6


def test_boundary_samples_ordered_by_arclength():
    for domain in ALL_DOMAINS:
        samples = domain.boundary_samples(32)
        s = [x.arclength for x in samples]
        assert all(s[i] < s[i + 1] for i in range(len(s) - 1))


def test_sample_count_validation():
    with pytest.raises(ParameterError):
        Disk().boundary_samples(4)


def test_stadium_curvature_split():
    st = Stadium(half_length=0.5, cap_radius=1.0)
    kappas = [s.curvature for s in st.boundary_samples(64)]
    assert set(np.round(kappas, 12)) == {0.0, 1.0}


def test_classify_grid_examples():
    d = Disk(radius=1.0)
    grid = Grid(origin=(-1.5, -1.5), h=0.05, nx=61, ny=61)
    cls = classify_grid(d, grid, eps=0.2)
    xs = grid.xs()

    def tag_at(x, y):
        i = int(round((x - grid.origin[0]) / grid.h))
        j = int(round((y - grid.origin[1]) / grid.h))
        assert abs(xs[i] - x) < 1e-12
        return cls.tags[j, i]

    assert tag_at(0.0, 0.0) == INTERIOR
    assert tag_at(0.95, 0.0) == BAND       # sd = -0.05 > -0.2
    assert tag_at(1.05, 0.0) == EXTERIOR
    # partition
    assert np.all((cls.tags == INTERIOR) | (cls.tags == BAND)
                  | (cls.tags == EXTERIOR))
    # band nodes carry nearest boundary points
    band_flat = np.flatnonzero(cls.band_mask.ravel())
    assert set(band_flat).issubset(set(cls.near_idx))
    sel = np.isin(cls.near_idx, band_flat)
    assert np.all(np.abs(d.sdf(cls.near_point[sel])) < 1e-12)


def test_classify_grid_requires_coverage_and_eps():
    d = Disk(radius=1.0)
    small = Grid(origin=(-0.5, -0.5), h=0.05, nx=21, ny=21)
    with pytest.raises(CoverageError):
        classify_grid(d, small, eps=0.2)
    grid = Grid(origin=(-1.5, -1.5), h=0.2, nx=16, ny=16)
    with pytest.raises(ParameterError):
        classify_grid(d, grid, eps=0.2)  # eps < 2h


def test_reflect_examples():
    plane = Hyperplane(direction=(1.0, 0.0), offset=2.0)
    assert np.allclose(reflect(np.array([3.0, 1.0]), plane), [1.0, 1.0])
    on_plane = np.array([2.0, -4.0])
    assert np.allclose(reflect(on_plane, plane), on_plane)


def test_reflect_involution_and_isometry(rng):
    e = rng.normal(size=2)
    e /= np.hypot(*e)
    plane = Hyperplane(direction=(e[0], e[1]), offset=float(rng.normal()))
    pts = rng.normal(size=(50, 2)) * 3.0
    twice = reflect(reflect(pts, plane), plane)
    assert np.max(np.abs(twice - pts)) < 1e-12
    ref = reflect(pts, plane)
    d_before = np.hypot(*(pts[:25] - pts[25:]).T)
    d_after = np.hypot(*(ref[:25] - ref[25:]).T)
    assert np.max(np.abs(d_before - d_after)) < 1e-14


def test_hyperplane_requires_unit_direction():
    with pytest.raises(ParameterError):
        Hyperplane(direction=(1.0, 1.0), offset=0.0)


def test_domain_roundtrip_through_dict():
    for domain in ALL_DOMAINS:
        rebuilt = domain_from_dict(domain.params())
        assert rebuilt == domain


def test_grid_cover_symmetric():
    grid = Grid.cover(Disk(radius=1.0), h=0.1, margin=0.35)
    assert grid.nx % 2 == 1 and grid.ny % 2 == 1
    xs = grid.xs()
    assert abs(xs[0] + xs[-1]) < 1e-12  # symmetric about the center
    lo, hi = grid.bounds()
    assert lo[0] <= -1.35 - 1e-12 + 0.1 and hi[0] >= 1.35 - 0.1
