import math

import numpy as np
import pytest

from pnsl.errors import ParameterError
from pnsl.fields import GridField
from pnsl.geometry import Annulus, Disk, Ellipse, classify_grid
from pnsl.oracles import RadialSolution, radial_annulus_profile
from pnsl.solver import (ConvergenceReport, ProblemSpec, SolverConfig,
                         circle_directions, dpp_sweep, make_grid,
                         policy_solve, residual, solve)
from pnsl.diagnostics import neumann_trace

DISK = Disk(radius=1.0)


def interior_error(fld, exact_fn):
    X, Y = fld.grid.meshgrid()
    mask = fld.classification.interior_mask
    return float(np.max(np.abs(fld.values[mask] - exact_fn(X, Y)[mask])))


def test_config_validation():
    with pytest.raises(ParameterError):
        SolverConfig(directions=4)
    with pytest.raises(ParameterError):
        SolverConfig(omega=1.5)
    with pytest.raises(ParameterError):
        SolverConfig(scheme="magic")
    with pytest.raises(ParameterError):
        SolverConfig(eps=0.01).effective_eps(h=0.01)
    with pytest.raises(ParameterError):
        ProblemSpec(p=1.0)


def test_circle_directions_dihedral_symmetry():
    d = circle_directions(32)
    assert d.shape == (32, 2)
    assert np.max(np.abs(np.hypot(d[:, 0], d[:, 1]) - 1.0)) < 1e-15
    # exact 90-degree rotation invariance of the sample set
    rot = np.column_stack([-d[:, 1], d[:, 0]])
    assert np.array_equal(np.sort(rot, axis=0), np.sort(d, axis=0))
    # exact mirror across the 45-degree line
    mir = np.column_stack([d[:, 1], d[:, 0]])
    assert np.array_equal(np.sort(mir, axis=0), np.sort(d, axis=0))


def _classified_zero_field(h=1 / 16, eps_factor=3.0):
    cfg = SolverConfig(eps_factor=eps_factor)
    grid = make_grid(DISK, h, cfg)
    cls = classify_grid(DISK, grid, eps_factor * h)
    fld = GridField(grid=grid, values=np.zeros((grid.ny, grid.nx)),
                    classification=cls)
    return fld, cfg


def test_sweep_fixed_point_of_homogeneous_problem():
    fld, cfg = _classified_zero_field()
    problem = ProblemSpec(p=3.0, rhs=0.0)
    out = dpp_sweep(fld, problem, cfg)
    assert np.array_equal(out.values, fld.values)


def test_sweep_defect_on_radial_oracle_bilinear():
    # spec-pinned setup: eps = 0.06, m = 32, bilinear sampling
    h = 0.02
    cfg = SolverConfig(eps=0.06, directions=32, interpolation="bilinear")
    grid = make_grid(DISK, h, cfg)
    cls = classify_grid(DISK, grid, 0.06)
    sol = RadialSolution(p=2.0, n=2, R=1.0)
    fld = GridField.from_function(grid, sol.as_xy(), classification=cls)
    problem = ProblemSpec(p=2.0)
    out = dpp_sweep(fld, problem, cfg)
    mask = cls.interior_mask
    assert np.max(np.abs(out.values[mask] - fld.values[mask])) <= 1e-3


def test_sweep_monotone_for_p_ge_2(rng):
    fld, _ = _classified_zero_field()
    cfg = SolverConfig(interpolation="bilinear", boundary="clamp")
    problem = ProblemSpec(p=3.0)
    lodata = rng.normal(size=fld.values.shape)
    hidata = lodata + rng.uniform(0.0, 1.0, size=fld.values.shape)
    lo = GridField(grid=fld.grid, values=lodata, classification=fld.classification)
    hi = GridField(grid=fld.grid, values=hidata, classification=fld.classification)
    out_lo = dpp_sweep(lo, problem, cfg)
    out_hi = dpp_sweep(hi, problem, cfg)
    mask = fld.classification.interior_mask
    assert np.all(out_lo.values[mask] <= out_hi.values[mask] + 1e-14)


@pytest.mark.parametrize("p,tol", [(2.0, 0.01), (4.0, 0.015)])
def test_solve_center_value(p, tol, cached_solve):
    fld, rep = cached_solve(ProblemSpec(p=p), DISK, 1 / 64)
    assert rep.converged
    X, Y = fld.grid.meshgrid()
    center = fld.values[np.unravel_index(
        np.argmin(X**2 + Y**2), X.shape)]
    assert abs(center - 0.5) <= tol  # p/(2(p+n-2)) = 0.5 for n=2


def test_solve_annulus_neumann_gap(cached_solve):
    # the two Neumann magnitudes of the annulus differ: overdetermination
    # fails off the ball.  Oracle: radial BVP solved by shooting.
    domain = Annulus(inner_radius=1.0, outer_radius=2.0)
    problem = ProblemSpec(p=2.0)
    fld, rep = cached_solve(problem, domain, 1 / 48)
    assert rep.converged
    trace = neumann_trace(fld, domain, 128, problem=problem)
    inner = abs(trace.component_means[1])
    outer = abs(trace.component_means[0])
    assert abs(inner - outer) > 0.05
    u, du = radial_annulus_profile(2.0, 2, 1.0, 2.0)
    assert abs(inner - abs(du(1.0))) < 0.02
    assert abs(outer - abs(du(2.0))) < 0.02


def test_solve_nonconvergence_flagged():
    cfg = SolverConfig(max_iterations=1)
    grid = make_grid(DISK, 1 / 16, cfg)
    fld, rep = solve(ProblemSpec(p=2.0), DISK, grid, cfg)
    assert not rep.converged
    assert isinstance(rep, ConvergenceReport)
    assert fld.values.shape == (grid.ny, grid.nx)


def test_discrete_comparison(rng):
    # ordered boundary data, identical source: converged solutions ordered.
    # Monotone configuration: first-order clamp, bilinear, no momentum.
    cfg = SolverConfig(interpolation="bilinear", boundary="clamp",
                       momentum=False, tolerance=1e-12, max_iterations=4000)
    grid = make_grid(DISK, 1 / 16, cfg)
    for _ in range(6):
        a0, a1, ph1 = rng.normal(size=3) * 0.3
        b0, b1 = rng.uniform(0.0, 0.5, size=2)
        ph2 = rng.uniform(0, 2 * np.pi)

        def g_low(pts, a0=a0, a1=a1, ph1=ph1):
            th = np.arctan2(pts[:, 1], pts[:, 0])
            return a0 + a1 * np.cos(th + ph1)

        def g_high(pts, b0=b0, b1=b1, ph2=ph2):
            th = np.arctan2(pts[:, 1], pts[:, 0])
            return g_low(pts) + b0 + b1 * (1.0 + np.cos(th + ph2))

        lo_fld, lo_rep = solve(ProblemSpec(p=3.0, dirichlet=g_low), DISK,
                               grid, cfg)
        hi_fld, hi_rep = solve(ProblemSpec(p=3.0, dirichlet=g_high), DISK,
                               grid, cfg)
        assert lo_rep.converged and hi_rep.converged
        mask = lo_fld.classification.inside_mask
        assert np.min(hi_fld.values[mask] - lo_fld.values[mask]) >= -1e-8


def test_positivity_and_discrete_hopf(cached_solve):
    from pnsl.oracles import hopf_constant
    problem = ProblemSpec(p=3.0)
    fld, _ = cached_solve(problem, DISK, 1 / 32)
    mask = fld.classification.interior_mask
    assert np.all(fld.values[mask] > 0)
    # one-sided normal difference at boundary samples
    t = 2 * fld.grid.h
    a = hopf_constant(3.0, 2, 1.0)
    for s in DISK.boundary_samples(32):
        inner_val = fld.sample_bilinear((s.point - t * s.normal)[None, :])[0]
        one_sided = (0.0 - inner_val) / t
        assert one_sided <= -0.5 * a


def test_dihedral_symmetry_of_solved_field(cached_solve):
    fld, _ = cached_solve(ProblemSpec(p=3.0), DISK, 1 / 32)
    v = fld.values
    assert v.shape[0] == v.shape[1]
    for sym in (np.flipud(v), np.fliplr(v), v.T, np.rot90(v)):
        assert np.max(np.abs(v - sym)) < 1e-12


def test_grid_convergence_order(cached_solve):
    errs = []
    for h in (1 / 16, 1 / 32, 1 / 64):
        sol = RadialSolution(p=3.0, n=2, R=1.0)
        fld, _ = cached_solve(ProblemSpec(p=3.0), DISK, h)
        errs.append(interior_error(fld, sol.as_xy()))
    assert errs[0] > errs[1] > errs[2]
    order = math.log2(errs[1] / errs[2])
    assert order >= 0.8


def test_residual_on_radial_oracle():
    cfg = SolverConfig()
    grid = make_grid(DISK, 1 / 32, cfg)
    cls = classify_grid(DISK, grid, 3 / 32)
    sol = RadialSolution(p=2.0, n=2, R=1.0)
    fld = GridField.from_function(grid, sol.as_xy(), classification=cls)
    sup, masked = residual(fld, ProblemSpec(p=2.0))
    assert sup < 1e-10
    assert masked < 0.05


def test_residual_of_solved_field_small_and_decreasing(cached_solve):
    sups = []
    for h in (1 / 32, 1 / 64):
        fld, rep = cached_solve(ProblemSpec(p=2.0), DISK, h)
        sups.append(rep.sup_residual)
        assert rep.masked_fraction < 0.05
    assert sups[-1] <= 0.05
    assert sups[1] < sups[0] or sups[1] < 1e-6


def test_policy_solve_p2_matches_oracle(cached_solve):
    cfg = SolverConfig(scheme="policy", tolerance=1e-8)
    fld, rep = cached_solve(ProblemSpec(p=2.0), DISK, 1 / 32, cfg)
    sol = RadialSolution(p=2.0, n=2, R=1.0)
    assert interior_error(fld, sol.as_xy()) < 1e-2


def test_policy_solve_agrees_with_dpp_p3(cached_solve):
    fld_d, _ = cached_solve(ProblemSpec(p=3.0), DISK, 1 / 32)
    cfg = SolverConfig(scheme="policy", tolerance=1e-8)
    fld_p, _ = cached_solve(ProblemSpec(p=3.0), DISK, 1 / 32, cfg)
    mask = fld_d.classification.interior_mask
    assert np.max(np.abs(fld_d.values[mask] - fld_p.values[mask])) < 2e-2


def test_policy_solve_agrees_with_dpp_ellipse_p4(cached_solve):
    domain = Ellipse(semi_axis_x=1.5, semi_axis_y=1.0)
    fld_d, _ = cached_solve(ProblemSpec(p=4.0), domain, 1 / 32)
    cfg = SolverConfig(scheme="policy", tolerance=1e-8)
    fld_p, _ = cached_solve(ProblemSpec(p=4.0), domain, 1 / 32, cfg)
    mask = fld_d.classification.interior_mask
    assert np.max(np.abs(fld_d.values[mask] - fld_p.values[mask])) < 3e-2


def test_solve_p_below_two(cached_solve):
    sol = RadialSolution(p=1.5, n=2, R=1.0)
    fld, rep = cached_solve(ProblemSpec(p=1.5), DISK, 1 / 32)
    assert rep.converged
    assert interior_error(fld, sol.as_xy()) < 5e-3
