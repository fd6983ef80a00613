"""Iterative dynamic-programming solver for -Lap_p^N u = f, u = g on the boundary.

The scheme iterates the mean-value update

    u(x) <- beta * (mean of u over the circle of radius eps about x)
          + (alpha/2) * (max + min over the same circle)
          + source_coeff * eps^2 * f(x)

at interior nodes (signed distance <= -eps), while band and exterior nodes
are held at a Dirichlet extension of the boundary data.  The extension is,
by default, the second-order Taylor profile g + sd * u_nu + sd^2/2 * u_nunu
along the inward normal, with u_nu traced from the current iterate and
u_nunu supplied by the boundary identity
(p-1)/p u_nunu + (n-1)/p kappa u_nu = -f; it is refreshed every sweep, so
field and extension converge jointly.  A first-order clamp (g at the nearest
boundary point) is available when a monotone update is required.

Circle samples are evaluated by tensor-Lagrange cubic interpolation by
default.  Bilinear sampling is available but carries an O(h^2/eps^2)
consistency floor, which with the default eps = 3h coupling does not vanish
under refinement; see the README notes.

The damped fixed-point iteration u <- (1-omega) u + omega T(u) is optionally
wrapped in heavy-ball momentum (u_{k+1} += mu (u_k - u_{k-1})) with mu set
from a measured contraction estimate; this cuts the O(1/eps^2) sweep count
to O(1/eps) and is bit-reproducible.  Disable it where the plain monotone
iteration is wanted (e.g. discrete comparison experiments).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit, prange

from .errors import ConfigurationError, ParameterError
from .fields import GridField
from .geometry import (BAND, EXTERIOR, INTERIOR, Classification, DomainSpec,
                       Grid, classify_grid)
from .operators import PParams, classical_field_eval, default_grad_floor
from .oracles import dpp_weights

__all__ = ["ProblemSpec", "SolverConfig", "ConvergenceReport", "make_grid",
           "dpp_sweep", "solve", "residual", "policy_solve"]


@dataclass(frozen=True)
class ProblemSpec:
    """Exponent, dimension, constant right-hand side and Dirichlet data.

    ``dirichlet`` is a constant or a callable mapping (N, 2) boundary points
    to values.  ``neumann_target`` is the constant c < 0 an overdetermined
    run expects; it is carried along for the diagnostics and never used by
    the solver itself.
    """

    p: float
    n: int = 2
    rhs: float = 1.0
    dirichlet: float | object = 0.0
    neumann_target: float | None = None

    def __post_init__(self):
        if not (1.0 < self.p < math.inf):
            raise ParameterError(f"solver needs p in (1, inf), got {self.p}")
        if self.n != 2:
            raise ParameterError("the grid solver is 2-D only")

    def params(self) -> PParams:
        return PParams(p=self.p, n=self.n)

    def dirichlet_at(self, pts: np.ndarray) -> np.ndarray:
        if callable(self.dirichlet):
            return np.asarray(self.dirichlet(pts), dtype=float)
        return np.full(len(pts), float(self.dirichlet))

    def meta(self) -> dict:
        return {"p": self.p, "n": self.n, "rhs": self.rhs,
                "dirichlet": (float(self.dirichlet)
                              if not callable(self.dirichlet) else "callable"),
                "neumann_target": self.neumann_target}


@dataclass(frozen=True)
class SolverConfig:
    """Discretization and iteration controls.

    eps defaults to eps_factor * h (the eps-h coupling is the central
    engineering dial: interpolation error must stay below the O(eps^2)
    consistency of the scheme).  omega = None picks 1.0 for p >= 2 and the
    damped 0.5 for p < 2, where the update loses monotonicity.

    ``tolerance`` is the targeted sup-norm distance to the discrete fixed
    point: sweeping stops once the updates, deflated by the measured
    contraction rate, certify that distance.
    """

    eps: float | None = None
    eps_factor: float = 3.0
    directions: int = 32
    omega: float | None = None
    tolerance: float = 1e-9
    max_iterations: int = 200_000
    scheme: str = "dpp"               # "dpp" | "policy"
    interpolation: str = "cubic"      # "cubic" | "bilinear"
    boundary: str = "taylor2"         # "taylor2" | "taylor1" | "clamp"
    momentum: bool = True
    grad_floor: float | None = None

    def __post_init__(self):
        if self.directions < 8:
            raise ParameterError(f"need at least 8 directions, got {self.directions}")
        if self.tolerance <= 0:
            raise ParameterError("tolerance must be positive")
        if self.omega is not None and not (0 < self.omega <= 1):
            raise ParameterError(f"damping must lie in (0, 1], got {self.omega}")
        if self.scheme not in ("dpp", "policy"):
            raise ParameterError(f"unknown scheme {self.scheme!r}")
        if self.interpolation not in ("cubic", "bilinear"):
            raise ParameterError(f"unknown interpolation {self.interpolation!r}")
        if self.boundary not in ("taylor2", "taylor1", "clamp"):
            raise ParameterError(f"unknown boundary mode {self.boundary!r}")

    def effective_eps(self, h: float) -> float:
        eps = self.eps if self.eps is not None else self.eps_factor * h
        if eps < 2 * h:
            raise ParameterError(f"eps = {eps} must be at least 2h = {2 * h}")
        return eps

    def effective_omega(self, p: float) -> float:
        if self.omega is not None:
            return self.omega
        return 1.0 if p >= 2.0 else 0.5


@dataclass
class ConvergenceReport:
    iterations: int
    final_update: float
    converged: bool
    wall_time: float
    sup_residual: float | None = None
    masked_fraction: float | None = None
    scheme: str = "dpp"
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"iterations": self.iterations, "final_update": self.final_update,
                "converged": self.converged, "wall_time": self.wall_time,
                "sup_residual": self.sup_residual,
                "masked_fraction": self.masked_fraction, "scheme": self.scheme,
                **self.extras}


def make_grid(domain: DomainSpec, h: float, config: SolverConfig | None = None) -> Grid:
    """Grid covering the domain with enough margin for all sample stencils."""
    config = config or SolverConfig()
    eps = config.effective_eps(h)
    return Grid.cover(domain, h, margin=eps + 6 * h)


# ---------------------------------------------------------------------------
# direction table and sample plan
# ---------------------------------------------------------------------------

def circle_directions(m: int) -> np.ndarray:
    """m equispaced directions, exactly symmetric under the grid dihedral
    group when 4 | m (quadrants generated by exact 90-degree rotation,
    first octant mirrored), so symmetric problems stay symmetric to rounding.
    """
    if m % 4 != 0:
        th = 2.0 * np.pi * np.arange(m) / m
        return np.column_stack([np.cos(th), np.sin(th)])
    q = m // 4
    cs = np.empty((q, 2))
    for k in range(q // 2 + 1):
        th = 2.0 * np.pi * k / m
        cs[k] = (math.cos(th), math.sin(th))
    for k in range(q // 2 + 1, q):
        cs[k] = (cs[q - k][1], cs[q - k][0])  # mirror across the 45-degree line
    quads = [cs]
    for _ in range(3):
        prev = quads[-1]
        quads.append(np.column_stack([-prev[:, 1], prev[:, 0]]))  # exact 90-deg
    return np.vstack(quads)


@njit(cache=True, parallel=True)
def _dpp_kernel(u, base, fx, fy, nx, alpha, beta, source, out, cubic):
    npts, m = base.shape
    for i in prange(npts):
        acc = 0.0
        vmax = -1e300
        vmin = 1e300
        for s in range(m):
            b = base[i, s]
            tx = fx[i, s]
            ty = fy[i, s]
            if cubic:
                wxm1 = -tx * (tx - 1.0) * (tx - 2.0) / 6.0
                wx0 = (tx + 1.0) * (tx - 1.0) * (tx - 2.0) / 2.0
                wx1 = -(tx + 1.0) * tx * (tx - 2.0) / 2.0
                wx2 = (tx + 1.0) * tx * (tx - 1.0) / 6.0
                wym1 = -ty * (ty - 1.0) * (ty - 2.0) / 6.0
                wy0 = (ty + 1.0) * (ty - 1.0) * (ty - 2.0) / 2.0
                wy1 = -(ty + 1.0) * ty * (ty - 2.0) / 2.0
                wy2 = (ty + 1.0) * ty * (ty - 1.0) / 6.0
                c = b - nx - 1
                v = (u[c] * wxm1 + u[c + 1] * wx0 + u[c + 2] * wx1
                     + u[c + 3] * wx2) * wym1
                c += nx
                v += (u[c] * wxm1 + u[c + 1] * wx0 + u[c + 2] * wx1
                      + u[c + 3] * wx2) * wy0
                c += nx
                v += (u[c] * wxm1 + u[c + 1] * wx0 + u[c + 2] * wx1
                      + u[c + 3] * wx2) * wy1
                c += nx
                v += (u[c] * wxm1 + u[c + 1] * wx0 + u[c + 2] * wx1
                      + u[c + 3] * wx2) * wy2
            else:
                v = (u[b] * (1.0 - tx) * (1.0 - ty) + u[b + 1] * tx * (1.0 - ty)
                     + u[b + nx] * (1.0 - tx) * ty + u[b + nx + 1] * tx * ty)
            acc += v
            if v > vmax:
                vmax = v
            if v < vmin:
                vmin = v
        out[i] = beta * (acc / m) + 0.5 * alpha * (vmax + vmin) + source


@njit(cache=True, parallel=True)
def _jacobi_kernel(u, idx, nx, a11, a22, a12, h2f, omega, out):
    npts = idx.shape[0]
    for k in prange(npts):
        i = idx[k]
        cross = u[i + nx + 1] + u[i - nx - 1] - u[i + nx - 1] - u[i - nx + 1]
        num = (a11[k] * (u[i + 1] + u[i - 1]) + a22[k] * (u[i + nx] + u[i - nx])
               + 0.5 * a12[k] * cross + h2f)
        val = num / (2.0 * (a11[k] + a22[k]))
        out[k] = (1.0 - omega) * u[i] + omega * val


class _SamplePlan:
    """Precomputed gather geometry: one (base, fx, fy) triplet per
    (interior node, circle sample)."""

    def __init__(self, grid: Grid, cls: Classification, eps: float, m: int,
                 interpolation: str):
        self.grid = grid
        self.cls = cls
        self.eps = eps
        self.interp = interpolation
        self.idx_interior = np.flatnonzero(cls.interior_mask.ravel()).astype(np.int64)
        pts = grid.points()[self.idx_interior]
        dirs = circle_directions(m)
        sx = pts[:, 0][:, None] + eps * dirs[:, 0][None, :]
        sy = pts[:, 1][:, None] + eps * dirs[:, 1][None, :]
        lo, _ = grid.bounds()
        gx = (sx - lo[0]) / grid.h
        gy = (sy - lo[1]) / grid.h
        ix = np.floor(gx).astype(np.int64)
        iy = np.floor(gy).astype(np.int64)
        pad = 1 if interpolation == "cubic" else 0
        if (ix.size and (ix.min() < pad or iy.min() < pad
                         or ix.max() > grid.nx - 2 - pad
                         or iy.max() > grid.ny - 2 - pad)):
            raise ConfigurationError(
                "interpolation point outside grid bounding box; enlarge the grid")
        self.base = (iy * grid.nx + ix).astype(np.int64)
        self.fx = gx - ix
        self.fy = gy - iy

    def apply(self, u_flat: np.ndarray, alpha: float, beta: float,
              source: float, out: np.ndarray | None = None) -> np.ndarray:
        if out is None:
            out = np.empty(len(self.idx_interior))
        _dpp_kernel(u_flat, self.base, self.fx, self.fy, self.grid.nx,
                    alpha, beta, source, out, self.interp == "cubic")
        return out


class _Extension:
    """Dirichlet extension of the boundary data onto band/exterior nodes."""

    def __init__(self, grid: Grid, cls: Classification, problem: ProblemSpec,
                 eps: float, mode: str):
        self.idx = cls.near_idx.astype(np.int64)
        self.mode = mode
        sd = cls.sd.ravel()[self.idx]
        self.sd = sd
        self.g = problem.dirichlet_at(cls.near_point)
        self.kappa = cls.near_curvature
        p, n, f = problem.p, problem.n, problem.rhs
        # boundary identity (p-1)/p u_nunu + (n-1)/p kappa u_nu = -f, solved
        # for u_nunu as an affine function of u_nu
        self._beta0 = -p * f / (p - 1.0)
        self._beta1 = -(n - 1.0) * self.kappa / (p - 1.0)
        if mode != "clamp":
            ell = eps + 2 * grid.h
            self.ell = ell
            normal = cls.near_normal
            anchor = cls.near_point
            p1 = anchor - ell * normal
            p2 = anchor - 2.0 * ell * normal
            self._probe1 = _CubicProbe(grid, p1)
            self._probe2 = _CubicProbe(grid, p2)
        if callable(problem.dirichlet) and mode == "taylor2":
            self.mode = "taylor1"  # the boundary identity assumes constant data

    def refresh(self, u_flat: np.ndarray) -> None:
        if self.mode == "clamp":
            u_flat[self.idx] = self.g
            return
        u1 = self._probe1(u_flat)
        u2 = self._probe2(u_flat)
        ell = self.ell
        if self.mode == "taylor2":
            # third-order normal-derivative estimate: the 8 u1 - u2
            # combination cancels the u''' term and the boundary identity
            # supplies u_nunu = beta0 + beta1 u_nu exactly
            a_ = u1 - self.g
            b_ = u2 - self.g
            un = ((8.0 * a_ - b_ - 2.0 * ell * ell * self._beta0)
                  / (2.0 * ell * ell * self._beta1 - 6.0 * ell))
            unn = self._beta0 + self._beta1 * un
            ext = self.g + self.sd * un + 0.5 * self.sd * self.sd * unn
        else:
            un = (3.0 * self.g - 4.0 * u1 + u2) / (2.0 * ell)
            ext = self.g + self.sd * un
        u_flat[self.idx] = ext


class _CubicProbe:
    """Fixed-point tensor-Lagrange interpolation with precomputed weights."""

    def __init__(self, grid: Grid, pts: np.ndarray):
        lo, hi = grid.bounds()
        if np.any(pts < lo + grid.h) or np.any(pts > hi - grid.h):
            raise ConfigurationError(
                "extension probe outside grid bounding box; enlarge the grid")
        gx = (pts[:, 0] - lo[0]) / grid.h
        gy = (pts[:, 1] - lo[1]) / grid.h
        ix = np.floor(gx).astype(np.int64)
        iy = np.floor(gy).astype(np.int64)
        tx, ty = gx - ix, gy - iy

        def lag(t):
            return np.stack([-t * (t - 1) * (t - 2) / 6.0,
                             (t + 1) * (t - 1) * (t - 2) / 2.0,
                             -(t + 1) * t * (t - 2) / 2.0,
                             (t + 1) * t * (t - 1) / 6.0])

        self.wx = lag(tx)
        self.wy = lag(ty)
        self.base = iy * grid.nx + ix - grid.nx - 1
        self.nx = grid.nx

    def __call__(self, u_flat: np.ndarray) -> np.ndarray:
        out = np.zeros(self.base.shape[0])
        for jy in range(4):
            row = np.zeros_like(out)
            off = self.base + jy * self.nx
            for jx in range(4):
                row += u_flat[off + jx] * self.wx[jx]
            out += row * self.wy[jy]
        return out


class _IterationDriver:
    """Damped fixed-point loop with optional heavy-ball acceleration and
    distance-certified stopping.

    ``step`` applies the (already damped) sweep map to the current state
    vector and returns the new vector; ``commit`` writes a state vector back
    into the shared field storage.  The driver measures the plain
    contraction factor, engages the stationary heavy-ball weight
    mu = (1 - sqrt(0.7 delta))^2 for a spectrum reaching 1 - delta, and
    stops only after a certification phase: a burst of plain sweeps whose
    decay rate converts the last update into a fixed-point distance.  The
    certification also re-tunes mu from fresh data, so a contraction
    estimate spoiled by an early transient (e.g. the inflation phase of a
    strongly damped run) heals itself instead of stalling the iteration.
    All decisions are deterministic functions of the update history.
    """

    WARMUP = 160
    CERTIFY_EVERY = 400
    CERTIFY_SWEEPS = 20
    MU_CAP = 0.96      # nonlinear (max/min) switching tolerates only so much kick

    def __init__(self, step, commit, x0: np.ndarray, tolerance: float,
                 momentum: bool):
        self.step = step
        self.commit = commit
        self.cur = x0.copy()
        self.prev = x0.copy()
        self.tol = tolerance
        self.enabled = momentum
        self.mu = 0.0
        self.delta = 1e-3
        self.history: list[float] = []
        self.epoch = 0            # history index where the plain run began
        self.last_certify = 0
        self.cooldown = 0         # sweeps to wait before the next certify
        self.iterations = 0
        self.converged = False
        self._mom_floor = math.inf
        self._backoffs = 0

    @property
    def final_update(self) -> float:
        return self.history[-1] if self.history else math.inf

    def _sweep(self, kick: float) -> float:
        new = self.step(self.cur)
        if kick > 0.0:
            new = new + kick * (self.cur - self.prev)
        upd = float(np.max(np.abs(new - self.cur))) if len(new) else 0.0
        self.prev, self.cur = self.cur, np.array(new, copy=True)
        self.commit(self.cur)
        self.iterations += 1
        self.history.append(upd)
        return upd

    def _tail_rate(self, span: int = 8) -> float:
        h = self.history
        if len(h) < span + 1 or h[-span - 1] <= 0.0:
            return 1.0 - 1e-9
        ratio = max(h[-1] / h[-span - 1], 0.0)
        return min(ratio ** (1.0 / span), 1.0 - 1e-9)

    def _certify(self) -> bool:
        """Plain-sweep burst: measure the local rate, certify the distance,
        retune the acceleration from what was just measured, and schedule
        the next certification from the predicted time to convergence."""
        for _ in range(self.CERTIFY_SWEEPS):
            upd = self._sweep(0.0)
            if upd == 0.0:
                return True
        rate = self._tail_rate()
        distance = self.history[-1] / max(1.0 - rate, 1e-12)
        if rate < 1.0 - 1e-7:
            self.delta = min(1.0 - rate, 0.9)
        if distance < self.tol:
            return True
        ratio = math.log(max(distance / self.tol, 1.5))
        if distance < 20.0 * self.tol and ratio / self.delta <= 600.0:
            # short plain finish lands tightly at the tolerance; a momentum
            # kick here would overshoot by orders of magnitude
            self.mu = 0.0
            self.cooldown = int(min(max(0.8 * ratio / self.delta, 5.0), 500.0))
        else:
            if self.enabled:
                self._engage()
            gap = math.sqrt(0.7 * self.delta) if self.mu > 0.0 else self.delta
            self.cooldown = int(min(max(0.7 * ratio / max(gap, 1e-6), 30.0),
                                    3000.0))
        self.last_certify = self.iterations
        return False

    def _engage(self) -> None:
        self.mu = min((1.0 - math.sqrt(0.7 * self.delta)) ** 2, self.MU_CAP)
        self.prev = self.cur.copy()  # restart the momentum pair
        self._mom_floor = math.inf

    def _back_off(self, upd: float) -> None:
        """The kick destabilized the nonlinear sweep: shrink it and retry."""
        self._backoffs += 1
        if self._backoffs > 12 or self.mu < 0.25:
            self.enabled = False
            self.mu = 0.0
        else:
            self.mu *= 0.7
        self.prev = self.cur.copy()
        self._mom_floor = upd
        self.last_certify = self.iterations
        self.cooldown = 60

    def run(self, max_iterations: int) -> None:
        while self.iterations < max_iterations:
            upd = self._sweep(self.mu)
            if not math.isfinite(upd) or upd > 1e12:
                return
            if self.mu > 0.0:
                self._mom_floor = min(self._mom_floor, upd)
                if upd > 1e3 * self._mom_floor and upd > self.tol:
                    self._back_off(upd)
                    continue
            since_epoch = len(self.history) - self.epoch
            if self.iterations - self.last_certify < self.cooldown:
                continue
            if self.mu == 0.0:
                if self.enabled and since_epoch == self.WARMUP:
                    span = self.WARMUP // 2
                    rate = self._tail_rate(span)
                    dist_est = upd / max(1.0 - rate, 1e-12)
                    if rate < 1.0 and dist_est > 30.0 * self.tol:
                        self.delta = min(max(1.0 - rate, 1e-9), 0.9)
                        self._engage()
                        continue
                due = (since_epoch >= 40
                       and upd < 50.0 * self.tol * max(1.0 - self._tail_rate(30), 1e-4))
            else:
                gate = 50.0 * self.tol * self.delta
                due = (max(self.history[-4:]) < gate
                       or self.iterations - self.last_certify >= self.CERTIFY_EVERY)
            if due and self._certify():
                self.converged = True
                return


def _problem_weights(problem: ProblemSpec):
    w = dpp_weights(problem.p, problem.n)
    return w.alpha, w.beta, w.source_coeff


def dpp_sweep(fld: GridField, problem: ProblemSpec,
              config: SolverConfig) -> GridField:
    """One application of the mean-value update to a classified field.

    Interior nodes are replaced by the weighted circle statistics plus the
    source term; band and exterior nodes pass through unchanged (they hold
    the Dirichlet extension).
    """
    cls = fld.classification
    if cls is None:
        raise ConfigurationError("dpp_sweep needs a classified field")
    eps = config.effective_eps(fld.grid.h)
    alpha, beta, src = _problem_weights(problem)
    plan = _SamplePlan(fld.grid, cls, eps, config.directions,
                       config.interpolation)
    u_flat = fld.values.ravel().copy()
    new_vals = plan.apply(u_flat, alpha, beta, src * eps * eps * problem.rhs)
    out = fld.copy()
    out.values.ravel()[plan.idx_interior] = new_vals
    return out


def _finish_field(grid, cls, u_flat, problem, config, eps) -> GridField:
    vals = u_flat.reshape(grid.ny, grid.nx)
    meta = problem.meta()
    meta.update({"eps": eps, "h": grid.h, "scheme": config.scheme,
                 "interpolation": config.interpolation,
                 "boundary": config.boundary})
    return GridField(grid=grid, values=vals, classification=cls,
                     trusted=cls.inside_mask | (cls.sd <= 0), meta=meta)


def solve(problem: ProblemSpec, domain: DomainSpec, grid: Grid,
          config: SolverConfig | None = None
          ) -> tuple[GridField, ConvergenceReport]:
    """Damped fixed-point iteration of the mean-value sweep from u = 0.

    Stops when the sup-norm update stays below the tolerance over a short
    window (verified by plain sweeps when momentum is active) or when the
    iteration budget is exhausted, in which case the report flags failure
    but the field is still returned.
    """
    config = config or SolverConfig()
    if config.scheme == "policy":
        return policy_solve(problem, domain, grid, config)
    t0 = time.time()
    eps = config.effective_eps(grid.h)
    cls = classify_grid(domain, grid, eps)
    alpha, beta, src = _problem_weights(problem)
    omega = config.effective_omega(problem.p)
    plan = _SamplePlan(grid, cls, eps, config.directions, config.interpolation)
    ext = _Extension(grid, cls, problem, eps, config.boundary)
    source = src * eps * eps * problem.rhs

    u_flat = np.zeros(grid.nx * grid.ny)
    out = np.empty(len(plan.idx_interior))

    def step(cur):
        ext.refresh(u_flat)
        plan.apply(u_flat, alpha, beta, source, out)
        if omega != 1.0:
            out[:] = (1.0 - omega) * cur + omega * out
        return out

    def commit(cur):
        u_flat[plan.idx_interior] = cur

    driver = _IterationDriver(step, commit, u_flat[plan.idx_interior],
                              config.tolerance, config.momentum)
    driver.run(config.max_iterations)
    ext.refresh(u_flat)

    fld = _finish_field(grid, cls, u_flat, problem, config, eps)
    report = ConvergenceReport(iterations=driver.iterations,
                               final_update=driver.final_update,
                               converged=driver.converged,
                               wall_time=time.time() - t0,
                               scheme="dpp",
                               extras={"momentum_mu": driver.mu, "omega": omega,
                                       "eps": eps})
    sup_res, masked = residual(fld, problem, config.grad_floor)
    report.sup_residual = sup_res
    report.masked_fraction = masked
    return fld, report


def residual(fld: GridField, problem: ProblemSpec,
             grad_floor: float | None = None) -> tuple[float, float]:
    """Sup-norm PDE residual |-Lap_p^N u - f| on the safe interior.

    The safe interior shaves two extra cells off the eps-collar so the
    classical stencil never reads extension-only structure; the reported
    masked fraction counts safe-interior nodes suppressed by the gradient
    floor (they concentrate at critical points of u).
    """
    cls = fld.classification
    if cls is None:
        raise ConfigurationError("residual needs a classified field")
    if grad_floor is None:
        grad_floor = default_grad_floor(fld.grid.h)
    vals, valid = classical_field_eval(fld, problem.params(), grad_floor)
    safe = cls.sd <= -(cls.eps + 2 * fld.grid.h)
    candidates = safe.copy()
    candidates[0, :] = candidates[-1, :] = False
    candidates[:, 0] = candidates[:, -1] = False
    n_cand = int(np.count_nonzero(candidates))
    if n_cand == 0:
        return math.nan, math.nan
    usable = candidates & valid
    masked_fraction = 1.0 - np.count_nonzero(usable) / n_cand
    if not np.any(usable):
        return math.nan, masked_fraction
    res = np.abs(-vals.values[usable] - problem.rhs)
    return float(res.max()), float(masked_fraction)


def policy_solve(problem: ProblemSpec, domain: DomainSpec, grid: Grid,
                 config: SolverConfig | None = None
                 ) -> tuple[GridField, ConvergenceReport]:
    """Frozen-direction policy iteration cross-check.

    The outer loop freezes the unit gradient direction q of the current
    iterate (averaged coordinate direction wherever |grad u| sits below the
    gradient floor) and solves the resulting linear uniformly elliptic
    problem -(1/p) Lap u - ((p-2)/p) <D^2u q, q> = f by damped Jacobi on the
    9-point stencil, then re-freezes, until directions and field stop moving.
    """
    config = config or SolverConfig()
    t0 = time.time()
    eps = config.effective_eps(grid.h)
    cls = classify_grid(domain, grid, eps)
    ext = _Extension(grid, cls, problem, eps, config.boundary)
    idx_int = np.flatnonzero(cls.interior_mask.ravel()).astype(np.int64)
    h = grid.h
    p = problem.p
    grad_floor = config.grad_floor or default_grad_floor(h)
    omega_j = 0.8 if config.omega is None else config.omega
    h2f = h * h * problem.rhs

    u_flat = np.zeros(grid.nx * grid.ny)
    out = np.empty(len(idx_int))
    total_it = 0
    converged = False
    upd = math.inf
    fallback = 1.0 / math.sqrt(2.0)
    outer_max = 40
    for outer in range(outer_max):
        vals = u_flat.reshape(grid.ny, grid.nx)
        gx = np.zeros_like(vals)
        gy = np.zeros_like(vals)
        gx[1:-1, 1:-1] = (vals[1:-1, 2:] - vals[1:-1, :-2]) / (2 * h)
        gy[1:-1, 1:-1] = (vals[2:, 1:-1] - vals[:-2, 1:-1]) / (2 * h)
        qx = gx.ravel()[idx_int]
        qy = gy.ravel()[idx_int]
        gn = np.hypot(qx, qy)
        weak = gn < grad_floor
        qx = np.where(weak, fallback, qx / np.where(weak, 1.0, gn))
        qy = np.where(weak, fallback, qy / np.where(weak, 1.0, gn))
        coef = (p - 2.0) / p
        a11 = 1.0 / p + coef * qx * qx
        a22 = 1.0 / p + coef * qy * qy
        a12 = coef * qx * qy

        before = u_flat[idx_int].copy()
        inner_tol = config.tolerance if outer >= 2 else max(config.tolerance, 1e-7)
        inner_budget = max(400, (config.max_iterations - total_it)
                           // (outer_max - outer))

        def step(cur):
            ext.refresh(u_flat)
            _jacobi_kernel(u_flat, idx_int, grid.nx, a11, a22, a12, h2f,
                           omega_j, out)
            return out

        def commit(cur):
            u_flat[idx_int] = cur

        driver = _IterationDriver(step, commit, before, inner_tol,
                                  config.momentum)
        driver.run(inner_budget)
        total_it += driver.iterations
        upd = driver.final_update
        outer_move = float(np.max(np.abs(u_flat[idx_int] - before))) \
            if len(idx_int) else 0.0
        if outer >= 2 and outer_move < 10 * config.tolerance:
            converged = True
            break
        if total_it >= config.max_iterations:
            break
    ext.refresh(u_flat)

    cfg = replace(config, scheme="policy")
    fld = _finish_field(grid, cls, u_flat, problem, cfg, eps)
    report = ConvergenceReport(iterations=total_it, final_update=upd,
                               converged=converged, wall_time=time.time() - t0,
                               scheme="policy", extras={"eps": eps})
    sup_res, masked = residual(fld, problem, config.grad_floor)
    report.sup_residual = sup_res
    report.masked_fraction = masked
    return fld, report
