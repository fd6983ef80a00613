"""Analytic 2-D domains, uniform grids and hyperplane reflections.

Domains are exact analytic primitives (disk, annulus, ellipse, stadium),
not meshes: signed distance, outward normal and boundary curvature are
available in closed form or through a damped Newton projection, so the
geometric quantities fed to the diagnostics carry no discretization noise.

Conventions
-----------
* signed distance: negative strictly inside, zero on the boundary,
  positive outside;
* normals point out of the domain and have unit length;
* curvature is taken with respect to the outward normal, so a disk of
  radius R has kappa = 1/R on its boundary while the inner circle of an
  annulus has kappa = -1/a.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageError, ParameterError

__all__ = [
    "BoundarySample",
    "Projection",
    "DomainSpec",
    "Disk",
    "Annulus",
    "Ellipse",
    "Stadium",
    "Grid",
    "Classification",
    "Hyperplane",
    "domain_from_dict",
    "sdf_eval",
    "boundary_probe",
    "classify_grid",
    "reflect",
]

INTERIOR, BAND, EXTERIOR = 0, 1, 2


@dataclass(frozen=True)
class BoundarySample:
    """A point on the domain boundary with its local frame."""

    point: np.ndarray        # (2,) position on the boundary
    normal: np.ndarray       # (2,) outward unit normal
    curvature: float         # 1/length, sign w.r.t. outward normal
    arclength: float         # running arclength parameter
    component: int = 0       # boundary component index (annulus has two)

    @property
    def tangent(self) -> np.ndarray:
        """Unit tangent, the outward normal rotated by +90 degrees."""
        return np.array([-self.normal[1], self.normal[0]])


@dataclass(frozen=True)
class Projection:
    """Nearest boundary point data for a batch of query points."""

    point: np.ndarray        # (N, 2) nearest boundary points
    normal: np.ndarray       # (N, 2) outward unit normals there
    curvature: np.ndarray    # (N,) boundary curvature there
    distance: np.ndarray     # (N,) signed distance of the queries


class DomainSpec:
    """Common interface of the analytic domains."""

    kind: str = ""

    def sdf(self, points: np.ndarray) -> np.ndarray:
        """Signed distance for an (..., 2) array of points."""
        raise NotImplementedError

    def project(self, points: np.ndarray) -> Projection:
        """Nearest boundary point, normal and curvature for (N, 2) points."""
        raise NotImplementedError

    def boundary_samples(self, m: int) -> list[BoundarySample]:
        """``m`` samples covering the boundary, ordered by arclength."""
        raise NotImplementedError

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """(lower, upper) corners of the tight axis-aligned bounding box."""
        raise NotImplementedError

    def params(self) -> dict:
        """JSON-serializable descriptor (kind + numeric parameters)."""
        raise NotImplementedError


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != 2:
        raise ParameterError(f"expected (..., 2) points, got shape {pts.shape}")
    return pts


@dataclass(frozen=True)
class Disk(DomainSpec):
    radius: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)
    kind: str = field(default="disk", init=False)

    def __post_init__(self):
        if self.radius <= 0:
            raise ParameterError(f"disk radius must be positive, got {self.radius}")

    def sdf(self, points):
        pts = _as_points(points)
        d = np.hypot(pts[..., 0] - self.center[0], pts[..., 1] - self.center[1])
        return d - self.radius

    def project(self, points):
        pts = np.atleast_2d(_as_points(points))
        rel = pts - np.asarray(self.center)
        r = np.hypot(rel[:, 0], rel[:, 1])
        safe = np.where(r > 0, r, 1.0)
        normal = rel / safe[:, None]
        normal[r == 0] = (1.0, 0.0)  # degenerate center query: fixed choice
        bpt = np.asarray(self.center) + self.radius * normal
        kappa = np.full(len(pts), 1.0 / self.radius)
        return Projection(bpt, normal, kappa, r - self.radius)

    def boundary_samples(self, m):
        _check_sample_count(m)
        theta = 2.0 * np.pi * np.arange(m) / m
        out = []
        for t in theta:
            n = np.array([math.cos(t), math.sin(t)])
            out.append(BoundarySample(
                point=np.asarray(self.center) + self.radius * n,
                normal=n,
                curvature=1.0 / self.radius,
                arclength=self.radius * t,
            ))
        return out

    def bounding_box(self):
        c = np.asarray(self.center)
        r = np.array([self.radius, self.radius])
        return c - r, c + r

    def params(self):
        return {"kind": "disk", "radius": self.radius,
                "center_x": self.center[0], "center_y": self.center[1]}


@dataclass(frozen=True)
class Annulus(DomainSpec):
    inner_radius: float = 1.0
    outer_radius: float = 2.0
    center: tuple[float, float] = (0.0, 0.0)
    kind: str = field(default="annulus", init=False)

    def __post_init__(self):
        if not 0 < self.inner_radius < self.outer_radius:
            raise ParameterError(
                f"annulus needs 0 < inner < outer, got "
                f"({self.inner_radius}, {self.outer_radius})")

    def sdf(self, points):
        pts = _as_points(points)
        r = np.hypot(pts[..., 0] - self.center[0], pts[..., 1] - self.center[1])
        return np.maximum(r - self.outer_radius, self.inner_radius - r)

    def project(self, points):
        pts = np.atleast_2d(_as_points(points))
        rel = pts - np.asarray(self.center)
        r = np.hypot(rel[:, 0], rel[:, 1])
        safe = np.where(r > 0, r, 1.0)
        rhat = rel / safe[:, None]
        rhat[r == 0] = (1.0, 0.0)
        mid = 0.5 * (self.inner_radius + self.outer_radius)
        outer = r >= mid
        radius = np.where(outer, self.outer_radius, self.inner_radius)
        bpt = np.asarray(self.center) + radius[:, None] * rhat
        sign = np.where(outer, 1.0, -1.0)
        normal = sign[:, None] * rhat
        kappa = sign / radius
        sd = np.maximum(r - self.outer_radius, self.inner_radius - r)
        return Projection(bpt, normal, kappa, sd)

    def boundary_samples(self, m):
        _check_sample_count(m)
        # components sampled proportionally to their lengths
        a, b = self.inner_radius, self.outer_radius
        m_outer = max(4, int(round(m * b / (a + b))))
        m_inner = max(4, m - m_outer)
        out = []
        s0 = 0.0
        for t in 2.0 * np.pi * np.arange(m_outer) / m_outer:
            rhat = np.array([math.cos(t), math.sin(t)])
            out.append(BoundarySample(
                point=np.asarray(self.center) + b * rhat, normal=rhat,
                curvature=1.0 / b, arclength=s0 + b * t, component=0))
        s0 = 2.0 * np.pi * b
        for t in 2.0 * np.pi * np.arange(m_inner) / m_inner:
            rhat = np.array([math.cos(t), math.sin(t)])
            out.append(BoundarySample(
                point=np.asarray(self.center) + a * rhat, normal=-rhat,
                curvature=-1.0 / a, arclength=s0 + a * t, component=1))
        return out

    def bounding_box(self):
        c = np.asarray(self.center)
        r = np.array([self.outer_radius, self.outer_radius])
        return c - r, c + r

    def params(self):
        return {"kind": "annulus", "inner_radius": self.inner_radius,
                "outer_radius": self.outer_radius,
                "center_x": self.center[0], "center_y": self.center[1]}


@dataclass(frozen=True)
class Ellipse(DomainSpec):
    semi_axis_x: float = 1.5
    semi_axis_y: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)
    kind: str = field(default="ellipse", init=False)

    _NEWTON_TOL = 1e-13
    _NEWTON_MAX = 50

    def __post_init__(self):
        if self.semi_axis_x <= 0 or self.semi_axis_y <= 0:
            raise ParameterError("ellipse semi-axes must be positive")

    def _project_theta(self, px, py):
        """Parameter of the nearest boundary point, first-quadrant fold.

        Damped Newton on g(t) = (a^2-b^2) sin t cos t - a px sin t + b py cos t,
        the stationarity condition of the squared distance. g(0) >= 0 and
        g(pi/2) <= 0 for folded coordinates, so a bisection bracket backs up
        the Newton step whenever it would leave [0, pi/2].
        """
        a, b = self.semi_axis_x, self.semi_axis_y
        qx, qy = np.abs(px), np.abs(py)
        lo = np.zeros_like(qx)
        hi = np.full_like(qx, 0.5 * np.pi)
        t = np.arctan2(a * qy, b * qx)
        for _ in range(self._NEWTON_MAX):
            st, ct = np.sin(t), np.cos(t)
            g = (a * a - b * b) * st * ct - a * qx * st + b * qy * ct
            dg = (a * a - b * b) * (ct * ct - st * st) - a * qx * ct - b * qy * st
            lo = np.where(g > 0, t, lo)
            hi = np.where(g < 0, t, hi)
            step = np.where(dg != 0, g / np.where(dg != 0, dg, 1.0), 0.0)
            tn = t - step
            bad = (tn < lo) | (tn > hi) | (dg == 0)
            tn = np.where(bad, 0.5 * (lo + hi), tn)
            if np.max(np.abs(tn - t)) < self._NEWTON_TOL:
                t = tn
                break
            t = tn
        return t

    def sdf(self, points):
        pts = _as_points(points)
        flat = np.atleast_2d(pts.reshape(-1, 2))
        proj = self.project(flat)
        return proj.distance.reshape(pts.shape[:-1])

    def project(self, points):
        pts = np.atleast_2d(_as_points(points))
        a, b = self.semi_axis_x, self.semi_axis_y
        rel = pts - np.asarray(self.center)
        t = self._project_theta(rel[:, 0], rel[:, 1])
        bx = a * np.cos(t) * np.sign(np.where(rel[:, 0] == 0, 1.0, rel[:, 0]))
        by = b * np.sin(t) * np.sign(np.where(rel[:, 1] == 0, 1.0, rel[:, 1]))
        bpt = np.column_stack([bx, by])
        nrm = np.column_stack([bx / a**2, by / b**2])
        nrm /= np.hypot(nrm[:, 0], nrm[:, 1])[:, None]
        st, ct = np.sin(t), np.cos(t)
        kappa = a * b / (a * a * st * st + b * b * ct * ct) ** 1.5
        dist = np.hypot(rel[:, 0] - bx, rel[:, 1] - by)
        inside = (rel[:, 0] / a) ** 2 + (rel[:, 1] / b) ** 2 < 1.0
        sd = np.where(inside, -dist, dist)
        return Projection(bpt + np.asarray(self.center), nrm, kappa, sd)

    def _arclength_table(self, n=32768):
        t = np.linspace(0.0, 2.0 * np.pi, n + 1)
        a, b = self.semi_axis_x, self.semi_axis_y
        speed = np.sqrt(a * a * np.sin(t) ** 2 + b * b * np.cos(t) ** 2)
        s = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(t))])
        return t, s

    def boundary_samples(self, m):
        _check_sample_count(m)
        t_tab, s_tab = self._arclength_table()
        total = s_tab[-1]
        targets = total * np.arange(m) / m
        ts = np.interp(targets, s_tab, t_tab)
        a, b = self.semi_axis_x, self.semi_axis_y
        out = []
        for s, t in zip(targets, ts):
            ct, st = math.cos(t), math.sin(t)
            pt = np.asarray(self.center) + np.array([a * ct, b * st])
            n = np.array([ct / a, st / b])
            n /= math.hypot(n[0], n[1])
            kappa = a * b / (a * a * st * st + b * b * ct * ct) ** 1.5
            out.append(BoundarySample(point=pt, normal=n, curvature=kappa,
                                      arclength=s))
        return out

    def bounding_box(self):
        c = np.asarray(self.center)
        r = np.array([self.semi_axis_x, self.semi_axis_y])
        return c - r, c + r

    def params(self):
        return {"kind": "ellipse", "semi_axis_x": self.semi_axis_x,
                "semi_axis_y": self.semi_axis_y,
                "center_x": self.center[0], "center_y": self.center[1]}


@dataclass(frozen=True)
class Stadium(DomainSpec):
    """Convex hull of two disks: a rectangle capped by two semicircles.

    The straight edges have half-length ``half_length`` and the caps have
    radius ``cap_radius``; the signed distance is exact (offset of the core
    segment), so no iterative projection is needed.
    """

    half_length: float = 0.5
    cap_radius: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)
    kind: str = field(default="stadium", init=False)

    def __post_init__(self):
        if self.half_length <= 0 or self.cap_radius <= 0:
            raise ParameterError("stadium parameters must be positive")

    def sdf(self, points):
        pts = _as_points(points)
        qx = np.abs(pts[..., 0] - self.center[0])
        qy = pts[..., 1] - self.center[1]
        dx = np.maximum(qx - self.half_length, 0.0)
        return np.hypot(dx, qy) - self.cap_radius

    def project(self, points):
        pts = np.atleast_2d(_as_points(points))
        rel = pts - np.asarray(self.center)
        cx = np.clip(rel[:, 0], -self.half_length, self.half_length)
        dx = rel[:, 0] - cx
        dy = rel[:, 1]
        d = np.hypot(dx, dy)
        on_axis = d == 0
        safe = np.where(on_axis, 1.0, d)
        nx = np.where(on_axis, 0.0, dx / safe)
        ny = np.where(on_axis, 1.0, dy / safe)  # axis queries resolve upward
        bpt = np.column_stack([cx + self.cap_radius * nx,
                               self.cap_radius * ny])
        on_cap = np.abs(cx) >= self.half_length - 1e-14
        kappa = np.where(on_cap & ~on_axis, 1.0 / self.cap_radius, 0.0)
        normal = np.column_stack([nx, ny])
        return Projection(bpt + np.asarray(self.center), normal, kappa,
                          d - self.cap_radius)

    def boundary_samples(self, m):
        _check_sample_count(m)
        L, r = self.half_length, self.cap_radius
        per = 4.0 * L + 2.0 * np.pi * r
        out = []
        for s in per * np.arange(m) / m:
            # arclength starts at (L, -r), runs counterclockwise
            if s < np.pi * r:                       # right cap
                t = -0.5 * np.pi + s / r
                n = np.array([math.cos(t), math.sin(t)])
                pt = np.array([L, 0.0]) + r * n
                kappa = 1.0 / r
            elif s < np.pi * r + 2 * L:             # top edge
                pt = np.array([L - (s - np.pi * r), r])
                n = np.array([0.0, 1.0])
                kappa = 0.0
            elif s < 2 * np.pi * r + 2 * L:         # left cap
                t = 0.5 * np.pi + (s - np.pi * r - 2 * L) / r
                n = np.array([math.cos(t), math.sin(t)])
                pt = np.array([-L, 0.0]) + r * n
                kappa = 1.0 / r
            else:                                    # bottom edge
                pt = np.array([-L + (s - 2 * np.pi * r - 2 * L), -r])
                n = np.array([0.0, -1.0])
                kappa = 0.0
            out.append(BoundarySample(point=pt + np.asarray(self.center),
                                      normal=n, curvature=kappa, arclength=s))
        return out

    def bounding_box(self):
        c = np.asarray(self.center)
        r = np.array([self.half_length + self.cap_radius, self.cap_radius])
        return c - r, c + r

    def params(self):
        return {"kind": "stadium", "half_length": self.half_length,
                "cap_radius": self.cap_radius,
                "center_x": self.center[0], "center_y": self.center[1]}


_DOMAIN_KINDS = {"disk": Disk, "annulus": Annulus, "ellipse": Ellipse,
                 "stadium": Stadium}


def domain_from_dict(desc: dict) -> DomainSpec:
    """Build a domain from its ``params()`` descriptor."""
    desc = dict(desc)
    kind = desc.pop("kind", None)
    if kind not in _DOMAIN_KINDS:
        raise ParameterError(f"unknown domain kind {kind!r}")
    cx = desc.pop("center_x", 0.0)
    cy = desc.pop("center_y", 0.0)
    return _DOMAIN_KINDS[kind](center=(cx, cy), **desc)


def _check_sample_count(m):
    if m < 8:
        raise ParameterError(f"need at least 8 boundary samples, got {m}")


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Uniform grid; node (i, j) sits at origin + (i*h, j*h).

    Fields are stored row-major with x fastest, i.e. ``values[j, i]``.
    """

    origin: tuple[float, float]
    h: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.h <= 0 or self.nx < 2 or self.ny < 2:
            raise ParameterError("grid needs h > 0 and at least 2x2 nodes")

    @classmethod
    def cover(cls, domain: DomainSpec, h: float, margin: float) -> "Grid":
        """Grid covering ``domain`` with at least ``margin`` of padding.

        Centered on the domain center with odd node counts, so symmetric
        domains land on a symmetric node set.
        """
        lo, hi = domain.bounding_box()
        c = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo) + margin
        kx = int(np.ceil(half[0] / h))
        ky = int(np.ceil(half[1] / h))
        return cls(origin=(c[0] - kx * h, c[1] - ky * h), h=h,
                   nx=2 * kx + 1, ny=2 * ky + 1)

    def xs(self) -> np.ndarray:
        return self.origin[0] + self.h * np.arange(self.nx)

    def ys(self) -> np.ndarray:
        return self.origin[1] + self.h * np.arange(self.ny)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xs(), self.ys(), indexing="xy")

    def points(self) -> np.ndarray:
        """All node positions as an (ny*nx, 2) array in row-major order."""
        X, Y = self.meshgrid()
        return np.column_stack([X.ravel(), Y.ravel()])

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.asarray(self.origin)
        return lo, lo + self.h * np.array([self.nx - 1, self.ny - 1])

    def to_dict(self) -> dict:
        return {"origin_x": self.origin[0], "origin_y": self.origin[1],
                "h": self.h, "nx": self.nx, "ny": self.ny}

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        return cls(origin=(d["origin_x"], d["origin_y"]), h=d["h"],
                   nx=int(d["nx"]), ny=int(d["ny"]))


@dataclass(frozen=True)
class Classification:
    """Node tags plus nearest-boundary bookkeeping for the non-interior nodes.

    ``tags`` is an (ny, nx) uint8 array with INTERIOR / BAND / EXTERIOR.
    ``sd`` caches the signed distance of every node.  For every band and
    near-boundary exterior node, ``near_idx`` lists the flat node index and
    ``near_point`` / ``near_normal`` / ``near_curvature`` the projection data.
    """

    tags: np.ndarray
    sd: np.ndarray
    eps: float
    near_idx: np.ndarray
    near_point: np.ndarray
    near_normal: np.ndarray
    near_curvature: np.ndarray

    @property
    def interior_mask(self):
        return self.tags == INTERIOR

    @property
    def band_mask(self):
        return self.tags == BAND

    @property
    def exterior_mask(self):
        return self.tags == EXTERIOR

    @property
    def inside_mask(self):
        return self.sd < 0


def classify_grid(domain: DomainSpec, grid: Grid, eps: float,
                  data_reach: float | None = None) -> Classification:
    """Tag nodes interior (sd <= -eps), band (-eps < sd < 0), exterior.

    ``data_reach`` controls how far outside the boundary projection data is
    recorded (defaults to eps + 3h, which covers every stencil the solver
    reads); band nodes always carry their nearest boundary point.
    """
    if eps < 2 * grid.h:
        raise ParameterError(f"eps = {eps} must be at least 2h = {2 * grid.h}")
    lo, hi = grid.bounds()
    dlo, dhi = domain.bounding_box()
    if np.any(dlo < lo) or np.any(dhi > hi):
        raise CoverageError("grid bounding box does not cover the domain")
    pts = grid.points()
    sd = domain.sdf(pts).reshape(grid.ny, grid.nx)
    tags = np.full((grid.ny, grid.nx), EXTERIOR, dtype=np.uint8)
    tags[sd < 0] = BAND
    tags[sd <= -eps] = INTERIOR
    reach = eps + 3 * grid.h if data_reach is None else data_reach
    near = (sd.ravel() > -eps) & (sd.ravel() <= reach)
    near_idx = np.flatnonzero(near)
    proj = domain.project(pts[near_idx])
    return Classification(tags=tags, sd=sd, eps=eps, near_idx=near_idx,
                          near_point=proj.point, near_normal=proj.normal,
                          near_curvature=proj.curvature)


# ---------------------------------------------------------------------------
# hyperplane reflection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Hyperplane:
    """The line {x : <x, direction> = offset} with unit normal direction."""

    direction: tuple[float, float]
    offset: float

    def __post_init__(self):
        n = math.hypot(*self.direction)
        if abs(n - 1.0) > 1e-12:
            raise ParameterError(f"hyperplane direction must be unit, |e| = {n}")


def reflect(points: np.ndarray, plane: Hyperplane) -> np.ndarray:
    """Mirror points across the hyperplane; involution, fixes the plane."""
    pts = _as_points(points)
    e = np.asarray(plane.direction)
    t = pts @ e - plane.offset
    return pts - 2.0 * t[..., None] * e


# module-level conveniences matching the operation names used elsewhere

def sdf_eval(domain: DomainSpec, x) -> float | np.ndarray:
    """Signed distance of a single point or an array of points."""
    out = domain.sdf(np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def boundary_probe(domain: DomainSpec, m: int) -> list[BoundarySample]:
    """``m`` boundary samples with outward normals and curvatures."""
    return domain.boundary_samples(m)
