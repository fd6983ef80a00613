"""Checks that turn solved fields into evidence.

viscosity sub/supersolution probing through the envelopes, the Pucci
differential inequalities, boundary normal-derivative extraction with
constancy scoring, the boundary identity
(p-1)/p u_nunu + (n-1)/p kappa u_nu = -1, corner second-order quantities,
moving-plane comparison of a field with its reflection, and P-function
fields.  Everything is a deterministic, read-only pass over a field:
identical inputs give bitwise-identical reports.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ParameterError
from .fields import GridField
from .geometry import BoundarySample, DomainSpec, Hyperplane, reflect
from .operators import (PParams, SymMatrix, default_grad_floor, envelopes,
                        field_jets, pucci)

__all__ = ["ViscosityReport", "PucciReport", "SymmetryReport",
           "PFunctionField", "CornerReport", "viscosity_check", "pucci_check",
           "neumann_trace", "constancy_score", "boundary_identity",
           "moving_plane", "p_function", "corner_quantities",
           "write_json_report", "write_csv_rows"]


# ---------------------------------------------------------------------------
# report types
# ---------------------------------------------------------------------------

@dataclass
class ViscosityReport:
    worst_sub_violation: float
    worst_super_violation: float
    violating_nodes: int
    checked_nodes: int
    skipped_nodes: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.violating_nodes == 0

    def to_dict(self) -> dict:
        return {"worst_sub_violation": self.worst_sub_violation,
                "worst_super_violation": self.worst_super_violation,
                "violating_nodes": self.violating_nodes,
                "checked_nodes": self.checked_nodes,
                "skipped_nodes": self.skipped_nodes,
                "tolerance": self.tolerance, "passed": self.passed}


@dataclass
class PucciReport:
    worst_upper_violation: float   # of M_plus(X) + K >= 0
    worst_lower_violation: float   # of M_minus(X) - K <= 0
    violating_nodes: int
    checked_nodes: int
    violation_fraction: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.violating_nodes == 0

    def to_dict(self) -> dict:
        return {"worst_upper_violation": self.worst_upper_violation,
                "worst_lower_violation": self.worst_lower_violation,
                "violating_nodes": self.violating_nodes,
                "checked_nodes": self.checked_nodes,
                "violation_fraction": self.violation_fraction,
                "tolerance": self.tolerance, "passed": self.passed}


@dataclass
class SymmetryReport:
    """Boundary Neumann data and its constancy score.

    score = (max - min)/|mean| over the kept samples; per-component means
    expose, e.g., the two distinct Neumann levels of an annulus.
    """

    values: np.ndarray
    samples: list
    score: float
    mean: float
    component_means: dict
    dropped: int
    rows: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"score": self.score, "mean": self.mean,
                "component_means": {str(k): v for k, v in self.component_means.items()},
                "samples": len(self.values), "dropped": self.dropped}


@dataclass
class PFunctionField:
    field: GridField
    variant: str
    score: float
    mean: float
    spread: float

    def to_dict(self) -> dict:
        return {"variant": self.variant, "score": self.score,
                "mean": self.mean, "spread": self.spread}


@dataclass
class CornerReport:
    u_nu: float
    u_nunu: float
    u_nutau: float
    u_tautau: float
    kappa: float
    tangential_identity_residual: float  # u_tautau - (u_ss + kappa u_nu), u_ss = 0

    def u_etaeta(self, a: float, b: float) -> float:
        """Second derivative along eta = a nu + b tau via the decomposition
        a^2 u_nunu + 2ab u_nutau + b^2 u_tautau."""
        return (a * a * self.u_nunu + 2.0 * a * b * self.u_nutau
                + b * b * self.u_tautau)

    def to_dict(self) -> dict:
        return {"u_nu": self.u_nu, "u_nunu": self.u_nunu,
                "u_nutau": self.u_nutau, "u_tautau": self.u_tautau,
                "kappa": self.kappa,
                "tangential_identity_residual": self.tangential_identity_residual}


# ---------------------------------------------------------------------------
# viscosity and Pucci checks
# ---------------------------------------------------------------------------

def _jet_bounds(params: PParams, qx, qy, hxx, hxy, hyy, q_floor):
    """Vectorized (F_lower, F_upper) of jets: the operator value where the
    gradient is meaningful, the q = 0 envelopes elsewhere."""
    n_ = len(qx)
    lo = np.empty(n_)
    hi = np.empty(n_)
    g2 = qx * qx + qy * qy
    strong = g2 > q_floor * q_floor
    tr = hxx + hyy
    # eigenvalues of the 2x2 Hessians, closed form
    mid = 0.5 * tr
    rad = np.hypot(0.5 * (hxx - hyy), hxy)
    lam1, lam2 = mid - rad, mid + rad
    if params.is_infinite:
        heavy_hi, heavy_lo, light = 1.0, 1.0, 0.0
        lo_env = -lam2 - 1.0
        hi_env = -lam1 - 1.0
    else:
        p = params.p
        heavy, light = (p - 1.0) / p, 1.0 / p
        if p >= 2.0:
            lo_env = -heavy * lam2 - light * lam1 - 1.0
            hi_env = -heavy * lam1 - light * lam2 - 1.0
        else:
            lo_env = -heavy * lam1 - light * lam2 - 1.0
            hi_env = -heavy * lam2 - light * lam1 - 1.0
    g2safe = np.where(strong, g2, 1.0)
    anis = (qx * qx * hxx + 2 * qx * qy * hxy + qy * qy * hyy) / g2safe
    f_val = -params.grad_coeff * anis - params.trace_coeff * tr - 1.0
    lo = np.where(strong, f_val, lo_env)
    hi = np.where(strong, f_val, hi_env)
    return lo, hi


def viscosity_check(fld: GridField, params: PParams, tolerance: float | None = None,
                    deltas: tuple = None, contact_tol: float | None = None,
                    q_floor: float | None = None) -> ViscosityReport:
    """Probe the sub/supersolution inequalities with fitted quadratic jets.

    At each checkable node a least-squares quadratic jet is fitted on a
    patch of radius 3h.  Test functions are the jet with Hessian perturbed
    by +delta I (candidate touching from above) and -delta I (from below),
    shifted to match the field at the node.  Whenever the candidate actually
    touches on the patch - its difference with the field attains its minimum
    at the node within the contact tolerance - the corresponding envelope
    inequality is asserted: F_lower(jet) <= tol for touching from above,
    F_upper(jet) >= -tol for touching from below.
    """
    h = fld.grid.h
    if tolerance is None:
        tolerance = 10.0 * h
    if deltas is None:
        deltas = (0.0, h, 4.0 * h)
    if contact_tol is None:
        contact_tol = 2.0 * h ** 3
    if q_floor is None:
        q_floor = default_grad_floor(h)
    nodes, grads, hess, offs, patches = field_jets(fld, radius_cells=3)
    cls = fld.classification
    if cls is not None:
        keep = cls.interior_mask[nodes[:, 0], nodes[:, 1]]
        nodes, grads, hess, patches = nodes[keep], grads[keep], hess[keep], patches[keep]
    total_candidates = (int(np.count_nonzero(cls.interior_mask))
                        if cls is not None else fld.values.size)
    checked = len(nodes)
    if checked == 0:
        return ViscosityReport(0.0, 0.0, 0, 0, total_candidates, tolerance)
    dx = offs[:, 1] * h
    dy = offs[:, 0] * h
    center = int(np.argwhere((offs[:, 0] == 0) & (offs[:, 1] == 0))[0][0])
    u0 = patches[:, center]
    quad = (grads[:, 0][:, None] * dx + grads[:, 1][:, None] * dy
            + 0.5 * hess[:, 0][:, None] * dx * dx
            + hess[:, 1][:, None] * dx * dy
            + 0.5 * hess[:, 2][:, None] * dy * dy)
    rel = patches - u0[:, None]          # field relative to its node value
    r2 = (dx * dx + dy * dy)[None, :]
    worst_sub = np.zeros(checked)
    worst_super = np.zeros(checked)
    for delta in deltas:
        # candidate touching from above: phi - u minimal at the node
        diff_up = quad + 0.5 * delta * r2 - rel
        touching_up = diff_up.min(axis=1) >= -contact_tol
        lo, _ = _jet_bounds(params, grads[:, 0], grads[:, 1],
                            hess[:, 0] + delta, hess[:, 1], hess[:, 2] + delta,
                            q_floor)
        worst_sub = np.maximum(worst_sub, np.where(touching_up, lo, -np.inf))
        # candidate touching from below: u - phi minimal at the node
        diff_dn = rel - (quad - 0.5 * delta * r2)
        touching_dn = diff_dn.min(axis=1) >= -contact_tol
        _, hi = _jet_bounds(params, grads[:, 0], grads[:, 1],
                            hess[:, 0] - delta, hess[:, 1], hess[:, 2] - delta,
                            q_floor)
        worst_super = np.maximum(worst_super, np.where(touching_dn, -hi, -np.inf))
    sub_violation = float(np.max(np.maximum(worst_sub, 0.0), initial=0.0))
    super_violation = float(np.max(np.maximum(worst_super, 0.0), initial=0.0))
    violating = int(np.count_nonzero((worst_sub > tolerance)
                                     | (worst_super > tolerance)))
    return ViscosityReport(worst_sub_violation=sub_violation,
                           worst_super_violation=super_violation,
                           violating_nodes=violating, checked_nodes=checked,
                           skipped_nodes=total_candidates - checked,
                           tolerance=tolerance)


def pucci_check(fld: GridField, params: PParams, K: float = 1.0,
                tolerance: float | None = None) -> PucciReport:
    """Check M_plus(D^2 u) + K >= 0 >= M_minus(D^2 u) - K on fitted Hessians,
    with the ellipticity pair (min, max) of {1/p, (p-1)/p}."""
    h = fld.grid.h
    if tolerance is None:
        tolerance = 10.0 * h
    lam, Lam = params.ellipticity
    if lam <= 0:
        raise ParameterError("pucci_check needs finite p (positive ellipticity)")
    nodes, _, hess, _, _ = field_jets(fld, radius_cells=3)
    cls = fld.classification
    if cls is not None:
        keep = cls.interior_mask[nodes[:, 0], nodes[:, 1]]
        nodes, hess = nodes[keep], hess[keep]
    checked = len(nodes)
    if checked == 0:
        return PucciReport(0.0, 0.0, 0, 0, 0.0, tolerance)
    mid = 0.5 * (hess[:, 0] + hess[:, 2])
    rad = np.hypot(0.5 * (hess[:, 0] - hess[:, 2]), hess[:, 1])
    lam1, lam2 = mid - rad, mid + rad
    pos = np.maximum(lam1, 0.0) + np.maximum(lam2, 0.0)
    neg = np.minimum(lam1, 0.0) + np.minimum(lam2, 0.0)
    m_plus = Lam * pos + lam * neg
    m_minus = lam * pos + Lam * neg
    up_violation = np.maximum(-(m_plus + K), 0.0)
    lo_violation = np.maximum(m_minus - K, 0.0)
    violating = int(np.count_nonzero((up_violation > tolerance)
                                     | (lo_violation > tolerance)))
    return PucciReport(worst_upper_violation=float(up_violation.max(initial=0.0)),
                       worst_lower_violation=float(lo_violation.max(initial=0.0)),
                       violating_nodes=violating, checked_nodes=checked,
                       violation_fraction=violating / checked,
                       tolerance=tolerance)


# ---------------------------------------------------------------------------
# boundary traces
# ---------------------------------------------------------------------------

def _probe_positions(sample: BoundarySample, t: float, ks):
    return np.array([sample.point - k * t * sample.normal for k in ks])


def neumann_trace(fld: GridField, domain: DomainSpec, samples: int | list,
                  problem=None, t: float | None = None) -> SymmetryReport:
    """Outward normal derivative at boundary samples.

    Second-order one-sided difference along -nu with spacing t (default 2h):
    u_nu = (3 g(y) - 4 u(y - t nu) + u(y - 2t nu)) / (2t), with the boundary
    value taken from the Dirichlet data exactly and the field read by
    bilinear interpolation.  Samples whose probes leave the grid are dropped
    and counted.
    """
    if t is None:
        t = 2.0 * fld.grid.h
    probes = domain.boundary_samples(samples) if isinstance(samples, int) else samples
    lo, hi = fld.grid.bounds()
    values = []
    kept = []
    rows = []
    dropped = 0
    for s in probes:
        pts = _probe_positions(s, t, (1, 2))
        if np.any(pts < lo) or np.any(pts > hi):
            dropped += 1
            continue
        g = _dirichlet_value(problem, s.point)
        u1, u2 = fld.sample_bilinear(pts)
        un = (3.0 * g - 4.0 * u1 + u2) / (2.0 * t)
        values.append(un)
        kept.append(s)
        rows.append({"s": s.arclength, "x": s.point[0], "y": s.point[1],
                     "nu_x": s.normal[0], "nu_y": s.normal[1],
                     "kappa": s.curvature, "component": s.component,
                     "u_nu": un})
    values = np.asarray(values)
    score, mean = constancy_score(values) if len(values) >= 8 else (math.nan, math.nan)
    comp_means = {}
    for comp in sorted({s.component for s in kept}):
        comp_means[comp] = float(np.mean([v for v, s in zip(values, kept)
                                          if s.component == comp]))
    return SymmetryReport(values=values, samples=kept, score=score, mean=mean,
                          component_means=comp_means, dropped=dropped, rows=rows)


def _dirichlet_value(problem, point) -> float:
    if problem is None:
        return 0.0
    if callable(problem.dirichlet):
        return float(problem.dirichlet(np.asarray(point)[None, :])[0])
    return float(problem.dirichlet)


def constancy_score(values) -> tuple[float, float]:
    """(max - min)/|mean| and the mean; the quantitative surrogate for
    "the Neumann data is constant"."""
    vals = np.asarray(values, dtype=float)
    if len(vals) < 8:
        raise ParameterError(f"need at least 8 values, got {len(vals)}")
    mean = float(vals.mean())
    spread = float(vals.max() - vals.min())
    if abs(mean) < 1e-12 * max(1.0, spread):
        return math.nan, mean  # near-zero mean: score undefined
    return spread / abs(mean), mean


def boundary_identity(fld: GridField, domain: DomainSpec, params: PParams,
                      samples: int | list, problem=None,
                      t: float | None = None):
    """Residual of (p-1)/p u_nunu + (n-1)/p kappa u_nu + f at boundary samples.

    u_nunu comes from the three-point one-sided second difference along nu,
    u_nu from the trace formula, kappa from the analytic geometry.  On exact
    solutions the identity cancels in closed form on any C^2 boundary.  The
    probes are read by cubic interpolation: the second difference divides by
    t^2 = O(h^2), which would amplify bilinear sampling error to an
    h-independent noise floor.
    """
    if t is None:
        t = 2.0 * fld.grid.h
    rhs = 1.0 if problem is None else problem.rhs
    probes = domain.boundary_samples(samples) if isinstance(samples, int) else samples
    lo, hi = fld.grid.bounds()
    residuals = []
    rows = []
    for s in probes:
        pts = _probe_positions(s, t, (1, 2))
        if np.any(pts < lo) or np.any(pts > hi):
            continue
        g = _dirichlet_value(problem, s.point)
        u1, u2 = fld.sample_cubic(pts)
        un = (3.0 * g - 4.0 * u1 + u2) / (2.0 * t)
        unn = (g - 2.0 * u1 + u2) / (t * t)
        p, n = params.p, params.n
        res = (p - 1.0) / p * unn + (n - 1.0) / p * s.curvature * un + rhs
        residuals.append(res)
        rows.append({"s": s.arclength, "kappa": s.curvature, "u_nu": un,
                     "u_nunu": unn, "residual": res, "component": s.component})
    return np.asarray(residuals), rows


def corner_quantities(fld: GridField, domain: DomainSpec, params: PParams,
                      sample: BoundarySample, problem=None,
                      t: float | None = None) -> CornerReport:
    """Second-order boundary quantities entering the corner decomposition.

    u_nu and u_nunu by one-sided differences along nu, u_tautau by a central
    second difference along the tangent line, u_nutau by a central cross
    difference; the analytic extension of the field is read wherever the
    tangent probes leave the domain, so this is intended for analytically
    sampled fields.  The tangential identity u_tautau = u_ss + kappa u_nu is
    reported as a residual with u_ss = 0 (constant Dirichlet data).
    """
    if t is None:
        t = 2.0 * fld.grid.h
    g = _dirichlet_value(problem, sample.point)
    nu, tau = sample.normal, sample.tangent
    pt = sample.point
    u1, u2 = fld.sample_bilinear(np.array([pt - t * nu, pt - 2 * t * nu]))
    u_nu = (3.0 * g - 4.0 * u1 + u2) / (2.0 * t)
    u_nunu = (g - 2.0 * u1 + u2) / (t * t)
    tp, tm = fld.sample_bilinear(np.array([pt + t * tau, pt - t * tau]))
    u_tautau = (tp - 2.0 * g + tm) / (t * t)
    cpp, cpm, cmp_, cmm = fld.sample_bilinear(np.array([
        pt - t * nu + t * tau, pt - t * nu - t * tau,
        pt - 2 * t * nu + t * tau, pt - 2 * t * nu - t * tau]))
    # d/dtau of the one-sided normal derivative, anchors shifted along tau
    un_p = (3.0 * tp - 4.0 * cpp + cmp_) / (2.0 * t)
    un_m = (3.0 * tm - 4.0 * cpm + cmm) / (2.0 * t)
    u_nutau = (un_p - un_m) / (2.0 * t)
    residual_id = u_tautau - sample.curvature * u_nu
    return CornerReport(u_nu=u_nu, u_nunu=u_nunu, u_nutau=u_nutau,
                        u_tautau=u_tautau, kappa=sample.curvature,
                        tangential_identity_residual=residual_id)


# ---------------------------------------------------------------------------
# moving plane and P-function
# ---------------------------------------------------------------------------

def moving_plane(fld: GridField, domain: DomainSpec, direction,
                 offsets) -> list[dict]:
    """Minimum of w = u - u(reflected) over the reflected cap, per offset.

    The plane sweeps inward from the +direction side; the reflected cap is
    the set of inside nodes on the far side of the plane whose mirror image
    is also inside.  The comparison argument predicts min w >= 0 up to
    discretization whenever the swept portion has not passed the symmetric
    position.
    """
    e = np.asarray(direction, dtype=float)
    nrm = math.hypot(e[0], e[1])
    if nrm == 0:
        raise ParameterError("direction must be nonzero")
    e = e / nrm
    cls = fld.classification
    if cls is None:
        raise ConfigurationError("moving_plane needs a classified field")
    inside = cls.inside_mask
    pts = fld.grid.points()[inside.ravel()]
    vals = fld.values[inside]
    results = []
    for lam in offsets:
        plane = Hyperplane(direction=(e[0], e[1]), offset=float(lam))
        proj = pts @ e
        cap = proj < lam
        if not np.any(cap):
            results.append({"offset": float(lam), "min_w": math.nan,
                            "nodes": 0, "skipped": True})
            continue
        mirrored = reflect(pts[cap], plane)
        ok = domain.sdf(mirrored) < 0
        if not np.any(ok):
            results.append({"offset": float(lam), "min_w": math.nan,
                            "nodes": 0, "skipped": True})
            continue
        w = vals[cap][ok] - fld.sample_bilinear(mirrored[ok])
        results.append({"offset": float(lam), "min_w": float(w.min()),
                        "nodes": int(np.count_nonzero(ok)), "skipped": False})
    return results


def p_function(fld: GridField, params: PParams,
               grad_floor: float | None = None) -> PFunctionField:
    """The P-function field of a solved problem.

    p = 2: |grad u|^2 + (4/n) u, Weinberger's function for the equivalent
    problem -Lap u = 2 (the operator halves the Laplacian at p = 2).
    p = inf: |grad u|^2 + 2 u.  In two dimensions the formulas coincide.
    Constant exactly when the overdetermined problem is solvable.
    """
    if params.is_infinite:
        variant, coeff = "infinity", 2.0
    elif params.p == 2.0:
        variant, coeff = "laplace", 4.0 / params.n
    else:
        raise ParameterError(
            f"P-function variants exist for p = 2 and p = inf, got p = {params.p}")
    h = fld.grid.h
    if grad_floor is None:
        grad_floor = 0.0  # P needs no gradient normalization
    v = fld.values
    gx = np.full_like(v, np.nan)
    gy = np.full_like(v, np.nan)
    gx[1:-1, 1:-1] = (v[1:-1, 2:] - v[1:-1, :-2]) / (2 * h)
    gy[1:-1, 1:-1] = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * h)
    pvals = gx * gx + gy * gy + coeff * v
    cls = fld.classification
    if cls is not None:
        usable = cls.interior_mask.copy()
    else:
        usable = np.ones_like(v, dtype=bool)
    usable[0, :] = usable[-1, :] = False
    usable[:, 0] = usable[:, -1] = False
    usable &= np.isfinite(pvals)
    sel = pvals[usable]
    mean = float(sel.mean())
    spread = float(sel.max() - sel.min())
    score = spread / abs(mean) if abs(mean) > 1e-300 else math.inf
    out = GridField(grid=fld.grid, values=np.where(usable, pvals, np.nan),
                    classification=cls, meta={"variant": variant})
    return PFunctionField(field=out, variant=variant, score=score, mean=mean,
                          spread=spread)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def write_json_report(path: str, payload: dict) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    os.replace(tmp, path)


def write_csv_rows(path: str, rows: list[dict]) -> None:
    if not rows:
        return
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    os.replace(tmp, path)
