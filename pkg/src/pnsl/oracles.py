"""Closed-form reference solutions and brute-force references.

These are the independent yardsticks everything else is measured against:
the explicit radial solution on a ball and its Hopf constant, the p = inf
annulus solution written in shifted-parabola form (so its P-function
constancy is an exact algebraic identity), the p = 1 ball radius, the
dynamic-programming weights with their Taylor-expansion pedigree, a
direction-sampled envelope reference, and a generic radial two-point
boundary-value shooting solver for annuli.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainRangeError, ParameterError
from .operators import Jet, PParams, SymMatrix, f_value

__all__ = ["RadialSolution", "radial_ball", "hopf_constant",
           "AnnulusInftySolution", "infty_annulus", "p1_ball_radius",
           "DppWeights", "dpp_weights", "envelope_bruteforce",
           "unit_directions", "radial_annulus_profile"]


@dataclass(frozen=True)
class RadialSolution:
    """v(r) = p/(2(p+n-2)) (R^2 - r^2), the radial solution on a ball.

    Satisfies -(p-1)/p v'' - (n-1)/(p r) v' = 1 on (0, R) with v'(0) = 0
    and v(R) = 0.
    """

    p: float
    n: int
    R: float

    def __post_init__(self):
        if not (self.p > 1 and math.isfinite(self.p)):
            raise ParameterError(f"radial solution needs p in (1, inf), got {self.p}")
        if self.n < 2 or self.R <= 0:
            raise ParameterError("radial solution needs n >= 2 and R > 0")

    @property
    def coeff(self) -> float:
        return self.p / (2.0 * (self.p + self.n - 2.0))

    def _check(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or np.any(r > self.R + 1e-12):
            raise DomainRangeError(f"radius outside [0, {self.R}]")
        return r

    def value(self, r):
        r = self._check(r)
        return self.coeff * (self.R**2 - r**2)

    def d1(self, r):
        return -2.0 * self.coeff * self._check(r)

    def d2(self, r):
        r = self._check(r)
        return np.broadcast_to(-2.0 * self.coeff, r.shape).copy() if r.ndim else -2.0 * self.coeff

    def ode_residual(self, r):
        """Residual of -(p-1)/p v'' - (n-1)/(p r) v' - 1; zero on (0, R)."""
        r = self._check(r)
        return (-(self.p - 1) / self.p * self.d2(r)
                - (self.n - 1) / (self.p * r) * self.d1(r) - 1.0)

    def as_xy(self):
        """The solution as a vectorized function of grid coordinates."""
        def fn(x, y):
            return self.coeff * (self.R**2 - (x * x + y * y))
        return fn


def radial_ball(p: float, n: int, R: float, r) -> float | np.ndarray:
    """Value of the explicit radial ball solution at radius r."""
    out = RadialSolution(p=p, n=n, R=R).value(r)
    return float(out) if np.ndim(out) == 0 else out


def hopf_constant(p: float, n: int, R: float) -> float:
    """The boundary-gradient constant a = R p / (p + n - 2).

    Equals |v'(R)| of the radial ball solution: the explicit rate in the
    Hopf boundary-point lemma for this operator.
    """
    if not (p > 1 and math.isfinite(p)):
        raise ParameterError(f"hopf_constant needs p in (1, inf), got {p}")
    if n < 2 or R <= 0:
        raise ParameterError("hopf_constant needs n >= 2 and R > 0")
    return R * p / (p + n - 2.0)


@dataclass(frozen=True)
class AnnulusInftySolution:
    """u(r) = w^2/2 - (r - r0)^2 / 2 on [a, b]: the p = inf annulus solution.

    Shifted-parabola form with r0 = (a+b)/2 and w = (b-a)/2; solves
    -u'' = 1 with u(a) = u(b) = 0 and has Neumann magnitude w on both
    circles, so the overdetermined problem is solvable on an annulus at
    p = inf.  The P-function |u'|^2 + 2u == w^2 exactly.
    """

    a: float
    b: float

    def __post_init__(self):
        if not 0 < self.a < self.b:
            raise ParameterError(f"annulus needs 0 < a < b, got ({self.a}, {self.b})")

    @property
    def r0(self) -> float:
        return 0.5 * (self.a + self.b)

    @property
    def half_gap(self) -> float:
        return 0.5 * (self.b - self.a)

    def _check(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < self.a - 1e-12) or np.any(r > self.b + 1e-12):
            raise DomainRangeError(f"radius outside [{self.a}, {self.b}]")
        return r

    def value(self, r):
        r = self._check(r)
        return 0.5 * self.half_gap**2 - 0.5 * (r - self.r0) ** 2

    def d1(self, r):
        return -(self._check(r) - self.r0)

    def p_function(self, r):
        """|u'|^2 + 2u; identically w^2 by the square cancellation."""
        r = self._check(r)
        return (r - self.r0) ** 2 + (self.half_gap**2 - (r - self.r0) ** 2)

    def neumann_magnitude(self) -> float:
        return self.half_gap

    def as_xy(self, clip: bool = False):
        """The solution as a function of coordinates.

        With ``clip=False`` the parabola in r extends smoothly past the
        annulus (its natural C^2 continuation), which is what grid sampling
        for jet-based checks wants.
        """
        r0, w = self.r0, self.half_gap

        def fn(x, y):
            r = np.hypot(x, y)
            if clip:
                r = np.clip(r, self.a, self.b)
            return 0.5 * w * w - 0.5 * (r - r0) ** 2
        return fn


def infty_annulus(a: float, b: float, r) -> float | np.ndarray:
    """Value of the p = inf annulus solution at radius r."""
    out = AnnulusInftySolution(a=a, b=b).value(r)
    return float(out) if np.ndim(out) == 0 else out


def p1_ball_radius(n: int, c: float) -> float:
    """Ball radius (1-n) c forced by constant Neumann data c < 0 at p = 1.

    Consistent with the p -> 1 limit of solving R p/(p+n-2) = -c for R.
    """
    if n < 2:
        raise ParameterError(f"dimension must be >= 2, got {n}")
    if c >= 0:
        raise ParameterError(f"Neumann constant must be negative, got {c}")
    return (1 - n) * c


@dataclass(frozen=True)
class DppWeights:
    """Weights of the mean-value update S[u] = beta*mean + (alpha/2)(max+min).

    alpha + beta = 1, beta > 0, and alpha >= 0 exactly when p >= 2 (the
    sweep is monotone only then).  ``source_coeff`` multiplies eps^2 * f in
    the fixed-point update.
    """

    alpha: float
    beta: float
    source_coeff: float


def dpp_weights(p: float, n: int) -> DppWeights:
    """Mean-value weights matching the operator to second order.

    Matching the eps^2 Taylor coefficients of the circle mean
    (mean = u + eps^2/(2n) Lap u + O(eps^4)) and the midpoint of the
    extremes ((max+min)/2 = u + eps^2/2 D^2_qhat u + O(eps^3)) against
    (1/p) Lap + (p-2)/p D^2_qhat forces

        alpha = (p-2)/(n+p-2),  beta = n/(n+p-2),

    and then S[u] - u = (eps^2/2) (p/(n+p-2)) (normalized p-Laplacian of u)
    + o(eps^2), so a right-hand side f enters with
    source_coeff = p/(2(n+p-2)).
    """
    if not (p > 1 and math.isfinite(p)):
        raise ParameterError(f"dpp weights need p in (1, inf), got {p}")
    if n < 2:
        raise ParameterError(f"dimension must be >= 2, got {n}")
    denom = n + p - 2.0
    return DppWeights(alpha=(p - 2.0) / denom, beta=n / denom,
                      source_coeff=p / (2.0 * denom))


def unit_directions(m: int, n: int = 2) -> np.ndarray:
    """``m`` well-spread unit directions (equispaced angles in 2-D,
    Fibonacci sphere in 3-D)."""
    if m < 1:
        raise ParameterError("need at least one direction")
    if n == 2:
        th = 2.0 * np.pi * np.arange(m) / m
        return np.column_stack([np.cos(th), np.sin(th)])
    if n == 3:
        k = np.arange(m) + 0.5
        phi = np.arccos(1.0 - 2.0 * k / m)
        golden = np.pi * (1.0 + math.sqrt(5.0))
        th = golden * k
        return np.column_stack([np.sin(phi) * np.cos(th),
                                np.sin(phi) * np.sin(th), np.cos(phi)])
    raise ParameterError(f"directions only for n in (2, 3), got {n}")


def envelope_bruteforce(p: float, x: SymMatrix, m: int,
                        refine: bool = False) -> tuple[float, float]:
    """(inf, sup) of F(a, X) over ``m`` sampled unit directions.

    Converges to the closed-form envelopes at rate O(1/m^2) in 2-D.  With
    ``refine=True`` the sampled extremum is polished by fitting a parabola
    through its two angular neighbors, removing the O(1/m^2) sampling bias
    while staying independent of the closed forms.
    """
    if m < 64:
        raise ParameterError(f"need m >= 64 directions, got {m}")
    params = PParams(p=p, n=x.n)
    dirs = unit_directions(m, x.n)
    vals = np.array([f_value(params, Jet(q=d, X=x)) for d in dirs])
    lo_i, hi_i = int(np.argmin(vals)), int(np.argmax(vals))
    lo, hi = float(vals[lo_i]), float(vals[hi_i])
    if refine and x.n == 2:
        lo = _parabolic_refine(vals, lo_i, minimum=True)
        hi = _parabolic_refine(vals, hi_i, minimum=False)
    return lo, hi


def _parabolic_refine(vals: np.ndarray, i: int, minimum: bool) -> float:
    m = len(vals)
    a, b, c = vals[(i - 1) % m], vals[i], vals[(i + 1) % m]
    denom = a - 2 * b + c
    if denom == 0:
        return float(b)
    extremum = b - (a - c) ** 2 / (8 * denom)
    return float(min(extremum, b) if minimum else max(extremum, b))


def radial_annulus_profile(p: float, n: int, a: float, b: float,
                           rhs: float = 1.0, tol: float = 1e-10,
                           steps: int = 4000):
    """Radial two-point BVP on [a, b] solved by shooting.

    Integrates -(p-1)/p u'' - (n-1)/(p r) u' = rhs from r = a with
    u(a) = 0 and unknown slope, using RK4 plus bisection on the slope until
    |u(b)| < tol.  Returns (u, du) as callables of r (dense cubic-Hermite
    interpolation between the integration nodes).
    """
    if not 0 < a < b:
        raise ParameterError(f"annulus needs 0 < a < b, got ({a}, {b})")
    if not (p > 1 and math.isfinite(p)):
        raise ParameterError(f"shooting needs p in (1, inf), got {p}")
    coef = p / (p - 1.0)

    def rhs_ode(r, u, v):
        # u' = v, v' = -(n-1)/((p-1) r) v - p/(p-1) rhs
        return v, -(n - 1) / ((p - 1.0) * r) * v - coef * rhs

    hstep = (b - a) / steps

    def integrate(slope):
        rs = np.empty(steps + 1)
        us = np.empty(steps + 1)
        vs = np.empty(steps + 1)
        r, u, v = a, 0.0, slope
        rs[0], us[0], vs[0] = r, u, v
        for i in range(steps):
            k1u, k1v = rhs_ode(r, u, v)
            k2u, k2v = rhs_ode(r + hstep / 2, u + hstep / 2 * k1u, v + hstep / 2 * k1v)
            k3u, k3v = rhs_ode(r + hstep / 2, u + hstep / 2 * k2u, v + hstep / 2 * k2v)
            k4u, k4v = rhs_ode(r + hstep, u + hstep * k3u, v + hstep * k3v)
            u += hstep / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
            v += hstep / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
            r = a + (i + 1) * hstep
            rs[i + 1], us[i + 1], vs[i + 1] = r, u, v
        return rs, us, vs

    # u(b) is affine in the initial slope: two integrations bracket the root
    _, us0, _ = integrate(0.0)
    _, us1, _ = integrate(1.0)
    denom = us1[-1] - us0[-1]
    if denom == 0:
        raise ParameterError("shooting failed: end value insensitive to slope")
    slope = -us0[-1] / denom
    lo_s, hi_s = slope - 1.0, slope + 1.0
    for _ in range(200):
        rs, us, vs = integrate(slope)
        if abs(us[-1]) < tol:
            break
        if (us[-1] > 0) == (us1[-1] > us0[-1]):
            hi_s = slope
        else:
            lo_s = slope
        slope = 0.5 * (lo_s + hi_s)

    def u_of_r(r):
        return np.interp(np.asarray(r, dtype=float), rs, us)

    def du_of_r(r):
        return np.interp(np.asarray(r, dtype=float), rs, vs)

    return u_of_r, du_of_r
