"""The normalized p-Laplacian operator core.

Everything here is a pure function of small value types: the operator

    F(q, X) = -((p-2)/p) <X qhat, qhat> - (1/p) trace X - 1,

its lower/upper semicontinuous envelopes at q = 0 (closed forms in the
Hessian eigenvalues, branching at p = 2), the Pucci extremal operators,
small symmetric eigenvalue routines (closed form for 2x2, cyclic Jacobi
for 3x3; deterministic and dependency-free), and a classical central
finite-difference evaluation of the operator on grid fields.

``p = math.inf`` is admitted by the checker paths: F becomes the pure
infinity-Laplacian expression -<X qhat, qhat> - 1 with envelopes
(-lambda_max - 1, -lambda_min - 1).  The solver itself requires finite
p in (1, inf).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGradientError, ParameterError
from .fields import GridField

__all__ = ["PParams", "SymMatrix", "Jet", "sym_eigs", "f_value",
           "envelopes", "pucci", "classical_field_eval", "field_jets",
           "default_grad_floor"]


@dataclass(frozen=True)
class PParams:
    """Exponent and dimension of the operator.

    The solver accepts p in (1, inf); p = inf is allowed here for the
    oracle and checker paths that declare support for it.
    """

    p: float
    n: int = 2

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError(f"dimension must be >= 2, got {self.n}")
        if not (self.p > 1):
            raise ParameterError(f"exponent must satisfy p > 1, got {self.p}")

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.p)

    @property
    def ellipticity(self) -> tuple[float, float]:
        """Pucci bounds (lambda, Lambda) = (min, max) of {1/p, (p-1)/p}."""
        if self.is_infinite:
            return 0.0, 1.0
        a, b = 1.0 / self.p, (self.p - 1.0) / self.p
        return min(a, b), max(a, b)

    @property
    def grad_coeff(self) -> float:
        """Coefficient of the normalized infinity-Laplacian term: (p-2)/p."""
        return 1.0 if self.is_infinite else (self.p - 2.0) / self.p

    @property
    def trace_coeff(self) -> float:
        """Coefficient of the Laplacian term: 1/p."""
        return 0.0 if self.is_infinite else 1.0 / self.p


class SymMatrix:
    """Small (n <= 3) symmetric matrix with reproducible eigenvalues."""

    def __init__(self, entries):
        m = np.asarray(entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in (2, 3):
            raise ParameterError(f"SymMatrix must be 2x2 or 3x3, got {m.shape}")
        self.mat = 0.5 * (m + m.T)  # symmetric by construction

    @property
    def n(self) -> int:
        return self.mat.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return sym_eigs(self)

    def trace(self) -> float:
        return float(np.trace(self.mat))

    def __add__(self, other):
        if isinstance(other, SymMatrix):
            return SymMatrix(self.mat + other.mat)
        return SymMatrix(self.mat + other)

    def __repr__(self):
        return f"SymMatrix({self.mat.tolist()})"


@dataclass(frozen=True)
class Jet:
    """Second-order jet (gradient, Hessian) of a test function."""

    q: np.ndarray
    X: SymMatrix

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        if self.q.shape != (self.X.n,):
            raise ParameterError("gradient and Hessian dimensions disagree")


def _eigs_2x2(m: np.ndarray) -> np.ndarray:
    a, b, c = m[0, 0], m[0, 1], m[1, 1]
    mid = 0.5 * (a + c)
    rad = math.hypot(0.5 * (a - c), b)
    return np.array([mid - rad, mid + rad])


def _eigs_3x3_jacobi(m: np.ndarray, tol=1e-15, max_sweeps=50) -> np.ndarray:
    a = m.copy()
    for _ in range(max_sweeps):
        off = abs(a[0, 1]) + abs(a[0, 2]) + abs(a[1, 2])
        if off <= tol * (1.0 + abs(a[0, 0]) + abs(a[1, 1]) + abs(a[2, 2])):
            break
        for p_, q_ in ((0, 1), (0, 2), (1, 2)):
            if a[p_, q_] == 0.0:
                continue
            phi = 0.5 * math.atan2(2.0 * a[p_, q_], a[q_, q_] - a[p_, p_])
            c, s = math.cos(phi), math.sin(phi)
            rot = np.eye(3)
            rot[p_, p_] = rot[q_, q_] = c
            rot[p_, q_] = s
            rot[q_, p_] = -s
            a = rot.T @ a @ rot
            a = 0.5 * (a + a.T)
    return np.sort(np.diag(a))


def sym_eigs(x: SymMatrix | np.ndarray) -> np.ndarray:
    """Ascending eigenvalues; closed form for 2x2, cyclic Jacobi for 3x3."""
    m = x.mat if isinstance(x, SymMatrix) else np.asarray(x, dtype=float)
    if m.shape == (2, 2):
        return _eigs_2x2(m)
    if m.shape == (3, 3):
        return _eigs_3x3_jacobi(m)
    raise ParameterError(f"sym_eigs supports 2x2 and 3x3 only, got {m.shape}")


def f_value(params: PParams, jet: Jet) -> float:
    """The operator F(q, X) at a jet with nonzero gradient.

    Raises DegenerateGradientError at q = 0; callers must then go through
    the envelopes.
    """
    q = jet.q
    n2 = float(q @ q)
    if n2 == 0.0:
        raise DegenerateGradientError("F is undefined at q = 0; use envelopes")
    x = jet.X.mat
    anis = float(q @ x @ q) / n2
    return -params.grad_coeff * anis - params.trace_coeff * float(np.trace(x)) - 1.0


def envelopes(params: PParams, x: SymMatrix) -> tuple[float, float]:
    """(F_lower, F_upper) at q = 0, in closed form via the eigenvalues.

    For p >= 2 the lower envelope weights the largest eigenvalue with
    (p-1)/p and the rest with 1/p; the branches swap for p in (1, 2], and
    both coincide with -trace/2 - 1 at p = 2.  At p = inf the limits are
    (-lambda_max - 1, -lambda_min - 1).
    """
    lam = sym_eigs(x)
    if params.is_infinite:
        return -lam[-1] - 1.0, -lam[0] - 1.0
    p = params.p
    heavy, light = (p - 1.0) / p, 1.0 / p

    def weighted(extreme_idx):
        rest = np.delete(lam, extreme_idx)
        return -heavy * lam[extreme_idx] - light * float(np.sum(rest)) - 1.0

    if p >= 2.0:
        return weighted(-1), weighted(0)
    return weighted(0), weighted(-1)


def pucci(x: SymMatrix, lam: float, Lam: float) -> tuple[float, float]:
    """(M_minus, M_plus) extremal operators for ellipticity [lam, Lam]."""
    if not (0 < lam <= Lam):
        raise ParameterError(f"need 0 < lambda <= Lambda, got ({lam}, {Lam})")
    e = sym_eigs(x)
    pos = float(np.sum(e[e > 0]))
    neg = float(np.sum(e[e < 0]))
    m_plus = Lam * pos + lam * neg
    m_minus = lam * pos + Lam * neg
    return m_minus, m_plus


def default_grad_floor(h: float) -> float:
    """Gradient floor 0.1*sqrt(h): dominates the O(h) gradient noise of a
    second-order scheme while vanishing under refinement."""
    return 0.1 * math.sqrt(h)


def _central_derivatives(values: np.ndarray, h: float):
    """Gradient and Hessian entries by central differences (interior view)."""
    c = values[1:-1, 1:-1]
    e, w = values[1:-1, 2:], values[1:-1, :-2]
    n_, s_ = values[2:, 1:-1], values[:-2, 1:-1]
    ne, sw = values[2:, 2:], values[:-2, :-2]
    nw, se = values[2:, :-2], values[:-2, 2:]
    ux = (e - w) / (2 * h)
    uy = (n_ - s_) / (2 * h)
    uxx = (e - 2 * c + w) / h**2
    uyy = (n_ - 2 * c + s_) / h**2
    uxy = (ne + sw - nw - se) / (4 * h**2)
    return ux, uy, uxx, uyy, uxy


def classical_field_eval(fld: GridField, params: PParams,
                         grad_floor: float | None = None):
    """Pointwise classical evaluation of the normalized p-Laplacian.

    Central differences per node; where the gradient magnitude exceeds the
    floor the value is (1/p) trace + ((p-2)/p) <H qhat, qhat>; elsewhere the
    node is masked out rather than extrapolated, as is any node whose
    stencil leaves the grid.

    Returns (values GridField, valid mask).
    """
    if params.n != 2:
        raise ParameterError("classical_field_eval is 2-D only")
    h = fld.grid.h
    if grad_floor is None:
        grad_floor = default_grad_floor(h)
    ux, uy, uxx, uyy, uxy = _central_derivatives(fld.values, h)
    g2 = ux * ux + uy * uy
    ok = g2 > grad_floor * grad_floor
    g2safe = np.where(ok, g2, 1.0)
    anis = (ux * ux * uxx + 2 * ux * uy * uxy + uy * uy * uyy) / g2safe
    vals = params.trace_coeff * (uxx + uyy) + params.grad_coeff * anis
    out = np.full_like(fld.values, np.nan)
    valid = np.zeros(fld.values.shape, dtype=bool)
    out[1:-1, 1:-1] = np.where(ok, vals, np.nan)
    valid[1:-1, 1:-1] = ok
    return GridField(grid=fld.grid, values=out,
                     classification=fld.classification, meta=dict(fld.meta)), valid


def field_jets(fld: GridField, radius_cells: int = 3):
    """Least-squares quadratic jets on a disk-shaped patch around each node.

    The patch geometry is identical for every node, so one pseudoinverse
    serves all fits.  Returns (node index array (N, 2) as (j, i), gradients
    (N, 2), Hessian entries (N, 3) as (uxx, uxy, uyy), patch offsets (K, 2),
    patch values (N, K)).  Only nodes whose full patch lies inside the
    trusted region (and the grid) are fitted.
    """
    h = fld.grid.h
    r = radius_cells
    offs = [(dj, di) for dj in range(-r, r + 1) for di in range(-r, r + 1)
            if dj * dj + di * di <= r * r + 1e-9]
    offs = np.array(offs)
    k = len(offs)
    dx = offs[:, 1] * h
    dy = offs[:, 0] * h
    design = np.column_stack([np.ones(k), dx, dy, 0.5 * dx * dx, dx * dy,
                              0.5 * dy * dy])
    pinv = np.linalg.pinv(design)

    trusted = fld.trusted
    ok = np.ones_like(trusted)
    for dj, di in offs:
        shifted = np.zeros_like(trusted)
        ys = slice(max(0, -dj), trusted.shape[0] - max(0, dj))
        xs = slice(max(0, -di), trusted.shape[1] - max(0, di))
        shifted[ys, xs] = trusted[max(0, dj):trusted.shape[0] + min(0, dj),
                                  max(0, di):trusted.shape[1] + min(0, di)]
        ok &= shifted
    ok[:r, :] = ok[-r:, :] = False
    ok[:, :r] = ok[:, -r:] = False
    nodes = np.argwhere(ok)
    if len(nodes) == 0:
        return nodes, np.zeros((0, 2)), np.zeros((0, 3)), offs, np.zeros((0, k))
    patches = np.empty((len(nodes), k))
    for idx, (dj, di) in enumerate(offs):
        patches[:, idx] = fld.values[nodes[:, 0] + dj, nodes[:, 1] + di]
    coeffs = patches @ pinv.T
    grads = coeffs[:, 1:3]
    hess = coeffs[:, 3:6][:, [0, 1, 2]]  # (uxx, uxy, uyy)
    return nodes, grads, hess, offs, patches
