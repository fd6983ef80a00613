"""Grid-sampled scalar fields and their checkpoint format.

A checkpoint is a JSON header next to a binary sidecar: the sidecar starts
with the magic bytes ``PNSL1`` followed by the row-major float64 values in
little-endian order.  The header records the grid geometry, the problem
parameters, the domain descriptor and the iteration count of the run that
produced the field.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .geometry import Classification, DomainSpec, Grid, domain_from_dict

__all__ = ["GridField", "save_checkpoint", "load_checkpoint", "MAGIC"]

MAGIC = b"PNSL1"


@dataclass
class GridField:
    """Scalar field on a uniform grid with node classification.

    ``values`` has shape (ny, nx), x fastest.  ``trusted`` marks the nodes
    whose values are faithful samples of the underlying function: everything
    for analytically sampled fields, the inside nodes for solved fields
    (band and exterior nodes then carry the Dirichlet extension).
    """

    grid: Grid
    values: np.ndarray
    classification: Classification | None = None
    trusted: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        expect = (self.grid.ny, self.grid.nx)
        if self.values.shape != expect:
            raise ConfigurationError(
                f"field shape {self.values.shape} does not match grid {expect}")
        if self.trusted is None:
            self.trusted = np.ones(expect, dtype=bool)

    @classmethod
    def from_function(cls, grid: Grid, fn, classification=None, meta=None):
        """Sample ``fn(x, y)`` (vectorized) on every grid node."""
        X, Y = grid.meshgrid()
        vals = np.asarray(fn(X, Y), dtype=float)
        return cls(grid=grid, values=vals, classification=classification,
                   meta=dict(meta or {}))

    def copy(self) -> "GridField":
        return GridField(grid=self.grid, values=self.values.copy(),
                         classification=self.classification,
                         trusted=None if self.trusted is None else self.trusted.copy(),
                         meta=dict(self.meta))

    # -- interpolation ------------------------------------------------------

    def _local_coords(self, pts: np.ndarray):
        lo, hi = self.grid.bounds()
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if np.any(pts < lo - 1e-12) or np.any(pts > hi + 1e-12):
            raise ConfigurationError("interpolation point outside grid bounding box")
        gx = (pts[:, 0] - lo[0]) / self.grid.h
        gy = (pts[:, 1] - lo[1]) / self.grid.h
        return gx, gy

    def sample_bilinear(self, pts: np.ndarray) -> np.ndarray:
        """Bilinear interpolation at an (N, 2) array of points."""
        gx, gy = self._local_coords(pts)
        nx, ny = self.grid.nx, self.grid.ny
        ix = np.clip(np.floor(gx).astype(np.int64), 0, nx - 2)
        iy = np.clip(np.floor(gy).astype(np.int64), 0, ny - 2)
        tx, ty = gx - ix, gy - iy
        v = self.values
        return (v[iy, ix] * (1 - tx) * (1 - ty) + v[iy, ix + 1] * tx * (1 - ty)
                + v[iy + 1, ix] * (1 - tx) * ty + v[iy + 1, ix + 1] * tx * ty)

    def sample_cubic(self, pts: np.ndarray) -> np.ndarray:
        """Tensor 4-point Lagrange interpolation (exact on cubics)."""
        gx, gy = self._local_coords(pts)
        nx, ny = self.grid.nx, self.grid.ny
        ix = np.clip(np.floor(gx).astype(np.int64), 1, nx - 3)
        iy = np.clip(np.floor(gy).astype(np.int64), 1, ny - 3)
        tx, ty = gx - ix, gy - iy

        def lag(t):
            return (-t * (t - 1) * (t - 2) / 6.0,
                    (t + 1) * (t - 1) * (t - 2) / 2.0,
                    -(t + 1) * t * (t - 2) / 2.0,
                    (t + 1) * t * (t - 1) / 6.0)

        wx, wy = lag(tx), lag(ty)
        v = self.values
        out = np.zeros_like(gx)
        for jy in range(4):
            row = np.zeros_like(gx)
            for jx in range(4):
                row += v[iy + jy - 1, ix + jx - 1] * wx[jx]
            out += row * wy[jy]
        return out


def save_checkpoint(path: str, fld: GridField, domain: DomainSpec,
                    problem_meta: dict, iterations: int) -> tuple[str, str]:
    """Write ``path``.json header and ``path``.bin sidecar atomically."""
    base = path[:-5] if path.endswith(".json") else path
    header_path, bin_path = base + ".json", base + ".bin"
    header = {
        "magic": MAGIC.decode(),
        "grid": fld.grid.to_dict(),
        "problem": dict(problem_meta),
        "domain": domain.params(),
        "iterations": int(iterations),
        "binary": os.path.basename(bin_path),
        "dtype": "<f8",
        "order": "row-major",
    }
    payload = MAGIC + fld.values.astype("<f8").tobytes(order="C")
    for target, data, mode in ((header_path, json.dumps(header, indent=2), "w"),
                               (bin_path, payload, "wb")):
        tmp = target + ".tmp"
        with open(tmp, mode) as fh:
            fh.write(data)
        os.replace(tmp, target)
    return header_path, bin_path


def load_checkpoint(path: str):
    """Read a checkpoint; returns (GridField, domain, header dict).

    Raises ConfigurationError on a bad magic string or truncated sidecar.
    """
    header_path = path if path.endswith(".json") else path + ".json"
    with open(header_path) as fh:
        header = json.load(fh)
    if header.get("magic") != MAGIC.decode():
        raise ConfigurationError(f"bad checkpoint magic in {header_path}")
    grid = Grid.from_dict(header["grid"])
    bin_path = os.path.join(os.path.dirname(os.path.abspath(header_path)),
                            header["binary"])
    with open(bin_path, "rb") as fh:
        blob = fh.read()
    if blob[:len(MAGIC)] != MAGIC:
        raise ConfigurationError(f"bad magic bytes in {bin_path}")
    data = blob[len(MAGIC):]
    expect = grid.nx * grid.ny * 8
    if len(data) != expect:
        raise ConfigurationError(
            f"checkpoint payload has {len(data)} bytes, expected {expect}")
    values = np.frombuffer(data, dtype="<f8").reshape(grid.ny, grid.nx).copy()
    domain = domain_from_dict(header["domain"])
    fld = GridField(grid=grid, values=values, meta=dict(header.get("problem", {})))
    return fld, domain, header
