"""Torus geometry: wrapped metric, cube/ball volumes, spatial cell grid.

Positions live on the d-dimensional torus of volume n, represented as
the cube [0, L)^d with L = n**(1/d) and opposite faces identified.
Coordinates are stored in canonical [0, L) form; wrapping happens once,
at construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import ContractViolation

__all__ = [
    "TorusSpec",
    "wrap_points",
    "torus_delta",
    "torus_distance",
    "cube_ball_volume",
    "cube_annulus_volume",
    "CellGrid",
    "build_cell_grid",
]


@dataclass(frozen=True)
class TorusSpec:
    """Cubic torus of dimension d and total volume `volume`."""

    d: int
    volume: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ContractViolation(f"dimension must be a positive integer, got {self.d}")
        if not (self.volume > 0):
            raise ContractViolation(f"volume must be positive, got {self.volume}")

    @property
    def side(self) -> float:
        return float(self.volume) ** (1.0 / self.d)

    @property
    def half_diagonal(self) -> float:
        """Largest possible wrapped distance, (sqrt(d)/2) * L."""
        return 0.5 * math.sqrt(self.d) * self.side


def wrap_points(coords: np.ndarray, spec: TorusSpec) -> np.ndarray:
    """Map coordinates into canonical [0, L)^d form."""
    coords = np.asarray(coords, dtype=float)
    return np.mod(coords, spec.side)


def torus_delta(x: np.ndarray, y: np.ndarray, spec: TorusSpec) -> np.ndarray:
    """Per-axis wrapped absolute difference min(|dx|, L - |dx|)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != spec.d or y.shape[-1] != spec.d:
        raise ContractViolation(
            f"points of dimension {x.shape[-1]}/{y.shape[-1]} on a {spec.d}-dimensional torus"
        )
    delta = np.abs(x - y)
    return np.minimum(delta, spec.side - delta)


def torus_distance(x, y, spec: TorusSpec):
    """Euclidean distance on the torus (wrapped per axis).

    Accepts single points of shape (d,) or batches of shape (..., d);
    broadcasting follows numpy rules.  The result never exceeds
    (sqrt(d)/2) * L.
    """
    delta = torus_delta(x, y, spec)
    return np.sqrt(np.sum(delta * delta, axis=-1))


# ---------------------------------------------------------------------------
# Volume of the unit cube intersected with centred balls / annuli.
# ---------------------------------------------------------------------------

def _cube_ball_volume_2d(r: float) -> float:
    # Area of [-1/2,1/2]^2 intersected with a centred disc of radius r.
    if r <= 0.0:
        return 0.0
    if r <= 0.5:
        return math.pi * r * r
    if r >= math.sqrt(2.0) / 2.0:
        return 1.0
    # Four circular segments stick out past the sides.
    seg = r * r * math.acos(0.5 / r) - 0.5 * math.sqrt(r * r - 0.25)
    return math.pi * r * r - 4.0 * seg


def cube_ball_volume(r: float, d: int) -> float:
    """Vol([-1/2,1/2]^d  intersect  B(0, r)).

    Closed form for d <= 2 and for d = 3 while the face caps stay
    disjoint; elsewhere the volume is reduced to a 1-d integral over one
    coordinate of the (d-1)-dimensional cross-section, evaluated with
    adaptive quadrature (absolute error well below 1e-6).
    """
    if d < 1:
        raise ContractViolation("dimension must be >= 1")
    if r <= 0.0:
        return 0.0
    if r >= math.sqrt(d) / 2.0:
        return 1.0
    if d == 1:
        return min(2.0 * r, 1.0)
    if d == 2:
        return _cube_ball_volume_2d(r)
    if d == 3 and r <= math.sqrt(2.0) / 2.0:
        vol = 4.0 * math.pi * r ** 3 / 3.0
        if r > 0.5:
            h = r - 0.5
            vol -= 6.0 * math.pi * h * h * (3.0 * r - h) / 3.0
        return vol
    hi = min(0.5, r)
    val, _ = quad(
        lambda t: cube_ball_volume(math.sqrt(max(r * r - t * t, 0.0)), d - 1),
        0.0,
        hi,
        epsabs=1e-9,
        epsrel=1e-9,
        limit=200,
    )
    return 2.0 * val


def cube_annulus_volume(b1: float, b2: float, d: int) -> float:
    """Volume of the centred annulus B(0,b2)\\B(0,b1) inside the unit cube.

    Requires 0 <= b1 < b2 <= sqrt(d)/2 (a small floating-point slack is
    tolerated on the upper end).
    """
    if not (0.0 <= b1 < b2):
        raise ContractViolation(f"need 0 <= b1 < b2, got b1={b1}, b2={b2}")
    if b2 > math.sqrt(d) / 2.0 + 1e-12:
        raise ContractViolation(f"b2={b2} exceeds sqrt(d)/2 for d={d}")
    return cube_ball_volume(b2, d) - cube_ball_volume(b1, d)


# ---------------------------------------------------------------------------
# Cell grid for neighbour iteration.
# ---------------------------------------------------------------------------

@dataclass
class CellGrid:
    """Immutable spatial hash of points into equal cubic cells.

    Points are stored once, bucketed by flattened cell index in CSR
    layout (order/starts).  Safe for concurrent reads.
    """

    spec: TorusSpec
    cell_side: float
    cells_per_axis: int
    points: np.ndarray
    order: np.ndarray = field(repr=False)
    starts: np.ndarray = field(repr=False)

    @property
    def n_cells(self) -> int:
        return self.cells_per_axis ** self.spec.d

    def cell_index(self, coords: np.ndarray) -> np.ndarray:
        """Flattened cell index of each point, row-major over axes."""
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        idx = np.floor(coords / self.cell_side).astype(np.int64)
        idx = np.clip(idx, 0, self.cells_per_axis - 1)
        flat = np.zeros(idx.shape[0], dtype=np.int64)
        for k in range(self.spec.d):
            flat = flat * self.cells_per_axis + idx[:, k]
        return flat

    def bucket(self, flat_index: int) -> np.ndarray:
        s, e = self.starts[flat_index], self.starts[flat_index + 1]
        return self.order[s:e]

    def query_ball(self, center: np.ndarray, radius: float) -> np.ndarray:
        """Indices of all stored points within `radius` of `center`.

        Visits only buckets whose cells can intersect the ball, then
        filters exactly by torus distance.
        """
        if len(self.points) == 0:
            return np.empty(0, dtype=np.int64)
        center = np.asarray(center, dtype=float).reshape(self.spec.d)
        cpa = self.cells_per_axis
        reach = int(radius / self.cell_side) + 1
        base = np.floor(center / self.cell_side).astype(np.int64) % cpa
        if 2 * reach + 1 >= cpa:
            offsets_1d = np.arange(cpa)
            base = np.zeros(self.spec.d, dtype=np.int64)
        else:
            offsets_1d = np.arange(-reach, reach + 1)
        grids = np.meshgrid(*([offsets_1d] * self.spec.d), indexing="ij")
        cells = np.stack([g.ravel() for g in grids], axis=1)
        cells = (cells + base) % cpa
        flat = np.zeros(cells.shape[0], dtype=np.int64)
        for k in range(self.spec.d):
            flat = flat * cpa + cells[:, k]
        flat = np.unique(flat)
        cand = np.concatenate([self.bucket(int(c)) for c in flat])
        if cand.size == 0:
            return cand
        dist = torus_distance(self.points[cand], center, self.spec)
        return cand[dist <= radius]


def build_cell_grid(points, spec: TorusSpec, target_cell_side: float) -> CellGrid:
    """Bucket `points` into cells of side L / floor(L / target_cell_side)."""
    if not (0.0 < target_cell_side <= spec.side + 1e-12):
        raise ContractViolation(
            f"target_cell_side must lie in (0, L], got {target_cell_side} with L={spec.side}"
        )
    points = np.asarray(points, dtype=float).reshape(-1, spec.d)
    cpa = max(int(spec.side / target_cell_side), 1)
    cell_side = spec.side / cpa
    grid = CellGrid(
        spec=spec,
        cell_side=cell_side,
        cells_per_axis=cpa,
        points=points,
        order=np.empty(0, dtype=np.int64),
        starts=np.zeros(cpa ** spec.d + 1, dtype=np.int64),
    )
    if len(points) == 0:
        return grid
    flat = grid.cell_index(points)
    order = np.argsort(flat, kind="stable").astype(np.int64)
    counts = np.bincount(flat, minlength=grid.n_cells)
    starts = np.zeros(grid.n_cells + 1, dtype=np.int64)
    np.cumsum(counts, out=starts[1:])
    grid.order = order
    grid.starts = starts
    return grid
