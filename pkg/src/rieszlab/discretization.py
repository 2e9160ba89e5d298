"""Quadrature grids over bounded domains and the discrete Riesz-kernel
operator |x-y|^{alpha-n}, with the bilinear energy and the L^q quotient.

Grids are cell-centered midpoint rules (positive weights, O(h^2) interior
accuracy).  The kernel matrix is dense up to a configurable node cap and
matrix-free beyond it; the singular / vanishing self-cell is replaced by an
exact cell-average rule so the discrete operator stays consistent:

  n = 1:  mean of |t|^{alpha-1} over a cell  ->  (h/2)^{alpha-1} / alpha
  n = 2:  mean over the equal-area disk (radius r_e = sqrt(|cell|/pi))
          ->  2 r_e^{alpha-2} / alpha
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .analytic import Exponents, ParameterError


class MemoryCapError(RuntimeError):
    """Dense kernel assembly would exceed the configured node cap."""


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ParameterError(f"degenerate interval [{self.a}, {self.b}]")

    n = 1

    @property
    def volume(self) -> float:
        return self.b - self.a

    @property
    def diameter(self) -> float:
        return self.b - self.a

    @property
    def inradius(self) -> float:
        return 0.5 * (self.b - self.a)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        x = pts[:, 0]
        return (x >= self.a) & (x <= self.b)

    def boundary_dist(self, pts: np.ndarray) -> np.ndarray:
        x = pts[:, 0]
        return np.minimum(x - self.a, self.b - x)

    def boundary_samples(self, count: int = 2):
        pts = np.array([[self.a], [self.b]])
        normals = np.array([[-1.0], [1.0]])
        return pts, normals


@dataclass(frozen=True)
class Rectangle:
    a1: float
    b1: float
    a2: float
    b2: float

    def __post_init__(self):
        if not (self.a1 < self.b1 and self.a2 < self.b2):
            raise ParameterError(
                f"degenerate rectangle [{self.a1},{self.b1}]x[{self.a2},{self.b2}]"
            )

    n = 2

    @property
    def volume(self) -> float:
        return (self.b1 - self.a1) * (self.b2 - self.a2)

    @property
    def diameter(self) -> float:
        return math.hypot(self.b1 - self.a1, self.b2 - self.a2)

    @property
    def inradius(self) -> float:
        return 0.5 * min(self.b1 - self.a1, self.b2 - self.a2)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        x, y = pts[:, 0], pts[:, 1]
        return (x >= self.a1) & (x <= self.b1) & (y >= self.a2) & (y <= self.b2)

    def boundary_dist(self, pts: np.ndarray) -> np.ndarray:
        x, y = pts[:, 0], pts[:, 1]
        return np.minimum.reduce([x - self.a1, self.b1 - x, y - self.a2, self.b2 - y])

    def boundary_samples(self, count: int = 32):
        # spread along the four edges, corners excluded (normal undefined there)
        per_edge = max(2, count // 4)
        pts, normals = [], []
        for frac in np.linspace(0.0, 1.0, per_edge + 2)[1:-1]:
            x = self.a1 + frac * (self.b1 - self.a1)
            y = self.a2 + frac * (self.b2 - self.a2)
            pts += [[x, self.a2], [x, self.b2], [self.a1, y], [self.b1, y]]
            normals += [[0.0, -1.0], [0.0, 1.0], [-1.0, 0.0], [1.0, 0.0]]
        return np.array(pts), np.array(normals)


@dataclass(frozen=True)
class Disk:
    cx: float
    cy: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0.0:
            raise ParameterError(f"degenerate disk radius {self.radius}")

    n = 2

    @property
    def center(self) -> np.ndarray:
        return np.array([self.cx, self.cy])

    @property
    def volume(self) -> float:
        return math.pi * self.radius ** 2

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    @property
    def inradius(self) -> float:
        return self.radius

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return np.linalg.norm(pts - self.center, axis=1) <= self.radius

    def boundary_dist(self, pts: np.ndarray) -> np.ndarray:
        return self.radius - np.linalg.norm(pts - self.center, axis=1)

    def boundary_samples(self, count: int = 32):
        angles = np.linspace(0.0, 2.0 * math.pi, count, endpoint=False)
        normals = np.column_stack([np.cos(angles), np.sin(angles)])
        pts = self.center + self.radius * normals
        return pts, normals


DomainSpec = Interval | Rectangle | Disk


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Cell-centered quadrature grid: nodes (m, dim), positive weights (m,),
    scalar mesh size h, and exact per-node distances to the boundary."""

    domain: DomainSpec
    nodes: np.ndarray
    weights: np.ndarray
    h: float
    boundary_dist: np.ndarray
    cell_volume: float

    @property
    def m(self) -> int:
        return self.nodes.shape[0]

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]


def build_grid(domain: DomainSpec, resolution: int) -> Grid:
    """Uniform cell-centered grid over the bounding box, masked to the domain.

    `resolution` counts cells along the longest box edge (and per side for the
    square cases).  Disk boundary cells are kept iff their center is inside;
    no partial-volume correction.
    """
    if resolution < 8:
        raise ParameterError(f"resolution must be >= 8, got {resolution}")
    if isinstance(domain, Interval):
        h = (domain.b - domain.a) / resolution
        x = domain.a + (np.arange(resolution) + 0.5) * h
        nodes = x[:, None]
        weights = np.full(resolution, h)
        cell_volume = h
    elif isinstance(domain, Rectangle):
        w1 = domain.b1 - domain.a1
        w2 = domain.b2 - domain.a2
        if w1 >= w2:
            m1 = resolution
            m2 = max(1, round(resolution * w2 / w1))
        else:
            m2 = resolution
            m1 = max(1, round(resolution * w1 / w2))
        h1, h2 = w1 / m1, w2 / m2
        x = domain.a1 + (np.arange(m1) + 0.5) * h1
        y = domain.a2 + (np.arange(m2) + 0.5) * h2
        X, Y = np.meshgrid(x, y, indexing="ij")
        nodes = np.column_stack([X.ravel(), Y.ravel()])
        cell_volume = h1 * h2
        weights = np.full(nodes.shape[0], cell_volume)
        h = max(h1, h2)
    elif isinstance(domain, Disk):
        h = domain.diameter / resolution
        lo = domain.center - domain.radius
        x = lo[0] + (np.arange(resolution) + 0.5) * h
        y = lo[1] + (np.arange(resolution) + 0.5) * h
        X, Y = np.meshgrid(x, y, indexing="ij")
        box = np.column_stack([X.ravel(), Y.ravel()])
        inside = np.linalg.norm(box - domain.center, axis=1) < domain.radius
        nodes = box[inside]
        cell_volume = h * h
        weights = np.full(nodes.shape[0], cell_volume)
    else:
        raise ParameterError(f"unsupported domain {domain!r}")
    return Grid(
        domain=domain,
        nodes=nodes,
        weights=weights,
        h=float(h),
        boundary_dist=domain.boundary_dist(nodes),
        cell_volume=float(cell_volume),
    )


def write_grid_csv(grid: Grid, path) -> None:
    """Grid export: `index,x1[,x2],weight,boundary_dist`, LF line endings."""
    cols = ["index"] + [f"x{k + 1}" for k in range(grid.dim)] + ["weight", "boundary_dist"]
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(grid.m):
            vals = [str(i)]
            vals += [repr(float(v)) for v in grid.nodes[i]]
            vals += [repr(float(grid.weights[i])), repr(float(grid.boundary_dist[i]))]
            fh.write(",".join(vals) + "\n")


# ---------------------------------------------------------------------------
# kernel operator
# ---------------------------------------------------------------------------

def _self_cell_average(grid: Grid, alpha: float) -> float:
    """Exact cell average of |x_i - y|^{alpha - n} over a quadrature cell."""
    if grid.dim == 1:
        half = 0.5 * grid.cell_volume
        return half ** (alpha - 1.0) / alpha
    r_e = math.sqrt(grid.cell_volume / math.pi)   # equal-area disk
    return 2.0 * r_e ** (alpha - 2.0) / alpha


@dataclass(frozen=True)
class KernelOperator:
    """Discrete Riesz operator on a grid.

    `entries` is the dense symmetric matrix k(x_i, x_j) (with the self-cell
    average on the diagonal), or None in matrix-free mode, in which case rows
    are regenerated on demand.
    """

    exponents: Exponents
    grid: Grid
    entries: np.ndarray | None
    diag_value: float
    block_rows: int = field(default=256, repr=False)

    @property
    def m(self) -> int:
        return self.grid.m

    def rows(self, start: int, stop: int) -> np.ndarray:
        """Kernel rows [start, stop) with the diagonal rule applied."""
        if self.entries is not None:
            return self.entries[start:stop]
        ex = self.exponents.alpha - self.exponents.n
        dist = cdist(self.grid.nodes[start:stop], self.grid.nodes)
        idx = np.arange(start, stop)
        dist[np.arange(stop - start), idx] = 1.0
        block = dist ** ex
        block[np.arange(stop - start), idx] = self.diag_value
        return block


def assemble_kernel(
    grid: Grid,
    exponents: Exponents,
    dense_cap: int = 4096,
    storage: str = "auto",
) -> KernelOperator:
    """Assemble the kernel operator; dense up to `dense_cap` nodes.

    storage: "auto" falls back to matrix-free above the cap, "dense" raises
    MemoryCapError instead (reporting the required m^2), "matfree" never
    materializes the matrix.
    """
    if exponents.n != grid.dim:
        raise ParameterError(
            f"exponent bundle is for n={exponents.n} but grid has dim={grid.dim}"
        )
    m = grid.m
    diag = _self_cell_average(grid, exponents.alpha)
    if storage not in ("auto", "dense", "matfree"):
        raise ParameterError(f"unknown storage mode {storage!r}")
    if storage == "matfree" or (storage == "auto" and m > dense_cap):
        return KernelOperator(exponents=exponents, grid=grid, entries=None, diag_value=diag)
    if m > dense_cap:
        raise MemoryCapError(
            f"dense kernel needs m^2 = {m * m} entries for m={m} nodes "
            f"(cap {dense_cap}); use matrix-free storage"
        )
    ex = exponents.alpha - exponents.n
    dist = cdist(grid.nodes, grid.nodes)
    np.fill_diagonal(dist, 1.0)
    entries = dist ** ex
    np.fill_diagonal(entries, diag)
    return KernelOperator(exponents=exponents, grid=grid, entries=entries, diag_value=diag)


def apply_kernel(K: KernelOperator, f: np.ndarray) -> np.ndarray:
    """(Kf)_i = sum_j k(x_i, x_j) w_j f_j."""
    f = np.asarray(f, dtype=float)
    if f.shape != (K.m,):
        raise ParameterError(f"vector length {f.shape} does not match {K.m} nodes")
    if np.any(f < 0.0):
        raise ParameterError("apply_kernel requires a nonnegative vector")
    wf = K.grid.weights * f
    if K.entries is not None:
        return K.entries @ wf
    out = np.empty(K.m)
    for start in range(0, K.m, K.block_rows):
        stop = min(start + K.block_rows, K.m)
        out[start:stop] = K.rows(start, stop) @ wf
    return out


def energy(K: KernelOperator, f: np.ndarray, Kf: np.ndarray | None = None) -> float:
    """Double Riesz energy E[f] = sum_i w_i f_i (Kf)_i."""
    if Kf is None:
        Kf = apply_kernel(K, f)
    return float(np.dot(K.grid.weights * np.asarray(f, dtype=float), Kf))


def lq_norm(weights: np.ndarray, f: np.ndarray, q: float) -> float:
    """(sum w f^q)^{1/q}; used as the normalizer even for 0 < q < 1."""
    if not q > 0.0:
        raise ParameterError(f"q must be positive, got {q}")
    return float(np.sum(weights * np.asarray(f, dtype=float) ** q) ** (1.0 / q))


def quotient(K: KernelOperator, f: np.ndarray, q: float) -> float:
    """Energy quotient E[f] / ||f||_q^2."""
    return energy(K, f) / lq_norm(K.grid.weights, f, q) ** 2
