"""Uniform cell-centered grids on [-1, 1], grid functions, and weighted quadrature.

The domain is partitioned into ``n_cells`` equal cells; all fields live at cell
midpoints, which keeps the degenerate diffusion coefficient H(w) = 1 - w^2
strictly positive everywhere a value is stored.  Integrals are midpoint-rule
sums, second-order accurate for smooth integrands.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInitialDataError, NumericalInputError

__all__ = [
    "Grid",
    "GridFunction",
    "DensityState",
    "WeightSpec",
    "make_grid",
    "sample",
    "quadrature",
    "project_density",
    "diffusion_coefficient",
]


def diffusion_coefficient(w: np.ndarray) -> np.ndarray:
    """H(w) = 1 - w^2, the variable diffusion coefficient."""
    return 1.0 - w * w


@dataclass(frozen=True)
class Grid:
    """Uniform midpoint grid on [-1, 1].

    Attributes
    ----------
    n_cells : int
        Number of cells (>= 1).
    h : float
        Cell width, 2 / n_cells.
    centers : ndarray of shape (n_cells,)
        Cell midpoints, strictly increasing, exactly symmetric about 0.
    """

    n_cells: int
    h: float
    centers: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.centers.setflags(write=False)

    @property
    def faces(self) -> np.ndarray:
        """Cell boundary positions, shape (n_cells + 1,)."""
        return np.linspace(-1.0, 1.0, self.n_cells + 1)

    @property
    def interior_faces(self) -> np.ndarray:
        return self.faces[1:-1]


def make_grid(n_cells: int) -> Grid:
    """Build the uniform midpoint grid with ``n_cells`` cells.

    Centers are assembled from one half and mirrored so that the symmetry
    w_i = -w_{n-1-i} holds exactly in floating point; parity-preservation
    tests of the evolution rely on this.
    """
    if not isinstance(n_cells, (int, np.integer)) or isinstance(n_cells, bool):
        raise ValueError(f"n_cells must be a positive integer, got {n_cells!r}")
    if n_cells < 1:
        raise ValueError(f"n_cells must be >= 1, got {n_cells}")
    n = int(n_cells)
    h = 2.0 / n
    if n % 2 == 0:
        right = (np.arange(n // 2) + 0.5) * h
        centers = np.concatenate([-right[::-1], right])
    else:
        right = (np.arange((n - 1) // 2) + 1.0) * h
        centers = np.concatenate([-right[::-1], [0.0], right])
    return Grid(n_cells=n, h=h, centers=centers)


@dataclass(frozen=True)
class GridFunction:
    """Cell values of a function on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_cells,):
            raise ValueError(
                f"values shape {vals.shape} does not match grid with "
                f"{self.grid.n_cells} cells"
            )
        if not np.all(np.isfinite(vals)):
            raise NumericalInputError("grid function contains non-finite values")
        object.__setattr__(self, "values", vals)
        vals.setflags(write=False)


def sample(fn: Callable[[np.ndarray], np.ndarray], grid: Grid) -> GridFunction:
    """Evaluate ``fn`` at cell midpoints."""
    vals = np.asarray(fn(grid.centers), dtype=float)
    if vals.ndim == 0:
        vals = np.full(grid.n_cells, float(vals))
    return GridFunction(grid, vals)


@dataclass(frozen=True)
class DensityState:
    """A nonnegative grid density together with its time stamp.

    ``time`` is physical time t unless ``scaled_time`` is set, in which case it
    is tau = lambda * t.
    """

    function: GridFunction
    time: float = 0.0
    scaled_time: bool = False
    negativity_tol: float = 1e-12

    def __post_init__(self):
        if self.time < 0.0:
            raise ValueError(f"time must be nonnegative, got {self.time}")
        vmin = float(np.min(self.function.values)) if self.function.values.size else 0.0
        if vmin < -self.negativity_tol:
            raise InvalidInitialDataError(
                f"density has value {vmin:.3e} below -negativity_tol"
            )

    @property
    def grid(self) -> Grid:
        return self.function.grid

    @property
    def values(self) -> np.ndarray:
        return self.function.values


@dataclass(frozen=True)
class WeightSpec:
    """Quadrature weight |w|^p * H(w)^r * w^s applied together with a power q on the integrand.

    ``quadrature(phi, WeightSpec(p, r, s, q))`` returns the midpoint-rule value
    of the integral of |w|^p H(w)^r w^s phi(w)^q over [-1, 1].  Exponents are
    restricted to p >= 0, r >= 0, s in {0, 1, 2}, q >= 1; fractional q requires
    a nonnegative integrand.
    """

    p: float = 0.0
    r: float = 0.0
    s: int = 0
    q: float = 1.0

    def __post_init__(self):
        if self.p < 0 or self.r < 0:
            raise ValueError("weight exponents p, r must be >= 0")
        if self.s not in (0, 1, 2):
            raise ValueError(f"s must be in {{0, 1, 2}}, got {self.s}")
        if self.q < 1:
            raise ValueError(f"q must be >= 1, got {self.q}")

    def evaluate(self, w: np.ndarray) -> np.ndarray:
        out = np.ones_like(w)
        if self.p != 0.0:
            out = out * np.abs(w) ** self.p
        if self.r != 0.0:
            out = out * diffusion_coefficient(w) ** self.r
        if self.s:
            out = out * w ** self.s
        return out


_UNIT_WEIGHT = WeightSpec()


def quadrature(phi: GridFunction, weight: WeightSpec = _UNIT_WEIGHT) -> float:
    """Midpoint-rule integral of weight(w) * phi(w)^q over [-1, 1]."""
    vals = phi.values
    if not np.all(np.isfinite(vals)):
        raise NumericalInputError("quadrature input contains non-finite values")
    q = weight.q
    if q == 1.0:
        powered = vals
    elif q == int(q):
        powered = vals ** int(q)
    else:
        if np.min(vals) < 0.0:
            raise NumericalInputError(
                "fractional power q requires a nonnegative integrand"
            )
        powered = vals ** q
    w = phi.grid.centers
    return float(np.sum(weight.evaluate(w) * powered) * phi.grid.h)


def project_density(
    datum: Callable[[np.ndarray], np.ndarray],
    grid: Grid,
    target_mass: Optional[float] = None,
) -> DensityState:
    """Sample ``datum`` at cell midpoints, optionally rescaling to a target mass.

    Raises
    ------
    InvalidInitialDataError
        If the datum is negative at any cell center.
    """
    gf = sample(datum, grid)
    vals = gf.values
    if np.min(vals) < 0.0:
        raise InvalidInitialDataError("initial datum is negative at a cell center")
    if target_mass is not None:
        if target_mass <= 0.0:
            raise ValueError(f"target_mass must be positive, got {target_mass}")
        raw = float(np.sum(vals) * grid.h)
        if raw <= 0.0:
            raise InvalidInitialDataError("initial datum has zero mass; cannot rescale")
        vals = vals * (target_mass / raw)
        gf = GridFunction(grid, vals)
    return DensityState(gf, time=0.0)
