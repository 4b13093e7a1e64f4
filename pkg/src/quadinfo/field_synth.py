"""Synthetic cavity fields: elliptical geometry, trig basis modes, mixing.

The cavity is an ellipse with semi-axes ``a = (1 + eps)`` and
``b = 1/(1 + eps)`` so the area stays ``pi`` while ``eps`` deforms the shape.
Two real separable trig patterns with prescribed parity act as basis modes;
an eigenvector ``c`` from the coupled-mode model mixes them into a complex
field ``psi = c1*phi1 + c2*phi2`` whose real/imaginary node values feed the
downstream quadrature statistics.  Node weights are always the intensities
``|psi|**2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateGridError, GridMismatchError

PARITIES = ("even-even", "even-odd", "odd-even", "odd-odd")

DEFAULT_REFRACTIVE_INDEX = 3.3  # inside the cavity; outside is 1.0
GRID_MARGIN = 0.02  # fractional margin added around the bounding box


@dataclass(frozen=True)
class CavityGeometry:
    """Area-preserving elliptical deformation parametrized by eps >= 0."""

    eps: float
    n_in: float = DEFAULT_REFRACTIVE_INDEX
    n_out: float = 1.0

    def __post_init__(self):
        if self.eps < 0.0:
            raise ValueError("deformation eps must be nonnegative")

    @property
    def semi_x(self) -> float:
        return 1.0 + self.eps

    @property
    def semi_y(self) -> float:
        return 1.0 / (1.0 + self.eps)

    def contains(self, x, y):
        """Boolean mask: (x/a)**2 + (y/b)**2 <= 1."""
        return (x / self.semi_x) ** 2 + (y / self.semi_y) ** 2 <= 1.0


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectangular sampling grid.

    ``values[iy, ix]`` convention everywhere: the y index is the slow (row)
    axis, x the fast one; flattening is C order.
    """

    nx: int
    ny: int
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if self.nx < 16 or self.ny < 16:
            raise ValueError("grid must be at least 16x16")
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("grid ranges must have positive extent")

    @classmethod
    def cover(cls, geometries, nx: int = 256, ny: int = 256,
              margin: float = GRID_MARGIN) -> "GridSpec":
        """Smallest symmetric grid covering every geometry's bounding box,
        expanded by ``margin`` (fractional)."""
        geoms = list(geometries)
        if not geoms:
            raise ValueError("need at least one geometry")
        a = max(g.semi_x for g in geoms) * (1.0 + margin)
        b = max(g.semi_y for g in geoms) * (1.0 + margin)
        return cls(nx=nx, ny=ny, x0=-a, x1=a, y0=-b, y1=b)

    def axes(self):
        x = np.linspace(self.x0, self.x1, self.nx)
        y = np.linspace(self.y0, self.y1, self.ny)
        return x, y

    def mesh(self):
        x, y = self.axes()
        return np.meshgrid(x, y)  # shapes (ny, nx)


def _interior_mask(weights: np.ndarray) -> np.ndarray:
    """Nodes with positive weight or a 4-connected positive-weight neighbor."""
    pos = weights > 0.0
    keep = pos.copy()
    keep[1:, :] |= pos[:-1, :]
    keep[:-1, :] |= pos[1:, :]
    keep[:, 1:] |= pos[:, :-1]
    keep[:, :-1] |= pos[:, 1:]
    return keep


@dataclass(frozen=True)
class ComplexField:
    """Complex node values on a grid plus derived weights and retention mask.

    ``weights`` and ``mask`` are always derived from ``values`` (never taken
    from external input): ``weights = |values|**2`` and ``mask`` marks nodes
    with positive weight or a 4-connected positive-weight neighbor.
    """

    grid: GridSpec
    values: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    mask: np.ndarray = field(repr=False)
    eps: Optional[float] = None
    mode: Optional[str] = None
    lam: Optional[complex] = None

    @classmethod
    def from_values(cls, grid: GridSpec, values: np.ndarray,
                    eps: Optional[float] = None, mode: Optional[str] = None,
                    lam: Optional[complex] = None) -> "ComplexField":
        values = np.ascontiguousarray(values, dtype=np.complex128)
        if values.shape != (grid.ny, grid.nx):
            raise GridMismatchError(
                f"values shape {values.shape} does not match grid "
                f"({grid.ny}, {grid.nx})"
            )
        weights = (values.real ** 2 + values.imag ** 2)
        mask = _interior_mask(weights)
        return cls(grid=grid, values=values, weights=weights, mask=mask,
                   eps=eps, mode=mode, lam=lam)

    def total_weight(self) -> float:
        return float(self.weights.sum())


@dataclass(frozen=True)
class BasisModeSpec:
    """Separable trig pattern: frequency pair plus x/y parity."""

    kx: float
    ky: float
    parity: str

    def __post_init__(self):
        if self.kx <= 0.0 or self.ky <= 0.0:
            raise ValueError("spatial frequencies must be positive")
        if self.parity not in PARITIES:
            raise ValueError(f"parity must be one of {PARITIES}")


def basis_mode(geom: CavityGeometry, spec: BasisModeSpec,
               grid: GridSpec) -> ComplexField:
    """Real basis pattern on the grid, zero outside the cavity, sum w = 1.

    even/odd parity selects cos/sin per axis.  Raises
    :class:`DegenerateGridError` when no node falls inside the cavity (or the
    pattern vanishes identically there, which leaves nothing to normalize).
    """
    xg, yg = grid.mesh()
    px, py = spec.parity.split("-")
    fx = np.cos(spec.kx * xg) if px == "even" else np.sin(spec.kx * xg)
    fy = np.cos(spec.ky * yg) if py == "even" else np.sin(spec.ky * yg)
    pattern = fx * fy
    inside = geom.contains(xg, yg)
    if not inside.any():
        raise DegenerateGridError("no grid node falls inside the cavity")
    pattern = np.where(inside, pattern, 0.0)
    total = float((pattern ** 2).sum())
    if total <= 0.0:
        raise DegenerateGridError("basis pattern vanishes on every interior node")
    pattern = pattern / np.sqrt(total)
    return ComplexField.from_values(grid, pattern.astype(np.complex128),
                                    eps=geom.eps)


def synthesize(c, phi1: ComplexField, phi2: ComplexField,
               eps: Optional[float] = None, mode: Optional[str] = None,
               lam: Optional[complex] = None) -> ComplexField:
    """Node-wise mixture ``psi = c[0]*phi1 + c[1]*phi2``.

    The two inputs must share a grid (:class:`GridMismatchError` otherwise).
    Weights and mask of the result are derived from the mixed values, so the
    zero set — and with it the retained sample set — depends on the mixing
    coefficients, not on the inputs' masks.
    """
    if phi1.grid != phi2.grid:
        raise GridMismatchError("basis fields live on different grids")
    c = np.asarray(c, dtype=np.complex128)
    if c.shape != (2,):
        raise ValueError("coefficient vector must have exactly 2 entries")
    values = c[0] * phi1.values + c[1] * phi2.values
    if eps is None:
        eps = phi1.eps
    return ComplexField.from_values(phi1.grid, values, eps=eps, mode=mode,
                                    lam=lam)


def synth_sweep(model, spec1: BasisModeSpec, spec2: BasisModeSpec,
                grid: Optional[GridSpec] = None, nx: int = 256, ny: int = 256):
    """Synthesize both eigenmode fields at every eps of a detuning model.

    Returns ``(trace, fields)`` where ``trace`` is the continuity-tracked
    :class:`~quadinfo.coupled_mode.BranchTrace` and ``fields`` is a flat list
    ordered by (eps ascending, mode1 then mode2).  mode1 follows the
    ``lambda_plus`` branch, mode2 the ``lambda_minus`` branch.  An exceptional
    point on the grid is reported via
    :class:`~quadinfo.errors.ExceptionalPointError` naming the offending eps.
    """
    from . import coupled_mode
    from .errors import ExceptionalPointError

    trace = coupled_mode.sweep_spectrum(model)
    if grid is None:
        geoms = [CavityGeometry(float(e)) for e in
                 (model.eps_grid[0], model.eps_grid[-1])]
        grid = GridSpec.cover(geoms, nx=nx, ny=ny)
    fields = []
    for k, eps in enumerate(model.eps_grid):
        eps = float(eps)
        h = model.hamiltonian_at(eps)
        try:
            coupled_mode.eigenvectors(h)
        except ExceptionalPointError as exc:
            raise ExceptionalPointError(
                f"exceptional point at eps = {eps!r}: {exc}"
            ) from exc
        geom = CavityGeometry(eps)
        phi1 = basis_mode(geom, spec1, grid)
        phi2 = basis_mode(geom, spec2, grid)
        fields.append(synthesize(trace.coeffs_plus[k], phi1, phi2, eps=eps,
                                 mode="mode1", lam=complex(trace.lambda_plus[k])))
        fields.append(synthesize(trace.coeffs_minus[k], phi1, phi2, eps=eps,
                                 mode="mode2", lam=complex(trace.lambda_minus[k])))
    return trace, fields
