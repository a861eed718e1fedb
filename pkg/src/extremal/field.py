"""Box domains, scalar fields, and derived measure tables.

The continuous model is discretized to cell midpoints: every field is
piecewise constant on a regular grid, so the offset CDF H is an exact step
function and its running integral I is exactly piecewise linear.  All
downstream integrals are then piecewise exponential and computable in closed
form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import InvalidFieldError, RatePositivityError

FloatArray = NDArray[np.float64]


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box in 1 or 2 dimensions, split into a regular cell grid."""

    dim: int
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    cells_per_axis: int

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.lower) != self.dim or len(self.upper) != self.dim:
            raise ValueError("lower/upper must have one entry per axis")
        if any(lo >= up for lo, up in zip(self.lower, self.upper)):
            raise ValueError("domain must satisfy lower < upper on every axis")
        if self.cells_per_axis < 1:
            raise ValueError("cells_per_axis must be positive")

    @property
    def n_cells(self) -> int:
        return self.cells_per_axis**self.dim

    @property
    def widths(self) -> tuple[float, ...]:
        return tuple(
            (up - lo) / self.cells_per_axis for lo, up in zip(self.lower, self.upper)
        )

    @property
    def cell_volume(self) -> float:
        vol = 1.0
        for w in self.widths:
            vol *= w
        return vol

    def midpoints(self) -> FloatArray:
        """Cell midpoints, shape (n_cells, dim), row-major (axis 0 slowest)."""
        axes = [
            lo + (np.arange(self.cells_per_axis) + 0.5) * w
            for lo, w in zip(self.lower, self.widths)
        ]
        if self.dim == 1:
            return axes[0][:, None]
        g0, g1 = np.meshgrid(axes[0], axes[1], indexing="ij")
        return np.column_stack([g0.ravel(), g1.ravel()])

    def cell_index(self, points: FloatArray) -> NDArray[np.int64]:
        """Flat cell index of each point, shape (n,). Points are clipped to the closed box."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        m = self.cells_per_axis
        flat = np.zeros(pts.shape[0], dtype=np.int64)
        for ax in range(self.dim):
            rel = (pts[:, ax] - self.lower[ax]) / self.widths[ax]
            idx = np.clip(np.floor(rel).astype(np.int64), 0, m - 1)
            flat = flat * m + idx
        return flat


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A scalar field on a box domain: constant, polynomial, or per-cell grid.

    Polynomials use ascending-power coefficients in 1-D; in 2-D `data[i, j]`
    multiplies x^i y^j.  Grid fields carry exactly one value per cell in the
    domain's row-major order.  Evaluation is piecewise constant at cell
    midpoints in every case.
    """

    kind: str
    data: FloatArray

    @staticmethod
    def constant(value: float) -> "ScalarField":
        return ScalarField("constant", np.asarray([float(value)]))

    @staticmethod
    def poly(coeffs) -> "ScalarField":
        return ScalarField("poly", np.asarray(coeffs, dtype=np.float64))

    @staticmethod
    def grid(values) -> "ScalarField":
        return ScalarField("grid", np.asarray(values, dtype=np.float64).ravel())

    def cell_values(self, domain: BoxDomain) -> FloatArray:
        """Field value at each cell midpoint, shape (n_cells,)."""
        if self.kind == "constant":
            vals = np.full(domain.n_cells, self.data[0])
        elif self.kind == "poly":
            mids = domain.midpoints()
            if domain.dim == 1:
                vals = np.polynomial.polynomial.polyval(mids[:, 0], self.data)
            else:
                if self.data.ndim != 2:
                    raise InvalidFieldError(
                        "2-D polynomial needs a coefficient matrix data[i,j]·x^i·y^j"
                    )
                vals = np.polynomial.polynomial.polyval2d(
                    mids[:, 0], mids[:, 1], self.data
                )
        elif self.kind == "grid":
            if self.data.shape[0] != domain.n_cells:
                raise InvalidFieldError(
                    f"grid field has {self.data.shape[0]} values, "
                    f"domain has {domain.n_cells} cells"
                )
            vals = self.data.copy()
        else:
            raise InvalidFieldError(f"unknown field kind {self.kind!r}")
        if not np.all(np.isfinite(vals)):
            raise InvalidFieldError(f"{self.kind} field evaluates to NaN/inf on some cell")
        return np.asarray(vals, dtype=np.float64)

    def evaluate(self, domain: BoxDomain, points: FloatArray) -> FloatArray:
        """Piecewise-constant evaluation: value of the cell containing each point."""
        return self.cell_values(domain)[domain.cell_index(points)]


@dataclass(frozen=True, eq=False)
class MeasureTable:
    """Precomputed measure data for a (domain, rate, offset) triple.

    h_breakpoints are the sorted distinct offset levels s_1 < ... < s_m;
    h_values[j] is the cumulative normalized mass at levels <= s_j (last entry
    1).  I(t) = integral of H up to t is piecewise linear with value
    i_values[j] at s_j and slope h_values[j] to the right of s_j (slope 1
    beyond s_m, 0 below s_1).
    """

    domain: BoxDomain
    lambda_bar: float
    cell_weights: FloatArray
    lambda_cells: FloatArray
    g_cells: FloatArray
    h_breakpoints: FloatArray
    h_values: FloatArray
    i_values: FloatArray

    @property
    def support_min(self) -> float:
        return float(self.h_breakpoints[0])

    @property
    def support_max(self) -> float:
        return float(self.h_breakpoints[-1])


def build_measure_table(
    domain: BoxDomain, lam: ScalarField, g: ScalarField
) -> MeasureTable:
    """Build the normalized cell measure, the offset CDF H, and its integral I.

    The rate must be strictly positive on every cell; both fields must be
    finite.  H is the exact CDF of the midpoint offset values under the
    normalized rate measure, and I its exact running integral.
    """
    lam_c = lam.cell_values(domain)
    g_c = g.cell_values(domain)
    if np.any(lam_c <= 0.0):
        bad = int(np.argmin(lam_c))
        raise RatePositivityError(
            f"rate field is not strictly positive (cell {bad}: {lam_c[bad]})"
        )
    vol = domain.cell_volume
    lambda_bar = float(lam_c.sum() * vol)
    weights = lam_c * (vol / lambda_bar)
    weights /= weights.sum()

    levels, inverse = np.unique(g_c, return_inverse=True)
    level_mass = np.bincount(inverse, weights=weights, minlength=levels.shape[0])
    h_values = np.cumsum(level_mass)
    h_values /= h_values[-1]
    gaps = np.diff(levels)
    i_values = np.concatenate([[0.0], np.cumsum(h_values[:-1] * gaps)])
    return MeasureTable(
        domain=domain,
        lambda_bar=lambda_bar,
        cell_weights=weights,
        lambda_cells=lam_c,
        g_cells=g_c,
        h_breakpoints=levels,
        h_values=h_values,
        i_values=i_values,
    )


def eval_H(table: MeasureTable, s) -> float | FloatArray:
    """Right-continuous step evaluation of H at s (scalar or array)."""
    s_arr = np.asarray(s, dtype=np.float64)
    idx = np.searchsorted(table.h_breakpoints, s_arr, side="right")
    padded = np.concatenate([[0.0], table.h_values])
    out = padded[idx]
    return float(out) if np.isscalar(s) or s_arr.ndim == 0 else out


def eval_I(table: MeasureTable, t) -> float | FloatArray:
    """Exact piecewise-linear evaluation of I(t) = integral of H up to t."""
    t_arr = np.asarray(t, dtype=np.float64)
    idx = np.searchsorted(table.h_breakpoints, t_arr, side="right")
    j = np.maximum(idx - 1, 0)
    base = table.i_values[j] + table.h_values[j] * (t_arr - table.h_breakpoints[j])
    out = np.where(idx == 0, 0.0, base)
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out
