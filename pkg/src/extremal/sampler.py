"""Samplers for the discrete noisy-minimum processes and their limit.

Two routes to the limit process (plus the finite-n process itself):

* construction A: n i.i.d. locations from the normalized rate measure with
  independent rescaled exponential values,
* the record construction: i.i.d. locations with Erlang partial-sum values,
  which yields the first k argmins exactly via a provable stopping rule.

All randomness flows through numpy Generators seeded from ``RngSeed``;
replicate r of a batch always uses substream r, so batches are reproducible
bit for bit regardless of worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NonterminationError, RatePositivityError
from .field import BoxDomain, FloatArray, MeasureTable, ScalarField, build_measure_table
from .kargmin import KArgminRecord

_RECORD_CHUNK = 64
_RECORD_CHUNK_MAX = 8192
DEFAULT_MAX_RECORD_POINTS = 10_000_000


@dataclass(frozen=True)
class RngSeed:
    """Seed plus substream index; identical pairs reproduce draws bit for bit."""

    seed: int
    stream: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.stream < 0:
            raise ValueError("stream must be nonnegative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.PCG64(ss))

    def replicate(self, r: int) -> "RngSeed":
        return RngSeed(self.seed, r)


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    """Nonnegative noise family with F(t) = t + O(t^2) near zero.

    Families: ``exponential`` (rate 1), ``uniform`` (on (0,1)),
    ``loglogistic`` (CDF t/(1+t)), or ``table`` (piecewise-linear CDF given by
    (t, F) nodes; resolve the near-zero region, e.g. geometric spacing, since
    the first-order condition is checked at t = 1e-3, 1e-4, 1e-5).
    """

    family: str
    t_nodes: FloatArray | None = None
    f_nodes: FloatArray | None = None

    def __post_init__(self) -> None:
        if self.family not in ("exponential", "uniform", "loglogistic", "table"):
            raise ValueError(f"unknown noise family {self.family!r}")
        if self.family == "table":
            t, f = self.t_nodes, self.f_nodes
            if t is None or f is None:
                raise ValueError("table noise needs t_nodes and f_nodes")
            if t.shape != f.shape or t.ndim != 1 or t.shape[0] < 2:
                raise ValueError("table nodes must be two equal-length 1-D arrays")
            if t[0] != 0.0 or f[0] != 0.0:
                raise ValueError("table must start at (0, 0)")
            if np.any(np.diff(t) <= 0) or np.any(np.diff(f) < 0) or f[-1] > 1.0:
                raise ValueError("table must be increasing in t, nondecreasing in F <= 1")
        # first-order condition |F(t)/t - 1| <= C t near zero, C = 1
        for t in (1e-3, 1e-4, 1e-5):
            f = float(self.cdf(t))
            if abs(f / t - 1.0) > t:
                raise ValueError(
                    f"noise CDF violates F(t) = t + O(t^2): F({t}) = {f}"
                )

    @staticmethod
    def exponential() -> "NoiseSpec":
        return NoiseSpec("exponential")

    @staticmethod
    def uniform() -> "NoiseSpec":
        return NoiseSpec("uniform")

    @staticmethod
    def loglogistic() -> "NoiseSpec":
        return NoiseSpec("loglogistic")

    @staticmethod
    def from_table(t_nodes, f_nodes) -> "NoiseSpec":
        return NoiseSpec(
            "table",
            np.asarray(t_nodes, dtype=np.float64),
            np.asarray(f_nodes, dtype=np.float64),
        )

    def cdf(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.family == "exponential":
            return np.where(t < 0, 0.0, -np.expm1(-t))
        if self.family == "uniform":
            return np.clip(t, 0.0, 1.0)
        if self.family == "loglogistic":
            return np.where(t < 0, 0.0, t / (1.0 + t))
        return np.interp(t, self.t_nodes, self.f_nodes)

    def quantile(self, u: FloatArray) -> FloatArray:
        """Inverse CDF of u in [0, 1)."""
        if self.family == "exponential":
            return -np.log1p(-u)
        if self.family == "uniform":
            return u
        if self.family == "loglogistic":
            return u / (1.0 - u)
        return np.interp(u, self.f_nodes, self.t_nodes)


@dataclass(frozen=True, eq=False)
class SampleFunction:
    """Finite point set with values; implicitly +inf off the point set."""

    points: FloatArray
    values: FloatArray

    def __post_init__(self) -> None:
        if self.points.shape[0] != self.values.shape[0]:
            raise ValueError("points and values must have equal length")

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _cell_weights(domain: BoxDomain, rate: ScalarField, what: str) -> FloatArray:
    vals = rate.cell_values(domain)
    if np.any(vals <= 0.0):
        raise RatePositivityError(f"{what} field must be strictly positive on every cell")
    w = vals * domain.cell_volume
    return w / w.sum()


class _PositionSampler:
    """Inverse-CDF sampling of locations from per-cell weights.

    The cell is chosen by inverting the cumulative weights at u; the residual
    of u within the chosen cell's weight segment is uniform and is reused as
    the axis-0 coordinate, so 1-D locations cost a single uniform per point.
    """

    def __init__(self, domain: BoxDomain, weights: FloatArray):
        self.domain = domain
        self.weights = weights
        self.cum = np.cumsum(weights)
        self.cum[-1] = 1.0
        self.cum_low = self.cum - weights
        self.single_cell = weights.shape[0] == 1

    def sample(self, gen: np.random.Generator, n: int):
        """Draw n locations; returns (points (n, dim), flat cell indices (n,))."""
        d = self.domain
        u = gen.random(n)
        if self.single_cell:
            cells = np.zeros(n, dtype=np.int64)
            frac = u
        else:
            cells = np.searchsorted(self.cum, u, side="right")
            np.minimum(cells, self.weights.shape[0] - 1, out=cells)
            frac = (u - self.cum_low[cells]) / self.weights[cells]
        if d.dim == 1:
            x = d.lower[0] + (cells + frac) * d.widths[0]
            return x[:, None], cells
        m = d.cells_per_axis
        i0, i1 = np.divmod(cells, m)
        u1 = gen.random(n)
        x0 = d.lower[0] + (i0 + frac) * d.widths[0]
        x1 = d.lower[1] + (i1 + u1) * d.widths[1]
        return np.column_stack([x0, x1]), cells


def sample_fn(
    domain: BoxDomain,
    lam: ScalarField,
    rho: ScalarField,
    g: ScalarField,
    n: int,
    noise: NoiseSpec,
    seed: RngSeed,
) -> SampleFunction:
    """Draw the discrete process: n locations i.i.d. from the density rho,
    value (n / lambda(x_i)) xi_i + g(x_i) with xi_i from the noise family."""
    if n < 1:
        raise ValueError("n must be >= 1")
    pos = _PositionSampler(domain, _cell_weights(domain, rho, "density"))
    lam_c = lam.cell_values(domain)
    if np.any(lam_c <= 0.0):
        raise RatePositivityError("rate field must be strictly positive on every cell")
    g_c = g.cell_values(domain)
    gen = seed.generator()
    points, cells = pos.sample(gen, n)
    if noise.family == "exponential":
        xi = gen.standard_exponential(n)
    else:
        xi = noise.quantile(gen.random(n))
    values = (n / lam_c[cells]) * xi + g_c[cells]
    return SampleFunction(points=points, values=values)


def sample_W_construction_a(
    domain: BoxDomain,
    lam: ScalarField,
    g: ScalarField,
    n: int,
    seed: RngSeed,
) -> SampleFunction:
    """Construction A: n locations i.i.d. from the normalized rate measure,
    values (n / lambda_bar) xi_i + g(x_i) with xi_i ~ Exp(1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    table = build_measure_table(domain, lam, g)
    return _construction_a_from_table(table, n, seed.generator())


def _construction_a_from_table(
    table: MeasureTable, n: int, gen: np.random.Generator
) -> SampleFunction:
    pos = _PositionSampler(table.domain, table.cell_weights)
    points, cells = pos.sample(gen, n)
    xi = gen.standard_exponential(n)
    values = (n / table.lambda_bar) * xi
    g_c = table.g_cells
    if g_c.shape[0] == 1:
        if g_c[0] != 0.0:
            values += g_c[0]
    else:
        values += g_c[cells]
    return SampleFunction(points=points, values=values)


def sample_W_records(
    domain: BoxDomain,
    lam: ScalarField,
    g: ScalarField,
    k: int,
    seed: RngSeed,
    max_points: int = DEFAULT_MAX_RECORD_POINTS,
) -> KArgminRecord:
    """Exact first-k argmin/min pairs of the limit process plus offset.

    Locations are i.i.d. from the normalized rate measure and values are the
    running partial sums of Exp(lambda_bar) gaps.  Generation stops once the
    current partial sum plus min g exceeds the k-th smallest observed value:
    partial sums only grow, so no later point can enter the top k.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    table = build_measure_table(domain, lam, g)
    return _records_from_table(table, k, seed.generator(), max_points)


def _records_from_table(
    table: MeasureTable, k: int, gen: np.random.Generator, max_points: int
) -> KArgminRecord:
    pos = _PositionSampler(table.domain, table.cell_weights)
    g_min = table.support_min
    g_c = table.g_cells
    inv_rate = 1.0 / table.lambda_bar

    best_vals = np.empty(0)
    best_ids = np.empty(0, dtype=np.int64)
    best_pts = np.empty((0, table.domain.dim))
    s_carry = 0.0
    drawn = 0
    chunk = _RECORD_CHUNK
    while True:
        c = min(chunk, max_points - drawn)
        if c <= 0:
            raise NonterminationError(
                f"record sampler exceeded {max_points} points without stopping",
                points_generated=drawn,
                best_values=[float(v) for v in best_vals],
            )
        points, cells = pos.sample(gen, c)
        gaps = gen.standard_exponential(c) * inv_rate
        s = s_carry + np.cumsum(gaps)
        s_carry = float(s[-1])
        vals = s + (g_c[0] if g_c.shape[0] == 1 else g_c[cells])

        cat_vals = np.concatenate([best_vals, vals])
        cat_ids = np.concatenate([best_ids, np.arange(drawn, drawn + c, dtype=np.int64)])
        cat_pts = np.vstack([best_pts, points])
        sel = _kernels.topk_smallest(cat_vals, cat_ids, k)
        best_vals, best_ids, best_pts = cat_vals[sel], cat_ids[sel], cat_pts[sel]

        drawn += c
        if best_vals.shape[0] == k and s_carry + g_min > best_vals[-1]:
            break
        chunk = min(chunk * 2, _RECORD_CHUNK_MAX)

    entries: list[tuple[float, FloatArray]] = []
    i = 0
    while i < k:  # group exact ties; probability zero but the contract demands it
        j = i + 1
        while j < k and best_vals[j] == best_vals[i]:
            j += 1
        entries.append((float(best_vals[i]), best_pts[i:j]))
        i = j
    return KArgminRecord(entries=tuple(entries), truncated=False)


def box_rate(domain: BoxDomain, lam: ScalarField, box) -> float:
    """Integral of the rate over an axis-aligned closed box (cell-wise exact
    for the piecewise-constant field; partial cells count proportionally)."""
    lam_c = lam.cell_values(domain)
    box = np.asarray(box, dtype=np.float64).reshape(domain.dim, 2)
    m = domain.cells_per_axis
    fracs = []
    for ax in range(domain.dim):
        lo, w = domain.lower[ax], domain.widths[ax]
        edges = lo + np.arange(m + 1) * w
        overlap = np.minimum(edges[1:], box[ax, 1]) - np.maximum(edges[:-1], box[ax, 0])
        fracs.append(np.clip(overlap, 0.0, w))
    if domain.dim == 1:
        weights = fracs[0]
    else:
        weights = np.outer(fracs[0], fracs[1]).ravel()
    return float((lam_c * weights).sum())


# --- batched replicate drivers -------------------------------------------------
#
# Each driver loops replicate r with substream r and merges results in index
# order.  workers > 1 splits the replicate range over processes; the split
# cannot change any draw, only who computes it.


def _split_ranges(total: int, workers: int) -> list[tuple[int, int]]:
    step = (total + workers - 1) // workers
    return [(a, min(a + step, total)) for a in range(0, total, step)]


def _run_batch(serial_fn, args, replicates: int, seed: int, workers: int):
    if workers <= 1:
        return [serial_fn(args, seed, 0, replicates)]
    ranges = _split_ranges(replicates, workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futs = [pool.submit(serial_fn, args, seed, a, b) for a, b in ranges]
        return [f.result() for f in futs]


def _interval_mins_serial(args, seed: int, start: int, stop: int) -> FloatArray:
    table, n, boxes = args
    pos = _PositionSampler(table.domain, table.cell_weights)
    scale = n / table.lambda_bar
    g_c = table.g_cells
    single_g = g_c.shape[0] == 1
    boxes = np.asarray(boxes, dtype=np.float64)
    los, his = np.ascontiguousarray(boxes[:, 0]), np.ascontiguousarray(boxes[:, 1])
    out = np.empty((stop - start, boxes.shape[0]))
    for r in range(start, stop):
        gen = RngSeed(seed, r).generator()
        points, cells = pos.sample(gen, n)
        vals = scale * gen.standard_exponential(n)
        if single_g:
            if g_c[0] != 0.0:
                vals += g_c[0]
        else:
            vals += g_c[cells]
        out[r - start] = _kernels.interval_mins(points[:, 0], vals, los, his)
    return out


def batch_construction_a_interval_mins(
    domain: BoxDomain,
    lam: ScalarField,
    g: ScalarField,
    n: int,
    boxes,
    replicates: int,
    seed: int,
    workers: int = 1,
) -> FloatArray:
    """Min of a construction-A draw over each closed interval, per replicate.

    Returns shape (replicates, n_boxes); boxes is a sequence of (lo, hi).
    1-D domains only."""
    if domain.dim != 1:
        raise ValueError("interval scans are 1-D only")
    table = build_measure_table(domain, lam, g)
    parts = _run_batch(_interval_mins_serial, (table, n, boxes), replicates, seed, workers)
    return np.vstack(parts)


def _first_argmin_serial(args, seed: int, start: int, stop: int) -> FloatArray:
    table, n = args
    pos = _PositionSampler(table.domain, table.cell_weights)
    scale = n / table.lambda_bar
    g_c = table.g_cells
    single_g = g_c.shape[0] == 1
    out = np.empty((stop - start, table.domain.dim + 1))
    for r in range(start, stop):
        gen = RngSeed(seed, r).generator()
        points, cells = pos.sample(gen, n)
        vals = scale * gen.standard_exponential(n)
        if single_g:
            if g_c[0] != 0.0:
                vals += g_c[0]
        else:
            vals += g_c[cells]
        am = int(np.argmin(vals))
        out[r - start, : table.domain.dim] = points[am]
        out[r - start, -1] = vals[am]
    return out


def batch_construction_a_first_argmin(
    domain: BoxDomain,
    lam: ScalarField,
    g: ScalarField,
    n: int,
    replicates: int,
    seed: int,
    workers: int = 1,
) -> tuple[FloatArray, FloatArray]:
    """First-argmin location and value of construction-A draws.

    Returns (locations (replicates, dim), values (replicates,))."""
    table = build_measure_table(domain, lam, g)
    parts = _run_batch(_first_argmin_serial, (table, n), replicates, seed, workers)
    merged = np.vstack(parts)
    return merged[:, :-1], merged[:, -1]


def _fn_argmin_serial(args, seed: int, start: int, stop: int) -> FloatArray:
    domain, weights, lam_c, g_c, n, noise = args
    pos = _PositionSampler(domain, weights)
    out = np.empty((stop - start, domain.dim + 1))
    for r in range(start, stop):
        gen = RngSeed(seed, r).generator()
        points, cells = pos.sample(gen, n)
        if noise.family == "exponential":
            xi = gen.standard_exponential(n)
        else:
            xi = noise.quantile(gen.random(n))
        vals = (n / lam_c[cells]) * xi + g_c[cells]
        am = int(np.argmin(vals))
        out[r - start, : domain.dim] = points[am]
        out[r - start, -1] = vals[am]
    return out


def batch_fn_first_argmin(
    domain: BoxDomain,
    lam: ScalarField,
    rho: ScalarField,
    g: ScalarField,
    n: int,
    noise: NoiseSpec,
    replicates: int,
    seed: int,
    workers: int = 1,
) -> tuple[FloatArray, FloatArray]:
    """First-argmin location and value of discrete-process draws."""
    weights = _cell_weights(domain, rho, "density")
    lam_c = lam.cell_values(domain)
    if np.any(lam_c <= 0.0):
        raise RatePositivityError("rate field must be strictly positive on every cell")
    g_c = g.cell_values(domain)
    args = (domain, weights, lam_c, g_c, n, noise)
    parts = _run_batch(_fn_argmin_serial, args, replicates, seed, workers)
    merged = np.vstack(parts)
    return merged[:, :-1], merged[:, -1]


def _records_serial(args, seed: int, start: int, stop: int) -> FloatArray:
    table, k, max_points = args
    d = table.domain.dim
    out = np.empty((stop - start, k * (d + 1)))
    for r in range(start, stop):
        rec = _records_from_table(table, k, RngSeed(seed, r).generator(), max_points)
        out[r - start, :k] = rec.values
        out[r - start, k:] = rec.argmin_points().ravel()
    return out


def batch_records(
    domain: BoxDomain,
    lam: ScalarField,
    g: ScalarField,
    k: int,
    replicates: int,
    seed: int,
    workers: int = 1,
    max_points: int = DEFAULT_MAX_RECORD_POINTS,
) -> tuple[FloatArray, FloatArray]:
    """Record-sampler replicates: (values (replicates, k), locations (replicates, k, dim))."""
    table = build_measure_table(domain, lam, g)
    parts = _run_batch(_records_serial, (table, k, max_points), replicates, seed, workers)
    merged = np.vstack(parts)
    d = domain.dim
    return merged[:, :k], merged[:, k:].reshape(-1, k, d)
