"""Statistical pass/fail checks for sampler output against the analytic laws.

Every check is a pure function of its inputs; given a scenario and a seed the
resulting TestReport is bit-reproducible.  Thresholds are fixed at alpha=0.01
(KS constant 1.628, chi-square quantile), so a truthful sampler still fails
any single check about once per hundred seeds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import sqrt

import numpy as np
from scipy import stats

from .density import DensityGrid, MinValueDensity, marginal_argmin_density
from .errors import SampleSizeError
from .field import BoxDomain, ScalarField, build_measure_table
from .sampler import (
    batch_construction_a_first_argmin,
    batch_construction_a_interval_mins,
    batch_records,
    box_rate,
)

KS_CRIT_001 = 1.628


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


@dataclass(frozen=True)
class TestReport:
    """Outcome of one statistical check; passed == (statistic within threshold)."""

    name: str
    statistic: float
    threshold: float
    n: int
    passed: bool
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "name": self.name,
            "statistic": float(self.statistic),
            "threshold": float(self.threshold),
            "n": int(self.n),
            "passed": bool(self.passed),
            "metadata": _clean(self.metadata),
        }
        return json.dumps(payload, sort_keys=True)


def ks_exponential(samples, rate: float, metadata: dict | None = None) -> TestReport:
    """One-sample KS against Exp(rate); pass iff D_N < 1.628 / sqrt(N)."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    if x.size == 0:
        raise SampleSizeError("ks_exponential got no samples")
    if x.size < 100:
        raise SampleSizeError(f"ks_exponential needs >= 100 samples, got {x.size}")
    if rate <= 0:
        raise ValueError("rate must be positive")
    n = x.size
    cdf = -np.expm1(-rate * x)
    hi = np.arange(1, n + 1) / n
    d = float(max(np.max(hi - cdf), np.max(cdf - (hi - 1.0 / n))))
    threshold = KS_CRIT_001 / sqrt(n)
    meta = {"rate": float(rate)}
    meta.update(metadata or {})
    return TestReport("ks-exponential", d, threshold, n, d < threshold, meta)


def ks_two_sample(a, b, metadata: dict | None = None) -> TestReport:
    """Two-sample KS at alpha=0.01 with the asymptotic threshold."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise SampleSizeError("ks_two_sample needs two nonempty samples")
    d = float(stats.ks_2samp(a, b, method="asymp").statistic)
    threshold = KS_CRIT_001 * sqrt((a.size + b.size) / (a.size * b.size))
    meta = {"n_a": int(a.size), "n_b": int(b.size)}
    meta.update(metadata or {})
    return TestReport("ks-two-sample", d, threshold, a.size + b.size, d < threshold, meta)


def _quantile_bin_index(x: np.ndarray, bins: int) -> np.ndarray:
    edges = np.quantile(x, np.linspace(0.0, 1.0, bins + 1))[1:-1]
    return np.searchsorted(edges, x, side="right")


def independence_check(pairs, bins: int, metadata: dict | None = None) -> TestReport:
    """Chi-square of the joint quantile-binned histogram vs the product of its
    marginals (dof (bins-1)^2, alpha=0.01), plus a Pearson screen |r| < 3/sqrt(N)."""
    p = np.asarray(pairs, dtype=np.float64).reshape(-1, 2)
    n = p.shape[0]
    if n < 10 * bins * bins:
        raise SampleSizeError(
            f"independence_check needs >= {10 * bins * bins} pairs for {bins} bins, got {n}"
        )
    iu = _quantile_bin_index(p[:, 0], bins)
    iv = _quantile_bin_index(p[:, 1], bins)
    counts = np.zeros((bins, bins))
    np.add.at(counts, (iu, iv), 1.0)
    expected = np.outer(counts.sum(axis=1), counts.sum(axis=0)) / n
    mask = expected > 0
    chi2 = float(((counts[mask] - expected[mask]) ** 2 / expected[mask]).sum())
    dof = (bins - 1) ** 2
    threshold = float(stats.chi2.ppf(0.99, dof))
    r = float(np.corrcoef(p[:, 0], p[:, 1])[0, 1])
    r_threshold = 3.0 / sqrt(n)
    passed = chi2 < threshold and abs(r) < r_threshold
    meta = {"bins": bins, "dof": dof, "pearson_r": r, "pearson_threshold": r_threshold}
    meta.update(metadata or {})
    return TestReport("independence-chi2", chi2, threshold, n, passed, meta)


def _overlap_fractions(lo: float, hi: float, m: int, edges: np.ndarray) -> np.ndarray:
    """A[i, j] = fraction of cell j (uniform over [lo, hi], m cells) inside bin i."""
    w = (hi - lo) / m
    cell_lo = lo + np.arange(m) * w
    over = np.minimum(edges[1:, None], cell_lo[None, :] + w) - np.maximum(
        edges[:-1, None], cell_lo[None, :]
    )
    return np.clip(over, 0.0, w) / w


def _tv_report(
    counts: np.ndarray, expected_p: np.ndarray, n: int, metadata: dict
) -> TestReport:
    counts = counts.ravel()
    expected_p = expected_p.ravel()
    n_bins = expected_p.size
    tv = 0.5 * float(np.abs(counts / n - expected_p).sum())
    threshold = max(0.05, 3.0 * sqrt(n_bins / n))
    z = np.zeros(n_bins)
    pos = (expected_p > 0) & (expected_p < 1)
    z[pos] = (counts[pos] - n * expected_p[pos]) / np.sqrt(
        n * expected_p[pos] * (1.0 - expected_p[pos])
    )
    meta = {"bins": n_bins, "z_max": float(np.abs(z).max()), "z": np.round(z, 6)}
    meta.update(metadata)
    return TestReport("tv-histogram", tv, threshold, n, tv <= threshold, meta)


def histogram_vs_density(
    samples, density: DensityGrid, bins: int, metadata: dict | None = None
) -> TestReport:
    """TV distance between the binned empirical law of `samples` and the grid
    density aggregated onto the same bins; pass iff TV <= max(0.05, 3 sqrt(B/N))."""
    total = density.total_mass()
    if abs(total - 1.0) > 1e-4:
        raise ValueError(f"density grid has mass {total}, expected a normalized density")
    x = np.asarray(samples, dtype=np.float64)
    meta = dict(metadata or {})

    if density.kind == "marginal-1":
        dom = density.domain
        masses = density.masses()
        if dom.dim == 1:
            edges = np.linspace(dom.lower[0], dom.upper[0], bins + 1)
            a = _overlap_fractions(dom.lower[0], dom.upper[0], dom.cells_per_axis, edges)
            expected_p = a @ masses
            counts, _ = np.histogram(x.ravel(), bins=edges)
        else:
            m = dom.cells_per_axis
            e0 = np.linspace(dom.lower[0], dom.upper[0], bins + 1)
            e1 = np.linspace(dom.lower[1], dom.upper[1], bins + 1)
            a0 = _overlap_fractions(dom.lower[0], dom.upper[0], m, e0)
            a1 = _overlap_fractions(dom.lower[1], dom.upper[1], m, e1)
            expected_p = a0 @ masses.reshape(m, m) @ a1.T
            counts, _, _ = np.histogram2d(x[:, 0], x[:, 1], bins=[e0, e1])
        return _tv_report(counts, expected_p, x.shape[0], meta)

    if density.kind == "joint-k":
        dom = density.domain
        if dom.dim != 1:
            raise ValueError("joint-k histogram comparison covers 1-D domains")
        m = dom.cells_per_axis
        edges = np.linspace(dom.lower[0], dom.upper[0], bins + 1)
        a = _overlap_fractions(dom.lower[0], dom.upper[0], m, edges)
        masses = density.values * dom.cell_volume**2
        expected_p = a @ masses @ a.T
        p2 = x.reshape(-1, 2)
        counts, _, _ = np.histogram2d(p2[:, 0], p2[:, 1], bins=[edges, edges])
        return _tv_report(counts, expected_p, p2.shape[0], meta)

    raise ValueError(f"unsupported density kind {density.kind!r} for histogram comparison")


def value_vs_density(
    samples, density: MinValueDensity, bins: int, metadata: dict | None = None
) -> TestReport:
    """TV check of sampled minimum values against the analytic law on
    equal-mass quantile bins (exact expected mass 1/bins per bin)."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < bins:
        raise SampleSizeError(f"need at least {bins} samples, got {x.size}")
    edges = density.ppf(np.linspace(0.0, 1.0, bins + 1)[1:-1])
    idx = np.searchsorted(edges, x, side="right")
    counts = np.bincount(idx, minlength=bins).astype(np.float64)
    expected_p = np.full(bins, 1.0 / bins)
    meta = dict(metadata or {})
    rep = _tv_report(counts, expected_p, x.size, meta)
    return TestReport("tv-min-value", rep.statistic, rep.threshold, rep.n, rep.passed, rep.metadata)


# --- builtin verification suites -------------------------------------------------


def _subseeds(seed: int, count: int) -> list[int]:
    """Well-separated integer seeds for the sub-checks of a suite."""
    state = np.random.SeedSequence(seed).generate_state(count, dtype=np.uint64)
    return [int(s) for s in state]


def suite_definition1(
    seed: int,
    n: int = 20_000,
    replicates: int = 2_000,
    bins: int = 10,
    rate_scale: float = 1.0,
    workers: int = 1,
) -> list[TestReport]:
    """Checks of the defining properties on the unit interval with unit rate:
    exponential interval minima, independence over disjoint intervals,
    construction equivalence, and the analytic argmin density for a quadratic
    offset.  rate_scale != 1 deliberately corrupts the reference rates so the
    harness demonstrably fails."""
    dom = BoxDomain(dim=1, lower=(0.0,), upper=(1.0,), cells_per_axis=1)
    lam = ScalarField.constant(1.0)
    g0 = ScalarField.constant(0.0)
    seeds = _subseeds(seed, 4)
    reports: list[TestReport] = []

    boxes = [(0.0, 1.0), (0.0, 0.5), (0.25, 0.75)]
    mins = batch_construction_a_interval_mins(
        dom, lam, g0, n, boxes, replicates, seeds[0], workers
    )
    for j, (lo, hi) in enumerate(boxes):
        rate = rate_scale * box_rate(dom, lam, [(lo, hi)])
        reports.append(
            ks_exponential(
                mins[:, j],
                rate,
                metadata={"scenario": f"definition1/min-[{lo},{hi}]", "seed": seed},
            )
        )

    disjoint = [(0.0, 0.4), (0.6, 1.0)]
    pairs = batch_construction_a_interval_mins(
        dom, lam, g0, n, disjoint, replicates, seeds[1], workers
    )
    reports.append(
        independence_check(
            pairs, bins, metadata={"scenario": "definition1/disjoint-mins", "seed": seed}
        )
    )

    _, a_vals = batch_construction_a_first_argmin(
        dom, lam, g0, n, replicates, seeds[2], workers
    )
    r_vals, _ = batch_records(dom, lam, g0, 1, replicates, seeds[2] + 1, workers)
    rep = ks_two_sample(
        a_vals,
        rate_scale * r_vals[:, 0],
        metadata={"scenario": "definition1/construction-equivalence", "seed": seed},
    )
    reports.append(rep)

    dom_q = BoxDomain(dim=1, lower=(0.0,), upper=(1.0,), cells_per_axis=400)
    g_sq = ScalarField.poly(np.array([0.0, 0.0, 1.0]))
    _, rec_locs = batch_records(dom_q, lam, g_sq, 1, replicates, seeds[3], workers)
    grid = marginal_argmin_density(build_measure_table(dom_q, lam, g_sq))
    reports.append(
        histogram_vs_density(
            rec_locs[:, 0, 0],
            grid,
            20,
            metadata={"scenario": "definition1/quadratic-argmin-density", "seed": seed},
        )
    )
    return reports


SUITES = {"definition1": suite_definition1}
