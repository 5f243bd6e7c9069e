"""Timing and operation counts for the four initializers."""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .exceptions import ConfigError
from .initializers import METHODS, initialize
from .objective import PreparedData
from .synth import make_mil_dataset
from .whitening import fit_background

__all__ = ["BenchRow", "BenchReport", "run_bench", "loglog_slope", "COMPLEXITY", "save_bench"]

COMPLEXITY = {
    "original": "O(N⁺(N⁺+N⁻))",
    "kmeans": "O(Ki(N⁺+N⁻)+K(N⁺+N⁻))",
    "ranked_kmeans": "O(Ki(N⁺+N⁻)+K)",
    "mi_cr": "O(Ki(N⁺+N⁻)+KN^{B⁺}(N⁺+N⁻))",
}

BENCH_COLUMNS = ["method", "n_pos", "n_neg", "n_pos_bags", "d", "K", "median_ms", "candidates", "objective_evals"]


@dataclass(frozen=True)
class BenchRow:
    method: str
    n_pos: int
    n_neg: int
    n_pos_bags: int
    d: int
    K: int
    median_ms: float
    candidates: int
    objective_evals: int
    times_ms: tuple[float, ...] = ()
    cluster_iterations: tuple[int, ...] = ()


@dataclass(frozen=True)
class BenchReport:
    rows: tuple[BenchRow, ...]
    complexity: dict = field(default_factory=lambda: dict(COMPLEXITY))

    def row(self, method, n_pos, n_neg, n_pos_bags, d) -> BenchRow:
        for r in self.rows:
            if (r.method, r.n_pos, r.n_neg, r.n_pos_bags, r.d) == (method, n_pos, n_neg, n_pos_bags, d):
                return r
        raise KeyError((method, n_pos, n_neg, n_pos_bags, d))

    def speedups(self) -> dict[tuple, dict[str, float]]:
        """Original's median time over each method's, per problem size."""
        out: dict[tuple, dict[str, float]] = {}
        for r in self.rows:
            size = (r.n_pos, r.n_neg, r.n_pos_bags, r.d)
            base = self.row("original", *size).median_ms
            out.setdefault(size, {})[r.method] = base / r.median_ms if r.median_ms > 0 else float("inf")
        return out

    def slope(self, method: str, n_neg: int) -> float:
        """Log-log slope of median time against N+ at fixed N-."""
        pts = sorted((r.n_pos, r.median_ms) for r in self.rows if r.method == method and r.n_neg == n_neg)
        if len(pts) < 2:
            raise ValueError(f"need two or more sizes with n_neg={n_neg} for {method}")
        return loglog_slope([p[0] for p in pts], [p[1] for p in pts])


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def run_bench(
    sizes: Sequence[tuple[int, int, int, int]],
    K: int = 5,
    trials: int = 5,
    seed: int = 0,
    methods: Sequence[str] = METHODS,
    block: int = 1,
) -> BenchReport:
    """Median wall time of each initializer over ``trials`` runs per size.

    ``sizes`` are ``(n_pos, n_neg, n_pos_bags, d)``. One warm-up run per
    (size, method) is discarded. BLAS is pinned to one thread.

    ``block`` is how many candidates are scored per objective call. The
    default of 1 times each candidate with its own O(N+ + N-) pass, which is
    the cost model behind :data:`COMPLEXITY`; larger blocks batch candidates
    into matrix products and mostly help the methods with many candidates.
    """
    if trials < 3:
        raise ConfigError("trials must be >= 3")
    if block < 1:
        raise ConfigError("block must be >= 1")
    rows = []
    with threadpool_limits(limits=1):
        for n_pos, n_neg, n_pos_bags, d in sizes:
            site = make_mil_dataset(n_pos, n_neg, n_pos_bags, d=d, seed=seed)
            stats = fit_background(site.dataset)
            for method in methods:
                times, iters, evals, cands = [], [], None, None
                for trial in range(trials + 1):
                    prepared = PreparedData(stats, site.dataset, block=block)
                    prepared.all_white  # shared preparation, like the positive block
                    t0 = time.perf_counter()
                    res = initialize(method, stats, site.dataset, K=K, seed=seed, prepared=prepared)
                    elapsed = (time.perf_counter() - t0) * 1e3
                    if trial == 0:
                        continue
                    times.append(elapsed)
                    iters.append(res.cluster_iterations)
                    evals, cands = res.objective_evals, res.candidate_count
                rows.append(
                    BenchRow(method, n_pos, n_neg, n_pos_bags, d, K, statistics.median(times),
                             cands, evals, tuple(times), tuple(iters))
                )
    return BenchReport(tuple(rows))


def save_bench(report: BenchReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for m, c in report.complexity.items():
            fh.write(f"# {m}: {c}\n")
        w = csv.writer(fh)
        w.writerow(BENCH_COLUMNS)
        for r in report.rows:
            w.writerow([r.method, r.n_pos, r.n_neg, r.n_pos_bags, r.d, r.K,
                        f"{r.median_ms:.4f}", r.candidates, r.objective_evals])
