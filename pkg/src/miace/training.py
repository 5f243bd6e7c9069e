"""MI-ACE training: initialize a signature, then alternate representative
selection and the closed-form signature update."""

from __future__ import annotations

import time
from dataclasses import dataclass

from .ace import Signature
from .data import MilDataset
from .exceptions import ConfigError
from .initializers import InitResult, initialize, normalize_method
from .objective import PreparedData
from .whitening import DEFAULT_EPSILON, BackgroundStats, fit_background

__all__ = ["TrainConfig", "TrainResult", "train"]


@dataclass(frozen=True)
class TrainConfig:
    max_iterations: int = 100
    convergence_tol: float = 1e-6
    initializer: str = "original"
    cluster_count: int = 5
    rank_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    seed: int = 0
    epsilon: float = DEFAULT_EPSILON
    optimize: bool = True

    def __post_init__(self):
        object.__setattr__(self, "initializer", normalize_method(self.initializer))
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be a positive integer, got {self.max_iterations!r}")
        if not self.convergence_tol > 0:
            raise ConfigError(f"convergence_tol must be > 0, got {self.convergence_tol!r}")
        if int(self.cluster_count) != self.cluster_count or self.cluster_count < 1:
            raise ConfigError(f"cluster_count must be a positive integer, got {self.cluster_count!r}")
        w = tuple(float(v) for v in self.rank_weights)
        if len(w) != 3 or any(v < 0 for v in w) or sum(w) == 0:
            raise ConfigError(f"rank weights must be three nonnegative values, not all zero: {w}")
        object.__setattr__(self, "rank_weights", w)
        if self.epsilon < 0:
            raise ConfigError("epsilon must be >= 0")


@dataclass(frozen=True, eq=False)
class TrainResult:
    initial_signature: Signature
    optimized_signature: Signature
    objective_trace: tuple[float, ...]
    iterations_run: int
    init_wall_time: float
    opt_wall_time: float
    stats: BackgroundStats
    init: InitResult

    @property
    def final_objective(self) -> float:
        return self.objective_trace[-1]


def train(dataset: MilDataset, config: TrainConfig = TrainConfig(), stats: BackgroundStats | None = None) -> TrainResult:
    """Learn a target signature.

    Background statistics are fitted from the negative bags unless given.
    The objective trace starts at the initial signature and gains one entry
    per iteration; iteration stops once the objective changes by less than
    ``convergence_tol``. Wall times are in seconds.
    """
    if stats is None:
        stats = fit_background(dataset, config.epsilon)
    prepared = PreparedData(stats, dataset)

    t0 = time.perf_counter()
    init = initialize(
        config.initializer,
        stats,
        dataset,
        K=config.cluster_count,
        weights=config.rank_weights,
        seed=config.seed,
        prepared=prepared,
    )
    init_time = time.perf_counter() - t0

    t0 = time.perf_counter()
    s = init.signature.s_whitened
    trace = [prepared.objective(s)]
    iterations = 0
    if config.optimize:
        for iterations in range(1, config.max_iterations + 1):
            s = prepared.update(s)
            trace.append(prepared.objective(s))
            if abs(trace[-1] - trace[-2]) < config.convergence_tol:
                break
    opt_time = time.perf_counter() - t0

    return TrainResult(
        initial_signature=init.signature,
        optimized_signature=Signature.from_whitened(s, stats),
        objective_trace=tuple(trace),
        iterations_run=iterations,
        init_wall_time=init_time,
        opt_wall_time=opt_time,
        stats=stats,
        init=init,
    )
