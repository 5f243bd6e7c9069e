"""Target-signature initialization strategies.

* ``original``: every positive instance is a candidate, scored by the objective.
* ``kmeans``: K-Means on all whitened instances; centers scored by the objective.
* ``ranked_kmeans``: same clustering, centers ranked by the multiple instance
  cluster rank instead of the objective (no objective evaluations).
* ``mi_cr``: GMM on all whitened instances; per positive bag and component, an
  exemplar (relevance-weighted mean of the bag) is a candidate scored by the
  objective.

Clustering and candidate scoring both happen in whitened space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .ace import ZERO_NORM, Signature
from .clustering import GmmModel, gmm_fit, gmm_log_posteriors, kmeans
from .data import Bag, MilDataset
from .exceptions import ConfigError, InitializationError, ValidationError
from .objective import PreparedData
from .whitening import BackgroundStats

__all__ = [
    "InitResult",
    "METHODS",
    "normalize_method",
    "init_original",
    "init_kmeans",
    "init_ranked_kmeans",
    "init_mi_cr",
    "initialize",
    "mic_rank",
    "mic_ranks",
    "exemplar_points",
    "exemplar_relevances",
    "expected_candidates",
    "expected_objective_evals",
]

METHODS = ("original", "kmeans", "ranked_kmeans", "mi_cr")


def normalize_method(name: str) -> str:
    key = str(name).strip().lower().replace("-", "_")
    if key not in METHODS:
        raise ConfigError(f"unknown initializer {name!r}; choose from {', '.join(METHODS)}")
    return key


@dataclass(frozen=True, eq=False)
class InitResult:
    signature: Signature
    candidate_count: int
    selection_score: float
    method: str
    objective_evals: int = 0
    cluster_iterations: int = 0
    winner_index: int = 0


def _prepared(stats, dataset, prepared):
    if prepared is None:
        return PreparedData(stats, dataset)
    if prepared.stats is not stats or prepared.dataset is not dataset:
        raise ValidationError("prepared data belongs to a different dataset or stats")
    return prepared


def _pick(prepared: PreparedData, candidates: np.ndarray, method: str, **extra) -> InitResult:
    evals_before = prepared.objective_evals
    scores = prepared.objective_many(candidates)
    if not np.isfinite(scores).any():
        raise InitializationError(f"{method}: every candidate whitens to a zero vector")
    best = int(np.argmax(scores))  # first maximum wins ties
    return InitResult(
        signature=Signature.from_whitened(candidates[best], prepared.stats),
        candidate_count=len(candidates),
        selection_score=float(scores[best]),
        method=method,
        objective_evals=prepared.objective_evals - evals_before,
        winner_index=best,
        **extra,
    )


def init_original(stats: BackgroundStats, dataset: MilDataset, prepared=None) -> InitResult:
    """Exhaustive scan over positive instances; ties go to the lowest
    (bag, instance) position."""
    p = _prepared(stats, dataset, prepared)
    return _pick(p, p.pos_white, "original")


def init_kmeans(stats, dataset, K=5, seed=0, prepared=None) -> InitResult:
    p = _prepared(stats, dataset, prepared)
    _check_k(K, dataset)
    km = kmeans(p.all_white, K, seed=seed)
    return _pick(p, km.centers, "kmeans", cluster_iterations=km.iterations)


def mic_ranks(
    assignment: np.ndarray,
    instance_positive: np.ndarray,
    instance_bag: np.ndarray,
    K: int,
    weights=(1.0, 1.0, 1.0),
) -> np.ndarray:
    """Multiple instance cluster rank of every cluster ``0..K-1``.

    ``instance_bag`` holds bag ids for each instance; only those of positive
    instances matter. The positive-bag term uses bag counts; the other two
    use instance counts.
    """
    w_bag, w_pos, w_neg = _check_weights(weights)
    a = np.asarray(assignment, dtype=int)
    pos = np.asarray(instance_positive, dtype=bool)
    bag = np.asarray(instance_bag)
    if a.shape != pos.shape or a.shape != bag.shape:
        raise ValidationError("assignment, labels and bag ids must be aligned")
    if a.size and (a.min() < 0 or a.max() >= K):
        raise ValidationError("assignment labels must lie in [0, K)")
    n_pos = int(pos.sum())
    n_neg = int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("cluster rank needs both positive and negative instances")
    pos_bag_ids, pos_bag_codes = np.unique(bag[pos], return_inverse=True)
    n_bags = len(pos_bag_ids)
    pos_in_k = np.bincount(a[pos], minlength=K)
    neg_in_k = np.bincount(a[~pos], minlength=K)
    hit = np.zeros((K, n_bags), dtype=bool)
    hit[a[pos], pos_bag_codes] = True
    bags_in_k = hit.sum(axis=1)
    # complement count keeps every term nonnegative, so no roundoff below 0
    num = w_bag * bags_in_k / n_bags + w_pos * pos_in_k / n_pos + w_neg * (n_neg - neg_in_k) / n_neg
    return np.clip(num / (w_bag + w_pos + w_neg), 0.0, 1.0)


def mic_rank(k: int, assignment, dataset: MilDataset, weights=(1.0, 1.0, 1.0)) -> float:
    """Rank of cluster ``k`` given a cluster label per instance (dataset order)."""
    assignment = np.asarray(assignment, dtype=int)
    if assignment.shape != (dataset.n_instances,):
        raise ValidationError("need one cluster label per dataset instance")
    top = int(assignment.max())
    if not 0 <= k <= top:
        raise ValidationError(f"cluster index {k} out of range [0, {top}]")
    ranks = mic_ranks(assignment, dataset.instance_labels == 1, dataset.bag_index, top + 1, weights)
    return float(ranks[k])


def init_ranked_kmeans(stats, dataset, K=5, weights=(1.0, 1.0, 1.0), seed=0, prepared=None) -> InitResult:
    p = _prepared(stats, dataset, prepared)
    _check_k(K, dataset)
    _check_weights(weights)
    km = kmeans(p.all_white, K, seed=seed)
    ranks = mic_ranks(km.assignment, dataset.instance_labels == 1, dataset.bag_index, K, weights)
    usable = np.linalg.norm(km.centers, axis=1) >= ZERO_NORM
    if not usable.any():
        raise InitializationError("ranked_kmeans: every cluster center is at the background mean")
    ranks_masked = np.where(usable, ranks, -np.inf)
    best = int(np.argmax(ranks_masked))
    return InitResult(
        signature=Signature.from_whitened(km.centers[best], stats),
        candidate_count=K,
        selection_score=float(ranks[best]),
        method="ranked_kmeans",
        objective_evals=0,
        cluster_iterations=km.iterations,
        winner_index=best,
    )


def exemplar_relevances(log_post: np.ndarray) -> np.ndarray:
    """Relevances ``R`` (n, K): responsibilities normalized over the bag's
    instances for each component, computed from log responsibilities."""
    log_z = logsumexp(log_post, axis=0)
    if not np.all(np.isfinite(log_z)):
        raise InitializationError("relevance underflow: a component has zero mass in the bag")
    R = np.exp(log_post - log_z)
    return R / R.sum(axis=0)


def exemplar_points(gmm: GmmModel, bag, stats: BackgroundStats | None = None) -> np.ndarray:
    """One exemplar per mixture component for a positive bag, shape (K, d).

    ``bag`` is a :class:`~miace.data.Bag` (whitened with ``stats``) or an
    already whitened ``(n, d)`` array.
    """
    if isinstance(bag, Bag):
        if not bag.positive:
            raise ValidationError("exemplars are built for positive bags only")
        if stats is None:
            raise ValidationError("stats are needed to whiten a Bag")
        X = stats.whiten(bag.features)
    else:
        X = np.atleast_2d(np.asarray(bag, dtype=float))
    R = exemplar_relevances(gmm_log_posteriors(gmm, X))
    return R.T @ X


def init_mi_cr(stats, dataset, K=5, seed=0, prepared=None, gmm_tol=1e-4) -> InitResult:
    p = _prepared(stats, dataset, prepared)
    _check_k(K, dataset)
    gmm = gmm_fit(p.all_white, K, seed=seed, tol=gmm_tol)
    log_post = gmm_log_posteriors(gmm, p.pos_white)
    candidates = np.empty((dataset.n_pos_bags * K, dataset.dimensionality))
    for j, (o, n) in enumerate(zip(p.pos_offsets, p.pos_sizes)):
        lp = log_post[o : o + n]
        log_z = logsumexp(lp, axis=0)
        ok = np.isfinite(log_z)
        R = np.zeros_like(lp)
        R[:, ok] = np.exp(lp[:, ok] - log_z[ok])
        R[:, ok] /= R[:, ok].sum(axis=0)
        # underflowed components leave a zero exemplar, which scores -inf
        candidates[j * K : (j + 1) * K] = R.T @ p.pos_white[o : o + n]
    return _pick(p, candidates, "mi_cr", cluster_iterations=gmm.iterations)


def initialize(method, stats, dataset, K=5, weights=(1.0, 1.0, 1.0), seed=0, prepared=None) -> InitResult:
    method = normalize_method(method)
    if method == "original":
        return init_original(stats, dataset, prepared)
    if method == "kmeans":
        return init_kmeans(stats, dataset, K, seed, prepared)
    if method == "ranked_kmeans":
        return init_ranked_kmeans(stats, dataset, K, weights, seed, prepared)
    return init_mi_cr(stats, dataset, K, seed, prepared)


def expected_candidates(method, n_pos, K, n_pos_bags) -> int:
    return {"original": n_pos, "kmeans": K, "ranked_kmeans": K, "mi_cr": K * n_pos_bags}[
        normalize_method(method)
    ]


def expected_objective_evals(method, n_pos, K, n_pos_bags) -> int:
    return {"original": n_pos, "kmeans": K, "ranked_kmeans": 0, "mi_cr": K * n_pos_bags}[
        normalize_method(method)
    ]


def _check_k(K, dataset):
    if int(K) != K or K < 1:
        raise ConfigError(f"K must be a positive integer, got {K!r}")
    if K > dataset.n_instances:
        raise ConfigError(f"K={K} exceeds the {dataset.n_instances} available instances")


def _check_weights(weights):
    w = tuple(float(v) for v in weights)
    if len(w) != 3:
        raise ConfigError("rank weights are (w_bags, w_pos, w_neg)")
    if any(v < 0 or not np.isfinite(v) for v in w) or sum(w) == 0:
        raise ConfigError(f"rank weights must be nonnegative and not all zero, got {w}")
    return w
