"""Background statistics and the whitening transform.

The background model is estimated from negative-bag instances only. The
covariance receives a ridge ``epsilon * trace(C) / d * I`` so ``epsilon`` is
dimensionless; if the sample covariance is identically zero the ridge falls
back to ``epsilon * I``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .data import MilDataset
from .exceptions import DimensionError, EstimationError, ParseError, ValidationError

__all__ = [
    "BackgroundStats",
    "fit_background",
    "whiten",
    "save_stats",
    "load_stats",
    "DEFAULT_EPSILON",
]

DEFAULT_EPSILON = 1e-6
STATS_SCHEMA_VERSION = 1


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BackgroundStats:
    """Background mean, regularized covariance and symmetric whitener.

    ``whitener`` is ``W = V diag(lambda^-1/2) V^T`` so that
    ``W @ covariance @ W.T == I`` and ``W.T @ W`` is the inverse covariance.
    ``ridge`` is the absolute amount added to the diagonal.
    """

    mean: np.ndarray
    covariance: np.ndarray
    epsilon: float = 0.0
    ridge: float = 0.0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).ravel()
        cov = np.asarray(self.covariance, dtype=float)
        d = mean.size
        if cov.shape != (d, d):
            raise DimensionError(f"covariance must be {d}x{d}, got {cov.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValidationError("background statistics must be finite")
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-12 * max(1.0, np.abs(cov).max()):
            raise ValidationError("covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        evals, evecs = np.linalg.eigh(cov)
        if evals[0] <= 0:
            raise EstimationError(
                f"covariance is not positive definite (min eigenvalue {evals[0]:.3g}); "
                "increase epsilon"
            )
        whitener = (evecs / np.sqrt(evals)) @ evecs.T
        whitener = 0.5 * (whitener + whitener.T)
        object.__setattr__(self, "mean", _readonly(mean))
        object.__setattr__(self, "covariance", _readonly(cov))
        object.__setattr__(self, "_whitener", _readonly(whitener))
        object.__setattr__(self, "_eigenvalues", _readonly(evals))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "ridge", float(self.ridge))

    @property
    def dimensionality(self) -> int:
        return self.mean.size

    @property
    def whitener(self) -> np.ndarray:
        return self._whitener

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._eigenvalues

    @cached_property
    def inverse_covariance(self) -> np.ndarray:
        return self._whitener.T @ self._whitener

    @cached_property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.mean).tobytes())
        h.update(np.ascontiguousarray(self.covariance).tobytes())
        return h.hexdigest()[:16]

    def whiten(self, x: np.ndarray) -> np.ndarray:
        """Whiten a vector or an ``(n, d)`` array of row vectors."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dimensionality:
            raise DimensionError(
                f"expected vectors of length {self.dimensionality}, got {x.shape[-1]}"
            )
        # W is symmetric, so (x - mu) @ W == W @ (x - mu) row-wise.
        return (x - self.mean) @ self._whitener

    def whiten_direction(self, v: np.ndarray) -> np.ndarray:
        """Map a raw-space direction (no mean offset) into whitened space."""
        return np.asarray(v, dtype=float) @ self._whitener

    def unwhiten_direction(self, v: np.ndarray) -> np.ndarray:
        evecs = np.linalg.eigh(self.covariance)[1]
        sqrt_cov = (evecs * np.sqrt(self._eigenvalues)) @ evecs.T
        return np.asarray(v, dtype=float) @ sqrt_cov


def fit_background(dataset: MilDataset, epsilon: float = DEFAULT_EPSILON) -> BackgroundStats:
    """Estimate background stats from every negative-bag instance of ``dataset``."""
    if epsilon < 0 or not np.isfinite(epsilon):
        raise ValidationError(f"epsilon must be finite and >= 0, got {epsilon}")
    neg = np.concatenate([b.features for b in dataset.negative_bags])
    return fit_background_array(neg, epsilon)


def fit_background_array(samples: np.ndarray, epsilon: float = DEFAULT_EPSILON) -> BackgroundStats:
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2:
        raise DimensionError("samples must be a 2-D array")
    n, d = samples.shape
    if n < 2:
        raise EstimationError(f"need at least 2 background samples, got {n}")
    if not np.all(np.isfinite(samples)):
        raise ValidationError("background samples contain non-finite values")
    if epsilon == 0 and n < d + 1:
        raise EstimationError(
            f"{n} background samples cannot give a nonsingular {d}x{d} covariance without epsilon > 0"
        )
    mean = samples.mean(axis=0)
    cov = np.cov(samples, rowvar=False, ddof=1)
    tr = np.trace(cov)
    ridge = epsilon * tr / d if tr > 0 else epsilon
    cov = cov + ridge * np.eye(d)
    return BackgroundStats(mean, cov, epsilon=epsilon, ridge=ridge)


def whiten(stats: BackgroundStats, x: np.ndarray) -> np.ndarray:
    return stats.whiten(x)


def stats_to_dict(stats: BackgroundStats) -> dict:
    return {
        "version": STATS_SCHEMA_VERSION,
        "d": stats.dimensionality,
        "mean": stats.mean.tolist(),
        "covariance": stats.covariance.ravel().tolist(),
        "epsilon": stats.epsilon,
        "ridge": stats.ridge,
        "fingerprint": stats.fingerprint,
    }


def stats_from_dict(obj: dict) -> BackgroundStats:
    try:
        if obj["version"] != STATS_SCHEMA_VERSION:
            raise ParseError(f"unsupported stats schema version {obj['version']!r}")
        d = int(obj["d"])
        cov = np.array(obj["covariance"], dtype=float)
        if cov.size != d * d:
            raise DimensionError(f"covariance has {cov.size} entries, expected {d * d}")
        stats = BackgroundStats(
            np.array(obj["mean"], dtype=float),
            cov.reshape(d, d),
            epsilon=obj.get("epsilon", 0.0),
            ridge=obj.get("ridge", 0.0),
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed background stats: {exc}") from None
    if "fingerprint" in obj and obj["fingerprint"] != stats.fingerprint:
        raise ParseError("background stats fingerprint does not match its contents")
    return stats


def save_stats(stats: BackgroundStats, path) -> None:
    with open(path, "w") as fh:
        json.dump(stats_to_dict(stats), fh, indent=1)


def load_stats(path) -> BackgroundStats:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from None
    return stats_from_dict(obj)
