"""K-Means, Gaussian mixtures fitted by EM, and weighted mean shift.

All three are deterministic for a fixed seed and run single-threaded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ClusteringError, DimensionError, ValidationError

__all__ = [
    "KMeansModel",
    "GmmModel",
    "MeanShiftResult",
    "kmeans",
    "gmm_fit",
    "gmm_posteriors",
    "gmm_log_posteriors",
    "mean_shift",
]


def _check_points(points, K=None):
    X = np.asarray(points, dtype=float)
    if X.ndim != 2:
        raise DimensionError("points must be an (N, d) array")
    if not np.all(np.isfinite(X)):
        raise ValidationError("points contain non-finite values")
    if K is not None:
        if K < 1:
            raise ValidationError(f"K must be >= 1, got {K}")
        if X.shape[0] < K:
            raise ValidationError(f"need at least K={K} points, got {X.shape[0]}")
    return X


def _sq_dists(X, C):
    # exact differences so that a point coinciding with a center is at distance 0
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


# ---------------------------------------------------------------------------
# K-Means


@dataclass(frozen=True, eq=False)
class KMeansModel:
    centers: np.ndarray
    assignment: np.ndarray
    inertia: float
    iterations: int
    inertia_trace: tuple[float, ...] = ()

    @property
    def K(self) -> int:
        return self.centers.shape[0]


def _kmeanspp(X, K, rng, XTa=None, x2=None):
    N, d = X.shape
    if XTa is None:
        XTa = np.vstack([X.T, np.ones(N)])
        x2 = (X * X).sum(axis=1)
    centers = np.empty((K, d))
    coef = np.empty(d + 1)

    def sq_to(c):
        coef[:d] = -2.0 * c
        coef[d] = c @ c
        return np.maximum(coef @ XTa + x2, 0.0)

    centers[0] = X[rng.integers(N)]
    d2 = sq_to(centers[0])
    for k in range(1, K):
        total = d2.sum()
        if total > 0:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, N - 1)
        else:
            idx = int(rng.integers(N))
        centers[k] = X[idx]
        np.minimum(d2, sq_to(centers[k]), out=d2)
    return centers


def kmeans(points, K: int, seed: int = 0, max_iter: int = 100, tol: float = 1e-4) -> KMeansModel:
    """Lloyd's algorithm with k-means++ seeding.

    Stops when assignments no longer change, when the summed squared center
    displacement falls below ``tol`` times the mean per-feature variance of
    the data, or after ``max_iter`` updates. A cluster that empties is
    re-seeded with the point currently farthest from its assigned center.
    """
    X = _check_points(points, K)
    if max_iter < 1:
        raise ValidationError("max_iter must be >= 1")
    rng = np.random.default_rng(seed)
    # augmented layout: one matmul gives ||c||^2 - 2 x.c, another gives sums and counts
    N, d = X.shape
    XTa = np.ones((d + 1, N))
    XTa[:d] = X.T
    x2 = np.einsum("ij,ij->j", XTa[:d], XTa[:d])
    centers = _kmeanspp(X, K, rng, XTa, x2)
    x2_total = float(x2.sum())
    mean = XTa[:d].mean(axis=1)
    threshold = tol * max(x2_total / N - float(mean @ mean), 0.0) / d
    buf = _Buffers(K, N)
    trace = []
    prev = None
    it = 0
    for it in range(1, max_iter + 1):
        assign, part = _nearest(XTa, centers, buf)
        point_d2 = None
        trace.append(max(x2_total + float(part.sum()), 0.0))
        if prev is not None and np.array_equal(assign, prev):
            break
        prev = assign
        acc = XTa @ buf.onehot.T
        sums, counts = acc[:d].T, acc[d]
        new = centers.copy()
        nonempty = counts > 0
        new[nonempty] = sums[nonempty] / counts[nonempty, None]
        for k in np.flatnonzero(~nonempty):
            if point_d2 is None:
                point_d2 = ((X - centers[assign]) ** 2).sum(axis=1)
            far = int(np.argmax(point_d2))
            new[k] = X[far]
            point_d2[far] = 0.0
        shift = float(((new - centers) ** 2).sum())
        centers = new
        if shift <= threshold:
            break
    assign, _ = _nearest(XTa, centers, buf)
    inertia = float(((X - centers[assign]) ** 2).sum())
    trace.append(inertia)
    return KMeansModel(centers, assign, inertia, it, tuple(trace))


class _Buffers:
    def __init__(self, K, N):
        self.part = np.empty((K, N))
        self.onehot = np.empty((K, N))
        self.best = np.empty(N)
        self.count = np.empty(N)
        self.index = np.arange(K, dtype=float)


def _nearest(XTa, centers, buf):
    """Nearest center for each column of the augmented ``XTa`` (data rows
    plus a row of ones), ties to the lower index.

    Fills ``buf.onehot`` (K, N) with the assignment indicator and returns the
    assignment plus ``min_k ||c_k||^2 - 2 x.c_k`` (squared distance less
    ``||x||^2``).
    """
    coef = np.empty((centers.shape[0], XTa.shape[0]))
    coef[:, :-1] = -2.0 * centers
    coef[:, -1] = (centers * centers).sum(axis=1)
    part, onehot = buf.part, buf.onehot
    np.matmul(coef, XTa, out=part)
    best = np.minimum.reduce(part, axis=0, out=buf.best)
    np.equal(part, best, out=onehot, casting="unsafe")
    # every column holds at least one 1, so an excess total means a tie somewhere
    if onehot.sum() != onehot.shape[1]:
        tied = np.flatnonzero(np.add.reduce(onehot, axis=0, out=buf.count) != 1.0)
        first = np.argmax(onehot[:, tied], axis=0)
        onehot[:, tied] = 0.0
        onehot[first, tied] = 1.0
    assign = (buf.index @ onehot).astype(np.intp)
    return assign, best


# ---------------------------------------------------------------------------
# Gaussian mixture


@dataclass(frozen=True, eq=False)
class GmmModel:
    """Fitted mixture. ``log_likelihood_trace`` holds the mean per-sample
    log-likelihood after each EM iteration."""

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    log_likelihood_trace: tuple[float, ...] = ()
    iterations: int = 0
    _prec_chol: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self._prec_chol is None:
            object.__setattr__(self, "_prec_chol", _precision_cholesky(self.covariances))

    @property
    def K(self) -> int:
        return self.weights.size


def _precision_cholesky(covs):
    """Upper factors ``P_k`` with ``P_k P_k^T = inv(cov_k)``."""
    d = covs.shape[1]
    try:
        L = np.linalg.cholesky(covs)
    except np.linalg.LinAlgError:
        bad = [k for k in range(len(covs)) if not _is_pd(covs[k])]
        raise ClusteringError(f"component {bad[0] if bad else '?'} covariance is not positive definite") from None
    return np.swapaxes(np.linalg.solve(L, np.broadcast_to(np.eye(d), covs.shape)), 1, 2)


def _is_pd(c):
    try:
        np.linalg.cholesky(c)
    except np.linalg.LinAlgError:
        return False
    return True


def _log_joint(X, weights, means, prec_chol):
    """``log(pi_k) + log N(x | mu_k, Sigma_k)`` as an (N, K) array."""
    N, d = X.shape
    K = weights.size
    out = np.empty((N, K))
    for k in range(K):
        y = (X - means[k]) @ prec_chol[k]
        logdet = np.log(np.diag(prec_chol[k])).sum()
        out[:, k] = -0.5 * (y * y).sum(axis=1) + logdet
    out += -0.5 * d * np.log(2 * np.pi) + np.log(weights)
    return out


def _logsumexp_rows(a):
    m = a.max(axis=1)
    m = np.where(np.isfinite(m), m, 0.0)
    return np.log(np.exp(a - m[:, None]).sum(axis=1)) + m


def _ridge(cov, cov_ridge):
    d = cov.shape[0]
    tr = np.trace(cov)
    lam = cov_ridge * tr / d if tr > 0 else cov_ridge
    return cov + max(lam, 1e-12) * np.eye(d)


def gmm_fit(
    points,
    K: int,
    seed: int = 0,
    max_iter: int = 200,
    tol: float = 1e-4,
    cov_ridge: float = 1e-6,
) -> GmmModel:
    """Full-covariance GMM by EM, initialized from :func:`kmeans`.

    Stops when the gain in mean per-sample log-likelihood drops below
    ``tol``. Each covariance is ridge-regularized by ``cov_ridge * tr / d``.
    """
    X = _check_points(points, K)
    N, d = X.shape
    km = kmeans(X, K, seed=seed)
    # Every Gaussian log-density is linear in the quadratic features
    # [x_i x_j (i <= j), x, 1], and so are the sufficient statistics, so both
    # EM steps reduce to a single matmul against this design matrix.
    phi = _design(X)
    resp = np.zeros((K, N))
    resp[km.assignment, np.arange(N)] = 1.0
    weights, means, covs = _m_step_moments(resp @ phi.T, d, cov_ridge)
    trace = []
    it = 0
    for it in range(1, max_iter + 1):
        prec = _precision_cholesky(covs)
        log_joint = _quadratic_coefs(weights, means, prec) @ phi
        peak = np.maximum.reduce(log_joint, axis=0)
        np.subtract(log_joint, peak, out=log_joint)
        np.exp(log_joint, out=log_joint)
        total = np.add.reduce(log_joint, axis=0)
        ll = float(np.log(total).mean() + peak.mean())
        if not np.isfinite(ll):
            raise ClusteringError("EM diverged: non-finite log-likelihood")
        trace.append(ll)
        if len(trace) > 1 and trace[-1] - trace[-2] < tol:
            break
        log_joint /= total
        weights, means, covs = _m_step_moments(log_joint @ phi.T, d, cov_ridge)
    return GmmModel(weights, means, covs, tuple(trace), it)


def _design(X):
    N, d = X.shape
    m = d * (d + 1) // 2
    phi = np.empty((m + d + 1, N))
    XT = np.ascontiguousarray(X.T)
    row = 0
    for i in range(d):
        np.multiply(XT[i], XT[i:], out=phi[row : row + d - i])
        row += d - i
    phi[m : m + d] = XT
    phi[-1] = 1.0
    return phi


def _quadratic_coefs(weights, means, prec_chol):
    """Rows ``c_k`` with ``c_k . phi(x) = log(pi_k) + log N(x | mu_k, Sigma_k)``."""
    K, d = means.shape
    iu, ju = np.triu_indices(d)
    lam = prec_chol @ np.swapaxes(prec_chol, 1, 2)
    q = -0.5 * lam[:, iu, ju]
    q[:, iu != ju] *= 2.0
    lm = np.einsum("kij,kj->ki", lam, means)
    logdet = np.log(np.diagonal(prec_chol, axis1=1, axis2=2)).sum(axis=1)
    const = -0.5 * (means * lm).sum(axis=1) + logdet - 0.5 * d * np.log(2 * np.pi) + np.log(weights)
    return np.hstack([q, lm, const[:, None]])


def _m_step_moments(moments, d, cov_ridge):
    """Weights, means and ridged covariances from responsibility-weighted
    design sums (K rows: second moments, first moments, count)."""
    K = moments.shape[0]
    iu, ju = np.triu_indices(d)
    m = iu.size
    nk = moments[:, -1] + 10 * np.finfo(float).eps
    weights = nk / nk.sum()
    means = moments[:, m : m + d] / nk[:, None]
    covs = np.empty((K, d, d))
    covs[:, iu, ju] = moments[:, :m] / nk[:, None]
    covs[:, ju, iu] = covs[:, iu, ju]
    covs -= means[:, :, None] * means[:, None, :]
    tr = np.trace(covs, axis1=1, axis2=2)
    lam = np.where(tr > 0, cov_ridge * tr / d, cov_ridge)
    covs[:, np.arange(d), np.arange(d)] += np.maximum(lam, 1e-12)[:, None]
    return weights, means, covs


def gmm_log_posteriors(model: GmmModel, points) -> np.ndarray:
    """Log responsibilities ``log P(component k | x_i)``, shape (N, K)."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    if X.shape[1] != model.means.shape[1]:
        raise DimensionError(
            f"points have dimensionality {X.shape[1]}, model expects {model.means.shape[1]}"
        )
    log_joint = _log_joint(X, model.weights, model.means, model._prec_chol)
    return log_joint - _logsumexp_rows(log_joint)[:, None]


def gmm_posteriors(model: GmmModel, points) -> np.ndarray:
    r = np.exp(gmm_log_posteriors(model, points))
    return r / r.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# mean shift


@dataclass(frozen=True, eq=False)
class MeanShiftResult:
    """``assignment`` is -1 for points that did not seed an ascent (zero weight)."""

    modes: np.ndarray
    assignment: np.ndarray
    iterations: int = 0

    def __len__(self) -> int:
        return len(self.modes)


def mean_shift(
    points,
    weights,
    bandwidth: float = 0.25,
    merge_radius: float | None = None,
    max_iter: int = 300,
    tol: float = 1e-7,
) -> MeanShiftResult:
    """Flat-kernel mean shift over 2-D positions with per-sample weights.

    Every point of positive weight ascends to the weighted mean of the
    points within ``bandwidth``. Converged positions are merged greedily:
    points are visited in order of decreasing kernel mass and join the first
    existing mode within ``merge_radius``, otherwise they found a new mode.
    """
    P = _check_points(points)
    w = np.asarray(weights, dtype=float).ravel()
    if w.size != P.shape[0]:
        raise ValidationError("need one weight per point")
    if bandwidth <= 0:
        raise ValidationError("bandwidth must be positive")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValidationError("weights must be finite and nonnegative")
    if merge_radius is None:
        merge_radius = bandwidth / 2
    seeds = np.flatnonzero(w > 0)
    assignment = np.full(P.shape[0], -1, dtype=int)
    if seeds.size == 0:
        return MeanShiftResult(np.zeros((0, P.shape[1])), assignment, 0)

    support = P[seeds]
    sw = w[seeds]
    bw2 = bandwidth * bandwidth
    cur = support.copy()
    active = np.ones(len(cur), dtype=bool)
    it = 0
    for it in range(1, max_iter + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        inside = _sq_dists(cur[idx], support) <= bw2
        kw = inside * sw
        mass = kw.sum(axis=1)
        new = (kw @ support) / mass[:, None]
        moved = np.sqrt(((new - cur[idx]) ** 2).sum(axis=1))
        cur[idx] = new
        active[idx[moved < tol * bandwidth]] = False
    mass = ((_sq_dists(cur, support) <= bw2) * sw).sum(axis=1)

    order = np.lexsort((np.arange(len(cur)), -mass))
    modes: list[np.ndarray] = []
    label = np.empty(len(cur), dtype=int)
    mr2 = merge_radius * merge_radius
    for i in order:
        for m, c in enumerate(modes):
            if ((cur[i] - c) ** 2).sum() < mr2:
                label[i] = m
                break
        else:
            label[i] = len(modes)
            modes.append(cur[i].copy())
    assignment[seeds] = label
    return MeanShiftResult(np.array(modes), assignment, it)
