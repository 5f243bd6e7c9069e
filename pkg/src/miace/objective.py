"""The MI-ACE objective, bag representatives and the signature update.

All quantities are computed on whitened instances scaled to unit norm, so
the ACE response of instance ``i`` to a unit signature ``s`` is ``u_i @ s``.
The objective for a signature is

    mean over positive bags of  max_i u_i @ s
  - mean over negative bags of  mean_i u_i @ s

with bag-count normalization on both sides. For fixed representatives
this is linear in ``s``, and the update ``t / ||t||`` with
``t = mean(u_rep) - mean_bags(mean(u_neg))`` is its exact maximizer on the
unit sphere, which makes alternating optimization monotone.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from .ace import ZERO_NORM, Signature, unit_whitened
from .data import Bag, Instance, MilDataset
from .exceptions import DegenerateUpdateError, ValidationError
from .whitening import BackgroundStats

__all__ = [
    "PreparedData",
    "objective",
    "bag_representative",
    "update_signature",
]

# Candidate rows scored per block in batched objective evaluation.
_BLOCK = 256


class PreparedData:
    """Whitened views of a dataset, shared by the trainer and the initializers.

    ``objective_evals`` counts how many signatures have been scored with the
    objective through this object.
    """

    def __init__(self, stats: BackgroundStats, dataset: MilDataset, block: int = _BLOCK):
        if block < 1:
            raise ValidationError("block must be >= 1")
        self.block = int(block)
        if stats.dimensionality != dataset.dimensionality:
            raise ValidationError("stats and dataset disagree on dimensionality")
        self.stats = stats
        self.dataset = dataset
        self.objective_evals = 0

        pos_bags = dataset.positive_bags
        neg_bags = dataset.negative_bags
        self.pos_sizes = np.array([len(b) for b in pos_bags])
        self.neg_sizes = np.array([len(b) for b in neg_bags])
        self.pos_offsets = np.concatenate([[0], np.cumsum(self.pos_sizes)[:-1]])
        self.neg_offsets = np.concatenate([[0], np.cumsum(self.neg_sizes)[:-1]])
        self.pos_raw = np.concatenate([b.features for b in pos_bags])
        self.neg_raw = np.concatenate([b.features for b in neg_bags])
        self.pos_white = stats.whiten(self.pos_raw)
        self.neg_white = stats.whiten(self.neg_raw)
        self.pos_unit = _unit_rows(self.pos_white)
        self.neg_unit = _unit_rows(self.neg_white)
        # per-instance bag index within the positive-bag list
        self.pos_bag_of = np.repeat(np.arange(len(pos_bags)), self.pos_sizes)

    @cached_property
    def background_term(self) -> np.ndarray:
        """Mean over negative bags of the per-bag mean unit whitened instance."""
        per_bag = np.add.reduceat(self.neg_unit, self.neg_offsets, axis=0) / self.neg_sizes[:, None]
        return per_bag.mean(axis=0)

    @cached_property
    def all_white(self) -> np.ndarray:
        """Whitened instances of every bag in dataset order (used for clustering)."""
        return self.stats.whiten(self.dataset.features)

    def positive_bag_white(self, j: int) -> np.ndarray:
        o = self.pos_offsets[j]
        return self.pos_white[o : o + self.pos_sizes[j]]

    # -- objective -----------------------------------------------------------

    def objective_many(self, S: np.ndarray) -> np.ndarray:
        """Objective for each row of ``S`` (whitened directions, any scale).

        Rows with near-zero norm score ``-inf``.
        """
        S = np.atleast_2d(np.asarray(S, dtype=float))
        self.objective_evals += S.shape[0]
        norms = np.linalg.norm(S, axis=1)
        ok = norms >= ZERO_NORM
        out = np.full(S.shape[0], -np.inf)
        if not ok.any():
            return out
        S_unit = S[ok] / norms[ok, None]
        vals = np.empty(S_unit.shape[0])
        n_pos_bags = len(self.pos_sizes)
        step = self.block
        for lo in range(0, S_unit.shape[0], step):
            blk = S_unit[lo : lo + step]
            pos_resp = blk @ self.pos_unit.T
            pos_term = np.maximum.reduceat(pos_resp, self.pos_offsets, axis=1).sum(axis=1) / n_pos_bags
            neg_resp = blk @ self.neg_unit.T
            neg_term = (np.add.reduceat(neg_resp, self.neg_offsets, axis=1) / self.neg_sizes).mean(axis=1)
            vals[lo : lo + step] = pos_term - neg_term
        out[ok] = vals
        return out

    def objective(self, s: np.ndarray) -> float:
        s = np.asarray(s, dtype=float)
        if np.linalg.norm(s) < ZERO_NORM:
            raise ValidationError("objective is undefined for a zero signature")
        return float(self.objective_many(s[None, :])[0])

    def representatives(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Row indices (into the positive-instance block) of each bag's
        representative and their responses. Ties go to the lowest index."""
        resp = self.pos_unit @ (s / np.linalg.norm(s))
        idx = np.empty(len(self.pos_sizes), dtype=int)
        for j, (o, n) in enumerate(zip(self.pos_offsets, self.pos_sizes)):
            idx[j] = o + int(np.argmax(resp[o : o + n]))
        return idx, resp[idx]

    def update(self, s: np.ndarray) -> np.ndarray:
        idx, _ = self.representatives(s)
        t = self.pos_unit[idx].mean(axis=0) - self.background_term
        norm = np.linalg.norm(t)
        if norm < ZERO_NORM:
            raise DegenerateUpdateError(
                "update direction vanished: bag representatives average to the background term"
            )
        return t / norm


def _unit_rows(xw: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(xw, axis=1, keepdims=True)
    safe = np.where(norms < ZERO_NORM, 1.0, norms)
    return np.where(norms < ZERO_NORM, 0.0, xw / safe)


def _direction(s) -> np.ndarray:
    return s.s_whitened if isinstance(s, Signature) else np.asarray(s, dtype=float)


def objective(stats: BackgroundStats, s, dataset: MilDataset) -> float:
    """MI-ACE objective of a whitened signature ``s`` (vector or :class:`Signature`)."""
    if isinstance(s, Signature):
        s.check(stats)
    return PreparedData(stats, dataset).objective(_direction(s))


def bag_representative(stats: BackgroundStats, s, bag: Bag) -> Instance:
    """The instance of a positive bag with the largest ACE response to ``s``."""
    if not bag.positive:
        raise ValidationError("bag representatives are defined for positive bags only")
    if isinstance(s, Signature):
        s.check(stats)
    d = _direction(s)
    resp = unit_whitened(stats, bag.features) @ (d / np.linalg.norm(d))
    return bag.instances[int(np.argmax(resp))]


def update_signature(stats: BackgroundStats, dataset: MilDataset, current: Signature) -> Signature:
    current.check(stats)
    prepared = PreparedData(stats, dataset)
    return Signature(prepared.update(current.s_whitened), stats.fingerprint)
