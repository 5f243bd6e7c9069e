"""Adaptive cosine estimator (ACE) scoring.

Signatures live in whitened space with unit norm, so the statistic reduces
to the cosine between the signature and the whitened, centered sample.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Instance, Sweep
from .exceptions import (
    DimensionError,
    ParseError,
    StaleSignatureError,
    ValidationError,
)
from .whitening import BackgroundStats

__all__ = [
    "Signature",
    "ConfidenceMap",
    "ace",
    "ace_batch",
    "unit_whitened",
    "score_sweep",
    "save_signature",
    "load_signature",
    "save_confidence_map",
    "load_confidence_map",
]

ZERO_NORM = 1e-12
SIGNATURE_SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class Signature:
    s_whitened: np.ndarray
    stats_fingerprint: str

    def __post_init__(self):
        s = np.array(self.s_whitened, dtype=float).ravel()
        norm = np.linalg.norm(s)
        if not np.isfinite(norm) or norm < ZERO_NORM:
            raise ValidationError("signature must be a finite nonzero vector")
        if abs(norm - 1.0) > 1e-10:
            s = s / norm
        s.setflags(write=False)
        object.__setattr__(self, "s_whitened", s)

    @classmethod
    def from_whitened(cls, v, stats: BackgroundStats) -> "Signature":
        """Build a signature from any nonzero whitened-space direction."""
        return cls(np.asarray(v, dtype=float), stats.fingerprint)

    @classmethod
    def from_raw(cls, v, stats: BackgroundStats) -> "Signature":
        return cls(stats.whiten_direction(v), stats.fingerprint)

    @property
    def dimensionality(self) -> int:
        return self.s_whitened.size

    def raw(self, stats: BackgroundStats) -> np.ndarray:
        """Raw-space direction (scale is arbitrary; ACE ignores it)."""
        self.check(stats)
        return stats.unwhiten_direction(self.s_whitened)

    def check(self, stats: BackgroundStats) -> None:
        if self.stats_fingerprint != stats.fingerprint:
            raise StaleSignatureError(
                f"signature was trained against stats {self.stats_fingerprint}, "
                f"got {stats.fingerprint}"
            )
        if self.dimensionality != stats.dimensionality:
            raise DimensionError("signature and stats disagree on dimensionality")

    def cosine(self, other) -> float:
        """Cosine to another signature or whitened direction."""
        v = other.s_whitened if isinstance(other, Signature) else np.asarray(other, dtype=float)
        return float(self.s_whitened @ v / np.linalg.norm(v))


def unit_whitened(stats: BackgroundStats, x: np.ndarray) -> np.ndarray:
    """Whiten rows of ``x`` and scale them to unit norm; near-zero rows become 0."""
    xw = stats.whiten(x)
    norms = np.linalg.norm(xw, axis=-1, keepdims=True)
    safe = np.where(norms < ZERO_NORM, 1.0, norms)
    return np.where(norms < ZERO_NORM, 0.0, xw / safe)


def ace(stats: BackgroundStats, signature: Signature, x) -> float:
    signature.check(stats)
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionError("ace takes a single vector; use ace_batch for arrays")
    return float(unit_whitened(stats, x) @ signature.s_whitened)


def ace_batch(stats: BackgroundStats, signature: Signature, X) -> np.ndarray:
    signature.check(stats)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return unit_whitened(stats, X) @ signature.s_whitened


@dataclass(frozen=True, eq=False)
class ConfidenceMap:
    """Per-sample ACE confidences with positions, possibly over several sweeps."""

    positions: np.ndarray
    sweep_ids: tuple[str, ...]
    confidence: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        conf = np.asarray(self.confidence, dtype=float).ravel()
        sids = tuple(str(s) for s in self.sweep_ids)
        if not (len(pos) == len(conf) == len(sids)):
            raise ValidationError("confidence map columns have different lengths")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "confidence", conf)
        object.__setattr__(self, "sweep_ids", sids)

    def __len__(self) -> int:
        return len(self.confidence)

    @property
    def entries(self) -> list[tuple[tuple[float, float], str, float]]:
        return [
            ((float(p[0]), float(p[1])), s, float(c))
            for p, s, c in zip(self.positions, self.sweep_ids, self.confidence)
        ]

    def by_sweep(self) -> dict[str, "ConfidenceMap"]:
        """Split into one map per sweep id, preserving first-appearance order."""
        ids = np.array(self.sweep_ids, dtype=object)
        out = {}
        for sid in dict.fromkeys(self.sweep_ids):
            m = ids == sid
            out[sid] = ConfidenceMap(self.positions[m], (sid,) * int(m.sum()), self.confidence[m])
        return out

    @classmethod
    def concat(cls, maps: Sequence["ConfidenceMap"]) -> "ConfidenceMap":
        maps = list(maps)
        if not maps:
            return cls(np.zeros((0, 2)), (), np.zeros(0))
        return cls(
            np.concatenate([m.positions for m in maps]),
            tuple(s for m in maps for s in m.sweep_ids),
            np.concatenate([m.confidence for m in maps]),
        )


def score_sweep(stats: BackgroundStats, signature: Signature, sweep) -> ConfidenceMap:
    """Score every sample of a sweep.

    ``sweep`` is a :class:`~miace.data.Sweep` or a sequence of
    :class:`~miace.data.Instance`.
    """
    if isinstance(sweep, Sweep):
        X, pos, sids = sweep.features, sweep.positions, (sweep.id,) * len(sweep)
    else:
        sweep = list(sweep)
        if not sweep:
            raise ValidationError("cannot score an empty sweep")
        if not all(isinstance(s, Instance) for s in sweep):
            raise TypeError("sweep must be a Sweep or a sequence of Instance")
        X = np.stack([np.asarray(s.features, dtype=float) for s in sweep])
        pos = np.array([s.position for s in sweep], dtype=float)
        sids = tuple(s.sweep_id for s in sweep)
    if len(X) == 0:
        raise ValidationError("cannot score an empty sweep")
    return ConfidenceMap(pos, sids, ace_batch(stats, signature, X))


# ---------------------------------------------------------------------------
# files


def save_signature(path, signature: Signature, initializer: str = "", objective_trace=()):
    obj = {
        "version": SIGNATURE_SCHEMA_VERSION,
        "d": signature.dimensionality,
        "signature": signature.s_whitened.tolist(),
        "stats_fingerprint": signature.stats_fingerprint,
        "initializer": initializer,
        "objective_trace": [float(v) for v in objective_trace],
    }
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)


def load_signature(path) -> tuple[Signature, dict]:
    """Read a signature file; returns the signature and the remaining metadata."""
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from None
    try:
        if obj["version"] != SIGNATURE_SCHEMA_VERSION:
            raise ParseError(f"unsupported signature schema version {obj['version']!r}")
        vec = np.array(obj["signature"], dtype=float)
        if vec.size != int(obj["d"]):
            raise DimensionError(f"signature has {vec.size} entries, header says d={obj['d']}")
        sig = Signature(vec, obj["stats_fingerprint"])
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed signature file: {exc}") from None
    meta = {
        "initializer": obj.get("initializer", ""),
        "objective_trace": list(obj.get("objective_trace", [])),
    }
    return sig, meta


def save_confidence_map(cmap: ConfidenceMap, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sweep_id", "pos_x", "pos_y", "confidence"])
        for (x, y), sid, c in zip(cmap.positions, cmap.sweep_ids, cmap.confidence):
            w.writerow([sid, repr(float(x)), repr(float(y)), repr(float(c))])


def load_confidence_map(path) -> ConfidenceMap:
    pos, sids, conf = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["sweep_id", "pos_x", "pos_y", "confidence"]:
            raise ParseError("header must be sweep_id,pos_x,pos_y,confidence", line=1)
        for row in reader:
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(f"expected 4 columns, found {len(row)}", line=reader.line_num)
            try:
                pos.append((float(row[1]), float(row[2])))
                conf.append(float(row[3]))
            except ValueError as exc:
                raise ParseError(str(exc), line=reader.line_num) from None
            sids.append(row[0].strip())
    return ConfidenceMap(np.array(pos, dtype=float).reshape(-1, 2), tuple(sids), np.array(conf))
