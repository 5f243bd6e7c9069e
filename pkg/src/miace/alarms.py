"""Confidence map -> alarms.

Mean shift runs per sweep on sample positions, weighted by confidences that
clear ``conf_threshold``. Each mode becomes an alarm whose members are the
mode's cluster plus every sample of the sweep within ``d_halo`` of the mode.
The alarm score is the mean of ``w_i * conf_i`` where ``w_i`` is the
member's distance to the center over ``d_halo``, clamped to 1.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .ace import ConfidenceMap
from .clustering import mean_shift
from .exceptions import ParseError, ValidationError

__all__ = [
    "Alarm",
    "generate_alarms",
    "score_alarm",
    "save_alarms",
    "load_alarms",
    "DEFAULT_HALO",
    "DEFAULT_BANDWIDTH",
    "DEFAULT_THRESHOLD",
]

DEFAULT_HALO = 0.25
DEFAULT_BANDWIDTH = 0.25
DEFAULT_THRESHOLD = 0.2


@dataclass(frozen=True, eq=False)
class Alarm:
    center: tuple[float, float]
    member_positions: np.ndarray
    member_confidences: np.ndarray
    score: float
    sweep_id: str = ""
    n_members: int = 0

    def __post_init__(self):
        if self.n_members == 0:
            object.__setattr__(self, "n_members", len(self.member_confidences))

    @property
    def member_samples(self) -> list[tuple[tuple[float, float], float]]:
        return [
            ((float(p[0]), float(p[1])), float(c))
            for p, c in zip(self.member_positions, self.member_confidences)
        ]


def _halo_weights(positions, center, d_halo):
    dist = np.sqrt(((np.asarray(positions, dtype=float) - np.asarray(center, dtype=float)) ** 2).sum(axis=1))
    return np.minimum(dist / d_halo, 1.0)


def score_alarm(alarm_members, center, d_halo: float = DEFAULT_HALO) -> float:
    """Score a set of ``(position, confidence)`` members around ``center``."""
    members = list(alarm_members)
    if not members:
        raise ValidationError("an alarm needs at least one member")
    if not d_halo > 0:
        raise ValidationError("d_halo must be positive")
    pos = np.array([m[0] for m in members], dtype=float).reshape(-1, 2)
    conf = np.array([m[1] for m in members], dtype=float)
    return _score(pos, conf, center, d_halo)


def _score(pos, conf, center, d_halo):
    return float(np.mean(_halo_weights(pos, center, d_halo) * conf))


def _alarms_one_sweep(cmap, sweep_id, bandwidth, merge_radius, conf_threshold, d_halo):
    conf = cmap.confidence
    weights = np.where(conf >= conf_threshold, conf, 0.0)
    weights = np.maximum(weights, 0.0)
    ms = mean_shift(cmap.positions, weights, bandwidth=bandwidth, merge_radius=merge_radius)
    alarms = []
    for m, center in enumerate(ms.modes):
        dist2 = ((cmap.positions - center) ** 2).sum(axis=1)
        member = (ms.assignment == m) | (dist2 <= d_halo * d_halo)
        pos, c = cmap.positions[member], conf[member]
        alarms.append(
            Alarm(
                center=(float(center[0]), float(center[1])),
                member_positions=pos,
                member_confidences=c,
                score=_score(pos, c, center, d_halo),
                sweep_id=sweep_id,
            )
        )
    return alarms


def generate_alarms(
    cmap: ConfidenceMap,
    bandwidth: float = DEFAULT_BANDWIDTH,
    merge_radius: float | None = None,
    conf_threshold: float = DEFAULT_THRESHOLD,
    d_halo: float = DEFAULT_HALO,
) -> list[Alarm]:
    """Alarms for every sweep in the map, sorted by descending score.

    Equal scores keep sweep order, then mode order.
    """
    if len(cmap) == 0:
        raise ValidationError("confidence map is empty")
    if not d_halo > 0:
        raise ValidationError("d_halo must be positive")
    alarms = []
    for sid, sub in cmap.by_sweep().items():
        alarms.extend(_alarms_one_sweep(sub, sid, bandwidth, merge_radius, conf_threshold, d_halo))
    order = sorted(range(len(alarms)), key=lambda i: (-alarms[i].score, i))
    return [alarms[i] for i in order]


ALARM_COLUMNS = ["sweep_id", "center_x", "center_y", "score", "n_members"]


def save_alarms(alarms, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ALARM_COLUMNS)
        for a in alarms:
            w.writerow([a.sweep_id, repr(a.center[0]), repr(a.center[1]), repr(a.score), a.n_members])


def load_alarms(path) -> list[Alarm]:
    """Read an alarm CSV. Member samples are not stored, so loaded alarms
    carry only their center, score and member count."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ALARM_COLUMNS:
            raise ParseError(f"header must be {','.join(ALARM_COLUMNS)}", line=1)
        for row in reader:
            if not row:
                continue
            if len(row) != len(ALARM_COLUMNS):
                raise ParseError(f"expected {len(ALARM_COLUMNS)} columns", line=reader.line_num)
            try:
                cx, cy, score, n = float(row[1]), float(row[2]), float(row[3]), int(row[4])
            except ValueError as exc:
                raise ParseError(str(exc), line=reader.line_num) from None
            out.append(Alarm((cx, cy), np.zeros((0, 2)), np.zeros(0), score, row[0].strip(), n))
    return out
