"""Alarm labeling against ground truth, ROC curves, and lane-based cross validation."""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ace import ConfidenceMap, score_sweep
from .alarms import DEFAULT_BANDWIDTH, DEFAULT_HALO, DEFAULT_THRESHOLD, Alarm, generate_alarms
from .data import MilDataset, Sweep, split_by_lane
from .exceptions import ParseError, ValidationError
from .training import TrainConfig, TrainResult, train

__all__ = [
    "Target",
    "GroundTruth",
    "LabeledAlarm",
    "RocCurve",
    "AlarmConfig",
    "FoldResult",
    "CVResult",
    "label_alarms",
    "roc",
    "cross_validate",
    "load_truth",
    "save_truth",
    "save_roc",
    "load_roc",
    "METAL_CLASSES",
    "SUBSETS",
]

log = logging.getLogger(__name__)

METAL_CLASSES = ("high", "low", "none")
SUBSETS = ("high", "low", "all")


@dataclass(frozen=True)
class Target:
    id: str
    position: tuple[float, float]
    response_radius: float
    metal_class: str = "high"
    lane_id: str = ""

    def __post_init__(self):
        if not self.response_radius > 0:
            raise ValidationError(f"target {self.id!r}: response_radius must be > 0")
        if not all(np.isfinite(self.position)):
            raise ValidationError(f"target {self.id!r}: position must be finite")
        if self.metal_class not in METAL_CLASSES:
            raise ValidationError(f"target {self.id!r}: metal_class must be one of {METAL_CLASSES}")


@dataclass(frozen=True)
class GroundTruth:
    targets: tuple[Target, ...]

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        ids = [t.id for t in self.targets]
        if len(set(ids)) != len(ids):
            raise ValidationError("target ids must be unique")

    def __len__(self) -> int:
        return len(self.targets)

    def subset(self, subset: str) -> "GroundTruth":
        if subset not in SUBSETS:
            raise ValidationError(f"subset must be one of {SUBSETS}, got {subset!r}")
        if subset == "all":
            return self
        return GroundTruth(tuple(t for t in self.targets if t.metal_class == subset))

    def lane(self, lane_id) -> "GroundTruth":
        return GroundTruth(tuple(t for t in self.targets if t.lane_id == str(lane_id)))

    @property
    def positions(self) -> np.ndarray:
        return np.array([t.position for t in self.targets], dtype=float).reshape(-1, 2)

    @property
    def radii(self) -> np.ndarray:
        return np.array([t.response_radius for t in self.targets], dtype=float)


@dataclass(frozen=True)
class LabeledAlarm:
    alarm: Alarm
    is_target: bool
    target_id: str | None = None


def label_alarms(alarms: Sequence[Alarm], truth: GroundTruth) -> list[LabeledAlarm]:
    """An alarm is a hit when its center lies within the response radius of a
    target (boundary inclusive). The nearest qualifying target is recorded;
    equal distances go to the earlier target."""
    out = []
    tpos, radii = truth.positions, truth.radii
    for a in alarms:
        if len(truth) == 0:
            out.append(LabeledAlarm(a, False))
            continue
        dist = np.sqrt(((tpos - np.asarray(a.center)) ** 2).sum(axis=1))
        inside = dist <= radii
        if inside.any():
            j = int(np.argmin(np.where(inside, dist, np.inf)))
            out.append(LabeledAlarm(a, True, truth.targets[j].id))
        else:
            out.append(LabeledAlarm(a, False))
    return out


@dataclass(frozen=True)
class RocCurve:
    """``points`` are ``(false_alarms, pd, threshold)`` from the strictest
    threshold (``inf``, nothing declared) down to the lowest alarm score."""

    points: tuple[tuple[float, float, float], ...]
    auc: float
    n_targets: int

    @property
    def false_alarms(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def pd(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    @property
    def thresholds(self) -> np.ndarray:
        return np.array([p[2] for p in self.points])


def roc(labeled: Sequence[LabeledAlarm], truth: GroundTruth, subset: str = "all", area: float | None = None) -> RocCurve:
    """Sweep the threshold over distinct alarm scores, highest first.

    Detection credit counts each subset target at most once. Hits on
    targets outside the subset are neither detections nor false alarms.
    With ``area`` the false-alarm axis is a rate per unit area. The AUC is
    the trapezoid area with false alarms normalized by their maximum; when
    no false alarms occur it equals the final detection probability.
    """
    sub = truth.subset(subset)
    if len(sub) == 0:
        raise ValidationError(f"no targets in subset {subset!r}; pd is undefined")
    wanted = {t.id for t in sub.targets}
    relevant = [la for la in labeled if not la.is_target or la.target_id in wanted]
    scores = np.array([la.alarm.score for la in relevant], dtype=float)
    order = np.argsort(-scores, kind="stable")
    points = [(0.0, 0.0, float("inf"))]
    found: set[str] = set()
    fa = 0
    i = 0
    while i < len(order):
        thr = scores[order[i]]
        while i < len(order) and scores[order[i]] == thr:
            la = relevant[order[i]]
            if la.is_target:
                found.add(la.target_id)
            else:
                fa += 1
            i += 1
        points.append((float(fa), len(found) / len(sub), float(thr)))
    if area is not None:
        if not area > 0:
            raise ValidationError("area must be positive")
        points = [(f / area, p, t) for f, p, t in points]
    fa_arr = np.array([p[0] for p in points])
    pd_arr = np.array([p[1] for p in points])
    if fa_arr[-1] == 0:
        auc = float(pd_arr[-1])
    else:
        x = fa_arr / fa_arr[-1]
        auc = float(np.sum(np.diff(x) * (pd_arr[1:] + pd_arr[:-1]) / 2))
    return RocCurve(tuple(points), auc, len(sub))


# ---------------------------------------------------------------------------
# cross validation


@dataclass(frozen=True)
class AlarmConfig:
    bandwidth: float = DEFAULT_BANDWIDTH
    merge_radius: float | None = None
    conf_threshold: float = DEFAULT_THRESHOLD
    d_halo: float = DEFAULT_HALO

    def generate(self, cmap: ConfidenceMap) -> list[Alarm]:
        return generate_alarms(cmap, self.bandwidth, self.merge_radius, self.conf_threshold, self.d_halo)


@dataclass(frozen=True, eq=False)
class FoldResult:
    lane: str
    train_result: TrainResult
    sweep_ids: tuple[str, ...]
    alarms_init: tuple[Alarm, ...]
    alarms_opt: tuple[Alarm, ...]


@dataclass(frozen=True, eq=False)
class CVResult:
    folds: tuple[FoldResult, ...]
    labeled_init: tuple[LabeledAlarm, ...]
    labeled_opt: tuple[LabeledAlarm, ...]
    truth: GroundTruth
    skipped_lanes: tuple[str, ...] = ()

    def roc_init(self, subset="all") -> RocCurve:
        return roc(self.labeled_init, self.truth, subset)

    def roc_opt(self, subset="all") -> RocCurve:
        return roc(self.labeled_opt, self.truth, subset)

    @property
    def alarms_init(self) -> list[Alarm]:
        return [a for f in self.folds for a in f.alarms_init]

    @property
    def alarms_opt(self) -> list[Alarm]:
        return [a for f in self.folds for a in f.alarms_opt]


def _sorted_alarms(alarms):
    order = sorted(range(len(alarms)), key=lambda i: (-alarms[i].score, i))
    return [alarms[i] for i in order]


def cross_validate(
    dataset: MilDataset,
    sweeps: Sequence[Sweep],
    truth: GroundTruth,
    config: TrainConfig = TrainConfig(),
    alarm_config: AlarmConfig = AlarmConfig(),
) -> CVResult:
    """Hold out each lane in turn: train on the rest, score the held-out
    lane's sweeps with both the initial and the optimized signature, and
    pool the labeled alarms over folds."""
    lanes = dataset.lanes
    if len(lanes) < 2:
        raise ValidationError("lane-based cross validation needs at least 2 lanes")
    folds, skipped = [], []
    for lane in lanes:
        try:
            train_set, _ = split_by_lane(dataset, lane)
        except ValidationError as exc:
            warnings.warn(f"skipping fold for lane {lane!r}: {exc}", stacklevel=2)
            skipped.append(lane)
            continue
        result = train(train_set, config)
        test_sweeps = [sw for sw in sweeps if sw.lane_id == lane]
        a_init, a_opt = [], []
        for sw in test_sweeps:
            a_init.extend(alarm_config.generate(score_sweep(result.stats, result.initial_signature, sw)))
            a_opt.extend(alarm_config.generate(score_sweep(result.stats, result.optimized_signature, sw)))
        log.info("lane %s: %d sweeps, %d/%d alarms", lane, len(test_sweeps), len(a_init), len(a_opt))
        folds.append(
            FoldResult(
                lane,
                result,
                tuple(sw.id for sw in test_sweeps),
                tuple(_sorted_alarms(a_init)),
                tuple(_sorted_alarms(a_opt)),
            )
        )
    pooled_init = [a for f in folds for a in f.alarms_init]
    pooled_opt = [a for f in folds for a in f.alarms_opt]
    return CVResult(
        tuple(folds),
        tuple(label_alarms(pooled_init, truth)),
        tuple(label_alarms(pooled_opt, truth)),
        truth,
        tuple(skipped),
    )


# ---------------------------------------------------------------------------
# files

TRUTH_COLUMNS = ["target_id", "lane_id", "pos_x", "pos_y", "response_radius", "metal_class"]


def save_truth(truth: GroundTruth, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRUTH_COLUMNS)
        for t in truth.targets:
            w.writerow(
                [t.id, t.lane_id, repr(float(t.position[0])), repr(float(t.position[1])),
                 repr(float(t.response_radius)), t.metal_class]
            )


def load_truth(path) -> GroundTruth:
    targets = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != TRUTH_COLUMNS:
            raise ParseError(f"header must be {','.join(TRUTH_COLUMNS)}", line=1)
        for row in reader:
            if not row:
                continue
            if len(row) != len(TRUTH_COLUMNS):
                raise ParseError(f"expected {len(TRUTH_COLUMNS)} columns", line=reader.line_num)
            try:
                targets.append(
                    Target(
                        row[0].strip(),
                        (float(row[2]), float(row[3])),
                        float(row[4]),
                        row[5].strip(),
                        row[1].strip(),
                    )
                )
            except ValueError as exc:
                raise ParseError(str(exc), line=reader.line_num) from None
    return GroundTruth(tuple(targets))


def save_roc(curve: RocCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "false_alarms", "pd"])
        for fa, pd, thr in curve.points:
            w.writerow([repr(float(thr)), repr(float(fa)), repr(float(pd))])
        fh.write(f"auc={curve.auc!r}\n")


def load_roc(path) -> RocCurve:
    points, auc = [], None
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "threshold,false_alarms,pd":
        raise ParseError("header must be threshold,false_alarms,pd", line=1)
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if line.startswith("auc="):
            auc = float(line[4:])
            continue
        try:
            thr, fa, pd = (float(v) for v in line.split(","))
        except ValueError as exc:
            raise ParseError(str(exc), line=n) from None
        points.append((fa, pd, thr))
    if auc is None:
        raise ParseError("missing auc= footer")
    return RocCurve(tuple(points), auc, 0)
