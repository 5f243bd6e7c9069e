"""MIL data model: instances, labeled bags, datasets and sweeps, plus CSV I/O.

Storage is columnar (one ``(n, d)`` feature array per bag); ``Instance``
objects are produced on demand for callers that want per-sample records.

CSV schema, one row per instance, header required::

    bag_id,label,lane_id,sweep_id,pos_x,pos_y,f_0,...,f_{d-1}

Sweep files share the schema; their ``label`` column is ignored and rows are
grouped by ``sweep_id``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DimensionError, ParseError, ValidationError

__all__ = [
    "Instance",
    "Bag",
    "MilDataset",
    "Sweep",
    "load_dataset",
    "save_dataset",
    "load_sweeps",
    "save_sweeps",
    "split_by_lane",
]

_FIXED_COLUMNS = ["bag_id", "label", "lane_id", "sweep_id", "pos_x", "pos_y"]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Instance:
    features: np.ndarray
    position: tuple[float, float] = (0.0, 0.0)
    sweep_id: str = ""


@dataclass(frozen=True, eq=False)
class Bag:
    """A labeled group of instances.

    ``features`` is ``(n, d)``, ``positions`` is ``(n, 2)`` in meters and
    ``sweep_ids`` has one entry per row.
    """

    id: str
    label: int
    features: np.ndarray
    positions: np.ndarray = None
    sweep_ids: tuple[str, ...] = None
    lane_id: str = ""

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim == 1:
            feats = feats[None, :]
        if feats.ndim != 2 or feats.shape[0] == 0:
            raise ValidationError(f"bag {self.id!r} has no instances")
        n, d = feats.shape
        if d < 2:
            raise DimensionError(f"bag {self.id!r}: dimensionality must be >= 2, got {d}")
        if not np.all(np.isfinite(feats)):
            raise ValidationError(f"bag {self.id!r} contains non-finite features")
        if self.label not in (0, 1):
            raise ValidationError(f"bag {self.id!r}: label must be 0 or 1, got {self.label!r}")
        pos = np.zeros((n, 2)) if self.positions is None else np.asarray(self.positions, dtype=float)
        if pos.shape != (n, 2):
            raise ValidationError(f"bag {self.id!r}: positions must have shape ({n}, 2)")
        sweeps = ("",) * n if self.sweep_ids is None else tuple(str(s) for s in self.sweep_ids)
        if len(sweeps) != n:
            raise ValidationError(f"bag {self.id!r}: need one sweep id per instance")
        object.__setattr__(self, "label", int(self.label))
        object.__setattr__(self, "features", _frozen(feats))
        object.__setattr__(self, "positions", _frozen(pos))
        object.__setattr__(self, "sweep_ids", sweeps)
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "lane_id", str(self.lane_id))

    @classmethod
    def from_instances(cls, id, label, instances: Sequence[Instance], lane_id="") -> "Bag":
        if len(instances) == 0:
            raise ValidationError(f"bag {id!r} has no instances")
        dims = {np.asarray(inst.features).shape for inst in instances}
        if len(dims) != 1:
            raise DimensionError(f"bag {id!r}: instances disagree on dimensionality")
        return cls(
            id=id,
            label=label,
            features=np.stack([np.asarray(inst.features, dtype=float) for inst in instances]),
            positions=np.array([inst.position for inst in instances], dtype=float),
            sweep_ids=tuple(inst.sweep_id for inst in instances),
            lane_id=lane_id,
        )

    @property
    def positive(self) -> bool:
        return self.label == 1

    @property
    def dimensionality(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def instances(self) -> list[Instance]:
        return [
            Instance(self.features[i], (float(p[0]), float(p[1])), self.sweep_ids[i])
            for i, p in enumerate(self.positions)
        ]

    def same_as(self, other: "Bag") -> bool:
        """Exact (bitwise) equality of every field."""
        return (
            self.id == other.id
            and self.label == other.label
            and self.lane_id == other.lane_id
            and self.sweep_ids == other.sweep_ids
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.positions, other.positions)
        )


@dataclass(frozen=True, eq=False)
class MilDataset:
    bags: tuple[Bag, ...]

    def __post_init__(self):
        bags = tuple(self.bags)
        if not bags:
            raise ValidationError("dataset has no bags")
        dims = {b.dimensionality for b in bags}
        if len(dims) != 1:
            raise DimensionError(f"bags disagree on dimensionality: {sorted(dims)}")
        if not any(b.positive for b in bags):
            raise ValidationError("dataset needs at least one positive bag")
        if all(b.positive for b in bags):
            raise ValidationError("dataset needs at least one negative bag")
        object.__setattr__(self, "bags", bags)

    @property
    def dimensionality(self) -> int:
        return self.bags[0].dimensionality

    @cached_property
    def positive_bags(self) -> tuple[Bag, ...]:
        return tuple(b for b in self.bags if b.positive)

    @cached_property
    def negative_bags(self) -> tuple[Bag, ...]:
        return tuple(b for b in self.bags if not b.positive)

    @property
    def n_pos(self) -> int:
        """Total number of instances in positive bags."""
        return sum(len(b) for b in self.positive_bags)

    @property
    def n_neg(self) -> int:
        """Total number of instances in negative bags."""
        return sum(len(b) for b in self.negative_bags)

    @property
    def n_pos_bags(self) -> int:
        return len(self.positive_bags)

    @property
    def n_neg_bags(self) -> int:
        return len(self.negative_bags)

    @property
    def n_instances(self) -> int:
        return sum(len(b) for b in self.bags)

    @cached_property
    def lanes(self) -> tuple[str, ...]:
        """Lane ids in order of first appearance."""
        return tuple(dict.fromkeys(b.lane_id for b in self.bags))

    @cached_property
    def features(self) -> np.ndarray:
        """All instance features stacked in bag order."""
        return _frozen(np.concatenate([b.features for b in self.bags]))

    @cached_property
    def bag_index(self) -> np.ndarray:
        """Row-aligned with ``features``: index of the owning bag."""
        idx = np.repeat(np.arange(len(self.bags)), [len(b) for b in self.bags])
        idx.setflags(write=False)
        return idx

    @cached_property
    def instance_labels(self) -> np.ndarray:
        lab = np.repeat([b.label for b in self.bags], [len(b) for b in self.bags])
        lab.setflags(write=False)
        return lab

    def same_as(self, other: "MilDataset") -> bool:
        return len(self.bags) == len(other.bags) and all(
            a.same_as(b) for a, b in zip(self.bags, other.bags)
        )


@dataclass(frozen=True, eq=False)
class Sweep:
    """One pass of the sensor: the unit that gets scored into a confidence map."""

    id: str
    features: np.ndarray
    positions: np.ndarray
    lane_id: str = ""

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        pos = np.asarray(self.positions, dtype=float)
        if feats.ndim != 2 or feats.shape[0] == 0:
            raise ValidationError(f"sweep {self.id!r} is empty")
        if pos.shape != (feats.shape[0], 2):
            raise ValidationError(f"sweep {self.id!r}: positions must have shape (n, 2)")
        object.__setattr__(self, "features", _frozen(feats))
        object.__setattr__(self, "positions", _frozen(pos))
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "lane_id", str(self.lane_id))

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def instances(self) -> list[Instance]:
        return [
            Instance(self.features[i], (float(p[0]), float(p[1])), self.id)
            for i, p in enumerate(self.positions)
        ]


# ---------------------------------------------------------------------------
# CSV I/O


def _read_rows(path):
    """Yield ``(line_number, bag_id, label, lane_id, sweep_id, pos, features)``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("file is empty", line=1) from None
        header = [h.strip() for h in header]
        if header[:6] != _FIXED_COLUMNS:
            raise ParseError(f"header must start with {','.join(_FIXED_COLUMNS)}", line=1)
        fcols = header[6:]
        if fcols != [f"f_{i}" for i in range(len(fcols))]:
            raise ParseError("feature columns must be named f_0 .. f_{d-1}", line=1)
        d = len(fcols)
        if d < 2:
            raise DimensionError(f"dimensionality must be >= 2, got {d}", line=1)
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 6 + d:
                raise DimensionError(
                    f"expected {d} feature columns, found {len(row) - 6}", line=line
                )
            bag_id, label, lane_id, sweep_id = (c.strip() for c in row[:4])
            try:
                pos = (float(row[4]), float(row[5]))
                feats = np.array([float(c) for c in row[6:]])
            except ValueError as exc:
                raise ParseError(f"bad number: {exc}", line=line) from None
            if not np.all(np.isfinite(feats)) or not all(np.isfinite(pos)):
                raise ParseError("non-finite value", line=line)
            yield line, bag_id, label, lane_id, sweep_id, pos, feats


def load_dataset(path, format="csv") -> MilDataset:
    if format != "csv":
        raise ValueError(f"unsupported format {format!r}")
    groups: dict[str, dict] = {}
    for line, bag_id, label, lane_id, sweep_id, pos, feats in _read_rows(path):
        if label not in ("0", "1"):
            raise ParseError(f"label must be 0 or 1, got {label!r}", line=line)
        g = groups.get(bag_id)
        if g is None:
            g = groups[bag_id] = dict(label=int(label), lane=lane_id, f=[], p=[], s=[])
        elif g["label"] != int(label) or g["lane"] != lane_id:
            raise ParseError(f"bag {bag_id!r} has inconsistent label or lane", line=line)
        g["f"].append(feats)
        g["p"].append(pos)
        g["s"].append(sweep_id)
    if not groups:
        raise ValidationError(f"{path}: no instances")
    bags = [
        Bag(bid, g["label"], np.stack(g["f"]), np.array(g["p"]), tuple(g["s"]), g["lane"])
        for bid, g in groups.items()
    ]
    return MilDataset(tuple(bags))


def _header(d):
    return _FIXED_COLUMNS + [f"f_{i}" for i in range(d)]


def _fmt(x: float) -> str:
    return repr(float(x))


def save_dataset(dataset: MilDataset, path) -> None:
    if not isinstance(dataset, MilDataset):
        raise TypeError("expected a MilDataset")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_header(dataset.dimensionality))
        for bag in dataset.bags:
            for feats, pos, sid in zip(bag.features, bag.positions, bag.sweep_ids):
                w.writerow(
                    [bag.id, bag.label, bag.lane_id, sid, _fmt(pos[0]), _fmt(pos[1])]
                    + [_fmt(v) for v in feats]
                )


def load_sweeps(path) -> list[Sweep]:
    groups: dict[str, dict] = {}
    dims = None
    for line, _bag, _label, lane_id, sweep_id, pos, feats in _read_rows(path):
        dims = dims or feats.size
        g = groups.setdefault(sweep_id, dict(lane=lane_id, f=[], p=[]))
        if g["lane"] != lane_id:
            raise ParseError(f"sweep {sweep_id!r} spans several lanes", line=line)
        g["f"].append(feats)
        g["p"].append(pos)
    return [Sweep(sid, np.stack(g["f"]), np.array(g["p"]), g["lane"]) for sid, g in groups.items()]


def save_sweeps(sweeps: Iterable[Sweep], path) -> None:
    sweeps = list(sweeps)
    if not sweeps:
        raise ValidationError("no sweeps to write")
    d = sweeps[0].features.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_header(d))
        for sw in sweeps:
            if sw.features.shape[1] != d:
                raise DimensionError(f"sweep {sw.id!r} has dimensionality {sw.features.shape[1]}")
            for feats, pos in zip(sw.features, sw.positions):
                w.writerow(
                    [sw.id, 0, sw.lane_id, sw.id, _fmt(pos[0]), _fmt(pos[1])]
                    + [_fmt(v) for v in feats]
                )


def split_by_lane(dataset: MilDataset, held_out_lane) -> tuple[MilDataset, MilDataset]:
    """Partition bags into (train, test) with ``held_out_lane`` as the test side."""
    held_out_lane = str(held_out_lane)
    if held_out_lane not in dataset.lanes:
        raise ValidationError(f"unknown lane {held_out_lane!r}")
    train = tuple(b for b in dataset.bags if b.lane_id != held_out_lane)
    test = tuple(b for b in dataset.bags if b.lane_id == held_out_lane)
    if not train:
        raise ValidationError(f"holding out lane {held_out_lane!r} leaves no training bags")
    if not any(b.positive for b in train) or all(b.positive for b in train):
        raise ValidationError(
            f"holding out lane {held_out_lane!r} leaves a training split without both labels"
        )
    # A test lane may legitimately hold only one label; keep it as a bare bag tuple then.
    try:
        test_ds = MilDataset(test)
    except ValidationError:
        test_ds = _PartialDataset(test)
    return MilDataset(train), test_ds


class _PartialDataset(MilDataset):
    """Held-out side of a split that lacks one of the two labels."""

    def __post_init__(self):
        object.__setattr__(self, "bags", tuple(self.bags))
