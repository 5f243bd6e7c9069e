import numpy as np
import pytest

from miace import Bag, Instance, MilDataset, load_dataset, save_dataset, split_by_lane
from miace.data import Sweep, load_sweeps, save_sweeps
from miace.exceptions import DimensionError, ParseError, ValidationError

from conftest import random_dataset

HEADER = "bag_id,label,lane_id,sweep_id,pos_x,pos_y," + ",".join(f"f_{i}" for i in range(8))


def _row(bag, label, vals, lane="1"):
    return f"{bag},{label},{lane},s1,0.0,0.0," + ",".join(str(v) for v in vals)


def test_counts_from_file(tmp_path):
    rng = np.random.default_rng(0)
    lines = [HEADER]
    for b in ("a", "b"):
        lines += [_row(b, 1, rng.standard_normal(8)) for _ in range(3)]
    lines += [_row("neg", 0, rng.standard_normal(8)) for _ in range(10)]
    p = tmp_path / "ds.csv"
    p.write_text("\n".join(lines) + "\n")
    ds = load_dataset(p)
    assert (ds.n_pos, ds.n_neg, ds.n_pos_bags, ds.dimensionality) == (6, 10, 2, 8)


def test_short_row_names_line(tmp_path):
    lines = [HEADER, _row("a", 1, range(8)), _row("a", 1, range(7)), _row("n", 0, range(8))]
    p = tmp_path / "ds.csv"
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(DimensionError) as err:
        load_dataset(p)
    assert err.value.line == 3
    assert "line 3" in str(err.value)


def test_bad_number_is_parse_error(tmp_path):
    p = tmp_path / "ds.csv"
    p.write_text(HEADER + "\n" + _row("a", 1, ["x"] * 8) + "\n")
    with pytest.raises(ParseError):
        load_dataset(p)


def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(7)
    for trial in range(5):
        ds = random_dataset(rng, d=5, lanes=["1", "2"])
        p = tmp_path / f"ds{trial}.csv"
        save_dataset(ds, p)
        back = load_dataset(p)
        assert back.same_as(ds)
        for a, b in zip(ds.bags, back.bags):
            assert np.array_equal(a.features, b.features)


def test_bag_rejects_empty():
    with pytest.raises(ValidationError):
        Bag("e", 1, np.zeros((0, 3)))
    with pytest.raises(ValidationError):
        Bag.from_instances("e", 1, [])


def test_dataset_needs_both_labels():
    with pytest.raises(ValidationError):
        MilDataset((Bag("a", 1, np.ones((2, 3))),))


def test_dataset_rejects_mixed_dimensionality():
    with pytest.raises(DimensionError):
        MilDataset((Bag("a", 1, np.ones((2, 3))), Bag("b", 0, np.ones((4, 4)))))


def test_instances_view():
    bag = Bag.from_instances("a", 1, [Instance(np.array([1.0, 2.0]), (0.5, 1.5), "s")])
    (inst,) = bag.instances
    assert inst.position == (0.5, 1.5)
    assert np.array_equal(inst.features, [1.0, 2.0])


def test_split_holds_out_lane():
    rng = np.random.default_rng(3)
    lanes = ["1", "2", "3", "4", "5"]
    ds = random_dataset(rng, n_pos_bags=10, n_neg_bags=5, lanes=lanes)
    train, test = split_by_lane(ds, "3")
    assert set(train.lanes) == {"1", "2", "4", "5"}
    assert set(test.lanes) == {"3"}


def test_split_single_lane_rejected():
    ds = random_dataset(np.random.default_rng(4), lanes=["1"])
    with pytest.raises(ValidationError):
        split_by_lane(ds, "1")


def test_split_is_partition():
    rng = np.random.default_rng(5)
    for _ in range(20):
        lanes = [str(v) for v in rng.integers(1, 4, size=8)]
        ds = random_dataset(rng, n_pos_bags=8, n_neg_bags=8, lanes=lanes)
        for lane in ds.lanes:
            try:
                train, test = split_by_lane(ds, lane)
            except ValidationError:
                continue
            ids_train = {b.id for b in train.bags}
            ids_test = {b.id for b in test.bags}
            assert not ids_train & ids_test
            assert ids_train | ids_test == {b.id for b in ds.bags}


def test_sweeps_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    sweeps = [Sweep(f"g{i}", rng.standard_normal((6, 3)), rng.random((6, 2)), "2") for i in range(3)]
    save_sweeps(sweeps, tmp_path / "s.csv")
    back = load_sweeps(tmp_path / "s.csv")
    assert [s.id for s in back] == ["g0", "g1", "g2"]
    for a, b in zip(sweeps, back):
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.positions, b.positions)
