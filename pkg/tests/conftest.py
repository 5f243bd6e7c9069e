import numpy as np
import pytest
from hypothesis import settings

from miace import Bag, MilDataset
from miace.whitening import BackgroundStats

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def identity_stats(d):
    return BackgroundStats(np.zeros(d), np.eye(d))


def random_stats(rng, d):
    A = rng.standard_normal((d, d))
    return BackgroundStats(rng.standard_normal(d), A @ A.T + 0.5 * np.eye(d))


def random_dataset(rng, d=4, n_pos_bags=5, n_neg_bags=2, max_bag=6, lanes=None):
    bags = []
    for j in range(n_pos_bags):
        n = int(rng.integers(1, max_bag + 1))
        lane = "" if lanes is None else str(lanes[j % len(lanes)])
        bags.append(Bag(f"p{j}", 1, rng.standard_normal((n, d)) + 0.5, lane_id=lane))
    for j in range(n_neg_bags):
        n = int(rng.integers(d + 1, 3 * max_bag + d))
        lane = "" if lanes is None else str(lanes[j % len(lanes)])
        bags.append(Bag(f"n{j}", 0, rng.standard_normal((n, d)), lane_id=lane))
    return MilDataset(tuple(bags))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
