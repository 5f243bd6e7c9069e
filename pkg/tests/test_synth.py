import numpy as np
import pytest

from miace import SynthConfig, generate_site
from miace.exceptions import ConfigError
from miace.synth import background_model, make_mil_dataset, sample_background


def test_layout():
    site = generate_site(SynthConfig(seed=1))
    assert site.dataset.lanes == ("1", "2", "3", "4", "5")
    assert len(site.sweeps) == 20 and len(site.truth) == 20
    assert site.dataset.n_pos_bags == 20
    for bag in site.dataset.negative_bags:
        assert bag.id == f"L{bag.lane_id}-blank"
    # high-metal blank sweeps never reach a negative bag
    high = {t.id[2:] for t in site.truth.targets if t.metal_class == "high"}
    for bag in site.dataset.negative_bags:
        assert not {s[: -len("-blank")] for s in bag.sweep_ids} & high


def test_equal_seeds_identical():
    a, b = generate_site(SynthConfig(seed=4)), generate_site(SynthConfig(seed=4))
    assert a.dataset.same_as(b.dataset)
    for x, y in zip(a.sweeps, b.sweeps):
        assert np.array_equal(x.features, y.features)


def test_high_snr_limit():
    site = generate_site(SynthConfig(seed=2, snr=1e6))
    # whiten with the true background: target-region samples align with the planted direction
    from miace.whitening import BackgroundStats

    stats = BackgroundStats(site.background_mean, site.background_covariance)
    for bag in site.dataset.positive_bags:
        u = stats.whiten(bag.features)
        strongest = u[np.argmax(np.linalg.norm(u, axis=1))]
        assert strongest @ site.planted_whitened / np.linalg.norm(strongest) >= 0.999


def test_background_covariance_moment():
    cfg = SynthConfig(seed=3)
    _, cov = background_model(cfg)
    X = sample_background(cfg, 100_000, np.random.default_rng(0))
    emp = np.cov(X, rowvar=False)
    assert np.linalg.norm(emp - cov) / np.linalg.norm(cov) < 0.05


def test_planted_raw_matches_whitened():
    site = generate_site(SynthConfig(seed=6))
    evals, evecs = np.linalg.eigh(site.background_covariance)
    inv_root = (evecs / np.sqrt(evals)) @ evecs.T
    assert np.allclose(inv_root @ site.planted_signature, site.planted_whitened)


def test_make_mil_dataset_sizes():
    site = make_mil_dataset(103, 50, 10, d=4, n_neg_bags=3)
    ds = site.dataset
    assert (ds.n_pos, ds.n_neg, ds.n_pos_bags, ds.n_neg_bags) == (103, 50, 10, 3)


@pytest.mark.parametrize("kw", [dict(d=1), dict(lanes=1), dict(snr=0), dict(depth_scale_range=(1.0, 0.5))])
def test_bad_configs(kw):
    with pytest.raises(ConfigError):
        SynthConfig(**kw)
