import numpy as np
import pytest
from hypothesis import given, strategies as st

from miace import Bag, MilDataset, fit_background, init_kmeans, init_mi_cr, init_original, init_ranked_kmeans, mic_rank
from miace.clustering import gmm_fit
from miace.exceptions import ValidationError
from miace.initializers import exemplar_points, exemplar_relevances, initialize, mic_ranks
from miace.objective import PreparedData
from miace.synth import make_mil_dataset

from conftest import identity_stats, random_dataset, random_stats


def naive_original(stats, ds):
    best, best_x = -np.inf, None
    for bag in ds.positive_bags:
        for x in bag.features:
            s = stats.whiten(x)
            if np.linalg.norm(s) < 1e-12:
                continue
            s = s / np.linalg.norm(s)
            val = 0.0
            for b in ds.positive_bags:
                val += max(_cos(stats, y, s) for y in b.features) / ds.n_pos_bags
            for b in ds.negative_bags:
                val -= sum(_cos(stats, y, s) for y in b.features) / len(b) / ds.n_neg_bags
            if val > best:
                best, best_x = val, s
    return best_x, best


def _cos(stats, y, s):
    w = stats.whiten(y)
    n = np.linalg.norm(w)
    return 0.0 if n < 1e-12 else float(w @ s / n)


def test_original_orthogonal():
    stats = identity_stats(2)
    e1, e2 = np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])
    ds = MilDataset((Bag("a", 1, e1), Bag("b", 1, e1), Bag("n", 0, e2)))
    r = init_original(stats, ds)
    assert np.allclose(r.signature.s_whitened, [1.0, 0.0])
    assert r.selection_score == 1.0
    assert r.candidate_count == 2 == ds.n_pos


def test_original_matches_naive_scan():
    rng = np.random.default_rng(11)
    for _ in range(10):
        ds = random_dataset(rng, d=3, n_pos_bags=6)
        stats = random_stats(rng, 3)
        s, v = naive_original(stats, ds)
        r = init_original(stats, ds)
        assert np.allclose(r.signature.s_whitened, s, atol=1e-12)
        assert abs(r.selection_score - v) < 1e-9


def test_kmeans_single_cluster_is_grand_mean():
    rng = np.random.default_rng(2)
    ds = random_dataset(rng, d=3)
    stats = fit_background(ds)
    r = init_kmeans(stats, ds, K=1)
    mean = stats.whiten(ds.features).mean(axis=0)
    assert r.candidate_count == 1
    assert np.allclose(r.signature.s_whitened, mean / np.linalg.norm(mean))


def planted_two_cluster(seed=0):
    site = make_mil_dataset(200, 400, 20, d=6, snr=4.0, seed=seed, witness_fraction=0.5, depth_scale_range=(1.0, 1.0))
    return site, fit_background(site.dataset)


def test_kmeans_finds_planted_cluster():
    site, stats = planted_two_cluster()
    r = init_kmeans(stats, site.dataset, K=2)
    assert r.candidate_count == 2
    assert r.signature.cosine(site.planted_whitened) >= 0.99


def test_mic_rank_extremes():
    # cluster 0 holds every positive instance, cluster 1 every negative one
    ds = MilDataset((Bag("a", 1, np.ones((2, 2))), Bag("b", 1, np.ones((1, 2))), Bag("n", 0, np.zeros((3, 2)))))
    assign = np.array([0, 0, 0, 1, 1, 1])
    assert mic_rank(0, assign, ds) == pytest.approx(1.0, abs=1e-15)
    assert mic_rank(1, assign, ds) == pytest.approx(0.0, abs=1e-15)


def hand_rank(k, assign, labels, bags, w):
    pos_bags = sorted({b for b, l in zip(bags, labels) if l})
    n_pos = sum(labels)
    n_neg = len(labels) - n_pos
    bags_in = len({b for a, l, b in zip(assign, labels, bags) if l and a == k})
    pos_in = sum(1 for a, l in zip(assign, labels) if l and a == k)
    neg_in = sum(1 for a, l in zip(assign, labels) if not l and a == k)
    return (w[0] * bags_in / len(pos_bags) + w[1] * pos_in / n_pos + w[2] * (1 - neg_in / n_neg)) / sum(w)


@given(st.integers(0, 2**31 - 1))
def test_mic_rank_hand_count(seed):
    rng = np.random.default_rng(seed)
    n, K = int(rng.integers(4, 40)), int(rng.integers(1, 6))
    labels = rng.random(n) < 0.5
    labels[0], labels[1] = True, False
    bags = np.where(labels, rng.integers(0, 5, n), 99)
    assign = rng.integers(0, K, n)
    w = rng.random(3) * np.array(rng.random(3) < 0.8)
    if w.sum() == 0:
        w[0] = 1.0
    ranks = mic_ranks(assign, labels, bags, K, w)
    for k in range(K):
        assert 0.0 <= ranks[k] <= 1.0
        assert abs(ranks[k] - hand_rank(k, assign, labels, bags, w)) < 1e-12


def test_mic_rank_bad_weights():
    with pytest.raises(ValidationError):
        mic_ranks(np.array([0, 0]), np.array([True, False]), np.array([0, 9]), 1, (0, 0, 0))


def test_ranked_kmeans_single_cluster_and_no_objective():
    rng = np.random.default_rng(4)
    ds = random_dataset(rng, d=3)
    stats = fit_background(ds)
    p = PreparedData(stats, ds)
    r = init_ranked_kmeans(stats, ds, K=1, prepared=p)
    assert r.candidate_count == 1 and r.objective_evals == 0 and p.objective_evals == 0
    assert r.selection_score == pytest.approx(mic_rank(0, np.zeros(ds.n_instances, int), ds))


def test_ranked_kmeans_prefers_target_cluster():
    site, stats = planted_two_cluster(1)
    r = init_ranked_kmeans(stats, site.dataset, K=2)
    assert r.signature.cosine(site.planted_whitened) >= 0.99


def test_exemplar_two_equal_posteriors():
    R = exemplar_relevances(np.log(np.array([[0.3, 0.7], [0.3, 0.7]])))
    assert np.allclose(R, 0.5)


def test_exemplar_singleton_bag():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((200, 3))
    g = gmm_fit(X, 3)
    x = rng.standard_normal((1, 3))
    assert np.allclose(exemplar_points(g, x), np.repeat(x, 3, axis=0))


def test_exemplar_relevances_and_hull():
    from scipy.optimize import linprog

    rng = np.random.default_rng(6)
    for trial in range(30):
        X = rng.standard_normal((100, 2)) * 2
        g = gmm_fit(X, 3, seed=trial)
        bag = rng.standard_normal((int(rng.integers(3, 9)), 2)) * 2
        from miace.clustering import gmm_log_posteriors

        R = exemplar_relevances(gmm_log_posteriors(g, bag))
        assert np.allclose(R.sum(axis=0), 1.0, atol=1e-12)
        for e in exemplar_points(g, bag):
            # feasibility of e = bag^T lam, lam >= 0, sum lam = 1
            A = np.vstack([bag.T, np.ones(len(bag))])
            res = linprog(np.zeros(len(bag)), A_eq=A, b_eq=np.append(e, 1.0), bounds=(0, None))
            assert res.status == 0


def test_mi_cr_candidate_count_and_singletons():
    rng = np.random.default_rng(8)
    pos = [Bag(f"p{j}", 1, rng.standard_normal((1, 3)) + 1) for j in range(6)]
    ds = MilDataset(tuple(pos) + (Bag("n", 0, rng.standard_normal((30, 3))),))
    stats = fit_background(ds)
    r = init_mi_cr(stats, ds, K=2)
    assert r.candidate_count == 2 * 6
    o = init_original(stats, ds)
    assert np.allclose(r.signature.s_whitened, o.signature.s_whitened)


def test_mi_cr_planted():
    site = make_mil_dataset(400, 800, 20, d=8, snr=3.0, seed=3)
    stats = fit_background(site.dataset)
    r = init_mi_cr(stats, site.dataset, K=5)
    assert r.signature.cosine(site.planted_whitened) >= 0.9


@pytest.mark.parametrize("method", ["original", "kmeans", "ranked-kmeans", "mi-cr"])
def test_eval_counts(method):
    site = make_mil_dataset(120, 150, 6, d=4, seed=1)
    stats = fit_background(site.dataset)
    p = PreparedData(stats, site.dataset)
    r = initialize(method, stats, site.dataset, K=3, prepared=p)
    expected = {"original": 120, "kmeans": 3, "ranked-kmeans": 0, "mi-cr": 18}[method]
    assert r.objective_evals == expected == p.objective_evals


def test_bad_k():
    ds = random_dataset(np.random.default_rng(1), d=3)
    with pytest.raises(ValidationError):
        init_kmeans(fit_background(ds), ds, K=0)
