import numpy as np
import pytest

from miace.bench import COMPLEXITY, loglog_slope, run_bench, save_bench
from miace.exceptions import ConfigError


def test_complexity_strings():
    assert COMPLEXITY == {
        "original": "O(N⁺(N⁺+N⁻))",
        "kmeans": "O(Ki(N⁺+N⁻)+K(N⁺+N⁻))",
        "ranked_kmeans": "O(Ki(N⁺+N⁻)+K)",
        "mi_cr": "O(Ki(N⁺+N⁻)+KN^{B⁺}(N⁺+N⁻))",
    }


def test_trials_minimum():
    with pytest.raises(ConfigError):
        run_bench([(20, 20, 2, 3)], trials=2)


def test_counts_and_csv(tmp_path):
    sizes = [(60, 40, 6, 3), (90, 40, 9, 4)]
    rep = run_bench(sizes, K=3, trials=3)
    for n_pos, n_neg, n_bags, d in sizes:
        assert rep.row("original", n_pos, n_neg, n_bags, d).candidates == n_pos
        assert rep.row("original", n_pos, n_neg, n_bags, d).objective_evals == n_pos
        assert rep.row("kmeans", n_pos, n_neg, n_bags, d).objective_evals == 3
        assert rep.row("ranked_kmeans", n_pos, n_neg, n_bags, d).objective_evals == 0
        assert rep.row("ranked_kmeans", n_pos, n_neg, n_bags, d).candidates == 3
        assert rep.row("mi_cr", n_pos, n_neg, n_bags, d).candidates == 3 * n_bags
        assert rep.row("mi_cr", n_pos, n_neg, n_bags, d).objective_evals == 3 * n_bags
    for r in rep.rows:
        assert len(r.times_ms) == 3 and len(r.cluster_iterations) == 3
    save_bench(rep, tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# original: O(N⁺(N⁺+N⁻))"
    assert lines[4] == "method,n_pos,n_neg,n_pos_bags,d,K,median_ms,candidates,objective_evals"
    assert len(lines) == 5 + 8
    assert rep.speedups()[(60, 40, 6, 3)]["original"] == 1.0


def test_loglog_slope():
    x = np.array([1, 2, 4, 8.0])
    assert loglog_slope(x, 3 * x**2) == pytest.approx(2.0)


@pytest.mark.slow
def test_original_superlinear_ranked_linear():
    # small N- so that the N+ * N+ term dominates Original's cost
    rep = run_bench([(4000, 500, 40, 8), (8000, 500, 80, 8), (16000, 500, 160, 8)], trials=3,
                    methods=("original", "ranked_kmeans"))
    assert rep.slope("original", 500) > 1.5
    assert rep.slope("ranked_kmeans", 500) < 1.3
