"""Pairwise diversity scores and supporting-view subset selection."""
import itertools

import numpy as np
import pytest

from conftest import make_view
from vadgs.config import SelectionConfig
from vadgs.errors import TooFewCandidates
from vadgs.views import diversity_score, noise_factor, pair_score, score_candidates, select_supporting_views
from vadgs.voxels import CoVisibility, co_visibility

TEN = np.full(4, 10.0)


def brute_force_best(reference_scores, pair_scores, k, lam):
    best = -np.inf
    for subset in itertools.combinations(sorted(reference_scores), k):
        value = sum(reference_scores[i] for i in subset)
        value += lam * sum(pair_scores.get((a, b), 0.0) for a, b in itertools.combinations(subset, 2))
        best = max(best, value)
    return best


def random_tables(rng, n):
    ids = list(range(1, n + 1))
    unary = {i: float(rng.uniform(0.2, 1.0)) for i in ids}
    pairs = {(i, j): float(rng.uniform(0.0, 0.2)) for i, j in itertools.combinations(ids, 2)}
    return unary, pairs


# ── Scores ───────────────────────────────────────────────────────────────────

class TestDiversityScore:

    def test_known_pair(self):
        dist_dot, score = diversity_score(4, TEN, TEN, (2.0, 0.0, 1.0), np.radians(30))
        assert dist_dot == pytest.approx(400.0)
        assert score == pytest.approx(0.01)

    def test_forward_motion_scores_zero(self):
        assert diversity_score(4, TEN, TEN, (0.0, 0.0, 2.0), 0.5)[1] == 0.0

    def test_no_rotation_scores_zero(self):
        assert diversity_score(4, TEN, TEN, (2.0, 0.0, 1.0), 0.0)[1] == 0.0

    def test_no_overlap_scores_zero(self):
        assert diversity_score(0, np.zeros(0), np.zeros(0), (2.0, 0.0, 1.0), 0.5) == (0.0, 0.0)

    def test_scaling(self):
        base = diversity_score(4, TEN, TEN, (2.0, 0.0, 1.0), 0.4)[1]
        assert diversity_score(8, np.full(8, 10.0), np.full(8, 10.0), (2.0, 0.0, 1.0), 0.4)[1] == pytest.approx(base)
        assert diversity_score(4, 2 * TEN, 2 * TEN, (2.0, 0.0, 1.0), 0.4)[1] == pytest.approx(base / 4)
        assert diversity_score(4, TEN, TEN, (4.0, 0.0, 1.0), 0.4)[1] == pytest.approx(2 * base)

    def test_lateral_only_motion_stays_finite(self):
        _, score = diversity_score(4, TEN, TEN, (1.0, 0.0, 0.0), 0.2)
        assert np.isfinite(score) and score > 0


class TestPairScore:

    def _coverage(self, views, points):
        return {
            view.view_id: CoVisibility(view.view_id, np.arange(len(points)),
                                       np.linalg.norm(points - view.center, axis=1))
            for view in views
        }

    def test_record_fields(self):
        points = np.array([[0.0, 0.0, 10.0], [1.0, 0.0, 10.0]])
        ref, sup = make_view(0), make_view(1, center=(1.0, 0.0, 0.0), yaw_deg=-10.0)
        coverage = self._coverage([ref, sup], points)
        record = pair_score(ref, sup, co_visibility(coverage[0], coverage[1]))
        assert record.count == 2
        assert record.translation == pytest.approx((1.0, 0.0, 0.0))
        assert record.angle == pytest.approx(np.radians(10.0))
        assert record.score > 0

    def test_candidate_pairs_use_smaller_id_as_reference(self):
        points = np.array([[0.0, 0.0, 10.0]])
        views = {i: make_view(i, center=(0.5 * i, 0.0, 0.0), yaw_deg=-3.0 * i) for i in range(3)}
        coverage = self._coverage(views.values(), points)
        to_reference, between = score_candidates(0, coverage, views, [2, 1])
        assert sorted(to_reference) == [1, 2]
        assert list(between) == [(1, 2)]
        expected = pair_score(views[1], views[2], co_visibility(coverage[1], coverage[2])).score
        assert between[(1, 2)] == expected


# ── Selection ────────────────────────────────────────────────────────────────

class TestSelectSupportingViews:

    def test_takes_all_when_k_equals_candidates(self):
        result = select_supporting_views(0, {1: 0.1, 2: 0.2, 3: 0.3}, {}, SelectionConfig(k=3))
        assert sorted(result.chosen) == [1, 2, 3]

    def test_top_k_without_pair_terms(self):
        config = SelectionConfig(k=2, lam=0.0)
        result = select_supporting_views(0, {1: 0.5, 2: 0.5, 3: 0.9, 4: 0.1}, {(1, 2): 5.0}, config)
        assert result.chosen == [3, 1]
        assert result.objective == pytest.approx(1.4)

    def test_too_few_candidates(self):
        with pytest.raises(TooFewCandidates):
            select_supporting_views(0, {1: 0.5}, {}, SelectionConfig(k=2))

    def test_reference_is_never_a_candidate(self):
        result = select_supporting_views(0, {0: 9.0, 1: 0.5, 2: 0.4}, {}, SelectionConfig(k=2))
        assert 0 not in result.chosen

    def test_consecutive_uses_time(self):
        timestamps = {0: 0.5, 1: 0.0, 2: 0.4, 3: 0.7, 4: 0.9}
        config = SelectionConfig(k=2, strategy="consecutive")
        result = select_supporting_views(0, {1: 9.0, 2: 0.0, 3: 0.0, 4: 9.0}, {}, config, timestamps)
        assert sorted(result.chosen) == [2, 3]

    def test_consecutive_needs_timestamps(self):
        with pytest.raises(ValueError):
            select_supporting_views(0, {1: 1.0, 2: 1.0}, {}, SelectionConfig(k=1, strategy="consecutive"))

    @pytest.mark.parametrize("seed", range(20))
    def test_close_to_exhaustive_optimum(self, seed):
        rng = np.random.Generator(np.random.Philox(seed))
        n = int(rng.integers(5, 11))
        k = int(rng.integers(2, 5))
        unary, pairs = random_tables(rng, n)
        result = select_supporting_views(0, unary, pairs, SelectionConfig(k=k))
        assert result.objective >= 0.9 * brute_force_best(unary, pairs, k, 1.0)

    def test_noise_is_reproducible(self, rng):
        unary, pairs = random_tables(rng, 8)
        config = SelectionConfig(k=3, epsilon=0.3, seed=11)
        first = select_supporting_views(0, unary, pairs, config)
        second = select_supporting_views(0, dict(reversed(list(unary.items()))), pairs, config)
        assert first.chosen == second.chosen
        assert first.objective == second.objective

    def test_noise_factor_ignores_id_order(self):
        assert noise_factor(4, 0, 2, 5, epsilon=0.2) == noise_factor(4, 0, 5, 2, epsilon=0.2)
        assert noise_factor(4, 0, 2, 5, epsilon=0.0) == 1.0

    def test_prefers_lateral_views_over_forward_ones(self):
        """Forward-only candidates add no diversity; laterally displaced ones do"""
        target = np.array([[x, y, 10.0] for x in (-1.0, 0.0, 1.0) for y in (-1.0, 0.0, 1.0)])
        views = {0: make_view(0)}
        for offset, z in enumerate((0.5, 1.0, 1.5, 2.0, 2.5, 3.0)):
            views[1 + offset] = make_view(1 + offset, center=(0.0, 0.0, z))
        for offset, x in enumerate((-1.5, -1.0, -0.5, 0.5, 1.0, 1.5)):
            yaw = np.degrees(np.arctan2(-x, 10.0))
            views[7 + offset] = make_view(7 + offset, center=(x, 0.0, 0.0), yaw_deg=yaw)
        coverage = {
            i: CoVisibility(i, np.arange(len(target)), np.linalg.norm(target - view.center, axis=1))
            for i, view in views.items()
        }
        candidates = list(range(1, 13))
        to_reference, between = score_candidates(0, coverage, views, candidates)
        assert all(to_reference[i] == 0.0 for i in range(1, 7))
        result = select_supporting_views(0, to_reference, between, SelectionConfig(k=3, epsilon=0.0))
        assert set(result.chosen) <= set(range(7, 13))
