"""Supporting-view subset selection.

Maximizes  sum_i s_iR xi_iR + lam * sum_{i<j} s_ij xi_ij  over subsets of
size k, greedily and then by 1-swap local search. The noise factors xi are
drawn from N(1, epsilon) by a Philox generator keyed on the seed, the
reference view and the view ids of the term, so they do not depend on the
order candidates are visited in.
"""
import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..config import SelectionConfig
from ..errors import TooFewCandidates
from .models import SelectionResult

logger = logging.getLogger(__name__)


def noise_factor(seed: int, reference_id: int, *view_ids: int, epsilon: float = 0.0) -> float:
    if epsilon == 0:
        return 1.0
    key = np.random.SeedSequence([seed, reference_id, *sorted(view_ids)])
    return float(np.random.Generator(np.random.Philox(key)).normal(1.0, epsilon))


class _Objective:
    """Noisy subset objective with the noise drawn once per term"""

    def __init__(self, reference_id: int, reference_scores: Mapping[int, float],
                 pair_scores: Mapping[Tuple[int, int], float], config: SelectionConfig):
        self.config = config
        eps, seed = config.epsilon, config.seed
        self.unary = {i: s * noise_factor(seed, reference_id, i, epsilon=eps) for i, s in reference_scores.items()}
        self.pairwise: Dict[Tuple[int, int], float] = {}
        for (i, j), s in pair_scores.items():
            key = (min(i, j), max(i, j))
            self.pairwise[key] = s * noise_factor(seed, reference_id, *key, epsilon=eps)

    def pair(self, i: int, j: int) -> float:
        return self.pairwise.get((min(i, j), max(i, j)), 0.0)

    def gain(self, candidate: int, chosen: Sequence[int]) -> float:
        return self.unary.get(candidate, 0.0) + self.config.lam * sum(self.pair(candidate, j) for j in chosen)

    def value(self, subset: Sequence[int]) -> float:
        total = sum(self.unary.get(i, 0.0) for i in subset)
        total += self.config.lam * sum(self.pair(a, b) for n, a in enumerate(subset) for b in subset[n + 1:])
        return total


def _greedy(objective: _Objective, candidates: List[int], k: int) -> List[int]:
    chosen: List[int] = []
    remaining = list(candidates)
    for _ in range(k):
        best, best_gain = None, -np.inf
        for candidate in remaining:
            gain = objective.gain(candidate, chosen)
            if gain > best_gain:
                best, best_gain = candidate, gain
        chosen.append(best)
        remaining.remove(best)
    return chosen


def _swap_refine(objective: _Objective, candidates: List[int], chosen: List[int]) -> Tuple[List[int], int]:
    current = objective.value(chosen)
    swaps = 0
    improved = True
    while improved:
        improved = False
        for position in range(len(chosen)):
            for candidate in candidates:
                if candidate in chosen:
                    continue
                trial = chosen[:position] + [candidate] + chosen[position + 1:]
                value = objective.value(trial)
                if value > current + 1e-12 * abs(current):
                    chosen, current = trial, value
                    swaps += 1
                    improved = True
    return chosen, swaps


def select_supporting_views(
    reference_id: int,
    reference_scores: Mapping[int, float],
    pair_scores: Mapping[Tuple[int, int], float],
    config: Optional[SelectionConfig] = None,
    timestamps: Optional[Mapping[int, float]] = None,
) -> SelectionResult:
    """Pick ``config.k`` supporting views among the keys of ``reference_scores``.

    ``strategy='consecutive'`` ignores the scores and takes the candidates
    nearest in time to the reference (``timestamps`` must hold every id).
    """
    config = config or SelectionConfig()
    candidates = sorted(i for i in reference_scores if i != reference_id)
    if len(candidates) < config.k:
        raise TooFewCandidates(f"reference {reference_id}: {len(candidates)} candidates for k={config.k}")

    objective = _Objective(reference_id, reference_scores, pair_scores, config)
    swaps = 0
    if config.strategy == "consecutive":
        if timestamps is None:
            raise ValueError("consecutive selection needs view timestamps")
        t_ref = timestamps[reference_id]
        chosen = sorted(candidates, key=lambda i: (abs(timestamps[i] - t_ref), i))[:config.k]
    else:
        chosen = _greedy(objective, candidates, config.k)
        if config.swap_refine:
            chosen, swaps = _swap_refine(objective, candidates, chosen)

    result = SelectionResult(
        reference_id=reference_id,
        strategy=config.strategy,
        candidates=candidates,
        reference_scores={i: float(reference_scores[i]) for i in candidates},
        chosen=chosen,
        objective=objective.value(chosen),
        swaps=swaps,
    )
    logger.info("Reference %d: selected %s from %d candidates (%s, %d swaps)",
                reference_id, chosen, len(candidates), config.strategy, swaps)
    return result
