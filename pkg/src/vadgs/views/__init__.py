from .models import SelectionResult, ViewPairScore
from .scoring import diversity_score, pair_score, score_candidates
from .selector import noise_factor, select_supporting_views

__all__ = [
    'ViewPairScore',
    'SelectionResult',
    'diversity_score',
    'pair_score',
    'score_candidates',
    'noise_factor',
    'select_supporting_views',
]
