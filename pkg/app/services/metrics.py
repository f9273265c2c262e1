"""
Aggregate metrics: pass@k and the review ranking of candidates.
"""
from fractions import Fraction
from math import comb
from typing import Iterable, List, Tuple

from app.core.errors import ValidationError
from app.models.evaluation import EvaluationOutcome

PASS_AT_K = (1, 5, 10)


def compute_pass_at_k(n: int, c: int, k: int) -> float:
    """
    Unbiased pass@k estimate: 1 - C(n-c, k) / C(n, k).

    Args:
        n: Attempts
        c: Passing attempts
        k: Sample size

    Returns:
        float: Probability that a k-subset contains a passing attempt

    Raises:
        ValidationError: Unless 0 <= c <= n and 1 <= k <= n
    """
    if n < 1 or not 0 <= c <= n:
        raise ValidationError(f"need 0 <= c <= n and n >= 1, got n={n} c={c}")
    if not 1 <= k <= n:
        raise ValidationError(f"need 1 <= k <= n, got k={k} n={n}")
    if n - c < k:
        return 1.0
    return float(1 - Fraction(comb(n - c, k), comb(n, k)))


def ranking_key(outcome: EvaluationOutcome) -> Tuple[int, int, int, int, int, str]:
    """Stage, TCs passed (desc), failure modes, source length, attempt, model."""
    return (
        outcome.stage.rank,
        -outcome.tcs_passed,
        len(outcome.modes),
        outcome.source_length,
        outcome.meta.attempt,
        outcome.meta.model,
    )


def rank_candidates(outcomes: Iterable[EvaluationOutcome]) -> List[EvaluationOutcome]:
    """Order candidates for human review, best first."""
    return sorted(outcomes, key=ranking_key)
