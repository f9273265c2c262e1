"""
Goal thresholds used by the safety oracle.
Kept in one block so they can be tuned without touching the checks.
"""
from dataclasses import dataclass


@dataclass(frozen=True)
class GoalThresholds:
    """Thresholds for the per-function goal checks."""

    f1_speed_limit: float = 10.0  # m/s, braking must start above this speed
    f1_reaction_ticks: int = 2  # brake within this many ticks of crossing the limit
    acc_terminal_gap: float = 2.0  # m, minimum bumper gap at the end of an ACC episode
    commission_speed_ratio: float = 0.95  # of initial speed, on empty-road cases
    r3_progress_limit: float = 0.5  # step progress toward a non-drivable lane


GOAL_THRESHOLDS = GoalThresholds()
