"""Best-of-run selection: Pareto filtering and incumbent tracking."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import tree as tr
from .evolution import EffortLedger, Individual

STRATEGIES = ("baseline", "validation", "parsimony", "both")


def dominates(a: tuple[int, int], b: tuple[int, int]) -> bool:
    """Whether point ``a`` Pareto-dominates ``b`` (both objectives minimized)."""
    return a[0] <= b[0] and a[1] <= b[1] and (a[0] < b[0] or a[1] < b[1])


def pareto_front(pop: Sequence[Individual]) -> list[Individual]:
    """Non-dominated individuals over (fit_errors, size).

    One representative per distinct point, the first in population order.
    Members are returned by increasing error count.
    """
    first: dict[tuple[int, int], Individual] = {}
    for ind in pop:
        first.setdefault((ind.fit_errors, ind.size), ind)
    front = []
    best_size = None
    for point in sorted(first):
        if best_size is None or point[1] < best_size:
            front.append(first[point])
            best_size = point[1]
    return front


@dataclass
class Incumbent:
    individual: Individual
    generation: int
    errors: int
    size: int

    @property
    def key(self) -> tuple[int, int]:
        return (self.errors, self.size)


class BestOfRunTracker:
    """Keeps the best individual seen under a strategy's selection criterion.

    For ``baseline`` and ``parsimony`` the criterion is (fitness errors,
    size); for ``validation`` and ``both`` it is (validation errors, size)
    over each generation's Pareto front.  Exact ties keep the incumbent.
    """

    def __init__(self, strategy: str):
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
        self.strategy = strategy
        self.incumbent: Optional[Incumbent] = None

    @property
    def uses_validation(self) -> bool:
        return self.strategy in ("validation", "both")

    def _offer(self, ind: Individual, errors: int, generation: int) -> None:
        if self.incumbent is None or (errors, ind.size) < self.incumbent.key:
            self.incumbent = Incumbent(ind.copy(), generation, errors, ind.size)


def update_baseline(tracker: BestOfRunTracker, pop: Sequence[Individual], generation: int) -> None:
    for ind in pop:
        tracker._offer(ind, ind.fit_errors, generation)


def update_validation(tracker: BestOfRunTracker, front: Sequence[Individual],
                      valid_X: np.ndarray, valid_y: np.ndarray, generation: int,
                      ledger: EffortLedger) -> None:
    if len(valid_y) == 0:
        raise ValueError("validation set is empty")
    for ind in front:
        errors = tr.error_count(ind.tree, valid_X, valid_y)
        ledger.charge(ind.size, len(valid_y), tag="valid")
        tracker._offer(ind, errors, generation)
