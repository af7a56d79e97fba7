"""scikit-learn compatible GP classifier with best-of-run selection strategies."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import type_of_target
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import tree as tr
from .data import FIT_FRACTION, split_fit_validation
from .evolution import EffortLedger, EvolutionParams, Individual, evolve
from .model_selection import (
    STRATEGIES,
    BestOfRunTracker,
    pareto_front,
    update_baseline,
    update_validation,
)


@dataclass
class RunOutcome:
    tracker: BestOfRunTracker
    ledger: EffortLedger
    population: list[Individual]


def run_strategy(rng: np.random.Generator, strategy: str, params: EvolutionParams,
                 fit_X: np.ndarray, fit_y: np.ndarray,
                 valid_X: Optional[np.ndarray] = None, valid_y: Optional[np.ndarray] = None,
                 callback: Optional[Callable] = None,
                 population: Optional[list[Individual]] = None,
                 ledger: Optional[EffortLedger] = None) -> RunOutcome:
    """Evolve on an explicit fitness set and track the best-of-run individual.

    ``params.lexicographic`` is used as given; the strategy only decides how
    the best-of-run is picked.  Validation strategies need ``valid_X`` and
    ``valid_y``.
    """
    tracker = BestOfRunTracker(strategy)
    if tracker.uses_validation and (valid_X is None or valid_y is None or len(valid_y) == 0):
        raise ValueError(f"strategy {strategy!r} needs a nonempty validation set")
    ledger = ledger if ledger is not None else EffortLedger()

    def on_generation(g, pop):
        if tracker.uses_validation:
            update_validation(tracker, pareto_front(pop), valid_X, valid_y, g, ledger)
        else:
            update_baseline(tracker, pop, g)
        if callback is not None:
            callback(g, pop, ledger)

    final = evolve(rng, params, fit_X, fit_y, ledger, on_generation, population)
    return RunOutcome(tracker, ledger, final)


class GPClassifier(ClassifierMixin, BaseEstimator):
    """Binary classifier evolved by tree-based genetic programming.

    Parameters
    ----------
    strategy : {"baseline", "validation", "parsimony", "both"}
        How fitness is computed and the best-of-run chosen.  ``parsimony``
        and ``both`` break fitness ties in tournaments by tree size;
        ``validation`` and ``both`` hold out part of the training data and
        pick the best-of-run from each generation's Pareto front by
        validation error.
    population_size, generations, tournament_size : int
    p_crossover, p_standard_mut, p_swap_mut, p_shrink_mut, p_ephemeral_mut, p_reproduction : float
        Per-offspring operator probabilities; must sum to 1.
    max_depth : int
        Depth limit applied to every variation operator.
    init_min_depth, init_max_depth : int
        Depth ramp for ramped half-and-half initialization.
    fit_fraction : float
        Share of each class kept for fitness evaluation by the validation
        strategies.
    cache_fitness : bool
        Skip re-evaluation of verbatim copies.  ``False`` re-evaluates every
        individual each generation (diagnostic mode).
    random_state : int, numpy Generator or None
    callback : callable or None
        Called as ``callback(generation, population, ledger)`` after every
        generation, generation 0 included.

    Attributes
    ----------
    best_tree_ : ProgramTree
    best_generation_ : int
    effort_ : int
        Primitive evaluations weighted by the number of samples, including
        validation of Pareto-front members.
    train_error_ : float
        Error rate of ``best_tree_`` on the whole training input.
    validation_error_ : float or None
    classes_ : ndarray of shape (2,)
        ``classes_[0]`` is predicted for nonnegative program outputs.
    """

    def __init__(self, strategy="baseline", population_size=1000, generations=100,
                 tournament_size=2, p_crossover=0.7, p_standard_mut=0.05, p_swap_mut=0.05,
                 p_shrink_mut=0.05, p_ephemeral_mut=0.05, p_reproduction=0.1, max_depth=17,
                 init_min_depth=2, init_max_depth=5, fit_fraction=FIT_FRACTION,
                 cache_fitness=True, random_state=None, callback=None):
        self.strategy = strategy
        self.population_size = population_size
        self.generations = generations
        self.tournament_size = tournament_size
        self.p_crossover = p_crossover
        self.p_standard_mut = p_standard_mut
        self.p_swap_mut = p_swap_mut
        self.p_shrink_mut = p_shrink_mut
        self.p_ephemeral_mut = p_ephemeral_mut
        self.p_reproduction = p_reproduction
        self.max_depth = max_depth
        self.init_min_depth = init_min_depth
        self.init_max_depth = init_max_depth
        self.fit_fraction = fit_fraction
        self.cache_fitness = cache_fitness
        self.random_state = random_state
        self.callback = callback

    def evolution_params(self) -> EvolutionParams:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        return EvolutionParams(
            population_size=self.population_size,
            generations=self.generations,
            tournament_size=self.tournament_size,
            p_crossover=self.p_crossover,
            p_standard_mut=self.p_standard_mut,
            p_swap_mut=self.p_swap_mut,
            p_shrink_mut=self.p_shrink_mut,
            p_ephemeral_mut=self.p_ephemeral_mut,
            p_reproduction=self.p_reproduction,
            lexicographic=self.strategy in ("parsimony", "both"),
            max_depth=self.max_depth,
            init_min_depth=self.init_min_depth,
            init_max_depth=self.init_max_depth,
            cache_fitness=self.cache_fitness,
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        if type_of_target(y) != "binary":
            raise ValueError(f"GPClassifier needs exactly two classes, got target type "
                             f"{type_of_target(y)!r}")
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        self.n_features_in_ = X.shape[1]
        params = self.evolution_params()
        rng = np.random.default_rng(self.random_state)

        if self.strategy in ("validation", "both"):
            fit_idx, valid_idx = split_fit_validation(rng, y_idx, self.fit_fraction)
            outcome = run_strategy(rng, self.strategy, params, X[fit_idx], y_idx[fit_idx],
                                   X[valid_idx], y_idx[valid_idx], callback=self.callback)
        else:
            outcome = run_strategy(rng, self.strategy, params, X, y_idx, callback=self.callback)

        best = outcome.tracker.incumbent
        self.best_tree_ = best.individual.tree
        self.best_generation_ = best.generation
        self.ledger_ = outcome.ledger
        self.effort_ = outcome.ledger.total
        self.train_error_ = tr.error_count(self.best_tree_, X, y_idx) / len(y_idx)
        if outcome.tracker.uses_validation:
            self.validation_error_ = best.errors / len(valid_idx)
        else:
            self.validation_error_ = None
        return self

    def decision_function(self, X):
        """Program output per sample; vector outputs are summed."""
        check_is_fitted(self, "best_tree_")
        X = check_array(X, dtype=float, ensure_all_finite=False)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return tr.decision_values(self.best_tree_, X)

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[np.where(scores >= 0, 0, 1)]

    @property
    def best_size_(self) -> int:
        check_is_fitted(self, "best_tree_")
        return self.best_tree_.size
