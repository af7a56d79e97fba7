"""Generational evolution: selection, variation operators and effort accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import tree as tr
from .primitives import BINARY, Primitive, UNARY
from .tree import Node, ProgramTree

OPERATORS = ("crossover", "standard_mut", "swap_mut", "shrink_mut", "ephemeral_mut", "reproduction")
MAX_RETRIES = 5
MUTATION_DEPTH = 5


@dataclass
class Individual:
    tree: ProgramTree
    fit_errors: Optional[int] = None
    evaluated: bool = False

    @property
    def size(self) -> int:
        return self.tree.size

    def copy(self) -> "Individual":
        # trees are immutable, so the copy may share it along with the cached fitness
        return Individual(self.tree, self.fit_errors, self.evaluated)


@dataclass(frozen=True)
class EvolutionParams:
    population_size: int = 1000
    generations: int = 100
    tournament_size: int = 2
    p_crossover: float = 0.7
    p_standard_mut: float = 0.05
    p_swap_mut: float = 0.05
    p_shrink_mut: float = 0.05
    p_ephemeral_mut: float = 0.05
    p_reproduction: float = 0.1
    lexicographic: bool = False
    max_depth: int = 17
    init_min_depth: int = 2
    init_max_depth: int = 5
    cache_fitness: bool = True

    def __post_init__(self):
        probs = self.probabilities
        if any(p < 0 for p in probs):
            raise ValueError("operator probabilities must be nonnegative")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValueError(f"operator probabilities must sum to 1, got {math.fsum(probs)!r}")
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if self.generations < 0:
            raise ValueError("generations must be nonnegative")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be at least 1")
        if not 1 <= self.init_min_depth <= self.init_max_depth <= self.max_depth:
            raise ValueError("need 1 <= init_min_depth <= init_max_depth <= max_depth")

    @property
    def probabilities(self) -> tuple[float, ...]:
        return (self.p_crossover, self.p_standard_mut, self.p_swap_mut,
                self.p_shrink_mut, self.p_ephemeral_mut, self.p_reproduction)


@dataclass
class EffortLedger:
    """Running count of primitives evaluated, weighted by samples seen.

    With ``keep_log`` every charge is recorded as ``(tag, size, n_samples)``.
    """

    total: int = 0
    keep_log: bool = False
    log: list = field(default_factory=list)

    def charge(self, size: int, n_samples: int, tag: str = "fit") -> None:
        self.total += int(size) * int(n_samples)
        if self.keep_log:
            self.log.append((tag, int(size), int(n_samples)))


# -- population ------------------------------------------------------------------

def init_population(rng: np.random.Generator, params: EvolutionParams,
                    fit_X: np.ndarray) -> list[Individual]:
    """Ramped half-and-half over ``init_min_depth..init_max_depth``."""
    depths = list(range(params.init_min_depth, params.init_max_depth + 1))
    pop = []
    for i in range(params.population_size):
        d = depths[(i // 2) % len(depths)]
        method = "full" if i % 2 == 0 else "grow"
        pop.append(Individual(tr.generate_tree(rng, method, d, fit_X)))
    return pop


def evaluate_population(pop: list[Individual], fit_X: np.ndarray, fit_y: np.ndarray,
                        ledger: EffortLedger, force: bool = False) -> None:
    if len(fit_y) == 0:
        raise ValueError("fitness set is empty")
    for ind in pop:
        if ind.evaluated and not force:
            continue
        ind.fit_errors = tr.error_count(ind.tree, fit_X, fit_y)
        ind.evaluated = True
        ledger.charge(ind.size, len(fit_y))


def tournament_select(rng: np.random.Generator, pop: list[Individual], tournament_size: int,
                      lexicographic: bool = False) -> Individual:
    best = None
    for idx in rng.integers(len(pop), size=tournament_size):
        cand = pop[idx]
        if best is None or cand.fit_errors < best.fit_errors:
            best = cand
        elif lexicographic and cand.fit_errors == best.fit_errors and cand.size < best.size:
            best = cand
    return best


# -- variation operators --------------------------------------------------------------

def _depth_limited(make: Callable[[], ProgramTree], parent: Individual,
                   max_depth: int) -> Individual:
    for _ in range(MAX_RETRIES):
        child = make()
        if child.depth <= max_depth:
            return Individual(child)
    return parent.copy()


def crossover(rng: np.random.Generator, parent1: Individual, parent2: Individual,
              max_depth: int) -> Individual:
    """Subtree crossover producing a single offspring from ``parent1``."""
    def make():
        cut1 = tr.select_node(rng, parent1.tree)
        cut2 = tr.select_node(rng, parent2.tree)
        return tr.replace_subtree(parent1.tree, cut1, parent2.tree.subtree(cut2))
    return _depth_limited(make, parent1, max_depth)


def mutate_standard(rng: np.random.Generator, parent: Individual, max_depth: int,
                    fit_X: np.ndarray) -> Individual:
    def make():
        site = tr.select_node(rng, parent.tree)
        fresh = tr.generate_tree(rng, "grow", MUTATION_DEPTH, fit_X)
        return tr.replace_subtree(parent.tree, site, fresh)
    return _depth_limited(make, parent, max_depth)


def mutate_swap(rng: np.random.Generator, parent: Individual, fit_X: np.ndarray) -> Individual:
    site = tr.select_node(rng, parent.tree)
    kind = parent.tree.nodes[site].kind
    if kind.arity == 0:
        node = tr.ephemeral_node(rng, fit_X) if kind is Primitive.X else Node(Primitive.X)
    else:
        group = BINARY if kind.arity == 2 else UNARY
        others = [k for k in group if k is not kind]
        node = Node(others[rng.integers(len(others))])
    return Individual(tr.replace_node(parent.tree, site, node))


def mutate_shrink(rng: np.random.Generator, parent: Individual) -> Individual:
    t = parent.tree
    sites = [i for i, node in enumerate(t.nodes) if node.kind.arity > 0]
    if not sites:
        return parent.copy()
    site = sites[rng.integers(len(sites))]
    kids = t.children(site)
    keep = kids[rng.integers(len(kids))]
    return Individual(tr.replace_subtree(t, site, t.subtree(keep)))


def mutate_ephemeral(rng: np.random.Generator, parent: Individual, fit_X: np.ndarray) -> Individual:
    t = parent.tree
    sites = [i for i, node in enumerate(t.nodes) if node.kind is Primitive.E]
    if not sites:
        return parent.copy()
    site = sites[rng.integers(len(sites))]
    return Individual(tr.replace_node(t, site, tr.ephemeral_node(rng, fit_X)))


def draw_operator(rng: np.random.Generator, params: EvolutionParams) -> str:
    cumulative = np.cumsum(params.probabilities)
    idx = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
    return OPERATORS[min(idx, len(OPERATORS) - 1)]


def next_generation(rng: np.random.Generator, pop: list[Individual], params: EvolutionParams,
                    fit_X: np.ndarray, fit_y: np.ndarray, ledger: EffortLedger) -> list[Individual]:
    def select():
        return tournament_select(rng, pop, params.tournament_size, params.lexicographic)

    offspring = []
    for _ in range(params.population_size):
        op = draw_operator(rng, params)
        if op == "crossover":
            p1 = select()
            p2 = select()
            child = crossover(rng, p1, p2, params.max_depth)
        elif op == "standard_mut":
            child = mutate_standard(rng, select(), params.max_depth, fit_X)
        elif op == "swap_mut":
            child = mutate_swap(rng, select(), fit_X)
        elif op == "shrink_mut":
            child = mutate_shrink(rng, select())
        elif op == "ephemeral_mut":
            child = mutate_ephemeral(rng, select(), fit_X)
        else:
            child = select().copy()
        offspring.append(child)
    evaluate_population(offspring, fit_X, fit_y, ledger, force=not params.cache_fitness)
    return offspring


def evolve(rng: np.random.Generator, params: EvolutionParams, fit_X: np.ndarray,
           fit_y: np.ndarray, ledger: EffortLedger,
           on_generation: Optional[Callable[[int, list[Individual]], None]] = None,
           population: Optional[list[Individual]] = None) -> list[Individual]:
    """Run generation 0 plus ``params.generations`` generations.

    ``on_generation(g, pop)`` sees every evaluated population, including the
    initial one.  Returns the final population.
    """
    if population is None:
        population = init_population(rng, params, fit_X)
    else:
        population = [ind.copy() for ind in population]
    evaluate_population(population, fit_X, fit_y, ledger, force=not params.cache_fitness)
    if on_generation is not None:
        on_generation(0, population)
    for g in range(1, params.generations + 1):
        population = next_generation(rng, population, params, fit_X, fit_y, ledger)
        if on_generation is not None:
            on_generation(g, population)
    return population


def with_strategy(params: EvolutionParams, lexicographic: bool) -> EvolutionParams:
    return replace(params, lexicographic=lexicographic)
