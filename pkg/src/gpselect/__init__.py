"""Genetic programming for binary classification with validation-set and
parsimony-based best-of-run selection."""

from .data import Dataset, FoldPlan, SymmetricScaler, load_dataset, normalize
from .estimator import GPClassifier
from .experiment import run_experiment, summarize
from .primitives import Primitive
from .tree import ProgramTree, from_string, to_string

__all__ = [
    "Dataset",
    "FoldPlan",
    "GPClassifier",
    "Primitive",
    "ProgramTree",
    "SymmetricScaler",
    "from_string",
    "load_dataset",
    "normalize",
    "run_experiment",
    "summarize",
    "to_string",
]

__version__ = "0.1.0"
