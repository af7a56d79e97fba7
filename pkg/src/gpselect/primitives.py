"""Primitive set for vector/scalar GP classifiers.

Values flowing through a program are either scalars or vectors of the
feature-space dimension ``n``.  The same kernels serve single-sample
evaluation (:func:`apply_primitive`) and batched evaluation over a whole
data matrix (:mod:`gpselect.tree`): a batch of scalars is an ``(m, 1)``
array, a batch of vectors an ``(m, n)`` array, and numpy broadcasting
then reproduces the scalar-repetition rule for binary primitives.
"""

from __future__ import annotations

import enum
from typing import Callable, Sequence, Union

import numpy as np

Value = Union[float, np.ndarray]

DIV_THRESHOLD = 0.001


class Primitive(enum.Enum):
    ADD = ("ADD", 2)
    SUB = ("SUB", 2)
    MUL = ("MUL", 2)
    DIV = ("DIV", 2)
    MXF = ("MXF", 2)
    MNF = ("MNF", 2)
    ABS = ("ABS", 1)
    SLN = ("SLN", 1)
    SUM = ("SUM", 1)
    MEA = ("MEA", 1)
    MXV = ("MXV", 1)
    MIV = ("MIV", 1)
    L2 = ("L2", 1)
    E = ("E", 0)
    X = ("X", 0)

    def __init__(self, tag: str, arity: int) -> None:
        self.tag = tag
        self.arity = arity

    def __repr__(self) -> str:
        return f"Primitive.{self.tag}"

    @property
    def is_terminal(self) -> bool:
        return self.arity == 0


BINARY = tuple(p for p in Primitive if p.arity == 2)
UNARY = tuple(p for p in Primitive if p.arity == 1)
TERMINALS = (Primitive.E, Primitive.X)
FUNCTIONS = BINARY + UNARY
# componentwise unary primitives keep the argument's shape
ELEMENTWISE = (Primitive.ABS, Primitive.SLN)
REDUCERS = (Primitive.SUM, Primitive.MEA, Primitive.MXV, Primitive.MIV, Primitive.L2)

BY_TAG = {p.tag: p for p in Primitive}
BY_TAG["MIF"] = Primitive.MNF


def _protected_div(a, b):
    small = np.abs(b) < DIV_THRESHOLD
    safe = np.where(small, 1.0, b)
    return np.where(small, 1.0, a / safe)


_BINARY_FNS: dict[Primitive, Callable] = {
    Primitive.ADD: np.add,
    Primitive.SUB: np.subtract,
    Primitive.MUL: np.multiply,
    Primitive.DIV: _protected_div,
    Primitive.MXF: np.maximum,
    Primitive.MNF: np.minimum,
}


def _reduce(kind: Primitive, x: np.ndarray) -> np.ndarray:
    if kind is Primitive.SUM:
        return x.sum(axis=-1, keepdims=True)
    if kind is Primitive.MEA:
        return x.mean(axis=-1, keepdims=True)
    if kind is Primitive.MXV:
        return x.max(axis=-1, keepdims=True)
    if kind is Primitive.MIV:
        return x.min(axis=-1, keepdims=True)
    if kind is Primitive.L2:
        return np.sqrt((x * x).sum(axis=-1, keepdims=True))
    raise ValueError(f"{kind!r} is not a vector-to-scalar primitive")


def apply_batch(kind: Primitive, args: Sequence[np.ndarray], scalar: Sequence[bool]) -> np.ndarray:
    """Apply ``kind`` to batched arguments.

    ``args`` are arrays whose last axis has length 1 (scalar) or ``n``
    (vector); ``scalar`` flags which is which, since the two coincide when
    ``n == 1``.
    """
    if kind.arity == 2:
        return _BINARY_FNS[kind](args[0], args[1])
    (x,) = args
    if kind is Primitive.ABS:
        return np.abs(x)
    if kind is Primitive.SLN:
        return np.clip(x, -1.0, 1.0)
    if scalar[0]:
        # reducers pass scalars through, L2 folds the sign
        return np.abs(x) if kind is Primitive.L2 else x
    return _reduce(kind, x)


def result_is_scalar(kind: Primitive, arg_scalar: Sequence[bool]) -> bool:
    """Static shape rule: whether ``kind`` yields a scalar for the given argument shapes."""
    if kind.is_terminal:
        return False
    if kind in REDUCERS:
        return True
    return all(arg_scalar)


def is_scalar(value: Value) -> bool:
    return np.ndim(value) == 0


def broadcast_binary(fn: Callable[[float, float], float], a: Value, b: Value, n: int) -> Value:
    """Apply a two-argument scalar function with scalar repetition.

    >>> broadcast_binary(lambda x, y: x + y, 2.0, np.array([1.0, 2.0, 3.0]), 3)
    array([3., 4., 5.])
    """
    if is_scalar(a) and is_scalar(b):
        return float(fn(float(a), float(b)))
    av = np.full(n, float(a)) if is_scalar(a) else np.asarray(a, dtype=float)
    bv = np.full(n, float(b)) if is_scalar(b) else np.asarray(b, dtype=float)
    if av.shape != (n,) or bv.shape != (n,):
        raise ValueError(f"vector arguments must have length {n}")
    return np.array([fn(x, y) for x, y in zip(av, bv)], dtype=float)


def apply_primitive(kind: Primitive, args: Sequence[Value], n: int) -> Value:
    """Evaluate a non-terminal primitive on single-sample values.

    Scalars are Python floats, vectors 1-D arrays of length ``n``.
    """
    if kind.is_terminal:
        raise ValueError(f"terminal {kind.tag} is evaluated by the tree, not here")
    if len(args) != kind.arity:
        raise ValueError(f"{kind.tag} takes {kind.arity} argument(s), got {len(args)}")
    flags = [is_scalar(a) for a in args]
    arrays = []
    for a, s in zip(args, flags):
        arr = np.atleast_1d(np.asarray(a, dtype=float))
        if not s and arr.shape != (n,):
            raise ValueError(f"vector arguments must have length {n}, got {arr.shape}")
        arrays.append(arr)
    with np.errstate(all="ignore"):
        out = apply_batch(kind, arrays, flags)
    if result_is_scalar(kind, flags):
        return float(out[0])
    return np.array(out, dtype=float).reshape(n)


def reduce_to_scalar(value: Value) -> float:
    """Collapse a program output to a scalar by summing vector components."""
    if is_scalar(value):
        return float(value)
    return float(np.sum(value))
