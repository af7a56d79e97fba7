"""Prefix-ordered program trees: generation, evaluation and splicing."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .primitives import (
    BY_TAG,
    FUNCTIONS,
    TERMINALS,
    Primitive,
    Value,
    apply_batch,
    reduce_to_scalar,
    result_is_scalar,
)


class Sample(NamedTuple):
    features: np.ndarray
    label: int


@dataclass(frozen=True)
class Node:
    kind: Primitive
    payload: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if (self.kind is Primitive.E) != (self.payload is not None):
            raise ValueError("payload is required for E nodes and forbidden otherwise")


class ProgramTree:
    """Immutable program stored as a prefix sequence of nodes.

    ``spans[i]`` is the number of nodes in the subtree rooted at ``i``, so
    that subtree occupies ``nodes[i:i + spans[i]]``.
    """

    __slots__ = ("nodes", "spans", "_depth", "_shape")

    def __init__(self, nodes: Sequence[Node]):
        self.nodes = tuple(nodes)
        if not self.nodes:
            raise ValueError("a program tree needs at least one node")
        self.spans, self._depth, self._shape = _analyze(self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def __eq__(self, other) -> bool:
        return isinstance(other, ProgramTree) and self.nodes == other.nodes

    def __hash__(self) -> int:
        return hash(self.nodes)

    def __repr__(self) -> str:
        return f"ProgramTree({to_string(self)!r})"

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def depth(self) -> int:
        return self._depth

    @property
    def output_is_scalar(self) -> bool:
        return self._shape

    def subtree(self, index: int) -> "ProgramTree":
        return ProgramTree(self.nodes[index:index + self.spans[index]])

    def children(self, index: int) -> list[int]:
        out = []
        child = index + 1
        for _ in range(self.nodes[index].kind.arity):
            out.append(child)
            child += self.spans[child]
        return out

    def __str__(self) -> str:
        return to_string(self)


def _analyze(nodes):
    """Compute spans, depth and static output shape; validates arities."""
    spans = [0] * len(nodes)
    depths = [0] * len(nodes)
    scalar = [False] * len(nodes)
    stack: list[int] = []
    for i in range(len(nodes) - 1, -1, -1):
        kind = nodes[i].kind
        if len(stack) < kind.arity:
            raise ValueError("node arities do not form a tree")
        kids = [stack.pop() for _ in range(kind.arity)]
        spans[i] = 1 + sum(spans[k] for k in kids)
        depths[i] = 1 + max((depths[k] for k in kids), default=0)
        scalar[i] = result_is_scalar(kind, [scalar[k] for k in kids])
        stack.append(i)
    if len(stack) != 1:
        raise ValueError("node sequence describes more than one tree")
    return tuple(spans), depths[0], scalar[0]


def size(tree: ProgramTree) -> int:
    return tree.size


def depth(tree: ProgramTree) -> int:
    return tree.depth


def terminal(kind: Primitive, payload=None) -> ProgramTree:
    if payload is not None:
        payload = tuple(float(v) for v in payload)
    return ProgramTree([Node(kind, payload)])


def compose(kind: Primitive, *args: ProgramTree) -> ProgramTree:
    if len(args) != kind.arity:
        raise ValueError(f"{kind.tag} takes {kind.arity} argument(s)")
    nodes = [Node(kind)]
    for a in args:
        nodes.extend(a.nodes)
    return ProgramTree(nodes)


# -- generation ---------------------------------------------------------------

def random_terminal(rng: np.random.Generator, fit_X: np.ndarray) -> Node:
    kind = TERMINALS[rng.integers(len(TERMINALS))]
    if kind is Primitive.E:
        return ephemeral_node(rng, fit_X)
    return Node(kind)


def ephemeral_node(rng: np.random.Generator, fit_X: np.ndarray) -> Node:
    row = fit_X[rng.integers(len(fit_X))]
    return Node(Primitive.E, tuple(float(v) for v in row))


def generate_tree(rng: np.random.Generator, method: str, max_depth: int,
                  fit_X: np.ndarray) -> ProgramTree:
    """Generate a random tree with the ``full`` or ``grow`` method.

    ``full`` draws functions until ``max_depth`` and terminals there.
    ``grow`` draws uniformly from all 15 primitives above ``max_depth``.
    ``fit_X`` supplies the rows copied into ephemeral vectors.
    """
    if method not in ("full", "grow"):
        raise ValueError(f"unknown generation method {method!r}")
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    if len(fit_X) == 0:
        raise ValueError("cannot draw ephemeral vectors from an empty sample set")
    n_total = len(FUNCTIONS) + len(TERMINALS)
    nodes: list[Node] = []

    def build(d: int) -> None:
        if d == max_depth:
            nodes.append(random_terminal(rng, fit_X))
            return
        if method == "grow":
            pick = rng.integers(n_total)
            if pick >= len(FUNCTIONS):
                nodes.append(random_terminal(rng, fit_X))
                return
            kind = FUNCTIONS[pick]
        else:
            kind = FUNCTIONS[rng.integers(len(FUNCTIONS))]
        nodes.append(Node(kind))
        for _ in range(kind.arity):
            build(d + 1)

    build(1)
    return ProgramTree(nodes)


# -- evaluation ---------------------------------------------------------------

def evaluate_batch(tree: ProgramTree, X: np.ndarray) -> np.ndarray:
    """Evaluate ``tree`` on every row of ``X``.

    Returns an ``(m, 1)`` array if the program output is scalar, otherwise
    ``(m, n)``.
    """
    m, n = X.shape
    stack: list[tuple[np.ndarray, bool]] = []
    with np.errstate(all="ignore"):
        for node in reversed(tree.nodes):
            kind = node.kind
            if kind is Primitive.X:
                stack.append((X, False))
            elif kind is Primitive.E:
                stack.append((np.asarray(node.payload, dtype=float).reshape(1, n), False))
            else:
                args = [stack.pop() for _ in range(kind.arity)]
                flags = [s for _, s in args]
                out = apply_batch(kind, [a for a, _ in args], flags)
                stack.append((out, result_is_scalar(kind, flags)))
    out, _ = stack.pop()
    return np.broadcast_to(out, (m, out.shape[1]))


def decision_values(tree: ProgramTree, X: np.ndarray) -> np.ndarray:
    """Scalar program outputs, vector outputs summed over components."""
    out = evaluate_batch(tree, X)
    if out.shape[1] == 1:
        return out[:, 0].copy()
    with np.errstate(all="ignore"):
        return out.sum(axis=1)


def predict_batch(tree: ProgramTree, X: np.ndarray) -> np.ndarray:
    # NaN fails the >= test and lands in class 1
    return np.where(decision_values(tree, X) >= 0, 0, 1)


def evaluate(tree: ProgramTree, sample) -> Value:
    features = sample.features if isinstance(sample, Sample) else sample
    x = np.asarray(features, dtype=float).reshape(1, -1)
    out = evaluate_batch(tree, x)[0]
    if tree.output_is_scalar:
        return float(out[0])
    return np.array(out)


def classify(tree: ProgramTree, sample) -> int:
    s = reduce_to_scalar(evaluate(tree, sample))
    return 0 if s >= 0 else 1


def error_count(tree: ProgramTree, X: np.ndarray, y: np.ndarray) -> int:
    if len(y) == 0:
        raise ValueError("error count needs at least one sample")
    return int(np.count_nonzero(predict_batch(tree, X) != y))


# -- structural edits -----------------------------------------------------------

def select_node(rng: np.random.Generator, tree: ProgramTree) -> int:
    return int(rng.integers(tree.size))


def replace_subtree(tree: ProgramTree, index: int, replacement: ProgramTree) -> ProgramTree:
    if not 0 <= index < tree.size:
        raise IndexError(f"node index {index} out of range for tree of size {tree.size}")
    end = index + tree.spans[index]
    return ProgramTree(tree.nodes[:index] + replacement.nodes + tree.nodes[end:])


def replace_node(tree: ProgramTree, index: int, node: Node) -> ProgramTree:
    if node.kind.arity != tree.nodes[index].kind.arity:
        raise ValueError("replacement node must have the same arity")
    nodes = list(tree.nodes)
    nodes[index] = node
    return ProgramTree(nodes)


# -- text form ------------------------------------------------------------------

def _node_text(node: Node) -> str:
    if node.kind is Primitive.E:
        return "E[" + ",".join(repr(v) for v in node.payload) + "]"
    return node.kind.tag


def to_string(tree: ProgramTree) -> str:
    """Prefix text form, e.g. ``(ADD (MUL X E[0.1,-0.3]) X)``."""
    parts: list[str] = []

    def emit(i: int) -> None:
        node = tree.nodes[i]
        if node.kind.is_terminal:
            parts.append(_node_text(node))
            return
        parts.append("(" + node.kind.tag)
        for c in tree.children(i):
            parts.append(" ")
            emit(c)
        parts.append(")")

    emit(0)
    return "".join(parts)


_TOKEN = re.compile(r"\s*(\(|\)|E\[[^\]]*\]|[A-Z0-9]+)")


def from_string(text: str) -> ProgramTree:
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ValueError(f"unexpected character at offset {pos} in {text!r}")
        tokens.append(m.group(1))
        pos = m.end()

    nodes: list[Node] = []
    it = iter(tokens)

    def parse(tok: str) -> None:
        if tok == "(":
            tag = next(it)
            kind = BY_TAG.get(tag)
            if kind is None or kind.is_terminal:
                raise ValueError(f"expected a function name, got {tag!r}")
            nodes.append(Node(kind))
            for _ in range(kind.arity):
                parse(next(it))
            if next(it) != ")":
                raise ValueError(f"{tag} given too many arguments")
        elif tok.startswith("E["):
            nodes.append(Node(Primitive.E, tuple(float(v) for v in tok[2:-1].split(","))))
        elif tok == "X":
            nodes.append(Node(Primitive.X))
        else:
            raise ValueError(f"unexpected token {tok!r}")

    try:
        parse(next(it))
    except StopIteration:
        raise ValueError(f"truncated program text {text!r}") from None
    if next(it, None) is not None:
        raise ValueError(f"trailing tokens in program text {text!r}")
    return ProgramTree(nodes)
