"""Weighted DAGs, topological layers, and ground-truth similarity checkers.

Layer convention: A_0 holds every leaf and isolated node; a node sits in A_t
when its longest directed path down to a leaf has length exactly t. The suffix
S_t is the union of layers t and above, so S_0 is the whole node set and the
parents of any node in A_t lie inside S_{t+1}.

The three structural similarity checks compare an auxiliary DAG against the
target positionally: node i in one graph corresponds to node i in the other.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NotADag, ShapeError
from .precision import divergence_matrix


@dataclass(frozen=True)
class LayerPartition:
    """Ordered partition A_0..A_{T-1} of {0..p-1}; layers[t] is a sorted tuple."""

    layers: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        seen = set()
        for t, layer in enumerate(self.layers):
            if len(layer) == 0:
                raise ShapeError(f"layer {t} is empty")
            if seen & set(layer):
                raise ShapeError("layers are not disjoint")
            seen |= set(layer)
        if seen != set(range(len(seen))):
            raise ShapeError("layers do not partition a contiguous node range")

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def p(self) -> int:
        return sum(len(a) for a in self.layers)

    def suffix(self, t: int) -> frozenset[int]:
        """S_t: all nodes in layers t and above (empty for t >= depth)."""
        nodes: set[int] = set()
        for layer in self.layers[t:]:
            nodes |= set(layer)
        return frozenset(nodes)

    def layer_of(self, j: int) -> int:
        for t, layer in enumerate(self.layers):
            if j in layer:
                return t
        raise ShapeError(f"node {j} not covered by the partition")


@dataclass
class WeightedDag:
    """DAG over p nodes with coefficient matrix b; b[j, l] weights edge l -> j.

    noise optionally carries the per-node noise descriptor used when sampling.
    """

    p: int
    b: np.ndarray
    noise: object | None = None

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        if self.b.shape != (self.p, self.p):
            raise ShapeError(f"b has shape {self.b.shape}, expected ({self.p}, {self.p})")

    @property
    def edges(self) -> set[tuple[int, int]]:
        """Set of (parent, child) pairs."""
        children, parents = np.nonzero(self.b)
        return {(int(l), int(j)) for j, l in zip(children, parents)}

    def children_of(self, j: int) -> list[int]:
        return [int(c) for c in np.nonzero(self.b[:, j])[0]]

    def parents_of(self, j: int) -> list[int]:
        return [int(l) for l in np.nonzero(self.b[j, :])[0]]


def _children_lists(dag: WeightedDag) -> list[list[int]]:
    return [dag.children_of(j) for j in range(dag.p)]


def topological_layers(dag: WeightedDag) -> LayerPartition:
    """Partition nodes by longest directed distance to a leaf; cycle -> NotADag.

    Computed by peeling sinks: nodes whose remaining out-degree is zero form
    the current layer, which is exactly the longest-path-to-leaf criterion.
    """
    children = _children_lists(dag)
    out_deg = np.array([len(c) for c in children])
    parents_of = [dag.parents_of(j) for j in range(dag.p)]
    remaining = dag.p
    assigned = np.full(dag.p, -1, dtype=int)
    layers: list[tuple[int, ...]] = []
    t = 0
    while remaining > 0:
        current = [j for j in range(dag.p) if assigned[j] < 0 and out_deg[j] == 0]
        if not current:
            raise NotADag("directed cycle detected while peeling layers")
        for j in current:
            assigned[j] = t
            for l in parents_of[j]:
                out_deg[l] -= 1
        remaining -= len(current)
        layers.append(tuple(sorted(current)))
        t += 1
    return LayerPartition(layers=tuple(layers))


def descendants(dag: WeightedDag, j: int) -> frozenset[int]:
    """Transitive closure of children of j, excluding j itself."""
    children = _children_lists(dag)
    seen: set[int] = set()
    stack = list(children[j])
    while stack:
        c = stack.pop()
        if c in seen:
            continue
        if c == j:
            raise NotADag(f"node {j} reaches itself")
        seen.add(c)
        stack.extend(children[c])
    return frozenset(seen)


def _check_same_p(g_k: WeightedDag, g_0: WeightedDag):
    if g_k.p != g_0.p:
        raise ShapeError(f"node count mismatch: {g_k.p} vs {g_0.p}")


def is_global_informative(g_k: WeightedDag, g_0: WeightedDag) -> bool:
    """True iff both DAGs have identical ordered layer partitions."""
    _check_same_p(g_k, g_0)
    lk = topological_layers(g_k)
    l0 = topological_layers(g_0)
    return lk.layers == l0.layers


def is_layer_informative(g_k: WeightedDag, g_0: WeightedDag, t: int) -> Optional[int]:
    """Smallest t' with A_t(target) = A_t'(aux) and S_t(target) = S_t'(aux), else None."""
    _check_same_p(g_k, g_0)
    l0 = topological_layers(g_0)
    if not 0 <= t < l0.depth:
        raise ShapeError(f"layer index {t} out of range for depth {l0.depth}")
    lk = topological_layers(g_k)
    a_t = set(l0.layers[t])
    s_t = l0.suffix(t)
    for t_prime in range(lk.depth):
        if set(lk.layers[t_prime]) == a_t and lk.suffix(t_prime) == s_t:
            return t_prime
    return None


def is_node_informative(g_k: WeightedDag, g_0: WeightedDag, j: int) -> bool:
    """Node-level check: the aux descendants of j must stay below j's target
    layer, and (when that layer is positive) must touch the layer right under it."""
    _check_same_p(g_k, g_0)
    l0 = topological_layers(g_0)
    t_j = l0.layer_of(j)
    de_k = descendants(g_k, j)
    if de_k & l0.suffix(t_j):
        return False
    if t_j >= 1 and not (de_k & set(l0.layers[t_j - 1])):
        return False
    return True


def is_parameter_informative(theta_target_s, sigma_aux_s, h: float) -> tuple[bool, float]:
    """Definition-1 check: divergence norm score of (Theta_S, Sigma_aux_S) against h."""
    dm = divergence_matrix(theta_target_s, sigma_aux_s)
    return bool(dm.norm_score <= h), float(dm.norm_score)
