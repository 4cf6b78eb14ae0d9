"""Causal graphs read off VAR coefficient patterns."""

from dataclasses import dataclass
from typing import FrozenSet, Iterable, Optional, Tuple

import networkx as nx
import numpy as np

from .config import DEFAULT_GRAPH_TOLERANCE
from .core import StructuralVarModel, VarModel
from .errors import ModelValidationError

Edge = Tuple[int, int]


@dataclass(frozen=True)
class CausalGraph:
    """Directed graph over ``dim`` components.

    An edge ``(i, j)`` means *i causes j*.  Self-loops ``(i, i)`` encode
    autoregressive memory.
    """

    dim: int
    edges: FrozenSet[Edge]
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if not (0 <= i < self.dim and 0 <= j < self.dim):
                raise ModelValidationError(f"edge ({i}, {j}) out of range for dim {self.dim}")
        if self.labels is not None and len(self.labels) != self.dim:
            raise ModelValidationError(f"expected {self.dim} labels, got {len(self.labels)}")
        object.__setattr__(self, "edges", edges)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))

    @classmethod
    def from_edges(cls, dim: int, edges: Iterable[Edge], labels: Optional[Iterable[str]] = None) -> "CausalGraph":
        return cls(dim, frozenset(edges), tuple(labels) if labels is not None else None)

    def has_edge(self, cause: int, effect: int) -> bool:
        return (cause, effect) in self.edges

    def without_self_loops(self) -> "CausalGraph":
        return CausalGraph(self.dim, frozenset((i, j) for i, j in self.edges if i != j), self.labels)

    def union(self, other: "CausalGraph") -> "CausalGraph":
        if other.dim != self.dim:
            raise ModelValidationError(f"cannot merge graphs of dims {self.dim} and {other.dim}")
        return CausalGraph(self.dim, self.edges | other.edges, self.labels or other.labels)

    def allowed_mask(self, self_loops: bool = True) -> np.ndarray:
        """Effect-row boolean mask: ``mask[j, i]`` is true when ``i -> j`` is allowed."""
        mask = np.zeros((self.dim, self.dim), dtype=bool)
        for i, j in self.edges:
            mask[j, i] = True
        if self_loops:
            np.fill_diagonal(mask, True)
        return mask

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        for node in range(self.dim):
            graph.add_node(node, label=self.labels[node] if self.labels else f"x{node}")
        graph.add_edges_from(self.edges)
        return graph

    def descendants(self, node: int) -> FrozenSet[int]:
        """Components reachable from *node* along directed edges."""
        return frozenset(nx.descendants(self.to_networkx(), node))

    def is_acyclic(self, ignore_self_loops: bool = True) -> bool:
        graph = self.without_self_loops() if ignore_self_loops else self
        return nx.is_directed_acyclic_graph(graph.to_networkx())

    def named_edges(self) -> Tuple[Tuple[str, str], ...]:
        names = self.labels or tuple(f"x{i}" for i in range(self.dim))
        return tuple(sorted((names[i], names[j]) for i, j in self.edges))


def _pattern_edges(pattern: np.ndarray, include_self_loops: bool) -> FrozenSet[Edge]:
    causes, effects = np.nonzero(pattern)
    return frozenset((int(i), int(j)) for i, j in zip(causes, effects) if include_self_loops or i != j)


def induced_graph(
    model: VarModel,
    tol: float = DEFAULT_GRAPH_TOLERANCE,
    include_self_loops: bool = False,
) -> CausalGraph:
    """Edge ``i -> j`` iff some lag has ``|B_k[j, i]| > tol``."""
    pattern = np.any(np.abs(model.coeffs) > tol, axis=0).T
    return CausalGraph(model.dim, _pattern_edges(pattern, include_self_loops), model.labels)


def structural_graph(
    svar: StructuralVarModel,
    tol: float = DEFAULT_GRAPH_TOLERANCE,
    include_self_loops: bool = False,
) -> CausalGraph:
    """Union of the instantaneous and lagged edges of a structural VAR.

    Unlike :func:`induced_graph` on the reduced form, this does not add the
    edges that appear when instantaneous effects are solved out.
    """
    pattern = (np.abs(svar.instantaneous) > tol) | np.any(np.abs(svar.lag_coeffs) > tol, axis=0)
    return CausalGraph(svar.dim, _pattern_edges(pattern, include_self_loops), svar.labels)


__all__ = ["CausalGraph", "Edge", "induced_graph", "structural_graph"]
