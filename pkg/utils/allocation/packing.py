"""Selection of non-overlapping BS clusters (weighted set packing)."""

import logging
from dataclasses import dataclass

import numpy as np
import pybnb

logger = logging.getLogger(__name__)

EXACT_SEARCH_LIMIT = 25
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class PackingInstance:
    """``membership[j, c]`` is True iff BS j belongs to candidate cluster c."""
    membership: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.membership.ndim != 2 or self.membership.shape[1] != len(self.weights):
            raise ValueError(
                f"Membership {self.membership.shape} does not match {len(self.weights)} weights"
            )
        if np.any(self.weights < 0):
            raise ValueError("Cluster weights must be non-negative")
        if np.any(self.membership.sum(axis=0) == 0):
            raise ValueError("Every candidate cluster needs at least one BS")

    @classmethod
    def from_clusters(cls, bs_sets, weights, num_bs: int) -> "PackingInstance":
        membership = np.zeros((num_bs, len(bs_sets)), dtype=bool)
        for c, bs_set in enumerate(bs_sets):
            membership[list(bs_set), c] = True
        return cls(membership=membership, weights=np.asarray(weights, dtype=float))

    @property
    def sizes(self) -> np.ndarray:
        return self.membership.sum(axis=0)

    @property
    def num_clusters(self) -> int:
        return self.membership.shape[1]

    def is_feasible(self, selection: np.ndarray) -> bool:
        return bool(np.all(self.membership.astype(int) @ selection.astype(int) <= 1))

    def value(self, selection: np.ndarray) -> float:
        return float(self.weights @ selection.astype(float))


def greedy_set_packing(instance: PackingInstance) -> np.ndarray:
    """Repeatedly take the cluster with the best per-BS weight and drop everything it overlaps."""
    selection = np.zeros(instance.num_clusters, dtype=bool)
    active = np.ones(instance.num_clusters, dtype=bool)
    per_bs = instance.weights / instance.sizes

    while active.any():
        scores = np.where(active, per_bs, -np.inf)
        best = np.max(scores)
        omega = int(np.flatnonzero(active & (scores >= best - TIE_TOLERANCE))[0])
        selection[omega] = True
        overlapping = instance.membership[instance.membership[:, omega]].any(axis=0)
        active &= ~overlapping
    return selection


class SetPackingProblem(pybnb.Problem):
    """Include/exclude branching over the candidates, bounded by the compatible remaining weight."""

    def __init__(self, instance: PackingInstance):
        self._weights = [float(w) for w in instance.weights]
        self._masks = [
            sum(1 << int(j) for j in np.flatnonzero(instance.membership[:, c]))
            for c in range(instance.num_clusters)
        ]
        self._n = instance.num_clusters
        self._level = 0
        self._used = 0
        self._value = 0.0
        self._chosen = ()

    def sense(self):
        return pybnb.maximize

    def objective(self):
        return self._value

    def bound(self):
        remaining = sum(
            self._weights[c] for c in range(self._level, self._n)
            if not self._masks[c] & self._used
        )
        return self._value + remaining

    def save_state(self, node):
        node.state = (self._level, self._used, self._value, self._chosen)

    def load_state(self, node):
        self._level, self._used, self._value, self._chosen = node.state

    def branch(self):
        if self._level >= self._n:
            return
        c = self._level
        if not self._masks[c] & self._used:
            child = pybnb.Node()
            child.state = (c + 1, self._used | self._masks[c], self._value + self._weights[c],
                           self._chosen + (c,))
            yield child
        child = pybnb.Node()
        child.state = (c + 1, self._used, self._value, self._chosen)
        yield child


def exact_set_packing(instance: PackingInstance, limit: int = EXACT_SEARCH_LIMIT) -> np.ndarray:
    """Provably optimal selection by branch and bound, for small instances."""
    if instance.num_clusters > limit:
        raise ValueError(
            f"{instance.num_clusters} candidate clusters exceed the exact search limit of {limit}"
        )
    selection = np.zeros(instance.num_clusters, dtype=bool)
    if instance.num_clusters == 0:
        return selection

    results = pybnb.Solver(comm=None).solve(
        SetPackingProblem(instance),
        absolute_gap=0,
        log=None,
        disable_signal_handlers=True,
    )
    selection[list(results.best_node.state[3])] = True

    # Zero-weight clusters still fit: extend to a maximal packing, objective unchanged
    used = instance.membership[:, selection].any(axis=1)
    for c in range(instance.num_clusters):
        if not selection[c] and not np.any(used & instance.membership[:, c]):
            selection[c] = True
            used |= instance.membership[:, c]
    logger.debug(f"Exact packing over {instance.num_clusters} clusters: value {instance.value(selection):.6f}")
    return selection
