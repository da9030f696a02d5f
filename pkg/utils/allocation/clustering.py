"""Candidate BS clusters and assembly of the network-wide schedule."""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from utils.allocation.mumimo import ClusterPlan
from utils.radio.topology import Drop

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CandidateCluster:
    cluster_id: int
    bs_set: Tuple[int, ...]
    ue_set: Tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.bs_set)


@dataclass(frozen=True)
class CandidateSet:
    clusters: Tuple[CandidateCluster, ...]
    j_max: int

    def __len__(self) -> int:
        return len(self.clusters)

    def __iter__(self):
        return iter(self.clusters)

    @property
    def bs_sets(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(cluster.bs_set for cluster in self.clusters)


def anchored_ues(drop: Drop, bs_set: Sequence[int]) -> Tuple[int, ...]:
    """UEs whose anchor BS belongs to ``bs_set``."""
    return tuple(int(k) for k in np.flatnonzero(np.isin(drop.anchor, list(bs_set))))


def enumerate_candidates(drop: Drop, j_max: int) -> CandidateSet:
    """All distinct sets of the u strongest BSs of some UE, u = 1..j_max.

    Depends on long-term gains only, so it is evaluated once per drop.
    """
    if not 1 <= j_max <= drop.num_bs:
        raise ValueError(f"j_max must lie in [1, {drop.num_bs}], got {j_max}")

    bs_sets = {
        tuple(sorted(int(j) for j in drop.bs_order[k, :u]))
        for k in range(drop.num_ues)
        for u in range(1, j_max + 1)
    }
    ordered = sorted(bs_sets, key=lambda bs_set: (len(bs_set), bs_set))
    clusters = tuple(
        CandidateCluster(cluster_id=c, bs_set=bs_set, ue_set=anchored_ues(drop, bs_set))
        for c, bs_set in enumerate(ordered)
    )
    logger.debug(f"Enumerated {len(clusters)} candidate clusters with j_max={j_max}")
    return CandidateSet(clusters=clusters, j_max=j_max)


def exhaustive_cluster_count(num_bs: int, j_max: int) -> int:
    if not 1 <= j_max <= num_bs:
        raise ValueError(f"j_max must lie in [1, {num_bs}], got {j_max}")
    return sum(math.comb(num_bs, size) for size in range(1, j_max + 1))


@dataclass(frozen=True)
class BlockSchedule:
    """Network-wide decision for one block.

    ``precoders[k]`` is the (J*M) x l_k global precoder of UE k, zero on the rows
    of BSs outside its serving cluster; ``powers[k]`` holds its per-stream powers.
    """
    selected: Tuple[int, ...]
    plans: Tuple[ClusterPlan, ...]
    scheduled_ues: Tuple[int, ...]
    precoders: Dict[int, np.ndarray]
    powers: Dict[int, np.ndarray]
    serving: Dict[int, Tuple[int, ...]]

    @property
    def ranks(self) -> Dict[int, int]:
        return {k: g.shape[1] for k, g in self.precoders.items()}

    @property
    def estimated_rate(self) -> float:
        return float(sum(plan.estimated_rate for plan in self.plans))

    def bs_power(self, num_bs: int, bs_antennas: int) -> np.ndarray:
        """Transmit power radiated by every BS."""
        total = np.zeros(num_bs)
        for k, precoder in self.precoders.items():
            rows = np.abs(precoder) ** 2 @ self.powers[k]
            total += rows.reshape(num_bs, bs_antennas).sum(axis=1)
        return total


def scheduled_ue_set(selection: np.ndarray, plans: Sequence[ClusterPlan], num_bs: int,
                     bs_antennas: int) -> BlockSchedule:
    """Union of the scheduled sets of the selected clusters, precoders lifted to the whole network."""
    selected = tuple(int(c) for c in np.flatnonzero(selection))
    used_bs: Dict[int, int] = {}
    precoders: Dict[int, np.ndarray] = {}
    powers: Dict[int, np.ndarray] = {}
    serving: Dict[int, Tuple[int, ...]] = {}

    for c in selected:
        plan = plans[c]
        for j in plan.bs_set:
            if j in used_bs:
                raise ValueError(f"BS {j} belongs to selected clusters {used_bs[j]} and {c}")
            used_bs[j] = c
        for k in plan.scheduled_ues:
            if k in precoders:
                raise ValueError(f"UE {k} is scheduled by two selected clusters")
            local = plan.precoders[k]
            lifted = np.zeros((num_bs * bs_antennas, local.shape[1]), dtype=complex)
            for position, j in enumerate(plan.bs_set):
                lifted[j * bs_antennas:(j + 1) * bs_antennas] = \
                    local[position * bs_antennas:(position + 1) * bs_antennas]
            precoders[k] = lifted
            powers[k] = np.full(local.shape[1], plan.power)
            serving[k] = plan.bs_set

    return BlockSchedule(
        selected=selected,
        plans=tuple(plans[c] for c in selected),
        scheduled_ues=tuple(sorted(precoders)),
        precoders=precoders,
        powers=powers,
        serving=serving,
    )
