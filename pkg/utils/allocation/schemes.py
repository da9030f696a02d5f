import logging
import math
from abc import ABC, abstractmethod
from typing import Optional, Sequence, Tuple

import numpy as np

from utils.allocation.clustering import CandidateCluster, CandidateSet, enumerate_candidates
from utils.allocation.mumimo import ClusterPlan
from utils.allocation.packing import PackingInstance, greedy_set_packing
from utils.radio.topology import Drop, Scenario, site_at

logger = logging.getLogger(__name__)

ClusterMap = Sequence[Tuple[int, ...]]


class ClusterMapError(ValueError):
    pass


def validate_cluster_map(clusters: ClusterMap, num_bs: int) -> Tuple[Tuple[int, ...], ...]:
    """Check that the static clusters partition {0, ..., J-1}."""
    seen = {}
    for line, cluster in enumerate(clusters):
        if not cluster:
            raise ClusterMapError(f"Cluster {line} is empty")
        for j in cluster:
            if not 0 <= j < num_bs:
                raise ClusterMapError(f"Cluster {line}: BS index {j} outside [0, {num_bs})")
            if j in seen:
                raise ClusterMapError(f"BS {j} appears in clusters {seen[j]} and {line}")
            seen[j] = line
    missing = sorted(set(range(num_bs)) - set(seen))
    if missing:
        raise ClusterMapError(f"BSs {missing} are not covered by any cluster")
    return tuple(tuple(sorted(cluster)) for cluster in clusters)


def intra_site_map(scenario: Scenario) -> Tuple[Tuple[int, ...], ...]:
    bs_per_site = scenario.config.bs_per_site
    return tuple(
        tuple(range(site * bs_per_site, (site + 1) * bs_per_site))
        for site in range(scenario.num_sites)
    )


def cross_site_map(scenario: Scenario) -> Tuple[Tuple[int, ...], ...]:
    """Three sectors of three adjacent sites facing their common hexagon corner.

    For every site the triple is its 0-degree sector, the 240-degree sector of the
    neighbour at +30 degrees and the 120-degree sector of the neighbour at -30 degrees.
    """
    distance = scenario.config.inter_site_distance
    upper = distance * np.array([math.cos(math.pi / 6.0), math.sin(math.pi / 6.0)])
    lower = distance * np.array([math.cos(math.pi / 6.0), -math.sin(math.pi / 6.0)])
    bs_per_site = scenario.config.bs_per_site

    clusters = []
    for site, position in enumerate(scenario.site_positions):
        upper_site = site_at(position + upper, scenario)
        lower_site = site_at(position + lower, scenario)
        clusters.append((
            site * bs_per_site,
            upper_site * bs_per_site + 2,
            lower_site * bs_per_site + 1,
        ))
    return validate_cluster_map(clusters, scenario.num_bs)


class ClusterScheme(ABC):
    """How BS clusters are formed and which of them serve in a block."""
    name = "abstract"

    def __init__(self, scenario: Scenario):
        self.scenario = scenario

    @abstractmethod
    def candidates(self, drop: Drop) -> CandidateSet:
        """
        Candidate clusters and the UEs each of them may schedule, per drop.
        """
        pass

    def select(self, candidate_set: CandidateSet, plans: Sequence[ClusterPlan]) -> np.ndarray:
        """
        Clusters serving in this block. Static clusters are disjoint, so all of them serve.
        """
        return np.ones(len(candidate_set), dtype=bool)


class DynamicClustering(ClusterScheme):
    name = "dc"

    def __init__(self, scenario: Scenario, j_max: int):
        super().__init__(scenario)
        self.j_max = j_max

    def candidates(self, drop: Drop) -> CandidateSet:
        return enumerate_candidates(drop, self.j_max)

    def select(self, candidate_set: CandidateSet, plans: Sequence[ClusterPlan]) -> np.ndarray:
        instance = PackingInstance.from_clusters(
            candidate_set.bs_sets,
            [plan.estimated_rate for plan in plans],
            self.scenario.num_bs,
        )
        return greedy_set_packing(instance)


class StaticScheme(ClusterScheme):
    """Fixed clusters; every UE attaches to the cluster with the largest sum of long-term gains."""
    name = "static"

    def __init__(self, scenario: Scenario, cluster_map: ClusterMap):
        super().__init__(scenario)
        self.cluster_map = validate_cluster_map(cluster_map, scenario.num_bs)

    def attach(self, drop: Drop) -> np.ndarray:
        strength = np.stack(
            [drop.large_scale_gain[:, list(cluster)].sum(axis=1) for cluster in self.cluster_map],
            axis=1,
        )
        return np.argmax(strength, axis=1)

    def candidates(self, drop: Drop) -> CandidateSet:
        attached = self.attach(drop)
        clusters = tuple(
            CandidateCluster(
                cluster_id=c,
                bs_set=cluster,
                ue_set=tuple(int(k) for k in np.flatnonzero(attached == c)),
            )
            for c, cluster in enumerate(self.cluster_map)
        )
        return CandidateSet(clusters=clusters, j_max=max(len(cluster) for cluster in self.cluster_map))


class SingleCellProcessing(StaticScheme):
    name = "scp"

    def __init__(self, scenario: Scenario):
        super().__init__(scenario, tuple((j,) for j in range(scenario.num_bs)))


class IntraSiteCooperation(StaticScheme):
    name = "isc"

    def __init__(self, scenario: Scenario):
        super().__init__(scenario, intra_site_map(scenario))


class StaticClustering(StaticScheme):
    name = "sc"

    def __init__(self, scenario: Scenario, cluster_map: Optional[ClusterMap] = None):
        super().__init__(scenario, cluster_map if cluster_map is not None else cross_site_map(scenario))


def make_scheme(name: str, scenario: Scenario, j_max: int, cluster_map: Optional[ClusterMap] = None) -> ClusterScheme:
    if name == "dc":
        return DynamicClustering(scenario, j_max)
    if name == "scp":
        return SingleCellProcessing(scenario)
    if name == "isc":
        return IntraSiteCooperation(scenario)
    if name == "sc":
        return StaticClustering(scenario, cluster_map)
    raise ValueError(f"Unknown clustering scheme '{name}'")
