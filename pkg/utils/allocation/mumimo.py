"""Per-cluster multi-user MIMO resource allocation.

Within a candidate cluster the streams are chosen among the eigenmodes of the
estimated cluster channels, precoded with multiuser eigenmode transmission
(zero forcing toward the selected eigenmodes of the co-scheduled UEs) and
served with equal per-stream power.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from utils.radio.topology import Drop

logger = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-9
TIE_TOLERANCE = 1e-12
EXHAUSTIVE_MODE_LIMIT = 16


class InfeasibleEigenmodeSet(ValueError):
    """The stacked eigen-rows are (numerically) rank deficient."""


@dataclass(frozen=True)
class LinkBudget:
    p_bs: float
    noise_power: float
    bs_antennas: int
    overhead_factor: float = 1.0


@dataclass(frozen=True)
class Eigenmode:
    ue_id: int
    index: int
    singular_value: float
    right_vector: np.ndarray

    @property
    def gamma_row(self) -> np.ndarray:
        return self.singular_value * self.right_vector.conj()


@dataclass(frozen=True)
class ClusterPlan:
    cluster_id: int
    bs_set: Tuple[int, ...]
    scheduled_ues: Tuple[int, ...] = ()
    precoders: Dict[int, np.ndarray] = field(default_factory=dict)
    ranks: Dict[int, int] = field(default_factory=dict)
    power: float = 0.0
    estimated_rate: float = 0.0
    selected_modes: Tuple[Eigenmode, ...] = ()

    @property
    def num_streams(self) -> int:
        return sum(self.ranks.values())


def ici_power(ue_id: int, bs_set: Sequence[int], drop: Drop, p_bs: float) -> float:
    """Average power received from every BS outside the cluster at full power."""
    outside = np.ones(drop.num_bs, dtype=bool)
    outside[list(bs_set)] = False
    return float(p_bs * np.sum(drop.large_scale_gain[ue_id, outside]))


def cluster_channel(h_hat: np.ndarray, ue_id: int, bs_set: Sequence[int]) -> np.ndarray:
    """N x M|J_c| channel of one UE toward the BSs of a cluster, BS blocks side by side."""
    blocks = h_hat[ue_id, list(bs_set)]
    num_bs, ue_antennas, bs_antennas = blocks.shape
    return np.transpose(blocks, (1, 0, 2)).reshape(ue_antennas, num_bs * bs_antennas)


def eigenmodes(h_cluster: np.ndarray, ue_id: int = 0, l_max: Optional[int] = None) -> List[Eigenmode]:
    _, singular_values, vh = np.linalg.svd(h_cluster, full_matrices=False)
    count = len(singular_values) if l_max is None else min(len(singular_values), l_max)
    return [
        Eigenmode(ue_id=ue_id, index=i, singular_value=float(singular_values[i]),
                  right_vector=vh[i].conj())
        for i in range(count)
    ]


def _zero_forcing(gamma: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Unit-norm columns of pinv(gamma) for a stack of (L x D) eigen-row matrices.

    Returns the precoders, shaped (..., D, L), and a feasibility mask.
    """
    u, s, vh = np.linalg.svd(gamma, full_matrices=False)
    feasible = (s[..., 0] > 0) & (s[..., -1] >= RANK_TOLERANCE * s[..., 0])
    inverse = np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), 0.0)
    precoders = (vh.conj().swapaxes(-1, -2) * inverse[..., None, :]) @ u.conj().swapaxes(-1, -2)
    norms = np.linalg.norm(precoders, axis=-2, keepdims=True)
    precoders = precoders / np.where(norms > 0, norms, 1.0)
    return precoders, feasible


def met_precoder(selected_modes: Sequence[Eigenmode]) -> Dict[int, np.ndarray]:
    """Zero-forcing precoders toward the selected eigenmodes, grouped by owning UE."""
    if not selected_modes:
        return {}
    gamma = np.vstack([mode.gamma_row for mode in selected_modes])
    if len(selected_modes) > gamma.shape[1]:
        raise InfeasibleEigenmodeSet(
            f"{len(selected_modes)} eigenmodes exceed the {gamma.shape[1]} cluster antennas"
        )
    precoders, feasible = _zero_forcing(gamma)
    if not feasible:
        raise InfeasibleEigenmodeSet("infeasible eigenmode set: stacked eigen-rows are rank deficient")

    columns: Dict[int, List[int]] = {}
    for position, mode in enumerate(selected_modes):
        columns.setdefault(mode.ue_id, []).append(position)
    return {ue_id: precoders[:, positions] for ue_id, positions in columns.items()}


def per_bs_load(precoders, bs_antennas: int) -> np.ndarray:
    """Sum over streams of the squared precoder norm on each BS of the cluster."""
    if isinstance(precoders, Mapping):
        precoders = np.hstack(list(precoders.values()))
    row_power = np.sum(np.abs(precoders) ** 2, axis=-1)
    return row_power.reshape(*row_power.shape[:-1], -1, bs_antennas).sum(axis=-1)


def equal_power(precoders, p_bs: float, bs_antennas: int) -> float:
    load = per_bs_load(precoders, bs_antennas)
    return float(p_bs / np.max(load))


def _log2det_hermitian(matrices: np.ndarray) -> np.ndarray:
    sign, logdet = np.linalg.slogdet(matrices)
    return logdet / np.log(2.0)


def estimated_cluster_rate(h_clusters: Mapping[int, np.ndarray], precoders: Mapping[int, np.ndarray],
                           power: float, ici: Mapping[int, float], alphas, noise_power: float,
                           overhead_factor: float = 1.0) -> float:
    """Weighted sum of the rates the cluster expects for its scheduled UEs.

    Inter-cluster interference is modelled as white noise of power ``ici[k]``.
    """
    total = 0.0
    for ue_id, own in precoders.items():
        h = h_clusters[ue_id]
        ue_antennas = h.shape[0]
        psi = (noise_power + ici[ue_id]) * np.eye(ue_antennas, dtype=complex)
        for other, precoder in precoders.items():
            if other == ue_id:
                continue
            leak = h @ precoder
            psi += power * (leak @ leak.conj().T)
        try:
            np.linalg.cholesky(psi)
        except np.linalg.LinAlgError as e:
            raise ValueError(f"Interference covariance of UE {ue_id} is not positive definite") from e

        signal = h @ own
        gain = np.eye(ue_antennas) + power * np.linalg.solve(psi, signal @ signal.conj().T)
        _, logdet = np.linalg.slogdet(gain)
        total += alphas[ue_id] * overhead_factor * logdet / np.log(2.0)
    return float(total)


@dataclass
class _ClusterInputs:
    bs_set: Tuple[int, ...]
    ue_ids: Tuple[int, ...]
    h_clusters: np.ndarray
    noise: np.ndarray
    weights: np.ndarray
    modes: List[Eigenmode]
    owners: np.ndarray


def _prepare(bs_set: Sequence[int], ue_set: Sequence[int], drop: Drop, h_hat: np.ndarray, alphas,
             l_max: Optional[int], link: LinkBudget) -> _ClusterInputs:
    bs_set = tuple(bs_set)
    ue_ids = tuple(sorted(ue_set))
    h_clusters = np.array([cluster_channel(h_hat, k, bs_set) for k in ue_ids])
    noise = np.array([link.noise_power + ici_power(k, bs_set, drop, link.p_bs) for k in ue_ids])
    weights = np.array([alphas[k] for k in ue_ids], dtype=float) * link.overhead_factor

    modes: List[Eigenmode] = []
    owners: List[int] = []
    for position, k in enumerate(ue_ids):
        for mode in eigenmodes(h_clusters[position], k, l_max):
            modes.append(mode)
            owners.append(position)
    return _ClusterInputs(bs_set, ue_ids, h_clusters, noise, weights, modes, np.array(owners, dtype=int))


def _batched_weighted_rates(inputs: _ClusterInputs, gamma: np.ndarray, owners: np.ndarray,
                            link: LinkBudget) -> Tuple[np.ndarray, np.ndarray]:
    """Estimated weighted sum rate of C tentative mode sets at once.

    ``gamma`` is (C, L, D) and ``owners`` (C, L) holds the UE position of each row.
    """
    precoders, feasible = _zero_forcing(gamma)
    load = per_bs_load(precoders, link.bs_antennas)
    own = owners[:, None, :] == np.arange(len(inputs.ue_ids))[None, :, None]
    ue_antennas = inputs.h_clusters.shape[1]

    # Rank-deficient candidates may carry zero loads; they are masked out below
    with np.errstate(divide="ignore", invalid="ignore"):
        power = np.where(feasible, link.p_bs / np.max(load, axis=-1), 0.0)
        effective = inputs.h_clusters[None] @ precoders[:, None]
        effective = effective * np.sqrt(power)[:, None, None, None]
        own_part = effective * own[:, :, None, :]

        base = inputs.noise[None, :, None, None] * np.eye(ue_antennas)[None, None]
        total = base + effective @ effective.conj().swapaxes(-1, -2)
        psi = total - own_part @ own_part.conj().swapaxes(-1, -2)

        rates = _log2det_hermitian(total) - _log2det_hermitian(psi)
    rates = np.where(own.any(axis=-1), rates, 0.0)
    values = rates @ inputs.weights
    return np.where(feasible, values, -np.inf), feasible


def _build_plan(cluster_id: int, inputs: _ClusterInputs, selection: Sequence[int], alphas,
                link: LinkBudget) -> ClusterPlan:
    if not selection:
        return ClusterPlan(cluster_id=cluster_id, bs_set=inputs.bs_set)

    modes = tuple(inputs.modes[i] for i in selection)
    precoders = met_precoder(modes)
    power = equal_power(precoders, link.p_bs, link.bs_antennas)
    positions = {k: p for p, k in enumerate(inputs.ue_ids)}
    h_clusters = {k: inputs.h_clusters[positions[k]] for k in precoders}
    ici = {k: inputs.noise[positions[k]] - link.noise_power for k in precoders}
    rate = estimated_cluster_rate(h_clusters, precoders, power, ici, alphas, link.noise_power,
                                  link.overhead_factor)
    return ClusterPlan(
        cluster_id=cluster_id,
        bs_set=inputs.bs_set,
        scheduled_ues=tuple(sorted(precoders)),
        precoders=precoders,
        ranks={k: g.shape[1] for k, g in precoders.items()},
        power=power,
        estimated_rate=rate,
        selected_modes=modes,
    )


def greedy_eigenmode_select(cluster_id: int, bs_set: Sequence[int], ue_set: Sequence[int], drop: Drop,
                            h_hat: np.ndarray, alphas, l_max: Optional[int], link: LinkBudget) -> ClusterPlan:
    """Add, one at a time, the eigenmode that most increases the weighted sum rate.

    Stops when no addition helps or when the cluster antennas are exhausted.
    Modes whose addition makes the stacked eigen-rows rank deficient are dropped
    for good.
    """
    if not ue_set:
        return ClusterPlan(cluster_id=cluster_id, bs_set=tuple(bs_set))

    inputs = _prepare(bs_set, ue_set, drop, h_hat, alphas, l_max, link)
    dimension = inputs.h_clusters.shape[2]
    gamma_rows = np.array([mode.gamma_row for mode in inputs.modes])

    selected: List[int] = []
    excluded = np.zeros(len(inputs.modes), dtype=bool)
    current = 0.0
    while len(selected) < dimension:
        available = np.flatnonzero(~excluded)
        available = available[~np.isin(available, selected)]
        if len(available) == 0:
            break

        gamma = np.concatenate([
            np.broadcast_to(gamma_rows[selected], (len(available), len(selected), dimension)),
            gamma_rows[available][:, None, :],
        ], axis=1)
        owners = np.concatenate([
            np.broadcast_to(inputs.owners[selected], (len(available), len(selected))),
            inputs.owners[available][:, None],
        ], axis=1)
        values, feasible = _batched_weighted_rates(inputs, gamma, owners, link)
        excluded[available[~feasible]] = True

        if not feasible.any():
            break
        best = float(np.max(values))
        if best <= current + TIE_TOLERANCE * abs(best):
            break
        # Candidates are ordered by (UE id, eigen index): the first near-best wins
        choice = int(np.flatnonzero(values >= best - TIE_TOLERANCE * abs(best))[0])
        selected.append(int(available[choice]))
        current = best

    plan = _build_plan(cluster_id, inputs, selected, alphas, link)
    logger.debug(
        f"Cluster {cluster_id} {plan.bs_set}: {len(plan.scheduled_ues)} UEs, "
        f"{plan.num_streams} streams, R={plan.estimated_rate:.4f}"
    )
    return plan


def exhaustive_eigenmode_select(cluster_id: int, bs_set: Sequence[int], ue_set: Sequence[int], drop: Drop,
                                h_hat: np.ndarray, alphas, l_max: Optional[int],
                                link: LinkBudget) -> ClusterPlan:
    """Best feasible eigenmode subset by enumeration; small clusters only."""
    inputs = _prepare(bs_set, ue_set, drop, h_hat, alphas, l_max, link)
    if len(inputs.modes) > EXHAUSTIVE_MODE_LIMIT:
        raise ValueError(
            f"{len(inputs.modes)} eigenmodes exceed the exhaustive search limit of {EXHAUSTIVE_MODE_LIMIT}"
        )

    dimension = inputs.h_clusters.shape[2]
    best_selection: Tuple[int, ...] = ()
    best_value = 0.0
    for size in range(1, min(dimension, len(inputs.modes)) + 1):
        for selection in itertools.combinations(range(len(inputs.modes)), size):
            try:
                plan = _build_plan(cluster_id, inputs, selection, alphas, link)
            except InfeasibleEigenmodeSet:
                continue
            if plan.estimated_rate > best_value + TIE_TOLERANCE * abs(plan.estimated_rate):
                best_value = plan.estimated_rate
                best_selection = selection
    return _build_plan(cluster_id, inputs, best_selection, alphas, link)
