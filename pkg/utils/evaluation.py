"""Achieved rates on the true channels, proportional-fair weights and system metrics.

UEs combine with an interference rejection combiner and cancel their own streams
successively, so the rate of UE k is the log-det of its signal covariance
whitened by the interference-plus-noise covariance of the whole network.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np

from utils.allocation.clustering import BlockSchedule
from utils.radio.topology import Drop

logger = logging.getLogger(__name__)

PERCENTILES = (5.0, 50.0, 95.0)


def network_channel(h: np.ndarray, ue_id: int) -> np.ndarray:
    """N x (J*M) channel of one UE toward every BS."""
    blocks = h[ue_id]
    num_bs, ue_antennas, bs_antennas = blocks.shape
    return np.transpose(blocks, (1, 0, 2)).reshape(ue_antennas, num_bs * bs_antennas)


def interference_covariance(ue_id: int, schedule: BlockSchedule, h: np.ndarray, noise_power: float) -> np.ndarray:
    channel = network_channel(h, ue_id)
    psi = noise_power * np.eye(channel.shape[0], dtype=complex)
    for other in schedule.scheduled_ues:
        if other == ue_id:
            continue
        leak = channel @ schedule.precoders[other]
        psi += (leak * schedule.powers[other]) @ leak.conj().T
    return psi


def achieved_rate(ue_id: int, schedule: BlockSchedule, h: np.ndarray, noise_power: float,
                  overhead_factor: float = 1.0) -> float:
    if ue_id not in schedule.precoders:
        return 0.0
    channel = network_channel(h, ue_id)
    psi = interference_covariance(ue_id, schedule, h, noise_power)
    signal = channel @ schedule.precoders[ue_id]
    covariance = (signal * schedule.powers[ue_id]) @ signal.conj().T
    gain = np.eye(channel.shape[0]) + np.linalg.solve(psi, covariance)
    _, logdet = np.linalg.slogdet(gain)
    return float(overhead_factor * logdet / np.log(2.0))


def sic_stream_rates(ue_id: int, schedule: BlockSchedule, h: np.ndarray, noise_power: float) -> np.ndarray:
    """Per-stream log2(1 + SINR) when streams are decoded in order and cancelled once decoded.

    Each stream is detected with the MMSE filter against the streams not yet
    decoded plus the network interference.
    """
    channel = network_channel(h, ue_id)
    psi = interference_covariance(ue_id, schedule, h, noise_power)
    columns = (channel @ schedule.precoders[ue_id]) * np.sqrt(schedule.powers[ue_id])

    rates = []
    for l in range(columns.shape[1]):
        pending = columns[:, l + 1:]
        covariance = psi + pending @ pending.conj().T
        stream = columns[:, l]
        sinr = float(np.real(stream.conj() @ np.linalg.solve(covariance, stream)))
        rates.append(np.log2(1.0 + sinr))
    return np.array(rates)


def block_rates(schedule: BlockSchedule, h: np.ndarray, noise_power: float, overhead_factor: float) -> np.ndarray:
    """Achieved rate of every UE in the network, zero for unscheduled UEs."""
    rates = np.zeros(h.shape[0])
    for k in schedule.scheduled_ues:
        rates[k] = achieved_rate(k, schedule, h, noise_power, overhead_factor)
    return rates


@dataclass(frozen=True)
class BlockResult:
    scheduled_ues: Tuple[int, ...]
    rates: np.ndarray
    cluster_estimates: np.ndarray
    selection: np.ndarray
    ranks: Dict[int, int] = field(default_factory=dict)


def evaluate_block(schedule: BlockSchedule, cluster_estimates: Sequence[float], selection: np.ndarray, h: np.ndarray,
                   noise_power: float, overhead_factor: float) -> BlockResult:
    return BlockResult(
        scheduled_ues=schedule.scheduled_ues,
        rates=block_rates(schedule, h, noise_power, overhead_factor),
        cluster_estimates=np.asarray(cluster_estimates, dtype=float),
        selection=np.asarray(selection, dtype=bool),
        ranks=schedule.ranks,
    )


@dataclass(frozen=True)
class PfState:
    avg_rate: np.ndarray
    gamma: float = 0.1
    t: int = 1

    def __post_init__(self):
        if np.any(self.avg_rate <= 0):
            raise ValueError("Average rates must stay strictly positive")

    @property
    def alpha(self) -> np.ndarray:
        return 1.0 / self.avg_rate


def pf_init(drop: Drop, reference_power: float, noise_power: float, gamma: float = 0.1) -> PfState:
    """Start every UE from the single-stream rate of its anchor BS at ``reference_power``."""
    anchor_gain = drop.large_scale_gain[np.arange(drop.num_ues), drop.anchor]
    return PfState(avg_rate=np.log2(1.0 + reference_power * anchor_gain / noise_power), gamma=gamma)


def pf_update(state: PfState, rates: np.ndarray) -> PfState:
    avg_rate = (1.0 - state.gamma) * state.avg_rate + state.gamma * np.asarray(rates)
    return PfState(avg_rate=avg_rate, gamma=state.gamma, t=state.t + 1)


@dataclass(frozen=True)
class DropMetrics:
    ue_rates: np.ndarray
    cell_rate: float


def drop_metrics(rates: np.ndarray, num_bs: int) -> DropMetrics:
    """UE and cell rate of one drop from its T x K rate trace, last T/2 blocks only."""
    blocks = rates.shape[0]
    if blocks % 2:
        raise ValueError(f"The number of blocks must be even, got {blocks}")
    ue_rates = rates[blocks // 2:].mean(axis=0)
    return DropMetrics(ue_rates=ue_rates, cell_rate=float(ue_rates.sum() / num_bs))


def metrics(traces: Sequence[np.ndarray], num_bs: int) -> Tuple[np.ndarray, float, np.ndarray]:
    """Pooled per-UE rates, mean cell rate and 5/50/95th percentiles over all drops."""
    per_drop = [drop_metrics(trace, num_bs) for trace in traces]
    pooled = np.concatenate([m.ue_rates for m in per_drop])
    cell_rate = float(np.mean([m.cell_rate for m in per_drop]))
    return pooled, cell_rate, np.percentile(pooled, PERCENTILES)
