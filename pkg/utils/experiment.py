"""Monte-Carlo loop: drops in parallel, blocks in order within a drop."""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from models.results_model import MAX_RANK, ResultsRowModel
from models.sim_config_model import SimConfigModel
from utils.allocation.clustering import BlockSchedule, scheduled_ue_set
from utils.allocation.mumimo import LinkBudget, greedy_eigenmode_select
from utils.allocation.schemes import ClusterMap, DynamicClustering, make_scheme
from utils.evaluation import PERCENTILES, evaluate_block, metrics, pf_init, pf_update
from utils.radio.channel import CorrelationModel, draw_fading, estimate_block
from utils.radio.topology import Drop, build_scenario, drop_ues
from utils.results import plan_trace

logger = logging.getLogger(__name__)

POWER_SLACK = 1e-9
DOMINANCE_TOLERANCE = 1e-12


class SimulationError(Exception):
    def __init__(self, message: str, drop_index: Optional[int] = None, block: Optional[int] = None):
        super().__init__(message)
        self.message = message
        self.drop_index = drop_index
        self.block = block

    def __reduce__(self):
        return self.__class__, (self.message, self.drop_index, self.block)


def drop_seed(master_seed: int, drop_index: int) -> int:
    return int(np.random.SeedSequence([master_seed, drop_index]).generate_state(1)[0])


def _stream_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


@dataclass
class DropOutcome:
    drop_index: int
    rates: np.ndarray
    rank_counts: np.ndarray
    candidate_count: int
    dominated_blocks: int = 0
    max_power_ratio: float = 0.0
    power_violations: int = 0
    traces: List[dict] = field(default_factory=list)
    drop: Optional[Drop] = None


def check_power(schedule: BlockSchedule, num_bs: int, bs_antennas: int, p_bs: float) -> Tuple[float, int]:
    """Largest per-BS power over P_BS and the number of BSs above it."""
    ratio = schedule.bs_power(num_bs, bs_antennas) / p_bs
    violations = int(np.sum(ratio > 1.0 + POWER_SLACK))
    return float(np.max(ratio)), violations


def singleton_estimate(plans) -> float:
    return float(sum(plan.estimated_rate for plan in plans if len(plan.bs_set) == 1))


def run_drop(config: SimConfigModel, drop_index: int, cluster_map: Optional[ClusterMap] = None,
             trace: bool = False, keep_drop: bool = False) -> DropOutcome:
    scenario = build_scenario(config.scenario)
    seed = drop_seed(config.seed, drop_index)
    drop = drop_ues(scenario, np.random.SeedSequence([seed, 0]))
    fading_seed = _stream_seed(seed, 1)
    pilot_seed = _stream_seed(seed, 2)

    scheme = make_scheme(config.scheme, scenario, config.j_max, cluster_map)
    candidates = scheme.candidates(drop)
    corr = CorrelationModel.build(config.ue_antennas, config.bs_antennas, config.beta)
    coherence = config.coherence
    link = LinkBudget(
        p_bs=config.scenario.p_bs,
        noise_power=config.scenario.noise_power,
        bs_antennas=config.bs_antennas,
        overhead_factor=config.overhead_factor,
    )
    state = pf_init(drop, config.pf_power, config.scenario.noise_power, config.gamma)
    logger.debug(f"Drop {drop_index}: {len(candidates)} candidate clusters")

    outcome = DropOutcome(
        drop_index=drop_index,
        rates=np.zeros((config.blocks, drop.num_ues)),
        rank_counts=np.zeros(MAX_RANK, dtype=int),
        candidate_count=len(candidates),
        drop=drop if keep_drop else None,
    )
    for t in range(config.blocks):
        try:
            block = draw_fading(drop, corr, fading_seed, t)
            if config.csi == "estimated":
                block = estimate_block(block, drop, corr, coherence, config.scenario.p_ue,
                                       config.scenario.noise_power, pilot_seed)

            alphas = state.alpha if config.scheduler == "pf" else np.ones(drop.num_ues)
            plans = [
                greedy_eigenmode_select(c.cluster_id, c.bs_set, c.ue_set, drop, block.h_hat, alphas,
                                        config.l_max, link)
                for c in candidates
            ]
            selection = scheme.select(candidates, plans)
            schedule = scheduled_ue_set(selection, plans, drop.num_bs, config.bs_antennas)
            result = evaluate_block(schedule, [plan.estimated_rate for plan in plans], selection, block.h,
                                    config.scenario.noise_power, config.overhead_factor)
        except Exception as e:
            raise SimulationError(f"Drop {drop_index}, block {t}: {e}", drop_index, t) from e

        outcome.rates[t] = result.rates
        state = pf_update(state, result.rates)

        ratio, violations = check_power(schedule, drop.num_bs, config.bs_antennas, config.scenario.p_bs)
        outcome.max_power_ratio = max(outcome.max_power_ratio, ratio)
        if violations:
            logger.warning(f"Drop {drop_index}, block {t}: {violations} BSs exceed P_BS (ratio {ratio:.12f})")
            outcome.power_violations += violations

        if isinstance(scheme, DynamicClustering):
            packed = schedule.estimated_rate
            singles = singleton_estimate(plans)
            if packed >= singles - DOMINANCE_TOLERANCE * abs(singles):
                outcome.dominated_blocks += 1

        if t >= config.blocks // 2:
            for rank in result.ranks.values():
                outcome.rank_counts[rank - 1] += 1
        if trace:
            outcome.traces.append(plan_trace(drop_index, t, schedule))
        logger.debug(
            f"Drop {drop_index}, block {t}: clusters {[plan.bs_set for plan in schedule.plans]}, "
            f"{len(schedule.scheduled_ues)} UEs scheduled"
        )

    logger.info(
        f"Drop {drop_index}: mean UE rate {outcome.rates[config.blocks // 2:].mean():.4f} bit/s/Hz, "
        f"{len(candidates)} candidates"
    )
    return outcome


def summarize(config: SimConfigModel, outcomes: Sequence[DropOutcome]) -> ResultsRowModel:
    num_bs = config.scenario.num_bs
    _, cell_rate, (p5, p50, p95) = metrics([o.rates for o in outcomes], num_bs)

    counts = np.sum([o.rank_counts for o in outcomes], axis=0)
    total = counts.sum()
    shares = 100.0 * counts / total if total > 0 else np.zeros(MAX_RANK)

    candidate_counts = [o.candidate_count for o in outcomes]
    cand_p5, cand_p50, cand_p95 = np.percentile(candidate_counts, PERCENTILES)

    dominance = None
    if config.scheme == "dc":
        dominance = sum(o.dominated_blocks for o in outcomes) / (len(outcomes) * config.blocks)

    return ResultsRowModel(
        scheme=config.scheme,
        ue_antennas=config.ue_antennas,
        bs_antennas=config.bs_antennas,
        j_max=config.j_max,
        l_max=config.l_max,
        beta=config.beta,
        nt_ratio=config.nt_ratio,
        csi=config.csi,
        channel=config.channel,
        drops=config.drops,
        blocks=config.blocks,
        cell_rate=cell_rate,
        p5=float(p5),
        p50=float(p50),
        p95=float(p95),
        rank_distribution=[float(share) for share in shares],
        cand_p5=float(cand_p5),
        cand_p50=float(cand_p50),
        cand_p95=float(cand_p95),
        dominance_fraction=dominance,
        max_power_ratio=max(o.max_power_ratio for o in outcomes),
        power_violations=sum(o.power_violations for o in outcomes),
    )


def run_experiment(config: SimConfigModel, cluster_map: Optional[ClusterMap] = None, trace: bool = False,
                   keep_drops: bool = False) -> Tuple[ResultsRowModel, List[DropOutcome]]:
    """Run every drop and aggregate them, in drop order, into one results row."""
    logger.info(
        f"Starting {config.scheme} with {config.drops} drops x {config.blocks} blocks, "
        f"N={config.ue_antennas}, M={config.bs_antennas}, j_max={config.j_max}, seed={config.seed}"
    )
    indices = range(config.drops)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as executor:
            outcomes = list(executor.map(
                run_drop,
                [config] * config.drops,
                indices,
                [cluster_map] * config.drops,
                [trace] * config.drops,
                [keep_drops] * config.drops,
            ))
    else:
        outcomes = [run_drop(config, d, cluster_map, trace, keep_drops) for d in indices]

    row = summarize(config, outcomes)
    logger.info(f"Finished {config.scheme}: cell rate {row.cell_rate:.4f}, 5th percentile {row.p5:.4f} bit/s/Hz")
    return row, outcomes
