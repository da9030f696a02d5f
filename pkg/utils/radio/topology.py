"""Hexagonal multi-site deployment, UE drops and long-term channel gains."""

import logging
import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from models.scenario_model import ScenarioModel

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence]

SECTOR_BORESIGHTS = (0.0, 2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0)


@dataclass(frozen=True)
class Scenario:
    """Immutable deployment: site/BS geometry plus the scenario constants.

    BS ``j`` belongs to site ``j // bs_per_site`` and points its boresight along
    ``bs_boresight[j]``. ``wrap_translations[0]`` is always the zero vector.
    """
    config: ScenarioModel
    site_positions: np.ndarray
    bs_site: np.ndarray
    bs_positions: np.ndarray
    bs_boresight: np.ndarray
    wrap_translations: np.ndarray

    @property
    def num_bs(self) -> int:
        return len(self.bs_positions)

    @property
    def num_sites(self) -> int:
        return len(self.site_positions)

    @property
    def site_radius(self) -> float:
        return self.config.inter_site_distance / math.sqrt(3.0)


@dataclass(frozen=True)
class Drop:
    """One UE placement and every long-term quantity derived from it."""
    ue_positions: np.ndarray
    home_bs: np.ndarray
    distances: np.ndarray
    bearings: np.ndarray
    shadow_db: np.ndarray
    large_scale_gain: np.ndarray
    bs_order: np.ndarray

    @property
    def num_ues(self) -> int:
        return self.large_scale_gain.shape[0]

    @property
    def num_bs(self) -> int:
        return self.large_scale_gain.shape[1]

    @property
    def anchor(self) -> np.ndarray:
        return self.bs_order[:, 0]


def _lattice_basis(inter_site_distance: float) -> Tuple[np.ndarray, np.ndarray]:
    a1 = inter_site_distance * np.array([math.cos(math.pi / 6.0), math.sin(math.pi / 6.0)])
    a2 = inter_site_distance * np.array([0.0, 1.0])
    return a1, a2


def _rotate(vector: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * vector[0] - s * vector[1], s * vector[0] + c * vector[1]])


def build_scenario(config: ScenarioModel) -> Scenario:
    """Lay sites out on a hexagonal lattice and attach three sectors to each."""
    rings = {1: 0, 7: 1, 19: 2, 37: 3}[config.site_count]
    a1, a2 = _lattice_basis(config.inter_site_distance)

    sites = []
    for q in range(-rings, rings + 1):
        for r in range(-rings, rings + 1):
            ring = max(abs(q), abs(r), abs(q + r))
            if ring > rings:
                continue
            position = q * a1 + r * a2
            angle = math.atan2(position[1], position[0]) % (2.0 * math.pi)
            sites.append((ring, round(angle, 9), position))
    sites.sort(key=lambda entry: (entry[0], entry[1]))
    site_positions = np.array([entry[2] for entry in sites])

    bs_site = np.repeat(np.arange(len(sites)), config.bs_per_site)
    bs_positions = site_positions[bs_site]
    bs_boresight = np.tile(np.array(SECTOR_BORESIGHTS), len(sites))

    translations = [np.zeros(2)]
    if rings > 0:
        # Supercell of the (rings+1, rings) hexagonal cluster
        base = (rings + 1) * a1 + rings * a2
        translations += [_rotate(base, i * math.pi / 3.0) for i in range(6)]

    scenario = Scenario(
        config=config,
        site_positions=site_positions,
        bs_site=bs_site,
        bs_positions=bs_positions,
        bs_boresight=bs_boresight,
        wrap_translations=np.array(translations),
    )
    logger.debug(f"Built scenario with {scenario.num_sites} sites and {scenario.num_bs} BSs")
    return scenario


def wrap_angle(theta):
    """Map angles onto [-pi, pi)."""
    return (np.asarray(theta) + np.pi) % (2.0 * np.pi) - np.pi


def antenna_gain_db(theta, theta_3db: float = 70.0 * math.pi / 180.0, sidelobe_floor_db: float = 20.0):
    theta = wrap_angle(theta)
    return -np.minimum(12.0 * (theta / theta_3db) ** 2, sidelobe_floor_db)


def wrapped_geometry(ue_positions: np.ndarray, scenario: Scenario) -> Tuple[np.ndarray, np.ndarray]:
    """Distances and boresight-relative bearings of every (UE, BS) pair, both K x J.

    For every pair the BS image closest to the UE is used.
    """
    ue_positions = np.atleast_2d(ue_positions)
    images = scenario.bs_positions[:, None, :] + scenario.wrap_translations[None, :, :]
    offsets = ue_positions[:, None, None, :] - images[None, :, :, :]
    norms = np.linalg.norm(offsets, axis=-1)
    nearest = np.argmin(norms, axis=-1)

    distances = np.take_along_axis(norms, nearest[..., None], axis=-1)[..., 0]
    nearest_offsets = np.take_along_axis(offsets, nearest[..., None, None], axis=2)[:, :, 0, :]
    bearings = np.arctan2(nearest_offsets[..., 1], nearest_offsets[..., 0])
    bearings = wrap_angle(bearings - scenario.bs_boresight[None, :])
    return distances, bearings


def wrap_distance_and_angle(ue_pos, bs_index: int, scenario: Scenario) -> Tuple[float, float]:
    if not 0 <= bs_index < scenario.num_bs:
        raise ValueError(f"BS index {bs_index} outside [0, {scenario.num_bs})")
    distances, bearings = wrapped_geometry(np.asarray(ue_pos, dtype=float), scenario)
    return float(distances[0, bs_index]), float(bearings[0, bs_index])


def site_at(point, scenario: Scenario) -> int:
    """Index of the site whose (wrapped) position is closest to ``point``."""
    images = scenario.site_positions[:, None, :] + scenario.wrap_translations[None, :, :]
    norms = np.linalg.norm(np.asarray(point, dtype=float) - images, axis=-1)
    return int(np.argmin(norms.min(axis=1)))


def draw_shadowing_db(rng: np.random.Generator, num_ues: int, bs_site: np.ndarray, std_db: float,
                      site_correlation: float = 0.0) -> np.ndarray:
    """K x J lognormal shadowing in dB.

    Every UE sees one component per site, shared by the co-located BSs with weight
    ``site_correlation``, plus an independent component per BS.
    """
    site_part = rng.normal(0.0, 1.0, size=(num_ues, int(np.max(bs_site)) + 1))[:, bs_site]
    bs_part = rng.normal(0.0, 1.0, size=(num_ues, len(bs_site)))
    return std_db * (np.sqrt(site_correlation) * site_part + np.sqrt(1.0 - site_correlation) * bs_part)


def large_scale_gain(distance, shadow_db, theta_gain_db, scenario: Union[Scenario, ScenarioModel]):
    """Linear gain normalized so that a full-power BS reaches the cell-edge SNR at d_CE."""
    config = scenario.config if isinstance(scenario, Scenario) else scenario
    distance = np.asarray(distance, dtype=float)
    if np.any(distance < config.min_bs_ue_distance):
        raise ValueError(
            f"Distance {float(np.min(distance)):.3f} m below d_min={config.min_bs_ue_distance} m"
        )

    edge_gain = 10.0 ** (config.cell_edge_snr_db / 10.0) * config.noise_power / config.p_bs
    path_loss = (config.d_ce / distance) ** config.path_loss_exponent
    return edge_gain * path_loss * 10.0 ** (np.asarray(shadow_db) / 10.0) \
        * 10.0 ** (np.asarray(theta_gain_db) / 10.0)


def _sample_sector(rng: np.random.Generator, scenario: Scenario, bs_index: int, count: int) -> np.ndarray:
    """Uniform points in the 120-degree rhombus of the site hexagon served by ``bs_index``."""
    radius = scenario.site_radius
    boresight = scenario.bs_boresight[bs_index]
    u = radius * np.array([math.cos(boresight - math.pi / 3.0), math.sin(boresight - math.pi / 3.0)])
    w = radius * np.array([math.cos(boresight + math.pi / 3.0), math.sin(boresight + math.pi / 3.0)])
    coefficients = rng.random((count, 2))
    return scenario.bs_positions[bs_index] + coefficients[:, :1] * u + coefficients[:, 1:] * w


def drop_ues(scenario: Scenario, rng_seed: SeedLike) -> Drop:
    """Drop ``ues_per_bs`` UEs uniformly in every BS sector and derive the long-term gains."""
    config = scenario.config
    rng = np.random.default_rng(rng_seed)

    positions = []
    home = []
    for bs_index in range(scenario.num_bs):
        accepted = np.empty((0, 2))
        while len(accepted) < config.ues_per_bs:
            candidates = _sample_sector(rng, scenario, bs_index, config.ues_per_bs)
            distances, _ = wrapped_geometry(candidates, scenario)
            keep = np.all(distances >= config.min_bs_ue_distance, axis=1)
            accepted = np.vstack([accepted, candidates[keep]])
        positions.append(accepted[:config.ues_per_bs])
        home += [bs_index] * config.ues_per_bs

    ue_positions = np.vstack(positions)
    distances, bearings = wrapped_geometry(ue_positions, scenario)
    shadow_db = draw_shadowing_db(rng, len(ue_positions), scenario.bs_site, config.shadow_std_db,
                                  config.site_shadow_correlation)
    gains = large_scale_gain(
        distances,
        shadow_db,
        antenna_gain_db(bearings, config.theta_3db, config.sidelobe_floor_db),
        config,
    )
    # Stable sort keeps ascending BS index among equal gains
    bs_order = np.argsort(-gains, axis=1, kind="stable")

    return Drop(
        ue_positions=ue_positions,
        home_bs=np.array(home),
        distances=distances,
        bearings=bearings,
        shadow_db=shadow_db,
        large_scale_gain=gains,
        bs_order=bs_order,
    )
