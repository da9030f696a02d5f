"""Experiment configuration: key=value files, CLI overrides and static cluster maps."""

import logging
import re
from pathlib import Path
from typing import Any, Dict, Tuple

from dotenv import dotenv_values
from returns.result import Failure, Result, Success

from models.scenario_model import ScenarioModel
from models.sim_config_model import SimConfigModel
from utils.allocation.schemes import ClusterMapError, validate_cluster_map

logger = logging.getLogger(__name__)

# Flag spellings that differ from the model field names
KEY_ALIASES = {
    "jmax": "j_max",
    "lmax": "l_max",
    "master_seed": "seed",
    "channel_profile": "channel",
    "csi_mode": "csi",
}


def normalize_key(key: str) -> str:
    key = key.strip().lstrip("-").lower().replace("-", "_")
    return KEY_ALIASES.get(key, key)


def merge_overrides(base: dict, overrides: dict) -> dict:
    """Merge ``overrides`` into ``base`` recursively; None values leave ``base`` untouched."""
    for k, v in overrides.items():
        if v is None:
            continue
        if isinstance(v, dict):
            if not isinstance(base.get(k), dict):
                base[k] = {}
            merge_overrides(base[k], v)
        else:
            base[k] = v
    return base


def nest_scenario_keys(flat: Dict[str, Any]) -> Dict[str, Any]:
    """Move keys naming a scenario parameter into the ``scenario`` section."""
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        if key in ScenarioModel.model_fields:
            nested.setdefault("scenario", {})[key] = value
        else:
            nested[key] = value
    return nested


def load_config_file(path: Path) -> Result[dict, str]:
    if not path.is_file():
        return Failure(f"Config file {path} does not exist")
    try:
        raw = dotenv_values(path)
    except Exception as e:
        return Failure(f"Failed to read config file {path}: {e}")

    flat = {}
    for key, value in raw.items():
        name = normalize_key(key)
        if name not in SimConfigModel.model_fields and name not in ScenarioModel.model_fields:
            return Failure(f"{path}: unknown key '{key}'")
        if value is None or value == "":
            continue
        flat[name] = value
    logger.info(f"Loaded {len(flat)} settings from {path}")
    return Success(nest_scenario_keys(flat))


def build_config(file_values: dict, overrides: dict) -> SimConfigModel:
    """File values under CLI overrides; raises pydantic ValidationError on bad values."""
    merged = merge_overrides({}, file_values)
    merged = merge_overrides(merged, nest_scenario_keys(overrides))
    return SimConfigModel(**merged)


def load_cluster_map(path: Path, num_bs: int) -> Result[Tuple[Tuple[int, ...], ...], str]:
    """One cluster per line, 0-based BS indices separated by commas or spaces, '#' starts a comment."""
    try:
        text = path.read_text()
    except OSError as e:
        return Failure(f"Failed to read cluster map {path}: {e}")

    clusters = []
    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        try:
            clusters.append(tuple(int(token) for token in re.split(r"[,\s]+", content) if token))
        except ValueError:
            logger.warning(f"{path}:{number}: rejected cluster map line '{line.strip()}'")
            return Failure(f"{path}:{number}: BS indices must be integers")

    try:
        return Success(validate_cluster_map(clusters, num_bs))
    except ClusterMapError as e:
        logger.warning(f"{path}: rejected cluster map: {e}")
        return Failure(f"{path}: {e}")
