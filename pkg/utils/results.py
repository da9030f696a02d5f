import logging
import math
from pathlib import Path
from typing import Dict, List, Sequence

import pandas as pd
import yaml
from returns.result import Failure, Result, Success

from models.results_model import RESULT_COLUMNS, ResultsRowModel
from utils.allocation.clustering import BlockSchedule
from utils.radio.topology import Drop

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.6g"


def emit_results(rows: Sequence[ResultsRowModel], path: Path) -> Result[None, str]:
    if not rows:
        return Failure(f"No results to write to {path}")
    try:
        table = pd.DataFrame([row.to_record() for row in rows], columns=RESULT_COLUMNS)
        table.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="")
        logger.info(f"Wrote {len(rows)} result rows to {path}")
        return Success(None)
    except Exception as e:
        return Failure(f"Failed to write results to {path}: {e}")


def read_results(path: Path) -> Result[List[ResultsRowModel], str]:
    try:
        table = pd.read_csv(path)
    except Exception as e:
        return Failure(f"Failed to read results from {path}: {e}")

    if list(table.columns) != RESULT_COLUMNS:
        return Failure(f"{path} does not carry the results header")
    rows = []
    for record in table.to_dict(orient="records"):
        cleaned = {
            k: None if isinstance(v, float) and math.isnan(v) else v
            for k, v in record.items()
        }
        rows.append(ResultsRowModel.from_record(cleaned))
    return Success(rows)


def plan_trace(drop_index: int, t: int, schedule: BlockSchedule) -> Dict[str, object]:
    return {
        "drop": drop_index,
        "block": t,
        "clusters": [
            {
                "cluster_id": plan.cluster_id,
                "bs_set": list(plan.bs_set),
                "ues": list(plan.scheduled_ues),
                "ranks": {int(k): int(v) for k, v in plan.ranks.items()},
                "estimated_rate": float(plan.estimated_rate),
            }
            for plan in schedule.plans
        ],
    }


def append_trace(path: Path, documents: Sequence[dict]) -> Result[None, str]:
    try:
        with open(path, "a") as f:
            yaml.safe_dump_all(documents, f, explicit_start=True, sort_keys=False)
        return Success(None)
    except Exception as e:
        return Failure(f"Failed to append trace to {path}: {e}")


def save_drop(drop: Drop, path: Path) -> Result[None, str]:
    """UE positions, anchors and long-term gains of one drop, for plotting elsewhere."""
    data = {
        "ues": [
            {
                "id": k,
                "x": float(drop.ue_positions[k, 0]),
                "y": float(drop.ue_positions[k, 1]),
                "anchor": int(drop.anchor[k]),
                "gains": [float(g) for g in drop.large_scale_gain[k]],
            }
            for k in range(drop.num_ues)
        ]
    }
    try:
        with open(path, "w") as f:
            yaml.safe_dump(data, f, sort_keys=False)
        return Success(None)
    except Exception as e:
        return Failure(f"Failed to write drop to {path}: {e}")
