from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

# Streams per UE are bounded by N, and the CLI accepts up to eight UE antennas
MAX_RANK = 8

# The header always carries rank_1..rank_8; columns above the run's ue_antennas are always zero
RESULT_COLUMNS = (
    ["scheme", "ue_antennas", "bs_antennas", "j_max", "l_max", "beta", "nt_ratio", "csi", "channel",
     "drops", "blocks", "cell_rate", "p5", "p50", "p95"]
    + [f"rank_{l}" for l in range(1, MAX_RANK + 1)]
    + ["cand_p5", "cand_p50", "cand_p95", "dominance_fraction", "max_power_ratio", "power_violations"]
)


class ResultsRowModel(BaseModel):
    """One completed experiment."""
    scheme: Literal["scp", "isc", "sc", "dc"]
    ue_antennas: int
    bs_antennas: int
    j_max: int
    l_max: Optional[int] = None
    beta: float
    nt_ratio: float
    csi: Literal["perfect", "estimated"]
    channel: Literal["epa", "etu", "custom"]
    drops: int
    blocks: int
    cell_rate: float = Field(..., ge=0.0, description="Mean over drops of sum UE rate / J [bit/s/Hz]")
    p5: float = Field(..., ge=0.0)
    p50: float = Field(..., ge=0.0)
    p95: float = Field(..., ge=0.0)
    rank_distribution: List[float] = Field(
        default_factory=lambda: [0.0] * MAX_RANK,
        description="Percent of scheduled (UE, block) pairs served with 1..8 streams"
    )
    cand_p5: float = 0.0
    cand_p50: float = 0.0
    cand_p95: float = 0.0
    dominance_fraction: Optional[float] = Field(
        default=None,
        description="Blocks where the packed selection estimate beats all singletons (dc only)"
    )
    max_power_ratio: float = Field(default=0.0, description="Largest per-BS power over P_BS seen")
    power_violations: int = 0

    @field_validator("rank_distribution")
    @classmethod
    def validate_rank_distribution(cls, v):
        if len(v) != MAX_RANK:
            raise ValueError(f"rank_distribution needs {MAX_RANK} entries, got {len(v)}")
        if any(share < 0 for share in v):
            raise ValueError("rank shares must be non-negative")
        return v

    @model_validator(mode="after")
    def validate_rank_total(self):
        total = sum(self.rank_distribution)
        if total > 0 and abs(total - 100.0) > 1e-3:
            raise ValueError(f"rank shares must sum to 100%, got {total}")
        if any(share > 0 for share in self.rank_distribution[self.ue_antennas:]):
            raise ValueError(f"rank shares above ue_antennas={self.ue_antennas} must be zero")
        return self

    def to_record(self) -> Dict[str, object]:
        record = self.model_dump(exclude={"rank_distribution"})
        for l, share in enumerate(self.rank_distribution, start=1):
            record[f"rank_{l}"] = share
        return {column: record[column] for column in RESULT_COLUMNS}

    @classmethod
    def from_record(cls, record: Dict[str, object]) -> "ResultsRowModel":
        values = {k: v for k, v in record.items() if not str(k).startswith("rank_")}
        values["rank_distribution"] = [float(record[f"rank_{l}"]) for l in range(1, MAX_RANK + 1)]
        return cls(**values)
