from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from models.results_model import MAX_RANK
from models.scenario_model import ScenarioModel, dbm_to_watts
from utils.radio.channel import CoherenceSpec


class SimConfigModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    scheme: Literal["scp", "isc", "sc", "dc"] = Field(default="dc", description="Clustering scheme")
    drops: int = Field(default=100, description="Number of independent UE drops")
    blocks: int = Field(default=200, description="Block fading realizations per drop (T)")
    ue_antennas: int = Field(default=1, description="Antennas per UE (N)")
    bs_antennas: int = Field(default=4, description="Antennas per BS (M)")
    j_max: int = Field(default=3, description="Largest candidate cluster size")
    l_max: Optional[int] = Field(default=None, description="Stream cap per UE, None when unbounded")
    csi: Literal["perfect", "estimated"] = Field(default="perfect", description="Channel knowledge at the BSs")
    channel: Literal["epa", "etu", "custom"] = Field(default="epa", description="Delay profile")
    delay_spread: Optional[float] = Field(default=None, description="Maximum excess delay [s], custom profile only")
    doppler: float = Field(default=5.0, description="Maximum Doppler frequency [Hz]")
    nt: Optional[int] = Field(default=None, description="Pilot resource elements per block (N_T)")
    nt_fraction: Optional[float] = Field(default=None, description="N_T as a fraction of the block size N_E")
    beta: float = Field(default=0.0, description="Correlation between neighbouring UE antennas")
    gamma: float = Field(default=0.1, description="Forgetting factor of the PF average")
    seed: int = Field(default=0, description="Master seed")
    pf_power_dbm: Optional[float] = Field(default=None, description="Reference power of the PF start rate [dBm], P_BS when unset")
    scheduler: Literal["pf", "max_rate"] = Field(default="pf", description="UE weights: 1/avg rate or 1")
    cluster_map: Optional[Path] = Field(default=None, description="Static cluster map file for scheme sc")
    workers: int = Field(default=1, description="Worker processes running drops in parallel")
    scenario: ScenarioModel = Field(default_factory=ScenarioModel)

    @field_validator("l_max", mode="before")
    @classmethod
    def parse_unbounded(cls, v):
        if isinstance(v, str) and v.strip().lower() in ("", "unbounded", "none"):
            return None
        return v

    @field_validator("drops", "blocks", "ue_antennas", "bs_antennas", "workers")
    @classmethod
    def validate_positive_count(cls, v, info):
        if v < 1:
            raise ValueError(f"{info.field_name} must be at least 1, got {v}")
        return v

    @field_validator("blocks")
    @classmethod
    def validate_even_blocks(cls, v):
        if v % 2:
            raise ValueError(f"blocks must be even, got {v}")
        return v

    @field_validator("beta")
    @classmethod
    def validate_beta(cls, v):
        if not 0.0 <= v < 1.0:
            raise ValueError(f"beta must lie in [0, 1), got {v}")
        return v

    @field_validator("gamma")
    @classmethod
    def validate_gamma(cls, v):
        # gamma = 1 would zero the average of an unscheduled UE
        if not 0.0 <= v < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {v}")
        return v

    @field_validator("doppler")
    @classmethod
    def validate_doppler(cls, v):
        if not v > 0:
            raise ValueError(f"doppler must be positive, got {v}")
        return v

    @field_validator("nt_fraction")
    @classmethod
    def validate_nt_fraction(cls, v):
        if v is not None and not 0.0 <= v < 1.0:
            raise ValueError(f"nt_fraction must lie in [0, 1), got {v}")
        return v

    @model_validator(mode="after")
    def validate_experiment(self):
        num_bs = self.scenario.num_bs
        if not 1 <= self.j_max <= num_bs:
            raise ValueError(f"j_max must lie in [1, {num_bs}], got {self.j_max}")
        if self.ue_antennas > MAX_RANK:
            raise ValueError(f"At most {MAX_RANK} UE antennas are supported, got {self.ue_antennas}")
        if self.l_max is not None and not 1 <= self.l_max <= self.ue_antennas:
            raise ValueError(f"l_max must lie in [1, {self.ue_antennas}], got {self.l_max}")
        if self.channel == "custom" and self.delay_spread is None:
            raise ValueError("channel=custom needs delay_spread")
        if self.nt is not None and self.nt_fraction is not None:
            raise ValueError("Give either nt or nt_fraction, not both")
        if self.cluster_map is not None and self.scheme != "sc":
            raise ValueError("cluster_map only applies to scheme sc")

        coherence = self.coherence
        if self.csi == "estimated":
            needed = self.ue_antennas * self.scenario.num_ues
            if coherence.n_t < needed:
                raise ValueError(
                    f"Estimated CSI needs N_T >= N*K = {needed} orthogonal pilots, got {coherence.n_t}"
                )
        return self

    @property
    def block_length(self) -> int:
        return CoherenceSpec.from_profile(self.channel, self.doppler, 0, self.delay_spread).n_e

    @property
    def pilot_count(self) -> int:
        if self.nt is not None:
            return self.nt
        if self.nt_fraction is not None:
            return int(round(self.nt_fraction * self.block_length))
        return 0

    @property
    def coherence(self) -> CoherenceSpec:
        # CoherenceSpec rejects N_T >= N_E
        return CoherenceSpec.from_profile(self.channel, self.doppler, self.pilot_count, self.delay_spread)

    @property
    def nt_ratio(self) -> float:
        return self.pilot_count / self.block_length

    @property
    def overhead_factor(self) -> float:
        return self.coherence.overhead_factor if self.pilot_count > 0 else 1.0

    @property
    def pf_power(self) -> float:
        if self.pf_power_dbm is None:
            return self.scenario.p_bs
        return dbm_to_watts(self.pf_power_dbm)
