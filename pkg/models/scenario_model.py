import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Hexagonal layouts with 0, 1, 2, 3 rings of sites around the center one
VALID_SITE_COUNTS = (1, 7, 19, 37)


def dbm_to_watts(value_dbm: float) -> float:
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


class ScenarioModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    site_count: int = Field(
        default=7,
        description="Number of sites on the hexagonal lattice (1, 7, 19 or 37)"
    )
    bs_per_site: Literal[3] = Field(
        default=3,
        description="Co-located sectors per site, boresights 120 degrees apart"
    )
    inter_site_distance: float = Field(
        default=500.0,
        description="Distance between neighbouring site centers [m]"
    )
    min_bs_ue_distance: float = Field(
        default=35.0,
        description="Minimum distance between any BS image and any UE [m]"
    )
    p_bs_dbm: float = Field(default=46.0, description="Power available at each BS [dBm]")
    p_ue_dbm: float = Field(default=23.0, description="Power available at each UE [dBm]")
    noise_dbm: float = Field(default=-101.0, description="Thermal noise power [dBm]")
    path_loss_exponent: float = Field(default=3.5, description="Path-loss exponent")
    cell_edge_snr_db: float = Field(
        default=10.0,
        description="Full-power single-stream SNR of a UE at the cell-edge distance [dB]"
    )
    cell_edge_distance: Optional[float] = Field(
        default=None,
        description="Cell-edge distance [m]; defaults to inter_site_distance/sqrt(3)"
    )
    shadow_std_db: float = Field(default=8.0, description="Lognormal shadowing std [dB]")
    theta_3db: float = Field(
        default=70.0 * math.pi / 180.0,
        description="Half-power beamwidth of the sector antenna [rad]"
    )
    sidelobe_floor_db: float = Field(default=20.0, description="Antenna attenuation floor A_s [dB]")
    ues_per_bs: int = Field(default=10, description="UEs dropped in the coverage area of each BS")
    site_shadow_correlation: float = Field(
        default=0.5,
        description="Shadowing correlation between co-located BSs; BSs of different sites are independent"
    )

    @field_validator("site_count")
    @classmethod
    def validate_site_count(cls, v):
        if v not in VALID_SITE_COUNTS:
            raise ValueError(f"site_count must be one of {VALID_SITE_COUNTS}, got {v}")
        return v

    @field_validator(
        "inter_site_distance", "min_bs_ue_distance", "path_loss_exponent",
        "shadow_std_db", "theta_3db", "sidelobe_floor_db"
    )
    @classmethod
    def validate_positive(cls, v, info):
        if not v > 0:
            raise ValueError(f"{info.field_name} must be positive, got {v}")
        return v

    @field_validator("cell_edge_distance")
    @classmethod
    def validate_cell_edge_distance(cls, v):
        if v is not None and not v > 0:
            raise ValueError(f"cell_edge_distance must be positive, got {v}")
        return v

    @field_validator("p_bs_dbm", "p_ue_dbm", "noise_dbm", "cell_edge_snr_db")
    @classmethod
    def validate_finite(cls, v, info):
        if not math.isfinite(v):
            raise ValueError(f"{info.field_name} must be finite")
        return v

    @field_validator("ues_per_bs")
    @classmethod
    def validate_ues_per_bs(cls, v):
        if v < 1:
            raise ValueError("At least one UE per BS must be dropped")
        return v

    @field_validator("site_shadow_correlation")
    @classmethod
    def validate_shadowing(cls, v):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"site_shadow_correlation must lie in [0, 1], got {v}")
        return v

    @model_validator(mode="after")
    def validate_geometry(self):
        # The drop region must keep room for UEs beyond d_min of their own site
        if self.min_bs_ue_distance >= self.inter_site_distance / math.sqrt(3.0):
            raise ValueError(
                f"min_bs_ue_distance ({self.min_bs_ue_distance}) must be smaller than the "
                f"site radius ({self.inter_site_distance / math.sqrt(3.0):.1f})"
            )
        return self

    @property
    def num_bs(self) -> int:
        return self.site_count * self.bs_per_site

    @property
    def num_ues(self) -> int:
        return self.num_bs * self.ues_per_bs

    @property
    def d_ce(self) -> float:
        if self.cell_edge_distance is not None:
            return self.cell_edge_distance
        return self.inter_site_distance / math.sqrt(3.0)

    @property
    def p_bs(self) -> float:
        return dbm_to_watts(self.p_bs_dbm)

    @property
    def p_ue(self) -> float:
        return dbm_to_watts(self.p_ue_dbm)

    @property
    def noise_power(self) -> float:
        return dbm_to_watts(self.noise_dbm)
