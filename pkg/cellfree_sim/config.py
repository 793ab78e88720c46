"""Configuration management for Cellfree Sim."""

import math
import os
from enum import Enum
from pathlib import Path
from typing import Any, Optional

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Load environment variables
load_dotenv()

ENV_PREFIX = "CELLFREE_"


def _env(name: str, default: str) -> str:
    return os.getenv(f"{ENV_PREFIX}{name.upper()}", default)


class Scheme(Enum):
    """UL receive / DL precoding schemes."""
    CLZF = "clzf"
    LMMSE_CLUSTER = "lmmse_cluster"
    LSFD = "lsfd"
    LZF_EPA = "lzf_epa"
    LZF_PPA = "lzf_ppa"
    LPZF_EPA = "lpzf_epa"
    LPZF_PPA = "lpzf_ppa"

    @property
    def is_local_precoding(self) -> bool:
        """True for the per-RU DL baselines, which have no UL counterpart."""
        return self in (Scheme.LZF_EPA, Scheme.LZF_PPA, Scheme.LPZF_EPA, Scheme.LPZF_PPA)


class Estimator(Enum):
    """Channel knowledge used by the receivers."""
    IDEAL = "ideal"
    PM = "pm"
    SP = "sp"


class DlPowerMode(Enum):
    """Total DL power accounting."""
    BALANCED = "balanced"
    PER_RU = "per_ru"


class LosMode(Enum):
    """How the LOS state of each link is decided."""
    RANDOM = "random"
    LOS = "los"
    NLOS = "nlos"


class UnknownLinkWeight(Enum):
    """Weight of the LSFC of a link the cluster does not know in the nominal SINRs."""
    CLUSTER_SIZE = "cluster_size"
    BLOCK_NORM = "block_norm"


class Direction(Enum):
    UL = "ul"
    DL = "dl"


class SimConfig(BaseModel):
    """Scenario configuration for one simulation point.

    Every default can be overridden through a ``CELLFREE_<FIELD>`` environment
    variable, a flat ``key=value`` config file or explicit keyword overrides
    (see :func:`load_config`).
    """
    model_config = ConfigDict(frozen=True)

    area_side: float = Field(default_factory=lambda: float(_env("area_side", "225")), gt=0)
    num_rus: int = Field(default_factory=lambda: int(_env("num_rus", "10")), gt=0)
    num_ues: int = Field(default_factory=lambda: int(_env("num_ues", "100")), gt=0)
    antennas_per_ru: int = Field(default_factory=lambda: int(_env("antennas_per_ru", "64")), gt=0)
    pilot_dim: int = Field(default_factory=lambda: int(_env("pilot_dim", "40")), gt=0)
    coherence_block: int = Field(default_factory=lambda: int(_env("coherence_block", "200")), gt=0)
    angular_spread: float = Field(default_factory=lambda: float(_env("angular_spread", str(math.pi / 8))))
    max_cluster_size: int = Field(default_factory=lambda: int(_env("max_cluster_size", "10")), ge=1)
    snr_threshold: float = Field(default_factory=lambda: float(_env("snr_threshold", "1.0")), ge=0)
    noise_psd_dbm: float = Field(default_factory=lambda: float(_env("noise_psd_dbm", "-96")))
    carrier_freq_ghz: float = Field(default_factory=lambda: float(_env("carrier_freq_ghz", "3.7")), gt=0)
    num_layouts: int = Field(default_factory=lambda: int(_env("num_layouts", "50")), gt=0)
    fading_draws_per_layout: int = Field(default_factory=lambda: int(_env("fading_draws_per_layout", "100")), gt=0)
    master_seed: int = Field(default_factory=lambda: int(_env("master_seed", "0")), ge=0, lt=2**64)
    dl_power_mode: DlPowerMode = Field(default_factory=lambda: DlPowerMode(_env("dl_power_mode", "balanced")))
    ru_power_dbm: Optional[float] = Field(default_factory=lambda: float(v) if (v := _env("ru_power_dbm", "")) else None)
    unknown_link_weight: UnknownLinkWeight = Field(
        default_factory=lambda: UnknownLinkWeight(_env("unknown_link_weight", "cluster_size"))
    )

    # Pathloss model (UMi street canyon)
    ru_height: float = Field(default_factory=lambda: float(_env("ru_height", "10.0")), gt=0)
    ue_height: float = Field(default_factory=lambda: float(_env("ue_height", "1.5")), gt=0)
    shadowing_enabled: bool = Field(default_factory=lambda: _env("shadowing_enabled", "true").lower() == "true")
    shadowing_los_db: float = Field(default_factory=lambda: float(_env("shadowing_los_db", "4.0")), ge=0)
    shadowing_nlos_db: float = Field(default_factory=lambda: float(_env("shadowing_nlos_db", "7.82")), ge=0)
    los_mode: LosMode = Field(default_factory=lambda: LosMode(_env("los_mode", "random")))

    # LSFD long-term statistics depth
    lsfd_stat_draws: int = Field(default_factory=lambda: int(_env("lsfd_stat_draws", "500")), gt=0)

    @field_validator("angular_spread")
    @classmethod
    def validate_angular_spread(cls, v: float) -> float:
        """Angular spread must lie in (0, 2π]."""
        if not 0 < v <= 2 * math.pi + 1e-12:
            raise ValueError(f"angular_spread must be in (0, 2π], got {v}")
        return v

    @model_validator(mode="after")
    def validate_dimensions(self) -> "SimConfig":
        """Cross-field checks."""
        if self.pilot_dim > self.coherence_block:
            raise ValueError(
                f"pilot dim exceeds coherence block: pilot_dim={self.pilot_dim} > "
                f"coherence_block={self.coherence_block}"
            )
        if self.dl_power_mode is DlPowerMode.PER_RU and self.ru_power_dbm is None:
            raise ValueError("dl_power_mode=per_ru requires ru_power_dbm")
        return self

    @property
    def total_antennas(self) -> int:
        return self.num_rus * self.antennas_per_ru

    @property
    def noise_mw(self) -> float:
        return 10 ** (self.noise_psd_dbm / 10)

    @property
    def ru_power_mw(self) -> Optional[float]:
        if self.ru_power_dbm is None:
            return None
        return 10 ** (self.ru_power_dbm / 10)


def field_names() -> list[str]:
    """Names of all configurable scenario fields."""
    return list(SimConfig.model_fields)


def load_config(path: Optional[str | Path] = None, **overrides: Any) -> SimConfig:
    """
    Build a SimConfig from environment defaults, a flat key-value file and overrides.

    Args:
        path: Optional config file with one ``field=value`` per line
        **overrides: Field values taking precedence over the file (e.g. CLI flags)

    Returns:
        Validated SimConfig

    Raises:
        FileNotFoundError: If the config file does not exist
        ValueError: If the file names an unknown field
        pydantic.ValidationError: If a value violates the schema
    """
    values: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"Config file not found: {path}")
        values.update({k.strip().lower(): v for k, v in dotenv_values(path).items() if v not in (None, "")})

    values.update({k: v for k, v in overrides.items() if v is not None})

    unknown = sorted(set(values) - set(SimConfig.model_fields))
    if unknown:
        raise ValueError(f"Unknown config field(s): {', '.join(unknown)}")

    return SimConfig.model_validate(values)


def dump_config(sim_config: SimConfig) -> str:
    """Render a config in the flat key-value file format accepted by load_config."""
    lines = []
    for name, value in sim_config.model_dump(mode="json").items():
        lines.append(f"{name}={'' if value is None else value}")
    return "\n".join(lines) + "\n"
