"""Derived physical constants of a scenario."""

import math
from dataclasses import dataclass

from .config import SimConfig
from .geometry import mean_beta
from .rng import Purpose, StreamId, stream_for

__all__ = [
    "DerivedConstants",
    "Purpose",
    "StreamId",
    "association_threshold",
    "derive_constants",
    "disk_diameter",
    "stream_for",
]


@dataclass(frozen=True)
class DerivedConstants:
    """
    SNR normalization of a scenario.

    Attributes:
        snr: Linear P_ue / N0, chosen so that mean_beta(3 d_L) * M * snr = 1
        d_l: Diameter of a disk of area A / L (meters)
        beta_ref: Mean LSFC at distance 3 d_L
        p_ue_dbm: UE transmit symbol energy implied by snr and N0
    """
    snr: float
    d_l: float
    beta_ref: float
    p_ue_dbm: float

    @property
    def p_ue_mw(self) -> float:
        return 10 ** (self.p_ue_dbm / 10)


def disk_diameter(area: float, num_rus: int) -> float:
    """Diameter of a disk whose area is area / num_rus."""
    if num_rus <= 0:
        raise ValueError(f"d_L undefined for num_rus={num_rus}")
    return 2.0 * math.sqrt(area / (math.pi * num_rus))


def derive_constants(config: SimConfig) -> DerivedConstants:
    """Compute the SNR such that the mean LSFC at 3 d_L times M times SNR equals one."""
    d_l = disk_diameter(config.area_side**2, config.num_rus)
    beta_ref = mean_beta(3.0 * d_l, config)
    snr = 1.0 / (beta_ref * config.antennas_per_ru)
    p_ue_dbm = 10 * math.log10(snr) + config.noise_psd_dbm
    return DerivedConstants(snr=snr, d_l=d_l, beta_ref=beta_ref, p_ue_dbm=p_ue_dbm)


def association_threshold(config: SimConfig, constants: DerivedConstants) -> float:
    """Minimum LSFC for an RU-UE association: η / (M snr)."""
    return config.snr_threshold / (config.antennas_per_ru * constants.snr)
