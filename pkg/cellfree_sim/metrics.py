"""Exact SINRs, ergodic rates, spectral efficiency and rate-distribution summaries."""

import logging
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

import numpy as np
import pandas as pd
from scipy.stats import ks_2samp

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["layout_id", "ue_id", "direction", "scheme", "estimator", "sinr_mean_db", "rate", "se"]
PERCENTILES = (5, 50, 95)
CDF_COLUMNS = ["scheme", "estimator", "direction", "with_outage", "rate", "fraction"]


def _active_mask(num_ues: int, active: Optional[np.ndarray]) -> np.ndarray:
    return np.ones(num_ues, dtype=bool) if active is None else np.asarray(active, dtype=bool)


def actual_ul_sinr(
    receivers: np.ndarray,
    channels: np.ndarray,
    snr: float,
    active: Optional[np.ndarray] = None,
    k: Optional[int] = None,
) -> np.ndarray | float:
    """
    Exact UL SINR |v_kᴴ h_k|² / (snr⁻¹ + Σ_{j≠k} |v_kᴴ h_j|²) with unit UL powers.

    Args:
        receivers: LM×K matrix of unit-norm receive columns
        channels: LM×K true channel matrix (all links, not only the cluster ones)
        snr: UL SNR
        active: Mask of transmitting UEs; silent UEs neither interfere nor get a SINR
        k: Return only the SINR of this UE
    """
    K = channels.shape[1]
    active = _active_mask(K, active)
    gains = np.abs(receivers.conj().T @ channels) ** 2  # [k, j] = |v_kᴴ h_j|²
    gains = gains * active[None, :]
    signal = np.diagonal(gains).copy()
    interference = gains.sum(axis=1) - signal
    sinr = np.where(active, signal / (1.0 / snr + interference), 0.0)
    return sinr if k is None else float(sinr[k])


def actual_dl_sinr(
    precoders: np.ndarray,
    q: np.ndarray,
    channels: np.ndarray,
    snr: float,
    k: Optional[int] = None,
) -> np.ndarray | float:
    """
    Exact DL SINR |h_kᴴ u_k|² q_k / (snr⁻¹ + Σ_{j≠k} |h_kᴴ u_j|² q_j).

    UEs with q_k = 0 get SINR 0 and cause no interference.
    """
    q = np.asarray(q, dtype=float)
    gains = np.abs(channels.conj().T @ precoders) ** 2 * q[None, :]  # [k, j] = |h_kᴴ u_j|² q_j
    signal = np.diagonal(gains).copy()
    interference = gains.sum(axis=1) - signal
    sinr = signal / (1.0 / snr + interference)
    return sinr if k is None else float(sinr[k])


def ergodic_rates(sinr_samples: np.ndarray) -> np.ndarray:
    """Per-UE mean of log2(1 + SINR) over the draws on axis 0."""
    samples = np.atleast_2d(np.asarray(sinr_samples, dtype=float))
    if samples.shape[0] == 0:
        raise ValueError("ergodic_rates needs at least one draw")
    return np.log2(1.0 + samples).mean(axis=0)


def spectral_efficiency(rates: np.ndarray | float, pilot_dim: int, coherence_block: int) -> np.ndarray | float:
    """SE = (1 − τ_p / T) R."""
    if not 0 <= pilot_dim <= coherence_block:
        raise ValueError(f"Need 0 ≤ τ_p ≤ T, got τ_p={pilot_dim}, T={coherence_block}")
    return (1.0 - pilot_dim / coherence_block) * rates


def empirical_cdf(values: Iterable[float]) -> tuple[np.ndarray, np.ndarray]:
    """
    Right-continuous empirical CDF.

    Returns:
        Tuple of (sorted distinct values, fraction of samples ≤ each value)
    """
    data = np.sort(np.asarray(list(values), dtype=float))
    if data.size == 0:
        raise ValueError("empirical_cdf needs at least one value")
    points, counts = np.unique(data, return_counts=True)
    return points, np.cumsum(counts) / data.size


def ks_distance(first: Iterable[float], second: Iterable[float]) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    return float(ks_2samp(np.asarray(list(first)), np.asarray(list(second))).statistic)


def sinr_db(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(values)


@dataclass
class RateReport:
    """
    Per-UE rates of one sweep point, one row per served UE, direction, scheme and estimator.

    Attributes:
        rows: Frame with REPORT_COLUMNS
        outage: Number of UEs in outage per layout
        degenerate: Count of CLZF receivers that fell back to MRC, over all draws
        num_ues: K of the sweep point
    """
    rows: pd.DataFrame
    outage: dict[int, int] = field(default_factory=dict)
    degenerate: int = 0
    num_ues: int = 0

    def to_frame(self) -> pd.DataFrame:
        """Rows in canonical order, independent of the order layouts finished in."""
        if self.rows.empty:
            return pd.DataFrame(columns=REPORT_COLUMNS)
        return (
            self.rows[REPORT_COLUMNS]
            .sort_values(["layout_id", "scheme", "estimator", "direction", "ue_id"], kind="stable")
            .reset_index(drop=True)
        )

    @property
    def outage_total(self) -> int:
        return int(sum(self.outage.values()))

    def groups(self) -> list[tuple[str, str, str]]:
        frame = self.to_frame()
        keys = frame[["scheme", "estimator", "direction"]].drop_duplicates()
        return [tuple(row) for row in keys.itertuples(index=False)]

    def _select(self, scheme: str, estimator: str, direction: str) -> pd.DataFrame:
        frame = self.rows
        return frame[(frame.scheme == scheme) & (frame.estimator == estimator) & (frame.direction == direction)]

    def rates(self, scheme: str, estimator: str, direction: str, include_outage: bool = False) -> np.ndarray:
        """Per-user rates of one group; outage users are appended at rate 0 on request."""
        values = self._select(scheme, estimator, direction)["rate"].to_numpy(dtype=float)
        if include_outage:
            values = np.concatenate([values, np.zeros(self.outage_total)])
        return np.sort(values)

    def cdf(self, scheme: str, estimator: str, direction: str, include_outage: bool = False):
        return empirical_cdf(self.rates(scheme, estimator, direction, include_outage))

    def cdf_frame(self) -> pd.DataFrame:
        """Empirical rate CDF points of every group, served UEs only and with outage users at rate 0."""
        parts = []
        for scheme, estimator, direction in self.groups():
            for with_outage in (False, True):
                points, fractions = self.cdf(scheme, estimator, direction, include_outage=with_outage)
                parts.append(pd.DataFrame({
                    "scheme": scheme,
                    "estimator": estimator,
                    "direction": direction,
                    "with_outage": with_outage,
                    "rate": points,
                    "fraction": fractions,
                }))
        if not parts:
            return pd.DataFrame(columns=CDF_COLUMNS)
        return pd.concat(parts, ignore_index=True)[CDF_COLUMNS]

    def sum_se(self, scheme: str, estimator: str, direction: str) -> float:
        """
        Mean over layouts of the sum SE of the served UEs.

        Layouts without rows in the group (all UEs in outage) count as zero.
        """
        selected = self._select(scheme, estimator, direction)
        if selected.empty:
            return 0.0
        per_layout = selected.groupby("layout_id")["se"].sum()
        num_layouts = max(len(self.outage), per_layout.size)
        return float(per_layout.sum() / num_layouts)

    def summary(self) -> list[dict[str, Any]]:
        """Sum SE, rate percentiles and the UL/DL KS distance of every group."""
        entries = []
        for scheme, estimator, direction in self.groups():
            served = self.rates(scheme, estimator, direction)
            with_outage = self.rates(scheme, estimator, direction, include_outage=True)
            entry: dict[str, Any] = {
                "scheme": scheme,
                "estimator": estimator,
                "direction": direction,
                "sum_se": self.sum_se(scheme, estimator, direction),
                "served_users": int(served.size),
                "outage_users": self.outage_total,
                "rate_percentiles": dict(zip(map(str, PERCENTILES), np.percentile(served, PERCENTILES).tolist())),
                "rate_percentiles_with_outage": dict(
                    zip(map(str, PERCENTILES), np.percentile(with_outage, PERCENTILES).tolist())
                ),
            }
            other = "dl" if direction == "ul" else "ul"
            counterpart = self.rates(scheme, estimator, other)
            if counterpart.size and served.size:
                entry["ks_ul_dl"] = ks_distance(served, counterpart)
            entries.append(entry)
        return entries
