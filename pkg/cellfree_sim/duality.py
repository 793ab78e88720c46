"""Nominal UL/DL SINRs from partial CSI and the dual DL power allocation."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .association import AssociationGraph
from .config import DlPowerMode, UnknownLinkWeight
from .csi import EstimateSet
from .errors import DualityError
from .geometry import LargeScaleMap
from .receivers.base import ReceiverSet

logger = logging.getLogger(__name__)

NEGATIVE_TOL = 1e-10


@dataclass(frozen=True)
class NominalCoefficients:
    """
    Coefficients of the nominal SINRs of one fading realization.

    ``ul_off[k, j]`` is the UL interference coefficient of UE j on the receiver of
    UE k. The DL coefficient of stream j at UE k is the same number with roles
    swapped, ``dl_off[k, j] = ul_off[j, k]``. Rows and columns of silent UEs are zero.

    Attributes:
        theta_diag: (K,) θ_{k,k} = |v_kᴴ ĥ_k|²
        ul_off: (K, K) UL cross coefficients, zero diagonal
        active: (K,) mask of UEs taking part in the system
    """
    theta_diag: np.ndarray
    ul_off: np.ndarray
    active: np.ndarray

    @property
    def num_ues(self) -> int:
        return len(self.theta_diag)

    @property
    def dl_off(self) -> np.ndarray:
        return self.ul_off.T

    @property
    def theta_matrix(self) -> np.ndarray:
        """Θ: θ_{k,k} on the diagonal, DL cross coefficients off it."""
        return np.diag(self.theta_diag) + self.dl_off


@dataclass(frozen=True)
class PowerAllocation:
    """DL symbol energies q (normalized to P_ue) and the accounting mode they satisfy."""
    q: np.ndarray
    mode: DlPowerMode
    snr: float

    @property
    def total(self) -> float:
        return float(self.q.sum())


def nominal_coefficients(
    receivers: ReceiverSet,
    estimates: EstimateSet,
    lsfc: LargeScaleMap,
    graph: AssociationGraph,
    weighting: UnknownLinkWeight = UnknownLinkWeight.CLUSTER_SIZE,
) -> NominalCoefficients:
    """
    Build θ and the cross coefficients from the cluster receivers.

    The cross term of (k, j) is the known overlap |Σ_{ℓ∈C_k∩C_j} v_{ℓ,k}ᴴ ĥ_{ℓ,j}|²
    plus the LSFCs β_{ℓ,j}, ℓ ∈ C_k\\C_j, of the links the cluster of k does not know.
    Those are weighted by 1/|C_k| (CLUSTER_SIZE) or by the block energy ‖v_{ℓ,k}‖²
    of the receiver (BLOCK_NORM). Both keep dl_off = ul_off.T.
    """
    mask = graph.mask.astype(float)
    active = graph.active
    sizes = np.maximum(graph.cluster_sizes, 1)

    # inner[ℓ, k, j] = v_{ℓ,k}ᴴ ĥ_{ℓ,j}
    inner = np.einsum("lkm,ljm->lkj", receivers.blocks.conj(), estimates.blocks)
    overlap = np.einsum("lkj,lk,lj->kj", inner, mask, mask)
    theta_diag = np.abs(np.diagonal(overlap)) ** 2

    if weighting is UnknownLinkWeight.BLOCK_NORM:
        energy = np.sum(np.abs(receivers.blocks) ** 2, axis=2) * mask  # (L, K)
        unknown = energy.T @ ((1.0 - mask) * lsfc.beta)
    else:
        unknown = mask.T @ ((1.0 - mask) * lsfc.beta) / sizes[:, None]
    ul_off = np.abs(overlap) ** 2 + unknown
    np.fill_diagonal(ul_off, 0.0)

    pair = np.outer(active, active)
    return NominalCoefficients(
        theta_diag=np.where(active, theta_diag, 0.0),
        ul_off=np.where(pair, ul_off, 0.0),
        active=active.copy(),
    )


def _select(values: np.ndarray, k: Optional[int]) -> np.ndarray | float:
    return values if k is None else float(values[k])


def nominal_ul_sinr(coeffs: NominalCoefficients, snr: float, k: Optional[int] = None) -> np.ndarray | float:
    """γ_k = θ_{k,k} / (snr⁻¹ + Σ_{j≠k} θ̃_{j,k}); zero for silent UEs."""
    den = 1.0 / snr + coeffs.ul_off.sum(axis=1)
    sinr = np.where(coeffs.active, coeffs.theta_diag / den, 0.0)
    return _select(sinr, k)


def nominal_dl_sinr(
    coeffs: NominalCoefficients,
    q: np.ndarray,
    snr: float,
    k: Optional[int] = None,
) -> np.ndarray | float:
    """θ_{k,k} q_k / (snr⁻¹ + Σ_{j≠k} θ̃_{k,j} q_j); zero for silent UEs."""
    q = np.asarray(q, dtype=float)
    den = 1.0 / snr + coeffs.dl_off @ q
    sinr = np.where(coeffs.active, coeffs.theta_diag * q / den, 0.0)
    return _select(sinr, k)


def dual_power_allocation(
    coeffs: NominalCoefficients,
    gamma: np.ndarray,
    snr: float,
    mode: DlPowerMode = DlPowerMode.BALANCED,
) -> PowerAllocation:
    """
    Solve (I − diag(μ) Θ) q = μ / snr with μ_k = γ_k / ((1 + γ_k) θ_{k,k}).

    The system is restricted to the active UEs and solved by LU with one step of
    iterative refinement. When γ are the nominal UL SINRs achieved with unit UL
    powers the solution reproduces γ in the DL and sums to the number of active UEs.

    Raises:
        DualityError: If the system is singular or the solution is negative or not finite
    """
    active = np.flatnonzero(coeffs.active)
    q = np.zeros(coeffs.num_ues)
    if len(active) == 0:
        return PowerAllocation(q=q, mode=mode, snr=snr)

    gamma = np.asarray(gamma, dtype=float)[active]
    theta = coeffs.theta_matrix[np.ix_(active, active)]
    diag = np.diagonal(theta)
    if np.any(diag <= 0) or np.any(gamma < 0):
        raise DualityError("Duality targets need positive θ_kk and non-negative γ")

    mu = gamma / ((1.0 + gamma) * diag)
    system = np.eye(len(active)) - mu[:, None] * theta
    rhs = mu / snr
    try:
        factors = lu_factor(system, check_finite=True)
        solution = lu_solve(factors, rhs)
        solution = solution + lu_solve(factors, rhs - system @ solution)
    except (ValueError, np.linalg.LinAlgError) as e:
        raise DualityError(f"Failed to solve the duality system: {e}") from e

    if not np.all(np.isfinite(solution)):
        raise DualityError("Duality solution is not finite")
    scale = max(float(np.max(np.abs(solution))), 1.0)
    if np.any(solution < -NEGATIVE_TOL * scale):
        raise DualityError(f"Duality solution has negative powers (min {solution.min():.3e})")

    q[active] = np.clip(solution, 0.0, None)
    logger.debug("Dual powers: sum %.12g over %d active UEs", q.sum(), len(active))
    return PowerAllocation(q=q, mode=mode, snr=snr)


def virtual_ul_snr(num_rus: int, num_ues: int, ru_power_mw: float, noise_mw: float) -> float:
    """
    SNR of the virtual UL whose dual DL spends L·P_ru in total: L P_ru / (K N0).

    Raises:
        ValueError: If any input is not positive
    """
    if min(num_rus, num_ues) <= 0 or ru_power_mw <= 0 or noise_mw <= 0:
        raise ValueError(
            f"virtual UL SNR needs positive inputs (L={num_rus}, K={num_ues}, "
            f"P_ru={ru_power_mw}, N0={noise_mw})"
        )
    return num_rus * ru_power_mw / (num_ues * noise_mw)
