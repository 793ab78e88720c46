"""Reference schemes: LSFD combining weights and local (partial) ZF precoding."""

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import pinv

from .association import AssociationGraph
from .config import Scheme
from .csi import EstimateSet
from .geometry import LargeScaleMap
from .receivers.lsfd import LsfdStats, LsfdTable, collect_lsfd_stats, lsfd_weights

logger = logging.getLogger(__name__)

__all__ = [
    "INDEPENDENCE_TOL",
    "LocalPrecoderSet",
    "LsfdStats",
    "LsfdTable",
    "PowerRule",
    "build_local_precoders",
    "collect_lsfd_stats",
    "local_power",
    "lpzf_precoder",
    "lsfd_weights",
    "lzf_precoder",
    "scheme_rules",
    "select_zf_users",
]

INDEPENDENCE_TOL = 1e-6


class PowerRule(str, Enum):
    """Per-RU DL power split."""
    EPA = "epa"
    PPA = "ppa"


def lzf_precoder(channels: np.ndarray) -> np.ndarray:
    """
    Unit-norm columns of H (Hᴴ H)⁻¹ for an M×n local channel matrix.

    Raises:
        ValueError: If H is rank deficient (use lpzf_precoder instead)
    """
    M, n = channels.shape
    if n == 0:
        return channels.copy()
    if n > M or np.linalg.matrix_rank(channels) < n:
        raise ValueError(f"Local channel matrix is rank deficient (M={M}, |U|={n}); use LPZF")
    pseudo = pinv(channels).conj().T
    return pseudo / np.linalg.norm(pseudo, axis=0)


def select_zf_users(channels: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """
    Greedy selection of at most M linearly independent columns by decreasing β.

    Returns a boolean mask over the columns of `channels`.
    """
    M, n = channels.shape
    selected = np.zeros(n, dtype=bool)
    basis = np.zeros((M, 0), dtype=complex)
    for col in np.argsort(-np.asarray(beta), kind="stable"):
        if basis.shape[1] >= M:
            break
        h = channels[:, col]
        residual = h - basis @ (basis.conj().T @ h)
        if np.linalg.norm(residual) > INDEPENDENCE_TOL * np.linalg.norm(h):
            basis = np.column_stack([basis, residual / np.linalg.norm(residual)])
            selected[col] = True
    return selected


def lpzf_precoder(channels: np.ndarray, beta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Local partial ZF: ZF over the selected independent users, normalized MRT for the rest.

    Returns:
        Tuple of (M×n unit-norm precoders, boolean ZF mask)
    """
    zf = select_zf_users(channels, beta)
    precoders = np.zeros_like(channels, dtype=complex)
    if zf.any():
        precoders[:, zf] = lzf_precoder(channels[:, zf])
    mrt = ~zf
    norms = np.linalg.norm(channels[:, mrt], axis=0)
    precoders[:, mrt] = np.divide(channels[:, mrt], norms, out=np.zeros_like(channels[:, mrt]), where=norms > 0)
    return precoders, zf


def local_power(beta: np.ndarray, ru_power: float, rule: PowerRule) -> np.ndarray:
    """
    Per-RU power split over U_ℓ.

    Args:
        beta: LSFCs of the served UEs
        ru_power: Budget P_ru
        rule: PowerRule.EPA (equal) or PowerRule.PPA (proportional to β)
    """
    beta = np.asarray(beta, dtype=float)
    if beta.size == 0:
        raise ValueError("Cannot allocate power over an empty served set")
    if rule == PowerRule.EPA:
        return np.full(beta.size, ru_power / beta.size)
    if rule == PowerRule.PPA:
        return ru_power * beta / beta.sum()
    raise ValueError(f"Unsupported power rule: {rule}")


@dataclass(frozen=True)
class LocalPrecoderSet:
    """
    Per-RU precoders and powers.

    Attributes:
        blocks: (L, K, M) unit-norm u_{ℓ,k}, zero for k ∉ U_ℓ
        powers: (L, K) q_{ℓ,k}, zero for k ∉ U_ℓ
        zf_mask: (L, K) True where k ∈ U_ℓ^ZF
    """
    blocks: np.ndarray
    powers: np.ndarray
    zf_mask: np.ndarray

    def global_precoders(self) -> tuple[np.ndarray, np.ndarray]:
        """
        Fold the per-RU streams into unit-norm global columns and stream powers.

        Returns:
            Tuple of (LM×K precoder matrix, K-vector q with Σ q = Σ_ℓ P_ru)
        """
        L, K, M = self.blocks.shape
        weighted = self.blocks * np.sqrt(self.powers)[..., None]
        columns = weighted.transpose(0, 2, 1).reshape(L * M, K)
        q = np.sum(np.abs(columns) ** 2, axis=0)
        norms = np.sqrt(q)
        unit = np.divide(columns, norms, out=np.zeros_like(columns), where=norms > 0)
        return unit, q


def scheme_rules(scheme: Scheme) -> tuple[bool, PowerRule]:
    """(partial ZF?, power rule) of a local precoding scheme."""
    table = {
        Scheme.LZF_EPA: (False, PowerRule.EPA),
        Scheme.LZF_PPA: (False, PowerRule.PPA),
        Scheme.LPZF_EPA: (True, PowerRule.EPA),
        Scheme.LPZF_PPA: (True, PowerRule.PPA),
    }
    if scheme not in table:
        raise ValueError(f"Not a local precoding scheme: {scheme.value}")
    return table[scheme]


def build_local_precoders(
    estimates: EstimateSet,
    graph: AssociationGraph,
    lsfc: LargeScaleMap,
    ru_power: float,
    scheme: Scheme,
) -> LocalPrecoderSet:
    """Run LZF or LPZF with EPA or PPA at every RU on its estimated channels."""
    partial, rule = scheme_rules(scheme)
    L, K, M = estimates.blocks.shape
    blocks = np.zeros_like(estimates.blocks)
    powers = np.zeros((L, K))
    zf_mask = np.zeros((L, K), dtype=bool)

    for ru in range(L):
        served = graph.served(ru)
        if len(served) == 0:
            continue
        local = estimates.blocks[ru, served, :].T
        beta = lsfc.beta[ru, served]
        if partial:
            precoders, zf = lpzf_precoder(local, beta)
        else:
            try:
                precoders, zf = lzf_precoder(local), np.ones(len(served), dtype=bool)
            except ValueError:
                logger.warning("LZF infeasible at RU %d (|U|=%d, M=%d); using LPZF", ru, len(served), M)
                precoders, zf = lpzf_precoder(local, beta)
        blocks[ru, served, :] = precoders.T
        powers[ru, served] = local_power(beta, ru_power, rule)
        zf_mask[ru, served] = zf

    return LocalPrecoderSet(blocks=blocks, powers=powers, zf_mask=zf_mask)
