"""UL pilot field synthesis and partial-CSI channel estimation."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .association import AssociationGraph
from .channel import AngularSupport, ChannelMatrix, SupportMap, complex_normal, covariance, project_onto_support
from .config import Estimator
from .geometry import LargeScaleMap

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PilotBook:
    """τ_p orthogonal pilots with energy τ_p·snr, realized as scaled identity columns."""
    pilot_dim: int
    snr: float

    @property
    def energy(self) -> float:
        return self.pilot_dim * self.snr

    @property
    def sequences(self) -> np.ndarray:
        """τ_p×τ_p matrix whose column t is φ_t."""
        return np.sqrt(self.energy) * np.eye(self.pilot_dim, dtype=complex)

    def sequence(self, t: int) -> np.ndarray:
        if not 0 <= t < self.pilot_dim:
            raise IndexError(f"Pilot {t} out of range for τ_p={self.pilot_dim}")
        return self.sequences[:, t]


@dataclass(frozen=True)
class EstimateSet:
    """Channel knowledge on the association edge set E; zero blocks elsewhere."""
    mode: Estimator
    blocks: np.ndarray  # (L, K, M)
    mask: np.ndarray  # (L, K) bool

    def block(self, ru: int, ue: int) -> np.ndarray:
        if not self.mask[ru, ue]:
            raise KeyError(f"No estimate for non-associated pair ({ru}, {ue})")
        return self.blocks[ru, ue]


def synthesize_pilot_field(
    channels: ChannelMatrix,
    graph: AssociationGraph,
    pilot_book: PilotBook,
    rng: np.random.Generator,
    noise: bool = True,
) -> np.ndarray:
    """
    Received pilot field Y_ℓ = Σ_i h_{ℓ,i} φ_{t_i}ᴴ + Z_ℓ for every RU, shape (L, M, τ_p).

    All UEs holding a pilot contribute, so co-pilot contamination is included.
    Outage UEs send no pilot.
    """
    L, K, M = channels.shape
    tau_p = pilot_book.pilot_dim
    pilot_rows = np.zeros((K, tau_p), dtype=complex)
    active = np.flatnonzero(graph.active)
    pilot_rows[active] = pilot_book.sequences[:, graph.pilots[active]].conj().T

    field = np.einsum("lkm,kt->lmt", channels.blocks, pilot_rows)
    z = complex_normal(rng, (L, M, tau_p))
    if noise:
        field = field + z
    return field


def pilot_matching_estimate(pilot_field_ru: np.ndarray, pilot_book: PilotBook, pilot: int) -> np.ndarray:
    """ĥ^pm = Y_ℓ φ_t / (τ_p snr)."""
    return pilot_field_ru @ pilot_book.sequence(pilot) / pilot_book.energy


def subspace_project(hhat_pm: np.ndarray, support: AngularSupport | np.ndarray) -> np.ndarray:
    """ĥ^sp = F_S F_Sᴴ ĥ^pm; `support` is an AngularSupport or a boolean beam mask."""
    if isinstance(support, AngularSupport):
        mask = np.zeros(support.num_beams, dtype=bool)
        mask[list(support.indices)] = True
    else:
        mask = np.asarray(support, dtype=bool)
    return project_onto_support(np.asarray(hhat_pm), mask)


def estimate_channels(
    channels: ChannelMatrix,
    graph: AssociationGraph,
    supports: SupportMap,
    mode: Estimator,
    pilot_book: Optional[PilotBook] = None,
    pilot_field: Optional[np.ndarray] = None,
) -> EstimateSet:
    """
    Produce the estimate set on E.

    Args:
        channels: True channel blocks
        graph: Association graph defining E and the pilots
        supports: Angular supports, used by subspace projection
        mode: Ideal partial CSI, pilot matching or subspace projection
        pilot_book: Pilot codebook (required unless mode is ideal)
        pilot_field: Output of synthesize_pilot_field (required unless mode is ideal)
    """
    edge_mask = graph.mask
    if mode is Estimator.IDEAL:
        return EstimateSet(mode=mode, blocks=channels.blocks * edge_mask[..., None], mask=edge_mask)

    if pilot_book is None or pilot_field is None:
        raise ValueError(f"Estimator {mode.value} needs a pilot book and a pilot field")

    # One matched filter per pilot, then pick t_k for every UE
    per_pilot = pilot_field @ pilot_book.sequences / pilot_book.energy  # (L, M, τ_p)
    pilots = np.where(graph.active, graph.pilots, 0)
    estimates = per_pilot[:, :, pilots].transpose(0, 2, 1)  # (L, K, M)

    if mode is Estimator.SP:
        estimates = project_onto_support(estimates, supports.mask)
    elif mode is not Estimator.PM:
        raise ValueError(f"Unsupported estimator: {mode}")

    return EstimateSet(mode=mode, blocks=estimates * edge_mask[..., None], mask=edge_mask)


def projected_contamination_covariance(
    lsfc: LargeScaleMap,
    supports: SupportMap,
    graph: AssociationGraph,
    ru: int,
    ue: int,
) -> np.ndarray:
    """
    Covariance of the co-pilot contamination left in ĥ^sp_{ℓ,k}:
    Σ_{i≠k, t_i=t_k} P_k Σ_{ℓ,i} P_k with P_k = F_S F_Sᴴ of link (ℓ, k).
    """
    target = supports.support(ru, ue)
    projector = target.basis() @ target.basis().conj().T
    M = supports.mask.shape[-1]
    result = np.zeros((M, M), dtype=complex)
    if graph.outage[ue]:
        return result
    co_pilot = np.flatnonzero(graph.active & (graph.pilots == graph.pilots[ue]))
    for other in co_pilot:
        if other == ue:
            continue
        sigma = covariance(float(lsfc.beta[ru, other]), supports.support(ru, int(other)))
        result += projector @ sigma @ projector
    return result
