"""Large-scale fading decoding: local LMMSE with long-term combining weights."""

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.linalg import solve

from ..association import AssociationGraph
from ..config import Scheme, SimConfig
from ..csi import EstimateSet
from ..geometry import LargeScaleMap
from .base import ReceiverSet
from .lmmse import ClusterCombinerState, LmmseClusterReceiver, combiner_state, local_lmmse_vectors

logger = logging.getLogger(__name__)


@dataclass
class LsfdStats:
    """Running means of the cluster combiner quantities of one UE over fading draws."""
    size: int
    count: int = 0
    sum_a: np.ndarray = field(init=False)
    sum_ggh: np.ndarray = field(init=False)
    sum_d: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.sum_a = np.zeros(self.size, dtype=complex)
        self.sum_ggh = np.zeros((self.size, self.size), dtype=complex)
        self.sum_d = np.zeros(self.size)

    def accumulate(self, state: ClusterCombinerState) -> None:
        if len(state.a) != self.size:
            raise ValueError(f"Cluster size changed: {len(state.a)} != {self.size}")
        self.sum_a += state.a
        self.sum_ggh += state.g @ state.g.conj().T
        self.sum_d += state.d
        self.count += 1

    @property
    def mean_a(self) -> np.ndarray:
        return self.sum_a / self._n()

    @property
    def mean_ggh(self) -> np.ndarray:
        return self.sum_ggh / self._n()

    @property
    def mean_d(self) -> np.ndarray:
        return self.sum_d / self._n()

    def gamma(self, snr: float) -> np.ndarray:
        """Γ^LSFD = D + snr Σ_j E[G(:,j) G(:,j)ᴴ], of size |C_k|×|C_k|."""
        return np.diag(self.mean_d).astype(complex) + snr * self.mean_ggh

    def _n(self) -> int:
        if self.count == 0:
            raise ValueError("LSFD statistics are empty")
        return self.count


LsfdTable = dict[float, dict[int, LsfdStats]]


def lsfd_weights(stats: LsfdStats, snr: float) -> np.ndarray:
    """w_k = (Γ^LSFD_k)⁻¹ E[a_k]."""
    return solve(stats.gamma(snr), stats.mean_a, assume_a="her")


def collect_lsfd_stats(
    estimate_sets: Iterable[EstimateSet],
    graph: AssociationGraph,
    lsfc: LargeScaleMap,
    snrs: Sequence[float],
) -> LsfdTable:
    """
    Average the combiner quantities of every non-outage UE over independent draws,
    once per requested SNR (local LMMSE vectors depend on it).
    """
    active = [int(ue) for ue in np.flatnonzero(graph.active)]
    stats = {
        snr: {ue: LsfdStats(size=len(graph.cluster(ue))) for ue in active}
        for snr in snrs
    }
    draws = 0
    for estimates in estimate_sets:
        draws += 1
        for snr in snrs:
            local_blocks, sigma2 = local_lmmse_vectors(estimates, graph, lsfc, snr)
            for ue in active:
                stats[snr][ue].accumulate(combiner_state(local_blocks, sigma2, estimates, graph, ue))
    logger.debug("LSFD statistics from %d draws for %d UEs", draws, len(active))
    return stats


class LsfdReceiver(LmmseClusterReceiver):
    """Same local LMMSE vectors, weighted with expectations instead of realizations."""

    scheme = Scheme.LSFD
    depends_on_snr = True

    def __init__(self, config: SimConfig, stats: Optional[LsfdTable] = None):
        super().__init__(config)
        self.stats: LsfdTable = stats or {}

    def fit(
        self,
        estimate_sets: Iterable[EstimateSet],
        graph: AssociationGraph,
        lsfc: LargeScaleMap,
        snrs: Sequence[float],
    ) -> "LsfdReceiver":
        """Estimate the long-term statistics for one layout."""
        self.stats = collect_lsfd_stats(estimate_sets, graph, lsfc, snrs)
        return self

    def weights(self, state: ClusterCombinerState, ue: int, snr: float) -> np.ndarray:
        try:
            stats = self.stats[snr][ue]
        except KeyError as e:
            raise ValueError(f"No LSFD statistics for UE {ue} at snr={snr:.6g}; call fit() first") from e
        return lsfd_weights(stats, snr)

    def build(
        self,
        estimates: EstimateSet,
        graph: AssociationGraph,
        lsfc: LargeScaleMap,
        snr: float,
    ) -> ReceiverSet:
        if snr not in self.stats:
            raise ValueError(f"LSFD receiver not fitted for snr={snr:.6g}")
        return super().build(estimates, graph, lsfc, snr)
