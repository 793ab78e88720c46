"""Local LMMSE receivers with max-SINR cluster-level combining."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve

from ..association import AssociationGraph
from ..config import Scheme
from ..csi import EstimateSet
from ..errors import DegenerateReceiverError
from ..geometry import LargeScaleMap
from .base import BaseReceiver, ReceiverSet

logger = logging.getLogger(__name__)


def unknown_interference_variance(
    beta_row: np.ndarray,
    served: np.ndarray,
    snr: float,
    active: Optional[np.ndarray] = None,
) -> float:
    """
    Per-component variance of noise plus the interference of UEs unknown to RU ℓ:
    σ²_ℓ = 1 + snr Σ_{j ∉ U_ℓ} β_{ℓ,j}.

    Args:
        beta_row: LSFCs β_{ℓ,·} of one RU
        served: Indices of U_ℓ
        snr: UL SNR
        active: Optional mask of transmitting UEs; silent UEs add nothing
    """
    unknown = np.ones(len(beta_row), dtype=bool)
    unknown[np.asarray(served, dtype=int)] = False
    if active is not None:
        unknown &= active
    return float(1.0 + snr * beta_row[unknown].sum())


def lmmse_local(served_estimates: np.ndarray, sigma2: float, snr: float, target: Optional[int] = None) -> np.ndarray:
    """
    v_{ℓ,k} = (σ²_ℓ I + snr Σ_{j∈U_ℓ} ĥ_{ℓ,j} ĥ_{ℓ,j}ᴴ)⁻¹ ĥ_{ℓ,k}.

    `served_estimates` is M×|U_ℓ|. Returns the column for `target`, or all
    columns (M×|U_ℓ|) when target is None.
    """
    M = served_estimates.shape[0]
    gram = sigma2 * np.eye(M) + snr * (served_estimates @ served_estimates.conj().T)
    rhs = served_estimates if target is None else served_estimates[:, target]
    return solve(gram, rhs, assume_a="her")


def local_lmmse_vectors(
    estimates: EstimateSet,
    graph: AssociationGraph,
    lsfc: LargeScaleMap,
    snr: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Local LMMSE vectors of every RU for its served UEs, plus σ²_ℓ per RU."""
    L, K, M = estimates.blocks.shape
    blocks = np.zeros_like(estimates.blocks)
    sigma2 = np.ones(L)
    for ru in range(L):
        served = graph.served(ru)
        sigma2[ru] = unknown_interference_variance(lsfc.beta[ru], served, snr, graph.active)
        if len(served) == 0:
            continue
        local = estimates.blocks[ru, served, :].T  # (M, |U_ℓ|)
        blocks[ru, served, :] = lmmse_local(local, sigma2[ru], snr).T
    return blocks, sigma2


@dataclass(frozen=True)
class ClusterCombinerState:
    """
    Cluster-level view of the local receivers of one UE.

    Attributes:
        cluster: RU indices of C_k (row order of every array below)
        interferers: U(C_k) minus k (column order of g)
        local_vectors: (|C_k|, M) local receivers v_{ℓ,k}
        a: (|C_k|,) g_{ℓ,k,k}
        g: (|C_k|, |U(C_k)|-1) g_{ℓ,k,j}, zero where (ℓ, j) ∉ E
        d: (|C_k|,) diagonal of D_k, σ²_ℓ ‖v_{ℓ,k}‖²
        sigma2: (|C_k|,) σ²_ℓ
    """
    cluster: np.ndarray
    interferers: np.ndarray
    local_vectors: np.ndarray
    a: np.ndarray
    g: np.ndarray
    d: np.ndarray
    sigma2: np.ndarray

    def gamma(self, snr: float) -> np.ndarray:
        """Γ_k = D_k + snr G_k G_kᴴ."""
        return np.diag(self.d).astype(complex) + snr * (self.g @ self.g.conj().T)


def combiner_state(
    local_blocks: np.ndarray,
    sigma2: np.ndarray,
    estimates: EstimateSet,
    graph: AssociationGraph,
    ue: int,
) -> ClusterCombinerState:
    """Gather a_k, G_k and D_k for one UE from the local receivers."""
    cluster = graph.cluster(ue)
    interferers = np.array([j for j in graph.cluster_users(ue) if j != ue], dtype=int)
    local = local_blocks[cluster, ue, :]  # (|C|, M)
    # g[ℓ, j] = v_{ℓ,k}ᴴ ĥ_{ℓ,j}; estimate blocks are zero off E
    cross = np.einsum("cm,cjm->cj", local.conj(), estimates.blocks[cluster][:, interferers, :])
    cross = cross * graph.mask[np.ix_(cluster, interferers)]
    a = np.einsum("cm,cm->c", local.conj(), estimates.blocks[cluster, ue, :])
    d = sigma2[cluster] * np.sum(np.abs(local) ** 2, axis=1)
    return ClusterCombinerState(
        cluster=cluster,
        interferers=interferers,
        local_vectors=local,
        a=a,
        g=cross,
        d=d,
        sigma2=sigma2[cluster],
    )


def cluster_combining(state: ClusterCombinerState, snr: float) -> tuple[np.ndarray, float]:
    """Max-SINR weights w_k = Γ_k⁻¹ a_k and the cluster SINR snr a_kᴴ Γ_k⁻¹ a_k."""
    w = solve(state.gamma(snr), state.a, assume_a="her")
    sinr = float(snr * np.real(np.vdot(state.a, w)))
    return w, sinr


def combining_sinr(state: ClusterCombinerState, w: np.ndarray, snr: float) -> float:
    """snr |wᴴ a|² / (wᴴ Γ w) for arbitrary weights."""
    num = snr * np.abs(np.vdot(w, state.a)) ** 2
    den = np.real(np.vdot(w, state.gamma(snr) @ w))
    return float(num / den)


def assemble_receiver(local_vectors: np.ndarray, w: np.ndarray, cluster: np.ndarray, num_rus: int) -> np.ndarray:
    """
    Stack w_{ℓ,k} v_{ℓ,k} at the cluster RUs, zeros elsewhere, and normalize.

    Raises:
        DegenerateReceiverError: If every block is zero
    """
    local_vectors = np.atleast_2d(local_vectors)
    M = local_vectors.shape[1]
    stacked = np.zeros((num_rus, M), dtype=complex)
    stacked[cluster] = np.asarray(w)[:, None] * local_vectors
    norm = np.linalg.norm(stacked)
    if norm == 0:
        raise DegenerateReceiverError("All-zero receiver stack")
    return (stacked / norm).reshape(-1)


class LmmseClusterReceiver(BaseReceiver):
    """Local LMMSE at every RU, combined per cluster with instantaneous max-SINR weights."""

    scheme = Scheme.LMMSE_CLUSTER
    depends_on_snr = True

    def weights(self, state: ClusterCombinerState, ue: int, snr: float) -> np.ndarray:
        w, _ = cluster_combining(state, snr)
        return w

    def build(
        self,
        estimates: EstimateSet,
        graph: AssociationGraph,
        lsfc: LargeScaleMap,
        snr: float,
    ) -> ReceiverSet:
        """Compute the assembled receivers of all non-outage UEs."""
        local_blocks, sigma2 = local_lmmse_vectors(estimates, graph, lsfc, snr)
        blocks = self._empty_blocks(estimates)
        L, K, M = blocks.shape
        for ue in np.flatnonzero(graph.active):
            state = combiner_state(local_blocks, sigma2, estimates, graph, int(ue))
            w = self.weights(state, int(ue), snr)
            blocks[:, ue, :] = assemble_receiver(state.local_vectors, w, state.cluster, L).reshape(L, M)
        return ReceiverSet(blocks=blocks, scheme=self.scheme, degenerate=np.zeros(K, dtype=bool))
