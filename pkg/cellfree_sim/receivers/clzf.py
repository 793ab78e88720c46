"""Cluster-level zero forcing."""

import logging
from typing import NamedTuple

import numpy as np
from scipy.linalg import orth

from ..association import AssociationGraph
from ..channel import PartialCsiView, partial_view
from ..config import Scheme
from ..csi import EstimateSet
from ..geometry import LargeScaleMap
from .base import BaseReceiver, ReceiverSet

logger = logging.getLogger(__name__)

COLINEAR_TOL = 1e-8
RANK_RTOL = 1e-10
DEGENERATE_TOL = 1e-10


class ReceiverColumn(NamedTuple):
    vector: np.ndarray  # LM unit-norm
    degenerate: bool
    retained: np.ndarray  # interferers projected out
    colinear: np.ndarray  # interferers dropped as colinear with the target


def clzf_receiver(view: PartialCsiView) -> ReceiverColumn:
    """
    Project the target channel onto the orthogonal complement of the in-cluster
    interference span and normalize.

    Interferers colinear with the target are excluded from the span. If the
    target lies inside the span the MRC direction is returned and flagged.

    Raises:
        ValueError: If the target channel is zero on its cluster
    """
    ue = view.ue
    cluster = view.cluster
    L, K, M = view.source.shape
    known = view.blocks()[cluster]  # (|C|, K, M)

    target = known[:, ue, :].reshape(-1)
    target_norm = np.linalg.norm(target)
    if target_norm == 0:
        raise ValueError(f"Zero channel estimate for UE {ue} on its cluster")

    others = np.array([j for j in view.users if j != ue], dtype=int)
    interference = known[:, others, :].transpose(0, 2, 1).reshape(len(cluster) * M, len(others))
    norms = np.linalg.norm(interference, axis=0)
    overlap = np.abs(interference.conj().T @ target)
    colinear = (norms > 0) & (overlap >= (1 - COLINEAR_TOL) * norms * target_norm)
    keep = (norms > 0) & ~colinear
    # unit columns span the same space
    interference = interference[:, keep] / norms[keep]

    degenerate = False
    if interference.shape[1] == 0:
        direction = target
    else:
        basis = orth(interference, rcond=RANK_RTOL)
        direction = target - basis @ (basis.conj().T @ target)
        if np.linalg.norm(direction) <= DEGENERATE_TOL * target_norm:
            logger.debug("CLZF degenerate for UE %d; falling back to MRC", ue)
            direction = target
            degenerate = True

    full = np.zeros((L, M), dtype=complex)
    full[cluster] = (direction / np.linalg.norm(direction)).reshape(len(cluster), M)
    return ReceiverColumn(
        vector=full.reshape(-1),
        degenerate=degenerate,
        retained=others[keep],
        colinear=others[colinear],
    )


class ClzfReceiver(BaseReceiver):
    """CLZF receivers; independent of the SNR."""

    scheme = Scheme.CLZF
    depends_on_snr = False

    def build(
        self,
        estimates: EstimateSet,
        graph: AssociationGraph,
        lsfc: LargeScaleMap,
        snr: float,
    ) -> ReceiverSet:
        """Compute CLZF columns for all non-outage UEs."""
        blocks = self._empty_blocks(estimates)
        degenerate = np.zeros(graph.num_ues, dtype=bool)
        L, K, M = blocks.shape
        for ue in np.flatnonzero(graph.active):
            column = clzf_receiver(partial_view(estimates.blocks, graph, int(ue)))
            blocks[:, ue, :] = column.vector.reshape(L, M)
            degenerate[ue] = column.degenerate
        if degenerate.any():
            logger.warning("CLZF fell back to MRC for %d UE(s)", int(degenerate.sum()))
        return ReceiverSet(blocks=blocks, scheme=self.scheme, degenerate=degenerate)
