"""Abstract base class for UL receive schemes."""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from ..association import AssociationGraph
from ..config import Scheme, SimConfig
from ..csi import EstimateSet
from ..geometry import LargeScaleMap


@dataclass(frozen=True)
class ReceiverSet:
    """
    Unit-norm receive columns v_k with cluster sparsity, stored as (L, K, M) blocks.

    Outage UEs have all-zero columns. `degenerate` flags UEs whose scheme had to
    fall back to MRC.
    """
    blocks: np.ndarray
    scheme: Scheme
    degenerate: np.ndarray

    @property
    def degenerate_count(self) -> int:
        return int(self.degenerate.sum())

    def column(self, ue: int) -> np.ndarray:
        return self.blocks[:, ue, :].reshape(-1)

    def matrix(self) -> np.ndarray:
        """LM×K matrix V with row index ℓM + m."""
        L, K, M = self.blocks.shape
        return self.blocks.transpose(0, 2, 1).reshape(L * M, K)


class BaseReceiver(ABC):
    """Abstract base class for receive schemes working on partial CSI."""

    scheme: ClassVar[Scheme]
    depends_on_snr: ClassVar[bool] = True

    def __init__(self, config: SimConfig):
        """Initialize receiver with the scenario configuration."""
        self.config = config

    @abstractmethod
    def build(
        self,
        estimates: EstimateSet,
        graph: AssociationGraph,
        lsfc: LargeScaleMap,
        snr: float,
    ) -> ReceiverSet:
        """Compute the receive vectors of every non-outage UE."""
        pass

    def _empty_blocks(self, estimates: EstimateSet) -> np.ndarray:
        return np.zeros_like(estimates.blocks)
