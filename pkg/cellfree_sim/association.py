"""User-centric cluster formation: leader RU, pilot assignment, cluster enrollment."""

import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .config import SimConfig
from .geometry import LargeScaleMap
from .scenario import DerivedConstants, association_threshold

logger = logging.getLogger(__name__)

NO_INDEX = -1


@dataclass(frozen=True)
class AssociationGraph:
    """
    Bipartite RU-UE association.

    Attributes:
        mask: (L, K) bool edge set E; mask[ℓ, k] ⇔ ℓ ∈ C_k ⇔ k ∈ U_ℓ
        pilots: (K,) pilot index t_k, NO_INDEX for outage UEs
        leaders: (K,) leader RU ℓ(k), NO_INDEX for outage UEs
        order: UE processing order used by both association passes
        pilot_dim: τ_p
    """
    mask: np.ndarray
    pilots: np.ndarray
    leaders: np.ndarray
    order: np.ndarray
    pilot_dim: int

    @property
    def num_rus(self) -> int:
        return self.mask.shape[0]

    @property
    def num_ues(self) -> int:
        return self.mask.shape[1]

    @property
    def outage(self) -> np.ndarray:
        return self.leaders == NO_INDEX

    @property
    def active(self) -> np.ndarray:
        return ~self.outage

    def cluster(self, ue: int) -> np.ndarray:
        """C_k as ascending RU indices."""
        return np.flatnonzero(self.mask[:, ue])

    def served(self, ru: int) -> np.ndarray:
        """U_ℓ as ascending UE indices."""
        return np.flatnonzero(self.mask[ru])

    def cluster_users(self, ue: int) -> np.ndarray:
        """U(C_k): UEs served by at least one RU of C_k."""
        return np.flatnonzero(self.mask[self.mask[:, ue]].any(axis=0))

    @property
    def cluster_sizes(self) -> np.ndarray:
        return self.mask.sum(axis=0)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(int(ru), int(ue)) for ru, ue in zip(*np.nonzero(self.mask))]


def _ranked_rus(beta_column: np.ndarray) -> np.ndarray:
    # Decreasing β, lower RU index first on ties
    return np.argsort(-beta_column, kind="stable")


def assign_leaders_and_pilots(
    lsfc: LargeScaleMap,
    config: SimConfig,
    constants: DerivedConstants,
    rng: np.random.Generator,
) -> AssociationGraph:
    """
    Greedy leader selection in a uniformly random UE order.

    Each UE takes the strongest RU that still has a free pilot and satisfies
    β ≥ η / (M snr). Of the pilots free there it takes the one occupied at the
    fewest RUs network-wide, lowest index on ties. Otherwise it is in outage.
    """
    beta = lsfc.beta
    L, K = beta.shape
    threshold = association_threshold(config, constants)
    tau_p = config.pilot_dim
    occupied = np.zeros((L, tau_p), dtype=bool)
    mask = np.zeros((L, K), dtype=bool)
    pilots = np.full(K, NO_INDEX)
    leaders = np.full(K, NO_INDEX)
    order = rng.permutation(K)

    for ue in order:
        eligible = (~occupied).any(axis=1) & (beta[:, ue] >= threshold)
        if not eligible.any():
            continue
        leader = int(np.argmax(np.where(eligible, beta[:, ue], -np.inf)))
        free = np.flatnonzero(~occupied[leader])
        # argmin keeps the lowest index among equally used pilots
        pilot = int(free[np.argmin(occupied[:, free].sum(axis=0))])
        occupied[leader, pilot] = True
        mask[leader, ue] = True
        pilots[ue] = pilot
        leaders[ue] = leader

    n_out = int((leaders == NO_INDEX).sum())
    if n_out:
        logger.debug("%d of %d UEs in outage after leader selection", n_out, K)
    return AssociationGraph(mask=mask, pilots=pilots, leaders=leaders, order=order, pilot_dim=tau_p)


def pilot_occupancy(graph: AssociationGraph) -> np.ndarray:
    """(L, τ_p) bool table of pilots in use at each RU."""
    occupied = np.zeros((graph.num_rus, graph.pilot_dim), dtype=bool)
    rus, ues = np.nonzero(graph.mask)
    occupied[rus, graph.pilots[ues]] = True
    return occupied


def form_clusters(
    lsfc: LargeScaleMap,
    partial_graph: AssociationGraph,
    config: SimConfig,
    constants: DerivedConstants,
) -> AssociationGraph:
    """
    Enroll RUs into each UE's cluster in decreasing-β order.

    An RU joins C_k if pilot t_k is still free there and β ≥ η / (M snr), until
    |C_k| = Q. UEs are visited in the same order as the leader pass.
    """
    beta = lsfc.beta
    Q = config.max_cluster_size
    threshold = association_threshold(config, constants)
    occupied = pilot_occupancy(partial_graph)
    mask = partial_graph.mask.copy()

    for ue in partial_graph.order:
        leader = partial_graph.leaders[ue]
        if leader == NO_INDEX:
            continue
        pilot = partial_graph.pilots[ue]
        size = int(mask[:, ue].sum())
        for ru in _ranked_rus(beta[:, ue]):
            if size >= Q:
                break
            if ru == leader or beta[ru, ue] < threshold or occupied[ru, pilot]:
                continue
            occupied[ru, pilot] = True
            mask[ru, ue] = True
            size += 1

    logger.debug("Cluster sizes: mean %.2f, max %d", mask.sum(axis=0).mean(), mask.sum(axis=0).max())
    return replace(partial_graph, mask=mask)


def dump_graph(graph: AssociationGraph, path: str | Path) -> Path:
    """Write the edge list as CSV with columns ue, ru, pilot, is_leader."""
    path = Path(path)
    rus, ues = np.nonzero(graph.mask)
    frame = pd.DataFrame({
        "ue": ues,
        "ru": rus,
        "pilot": graph.pilots[ues],
        "is_leader": graph.leaders[ues] == rus,
    }).sort_values(["ue", "ru"])
    try:
        frame.to_csv(path, index=False)
    except OSError as e:
        raise RuntimeError(f"Failed to write association graph {path}: {e}") from e
    return path
