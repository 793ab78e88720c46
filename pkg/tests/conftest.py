"""Pytest configuration and fixtures."""

import math
import os

import numpy as np
import pytest

from cellfree_sim.association import NO_INDEX, AssociationGraph
from cellfree_sim.channel import ChannelMatrix, SupportMap, complex_normal
from cellfree_sim.config import ENV_PREFIX, Estimator, SimConfig
from cellfree_sim.csi import estimate_channels
from cellfree_sim.geometry import LargeScaleMap


@pytest.fixture(scope="session", autouse=True)
def setup_test_environment():
    """Pin CELLFREE_* environment variables so defaults do not leak in from the shell."""
    keep = {f"{ENV_PREFIX}RUN_SLOW"}
    for name in [n for n in os.environ if n.startswith(ENV_PREFIX) and n not in keep]:
        del os.environ[name]

    # Cheap LSFD statistics and serial runs unless a test asks otherwise
    os.environ[f"{ENV_PREFIX}LSFD_STAT_DRAWS"] = "20"
    os.environ[f"{ENV_PREFIX}WORKERS"] = "1"


@pytest.fixture
def small_config():
    """A scenario small enough to run end-to-end in well under a second per layout."""
    return SimConfig(
        area_side=100.0,
        num_rus=4,
        num_ues=12,
        antennas_per_ru=8,
        pilot_dim=6,
        max_cluster_size=3,
        num_layouts=2,
        fading_draws_per_layout=2,
        lsfd_stat_draws=5,
        master_seed=7,
    )


@pytest.fixture
def make_graph():
    """Build an AssociationGraph from an (L, K) mask; leader is the lowest RU of each cluster."""

    def factory(mask, pilots=None):
        mask = np.asarray(mask, dtype=bool)
        L, K = mask.shape
        leaders = np.array([np.flatnonzero(mask[:, k])[0] if mask[:, k].any() else NO_INDEX for k in range(K)])
        if pilots is None:
            pilots = np.where(leaders == NO_INDEX, NO_INDEX, np.arange(K))
        pilots = np.asarray(pilots)
        return AssociationGraph(
            mask=mask,
            pilots=pilots,
            leaders=leaders,
            order=np.arange(K),
            pilot_dim=max(int(pilots.max()) + 1, 1),
        )

    return factory


@pytest.fixture
def full_supports():
    def factory(num_rus, num_ues, num_antennas):
        return SupportMap(
            mask=np.ones((num_rus, num_ues, num_antennas), dtype=bool),
            theta=np.zeros((num_rus, num_ues)),
            spread=2 * math.pi,
        )

    return factory


@pytest.fixture
def make_instance(make_graph, full_supports):
    """Random i.i.d. channels with unit LSFCs and ideal partial CSI on a given mask."""

    def factory(mask, num_antennas, seed=0, beta=None):
        rng = np.random.default_rng(seed)
        mask = np.asarray(mask, dtype=bool)
        L, K = mask.shape
        channels = ChannelMatrix(blocks=complex_normal(rng, (L, K, num_antennas)))
        graph = make_graph(mask)
        lsfc = LargeScaleMap(
            beta=np.ones((L, K)) if beta is None else np.asarray(beta, dtype=float),
            los=np.ones((L, K), dtype=bool),
            shadow_db=np.zeros((L, K)),
        )
        supports = full_supports(L, K, num_antennas)
        estimates = estimate_channels(channels, graph, supports, Estimator.IDEAL)
        return channels, graph, lsfc, estimates

    return factory
