"""Tests for leader selection, pilot assignment and cluster formation."""

import numpy as np
import pandas as pd
import pytest

from cellfree_sim.association import (
    NO_INDEX,
    assign_leaders_and_pilots,
    dump_graph,
    form_clusters,
    pilot_occupancy,
)
from cellfree_sim.config import SimConfig
from cellfree_sim.geometry import LargeScaleMap, compute_lsfc, place_nodes
from cellfree_sim.scenario import association_threshold, derive_constants

STRONG = 1.0
WEAK = 1e-30


def lsfc_of(beta):
    beta = np.asarray(beta, dtype=float)
    return LargeScaleMap(beta=beta, los=np.ones(beta.shape, bool), shadow_db=np.zeros(beta.shape))


def associate(beta, rng_seed=0, **fields):
    beta = np.asarray(beta, dtype=float)
    config = SimConfig(num_rus=beta.shape[0], num_ues=beta.shape[1], **fields)
    constants = derive_constants(config)
    lsfc = lsfc_of(beta)
    partial = assign_leaders_and_pilots(lsfc, config, constants, np.random.default_rng(rng_seed))
    return partial, form_clusters(lsfc, partial, config, constants)


class TestLeaderSelection:
    """Test the greedy leader and pilot pass."""

    def test_single_link(self):
        """Test one RU and one UE above threshold."""
        partial, _ = associate([[STRONG]])
        assert partial.leaders[0] == 0
        assert partial.pilots[0] == 0
        assert not partial.outage.any()

    def test_below_threshold_is_outage(self):
        """Test that weak links never associate."""
        partial, graph = associate([[WEAK, WEAK]])
        assert partial.outage.all()
        assert not graph.mask.any()
        assert (graph.pilots == NO_INDEX).all()

    def test_pilot_exhaustion(self):
        """Test 2 UEs, 1 RU, τ_p = 1: the first UE in order gets the pilot."""
        partial, _ = associate([[STRONG, STRONG]], pilot_dim=1)
        first, second = partial.order
        assert partial.leaders[first] == 0
        assert partial.leaders[second] == NO_INDEX

    def test_leader_is_strongest_with_free_pilot(self):
        """Test the strongest RU is chosen while it has pilots left."""
        partial, _ = associate([[0.2, 0.2], [0.9, 0.9]], pilot_dim=1)
        first, second = partial.order
        assert partial.leaders[first] == 1
        assert partial.leaders[second] == 0

    def test_leader_spreads_pilots(self):
        """Test UEs led by different RUs get different pilots while unused ones remain."""
        partial, _ = associate([[1.0, 0.1], [0.1, 1.0]], pilot_dim=2)
        assert partial.leaders.tolist() == [0, 1]
        assert sorted(partial.pilots.tolist()) == [0, 1]

    def test_threshold_value(self):
        """Test the association threshold is η / (M snr)."""
        config = SimConfig(num_rus=1, num_ues=2)
        constants = derive_constants(config)
        threshold = association_threshold(config, constants)
        partial, _ = associate([[threshold * 1.01, threshold * 0.99]])
        np.testing.assert_array_equal(partial.outage, [False, True])


class TestClusterFormation:
    """Test RU enrollment."""

    def test_takes_strongest_rus(self):
        """Test 1 UE, 3 qualifying RUs, Q = 2 keeps the 2 strongest."""
        _, graph = associate([[0.5], [0.9], [0.7]], max_cluster_size=2)
        np.testing.assert_array_equal(graph.cluster(0), [1, 2])

    def test_occupied_pilot_skipped(self):
        """Test an RU whose copy of t_k is taken is skipped even if strong."""
        _, graph = associate([[1.0, 0.2], [0.5, 1.0]], pilot_dim=1)
        np.testing.assert_array_equal(graph.cluster(0), [0])
        np.testing.assert_array_equal(graph.cluster(1), [1])

    def test_joins_when_pilot_free(self):
        """Test both UEs join the second RU when their pilots differ."""
        _, graph = associate([[1.0, 0.9], [0.5, 0.2]], pilot_dim=2)
        assert graph.cluster_sizes.tolist() == [2, 2]

    def test_below_threshold_not_enrolled(self):
        """Test weak RUs stay out of the cluster."""
        _, graph = associate([[STRONG], [WEAK]])
        np.testing.assert_array_equal(graph.cluster(0), [0])

    @pytest.mark.parametrize("seed", range(5))
    def test_invariants_on_random_layouts(self, seed):
        """Test |U_ℓ| ≤ τ_p, |C_k| ≤ Q, unique pilots per RU, leader in cluster."""
        config = SimConfig(num_rus=6, num_ues=60, pilot_dim=8, max_cluster_size=3)
        rng = np.random.default_rng(seed)
        layout = place_nodes(config, rng)
        lsfc = compute_lsfc(layout, config, rng)
        constants = derive_constants(config)
        partial = assign_leaders_and_pilots(lsfc, config, constants, rng)
        graph = form_clusters(lsfc, partial, config, constants)

        assert graph.mask.sum(axis=1).max() <= config.pilot_dim
        assert graph.cluster_sizes.max() <= config.max_cluster_size
        for ru in range(config.num_rus):
            pilots = graph.pilots[graph.served(ru)]
            assert len(set(pilots.tolist())) == len(pilots)
        for ue in np.flatnonzero(graph.active):
            assert graph.mask[graph.leaders[ue], ue]
        assert not graph.mask[:, graph.outage].any()
        np.testing.assert_array_equal(pilot_occupancy(graph).sum(axis=1), graph.mask.sum(axis=1))
        assert len(graph.edges) == int(graph.mask.sum())

    @pytest.mark.parametrize("max_cluster_size", [3, 6])
    @pytest.mark.parametrize("seed", range(3))
    def test_full_association_takes_best_rus(self, seed, max_cluster_size):
        """Test τ_p ≥ K and η = 0 give every UE its min(Q, L) strongest RUs."""
        config = SimConfig(num_rus=6, num_ues=12, pilot_dim=12, max_cluster_size=max_cluster_size, snr_threshold=0.0)
        rng = np.random.default_rng(seed)
        lsfc = compute_lsfc(place_nodes(config, rng), config, rng)
        constants = derive_constants(config)
        graph = form_clusters(lsfc, assign_leaders_and_pilots(lsfc, config, constants, rng), config, constants)

        assert graph.active.all()
        size = min(config.max_cluster_size, config.num_rus)
        for ue in range(config.num_ues):
            best = np.argsort(-lsfc.beta[:, ue], kind="stable")[:size]
            np.testing.assert_array_equal(graph.cluster(ue), np.sort(best))

    @pytest.mark.parametrize("seed", range(3))
    def test_clusters_shrink_with_threshold(self, seed):
        """Test raising η only removes RUs from clusters when pilots are plentiful."""
        base = SimConfig(num_rus=8, num_ues=16, pilot_dim=16, max_cluster_size=4)
        rng = np.random.default_rng(seed)
        lsfc = compute_lsfc(place_nodes(base, rng), base, rng)

        masks = []
        for eta in (0.0, 1.0, 10.0, 100.0, 1000.0):
            config = base.model_copy(update={"snr_threshold": eta})
            constants = derive_constants(config)
            partial = assign_leaders_and_pilots(lsfc, config, constants, np.random.default_rng(100 + seed))
            masks.append(form_clusters(lsfc, partial, config, constants).mask)

        for looser, tighter in zip(masks, masks[1:]):
            assert not (tighter & ~looser).any()
            assert np.all(tighter.sum(axis=0) <= looser.sum(axis=0))
        assert masks[-1].sum() < masks[0].sum()

    def test_deterministic(self):
        """Test the same generator state gives the same graph."""
        beta = np.random.default_rng(0).uniform(0.1, 1.0, size=(4, 10))
        _, a = associate(beta, rng_seed=3, pilot_dim=3)
        _, b = associate(beta, rng_seed=3, pilot_dim=3)
        np.testing.assert_array_equal(a.mask, b.mask)
        np.testing.assert_array_equal(a.pilots, b.pilots)


class TestGraphQueries:
    """Test AssociationGraph helpers."""

    def test_cluster_users(self, make_graph):
        """Test U(C_k) collects everyone served by the cluster."""
        graph = make_graph([[1, 1, 0], [0, 1, 1]])
        np.testing.assert_array_equal(graph.cluster_users(0), [0, 1])
        np.testing.assert_array_equal(graph.cluster_users(1), [0, 1, 2])

    def test_dump_graph(self, tmp_path, make_graph):
        """Test the edge list file."""
        graph = make_graph([[1, 1, 0], [0, 1, 1]])
        frame = pd.read_csv(dump_graph(graph, tmp_path / "graph.csv"))
        assert list(frame.columns) == ["ue", "ru", "pilot", "is_leader"]
        assert len(frame) == 4
        assert frame["is_leader"].sum() == 3
