"""Tests for node placement, torus distances and large-scale fading."""

import math

import numpy as np
import pytest

from cellfree_sim.config import SimConfig
from cellfree_sim.geometry import (
    NetworkLayout,
    compute_lsfc,
    distance_3d,
    dump_layout,
    load_layout,
    los_probability,
    mean_beta,
    pathloss_db,
    place_nodes,
    torus_distance,
    torus_distance_matrix,
    wrap_displacement,
)


def two_node_layout(ru, ue, side=225.0):
    return NetworkLayout(ru_positions=np.array([ru], dtype=float), ue_positions=np.array([ue], dtype=float), area_side=side)


class TestPlacement:
    """Test uniform node drops."""

    def test_counts_and_bounds(self):
        """Test L = 10, K = 100 positions inside the square."""
        config = SimConfig(num_rus=10, num_ues=100)
        layout = place_nodes(config, np.random.default_rng(0))
        assert layout.ru_positions.shape == (10, 2)
        assert layout.ue_positions.shape == (100, 2)
        coords = np.concatenate([layout.ru_positions, layout.ue_positions])
        assert coords.min() >= 0 and coords.max() < config.area_side

    def test_deterministic(self):
        """Test that a fixed generator reproduces the layout."""
        config = SimConfig()
        a = place_nodes(config, np.random.default_rng(5))
        b = place_nodes(config, np.random.default_rng(5))
        np.testing.assert_array_equal(a.ue_positions, b.ue_positions)

    def test_mean_position(self):
        """Test that x-coordinates average to side / 2."""
        config = SimConfig(num_rus=1, num_ues=1000)
        rng = np.random.default_rng(1)
        xs = np.concatenate([place_nodes(config, rng).ue_positions[:, 0] for _ in range(20)])
        sigma = config.area_side / math.sqrt(12 * xs.size)
        assert abs(xs.mean() - config.area_side / 2) < 3 * sigma


class TestTorusDistance:
    """Test wraparound distances."""

    def test_wraparound(self):
        """Test (0,0)-(224,0) on side 225 is 1 m apart."""
        assert torus_distance(two_node_layout((0, 0), (224, 0)), 0, 0) == pytest.approx(1.0)

    def test_identical_points(self):
        """Test zero planar distance."""
        assert torus_distance(two_node_layout((10, 10), (10, 10)), 0, 0) == 0.0

    def test_no_wrap_helps(self):
        """Test the half-diagonal is not shortened."""
        d = torus_distance(two_node_layout((0, 0), (112.5, 112.5)), 0, 0)
        assert d == pytest.approx(112.5 * math.sqrt(2))

    def test_symmetric_and_bounded(self):
        """Test d ≤ side / √2 on random layouts."""
        layout = place_nodes(SimConfig(), np.random.default_rng(2))
        d = torus_distance_matrix(layout)
        assert d.max() <= layout.area_side / math.sqrt(2) + 1e-9

    def test_matrix_matches_pairwise(self):
        """Test the vectorized matrix against the scalar function."""
        layout = place_nodes(SimConfig(num_rus=3, num_ues=4), np.random.default_rng(3))
        d = torus_distance_matrix(layout)
        for ru in range(3):
            for ue in range(4):
                assert d[ru, ue] == pytest.approx(torus_distance(layout, ru, ue))

    def test_index_out_of_range(self):
        """Test bad node indices."""
        with pytest.raises(IndexError):
            torus_distance(two_node_layout((0, 0), (1, 1)), 1, 0)

    def test_wrap_displacement_range(self):
        """Test wrapped displacements lie in [-side/2, side/2)."""
        wrapped = wrap_displacement(np.linspace(-300, 300, 61), 225.0)
        assert wrapped.min() >= -112.5 and wrapped.max() < 112.5

    def test_triangle_inequality(self):
        """Test d(a, c) ≤ d(a, b) + d(b, c) over all triples, including wrapped ones."""
        rng = np.random.default_rng(4)
        points = np.concatenate([rng.uniform(0, 225.0, (25, 2)), [[0.5, 0.5], [224.5, 224.5], [0.5, 224.5]]])
        d = torus_distance_matrix(NetworkLayout(ru_positions=points, ue_positions=points, area_side=225.0))
        np.testing.assert_allclose(np.diag(d), 0.0, atol=1e-12)
        np.testing.assert_allclose(d, d.T)
        assert np.all(d[:, None, :] <= d[:, :, None] + d[None, :, :] + 1e-9)


class TestPathloss:
    """Test the UMi street-canyon model."""

    def test_los_slope(self):
        """Test that doubling the distance costs 21 log10 2 dB in LOS."""
        config = SimConfig()
        delta = pathloss_db(np.array(200.0), True, config) - pathloss_db(np.array(100.0), True, config)
        assert float(delta) == pytest.approx(21 * math.log10(2))
        assert float(delta) == pytest.approx(6.32, abs=0.01)

    def test_nlos_not_better_than_los(self):
        """Test NLOS pathloss ≥ LOS pathloss."""
        config = SimConfig()
        d = np.linspace(5, 300, 50)
        assert np.all(pathloss_db(d, False, config) >= pathloss_db(d, True, config))

    def test_zero_distance(self):
        """Test that a zero 3-D distance is rejected."""
        with pytest.raises(ValueError, match="Zero 3-D distance"):
            pathloss_db(np.array([0.0]), True, SimConfig())

    def test_3d_distance_uses_heights(self):
        """Test co-located nodes are still h_ru − h_ue apart."""
        config = SimConfig(ru_height=10.0, ue_height=1.5)
        assert float(distance_3d(0.0, config)) == pytest.approx(8.5)

    def test_los_probability(self):
        """Test LOS is certain within 18 m and decays beyond."""
        assert float(los_probability(10.0)) == pytest.approx(1.0)
        p = los_probability(np.array([20.0, 50.0, 150.0]))
        assert np.all(np.diff(p) < 0) and np.all(p > 0)

    def test_mean_beta_decreasing(self):
        """Test that β̄ decreases with distance."""
        config = SimConfig()
        values = [mean_beta(d, config) for d in (20.0, 80.0, 240.0)]
        assert values[0] > values[1] > values[2] > 0

    def test_mean_beta_without_shadowing(self):
        """Test that forced LOS without shadowing reduces to the pathloss."""
        config = SimConfig(los_mode="los", shadowing_enabled=False)
        expected = 10 ** (-float(pathloss_db(distance_3d(100.0, config), True, config)) / 10)
        assert mean_beta(100.0, config) == pytest.approx(expected)


class TestLargeScaleFading:
    """Test LSFC maps."""

    def test_shapes_and_positive(self):
        """Test an (L, K) map of positive coefficients."""
        config = SimConfig(num_rus=5, num_ues=7)
        layout = place_nodes(config, np.random.default_rng(0))
        lsfc = compute_lsfc(layout, config, np.random.default_rng(1))
        assert lsfc.beta.shape == (5, 7)
        assert np.all(lsfc.beta > 0)

    def test_deterministic_without_randomness(self):
        """Test forced LOS and no shadowing ignore the generator."""
        config = SimConfig(num_rus=3, num_ues=4, los_mode="los", shadowing_enabled=False)
        layout = place_nodes(config, np.random.default_rng(0))
        a = compute_lsfc(layout, config, np.random.default_rng(1))
        b = compute_lsfc(layout, config, np.random.default_rng(2))
        np.testing.assert_array_equal(a.beta, b.beta)
        assert a.los.all()

    @pytest.mark.parametrize("distance", [30.0, 60.0, 120.0])
    def test_los_fraction_matches_probability(self, distance):
        """Test the drawn LOS share at a fixed distance stays within 4 binomial σ of its probability."""
        num_ues = 4000
        layout = NetworkLayout(
            ru_positions=np.array([[0.0, 0.0]]),
            ue_positions=np.tile([distance, 0.0], (num_ues, 1)),
            area_side=300.0,
        )
        lsfc = compute_lsfc(layout, SimConfig(), np.random.default_rng(int(distance)))
        p = float(los_probability(distance))
        sigma = math.sqrt(p * (1 - p) / num_ues)
        assert abs(lsfc.los.mean() - p) <= 4 * sigma

    def test_nearer_is_stronger(self):
        """Test β ordering follows distance without shadowing."""
        config = SimConfig(los_mode="nlos", shadowing_enabled=False)
        layout = NetworkLayout(
            ru_positions=np.array([[0.0, 0.0]]),
            ue_positions=np.array([[10.0, 0.0], [50.0, 0.0], [100.0, 0.0]]),
            area_side=225.0,
        )
        beta = compute_lsfc(layout, config, np.random.default_rng(0)).beta[0]
        assert beta[0] > beta[1] > beta[2]


class TestLayoutFiles:
    """Test layout CSV fixtures."""

    def test_dump_and_load(self, tmp_path):
        """Test that a dumped layout loads back exactly."""
        config = SimConfig(num_rus=3, num_ues=5)
        layout = place_nodes(config, np.random.default_rng(0))
        path = dump_layout(layout, tmp_path / "layout.csv")
        loaded = load_layout(path, config.area_side)
        np.testing.assert_array_equal(loaded.ru_positions, layout.ru_positions)
        np.testing.assert_array_equal(loaded.ue_positions, layout.ue_positions)

    def test_out_of_bounds(self, tmp_path):
        """Test coordinates outside the square are rejected."""
        path = tmp_path / "layout.csv"
        path.write_text("node_class,index,x,y\nru,0,1.0,2.0\nue,0,300.0,2.0\n")
        with pytest.raises(ValueError, match="outside"):
            load_layout(path, 225.0)

    def test_missing_columns(self, tmp_path):
        """Test malformed layout files."""
        path = tmp_path / "layout.csv"
        path.write_text("x,y\n1,2\n")
        with pytest.raises(ValueError, match="lacks columns"):
            load_layout(path, 225.0)
