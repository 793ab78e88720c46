"""Node placement on a torus and UMi street-canyon large-scale fading."""

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .config import LosMode, SimConfig

logger = logging.getLogger(__name__)

LAYOUT_COLUMNS = ["node_class", "index", "x", "y"]


@dataclass(frozen=True)
class NetworkLayout:
    """RU and UE positions (meters) on a square torus."""
    ru_positions: np.ndarray  # (L, 2)
    ue_positions: np.ndarray  # (K, 2)
    area_side: float

    @property
    def num_rus(self) -> int:
        return self.ru_positions.shape[0]

    @property
    def num_ues(self) -> int:
        return self.ue_positions.shape[0]


@dataclass(frozen=True)
class LargeScaleMap:
    """Per-(RU, UE) large-scale fading coefficients and the draws behind them."""
    beta: np.ndarray  # (L, K) linear LSFC
    los: np.ndarray  # (L, K) bool
    shadow_db: np.ndarray  # (L, K)


def place_nodes(config: SimConfig, rng: np.random.Generator) -> NetworkLayout:
    """Drop L RUs and K UEs i.i.d. uniformly over the square."""
    side = config.area_side
    ru = rng.uniform(0.0, side, size=(config.num_rus, 2))
    ue = rng.uniform(0.0, side, size=(config.num_ues, 2))
    return NetworkLayout(ru_positions=ru, ue_positions=ue, area_side=side)


def wrap_displacement(delta: np.ndarray, side: float) -> np.ndarray:
    """Shortest signed displacement per axis on a torus of the given side."""
    return (np.asarray(delta) + side / 2) % side - side / 2


def torus_displacement(layout: NetworkLayout) -> np.ndarray:
    """Signed shortest RU→UE displacement, shape (L, K, 2)."""
    delta = layout.ue_positions[None, :, :] - layout.ru_positions[:, None, :]
    return wrap_displacement(delta, layout.area_side)


def torus_distance_matrix(layout: NetworkLayout) -> np.ndarray:
    """Planar wraparound distance for every (RU, UE) pair, shape (L, K)."""
    return np.hypot(*np.moveaxis(torus_displacement(layout), -1, 0))


def torus_distance(layout: NetworkLayout, ru_index: int, ue_index: int) -> float:
    """Planar wraparound distance between one RU and one UE."""
    if not (0 <= ru_index < layout.num_rus and 0 <= ue_index < layout.num_ues):
        raise IndexError(f"Node index out of range: ru={ru_index}, ue={ue_index}")
    delta = layout.ue_positions[ue_index] - layout.ru_positions[ru_index]
    dx, dy = wrap_displacement(delta, layout.area_side)
    return float(math.hypot(dx, dy))


def distance_3d(distance_2d: np.ndarray, config: SimConfig) -> np.ndarray:
    return np.sqrt(np.asarray(distance_2d) ** 2 + (config.ru_height - config.ue_height) ** 2)


def los_probability(distance_2d: np.ndarray) -> np.ndarray:
    """UMi street-canyon LOS probability at the given planar distance."""
    d = np.asarray(distance_2d, dtype=float)
    near = np.minimum(18.0 / np.maximum(d, 1e-12), 1.0)
    decay = np.exp(-d / 36.0)
    return near * (1.0 - decay) + decay


def pathloss_db(distance_3d_m: np.ndarray, los: np.ndarray, config: SimConfig) -> np.ndarray:
    """
    UMi street-canyon pathloss in dB.

    Args:
        distance_3d_m: 3-D link distance(s) in meters, strictly positive
        los: LOS indicator(s), broadcastable against the distances
        config: Scenario supplying carrier frequency and UE height

    Raises:
        ValueError: On a zero 3-D distance
    """
    d = np.asarray(distance_3d_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("Zero 3-D distance between an RU and a UE")
    fc = config.carrier_freq_ghz
    pl_los = 32.4 + 21.0 * np.log10(d) + 20.0 * np.log10(fc)
    pl_nlos = 35.3 * np.log10(d) + 22.4 + 21.3 * np.log10(fc) - 0.3 * (config.ue_height - 1.5)
    return np.where(los, pl_los, np.maximum(pl_los, pl_nlos))


def shadowing_sigma_db(los: np.ndarray, config: SimConfig) -> np.ndarray:
    if not config.shadowing_enabled:
        return np.zeros(np.shape(los))
    return np.where(los, config.shadowing_los_db, config.shadowing_nlos_db)


def _lognormal_gain(sigma_db: float) -> float:
    # E[10^(-X/10)] for X ~ N(0, sigma^2)
    s = sigma_db * math.log(10) / 10
    return math.exp(s * s / 2)


def mean_beta(distance_2d: float, config: SimConfig) -> float:
    """
    Expected linear LSFC at a planar distance, averaged over the LOS/NLOS
    mixture and the lognormal shadowing.
    """
    d3 = distance_3d(distance_2d, config)
    if config.los_mode is LosMode.RANDOM:
        p_los = float(los_probability(distance_2d))
    else:
        p_los = 1.0 if config.los_mode is LosMode.LOS else 0.0

    total = 0.0
    for los, weight in ((True, p_los), (False, 1.0 - p_los)):
        if weight == 0.0:
            continue
        gain = 10 ** (-float(pathloss_db(d3, los, config)) / 10)
        sigma = float(shadowing_sigma_db(np.array(los), config))
        total += weight * gain * _lognormal_gain(sigma)
    return total


def compute_lsfc(layout: NetworkLayout, config: SimConfig, rng: np.random.Generator) -> LargeScaleMap:
    """
    Draw LOS states and shadowing and evaluate the LSFC of every (RU, UE) link.

    β is the same for UL and DL; the SNR normalization is applied downstream.
    """
    d2 = torus_distance_matrix(layout)
    d3 = distance_3d(d2, config)

    # Draw both variates regardless of mode so the stream layout never shifts
    uniforms = rng.random(d2.shape)
    normals = rng.standard_normal(d2.shape)

    if config.los_mode is LosMode.RANDOM:
        los = uniforms < los_probability(d2)
    else:
        los = np.full(d2.shape, config.los_mode is LosMode.LOS)

    shadow_db = normals * shadowing_sigma_db(los, config)
    pl = pathloss_db(d3, los, config) + shadow_db
    beta = 10 ** (-pl / 10)
    logger.debug("LSFC map: %d links, %.1f%% LOS", beta.size, 100 * los.mean())
    return LargeScaleMap(beta=beta, los=los, shadow_db=shadow_db)


def dump_layout(layout: NetworkLayout, path: str | Path) -> Path:
    """Write a layout as CSV with columns node_class, index, x, y."""
    path = Path(path)
    frames = []
    for node_class, positions in (("ru", layout.ru_positions), ("ue", layout.ue_positions)):
        frames.append(pd.DataFrame({
            "node_class": node_class,
            "index": np.arange(len(positions)),
            "x": positions[:, 0],
            "y": positions[:, 1],
        }))
    try:
        pd.concat(frames, ignore_index=True)[LAYOUT_COLUMNS].to_csv(path, index=False, float_format="%.17g")
    except OSError as e:
        raise RuntimeError(f"Failed to write layout {path}: {e}") from e
    return path


def load_layout(path: str | Path, area_side: float) -> NetworkLayout:
    """Read a layout written by dump_layout."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Layout file not found: {path}")
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = set(LAYOUT_COLUMNS) - set(frame.columns)
    if missing:
        raise ValueError(f"Layout file {path} lacks columns: {sorted(missing)}")

    def positions(node_class: str) -> np.ndarray:
        rows = frame[frame["node_class"] == node_class].sort_values("index")
        return rows[["x", "y"]].to_numpy(dtype=float)

    layout = NetworkLayout(ru_positions=positions("ru"), ue_positions=positions("ue"), area_side=area_side)
    coords = np.concatenate([layout.ru_positions, layout.ue_positions])
    if coords.size and (coords.min() < 0 or coords.max() >= area_side):
        raise ValueError(f"Layout coordinates fall outside [0, {area_side})")
    return layout
