"""Single-ring local scattering channels in the DFT beam domain."""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from scipy.linalg import dft

from .config import SimConfig
from .geometry import LargeScaleMap, NetworkLayout, torus_displacement

if TYPE_CHECKING:
    from .association import AssociationGraph

logger = logging.getLogger(__name__)

TWO_PI = 2 * math.pi


@lru_cache(maxsize=16)
def _dft(num_antennas: int) -> np.ndarray:
    matrix = dft(num_antennas, scale="sqrtn")
    matrix.setflags(write=False)
    return matrix


def dft_matrix(num_antennas: int) -> np.ndarray:
    """Unitary M×M DFT matrix, entry (n, m) = exp(-j 2π m n / M) / sqrt(M)."""
    return _dft(num_antennas)


def dft_column(num_antennas: int, m: int) -> np.ndarray:
    """Column m of the unitary DFT matrix."""
    if not 0 <= m < num_antennas:
        raise IndexError(f"DFT column {m} out of range for M={num_antennas}")
    return dft_matrix(num_antennas)[:, m].copy()


@dataclass(frozen=True)
class AngularSupport:
    """DFT beams illuminated by one RU-UE link."""
    indices: tuple[int, ...]
    theta: float
    spread: float
    num_beams: int

    def __len__(self) -> int:
        return len(self.indices)

    def basis(self) -> np.ndarray:
        """F_S, the M×|S| tall unitary matrix of selected DFT columns."""
        return dft_matrix(self.num_beams)[:, list(self.indices)]


def _circular_offset(angles: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Signed angular difference wrapped to [-π, π)."""
    return (angles - theta + math.pi) % TWO_PI - math.pi


def angular_support(theta: float, spread: float, num_antennas: int) -> AngularSupport:
    """
    Beams m whose angle 2πm/M lies in [θ − Δ/2, θ + Δ/2] modulo 2π, endpoints included.

    The result may be empty when Δ < 2π/M; see :func:`nearest_beam`.
    """
    if not 0 < spread <= TWO_PI + 1e-12:
        raise ValueError(f"Angular spread must be in (0, 2π], got {spread}")
    grid = TWO_PI * np.arange(num_antennas) / num_antennas
    offset = np.abs(_circular_offset(grid, theta))
    inside = offset <= spread / 2 + 1e-12
    return AngularSupport(
        indices=tuple(int(m) for m in np.flatnonzero(inside)),
        theta=float(theta % TWO_PI),
        spread=float(spread),
        num_beams=num_antennas,
    )


def nearest_beam(theta: float, num_antennas: int) -> int:
    """Grid beam closest to θ (lower index on ties)."""
    grid = TWO_PI * np.arange(num_antennas) / num_antennas
    return int(np.argmin(np.abs(_circular_offset(grid, theta))))


@dataclass(frozen=True)
class SupportMap:
    """Angular supports of every (RU, UE) link."""
    mask: np.ndarray  # (L, K, M) bool
    theta: np.ndarray  # (L, K) radians
    spread: float

    @property
    def sizes(self) -> np.ndarray:
        return self.mask.sum(axis=-1)

    def support(self, ru: int, ue: int) -> AngularSupport:
        return AngularSupport(
            indices=tuple(int(m) for m in np.flatnonzero(self.mask[ru, ue])),
            theta=float(self.theta[ru, ue]),
            spread=self.spread,
            num_beams=self.mask.shape[-1],
        )


def compute_supports(layout: NetworkLayout, config: SimConfig) -> SupportMap:
    """Supports for all links, centered on the torus-shortest RU→UE bearing."""
    delta = torus_displacement(layout)
    theta = np.arctan2(delta[..., 1], delta[..., 0]) % TWO_PI
    M = config.antennas_per_ru
    grid = TWO_PI * np.arange(M) / M
    offset = np.abs(_circular_offset(grid[None, None, :], theta[..., None]))
    mask = offset <= config.angular_spread / 2 + 1e-12

    empty = ~mask.any(axis=-1)
    if empty.any():
        logger.warning("%d link(s) with empty angular support; using nearest beam", int(empty.sum()))
        for ru, ue in zip(*np.nonzero(empty)):
            mask[ru, ue, nearest_beam(theta[ru, ue], M)] = True
    return SupportMap(mask=mask, theta=theta, spread=config.angular_spread)


def _check_support(beta: float, support: AngularSupport) -> None:
    if len(support) == 0:
        raise ValueError("Empty angular support; substitute the nearest beam")
    if beta <= 0:
        raise ValueError(f"LSFC must be positive, got {beta}")


def complex_normal(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Circularly symmetric complex Gaussian samples with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


def draw_channel(beta: float, support: AngularSupport, rng: np.random.Generator) -> np.ndarray:
    """One realization h = sqrt(β M / |S|) F_S ν."""
    _check_support(beta, support)
    nu = complex_normal(rng, (len(support),))
    return math.sqrt(beta * support.num_beams / len(support)) * (support.basis() @ nu)


def covariance(beta: float, support: AngularSupport) -> np.ndarray:
    """Channel covariance (β M / |S|) F_S F_Sᴴ."""
    _check_support(beta, support)
    basis = support.basis()
    return (beta * support.num_beams / len(support)) * (basis @ basis.conj().T)


def project_onto_support(vectors: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """
    Apply F_S F_Sᴴ along the last axis.

    `mask` is the boolean beam selection, broadcastable against `vectors`.
    """
    F = dft_matrix(np.shape(vectors)[-1])
    beams = vectors @ F.conj()  # F^H x along the last axis (F is symmetric)
    return (beams * mask) @ F.T


@dataclass(frozen=True)
class ChannelMatrix:
    """All RU-UE channel blocks h_{ℓ,k}, stored as an (L, K, M) array."""
    blocks: np.ndarray

    @property
    def shape(self) -> tuple[int, int, int]:
        L, K, M = self.blocks.shape
        return L, K, M

    def block(self, ru: int, ue: int) -> np.ndarray:
        return self.blocks[ru, ue]

    def column(self, ue: int) -> np.ndarray:
        """Stacked LM-vector h_k (RU-major)."""
        return self.blocks[:, ue, :].reshape(-1)

    def full(self) -> np.ndarray:
        """The LM×K matrix H with row index ℓM + m."""
        L, K, M = self.shape
        return self.blocks.transpose(0, 2, 1).reshape(L * M, K)


def draw_channel_matrix(lsfc: LargeScaleMap, supports: SupportMap, rng: np.random.Generator) -> ChannelMatrix:
    """Draw every block independently; one full M-vector of variates per link."""
    mask = supports.mask
    nu = complex_normal(rng, mask.shape) * mask
    scale = np.sqrt(lsfc.beta * mask.shape[-1] / supports.sizes)
    blocks = scale[..., None] * (nu @ dft_matrix(mask.shape[-1]).T)
    return ChannelMatrix(blocks=blocks)


@dataclass(frozen=True)
class PartialCsiView:
    """
    The part of a channel (or estimate) array known to the processor of cluster C_k.

    Block (ℓ, j) is visible iff ℓ ∈ C_k and j ∈ U_ℓ; other blocks read as zero.
    """
    source: np.ndarray  # (L, K, M)
    visible: np.ndarray  # (L, K) bool
    ue: int

    def block(self, ru: int, ue: int) -> np.ndarray:
        if self.visible[ru, ue]:
            return self.source[ru, ue]
        return np.zeros(self.source.shape[-1], dtype=self.source.dtype)

    def blocks(self) -> np.ndarray:
        return self.source * self.visible[..., None]

    def matrix(self) -> np.ndarray:
        """Masked LM×K matrix H(C_k)."""
        masked = self.blocks()
        L, K, M = masked.shape
        return masked.transpose(0, 2, 1).reshape(L * M, K)

    @property
    def cluster(self) -> np.ndarray:
        return np.flatnonzero(self.visible.any(axis=1))

    @property
    def users(self) -> np.ndarray:
        """U(C_k): UEs served by at least one RU of the cluster."""
        return np.flatnonzero(self.visible.any(axis=0))


def partial_view(blocks: np.ndarray | ChannelMatrix, graph: "AssociationGraph", ue: int) -> PartialCsiView:
    """Mask a channel/estimate array down to what cluster C_k knows."""
    source = blocks.blocks if isinstance(blocks, ChannelMatrix) else np.asarray(blocks)
    if graph.outage[ue]:
        raise ValueError(f"UE {ue} is in outage and has no cluster")
    in_cluster = graph.mask[:, ue]
    if not in_cluster.any():
        raise ValueError(f"UE {ue} has an empty cluster")
    visible = graph.mask & in_cluster[:, None]
    return PartialCsiView(source=source, visible=visible, ue=ue)


def dump_channel_fixture(lsfc: LargeScaleMap, supports: SupportMap, channels: ChannelMatrix, path: str | Path) -> Path:
    """Write (β, S, h) triples in long CSV format, one row per antenna."""
    path = Path(path)
    L, K, M = channels.shape
    ru, ue, antenna = np.meshgrid(np.arange(L), np.arange(K), np.arange(M), indexing="ij")
    support_text = np.array([
        [" ".join(str(m) for m in np.flatnonzero(supports.mask[r, u])) for u in range(K)]
        for r in range(L)
    ])
    frame = pd.DataFrame({
        "ru": ru.ravel(),
        "ue": ue.ravel(),
        "beta": np.repeat(lsfc.beta.ravel(), M),
        "support": np.repeat(support_text.ravel(), M),
        "antenna": antenna.ravel(),
        "h_re": channels.blocks.real.ravel(),
        "h_im": channels.blocks.imag.ravel(),
    })
    try:
        frame.to_csv(path, index=False, float_format="%.17g")
    except OSError as e:
        raise RuntimeError(f"Failed to write channel fixture {path}: {e}") from e
    return path
