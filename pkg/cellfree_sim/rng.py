"""Deterministic random streams keyed by (layout, purpose, draw)."""

from enum import IntEnum
from typing import NamedTuple

import numpy as np


class Purpose(IntEnum):
    """What a random stream is used for. Values are part of the seeding contract."""
    PLACEMENT = 1
    LARGE_SCALE = 2
    UE_ORDER = 3
    FADING = 4
    PILOT_NOISE = 5
    LSFD_FADING = 6
    LSFD_PILOT_NOISE = 7


class StreamId(NamedTuple):
    layout_index: int
    purpose: Purpose
    draw_index: int = 0


def stream_for(master_seed: int, stream_id: StreamId) -> np.random.Generator:
    """
    Return the generator for one stream.

    Identical (master_seed, stream_id) pairs always yield identical sequences;
    distinct ids map to distinct SeedSequence spawn keys and are statistically
    independent.
    """
    layout_index, purpose, draw_index = stream_id
    if min(layout_index, draw_index) < 0:
        raise ValueError(f"Stream indices must be non-negative, got {stream_id}")
    seq = np.random.SeedSequence(
        entropy=int(master_seed),
        spawn_key=(int(layout_index), int(purpose), int(draw_index)),
    )
    return np.random.default_rng(seq)
