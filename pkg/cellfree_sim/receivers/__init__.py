"""UL receive scheme implementations."""

from .base import BaseReceiver, ReceiverSet
from .clzf import ClzfReceiver
from .lmmse import LmmseClusterReceiver
from .lsfd import LsfdReceiver

__all__ = ["BaseReceiver", "ReceiverSet", "ClzfReceiver", "LmmseClusterReceiver", "LsfdReceiver"]
