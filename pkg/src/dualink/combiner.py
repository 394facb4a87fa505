"""LLR-domain diversity combining and the frame-matching combiner loop.

Maximal ratio combining of two noise-weighted LLR streams reduces to
elementwise addition. Selection and equal-gain combining are provided behind
the same interface for comparison runs.

The combiner loop mirrors the testbed threading contract: two producers (one
per link) feed bounded FIFO queues, a single consumer pops matching frame
indices, verifies the payload digests, combines, and decodes all three lanes
(PLC, wireless, combined) so there is a single source of BER truth. Overflow
drops the oldest frame and counts it. The same loop run sequentially
(produce one frame, consume one frame) yields bit-identical results, which is
what the deterministic tests use.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .fec import ConvCode, viterbi_decode
from .phy_types import LlrVector

__all__ = [
    "FrameMismatchError",
    "DesyncError",
    "combine_mrc",
    "combine_selection",
    "combine_equal_gain",
    "COMBINERS",
    "BoundedFrameQueue",
    "FrameResult",
    "combiner_loop",
]

DEFAULT_QUEUE_DEPTH = 16


class FrameMismatchError(ValueError):
    """The two frames under combination do not carry the same payload."""


class DesyncError(RuntimeError):
    """Persistent frame-index skew larger than the queue depth."""


def _check_pair(llr_p: LlrVector, llr_w: LlrVector) -> None:
    if len(llr_p) != len(llr_w):
        raise ValueError(f"LLR length mismatch: {len(llr_p)} vs {len(llr_w)}")
    if llr_p.frame_index != llr_w.frame_index:
        raise FrameMismatchError(
            f"frame index mismatch: {llr_p.frame_index} vs {llr_w.frame_index}"
        )
    if llr_p.payload_digest != llr_w.payload_digest:
        raise FrameMismatchError(
            f"payload digest mismatch on frame {llr_p.frame_index}"
        )


def combine_mrc(llr_p: LlrVector, llr_w: LlrVector) -> LlrVector:
    """Maximal ratio combining: the combined LLR is the sum of both links'
    LLRs (each already weighted by its own noise variance)."""
    _check_pair(llr_p, llr_w)
    return LlrVector(llrs=llr_p.llrs + llr_w.llrs,
                     frame_index=llr_p.frame_index,
                     payload_digest=llr_p.payload_digest)


def combine_selection(llr_p: LlrVector, llr_w: LlrVector) -> LlrVector:
    """Pick the branch with the larger mean LLR magnitude (SNR proxy)."""
    _check_pair(llr_p, llr_w)
    best = llr_p if np.mean(np.abs(llr_p.llrs)) >= np.mean(np.abs(llr_w.llrs)) else llr_w
    return LlrVector(llrs=best.llrs.copy(), frame_index=llr_p.frame_index,
                     payload_digest=llr_p.payload_digest)


def combine_equal_gain(llr_p: LlrVector, llr_w: LlrVector) -> LlrVector:
    """Sum after normalizing each branch to unit mean LLR magnitude."""
    _check_pair(llr_p, llr_w)
    out = np.zeros_like(llr_p.llrs)
    for branch in (llr_p, llr_w):
        scale = np.mean(np.abs(branch.llrs))
        if scale > 0:
            out += branch.llrs / scale
    return LlrVector(llrs=out, frame_index=llr_p.frame_index,
                     payload_digest=llr_p.payload_digest)


COMBINERS = {
    "mrc": combine_mrc,
    "selection": combine_selection,
    "equal_gain": combine_equal_gain,
}


class BoundedFrameQueue:
    """Bounded FIFO, multiple-producer safe, drop-oldest on overflow.

    ``drops`` counts frames discarded by overflow. ``close()`` signals that
    no more frames will arrive; ``pop()`` then returns None once drained.
    """

    def __init__(self, depth: int = DEFAULT_QUEUE_DEPTH):
        if depth <= 0:
            raise ValueError("queue depth must be positive")
        self.depth = depth
        self.drops = 0
        self._items: deque = deque()
        self._closed = False
        self._cond = threading.Condition()

    def push(self, item) -> None:
        with self._cond:
            if self._closed:
                raise RuntimeError("push on closed queue")
            if len(self._items) >= self.depth:
                self._items.popleft()
                self.drops += 1
            self._items.append(item)
            self._cond.notify()

    def pop(self, timeout: float | None = None):
        with self._cond:
            while not self._items and not self._closed:
                if not self._cond.wait(timeout):
                    raise TimeoutError("queue pop timed out")
            if self._items:
                return self._items.popleft()
            return None

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    def __len__(self) -> int:
        with self._cond:
            return len(self._items)


@dataclass(frozen=True)
class FrameResult:
    """Decoded bits of one matched frame pair, all three lanes."""

    frame_index: int
    payload_digest: int
    bits_plc: np.ndarray
    bits_wireless: np.ndarray
    bits_combined: np.ndarray


@dataclass
class CombinerStats:
    frames: int = 0
    skipped: dict = field(default_factory=lambda: {"plc": 0, "wireless": 0})


def combiner_loop(queue_p: BoundedFrameQueue, queue_w: BoundedFrameQueue,
                  code: ConvCode = ConvCode(), combine=combine_mrc,
                  stats: CombinerStats | None = None):
    """Consume matching frame pairs and yield per-frame decoded lanes.

    Frames are matched by frame_index; when one queue runs ahead (because the
    other overflowed and dropped), the stale frames on the lagging side are
    skipped and counted. Skew beyond the queue depth raises DesyncError.
    """
    if stats is None:
        stats = CombinerStats()
    frame_p = frame_w = None
    while True:
        if frame_p is None:
            frame_p = queue_p.pop()
        if frame_w is None:
            frame_w = queue_w.pop()
        if frame_p is None or frame_w is None:
            return
        skew = frame_p.frame_index - frame_w.frame_index
        if abs(skew) > max(queue_p.depth, queue_w.depth):
            raise DesyncError(f"frame index skew {skew} exceeds queue depth")
        if skew > 0:
            stats.skipped["wireless"] += 1
            frame_w = None
            continue
        if skew < 0:
            stats.skipped["plc"] += 1
            frame_p = None
            continue
        combined = combine(frame_p, frame_w)
        result = FrameResult(
            frame_index=frame_p.frame_index,
            payload_digest=frame_p.payload_digest,
            bits_plc=viterbi_decode(frame_p, code),
            bits_wireless=viterbi_decode(frame_w, code),
            bits_combined=viterbi_decode(combined, code),
        )
        stats.frames += 1
        frame_p = frame_w = None
        yield result
