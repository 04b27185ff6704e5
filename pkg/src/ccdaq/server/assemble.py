"""Reassemble controller video chunks into frames.

Chunks carry (byte_offset, total_bytes) so arrival order does not
matter.  A frame finalized with uncovered bytes is flagged incomplete;
the holes stay zero-filled and the affected row indices are listed in
the frame metadata.
"""

from __future__ import annotations

import numpy as np

from ..detector import FrameMeta, RawFrame


class FrameAssembler:
    """Accumulates chunks for a single frame_id."""

    def __init__(self):
        self.frame_id = None
        self.width = None
        self.height = None
        self.total_bytes = None
        self._buf = None
        self._covered = None
        self.bytes_received = 0

    def feed(self, chunk):
        if self._buf is None:
            self.frame_id = chunk.frame_id
            self.width = chunk.width
            self.height = chunk.height
            self.total_bytes = chunk.total_bytes
            self._buf = bytearray(chunk.total_bytes)
            self._covered = np.zeros(chunk.total_bytes, dtype=bool)
        elif chunk.frame_id != self.frame_id:
            raise ValueError(f"chunk for frame {chunk.frame_id} fed to {self.frame_id}")
        lo = chunk.byte_offset
        hi = lo + len(chunk.data)
        self._buf[lo:hi] = chunk.data
        self._covered[lo:hi] = True
        self.bytes_received += len(chunk.data)

    @property
    def started(self):
        return self._buf is not None

    @property
    def complete(self):
        return self._buf is not None and bool(self._covered.all())

    @property
    def percent(self):
        if not self.total_bytes:
            return 0
        return int(100 * int(self._covered.sum()) / self.total_bytes)

    def missing_rows(self):
        row_bytes = self.width * 2
        holes = ~self._covered
        return sorted({int(i) // row_bytes for i in np.flatnonzero(holes)})

    def finalize(self, params, seed, t_start=0.0, t_stop=0.0,
                 detector="", node=None, ramp_rows=0, saturated=0) -> RawFrame:
        if self._buf is None:
            raise ValueError("no chunks received")
        samples = np.frombuffer(bytes(self._buf), dtype=">u2")
        samples = samples.reshape(self.height, self.width).astype(np.uint16)
        missing = self.missing_rows()
        meta = FrameMeta(
            params=params,
            t_start=t_start,
            t_stop=t_stop,
            node=params.node if node is None else node,
            saturated=saturated,
            seed=seed,
            detector=detector,
            incomplete=bool(missing),
            missing_rows=missing,
            ramp_rows=ramp_rows,
        )
        return RawFrame(width=self.width, height=self.height,
                        samples=samples, meta=meta)
