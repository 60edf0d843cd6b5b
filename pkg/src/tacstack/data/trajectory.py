"""Trajectory containers shared by the simulator, pipeline, and runtime."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataValidationError

STREAMS = ("vision", "tactile", "proprio", "action")


@dataclass
class Stream:
    """One asynchronous sensor stream: timestamps plus stacked payloads."""

    times: np.ndarray          # (N,) seconds, strictly increasing
    values: np.ndarray         # (N, ...) float32 payloads

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float32)
        if len(self.times) != len(self.values):
            raise DataValidationError("stream timestamp/payload length mismatch")
        if len(self.times) == 0:
            raise DataValidationError("empty stream")
        if np.any(np.diff(self.times) <= 0):
            raise DataValidationError("stream timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)


@dataclass
class RawTrajectory:
    """Native-rate recording of one episode.

    vision: (N, H, W); tactile: (N, rows, cols, 3); proprio: (N, 6) holding
    (x, z, g, dx, dz, dg) per fast tick; action: (N, 3) relative actions at
    vision rate. Contact labels (per tactile frame) are filled by the
    pipeline; -1 marks unlabeled.
    """

    vision: Stream
    tactile: Stream
    proprio: Stream
    action: Stream
    meta: dict = field(default_factory=dict)
    labels: np.ndarray | None = None

    def streams(self) -> dict[str, Stream]:
        return {name: getattr(self, name) for name in STREAMS}

    def time_span(self) -> tuple[float, float]:
        return float(self.vision.times[0]), float(self.vision.times[-1])


@dataclass
class AlignedTrajectory:
    """Tick-synchronized view at vision rate.

    Per tick: 1 image, s_t tactile frames, s_t proprio samples, 1 action.
    Source timestamps are kept per element for residual audits; contact
    labels are per tactile frame.
    """

    images: np.ndarray          # (T, H, W)
    tactile: np.ndarray         # (T, s_t, rows, cols, 3)
    proprio: np.ndarray         # (T, s_t, 6)
    actions: np.ndarray         # (T, 3)
    tick_times: np.ndarray      # (T,)
    src_times: dict             # stream -> source timestamp array
    residuals: dict             # stream -> |aligned - source| array
    labels: np.ndarray | None = None   # (T, s_t) in {0, 1}
    meta: dict = field(default_factory=dict)

    @property
    def n_ticks(self) -> int:
        return len(self.tick_times)

    @property
    def s_t(self) -> int:
        return self.tactile.shape[1]

    def ee_positions(self) -> np.ndarray:
        """Per-tick (x, z) of the end effector (last proprio sample per tick)."""
        return self.proprio[:, -1, 0:2].astype(np.float64)
