"""Signal containers, accelerometer magnitude, and fixed-length windowing.

Every channel is carried as a :class:`Signal` (uniform rate, absolute start
time). Windowing slices an aligned multi-channel session into contiguous,
non-overlapping windows; a trailing partial window is discarded, never padded.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientData

DEFAULT_WINDOW_SECONDS = 5.0


@dataclass
class Signal:
    """Uniformly sampled series.

    Args:
        start_time: unix seconds of the first sample.
        rate: sampling rate in Hz, > 0.
        samples: 1-D array of finite values (channel-specific units).
    """

    start_time: float
    rate: float
    samples: np.ndarray

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=float)
        if self.rate <= 0:
            raise ValueError(f"rate must be > 0, got {self.rate}")
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ValueError("samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    @property
    def duration(self) -> float:
        return self.samples.size / self.rate

    @property
    def end_time(self) -> float:
        return self.start_time + self.duration


@dataclass
class TriaxialSignal:
    """Accelerometer stream: rows of (x, y, z) in g at a uniform rate."""

    start_time: float
    rate: float
    samples: np.ndarray

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=float)
        if self.rate <= 0:
            raise ValueError(f"rate must be > 0, got {self.rate}")
        if self.samples.ndim != 2 or self.samples.shape[1] != 3 or self.samples.shape[0] < 1:
            raise ValueError("samples must be a non-empty (N, 3) array")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    @property
    def duration(self) -> float:
        return self.samples.shape[0] / self.rate

    @property
    def end_time(self) -> float:
        return self.start_time + self.duration


@dataclass
class Window:
    """One fixed-length window of an aligned session.

    ``channels`` maps channel name to the sample slice for this window;
    ``rates`` carries each channel's sampling rate so feature code can stay
    unit-aware.
    """

    participant_id: str
    index: int
    start_time: float
    duration: float
    channels: dict[str, np.ndarray] = field(default_factory=dict)
    rates: dict[str, float] = field(default_factory=dict)


def magnitude(acc: TriaxialSignal) -> Signal:
    """Per-sample Euclidean norm of the three acceleration axes."""
    mag = np.sqrt(np.sum(acc.samples * acc.samples, axis=1))
    return Signal(start_time=acc.start_time, rate=acc.rate, samples=mag)


def samples_per_window(rate: float, window_seconds: float) -> int:
    return int(round(rate * window_seconds))


def partition_windows(
    channels: dict[str, Signal],
    participant_id: str,
    window_seconds: float = DEFAULT_WINDOW_SECONDS,
) -> list[Window]:
    """Split an aligned multi-channel session into contiguous windows.

    Window k covers [start + k*w, start + (k+1)*w); the trailing partial
    window is discarded. All channels must already cover the same interval
    (within one sample period per channel).

    Raises:
        InsufficientData: if the session is shorter than one window.
    """
    if not channels:
        raise ValueError("no channels to window")
    if window_seconds <= 0:
        raise ValueError("window_seconds must be > 0")

    sigs = list(channels.values())
    start = sigs[0].start_time
    max_period = max(1.0 / s.rate for s in sigs)
    for s in sigs:
        if abs(s.start_time - start) > max_period:
            raise ValueError("channels are not aligned: start times differ")

    counts = {}
    for name, s in channels.items():
        spw = samples_per_window(s.rate, window_seconds)
        if spw < 1:
            raise ValueError(f"channel {name}: rate too low for {window_seconds}s windows")
        counts[name] = s.samples.size // spw
    n_windows = min(counts.values())
    if n_windows < 1:
        raise InsufficientData(
            f"session shorter than one {window_seconds}s window "
            f"(min duration {min(s.duration for s in sigs):.2f}s)"
        )

    windows = []
    for k in range(n_windows):
        sliced = {}
        for name, s in channels.items():
            spw = samples_per_window(s.rate, window_seconds)
            sliced[name] = s.samples[k * spw:(k + 1) * spw]
        windows.append(
            Window(
                participant_id=participant_id,
                index=k,
                start_time=start + k * window_seconds,
                duration=window_seconds,
                channels=sliced,
                rates={name: s.rate for name, s in channels.items()},
            )
        )
    return windows
