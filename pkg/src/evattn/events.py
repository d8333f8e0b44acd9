"""Core event representation and time-windowed accumulation.

Events carry pixel coordinates, a microsecond timestamp and an ON/OFF
polarity.  Streams are accumulated into dense two-channel slices (one
count grid per polarity); downstream stages consume either the counts
or the binary "any event here" view.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

# In-memory bulk representation of an event stream.
EVENT_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "u1")])

ON = 1
OFF = 0


class StreamOrderError(ValueError):
    """Raised when timestamps in a stream decrease."""


class GeometryError(ValueError):
    """Raised when two grids or a grid and a stream disagree on geometry."""


@dataclass(frozen=True)
class Event:
    """A single DVS event."""

    x: int
    y: int
    t: int  # microseconds
    polarity: int  # ON (1) or OFF (0)


def events_array(events: Iterable[Event]) -> np.ndarray:
    """Pack an iterable of Event into the bulk structured-array form."""
    evs = list(events)
    arr = np.empty(len(evs), dtype=EVENT_DTYPE)
    for i, e in enumerate(evs):
        arr[i] = (e.t, e.x, e.y, e.polarity)
    return arr


@dataclass(frozen=True)
class EventSlice:
    """Dense accumulation of events over one time window.

    ``pos``/``neg`` hold per-pixel event counts for the ON and OFF
    channels.  ``binary`` is the combined any-event view used by the
    motion-segmentation and saliency stages.
    """

    width: int
    height: int
    window_start: int  # microseconds
    window_end: int
    pos: np.ndarray  # (height, width) counts
    neg: np.ndarray

    def __post_init__(self):
        if self.window_end <= self.window_start:
            raise ValueError("window_end must exceed window_start")
        for g in (self.pos, self.neg):
            if g.shape != (self.height, self.width):
                raise GeometryError(
                    f"channel shape {g.shape} != {(self.height, self.width)}"
                )

    @property
    def binary(self) -> np.ndarray:
        return (self.pos + self.neg) > 0

    @property
    def total_events(self) -> int:
        return int(self.pos.sum() + self.neg.sum())


@dataclass
class AccumulatorDiagnostics:
    """Counts of events rejected during accumulation (out-of-bounds)."""

    rejected: int = 0


@dataclass(frozen=True)
class SuppressionStats:
    input_events: int
    output_events: int

    @property
    def suppression_fraction(self) -> float:
        if self.input_events == 0:
            return 0.0
        return 1.0 - self.output_events / self.input_events


def accumulate(
    stream,
    window_us: int,
    width: int,
    height: int,
    diagnostics: AccumulatorDiagnostics | None = None,
) -> Iterator[EventSlice]:
    """Bin a time-ordered event stream into fixed-width slices.

    Windows are anchored at the first event's timestamp: slice k covers
    ``[t0 + k*window, t0 + (k+1)*window)``.  Empty intermediate windows
    yield all-zero slices.  Out-of-bounds events are dropped and counted
    in ``diagnostics``; decreasing timestamps raise StreamOrderError.

    ``stream`` may be an iterable of Event or a structured array with
    EVENT_DTYPE fields.
    """
    if window_us <= 0:
        raise ValueError("window must be positive")
    if isinstance(stream, np.ndarray):
        yield from _accumulate_array(stream, window_us, width, height, diagnostics)
        return

    t0 = None
    k = 0  # index of the currently open window
    pos = np.zeros((height, width), dtype=np.int32)
    neg = np.zeros((height, width), dtype=np.int32)
    last_t = None
    any_event = False

    def close(idx):
        return EventSlice(
            width,
            height,
            t0 + idx * window_us,
            t0 + (idx + 1) * window_us,
            pos.copy(),
            neg.copy(),
        )

    for ev in stream:
        if last_t is not None and ev.t < last_t:
            raise StreamOrderError(f"timestamp decreased: {ev.t} < {last_t}")
        last_t = ev.t
        if not (0 <= ev.x < width and 0 <= ev.y < height):
            if diagnostics is not None:
                diagnostics.rejected += 1
            continue
        if t0 is None:
            t0 = ev.t
        idx = (ev.t - t0) // window_us
        while idx > k:
            yield close(k)
            pos[:] = 0
            neg[:] = 0
            k += 1
        if ev.polarity == ON:
            pos[ev.y, ev.x] += 1
        else:
            neg[ev.y, ev.x] += 1
        any_event = True

    if any_event:
        yield close(k)


def _accumulate_array(
    events: np.ndarray,
    window_us: int,
    width: int,
    height: int,
    diagnostics: AccumulatorDiagnostics | None,
) -> Iterator[EventSlice]:
    """Vectorized binning for bulk EVENT_DTYPE streams."""
    t = events["t"].astype(np.int64)
    if len(t) > 1 and (np.diff(t) < 0).any():
        bad = int(np.argmax(np.diff(t) < 0)) + 1
        raise StreamOrderError(
            f"timestamp decreased at record {bad}: {t[bad]} < {t[bad - 1]}"
        )
    in_bounds = (events["x"] < width) & (events["y"] < height)
    if diagnostics is not None:
        diagnostics.rejected += int((~in_bounds).sum())
    events = events[in_bounds]
    if len(events) == 0:
        return
    t = events["t"].astype(np.int64)
    t0 = int(t[0])
    idx = (t - t0) // window_us
    n_windows = int(idx[-1]) + 1
    plane = height * width
    key = (
        idx * (2 * plane)
        + events["p"].astype(np.int64) * plane
        + events["y"].astype(np.int64) * width
        + events["x"].astype(np.int64)
    )
    counts = np.bincount(key, minlength=n_windows * 2 * plane).reshape(
        n_windows, 2, height, width
    )
    for k in range(n_windows):
        yield EventSlice(
            width,
            height,
            t0 + k * window_us,
            t0 + (k + 1) * window_us,
            counts[k, 1].astype(np.int32),
            counts[k, 0].astype(np.int32),
        )


def suppression_stats(slice_: EventSlice, mask: np.ndarray) -> SuppressionStats:
    """Count events surviving a binary motion mask.

    ``mask`` is the motion-segmentation output over the same geometry;
    an event survives when its pixel is masked on.
    """
    if mask.shape != (slice_.height, slice_.width):
        raise GeometryError(f"mask shape {mask.shape} != slice geometry")
    m = mask.astype(bool)
    surviving = int(slice_.pos[m].sum() + slice_.neg[m].sum())
    return SuppressionStats(slice_.total_events, surviving)
