"""Synthetic grating stimuli and a simplified event-camera sensor.

Scenes are sinusoidal gratings: a full-field background layer and an
optional centered disk carrying its own grating.  Intensity frames are
converted to events by a threshold-crossing sensor: each pixel's log
intensity is tracked against a grid of levels spaced ``th`` apart, and
every level crossed emits one event, timestamped by linear
interpolation inside the inter-frame interval.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .events import EVENT_DTYPE
from .io import read_config

LOG_EPS = 0.02  # intensity floor before taking logs


class Mode(enum.Enum):
    EYE_ONLY = "eye_only"  # background grating only, full field
    OBJECT_ONLY = "object_only"  # static background, moving disk
    EYE_AND_OBJECT = "eye_and_object"


@dataclass(frozen=True)
class GratingScenario:
    width: int = 128
    height: int = 128
    background_sf: float = 0.3  # cycles per image width
    background_speed: float = 0.01  # cycles per frame
    foreground_sf: float = 3.0
    foreground_speed: float = 0.09
    disk_radius: float | None = None  # pixels; default width / 4
    mode: Mode = Mode.EYE_AND_OBJECT
    frame_rate: float = 60.0
    duration: float = 4.0  # seconds

    def __post_init__(self):
        if self.background_sf <= 0 or self.foreground_sf <= 0:
            raise ValueError("spatial frequencies must be positive")
        if self.background_speed < 0 or self.foreground_speed < 0:
            raise ValueError("speeds must be non-negative")

    @property
    def radius(self) -> float:
        return self.disk_radius if self.disk_radius is not None else self.width / 4

    @property
    def n_frames(self) -> int:
        return int(round(self.duration * self.frame_rate))

    def disk_mask(self) -> np.ndarray:
        yy, xx = np.mgrid[0 : self.height, 0 : self.width]
        cx, cy = (self.width - 1) / 2, (self.height - 1) / 2
        return (xx - cx) ** 2 + (yy - cy) ** 2 <= self.radius**2


@dataclass(frozen=True)
class SensorModel:
    threshold: float = 0.1  # log-intensity step per event
    refractory_us: int = 100
    noise_rate: float = 0.01  # spurious events per pixel per second
    rng_seed: int = 0
    intensity_floor: float = LOG_EPS  # added to I before the log

    def __post_init__(self):
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if self.refractory_us < 0 or self.noise_rate < 0:
            raise ValueError("refractory and noise_rate must be non-negative")


def _grating(width, height, sf, speed, frame_index):
    x = np.arange(width)
    row = 0.5 + 0.5 * np.sin(2 * np.pi * (sf * x / width - speed * frame_index))
    return np.broadcast_to(row, (height, width)).copy()


def render_frame(scenario: GratingScenario, frame_index: int) -> np.ndarray:
    """Render one intensity frame in [0, 1]."""
    if frame_index < 0:
        raise ValueError("frame_index must be >= 0")
    s = scenario
    bg_speed = 0.0 if s.mode is Mode.OBJECT_ONLY else s.background_speed
    frame = _grating(s.width, s.height, s.background_sf, bg_speed, frame_index)
    if s.mode is not Mode.EYE_ONLY:
        fg = _grating(s.width, s.height, s.foreground_sf, s.foreground_speed, frame_index)
        mask = s.disk_mask()
        frame[mask] = fg[mask]
    return frame


def render_frames(scenario: GratingScenario) -> np.ndarray:
    return np.stack([render_frame(scenario, i) for i in range(scenario.n_frames)])


def simulate_events(
    frames: np.ndarray, model: SensorModel, frame_rate: float
) -> np.ndarray:
    """Convert an intensity frame sequence into a sorted event stream.

    Per pixel, the quantized log-intensity level floor(log(I+eps)/th)
    is tracked; each level crossed between consecutive frames emits one
    event (ON upward, OFF downward).  Events at the same pixel closer
    than the refractory period are dropped.  Noise is a seeded
    per-pixel Poisson process with random polarity.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 3 or frames.shape[0] < 2:
        raise ValueError("need >= 2 frames of identical geometry")
    n, height, width = frames.shape
    dt_us = 1e6 / frame_rate
    th = model.threshold

    log_frames = np.log(frames + model.intensity_floor)
    level = np.floor(log_frames[0] / th).astype(np.int64)

    ts, xs, ys, ps = [], [], [], []
    for k in range(1, n):
        prev, cur = log_frames[k - 1], log_frames[k]
        new_level = np.floor(cur / th).astype(np.int64)
        d = new_level - level
        t0 = (k - 1) * dt_us
        yy, xx = np.nonzero(d)
        if len(yy):
            m = np.abs(d[yy, xx])
            sign = np.repeat(np.sign(d[yy, xx]), m)
            base = np.repeat(level[yy, xx], m)
            # i-th boundary crossed: (level+i)*th upward, (level-i+1)*th downward
            starts = np.cumsum(m) - m
            i = np.arange(int(m.sum())) - np.repeat(starts, m) + 1
            boundary = (base + sign * i + (sign < 0)) * th
            p0 = np.repeat(prev[yy, xx], m)
            denom = np.repeat(cur[yy, xx], m) - p0
            frac = np.clip((boundary - p0) / denom, 0.0, 1.0)
            ts.append(t0 + frac * dt_us)
            xs.append(np.repeat(xx, m))
            ys.append(np.repeat(yy, m))
            ps.append((sign > 0).astype(np.uint8))
        level = new_level

    if ts:
        t = np.concatenate(ts)
        x = np.concatenate(xs).astype(np.uint16)
        y = np.concatenate(ys).astype(np.uint16)
        p = np.concatenate(ps)
    else:
        t = np.empty(0)
        x = np.empty(0, dtype=np.uint16)
        y = np.empty(0, dtype=np.uint16)
        p = np.empty(0, dtype=np.uint8)

    if model.noise_rate > 0:
        rng = np.random.default_rng(model.rng_seed)
        total_us = (n - 1) * dt_us
        counts = rng.poisson(model.noise_rate * total_us / 1e6, size=(height, width))
        m = int(counts.sum())
        if m:
            yy, xx = np.nonzero(counts)
            reps = counts[yy, xx]
            t = np.concatenate([t, rng.uniform(0, total_us, m)])
            x = np.concatenate([x, np.repeat(xx, reps).astype(np.uint16)])
            y = np.concatenate([y, np.repeat(yy, reps).astype(np.uint16)])
            p = np.concatenate([p, rng.integers(0, 2, m, dtype=np.uint8)])

    t_us = np.floor(t).astype(np.uint64)
    order = np.lexsort((p, x, y, t_us))
    events = np.empty(len(t_us), dtype=EVENT_DTYPE)
    events["t"] = t_us[order]
    events["x"] = x[order]
    events["y"] = y[order]
    events["p"] = p[order]

    if model.refractory_us > 0 and len(events) > 1:
        events = _apply_refractory(events, model.refractory_us)
    return events


def _apply_refractory(events: np.ndarray, ref_us: int) -> np.ndarray:
    pix = events["y"].astype(np.int64) * 65536 + events["x"]
    order = np.lexsort((events["t"], pix))
    spix, st = pix[order], events["t"][order].astype(np.int64)
    close = np.zeros(len(events), dtype=bool)
    close[1:] = (np.diff(spix) == 0) & (np.diff(st) < ref_us)
    if not close.any():
        return events
    # greedy per-pixel thinning, advanced rank by rank across all pixels
    keep_sorted = np.ones(len(events), dtype=bool)
    starts = np.nonzero(np.r_[True, np.diff(spix) != 0])[0]
    counts = np.diff(np.r_[starts, len(spix)])
    last = st[starts]  # the first event of each pixel always survives
    j = 1
    active = counts > j
    while active.any():
        idx = starts[active] + j
        tj = st[idx]
        ok = tj - last[active] >= ref_us
        keep_sorted[idx[~ok]] = False
        upd = last[active]
        upd[ok] = tj[ok]
        last[active] = upd
        j += 1
        active = counts > j
    keep = np.zeros(len(events), dtype=bool)
    keep[order] = keep_sorted
    return events[keep]


def make_characterization_suite(
    width: int = 128, height: int = 128
) -> list[tuple[str, GratingScenario]]:
    """The 16 grating parameterizations of the motion-stage study.

    1-3 contrast eye+object / eye-only / object-only; 4-9 sweep spatial
    frequency; 10-16 sweep speeds with the background at least as fast
    as the foreground (the expected failure regime).
    """

    def scen(bsf, bs, fsf, fs, mode=Mode.EYE_AND_OBJECT):
        return GratingScenario(
            width=width,
            height=height,
            background_sf=bsf,
            background_speed=bs,
            foreground_sf=fsf,
            foreground_speed=fs,
            mode=mode,
        )

    suite = [
        ("exp01", scen(0.3, 0.01, 3, 0.09)),
        ("exp02", scen(0.3, 0.01, 3, 0.0, Mode.EYE_ONLY)),
        ("exp03", scen(0.3, 0.0, 3, 0.09, Mode.OBJECT_ONLY)),
        ("exp04", scen(0.2, 0.01, 3, 0.09)),
        ("exp05", scen(1, 0.01, 3, 0.09)),
        ("exp06", scen(4, 0.01, 3, 0.09)),
        ("exp07", scen(3, 0.01, 0.2, 0.09)),
        ("exp08", scen(3, 0.01, 1, 0.09)),
        ("exp09", scen(3, 0.01, 4, 0.09)),
    ]
    speed_pairs = [
        (0.01, 0.01),
        (0.03, 0.01),
        (0.05, 0.01),
        (0.09, 0.01),
        (0.05, 0.05),
        (0.09, 0.05),
        (0.13, 0.05),
    ]
    for i, (sb, sf_speed) in enumerate(speed_pairs, start=10):
        suite.append((f"exp{i:02d}", scen(0.3, sb, 3, sf_speed)))
    return suite


_SCENARIO_KEYS = {
    "width": int,
    "height": int,
    "background_sf": float,
    "background_speed": float,
    "foreground_sf": float,
    "foreground_speed": float,
    "disk_radius": float,
    "mode": lambda v: Mode(v),
    "frame_rate": float,
    "duration": float,
}


def scenario_from_config(path) -> GratingScenario:
    """Load a GratingScenario from a flat key/value config file."""
    raw = read_config(path)
    kwargs = {}
    for k, v in raw.items():
        if k not in _SCENARIO_KEYS:
            raise ValueError(f"unknown scenario key {k!r}")
        kwargs[k] = _SCENARIO_KEYS[k](v)
    return GratingScenario(**kwargs)
