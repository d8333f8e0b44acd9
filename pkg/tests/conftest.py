"""Shared fixtures: jittered calibration-circle stimuli and peak finding."""

import numpy as np
import pytest

from evattn.stimgen import SensorModel, simulate_events


def render_circle_frames(
    view: int = 176,
    radii=(12, 14, 16, 13, 18, 15),
    n_frames: int = 24,
    jitter: int = 1,
    thickness: float = 1.5,
    seed: int = 0,
):
    """Six circle outlines viewed through a window under a small random walk.

    Returns (frames, centers, offsets) with centers in world coordinates
    and one (ox, oy) window offset per frame.
    """
    world_size = view + 40
    world = np.full((world_size, world_size), 0.4)
    centers = [(48, 64), (112, 64), (176, 64), (48, 152), (112, 152), (176, 152)]
    yy, xx = np.mgrid[0:world_size, 0:world_size]
    for (cx, cy), r in zip(centers, radii):
        world[np.abs(np.hypot(xx - cx, yy - cy) - r) < thickness] = 0.9
    rng = np.random.default_rng(seed)
    walk = np.cumsum(rng.integers(-jitter, jitter + 1, size=(n_frames, 2)), axis=0)
    frames, offsets = [], []
    for k in range(n_frames):
        ox = int(np.clip(20 + walk[k, 0], 0, 40))
        oy = int(np.clip(20 + walk[k, 1], 0, 40))
        offsets.append((ox, oy))
        frames.append(world[oy : oy + view, ox : ox + view])
    return np.stack(frames), centers, offsets


def circle_events(view: int = 176, seed: int = 0):
    """Event stream for the calibration-circle stimulus plus view-frame geometry."""
    frames, centers, offsets = render_circle_frames(view=view, seed=seed)
    events = simulate_events(frames, SensorModel(rng_seed=seed), 60.0)
    ox, oy = offsets[-1]
    view_centers = [(cx - ox, cy - oy) for cx, cy in centers]
    return events, view_centers


def local_maxima(grid: np.ndarray, neighborhood: int = 9, rel_threshold: float = 0.1):
    """(x, y) points that attain the max of their neighborhood and clear a floor."""
    from scipy.ndimage import maximum_filter

    mx = maximum_filter(grid, size=neighborhood)
    peaks = np.argwhere((grid == mx) & (grid > rel_threshold * grid.max()))
    return [(int(x), int(y)) for y, x in peaks]


def count_circle_hits(grid: np.ndarray, view_centers, radius: float = 8.0) -> int:
    peaks = local_maxima(grid)
    if not peaks:
        return 0
    hits = 0
    for cx, cy in view_centers:
        d = min(np.hypot(px - cx, py - cy) for px, py in peaks)
        hits += d <= radius
    return hits


@pytest.fixture(scope="session")
def decoded_controller():
    """One default controller fit shared across control tests."""
    from evattn.control import solve_decoders

    return solve_decoders()
