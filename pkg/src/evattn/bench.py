"""Segmentation metrics and the benchmark harness.

IoU, SSIM and detection accuracy score motion masks and salient points
against per-window ground-truth masks; sequences live in the canonical
event format with 1-bit PGM masks and a sidecar timestamp index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from .events import GeometryError, accumulate
from .io import FormatError, read_events, read_pgm


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two binary grids; both empty -> 1."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise GeometryError(f"shape {a.shape} != {b.shape}")
    union = int((a | b).sum())
    if union == 0:
        return 1.0
    return int((a & b).sum()) / union


def _ssim_window(size: int = 7, sigma: float = 1.5) -> np.ndarray:
    c = (size - 1) / 2.0
    idx = np.arange(size) - c
    yy, xx = np.meshgrid(idx, idx, indexing="ij")
    w = np.exp(-(xx**2 + yy**2) / (2.0 * sigma**2))
    return w / w.sum()


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """Mean structural similarity over sliding 7x7 Gaussian windows.

    Standard constants C1 = (0.01 L)^2, C2 = (0.03 L)^2 with L the data
    range; windows are the fully-valid positions (no padding).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise GeometryError(f"shape {a.shape} != {b.shape}")
    win = _ssim_window()
    if a.shape[0] < win.shape[0] or a.shape[1] < win.shape[1]:
        raise GeometryError("grid smaller than the SSIM window")
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2

    def filt(x):
        return fftconvolve(x, win, mode="valid")

    mu_a = filt(a)
    mu_b = filt(b)
    var_a = filt(a * a) - mu_a**2
    var_b = filt(b * b) - mu_b**2
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def box_hits_mask(point: tuple, mask: np.ndarray, box_size: int = 8) -> bool:
    """Does a box_size box centered on (x, y), clipped at borders, touch the mask?"""
    x, y = point
    h, w = mask.shape
    half = box_size // 2
    x0 = max(0, x - half)
    y0 = max(0, y - half)
    x1 = min(w, x - half + box_size)
    y1 = min(h, y - half + box_size)
    if x0 >= x1 or y0 >= y1:
        return False
    return bool(mask[y0:y1, x0:x1].any())


def detection_accuracy(points, masks, box_size: int = 8):
    """Percentage of frames whose salient-point box overlaps the mask.

    ``points`` and ``masks`` are aligned sequences; returns None when
    there are no aligned pairs (absent, not zero).
    """
    pairs = list(zip(points, masks))
    if not pairs:
        return None
    hits = sum(box_hits_mask(p, np.asarray(m, dtype=bool), box_size) for p, m in pairs)
    return 100.0 * hits / len(pairs)


@dataclass(frozen=True)
class MaskedSequence:
    """One benchmark sequence: an event stream plus timed ground-truth masks."""

    name: str
    width: int
    height: int
    events: np.ndarray
    mask_times: np.ndarray  # microseconds, strictly increasing
    masks: list  # binary grids

    def __post_init__(self):
        for m in self.masks:
            if m.shape != (self.height, self.width):
                raise GeometryError("mask geometry does not match stream")
        if len(self.mask_times) != len(self.masks):
            raise ValueError("one timestamp per mask required")
        if len(self.mask_times) > 1 and not (np.diff(self.mask_times) > 0).all():
            raise ValueError("mask timestamps must be strictly increasing")


def load_masked_sequence(directory, name: str | None = None) -> MaskedSequence:
    """Load a sequence directory: events.evst + masks/ + masks/index.txt.

    The index file holds one `t_us filename` pair per line; masks are
    1-bit PGMs relative to the masks directory.
    """
    directory = Path(directory)
    events_path = directory / "events.evst"
    if not events_path.exists():
        raise FormatError(f"no events.evst in {directory}")
    events, width, height = read_events(events_path)
    index = directory / "masks" / "index.txt"
    times = []
    masks = []
    if index.exists():
        for line in index.read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            t_str, fname = line.split(maxsplit=1)
            times.append(int(t_str))
            masks.append(read_pgm(directory / "masks" / fname) > 0)
    return MaskedSequence(
        name or directory.name,
        width,
        height,
        events,
        np.asarray(times, dtype=np.int64),
        masks,
    )


def align_mask(window_start: int, window_end: int, times: np.ndarray):
    """Index of the mask nearest the window end, within half a window."""
    if len(times) == 0:
        return None
    target = window_end
    i = int(np.argmin(np.abs(times.astype(np.int64) - target)))
    half = (window_end - window_start) / 2
    if abs(int(times[i]) - target) <= half:
        return i
    return None


@dataclass
class SequenceScore:
    name: str
    iou_values: list = field(default_factory=list)
    ssim_values: list = field(default_factory=list)
    hits: list = field(default_factory=list)  # booleans, one per scored window

    @property
    def frames(self) -> int:
        return len(self.iou_values)


@dataclass
class BenchReport:
    """Aggregated per-sequence benchmark scores, Fig.-7-style."""

    scores: list

    def rows(self):
        out = []
        for s in self.scores:
            if s.frames == 0:
                out.append((s.name, math.nan, math.nan, math.nan, math.nan, None, 0))
                continue
            ious = 100.0 * np.asarray(s.iou_values)
            ssims = 100.0 * np.asarray(s.ssim_values)
            acc = 100.0 * np.mean(s.hits) if s.hits else None
            out.append(
                (
                    s.name,
                    float(ious.mean()),
                    float(ious.std()),
                    float(ssims.mean()),
                    float(ssims.std()),
                    acc,
                    s.frames,
                )
            )
        return out

    def to_csv(self) -> str:
        lines = ["sequence,iou_mean,iou_std,ssim_mean,ssim_std,accuracy,frames"]
        for name, im, istd, sm, sstd, acc, n in self.rows():
            acc_s = "" if acc is None else f"{acc:.4f}"
            lines.append(
                f"{name},{im:.4f},{istd:.4f},{sm:.4f},{sstd:.4f},{acc_s},{n}"
            )
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        lines = [
            f"{'sequence':<16}{'IoU %':>12}{'SSIM %':>12}{'accuracy %':>12}{'frames':>8}"
        ]
        for name, im, istd, sm, sstd, acc, n in self.rows():
            acc_s = "-" if acc is None else f"{acc:.1f}"
            lines.append(
                f"{name:<16}{im:>7.2f}±{istd:<4.2f}{sm:>7.2f}±{sstd:<4.2f}{acc_s:>12}{n:>8}"
            )
        return "\n".join(lines) + "\n"


def run_benchmark(
    sequences,
    oms_config=None,
    proto_config=None,
    window_us: int = 20000,
    box_size: int = 8,
    closing: bool = False,
) -> BenchReport:
    """Score OMS masks (IoU, SSIM) and salient points (accuracy).

    ``closing`` applies a morphological closing to the OMS mask before
    scoring (the edge-like mask versus filled ground truth is an open
    point; both raw and closed numbers are obtainable).
    """
    from scipy.ndimage import binary_closing

    from .oms import OmsConfig, OmsStage
    from .proto import ProtoConfig, ProtoStage

    oms_config = oms_config or OmsConfig()
    proto_config = proto_config or ProtoConfig()
    scores = []
    for seq in sequences:
        score = SequenceScore(seq.name)
        try:
            stage = OmsStage(oms_config, seq.width, seq.height)
            proto = ProtoStage(proto_config, seq.width, seq.height)
            for sl in accumulate(seq.events, window_us, seq.width, seq.height):
                idx = align_mask(sl.window_start, sl.window_end, seq.mask_times)
                if idx is None:
                    stage.step(sl)
                    continue
                omap = stage.step(sl)
                mask = omap.mask
                if closing:
                    mask = binary_closing(mask, np.ones((3, 3), dtype=bool))
                gt = seq.masks[idx]
                score.iou_values.append(iou(mask, gt))
                score.ssim_values.append(
                    ssim(mask.astype(float), gt.astype(float))
                )
                sal = proto.step(omap.mask, sl.pos, sl.neg)
                score.hits.append(box_hits_mask(sal.point, gt, box_size))
        except (FormatError, ValueError, GeometryError) as exc:
            # per-sequence failures are reported, the run continues
            score = SequenceScore(f"{seq.name} [failed: {exc}]")
        scores.append(score)
    return BenchReport(scores)
