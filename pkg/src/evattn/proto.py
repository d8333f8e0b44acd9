"""Proto-object saliency: border ownership, grouping and the salient point.

Binary event maps are expanded into a max-pooled pyramid, correlated
with oriented von Mises ring kernels into border-ownership responses,
regrouped across orientations into closed-contour evidence, and summed
across scales into a saliency map whose argmax is the saccade target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .events import EventSlice, GeometryError
from .snncore import FftKernelBank, LifGrid, VonMisesKernelSpec, von_mises_kernel


@dataclass(frozen=True)
class ProtoConfig:
    radius: float = 8.0  # ring radius R0, pixels
    concentration: float = 0.2
    inhibition: float = 3.0  # cross-orientation inhibition weight
    orientations: tuple = (0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4)
    pyramid_levels: int = 3
    tau: float = 0.1  # seconds, border-ownership integration
    polarity_split: bool = True  # correlate ON/OFF channels separately

    def __post_init__(self):
        if self.inhibition < 0:
            raise ValueError("inhibition must be non-negative")
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        angles = [a % math.pi for a in self.orientations]
        for i, a in enumerate(angles):
            for b in angles[:i]:
                if math.isclose(a, b, abs_tol=1e-9):
                    raise ValueError("orientations must be distinct modulo pi")


@dataclass(frozen=True)
class BorderOwnershipResponse:
    """Rectified border-ownership activity, one plane per orientation.

    ``b1[i]`` and ``b2[i]`` are the two ownership polarities for
    ``orientations[i]``; both are zero wherever the gating map is zero.
    """

    orientations: tuple
    b1: np.ndarray  # (n_orientations, height, width), >= 0
    b2: np.ndarray


@dataclass(frozen=True)
class SaliencyMap:
    grid: np.ndarray  # non-negative, input resolution
    point: tuple  # (x, y) of the maximum
    max_value: float


def pyramid(grid: np.ndarray, levels: int) -> list:
    """Max-pooling pyramid: level 0 is the input, each next level 2x coarser."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    grid = np.asarray(grid)
    if min(grid.shape) < 2 ** (levels - 1):
        raise GeometryError("image smaller than the coarsest pyramid level")
    out = [grid]
    for _ in range(levels - 1):
        g = out[-1]
        h, w = g.shape[0] // 2 * 2, g.shape[1] // 2 * 2
        g = g[:h, :w]
        out.append(g.reshape(h // 2, 2, w // 2, 2).max(axis=(1, 3)))
    return out


def _kernel_bank(config: ProtoConfig) -> FftKernelBank:
    kernels = {}
    for i, theta in enumerate(config.orientations):
        for tag, ang in (("t", theta), ("o", theta + math.pi)):
            spec = VonMisesKernelSpec(
                radius=config.radius, concentration=config.concentration, theta=ang
            )
            kernels[(i, tag)] = von_mises_kernel(spec)
    return FftKernelBank(kernels)


def border_ownership(
    config: ProtoConfig,
    v: np.ndarray,
    v_pos: np.ndarray,
    v_neg: np.ndarray,
    bank: FftKernelBank | None = None,
) -> BorderOwnershipResponse:
    """Oriented border-ownership responses of one binary event map.

    For each orientation theta, with VM_t the ring kernel at theta and
    VM_o its opposite (theta + pi):

        B1 = relu(V * (Vp.VM_t - w Vn.VM_o + Vn.VM_t - w Vp.VM_o))
        B2 = relu(V * (Vp.VM_o - w Vn.VM_t + Vn.VM_o - w Vp.VM_t))

    (. = correlation, * = element-wise gate).  The expression is linear
    in the polarity channels, so with polarity_split off the combined
    map Vp+Vn is correlated once per kernel instead; results agree to
    round-off.
    """
    v = np.asarray(v, dtype=bool)
    if v.shape != v_pos.shape or v.shape != v_neg.shape:
        raise GeometryError("gating map and polarity channels disagree")
    if bank is None:
        bank = _kernel_bank(config)
    n = len(config.orientations)
    b1 = np.empty((n,) + v.shape)
    b2 = np.empty((n,) + v.shape)
    w = config.inhibition
    if config.polarity_split:
        tp = bank.transform(v_pos.astype(np.float64))
        tn = bank.transform(v_neg.astype(np.float64))
        for i in range(n):
            ct = bank.correlate(tp, (i, "t")) + bank.correlate(tn, (i, "t"))
            co = bank.correlate(tp, (i, "o")) + bank.correlate(tn, (i, "o"))
            b1[i] = ct - w * co
            b2[i] = co - w * ct
    else:
        ts = bank.transform(v_pos.astype(np.float64) + v_neg.astype(np.float64))
        for i in range(n):
            ct = bank.correlate(ts, (i, "t"))
            co = bank.correlate(ts, (i, "o"))
            b1[i] = ct - w * co
            b2[i] = co - w * ct
    gate = v.astype(np.float64)
    np.maximum(b1 * gate, 0.0, out=b1)
    np.maximum(b2 * gate, 0.0, out=b2)
    return BorderOwnershipResponse(tuple(config.orientations), b1, b2)


def _upsample(grid: np.ndarray, shape: tuple) -> np.ndarray:
    """Nearest-neighbor upsample to the target shape."""
    ry = shape[0] // grid.shape[0]
    rx = shape[1] // grid.shape[1]
    up = np.repeat(np.repeat(grid, ry, axis=0), rx, axis=1)
    out = np.zeros(shape)
    out[: up.shape[0], : up.shape[1]] = up
    return out


def _argmax_point(grid: np.ndarray) -> tuple:
    """Deterministic argmax: lowest row, then lowest column, as (x, y)."""
    flat = int(np.argmax(grid))
    y, x = divmod(flat, grid.shape[1])
    return (x, y)


def grouping(
    config: ProtoConfig,
    responses: list,
    shape: tuple,
    bank: FftKernelBank | None = None,
) -> SaliencyMap:
    """Pool border-ownership responses into the final saliency map.

    Per level: G1 sums each B1 plane correlated with its own kernel, G1*
    with the opposite kernel (G2/G2* analogously from B2); the level's
    saliency is the rectified (G1 - G1*) + (G2 - G2*).  Levels are
    upsampled to the input resolution and summed; the argmax is the
    salient point, defaulting to the image center on an all-zero map.
    """
    if len(responses) != config.pyramid_levels:
        raise ValueError("one response set per pyramid level required")
    if bank is None:
        bank = _kernel_bank(config)
    total = np.zeros(shape)
    for resp in responses:
        if len(resp.orientations) != len(config.orientations):
            raise ValueError("response orientation count mismatch")
        level_shape = resp.b1.shape[1:]
        g = np.zeros(level_shape)
        for i in range(len(config.orientations)):
            t1 = bank.transform(resp.b1[i])
            t2 = bank.transform(resp.b2[i])
            # grouping is a convolution with VM: with the correlation
            # primitive that means the point-reflected kernel, which for
            # the ring family is exactly the opposite orientation, so
            # border votes land toward the owned (figure) side
            g += bank.correlate(t1, (i, "o")) - bank.correlate(t1, (i, "t"))
            g += bank.correlate(t2, (i, "t")) - bank.correlate(t2, (i, "o"))
        np.maximum(g, 0.0, out=g)
        total += g if level_shape == shape else _upsample(g, shape)
    peak = float(total.max())
    if peak > 0:
        point = _argmax_point(total)
    else:
        point = (shape[1] // 2, shape[0] // 2)
    return SaliencyMap(total, point, peak)


class ProtoStage:
    """Stateful saliency stage: pyramid, border ownership, grouping.

    Border-ownership activity is leaky-integrated over steps (tau from
    the config); grouping reads the integrated membranes instantly.
    """

    def __init__(self, config: ProtoConfig, width: int, height: int):
        self.config = config
        self.width = width
        self.height = height
        self.bank = _kernel_bank(config)
        self._membranes: dict = {}

    def reset(self):
        """Clear integrated activity (saccadic suppression)."""
        self._membranes.clear()

    def _integrate(self, level: int, resp: BorderOwnershipResponse, dt: float):
        key = level
        if key not in self._membranes:
            shape = resp.b1.shape
            self._membranes[key] = (
                LifGrid(shape, self.config.tau, threshold=None),
                LifGrid(shape, self.config.tau, threshold=None),
            )
        m1, m2 = self._membranes[key]
        m1.step(resp.b1, dt)
        m2.step(resp.b2, dt)
        return BorderOwnershipResponse(resp.orientations, m1.v.copy(), m2.v.copy())

    def step(self, v, v_pos=None, v_neg=None, dt: float = 0.02) -> SaliencyMap:
        v = np.asarray(v, dtype=bool)
        if v.shape != (self.height, self.width):
            raise GeometryError("input geometry does not match stage")
        if v_pos is None or v_neg is None:
            v_pos, v_neg = v.astype(np.float64), np.zeros_like(v, dtype=np.float64)
        levels_v = pyramid(v, self.config.pyramid_levels)
        levels_p = pyramid(np.asarray(v_pos, dtype=np.float64), self.config.pyramid_levels)
        levels_n = pyramid(np.asarray(v_neg, dtype=np.float64), self.config.pyramid_levels)
        responses = []
        for lvl, (lv, lp, ln) in enumerate(zip(levels_v, levels_p, levels_n)):
            resp = border_ownership(self.config, lv, lp, ln, self.bank)
            responses.append(self._integrate(lvl, resp, dt))
        return grouping(self.config, responses, (self.height, self.width), self.bank)


def saliency_from_events(inp, config: ProtoConfig | None = None) -> SaliencyMap:
    """One-shot saliency of an event slice, OMS map or binary grid."""
    config = config or ProtoConfig()
    if isinstance(inp, EventSlice):
        v, vp, vn = inp.binary, inp.pos, inp.neg
    elif hasattr(inp, "mask"):
        v, vp, vn = inp.mask, None, None
    else:
        v, vp, vn = np.asarray(inp, dtype=bool), None, None
    stage = ProtoStage(config, v.shape[1], v.shape[0])
    return stage.step(v, vp, vn)
