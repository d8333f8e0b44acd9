"""Spiking proportional gaze controller and simulated pan-tilt loop.

Pixel errors from the salient point are represented by small LIF
populations with random encoders; linear decoders solved by regularized
least squares read out the proportional command, which is quantized
into integer pan-tilt positions and applied to a simulated plant.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .events import accumulate
from .oms import OmsConfig, OmsStage
from .proto import ProtoConfig, ProtoStage


class ConfigurationError(ValueError):
    """Raised when a controller configuration cannot be fit."""


@dataclass(frozen=True)
class ControllerConfig:
    neurons: int = 50  # per axis
    k_pan: float = 1.0
    k_tilt: float = 1.0
    center: tuple = (64, 64)  # pixels
    error_range: float = 64.0  # pixels, represented interval is +- this
    tau_rc: float = 0.02  # membrane time constant, seconds
    tau_ref: float = 0.002  # absolute refractory, seconds
    tau_syn: float = 0.005  # readout synapse, seconds
    dt: float = 0.0001  # spiking simulation step, seconds
    settle_time: float = 0.2  # seconds simulated per command
    rng_seed: int = 0

    def __post_init__(self):
        if self.neurons < 1:
            raise ValueError("neurons must be >= 1")
        if not (math.isfinite(self.k_pan) and math.isfinite(self.k_tilt)):
            raise ValueError("gains must be finite")


@dataclass
class _Population:
    """LIF tuning curves for one scalar in [-1, 1]."""

    encoders: np.ndarray  # signs, (n,)
    gain: np.ndarray
    bias: np.ndarray

    @classmethod
    def create(cls, config: ControllerConfig, rng) -> "_Population":
        n = config.neurons
        encoders = rng.choice([-1.0, 1.0], size=n)
        intercepts = rng.uniform(-1.0, 1.0, size=n)
        max_rates = rng.uniform(100.0, 200.0, size=n)
        # current J giving the max rate from the inverted LIF rate equation
        z = (1.0 / max_rates - config.tau_ref) / config.tau_rc
        j_max = 1.0 + 1.0 / np.expm1(z)
        gain = (j_max - 1.0) / (1.0 - intercepts)
        bias = 1.0 - gain * intercepts
        return cls(encoders, gain, bias)

    def current(self, x: float) -> np.ndarray:
        return self.gain * (self.encoders * x) + self.bias

    def rates(self, x: float, config: ControllerConfig) -> np.ndarray:
        """Steady-state firing rates, spikes per second."""
        j = self.current(x)
        out = np.zeros_like(j)
        above = j > 1.0
        out[above] = 1.0 / (
            config.tau_ref + config.tau_rc * np.log1p(1.0 / (j[above] - 1.0))
        )
        return out


@dataclass
class DecodedController:
    config: ControllerConfig
    pan: _Population
    tilt: _Population
    w_pan: np.ndarray
    w_tilt: np.ndarray
    residual_pan: float  # RMSE over the error domain, pixels
    residual_tilt: float


def _solve_axis(pop: _Population, config: ControllerConfig, gain_k: float):
    eps = np.linspace(-config.error_range, config.error_range, 201)
    a = np.stack([pop.rates(e / config.error_range, config) for e in eps], axis=1)
    if not np.any(a > 0):
        raise ConfigurationError("all neurons silent over the error domain")
    target = gain_k * eps
    lam = 0.1 * float((a**2).mean())
    gram = a @ a.T + lam * len(eps) * np.eye(len(pop.encoders))
    w = np.linalg.solve(gram, a @ target)
    residual = float(np.sqrt(np.mean((a.T @ w - target) ** 2)))
    return w, residual


def solve_decoders(config: ControllerConfig | None = None) -> DecodedController:
    """Fit linear decoders mapping population rates to K * error."""
    config = config or ControllerConfig()
    rng = np.random.default_rng(config.rng_seed)
    pan = _Population.create(config, rng)
    tilt = _Population.create(config, rng)
    w_pan, r_pan = _solve_axis(pan, config, config.k_pan)
    w_tilt, r_tilt = _solve_axis(tilt, config, config.k_tilt)
    return DecodedController(config, pan, tilt, w_pan, w_tilt, r_pan, r_tilt)


def _simulate_axis(pop: _Population, w: np.ndarray, x: float, config: ControllerConfig):
    """Spiking readout: run the population on constant input, decode.

    Returns the synapse-filtered decoded value averaged over the second
    half of the settle interval.
    """
    dt = config.dt
    steps = max(2, int(round(config.settle_time / dt)))
    j = pop.current(x)
    n = len(j)
    v = np.zeros(n)
    refrac = np.zeros(n)
    filtered = 0.0
    decay = math.exp(-dt / config.tau_syn)
    outputs = []
    half = steps // 2
    emb = math.exp(-dt / config.tau_rc)
    for k in range(steps):
        active = refrac <= 0
        # exact exponential relaxation toward the constant drive
        v[active] = j[active] + (v[active] - j[active]) * emb
        refrac[~active] -= dt
        spikes = v >= 1.0
        v[spikes] = 0.0
        refrac[spikes] = config.tau_ref
        # each spike contributes 1/dt (unit-area impulse) into the synapse
        filtered = filtered * decay + (w @ spikes) * (1.0 - decay) / dt
        if k >= half:
            outputs.append(filtered)
    return float(np.mean(outputs))


def controller_step(controller: DecodedController, point: tuple, state=None):
    """Decode the proportional command for one salient point.

    Returns (cmd_pan, cmd_tilt) in pixel-offset units.
    """
    cfg = controller.config
    ex = point[0] - cfg.center[0]
    ey = point[1] - cfg.center[1]
    cmd_pan = _simulate_axis(
        controller.pan, controller.w_pan, ex / cfg.error_range, cfg
    )
    cmd_tilt = _simulate_axis(
        controller.tilt, controller.w_tilt, ey / cfg.error_range, cfg
    )
    return cmd_pan, cmd_tilt


def to_ptu_units(
    cmd: float,
    alpha_cmd: float = 1.0,
    degrees_per_pos: float = 0.02572,
    pixels_per_degree: float = 1.0,
) -> int:
    """Quantize a pixel-offset command into integer pan-tilt positions.

    The pixel command is converted to degrees, then floored (toward
    minus infinity) after division by 2 * alpha_cmd * degrees_per_pos;
    the factor 2 makes each saccade cover half the remaining error.
    """
    if degrees_per_pos <= 0 or alpha_cmd <= 0:
        raise ValueError("degrees_per_pos and alpha_cmd must be positive")
    degrees = cmd / pixels_per_degree
    return math.floor(degrees / (2.0 * alpha_cmd * degrees_per_pos))


@dataclass(frozen=True)
class PanTiltModel:
    degrees_per_pos: float = 0.02572
    focal_length: float = 1.7  # mm
    sensor_width: float = 5.12  # mm
    settle_steps: int = 1  # first-order lag steps per blocking command
    backlash_sigma: float = 0.0  # additive tilt noise, positions

    def fov_degrees(self) -> float:
        return math.degrees(2.0 * math.atan(self.sensor_width / (2.0 * self.focal_length)))

    def pixels_per_degree(self, image_width: int = 128) -> float:
        return image_width / self.fov_degrees()


def compute_ranges(model: PanTiltModel) -> tuple:
    """Integer (pan_limit, tilt_limit) from the optical field of view."""
    fov = model.fov_degrees()
    limit = int(fov / model.degrees_per_pos) // 2
    return limit, limit


@dataclass
class GazeState:
    pan: int = 0
    tilt: int = 0
    history: list = field(default_factory=list)  # (t_us, pan, tilt)

    def degrees(self, model: PanTiltModel) -> tuple:
        return self.pan * model.degrees_per_pos, self.tilt * model.degrees_per_pos

    def apply(self, u_pan: int, u_tilt: int, model: PanTiltModel, t_us: int = 0, rng=None):
        if model.backlash_sigma > 0 and rng is not None and u_tilt != 0:
            u_tilt += int(round(rng.normal(0.0, model.backlash_sigma)))
        pan_lim, tilt_lim = compute_ranges(model)
        self.pan = int(np.clip(self.pan + u_pan, -pan_lim, pan_lim))
        self.tilt = int(np.clip(self.tilt + u_tilt, -tilt_lim, tilt_lim))
        self.history.append((t_us, self.pan, self.tilt))


def fixational_walk(state: GazeState, n: int, step_scale: int, rng) -> np.ndarray:
    """Seeded micro-saccade sequence: n uniform (pan, tilt) perturbations."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if step_scale == 0:
        return np.zeros((n, 2), dtype=np.int64)
    return rng.integers(-step_scale, step_scale + 1, size=(n, 2))


@dataclass(frozen=True)
class BlinkingSquareScene:
    """A world larger than the view with one square toggling on and off."""

    world_size: int = 512
    square_x: int = 296  # world coordinates of the square center
    square_y: int = 296
    square_side: int = 12
    background: float = 0.5
    blink_period: int = 2  # frames per on/off half-cycle
    view: int = 128

    def frame(self, index: int, gaze_px: tuple) -> np.ndarray:
        """Render the 128 x 128 view at a gaze offset (pixels from world center)."""
        world = np.full((self.world_size, self.world_size), self.background)
        on = (index // self.blink_period) % 2 == 0
        if on:
            h = self.square_side // 2
            y0, x0 = self.square_y - h, self.square_x - h
            world[y0 : y0 + self.square_side, x0 : x0 + self.square_side] = 1.0
        cx = self.world_size // 2 + int(round(gaze_px[0]))
        cy = self.world_size // 2 + int(round(gaze_px[1]))
        half = self.view // 2
        x0 = int(np.clip(cx - half, 0, self.world_size - self.view))
        y0 = int(np.clip(cy - half, 0, self.world_size - self.view))
        return world[y0 : y0 + self.view, x0 : x0 + self.view]

    def target_offset(self, gaze_px: tuple) -> tuple:
        """Square-center offset from the current view center, pixels."""
        cx = self.world_size // 2 + int(round(gaze_px[0]))
        cy = self.world_size // 2 + int(round(gaze_px[1]))
        return self.square_x - cx, self.square_y - cy


@dataclass(frozen=True)
class TrajectoryRow:
    iteration: int
    t_us: int
    p_x: int
    p_y: int
    saliency_max: float
    cmd_pan: float
    cmd_tilt: float
    u_pan: int
    u_tilt: int
    pan_pos: int
    tilt_pos: int
    latency_oms_us: int
    latency_proto_us: int
    latency_control_us: int


TRAJECTORY_HEADER = (
    "iteration,t_us,p_x,p_y,saliency_max,cmd_pan,cmd_tilt,"
    "u_pan,u_tilt,pan_pos,tilt_pos,"
    "latency_oms_us,latency_proto_us,latency_control_us"
)


def closed_loop(
    scene: BlinkingSquareScene,
    iterations: int = 5,
    controller: DecodedController | None = None,
    oms_config: OmsConfig | None = None,
    proto_config: ProtoConfig | None = None,
    model: PanTiltModel | None = None,
    sensor=None,
    alpha_cmd: float = 0.7,
    dead_band_px: float = 3.0,
    frames_per_iteration: int = 8,
    fixation_steps: int = 4,
    fixation_scale: int = 5,
    rng_seed: int = 0,
) -> list:
    """Drive the full attention loop on a simulated scene.

    Each iteration renders a burst of frames at the current gaze, runs
    sensing, motion segmentation and saliency, decodes a proportional
    command, issues the blocking saccade and then a non-blocking
    fixational walk.  Returns the list of TrajectoryRow logs.
    """
    from .stimgen import SensorModel, simulate_events

    controller = controller or solve_decoders()
    oms_config = oms_config or OmsConfig()
    proto_config = proto_config or ProtoConfig()
    model = model or PanTiltModel()
    sensor = sensor or SensorModel()
    rng = np.random.default_rng(rng_seed)
    ppd = model.pixels_per_degree(scene.view)
    frame_rate = 60.0

    state = GazeState()
    oms = OmsStage(oms_config, scene.view, scene.view)
    proto = ProtoStage(proto_config, scene.view, scene.view)
    rows = []
    frame_index = 0
    t_us = 0

    def gaze_px():
        pan_deg, tilt_deg = state.degrees(model)
        return pan_deg * ppd, tilt_deg * ppd

    for it in range(iterations):
        frames = np.stack(
            [
                scene.frame(frame_index + k, gaze_px())
                for k in range(frames_per_iteration)
            ]
        )
        frame_index += frames_per_iteration
        events = simulate_events(frames, sensor, frame_rate)

        t0 = time.perf_counter()
        mask = np.zeros((scene.view, scene.view), dtype=bool)
        pos = np.zeros((scene.view, scene.view))
        neg = np.zeros((scene.view, scene.view))
        any_slice = False
        window_us = int(round(oms_config.update_interval * 1e6))
        for sl in accumulate(events, window_us, scene.view, scene.view):
            omap = oms.step(sl)
            mask |= omap.mask
            pos += np.where(omap.mask, sl.pos, 0)
            neg += np.where(omap.mask, sl.neg, 0)
            any_slice = True
        t1 = time.perf_counter()
        if any_slice and mask.any():
            sal = proto.step(mask, pos, neg)
            point = sal.point
            sal_max = sal.max_value
        else:
            point = (scene.view // 2, scene.view // 2)
            sal_max = 0.0
        t2 = time.perf_counter()
        cmd_pan, cmd_tilt = controller_step(controller, point)
        t3 = time.perf_counter()

        if max(abs(cmd_pan), abs(cmd_tilt)) >= dead_band_px:
            u_pan = to_ptu_units(cmd_pan, alpha_cmd, model.degrees_per_pos, ppd)
            u_tilt = to_ptu_units(cmd_tilt, alpha_cmd, model.degrees_per_pos, ppd)
        else:
            u_pan = u_tilt = 0
        t_us += int(frames_per_iteration / frame_rate * 1e6)
        state.apply(u_pan, u_tilt, model, t_us)  # blocking saccade
        if u_pan or u_tilt:
            # saccadic suppression: integrated activity is stale after the jump
            oms.reset()
            proto.reset()
        for dpan, dtilt in fixational_walk(state, fixation_steps, fixation_scale, rng):
            state.apply(int(dpan), int(dtilt), model, t_us)  # non-blocking jitter

        rows.append(
            TrajectoryRow(
                iteration=it,
                t_us=t_us,
                p_x=point[0],
                p_y=point[1],
                saliency_max=sal_max,
                cmd_pan=cmd_pan,
                cmd_tilt=cmd_tilt,
                u_pan=u_pan,
                u_tilt=u_tilt,
                pan_pos=state.pan,
                tilt_pos=state.tilt,
                latency_oms_us=int((t1 - t0) * 1e6),
                latency_proto_us=int((t2 - t1) * 1e6),
                latency_control_us=int((t3 - t2) * 1e6),
            )
        )
    return rows
