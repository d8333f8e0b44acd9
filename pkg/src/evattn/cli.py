"""Command-line entry point for the event-camera attention pipeline.

Subcommands mirror the experiment surface: ``characterize`` (grating
suite and kernel sweep), ``segment`` (motion masks for an event file),
``saliency`` (saliency maps and salient points), ``bench`` (metric
benchmark over masked sequences) and ``demo`` (closed-loop gaze run).
Every run writes a manifest of the resolved configuration; all
randomness flows from the single ``--seed``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .bench import load_masked_sequence, run_benchmark
from .control import (
    BlinkingSquareScene,
    ControllerConfig,
    TRAJECTORY_HEADER,
    closed_loop,
    solve_decoders,
)
from .events import accumulate, suppression_stats
from .io import FormatError, read_config, read_events, write_config, write_mask_pgm, write_pgm
from .oms import CharacterizationRow, OmsConfig, OmsStage, run_scenario
from .proto import ProtoConfig, ProtoStage
from .snncore import GaussianKernelSpec
from .stimgen import GratingScenario, SensorModel, make_characterization_suite

# Fig. 4a kernel-parameter variants: (sigma_c, sigma_s) at size 8
SIGMA_SWEEP = [(1.0, 4.0), (2.0, 4.0), (3.0, 4.0), (4.0, 4.0), (2.0, 8.0), (4.0, 8.0)]

_CONFIG_KEYS = {
    "alpha": float,
    "tau": float,
    "update_interval": float,
    "input_mode": str,
    "sigma_c": float,
    "sigma_s": float,
    "kernel_size": int,
    "threshold": float,
    "refractory_us": int,
    "noise_rate": float,
    "intensity_floor": float,
    "radius": float,
    "concentration": float,
    "inhibition": float,
    "pyramid_levels": int,
    "proto_tau": float,
    "polarity_split": lambda v: v.lower() in ("1", "true", "on", "yes"),
    "neurons": int,
    "k_pan": float,
    "k_tilt": float,
    "alpha_cmd": float,
    "dead_band_px": float,
    "iterations": int,
    "window_us": int,
    "box_size": int,
}


def _load_overrides(path) -> dict:
    raw = read_config(path)
    out = {}
    for k, v in raw.items():
        if k not in _CONFIG_KEYS:
            raise FormatError(f"unknown config key {k!r}")
        out[k] = _CONFIG_KEYS[k](v)
    return out


def _resolved(args, overrides) -> dict:
    cfg = dict(overrides)
    for k in _CONFIG_KEYS:
        flag = getattr(args, k, None)
        if flag is not None:
            cfg[k] = flag  # flags win over the config file
    return cfg


def _oms_config(cfg: dict) -> OmsConfig:
    size = cfg.get("kernel_size", 8)
    return OmsConfig(
        center=GaussianKernelSpec(size=size, sigma=cfg.get("sigma_c", 1.0)),
        surround=GaussianKernelSpec(size=size, sigma=cfg.get("sigma_s", 4.0)),
        alpha=cfg.get("alpha", OmsConfig.alpha),
        tau=cfg.get("tau", OmsConfig.tau),
        update_interval=cfg.get("update_interval", OmsConfig.update_interval),
        input_mode=cfg.get("input_mode", OmsConfig.input_mode),
    )


def _proto_config(cfg: dict) -> ProtoConfig:
    return ProtoConfig(
        radius=cfg.get("radius", ProtoConfig.radius),
        concentration=cfg.get("concentration", ProtoConfig.concentration),
        inhibition=cfg.get("inhibition", ProtoConfig.inhibition),
        pyramid_levels=cfg.get("pyramid_levels", ProtoConfig.pyramid_levels),
        tau=cfg.get("proto_tau", ProtoConfig.tau),
        polarity_split=cfg.get("polarity_split", ProtoConfig.polarity_split),
    )


def _sensor(cfg: dict, seed: int) -> SensorModel:
    return SensorModel(
        threshold=cfg.get("threshold", SensorModel.threshold),
        refractory_us=cfg.get("refractory_us", SensorModel.refractory_us),
        noise_rate=cfg.get("noise_rate", SensorModel.noise_rate),
        rng_seed=seed,
        intensity_floor=cfg.get("intensity_floor", SensorModel.intensity_floor),
    )


def _write_manifest(out: Path, subcommand: str, seed: int, cfg: dict) -> None:
    values = {"subcommand": subcommand, "seed": seed}
    values.update({k: cfg[k] for k in sorted(cfg)})
    write_config(out / "manifest.txt", values)


_CHAR_HEADER = (
    "experiment,mode,background_sf,background_speed,foreground_sf,"
    "foreground_speed,mfr_mean,mfr_std,isi_mean,isi_std,"
    "excluded_fraction,suppression_fraction,fg_bg_ratio"
)


def cmd_characterize(args, cfg: dict) -> int:
    from .report import characterization_figure, sweep_figure

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    oms_cfg = _oms_config(cfg)
    sensor = _sensor(cfg, args.seed)

    if args.sweep == "sigma":
        size = cfg.get("kernel_size", 8)
        scenario = make_characterization_suite()[0][1]
        labels, mfrs, isis = [], [], []
        lines = ["sigma_c,sigma_s,mfr_mean,mfr_std,isi_mean,isi_std"]
        for sc, ss in SIGMA_SWEEP:
            variant = OmsConfig(
                center=GaussianKernelSpec(size=size, sigma=sc),
                surround=GaussianKernelSpec(size=size, sigma=ss),
                alpha=oms_cfg.alpha,
                tau=oms_cfg.tau,
                update_interval=oms_cfg.update_interval,
                input_mode=oms_cfg.input_mode,
            )
            stats, _, _, _ = run_scenario(scenario, variant, sensor)
            labels.append(f"{sc:g}/{ss:g}")
            mfrs.append(stats.mfr_mean)
            isis.append(np.nan_to_num(stats.isi_mean))
            lines.append(
                f"{sc:g},{ss:g},{stats.mfr_mean:.6f},{stats.mfr_std:.6f},"
                f"{np.nan_to_num(stats.isi_mean):.6f},{np.nan_to_num(stats.isi_std):.6f}"
            )
        (out / "sweep_sigma.csv").write_text("\n".join(lines) + "\n")
        sweep_figure(labels, mfrs, isis, out / "sweep_sigma.png")
        _write_manifest(out, "characterize", args.seed, cfg)
        return 0

    suite = make_characterization_suite()
    rows = []
    lines = [_CHAR_HEADER]
    for name, scenario in suite:
        stats, supp, ratio, masks = run_scenario(
            scenario, oms_cfg, sensor, collect_masks=True
        )
        row = CharacterizationRow(
            experiment=name,
            mode=scenario.mode.value,
            background_sf=scenario.background_sf,
            background_speed=scenario.background_speed,
            foreground_sf=scenario.foreground_sf,
            foreground_speed=scenario.foreground_speed,
            stats=stats,
            suppression_mean=supp,
            fg_bg_ratio=ratio,
        )
        rows.append(row)
        union = np.zeros((scenario.height, scenario.width), dtype=bool)
        for m in masks:
            union |= m
        write_mask_pgm(out / f"{name}_mask.pgm", union)
        st = row.stats
        lines.append(
            f"{row.experiment},{row.mode},{row.background_sf:g},"
            f"{row.background_speed:g},{row.foreground_sf:g},{row.foreground_speed:g},"
            f"{st.mfr_mean:.6f},{st.mfr_std:.6f},"
            f"{np.nan_to_num(st.isi_mean):.6f},{np.nan_to_num(st.isi_std):.6f},"
            f"{1.0 - st.multi_spike_fraction:.6f},{row.suppression_mean:.6f},"
            f"{row.fg_bg_ratio:.6f}"
        )
    (out / "characterization.csv").write_text("\n".join(lines) + "\n")
    from .report import characterization_figure

    characterization_figure(rows, out / "characterization.png")
    _write_manifest(out, "characterize", args.seed, cfg)
    return 0


def cmd_segment(args, cfg: dict) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        events, width, height = read_events(args.input)
    except (FormatError, OSError) as exc:
        print(f"cannot read {args.input}: {exc}", file=sys.stderr)
        return 1
    oms_cfg = _oms_config(cfg)
    window = cfg.get("window_us", int(round(oms_cfg.update_interval * 1e6)))
    stage = OmsStage(oms_cfg, width, height)
    lines = ["window_start_us,window_end_us,input_events,output_events,suppression_fraction"]
    for i, sl in enumerate(accumulate(events, window, width, height)):
        omap = stage.step(sl)
        write_mask_pgm(out / f"mask_{i:04d}.pgm", omap.mask)
        stats = suppression_stats(sl, omap.mask)
        lines.append(
            f"{sl.window_start},{sl.window_end},{stats.input_events},"
            f"{stats.output_events},{stats.suppression_fraction:.6f}"
        )
    (out / "suppression.csv").write_text("\n".join(lines) + "\n")
    _write_manifest(out, "segment", args.seed, cfg)
    return 0


def cmd_saliency(args, cfg: dict) -> int:
    from .report import saliency_figure

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        events, width, height = read_events(args.input)
    except (FormatError, OSError) as exc:
        print(f"cannot read {args.input}: {exc}", file=sys.stderr)
        return 1
    oms_cfg = _oms_config(cfg)
    proto_cfg = _proto_config(cfg)
    window = cfg.get("window_us", int(round(oms_cfg.update_interval * 1e6)))
    oms = OmsStage(oms_cfg, width, height)
    proto = ProtoStage(proto_cfg, width, height)
    points = []
    last = None
    for i, sl in enumerate(accumulate(events, window, width, height)):
        if args.from_oms:
            omap = oms.step(sl)
            sal = proto.step(omap.mask, np.where(omap.mask, sl.pos, 0), np.where(omap.mask, sl.neg, 0))
        else:
            sal = proto.step(sl.binary, sl.pos, sl.neg)
        write_pgm(out / f"saliency_{i:04d}.pgm", sal.grid)
        points.append(f"{sl.window_end} {sal.point[0]} {sal.point[1]} {sal.max_value:.6f}")
        last = sal
    (out / "points.txt").write_text("\n".join(points) + ("\n" if points else ""))
    if last is not None:
        saliency_figure(last.grid, last.point, out / "saliency.png")
    _write_manifest(out, "saliency", args.seed, cfg)
    return 0


def cmd_bench(args, cfg: dict) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    root = Path(args.dataset)
    if not root.is_dir():
        print(
            f"dataset root {root} not found; convert sequences into "
            "<root>/<name>/events.evst plus masks/index.txt first",
            file=sys.stderr,
        )
        return 1
    seq_dirs = sorted(d for d in root.iterdir() if (d / "events.evst").exists())
    if not seq_dirs:
        print(f"no sequences under {root}", file=sys.stderr)
        return 1
    sequences = [load_masked_sequence(d) for d in seq_dirs]
    report = run_benchmark(
        sequences,
        _oms_config(cfg),
        _proto_config(cfg),
        window_us=cfg.get("window_us", 20000),
        box_size=cfg.get("box_size", 8),
    )
    (out / "bench.csv").write_text(report.to_csv())
    (out / "bench.txt").write_text(report.to_table())
    print(report.to_table())
    _write_manifest(out, "bench", args.seed, cfg)
    return 0


def cmd_demo(args, cfg: dict) -> int:
    from .report import trajectory_figure

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    iterations = cfg.get("iterations", 5)
    _write_manifest(out, "demo", args.seed, cfg)
    if iterations == 0:
        return 0
    controller = solve_decoders(
        ControllerConfig(
            neurons=cfg.get("neurons", 50),
            k_pan=cfg.get("k_pan", 1.0),
            k_tilt=cfg.get("k_tilt", 1.0),
            rng_seed=args.seed,
        )
    )
    scene = BlinkingSquareScene()
    if args.scene:
        raw = read_config(args.scene)
        scene = BlinkingSquareScene(**{k: int(v) if k != "background" else float(v) for k, v in raw.items()})
    rows = closed_loop(
        scene,
        iterations=iterations,
        controller=controller,
        oms_config=_oms_config(cfg),
        proto_config=_proto_config(cfg),
        sensor=_sensor(cfg, args.seed),
        alpha_cmd=cfg.get("alpha_cmd", 0.7),
        dead_band_px=cfg.get("dead_band_px", 3.0),
        rng_seed=args.seed,
    )
    lines = [TRAJECTORY_HEADER]
    for r in rows:
        lines.append(
            f"{r.iteration},{r.t_us},{r.p_x},{r.p_y},{r.saliency_max:.6f},"
            f"{r.cmd_pan:.4f},{r.cmd_tilt:.4f},{r.u_pan},{r.u_tilt},"
            f"{r.pan_pos},{r.tilt_pos},"
            f"{r.latency_oms_us},{r.latency_proto_us},{r.latency_control_us}"
        )
    (out / "trajectory.csv").write_text("\n".join(lines) + "\n")
    oms_lat = [r.latency_oms_us for r in rows]
    proto_lat = [r.latency_proto_us for r in rows]
    ctrl_lat = [r.latency_control_us for r in rows]
    summary = [
        "stage,mean_us,std_us",
        f"oms,{np.mean(oms_lat):.1f},{np.std(oms_lat):.1f}",
        f"proto,{np.mean(proto_lat):.1f},{np.std(proto_lat):.1f}",
        f"control,{np.mean(ctrl_lat):.1f},{np.std(ctrl_lat):.1f}",
    ]
    (out / "latency.csv").write_text("\n".join(summary) + "\n")
    trajectory_figure(rows, out / "trajectory.png")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evattn", description="event-camera visual attention pipeline"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("characterize", help="run the grating experiment suite")
    common(p)
    p.add_argument("--sweep", choices=["sigma"], help="kernel-parameter sweep instead")

    p = sub.add_parser("segment", help="motion-segment an event file")
    common(p)
    p.add_argument("input", help="canonical event file")

    p = sub.add_parser("saliency", help="saliency maps for an event file")
    common(p)
    p.add_argument("input", help="canonical event file")
    p.add_argument(
        "--from-oms",
        action="store_true",
        help="run the motion stage first and rank its mask",
    )

    p = sub.add_parser("bench", help="score masked sequences")
    common(p)
    p.add_argument("dataset", help="root directory of converted sequences")

    p = sub.add_parser("demo", help="closed-loop gaze demo")
    common(p)
    p.add_argument("--scene", help="scene config file")
    p.add_argument("--iterations", type=int, default=None)
    return parser


_HANDLERS = {
    "characterize": cmd_characterize,
    "segment": cmd_segment,
    "saliency": cmd_saliency,
    "bench": cmd_bench,
    "demo": cmd_demo,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = _load_overrides(args.config) if args.config else {}
    except (FormatError, OSError) as exc:
        print(f"bad config: {exc}", file=sys.stderr)
        return 1
    cfg = _resolved(args, overrides)
    if getattr(args, "iterations", None) is not None:
        cfg["iterations"] = args.iterations
    try:
        return _HANDLERS[args.command](args, cfg)
    except (FormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
