"""Command-line surface: detect, generate, calibrate, simulate, eval.

Every command prints a machine-readable `summary ...` key=value line as its
final stdout line and exits 0 only when its primary action succeeded.
Output files are deterministic for identical inputs and seed; timing
information is printed to stdout only, never written to files.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import scenegen
from .config import ConfigError, load_config, load_scenario
from .imaging import PgmDecodeError, load_pgm, save_pgm
from .pipeline import FrameProcessor
from .pose import CalibrationRangeError, estimate_pose
from .scenegen import CameraModel, build_landmark, render_frame, synthesize_calibration
from .sim import run as run_scenario
from .sim import write_trace


def _fmt(value: float | None, digits: int = 4) -> str:
    return "" if value is None else f"{value:.{digits}f}"


def cmd_detect(args: argparse.Namespace) -> int:
    """Process PGM frames in order with a persistent threshold machine."""
    try:
        config = load_config(args.config)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        print("summary command=detect status=config_error")
        return 2
    processor = FrameProcessor(config.settings, config.calibration)

    out_rows = ["frame,path,status,threshold,codes,l_pmax,partial,x_w,y_w,h,theta_w"]
    detected = 0
    errors = 0
    for i, path in enumerate(args.frames):
        try:
            img = load_pgm(Path(path).read_bytes())
        except (OSError, PgmDecodeError) as err:
            errors += 1
            print(f"frame {i} {path}: error {err}")
            out_rows.append(f"{i},{path},error,,,,,,,,")
            continue
        report = processor.process(img, alpha=args.alpha)
        pose = report.pose
        codes = "".join(str(c) for c in report.codes)
        if report.status == "detected":
            detected += 1
        print(
            f"frame {i} {path}: {report.status} t={report.threshold_used}"
            f" codes={codes or '-'} l_pmax={_fmt(report.l_pmax)}"
            f" pose=({_fmt(pose.x_w) if pose else ''},{_fmt(pose.y_w) if pose else ''},"
            f"{_fmt(pose.h) if pose else ''},{_fmt(pose.theta_w) if pose else ''})"
            f" {report.elapsed_ms:.1f} ms"
        )
        out_rows.append(
            ",".join(
                [
                    str(i),
                    str(path),
                    report.status,
                    str(report.threshold_used),
                    codes,
                    _fmt(report.l_pmax),
                    str(int(report.partial)),
                    _fmt(pose.x_w) if pose else "",
                    _fmt(pose.y_w) if pose else "",
                    _fmt(pose.h) if pose else "",
                    _fmt(pose.theta_w) if pose else "",
                ]
            )
        )
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "detect_report.csv").write_text("\n".join(out_rows) + "\n")
    print(
        f"summary command=detect frames={len(args.frames)} detected={detected} "
        f"errors={errors}"
    )
    return 0


def _gt_sidecar(gt: scenegen.GroundTruth, true_h: float | None) -> str:
    lines = []
    if true_h is not None:
        lines.append(f"# height {true_h:.6f}")
    if gt.empty:
        lines.append("# landmark none")
    else:
        lines.append(f"# center {gt.center_px[0]:.4f} {gt.center_px[1]:.4f}")
        lines.append(f"# l_pmax {gt.l_pmax:.4f}")
        lines.append(f"# e_o {gt.e_o:.4f}")
        for si, shape in enumerate(gt.shapes_px):
            for vi, (x, y) in enumerate(shape):
                lines.append(f"{si} {vi} {x:.4f} {y:.4f}")
    return "\n".join(lines) + "\n"


def cmd_generate(args: argparse.Namespace) -> int:
    """Render synthetic frames (pad scenes or structured noise) plus ground truth."""
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    lm = build_landmark()
    cam = CameraModel(focal_px=args.focal_px, k1=args.k1)

    written = 0
    for i in range(args.count):
        if args.mode == "noise":
            img = scenegen.structured_noise_frame(rng)
            gt_text = "# landmark none\n"
        else:
            height = rng.uniform(args.height_min, args.height_max)
            max_off = _safe_offset_m(cam, height, half_frame_frac=args.offset_frac)
            ox = rng.uniform(-max_off[0], max_off[0])
            oy = rng.uniform(-max_off[1], max_off[1])
            yaw = rng.uniform(0.0, 2.0 * math.pi) if args.random_yaw else 0.0
            cam_i = replace(cam, position=(ox, oy, height), yaw=yaw)
            img, gt = render_frame(
                lm,
                cam_i,
                gradient_amp=rng.uniform(-args.gradient, args.gradient) if args.gradient else 0.0,
                gradient_angle=rng.uniform(0.0, 2.0 * math.pi),
                noise_sigma=args.noise_sigma,
                rng=rng,
            )
            gt_text = _gt_sidecar(gt, height)
        stem = out_dir / f"frame_{i:04d}"
        stem.with_suffix(".pgm").write_bytes(save_pgm(img))
        stem.with_suffix(".gt.txt").write_text(gt_text)
        written += 1
    print(f"summary command=generate frames={written} out={out_dir}")
    return 0


def _safe_offset_m(cam: CameraModel, height: float, half_frame_frac: float = 0.5):
    """Largest camera offset keeping the pad fully in frame, capped at a
    fraction of the half-frame."""
    lm_half = 0.38 * math.sqrt(2.0) / 2.0  # pad circumradius
    px_per_m = cam.focal_px / height
    margin_x = cam.width / 2.0 - lm_half * px_per_m - 4
    margin_y = cam.height / 2.0 - lm_half * px_per_m - 4
    cap_x = half_frame_frac * cam.width
    cap_y = half_frame_frac * cam.height
    off_x = max(0.0, min(margin_x, cap_x)) / px_per_m
    off_y = max(0.0, min(margin_y, cap_y)) / px_per_m
    return off_x, off_y


def cmd_calibrate(args: argparse.Namespace) -> int:
    """Render centered/offset frames across heights and write a calibration table."""
    lm = build_landmark()
    cam = CameraModel(focal_px=args.focal_px, k1=args.k1)
    heights = [float(h) for h in args.heights.split(",")]
    try:
        table = synthesize_calibration(cam, lm, heights, args.d_px)
    except Exception as err:
        print(f"error: {err}", file=sys.stderr)
        print("summary command=calibrate status=failed")
        return 1
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(table.to_text())
    print(f"summary command=calibrate rows={len(table.heights)} out={out}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    """Run a landing scenario and write the trace CSV plus the outcome line."""
    try:
        scenario = load_scenario(args.scenario)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        print("summary command=simulate status=config_error")
        return 2
    if args.seed is not None:
        scenario.seed = args.seed
    trace, outcome = run_scenario(scenario)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / f"trace_{scenario.name}.csv"
    write_trace(trace, trace_path)
    (out_dir / f"outcome_{scenario.name}.txt").write_text(outcome.summary() + "\n")
    print(f"trace written to {trace_path}")
    print(
        f"summary command=simulate scenario={scenario.name} {outcome.summary()} "
        f"frames={len(trace)}"
    )
    return 0 if outcome.result == "landed" else 1


def cmd_eval(args: argparse.Namespace) -> int:
    """Batch-evaluate detection over a generated corpus directory."""
    try:
        config = load_config(args.config)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        print("summary command=eval status=config_error")
        return 2
    corpus = Path(args.dir)
    frames = sorted(corpus.glob("frame_*.pgm"))
    if not frames:
        print(f"error: no frames in {corpus}", file=sys.stderr)
        print("summary command=eval status=empty")
        return 1

    with_pad = 0
    detected = 0
    false_pos = 0
    centroid_err: list[float] = []
    height_err: list[float] = []
    for frame_path in frames:
        img = load_pgm(frame_path.read_bytes())
        gt_path = frame_path.with_suffix("").with_suffix(".gt.txt")
        gt_lines = gt_path.read_text().splitlines() if gt_path.exists() else []
        has_pad = not any("landmark none" in ln for ln in gt_lines)
        true_center = None
        true_height = None
        for ln in gt_lines:
            if ln.startswith("# center"):
                _, _, xs, ys = ln.split()
                true_center = (float(xs), float(ys))
            elif ln.startswith("# height"):
                true_height = float(ln.split()[2])

        processor = FrameProcessor(config.settings, config.calibration)
        report = processor.process(img)
        if has_pad:
            with_pad += 1
            if report.status == "detected":
                detected += 1
                if true_center is not None:
                    c = report.detection.landmark_center
                    centroid_err.append(math.hypot(c[0] - true_center[0], c[1] - true_center[1]))
                if true_height is not None and report.pose is not None:
                    height_err.append(abs(report.pose.h - true_height) / true_height)
        elif report.status == "detected":
            false_pos += 1

    rate = detected / with_pad if with_pad else 0.0
    cent = float(np.mean(centroid_err)) if centroid_err else float("nan")
    hrel = float(np.mean(height_err)) if height_err else float("nan")
    print(f"frames={len(frames)} with_pad={with_pad} detected={detected}")
    print(f"detection_rate={rate:.4f} false_positives={false_pos}")
    print(f"centroid_err_px mean={cent:.3f}")
    print(f"height_rel_err mean={hrel:.4f}")
    print(
        f"summary command=eval frames={len(frames)} rate={rate:.4f} "
        f"false_positives={false_pos} centroid_px={cent:.3f} height_rel={hrel:.4f}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="padnav",
        description="Landing-pad detection, relative pose, and landing simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect the pad in PGM frames, in stream order")
    p.add_argument("frames", nargs="+")
    p.add_argument("--config", default=None)
    p.add_argument("--alpha", type=float, default=0.0, help="vehicle yaw in radians")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("generate", help="render synthetic frames with ground truth")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--mode", choices=("landmark", "noise"), default="landmark")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--focal-px", type=float, default=400.0)
    p.add_argument("--k1", type=float, default=0.0)
    p.add_argument("--height-min", type=float, default=0.5)
    p.add_argument("--height-max", type=float, default=2.5)
    p.add_argument("--offset-frac", type=float, default=0.5)
    p.add_argument("--gradient", type=float, default=0.0)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--random-yaw", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("calibrate", help="synthesize a height/pixel-length table")
    p.add_argument("--out", required=True)
    p.add_argument("--heights", default="0.3,0.79,1.2,1.63,1.99,2.43,2.78")
    p.add_argument("--d-px", type=float, default=100.0)
    p.add_argument("--focal-px", type=float, default=400.0)
    p.add_argument("--k1", type=float, default=0.0)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("simulate", help="run a closed-loop landing scenario")
    p.add_argument("--scenario", default="static", help="'static', 'moving', or a file")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval", help="evaluate detection over a corpus directory")
    p.add_argument("--dir", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
