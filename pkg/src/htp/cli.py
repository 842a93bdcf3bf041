"""Command-line front end: generate, infer, profile, verify.

Exit codes: 0 success, 2 configuration error, 3 I/O error,
4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import io as htp_io
from .config import ConfigError, RunConfig, load_config
from .core import RngStream, gaussian
from .denoiser import (
    StageError,
    denoise_forward,
    init_params,
    load_denoiser_params,
    save_denoiser_params,
)
from .diffusion import (
    HypothesisSet,
    build_schedule,
    ddim_step,
    jpma_aggregate,
    mpjpe,
    timestep_for_iteration,
)
from .macs import profile_model
from .synthetic import MOTION_KINDS, generate_synthetic
from .verify import run_all

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_VERIFY = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="htp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic 3-D sequence and its 2-D projection")
    gen.add_argument("--config", help="JSON run config")
    gen.add_argument("--joints", type=int)
    gen.add_argument("--frames", type=int)
    gen.add_argument("--seed", type=int)
    gen.add_argument("--kind", choices=MOTION_KINDS, default="walk_cycle")
    gen.add_argument("--noise-2d", type=float, default=0.0, help="pixel noise added to the projection")
    gen.add_argument("--out-3d", required=True)
    gen.add_argument("--out-2d", required=True)

    inf = sub.add_parser("infer", help="run the multi-hypothesis reverse chain on a 2-D sequence")
    inf.add_argument("--config", help="JSON run config")
    inf.add_argument("--in-2d", help="2-D keypoints CSV (overrides config input_2d)")
    inf.add_argument("--gt-3d", help="optional ground-truth 3-D CSV for an MPJPE report")
    inf.add_argument("--out", help="output 3-D CSV (overrides config output_3d)")
    inf.add_argument("--H", type=int, dest="hypotheses", help="hypothesis count")
    inf.add_argument("--K", type=int, dest="iterations", help="reverse iterations")
    inf.add_argument("--T", type=int, dest="timesteps", help="diffusion timesteps")
    inf.add_argument("--eta-ddim", type=float, dest="ddim_eta", help="stochastic step scale in [0, 1]")
    inf.add_argument("--seed", type=int)
    inf.add_argument("--oracle-y0", help="bypass the network: denoiser returns this 3-D CSV")
    inf.add_argument("--params", help="load denoiser parameters from a checkpoint")
    inf.add_argument("--save-params", help="write the (seeded) denoiser parameters to a checkpoint")
    inf.add_argument("--emit-retained", help="write retained frame indices as a JSON array")
    inf.add_argument("--emit-mask", help="write the temporal mask as an HTP1 tensor")
    inf.add_argument("--time", action="store_true", help="report wall-clock FPS (informational)")

    prof = sub.add_parser("profile", help="print the analytic MACs report")
    prof.add_argument("--config", help="JSON run config")
    prof.add_argument("--H", type=int, dest="hypotheses")
    prof.add_argument("--K", type=int, dest="iterations")
    prof.add_argument("--json", dest="json_out", help="also write the report as JSON")

    ver = sub.add_parser("verify", help="run the full oracle and invariant suite")
    ver.add_argument("--seed", type=int, default=2024)
    return parser


def _config_from_args(args, keys) -> RunConfig:
    overrides = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    return load_config(args.config, overrides)


def _cmd_generate(args) -> int:
    cfg = _config_from_args(args, ("joints", "frames", "seed"))
    pose_3d, pose_2d = generate_synthetic(
        cfg.joints, cfg.frames, cfg.seed, args.kind, cfg.camera_model(), noise_2d=args.noise_2d
    )
    htp_io.write_pose_csv(args.out_3d, pose_3d)
    htp_io.write_pose_csv(args.out_2d, pose_2d)
    print(f"generate: wrote {args.out_3d} and {args.out_2d} "
          f"(J={cfg.joints}, F={cfg.frames}, kind={args.kind}, seed={cfg.seed})")
    return EXIT_OK


def _cmd_infer(args) -> int:
    cfg = _config_from_args(
        args, ("hypotheses", "iterations", "timesteps", "ddim_eta", "seed")
    )
    in_2d = args.in_2d or cfg.input_2d
    out_path = args.out or cfg.output_3d
    gt_path = args.gt_3d or cfg.input_gt
    if in_2d is None:
        raise ConfigError("input_2d: no 2-D input file given (use --in-2d or config input_2d)")
    if out_path is None:
        raise ConfigError("output_3d: no output path given (use --out or config output_3d)")
    if args.oracle_y0 and (args.emit_retained or args.emit_mask):
        raise ConfigError("emit_retained/emit_mask: not available with --oracle-y0 (the network never runs)")

    keypoints = htp_io.read_pose_csv(in_2d)
    if keypoints.shape != (cfg.joints, cfg.frames, 2):
        raise ConfigError(
            f"input_2d: {in_2d} has shape {keypoints.shape}, config expects "
            f"({cfg.joints}, {cfg.frames}, 2)"
        )

    den_cfg = cfg.denoiser_config()
    root = RngStream(cfg.seed)
    diagnostics: dict = {}

    if args.oracle_y0:
        oracle = htp_io.read_pose_csv(args.oracle_y0)
        if oracle.shape != (cfg.joints, cfg.frames, 3):
            raise ConfigError(
                f"oracle_y0: {args.oracle_y0} has shape {oracle.shape}, expected "
                f"({cfg.joints}, {cfg.frames}, 3)"
            )

        def denoise(noisy, t, diag=None):
            return oracle
    else:
        if args.params:
            params = load_denoiser_params(args.params, den_cfg)
        else:
            params = init_params(den_cfg, root.child(0).seed)
        if args.save_params:
            save_denoiser_params(args.save_params, params)

        def denoise(noisy, t, diag=None):
            return denoise_forward(noisy, keypoints, t, den_cfg, params, diagnostics=diag)

    sched = build_schedule(cfg.timesteps, cfg.schedule)
    shape = (cfg.joints, cfg.frames, 3)
    started = time.perf_counter()
    finals = []
    seeds = []
    for h in range(cfg.hypotheses):
        stream = root.child(1 + h)
        seeds.append(stream.seed)
        current = gaussian(stream, shape)
        t = cfg.timesteps
        for k in range(1, cfg.iterations + 1):
            t_next = timestep_for_iteration(k, cfg.iterations, cfg.timesteps)
            is_last = h == 0 and k == cfg.iterations
            clean_hat = denoise(current, t, diagnostics if is_last else None)
            current = ddim_step(current, clean_hat, t, t_next, cfg.ddim_eta, stream, sched)
            t = t_next
        finals.append(current)
    elapsed = time.perf_counter() - started

    hyps = HypothesisSet(poses=np.stack(finals), seeds=tuple(seeds))
    final = jpma_aggregate(hyps, keypoints, cfg.camera_model())
    htp_io.write_pose_csv(out_path, final)
    print(f"infer: wrote {out_path} (H={cfg.hypotheses}, K={cfg.iterations}, seed={cfg.seed})")

    if args.emit_retained:
        retained = diagnostics.get("retained_indices")
        with open(args.emit_retained, "w") as fh:
            json.dump([int(i) for i in retained], fh)
        print(f"infer: retained indices -> {args.emit_retained}")
    if args.emit_mask and "temporal_mask" in diagnostics:
        htp_io.write_tensor(args.emit_mask, diagnostics["temporal_mask"])
        print(f"infer: temporal mask -> {args.emit_mask}")
    if gt_path:
        gt = htp_io.read_pose_csv(gt_path)
        print(f"infer: MPJPE vs {gt_path}: {mpjpe(final, gt):.6f} mm")
    if args.time:
        fps = cfg.frames / elapsed if elapsed > 0 else float("inf")
        print(f"infer: {elapsed:.2f}s sampling, {fps:.1f} frames/s (informational, hardware-dependent)")
    return EXIT_OK


def _cmd_profile(args) -> int:
    cfg = _config_from_args(args, ("hypotheses", "iterations"))
    report = profile_model(
        cfg.denoiser_config(), cfg.hypotheses, cfg.iterations, cfg.inference_sparse_blocks
    )
    print(report.format_table())
    if args.json_out:
        with open(args.json_out, "w") as fh:
            fh.write(report.as_json())
        print(f"profile: report -> {args.json_out}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    results = run_all(seed=args.seed, echo=True)
    failures = [r for r in results if not r.passed]
    total = sum(r.seconds for r in results)
    print(f"verify: {len(results) - len(failures)}/{len(results)} checks passed in {total:.1f}s")
    return EXIT_VERIFY if failures else EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {
        "generate": _cmd_generate,
        "infer": _cmd_infer,
        "profile": _cmd_profile,
        "verify": _cmd_verify,
    }[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"{args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (htp_io.FormatError, OSError) as exc:
        print(f"{args.command}: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except StageError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
