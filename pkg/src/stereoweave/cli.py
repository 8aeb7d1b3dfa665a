"""Command-line pipeline: depth prep, warping, matrix, inpaint, assembly.

Every run writes a machine-readable manifest `<out>.run.json` beside its
output directory (config, input/output hashes, stage timings), so the
output tree itself stays bit-reproducible and a past run can be replayed
with `--config <manifest>`.
"""

import argparse
import hashlib
import json
import os
import sys
import time

from . import assemble as assemble_mod
from . import fileio
from .config import DENOISER_ADDR_ENV, load_config
from .depth import DepthSequence, normalize_depth, smooth_depth
from .diffusion.codec import AvgPoolCodec, IdentityCodec
from .diffusion.endpoint import OracleDenoiser
from .diffusion.sampler import inpaint_frame_matrix
from .diffusion.schedule import make_schedule
from .errors import (
    InvalidRange,
    ProtocolError,
    StereoweaveError,
    UnsupportedFormat,
)
from .matrix import (
    build_frame_matrix,
    build_linear_trajectory,
    build_spiral_trajectory,
    load_matrix,
    save_matrix,
)
from .protocol import ExternalDenoiser
from .warp import CameraOffset, warp_video

DEPTH_PATTERN = "d{:03d}.pfm"
FWD_PATTERN = "fw{:03d}.flo"
BWD_PATTERN = "bw{:03d}.flo"

_CONFIG_FLAGS = [
    ("--depth-lo", "depth_lo", float),
    ("--depth-hi", "depth_hi", float),
    ("--baseline", "baseline", float),
    ("--n-views", "n_views", int),
    ("--max-frames", "max_frames", int),
    ("--focal-px", "focal_px", float),
    ("--planes", "planes", int),
    ("--isolation-threshold", "isolation_threshold", float),
    ("--crack-threshold", "crack_threshold", float),
    ("--timesteps", "T", int),
    ("--steps", "steps", int),
    ("--resample-hi", "resample_hi", int),
    ("--resample-lo", "resample_lo", int),
    ("--beta-lo", "beta_lo", float),
    ("--beta-hi", "beta_hi", float),
    ("--codec", "codec", str),
    ("--denoiser", "denoiser", str),
    ("--denoiser-addr", "denoiser_addr", str),
    ("--seed", "seed", int),
]


def _add_config_args(sub):
    sub.add_argument("--config", help="JSON config or a past run manifest")
    for flag, dest, typ in _CONFIG_FLAGS:
        sub.add_argument(flag, dest=dest, type=typ, default=None)
    sub.add_argument("--reinject", dest="reinject",
                     action=argparse.BooleanOptionalAction, default=None)


def _config_from(args):
    overrides = {dest: getattr(args, dest)
                 for _, dest, _ in _CONFIG_FLAGS}
    overrides["reinject"] = args.reinject
    return load_config(args.config, overrides)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _hash_tree(path):
    if os.path.isfile(path):
        return {os.path.basename(path): _sha256(path)}
    hashes = {}
    for root, _, names in sorted(os.walk(path)):
        for name in sorted(names):
            full = os.path.join(root, name)
            hashes[os.path.relpath(full, path)] = _sha256(full)
    return hashes


def _write_manifest(command, cfg, inputs, out, timings):
    manifest = {
        "command": command,
        "config": cfg.to_dict(),
        "inputs": {p: _hash_tree(p) for p in inputs},
        "outputs": _hash_tree(out),
        "timings": {k: round(v, 6) for k, v in timings.items()},
    }
    path = os.fspath(out).rstrip("/\\") + ".run.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


class _Timer:
    def __init__(self):
        self.timings = {}

    def stage(self, name):
        timer = self

        class _Ctx:
            def __enter__(self):
                self.start = time.perf_counter()

            def __exit__(self, *exc):
                timer.timings[name] = time.perf_counter() - self.start

        return _Ctx()


def _read_depth_sequence(args):
    paths = fileio.list_indexed(args.depth_dir, args.depth_pattern)
    return [fileio.read_depth(p, format=args.depth_format,
                              scale=args.depth_scale,
                              inverse=args.inverse_depth)
            for p in paths]


def _check_frame_cap(n, cfg):
    if n > cfg.max_frames:
        raise InvalidRange(
            f"{n} frames exceed the configured cap {cfg.max_frames}")


def cmd_smooth_depth(args):
    cfg = _config_from(args)
    timer = _Timer()
    with timer.stage("load"):
        depths = _read_depth_sequence(args)
        n = len(depths)
        fwd = [fileio.read_flo(p) for p in
               fileio.list_indexed(args.flow_dir, args.fwd_pattern)]
        bwd = [fileio.read_flo(p) for p in
               fileio.list_indexed(args.flow_dir, args.bwd_pattern)]
        if len(fwd) != n - 1 or len(bwd) != n - 1:
            raise UnsupportedFormat(
                f"{n} depth frames need {n - 1} flows each way, got "
                f"{len(fwd)} forward / {len(bwd)} backward")
    with timer.stage("smooth"):
        seq = smooth_depth(DepthSequence(depths), fwd, bwd,
                           window=args.window, sigma=args.sigma)
    with timer.stage("normalize"):
        seq = normalize_depth(seq, lo=cfg.depth_lo, hi=cfg.depth_hi)
    with timer.stage("save"):
        os.makedirs(args.out, exist_ok=True)
        for i, d in enumerate(seq.frames):
            fileio.write_pfm(os.path.join(args.out,
                                          DEPTH_PATTERN.format(i)), d.data)
    _write_manifest("smooth-depth", cfg, [args.depth_dir, args.flow_dir],
                    args.out, timer.timings)
    return 0


def _load_normalized_depth(depth_dir):
    paths = fileio.list_indexed(depth_dir, DEPTH_PATTERN)
    frames = [fileio.read_depth(p) for p in paths]
    return DepthSequence(frames, normalized=True)


def cmd_warp(args):
    cfg = _config_from(args)
    timer = _Timer()
    offset = cfg.baseline if args.offset_x is None else args.offset_x
    cam = CameraOffset(offset, cfg.focal_px)
    with timer.stage("load"):
        frames = fileio.read_frame_sequence(args.frames_dir)
        depth = _load_normalized_depth(args.depth_dir)
    with timer.stage("warp"):
        warped, masks = warp_video(frames, depth, cam, n_planes=cfg.planes)
    with timer.stage("save"):
        os.makedirs(args.out, exist_ok=True)
        for i, (fb, mk) in enumerate(zip(warped, masks)):
            fileio.write_frame(
                os.path.join(args.out, f"f{i:03d}.png"), fb, bits=16)
            fileio.write_mask(os.path.join(args.out, f"m{i:03d}.png"), mk)
    _write_manifest("warp", cfg, [args.frames_dir, args.depth_dir],
                    args.out, timer.timings)
    return 0


def cmd_matrix(args):
    cfg = _config_from(args)
    timer = _Timer()
    with timer.stage("load"):
        frames = fileio.read_frame_sequence(args.frames_dir)
        depth = _load_normalized_depth(args.depth_dir)
        _check_frame_cap(len(frames), cfg)
    if args.trajectory == "linear":
        traj = build_linear_trajectory(cfg.baseline, cfg.n_views,
                                       cfg.focal_px)
    else:
        traj = build_spiral_trajectory(cfg.baseline, cfg.n_views,
                                       cfg.focal_px)
    with timer.stage("warp"):
        fm = build_frame_matrix(frames, depth, traj, n_planes=cfg.planes,
                                prompt=args.prompt)
    with timer.stage("save"):
        save_matrix(fm, args.out)
    _write_manifest("matrix", cfg, [args.frames_dir, args.depth_dir],
                    args.out, timer.timings)
    return 0


def _build_codec(cfg):
    if cfg.codec == "identity":
        return IdentityCodec()
    if cfg.codec == "avgpool8":
        return AvgPoolCodec(8)
    raise UnsupportedFormat(
        "external codec needs a VAE service; use identity or avgpool8")


def _build_endpoint(cfg, sched, fm, target_dir):
    if cfg.denoiser == "oracle":
        codec = _build_codec(cfg)
        source = load_matrix(target_dir) if target_dir else fm
        targets = {}
        for v in range(source.n_views):
            targets[("col", v)] = codec.encode(source.frames[:, v])
        for s in range(source.n_frames):
            targets[("row", s)] = codec.encode(source.frames[s])
        return OracleDenoiser(sched, targets_by_tag=targets)
    addr = cfg.denoiser_addr or os.environ.get(DENOISER_ADDR_ENV, "")
    if not addr:
        raise ProtocolError(
            f"external denoiser needs an address (flag or {DENOISER_ADDR_ENV})")
    if addr.startswith("stdio:"):
        return ExternalDenoiser.spawn(addr[len("stdio:"):])
    host, sep, port = addr.rpartition(":")
    if not sep or not port.isdigit():
        raise ProtocolError(f"address {addr!r} is not host:port or stdio:cmd")
    return ExternalDenoiser.connect_tcp(host, int(port))


def cmd_inpaint(args):
    cfg = _config_from(args)
    timer = _Timer()
    with timer.stage("load"):
        fm = load_matrix(args.matrix_dir)
        _check_frame_cap(fm.n_frames, cfg)
    sched = make_schedule(cfg.T, cfg.steps, cfg.beta_lo, cfg.beta_hi,
                          cfg.resample_hi, cfg.resample_lo)
    codec = _build_codec(cfg)
    endpoint = _build_endpoint(cfg, sched, fm, args.oracle_target)
    try:
        with timer.stage("inpaint"):
            out = inpaint_frame_matrix(fm, codec, endpoint, sched,
                                       seed=cfg.seed,
                                       reinject=cfg.reinject)
    finally:
        endpoint.close()
    with timer.stage("save"):
        save_matrix(out, args.out)
    inputs = [args.matrix_dir]
    if args.oracle_target:
        inputs.append(args.oracle_target)
    _write_manifest("inpaint", cfg, inputs, args.out, timer.timings)
    return 0


def cmd_assemble(args):
    cfg = _config_from(args)
    timer = _Timer()
    with timer.stage("load"):
        fm = load_matrix(args.matrix_dir)
    pair = assemble_mod.extract_stereo(fm)
    formats = tuple(args.formats.split(","))
    with timer.stage("compose"):
        assemble_mod.save_outputs(pair, args.out, formats=formats,
                                  bits=args.bits)
    _write_manifest("assemble", cfg, [args.matrix_dir], args.out,
                    timer.timings)
    return 0


def cmd_preview(args):
    cfg = _config_from(args)
    fm = load_matrix(args.matrix_dir)
    rows = None if args.rows is None else \
        [int(x) for x in args.rows.split(",")]
    cols = None if args.cols is None else \
        [int(x) for x in args.cols.split(",")]
    grid = assemble_mod.render_preview_grid(fm, rows=rows, cols=cols)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    fileio.write_frame(args.out, grid, bits=8)
    _write_manifest("preview", cfg, [args.matrix_dir], args.out, {})
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="stereoweave",
        description="monocular video + depth + flow -> stereoscopic video")
    subs = parser.add_subparsers(dest="command", required=True)

    sd = subs.add_parser("smooth-depth",
                         help="flow-tracked temporal smoothing + range "
                              "normalization")
    sd.add_argument("--depth-dir", required=True)
    sd.add_argument("--depth-pattern", default=DEPTH_PATTERN)
    sd.add_argument("--depth-format", choices=("pfm", "png16"),
                    default="pfm")
    sd.add_argument("--depth-scale", type=float, default=1.0)
    sd.add_argument("--inverse-depth", action="store_true")
    sd.add_argument("--flow-dir", required=True)
    sd.add_argument("--fwd-pattern", default=FWD_PATTERN)
    sd.add_argument("--bwd-pattern", default=BWD_PATTERN)
    sd.add_argument("--window", type=int, default=5)
    sd.add_argument("--sigma", type=float, default=1.0)
    sd.add_argument("--out", required=True)
    _add_config_args(sd)
    sd.set_defaults(func=cmd_smooth_depth)

    wp = subs.add_parser("warp", help="single-view depth warp")
    wp.add_argument("--frames-dir", required=True)
    wp.add_argument("--depth-dir", required=True)
    wp.add_argument("--offset-x", type=float, default=None,
                    help="camera offset in meters (default: the baseline)")
    wp.add_argument("--out", required=True)
    _add_config_args(wp)
    wp.set_defaults(func=cmd_warp)

    mx = subs.add_parser("matrix", help="warp all trajectory views")
    mx.add_argument("--frames-dir", required=True)
    mx.add_argument("--depth-dir", required=True)
    mx.add_argument("--trajectory", choices=("linear", "spiral"),
                    default="linear")
    mx.add_argument("--prompt", default="")
    mx.add_argument("--out", required=True)
    _add_config_args(mx)
    mx.set_defaults(func=cmd_matrix)

    ip = subs.add_parser("inpaint", help="frame-matrix diffusion inpainting")
    ip.add_argument("--matrix-dir", required=True)
    ip.add_argument("--oracle-target", default=None,
                    help="saved matrix the oracle denoiser should recover")
    ip.add_argument("--out", required=True)
    _add_config_args(ip)
    ip.set_defaults(func=cmd_inpaint)

    asm = subs.add_parser("assemble", help="stereo pair + composites")
    asm.add_argument("--matrix-dir", required=True)
    asm.add_argument("--formats", default="left,right,sbs,anaglyph")
    asm.add_argument("--bits", type=int, choices=(8, 16), default=8)
    asm.add_argument("--out", required=True)
    _add_config_args(asm)
    asm.set_defaults(func=cmd_assemble)

    pv = subs.add_parser("preview", help="tile matrix cells into one image")
    pv.add_argument("--matrix-dir", required=True)
    pv.add_argument("--rows", default=None)
    pv.add_argument("--cols", default=None)
    pv.add_argument("--out", required=True)
    _add_config_args(pv)
    pv.set_defaults(func=cmd_preview)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StereoweaveError as exc:
        print(f"stereoweave: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"stereoweave: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
