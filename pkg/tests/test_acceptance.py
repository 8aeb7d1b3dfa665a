"""Acceptance gate: one criterion per test, one PASS/FAIL line each.

Each criterion enforces its stated tolerance and wall-clock budget; the
result line goes to the real stdout so it survives pytest capture.
"""

import contextlib
import hashlib
import importlib.util
import io
import math
import os
import socket
import subprocess
import sys
import time
import warnings

import numpy as np
import pytest

from stereoweave import protocol
from stereoweave.cli import main
from stereoweave.diffusion.codec import AvgPoolCodec, IdentityCodec
from stereoweave.diffusion.endpoint import OracleDenoiser, ZeroDenoiser
from stereoweave.diffusion.sampler import (
    boundary_reinject,
    inpaint_frame_matrix,
    inpaint_sequence,
    resample_noise,
    sample_known,
)
from stereoweave.diffusion.schedule import make_schedule
from stereoweave.fileio import (
    read_flo,
    read_mask,
    read_pfm,
    write_flo,
    write_frame,
    write_mask,
    write_pfm,
)
from stereoweave.matrix import FrameMatrix, build_linear_trajectory
from stereoweave.rng import KNOWN, RESAMPLE, stream
from stereoweave.types import (
    DepthMap,
    DisocclusionMask,
    FlowField,
    FrameBuffer,
)
from stereoweave.warp import (
    CameraOffset,
    MultiPlaneStack,
    PlaneLayer,
    blend_planes,
    fill_cracks,
    plane_edges,
    remove_isolated,
    warp_frame,
)

GAUSS_W = (1, 2, 1, 2, 4, 2, 1, 2, 1)
OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 0), (0, 1),
           (1, -1), (1, 0), (1, 1))


_CAP = None


@pytest.fixture(autouse=True)
def _route_past_capture(capfd):
    global _CAP
    _CAP = capfd
    yield
    _CAP = None


def _announce(n: int, ok: bool, desc: str, dt: float):
    line = (f"[acceptance] criterion {n}: {'PASS' if ok else 'FAIL'} "
            f"({desc}, {dt:.2f}s)\n")
    ctx = _CAP.disabled() if _CAP is not None else contextlib.nullcontext()
    with ctx:
        sys.stdout.write(line)
        sys.stdout.flush()


@contextlib.contextmanager
def criterion(n: int, desc: str, limit_s: float):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException:
        _announce(n, False, desc, time.perf_counter() - t0)
        raise
    dt = time.perf_counter() - t0
    if dt > limit_s:
        _announce(n, False, desc, dt)
        raise AssertionError(f"criterion {n} took {dt:.2f}s > {limit_s}s")
    _announce(n, True, desc, dt)


def _hash_tree(root):
    hashes = {}
    for r, _, names in sorted(os.walk(root)):
        for name in sorted(names):
            path = os.path.join(r, name)
            with open(path, "rb") as fh:
                hashes[os.path.relpath(path, root)] = hashlib.sha256(
                    fh.read()).hexdigest()
    return hashes


def test_criterion_1_warp_geometry():
    with criterion(1, "constant-depth shift + strip vs projection oracle",
                   1.0):
        h, w = 16, 64
        rng = np.random.default_rng(0)
        img = rng.uniform(size=(h, w, 3)).astype(np.float32)
        depth = np.full((h, w), 2.0, np.float32)
        delta = 512.0 * 0.08 / 2.0
        frame, mask = warp_frame(FrameBuffer(img), DepthMap(depth),
                                 CameraOffset(0.08, 512.0), clean=False)
        want = np.zeros_like(img)
        wmask = np.zeros((h, w), np.uint8)
        for y in range(h):
            for x in range(w):
                tx = math.floor(x - delta + 0.5)
                if 0 <= tx < w and wmask[y, tx] == 0:
                    want[y, tx] = img[y, x]
                    wmask[y, tx] = 1
        assert (frame.data == want).all()
        assert (mask.data == wmask).all()
        shift = round(delta)
        assert shift == 20
        assert (frame.data[:, :w - shift] == img[:, shift:]).all()
        assert (mask.data[:, :w - shift] == 1).all()
        assert (mask.data[:, w - shift:] == 0).all()


def _two_plane_stack(rng, h, w, density=0.6):
    edges = plane_edges(2)
    planes = []
    for k in range(2):
        m = (rng.uniform(size=(h, w)) < density).astype(np.uint8)
        img = rng.uniform(size=(h, w, 3)).astype(np.float32) \
            * m[:, :, None]
        planes.append(PlaneLayer(FrameBuffer(img), DisocclusionMask(m),
                                 (edges[k], edges[k + 1])))
    return MultiPlaneStack(tuple(planes))


def test_criterion_2_morphology_vs_brute_force():
    with criterion(2, "isolation/crack decisions exact on 50 random masks",
                   5.0):
        rng = np.random.default_rng(1)
        for _ in range(50):
            stack = _two_plane_stack(rng, 24, 32)
            removed = remove_isolated(stack)
            for before, after in zip(stack.planes, removed.planes):
                m = before.mask.data.astype(np.int64)
                pad = np.pad(m, 1)
                count = np.zeros_like(m)
                for dy, dx in OFFSETS:
                    count += pad[1 + dy:25 + dy, 1 + dx:33 + dx]
                keep = ((m == 1) & (count >= 0.5 * 9)).astype(np.uint8)
                assert (after.mask.data == keep).all()
                assert (after.image.data
                        == before.image.data * keep[:, :, None]).all()
            filled = fill_cracks(removed)
            for before, after in zip(removed.planes, filled.planes):
                m = before.mask.data.astype(np.int64)
                pad = np.pad(m, 1)
                padi = np.pad(before.image.data.astype(np.float64),
                              ((1, 1), (1, 1), (0, 0)))
                gsum = np.zeros(m.shape, np.float64)
                wsum = np.zeros(before.image.data.shape, np.float64)
                for (dy, dx), wt in zip(OFFSETS, GAUSS_W):
                    gsum += wt * pad[1 + dy:25 + dy, 1 + dx:33 + dx]
                    wsum += wt * padi[1 + dy:25 + dy, 1 + dx:33 + dx] \
                        * pad[1 + dy:25 + dy, 1 + dx:33 + dx, None]
                crack = (m == 0) & (gsum > 0.2 * 16)
                assert (after.mask.data == ((m == 1) | crack)).all()
                fill = wsum / np.maximum(gsum, 1e-12)[:, :, None]
                want = np.where(crack[:, :, None],
                                np.clip(fill, 0.0, 1.0),
                                before.image.data)
                assert np.allclose(after.image.data, want,
                                   rtol=1e-6, atol=1e-7)
                keep = ~crack
                assert (after.image.data[keep]
                        == before.image.data[keep]).all()


def test_criterion_3_blend_vs_zbuffer_oracle():
    with criterion(3, "two-layer blend pixel-exact + order guard", 5.0):
        rng = np.random.default_rng(2)
        for _ in range(20):
            stack = _two_plane_stack(rng, 16, 16, density=0.7)
            near, far = stack.planes
            frame, mask = blend_planes(stack)
            m0 = near.mask.data.astype(bool)[:, :, None]
            m1 = far.mask.data.astype(bool)[:, :, None]
            want = np.where(m0, near.image.data,
                            np.where(m1, far.image.data, 0.0))
            assert (frame.data == want.astype(np.float32)).all()
            assert (mask.data == (near.mask.data | far.mask.data)).all()
            # compositing near before far must hand overlaps to the
            # far plane and fail against the oracle
            rev = np.zeros_like(frame.data)
            for p in stack.planes:  # wrong direction: near to far
                pm = p.mask.data[:, :, None].astype(np.float32)
                rev = rev * (1.0 - pm) + p.image.data * pm
            overlap = (near.mask.data & far.mask.data).astype(bool)
            assert overlap.any()
            assert not np.array_equal(rev, want.astype(np.float32))


def test_criterion_4_repaint_oracle_convergence():
    with criterion(4, "identity-codec oracle recovery over T=1000/50",
                   30.0):
        sched = make_schedule()
        assert sched.T == 1000 and sched.steps == 50
        rng = np.random.default_rng(3)
        x_true = rng.uniform(0.05, 0.95, size=(16, 64, 64, 3)) \
            .astype(np.float32)
        masks = np.ones((16, 64, 64), np.uint8)
        for s in range(16):
            y0 = int(rng.integers(4, 32))
            x0 = int(rng.integers(4, 32))
            masks[s, y0:y0 + 20, x0:x0 + 24] = 0
        x_warp = x_true * masks[:, :, :, None]
        codec = IdentityCodec()
        ep = OracleDenoiser(sched, codec.encode(x_true))
        out = inpaint_sequence(x_warp, masks, "", codec, ep, sched)
        hole = (masks == 0)
        rel = (np.linalg.norm((out - x_true)[hole])
               / np.linalg.norm(x_true[hole]))
        assert rel <= 1e-3
        assert (out[~hole] == x_warp[~hole]).all()


def test_criterion_5_traversal_trace():
    with criterion(5, "odd/even pass order, 300 repetitions", 10.0):
        sched = make_schedule()
        rng = np.random.default_rng(4)
        frames = rng.uniform(size=(4, 3, 8, 8, 3)).astype(np.float32)
        masks = np.ones((4, 3, 8, 8), np.uint8)
        masks[:, 1:, 2:6, 2:6] = 0
        frames[:, 1:] *= masks[:, 1:, :, :, None]
        fm = FrameMatrix(frames, masks, build_linear_trajectory(n_views=3),
                         "")
        ep = ZeroDenoiser()
        inpaint_frame_matrix(fm, IdentityCodec(), ep, sched)
        want = []
        reps = 0
        for i, t in enumerate(sched.step_plan):
            if i < 25:
                for n in range(1, 9):
                    reps += 1
                    if n % 2 == 1:
                        want += [(t, ("col", v)) for v in range(3)]
                    else:
                        want += [(t, ("row", s)) for s in range(4)]
            else:
                for n in range(1, 5):
                    reps += 1
                    want.append((t, ("col", 2)))
        assert reps == 300
        assert ep.calls == want


def test_criterion_6_noise_statistics():
    with criterion(6, "forward/renoise moments inside 4-sigma, 1e4 draws",
                   10.0):
        sched = make_schedule()
        n = 10_000
        plan = sched.step_plan
        for i, t in enumerate((plan[0], plan[12], plan[24], plan[25],
                               plan[49])):
            ab = sched.abar(t)
            out = sample_known(sched, np.full(n, 0.7, np.float32), t,
                               stream(123, KNOWN, t, i))
            m_want, v_want = math.sqrt(ab) * 0.7, 1.0 - ab
            assert abs(out.mean() - m_want) <= 4 * math.sqrt(v_want / n)
            assert abs(out.var() - v_want) <= 4 * v_want * math.sqrt(2 / n)
            beff = sched.jump_beta(t)
            out = resample_noise(sched, np.full(n, 0.5, np.float32), t,
                                 stream(123, RESAMPLE, t, i))
            m_want, v_want = math.sqrt(1.0 - beff) * 0.5, beff
            assert abs(out.mean() - m_want) <= 4 * math.sqrt(v_want / n)
            assert abs(out.var() - v_want) <= 4 * v_want * math.sqrt(2 / n)


def test_criterion_7_reinjection_sign_test():
    with criterion(7, "boundary-band error improves in >= 16/20 scenes",
                   60.0):
        sched = make_schedule()
        t = sched.step_plan[0]
        wins = 0
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            base = rng.uniform(0.2, 0.8, size=(2, 8, 8, 3)) \
                .astype(np.float32)
            x_true = base.repeat(4, axis=1).repeat(4, axis=2)
            masks = np.ones((2, 32, 32), np.uint8)
            y0 = int(rng.integers(3, 12))
            x0 = int(rng.integers(3, 12))
            hh = int(rng.integers(9, 15))
            ww = int(rng.integers(9, 15))
            masks[:, y0:y0 + hh, x0:x0 + ww] = 0
            x_warp = x_true * masks[:, :, :, None]
            codec = AvgPoolCodec(8)
            z_true = codec.encode(x_true)
            z_old = codec.encode(x_warp)
            ep = OracleDenoiser(sched, z_true)
            z = rng.normal(size=z_true.shape).astype(np.float32)
            z_new = boundary_reinject(sched, z, z_old, x_warp, masks,
                                      codec, ep, "", t)
            blocks = masks.reshape(2, 4, 8, 4, 8)
            band = ((blocks.min(axis=(2, 4)) == 0)
                    & (blocks.max(axis=(2, 4)) == 1))
            assert band.any()
            sel = np.repeat(band[:, None], 3, axis=1)
            err_old = np.mean((z_old[sel] - z_true[sel]) ** 2)
            err_new = np.mean((z_new[sel] - z_true[sel]) ** 2)
            wins += int(err_new < err_old)
        assert wins >= 16


def _make_scene(root):
    dirs = {k: root / k for k in ("frames", "depth", "flow")}
    for d in dirs.values():
        d.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(42)
    codes = rng.integers(0, 256, size=(4, 24, 32, 3))
    for i in range(4):
        write_frame(dirs["frames"] / f"f{i:03d}.png",
                    FrameBuffer(codes[i].astype(np.float32) / 255.0),
                    bits=8)
    raw = np.full((24, 32), 8.0, np.float32)
    raw[16:] = 2.0
    for i in range(4):
        write_pfm(dirs["depth"] / f"d{i:03d}.pfm", raw)
    zero = FlowField(np.zeros((24, 32, 2), np.float32))
    for i in range(3):
        write_flo(dirs["flow"] / f"fw{i:03d}.flo", zero)
        write_flo(dirs["flow"] / f"bw{i:03d}.flo", zero)
    return dirs


def test_criterion_8_pipeline_determinism(tmp_path):
    with criterion(8, "same-seed oracle pipeline trees bit-identical",
                   60.0):
        dirs = _make_scene(tmp_path / "scene")
        sched_flags = ("--timesteps", "100", "--steps", "10",
                       "--resample-hi", "2", "--resample-lo", "2")
        for run in ("a", "b"):
            root = tmp_path / run
            assert main(["smooth-depth",
                         "--depth-dir", str(dirs["depth"]),
                         "--flow-dir", str(dirs["flow"]),
                         "--window", "3",
                         "--out", str(root / "depth")]) == 0
            assert main(["matrix", "--frames-dir", str(dirs["frames"]),
                         "--depth-dir", str(root / "depth"),
                         "--n-views", "3", "--focal-px", "100",
                         "--out", str(root / "fm")]) == 0
            assert main(["inpaint", "--matrix-dir", str(root / "fm"),
                         "--seed", "11", *sched_flags,
                         "--out", str(root / "inp")]) == 0
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                assert main(["assemble", "--matrix-dir", str(root / "inp"),
                             "--bits", "16",
                             "--out", str(root / "out")]) == 0
        for stage in ("depth", "fm", "inp", "out"):
            assert _hash_tree(tmp_path / "a" / stage) \
                == _hash_tree(tmp_path / "b" / stage), stage


def test_criterion_9_format_round_trips(tmp_path):
    with criterion(9, "flo/pfm/mask lossless on 100 random payloads", 5.0):
        rng = np.random.default_rng(5)
        for i in range(34):
            h, w = int(rng.integers(1, 20)), int(rng.integers(1, 20))
            flow = FlowField((rng.normal(size=(h, w, 2)) * 30)
                             .astype(np.float32))
            path = tmp_path / f"p{i}.flo"
            write_flo(path, flow)
            assert (read_flo(path).data == flow.data).all()
        for i in range(33):
            h, w = int(rng.integers(1, 20)), int(rng.integers(1, 20))
            shape = (h, w) if i % 2 else (h, w, 3)
            data = (rng.normal(size=shape) * 5).astype(np.float32)
            path = tmp_path / f"p{i}.pfm"
            write_pfm(path, data, little_endian=bool(i % 2))
            back, _ = read_pfm(path)
            assert (back == data).all()
        for i in range(33):
            h, w = int(rng.integers(1, 20)), int(rng.integers(1, 20))
            mask = DisocclusionMask(
                rng.integers(0, 2, size=(h, w)).astype(np.uint8))
            path = tmp_path / f"p{i}_mask.png"
            write_mask(path, mask)
            assert (read_mask(path).data == mask.data).all()


_BRIDGE = importlib.util.find_spec("svdn_bridge") is not None


@pytest.mark.skipif(not _BRIDGE, reason="denoiser bridge not installed")
def test_criterion_10_bridge_protocol_conformance(tmp_path):
    with criterion(10, "bridge loopback bit-exact + 1000-frame fuzz",
                   120.0):
        # stdio loopback: the echo model returns the request tensor
        ep = protocol.ExternalDenoiser.spawn(
            [sys.executable, "-m", "svdn_bridge", "--transport", "stdio",
             "--model", "echo"])
        rng = np.random.default_rng(6)
        try:
            for i in range(100):
                shape = (int(rng.integers(1, 4)), int(rng.integers(1, 4)),
                         int(rng.integers(1, 12)), int(rng.integers(1, 12)))
                z = rng.normal(size=shape).astype(np.float32)
                eps, var = ep.predict(z, f"frame {i}", int(rng.integers(
                    1, 1001)))
                assert (eps == z).all()
                assert (var == 0).all() and var.shape == z.shape
        finally:
            ep.close()

        # TCP fuzz: malformed frames only ever yield error frames
        proc = subprocess.Popen(
            [sys.executable, "-m", "svdn_bridge", "--transport", "tcp",
             "--port", "0", "--model", "zero"],
            stdout=subprocess.PIPE)
        try:
            line = proc.stdout.readline().decode()
            assert line.startswith("listening ")
            port = int(line.split()[1])
            fuzz = np.random.default_rng(7)
            error_frames = 0
            for i in range(1000):
                blob = bytes(fuzz.integers(
                    0, 256, size=int(fuzz.integers(1, 80))).astype(
                        np.uint8))
                kind = i % 4
                if kind == 1:
                    blob = b"SVDN" + blob  # right magic, junk after
                elif kind == 2:
                    blob = protocol.encode_frame(
                        protocol.MSG_PREDICT_REQ, blob)  # junk payload
                elif kind == 3:
                    blob = protocol.encode_frame(99, blob)[:20] + blob
                with socket.create_connection(("127.0.0.1", port),
                                              timeout=5) as sock:
                    sock.sendall(blob)
                    sock.shutdown(socket.SHUT_WR)
                    data = b""
                    try:
                        while True:
                            chunk = sock.recv(65536)
                            if not chunk:
                                break
                            data += chunk
                    except ConnectionResetError:
                        data = b""  # reply lost in flight: not a frame
                if data:
                    msg_type, payload = protocol.read_frame(
                        io.BytesIO(data).read)
                    assert msg_type == protocol.MSG_ERROR
                    error_frames += 1
            # frames shorter than a header legitimately get no reply,
            # but the overwhelming majority must yield an error frame
            assert error_frames >= 800
            # the server survived: a well-formed request still works
            ep = protocol.ExternalDenoiser.connect_tcp("127.0.0.1", port)
            try:
                z = np.ones((1, 1, 2, 2), np.float32)
                eps, var = ep.predict(z, "after fuzz", 10)
                assert (eps == 0).all() and (var == 0).all()
            finally:
                ep.close()
        finally:
            proc.terminate()
            proc.wait(timeout=10)
