import numpy as np
import pytest

from telecell import pointcloud as pc

# ---------------------------------------------------------------------------
# brute-force reference implementations (plain loops, scalar arithmetic)
# ---------------------------------------------------------------------------

def oracle_scan_1d(values, alpha, delta, reverse):
    """Reference for one recursive pass over a single scan line."""
    out = list(values)
    n = len(out)
    order = range(n - 2, -1, -1) if reverse else range(1, n)
    step = 1 if reverse else -1
    for j in order:
        cur = out[j]  # untouched input at j at this point
        prev = out[j + step]
        if cur > 0:
            if prev > 0 and abs(prev - cur) < delta:
                out[j] = cur + alpha * (prev - cur)
        else:
            jn = j - step
            filled = False
            if 0 <= jn < n:
                nxt = out[jn]  # not yet processed in this direction
                if prev > 0 and nxt > 0 and abs(prev - nxt) < delta:
                    out[j] = prev
                    filled = True
            if not filled:
                out[j] = 0.0
    return out


def oracle_spatial(grid, magnitude, alpha, delta):
    a = [list(row) for row in np.asarray(grid, dtype=float)]
    rows = len(a)
    cols = len(a[0])
    for _ in range(magnitude):
        for r in range(rows):
            a[r] = oracle_scan_1d(a[r], alpha, delta, reverse=False)
        for r in range(rows):
            a[r] = oracle_scan_1d(a[r], alpha, delta, reverse=True)
        for c in range(cols):
            col = oracle_scan_1d([a[r][c] for r in range(rows)], alpha, delta,
                                 reverse=False)
            for r in range(rows):
                a[r][c] = col[r]
        for c in range(cols):
            col = oracle_scan_1d([a[r][c] for r in range(rows)], alpha, delta,
                                 reverse=True)
            for r in range(rows):
                a[r][c] = col[r]
    return np.array(a)


def oracle_temporal(frames, alpha, delta, persistence):
    """Reference for the whole temporal sequence, per-pixel loops."""
    frames = [np.asarray(f, dtype=float) for f in frames]
    shape = frames[0].shape
    hist = np.zeros(shape)
    miss = np.full(shape, persistence + 1, dtype=int)
    outs = []
    for f in frames:
        out = np.zeros(shape)
        for r in range(shape[0]):
            for c in range(shape[1]):
                cur = f[r, c]
                h = hist[r, c]
                if cur > 0:
                    miss[r, c] = 0
                    if h > 0 and abs(cur - h) < delta:
                        out[r, c] = alpha * cur + (1.0 - alpha) * h
                    else:
                        out[r, c] = cur
                else:
                    miss[r, c] += 1
                    if h > 0 and miss[r, c] <= persistence:
                        out[r, c] = h
                    else:
                        out[r, c] = 0.0
                hist[r, c] = out[r, c]
        outs.append(out)
    return outs


def random_disparity(rng, shape=(16, 16), invalid_frac=0.2):
    vals = rng.uniform(30.0, 90.0, shape)
    vals[rng.random(shape) < invalid_frac] = 0.0
    return vals


def frame_of(values) -> pc.DisparityFrame:
    return pc.DisparityFrame(np.asarray(values, dtype=float))


# ---------------------------------------------------------------------------
# threshold / disparity
# ---------------------------------------------------------------------------

def test_threshold_examples():
    depth = np.array([[1200.0, 500.0, 0.0, 1000.0, 0.5]])
    out = pc.threshold_filter(pc.DepthFrame(depth), 0.0, 1000.0)
    assert out.depth[0, 0] == 0.0        # beyond 1 m
    assert out.depth[0, 1] == 500.0      # in range, unchanged
    assert out.depth[0, 2] == 0.0        # invalid stays invalid
    assert out.depth[0, 3] == 1000.0     # boundary inclusive
    assert out.depth[0, 4] == 0.5


def test_threshold_all_invalid_frame():
    out = pc.threshold_filter(pc.DepthFrame(np.zeros((4, 4))), 0, 1000)
    assert not out.valid.any()


def test_threshold_idempotent():
    rng = np.random.default_rng(1)
    depth = rng.uniform(0, 2000, (32, 32))
    once = pc.threshold_filter(pc.DepthFrame(depth), 100, 900)
    twice = pc.threshold_filter(once, 100, 900)
    assert np.array_equal(once.depth, twice.depth)


def test_disparity_example_and_round_trip():
    frame = pc.DepthFrame(np.array([[500.0, 0.0]]))
    disp = pc.to_disparity(frame, 32000.0)
    assert disp.disp[0, 0] == pytest.approx(64.0)
    assert disp.disp[0, 1] == 0.0  # invalid maps to invalid, no division fault
    rng = np.random.default_rng(2)
    depth = rng.uniform(100, 1000, (16, 16))
    depth[rng.random((16, 16)) < 0.3] = 0.0
    back = pc.from_disparity(pc.to_disparity(pc.DepthFrame(depth), 32000.0), 32000.0)
    valid = depth > 0
    assert np.all(np.abs(back.depth[valid] - depth[valid]) / depth[valid] < 1e-6)
    assert np.array_equal(back.depth == 0, depth == 0)


# ---------------------------------------------------------------------------
# spatial filter
# ---------------------------------------------------------------------------

def test_spatial_single_pass_smooths_small_gap():
    row = np.array([[100.0, 110.0]])
    pc._scan_pass(row, alpha=0.5, delta=20.0, reverse=False)
    assert np.array_equal(row, [[100.0, 105.0]])


def test_spatial_edge_at_delta_preserved_exactly():
    frame = frame_of([[100.0, 200.0]])
    out = pc.spatial_filter(frame, magnitude=2, alpha=0.5, delta=20.0)
    assert np.array_equal(out.disp, [[100.0, 200.0]])


def test_spatial_matches_oracle_on_random_frames():
    rng = np.random.default_rng(3)
    for _ in range(100):
        grid = random_disparity(rng)
        expect = oracle_spatial(grid, 2, 0.5, 20.0)
        got = pc.spatial_filter(frame_of(grid), 2, 0.5, 20.0).disp
        assert np.array_equal(got, expect)  # bit-for-bit


def test_spatial_matches_oracle_other_params():
    rng = np.random.default_rng(4)
    for magnitude, alpha, delta in [(1, 0.25, 5.0), (3, 1.0, 50.0)]:
        grid = random_disparity(rng, shape=(9, 13))
        expect = oracle_spatial(grid, magnitude, alpha, delta)
        got = pc.spatial_filter(frame_of(grid), magnitude, alpha, delta).disp
        assert np.array_equal(got, expect)


def test_spatial_fills_single_pixel_hole():
    grid = np.array([[50.0, 0.0, 52.0, 0.0, 0.0, 51.0]])
    out = pc.spatial_filter(frame_of(grid), 1, 0.5, 20.0).disp[0]
    assert out[1] > 0          # single-pixel gap filled
    assert out[3] == 0.0       # two-pixel gap stays open
    assert out[4] == 0.0


def test_spatial_edges_never_smoothed_across():
    # piecewise-constant regions separated by >= delta stay exact
    rng = np.random.default_rng(5)
    for _ in range(25):
        grid = np.where(rng.random((12, 12)) < 0.5, 100.0, 150.0)
        out = pc.spatial_filter(frame_of(grid), 2, 0.5, 20.0).disp
        assert np.array_equal(out, grid)


# ---------------------------------------------------------------------------
# temporal filter
# ---------------------------------------------------------------------------

def test_temporal_blend_example():
    f = pc.TemporalFilter(alpha=0.4, delta=20.0, persistence=3)
    f.apply(frame_of([[100.0]]))
    out = f.apply(frame_of([[104.0]]))
    assert out.disp[0, 0] == pytest.approx(101.6)


def test_temporal_reset_on_large_gap():
    f = pc.TemporalFilter(alpha=0.4, delta=20.0, persistence=3)
    f.apply(frame_of([[100.0]]))
    out = f.apply(frame_of([[130.0]]))
    assert out.disp[0, 0] == 130.0
    # history reset: the next blend pulls toward 130, not 100
    out = f.apply(frame_of([[132.0]]))
    assert out.disp[0, 0] == pytest.approx(0.4 * 132.0 + 0.6 * 130.0)


def test_temporal_persistence_holds_three_frames():
    f = pc.TemporalFilter(alpha=0.4, delta=20.0, persistence=3)
    f.apply(frame_of([[80.0]]))
    held = [f.apply(frame_of([[0.0]])).disp[0, 0] for _ in range(4)]
    assert held[0] == 80.0 and held[1] == 80.0 and held[2] == 80.0
    assert held[3] == 0.0  # invalid on the fourth miss


def test_temporal_identity_config():
    f = pc.TemporalFilter(alpha=1.0, delta=20.0, persistence=0)
    rng = np.random.default_rng(6)
    for _ in range(5):
        grid = random_disparity(rng, shape=(8, 8))
        out = f.apply(frame_of(grid)).disp
        assert np.array_equal(out, grid)


def test_temporal_matches_oracle_on_random_sequences():
    rng = np.random.default_rng(7)
    frames = [random_disparity(rng, shape=(16, 16), invalid_frac=0.3)
              for _ in range(8)]
    expect = oracle_temporal(frames, 0.4, 20.0, 3)
    f = pc.TemporalFilter(0.4, 20.0, 3)
    for frame, exp in zip(frames, expect):
        assert np.array_equal(f.apply(frame_of(frame)).disp, exp)  # bit-for-bit


# ---------------------------------------------------------------------------
# pipeline, deprojection, synthetic scenes
# ---------------------------------------------------------------------------

def test_pipeline_noiseless_plane_within_1mm():
    frames = pc.synth_scene(600.0, noise_sigma_mm=0.0, dropout_rate=0.0,
                            seed=0, n_frames=3)
    pipe = pc.Pipeline()
    for frame in frames:
        cloud = pipe.process(frame)
        assert len(cloud) == frame.width * frame.height
        assert np.all(np.abs(cloud.points[:, 2] - 600.0) < 1.0)


def test_pipeline_empty_frame_empty_cloud():
    cloud = pc.Pipeline().process(pc.DepthFrame(np.zeros((16, 16))))
    assert len(cloud) == 0


def test_pipeline_never_invents_geometry():
    # every valid output pixel traces to a valid input within the frame
    # neighborhood (spatial fill) or the persistence window (temporal hold)
    params = pc.PipelineParams()
    pipe = pc.Pipeline(params)
    rng = np.random.default_rng(8)
    recent_valid = []
    frames = list(pc.synth_scene(500.0, noise_sigma_mm=3.0, dropout_rate=0.3,
                                 seed=9, width=32, height=32, n_frames=6))
    for frame in frames:
        thresholded = pc.threshold_filter(frame, params.z_min_mm, params.z_max_mm)
        in_valid = thresholded.valid
        pipe.process(frame)
        out_valid = pipe.last_depth.valid
        reach = in_valid.copy()
        for _ in range(4 * params.spatial_magnitude):
            grown = reach.copy()
            grown[1:, :] |= reach[:-1, :]
            grown[:-1, :] |= reach[1:, :]
            grown[:, 1:] |= reach[:, :-1]
            grown[:, :-1] |= reach[:, 1:]
            reach = grown
        window = reach.copy()
        for past in recent_valid[-params.persistence:]:
            window |= past
        assert not np.any(out_valid & ~window)
        recent_valid.append(reach)


def test_deprojection_pinhole_model():
    depth = np.zeros((4, 6))
    depth[1, 2] = 400.0
    ii = pc.Intrinsics(fx=100.0, fy=120.0, cx=3.0, cy=2.0)
    cloud = pc.deproject(pc.DepthFrame(depth, ii))
    assert len(cloud) == 1
    x, y, z = cloud.points[0]
    assert x == pytest.approx((2 - 3.0) * 400.0 / 100.0)
    assert y == pytest.approx((1 - 2.0) * 400.0 / 120.0)
    assert z == 400.0


def test_synth_scene_deterministic():
    a = list(pc.synth_scene(600.0, noise_sigma_mm=5.0, dropout_rate=0.1,
                            seed=33, n_frames=3))
    b = list(pc.synth_scene(600.0, noise_sigma_mm=5.0, dropout_rate=0.1,
                            seed=33, n_frames=3))
    for fa, fb in zip(a, b):
        assert np.array_equal(fa.depth, fb.depth)


def test_synth_scene_exact_when_noiseless():
    box = pc.SceneBox(10, 20, 30, 40, 450.0)
    frame = next(pc.synth_scene(600.0, [box], 0.0, 0.0, seed=0, n_frames=1))
    assert np.all(frame.depth[20:40, 10:30] == 450.0)
    assert frame.depth[0, 0] == 600.0


def test_synth_scene_dropout_fraction():
    frame = next(pc.synth_scene(600.0, noise_sigma_mm=0.0, dropout_rate=0.1,
                                seed=5, width=256, height=256, n_frames=1))
    frac = np.mean(frame.depth == 0)
    assert abs(frac - 0.10) < 0.01  # binomial: sd ~ 0.0012 at n=65536


def test_pipeline_rejects_dimension_change():
    f = pc.TemporalFilter()
    f.apply(frame_of(np.ones((4, 4))))
    with pytest.raises(ValueError):
        f.apply(frame_of(np.ones((5, 5))))


def test_params_validation():
    with pytest.raises(ValueError):
        pc.PipelineParams(spatial_alpha=0.0)
    with pytest.raises(ValueError):
        pc.PipelineParams(temporal_delta=-1.0)
    with pytest.raises(ValueError):
        pc.PipelineParams(persistence=-1)
    with pytest.raises(ValueError):
        pc.PipelineParams(z_min_mm=500, z_max_mm=100)


# ---------------------------------------------------------------------------
# stream encoding and frame container
# ---------------------------------------------------------------------------

def test_decimate_caps_point_count():
    pts = np.arange(180000, dtype=float).reshape(-1, 3)
    out = pc.decimate(pts, 20000)
    assert len(out) <= 20000
    assert np.array_equal(out[0], pts[0])


def test_pack_unpack_round_trip():
    rng = np.random.default_rng(9)
    pts = rng.uniform(-500, 500, (1234, 3)).astype(np.float32)
    again = pc.unpack_points(pc.pack_points(pts))
    assert np.array_equal(again, pts)


def test_unpack_rejects_bad_length():
    with pytest.raises(ValueError):
        pc.unpack_points(b"\x01")
    with pytest.raises(ValueError):
        pc.unpack_points(pc.pack_points(np.zeros((2, 3)))[:-1])


def test_depth_file_round_trip(tmp_path):
    frames = list(pc.synth_scene(600.0, [pc.SceneBox(5, 5, 20, 20, 420.0)],
                                 noise_sigma_mm=2.0, dropout_rate=0.05,
                                 seed=10, width=48, height=32, n_frames=4))
    path = tmp_path / "scene.depth"
    assert pc.write_depth_file(path, frames) == 4
    loaded = pc.read_depth_file(path)
    assert len(loaded) == 4
    for orig, back in zip(frames, loaded):
        assert back.width == orig.width and back.height == orig.height
        assert np.all(np.abs(back.depth - np.rint(orig.depth)) <= 0.5)
        assert back.intrinsics.fx == orig.intrinsics.fx


def test_depth_file_truncation_detected(tmp_path):
    frames = list(pc.synth_scene(600.0, n_frames=1, width=16, height=16))
    path = tmp_path / "scene.depth"
    pc.write_depth_file(path, frames)
    data = path.read_bytes()
    path.write_bytes(data[:-10])
    with pytest.raises(ValueError):
        pc.read_depth_file(path)
