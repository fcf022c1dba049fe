import numpy as np
import pytest

from lightattack.imaging import Image, NonDivisibleDimensions
from lightattack.prng import SplitMix64, uniform_array
from lightattack.scene import (
    CameraSpec,
    DimensionMismatch,
    ProjectionPattern,
    ProjectorSpec,
    Rect,
    SceneSpec,
    apply_camera,
    capture,
    pattern_off,
    pattern_single_pixel,
    pattern_white,
    projected_light,
    radiance,
)


def flat_scene(value=0.5, ambient=(0.4, 0.4, 0.4), size=64):
    refl = Image(np.full((size, size, 3), value, dtype=np.float64))
    return SceneSpec(refl, ambient, true_class=0)


def projector(**kwargs):
    defaults = dict(
        black_level=(0.02, 0.02, 0.02),
        intensity=0.8,
        gamma=2.2,
        roi=Rect(0, 0, 64, 64),
        cell_h=2,
        cell_w=2,
    )
    defaults.update(kwargs)
    return ProjectorSpec(**defaults)


def camera(**kwargs):
    defaults = dict(
        wb_target_gray=0.5,
        wb_gain_min=0.5,
        wb_gain_max=2.0,
        shot_noise_sigma0=0.0,
        out_h=32,
        out_w=32,
    )
    defaults.update(kwargs)
    return CameraSpec(**defaults)


class TestPatterns:
    def test_off_is_all_zero(self):
        assert pattern_off().grid.max() == 0

    def test_white_is_all_255(self):
        assert pattern_white().grid.min() == 255

    def test_single_pixel_layout(self):
        p = pattern_single_pixel(0, 0, (255, 0, 0), 0)
        assert list(p.grid[0, 0]) == [255, 0, 0]
        assert p.grid.sum() == 255

    def test_single_pixel_equals_background_when_gray_matches(self):
        p = pattern_single_pixel(4, 9, (7, 7, 7), 7)
        assert np.array_equal(p.grid, np.full((32, 32, 3), 7, np.uint8))

    def test_single_pixel_differs_in_exactly_one_cell(self):
        p = pattern_single_pixel(13, 21, (1, 2, 3), 200)
        background = np.full((32, 32, 3), 200, np.uint8)
        differing = np.any(p.grid != background, axis=2)
        assert differing.sum() == 1
        assert differing[21, 13]

    def test_coordinates_validated(self):
        with pytest.raises(ValueError):
            pattern_single_pixel(32, 0, (0, 0, 0), 0)


class TestProjectedLight:
    def test_zero_pattern_zero_black_level(self):
        light = projected_light(
            projector(black_level=(0, 0, 0)), pattern_off(), 64, 64
        )
        assert light.data.max() == 0.0

    def test_formula_value(self):
        # command 255: L = 0.02 + 0.8 * 1.0**2.2 = 0.82
        light = projected_light(projector(), pattern_white(), 64, 64)
        assert np.allclose(light.data, 0.82)

    def test_cell_block_upscaling(self):
        p = pattern_single_pixel(3, 5, (255, 255, 255), 0)
        light = projected_light(projector(), p, 64, 64)
        bright = light.data[..., 0] > 0.5
        assert bright.sum() == 4  # one 2x2 cell
        assert bright[10:12, 6:8].all()  # rows y*2, cols x*2

    def test_monotone_in_commands(self):
        rng = SplitMix64(31337)
        base = (uniform_array(8, 32 * 32 * 3) * 256).astype(np.uint8).reshape(32, 32, 3)
        raised = base.copy()
        raised[5, 5, 1] = min(255, int(raised[5, 5, 1]) + 10)
        la = projected_light(projector(), ProjectionPattern(base), 64, 64)
        lb = projected_light(projector(), ProjectionPattern(raised), 64, 64)
        assert (lb.data >= la.data).all()

    def test_roi_offset_and_bounds(self):
        spec = projector(roi=Rect(8, 16, 32, 32), cell_h=1, cell_w=1)
        light = projected_light(spec, pattern_white(), 64, 64)
        assert light.data[:8].max() == 0.0
        assert light.data[8:40, 16:48].min() > 0.8
        with pytest.raises(DimensionMismatch):
            projected_light(spec, pattern_white(), 32, 32)


class TestRadiance:
    def test_black_scene_absorbs_everything(self):
        scene = flat_scene(0.0, ambient=(1.0, 1.0, 1.0))
        out = radiance(scene, projector(), pattern_white())
        assert out.data.max() == 0.0

    def test_arithmetic(self):
        # reflectance 1, ambient 0.2, light 0.3 -> 0.5
        scene = flat_scene(1.0, ambient=(0.2, 0.2, 0.2))
        spec = projector(black_level=(0.3, 0.3, 0.3), intensity=0.0)
        out = radiance(scene, spec, pattern_off())
        assert np.allclose(out.data, 0.5)

    def test_saturation(self):
        scene = flat_scene(1.0, ambient=(1.0, 1.0, 1.0))
        out = radiance(scene, projector(), pattern_white())
        assert out.data.min() == 1.0

    def test_black_level_exceeds_ambient_only(self):
        scene = flat_scene(0.5, ambient=(0.4, 0.4, 0.4))
        lit = radiance(scene, projector(intensity=0.0), pattern_off())
        dark = radiance(scene, None, None)
        assert (lit.data > dark.data).all()

    def test_intensity_zero_white_equals_off(self):
        scene = flat_scene(0.5)
        spec = projector(intensity=0.0)
        white = radiance(scene, spec, pattern_white())
        off = radiance(scene, spec, pattern_off())
        assert np.array_equal(white.data, off.data)


class TestCamera:
    def test_wb_fixed_point(self):
        img = Image(np.full((8, 8, 3), 0.5))
        out = apply_camera(img, camera(out_h=8, out_w=8), noise_seed=1)
        assert np.array_equal(out.data, np.full((8, 8, 3), 128, np.uint8))

    def test_wb_closed_form_gains(self):
        # channel means (0.2, 0.4, 0.4), target 0.4 -> red gain 2.0
        data = np.zeros((2, 2, 3))
        data[..., 0] = [[0.0, 0.4], [0.0, 0.4]]  # mean 0.2
        data[..., 1] = 0.4
        data[..., 2] = 0.4
        out = apply_camera(
            Image(data), camera(wb_target_gray=0.4, out_h=2, out_w=2), noise_seed=0
        )
        assert list(out.data[0, :, 0]) == [0, 204]  # 0.4 * 2.0 = 0.8 -> 204
        assert out.data[0, 0, 1] == 102  # gain 1.0 keeps 0.4 -> 102

    def test_gain_clamped(self):
        img = Image(np.full((4, 4, 3), 0.1))
        out = apply_camera(img, camera(out_h=4, out_w=4), noise_seed=0)
        # unclamped gain would be 5.0; clamp at 2.0 -> 0.2 -> 51
        assert np.array_equal(out.data, np.full((4, 4, 3), 51, np.uint8))

    def test_noise_determinism(self):
        img = Image(uniform_array(4, 64 * 64 * 3).reshape(64, 64, 3))
        cam = camera(shot_noise_sigma0=0.05)
        a = apply_camera(img, cam, noise_seed=11)
        b = apply_camera(img, cam, noise_seed=11)
        c = apply_camera(img, cam, noise_seed=12)
        assert np.array_equal(a.data, b.data)
        assert not np.array_equal(a.data, c.data)

    def test_zero_signal_gets_no_noise(self):
        img = Image(np.zeros((4, 4, 3)))
        out = apply_camera(img, camera(shot_noise_sigma0=0.5, out_h=4, out_w=4), 3)
        assert out.data.max() == 0

    def test_rejects_non_divisible_output(self):
        img = Image(np.zeros((10, 10, 3)))
        with pytest.raises(NonDivisibleDimensions):
            apply_camera(img, camera(out_h=3, out_w=3), 0)


class TestCapture:
    def test_composition_matches_manual_pipeline(self):
        scene = flat_scene(0.7)
        cam = camera()
        manual = apply_camera(radiance(scene, None, None), cam, 5)
        composed = capture(scene, None, None, cam, 5)
        assert np.array_equal(manual.data, composed.data)

    def test_deterministic(self):
        scene = flat_scene(0.7)
        a = capture(scene, projector(), pattern_white(), camera(), 9)
        b = capture(scene, projector(), pattern_white(), camera(), 9)
        assert np.array_equal(a.data, b.data)

    def test_white_differs_from_off(self, fixture_dir):
        from lightattack.config import load_scene_config

        bundle = load_scene_config(fixture_dir / "airplane.cfg")
        off = capture(bundle.scene, bundle.projector, pattern_off(), bundle.camera, 0)
        white = capture(bundle.scene, bundle.projector, pattern_white(), bundle.camera, 0)
        assert np.any(off.data != white.data)

    def test_background_spillover(self):
        # object in the left half; a pixel landing on the right half
        # (reflective background) still changes the capture
        refl = np.full((64, 64, 3), 0.3)
        refl[:, :32] = 0.8
        scene = SceneSpec(Image(refl), (0.4, 0.4, 0.4), 0)
        on_background = pattern_single_pixel(30, 16, (0, 0, 0), 255)
        a = capture(scene, projector(), pattern_white(), camera(), 0)
        b = capture(scene, projector(), on_background, camera(), 0)
        assert np.any(a.data != b.data)


def random_triple(seed):
    """Random (scene, projector, pattern) for property sweeps."""
    rng = SplitMix64(seed)
    size = 64
    refl = uniform_array(rng.next_word(), size * size * 3).reshape(size, size, 3)
    zero_mask = uniform_array(rng.next_word(), size * size).reshape(size, size) < 0.1
    refl[zero_mask] = 0.0
    ambient = tuple(rng.uniform() for _ in range(3))
    scene = SceneSpec(Image(refl), ambient, 0)
    cell = 1 if rng.uniform() < 0.5 else 2
    span = 32 * cell
    max_off = size - span
    top = int(rng.uniform() * (max_off + 1))
    left = int(rng.uniform() * (max_off + 1))
    spec = ProjectorSpec(
        black_level=tuple(rng.uniform() * 0.1 for _ in range(3)),
        intensity=rng.uniform(),
        gamma=0.5 + rng.uniform() * 2.5,
        roi=Rect(top, left, span, span),
        cell_h=cell,
        cell_w=cell,
    )
    grid = (uniform_array(rng.next_word(), 32 * 32 * 3) * 256).astype(np.uint8)
    pattern = ProjectionPattern(grid.reshape(32, 32, 3))
    return scene, spec, pattern, zero_mask


class TestPhysicsInvariants:
    def test_random_triples(self):
        for seed in range(100):
            scene, spec, pattern, zero_mask = random_triple(seed)
            out = radiance(scene, spec, pattern)
            # zero reflectance -> zero output
            assert out.data[zero_mask].max() == 0.0
            # light only adds: with-pattern >= projector-free
            dark = radiance(scene, None, None)
            assert (out.data >= dark.data).all()
            # pointwise pattern monotonicity
            bumped = pattern.grid.copy()
            bumped = np.minimum(255, bumped.astype(np.int64) + (seed % 7)).astype(np.uint8)
            higher = radiance(scene, spec, ProjectionPattern(bumped))
            assert (higher.data >= out.data).all()
