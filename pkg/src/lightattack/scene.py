"""Simulated optical channel: scene, additive projector, and camera.

Replaces the physical rig with a radiometric model. A reflectance scene
under ambient light is illuminated by a projector that can only add
light (with a non-zero black level), and captured by a camera that
applies gray-world white balance, signal-dependent shot noise, box
downsampling, and 8-bit quantization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import Image, Image8, NonDivisibleDimensions, downsample_box, quantize
from .prng import gauss_array

PATTERN_GRID = 32


class DimensionMismatch(Exception):
    """Scene, projector ROI, or camera dimensions are incompatible."""


@dataclass(frozen=True)
class SceneSpec:
    """Surface reflectance plus ambient illumination and the true label."""

    reflectance: Image
    ambient: tuple[float, float, float]
    true_class: int

    def __post_init__(self):
        amb = tuple(float(a) for a in self.ambient)
        if len(amb) != 3 or any(a < 0.0 or a > 1.0 for a in amb):
            raise ValueError(f"ambient must be three values in [0, 1], got {amb}")
        if self.true_class < 0:
            raise ValueError("true_class must be a non-negative label index")
        object.__setattr__(self, "ambient", amb)


@dataclass(frozen=True)
class Rect:
    top: int
    left: int
    height: int
    width: int


@dataclass(frozen=True)
class ProjectorSpec:
    """Additive projector: black level floor, intensity gain, gamma, ROI.

    The 32x32 command grid maps onto ``roi`` with each grid cell covering
    a cell_h x cell_w block of scene pixels.
    """

    black_level: tuple[float, float, float] = (0.02, 0.02, 0.02)
    intensity: float = 0.8
    gamma: float = 2.2
    roi: Rect = Rect(0, 0, 64, 64)
    cell_h: int = 2
    cell_w: int = 2

    def __post_init__(self):
        bl = tuple(float(b) for b in self.black_level)
        if len(bl) != 3 or any(b < 0.0 or b >= 1.0 for b in bl):
            raise ValueError(f"black_level must be three values in [0, 1), got {bl}")
        if not 0.0 <= self.intensity <= 1.0:
            raise ValueError("intensity must lie in [0, 1]")
        if not self.gamma > 0.0:
            raise ValueError("gamma must be positive")
        if self.cell_h < 1 or self.cell_w < 1:
            raise ValueError("cell dimensions must be positive")
        if self.roi.height != PATTERN_GRID * self.cell_h:
            raise ValueError("roi height must equal 32 * cell_h")
        if self.roi.width != PATTERN_GRID * self.cell_w:
            raise ValueError("roi width must equal 32 * cell_w")
        if self.roi.top < 0 or self.roi.left < 0:
            raise ValueError("roi must not extend past the scene origin")
        object.__setattr__(self, "black_level", bl)


@dataclass(frozen=True)
class CameraSpec:
    """Gray-world white balance, shot noise, and output resolution."""

    wb_target_gray: float = 0.5
    wb_gain_min: float = 0.5
    wb_gain_max: float = 2.0
    shot_noise_sigma0: float = 0.01
    out_h: int = 32
    out_w: int = 32

    def __post_init__(self):
        if not 0.0 < self.wb_target_gray < 1.0:
            raise ValueError("wb_target_gray must lie in (0, 1)")
        if not (0.0 < self.wb_gain_min <= 1.0 <= self.wb_gain_max):
            raise ValueError("white-balance gains must bracket 1")
        if self.shot_noise_sigma0 < 0.0:
            raise ValueError("shot_noise_sigma0 must be non-negative")
        if self.out_h < 1 or self.out_w < 1:
            raise ValueError("output resolution must be positive")


@dataclass(frozen=True)
class ProjectionPattern:
    """32x32 grid of 8-bit RGB commands, indexed grid[y, x]."""

    grid: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.grid)
        if arr.shape != (PATTERN_GRID, PATTERN_GRID, 3):
            raise ValueError(f"pattern grid must be 32x32x3, got {arr.shape}")
        if arr.dtype != np.uint8:
            if np.any(arr < 0) or np.any(arr > 255):
                raise ValueError("pattern commands must lie in 0..255")
            arr = arr.astype(np.uint8)
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "grid", arr)


def pattern_off() -> ProjectionPattern:
    """All commands zero (digital black)."""
    return ProjectionPattern(np.zeros((PATTERN_GRID, PATTERN_GRID, 3), np.uint8))


def pattern_white() -> ProjectionPattern:
    """All commands 255 (full white)."""
    return ProjectionPattern(np.full((PATTERN_GRID, PATTERN_GRID, 3), 255, np.uint8))


def pattern_single_pixel(
    x: int, y: int, rgb: tuple[int, int, int], background: int
) -> ProjectionPattern:
    """Uniform gray background with cell (x, y) set to rgb.

    x is the grid column, y the grid row.
    """
    if not (0 <= x < PATTERN_GRID and 0 <= y < PATTERN_GRID):
        raise ValueError(f"pixel coordinates ({x}, {y}) outside the 32x32 grid")
    grid = np.full((PATTERN_GRID, PATTERN_GRID, 3), background, np.uint8)
    grid[y, x] = rgb
    return ProjectionPattern(grid)


def projected_light(
    projector: ProjectorSpec,
    pattern: ProjectionPattern,
    scene_h: int,
    scene_w: int,
) -> Image:
    """Light field the projector adds to the scene, scene-sized.

    Per channel, each commanded cell emits
    ``clamp(black_level + intensity * (command/255)**gamma, 0, 1)``
    over its cell_h x cell_w block; everything outside the ROI is dark.
    """
    roi = projector.roi
    if roi.top + roi.height > scene_h or roi.left + roi.width > scene_w:
        raise DimensionMismatch(
            f"projector roi {roi} does not fit a {scene_h}x{scene_w} scene"
        )
    commands = pattern.grid.astype(np.float64) / 255.0
    cell_light = np.asarray(projector.black_level) + projector.intensity * (
        commands**projector.gamma
    )
    np.clip(cell_light, 0.0, 1.0, out=cell_light)
    block = np.repeat(
        np.repeat(cell_light, projector.cell_h, axis=0), projector.cell_w, axis=1
    )
    light = np.zeros((scene_h, scene_w, 3), dtype=np.float64)
    light[roi.top : roi.top + roi.height, roi.left : roi.left + roi.width] = block
    return Image(light)


def radiance(
    scene: SceneSpec,
    projector: ProjectorSpec | None,
    pattern: ProjectionPattern | None,
) -> Image:
    """Scene radiance: ``min(1, reflectance * (ambient + light))``.

    ``projector=None`` (with ``pattern=None``) models the rig with the
    projector fully disabled: no light at all, not even black level.
    """
    refl = scene.reflectance.data
    ambient = np.asarray(scene.ambient)
    if projector is None or pattern is None:
        if (projector is None) != (pattern is None):
            raise ValueError("projector and pattern must be supplied together")
        illum = ambient
    else:
        light = projected_light(projector, pattern, refl.shape[0], refl.shape[1])
        illum = ambient + light.data
    return Image(np.minimum(1.0, refl * illum))


def apply_camera(img: Image, camera: CameraSpec, noise_seed: int) -> Image8:
    """Camera pipeline: white balance, shot noise, downsample, quantize.

    1. Gray-world white balance: per channel c, gain
       ``clamp(wb_target_gray / max(mean_c, 1e-6), wb_gain_min, wb_gain_max)``,
       then clamp samples to [0, 1].
    2. Shot noise: add independent gaussians with standard deviation
       ``shot_noise_sigma0 * sqrt(sample)``, drawn from ``noise_seed`` in
       row-major pixel/channel order; clamp to [0, 1].
    3. Box downsample to out_h x out_w.
    4. Quantize to bytes.
    """
    h, w = img.height, img.width
    if h % camera.out_h != 0 or w % camera.out_w != 0:
        raise NonDivisibleDimensions(
            f"camera output {camera.out_h}x{camera.out_w} must divide {h}x{w}"
        )
    means = img.data.mean(axis=(0, 1))
    gains = np.clip(
        camera.wb_target_gray / np.maximum(means, 1e-6),
        camera.wb_gain_min,
        camera.wb_gain_max,
    )
    balanced = np.clip(img.data * gains, 0.0, 1.0)
    if camera.shot_noise_sigma0 > 0.0:
        noise = gauss_array(noise_seed, balanced.size).reshape(balanced.shape)
        balanced = balanced + camera.shot_noise_sigma0 * np.sqrt(balanced) * noise
        np.clip(balanced, 0.0, 1.0, out=balanced)
    return quantize(downsample_box(Image(balanced), camera.out_h, camera.out_w))


def capture(
    scene: SceneSpec,
    projector: ProjectorSpec | None,
    pattern: ProjectionPattern | None,
    camera: CameraSpec,
    noise_seed: int,
) -> Image8:
    """One project -> image formation -> camera pass."""
    return apply_camera(radiance(scene, projector, pattern), camera, noise_seed)
