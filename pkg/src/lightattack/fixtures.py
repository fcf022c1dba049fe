"""Bundled fixture scenes: ten deterministic desk-scale "figurines".

Every fixture is generated procedurally from fixed seeds, so the bundle
can be rebuilt bit-for-bit anywhere (``python -m lightattack.fixtures
OUTDIR``). Two scenes anchor the acceptance behavior:

* ``airplane`` (susceptible): a dark, strongly patterned scene whose
  white-light capture is nearly identical to the ``truck`` centroid, so
  projected light collapses its true-class probability. The truck scene
  carries a handful of darkened cells that a well-placed dark projected
  pixel can imitate, which is what differential evolution can exploit
  beyond plain white light.
* ``ship`` (invariant): binary reflectance under full ambient light.
  Radiance is saturated wherever the surface reflects at all, so no
  projected pattern can change the capture; the attack statistics equal
  the baseline exactly.

The remaining seven classes are wide-contrast random block patterns
that keep all centroids far apart.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from .classifier import (
    DEFAULT_LABELS,
    DEFAULT_TEMPERATURE,
    CentroidModel,
    LabelSet,
    fit_centroids,
    save_model,
)
from .config import SceneBundle
from .imaging import Image, dequantize, quantize, write_ppm_file
from .prng import SplitMix64, derive_seed
from .scene import CameraSpec, ProjectorSpec, Rect, SceneSpec, capture

SCENE_SIZE = 64
BLOCK = 8  # reflectance texture blocks, scene pixels

SUSCEPTIBLE_CLASS = "airplane"
DECOY_CLASS = "truck"
INVARIANT_CLASS = "ship"

_PATTERN_SEED = 0x5CE11E
_SPOT_SEED = 0x51D07
N_SPOTS = 48  # darkened truck cells a projected pixel can imitate
SPOT_FACTOR = 0.25

FIXTURE_MASTER_SEED = 7

_AMBIENT = {
    SUSCEPTIBLE_CLASS: (0.25, 0.25, 0.25),
    DECOY_CLASS: (1.0, 1.0, 1.0),
    INVARIANT_CLASS: (1.0, 1.0, 1.0),
}
_DEFAULT_AMBIENT = (0.5, 0.5, 0.5)


def fixture_projector() -> ProjectorSpec:
    return ProjectorSpec(
        black_level=(0.02, 0.02, 0.02),
        intensity=0.8,
        gamma=2.2,
        roi=Rect(0, 0, SCENE_SIZE, SCENE_SIZE),
        cell_h=2,
        cell_w=2,
    )


def fixture_camera() -> CameraSpec:
    # Noise-free: the acceptance protocol wants deterministic captures.
    return CameraSpec(
        wb_target_gray=0.5,
        wb_gain_min=0.5,
        wb_gain_max=2.0,
        shot_noise_sigma0=0.0,
        out_h=32,
        out_w=32,
    )


def _block_values(seed: int, lo: float, hi: float) -> np.ndarray:
    """Random per-channel reflectance blocks upscaled to scene size."""
    rng = SplitMix64(seed)
    n = SCENE_SIZE // BLOCK
    blocks = np.array(
        [[[lo + rng.uniform() * (hi - lo) for _ in range(3)] for _ in range(n)] for _ in range(n)]
    )
    return np.repeat(np.repeat(blocks, BLOCK, axis=0), BLOCK, axis=1)


def _spot_cells() -> list[tuple[int, int]]:
    """Deterministic distinct projector cells darkened in the decoy scene."""
    rng = SplitMix64(_SPOT_SEED)
    cells: list[tuple[int, int]] = []
    seen = set()
    while len(cells) < N_SPOTS:
        x = int(rng.uniform() * 32)
        y = int(rng.uniform() * 32)
        if (x, y) not in seen:
            seen.add((x, y))
            cells.append((x, y))
    return cells


def _reflectance(name: str) -> np.ndarray:
    index = DEFAULT_LABELS.index(name)
    seed = derive_seed(_PATTERN_SEED, index)
    if name == INVARIANT_CLASS:
        # Binary reflectance: fully reflective object on a black ground.
        raw = _block_values(seed, 0.0, 1.0)
        return (raw >= 0.55).astype(np.float64)
    if name == DECOY_CLASS:
        # Same texture as the susceptible scene, with darkened spot cells.
        base = _reflectance(SUSCEPTIBLE_CLASS).copy()
        for x, y in _spot_cells():
            top, left = y * 2, x * 2
            base[top : top + 2, left : left + 2] *= SPOT_FACTOR
        return base
    if name == SUSCEPTIBLE_CLASS:
        return _block_values(seed, 0.10, 0.90)
    return _block_values(seed, 0.08, 0.92)


def fixture_bundle(name: str) -> SceneBundle:
    """Scene + rig for one fixture class, reflectance quantized to bytes."""
    if name not in DEFAULT_LABELS:
        raise ValueError(f"unknown fixture class {name!r}")
    refl8 = quantize(Image(_reflectance(name)))
    scene = SceneSpec(
        reflectance=dequantize(refl8),
        ambient=_AMBIENT.get(name, _DEFAULT_AMBIENT),
        true_class=DEFAULT_LABELS.index(name),
    )
    return SceneBundle(scene, fixture_projector(), fixture_camera())


def fixture_model(temperature: float = DEFAULT_TEMPERATURE) -> CentroidModel:
    """Centroid model fit on one baseline capture per fixture class."""
    examples = []
    for name in DEFAULT_LABELS:
        bundle = fixture_bundle(name)
        img = capture(bundle.scene, None, None, bundle.camera, noise_seed=0)
        examples.append((img, name))
    return fit_centroids(examples, temperature, LabelSet())


_SCENE_CFG = """\
# fixture scene: {name}
reflectance = {name}.ppm
ambient = {ambient}
true_class = {name}
projector.black_level = 0.02,0.02,0.02
projector.intensity = 0.8
projector.gamma = 2.2
projector.roi = 0,0,64,64
projector.cell = 2,2
camera.wb_target_gray = 0.5
camera.wb_gain_min = 0.5
camera.wb_gain_max = 2.0
camera.shot_noise_sigma0 = 0.0
camera.out_size = 32,32
"""

_EXPERIMENT_CFG = """\
# fixture experiment: {title}
scene = {name}.cfg
classifier = builtin
model = model.json
background = 255
captures_per_condition = 20
master_seed = {seed}
attack.mode = nontargeted
de.population_size = 50
de.generations = 4
de.F = 0.5
de.CR = 0.9
de.fitness_repeats = 1
de.include_gen0 = true
"""


def write_fixture_tree(outdir: str | Path) -> Path:
    """Write scene PPMs, scene configs, the model, and experiment configs."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for name in DEFAULT_LABELS:
        bundle = fixture_bundle(name)
        write_ppm_file(outdir / f"{name}.ppm", quantize(bundle.scene.reflectance))
        ambient = ",".join(repr(a) for a in bundle.scene.ambient)
        (outdir / f"{name}.cfg").write_text(
            _SCENE_CFG.format(name=name, ambient=ambient), encoding="utf-8"
        )
    save_model(outdir / "model.json", fixture_model())
    (outdir / "susceptible.cfg").write_text(
        _EXPERIMENT_CFG.format(
            title="susceptible", name=SUSCEPTIBLE_CLASS, seed=FIXTURE_MASTER_SEED
        ),
        encoding="utf-8",
    )
    (outdir / "invariant.cfg").write_text(
        _EXPERIMENT_CFG.format(
            title="invariant", name=INVARIANT_CLASS, seed=FIXTURE_MASTER_SEED
        ),
        encoding="utf-8",
    )
    return outdir


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    if len(args) != 1:
        print("usage: python -m lightattack.fixtures OUTDIR", file=sys.stderr)
        return 2
    path = write_fixture_tree(args[0])
    print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
