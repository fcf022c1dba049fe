"""Flat key=value config files for scenes and experiments.

Two file kinds share one syntax: one `key = value` pair per line, blank
lines and `#` comments ignored, unknown keys rejected. Vector values are
comma-separated. A scene config bundles the reflectance PPM path with
ambient light, the true class, and the projector/camera parameters; an
experiment config points at a scene config and adds the attack protocol
settings. See the README for the full key reference.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

from .classifier import LabelSet
from .imaging import read_ppm_file, dequantize
from .optimizer import DEConfig
from .prng import derive_seed
from .scene import CameraSpec, ProjectorSpec, Rect, SceneSpec


class ConfigError(Exception):
    """Config file is malformed or contains unknown/invalid keys."""


def parse_kv(text: str, path: str = "<config>") -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        if key in pairs:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        pairs[key] = value.strip()
    return pairs


def _floats(value: str, n: int, key: str) -> tuple[float, ...]:
    parts = [p.strip() for p in value.split(",")]
    if len(parts) != n:
        raise ConfigError(f"{key}: expected {n} comma-separated values")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def _ints(value: str, n: int, key: str) -> tuple[int, ...]:
    parts = [p.strip() for p in value.split(",")]
    if len(parts) != n:
        raise ConfigError(f"{key}: expected {n} comma-separated integers")
    try:
        return tuple(int(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc


SCENE_KEYS = {
    "reflectance",
    "ambient",
    "true_class",
    "projector.black_level",
    "projector.intensity",
    "projector.gamma",
    "projector.roi",
    "projector.cell",
    "camera.wb_target_gray",
    "camera.wb_gain_min",
    "camera.wb_gain_max",
    "camera.shot_noise_sigma0",
    "camera.out_size",
}


@dataclass(frozen=True)
class SceneBundle:
    """A parsed scene config: scene plus its rig parameters."""

    scene: SceneSpec
    projector: ProjectorSpec
    camera: CameraSpec


def load_scene_config(
    path, labels: LabelSet = LabelSet()
) -> SceneBundle:
    """Load a scene sidecar config; paths resolve relative to the file."""
    path = Path(path)
    pairs = parse_kv(path.read_text(encoding="utf-8"), str(path))
    unknown = set(pairs) - SCENE_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown keys: {', '.join(sorted(unknown))}")
    for required in ("reflectance", "ambient", "true_class"):
        if required not in pairs:
            raise ConfigError(f"{path}: missing required key {required!r}")

    reflectance = dequantize(read_ppm_file(path.parent / pairs["reflectance"]))
    ambient = _floats(pairs["ambient"], 3, "ambient")
    raw_class = pairs["true_class"]
    true_class = labels.index_of(int(raw_class) if raw_class.isdigit() else raw_class)
    scene = SceneSpec(reflectance, ambient, true_class)

    projector = ProjectorSpec(
        black_level=_floats(pairs["projector.black_level"], 3, "projector.black_level")
        if "projector.black_level" in pairs
        else (0.02, 0.02, 0.02),
        intensity=float(pairs.get("projector.intensity", 0.8)),
        gamma=float(pairs.get("projector.gamma", 2.2)),
        roi=Rect(*_ints(pairs["projector.roi"], 4, "projector.roi"))
        if "projector.roi" in pairs
        else Rect(0, 0, reflectance.height, reflectance.width),
        cell_h=_ints(pairs["projector.cell"], 2, "projector.cell")[0]
        if "projector.cell" in pairs
        else reflectance.height // 32,
        cell_w=_ints(pairs["projector.cell"], 2, "projector.cell")[1]
        if "projector.cell" in pairs
        else reflectance.width // 32,
    )
    camera = CameraSpec(
        wb_target_gray=float(pairs.get("camera.wb_target_gray", 0.5)),
        wb_gain_min=float(pairs.get("camera.wb_gain_min", 0.5)),
        wb_gain_max=float(pairs.get("camera.wb_gain_max", 2.0)),
        shot_noise_sigma0=float(pairs.get("camera.shot_noise_sigma0", 0.01)),
        out_h=_ints(pairs["camera.out_size"], 2, "camera.out_size")[0]
        if "camera.out_size" in pairs
        else 32,
        out_w=_ints(pairs["camera.out_size"], 2, "camera.out_size")[1]
        if "camera.out_size" in pairs
        else 32,
    )
    return SceneBundle(scene, projector, camera)


EXPERIMENT_KEYS = {
    "scene",
    "classifier",
    "model",
    "endpoint",
    "background",
    "captures_per_condition",
    "master_seed",
    "attack.mode",
    "attack.target",
    "de.population_size",
    "de.generations",
    "de.F",
    "de.CR",
    "de.fitness_repeats",
    "de.seed",
    "de.include_gen0",
}


@dataclass(frozen=True)
class ExperimentConfig:
    bundle: SceneBundle
    classifier: str  # "builtin" | "external"
    model_path: str | None
    endpoint: str | None
    background: int
    captures_per_condition: int
    master_seed: int
    mode: str  # "nontargeted" | "targeted"
    target: int | None
    de: DEConfig
    include_gen0: bool
    labels: LabelSet
    config_text: str

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.config_text.encode("utf-8")).hexdigest()


def load_experiment_config(
    path, labels: LabelSet = LabelSet()
) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    pairs = parse_kv(text, str(path))
    unknown = set(pairs) - EXPERIMENT_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown keys: {', '.join(sorted(unknown))}")
    if "scene" not in pairs:
        raise ConfigError(f"{path}: missing required key 'scene'")
    bundle = load_scene_config(path.parent / pairs["scene"], labels)

    selector = pairs.get("classifier", "builtin")
    if selector not in ("builtin", "external"):
        raise ConfigError(f"classifier must be builtin or external, got {selector!r}")
    if selector == "builtin" and "model" not in pairs:
        raise ConfigError("builtin classifier needs a 'model' key")
    if selector == "external" and "endpoint" not in pairs:
        raise ConfigError("external classifier needs an 'endpoint' key")

    background = int(pairs.get("background", 255))
    if not 0 <= background <= 255:
        raise ConfigError("background must lie in 0..255")
    captures = int(pairs.get("captures_per_condition", 20))
    if captures < 2:
        raise ConfigError("captures_per_condition must be at least 2")
    master_seed = int(pairs.get("master_seed", 0))

    mode = pairs.get("attack.mode", "nontargeted")
    if mode not in ("nontargeted", "targeted"):
        raise ConfigError(f"attack.mode must be nontargeted or targeted, got {mode!r}")
    target = None
    if mode == "targeted":
        if "attack.target" not in pairs:
            raise ConfigError("targeted mode needs attack.target")
        raw = pairs["attack.target"]
        target = labels.index_of(int(raw) if raw.isdigit() else raw)

    include_gen0 = pairs.get("de.include_gen0", "true").lower()
    if include_gen0 not in ("true", "false"):
        raise ConfigError("de.include_gen0 must be true or false")

    # Without an explicit de.seed the optimizer stream derives from the
    # master seed and the DE condition index, keeping runs one-seed pure.
    de_seed = (
        int(pairs["de.seed"]) if pairs.get("de.seed") else derive_seed(master_seed, 3)
    )
    de = DEConfig(
        population_size=int(pairs.get("de.population_size", 50)),
        generations=int(pairs.get("de.generations", 4)),
        F=float(pairs.get("de.F", 0.5)),
        CR=float(pairs.get("de.CR", 0.9)),
        fitness_repeats=int(pairs.get("de.fitness_repeats", 1)),
        seed=de_seed,
    )
    model_path = pairs.get("model")
    return ExperimentConfig(
        bundle=bundle,
        classifier=selector,
        model_path=str(path.parent / model_path) if model_path else None,
        endpoint=pairs.get("endpoint"),
        background=background,
        captures_per_condition=captures,
        master_seed=master_seed,
        mode=mode,
        target=target,
        de=de,
        include_gen0=include_gen0 == "true",
        labels=labels,
        config_text=text,
    )
