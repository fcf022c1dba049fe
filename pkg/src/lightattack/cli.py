"""Command-line front end: render, attack, classify, report, fit, replay-best.

Exit codes: 0 success, 1 domain error, 2 usage error. Data goes to
stdout, diagnostics to stderr. The external classifier endpoint can be
set via the LIGHTATTACK_ENDPOINT environment variable; the --endpoint
flag takes precedence.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import harness
from .classifier import (
    BridgeClient,
    ClassifierError,
    LabelSet,
    fit_centroids,
    load_model,
    predict_centroid,
    save_model,
)
from .config import ConfigError, load_experiment_config, load_scene_config
from .harness import (
    ClassifierUnavailable,
    ConditionKind,
    HarnessError,
    compute_stats,
    load_records,
    render_table,
    report_from_records,
    run_experiment,
)
from .imaging import (
    ImagingError,
    downsample_box,
    dequantize,
    quantize,
    read_ppm_file,
    write_ppm_file,
)
from .optimizer import genome_to_pattern
from .prng import derive_seed
from .scene import capture, pattern_off, pattern_single_pixel, pattern_white

ENDPOINT_ENV = "LIGHTATTACK_ENDPOINT"

_CONDITION_NAMES = {
    "baseline": ConditionKind.BASELINE,
    "white": ConditionKind.WHITE_LIGHT,
    "random": ConditionKind.RANDOM_PIXEL,
    "de": ConditionKind.DIFF_EVOLUTION,
}


class CliError(Exception):
    """Domain error that should exit with status 1."""


def _parse_pattern(spec: str, background: int):
    if spec == "none":
        return None  # projector fully disabled (baseline rig)
    if spec == "off":
        return pattern_off()
    if spec == "white":
        return pattern_white()
    if spec.startswith("pixel:"):
        parts = spec[len("pixel:") :].split(",")
        if len(parts) != 5:
            raise CliError("pixel pattern needs x,y,r,g,b")
        try:
            x, y, r, g, b = (int(p) for p in parts)
        except ValueError as exc:
            raise CliError(f"bad pixel pattern: {exc}") from exc
        return pattern_single_pixel(x, y, (r, g, b), background)
    raise CliError(f"unknown pattern {spec!r} (none | off | white | pixel:x,y,r,g,b)")


def cmd_render(args) -> int:
    bundle = load_scene_config(args.scene)
    pattern = _parse_pattern(args.pattern, args.background)
    projector = bundle.projector if pattern is not None else None
    img = capture(bundle.scene, projector, pattern, bundle.camera, args.seed)
    write_ppm_file(args.out, img)
    print(f"{img.width}x{img.height}")
    return 0


def cmd_attack(args) -> int:
    config = load_experiment_config(args.config)
    # endpoint precedence: flag > environment > config file
    endpoint = args.endpoint or (
        os.environ.get(ENDPOINT_ENV) if config.classifier == "external" else None
    )
    if endpoint:
        config = _override_endpoint(config, endpoint)
    conditions = tuple(ConditionKind)
    if args.conditions:
        names = [n.strip() for n in args.conditions.split(",")]
        unknown = [n for n in names if n not in _CONDITION_NAMES]
        if unknown:
            raise CliError(f"unknown conditions: {', '.join(unknown)}")
        conditions = tuple(_CONDITION_NAMES[n] for n in names)
    report = run_experiment(config, args.out, conditions, jobs=args.jobs)
    print(f"wrote {Path(args.out) / 'records.jsonl'}", file=sys.stderr)
    for kind in report.conditions:
        n = len(report.records[kind])
        print(f"{kind.display}: {n} captures", file=sys.stderr)
    return 0


def _override_endpoint(config, endpoint):
    from dataclasses import replace

    return replace(config, classifier="external", endpoint=endpoint)


def _classifier_from_args(args):
    endpoint = args.endpoint or os.environ.get(ENDPOINT_ENV)
    if args.classifier == "external" or (args.classifier is None and endpoint):
        if not endpoint:
            raise CliError("external classifier needs --endpoint or $" + ENDPOINT_ENV)
        client = BridgeClient(endpoint)
        return client.predict, client.close
    if not args.model:
        raise CliError("builtin classifier needs --model")
    model = load_model(args.model)
    return (lambda img: predict_centroid(model, img)), (lambda: None)


def cmd_classify(args) -> int:
    img = read_ppm_file(args.image)
    if img.height != 32 or img.width != 32:
        if not args.downsample:
            raise CliError(
                f"input is {img.width}x{img.height}, not 32x32 (use --downsample)"
            )
        img = quantize(downsample_box(dequantize(img), 32, 32))
    classify, close = _classifier_from_args(args)
    try:
        scores = classify(img)
    finally:
        close()
    labels = LabelSet().labels
    ranked = sorted(zip(labels, scores.probs), key=lambda kv: -kv[1])
    for label, prob in ranked:
        print(f"{label}:{prob!r}")
    return 0


def cmd_report(args) -> int:
    records = load_records(args.records)
    rows = report_from_records(records, include_gen0=not args.exclude_gen0)
    sys.stdout.buffer.write(render_table(rows, args.format, required=()))
    return 0


def cmd_fit(args) -> int:
    root = Path(args.data)
    labels = LabelSet()
    examples = []
    for name in labels.labels:
        class_dir = root / name
        if not class_dir.is_dir():
            continue
        for ppm in sorted(class_dir.glob("*.ppm")):
            examples.append((read_ppm_file(ppm), name))
    model = fit_centroids(examples, args.temperature, labels)
    save_model(args.out, model)
    print(f"fit {len(examples)} examples -> {args.out}", file=sys.stderr)
    return 0


def cmd_replay_best(args) -> int:
    config = load_experiment_config(args.config)
    records = load_records(args.records)
    de_records = [r for r in records if r.condition is ConditionKind.DIFF_EVOLUTION]
    if not de_records:
        raise CliError("records contain no differential-evolution captures")

    def fitness_of(record):
        if config.mode == "targeted":
            return 1.0 - record.scores.probs[config.target]
        return record.p_true

    best = min(de_records, key=fitness_of)
    pattern = genome_to_pattern(best.genome, config.background)
    bundle = config.bundle
    model = load_model(config.model_path) if config.classifier == "builtin" else None
    if model is None:
        client = BridgeClient(config.endpoint)
        classify, close = client.predict, client.close
    else:
        classify, close = (lambda img: predict_centroid(model, img)), (lambda: None)

    try:
        replays = []
        for i in range(args.count):
            seed = derive_seed(config.master_seed, harness.REPLAY_CONDITION_INDEX, i)
            img = capture(bundle.scene, bundle.projector, pattern, bundle.camera, seed)
            scores = classify(img)
            replays.append(
                harness.CaptureRecord(
                    condition=ConditionKind.DIFF_EVOLUTION,
                    index=i,
                    genome=best.genome,
                    generation=None,
                    member=None,
                    seed=seed,
                    scores=scores,
                    p_true=scores.probs[bundle.scene.true_class],
                )
            )
    finally:
        close()

    stats = compute_stats(replays, replays)
    genome_text = ",".join(repr(v) for v in best.genome)
    print(f"genome: {genome_text}")
    print(
        f"replay n={args.count} mean={stats.mean!r} median={stats.median!r} "
        f"sd={stats.sd!r} min={stats.min!r} max={stats.max!r}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lightattack",
        description="Simulated light-projection attacks on image classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="capture a scene under a projection pattern")
    p.add_argument("--scene", required=True, help="scene config path")
    p.add_argument("--pattern", default="off", help="off | white | pixel:x,y,r,g,b")
    p.add_argument("--background", type=int, default=255, help="pixel-pattern background byte")
    p.add_argument("--seed", type=int, default=0, help="camera noise seed")
    p.add_argument("--out", required=True, help="output PPM path")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("attack", help="run the four-condition experiment")
    p.add_argument("--config", required=True, help="experiment config path")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--conditions", help="comma list: baseline,white,random,de")
    p.add_argument("--endpoint", help="override: use this external classifier")
    p.add_argument(
        "--jobs",
        type=int,
        default=1,
        help="parallel captures for non-DE conditions (builtin classifier only)",
    )
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("classify", help="classify a 32x32 PPM")
    p.add_argument("--image", required=True, help="input PPM path")
    p.add_argument("--classifier", choices=("builtin", "external"), help="oracle kind")
    p.add_argument("--model", help="centroid model path (builtin)")
    p.add_argument("--endpoint", help="external classifier endpoint")
    p.add_argument("--downsample", action="store_true", help="box-downsample to 32x32")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("report", help="recompute the report from records.jsonl")
    p.add_argument("--records", required=True, help="records.jsonl path")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--exclude-gen0", action="store_true", help="drop DE generation-0 captures")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("fit", help="fit a centroid model from DIR/<label>/*.ppm")
    p.add_argument("--data", required=True, help="labeled directory root")
    p.add_argument("--temperature", type=float, default=50.0)
    p.add_argument("--out", required=True, help="model output path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("replay-best", help="re-capture the best DE genome N times")
    p.add_argument("--config", required=True, help="experiment config path")
    p.add_argument("--records", required=True, help="records.jsonl path")
    p.add_argument("--count", type=int, default=20)
    p.set_defaults(func=cmd_replay_best)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        CliError,
        ConfigError,
        ImagingError,
        ClassifierError,
        HarnessError,
        FileNotFoundError,
    ) as exc:
        if isinstance(exc, ClassifierUnavailable):
            print(
                f"error: {exc}\nhint: start the bridge (or check --endpoint / "
                f"${ENDPOINT_ENV}) and re-run",
                file=sys.stderr,
            )
        else:
            print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
