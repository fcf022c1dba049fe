"""Four-condition experiment protocol, statistics, and reporting.

Runs Baseline (projector fully off), WhiteLight, RandomPixel, and
DiffEvolution against one scene, records every capture's class scores,
and aggregates the eight per-condition statistics (mean, median, sd,
var, min, max, delta mean, delta median) of the true-class probability.

Statistics are computed in exact rational arithmetic and projected to
floats at the end, so identities like ``delta_mean + mean == baseline
mean`` hold exactly before any display rounding.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Callable

from .classifier import (
    BridgeClient,
    CentroidModel,
    ClassScores,
    ClassifierError,
    LabelSet,
    TransportError,
    load_model,
    predict_centroid,
    true_class_probability,
)
from .config import ExperimentConfig
from .imaging import Image8
from .optimizer import (
    FitnessEvaluationError,
    Genome,
    de_run,
    genome_to_pattern,
    sample_genome,
)
from .prng import SplitMix64, derive_seed
from .scene import capture, pattern_white


class HarnessError(Exception):
    """Base class for experiment-harness failures."""


class EmptyInput(HarnessError):
    """Statistics need at least one record."""


class SingleSample(HarnessError):
    """Variance is undefined for a single record."""


class MissingCondition(HarnessError):
    """A report row set lacks a required condition."""


class ClassifierUnavailable(HarnessError):
    """The configured classifier cannot be reached."""


class MissingBaseline(HarnessError):
    """Deltas need baseline records."""


class ConditionKind(enum.Enum):
    BASELINE = "baseline"
    WHITE_LIGHT = "white"
    RANDOM_PIXEL = "random"
    DIFF_EVOLUTION = "de"

    @property
    def index(self) -> int:
        return _CONDITION_ORDER.index(self)

    @property
    def display(self) -> str:
        return _CONDITION_DISPLAY[self]


_CONDITION_ORDER = [
    ConditionKind.BASELINE,
    ConditionKind.WHITE_LIGHT,
    ConditionKind.RANDOM_PIXEL,
    ConditionKind.DIFF_EVOLUTION,
]
_CONDITION_DISPLAY = {
    ConditionKind.BASELINE: "Baseline",
    ConditionKind.WHITE_LIGHT: "White Light",
    ConditionKind.RANDOM_PIXEL: "Random",
    ConditionKind.DIFF_EVOLUTION: "Diff Evolution",
}
REPLAY_CONDITION_INDEX = 4  # seed namespace for replay-best captures


@dataclass(frozen=True)
class CaptureRecord:
    condition: ConditionKind
    index: int
    genome: Genome | None
    generation: int | None
    member: int | None
    seed: int
    scores: ClassScores
    p_true: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "cond": self.condition.value,
                "i": self.index,
                "gen": self.generation,
                "member": self.member,
                "genome": list(self.genome) if self.genome is not None else None,
                "seed": self.seed,
                "probs": list(self.scores.probs),
                "p_true": self.p_true,
            },
            separators=(",", ":"),
        )


def record_from_json(line: str, lineno: int = 0) -> CaptureRecord:
    try:
        payload = json.loads(line)
        condition = ConditionKind(payload["cond"])
        genome = payload["genome"]
        return CaptureRecord(
            condition=condition,
            index=int(payload["i"]),
            genome=tuple(float(v) for v in genome) if genome is not None else None,
            generation=payload["gen"],
            member=payload["member"],
            seed=int(payload["seed"]),
            scores=ClassScores(tuple(payload["probs"])),
            p_true=float(payload["p_true"]),
        )
    except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
        raise HarnessError(f"bad capture record at line {lineno}: {exc}") from exc


@dataclass(frozen=True)
class ConditionStats:
    mean: float
    median: float
    sd: float
    var: float
    min: float
    max: float
    delta_mean: float
    delta_median: float


def exact_mean(values: list[float]) -> Fraction:
    if not values:
        raise EmptyInput("mean of an empty series")
    return Fraction(sum(Fraction(v) for v in values), len(values))


def exact_median(values: list[float]) -> Fraction:
    if not values:
        raise EmptyInput("median of an empty series")
    ordered = sorted(Fraction(v) for v in values)
    n = len(ordered)
    if n % 2 == 1:
        return ordered[n // 2]
    return (ordered[n // 2 - 1] + ordered[n // 2]) / 2


def compute_stats(
    records: list[CaptureRecord], baseline_records: list[CaptureRecord]
) -> ConditionStats:
    """Statistics of the true-class probabilities, deltas vs baseline.

    Median is the middle element (mean of the two middles for even N);
    the standard deviation uses the N-1 denominator; deltas are baseline
    minus condition, computed on unrounded values.
    """
    if not records or not baseline_records:
        raise EmptyInput("statistics need non-empty record lists")
    values = [r.p_true for r in records]
    if len(values) < 2:
        raise SingleSample("variance needs at least two records")
    base_values = [r.p_true for r in baseline_records]

    mean_f = exact_mean(values)
    median_f = exact_median(values)
    var_f = Fraction(
        sum((Fraction(v) - mean_f) ** 2 for v in values), len(values) - 1
    )
    sd = math.sqrt(float(var_f))
    delta_mean_f = exact_mean(base_values) - mean_f
    delta_median_f = exact_median(base_values) - median_f
    return ConditionStats(
        mean=float(mean_f),
        median=float(median_f),
        sd=sd,
        var=sd * sd,
        min=min(values),
        max=max(values),
        delta_mean=float(delta_mean_f),
        delta_median=float(delta_median_f),
    )


def round3(value: float) -> Decimal:
    """Round to 3 decimals, ties away from zero, via the decimal repr."""
    if value == 0.0:
        value = 0.0  # avoid a '-0.000' cell for negative zero
    return Decimal(repr(value)).quantize(Decimal("0.001"), rounding=ROUND_HALF_UP)


def format_table_value(value: float) -> str:
    """Three decimals without a leading zero: 0.849 -> '.849'."""
    text = str(round3(value))
    if text.startswith("0."):
        return text[1:]
    if text.startswith("-0."):
        return "-" + text[2:]
    return text


def format_csv_value(value: float) -> str:
    return str(round3(value))


STAT_COLUMNS = ("Mean", "Median", "SD", "Var", "Min", "Max", "ΔMean", "ΔMedian")
_STAT_FIELDS = ("mean", "median", "sd", "var", "min", "max", "delta_mean", "delta_median")


def render_table(
    rows: list[tuple[str, ConditionKind, ConditionStats]],
    fmt: str = "text",
    required: tuple[ConditionKind, ...] = tuple(_CONDITION_ORDER),
) -> bytes:
    """Render class x condition statistics as a text table or CSV.

    Every class present must carry all ``required`` conditions; rows are
    emitted per class in protocol condition order.
    """
    if fmt not in ("text", "csv"):
        raise ValueError(f"unknown table format {fmt!r}")
    by_class: dict[str, dict[ConditionKind, ConditionStats]] = {}
    class_order: list[str] = []
    for name, kind, stats in rows:
        if name not in by_class:
            by_class[name] = {}
            class_order.append(name)
        by_class[name][kind] = stats
    if not class_order:
        raise MissingCondition("no statistics rows to render")
    for name in class_order:
        missing = [k.display for k in required if k not in by_class[name]]
        if missing:
            raise MissingCondition(f"{name}: missing conditions: {', '.join(missing)}")

    def emit_order(name: str) -> list[ConditionKind]:
        return [k for k in _CONDITION_ORDER if k in by_class[name]]

    if fmt == "csv":
        lines = ["class,condition," + ",".join(f.lower() for f in _STAT_FIELDS)]
        for name in class_order:
            for kind in emit_order(name):
                stats = by_class[name][kind]
                values = [format_csv_value(getattr(stats, f)) for f in _STAT_FIELDS]
                lines.append(f"{name.capitalize()},{kind.display}," + ",".join(values))
        return ("\n".join(lines) + "\n").encode("utf-8")

    header = ["Class", "Condition", *STAT_COLUMNS]
    table_rows = []
    for name in class_order:
        for kind in emit_order(name):
            stats = by_class[name][kind]
            table_rows.append(
                [
                    name.capitalize(),
                    kind.display,
                    *(format_table_value(getattr(stats, f)) for f in _STAT_FIELDS),
                ]
            )
    widths = [
        max(len(header[c]), *(len(r[c]) for r in table_rows))
        for c in range(len(header))
    ]
    def fmt_row(cells):
        left = [cells[0].ljust(widths[0]), cells[1].ljust(widths[1])]
        right = [cells[c].rjust(widths[c]) for c in range(2, len(cells))]
        return "  ".join(left + right).rstrip()

    lines = [fmt_row(header)]
    lines.extend(fmt_row(r) for r in table_rows)
    return ("\n".join(lines) + "\n").encode("utf-8")


def _make_classify(config: ExperimentConfig) -> tuple[Callable[[Image8], ClassScores], Callable[[], None]]:
    """Build the classify function and a closer for its resources."""
    if config.classifier == "builtin":
        model = load_model(config.model_path)
        if model.labels != config.labels:
            raise ClassifierUnavailable(
                "model label order does not match the experiment label set"
            )
        return (lambda img: predict_centroid(model, img)), (lambda: None)
    try:
        client = BridgeClient(config.endpoint, n_labels=len(config.labels))
    except TransportError as exc:
        raise ClassifierUnavailable(str(exc)) from exc
    return client.predict, client.close


def run_condition(
    config: ExperimentConfig,
    kind: ConditionKind,
    classify: Callable[[Image8], ClassScores] | None = None,
    jobs: int = 1,
) -> list[CaptureRecord]:
    """Run one experimental condition, one CaptureRecord per capture.

    Noise seeds derive from (master_seed, condition index, capture index),
    so conditions are independent and reproducible in isolation. With
    ``jobs > 1`` the captures of the non-DE conditions run on a thread
    pool (results applied in index order, so output is unchanged); the
    DE condition is always sequential because its capture schedule is
    the optimizer's.
    """
    closer = lambda: None
    if classify is None:
        classify, closer = _make_classify(config)
    try:
        return _run_condition(config, kind, classify, jobs)
    except ClassifierError as exc:
        raise ClassifierUnavailable(f"classifier failed: {exc}") from exc
    except FitnessEvaluationError as exc:
        cause = exc.__cause__
        if isinstance(cause, ClassifierError):
            raise ClassifierUnavailable(f"classifier failed: {cause}") from exc
        raise
    finally:
        closer()


def _capture_record(
    config: ExperimentConfig,
    classify: Callable[[Image8], ClassScores],
    kind: ConditionKind,
    index: int,
    pattern,
    projector,
    genome: Genome | None = None,
    generation: int | None = None,
    member: int | None = None,
) -> CaptureRecord:
    seed = derive_seed(config.master_seed, kind.index, index)
    bundle = config.bundle
    img = capture(bundle.scene, projector, pattern, bundle.camera, seed)
    scores = classify(img)
    return CaptureRecord(
        condition=kind,
        index=index,
        genome=genome,
        generation=generation,
        member=member,
        seed=seed,
        scores=scores,
        p_true=true_class_probability(scores, bundle.scene.true_class),
    )


def _map_ordered(jobs: int, fn, items):
    """Map preserving order; thread pool only when it cannot change output."""
    if jobs <= 1:
        return [fn(item) for item in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _run_condition(
    config: ExperimentConfig,
    kind: ConditionKind,
    classify: Callable[[Image8], ClassScores],
    jobs: int = 1,
) -> list[CaptureRecord]:
    bundle = config.bundle
    n = config.captures_per_condition
    # A bridge connection answers one request at a time; only the pure
    # builtin classifier is reentrant.
    if config.classifier != "builtin":
        jobs = 1

    if kind is ConditionKind.BASELINE:
        return _map_ordered(
            jobs,
            lambda i: _capture_record(config, classify, kind, i, None, None),
            range(n),
        )

    if kind is ConditionKind.WHITE_LIGHT:
        white = pattern_white()
        return _map_ordered(
            jobs,
            lambda i: _capture_record(config, classify, kind, i, white, bundle.projector),
            range(n),
        )

    if kind is ConditionKind.RANDOM_PIXEL:
        genome_rng = SplitMix64(derive_seed(config.master_seed, kind.index))
        genomes = [sample_genome(genome_rng) for _ in range(n)]

        def one(item):
            i, genome = item
            pattern = genome_to_pattern(genome, config.background)
            return _capture_record(
                config, classify, kind, i, pattern, bundle.projector, genome
            )

        return _map_ordered(jobs, one, list(enumerate(genomes)))

    # DiffEvolution: one record per fitness-evaluation capture. Capture k
    # belongs to evaluation k // repeats, which is member (eval % pop) of
    # generation (eval // pop); generation 0 is the initial population.
    records: list[CaptureRecord] = []
    pop = config.de.population_size
    repeats = config.de.fitness_repeats

    def fitness(genome: Genome) -> float:
        index = len(records)
        evaluation = index // repeats
        record = _capture_record(
            config,
            classify,
            kind,
            index,
            genome_to_pattern(genome, config.background),
            bundle.projector,
            genome,
            generation=evaluation // pop,
            member=evaluation % pop,
        )
        records.append(record)
        if config.mode == "targeted":
            return 1.0 - record.scores.probs[config.target]
        return record.p_true

    de_run(fitness, config.de)
    return records


@dataclass(frozen=True)
class ExperimentReport:
    class_name: str
    records: dict[ConditionKind, list[CaptureRecord]]
    stats: dict[ConditionKind, ConditionStats]
    conditions: tuple[ConditionKind, ...]
    config_hash: str
    master_seed: int

    def table_rows(self) -> list[tuple[str, ConditionKind, ConditionStats]]:
        return [(self.class_name, k, self.stats[k]) for k in self.conditions]

    def render(self, fmt: str = "text") -> bytes:
        return render_table(self.table_rows(), fmt, required=self.conditions)


def stats_records(
    config_include_gen0: bool, kind: ConditionKind, records: list[CaptureRecord]
) -> list[CaptureRecord]:
    """Records entering the statistics; optionally drop DE generation 0."""
    if kind is ConditionKind.DIFF_EVOLUTION and not config_include_gen0:
        return [r for r in records if r.generation != 0]
    return records


def run_experiment(
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
    conditions: tuple[ConditionKind, ...] = tuple(_CONDITION_ORDER),
    jobs: int = 1,
) -> ExperimentReport:
    """Run the protocol (baseline first), aggregate stats, persist.

    Writes records.jsonl, report.txt, and report.csv into ``out_dir``
    when given. The text report carries the config hash and master seed
    as leading comment lines.
    """
    if ConditionKind.BASELINE not in conditions:
        raise MissingBaseline("the condition set must include the baseline")
    ordered = [k for k in _CONDITION_ORDER if k in conditions]

    classify, closer = _make_classify(config)
    try:
        all_records: dict[ConditionKind, list[CaptureRecord]] = {}
        for kind in ordered:
            all_records[kind] = run_condition(config, kind, classify, jobs)
    finally:
        closer()

    baseline = all_records[ConditionKind.BASELINE]
    stats = {
        kind: compute_stats(
            stats_records(config.include_gen0, kind, all_records[kind]), baseline
        )
        for kind in ordered
    }
    class_name = config.labels.labels[config.bundle.scene.true_class]
    report = ExperimentReport(
        class_name=class_name,
        records=all_records,
        stats=stats,
        conditions=tuple(ordered),
        config_hash=config.config_hash,
        master_seed=config.master_seed,
    )
    if out_dir is not None:
        persist_report(Path(out_dir), report)
    return report


def persist_report(out_dir: Path, report: ExperimentReport) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "records.jsonl", "w", encoding="ascii") as fh:
        for kind in report.conditions:
            for record in report.records[kind]:
                fh.write(record.to_json() + "\n")
    header = (
        f"# config_sha256: {report.config_hash}\n"
        f"# master_seed: {report.master_seed}\n"
    ).encode("ascii")
    (out_dir / "report.txt").write_bytes(header + report.render("text"))
    (out_dir / "report.csv").write_bytes(report.render("csv"))


def load_records(path) -> list[CaptureRecord]:
    records = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                records.append(record_from_json(line, lineno))
    return records


def infer_true_class(records: list[CaptureRecord]) -> int:
    """Recover the true-class index from persisted records.

    Valid records satisfy p_true == probs[true_class] everywhere; the
    lowest index satisfying that for every record wins.
    """
    if not records:
        raise EmptyInput("cannot infer the class of an empty record list")
    n = len(records[0].scores.probs)
    candidates = set(range(n))
    for record in records:
        candidates &= {
            i for i in range(n) if record.scores.probs[i] == record.p_true
        }
        if not candidates:
            raise HarnessError("records are inconsistent: no common true class")
    return min(candidates)


def report_from_records(
    records: list[CaptureRecord],
    labels: LabelSet = LabelSet(),
    include_gen0: bool = True,
) -> list[tuple[str, ConditionKind, ConditionStats]]:
    """Recompute the table rows for persisted records (stats are pure)."""
    by_kind: dict[ConditionKind, list[CaptureRecord]] = {}
    for record in records:
        by_kind.setdefault(record.condition, []).append(record)
    if ConditionKind.BASELINE not in by_kind:
        raise MissingBaseline("records contain no baseline condition")
    true_class = infer_true_class(records)
    class_name = labels.labels[true_class]
    baseline = by_kind[ConditionKind.BASELINE]
    rows = []
    for kind in _CONDITION_ORDER:
        if kind in by_kind:
            rows.append(
                (
                    class_name,
                    kind,
                    compute_stats(
                        stats_records(include_gen0, kind, by_kind[kind]), baseline
                    ),
                )
            )
    return rows
