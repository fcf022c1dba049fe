"""Differential evolution (DE/rand/1/bin) over single-pixel genomes.

The genome is (x, y, r, g, b): a continuous point in
[0,32) x [0,32) x [0,256)^3, floored to integers only when a projection
pattern is built. Selection is greedy with ties accepted, bounds are
enforced by clamping, and every random draw comes from the shared
SplitMix64 contract so runs are reproducible from the seed alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

from .prng import SplitMix64, derive_seed
from .scene import ProjectionPattern, pattern_single_pixel

GENOME_BOUNDS = ((0.0, 32.0), (0.0, 32.0), (0.0, 256.0), (0.0, 256.0), (0.0, 256.0))
N_DIMS = len(GENOME_BOUNDS)

Genome = tuple[float, float, float, float, float]
FitnessFn = Callable[[Genome], float]


class FitnessEvaluationError(Exception):
    """A fitness evaluation failed; carries the history gathered so far."""

    def __init__(self, message: str, history: "DEHistory"):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class DEConfig:
    population_size: int = 50
    generations: int = 4
    F: float = 0.5
    CR: float = 0.9
    fitness_repeats: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError("population_size must be at least 4 for rand/1")
        if self.generations < 1:
            raise ValueError("generations must be positive")
        if not 0.0 <= self.CR <= 1.0:
            raise ValueError("CR must lie in [0, 1]")
        if self.fitness_repeats < 1:
            raise ValueError("fitness_repeats must be positive")


@dataclass(frozen=True)
class EvalRecord:
    generation: int
    member: int
    genome: Genome
    fitness: float


@dataclass
class DEHistory:
    """Every evaluation made, plus the best-so-far trace per generation."""

    records: list[EvalRecord] = field(default_factory=list)
    best_trace: list[float] = field(default_factory=list)

    def to_jsonl(self) -> str:
        lines = [
            json.dumps(
                {
                    "gen": r.generation,
                    "member": r.member,
                    "genome": list(r.genome),
                    "fitness": r.fitness,
                },
                separators=(",", ":"),
            )
            for r in self.records
        ]
        return "\n".join(lines) + ("\n" if lines else "")


def clamp_genome(values) -> Genome:
    """Clamp each dimension into its half-open bound."""
    out = []
    for v, (lo, hi) in zip(values, GENOME_BOUNDS):
        # hi is exclusive; math.nextafter gives the largest float below it
        out.append(min(max(float(v), lo), math.nextafter(hi, lo)))
    return tuple(out)


def genome_to_pattern(genome: Genome, background: int) -> ProjectionPattern:
    """Floor the genome into a single-pixel pattern on a uniform background."""
    x, y, r, g, b = (int(math.floor(v)) for v in genome)
    return pattern_single_pixel(x, y, (r, g, b), background)


def sample_genome(rng: SplitMix64) -> Genome:
    """One uniform genome, consuming five uniforms in dimension order."""
    return tuple(lo + rng.uniform() * (hi - lo) for lo, hi in GENOME_BOUNDS)


def de_init(config: DEConfig) -> list[Genome]:
    """Uniform initial population; stream derived from (seed, 0)."""
    rng = SplitMix64(derive_seed(config.seed, 0))
    return [sample_genome(rng) for _ in range(config.population_size)]


def _pick_distinct(rng: SplitMix64, n: int, exclude: set[int]) -> int:
    while True:
        idx = int(rng.uniform() * n)
        if idx not in exclude:
            return idx


def _evaluate(
    fitness: FitnessFn,
    genome: Genome,
    config: DEConfig,
    generation: int,
    member: int,
    history: DEHistory,
) -> float:
    try:
        values = [float(fitness(genome)) for _ in range(config.fitness_repeats)]
    except Exception as exc:
        raise FitnessEvaluationError(
            f"fitness failed at generation {generation}, member {member}: {exc}",
            history,
        ) from exc
    mean = math.fsum(values) / len(values)
    history.records.append(EvalRecord(generation, member, genome, mean))
    return mean


def de_step(
    population: list[Genome],
    fitnesses: list[float],
    config: DEConfig,
    generation_index: int,
    fitness: FitnessFn,
    history: DEHistory | None = None,
) -> tuple[list[Genome], list[float], int]:
    """One synchronous DE/rand/1/bin generation.

    Mutants and trials are built from the input population, so outcomes
    do not depend on evaluation order. Returns the new population, its
    fitnesses, and the number of evaluations made. The stream is derived
    from (seed, generation_index + 1), making each step reproducible in
    isolation.
    """
    if len(population) != config.population_size or len(fitnesses) != len(population):
        raise ValueError("population/fitness sizes do not match the config")
    if history is None:
        history = DEHistory()
    rng = SplitMix64(derive_seed(config.seed, generation_index + 1))
    n = len(population)

    trials: list[Genome] = []
    for i in range(n):
        chosen: set[int] = {i}
        picks = []
        for _ in range(3):
            idx = _pick_distinct(rng, n, chosen)
            chosen.add(idx)
            picks.append(idx)
        a, b, c = picks
        mutant = [
            population[a][j] + config.F * (population[b][j] - population[c][j])
            for j in range(N_DIMS)
        ]
        jrand = int(rng.uniform() * N_DIMS)
        trial = [
            mutant[j] if (rng.uniform() < config.CR or j == jrand) else population[i][j]
            for j in range(N_DIMS)
        ]
        trials.append(clamp_genome(trial))

    new_population = list(population)
    new_fitnesses = list(fitnesses)
    for i, trial in enumerate(trials):
        trial_fit = _evaluate(fitness, trial, config, generation_index + 1, i, history)
        if trial_fit <= fitnesses[i]:
            new_population[i] = trial
            new_fitnesses[i] = trial_fit
    return new_population, new_fitnesses, n


def de_run(fitness: FitnessFn, config: DEConfig) -> tuple[Genome, float, DEHistory]:
    """Full DE run: evaluate the initial population, then `generations` steps.

    Returns the best genome ever evaluated, its fitness, and the history.
    """
    history = DEHistory()
    population = de_init(config)
    fitnesses = [
        _evaluate(fitness, g, config, 0, i, history)
        for i, g in enumerate(population)
    ]
    best_idx = min(range(len(fitnesses)), key=fitnesses.__getitem__)
    best_genome, best_fitness = population[best_idx], fitnesses[best_idx]
    history.best_trace.append(best_fitness)

    for gen in range(config.generations):
        population, fitnesses, _ = de_step(
            population, fitnesses, config, gen, fitness, history
        )
        gen_best = min(range(len(fitnesses)), key=fitnesses.__getitem__)
        if fitnesses[gen_best] <= best_fitness:
            best_genome, best_fitness = population[gen_best], fitnesses[gen_best]
        history.best_trace.append(best_fitness)
    return best_genome, best_fitness, history
