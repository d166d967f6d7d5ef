"""Genetic search over information sets with a decoder-in-the-loop fitness.

An individual's fitness is the error rate of flooding SPA on the pruned
Tanner graph of its code, measured at the design SNR over a fixed set of
frames shared by every individual (common random numbers).
"""
from __future__ import annotations

import json
import logging
from math import comb
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .channelsim import bpsk, draw_info_noise, llr_from_received, sigma_from_ebn0
from .decoders import DecoderConfig, decode_spa
from .polarcode import (
    PolarCode,
    construct_5g,
    construct_bhattacharyya,
    design_erasure_from_snr,
    encode,
    write_infoset,
)
from .tannergraph import pruned_graph

log = logging.getLogger(__name__)

COSTS = ("ber", "bler")


@dataclass(frozen=True)
class GenAlgConfig:
    population_size: int = 20
    elite_count: int = 2
    mutation_swaps: float = 1.0
    generations: int = 200
    snr_des: float = 3.0
    cost: str = "bler"
    frames_per_eval: int = 20_000
    seed: int = 0
    max_iters: int = 200
    workers: int = 1
    checkpoint_every: int = 10

    def __post_init__(self):
        if self.population_size < 1:
            raise ValueError("population_size must be >= 1")
        if not 0 <= self.elite_count < self.population_size:
            raise ValueError("elite_count must satisfy 0 <= elite_count < population_size")
        if self.mutation_swaps < 0:
            raise ValueError("mutation_swaps must be >= 0")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.cost not in COSTS:
            raise ValueError(f"cost must be one of {COSTS}")
        if self.frames_per_eval < 1000:
            raise ValueError("frames_per_eval must be >= 1000")


@dataclass
class Individual:
    code: PolarCode
    fitness: float | None = None
    eval_frames: int = 0

    @property
    def key(self) -> tuple[int, ...]:
        return self.code.info_set


# --------------------------------------------------------------------------- operators


def swap_once(code: PolarCode, rng: np.random.Generator) -> PolarCode:
    """Exchange one uniformly chosen info index with one uniformly chosen frozen index."""
    frozen = code.frozen_set
    if not frozen:
        return code
    info = list(code.info_set)
    k = int(rng.integers(len(info)))
    info[k] = frozen[int(rng.integers(len(frozen)))]
    return PolarCode(code.N, tuple(info))


def _swap_count(mean: float, rng: np.random.Generator) -> int:
    """At least one swap with the requested mean; below one swap per child, a coin flip."""
    if mean >= 1.0:
        return 1 + int(rng.poisson(mean - 1.0))
    return int(rng.random() < mean)


def mutate(ind: Individual, rng: np.random.Generator, config: GenAlgConfig) -> Individual:
    code = ind.code
    for _ in range(_swap_count(config.mutation_swaps, rng)):
        code = swap_once(code, rng)
    return Individual(code)


def crossover(a: Individual, b: Individual, rng: np.random.Generator) -> Individual:
    """Keep the common indices, fill up to K from the symmetric difference."""
    sa, sb = set(a.code.info_set), set(b.code.info_set)
    common = sa & sb
    pool = sorted(sa ^ sb)
    need = a.code.K - len(common)
    picks = rng.choice(len(pool), size=need, replace=False) if need else []
    return Individual(PolarCode(a.code.N, tuple(sorted(common | {pool[int(i)] for i in picks}))))


def seed_constructions(N: int, K: int, config: GenAlgConfig) -> list[PolarCode]:
    seeds = []
    if 32 <= N <= 1024:
        seeds.append(construct_5g(N, K))
    eps = min(max(design_erasure_from_snr(config.snr_des, K / N), 1e-9), 1 - 1e-9)
    seeds.append(construct_bhattacharyya(N, K, eps))
    return seeds


def init_population(N: int, K: int, config: GenAlgConfig, rng: np.random.Generator | None = None) -> list[Individual]:
    """Seed constructions first, then distinct one- or two-swap perturbations of them."""
    rng = rng if rng is not None else np.random.default_rng([config.seed, 0xC0DE])
    seeds = seed_constructions(N, K, config)
    pop: list[PolarCode] = []
    for s in seeds:
        if s not in pop and len(pop) < config.population_size:
            pop.append(s)
    possible = comb(N, K)
    attempts = 0
    while len(pop) < min(config.population_size, possible):
        base = seeds[attempts % len(seeds)]
        cand = swap_once(base, rng)
        if attempts % 2:
            cand = swap_once(cand, rng)
        attempts += 1
        if cand not in pop:
            pop.append(cand)
        elif attempts > 1000 * config.population_size:
            cand = PolarCode(N, tuple(sorted(int(i) + 1 for i in rng.choice(N, K, replace=False))))
            if cand not in pop:
                pop.append(cand)
    return [Individual(c) for c in pop]


# --------------------------------------------------------------------------- fitness


@dataclass
class FitnessEnv:
    """Channel and decoder at the design SNR, with one frame set shared by all codes."""

    N: int
    K: int
    snr_des: float
    cost: str = "bler"
    frames: int = 20_000
    seed: int = 0
    decoder_config: DecoderConfig = field(default_factory=DecoderConfig)
    noiseless: bool = False

    def __post_init__(self):
        self._info = None
        self._noise = None
        self.cache: dict[tuple[int, ...], float] = {}

    def _draws(self):
        if self._info is None:
            self._info, self._noise = draw_info_noise(self.K, self.N, self.seed, 0, range(self.frames))
        return self._info, self._noise

    def evaluate(self, code: PolarCode) -> float:
        if code.info_set in self.cache:
            return self.cache[code.info_set]
        value = _evaluate(self, code)
        self.cache[code.info_set] = value
        return value


def _evaluate(env: FitnessEnv, code: PolarCode) -> float:
    info, noise = env._draws()
    x = encode(code, info)
    if env.noiseless:
        llr = np.where(x == 0, env.decoder_config.llr_cap, -env.decoder_config.llr_cap).astype(float)
    else:
        sigma = sigma_from_ebn0(env.snr_des, code.rate)
        llr = llr_from_received(bpsk(x) + sigma * noise, sigma)
    res = decode_spa(pruned_graph(code), llr, env.decoder_config, code)
    errs = (res.info_est != info).sum(axis=1)
    if env.cost == "ber":
        return float(errs.sum() / errs.size / code.K)
    return float((errs > 0).mean())


def fitness(ind: Individual, env: FitnessEnv) -> float:
    ind.fitness = env.evaluate(ind.code)
    ind.eval_frames = env.frames
    return ind.fitness


def _evaluate_remote(env_args, info_set):
    env = FitnessEnv(**env_args)
    return _evaluate(env, PolarCode(env.N, info_set))


def evaluate_population(pop: list[Individual], env: FitnessEnv, workers: int = 1):
    todo = sorted({ind.key for ind in pop if ind.key not in env.cache})
    if todo and workers > 1:
        env_args = {k: getattr(env, k) for k in ("N", "K", "snr_des", "cost", "frames", "seed", "decoder_config", "noiseless")}
        with ProcessPoolExecutor(workers) as ex:
            values = list(ex.map(_evaluate_remote, [env_args] * len(todo), todo))
        env.cache.update(zip(todo, values))
    for ind in pop:
        fitness(ind, env)


# --------------------------------------------------------------------------- evolution


@dataclass
class EvolveResult:
    best: Individual
    history: list[tuple[int, float, float]]
    population: list[Individual]


def _rank(pop: list[Individual]) -> list[Individual]:
    return sorted(pop, key=lambda ind: (ind.fitness, ind.key))


def _tournament(pop, rng):
    i, j = rng.integers(len(pop), size=2)
    a, b = pop[int(i)], pop[int(j)]
    return a if (a.fitness, a.key) <= (b.fitness, b.key) else b


def _next_generation(ranked, config, rng):
    nxt = [Individual(ind.code, ind.fitness, ind.eval_frames) for ind in ranked[: config.elite_count]]
    while len(nxt) < config.population_size:
        a, b = _tournament(ranked, rng), _tournament(ranked, rng)
        nxt.append(mutate(crossover(a, b, rng), rng, config))
    return nxt


def make_env(N: int, K: int, config: GenAlgConfig) -> FitnessEnv:
    return FitnessEnv(
        N=N,
        K=K,
        snr_des=config.snr_des,
        cost=config.cost,
        frames=config.frames_per_eval,
        seed=config.seed,
        decoder_config=DecoderConfig(max_iters=config.max_iters),
    )


def evolve(
    N: int,
    K: int,
    config: GenAlgConfig,
    out_dir=None,
    resume: bool = False,
    env: FitnessEnv | None = None,
) -> EvolveResult:
    """Generational loop with elitism, size-2 tournaments, crossover and mutation.

    Generation g draws from its own generator keyed by (seed, g), so a run
    resumed from a checkpoint continues exactly as the uninterrupted run.
    """
    env = env or make_env(N, K, config)
    out = Path(out_dir) if out_dir is not None else None
    start = 0
    history: list[tuple[int, float, float]] = []
    pop = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        ckpt = out / "checkpoint.json"
        if resume and ckpt.exists():
            state = json.loads(ckpt.read_text())
            start = state["generation"]
            history = [tuple(h) for h in state["history"]]
            env.cache.update({tuple(k): v for k, v in state["cache"]})
            pop = [Individual(PolarCode(N, tuple(s))) for s in state["population"]]
        _write_config(out / "config.txt", N, K, config)
    if pop is None:
        pop = init_population(N, K, config)

    evaluate_population(pop, env, config.workers)
    ranked = _rank(pop)
    if not history:
        history.append(_summary(0, ranked))
    for gen in range(start, config.generations):
        rng = np.random.default_rng([config.seed, gen + 1])
        pop = _next_generation(ranked, config, rng)
        evaluate_population(pop, env, config.workers)
        ranked = _rank(pop)
        history.append(_summary(gen + 1, ranked))
        log.info("generation %d best=%.6g mean=%.6g", *history[-1])
        if out is not None and config.checkpoint_every and (gen + 1) % config.checkpoint_every == 0:
            _checkpoint(out, gen + 1, ranked, history, env)
    result = EvolveResult(best=ranked[0], history=history, population=ranked)
    if out is not None:
        _checkpoint(out, config.generations, ranked, history, env)
        _write_history(out / "history.csv", history)
        write_infoset(result.best.code, out / "best_infoset.txt")
    return result


def _summary(gen, ranked):
    fits = [ind.fitness for ind in ranked]
    return (gen, float(fits[0]), float(np.mean(fits)))


def _checkpoint(out: Path, generation, ranked, history, env):
    state = {
        "generation": generation,
        "population": [list(ind.key) for ind in ranked],
        "history": [list(h) for h in history],
        "cache": [[list(k), v] for k, v in sorted(env.cache.items())],
    }
    tmp = out / "checkpoint.json.tmp"
    tmp.write_text(json.dumps(state))
    tmp.replace(out / "checkpoint.json")


def _write_history(path: Path, history):
    lines = ["generation,best_fitness,mean_fitness"]
    lines += [f"{g},{b:.8e},{m:.8e}" for g, b, m in history]
    path.write_text("\n".join(lines) + "\n")


def _write_config(path: Path, N, K, config: GenAlgConfig):
    items = {"N": N, "K": K, **asdict(config)}
    path.write_text("".join(f"{k}={v}\n" for k, v in items.items()))
