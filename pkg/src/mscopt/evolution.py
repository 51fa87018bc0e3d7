"""Evolutionary search over ordered feature-set partitions.

Populations of stage-assignment vectors are scored on three maximized
objectives, ranked by non-domination level, and bred with roulette-wheel
selection, stage-normalizing recombination, and beta-binomial mutation biased
toward low stage counts. Elitism carries forward every unique non-dominated
member (and up to a configured fraction of the unique population), which makes
any globally non-dominated solution that ever appears immortal.

Ranking is flipped relative to the usual convention: fronts are peeled off
E_0, E_1, ... and the member of the first (best) front receives the LARGEST
rank, so a higher rank always means a better non-domination level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cascade import Chromosome, ObjectiveVector, compress, normalize_costs

__all__ = [
    "EvolutionConfig",
    "ScoredChromosome",
    "Generation",
    "RunResult",
    "dominates",
    "rank_population",
    "fitness",
    "select",
    "elite_set",
    "beta_binomial_pmf",
    "draw_beta_binomial",
    "mutate",
    "recombine",
    "blend_assignments",
    "init_population",
    "run",
]


@dataclass(frozen=True)
class EvolutionConfig:
    n_features: int
    k: int  # maximum stage count
    pop_size: int
    m_hat: float = 0.075  # per-index mutation probability
    r_hat: float = 0.8  # crossover probability
    b: float = 0.2  # elite fraction of the unique population
    beta: float = 2.0  # mutation bias; larger prefers earlier stages
    p_hat: float = 0.75  # confidence threshold used by the evaluator
    epsilon: float = 0.01  # fitness base offset
    max_iter: int = 150
    patience: int = 20  # halt after this many generations with an unchanged leader
    seed: int = 0

    def __post_init__(self):
        if not (1 <= self.k <= self.n_features):
            raise ValueError("need 1 <= k <= n_features")
        if self.pop_size < 1:
            raise ValueError("population size must be positive")
        if not (0.0 <= self.m_hat < 1.0):
            raise ValueError("mutation rate must be in [0, 1)")
        if not (0.0 < self.r_hat < 1.0):
            raise ValueError("crossover rate must be in (0, 1)")
        if not (0.0 < self.b < 1.0):
            raise ValueError("elite fraction must be in (0, 1)")
        if self.beta <= 1.0:
            raise ValueError("mutation bias beta must exceed 1")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 0 or self.patience < 1:
            raise ValueError("invalid halting parameters")


@dataclass
class ScoredChromosome:
    chromosome: Chromosome
    objectives: ObjectiveVector
    rank: int = 0
    euclid: float = 0.0
    fitness: float = 0.0
    log_fitness: float = 0.0


@dataclass
class Generation:
    members: list[ScoredChromosome]
    index: int = 0
    elite_fraction: float = 0.2
    min_raw_cost: float = 0.0
    l_e: float = 0.0
    u_e: float = 0.0
    gamma: float = 0.0
    _cum_weights: np.ndarray | None = None


def dominates(a, b) -> bool:
    """Weakly better on all three objectives and strictly better on one."""
    at = a.as_tuple() if isinstance(a, ObjectiveVector) else tuple(a)
    bt = b.as_tuple() if isinstance(b, ObjectiveVector) else tuple(b)
    return all(x >= y for x, y in zip(at, bt)) and any(x > y for x, y in zip(at, bt))


def _domination_matrix(objs: np.ndarray) -> np.ndarray:
    ge = (objs[:, None, :] >= objs[None, :, :]).all(axis=2)
    gt = (objs[:, None, :] > objs[None, :, :]).any(axis=2)
    return ge & gt


def rank_population(gen: Generation) -> None:
    """Peel non-dominated fronts and assign flipped ranks (best front largest)."""
    objs = np.array([m.objectives.as_tuple() for m in gen.members])
    dom = _domination_matrix(objs)
    m = len(gen.members)
    level = np.full(m, -1)
    remaining = np.ones(m, dtype=bool)
    t = 0
    while remaining.any():
        blocked = dom[np.ix_(remaining, remaining)].any(axis=0)
        front = np.flatnonzero(remaining)[~blocked]
        level[front] = t
        remaining[front] = False
        t += 1
    t_star = t - 1
    for i, member in enumerate(gen.members):
        member.rank = int(t_star - level[i])


def _score_norms(gen: Generation, cfg: EvolutionConfig) -> None:
    """Fill euclid norms, the gamma base, and fitness for ranked members."""
    for m in gen.members:
        m.euclid = math.sqrt(sum(v * v for v in m.objectives.as_tuple()))
    gen.l_e = min(m.euclid for m in gen.members)
    gen.u_e = max(m.euclid for m in gen.members)
    gen.gamma = gen.u_e / gen.l_e + cfg.epsilon
    log_gamma = math.log(gen.gamma)
    for m in gen.members:
        m.log_fitness = m.rank * log_gamma + math.log(m.euclid)
        m.fitness = math.exp(m.log_fitness) if m.log_fitness < 700 else math.inf


def fitness(gen: Generation, member: ScoredChromosome) -> float:
    """gamma^rank times the objective norm, with gamma = u/l + epsilon."""
    return gen.gamma ** member.rank * member.euclid


def _sort_key(member: ScoredChromosome):
    # Equivalent to sorting by fitness descending: rank dominates, then the
    # norm; assignment vector breaks exact ties deterministically.
    return (-member.rank, -member.euclid, member.chromosome.assignments)


def select(gen: Generation, rng: np.random.Generator) -> ScoredChromosome:
    """Roulette-wheel draw with probability proportional to fitness.

    Weights are rescaled by the maximum log-fitness before exponentiation;
    the ratios, and therefore the wheel, are unchanged.
    """
    if gen._cum_weights is None:
        logf = np.array([m.log_fitness for m in gen.members])
        gen._cum_weights = np.cumsum(np.exp(logf - logf.max()))
    u = rng.random() * gen._cum_weights[-1]
    idx = int(np.searchsorted(gen._cum_weights, u, side="right"))
    return gen.members[min(idx, len(gen.members) - 1)]


def unique_members(members) -> list[ScoredChromosome]:
    seen = {}
    for m in members:
        seen.setdefault(m.chromosome.assignments, m)
    return list(seen.values())


def elite_set(gen: Generation) -> list[ScoredChromosome]:
    """Top max(ceil(b * #unique), #unique-non-dominated) unique members.

    Every unique member of the best front is always included: the flipped rank
    gives front members strictly the highest fitness, and the elite count is
    floored at the front size.
    """
    uniq = sorted(unique_members(gen.members), key=_sort_key)
    top_rank = max(m.rank for m in gen.members)
    front_size = sum(1 for m in uniq if m.rank == top_rank)
    m_count = max(math.ceil(gen.elite_fraction * len(uniq)), front_size)
    return uniq[:m_count]


def beta_binomial_pmf(trials: int, beta: float) -> np.ndarray:
    """PMF of the beta-binomial with alpha=1 over {0..trials}.

    P(j) = C(trials, j) * B(j + 1, trials - j + beta) / B(1, beta); the
    distribution is monotonically decreasing for beta > 1 with mean
    trials / (beta + 1).
    """
    if trials < 0:
        raise ValueError("trials must be >= 0")

    def log_beta(a, b):
        return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)

    denom = log_beta(1.0, beta)
    pmf = np.array(
        [
            math.exp(math.log(math.comb(trials, j)) + log_beta(j + 1.0, trials - j + beta) - denom)
            for j in range(trials + 1)
        ]
    )
    return pmf / pmf.sum()


def draw_beta_binomial(trials: int, beta: float, rng: np.random.Generator) -> int:
    """Inverse-CDF draw from beta_binomial_pmf using one uniform."""
    cdf = np.cumsum(beta_binomial_pmf(trials, beta))
    return int(np.searchsorted(cdf, rng.random(), side="right"))


def mutate(chromosome: Chromosome, cfg: EvolutionConfig, rng: np.random.Generator) -> Chromosome:
    """Independently redraw stage assignments with probability m_hat.

    An index only mutates while its current stage has another occupant, so no
    stage can empty out mid-pass. Redraws come from the beta-binomial over
    {0..min(stages, k-1)}: values below the current stage count move the
    feature, the top value opens one new stage, and the k cap is respected.
    """
    values = list(chromosome.assignments)
    for i in range(len(values)):
        if rng.random() <= cfg.m_hat and values.count(values[i]) > 1:
            trials = min(len(set(values)), cfg.k - 1)
            values[i] = draw_beta_binomial(trials, cfg.beta, rng)
    return compress(values, cfg.k)


def blend_assignments(pa: Chromosome, pb: Chromosome, target_stages: int, picks) -> tuple[int, ...]:
    """Deterministic recombination core: per-feature parent picks plus stage
    renormalization into ``target_stages`` stages.

    Each picked assignment r from a parent with s stages maps to
    max(round((r + 1) / s * target) - 1, 0) with round-half-away-from-zero, so
    a stage keeps its relative position when the child's stage count differs.
    """
    out = []
    for i, pick in enumerate(picks):
        parent = pa if pick == 0 else pb
        s = parent.n_stages
        scaled = (parent.assignments[i] + 1) * target_stages / s
        out.append(max(math.floor(scaled + 0.5) - 1, 0))
    return tuple(out)


def recombine(
    pa: Chromosome, pb: Chromosome, cfg: EvolutionConfig, rng: np.random.Generator
) -> Chromosome:
    """Crossover with probability r_hat, otherwise a copy of a random parent.

    The child's stage count is drawn uniformly from (floor of the parents'
    mean, parent A's, parent B's); each feature assignment comes from a
    uniformly chosen parent via blend_assignments, then gaps are compressed.
    """
    if rng.random() > cfg.r_hat:
        return pa if rng.random() < 0.5 else pb
    options = ((pa.n_stages + pb.n_stages) // 2, pa.n_stages, pb.n_stages)
    target = options[rng.integers(3)]
    picks = (rng.random(pa.n_features) < 0.5).astype(int)
    return compress(blend_assignments(pa, pb, target, picks), cfg.k)


def init_population(cfg: EvolutionConfig, rng: np.random.Generator) -> list[Chromosome]:
    """Mutations of the single-stage configuration [0,...,0]."""
    base = Chromosome((0,) * cfg.n_features, cfg.k)
    return [mutate(base, cfg, rng) for _ in range(cfg.pop_size)]


@dataclass
class GenerationRecord:
    index: int
    top_fitness: float
    top_assignments: tuple[int, ...]
    front_size: int
    elite_assignments: list[tuple[int, ...]]


@dataclass
class RunResult:
    front: list[ScoredChromosome]  # unique non-dominated, fitness-descending
    history: list[GenerationRecord]
    n_generations: int
    halted_on: str  # "max_iter" | "stagnation"
    seed: int


def _score_generation(chromosomes, index, cfg, evaluator, memo) -> Generation:
    members = []
    for chrom in chromosomes:
        key = chrom.assignments
        if key not in memo:
            memo[key] = evaluator.objectives(key)
        g1, g2, raw = memo[key]
        members.append(ScoredChromosome(chrom, ObjectiveVector(g1, g2, raw)))
    gen = Generation(members, index, elite_fraction=cfg.b)
    normalize_costs([m.objectives for m in members])
    gen.min_raw_cost = min(m.objectives.raw_cost for m in members)
    rank_population(gen)
    _score_norms(gen, cfg)
    gen.members.sort(key=_sort_key)
    return gen


def run(cfg: EvolutionConfig, evaluator, seed_chromosomes=None) -> RunResult:
    """Full evolutionary loop; deterministic for a given config and evaluator.

    The evaluator maps an assignment tuple to (coverage, conclusive accuracy,
    raw cost); scores are memoized per vector for the whole run. Optional
    ``seed_chromosomes`` replace the head of the initial population. Halts
    after max_iter breeding steps or once the fittest chromosome is unchanged
    for ``patience`` generations, then returns the final generation's unique
    non-dominated set sorted by fitness.
    """
    rng = np.random.default_rng(cfg.seed)
    memo: dict = {}

    chroms = init_population(cfg, rng)
    if seed_chromosomes:
        planted = [Chromosome(tuple(c), cfg.k) if not isinstance(c, Chromosome) else c
                   for c in seed_chromosomes]
        chroms[: len(planted)] = planted

    gen = _score_generation(chroms, 0, cfg, evaluator, memo)
    history = [_record(gen)]
    stagnant = 0
    halted_on = "max_iter"

    for h in range(cfg.max_iter):
        if stagnant >= cfg.patience:
            halted_on = "stagnation"
            break
        elites = elite_set(gen)
        next_chroms = [e.chromosome for e in elites]
        while len(next_chroms) < cfg.pop_size:
            pa = select(gen, rng)
            pb = select(gen, rng)
            child = recombine(pa.chromosome, pb.chromosome, cfg, rng)
            next_chroms.append(mutate(child, cfg, rng))
        next_chroms = next_chroms[: cfg.pop_size]
        gen = _score_generation(next_chroms, h + 1, cfg, evaluator, memo)
        if gen.members[0].chromosome.assignments == history[-1].top_assignments:
            stagnant += 1
        else:
            stagnant = 0
        history.append(_record(gen))

    top_rank = max(m.rank for m in gen.members)
    front = [m for m in unique_members(gen.members) if m.rank == top_rank]
    front.sort(key=_sort_key)
    return RunResult(front, history, gen.index, halted_on, cfg.seed)


def _record(gen: Generation) -> GenerationRecord:
    top_rank = max(m.rank for m in gen.members)
    elites = elite_set(gen)
    return GenerationRecord(
        gen.index,
        gen.members[0].fitness,
        gen.members[0].chromosome.assignments,
        sum(1 for m in unique_members(gen.members) if m.rank == top_rank),
        [e.chromosome.assignments for e in elites],
    )
