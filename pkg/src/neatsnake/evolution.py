"""Population-level evolution.

One generation is: evaluate -> speciate -> share fitness -> allocate
offspring -> reproduce. Species partition the population by compatibility
distance; explicit fitness sharing divides each genome's fitness by its
species size so large species cannot dominate reproduction; offspring are
allocated proportionally with largest-remainder rounding so counts always
sum to the population size.

Everything here is deterministic given the seed: members, species and
genomes are always iterated in sorted order, and ties are broken by
(fitness desc, genome id asc).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from random import Random

from .config import NeatConfig
from .genome import Genome, InnovationRegistry, crossover, gene_partition, mutate, new_initial_genome


class TotalExtinctionError(Exception):
    """Every species died and reset_on_extinction is disabled."""


# -- compatibility ------------------------------------------------------------

def compatibility_distance(g1: Genome, g2: Genome, config: NeatConfig) -> float:
    """Weighted mix of excess count, disjoint count and matching-weight drift.

        delta = (c1*E + c2*D) / N + c3 * Wbar

    N is the connection-gene count of the larger genome, forced to 1 when
    both genomes carry fewer than 20 genes. Wbar is the mean absolute weight
    difference over matching genes (0 when nothing matches).
    """
    matching, disjoint, excess = gene_partition(g1, g2)
    if matching:
        wbar = sum(abs(g1.connections[i].weight - g2.connections[i].weight)
                   for i in matching) / len(matching)
    else:
        wbar = 0.0
    n = max(len(g1.connections), len(g2.connections))
    if len(g1.connections) < 20 and len(g2.connections) < 20:
        n = 1
    if n == 0:
        n = 1
    c_struct = config.compatibility_disjoint_coefficient
    return (c_struct * len(excess) + c_struct * len(disjoint)) / n \
        + config.compatibility_weight_coefficient * wbar


# -- species ------------------------------------------------------------------

@dataclass
class Species:
    id: int
    representative: Genome
    members: list[int] = field(default_factory=list)
    best_fitness: float | None = None
    best_fitness_history: list[float] = field(default_factory=list)
    stagnation_count: int = 0


@dataclass
class SpeciesSet:
    species: dict[int, Species] = field(default_factory=dict)
    next_id: int = 0
    genome_to_species: dict[int, int] = field(default_factory=dict)

    def new_species(self, representative: Genome) -> Species:
        sp = Species(self.next_id, representative.copy())
        self.next_id += 1
        self.species[sp.id] = sp
        return sp


def speciate(population: dict[int, Genome], species_set: SpeciesSet,
             config: NeatConfig) -> SpeciesSet:
    """Assign every genome to the first species within the threshold.

    Genomes that fit no existing species found a new one with themselves as
    representative. Species left empty disappear; surviving species re-choose
    their representative as the member closest to the previous one.
    """
    previous_reps = {sid: species_set.species[sid].representative
                     for sid in sorted(species_set.species)}
    for sp in species_set.species.values():
        sp.members = []
    species_set.genome_to_species = {}

    order = sorted(species_set.species)
    for gid in sorted(population):
        genome = population[gid]
        placed = None
        for sid in order:
            rep = species_set.species[sid].representative
            if compatibility_distance(genome, rep, config) < config.compatibility_threshold:
                placed = sid
                break
        if placed is None:
            sp = species_set.new_species(genome)
            order.append(sp.id)
            placed = sp.id
        species_set.species[placed].members.append(gid)
        species_set.genome_to_species[gid] = placed

    for sid in [s for s in species_set.species if not species_set.species[s].members]:
        del species_set.species[sid]

    for sid in sorted(species_set.species):
        sp = species_set.species[sid]
        prev_rep = previous_reps.get(sid, sp.representative)
        best_gid = min(sp.members,
                       key=lambda g: (compatibility_distance(population[g], prev_rep, config), g))
        sp.representative = population[best_gid].copy()
    return species_set


def adjusted_fitness(species_set: SpeciesSet,
                     population: dict[int, Genome]) -> dict[int, float]:
    """Explicit fitness sharing: divide raw fitness by species size."""
    adjusted: dict[int, float] = {}
    for sid in sorted(species_set.species):
        members = species_set.species[sid].members
        for gid in members:
            fitness = population[gid].fitness
            if fitness is None:
                raise ValueError(f"genome {gid} has no fitness")
            adjusted[gid] = fitness / len(members)
    return adjusted


def allocate_offspring(species_set: SpeciesSet, adjusted: dict[int, float],
                       config: NeatConfig,
                       population: dict[int, Genome]) -> dict[int, int]:
    """Offspring counts per species, summing exactly to pop_size.

    Stagnant species (no best-fitness improvement for more than
    max_stagnation generations) are removed first, except that the top
    species_elitism species by fitness are always retained. Each survivor's
    share is proportional to its adjusted-fitness sum, shifted by the
    population's minimum raw fitness so the base is non-negative even with
    negative fitness; largest-remainder rounding keeps the total exact.

    Returns an empty map when every species was removed (total extinction).
    """
    # stagnation bookkeeping on the species' max member fitness
    for sid in sorted(species_set.species):
        sp = species_set.species[sid]
        current = max(population[g].fitness for g in sp.members)
        sp.best_fitness_history.append(current)
        if sp.best_fitness is None or current > sp.best_fitness:
            sp.best_fitness = current
            sp.stagnation_count = 0
        else:
            sp.stagnation_count += 1

    ranked = sorted(species_set.species,
                    key=lambda s: (-species_set.species[s].best_fitness_history[-1], s))
    protected = set(ranked[:config.species_elitism])
    for sid in list(species_set.species):
        sp = species_set.species[sid]
        if sp.stagnation_count > config.max_stagnation and sid not in protected:
            for gid in sp.members:
                species_set.genome_to_species.pop(gid, None)
            del species_set.species[sid]
    if not species_set.species:
        return {}

    min_fitness = min(g.fitness for g in population.values())
    sids = sorted(species_set.species)
    bases = []
    for sid in sids:
        adj_sum = sum(adjusted[g] for g in species_set.species[sid].members)
        bases.append(max(0.0, adj_sum - min_fitness))
    total = sum(bases)
    if total <= 0.0:
        quotas = [config.pop_size / len(sids)] * len(sids)
    else:
        quotas = [config.pop_size * b / total for b in bases]

    counts = [math.floor(q) for q in quotas]
    remainder = config.pop_size - sum(counts)
    by_fraction = sorted(range(len(sids)), key=lambda i: (-(quotas[i] - counts[i]), sids[i]))
    for i in by_fraction[:remainder]:
        counts[i] += 1
    return {sid: counts[i] for i, sid in enumerate(sids)}


def reproduce(species_set: SpeciesSet, allocation: dict[int, int],
              registry: InnovationRegistry, config: NeatConfig, rng: Random,
              population: dict[int, Genome], next_key) -> dict[int, Genome]:
    """Produce the next population from the allocated species quotas.

    Per species: the top ``elitism`` members are copied verbatim; the rest
    are children of parents sampled from the top ``survival_threshold``
    fraction (crossover then mutation), or mutated copies when the parent
    pool has a single member.
    """
    new_population: dict[int, Genome] = {}
    for sid in sorted(allocation):
        quota = allocation[sid]
        if quota <= 0:
            continue
        sp = species_set.species[sid]
        members = sorted(sp.members,
                         key=lambda g: (-population[g].fitness, g))
        for gid in members[:min(config.elitism, quota)]:
            elite = population[gid].copy()
            new_population[elite.key] = elite
        pool = members[:max(1, math.ceil(config.survival_threshold * len(members)))]
        for _ in range(quota - min(config.elitism, quota, len(members))):
            if len(pool) == 1:
                child = population[pool[0]].copy(key=next_key())
            else:
                p1 = population[pool[rng.randrange(len(pool))]]
                p2 = population[pool[rng.randrange(len(pool))]]
                first, second = _order_parents(p1, p2, rng)
                child = crossover(first, second, rng, key=next_key())
            mutate(child, config, registry, rng)
            new_population[child.key] = child
    return new_population


def _order_parents(p1: Genome, p2: Genome, rng: Random) -> tuple[Genome, Genome]:
    """Fitter parent first; ties broken by smaller genome, then randomly."""
    if p1.fitness != p2.fitness:
        return (p1, p2) if p1.fitness > p2.fitness else (p2, p1)
    size1, size2 = len(p1.connections) + len(p1.nodes), len(p2.connections) + len(p2.nodes)
    if size1 != size2:
        return (p1, p2) if size1 < size2 else (p2, p1)
    return (p1, p2) if rng.random() < 0.5 else (p2, p1)


# -- the generation loop -------------------------------------------------------

@dataclass
class GenerationStats:
    generation: int
    best_fitness: float
    mean_fitness: float
    species_count: int
    best_genome_id: int
    best_nodes: int
    best_connections: int
    best_ever_fitness: float

    @property
    def best_genome_size(self) -> int:
        return self.best_nodes + self.best_connections


class Evolution:
    """Owns the population, species, innovation registry and rng.

    ``evaluator(population, generation)`` must return a fitness per genome
    id and must be a pure function of each genome (plus any per-genome seed
    it derives), so serial and parallel evaluation schedules agree.
    """

    def __init__(self, config: NeatConfig, seed: int | None = None):
        self.config = config
        self.seed = seed
        self.rng = Random(seed)
        self.registry = InnovationRegistry(config.num_inputs, config.num_outputs,
                                           config.num_hidden)
        self._next_genome_id = 0
        self.population: dict[int, Genome] = {}
        for _ in range(config.pop_size):
            key = self._take_key()
            self.population[key] = new_initial_genome(config, self.registry,
                                                      self.rng, key=key)
        self.species_set = SpeciesSet()
        self.generation = 0
        self.best: Genome | None = None
        self.history: list[GenerationStats] = []

    def _take_key(self) -> int:
        key = self._next_genome_id
        self._next_genome_id += 1
        return key

    def step(self, evaluator) -> GenerationStats:
        """Run one full generation and leave the next population ready."""
        fitnesses = evaluator(self.population, self.generation)
        for gid in sorted(self.population):
            self.population[gid].fitness = float(fitnesses[gid])

        best_gid = min(sorted(self.population),
                       key=lambda g: (-self.population[g].fitness, g))
        best = self.population[best_gid]
        if self.best is None or best.fitness > self.best.fitness:
            self.best = best.copy()

        speciate(self.population, self.species_set, self.config)
        adjusted = adjusted_fitness(self.species_set, self.population)
        allocation = allocate_offspring(self.species_set, adjusted,
                                        self.config, self.population)
        stats = GenerationStats(
            generation=self.generation,
            best_fitness=best.fitness,
            mean_fitness=sum(g.fitness for g in self.population.values())
            / len(self.population),
            species_count=len(self.species_set.species),
            best_genome_id=best_gid,
            best_nodes=len(best.nodes),
            best_connections=len(best.connections),
            best_ever_fitness=self.best.fitness,
        )
        self.history.append(stats)

        if not allocation:
            if not self.config.reset_on_extinction:
                raise TotalExtinctionError(
                    f"all species extinct at generation {self.generation}")
            self.population = {}
            for _ in range(self.config.pop_size):
                key = self._take_key()
                self.population[key] = new_initial_genome(
                    self.config, self.registry, self.rng, key=key)
            self.species_set = SpeciesSet()
        else:
            self.population = reproduce(self.species_set, allocation,
                                        self.registry, self.config, self.rng,
                                        self.population, self._take_key)
        self.generation += 1
        return stats

    def run(self, evaluator, max_generations: int, stop_at_threshold: bool = True,
            on_generation=None) -> tuple[Genome, list[GenerationStats]]:
        """Iterate generations until the cap or the fitness threshold.

        Returns the best genome ever seen and the per-generation log.
        """
        while self.generation < max_generations:
            stats = self.step(evaluator)
            if on_generation is not None:
                on_generation(self, stats)
            if stop_at_threshold and stats.best_fitness >= self.config.fitness_threshold:
                break
        return self.best, self.history


def serial_evaluator(fn):
    """Adapt a per-genome fitness function to the population-evaluator shape."""

    def evaluate(population: dict[int, Genome], generation: int) -> dict[int, float]:
        return {gid: fn(population[gid]) for gid in sorted(population)}

    return evaluate
