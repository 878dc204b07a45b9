"""Speciation, fitness sharing, allocation, reproduction, generation loop."""

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neatsnake.config import NeatConfig
from neatsnake.evolution import (Evolution, Species, SpeciesSet,
                                 TotalExtinctionError, adjusted_fitness,
                                 allocate_offspring, compatibility_distance,
                                 reproduce, serial_evaluator, speciate)
from neatsnake.genome import Genome, InnovationRegistry, new_initial_genome

from conftest import build_genome, connection_pool, random_genome


def stub_population(fitness_by_id):
    population = {}
    for gid, fit in fitness_by_id.items():
        g = Genome(gid)
        g.fitness = fit
        population[gid] = g
    return population


def stub_species_set(members_by_species, population):
    ss = SpeciesSet()
    for sid in sorted(members_by_species):
        members = members_by_species[sid]
        sp = Species(sid, population[members[0]].copy())
        sp.members = list(members)
        ss.species[sid] = sp
        ss.next_id = max(ss.next_id, sid + 1)
        for gid in members:
            ss.genome_to_species[gid] = sid
    return ss


class TestCompatibilityDistance:
    def test_identical_genomes_zero(self, table_config):
        g = random_genome(random.Random(0), connection_pool(3, 2, 4), 3, 2)
        assert compatibility_distance(g, g, table_config) == 0.0

    def test_direct_formula_example(self, table_config):
        # 20 vs 19 genes, E=1 (innov 20), D=2 (innovs 18, 19), Wbar=0.4
        pool = connection_pool(5, 5, 0)  # 25 distinct pairs
        conns_a = [(i, pool[i][1], pool[i][2], 1.0) for i in range(20)]
        conns_b = ([(i, pool[i][1], pool[i][2], 1.4) for i in range(18)]
                   + [(20, pool[20][1], pool[20][2], 1.0)])
        a = build_genome(n_in=5, n_out=5, connections=conns_a)
        b = build_genome(n_in=5, n_out=5, connections=conns_b)
        delta = compatibility_distance(a, b, table_config)
        assert delta == pytest.approx(1 * 1 / 20 + 1 * 2 / 20 + 0.5 * 0.4, abs=1e-12)
        assert delta == pytest.approx(0.35, abs=1e-12)

    def test_no_matching_genes_wbar_zero(self, table_config):
        pool = connection_pool(3, 2, 2)
        a = build_genome(n_in=3, n_out=2,
                         connections=[(i, pool[i][1], pool[i][2], 1.0) for i in (0, 1, 2)])
        b = build_genome(n_in=3, n_out=2,
                         connections=[(i, pool[i][1], pool[i][2], 9.0) for i in (3, 4)])
        # small genomes: N forced to 1; delta = E + D
        assert compatibility_distance(a, b, table_config) == pytest.approx(5.0, abs=1e-12)

    def test_small_genome_rule_boundary(self, table_config):
        pool = connection_pool(5, 5, 0)
        # 20 genes on one side disables the N := 1 rule
        a = build_genome(n_in=5, n_out=5,
                         connections=[(i, pool[i][1], pool[i][2], 1.0) for i in range(20)])
        b = build_genome(n_in=5, n_out=5,
                         connections=[(i, pool[i][1], pool[i][2], 1.0) for i in range(19)])
        assert compatibility_distance(a, b, table_config) == pytest.approx(1 / 20, abs=1e-12)


class TestSpeciate:
    def test_clone_population_single_species(self, table_config):
        g = random_genome(random.Random(5), connection_pool(3, 2, 3), 3, 2)
        population = {k: g.copy(key=k) for k in range(10)}
        ss = speciate(population, SpeciesSet(), table_config)
        assert len(ss.species) == 1
        assert sorted(next(iter(ss.species.values())).members) == list(range(10))

    def test_distant_genomes_two_species(self, table_config):
        pool = connection_pool(3, 2, 2)
        a = build_genome(n_in=3, n_out=2,
                         connections=[(i, pool[i][1], pool[i][2], 1.0) for i in (0, 1, 2)])
        b = build_genome(n_in=3, n_out=2,
                         connections=[(i, pool[i][1], pool[i][2], 1.0) for i in (3, 4)])
        assert compatibility_distance(a, b, table_config) == 5.0 > 4.0
        ss = speciate({0: a, 1: b}, SpeciesSet(), table_config)
        assert len(ss.species) == 2

    def test_partition_property(self, table_config):
        rng = random.Random(77)
        pool = connection_pool(4, 2, 5)
        population = {k: random_genome(rng, pool, 4, 2, key=k) for k in range(30)}
        ss = speciate(population, SpeciesSet(), table_config)
        seen = sorted(gid for sp in ss.species.values() for gid in sp.members)
        assert seen == sorted(population)
        assert sorted(ss.genome_to_species) == sorted(population)

    def test_members_within_threshold_of_representative_at_assignment(self):
        cfg = NeatConfig(num_inputs=4, num_outputs=2, num_hidden=2,
                         compatibility_threshold=1.0)
        rng = random.Random(3)
        pool = connection_pool(4, 2, 5)
        population = {k: random_genome(rng, pool, 4, 2, key=k) for k in range(25)}
        ss = SpeciesSet()
        speciate(population, ss, cfg)
        reps_before = {sid: sp.representative.copy() for sid, sp in ss.species.items()}
        # second pass assigns against exactly these representatives
        population2 = {k: g.copy() for k, g in population.items()}
        speciate(population2, ss, cfg)
        for sid, sp in ss.species.items():
            if sid not in reps_before:
                continue  # founded during the second pass
            for gid in sp.members:
                assert compatibility_distance(population2[gid], reps_before[sid],
                                              cfg) < 1.0


class TestAdjustedFitness:
    def test_singleton_species_unchanged(self):
        population = stub_population({0: 12.5})
        ss = stub_species_set({0: [0]}, population)
        assert adjusted_fitness(ss, population) == {0: 12.5}

    def test_shared_by_species_size(self):
        population = stub_population({0: 10.0, 1: 30.0})
        ss = stub_species_set({0: [0, 1]}, population)
        assert adjusted_fitness(ss, population) == {0: 5.0, 1: 15.0}

    def test_species_sum_equals_mean_raw(self):
        rng = random.Random(8)
        fits = {k: rng.uniform(-50, 50) for k in range(12)}
        population = stub_population(fits)
        ss = stub_species_set({0: [0, 1, 2], 1: [3, 4], 2: list(range(5, 12))},
                              population)
        adjusted = adjusted_fitness(ss, population)
        for sp in ss.species.values():
            total = sum(adjusted[g] for g in sp.members)
            mean = sum(fits[g] for g in sp.members) / len(sp.members)
            assert total == pytest.approx(mean, abs=1e-12)


class TestAllocation:
    def test_single_species_gets_all(self, table_config):
        population = stub_population({k: float(k) for k in range(5)})
        ss = stub_species_set({0: list(range(5))}, population)
        adjusted = adjusted_fitness(ss, population)
        allocation = allocate_offspring(ss, adjusted, table_config, population)
        assert allocation == {0: 100}

    def test_proportional_example(self, table_config):
        # species sums after shift: 30 and 10 -> 75 and 25
        population = stub_population({0: 30.0, 1: 0.0, 2: 20.0})
        ss = stub_species_set({0: [0], 1: [1, 2]}, population)
        adjusted = adjusted_fitness(ss, population)
        allocation = allocate_offspring(ss, adjusted, table_config, population)
        assert allocation == {0: 75, 1: 25}

    def test_sums_always_pop_size(self, table_config):
        rng = random.Random(99)
        for _ in range(300):
            k = rng.randint(1, 12)
            population, members = {}, {}
            gid = 0
            for sid in range(k):
                size = rng.randint(1, 10)
                members[sid] = list(range(gid, gid + size))
                for _ in range(size):
                    g = Genome(gid)
                    g.fitness = rng.uniform(-200, 200)
                    population[gid] = g
                    gid += 1
            ss = stub_species_set(members, population)
            adjusted = adjusted_fitness(ss, population)
            allocation = allocate_offspring(ss, adjusted, table_config, population)
            assert sum(allocation.values()) == table_config.pop_size

    def test_stagnant_species_removed_except_top_two(self, table_config):
        population = stub_population({0: 5.0, 1: 4.0, 2: 3.0})
        ss = stub_species_set({0: [0], 1: [1], 2: [2]}, population)
        for sp in ss.species.values():
            sp.best_fitness = 100.0  # never improved upon
            sp.stagnation_count = 20  # one more non-improving generation trips it
        adjusted = adjusted_fitness(ss, population)
        allocation = allocate_offspring(ss, adjusted, table_config, population)
        assert set(allocation) == {0, 1}  # two best retained by species elitism

    def test_total_extinction_returns_empty(self):
        cfg = NeatConfig(species_elitism=0)
        population = stub_population({0: 1.0})
        ss = stub_species_set({0: [0]}, population)
        ss.species[0].best_fitness = 10.0
        ss.species[0].stagnation_count = 25
        allocation = allocate_offspring(ss, adjusted_fitness(ss, population),
                                        cfg, population)
        assert allocation == {}


class TestReproduce:
    def _population(self, cfg, n, seed=4):
        reg = InnovationRegistry(cfg.num_inputs, cfg.num_outputs, cfg.num_hidden)
        rng = random.Random(seed)
        return {k: new_initial_genome(cfg, reg, rng, key=k) for k in range(n)}, reg

    def test_two_offspring_are_verbatim_elites(self, tiny_config):
        cfg = tiny_config(num_inputs=3, num_outputs=1, num_hidden=1, pop_size=2)
        population, reg = self._population(cfg, 6)
        for k, g in population.items():
            g.fitness = float(k)
        ss = stub_species_set({0: list(population)}, population)
        allocation = {0: 2}
        new_pop = reproduce(ss, allocation, reg, cfg, random.Random(0),
                            population, iter(range(100, 200)).__next__)
        assert len(new_pop) == 2
        # elites are the two fittest members, copied unchanged
        assert set(new_pop) == {4, 5}
        for gid in new_pop:
            src, dup = population[gid], new_pop[gid]
            assert {i: c.weight for i, c in src.connections.items()} \
                == {i: c.weight for i, c in dup.connections.items()}

    def test_parent_pool_is_top_30_percent(self, tiny_config):
        cfg = tiny_config(num_inputs=2, num_outputs=1, num_hidden=0, pop_size=20,
                          node_add_prob=0.0, conn_add_prob=0.0,
                          node_delete_prob=0.0, conn_delete_prob=0.0,
                          weight_mutate_rate=0.0, weight_replace_rate=0.0,
                          bias_mutate_rate=0.0, bias_replace_rate=0.0,
                          enabled_mutate_rate=0.0, elitism=0)
        population, reg = self._population(cfg, 10)
        # distinctive weights per genome: genome k has all weights = k
        for k, g in population.items():
            g.fitness = float(k)
            for c in g.connections.values():
                c.weight = float(k)
        ss = stub_species_set({0: list(population)}, population)
        new_pop = reproduce(ss, {0: 20}, reg, cfg, random.Random(1), population,
                            iter(range(100, 200)).__next__)
        pool_weights = {7.0, 8.0, 9.0}  # ceil(0.3 * 10) = 3 fittest
        for child in new_pop.values():
            assert {c.weight for c in child.connections.values()} <= pool_weights

    def test_population_size_conserved(self, tiny_config):
        cfg = tiny_config(num_inputs=3, num_outputs=2, num_hidden=1, pop_size=30)
        population, reg = self._population(cfg, 30)
        for k, g in population.items():
            g.fitness = math.sin(k * 2.7) * 40
        ss = speciate(population, SpeciesSet(), cfg)
        adjusted = adjusted_fitness(ss, population)
        allocation = allocate_offspring(ss, adjusted, cfg, population)
        new_pop = reproduce(ss, allocation, reg, cfg, random.Random(2),
                            population, iter(range(1000, 2000)).__next__)
        assert len(new_pop) == 30


class TestRun:
    def test_constant_evaluator_runs_out_generations(self, tiny_config):
        cfg = tiny_config(num_inputs=2, num_outputs=1, num_hidden=0, pop_size=12,
                          fitness_threshold=1000.0)
        evo = Evolution(cfg, seed=0)
        champion, history = evo.run(serial_evaluator(lambda g: 0.0),
                                    max_generations=25)
        assert len(history) == 25
        assert champion is not None and champion.fitness == 0.0
        assert all(s.species_count >= 1 for s in history)

    def test_threshold_stops_early(self, tiny_config):
        cfg = tiny_config(pop_size=8, fitness_threshold=5.0)
        evo = Evolution(cfg, seed=0)
        champion, history = evo.run(serial_evaluator(lambda g: 9.0),
                                    max_generations=50)
        assert len(history) == 1
        assert champion.fitness == 9.0

    def test_monotone_best_ever(self, tiny_config):
        cfg = tiny_config(pop_size=14, fitness_threshold=1e12)
        rng = random.Random(17)
        evo = Evolution(cfg, seed=1)
        evo.run(serial_evaluator(lambda g: rng.uniform(-10, 10)),
                max_generations=30, stop_at_threshold=False)
        best_ever = [s.best_ever_fitness for s in evo.history]
        assert best_ever == sorted(best_ever)
        assert best_ever[-1] == max(s.best_fitness for s in evo.history)

    def test_seed_determinism(self, tiny_config):
        cfg = tiny_config(pop_size=10, num_hidden=1, fitness_threshold=1e12)

        def log_for(seed):
            evo = Evolution(cfg, seed=seed)
            evo.run(serial_evaluator(
                lambda g: sum(c.weight for c in g.connections.values())),
                max_generations=12, stop_at_threshold=False)
            return [(s.best_fitness, s.mean_fitness, s.species_count)
                    for s in evo.history]

        assert log_for(5) == log_for(5)
        assert log_for(5) != log_for(6)

    def test_extinction_without_reset_raises(self):
        cfg = NeatConfig(num_inputs=2, num_outputs=1, num_hidden=0, pop_size=6,
                         reset_on_extinction=False, species_elitism=0,
                         max_stagnation=1, fitness_threshold=1e12)
        evo = Evolution(cfg, seed=0)
        with pytest.raises(TotalExtinctionError):
            evo.run(serial_evaluator(lambda g: 1.0), max_generations=30,
                    stop_at_threshold=False)

    def test_extinction_with_reset_respawns(self):
        cfg = NeatConfig(num_inputs=2, num_outputs=1, num_hidden=0, pop_size=6,
                         reset_on_extinction=True, species_elitism=0,
                         max_stagnation=1, fitness_threshold=1e12)
        evo = Evolution(cfg, seed=0)
        evo.run(serial_evaluator(lambda g: 1.0), max_generations=10,
                stop_at_threshold=False)
        assert len(evo.population) == 6
        assert len(evo.history) == 10

    def test_elitism_preserves_top_members(self, tiny_config):
        cfg = tiny_config(pop_size=12, num_hidden=0, fitness_threshold=1e12)
        evaluator = serial_evaluator(
            lambda g: sum(c.weight for c in g.connections.values()))
        evo = Evolution(cfg, seed=3)
        for _ in range(6):
            prev_pop = {k: g.copy() for k, g in evo.population.items()}
            stats = evo.step(evaluator)
            prev_best = max(prev_pop, key=lambda k: prev_pop[k].fitness
                            if prev_pop[k].fitness is not None else -1e18)
        # champion genome still present verbatim after reproduction
        champion = evo.best
        present = any(
            {i: c.weight for i, c in g.connections.items()}
            == {i: c.weight for i, c in champion.connections.items()}
            for g in evo.population.values())
        assert present


@given(st.lists(st.floats(min_value=-100, max_value=100,
                          allow_nan=False, allow_infinity=False),
                min_size=1, max_size=40))
@settings(max_examples=60, deadline=None)
def test_allocation_sum_property(fits):
    cfg = NeatConfig()
    population = stub_population(dict(enumerate(fits)))
    # split into up to 4 species deterministically
    members = {}
    for gid in population:
        members.setdefault(gid % min(4, len(fits)), []).append(gid)
    ss = stub_species_set(members, population)
    allocation = allocate_offspring(ss, adjusted_fitness(ss, population),
                                    cfg, population)
    assert sum(allocation.values()) == cfg.pop_size
