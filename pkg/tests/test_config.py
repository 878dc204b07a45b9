"""Config file parsing, env overrides and serialization round trips."""

import dataclasses
import random

import numpy as np
import pytest

from neatsnake.config import (ConfigError, NeatConfig, apply_env_overrides,
                              dump_config, load_config, parse_config)
from neatsnake.genome import InnovationRegistry, new_initial_genome
from neatsnake.network import compile_network
from neatsnake.serialize import (genome_from_bytes, genome_to_bytes,
                                 load_genome, parameter_count, save_genome)

from conftest import connection_pool, random_genome


class TestConfig:
    def test_defaults_round_trip_exactly(self):
        cfg = NeatConfig()
        assert parse_config(dump_config(cfg)) == cfg

    def test_perturbed_values_round_trip_exactly(self):
        cfg = NeatConfig(weight_mutate_power=2.9999999999999996,
                         compatibility_threshold=4.000000000000001,
                         pop_size=73)
        assert parse_config(dump_config(cfg)) == cfg

    def test_repo_configs_load(self):
        snake = load_config("configs/snake_neat.cfg")
        assert snake == NeatConfig()
        xor = load_config("configs/xor.cfg")
        assert (xor.num_inputs, xor.num_outputs, xor.pop_size) == (2, 1, 150)
        assert xor.activation_default == "sigmoid"

    def test_unknown_key_is_error_naming_key(self):
        with pytest.raises(ConfigError, match="no_such_knob"):
            parse_config("no_such_knob = 3\n")

    def test_bad_value_is_error(self):
        with pytest.raises(ConfigError, match="pop_size"):
            parse_config("pop_size = many\n")

    def test_bad_line_is_error(self):
        with pytest.raises(ConfigError):
            parse_config("pop_size 100\n")

    def test_comments_and_blank_lines_ok(self):
        cfg = parse_config("# comment\n\npop_size = 42  # trailing\n")
        assert cfg.pop_size == 42

    def test_unsupported_choices_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("fitness_criterion = min\n")
        with pytest.raises(ConfigError):
            parse_config("feed_forward = False\n")
        with pytest.raises(ConfigError):
            parse_config("activation_default = gaussian\n")

    def test_env_overrides(self):
        cfg = NeatConfig()
        out = apply_env_overrides(cfg, env={"NEATSNAKE_POP_SIZE": "17",
                                            "NEATSNAKE_WEIGHT_MUTATE_POWER": "1.25",
                                            "UNRELATED": "x"})
        assert out.pop_size == 17
        assert out.weight_mutate_power == 1.25
        assert cfg.pop_size == 100  # original untouched

    def test_env_override_bad_value(self):
        with pytest.raises(ConfigError):
            apply_env_overrides(NeatConfig(), env={"NEATSNAKE_POP_SIZE": "lots"})

    def test_bool_parsing(self):
        assert parse_config("reset_on_extinction = False\n").reset_on_extinction is False
        with pytest.raises(ConfigError):
            parse_config("reset_on_extinction = soon\n")


class TestGenomeSerialization:
    def _rich_genome(self, seed=0):
        rng = random.Random(seed)
        g = random_genome(rng, connection_pool(5, 2, 6), 5, 2, key=17,
                          activation="identity")
        g.fitness = rng.uniform(-100, 2500)
        return g

    def test_round_trip_bit_exact(self):
        g = self._rich_genome()
        dup = genome_from_bytes(genome_to_bytes(g))
        assert dup.key == g.key
        assert dup.fitness == g.fitness
        assert set(dup.nodes) == set(g.nodes)
        for nid, node in g.nodes.items():
            other = dup.nodes[nid]
            assert (other.kind, other.activation) == (node.kind, node.activation)
            assert other.bias == node.bias and other.response == node.response
        assert set(dup.connections) == set(g.connections)
        for innov, conn in g.connections.items():
            other = dup.connections[innov]
            assert (other.in_node, other.out_node, other.enabled) \
                == (conn.in_node, conn.out_node, conn.enabled)
            assert other.weight == conn.weight

    def test_reloaded_genome_activates_identically(self, tmp_path):
        g = self._rich_genome(3)
        path = tmp_path / "champ.genome"
        size = save_genome(g, path)
        assert size == path.stat().st_size
        dup = load_genome(path)
        net_a, net_b = compile_network(g), compile_network(dup)
        rng = random.Random(0)
        for _ in range(20):
            x = [rng.uniform(-2, 2) for _ in range(5)]
            np.testing.assert_array_equal(net_a.activate(x), net_b.activate(x))

    def test_parameter_count(self):
        cfg = NeatConfig()
        g = new_initial_genome(cfg, InnovationRegistry(120, 2, 40),
                               random.Random(0))
        # one weight per connection, bias+response per non-input node
        assert parameter_count(g) == 5120 + 2 * 42 == 5204

    def test_dense_genome_size_budget(self, tmp_path):
        cfg = NeatConfig()
        g = new_initial_genome(cfg, InnovationRegistry(120, 2, 40),
                               random.Random(1))
        path = tmp_path / "dense.genome"
        size = save_genome(g, path)
        assert size < 72 * 1024

    def test_bad_blob_rejected(self):
        from neatsnake.serialize import SerializationError
        with pytest.raises(SerializationError):
            genome_from_bytes(b"garbage-not-a-genome")
