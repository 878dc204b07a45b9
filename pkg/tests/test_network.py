"""Network compilation and evaluation against an independent oracle."""

import math
import random

import numpy as np
import pytest

from neatsnake.genome import CycleError, ConnectionGene
from neatsnake.network import compile_network

from conftest import build_genome, connection_pool, random_genome


def oracle_activate(genome, inputs):
    """Per-node recursive evaluation, independent of the compiled plan."""
    acts = {
        "identity": lambda v: v,
        "sigmoid": lambda v: 1.0 / (1.0 + math.exp(-v)) if v >= 0
        else math.exp(v) / (1.0 + math.exp(v)),
        "tanh": math.tanh,
        "relu": lambda v: max(0.0, v),
    }
    values = {nid: float(x) for nid, x in zip(genome.input_ids(), inputs)}

    def value(nid):
        if nid in values:
            return values[nid]
        node = genome.nodes[nid]
        incoming = [c for c in genome.connections.values()
                    if c.enabled and c.out_node == nid]
        total = sum(c.weight * value(c.in_node) for c in incoming)
        values[nid] = acts[node.activation](node.bias + node.response * total)
        return values[nid]

    return [value(nid) for nid in genome.output_ids()]


class TestCompile:
    def test_single_connection(self):
        g = build_genome(n_in=1, n_out=1, connections=[(0, 0, 1, 2.0)])
        net = compile_network(g)
        assert net.activate([3.0])[0] == pytest.approx(6.0, abs=1e-15)

    def test_chain_composition(self):
        g = build_genome(n_in=1, n_out=1, hidden_ids=[2],
                         connections=[(0, 0, 2, 2.0), (1, 2, 1, 3.0)])
        net = compile_network(g)
        assert net.activate([1.0])[0] == pytest.approx(6.0, abs=1e-15)

    def test_disconnected_output_keeps_bias(self):
        g = build_genome(n_in=2, n_out=1, biases={2: 0.7})
        net = compile_network(g)
        for x in ([0.0, 0.0], [5.0, -3.0], [1e3, 1e3]):
            assert net.activate(x)[0] == pytest.approx(0.7, abs=1e-15)

    def test_unreachable_hidden_still_evaluates(self):
        g = build_genome(n_in=1, n_out=1, hidden_ids=[2, 3],
                         biases={3: 1.25},
                         connections=[(0, 0, 1, 1.0), (1, 3, 1, 2.0)])
        # node 3 has no inputs: contributes bias * weight
        net = compile_network(g)
        assert net.activate([0.5])[0] == pytest.approx(0.5 + 2.5, abs=1e-14)

    def test_cycle_raises(self):
        g = build_genome(n_in=1, n_out=1, hidden_ids=[2, 3],
                         connections=[(0, 0, 2, 1.0), (1, 2, 3, 1.0), (2, 3, 1, 1.0)])
        # force a cycle between the hidden nodes, bypassing the builder guard
        g.connections[9] = ConnectionGene(9, 3, 2, 1.0, True)
        with pytest.raises(CycleError):
            compile_network(g)

    def test_disabled_connections_ignored(self):
        g = build_genome(n_in=1, n_out=1,
                         connections=[(0, 0, 1, 5.0, False)])
        net = compile_network(g)
        assert net.activate([1.0])[0] == 0.0


class TestActivate:
    def test_wrong_arity_raises(self):
        g = build_genome(n_in=3, n_out=1, connections=[(0, 0, 3, 1.0)])
        net = compile_network(g)
        with pytest.raises(ValueError):
            net.activate([1.0, 2.0])

    def test_all_zero(self):
        g = build_genome(n_in=4, n_out=2,
                         connections=[(i, i, 4 + (i % 2), 1.0) for i in range(4)])
        net = compile_network(g)
        assert tuple(net.activate(np.zeros(4))) == (0.0, 0.0)

    def test_purity(self):
        rng = random.Random(1)
        g = random_genome(rng, connection_pool(3, 2, 4), 3, 2)
        net = compile_network(g)
        x = np.array([0.3, -1.2, 2.2])
        first = net.activate(x)
        for _ in range(5):
            np.testing.assert_array_equal(net.activate(x), first)

    def test_matches_recursive_oracle(self):
        rng = random.Random(2024)
        pool = connection_pool(4, 2, 8)
        for trial in range(40):
            activation = rng.choice(["identity", "sigmoid", "tanh", "relu"])
            g = random_genome(rng, pool, 4, 2, key=trial, activation=activation)
            net = compile_network(g)
            for _ in range(5):
                x = [rng.uniform(-3, 3) for _ in range(4)]
                np.testing.assert_allclose(net.activate(x), oracle_activate(g, x),
                                           rtol=0.0, atol=1e-12)

    def test_output_order_fixed(self):
        g = build_genome(n_in=1, n_out=2, biases={1: 10.0, 2: 20.0})
        net = compile_network(g)
        o1, o2 = net.activate([0.0])
        assert (o1, o2) == (10.0, 20.0)
