"""Shared builders for genome-level and world-level tests."""

import math
import random

import pytest

from neatsnake.config import NeatConfig
from neatsnake.genome import (HIDDEN, INPUT, OUTPUT, ConnectionGene, Genome,
                              NodeGene)


def build_genome(n_in=2, n_out=1, hidden_ids=(), connections=(), key=0,
                 biases=None, responses=None, activation="identity"):
    """Explicit genome: connections are (innovation, in, out, weight[, enabled])."""
    biases = biases or {}
    responses = responses or {}
    g = Genome(key)
    for i in range(n_in):
        g.add_node(NodeGene(i, INPUT))
    for j in range(n_in, n_in + n_out):
        g.add_node(NodeGene(j, OUTPUT, bias=biases.get(j, 0.0),
                            response=responses.get(j, 1.0), activation=activation))
    for h in hidden_ids:
        g.add_node(NodeGene(h, HIDDEN, bias=biases.get(h, 0.0),
                            response=responses.get(h, 1.0), activation=activation))
    for conn in connections:
        innov, src, dst, weight = conn[:4]
        enabled = conn[4] if len(conn) > 4 else True
        g.add_connection(ConnectionGene(innov, src, dst, weight, enabled))
    return g


def connection_pool(n_in, n_out, n_hidden):
    """All forward (in, out) pairs with a fixed innovation numbering.

    Any subset is acyclic, and a shared pool guarantees that genomes agree
    on (innovation -> endpoints), the innovation-consistency invariant.
    """
    inputs = list(range(n_in))
    outputs = list(range(n_in, n_in + n_out))
    hidden = list(range(n_in + n_out, n_in + n_out + n_hidden))
    pairs = ([(i, h) for i in inputs for h in hidden]
             + [(h1, h2) for h1 in hidden for h2 in hidden if h1 < h2]
             + [(h, o) for h in hidden for o in outputs]
             + [(i, o) for i in inputs for o in outputs])
    return [(innov, src, dst) for innov, (src, dst) in enumerate(pairs)]


def random_genome(rng: random.Random, pool, n_in, n_out, key=0,
                  weight_scale=2.0, activation="identity",
                  p_enabled=0.9, max_genes=None):
    """Random subset of the pool plus random parameters."""
    n_genes = rng.randint(1, max_genes or len(pool))
    chosen = sorted(rng.sample(pool, min(n_genes, len(pool))))
    node_ids = {nid for _, src, dst in chosen for nid in (src, dst)}
    node_ids.update(range(n_in + n_out))
    g = Genome(key)
    for nid in sorted(node_ids):
        if nid < n_in:
            g.add_node(NodeGene(nid, INPUT))
        else:
            kind = OUTPUT if nid < n_in + n_out else HIDDEN
            g.add_node(NodeGene(nid, kind,
                                bias=rng.uniform(-2.0, 2.0),
                                response=rng.uniform(-2.0, 2.0),
                                activation=activation))
    for innov, src, dst in chosen:
        g.add_connection(ConnectionGene(innov, src, dst,
                                        rng.uniform(-weight_scale, weight_scale),
                                        rng.random() < p_enabled))
    return g


class ScriptedRng:
    """Replays scripted uniform and gaussian draws; errs when exhausted."""

    def __init__(self, randoms=(), gauss=()):
        self._randoms = list(randoms)
        self._gauss = list(gauss)

    def random(self):
        return self._randoms.pop(0)

    def gauss(self, mu, sigma):
        return self._gauss.pop(0)

    def randrange(self, n):
        return int(self.random() * n)


@pytest.fixture
def tiny_config():
    def make(**overrides):
        base = dict(num_inputs=2, num_outputs=1, num_hidden=0, pop_size=10)
        base.update(overrides)
        return NeatConfig(**base)
    return make


@pytest.fixture
def table_config():
    return NeatConfig()
