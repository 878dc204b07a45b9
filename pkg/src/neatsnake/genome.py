"""Genome encoding for evolvable feedforward networks.

A genome is a bag of node genes and connection genes. Connection genes carry
innovation numbers (historical markers) so that crossover can align genes
that descend from the same structural mutation. Structural mutations (adding
nodes by splitting connections, adding connections) mint their markers
through a shared :class:`InnovationRegistry`, which guarantees that identical
mutations arising independently receive identical numbers.

The enabled-connection digraph of every genome is kept acyclic at all times;
the stronger invariant maintained here is that the digraph over *all*
connection genes (enabled or not) is acyclic, so toggling enabled flags can
never introduce a cycle.
"""

from __future__ import annotations

import copy
from typing import Iterable

INPUT = "input"
HIDDEN = "hidden"
OUTPUT = "output"


class GenomeError(Exception):
    """A genome violated a structural invariant."""


class CycleError(GenomeError):
    """The connection digraph is not acyclic (corrupted genome)."""


def clamp(value: float, lo: float, hi: float) -> float:
    return lo if value < lo else hi if value > hi else value


class NodeGene:
    __slots__ = ("id", "kind", "bias", "response", "activation", "aggregation")

    def __init__(self, id: int, kind: str, bias: float = 0.0, response: float = 1.0,
                 activation: str = "identity", aggregation: str = "sum"):
        self.id = id
        self.kind = kind
        self.bias = bias
        self.response = response
        self.activation = activation
        self.aggregation = aggregation

    def copy(self) -> "NodeGene":
        return NodeGene(self.id, self.kind, self.bias, self.response,
                        self.activation, self.aggregation)

    def __repr__(self):
        return (f"NodeGene({self.id}, {self.kind!r}, bias={self.bias:.4g}, "
                f"response={self.response:.4g})")


class ConnectionGene:
    __slots__ = ("innovation", "in_node", "out_node", "weight", "enabled")

    def __init__(self, innovation: int, in_node: int, out_node: int,
                 weight: float, enabled: bool = True):
        self.innovation = innovation
        self.in_node = in_node
        self.out_node = out_node
        self.weight = weight
        self.enabled = enabled

    def copy(self) -> "ConnectionGene":
        return ConnectionGene(self.innovation, self.in_node, self.out_node,
                              self.weight, self.enabled)

    def __repr__(self):
        flag = "" if self.enabled else ", disabled"
        return (f"ConnectionGene(#{self.innovation} {self.in_node}->{self.out_node} "
                f"w={self.weight:.4g}{flag})")


class InnovationRegistry:
    """Mints innovation numbers and node ids for structural mutations.

    The registry is shared by a whole evolution run, so identical structural
    mutations get identical markers for the lifetime of the run. That is
    stronger than the per-generation guarantee crossover alignment needs.
    """

    def __init__(self, num_inputs: int, num_outputs: int, num_hidden: int = 0):
        self.num_inputs = num_inputs
        self.num_outputs = num_outputs
        self.next_innovation = 0
        self.next_node_id = num_inputs + num_outputs + num_hidden
        self._connections: dict[tuple[int, int], int] = {}
        self._splits: dict[int, list[tuple[int, int, int]]] = {}

    def connection_innovation(self, in_node: int, out_node: int) -> int:
        key = (in_node, out_node)
        innovation = self._connections.get(key)
        if innovation is None:
            innovation = self.next_innovation
            self.next_innovation += 1
            self._connections[key] = innovation
        return innovation

    def split_ids(self, conn: ConnectionGene, existing_node_ids) -> tuple[int, int, int]:
        """Node id and the two connection innovations for splitting `conn`.

        Re-splitting a connection whose split node is already present in the
        genome mints a fresh triple; the triples are recorded so that other
        genomes in the same situation receive the same ids.
        """
        triples = self._splits.setdefault(conn.innovation, [])
        for triple in triples:
            if triple[0] not in existing_node_ids:
                return triple
        node_id = self.next_node_id
        self.next_node_id += 1
        innov_in = self.connection_innovation(conn.in_node, node_id)
        innov_out = self.connection_innovation(node_id, conn.out_node)
        triple = (node_id, innov_in, innov_out)
        triples.append(triple)
        return triple


class Genome:
    """Nodes plus connections; the unit of selection."""

    __slots__ = ("key", "nodes", "connections", "fitness")

    def __init__(self, key: int = 0):
        self.key = key
        self.nodes: dict[int, NodeGene] = {}
        self.connections: dict[int, ConnectionGene] = {}  # keyed by innovation
        self.fitness: float | None = None

    # -- structure queries -------------------------------------------------

    def input_ids(self) -> list[int]:
        return sorted(n.id for n in self.nodes.values() if n.kind == INPUT)

    def output_ids(self) -> list[int]:
        return sorted(n.id for n in self.nodes.values() if n.kind == OUTPUT)

    def hidden_ids(self) -> list[int]:
        return sorted(n.id for n in self.nodes.values() if n.kind == HIDDEN)

    def connection_pairs(self) -> set[tuple[int, int]]:
        return {(c.in_node, c.out_node) for c in self.connections.values()}

    def size(self) -> tuple[int, int]:
        return len(self.nodes), len(self.connections)

    def copy(self, key: int | None = None) -> "Genome":
        dup = Genome(self.key if key is None else key)
        dup.nodes = {nid: n.copy() for nid, n in self.nodes.items()}
        dup.connections = {i: c.copy() for i, c in self.connections.items()}
        dup.fitness = self.fitness
        return dup

    # -- builders (used by initialisation, mutation and tests) -------------

    def add_node(self, node: NodeGene) -> NodeGene:
        if node.id in self.nodes:
            raise GenomeError(f"duplicate node id {node.id}")
        self.nodes[node.id] = node
        return node

    def add_connection(self, conn: ConnectionGene) -> ConnectionGene:
        if conn.innovation in self.connections:
            raise GenomeError(f"duplicate innovation {conn.innovation}")
        if (conn.in_node, conn.out_node) in self.connection_pairs():
            raise GenomeError(
                f"duplicate connection {conn.in_node}->{conn.out_node}")
        self.connections[conn.innovation] = conn
        return conn

    def __repr__(self):
        return (f"Genome(key={self.key}, nodes={len(self.nodes)}, "
                f"connections={len(self.connections)}, fitness={self.fitness})")


def creates_cycle(pairs: Iterable[tuple[int, int]], in_node: int, out_node: int) -> bool:
    """Would adding in_node->out_node close a directed cycle?"""
    if in_node == out_node:
        return True
    adjacency: dict[int, list[int]] = {}
    for src, dst in pairs:
        adjacency.setdefault(src, []).append(dst)
    # a cycle appears iff in_node is reachable from out_node
    stack = [out_node]
    seen = set()
    while stack:
        node = stack.pop()
        if node == in_node:
            return True
        if node in seen:
            continue
        seen.add(node)
        stack.extend(adjacency.get(node, ()))
    return False


def _init_value(rng, mean: float, stdev: float, lo: float, hi: float) -> float:
    return clamp(rng.gauss(mean, stdev), lo, hi)


def new_initial_genome(config, registry: InnovationRegistry, rng, key: int = 0) -> Genome:
    """Fresh genome with the configured input/hidden/output layout.

    ``initial_connection = full_direct`` wires input->hidden, hidden->output
    and input->output, all enabled. Weights, biases and responses are drawn
    from their configured init Gaussians and clamped to the configured range.
    """
    if config.initial_connection != "full_direct":
        raise GenomeError(
            f"unsupported initial_connection {config.initial_connection!r}")
    genome = Genome(key)
    n_in, n_out, n_hid = config.num_inputs, config.num_outputs, config.num_hidden
    input_ids = list(range(n_in))
    output_ids = list(range(n_in, n_in + n_out))
    hidden_ids = list(range(n_in + n_out, n_in + n_out + n_hid))

    for nid in input_ids:
        genome.add_node(NodeGene(nid, INPUT))
    for nid in output_ids + hidden_ids:
        kind = OUTPUT if nid in output_ids else HIDDEN
        bias = _init_value(rng, config.bias_init_mean, config.bias_init_stdev,
                           config.bias_min_value, config.bias_max_value)
        response = _init_value(rng, config.response_init_mean, config.response_init_stdev,
                               config.response_min_value, config.response_max_value)
        genome.add_node(NodeGene(nid, kind, bias, response,
                                 config.activation_default, config.aggregation_default))

    pairs = ([(i, h) for i in input_ids for h in hidden_ids]
             + [(h, o) for h in hidden_ids for o in output_ids]
             + [(i, o) for i in input_ids for o in output_ids])
    for in_node, out_node in pairs:
        weight = _init_value(rng, config.weight_init_mean, config.weight_init_stdev,
                             config.weight_min_value, config.weight_max_value)
        innovation = registry.connection_innovation(in_node, out_node)
        genome.add_connection(ConnectionGene(innovation, in_node, out_node,
                                             weight, config.enabled_default))
    return genome


# -- parametric mutation ----------------------------------------------------

def mutate_weights(genome: Genome, config, rng) -> None:
    """Replace-or-perturb every connection weight and node bias/response.

    Each value independently: with the replace rate it is redrawn from the
    init distribution, otherwise with the mutate rate it is perturbed by a
    zero-mean Gaussian of the configured power. Results are clamped.
    """
    for innovation in sorted(genome.connections):
        conn = genome.connections[innovation]
        if rng.random() < config.weight_replace_rate:
            conn.weight = _init_value(rng, config.weight_init_mean, config.weight_init_stdev,
                                      config.weight_min_value, config.weight_max_value)
        elif rng.random() < config.weight_mutate_rate:
            conn.weight = clamp(conn.weight + rng.gauss(0.0, config.weight_mutate_power),
                                config.weight_min_value, config.weight_max_value)
    for nid in sorted(genome.nodes):
        node = genome.nodes[nid]
        if node.kind == INPUT:
            continue
        if rng.random() < config.bias_replace_rate:
            node.bias = _init_value(rng, config.bias_init_mean, config.bias_init_stdev,
                                    config.bias_min_value, config.bias_max_value)
        elif rng.random() < config.bias_mutate_rate:
            node.bias = clamp(node.bias + rng.gauss(0.0, config.bias_mutate_power),
                              config.bias_min_value, config.bias_max_value)
        if rng.random() < config.response_replace_rate:
            node.response = _init_value(rng, config.response_init_mean, config.response_init_stdev,
                                        config.response_min_value, config.response_max_value)
        elif rng.random() < config.response_mutate_rate:
            node.response = clamp(node.response + rng.gauss(0.0, config.response_mutate_power),
                                  config.response_min_value, config.response_max_value)


def mutate_enabled(genome: Genome, config, rng) -> None:
    """Flip enabled flags with the configured rate.

    Safe because acyclicity is maintained over all genes, not just enabled
    ones, so re-enabling can never close a cycle.
    """
    for innovation in sorted(genome.connections):
        if rng.random() < config.enabled_mutate_rate:
            conn = genome.connections[innovation]
            conn.enabled = not conn.enabled


# -- structural mutation -----------------------------------------------------

def mutate_add_node(genome: Genome, registry: InnovationRegistry, rng) -> bool:
    """Split a random enabled connection with a new hidden node.

    The old connection is disabled; the incoming replacement gets weight 1.0
    and the outgoing one inherits the old weight. The new node has bias 0 and
    response 1, so under identity activation the network function is
    unchanged. No-op when there is no enabled connection.
    """
    enabled = [genome.connections[i] for i in sorted(genome.connections)
               if genome.connections[i].enabled]
    if not enabled:
        return False
    conn = enabled[rng.randrange(len(enabled))]
    node_id, innov_in, innov_out = registry.split_ids(conn, genome.nodes.keys())
    conn.enabled = False
    genome.add_node(NodeGene(node_id, HIDDEN, bias=0.0, response=1.0,
                             activation="identity", aggregation="sum"))
    genome.add_connection(ConnectionGene(innov_in, conn.in_node, node_id, 1.0, True))
    genome.add_connection(ConnectionGene(innov_out, node_id, conn.out_node,
                                         conn.weight, True))
    return True


def mutate_add_connection(genome: Genome, config, registry: InnovationRegistry,
                          rng, max_attempts: int = 64) -> bool:
    """Connect a random legal (in, out) pair with an init-distribution weight.

    Sources are input or hidden nodes, destinations hidden or output nodes;
    pairs that already exist or that would close a cycle are rejected and
    redrawn. Gives up (no-op) after a bounded number of attempts.
    """
    sources = sorted(n.id for n in genome.nodes.values() if n.kind != OUTPUT)
    dests = sorted(n.id for n in genome.nodes.values() if n.kind != INPUT)
    if not sources or not dests:
        return False
    pairs = genome.connection_pairs()
    for _ in range(max_attempts):
        in_node = sources[rng.randrange(len(sources))]
        out_node = dests[rng.randrange(len(dests))]
        if in_node == out_node or (in_node, out_node) in pairs:
            continue
        if creates_cycle(pairs, in_node, out_node):
            continue
        weight = _init_value(rng, config.weight_init_mean, config.weight_init_stdev,
                             config.weight_min_value, config.weight_max_value)
        innovation = registry.connection_innovation(in_node, out_node)
        genome.add_connection(ConnectionGene(innovation, in_node, out_node, weight, True))
        return True
    return False


def mutate_delete_connection(genome: Genome, rng) -> bool:
    """Remove a random connection gene. No-op on an unconnected genome."""
    if not genome.connections:
        return False
    innovations = sorted(genome.connections)
    victim = innovations[rng.randrange(len(innovations))]
    del genome.connections[victim]
    return True


def mutate_delete_node(genome: Genome, rng) -> bool:
    """Remove a random hidden node and every connection touching it.

    Input and output nodes are never deleted. No-op without hidden nodes.
    """
    hidden = genome.hidden_ids()
    if not hidden:
        return False
    victim = hidden[rng.randrange(len(hidden))]
    del genome.nodes[victim]
    for innovation in [i for i, c in genome.connections.items()
                       if c.in_node == victim or c.out_node == victim]:
        del genome.connections[innovation]
    return True


def mutate(genome: Genome, config, registry: InnovationRegistry, rng) -> None:
    """One generation's worth of mutation.

    Each structural mutation is attempted at most once, gated by its
    configured probability; parameter mutation and enabled-flag flips follow.
    """
    if rng.random() < config.node_add_prob:
        mutate_add_node(genome, registry, rng)
    if rng.random() < config.conn_add_prob:
        mutate_add_connection(genome, config, registry, rng)
    if rng.random() < config.node_delete_prob:
        mutate_delete_node(genome, rng)
    if rng.random() < config.conn_delete_prob:
        mutate_delete_connection(genome, rng)
    mutate_weights(genome, config, rng)
    mutate_enabled(genome, config, rng)


# -- crossover ---------------------------------------------------------------

DISABLED_INHERIT_PROB = 0.75  # gene disabled in either parent stays disabled


def gene_partition(a: Genome, b: Genome) -> tuple[list[int], list[int], list[int]]:
    """Split the two innovation sets into (matching, disjoint, excess).

    Excess genes lie beyond the smaller of the two maximum innovation
    numbers; the remaining unshared genes are disjoint. All lists sorted.
    """
    innovs_a = set(a.connections)
    innovs_b = set(b.connections)
    matching = sorted(innovs_a & innovs_b)
    unshared = (innovs_a | innovs_b) - set(matching)
    if not innovs_a or not innovs_b:
        return matching, [], sorted(unshared)
    cutoff = min(max(innovs_a), max(innovs_b))
    disjoint = sorted(i for i in unshared if i <= cutoff)
    excess = sorted(i for i in unshared if i > cutoff)
    return matching, disjoint, excess


def crossover(parent_a: Genome, parent_b: Genome, rng, key: int = 0) -> Genome:
    """Recombine two parents; parent_a must be the fitter one.

    Matching genes are picked at random from either parent; disjoint and
    excess genes come from the fitter parent only, so the child's structure
    equals parent_a's (which also keeps it acyclic). A gene disabled in
    either parent stays disabled in the child with probability 0.75.
    """
    if parent_a.fitness is None or parent_b.fitness is None:
        raise GenomeError("crossover requires both parents to have fitness")
    child = Genome(key)
    for innovation in sorted(parent_a.connections):
        gene_a = parent_a.connections[innovation]
        gene_b = parent_b.connections.get(innovation)
        if gene_b is None:
            gene = gene_a.copy()
            disabled_somewhere = not gene_a.enabled
        else:
            gene = (gene_a if rng.random() < 0.5 else gene_b).copy()
            disabled_somewhere = not (gene_a.enabled and gene_b.enabled)
        if disabled_somewhere:
            gene.enabled = rng.random() >= DISABLED_INHERIT_PROB
        child.connections[innovation] = gene

    needed = {nid for c in child.connections.values()
              for nid in (c.in_node, c.out_node)}
    needed.update(n.id for n in parent_a.nodes.values()
                  if n.kind in (INPUT, OUTPUT))
    for nid in sorted(needed):
        node_a = parent_a.nodes[nid]
        node_b = parent_b.nodes.get(nid)
        source = node_a if node_b is None or rng.random() < 0.5 else node_b
        child.nodes[nid] = source.copy()
    return child
