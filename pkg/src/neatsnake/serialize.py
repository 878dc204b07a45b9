"""Genome and run-state serialization.

Champion genomes use a versioned, self-describing binary container: a JSON
header (format name, version, layout, counts) followed by zlib-compressed
little-endian columns (node ids/kinds/biases/responses, then connection
innovations/endpoints/weights/enabled flags). Weights stay float64 so a
reloaded genome is bit-identical. Column layout plus compression keeps a
dense 5000-connection controller well under the size budget a raw record
encoding would blow.

Checkpoints capture a whole evolution run (population, species, innovation
registry, rng state, history) via pickle so resuming is bit-exact.
"""

from __future__ import annotations

import json
import pickle
import random
import struct
import zlib

import numpy as np

from .genome import ConnectionGene, Genome, NodeGene

GENOME_MAGIC = b"NSNK"
GENOME_VERSION = 1
_KIND_CODES = {"input": 0, "hidden": 1, "output": 2}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}

CHECKPOINT_VERSION = 1


class SerializationError(Exception):
    """Unreadable or incompatible serialized data."""


def parameter_count(genome: Genome) -> int:
    """Evolvable scalars: one weight per connection, bias and response per
    non-input node."""
    non_input = sum(1 for n in genome.nodes.values() if n.kind != "input")
    return len(genome.connections) + 2 * non_input


def genome_to_bytes(genome: Genome) -> bytes:
    node_ids = sorted(genome.nodes)
    nodes = [genome.nodes[nid] for nid in node_ids]
    innovations = sorted(genome.connections)
    conns = [genome.connections[i] for i in innovations]

    activations = sorted({n.activation for n in nodes})
    act_code = {name: i for i, name in enumerate(activations)}

    columns = [
        np.asarray(node_ids, dtype="<u4").tobytes(),
        np.asarray([_KIND_CODES[n.kind] for n in nodes], dtype="<u1").tobytes(),
        np.asarray([act_code[n.activation] for n in nodes], dtype="<u1").tobytes(),
        np.asarray([n.bias for n in nodes], dtype="<f8").tobytes(),
        np.asarray([n.response for n in nodes], dtype="<f8").tobytes(),
        np.asarray(innovations, dtype="<u4").tobytes(),
        np.asarray([c.in_node for c in conns], dtype="<u4").tobytes(),
        np.asarray([c.out_node for c in conns], dtype="<u4").tobytes(),
        np.asarray([c.weight for c in conns], dtype="<f8").tobytes(),
        np.asarray([1 if c.enabled else 0 for c in conns], dtype="<u1").tobytes(),
    ]
    header = {
        "format": "neatsnake-genome",
        "version": GENOME_VERSION,
        "key": genome.key,
        "fitness": genome.fitness,
        "nodes": len(nodes),
        "connections": len(conns),
        "activations": activations,
        "columns": ["node_id:u4", "node_kind:u1", "node_activation:u1",
                    "bias:f8", "response:f8", "innovation:u4", "in_node:u4",
                    "out_node:u4", "weight:f8", "enabled:u1"],
    }
    header_bytes = json.dumps(header, separators=(",", ":")).encode("utf-8")
    payload = zlib.compress(b"".join(columns), level=6)
    return GENOME_MAGIC + struct.pack("<HI", GENOME_VERSION, len(header_bytes)) \
        + header_bytes + payload


def genome_from_bytes(blob: bytes) -> Genome:
    if blob[:4] != GENOME_MAGIC:
        raise SerializationError("not a neatsnake genome file")
    version, header_len = struct.unpack_from("<HI", blob, 4)
    if version != GENOME_VERSION:
        raise SerializationError(f"unsupported genome format version {version}")
    offset = 4 + struct.calcsize("<HI")
    header = json.loads(blob[offset:offset + header_len].decode("utf-8"))
    raw = zlib.decompress(blob[offset + header_len:])

    n_nodes = header["nodes"]
    n_conns = header["connections"]
    activations = header["activations"]
    pos = 0

    def take(dtype, count):
        nonlocal pos
        arr = np.frombuffer(raw, dtype=dtype, count=count, offset=pos)
        pos += arr.nbytes
        return arr

    node_id = take("<u4", n_nodes)
    node_kind = take("<u1", n_nodes)
    node_act = take("<u1", n_nodes)
    bias = take("<f8", n_nodes)
    response = take("<f8", n_nodes)
    innovation = take("<u4", n_conns)
    in_node = take("<u4", n_conns)
    out_node = take("<u4", n_conns)
    weight = take("<f8", n_conns)
    enabled = take("<u1", n_conns)

    genome = Genome(header.get("key", 0))
    genome.fitness = header.get("fitness")
    for i in range(n_nodes):
        genome.nodes[int(node_id[i])] = NodeGene(
            int(node_id[i]), _KIND_NAMES[int(node_kind[i])],
            float(bias[i]), float(response[i]),
            activations[int(node_act[i])], "sum")
    for i in range(n_conns):
        genome.connections[int(innovation[i])] = ConnectionGene(
            int(innovation[i]), int(in_node[i]), int(out_node[i]),
            float(weight[i]), bool(enabled[i]))
    return genome


def save_genome(genome: Genome, path) -> int:
    """Write the genome container; returns its byte size."""
    blob = genome_to_bytes(genome)
    with open(path, "wb") as fh:
        fh.write(blob)
    return len(blob)


def load_genome(path) -> Genome:
    with open(path, "rb") as fh:
        return genome_from_bytes(fh.read())


# -- run checkpoints -----------------------------------------------------------

def save_checkpoint(path, evolution) -> None:
    state = {
        "format": "neatsnake-checkpoint",
        "version": CHECKPOINT_VERSION,
        "config": evolution.config,
        "seed": evolution.seed,
        "generation": evolution.generation,
        "population": evolution.population,
        "species_set": evolution.species_set,
        "registry": evolution.registry,
        "rng_state": evolution.rng.getstate(),
        "next_genome_id": evolution._next_genome_id,
        "best": evolution.best,
        "history": evolution.history,
    }
    with open(path, "wb") as fh:
        pickle.dump(state, fh, protocol=pickle.HIGHEST_PROTOCOL)


def load_checkpoint(path):
    """Rebuild an Evolution ready to continue from the saved generation."""
    from .evolution import Evolution

    with open(path, "rb") as fh:
        state = pickle.load(fh)
    if state.get("format") != "neatsnake-checkpoint":
        raise SerializationError(f"{path} is not a neatsnake checkpoint")
    if state.get("version") != CHECKPOINT_VERSION:
        raise SerializationError(
            f"unsupported checkpoint version {state.get('version')}")
    evo = Evolution.__new__(Evolution)
    evo.config = state["config"]
    evo.seed = state.get("seed")
    evo.rng = random.Random()
    evo.rng.setstate(state["rng_state"])
    evo.registry = state["registry"]
    evo.population = state["population"]
    evo.species_set = state["species_set"]
    evo.generation = state["generation"]
    evo.best = state["best"]
    evo.history = state["history"]
    evo._next_genome_id = state["next_genome_id"]
    return evo
