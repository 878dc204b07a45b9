"""Compile genomes into fast feedforward evaluators.

Compilation topologically orders the non-input nodes over the enabled
connections and flattens every node's incoming edge list into contiguous
arrays so a single jitted kernel can evaluate the whole network. Each
non-input node computes

    a_j = activation(bias_j + response_j * sum_i w_ij * a_i)

where the sum runs over the node's enabled incoming connections. Nodes with
no incoming connections still evaluate (their sum is empty, leaving the bias).
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from ._jit import njit
from .genome import CycleError, Genome, INPUT

ACTIVATIONS = {"identity": 0, "sigmoid": 1, "tanh": 2, "relu": 3}


@njit(cache=True)
def _eval_kernel(values, src, wts, offsets, bias, response, act, slots, out_slots, outputs):
    for i in range(slots.size):
        total = 0.0
        for e in range(offsets[i], offsets[i + 1]):
            total += wts[e] * values[src[e]]
        v = bias[i] + response[i] * total
        a = act[i]
        if a == 1:  # numerically stable sigmoid
            if v >= 0.0:
                v = 1.0 / (1.0 + math.exp(-v))
            else:
                ev = math.exp(v)
                v = ev / (1.0 + ev)
        elif a == 2:
            v = math.tanh(v)
        elif a == 3:
            v = v if v > 0.0 else 0.0
        values[slots[i]] = v
    for k in range(out_slots.size):
        outputs[k] = values[out_slots[k]]


class FeedforwardNetwork:
    """Executable evaluation plan compiled from a genome."""

    __slots__ = ("num_inputs", "num_outputs", "_n_slots", "_src", "_wts",
                 "_offsets", "_bias", "_response", "_act", "_slots", "_out_slots")

    def __init__(self, num_inputs, num_outputs, n_slots, src, wts, offsets,
                 bias, response, act, slots, out_slots):
        self.num_inputs = num_inputs
        self.num_outputs = num_outputs
        self._n_slots = n_slots
        self._src = src
        self._wts = wts
        self._offsets = offsets
        self._bias = bias
        self._response = response
        self._act = act
        self._slots = slots
        self._out_slots = out_slots

    @classmethod
    def from_genome(cls, genome: Genome) -> "FeedforwardNetwork":
        input_ids = genome.input_ids()
        output_ids = genome.output_ids()
        slot_of = {nid: i for i, nid in enumerate(input_ids)}
        n_in = len(input_ids)

        enabled = [c for c in genome.connections.values() if c.enabled]
        incoming: dict[int, list] = {nid: [] for nid in genome.nodes
                                     if genome.nodes[nid].kind != INPUT}
        outgoing: dict[int, list[int]] = {}
        indegree = {nid: 0 for nid in incoming}
        for conn in enabled:
            incoming[conn.out_node].append(conn)
            if conn.in_node in indegree:
                indegree[conn.out_node] += 1
                outgoing.setdefault(conn.in_node, []).append(conn.out_node)

        ready = [nid for nid, deg in sorted(indegree.items()) if deg == 0]
        heapq.heapify(ready)
        order: list[int] = []
        while ready:
            nid = heapq.heappop(ready)
            order.append(nid)
            for dst in outgoing.get(nid, ()):
                indegree[dst] -= 1
                if indegree[dst] == 0:
                    heapq.heappush(ready, dst)
        if len(order) != len(incoming):
            raise CycleError("enabled connections contain a cycle")

        for i, nid in enumerate(order):
            slot_of[nid] = n_in + i

        src, wts, offsets = [], [], [0]
        bias, response, act, slots = [], [], [], []
        for nid in order:
            node = genome.nodes[nid]
            if node.aggregation != "sum":
                raise CycleError(f"unsupported aggregation {node.aggregation!r}")
            for conn in sorted(incoming[nid], key=lambda c: slot_of[c.in_node]):
                src.append(slot_of[conn.in_node])
                wts.append(conn.weight)
            offsets.append(len(src))
            bias.append(node.bias)
            response.append(node.response)
            act.append(ACTIVATIONS[node.activation])
            slots.append(slot_of[nid])

        return cls(
            n_in, len(output_ids), n_in + len(order),
            np.asarray(src, dtype=np.int64),
            np.asarray(wts, dtype=np.float64),
            np.asarray(offsets, dtype=np.int64),
            np.asarray(bias, dtype=np.float64),
            np.asarray(response, dtype=np.float64),
            np.asarray(act, dtype=np.int64),
            np.asarray(slots, dtype=np.int64),
            np.asarray([slot_of[nid] for nid in output_ids], dtype=np.int64),
        )

    def activate(self, inputs) -> np.ndarray:
        """Evaluate the network; returns the output activations in id order."""
        arr = np.asarray(inputs, dtype=np.float64)
        if arr.shape != (self.num_inputs,):
            raise ValueError(
                f"expected {self.num_inputs} inputs, got shape {arr.shape}")
        values = np.zeros(self._n_slots, dtype=np.float64)
        values[:self.num_inputs] = arr
        outputs = np.empty(self.num_outputs, dtype=np.float64)
        _eval_kernel(values, self._src, self._wts, self._offsets, self._bias,
                     self._response, self._act, self._slots, self._out_slots,
                     outputs)
        return outputs


def compile_network(genome: Genome) -> FeedforwardNetwork:
    """Build the evaluation plan; raises CycleError on a corrupted genome."""
    return FeedforwardNetwork.from_genome(genome)
