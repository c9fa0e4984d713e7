"""Markov Brains: logic-gate networks decoded from a byte genome.

A genome is a 1-D ``uint8`` array. Gates are located by start codons and the
sites that follow describe their wiring and logic table::

    42 213 | n m | in_1 .. in_n | out_1 .. out_m | 2**n * m bits         (deterministic)
    43 212 | n m | in_1 .. in_n | out_1 .. out_m | 2**n * 2**m weights   (probabilistic)

with ``n = 1 + site % 4``, ``m = 1 + site % 4`` and node indices ``site % 19``.
Scanning resumes one site after each codon, so gate records may overlap.

Node layout: 0-6 sensors, 7-9 actuators, 10-18 hidden.

Row/column conventions: input ``k`` contributes bit ``k`` of the table row
index; output ``j`` takes bit ``j`` of a probabilistic gate's sampled column.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

N_SENSORS = 7
N_ACTUATORS = 3
N_HIDDEN = 9
N_NODES = N_SENSORS + N_ACTUATORS + N_HIDDEN
FIRST_ACTUATOR = N_SENSORS
FIRST_HIDDEN = N_SENSORS + N_ACTUATORS

DETERMINISTIC = 0
PROBABILISTIC = 1
DET_CODON = (42, 213)
PROB_CODON = (43, 212)
MAX_ARITY = 4


@dataclass(frozen=True)
class MutationConfig:
    point_rate: float = 0.005
    duplication_rate: float = 0.05
    deletion_rate: float = 0.02
    min_len: int = 1_000
    max_len: int = 20_000
    segment_min: int = 128
    segment_max: int = 512

    def __post_init__(self):
        for name in ("point_rate", "duplication_rate", "deletion_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {rate}")
        if not 0 < self.min_len <= self.max_len:
            raise ValueError("need 0 < min_len <= max_len")
        if not 0 < self.segment_min <= self.segment_max:
            raise ValueError("need 0 < segment_min <= segment_max")


@dataclass(frozen=True)
class Gate:
    kind: int
    inputs: tuple[int, ...]
    outputs: tuple[int, ...]
    table: np.ndarray  # (2**n, m) bits or (2**n, 2**m) row-stochastic

    @property
    def is_probabilistic(self) -> bool:
        return self.kind == PROBABILISTIC


class Brain:
    """Decoded gate network plus its 19-node state vector.

    Gate data is kept in flat arrays so the numba kernels can run it; use
    :attr:`gates` for a per-gate view.
    """

    def __init__(self, kinds, n_in, n_out, inputs, outputs, offsets, det_table, prob_table):
        self.kinds = kinds
        self.n_in = n_in
        self.n_out = n_out
        self.inputs = inputs
        self.outputs = outputs
        self.offsets = offsets
        self.det_table = det_table
        self.prob_table = prob_table
        self.nodes = np.zeros(N_NODES, dtype=np.uint8)

    @property
    def n_gates(self) -> int:
        return len(self.kinds)

    @property
    def gates(self) -> list[Gate]:
        out = []
        for g in range(self.n_gates):
            n, m = int(self.n_in[g]), int(self.n_out[g])
            off = int(self.offsets[g])
            if self.kinds[g] == DETERMINISTIC:
                table = self.det_table[off:off + (1 << n) * m].reshape(1 << n, m).copy()
            else:
                table = self.prob_table[off:off + (1 << n) * (1 << m)].reshape(1 << n, 1 << m).copy()
            out.append(Gate(int(self.kinds[g]),
                            tuple(int(i) for i in self.inputs[g, :n]),
                            tuple(int(o) for o in self.outputs[g, :m]),
                            table))
        return out

    def reset(self) -> None:
        self.nodes[:] = 0

    def same_structure(self, other: "Brain") -> bool:
        return all(np.array_equal(getattr(self, f), getattr(other, f))
                   for f in ("kinds", "n_in", "n_out", "inputs", "outputs",
                             "offsets", "det_table", "prob_table"))

    def dump(self) -> str:
        """Human-readable listing of every gate."""
        lines = [f"Brain: {self.n_gates} gates"]
        for idx, gate in enumerate(self.gates):
            kind = "prob" if gate.is_probabilistic else "det"
            lines.append(f"  [{idx}] {kind} in={list(gate.inputs)} out={list(gate.outputs)}")
            for row, values in enumerate(gate.table):
                if gate.is_probabilistic:
                    cells = " ".join(f"{v:.3f}" for v in values)
                else:
                    cells = "".join(str(int(v)) for v in values)
                lines.append(f"      {row:0{len(gate.inputs)}b}: {cells}")
        return "\n".join(lines)

    def __repr__(self):
        return f"Brain(n_gates={self.n_gates})"


@numba.njit(cache=True)
def _scan(genome):
    """Return (codon positions, kinds, det table size, prob table size) of complete gates."""
    size = genome.shape[0]
    starts = np.empty(size, dtype=np.int64)
    kinds = np.empty(size, dtype=np.int64)
    count = 0
    det_size = 0
    prob_size = 0
    for i in range(size - 1):
        a = genome[i]
        b = genome[i + 1]
        if a == 42 and b == 213:
            kind = 0
        elif a == 43 and b == 212:
            kind = 1
        else:
            continue
        p = i + 2
        if p + 1 >= size:
            continue
        n = 1 + genome[p] % 4
        m = 1 + genome[p + 1] % 4
        payload = (1 << n) * m if kind == 0 else (1 << n) * (1 << m)
        if p + 2 + n + m + payload > size:
            continue
        starts[count] = i
        kinds[count] = kind
        count += 1
        if kind == 0:
            det_size += payload
        else:
            prob_size += payload
    return starts[:count], kinds[:count], det_size, prob_size


@numba.njit(cache=True)
def _decode_arrays(genome):
    starts, kinds, det_size, prob_size = _scan(genome)
    n_gates = starts.shape[0]
    n_in = np.empty(n_gates, dtype=np.int64)
    n_out = np.empty(n_gates, dtype=np.int64)
    ins = np.full((n_gates, 4), -1, dtype=np.int64)
    outs = np.full((n_gates, 4), -1, dtype=np.int64)
    offsets = np.empty(n_gates, dtype=np.int64)
    det = np.empty(det_size, dtype=np.uint8)
    prob = np.empty(prob_size, dtype=np.float64)
    det_pos = 0
    prob_pos = 0
    for g in range(n_gates):
        p = starts[g] + 2
        n = 1 + genome[p] % 4
        m = 1 + genome[p + 1] % 4
        n_in[g] = n
        n_out[g] = m
        p += 2
        for k in range(n):
            ins[g, k] = genome[p + k] % 19
        p += n
        for k in range(m):
            outs[g, k] = genome[p + k] % 19
        p += m
        if kinds[g] == 0:
            offsets[g] = det_pos
            for k in range((1 << n) * m):
                det[det_pos + k] = genome[p + k] % 2
            det_pos += (1 << n) * m
        else:
            offsets[g] = prob_pos
            cols = 1 << m
            for r in range(1 << n):
                total = 0.0
                for c in range(cols):
                    total += genome[p + r * cols + c]
                for c in range(cols):
                    if total == 0.0:
                        prob[prob_pos + r * cols + c] = 1.0 / cols
                    else:
                        prob[prob_pos + r * cols + c] = genome[p + r * cols + c] / total
            prob_pos += (1 << n) * cols
    return kinds, n_in, n_out, ins, outs, offsets, det, prob


def decode(genome) -> Brain:
    """Build the gate network a genome encodes. Pure; consumes no randomness."""
    genome = as_genome(genome)
    return Brain(*_decode_arrays(genome))


@numba.njit(cache=True, inline="always")
def update_nodes(nodes, post, kinds, n_in, n_out, ins, outs, offsets, det, prob, uniforms, g0, g1):
    """Advance ``nodes`` one tick using gates ``g0..g1-1``.

    Every gate reads the pre-tick vector; writes OR into the zeroed scratch
    buffer ``post``, which then replaces the actuator and hidden nodes.
    ``uniforms[g - g0]`` drives the sampling of probabilistic gate ``g``.
    """
    for idx in range(19):
        post[idx] = 0
    for g in range(g0, g1):
        n = n_in[g]
        m = n_out[g]
        row = 0
        for k in range(n):
            if nodes[ins[g, k]]:
                row |= 1 << k
        if kinds[g] == 0:
            base = offsets[g] + row * m
            for j in range(m):
                if det[base + j]:
                    post[outs[g, j]] = 1
        else:
            cols = 1 << m
            base = offsets[g] + row * cols
            u = uniforms[g - g0]
            col = cols - 1
            acc = 0.0
            for c in range(cols):
                acc += prob[base + c]
                if u < acc:
                    col = c
                    break
            for j in range(m):
                if (col >> j) & 1:
                    post[outs[g, j]] = 1
    for idx in range(7, 19):
        nodes[idx] = post[idx]


def brain_step(brain: Brain, sensors, rng: np.random.Generator) -> tuple[bool, bool, bool]:
    """Feed one percept and return actuators as (move bit 1, move bit 0, beep)."""
    sensors = np.asarray(sensors, dtype=np.uint8)
    if sensors.shape != (N_SENSORS,):
        raise ValueError(f"expected {N_SENSORS} sensor bits, got shape {sensors.shape}")
    brain.nodes[:N_SENSORS] = sensors != 0
    uniforms = np.zeros(brain.n_gates)
    prob_gates = np.flatnonzero(brain.kinds == PROBABILISTIC)
    if prob_gates.size:
        uniforms[prob_gates] = rng.random(prob_gates.size)
    update_nodes(brain.nodes, np.zeros(N_NODES, dtype=np.uint8), brain.kinds, brain.n_in, brain.n_out, brain.inputs,
                 brain.outputs, brain.offsets, brain.det_table, brain.prob_table,
                 uniforms, 0, brain.n_gates)
    a = brain.nodes[FIRST_ACTUATOR:FIRST_HIDDEN]
    return bool(a[0]), bool(a[1]), bool(a[2])


def as_genome(sites) -> np.ndarray:
    arr = np.asarray(sites)
    if arr.ndim != 1:
        raise ValueError("genome must be one-dimensional")
    if arr.dtype != np.uint8:
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise ValueError("genome sites must lie in 0..255")
        arr = arr.astype(np.uint8)
    return np.ascontiguousarray(arr)


def random_genome(rng: np.random.Generator, length: int = 5_000, n_codons: int = 8) -> np.ndarray:
    """Uniform random sites with ``n_codons`` deterministic start codons planted."""
    genome = rng.integers(0, 256, size=length, dtype=np.uint8)
    for pos in rng.integers(0, length - 1, size=n_codons):
        genome[pos:pos + 2] = DET_CODON
    return genome


def mutate(genome, cfg: MutationConfig, rng: np.random.Generator) -> np.ndarray:
    """Point mutations, then one possible duplication, then one possible deletion."""
    child = as_genome(genome).copy()
    if cfg.point_rate > 0:
        # binomial count + distinct uniform positions == independent per-site trials
        hits = rng.choice(child.size, rng.binomial(child.size, cfg.point_rate), replace=False)
        if hits.size:
            # shift by 1..255 modulo 256: uniform over the other 255 values
            shift = rng.integers(1, 256, size=hits.size)
            child[hits] = (child[hits].astype(np.int64) + shift) % 256
    if cfg.duplication_rate > 0 and rng.random() < cfg.duplication_rate:
        seg = min(int(rng.integers(cfg.segment_min, cfg.segment_max + 1)), child.size,
                  cfg.max_len - child.size)
        if seg > 0:
            start = int(rng.integers(0, child.size - seg + 1))
            at = int(rng.integers(0, child.size + 1))
            child = np.concatenate([child[:at], child[start:start + seg], child[at:]])
    if cfg.deletion_rate > 0 and rng.random() < cfg.deletion_rate:
        seg = min(int(rng.integers(cfg.segment_min, cfg.segment_max + 1)),
                  child.size - cfg.min_len)
        if seg > 0:
            start = int(rng.integers(0, child.size - seg + 1))
            child = np.concatenate([child[:start], child[start + seg:]])
    return child


def genome_to_bytes(genome) -> bytes:
    return as_genome(genome).tobytes()


def genome_from_bytes(data: bytes) -> np.ndarray:
    return np.frombuffer(data, dtype=np.uint8).copy()


@dataclass
class PackedBrains:
    """Several brains' gate arrays concatenated, for batch evaluation."""
    gate_start: np.ndarray  # brain b owns gates gate_start[b]:gate_start[b + 1]
    kinds: np.ndarray
    n_in: np.ndarray
    n_out: np.ndarray
    inputs: np.ndarray
    outputs: np.ndarray
    offsets: np.ndarray
    det_table: np.ndarray
    prob_table: np.ndarray

    @classmethod
    def from_brains(cls, brains) -> "PackedBrains":
        counts = [b.n_gates for b in brains]
        gate_start = np.zeros(len(brains) + 1, dtype=np.int64)
        gate_start[1:] = np.cumsum(counts)
        det_base = np.cumsum([0] + [b.det_table.size for b in brains])
        prob_base = np.cumsum([0] + [b.prob_table.size for b in brains])
        offsets = [np.where(b.kinds == DETERMINISTIC, b.offsets + det_base[i], b.offsets + prob_base[i])
                   for i, b in enumerate(brains)]

        def cat(parts, dtype, shape=(0,)):
            parts = [p for p in parts if p.size]
            return np.concatenate(parts).astype(dtype) if parts else np.zeros(shape, dtype=dtype)

        return cls(
            gate_start=gate_start,
            kinds=cat([b.kinds for b in brains], np.int64),
            n_in=cat([b.n_in for b in brains], np.int64),
            n_out=cat([b.n_out for b in brains], np.int64),
            inputs=cat([b.inputs for b in brains], np.int64, (0, 4)),
            outputs=cat([b.outputs for b in brains], np.int64, (0, 4)),
            offsets=cat(offsets, np.int64),
            det_table=cat([b.det_table for b in brains], np.uint8),
            prob_table=cat([b.prob_table for b in brains], np.float64),
        )

    def arrays(self):
        return (self.gate_start, self.kinds, self.n_in, self.n_out, self.inputs,
                self.outputs, self.offsets, self.det_table, self.prob_table)
