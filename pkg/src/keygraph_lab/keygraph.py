"""Sampling and construction of the composite key/channel graph.

Undirected relations over ``n`` nodes are stored as sorted, unique ``int64``
pair codes ``i * n + j`` with ``i < j``. In the regime of interest the
composite graph has a few thousand edges out of millions of pairs, so the
sparse code array is both smaller and faster to intersect than a bit matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .analytic import ParameterError, SchemeParams


class InvariantViolation(AssertionError):
    """A structural invariant of a sampled graph or summary failed."""


@dataclass(frozen=True)
class KeyRingAssignment:
    """Sorted key rings, one row per node (shape ``(n, K)``)."""

    rings: np.ndarray
    P: int

    @property
    def n(self) -> int:
        return self.rings.shape[0]

    @property
    def K(self) -> int:
        return self.rings.shape[1]

    def validate(self) -> None:
        r = self.rings
        if r.size and (r.min() < 0 or r.max() >= self.P):
            raise InvariantViolation("key identifier outside [0, P)")
        if self.K > 1 and not np.all(np.diff(r, axis=1) > 0):
            raise InvariantViolation("rings must be strictly increasing")


@dataclass(frozen=True)
class Relation:
    """Symmetric, irreflexive relation on ``range(n)`` as sorted pair codes."""

    n: int
    codes: np.ndarray

    @classmethod
    def from_pairs(cls, n: int, i: np.ndarray, j: np.ndarray) -> "Relation":
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        if np.any(i == j):
            raise InvariantViolation("self-loop in relation")
        lo = np.minimum(i, j)
        hi = np.maximum(i, j)
        return cls(n, np.unique(lo * n + hi))

    @classmethod
    def empty(cls, n: int) -> "Relation":
        return cls(n, np.empty(0, dtype=np.int64))

    @classmethod
    def complete(cls, n: int) -> "Relation":
        i, j = np.triu_indices(n, k=1)
        return cls(n, i.astype(np.int64) * n + j)

    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        return self.codes // self.n, self.codes % self.n

    def __len__(self) -> int:
        return int(self.codes.size)

    def __contains__(self, pair: tuple[int, int]) -> bool:
        i, j = sorted(pair)
        code = i * self.n + j
        idx = np.searchsorted(self.codes, code)
        return bool(idx < self.codes.size and self.codes[idx] == code)

    def to_dense(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n), dtype=bool)
        i, j = self.pairs()
        adj[i, j] = True
        adj[j, i] = True
        return adj

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Relation):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.codes, other.codes)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class CompositeGraph:
    n: int
    edges: Relation
    key_layer: Relation | None = None
    channel_layer: Relation | None = None

    def validate(self) -> None:
        i, j = self.edges.pairs()
        if np.any(i >= j):
            raise InvariantViolation("edge codes not in canonical i < j form")
        if self.key_layer is not None and self.channel_layer is not None:
            expected = np.intersect1d(
                self.key_layer.codes, self.channel_layer.codes, assume_unique=True
            )
            if not np.array_equal(expected, self.edges.codes):
                raise InvariantViolation("edge set is not key AND channel")


@dataclass(frozen=True)
class DegreeSummary:
    """``histogram[h]`` is the number of nodes of degree ``h``."""

    histogram: np.ndarray
    min_degree: int
    edge_count: int

    @property
    def n(self) -> int:
        return int(self.histogram.sum())

    def phi(self, h: int) -> int:
        return int(self.histogram[h]) if 0 <= h < self.histogram.size else 0

    def check(self) -> None:
        hist = self.histogram
        if np.dot(np.arange(hist.size), hist) != 2 * self.edge_count:
            raise InvariantViolation("handshake identity violated")
        nonzero = np.flatnonzero(hist)
        if nonzero.size == 0 or nonzero[0] != self.min_degree:
            raise InvariantViolation("min_degree disagrees with histogram")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DegreeSummary):
            return NotImplemented
        return (
            self.min_degree == other.min_degree
            and self.edge_count == other.edge_count
            and np.array_equal(self.histogram, other.histogram)
        )

    __hash__ = None  # type: ignore[assignment]


def sample_k_subsets(n: int, K: int, P: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent uniform K-subsets of ``range(P)``, rows sorted.

    A partial Fisher-Yates shuffle run for all rows at once. The virtual
    permutation array is never materialised: only positions displaced by an
    earlier swap are tracked, in ``moved_pos``/``moved_val``.
    """
    if not 1 <= K <= P:
        raise ParameterError(f"1 <= K <= P violated (K={K}, P={P})")
    dtype = np.int32 if P < np.iinfo(np.int32).max else np.int64
    out = np.empty((n, K), dtype=dtype)
    # slot s < t holds a displaced position; unused slots hold -1
    moved_pos = np.full((n, K), -1, dtype=dtype)
    moved_val = np.zeros((n, K), dtype=dtype)
    rows = np.arange(n)
    for t in range(K):
        j = t + rng.integers(0, P - t, size=n, dtype=dtype)
        live = moved_pos[:, : t + 1]
        hit_t = live == t
        slot_t = hit_t.argmax(axis=1)
        at_t = np.where(hit_t[rows, slot_t], moved_val[rows, slot_t], t)
        hit_j = live == j[:, None]
        slot_j = hit_j.argmax(axis=1)
        has_j = hit_j[rows, slot_j]
        out[:, t] = np.where(has_j, moved_val[rows, slot_j], j)
        # position j now holds the old value at t; slot t is still free
        slot = np.where(has_j, slot_j, t)
        moved_pos[rows, slot] = j
        moved_val[rows, slot] = at_t
    out.sort(axis=1)
    return out


def sample_key_rings(params: SchemeParams, rng: np.random.Generator) -> KeyRingAssignment:
    return KeyRingAssignment(sample_k_subsets(params.n, params.K, params.P, rng), params.P)


def overlap_count(ring_a: Iterable[int], ring_b: Iterable[int]) -> int:
    """Size of the intersection of two sorted rings by linear merge."""
    a = list(ring_a)
    b = list(ring_b)
    i = j = count = 0
    while i < len(a) and j < len(b):
        if a[i] == b[j]:
            count += 1
            i += 1
            j += 1
        elif a[i] < b[j]:
            i += 1
        else:
            j += 1
    return count


def row_overlaps(rings_a: np.ndarray, rings_b: np.ndarray) -> np.ndarray:
    """Row-wise overlap sizes of two equally shaped stacks of sorted rings."""
    merged = np.sort(np.concatenate([rings_a, rings_b], axis=1), axis=1)
    return np.count_nonzero(merged[:, 1:] == merged[:, :-1], axis=1)


def shared_key_counts(assignment: KeyRingAssignment) -> tuple[np.ndarray, np.ndarray]:
    """Pair codes of every pair sharing at least one key, with overlap sizes.

    Inverted index: (key, node) incidences are sorted by key, and within each
    key's run every node pair is emitted once; per-pair tallies are then the
    overlap sizes. Cost is the sum over keys of (nodes holding the key)^2.
    """
    n, K = assignment.rings.shape
    keys = assignment.rings.ravel()
    # numpy's stable sort is a radix sort for 16-bit keys
    if assignment.P <= np.iinfo(np.uint16).max + 1:
        keys = keys.astype(np.uint16)
    code_type = np.uint32 if n * n <= np.iinfo(np.uint32).max else np.int64
    nodes = np.repeat(np.arange(n, dtype=code_type), K)
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    nodes = nodes[order]  # ascending within each key run
    chunks = []
    d = 1
    while d < keys.size:
        same = keys[d:] == keys[:-d]
        if not same.any():
            break
        chunks.append(nodes[:-d][same] * code_type(n) + nodes[d:][same])
        d += 1
    if not chunks:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    codes = np.sort(np.concatenate(chunks))
    starts = np.flatnonzero(np.r_[True, codes[1:] != codes[:-1]])
    counts = np.diff(np.r_[starts, codes.size])
    return codes[starts].astype(np.int64), counts


def build_key_graph(assignment: KeyRingAssignment, q: int) -> Relation:
    """Pairs sharing at least ``q`` keys, via the inverted index."""
    if q < 1:
        raise ParameterError(f"q >= 1 violated (q={q})")
    codes, counts = shared_key_counts(assignment)
    return Relation(assignment.n, codes[counts >= q])


def build_key_graph_naive(assignment: KeyRingAssignment, q: int) -> Relation:
    """O(n^2) pairwise construction, kept as a cross-check."""
    n = assignment.n
    rings = [set(r.tolist()) for r in assignment.rings]
    ii, jj = [], []
    for i in range(n):
        for j in range(i + 1, n):
            if len(rings[i] & rings[j]) >= q:
                ii.append(i)
                jj.append(j)
    return Relation.from_pairs(n, np.array(ii, dtype=np.int64), np.array(jj, dtype=np.int64))


def _pair_code_from_index(n: int, idx: np.ndarray) -> np.ndarray:
    """Map positions in the row-major upper-triangle enumeration to pair codes."""
    idx = idx.astype(np.int64)
    b = 2 * n - 1
    i = np.floor((b - np.sqrt(b * b - 8.0 * idx)) / 2).astype(np.int64)

    def row_start(r):
        return r * n - r * (r + 1) // 2

    # the float root can land one row off near row boundaries
    i -= row_start(i) > idx
    i += row_start(i + 1) <= idx
    j = idx - row_start(i) + i + 1
    return i * n + j


def sample_channel_graph(n: int, p: float, rng: np.random.Generator) -> Relation:
    """Erdos-Renyi G(n, p): each pair on independently with probability ``p``.

    Sparse ``p < 0.1`` walks the pair sequence with geometric skips; otherwise
    one Bernoulli draw per pair.
    """
    if not 0.0 < p <= 1.0:
        raise ParameterError(f"0 < p <= 1 violated (p={p})")
    total = n * (n - 1) // 2
    if p == 1.0:
        return Relation.complete(n)
    if p < 0.1:
        picks = []
        pos = -1
        batch = max(16, int(total * p * 1.1) + 16)
        while True:
            gaps = rng.geometric(p, size=batch)
            steps = pos + np.cumsum(gaps)
            keep = steps[steps < total]
            picks.append(keep)
            if keep.size < steps.size:
                break
            pos = int(steps[-1])
        idx = np.concatenate(picks)
    else:
        idx = np.flatnonzero(rng.random(total) < p)
    return Relation(n, _pair_code_from_index(n, idx))


def sample_channel_on(pairs: Relation, p: float, rng: np.random.Generator) -> Relation:
    """Channel states drawn only for the given candidate pairs.

    Each pair's channel is independent of every other, so restricting the draw
    to the key-layer pairs yields the same composite-graph law as sampling the
    full G(n, p) and intersecting.
    """
    if p == 1.0:
        return pairs
    on = rng.random(pairs.codes.size) < p
    return Relation(pairs.n, pairs.codes[on])


def compose(key_layer: Relation, channel_layer: Relation, keep_layers: bool = False) -> CompositeGraph:
    if key_layer.n != channel_layer.n:
        raise ParameterError(
            f"layers disagree on node count ({key_layer.n} vs {channel_layer.n})"
        )
    codes = np.intersect1d(key_layer.codes, channel_layer.codes, assume_unique=True)
    edges = Relation(key_layer.n, codes)
    if keep_layers:
        return CompositeGraph(key_layer.n, edges, key_layer, channel_layer)
    return CompositeGraph(key_layer.n, edges)


def degrees(graph: CompositeGraph | Relation) -> np.ndarray:
    rel = graph.edges if isinstance(graph, CompositeGraph) else graph
    i, j = rel.pairs()
    return np.bincount(i, minlength=rel.n) + np.bincount(j, minlength=rel.n)


def degree_summary(graph: CompositeGraph | Relation) -> DegreeSummary:
    rel = graph.edges if isinstance(graph, CompositeGraph) else graph
    deg = degrees(rel)
    hist = np.bincount(deg)
    return DegreeSummary(histogram=hist, min_degree=int(deg.min()), edge_count=len(rel))


LAYER_NAMES = ("composite", "key", "channel")


def write_edge_list(path: str | Path, relation: Relation, layer: str = "composite") -> None:
    """Write ``n=<n> layer=<name>`` followed by one ``i j`` line per edge."""
    if layer not in LAYER_NAMES:
        raise ValueError(f"unknown layer {layer!r}")
    i, j = relation.pairs()
    with open(path, "w", newline="\n") as fh:
        fh.write(f"n={relation.n} layer={layer}\n")
        for a, b in zip(i.tolist(), j.tolist()):
            fh.write(f"{a} {b}\n")


def read_edge_list(path: str | Path) -> tuple[Relation, str]:
    with open(path) as fh:
        header = fh.readline().split()
        meta = dict(tok.split("=", 1) for tok in header)
        n = int(meta["n"])
        layer = meta["layer"]
        if layer not in LAYER_NAMES:
            raise ValueError(f"unknown layer {layer!r} in {path}")
        body = fh.read().split()
    if not body:
        return Relation.empty(n), layer
    if len(body) % 2:
        raise ValueError(f"odd number of endpoints in {path}")
    data = np.array(body, dtype=np.int64).reshape(-1, 2)
    i, j = data[:, 0], data[:, 1]
    if np.any(i >= j) or np.any(j >= n) or np.any(i < 0):
        raise ValueError(f"malformed edge in {path}: expected 0 <= i < j < n")
    return Relation.from_pairs(n, i, j), layer
