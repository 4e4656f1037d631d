"""Seeded Monte Carlo harness over independent composite-graph samples.

Trial ``t`` of an experiment draws from its own generator seeded by
``SeedSequence(master_seed, spawn_key=(t,))``, so results do not depend on
how trials are split across worker processes. Summaries are folded in trial
index order.
"""

from __future__ import annotations

import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .analytic import ParameterError, SchemeParams
from .keygraph import (
    CompositeGraph,
    DegreeSummary,
    InvariantViolation,
    Relation,
    build_key_graph,
    compose,
    degree_summary,
    row_overlaps,
    sample_channel_on,
    sample_k_subsets,
    sample_key_rings,
    write_edge_list,
)
from .stats import DiscreteDistribution, wilson_interval

DEFAULT_TRIALS = 2000


@dataclass(frozen=True)
class ExperimentConfig:
    params: SchemeParams
    trials: int = DEFAULT_TRIALS
    master_seed: int = 0
    degree_targets: tuple[int, ...] = (2, 3)
    min_degree_targets: tuple[int, ...] = (1,)

    def __post_init__(self) -> None:
        object.__setattr__(self, "degree_targets", tuple(int(h) for h in self.degree_targets))
        object.__setattr__(self, "min_degree_targets", tuple(int(k) for k in self.min_degree_targets))
        if self.trials < 1:
            raise ParameterError(f"trials >= 1 violated (trials={self.trials})")
        if not self.degree_targets or min(self.degree_targets) < 0:
            raise ParameterError("degree_targets must be a non-empty list of h >= 0")
        if not self.min_degree_targets or min(self.min_degree_targets) < 0:
            raise ParameterError("min_degree_targets must be a non-empty list of k >= 0")
        if not 0 <= self.master_seed < 2**64:
            raise ParameterError("master_seed must be a 64-bit unsigned integer")


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(trial_index,)))


def sample_composite(
    params: SchemeParams, rng: np.random.Generator, keep_layers: bool = False
) -> CompositeGraph:
    """One draw of the composite graph.

    Channel states are drawn only for pairs already linked by keys; the
    returned channel layer (when kept) is therefore that restriction.
    """
    if params.q > params.K:
        empty = Relation.empty(params.n)
        return CompositeGraph(params.n, empty, empty, empty) if keep_layers else CompositeGraph(params.n, empty)
    key_layer = build_key_graph(sample_key_rings(params, rng), params.q)
    channel = sample_channel_on(key_layer, params.p, rng)
    return compose(key_layer, channel, keep_layers=keep_layers)


def run_trial(
    params: SchemeParams,
    master_seed: int,
    trial_index: int,
    dump_dir: str | Path | None = None,
) -> DegreeSummary:
    graph = sample_composite(params, trial_rng(master_seed, trial_index), keep_layers=dump_dir is not None)
    if dump_dir is not None:
        dump_trial_graph(graph, dump_dir, trial_index)
    summary = degree_summary(graph)
    summary.check()
    return summary


def dump_paths(dump_dir: str | Path, trial_index: int) -> list[Path]:
    base = Path(dump_dir)
    return [base / f"trial_{trial_index:06d}_{layer}.txt" for layer in ("composite", "key")]


def dump_trial_graph(graph: CompositeGraph, dump_dir: str | Path, trial_index: int) -> None:
    composite_path, key_path = dump_paths(dump_dir, trial_index)
    write_edge_list(composite_path, graph.edges, "composite")
    write_edge_list(key_path, graph.key_layer, "key")


@dataclass
class AggregateResult:
    """Across-trial tallies of one experiment.

    ``phi_counts[h][M]`` counts trials with exactly ``M`` nodes of degree
    ``h``; ``min_degree_counts[d]`` counts trials whose minimum degree is ``d``.
    """

    config: ExperimentConfig
    trials: int = 0
    phi_counts: dict[int, Counter] = field(default_factory=dict)
    min_degree_counts: Counter = field(default_factory=Counter)
    edge_sum: int = 0
    edge_sq_sum: int = 0

    def __post_init__(self) -> None:
        for h in self.config.degree_targets:
            self.phi_counts.setdefault(h, Counter())

    def add(self, summary: DegreeSummary) -> None:
        for h, counts in self.phi_counts.items():
            counts[summary.phi(h)] += 1
        self.min_degree_counts[summary.min_degree] += 1
        self.edge_sum += summary.edge_count
        self.edge_sq_sum += summary.edge_count * summary.edge_count
        self.trials += 1

    def phi_distribution(self, h: int) -> DiscreteDistribution:
        return DiscreteDistribution.from_counts(self.phi_counts[h])

    def phi_mean(self, h: int) -> float:
        counts = self.phi_counts[h]
        return sum(m * c for m, c in counts.items()) / self.trials

    def phi_std_error(self, h: int) -> float:
        counts = self.phi_counts[h]
        mean = self.phi_mean(h)
        var = sum(c * (m - mean) ** 2 for m, c in counts.items()) / max(self.trials - 1, 1)
        return math.sqrt(var / self.trials)

    def min_degree_at_least_count(self, k: int) -> int:
        return sum(c for d, c in self.min_degree_counts.items() if d >= k)

    def min_degree_at_least(self, k: int, confidence: float = 0.95) -> tuple[float, float, float]:
        """Empirical P[min degree >= k] with its Wilson interval."""
        hits = self.min_degree_at_least_count(k)
        lo, hi = wilson_interval(hits, self.trials, confidence)
        return hits / self.trials, lo, hi

    @property
    def mean_edges(self) -> float:
        return self.edge_sum / self.trials

    @property
    def edges_std_error(self) -> float:
        if self.trials < 2:
            return 0.0
        var = (self.edge_sq_sum - self.edge_sum**2 / self.trials) / (self.trials - 1)
        return math.sqrt(max(var, 0.0) / self.trials)

    def check(self) -> None:
        for h in self.phi_counts:
            total = math.fsum(self.phi_distribution(h).masses)
            if abs(total - 1.0) > 1e-12:
                raise InvariantViolation(f"phi_{h} distribution sums to {total}")
        if sum(self.min_degree_counts.values()) != self.trials:
            raise InvariantViolation("min-degree tallies do not match trial count")
        top = max(self.min_degree_counts, default=0) + 2
        probs = [self.min_degree_at_least_count(k) for k in range(top)]
        if any(b > a for a, b in zip(probs, probs[1:])):
            raise InvariantViolation("P[min degree >= k] increases in k")


def _run_chunk(
    params: SchemeParams, master_seed: int, indices: range, dump_dir: str | None
) -> list[DegreeSummary]:
    return [run_trial(params, master_seed, t, dump_dir) for t in indices]


def resolve_workers(workers: int | str | None) -> int:
    if workers in (None, "auto"):
        return os.cpu_count() or 1
    workers = int(workers)
    if workers < 1:
        raise ParameterError(f"worker count must be >= 1 (got {workers})")
    return workers


def run_experiment(
    config: ExperimentConfig,
    workers: int | str | None = 1,
    dump_dir: str | Path | None = None,
    executor: ProcessPoolExecutor | None = None,
) -> AggregateResult:
    """Run ``config.trials`` trials and fold them in index order."""
    workers = resolve_workers(workers)
    dump = str(dump_dir) if dump_dir is not None else None
    if dump is not None:
        Path(dump).mkdir(parents=True, exist_ok=True)
    result = AggregateResult(config)
    T = config.trials
    if workers == 1 and executor is None:
        for t in range(T):
            result.add(run_trial(config.params, config.master_seed, t, dump))
    else:
        n_chunks = min(T, 4 * workers)
        bounds = np.linspace(0, T, n_chunks + 1).astype(int)
        chunks = [range(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        own = executor is None
        pool = executor or ProcessPoolExecutor(max_workers=workers)
        try:
            futures = [
                pool.submit(_run_chunk, config.params, config.master_seed, c, dump) for c in chunks
            ]
            for fut in futures:
                for summary in fut.result():
                    result.add(summary)
        finally:
            if own:
                pool.shutdown()
    result.check()
    return result


def sweep(
    configs: Sequence[ExperimentConfig], workers: int | str | None = 1
) -> list[AggregateResult]:
    if not configs:
        raise ParameterError("sweep needs at least one configuration")
    workers = resolve_workers(workers)
    if workers == 1:
        return [run_experiment(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [run_experiment(c, workers, executor=pool) for c in configs]


def edge_frequency(
    params: SchemeParams, pairs: int, rng: np.random.Generator, chunk: int = 10_000
) -> int:
    """Number of linked pairs among ``pairs`` independent node pairs.

    Each pair gets two fresh key rings and one channel draw, so the returned
    count is Binomial(pairs, p_eq).
    """
    hits = 0
    done = 0
    while done < pairs:
        m = min(chunk, pairs - done)
        a = sample_k_subsets(m, params.K, params.P, rng)
        b = sample_k_subsets(m, params.K, params.P, rng)
        shared = row_overlaps(a, b) >= params.q
        on = rng.random(m) < params.p
        hits += int(np.count_nonzero(shared & on))
        done += m
    return hits
