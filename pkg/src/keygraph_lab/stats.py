"""Discrete-distribution comparison and binomial confidence intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Mapping

import numpy as np

from .analytic import poisson_pmf

NORMALIZATION_TOL = 1e-12
POISSON_TAIL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Probability masses on ``0, 1, ..., len(masses) - 1``."""

    masses: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.masses, dtype=float)
        if m.ndim != 1 or m.size == 0:
            raise ValueError("masses must be a non-empty 1-d array")
        if np.any(m < 0):
            raise ValueError("masses must be non-negative")
        if abs(math.fsum(m) - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"masses sum to {math.fsum(m)!r}, not 1")
        object.__setattr__(self, "masses", m)

    @classmethod
    def from_counts(cls, counts: Mapping[int, int] | np.ndarray) -> "DiscreteDistribution":
        if isinstance(counts, Mapping):
            if not counts:
                raise ValueError("no observations")
            arr = np.zeros(max(counts) + 1)
            for value, c in counts.items():
                arr[value] += c
        else:
            arr = np.asarray(counts, dtype=float)
        return cls(arr / arr.sum())

    @property
    def support_max(self) -> int:
        return self.masses.size - 1

    def mean(self) -> float:
        return float(np.dot(np.arange(self.masses.size), self.masses))

    def padded(self, size: int) -> np.ndarray:
        out = np.zeros(max(size, self.masses.size))
        out[: self.masses.size] = self.masses
        return out


def total_variation(a: DiscreteDistribution, b: DiscreteDistribution) -> float:
    size = max(a.masses.size, b.masses.size)
    tv = 0.5 * math.fsum(np.abs(a.padded(size) - b.padded(size)))
    return min(1.0, tv)


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError(f"need 0 <= successes <= trials, trials >= 1 ({successes}/{trials})")
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    phat = successes / trials
    z2 = z * z
    denom = 1 + z2 / trials
    centre = (phat + z2 / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z2 / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


def poisson_distribution(lam: float, support_max: int = 0) -> DiscreteDistribution:
    """Poisson(lam) truncated to ``0..m`` and renormalised, where ``m`` is at
    least ``support_max`` and grows until the dropped tail is below 1e-9."""
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    m = max(int(support_max), 0)
    while True:
        masses = np.array([poisson_pmf(lam, i) for i in range(m + 1)])
        if 1.0 - math.fsum(masses) < POISSON_TAIL_TOL:
            break
        m = max(2 * m, int(lam + 10 * math.sqrt(lam) + 10))
    return DiscreteDistribution(masses / math.fsum(masses))
