"""Closed-form quantities for the q-composite scheme over on/off channels.

Everything here is a pure function of its arguments. Binomial coefficients
are evaluated in log space so pool sizes in the tens of thousands (or far
beyond) never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class ParameterError(ValueError):
    """Raised when a configuration violates a domain invariant."""


@dataclass(frozen=True)
class SchemeParams:
    """One network configuration: ``n`` nodes, ``K`` keys per ring drawn from
    a pool of ``P``, link threshold ``q`` and channel-on probability ``p``."""

    n: int
    K: int
    P: int
    q: int
    p: float

    def __post_init__(self) -> None:
        for name in ("n", "K", "P", "q"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ParameterError(f"{name} must be an integer, got {value!r}")
        if self.n < 2:
            raise ParameterError(f"n >= 2 violated (n={self.n})")
        if not 1 <= self.K <= self.P:
            raise ParameterError(f"1 <= K <= P violated (K={self.K}, P={self.P})")
        if self.q < 1:
            raise ParameterError(f"q >= 1 violated (q={self.q})")
        if not 0.0 < self.p <= 1.0:
            raise ParameterError(f"0 < p <= 1 violated (p={self.p})")

    def with_(self, **changes) -> "SchemeParams":
        fields = {"n": self.n, "K": self.K, "P": self.P, "q": self.q, "p": self.p}
        fields.update(changes)
        return SchemeParams(**fields)


@dataclass(frozen=True)
class EdgeProbabilities:
    p_sq: float
    p_eq: float


@dataclass(frozen=True)
class ScalingDecomposition:
    """``n * p_eq = ln n + (k - 1) ln ln n + beta``.

    ``outside_window`` flags ``|beta| >= ln ln n``, i.e. the residual is
    too large for the limiting min-degree law to be formally applicable.
    """

    n: int
    k: int
    beta: float
    outside_window: bool

    def p_eq(self) -> float:
        return reconstruct_p_eq(self.n, self.k, self.beta)


@dataclass(frozen=True)
class PoissonModel:
    h: int
    lam: float


def _check_ring_sizes(K: int, P: int) -> None:
    if K < 1 or P < 1 or K > P:
        raise ParameterError(f"1 <= K <= P violated (K={K}, P={P})")


# Above this many factors the falling-factorial sum is replaced by lgamma.
_FALLING_SUM_LIMIT = 5000


def log_comb(a: int, b: int) -> float:
    """ln C(a, b) for 0 <= b <= a.

    ``lgamma(a + 1) - lgamma(a - b + 1)`` cancels catastrophically when ``a`` is
    huge and ``b`` is not (ring sizes against a pool of 10^7 keys), so the
    numerator is summed as ``ln a + ln(a - 1) + ...`` over ``min(b, a - b)``
    factors instead.
    """
    if b < 0 or b > a:
        return -math.inf
    m = min(b, a - b)
    if m > _FALLING_SUM_LIMIT:
        return math.lgamma(a + 1) - math.lgamma(m + 1) - math.lgamma(a - m + 1)
    return math.fsum(map(math.log, range(a - m + 1, a + 1))) - math.lgamma(m + 1)


def overlap_support(K: int, P: int) -> range:
    """Overlap sizes with non-zero probability for two K-rings from a P-pool."""
    _check_ring_sizes(K, P)
    return range(max(0, 2 * K - P), K + 1)


def log_overlap_pmf(K: int, P: int, u: int) -> float:
    _check_ring_sizes(K, P)
    if u < max(0, 2 * K - P) or u > K:
        return -math.inf
    return log_comb(K, u) + log_comb(P - K, K - u) - log_comb(P, K)


def overlap_pmf(K: int, P: int, u: int) -> float:
    """P[|S_i ∩ S_j| = u] for two independent uniform K-subsets of a P-pool."""
    lp = log_overlap_pmf(K, P, u)
    return 0.0 if lp == -math.inf else math.exp(lp)


def p_sq_exact(K: int, P: int, q: int) -> float:
    """Probability that two rings share at least ``q`` keys.

    Terms are summed in increasing overlap order with ``math.fsum``, which is
    exactly rounded and so subsumes Kahan compensation.
    """
    _check_ring_sizes(K, P)
    if q > K:
        return 0.0
    lo = max(q, 0, 2 * K - P)
    total = math.fsum(overlap_pmf(K, P, u) for u in range(lo, K + 1))
    return min(1.0, max(0.0, total))


def p_sq_asymptotic(K: int, P: int, q: int) -> float:
    """``(K^2 / P)^q / q!``; only a sensible stand-in for the exact value when
    ``K`` is large and ``K^2 / P`` is small. Not clamped to [0, 1]."""
    if K < 1 or P < 1 or q < 1:
        raise ParameterError(f"K, P, q must be >= 1 (K={K}, P={P}, q={q})")
    return math.exp(q * (2 * math.log(K) - math.log(P)) - math.lgamma(q + 1))


def lemma_ratio(K: int, P: int, q: int) -> float:
    """Exact-over-asymptotic ratio for the shared-key probability."""
    return p_sq_exact(K, P, q) / p_sq_asymptotic(K, P, q)


def p_eq(params: SchemeParams) -> EdgeProbabilities:
    p_sq = p_sq_exact(params.K, params.P, params.q)
    return EdgeProbabilities(p_sq=p_sq, p_eq=params.p * p_sq)


def lambda_nh(n: int, p_eq: float, h: int) -> PoissonModel:
    """Mean number of degree-``h`` nodes, ``n (n p_eq)^h e^{-n p_eq} / h!``."""
    if n < 2:
        raise ParameterError(f"n >= 2 violated (n={n})")
    if not 0.0 <= p_eq <= 1.0:
        raise ParameterError(f"p_eq must lie in [0, 1], got {p_eq}")
    if h < 0:
        raise ParameterError(f"h >= 0 violated (h={h})")
    mean_degree = n * p_eq
    if mean_degree == 0.0:
        return PoissonModel(h, float(n) if h == 0 else 0.0)
    log_lam = math.log(n) + h * math.log(mean_degree) - mean_degree - math.lgamma(h + 1)
    return PoissonModel(h, math.exp(log_lam))


def poisson_pmf(lam: float, i: int) -> float:
    if lam < 0 or i < 0:
        raise ParameterError(f"need lam >= 0 and i >= 0 (lam={lam}, i={i})")
    if lam == 0.0:
        return 1.0 if i == 0 else 0.0
    return math.exp(i * math.log(lam) - lam - math.lgamma(i + 1))


def beta_of(n: int, k: int, p_eq: float) -> ScalingDecomposition:
    """Residual ``beta`` with ``n p_eq = ln n + (k-1) ln ln n + beta``."""
    if n < 3:
        raise ParameterError(f"n >= 3 required for ln ln n > 0 (n={n})")
    if k < 1:
        raise ParameterError(f"k >= 1 violated (k={k})")
    lnn = math.log(n)
    lnlnn = math.log(lnn)
    beta = n * p_eq - lnn - (k - 1) * lnlnn
    return ScalingDecomposition(n=n, k=k, beta=beta, outside_window=abs(beta) / lnlnn >= 1.0)


def reconstruct_p_eq(n: int, k: int, beta: float) -> float:
    lnn = math.log(n)
    return (lnn + (k - 1) * math.log(lnn) + beta) / n


def min_degree_limit_prob(k: int, beta: float) -> float:
    """Limiting P[min degree >= k] given the scaling residual ``beta``.

    ``beta = +inf`` and ``-inf`` are accepted and give 1 and 0.
    """
    if k < 1:
        raise ParameterError(f"k >= 1 violated (k={k})")
    if beta == math.inf:
        return 1.0
    if beta == -math.inf:
        return 0.0
    # e^{-beta}/(k-1)! in log-space; overflow of the exponent means probability 0
    log_rate = -beta - math.lgamma(k)
    if log_rate > 700.0:
        return 0.0
    return math.exp(-math.exp(log_rate))


def min_degree_split_prob(ell: int, alpha_star: float) -> tuple[float, float]:
    """Limiting (P[min degree = ell], P[min degree = ell - 1]).

    For ``ell <= 0`` the minimum degree is 0 with probability tending to 1;
    ``(1.0, 0.0)`` is returned with the first slot meaning "min degree = 0".
    The exponent uses ``(ell - 1)!``.
    """
    if ell <= 0:
        return 1.0, 0.0
    top = min_degree_limit_prob(ell, alpha_star)
    return top, 1.0 - top
