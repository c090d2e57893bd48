"""Analytic formulas: entropy, key rates, typical-set cardinality bounds,
error-correction cost, and failure-probability composition.

All logarithms are base 2. Rates may come out negative; callers decide
whether to abort on that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

__all__ = [
    "ErrorRates",
    "GllpTagProfile",
    "SecurityBudget",
    "binary_entropy",
    "shor_preskill_rate",
    "gllp_rate",
    "gllp_seed_length",
    "cardinality_bound_general",
    "cardinality_bound_tight",
    "log2_weight_interval_count",
    "ec_cost",
    "compose_soundness",
    "reuse_budget",
    "sessions_within_budget",
    "hoeffding_deviation",
]


@dataclass(frozen=True)
class ErrorRates:
    """Bit- and phase-error rates of a block."""

    e_b: float
    e_p: float

    def __post_init__(self):
        for name in ("e_b", "e_p"):
            x = getattr(self, name)
            if not 0.0 <= x <= 1.0:
                raise ValueError(f"{name}={x} outside [0, 1]")


@dataclass(frozen=True)
class GllpTagProfile:
    """Tagged-fraction profile: pairs (q_g, e_p_g), fractions summing to 1."""

    tags: tuple[tuple[float, float], ...]

    def __init__(self, tags: Sequence[tuple[float, float]]):
        object.__setattr__(self, "tags", tuple((float(q), float(ep)) for q, ep in tags))
        total = 0.0
        for q, ep in self.tags:
            if q < 0.0:
                raise ValueError(f"tag fraction {q} is negative")
            if not 0.0 <= ep <= 1.0:
                raise ValueError(f"tag phase-error rate {ep} outside [0, 1]")
            total += q
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"tag fractions sum to {total}, expected 1 within 1e-12")


@dataclass(frozen=True)
class SecurityBudget:
    """Failure-probability budget split across post-processing stages."""

    eps_pe: float
    eps_ec: float
    eps_sec: float

    def __post_init__(self):
        for name in ("eps_pe", "eps_ec", "eps_sec"):
            x = getattr(self, name)
            if not 0.0 <= x <= 1.0:
                raise ValueError(f"{name}={x} outside [0, 1]")


def binary_entropy(x: float) -> float:
    """h(x) = -x log2 x - (1-x) log2 (1-x), with h(0) = h(1) = 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"entropy argument {x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def shor_preskill_rate(rates: ErrorRates) -> float:
    """Asymptotic secret fraction 1 - h(e_b) - h(e_p). May be negative."""
    return 1.0 - binary_entropy(rates.e_b) - binary_entropy(rates.e_p)


def gllp_rate(e_b: float, profile: GllpTagProfile) -> float:
    """Tagged-source rate: -h(e_b) + sum_g q_g [1 - h(e_p_g)]."""
    if not 0.0 <= e_b <= 1.0:
        raise ValueError(f"e_b={e_b} outside [0, 1]")
    gain = sum(q * (1.0 - binary_entropy(ep)) for q, ep in profile.tags)
    return -binary_entropy(e_b) + gain


def gllp_seed_length(n: int, e_b: float, profile: GllpTagProfile, ir_encrypted: bool) -> int:
    """Stream-pad seed bits needed for a tagged block of ``n`` sifted bits.

    With encrypted reconciliation only the phase terms are charged; without
    it the bit-error syndrome leakage must be covered by the pad as well.
    """
    phase = sum(q * binary_entropy(ep) for q, ep in profile.tags)
    frac = phase if ir_encrypted else phase + binary_entropy(e_b)
    return math.ceil(n * frac)


def cardinality_bound_general(n: int, r: float, c: float) -> float:
    """log2 bound on the count of n-bit strings with weight within c of nr.

    Valid for any 0 < r < 1: returns n*h(r) + c*|log2(r/(1-r))|.
    """
    if n < 1:
        raise ValueError(f"n={n} must be >= 1")
    if not 0.0 < r < 1.0:
        raise ValueError(f"r={r} outside (0, 1)")
    if c < 0.0:
        raise ValueError(f"c={c} must be nonnegative")
    if r == 0.5:
        return float(n)
    return n * binary_entropy(r) + c * abs(math.log2(r / (1.0 - r)))


def cardinality_bound_tight(n: int, r: float, c: float) -> float:
    """log2 bound n*h(r + c/n) on the count of strings with weight < nr + c.

    Tighter than the general bound but only valid when r + c/n <= 1/3; out
    of range the condition is reported explicitly.
    """
    if n < 1:
        raise ValueError(f"n={n} must be >= 1")
    if r < 0.0 or c < 0.0:
        raise ValueError(f"r={r} and c={c} must be nonnegative")
    shifted = r + c / n
    if shifted > 1.0 / 3.0 + 1e-12:
        raise ValueError(
            f"tight bound requires r + c/n <= 1/3, got {shifted:.6f} (r={r}, c={c}, n={n})"
        )
    return n * binary_entropy(min(shifted, 1.0))


def log2_weight_interval_count(n: int, lo: int, hi: int) -> float:
    """Exact log2 of the number of n-bit strings with weight in [lo, hi]."""
    if not 0 <= lo <= hi <= n:
        raise ValueError(f"bad weight interval [{lo}, {hi}] for n={n}")
    total = sum(math.comb(n, k) for k in range(lo, hi + 1))
    return _log2_int(total)


def _log2_int(x: int) -> float:
    if x <= 0:
        raise ValueError("log2 of nonpositive count")
    shift = max(0, x.bit_length() - 53)
    return math.log2(x >> shift) + shift


def ec_cost(log_cardinality: float, eps_ec: float) -> int:
    """Syndrome bits needed: ceil(log2 |set| - log2 eps_ec)."""
    if not 0.0 < eps_ec <= 1.0:
        raise ValueError(f"eps_ec={eps_ec} outside (0, 1]")
    if log_cardinality < 0.0:
        raise ValueError(f"log cardinality {log_cardinality} is negative")
    return math.ceil(log_cardinality - math.log2(eps_ec))


def compose_soundness(eps_f: float) -> float:
    """Trace-distance soundness sqrt(eps_f * (2 - eps_f)) from fidelity failure eps_f."""
    if not 0.0 <= eps_f <= 1.0:
        raise ValueError(f"eps_f={eps_f} outside [0, 1]")
    return math.sqrt(eps_f * (2.0 - eps_f))


def reuse_budget(eps_per_session: float, sessions: int) -> float:
    """Union-bound failure across ``sessions`` uses of one hashing matrix."""
    if sessions < 1:
        raise ValueError(f"sessions={sessions} must be >= 1")
    if not 0.0 <= eps_per_session <= 1.0:
        raise ValueError(f"eps={eps_per_session} outside [0, 1]")
    return min(1.0, sessions * eps_per_session)


def sessions_within_budget(eps_per_session: float, total_budget: float) -> int:
    """Largest m with m * eps <= budget, using the same float semantics as the ledger."""
    if eps_per_session <= 0.0:
        raise ValueError("eps_per_session must be positive")
    if total_budget < 0.0:
        raise ValueError("total budget must be nonnegative")
    m = int(total_budget / eps_per_session)
    while (m + 1) * eps_per_session <= total_budget:
        m += 1
    while m > 0 and m * eps_per_session > total_budget:
        m -= 1
    return m


def hoeffding_deviation(n: int, eps: float) -> float:
    """Default finite-size count deviation c(n, eps) = sqrt(n ln(1/eps) / 2).

    This functional form is a toolkit choice (Hoeffding-style tail), kept
    pluggable wherever it is consumed.
    """
    if n < 1:
        raise ValueError(f"n={n} must be >= 1")
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps={eps} outside (0, 1]")
    return math.sqrt(n * math.log(1.0 / eps) / 2.0)
