"""Vectorized Monte-Carlo experiments behind the failure-probability bounds.

Each experiment batches matrix draws and evaluates all typical-set
candidates per draw with one dense matmul, so hundreds of thousands of
trials complete in seconds. Every experiment is deterministic given its
seed and reports the empirical frequency next to the bound it probes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hashing import SeedSource, collision_probe
from .rates import ec_cost, log2_weight_interval_count
from .reconciliation import TypicalErrorSet

__all__ = [
    "BoundCheck",
    "decode_failure_experiment",
    "reuse_failure_experiment",
    "collision_bound_experiment",
    "verify_false_pass_experiment",
]


@dataclass(frozen=True)
class BoundCheck:
    """One empirical frequency compared against its analytic bound."""

    name: str
    trials: int
    failures: int
    rate: float
    bound: float
    sigma: float
    holds: bool
    detail: dict

    @property
    def threshold(self) -> float:
        return self.bound + 3.0 * self.sigma

    @property
    def margin(self) -> float:
        return self.threshold - self.rate


def _binomial_sigma(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / trials)


def _expand_diag_batch(diags: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """(t, rows+cols-1) diag batch to (t, rows, cols) dense matrices."""
    idx = np.arange(rows)[:, None] - np.arange(cols)[None, :] + cols - 1
    return diags[:, idx]


def _candidate_matrix(tes: TypicalErrorSet) -> np.ndarray:
    blocks = list(tes.candidate_blocks())
    return np.concatenate(blocks, axis=0) if blocks else np.zeros((0, tes.n), np.uint8)


def _batched_syndromes(diags: np.ndarray, cand_t: np.ndarray,
                       rows: int, cols: int) -> np.ndarray:
    """Syndromes of every candidate under every matrix: (t, rows, k) in {0,1}."""
    dense = _expand_diag_batch(diags, rows, cols).astype(np.float32)
    t = dense.shape[0]
    syn = dense.reshape(t * rows, cols) @ cand_t
    np.mod(syn, 2.0, out=syn)
    return syn.reshape(t, rows, cand_t.shape[1])


def decode_failure_experiment(n: int, max_weight: int, extra_syndrome_bits: int,
                              trials: int, seed: int, chunk: int = 4096,
                              rows_override: int | None = None) -> BoundCheck:
    """Planted-error decoding over fresh matrices.

    Per trial: draw a uniform error of weight <= max_weight, draw a fresh
    Toeplitz matrix with ceil(log2 |set|) + extra rows, and count the trial
    as a failure unless the planted error is the unique set member matching
    its syndrome. The bound is 2**-extra (the set-size over syndrome-space
    ratio, rounded up). ``rows_override`` forces a different matrix height
    while keeping the nominal bound, which is how an undersized syndrome is
    shown to break it.
    """
    tes = TypicalErrorSet(n, 0, max_weight)
    k = tes.size()
    rows = rows_override if rows_override is not None \
        else math.ceil(math.log2(k)) + extra_syndrome_bits
    cand = _candidate_matrix(tes)  # (k, n), enumeration order
    cand_t = cand.astype(np.float32).T
    rng = np.random.default_rng(seed)
    src = SeedSource(rng=rng)
    failures = 0
    done = 0
    while done < trials:
        c = min(chunk, trials - done)
        diags = src.take_array(c, rows + n - 1).astype(np.float32)
        syn = _batched_syndromes(diags, cand_t, rows, n)  # (c, rows, k)
        planted = rng.integers(0, k, size=c)
        true_syn = syn[np.arange(c), :, planted]  # (c, rows)
        same = (syn == true_syn[:, :, None]).all(axis=1)  # (c, k)
        failures += int(np.count_nonzero(same.sum(axis=1) != 1))
        done += c
    rate = failures / trials
    bound = 2.0 ** (-extra_syndrome_bits)
    return BoundCheck(
        name="decode-failure",
        trials=trials,
        failures=failures,
        rate=rate,
        bound=bound,
        sigma=_binomial_sigma(bound, trials),
        holds=rate <= bound + 3.0 * _binomial_sigma(bound, trials),
        detail={"n": n, "max_weight": max_weight, "rows": rows,
                "set_size": k, "seed": seed},
    )


def _reuse_pass(pattern_idx: np.ndarray, cand_t: np.ndarray, rows: int, n: int,
                draws: int, src: SeedSource, chunk: int
                ) -> tuple[int, np.ndarray]:
    """Decode the committed patterns against ``draws`` fresh matrices;
    returns the any-failure count and per-pattern failure counts."""
    any_failures = 0
    per_pattern = np.zeros(len(pattern_idx), dtype=np.int64)
    done = 0
    while done < draws:
        c = min(chunk, draws - done)
        diags = src.take_array(c, rows + n - 1).astype(np.float32)
        syn = _batched_syndromes(diags, cand_t, rows, n)  # (c, rows, k)
        fail_any = np.zeros(c, dtype=bool)
        for j, p in enumerate(pattern_idx):
            true_syn = syn[:, :, p]
            same = (syn == true_syn[:, :, None]).all(axis=1)
            bad = same.sum(axis=1) != 1
            per_pattern[j] += int(np.count_nonzero(bad))
            fail_any |= bad
        any_failures += int(np.count_nonzero(fail_any))
        done += c
    return any_failures, per_pattern


def reuse_failure_experiment(n: int, max_weight: int, rows: int,
                             n_patterns: int, draws: int, seed: int,
                             chunk: int = 2048) -> BoundCheck:
    """One matrix reused across pre-committed error patterns.

    The patterns are drawn once (before any matrix) and held fixed; each
    draw decodes all of them with a single fresh matrix. The union bound
    says the any-pattern failure rate is at most n_patterns times the
    single-pattern rate. That single-pattern rate is estimated on an
    independent calibration batch of the same size, so the comparison is a
    genuine statistical check rather than the counting identity
    count(any) <= sum(counts) that same-batch estimation would reduce to.
    """
    tes = TypicalErrorSet(n, 0, max_weight)
    k = tes.size()
    if n_patterns > k:
        raise ValueError(f"cannot commit {n_patterns} distinct patterns, set has {k}")
    cand = _candidate_matrix(tes)
    cand_t = cand.astype(np.float32).T
    pattern_idx = np.random.default_rng((seed, 0)).choice(k, size=n_patterns,
                                                          replace=False)
    cal_src = SeedSource(rng=np.random.default_rng((seed, 1)))
    main_src = SeedSource(rng=np.random.default_rng((seed, 2)))
    _, cal_counts = _reuse_pass(pattern_idx, cand_t, rows, n, draws, cal_src, chunk)
    eps1 = float(cal_counts.sum()) / (n_patterns * draws)
    any_failures, per_pattern = _reuse_pass(pattern_idx, cand_t, rows, n,
                                            draws, main_src, chunk)
    any_rate = any_failures / draws
    bound = n_patterns * eps1
    sigma = _binomial_sigma(min(bound, 1.0), draws)
    return BoundCheck(
        name="reuse-union",
        trials=draws,
        failures=any_failures,
        rate=any_rate,
        bound=bound,
        sigma=sigma,
        holds=any_rate <= bound + 3.0 * sigma,
        detail={
            "n": n, "max_weight": max_weight, "rows": rows,
            "n_patterns": n_patterns, "eps1": eps1,
            "per_pattern_rates": (per_pattern / draws).tolist(),
            "seed": seed,
        },
    )


def collision_bound_experiment(rows: int, cols: int, trials: int, seed: int,
                               pairs: int = 8) -> BoundCheck:
    """Two-universality probe: collision rate at most 2**-rows."""
    src = SeedSource.from_seed(seed)
    est = collision_probe(rows, cols, pairs, trials, src)
    bound = 2.0 ** (-rows)
    sigma = _binomial_sigma(bound, est.trials)
    return BoundCheck(
        name="collision",
        trials=est.trials,
        failures=est.collisions,
        rate=est.rate,
        bound=bound,
        sigma=sigma,
        holds=est.rate <= bound + 3.0 * sigma,
        detail={"rows": rows, "cols": cols, "pairs": pairs, "seed": seed},
    )


def verify_false_pass_experiment(n: int, tag_bits: int, trials: int, seed: int,
                                 chunk: int = 8192) -> BoundCheck:
    """False-pass rate of tag verification on unequal pairs: at most 2**-tag_bits.

    Each trial draws a fresh nonzero difference string and a fresh tag
    matrix; a false pass is a tag collision on the pair.
    """
    rng = np.random.default_rng(seed)
    src = SeedSource(rng=rng)
    false_passes = 0
    done = 0
    while done < trials:
        c = min(chunk, trials - done)
        diffs = rng.integers(0, 2, size=(c, n), dtype=np.uint8)
        zero = ~diffs.any(axis=1)
        if zero.any():
            diffs[zero, rng.integers(0, n, size=int(zero.sum()))] = 1
        diags = src.take_array(c, tag_bits + n - 1).astype(np.float32)
        dense = _expand_diag_batch(diags, tag_bits, n).astype(np.float32)
        syn = np.einsum("tmn,tn->tm", dense, diffs.astype(np.float32))
        np.mod(syn, 2.0, out=syn)
        false_passes += int(np.count_nonzero((syn == 0.0).all(axis=1)))
        done += c
    rate = false_passes / trials
    bound = 2.0 ** (-tag_bits)
    sigma = _binomial_sigma(bound, trials)
    return BoundCheck(
        name="verify-false-pass",
        trials=trials,
        failures=false_passes,
        rate=rate,
        bound=bound,
        sigma=sigma,
        holds=rate <= bound + 3.0 * sigma,
        detail={"n": n, "tag_bits": tag_bits, "seed": seed},
    )


def planned_syndrome_bits(n: int, max_weight: int, eps_ec: float) -> int:
    """Syndrome size for a weight-window set at failure budget eps_ec."""
    return ec_cost(log2_weight_interval_count(n, 0, max_weight), eps_ec)
