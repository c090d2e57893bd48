"""Throughput measurement: stream XOR versus block Toeplitz hashing.

The stream path times only the per-session XOR (the pad is precomputed
offline, which is the whole point of the split); the block paths time the
hash application itself. All measurements take the best of a few repeats
to damp scheduler noise.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .bitvec import BitString
from .hashing import ToeplitzMatrix, hash_apply, hash_apply_fast
from .privacy_amp import StreamPad
from .rates import binary_entropy

__all__ = [
    "BenchPoint",
    "BenchTable",
    "linear_fit",
    "measure_stream",
    "measure_block",
    "run_bench",
]

_BLOCK_EP = 0.02  # sizing rate for the block-hash output


@dataclass(frozen=True)
class BenchPoint:
    n: int
    seconds: float
    bits_per_sec: float


@dataclass(frozen=True)
class BenchTable:
    stream: list[BenchPoint]
    block_fast: list[BenchPoint]
    block_naive: list[BenchPoint]
    stream_fit_r2: float
    stream_fit_slope: float
    stream_beats_fast_at_largest: bool

    def to_dict(self) -> dict:
        def pts(rows):
            return [
                {"n": p.n, "seconds": p.seconds, "bits_per_sec": p.bits_per_sec}
                for p in rows
            ]

        return {
            "stream": pts(self.stream),
            "block_fast": pts(self.block_fast),
            "block_naive": pts(self.block_naive),
            "stream_fit_r2": self.stream_fit_r2,
            "stream_fit_slope": self.stream_fit_slope,
            "stream_beats_fast_at_largest": self.stream_beats_fast_at_largest,
        }


def linear_fit(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares line fit; returns (slope, intercept, r_squared)."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def _best_time(fn: Callable[[], object], repeats: int, min_window: float = 2e-3) -> float:
    """Per-call seconds: repeat fn inside a timing window of at least
    ``min_window`` so short calls are amortized, take the best of
    ``repeats`` windows."""
    t0 = time.perf_counter()
    fn()  # warm-up doubles as calibration
    once = max(time.perf_counter() - t0, 1e-9)
    inner = max(1, int(min_window / once))
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def measure_stream(sizes: Sequence[int], repeats: int, seed: int,
                   min_window: float = 8e-3) -> list[BenchPoint]:
    """Time the stream-output XOR of an n-bit block against a precomputed pad.

    Rounds are interleaved across sizes and the per-size minimum is kept, so
    slow drift of the host (cache pressure, scheduling) cannot skew one size
    against another.
    """
    rng = np.random.default_rng(seed)
    runs = []
    for n in sizes:
        pad_bits = BitString.random(n, rng)
        data = BitString.random(n, rng)

        def once(pad_bits=pad_bits, data=data):
            pad = StreamPad(pad_bits, "bench", 0)
            return pad.feed(data)

        t0 = time.perf_counter()
        once()  # warm-up and calibration
        est = max(time.perf_counter() - t0, 1e-9)
        runs.append((n, once, max(1, int(min_window / est))))

    best = {n: math.inf for n, _, _ in runs}
    for _ in range(max(repeats, 7)):
        for n, fn, inner in runs:
            t0 = time.perf_counter()
            for _ in range(inner):
                fn()
            best[n] = min(best[n], (time.perf_counter() - t0) / inner)
    return [BenchPoint(n, best[n], n / best[n]) for n, _, _ in runs]


def measure_block(sizes: Sequence[int], repeats: int, seed: int, fast: bool,
                  size_cap: Optional[int] = None) -> list[BenchPoint]:
    """Time block Toeplitz compression of n bits down to n - ceil(n h(e_p)) bits."""
    rng = np.random.default_rng(seed)
    apply_fn = hash_apply_fast if fast else hash_apply
    points = []
    for n in sizes:
        if size_cap is not None and n > size_cap:
            continue
        m = max(1, n - math.ceil(n * binary_entropy(_BLOCK_EP)))
        t = ToeplitzMatrix(m, n, BitString.random(m + n - 1, rng))
        data = BitString.random(n, rng)
        sec = _best_time(lambda: apply_fn(t, data), repeats)
        points.append(BenchPoint(n, sec, n / sec))
    return points


def run_bench(log2_sizes: Sequence[int], repeats: int, seed: int,
              naive_cap_log2: int = 17) -> BenchTable:
    sizes = [1 << k for k in log2_sizes]
    stream = measure_stream(sizes, repeats, seed)
    block_fast = measure_block(sizes, max(1, repeats // 2), seed, fast=True)
    block_naive = measure_block(sizes, max(1, repeats // 2), seed, fast=False,
                                size_cap=1 << naive_cap_log2)
    slope, _, r2 = linear_fit([p.n for p in stream], [p.seconds for p in stream])
    beats = stream[-1].bits_per_sec > block_fast[-1].bits_per_sec
    return BenchTable(stream, block_fast, block_naive, r2, slope, beats)
