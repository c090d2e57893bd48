"""Privacy amplification and randomness extraction.

Two interchangeable mechanisms are provided:

* stream: XOR the reconciled key with a pseudorandom pad ``d . M`` expanded
  from a short private seed ``d`` by a (reusable) Toeplitz matrix ``M``,
  emitting final bits position by position;
* block: project the full key onto the kernel (dual matrix) of the
  phase-hash matrix, the conventional whole-block compression.

A SecurityLedger enforces the per-matrix reuse budget: a matrix whose
single-session failure probability is eps may serve at most
floor(budget / eps) sessions.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from .bitvec import BitString, mat_vec, nullspace, rank
from .hashing import SeedSource, ToeplitzMatrix, hash_apply, hash_apply_fast

__all__ = [
    "StreamPad",
    "make_pad",
    "stream_finalize",
    "finalize_all",
    "block_pa",
    "toeplitz_block_extract",
    "SecurityLedger",
    "LedgerGrant",
    "MinEntropyEstimate",
    "StreamExtractResult",
    "stream_extract",
    "PadStore",
    "save_pad",
    "load_pad",
    "save_key",
    "load_key",
]

# Above this many matrix entries the transpose application goes through the
# FFT path; below it the quadratic path is cheaper.
_FAST_PAD_THRESHOLD = 1 << 24


class StreamPad:
    """A precomputed pseudorandom pad with a single-consumer cursor.

    The pad itself is immutable; only the cursor advances. One pad must
    never be shared by two concurrent consumers.
    """

    def __init__(self, pad: BitString, matrix_id: str, seed_len: int):
        self._pad = pad
        self.matrix_id = matrix_id
        self.seed_len = seed_len
        self._cursor = 0

    @property
    def pad_bits(self) -> BitString:
        return self._pad

    @property
    def cursor(self) -> int:
        return self._cursor

    def __len__(self) -> int:
        return len(self._pad)

    @property
    def remaining(self) -> int:
        return len(self._pad) - self._cursor

    def feed(self, chunk: BitString) -> BitString:
        """XOR the next chunk of input against the pad, advancing the cursor."""
        if len(chunk) > self.remaining:
            raise ValueError(
                f"pad over-consumption: {len(chunk)} bits requested, {self.remaining} left"
            )
        out = chunk ^ self._pad[self._cursor:self._cursor + len(chunk)]
        self._cursor += len(chunk)
        return out

    def feed_at(self, offset: int, chunk: BitString) -> BitString:
        """Feed a chunk that must start exactly at the cursor."""
        if offset != self._cursor:
            raise ValueError(
                f"out-of-order chunk: offset {offset}, cursor at {self._cursor}"
            )
        return self.feed(chunk)


def make_pad(m: ToeplitzMatrix, d: BitString) -> StreamPad:
    """Expand seed ``d`` to the pad ``d . M`` (row vector times matrix).

    pad[j] = XOR_i d[i] * M[i][j], i.e. the transpose application of the
    hash. A zero-row matrix yields the all-zero pad over ``cols`` bits.
    """
    if len(d) != m.rows:
        raise ValueError(f"seed has {len(d)} bits, matrix has {m.rows} rows")
    if m.rows == 0:
        pad = BitString.zeros(m.cols)
    else:
        mt = m.transpose()
        if m.rows * m.cols > _FAST_PAD_THRESHOLD:
            pad = hash_apply_fast(mt, d)
        else:
            pad = hash_apply(mt, d)
    return StreamPad(pad, m.matrix_id, m.rows)


def stream_finalize(pad: StreamPad, chunks: Iterable[BitString]) -> Iterator[BitString]:
    """Yield final-key chunks as reconciled-key chunks arrive, in order."""
    for chunk in chunks:
        yield pad.feed(chunk)


def finalize_all(pad: StreamPad, bits: BitString) -> BitString:
    """One-shot convenience: feed the whole block as a single chunk."""
    return pad.feed(bits)


def block_pa(a: BitString, m: ToeplitzMatrix) -> BitString:
    """Conventional block compression via the dual (kernel) matrix.

    Computes V = nullspace of the dense expansion of ``m`` and returns
    V^T . a, of length cols - rank. Requires full row rank so the output
    length is exactly cols - rows.
    """
    if len(a) != m.cols:
        raise ValueError(f"input has {len(a)} bits, matrix has {m.cols} cols")
    dense = m.to_dense()
    r = rank(dense)
    if r != m.rows:
        raise ValueError(
            f"matrix must have full row rank for block compression: "
            f"rank {r} < rows {m.rows}"
        )
    v = nullspace(dense)
    return mat_vec(v.transpose(), a)


def toeplitz_block_extract(a: BitString, t: ToeplitzMatrix, fast: bool = True) -> BitString:
    """Direct Toeplitz compressor (benchmark convenience, not the dual route)."""
    return hash_apply_fast(t, a) if fast else hash_apply(t, a)


@dataclass(frozen=True)
class LedgerGrant:
    granted: bool
    matrix_id: str
    sessions_used: int
    remaining: int


@dataclass
class _LedgerEntry:
    eps_per_session: float
    total_budget: float
    sessions_used: int = 0


class SecurityLedger:
    """Per-matrix reuse accounting: used * eps never exceeds the budget.

    draw() is an atomic check-and-increment; a refused draw leaves the
    counter untouched.
    """

    def __init__(self):
        self._entries: dict[str, _LedgerEntry] = {}
        self._lock = threading.Lock()

    def register(self, matrix_id: str, eps_per_session: float, total_budget: float) -> None:
        if not 0.0 < eps_per_session <= 1.0:
            raise ValueError(f"eps_per_session={eps_per_session} outside (0, 1]")
        if total_budget < 0.0:
            raise ValueError("total budget must be nonnegative")
        with self._lock:
            if matrix_id in self._entries:
                raise ValueError(f"matrix {matrix_id} already registered")
            self._entries[matrix_id] = _LedgerEntry(eps_per_session, total_budget)

    def draw(self, matrix_id: str) -> LedgerGrant:
        with self._lock:
            e = self._entries.get(matrix_id)
            if e is None:
                raise KeyError(f"matrix {matrix_id} not registered")
            if (e.sessions_used + 1) * e.eps_per_session <= e.total_budget:
                e.sessions_used += 1
                return LedgerGrant(True, matrix_id, e.sessions_used,
                                   self._remaining(e))
            return LedgerGrant(False, matrix_id, e.sessions_used, 0)

    @staticmethod
    def _remaining(e: _LedgerEntry) -> int:
        k = 0
        while (e.sessions_used + k + 1) * e.eps_per_session <= e.total_budget:
            k += 1
        return k

    def sessions_used(self, matrix_id: str) -> int:
        with self._lock:
            return self._entries[matrix_id].sessions_used

    def spent_budget(self, matrix_id: str) -> float:
        with self._lock:
            e = self._entries[matrix_id]
            return e.sessions_used * e.eps_per_session

    def state(self) -> dict:
        with self._lock:
            return {
                mid: {
                    "eps_per_session": e.eps_per_session,
                    "total_budget": e.total_budget,
                    "sessions_used": e.sessions_used,
                }
                for mid, e in self._entries.items()
            }


@dataclass(frozen=True)
class MinEntropyEstimate:
    """Certified min-entropy of a raw sample, with its provenance."""

    h_min: float
    note: str = ""

    def __post_init__(self):
        if self.h_min < 0.0:
            raise ValueError(f"min-entropy {self.h_min} is negative")


@dataclass(frozen=True)
class StreamExtractResult:
    bits: BitString
    certified_bits: float
    note: str


def stream_extract(raw: BitString, est: MinEntropyEstimate,
                   m: ToeplitzMatrix, d: BitString) -> StreamExtractResult:
    """Stream randomness extraction: raw XOR (d . M).

    The matrix must be (n - ceil(h_min)) x n and the seed as long as the
    matrix has rows. The output keeps the full n bits; the certified
    randomness content is h_min bits and is reported, not truncated.
    """
    n = len(raw)
    if est.h_min > n:
        raise ValueError(f"min-entropy {est.h_min} exceeds raw length {n}")
    want_rows = n - math.ceil(est.h_min)
    if m.rows != want_rows or m.cols != n:
        raise ValueError(
            f"matrix is {m.rows}x{m.cols}, expected {want_rows}x{n} "
            f"for h_min={est.h_min}"
        )
    if len(d) != want_rows:
        raise ValueError(f"seed has {len(d)} bits, expected {want_rows}")
    pad = make_pad(m, d)
    return StreamExtractResult(pad.feed(raw), est.h_min, est.note)


class PadStore:
    """One reusable pad matrix plus the private seed supply for fresh pads.

    The matrix is fixed across sessions; the seed ``d`` is drawn fresh for
    every pad, so each provisioned pad is independent.
    """

    def __init__(self, matrix: ToeplitzMatrix, seed_source: SeedSource):
        self.matrix = matrix
        self._seed_source = seed_source

    @classmethod
    def provision(cls, rows: int, cols: int, src: SeedSource) -> "PadStore":
        from .hashing import generate_toeplitz

        return cls(generate_toeplitz(rows, cols, src), src)

    @property
    def matrix_id(self) -> str:
        return self.matrix.matrix_id

    @property
    def rows(self) -> int:
        return self.matrix.rows

    @property
    def cols(self) -> int:
        return self.matrix.cols

    @property
    def seed_bits_consumed(self) -> int:
        return self._seed_source.consumed

    def make_pad(self) -> StreamPad:
        return make_pad(self.matrix, self._seed_source.take(self.matrix.rows))


def save_pad(path, pad: StreamPad) -> None:
    """Write the ``pad n matrix_id seed_len`` + hex file format (cursor not stored)."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"pad {len(pad)} {pad.matrix_id} {pad.seed_len}\n")
        fh.write(pad.pad_bits.to_hex() + "\n")


def load_pad(path) -> StreamPad:
    with open(path, encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "pad":
            raise ValueError(f"malformed pad header in {path}")
        n, matrix_id, seed_len = int(header[1]), header[2], int(header[3])
        bits = BitString.from_hex(fh.readline())
    if len(bits) != n:
        raise ValueError(f"pad payload is {len(bits)} bits, header says {n}")
    return StreamPad(bits, matrix_id, seed_len)


def save_key(path, bits: BitString, *, matrix_id: str, seed_len: int,
             eps_claimed: float, ledger_state: Optional[dict] = None) -> None:
    """Write a final key: hex payload plus a JSON sidecar at ``<path>.json``."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(bits.to_hex() + "\n")
    sidecar = {
        "matrix_id": matrix_id,
        "seed_len": seed_len,
        "eps_claimed": eps_claimed,
        "ledger_state": ledger_state or {},
    }
    with open(f"{path}.json", "w", encoding="ascii") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_key(path) -> tuple[BitString, dict]:
    with open(path, encoding="ascii") as fh:
        bits = BitString.from_hex(fh.readline())
    with open(f"{path}.json", encoding="ascii") as fh:
        sidecar = json.load(fh)
    return bits, sidecar
