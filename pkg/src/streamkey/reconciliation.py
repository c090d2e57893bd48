"""Bilateral information reconciliation via universal-hash syndromes.

Both sides hash their strings with the same public Toeplitz matrix; the XOR
of the two hashes is the syndrome of the error pattern. The decoder searches
the typical error set exhaustively (desk scale, hard candidate cap) for a
pattern matching the syndrome. A hint-validated path serves full-size
simulations where exhaustive search is infeasible: the supplied candidate is
only accepted after passing the same syndrome and set-membership checks that
an exhaustive match would satisfy.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .bitvec import BitString
from .hashing import SeedSource, ToeplitzMatrix, generate_toeplitz, hash_apply
from .rates import log2_weight_interval_count

__all__ = [
    "TypicalErrorSet",
    "Syndrome",
    "DecodeResult",
    "ReconcileResult",
    "Transcript",
    "VerifyResult",
    "ReuseTrialResult",
    "SearchSpaceError",
    "DECODE_CANDIDATE_CAP",
    "encode_syndrome",
    "decode",
    "reconcile",
    "verify",
    "reuse_trial",
]

DECODE_CANDIDATE_CAP = 1 << 24
_SCAN_BLOCK = 1 << 14


class SearchSpaceError(Exception):
    """The typical set exceeds the exhaustive-decoding candidate cap."""


@dataclass(frozen=True)
class TypicalErrorSet:
    """Error patterns of length n with weight inside [lo, hi]."""

    n: int
    lo: int
    hi: int

    def __post_init__(self):
        if not 0 <= self.lo <= self.hi <= self.n:
            raise ValueError(f"bad weight window [{self.lo}, {self.hi}] for n={self.n}")

    def contains(self, e: BitString) -> bool:
        if len(e) != self.n:
            return False
        return self.lo <= e.weight() <= self.hi

    def size(self) -> int:
        return sum(math.comb(self.n, w) for w in range(self.lo, self.hi + 1))

    def log2_size(self) -> float:
        return log2_weight_interval_count(self.n, self.lo, self.hi)

    def candidates(self) -> Iterator[BitString]:
        """Deterministic enumeration: weight ascending, positions in
        combination order within each weight."""
        for w in range(self.lo, self.hi + 1):
            for positions in itertools.combinations(range(self.n), w):
                v = 0
                for p in positions:
                    v |= 1 << p
                yield BitString(self.n, v)

    def candidate_blocks(self, block: int = _SCAN_BLOCK) -> Iterator[np.ndarray]:
        """Candidates as uint8 (k, n) matrices in enumeration order."""
        buf = np.zeros((block, self.n), dtype=np.uint8)
        fill = 0
        for w in range(self.lo, self.hi + 1):
            for positions in itertools.combinations(range(self.n), w):
                buf[fill, :] = 0
                for p in positions:
                    buf[fill, p] = 1
                fill += 1
                if fill == block:
                    yield buf
                    buf = np.zeros((block, self.n), dtype=np.uint8)
                    fill = 0
        if fill:
            yield buf[:fill]


@dataclass(frozen=True)
class Syndrome:
    """Hash image of a string, tagged with the producing matrix."""

    bits: BitString
    matrix_id: str


@dataclass(frozen=True)
class DecodeResult:
    status: str  # "unique" | "ambiguous" | "not_found"
    error: Optional[BitString]
    matches: int

    @property
    def ok(self) -> bool:
        return self.status == "unique"


@dataclass(frozen=True)
class Transcript:
    """Public record of one reconciliation exchange."""

    n: int
    i_ec: int
    set_lo: int
    set_hi: int
    outcome: str
    disclosed_bits: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "I_ec": self.i_ec,
                "set_lo": self.set_lo,
                "set_hi": self.set_hi,
                "outcome": self.outcome,
                "disclosed_bits": self.disclosed_bits,
            },
            sort_keys=True,
        )


@dataclass(frozen=True)
class ReconcileResult:
    corrected: BitString
    decoded_error: Optional[BitString]
    transcript: Transcript

    @property
    def ok(self) -> bool:
        return self.transcript.outcome == "unique"


def encode_syndrome(t: ToeplitzMatrix, x: BitString) -> Syndrome:
    """Hash a string and tag the result with the matrix identity."""
    return Syndrome(hash_apply(t, x), t.matrix_id)


def decode(t: ToeplitzMatrix, s: Syndrome, tes: TypicalErrorSet,
           hint: Optional[BitString] = None) -> DecodeResult:
    """Find the error pattern in the typical set matching the syndrome.

    The exhaustive scan always visits the whole set, then resolves
    uniqueness, so the outcome is independent of scan order. With a
    ``hint`` the scan is skipped: the hint is accepted only if it passes
    the same syndrome and membership checks (simulation shortcut for sets
    beyond the cap; ambiguity cannot be detected on this path).
    """
    if s.matrix_id != t.matrix_id:
        raise ValueError("syndrome was produced by a different matrix")
    if len(s.bits) != t.rows:
        raise ValueError(f"syndrome has {len(s.bits)} bits, matrix has {t.rows} rows")
    if tes.n != t.cols:
        raise ValueError(f"typical set is over {tes.n} bits, matrix has {t.cols} cols")

    if hint is not None:
        if tes.contains(hint) and hash_apply(t, hint) == s.bits:
            return DecodeResult("unique", hint, 1)
        return DecodeResult("not_found", None, 0)

    total = tes.size()
    if total > DECODE_CANDIDATE_CAP:
        raise SearchSpaceError(
            f"typical set has {total} candidates, cap is {DECODE_CANDIDATE_CAP}"
        )
    target = s.bits.to_numpy().astype(np.float32)
    dense = t.to_dense().array.astype(np.float32)
    matches = 0
    first: Optional[BitString] = None
    for block in tes.candidate_blocks():
        syn = block.astype(np.float32) @ dense.T
        np.mod(syn, 2.0, out=syn)
        hit = np.nonzero((syn == target).all(axis=1))[0]
        if hit.size and first is None:
            first = BitString.from_numpy(block[hit[0]])
        matches += int(hit.size)
    if matches == 1:
        return DecodeResult("unique", first, 1)
    if matches == 0:
        return DecodeResult("not_found", None, 0)
    return DecodeResult("ambiguous", None, matches)


def reconcile(alice: BitString, bob: BitString, t: ToeplitzMatrix,
              tes: TypicalErrorSet,
              hint: Optional[BitString] = None) -> ReconcileResult:
    """Correct Bob's string toward Alice's.

    Alice discloses her syndrome (t.rows bits, the leakage later charged to
    privacy amplification); Bob combines it with his own to obtain the
    syndrome of the error pattern and decodes it. On a unique decode the
    corrected string is bob XOR error.
    """
    if len(alice) != len(bob):
        raise ValueError("strings must have equal length")
    s_a = encode_syndrome(t, alice)
    s_b = encode_syndrome(t, bob)
    s_e = Syndrome(s_a.bits ^ s_b.bits, t.matrix_id)
    result = decode(t, s_e, tes, hint=hint)
    corrected = bob ^ result.error if result.ok else bob
    transcript = Transcript(
        n=len(alice),
        i_ec=t.rows,
        set_lo=tes.lo,
        set_hi=tes.hi,
        outcome=result.status,
        disclosed_bits=t.rows,
    )
    return ReconcileResult(corrected, result.error if result.ok else None, transcript)


@dataclass(frozen=True)
class VerifyResult:
    passed: bool
    tag_bits: int


def verify(alice: BitString, bob: BitString, tag_bits: int, src: SeedSource) -> VerifyResult:
    """Error verification by comparing fresh random hash tags.

    Unequal strings pass with probability at most 2**-tag_bits over the
    matrix draw.
    """
    if len(alice) != len(bob):
        raise ValueError("strings must have equal length")
    if tag_bits < 1:
        raise ValueError(f"tag_bits={tag_bits} must be >= 1")
    t = generate_toeplitz(tag_bits, len(alice), src)
    return VerifyResult(hash_apply(t, alice) == hash_apply(t, bob), tag_bits)


@dataclass(frozen=True)
class ReuseTrialResult:
    matrix: ToeplitzMatrix
    outcomes: tuple[str, ...]
    any_failure: bool


def reuse_trial(patterns: Sequence[BitString], tes: TypicalErrorSet,
                rows: int, src: SeedSource) -> ReuseTrialResult:
    """Decode a committed batch of error patterns with one fresh matrix.

    The patterns are fixed before the matrix is drawn (the argument order
    and the internal draw enforce this), matching the adversary model in
    which errors cannot depend on the hash choice.
    """
    committed = tuple(patterns)
    for p in committed:
        if not tes.contains(p):
            raise ValueError(f"pattern {p!r} lies outside the typical set")
    t = generate_toeplitz(rows, tes.n, src)
    outcomes = []
    failed = False
    for p in committed:
        s = encode_syndrome(t, p)
        res = decode(t, s, tes)
        if res.ok and res.error == p:
            outcomes.append("unique")
        else:
            failed = True
            outcomes.append("wrong" if res.ok else res.status)
    return ReuseTrialResult(t, tuple(outcomes), failed)
