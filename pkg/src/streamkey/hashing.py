"""Toeplitz universal hashing: seeded generation, naive and FFT-accelerated
application, and Monte-Carlo collision probing.

A Toeplitz matrix of shape m x n is stored as its m+n-1 defining bits
``diag``, with entry (i, j) = diag[i - j + n - 1]. Row 0 read left to right
is diag[n-1], diag[n-2], ..., diag[0]; column 0 top to bottom is diag[n-1],
diag[n], ..., diag[m+n-2].
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bitvec import BitString, Gf2Matrix

__all__ = [
    "SeedSource",
    "SeedExhaustedError",
    "PrecisionOverflowError",
    "ToeplitzMatrix",
    "generate_toeplitz",
    "hash_apply",
    "hash_apply_fast",
    "collision_probe",
    "collision_probe_pair",
    "CollisionEstimate",
    "save_matrix",
    "load_matrix",
]

# Dense expansion refuses above this many entries to avoid runaway memory.
_DENSE_LIMIT = 1 << 26

# FFT fast path: single transform below the limit, overlap-add blocks above.
# Block length keeps every exact convolution coefficient at most 2**20, far
# inside float64's exact-integer range even after accumulation.
_SINGLE_FFT_LIMIT = 1 << 22
_FFT_BLOCK = 1 << 20


class SeedExhaustedError(Exception):
    """A finite seed source ran out of bits."""


class PrecisionOverflowError(Exception):
    """The FFT convolution could not certify exact integer recovery."""


class SeedSource:
    """Single-consumer stream of uniform random bits with a consumption count.

    Backed either by a PRNG (unbounded) or by a finite preloaded pool.
    Replaying with the same seed reproduces the same draws. Concurrent draws
    from one source are forbidden by contract.
    """

    def __init__(self, rng: Optional[np.random.Generator] = None,
                 pool: Optional[BitString] = None):
        if (rng is None) == (pool is None):
            raise ValueError("provide exactly one of rng or pool")
        self._rng = rng
        self._pool = pool
        self._consumed = 0

    @classmethod
    def from_seed(cls, seed: int) -> "SeedSource":
        return cls(rng=np.random.default_rng(seed))

    @classmethod
    def from_bits(cls, bits: BitString) -> "SeedSource":
        return cls(pool=bits)

    @property
    def consumed(self) -> int:
        return self._consumed

    def take(self, count: int) -> BitString:
        """Draw ``count`` bits, advancing the consumption counter."""
        if count < 0:
            raise ValueError(f"cannot draw {count} bits")
        if count == 0:
            return BitString(0)
        if self._pool is not None:
            end = self._consumed + count
            if end > len(self._pool):
                raise SeedExhaustedError(
                    f"seed pool exhausted: need {count} bits, "
                    f"{len(self._pool) - self._consumed} left"
                )
            out = self._pool[self._consumed:end]
            self._consumed = end
            return out
        out = BitString.random(count, self._rng)
        self._consumed += count
        return out

    def take_array(self, rows: int, cols: int) -> np.ndarray:
        """Draw rows*cols bits as a uint8 matrix (row-major draw order).

        On a pool source this is bit-exact with sequential take() calls; on
        a PRNG source it is a distinct (still replayable) draw procedure.
        """
        if rows < 0 or cols < 0:
            raise ValueError("negative array shape")
        if self._pool is not None:
            flat = self.take(rows * cols).to_numpy()
            return flat.reshape(rows, cols)
        out = self._rng.integers(0, 2, size=(rows, cols), dtype=np.uint8)
        self._consumed += rows * cols
        return out


@dataclass(frozen=True)
class ToeplitzMatrix:
    """Diagonal-constant GF(2) matrix determined by rows + cols - 1 free bits.

    ``rows == 0`` is admitted as a degenerate matrix with an empty ``diag``;
    it hashes everything to the empty string (used by extraction when the
    input is already fully random).
    """

    rows: int
    cols: int
    diag: BitString

    def __post_init__(self):
        if self.cols < 1:
            raise ValueError(f"cols={self.cols} must be >= 1")
        if self.rows < 0:
            raise ValueError(f"rows={self.rows} must be >= 0")
        expect = self.rows + self.cols - 1 if self.rows else 0
        if len(self.diag) != expect:
            raise ValueError(
                f"diag has {len(self.diag)} bits, expected {expect} "
                f"for a {self.rows}x{self.cols} Toeplitz matrix"
            )

    def entry(self, i: int, j: int) -> int:
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(f"entry ({i}, {j}) out of range")
        return self.diag[i - j + self.cols - 1]

    def to_dense(self) -> Gf2Matrix:
        if self.rows * self.cols > _DENSE_LIMIT:
            raise ValueError(
                f"{self.rows}x{self.cols} is too large to expand densely"
            )
        if self.rows == 0:
            return Gf2Matrix.zeros(0, self.cols)
        d = self.diag.to_numpy()
        idx = np.arange(self.rows)[:, None] - np.arange(self.cols)[None, :] + self.cols - 1
        return Gf2Matrix(d[idx])

    @classmethod
    def from_dense(cls, m: Gf2Matrix) -> "ToeplitzMatrix":
        """Re-compress a dense matrix; rejects non-diagonal-constant input."""
        if m.rows == 0:
            return cls(0, m.cols, BitString(0))
        a = m.array
        diag_bits = np.concatenate([a[0, ::-1], a[1:, 0]])
        t = cls(m.rows, m.cols, BitString.from_numpy(diag_bits))
        if t.to_dense() != m:
            raise ValueError("matrix is not diagonal-constant")
        return t

    def transpose(self) -> "ToeplitzMatrix":
        if self.rows == 0:
            raise ValueError("cannot transpose a zero-row Toeplitz matrix")
        return ToeplitzMatrix(self.cols, self.rows, self.diag.reverse())

    @property
    def matrix_id(self) -> str:
        h = hashlib.sha256(
            f"toeplitz {self.rows} {self.cols} {self.diag.to_hex()}".encode()
        )
        return h.hexdigest()[:16]


def generate_toeplitz(rows: int, cols: int, src: SeedSource) -> ToeplitzMatrix:
    """Draw a fresh matrix, consuming exactly rows + cols - 1 seed bits."""
    if rows < 1 or cols < 1:
        raise ValueError(f"matrix shape {rows}x{cols} must be at least 1x1")
    return ToeplitzMatrix(rows, cols, src.take(rows + cols - 1))


def hash_apply(t: ToeplitzMatrix, v: BitString) -> BitString:
    """Apply the hash: same output as mat_vec on the dense expansion.

    Computed as sliding mod-2 dot products of ``diag`` against the reversed
    input, which is the quadratic-cost reference path.
    """
    if len(v) != t.cols:
        raise ValueError(f"dimension mismatch: matrix has {t.cols} cols, input {len(v)} bits")
    if t.rows == 0:
        return BitString(0)
    d = t.diag.to_numpy().astype(np.int64)
    w = v.to_numpy()[::-1].astype(np.int64)
    out = np.correlate(d, w, mode="valid") & 1
    return BitString.from_numpy(out.astype(np.uint8))


def hash_apply_fast(t: ToeplitzMatrix, v: BitString) -> BitString:
    """FFT-accelerated hash application, bit-identical to hash_apply.

    The output is the slice [cols-1, cols-1+rows) of the integer convolution
    diag * v reduced mod 2. Exactness is certified by bounding every
    convolution coefficient and checking the rounding residual; a violation
    raises PrecisionOverflowError rather than returning wrong bits.
    """
    if len(v) != t.cols:
        raise ValueError(f"dimension mismatch: matrix has {t.cols} cols, input {len(v)} bits")
    if t.rows == 0:
        return BitString(0)
    a = t.diag.to_numpy().astype(np.float64)
    b = v.to_numpy().astype(np.float64)
    lo = t.cols - 1
    par = _parity_convolution_window(a, b, lo, lo + t.rows)
    return BitString.from_numpy(par.astype(np.uint8))


def _next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def _round_checked(seg: np.ndarray, coeff_bound: float) -> np.ndarray:
    vals = np.rint(seg)
    resid = np.abs(seg - vals).max(initial=0.0)
    if resid > 0.25:
        raise PrecisionOverflowError(
            f"convolution rounding residual {resid:.3g} exceeds 0.25"
        )
    top = vals.max(initial=0.0)
    if top > coeff_bound or vals.min(initial=0.0) < -0.5:
        raise PrecisionOverflowError(
            f"convolution coefficient {top:.3g} exceeds certified bound {coeff_bound:.3g}"
        )
    return vals.astype(np.int64)


def _parity_convolution_window(a: np.ndarray, b: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Parities of conv(a, b)[lo:hi] for 0/1 sequences, exact."""
    la, lb = len(a), len(b)
    full = la + lb - 1
    lo, hi = max(lo, 0), min(hi, full)
    if hi <= lo:
        return np.zeros(0, dtype=np.int64)

    if la + lb <= _SINGLE_FFT_LIMIT:
        size = _next_pow2(full)
        conv = np.fft.irfft(np.fft.rfft(a, size) * np.fft.rfft(b, size), size)
        vals = _round_checked(conv[lo:hi], coeff_bound=min(la, lb))
        return vals & 1

    out = np.zeros(hi - lo, dtype=np.int64)
    blk = _FFT_BLOCK
    size = 2 * blk
    for a0 in range(0, la, blk):
        na = min(blk, la - a0)
        fa = None
        for b0 in range(0, lb, blk):
            nb = min(blk, lb - b0)
            base = a0 + b0
            seg_len = na + nb - 1
            if base >= hi or base + seg_len <= lo:
                continue
            if fa is None:
                fa = np.fft.rfft(a[a0:a0 + na], size)
            fb = np.fft.rfft(b[b0:b0 + nb], size)
            conv = np.fft.irfft(fa * fb, size)[:seg_len]
            vals = _round_checked(conv, coeff_bound=min(na, nb))
            s, e = max(base, lo), min(base + seg_len, hi)
            out[s - lo:e - lo] += vals[s - base:e - base]
    return out & 1


@dataclass(frozen=True)
class CollisionEstimate:
    collisions: int
    trials: int
    pairs: int
    rate: float
    half_width: float


def collision_probe_pair(x: BitString, y: BitString, rows: int, trials: int,
                         src: SeedSource, z: float = 3.0) -> CollisionEstimate:
    """Empirical collision rate of fresh random matrices on one fixed pair.

    The pair is fixed before any matrix is drawn. Identical inputs collide
    always, so the estimate degenerates to 1 in that case.
    """
    if len(x) != len(y):
        raise ValueError("pair members must have equal length")
    if trials < 1:
        raise ValueError("need at least one trial")
    n = len(x)
    if x == y:
        return CollisionEstimate(trials, trials, 1, 1.0, 0.0)
    d = (x ^ y).to_numpy().astype(np.float32)
    # Syndrome of the difference: out[i] = sum_j diag[i + n - 1 - j] d[j].
    # Folded into one matrix so a whole batch of diags is a single matmul.
    k_idx = np.arange(rows + n - 1)[:, None]
    i_idx = np.arange(rows)[None, :]
    j_idx = i_idx + n - 1 - k_idx
    fold = np.where((j_idx >= 0) & (j_idx < n), d[np.clip(j_idx, 0, n - 1)], 0.0)
    collisions = 0
    done = 0
    chunk = max(1, min(trials, 1 << 16))
    while done < trials:
        c = min(chunk, trials - done)
        diags = src.take_array(c, rows + n - 1).astype(np.float32)
        syn = diags @ fold
        np.mod(syn, 2.0, out=syn)
        collisions += int(np.count_nonzero((syn == 0.0).all(axis=1)))
        done += c
    rate = collisions / trials
    sigma = (rate * (1.0 - rate) / trials) ** 0.5
    return CollisionEstimate(collisions, trials, 1, rate, z * sigma)


def collision_probe(rows: int, cols: int, pairs: int, trials: int,
                    src: SeedSource, z: float = 3.0) -> CollisionEstimate:
    """Monte-Carlo two-universality probe over freshly drawn matrices.

    ``pairs`` distinct input pairs are committed first, then ``trials``
    matrices are drawn and split evenly across the pairs. Returns the pooled
    collision-rate estimate with a ``z`` standard-deviation half-width.
    """
    if pairs < 1 or trials < pairs:
        raise ValueError("need pairs >= 1 and trials >= pairs")
    committed = []
    for _ in range(pairs):
        x = src.take(cols)
        y = src.take(cols)
        while y == x:
            y = src.take(cols)
        committed.append((x, y))
    per = trials // pairs
    extra = trials - per * pairs
    collisions = 0
    total = 0
    for k, (x, y) in enumerate(committed):
        t = per + (1 if k < extra else 0)
        if t == 0:
            continue
        est = collision_probe_pair(x, y, rows, t, src)
        collisions += est.collisions
        total += est.trials
    rate = collisions / total
    sigma = (rate * (1.0 - rate) / total) ** 0.5
    return CollisionEstimate(collisions, total, pairs, rate, z * sigma)


def save_matrix(path, t: ToeplitzMatrix) -> None:
    """Write the ``toeplitz m n`` + hex diag file format."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"toeplitz {t.rows} {t.cols}\n{t.diag.to_hex()}\n")


def load_matrix(path) -> ToeplitzMatrix:
    with open(path, encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != "toeplitz":
            raise ValueError(f"malformed matrix header in {path}")
        rows, cols = int(header[1]), int(header[2])
        diag = BitString.from_hex(fh.readline())
    return ToeplitzMatrix(rows, cols, diag)
