"""Exact GF(2) bit-string and matrix algebra.

BitString packs bits into a Python integer, bit i is the i-th lowest bit
(little-endian within the value). Gf2Matrix is a dense 0/1 numpy array.
Both are immutable values; every operation here is a pure function.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "BitString",
    "Gf2Matrix",
    "mat_vec",
    "rank",
    "nullspace",
]


class BitString:
    """Fixed-length vector over GF(2).

    Bits beyond ``len`` are zero by invariant; the constructor rejects
    values that violate this. Serialization is ``"<len>:<hex>"`` with the
    payload padded to whole bytes, most-significant nibble first.
    """

    __slots__ = ("_n", "_v")

    def __init__(self, length: int, value: int = 0):
        if length < 0:
            raise ValueError(f"negative length {length}")
        if value < 0:
            raise ValueError("bit value must be nonnegative")
        if value >> length:
            raise ValueError(f"value has bits set beyond length {length}")
        self._n = length
        self._v = value

    # -- constructors -------------------------------------------------

    @classmethod
    def zeros(cls, length: int) -> "BitString":
        return cls(length, 0)

    @classmethod
    def ones(cls, length: int) -> "BitString":
        return cls(length, (1 << length) - 1)

    @classmethod
    def from_bits(cls, bits: Iterable[int] | str) -> "BitString":
        """Build from an iterable of 0/1 ints or a '01' string; item i is bit i."""
        v = 0
        n = 0
        for b in bits:
            b = int(b)
            if b not in (0, 1):
                raise ValueError(f"bit must be 0 or 1, got {b}")
            v |= b << n
            n += 1
        return cls(n, v)

    @classmethod
    def from_int(cls, length: int, value: int) -> "BitString":
        return cls(length, value)

    @classmethod
    def from_numpy(cls, arr: np.ndarray) -> "BitString":
        arr = np.asarray(arr, dtype=np.uint8)
        if arr.ndim != 1:
            raise ValueError("expected a 1-d array of bits")
        if arr.size == 0:
            return cls(0, 0)
        packed = np.packbits(arr, bitorder="little").tobytes()
        return cls(arr.size, int.from_bytes(packed, "little"))

    @classmethod
    def random(cls, length: int, rng: np.random.Generator) -> "BitString":
        nbytes = (length + 7) // 8
        if nbytes == 0:
            return cls(0, 0)
        raw = rng.integers(0, 256, size=nbytes, dtype=np.uint8).tobytes()
        return cls(length, int.from_bytes(raw, "little") & ((1 << length) - 1))

    @classmethod
    def from_hex(cls, text: str) -> "BitString":
        """Parse the ``"<len>:<hex>"`` wire format."""
        head, _, payload = text.strip().partition(":")
        if not head.isdigit():
            raise ValueError(f"malformed bit string {text!r}")
        length = int(head)
        nbytes = (length + 7) // 8
        if len(payload) != 2 * nbytes:
            raise ValueError(
                f"expected {2 * nbytes} hex digits for {length} bits, got {len(payload)}"
            )
        value = int(payload, 16) if payload else 0
        if value >> length:
            raise ValueError("hex payload has bits set beyond the declared length")
        return cls(length, value)

    # -- accessors ----------------------------------------------------

    @property
    def value(self) -> int:
        return self._v

    def __len__(self) -> int:
        return self._n

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            start, stop, step = idx.indices(self._n)
            if step != 1:
                raise ValueError("only unit-step slices are supported")
            width = max(0, stop - start)
            return BitString(width, (self._v >> start) & ((1 << width) - 1))
        if idx < 0:
            idx += self._n
        if not 0 <= idx < self._n:
            raise IndexError(f"bit index {idx} out of range for length {self._n}")
        return (self._v >> idx) & 1

    def __iter__(self) -> Iterator[int]:
        v = self._v
        for _ in range(self._n):
            yield v & 1
            v >>= 1

    def weight(self) -> int:
        """Number of 1 bits."""
        return self._v.bit_count()

    # -- algebra ------------------------------------------------------

    def __xor__(self, other: "BitString") -> "BitString":
        if not isinstance(other, BitString):
            return NotImplemented
        if self._n != other._n:
            raise ValueError(f"length mismatch: {self._n} != {other._n}")
        return BitString(self._n, self._v ^ other._v)

    def flip(self, i: int) -> "BitString":
        if not 0 <= i < self._n:
            raise IndexError(f"bit index {i} out of range")
        return BitString(self._n, self._v ^ (1 << i))

    def concat(self, other: "BitString") -> "BitString":
        return BitString(self._n + other._n, self._v | (other._v << self._n))

    def reverse(self) -> "BitString":
        if self._n == 0:
            return self
        return BitString.from_numpy(self.to_numpy()[::-1])

    # -- conversions --------------------------------------------------

    def to_numpy(self) -> np.ndarray:
        """Bits as a uint8 array of 0/1, index i is bit i."""
        nbytes = (self._n + 7) // 8
        if nbytes == 0:
            return np.zeros(0, dtype=np.uint8)
        raw = np.frombuffer(self._v.to_bytes(nbytes, "little"), dtype=np.uint8)
        return np.unpackbits(raw, bitorder="little")[: self._n].copy()

    def to_hex(self) -> str:
        nbytes = (self._n + 7) // 8
        return f"{self._n}:{self._v:0{2 * nbytes}x}" if nbytes else f"{self._n}:"

    def to01(self) -> str:
        """Readable bit text, index 0 first."""
        return "".join(str((self._v >> i) & 1) for i in range(self._n))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitString)
            and self._n == other._n
            and self._v == other._v
        )

    def __hash__(self) -> int:
        return hash((self._n, self._v))

    def __repr__(self) -> str:
        if self._n <= 64:
            return f"BitString({self.to01()!r})"
        return f"BitString(len={self._n}, hex={self.to_hex()!r})"


class Gf2Matrix:
    """Dense matrix over GF(2), entries stored as a read-only uint8 array."""

    __slots__ = ("_a",)

    def __init__(self, entries):
        a = np.array(entries, dtype=np.uint8)
        if a.ndim != 2:
            raise ValueError("matrix entries must be 2-dimensional")
        if a.size and a.max() > 1:
            raise ValueError("matrix entries must be 0 or 1")
        a.setflags(write=False)
        self._a = a

    @classmethod
    def identity(cls, n: int) -> "Gf2Matrix":
        return cls(np.eye(n, dtype=np.uint8))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "Gf2Matrix":
        return cls(np.zeros((rows, cols), dtype=np.uint8))

    @classmethod
    def random(cls, rows: int, cols: int, rng: np.random.Generator) -> "Gf2Matrix":
        return cls(rng.integers(0, 2, size=(rows, cols), dtype=np.uint8))

    @classmethod
    def from_rows(cls, rows: Sequence[BitString]) -> "Gf2Matrix":
        return cls(np.stack([r.to_numpy() for r in rows]))

    @property
    def rows(self) -> int:
        return self._a.shape[0]

    @property
    def cols(self) -> int:
        return self._a.shape[1]

    @property
    def array(self) -> np.ndarray:
        return self._a

    def row(self, i: int) -> BitString:
        return BitString.from_numpy(self._a[i])

    def column(self, j: int) -> BitString:
        return BitString.from_numpy(self._a[:, j])

    def transpose(self) -> "Gf2Matrix":
        return Gf2Matrix(self._a.T)

    def __eq__(self, other) -> bool:
        return isinstance(other, Gf2Matrix) and np.array_equal(self._a, other._a)

    def __hash__(self) -> int:
        return hash((self._a.shape, self._a.tobytes()))

    def __repr__(self) -> str:
        return f"Gf2Matrix({self.rows}x{self.cols})"


def mat_vec(m: Gf2Matrix, v: BitString) -> BitString:
    """Matrix-vector product over GF(2)."""
    if len(v) != m.cols:
        raise ValueError(f"dimension mismatch: matrix has {m.cols} cols, vector {len(v)} bits")
    if m.rows == 0:
        return BitString(0)
    acc = m.array.astype(np.int64) @ v.to_numpy().astype(np.int64)
    return BitString.from_numpy((acc & 1).astype(np.uint8))


def _row_reduce(a: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row-echelon form over GF(2).

    Pivoting is deterministic: leftmost nonzero column, first available row
    swapped downward, so the pivot list and the derived kernel basis are
    reproducible.
    """
    a = a.copy()
    n_rows, n_cols = a.shape
    pivots: list[int] = []
    r = 0
    for c in range(n_cols):
        if r == n_rows:
            break
        hits = np.nonzero(a[r:, c])[0]
        if hits.size == 0:
            continue
        p = r + int(hits[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
        mask = a[:, c].astype(bool)
        mask[r] = False
        if mask.any():
            a[mask] ^= a[r]
        pivots.append(c)
        r += 1
    return a, pivots


def rank(m: Gf2Matrix) -> int:
    """Rank over GF(2) by Gaussian elimination."""
    if m.rows == 0 or m.cols == 0:
        return 0
    _, pivots = _row_reduce(m.array)
    return len(pivots)


def nullspace(m: Gf2Matrix) -> Gf2Matrix:
    """Kernel basis of ``m``, returned with one basis vector per column.

    Columns are the standard free-variable unit-vector construction from the
    reduced row-echelon form, ordered by ascending free column index. The
    result has ``m.cols - rank(m)`` columns; a full-column-rank input yields
    a matrix with zero columns.
    """
    if m.rows == 0:
        return Gf2Matrix.identity(m.cols)
    rref, pivots = _row_reduce(m.array)
    free = [c for c in range(m.cols) if c not in set(pivots)]
    basis = np.zeros((m.cols, len(free)), dtype=np.uint8)
    for k, f in enumerate(free):
        basis[f, k] = 1
        for i, p in enumerate(pivots):
            basis[p, k] = rref[i, f]
    return Gf2Matrix(basis)
