"""GF(2) vector and matrix algebra tests, with brute-force oracles."""

import numpy as np
import pytest

from streamkey.bitvec import BitString, Gf2Matrix, mat_vec, nullspace, rank


def brute_mat_vec(rows, v):
    """Independent oracle: explicit mod-2 dot product per row."""
    out = []
    for row in rows:
        acc = 0
        for m_ij, v_j in zip(row, v):
            acc ^= m_ij & v_j
        out.append(acc)
    return out


def brute_kernel(m: Gf2Matrix):
    """Enumerate every vector and keep the ones the matrix kills."""
    n = m.cols
    kernel = []
    for x in range(2 ** n):
        v = BitString(n, x)
        if mat_vec(m, v).weight() == 0:
            kernel.append(v)
    return kernel


class TestBitString:
    def test_xor_example(self):
        a = BitString.from_bits("1100")
        b = BitString.from_bits("1010")
        assert (a ^ b) == BitString.from_bits("0110")

    def test_xor_self_inverse(self):
        a = BitString.from_bits("10110")
        assert (a ^ a) == BitString.zeros(5)

    def test_xor_identity(self):
        a = BitString.from_bits("10110")
        assert (a ^ BitString.zeros(5)) == a

    def test_xor_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            BitString.from_bits("101") ^ BitString.from_bits("10")

    def test_xor_assoc_comm_randomized(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(0, 64))
            a, b, c = (BitString.random(n, rng) for _ in range(3))
            assert (a ^ b) == (b ^ a)
            assert ((a ^ b) ^ c) == (a ^ (b ^ c))

    def test_weight(self):
        assert BitString.from_bits("0000").weight() == 0
        assert BitString.from_bits("1011").weight() == 3
        assert BitString.ones(17).weight() == 17

    def test_value_beyond_length_rejected(self):
        with pytest.raises(ValueError):
            BitString(3, 0b1000)

    def test_indexing_and_iteration(self):
        a = BitString.from_bits("0110")
        assert [a[i] for i in range(4)] == [0, 1, 1, 0]
        assert list(a) == [0, 1, 1, 0]
        assert a[-1] == 0
        with pytest.raises(IndexError):
            a[4]

    def test_slicing(self):
        a = BitString.from_bits("011010")
        assert a[1:4] == BitString.from_bits("110")
        assert a[:0] == BitString(0)
        assert a[2:] == BitString.from_bits("1010")

    def test_concat_flip_reverse(self):
        a = BitString.from_bits("011")
        b = BitString.from_bits("10")
        assert a.concat(b) == BitString.from_bits("01110")
        assert a.flip(0) == BitString.from_bits("111")
        assert a.reverse() == BitString.from_bits("110")

    def test_hex_round_trip(self):
        rng = np.random.default_rng(1)
        for n in [0, 1, 7, 8, 12, 13, 64, 200]:
            a = BitString.random(n, rng)
            assert BitString.from_hex(a.to_hex()) == a

    def test_hex_format_example(self):
        # 12 bits pack into two bytes, most-significant nibble first
        a = BitString(12, 0xF3A)
        assert a.to_hex() == "12:0f3a"
        assert BitString.from_hex("12:0f3a") == a

    def test_hex_rejects_bad_payload(self):
        with pytest.raises(ValueError):
            BitString.from_hex("4:ff")  # bits above length 4
        with pytest.raises(ValueError):
            BitString.from_hex("8:f")   # wrong digit count
        with pytest.raises(ValueError):
            BitString.from_hex("nope")

    def test_numpy_round_trip(self):
        rng = np.random.default_rng(2)
        for n in [0, 1, 9, 65]:
            a = BitString.random(n, rng)
            assert BitString.from_numpy(a.to_numpy()) == a


class TestMatVec:
    def test_identity(self):
        rng = np.random.default_rng(3)
        v = BitString.random(6, rng)
        assert mat_vec(Gf2Matrix.identity(6), v) == v

    def test_zero_matrix(self):
        v = BitString.from_bits("10101")
        assert mat_vec(Gf2Matrix.zeros(3, 5), v) == BitString.zeros(3)

    def test_small_example_against_oracle(self):
        # hand mod-2 dot products: rows (1,1,0),(0,1,1) against (1,0,1)
        m = Gf2Matrix([[1, 1, 0], [0, 1, 1]])
        v = BitString.from_bits("101")
        expected = brute_mat_vec([[1, 1, 0], [0, 1, 1]], [1, 0, 1])
        assert expected == [1, 1]
        assert mat_vec(m, v) == BitString.from_bits(expected)

    def test_random_against_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            r, c = int(rng.integers(1, 9)), int(rng.integers(1, 9))
            m = Gf2Matrix.random(r, c, rng)
            v = BitString.random(c, rng)
            assert mat_vec(m, v) == BitString.from_bits(
                brute_mat_vec(m.array.tolist(), list(v))
            )

    def test_linearity(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            m = Gf2Matrix.random(5, 11, rng)
            a = BitString.random(11, rng)
            b = BitString.random(11, rng)
            assert mat_vec(m, a ^ b) == mat_vec(m, a) ^ mat_vec(m, b)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            mat_vec(Gf2Matrix.zeros(2, 3), BitString.zeros(4))


class TestRank:
    def test_identity_and_zero(self):
        assert rank(Gf2Matrix.identity(7)) == 7
        assert rank(Gf2Matrix.zeros(4, 6)) == 0

    def test_against_row_span_count(self):
        # 2**rank distinct row combinations span the row space
        rng = np.random.default_rng(6)
        for _ in range(20):
            m = Gf2Matrix.random(4, 8, rng)
            span = set()
            rows = m.array
            for mask in range(16):
                acc = np.zeros(8, dtype=np.uint8)
                for i in range(4):
                    if (mask >> i) & 1:
                        acc ^= rows[i]
                span.add(acc.tobytes())
            assert 2 ** rank(m) == len(span)

    def test_idempotent_under_re_elimination(self):
        rng = np.random.default_rng(7)
        m = Gf2Matrix.random(6, 10, rng)
        from streamkey.bitvec import _row_reduce

        reduced, pivots = _row_reduce(m.array)
        again, pivots2 = _row_reduce(reduced)
        assert np.array_equal(reduced, again)
        assert pivots == pivots2


class TestNullspace:
    def test_known_kernel(self):
        m = Gf2Matrix([[1, 1, 0], [0, 1, 1]])
        v = nullspace(m)
        assert v.cols == 1
        assert v.array[:, 0].tolist() == [1, 1, 1]
        # brute force: exactly one nonzero kernel element among all 8 vectors
        kernel = brute_kernel(m)
        assert len(kernel) == 2  # zero vector and (1,1,1)

    def test_identity_trivial_kernel(self):
        assert nullspace(Gf2Matrix.identity(5)).cols == 0

    def test_all_ones_row(self):
        for n in range(2, 9):
            m = Gf2Matrix([[1] * n])
            v = nullspace(m)
            assert v.cols == n - 1
            for k in range(v.cols):
                col = BitString.from_numpy(v.array[:, k])
                assert col.weight() % 2 == 0
            # every enumerated kernel vector must be reachable: counts match
            assert len(brute_kernel(m)) == 2 ** v.cols

    def test_rank_nullity_and_kernel_membership(self):
        rng = np.random.default_rng(8)
        for _ in range(40):
            r, c = int(rng.integers(1, 8)), int(rng.integers(1, 10))
            m = Gf2Matrix.random(r, c, rng)
            v = nullspace(m)
            assert rank(m) + v.cols == m.cols
            for k in range(v.cols):
                u = BitString.from_numpy(v.array[:, k])
                assert mat_vec(m, u).weight() == 0
            # columns linearly independent
            assert rank(v) == v.cols

    def test_zero_row_matrix_kernel_is_everything(self):
        v = nullspace(Gf2Matrix.zeros(0, 4))
        assert v.cols == 4
