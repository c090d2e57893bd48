"""Syndrome reconciliation tests: decode soundness, verification, and the
matrix-reuse trial harness."""

import json
import math

import numpy as np
import pytest

from streamkey.bitvec import BitString
from streamkey.hashing import SeedSource, ToeplitzMatrix, generate_toeplitz, hash_apply
from streamkey.reconciliation import (
    DECODE_CANDIDATE_CAP,
    SearchSpaceError,
    Syndrome,
    TypicalErrorSet,
    decode,
    encode_syndrome,
    reconcile,
    reuse_trial,
    verify,
)

REF_DIAG = BitString.from_bits("0110100")  # 3x5 reference matrix


class TestTypicalErrorSet:
    def test_membership_and_size(self):
        tes = TypicalErrorSet(6, 1, 2)
        assert tes.size() == 6 + 15
        assert tes.contains(BitString.from_bits("010000"))
        assert not tes.contains(BitString.zeros(6))
        assert not tes.contains(BitString.from_bits("111000"))

    def test_candidates_order_deterministic(self):
        tes = TypicalErrorSet(4, 0, 2)
        cands = list(tes.candidates())
        assert len(cands) == tes.size() == 1 + 4 + 6
        weights = [c.weight() for c in cands]
        assert weights == sorted(weights)
        # within each weight, combination order of set positions
        w1 = [c for c in cands if c.weight() == 1]
        assert [c.value for c in w1] == [1, 2, 4, 8]

    def test_candidate_blocks_match_candidates(self):
        tes = TypicalErrorSet(7, 0, 3)
        flat = np.concatenate(list(tes.candidate_blocks(block=10)))
        listed = list(tes.candidates())
        assert flat.shape[0] == len(listed)
        for row, c in zip(flat, listed):
            assert BitString.from_numpy(row) == c

    def test_bad_window(self):
        with pytest.raises(ValueError):
            TypicalErrorSet(4, 3, 2)
        with pytest.raises(ValueError):
            TypicalErrorSet(4, 0, 5)


class TestEncode:
    def test_zero_string(self):
        t = ToeplitzMatrix(3, 5, REF_DIAG)
        s = encode_syndrome(t, BitString.zeros(5))
        assert s.bits == BitString.zeros(3)
        assert s.matrix_id == t.matrix_id

    def test_linearity_chain(self):
        rng = np.random.default_rng(0)
        t = ToeplitzMatrix(6, 16, BitString.random(21, rng))
        for _ in range(50):
            x, y = BitString.random(16, rng), BitString.random(16, rng)
            assert (encode_syndrome(t, x).bits ^ encode_syndrome(t, y).bits
                    == encode_syndrome(t, x ^ y).bits)

    def test_all_ones_gives_row_parities(self):
        t = ToeplitzMatrix(3, 5, REF_DIAG)
        s = encode_syndrome(t, BitString.ones(5))
        expected = [sum(row) % 2 for row in t.to_dense().array.tolist()]
        assert expected == [1, 1, 0]
        assert s.bits == BitString.from_bits(expected)


class TestDecode:
    def test_zero_error(self):
        rng = np.random.default_rng(1)
        t = ToeplitzMatrix(7, 8, BitString.random(14, rng))
        tes = TypicalErrorSet(8, 0, 1)
        s = encode_syndrome(t, BitString.zeros(8))
        res = decode(t, s, tes)
        assert res.ok and res.error == BitString.zeros(8)

    def test_planted_single_bit_errors(self):
        rng = np.random.default_rng(2)
        src = SeedSource.from_seed(3)
        hits = 0
        trials = 200
        tes = TypicalErrorSet(8, 0, 1)
        for _ in range(trials):
            t = generate_toeplitz(7, 8, src)
            e = BitString.zeros(8).flip(int(rng.integers(0, 8)))
            res = decode(t, encode_syndrome(t, e), tes)
            if res.ok and res.error == e:
                hits += 1
        # failure bound |set|/2^rows = 9/128, generous slack for 200 trials
        assert hits >= trials * 0.8

    def test_ambiguity_is_explicit(self):
        t = ToeplitzMatrix(3, 6, BitString.zeros(8))  # hashes everything to 0
        tes = TypicalErrorSet(6, 0, 1)
        s = encode_syndrome(t, BitString.zeros(6))
        res = decode(t, s, tes)
        assert res.status == "ambiguous"
        assert res.matches == tes.size()
        assert res.error is None

    def test_not_found(self):
        rng = np.random.default_rng(4)
        # full-rank square matrix is injective, so a syndrome of a weight-3
        # error cannot match anything inside a weight-<=1 window
        from streamkey.bitvec import rank

        t = None
        while t is None:
            cand = ToeplitzMatrix(6, 6, BitString.random(11, rng))
            if rank(cand.to_dense()) == 6:
                t = cand
        heavy = BitString.from_bits("111000")
        s = encode_syndrome(t, heavy)
        res = decode(t, s, TypicalErrorSet(6, 0, 1))
        assert res.status == "not_found"

    def test_soundness_whenever_unique(self):
        rng = np.random.default_rng(5)
        src = SeedSource.from_seed(6)
        tes = TypicalErrorSet(10, 0, 2)
        for _ in range(100):
            t = generate_toeplitz(9, 10, src)
            e = BitString.random(10, rng)
            s = Syndrome(hash_apply(t, e), t.matrix_id)
            res = decode(t, s, tes)
            if res.ok:
                assert hash_apply(t, res.error) == s.bits
                assert tes.contains(res.error)

    def test_cap_enforced(self):
        t = ToeplitzMatrix(4, 60, BitString.zeros(63))
        tes = TypicalErrorSet(60, 0, 30)
        assert tes.size() > DECODE_CANDIDATE_CAP
        with pytest.raises(SearchSpaceError):
            decode(t, Syndrome(BitString.zeros(4), t.matrix_id), tes)

    def test_wrong_matrix_id_rejected(self):
        rng = np.random.default_rng(7)
        t1 = ToeplitzMatrix(3, 5, BitString.random(7, rng))
        t2 = ToeplitzMatrix(3, 5, BitString.random(7, rng))
        s = encode_syndrome(t1, BitString.zeros(5))
        with pytest.raises(ValueError, match="different matrix"):
            decode(t2, s, TypicalErrorSet(5, 0, 1))

    def test_syndrome_length_checked(self):
        rng = np.random.default_rng(17)
        t = ToeplitzMatrix(4, 6, BitString.random(9, rng))
        bad = Syndrome(BitString.zeros(3), t.matrix_id)
        with pytest.raises(ValueError, match="matrix has 4 rows"):
            decode(t, bad, TypicalErrorSet(6, 0, 1))

    def test_window_dimension_checked(self):
        rng = np.random.default_rng(18)
        t = ToeplitzMatrix(4, 6, BitString.random(9, rng))
        s = encode_syndrome(t, BitString.zeros(6))
        with pytest.raises(ValueError, match="matrix has 6 cols"):
            decode(t, s, TypicalErrorSet(7, 0, 1))

    def test_hint_path_validates(self):
        rng = np.random.default_rng(8)
        t = ToeplitzMatrix(9, 12, BitString.random(20, rng))
        tes = TypicalErrorSet(12, 0, 2)
        e = BitString.zeros(12).flip(3).flip(7)
        s = encode_syndrome(t, e)
        ok = decode(t, s, tes, hint=e)
        assert ok.ok and ok.error == e
        # a hint that fails the syndrome check is refused
        bad = decode(t, s, tes, hint=BitString.zeros(12).flip(1))
        assert bad.status == "not_found"
        # a hint outside the window is refused even if the syndrome matches
        heavy_tes = TypicalErrorSet(12, 0, 1)
        refused = decode(t, s, heavy_tes, hint=e)
        assert refused.status == "not_found"


class TestReconcile:
    def test_equal_strings(self):
        rng = np.random.default_rng(9)
        a = BitString.random(16, rng)
        t = ToeplitzMatrix(10, 16, BitString.random(25, rng))
        res = reconcile(a, a, t, TypicalErrorSet(16, 0, 2))
        assert res.ok
        assert res.corrected == a
        assert res.decoded_error == BitString.zeros(16)

    def test_planted_two_bit_error_monte_carlo(self):
        rng = np.random.default_rng(10)
        src = SeedSource.from_seed(11)
        tes = TypicalErrorSet(16, 0, 2)
        rows = math.ceil(tes.log2_size()) + 8
        good = 0
        trials = 150
        for _ in range(trials):
            a = BitString.random(16, rng)
            e = BitString.zeros(16).flip(2).flip(9)
            t = generate_toeplitz(rows, 16, src)
            res = reconcile(a, a ^ e, t, tes)
            if res.ok and res.corrected == a:
                good += 1
        assert good >= trials * 0.95

    def test_error_outside_window_fails_downstream(self):
        rng = np.random.default_rng(12)
        a = BitString.random(16, rng)
        e = BitString.ones(16)  # far outside weight <= 2
        t = generate_toeplitz(14, 16, SeedSource.from_seed(13))
        res = reconcile(a, a ^ e, t, TypicalErrorSet(16, 0, 2))
        if res.ok:
            # wrong unique decode: verification must catch it
            v = verify(a, res.corrected, 16, SeedSource.from_seed(14))
            assert not v.passed
        else:
            assert res.transcript.outcome in ("not_found", "ambiguous")

    def test_transcript_record(self):
        rng = np.random.default_rng(15)
        a = BitString.random(12, rng)
        t = ToeplitzMatrix(8, 12, BitString.random(19, rng))
        res = reconcile(a, a, t, TypicalErrorSet(12, 0, 1))
        doc = json.loads(res.transcript.to_json())
        assert doc == {"n": 12, "I_ec": 8, "set_lo": 0, "set_hi": 1,
                       "outcome": "unique", "disclosed_bits": 8}


class TestVerify:
    def test_equal_always_pass(self):
        rng = np.random.default_rng(16)
        src = SeedSource.from_seed(17)
        for _ in range(50):
            a = BitString.random(24, rng)
            assert verify(a, a, 8, src).passed

    def test_unequal_rarely_pass(self):
        rng = np.random.default_rng(18)
        src = SeedSource.from_seed(19)
        passes = 0
        trials = 2000
        for _ in range(trials):
            a = BitString.random(24, rng)
            b = a.flip(int(rng.integers(0, 24)))
            if verify(a, b, 8, src).passed:
                passes += 1
        bound = 2.0 ** -8
        sigma = (bound * (1 - bound) / trials) ** 0.5
        assert passes / trials <= bound + 3 * sigma

    def test_zero_tag_bits_rejected(self):
        with pytest.raises(ValueError):
            verify(BitString.zeros(4), BitString.zeros(4), 0, SeedSource.from_seed(0))

    def test_false_pass_invariant_at_scale(self):
        # tag_bits=8 over 1e5 unequal pairs stays below 2^-8 + 3 sigma
        from streamkey.experiments import verify_false_pass_experiment

        check = verify_false_pass_experiment(64, 8, 100_000, seed=25)
        assert check.holds, (check.rate, check.threshold)


class TestReuseTrial:
    def test_single_pattern_reduces_to_decode(self):
        tes = TypicalErrorSet(10, 0, 2)
        e = BitString.zeros(10).flip(4)
        res = reuse_trial([e], tes, 12, SeedSource.from_seed(20))
        assert res.outcomes == ("unique",)
        assert not res.any_failure

    def test_identical_patterns_share_outcome(self):
        tes = TypicalErrorSet(10, 0, 2)
        e = BitString.zeros(10).flip(1).flip(5)
        res = reuse_trial([e] * 5, tes, 12, SeedSource.from_seed(21))
        assert len(set(res.outcomes)) == 1

    def test_pattern_outside_set_rejected(self):
        tes = TypicalErrorSet(10, 0, 1)
        with pytest.raises(ValueError, match="outside"):
            reuse_trial([BitString.ones(10)], tes, 12, SeedSource.from_seed(22))

    def test_union_bound_small(self):
        # any-failure frequency across committed patterns stays within the
        # union bound of the per-pattern frequency (checked at small scale
        # here, at full scale in the acceptance suite)
        tes = TypicalErrorSet(12, 0, 2)
        rng = np.random.default_rng(23)
        cands = list(tes.candidates())
        patterns = [cands[i] for i in rng.choice(len(cands), 8, replace=False)]
        src = SeedSource.from_seed(24)
        draws = 300
        any_fail = 0
        single_fail = 0
        for _ in range(draws):
            res = reuse_trial(patterns, tes, 10, src)
            any_fail += res.any_failure
            single_fail += sum(o != "unique" for o in res.outcomes)
        eps1 = single_fail / (draws * len(patterns))
        bound = len(patterns) * eps1
        sigma = (max(bound * (1 - bound), 1e-12) / draws) ** 0.5
        assert any_fail / draws <= bound + 3 * sigma + 1e-9
