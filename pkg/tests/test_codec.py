"""Unit tests for codebooks, decoding, quantization and binary export."""
import numpy as np
import pytest

from distcomm.codec import (Codebook, CodecParams, DecodeOutcome, ErasureReason,
                            Quantizer, codeword_count, continuity_margin,
                            decode_conditional, decode_nearest_typical, encode,
                            export_codebook, generate_codebook,
                            generate_codebook_conditional, import_codebook,
                            quantize_sequence, restricted_set, typical_mask)
from distcomm.prob import (CondPmf, Pmf, average_distortion, empirical_type,
                           hamming_distortion)
from distcomm.streams import derive_rng

UNIFORM2 = Pmf(np.array([0.5, 0.5]))
HAM2 = hamming_distortion(2)


class TestCodewordCount:
    def test_integer_snap(self):
        assert codeword_count(200, 0.05) == 1024
        assert codeword_count(400, 0.035) == 16384

    def test_floor(self):
        assert codeword_count(10, 0.33) == 9  # 2^3.3 = 9.84...

    def test_minimum_two(self):
        assert codeword_count(10, 0.0) == 2
        assert codeword_count(4, 0.1) == 2

    def test_params_validation(self):
        with pytest.raises(ValueError):
            CodecParams(n=0, rate=0.1, eps=0.1, target_d=0.2, seed=1)
        with pytest.raises(ValueError):
            CodecParams(n=10, rate=-0.1, eps=0.1, target_d=0.2, seed=1)
        with pytest.raises(ValueError):
            CodecParams(n=10, rate=0.1, eps=-0.1, target_d=0.2, seed=1)

    def test_memory_cap(self):
        params = CodecParams(n=1000, rate=0.05, eps=0.1, target_d=0.2, seed=1)
        with pytest.raises(ValueError):
            generate_codebook(UNIFORM2, params)


class TestGeneration:
    PARAMS = CodecParams(n=100, rate=0.05, eps=0.1, target_d=0.25, seed=99)

    def test_shape(self):
        cb = generate_codebook(UNIFORM2, self.PARAMS)
        assert cb.codewords.shape == (32, 100)

    def test_deterministic_per_seed_and_block(self):
        a = generate_codebook(UNIFORM2, self.PARAMS, block_index=3)
        b = generate_codebook(UNIFORM2, self.PARAMS, block_index=3)
        c = generate_codebook(UNIFORM2, self.PARAMS, block_index=4)
        assert np.array_equal(a.codewords, b.codewords)
        assert not np.array_equal(a.codewords, c.codewords)

    def test_symbol_frequencies(self):
        p = Pmf(np.array([0.2, 0.8]))
        params = CodecParams(n=500, rate=0.02, eps=0.1, target_d=0.25, seed=7)
        cb = generate_codebook(p, params)
        freq = (cb.codewords == 1).mean()
        assert abs(freq - 0.8) < 0.01

    def test_conditional_rows_follow_coverstory(self):
        rows = CondPmf(np.array([[1.0, 0.0], [0.0, 1.0]]))
        v = np.array([0, 1] * 50)
        cb = generate_codebook_conditional(rows, v, self.PARAMS)
        assert np.array_equal(cb.codewords[:, 0], np.zeros(32))
        assert np.array_equal(cb.codewords[:, 1], np.ones(32))

    def test_conditional_length_mismatch(self):
        rows = CondPmf(np.array([[0.5, 0.5], [0.5, 0.5]]))
        with pytest.raises(ValueError):
            generate_codebook_conditional(rows, [0, 1], self.PARAMS)


def _manual_codebook(words, eps=0.25, target_d=0.25):
    words = np.asarray(words, dtype=np.int64)
    params = CodecParams(n=words.shape[1], rate=1.0, eps=eps,
                         target_d=target_d, seed=0)
    return Codebook(codewords=words, params=params, source=UNIFORM2)


class TestDecoding:
    def test_unique_candidate_decoded(self):
        cb = _manual_codebook([[0, 0, 1, 1], [1, 1, 1, 1]], eps=0.25)
        out = decode_nearest_typical(cb, UNIFORM2, 0.25, 0.25, HAM2,
                                     [0, 0, 1, 0])
        assert out == DecodeOutcome.decoded(0)

    def test_no_candidate(self):
        cb = _manual_codebook([[0, 0, 1, 1], [1, 1, 0, 0]], eps=0.25)
        out = decode_nearest_typical(cb, UNIFORM2, 0.25, 0.0, HAM2,
                                     [0, 1, 0, 1])
        assert out.erasure == ErasureReason.NO_CANDIDATE

    def test_ambiguous(self):
        cb = _manual_codebook([[0, 0, 1, 1], [0, 1, 0, 1]], eps=0.25)
        out = decode_nearest_typical(cb, UNIFORM2, 0.25, 0.5, HAM2,
                                     [0, 0, 1, 1])
        assert out.erasure == ErasureReason.AMBIGUOUS

    def test_atypical_codewords_excluded(self):
        # second codeword matches y exactly but has an atypical all-ones type
        cb = _manual_codebook([[0, 0, 1, 1], [1, 1, 1, 1]], eps=0.25)
        out = decode_nearest_typical(cb, UNIFORM2, 0.25, 0.25, HAM2,
                                     [1, 1, 1, 1])
        assert out.erasure == ErasureReason.NO_CANDIDATE

    def test_restricted_set(self):
        cb = _manual_codebook([[0, 0, 1, 1], [1, 1, 1, 1], [0, 1, 0, 1]])
        assert np.array_equal(restricted_set(cb, UNIFORM2, 0.25), [0, 2])

    def test_threshold_monotonicity(self):
        # growing the threshold can only move Decoded to Decoded-or-Ambiguous
        rng = derive_rng(5)
        params = CodecParams(n=60, rate=0.1, eps=0.15, target_d=0.2, seed=11)
        for trial in range(20):
            cb = generate_codebook(UNIFORM2, params, block_index=trial)
            y = rng.integers(0, 2, 60)
            lo = decode_nearest_typical(cb, UNIFORM2, 0.15, 0.2, HAM2, y)
            hi = decode_nearest_typical(cb, UNIFORM2, 0.15, 0.35, HAM2, y)
            if lo.is_decoded:
                assert (hi == lo) or hi.erasure == ErasureReason.AMBIGUOUS

    def test_encode_bounds(self):
        cb = _manual_codebook([[0, 1], [1, 0]])
        assert np.array_equal(encode(cb, 1), [1, 0])
        with pytest.raises(ValueError):
            encode(cb, 2)

    def test_outcome_label(self):
        assert DecodeOutcome.decoded(17).label() == "decoded:17"
        assert DecodeOutcome.erased(
            ErasureReason.AMBIGUOUS).label() == "erasure:ambiguous"

    def test_outcome_exclusive(self):
        with pytest.raises(ValueError):
            DecodeOutcome(message=1, erasure=ErasureReason.AMBIGUOUS)


class TestConditionalDecoding:
    ROWS = CondPmf(np.array([[0.9, 0.1], [0.2, 0.8]]))
    P_V = Pmf(np.array([0.5, 0.5]))

    def _setup(self, v):
        params = CodecParams(n=len(v), rate=0.1, eps=0.15, target_d=0.25,
                             seed=3)
        cb = generate_codebook_conditional(self.ROWS, v, params)
        return cb, self.ROWS.joint_with(self.P_V)

    def test_coverstory_mismatch_raises(self):
        v = np.array([0, 1] * 30)
        cb, p_vx = self._setup(v)
        with pytest.raises(ValueError):
            decode_conditional(cb, p_vx, 0.15, 0.25, HAM2, 1 - v, v)

    def test_atypical_coverstory_erases(self):
        v = np.zeros(60, dtype=np.int64)  # all-zero coverstory, far from 1/2
        cb, p_vx = self._setup(v)
        out = decode_conditional(cb, p_vx, 0.15, 0.25, HAM2, v,
                                 cb.codewords[0])
        assert out.erasure == ErasureReason.TRANSMITTER_ATYPICAL

    def test_clean_channel_roundtrip(self):
        # threshold well below the mean inter-codeword distance (~0.25), so
        # the transmitted word at distance 0 is the unique candidate
        v = np.array([0, 1] * 30)
        cb, p_vx = self._setup(v)
        decoded = 0
        for m in range(cb.codewords.shape[0]):
            out = decode_conditional(cb, p_vx, 0.15, 0.1, HAM2, v,
                                     cb.codewords[m])
            if out == DecodeOutcome.decoded(m):
                decoded += 1
        assert decoded >= cb.codewords.shape[0] // 2


class TestQuantizer:
    Q = Quantizer(delta=0.25, lo=0.0, hi=1.0)

    def test_cells_and_centers(self):
        assert self.Q.n_cells == 4
        assert np.allclose(self.Q.centers, [0.125, 0.375, 0.625, 0.875])

    def test_half_open_cells(self):
        assert quantize_sequence(self.Q, [0.0])[0] == 0
        assert quantize_sequence(self.Q, [0.26])[0] == 1
        assert quantize_sequence(self.Q, [1.0])[0] == 3  # top folds down

    def test_out_of_support_rejected(self):
        with pytest.raises(ValueError):
            quantize_sequence(self.Q, [1.1])

    def test_cell_pmf_uniform(self):
        assert np.allclose(self.Q.cell_pmf().mass, 0.25)

    def test_distortion_matrix_families(self):
        dm = self.Q.distortion_matrix("squared_error")
        assert dm.d[0, 1] == pytest.approx(0.0625)
        dm = self.Q.distortion_matrix("absolute_error")
        assert dm.d[0, 3] == pytest.approx(0.75)
        with pytest.raises(ValueError):
            self.Q.distortion_matrix("hinge")


class TestContinuityMargin:
    def test_squared_error_value(self):
        assert continuity_margin("squared_error", 0.1, 1.0) == pytest.approx(0.21)

    def test_absolute_error_value(self):
        assert continuity_margin("absolute_error", 0.1, 1.0) == pytest.approx(0.1)

    def test_vanishes_with_delta(self):
        assert continuity_margin("squared_error", 1e-9, 1.0) < 1e-8

    def test_quantized_distortion_bounded(self):
        # quantized pairwise distortion never exceeds the real one plus margin
        q = Quantizer(delta=0.05, lo=0.0, hi=1.0)
        rng = derive_rng(12)
        a = rng.random(100_000)
        b = rng.random(100_000)
        ia = quantize_sequence(q, a)
        ib = quantize_sequence(q, b)
        for kind in ("squared_error", "absolute_error"):
            dm = q.distortion_matrix(kind).d
            if kind == "squared_error":
                real = float(np.mean((a - b) ** 2))
            else:
                real = float(np.mean(np.abs(a - b)))
            quantized = float(dm[ia, ib].mean())
            assert quantized <= real + continuity_margin(kind, 0.05, 1.0)


class TestExportImport:
    def test_roundtrip(self, tmp_path):
        params = CodecParams(n=64, rate=0.1, eps=0.1, target_d=0.25, seed=21)
        cb = generate_codebook(UNIFORM2, params)
        path = tmp_path / "book.bin"
        export_codebook(cb, path)
        back = import_codebook(path)
        assert np.array_equal(back.codewords, cb.codewords)
        assert back.params == cb.params

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"\x00" * 80)
        with pytest.raises(ValueError):
            import_codebook(path)

    def test_rejects_truncation(self, tmp_path):
        params = CodecParams(n=64, rate=0.1, eps=0.1, target_d=0.25, seed=21)
        cb = generate_codebook(UNIFORM2, params)
        path = tmp_path / "book.bin"
        export_codebook(cb, path)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(ValueError):
            import_codebook(path)
