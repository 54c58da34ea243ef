import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scmakit import bicm
from scmakit import constellation as cst
from scmakit import scma
from scmakit.errors import InvalidConfig, LengthMismatch
from scmakit.rng import stream

def _rotated(name):
    # with unit gains, identical user constellations superimpose symmetrically
    # and are not separable; distinct per-user phases make AWGN decodable
    s = scma.SystemConfig.canonical(cst.builtin(name))
    return s.with_rotations([cst.phase_rotation(k * math.pi / 12, k * math.pi / 7) for k in range(s.K)])


CODECS = [bicm.identity_codec(), bicm.repetition_codec(3), bicm.repetition_codec(1)]


class TestInterleaver:
    def test_identity_permutation(self):
        plan = bicm.make_plan(12, 2, None)
        bits = np.arange(12) % 2
        npt.assert_array_equal(bicm.interleave(bits, plan), bits)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 300))
    def test_round_trip(self, seed, n):
        plan = bicm.make_plan(2 * n, 2, seed)
        x = np.random.default_rng(seed).normal(size=(3, 2 * n))
        npt.assert_array_equal(bicm.deinterleave(bicm.interleave(x, plan), plan), x)

    def test_seeded_reproducible(self):
        a = bicm.make_plan(120, 2, 9).permutation
        npt.assert_array_equal(a, bicm.make_plan(120, 2, 9).permutation)
        assert not np.array_equal(a, bicm.make_plan(120, 2, 10).permutation)

    def test_bijective_up_to_4096(self):
        for n in range(1, 4097):
            p = bicm.make_plan(n, 1, n).permutation
            assert np.array_equal(np.bincount(p, minlength=n), np.ones(n, dtype=np.int64)), n

    def test_length_checks(self):
        plan = bicm.make_plan(8, 2, 0)
        with pytest.raises(LengthMismatch):
            bicm.interleave(np.zeros(6), plan)
        with pytest.raises(LengthMismatch):
            bicm.deinterleave(np.zeros(10), plan)
        with pytest.raises(LengthMismatch):
            bicm.make_plan(9, 2, 0)
        with pytest.raises(InvalidConfig):
            bicm.FramePlan(4, 2, [0, 0, 1, 2])


class TestSegment:
    def test_big_endian(self):
        npt.assert_array_equal(bicm.segment([1, 1, 0, 1], 2), [3, 1])

    def test_long_frame(self):
        assert bicm.segment(np.zeros(2028, dtype=int), 4).shape == (507,)
        assert bicm.make_plan(2028, 4, 0).n_cu == 507

    def test_length_check(self):
        with pytest.raises(LengthMismatch):
            bicm.segment([1, 0, 1], 2)

    @given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 4]))
    def test_round_trip_with_hard_llrs(self, seed, L):
        bits = np.random.default_rng(seed).integers(0, 2, 8 * L)
        labels = bicm.segment(bits, L)
        shifts = np.arange(L - 1, -1, -1)
        blocks = np.where((labels[:, None] >> shifts) & 1, -np.inf, np.inf)
        npt.assert_array_equal(bicm.assemble(blocks) < 0, bits.astype(bool))


class TestCodecs:
    @pytest.mark.parametrize("codec", CODECS, ids=lambda c: str(c.spec()))
    @given(data=st.data())
    def test_decode_inverts_encode(self, codec, data):
        m = np.array(data.draw(st.lists(st.integers(0, 1), min_size=1, max_size=64)), dtype=np.int8)
        c = codec.encode(m)
        assert c.shape[-1] == round(len(m) / codec.rate)
        npt.assert_array_equal(codec.decode(np.where(c == 1, -np.inf, np.inf)), m)

    def test_repetition_sums_copies(self):
        assert bicm.repetition_codec(3).decode(np.array([2.0, -1.0, 3.0]))[0] == 0
        assert bicm.repetition_codec(3).decode(np.array([2.0, -4.0, 1.0]))[0] == 1

    def test_rates(self):
        assert bicm.identity_codec().rate == 1
        assert bicm.repetition_codec(3).rate == pytest.approx(1 / 3)
        with pytest.raises(InvalidConfig):
            bicm.repetition_codec(3).message_length(100)
        with pytest.raises(InvalidConfig):
            bicm.repetition_codec(0)

    def test_specs(self):
        assert isinstance(bicm.codec_from_spec({"type": "identity"}), bicm.IdentityCodec)
        assert bicm.codec_from_spec({"type": "repetition", "n": 5}).n == 5
        with pytest.raises(InvalidConfig):
            bicm.codec_from_spec({"type": "turbo"})


class TestFrames:
    def test_awgn_high_snr_error_free(self):
        s = _rotated("4-LDS")
        o = bicm.run_coded_frames(bicm.identity_codec(), bicm.make_plan(120, 2, 1), s, "awgn", 60.0, stream(0), 100)
        assert o.bit_errors.sum() == 0 and o.frame_errors.sum() == 0

    @pytest.mark.parametrize("name", cst.BUILTIN_NAMES)
    @pytest.mark.parametrize("codec", CODECS, ids=lambda c: str(c.spec()))
    def test_noiseless_round_trip(self, name, codec):
        s = _rotated(name)
        n_c = 120 if s.M == 4 else 240
        plan = bicm.make_plan(n_c, s.bits_per_symbol, 2)
        o = bicm.run_coded_frames(codec, plan, s, "awgn", math.inf, stream(1), 5)
        assert o.bit_errors.sum() == 0 and o.symbol_errors.sum() == 0

    def test_unrotated_awgn_is_ambiguous(self):
        s = scma.SystemConfig.canonical(cst.builtin("4-LDS"))
        o = bicm.run_coded_frames(bicm.identity_codec(), bicm.make_plan(120, 2, 1), s, "awgn", math.inf, stream(0), 5)
        assert o.bit_errors.sum() > 0

    def test_noiseless_fading_round_trip(self):
        s = scma.SystemConfig.canonical(cst.builtin("4-LDS"))
        o = bicm.run_coded_frames(bicm.identity_codec(), bicm.make_plan(120, 2, 1), s, "ffic", math.inf, stream(0), 20)
        assert o.bit_errors.sum() == 0

    def test_per_user_outcome(self):
        s = scma.SystemConfig.canonical(cst.builtin("T4QAM"))
        plan = bicm.make_plan(120, 2, 3)
        o = bicm.run_coded_frame(bicm.repetition_codec(3), plan, s, "ffic", 2.0, seed=4)
        assert o.bit_errors.shape == o.frame_errors.shape == (1, 6)
        assert o.message_length == 40 and o.n_cu == 60
        again = bicm.run_coded_frame(bicm.repetition_codec(3), plan, s, "ffic", 2.0, seed=4)
        npt.assert_array_equal(o.bit_errors, again.bit_errors)

    def test_rejects_uncoded_case(self):
        s = scma.SystemConfig.canonical(cst.builtin("T4QAM"))
        with pytest.raises(InvalidConfig):
            bicm.run_coded_frame(bicm.identity_codec(), bicm.make_plan(120, 2), s, "fic", 5.0, 0)

    def test_rejects_plan_mismatch(self):
        s = scma.SystemConfig.canonical(cst.builtin("16HQAM"))
        with pytest.raises(InvalidConfig):
            bicm.run_coded_frame(bicm.identity_codec(), bicm.make_plan(120, 2), s, "ffic", 5.0, 0)

    def test_chunked_detection_is_transparent(self):
        s = scma.SystemConfig.canonical(cst.builtin("T4QAM"))
        rng = np.random.default_rng(0)
        y = rng.normal(size=(100, 4)) + 1j * rng.normal(size=(100, 4))
        h = rng.normal(size=(100, 6, 4)) + 1j * rng.normal(size=(100, 6, 4))
        a = bicm.detect_chunked(y, h, s, 0.5, chunk=7)
        b = bicm.detect_chunked(y, h, s, 0.5, chunk=4096)
        npt.assert_array_equal(a[0], b[0])
        npt.assert_array_equal(a[1], b[1])
