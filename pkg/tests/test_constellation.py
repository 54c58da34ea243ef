import json
import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scmakit import constellation as cst
from scmakit import kpi
from scmakit.errors import InvariantViolation, NotUnitary, ParseError, UnknownName, UnsupportedSize, ZeroEnergy

TABLE_I = np.array([[1, 0], [0, 1j], [0, -1j], [-1, 0]])


def _make(points, name="x"):
    points = np.asarray(points, dtype=np.complex128)
    return cst.MultiDimConstellation(name, points, np.arange(len(points)))


class TestEnergy:
    def test_table_i_unit_energy(self):
        assert cst.average_energy(_make(TABLE_I)) == pytest.approx(1.0, abs=1e-15)

    def test_zero_point(self):
        assert cst.average_energy(_make([[0, 0]])) == 0.0

    def test_constant_norm(self):
        c = _make([[1, 1], [1, -1], [-1, 1], [-1, -1]])
        assert cst.average_energy(c) == 2.0

    def test_normalize_table_i_unchanged(self):
        c = cst.normalize_energy(_make(TABLE_I))
        npt.assert_allclose(c.points, TABLE_I, atol=1e-15)

    def test_normalize_scaled(self):
        c = cst.normalize_energy(_make(TABLE_I * 3))
        npt.assert_allclose(c.points, TABLE_I, atol=1e-15)
        assert abs(cst.average_energy(c) - 1) <= 1e-12

    def test_repetition_qpsk_already_unit(self):
        h = 0.5
        pts = [[complex(a, b)] * 2 for a in (h, -h) for b in (h, -h)]
        assert cst.average_energy(_make(pts)) == pytest.approx(1.0, abs=1e-15)

    def test_zero_energy_rejected(self):
        with pytest.raises(ZeroEnergy):
            cst.normalize_energy(_make([[0, 0]]))

    @given(st.floats(0.01, 100), st.integers(0, 2**32 - 1))
    def test_normalize_any_scale(self, s, seed):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(8, 3)) + 1j * rng.normal(size=(8, 3))
        c = cst.normalize_energy(_make(pts * s))
        assert abs(cst.average_energy(c) - 1) <= 1e-12


class TestGenerators:
    def test_lds_label_11(self):
        c = cst.generate_lds(4, 2)
        npt.assert_allclose(c.point_of(0b11), [-0.5 - 0.5j, -0.5 - 0.5j], atol=1e-15)

    def test_lds_dv1_is_qpsk(self):
        c = cst.generate_lds(4, 1)
        npt.assert_allclose(np.abs(c.points[:, 0]), 1.0, atol=1e-15)
        assert kpi.gray_check(c)
        assert kpi.euclidean_min(c)[0] == pytest.approx(2.0)

    def test_16lds_kpis(self):
        r = cst.generate_lds(16, 2)
        rep = kpi.report(r)
        npt.assert_allclose(rep.as_tuple()[:6], (0.4, 3, 0.04, 3, 2, 16), atol=1e-9)

    @pytest.mark.parametrize("M,dv", [(4, 1), (4, 2), (4, 3), (16, 1), (16, 2)])
    def test_lds_identical_projections(self, M, dv):
        c = cst.generate_lds(M, dv)
        for j in range(1, dv):
            npt.assert_allclose(c.points[:, j], c.points[:, 0], atol=1e-15)
        assert abs(cst.average_energy(c) - 1) <= 1e-12

    def test_lds_non_square_rejected(self):
        with pytest.raises(UnsupportedSize):
            cst.generate_lds(8, 2)

    def test_hypercube_16(self):
        c = cst.generate_hypercube(16, 2)
        assert c.name == "16HQAM"
        npt.assert_allclose(kpi.report(c).as_tuple()[:6], (1, 4, 1, 8, 1, 4), atol=1e-9)
        assert kpi.distinct_points(c) == 4

    def test_hypercube_dv1_is_qpsk(self):
        c = cst.generate_hypercube(4, 1)
        npt.assert_allclose(np.abs(c.points[:, 0]), 1.0, atol=1e-15)

    def test_hypercube_size_checked(self):
        with pytest.raises(UnsupportedSize):
            cst.generate_hypercube(16, 3)


class TestBuiltins:
    def test_names(self):
        assert set(cst.BUILTIN_NAMES) == {"T4QAM", "4LQAM", "4CQAM", "4-LDS", "16-LDS", "16HQAM"}

    def test_unknown(self):
        with pytest.raises(UnknownName):
            cst.builtin("8PSK")

    def test_4cqam_is_table_i(self):
        c = cst.builtin("4CQAM")
        npt.assert_array_equal(c.point_of(0b01), [0, 1j])
        npt.assert_array_equal(c.table, TABLE_I)

    def test_t4qam_label_11(self):
        c = cst.builtin("T4QAM")
        npt.assert_allclose(c.point_of(0b11), [-3 / math.sqrt(10), -1 / math.sqrt(10)], atol=1e-15)
        assert np.all(c.points.imag == 0)

    def test_t4qam_report(self):
        assert kpi.report(cst.builtin("T4QAM")).as_tuple() == pytest.approx((2, 2, 0.64, 2, 2, 4, True), abs=1e-9)

    def test_4lqam_shared_projection(self):
        # labels 00 and 01 share the first-dimension value
        c = cst.builtin("4LQAM")
        assert c.point_of(0b00)[0] == c.point_of(0b01)[0]
        assert c.point_of(0b00)[0].real == pytest.approx(-math.sqrt(2) / 2)

    @pytest.mark.parametrize("name", cst.BUILTIN_NAMES)
    def test_unit_energy_and_label_bijection(self, name):
        c = cst.builtin(name)
        assert abs(cst.average_energy(c) - 1) <= 1e-12
        for lab in range(c.M):
            assert c.label_of(c.point_of(lab)) == lab


class TestInvariants:
    def test_not_power_of_two(self):
        with pytest.raises(InvariantViolation) as e:
            _make([[1], [2], [3]])
        assert e.value.invariant == "power_of_two"

    def test_labels_must_permute(self):
        with pytest.raises(InvariantViolation) as e:
            cst.MultiDimConstellation("x", [[1], [-1]], [0, 0])
        assert e.value.invariant == "label_permutation"

    def test_duplicate_points(self):
        with pytest.raises(InvariantViolation) as e:
            cst.validate(cst.normalize_energy(_make([[1], [1]])))
        assert e.value.invariant == "distinct_points"

    def test_non_finite(self):
        with pytest.raises(InvariantViolation):
            _make([[np.nan], [1]])

    def test_label_bits_msb_first(self):
        bits = cst.builtin("16HQAM").label_bits()
        npt.assert_array_equal(bits[0b1011], [1, 0, 1, 1])

    def test_immutable(self):
        c = cst.builtin("T4QAM")
        with pytest.raises(ValueError):
            c.points[0, 0] = 0


class TestRotation:
    def test_identity(self):
        c = cst.builtin("4CQAM")
        npt.assert_array_equal(cst.apply_rotation(c, [1, 1]).points, c.points)

    def test_quarter_turn_keeps_distance(self):
        c = cst.apply_rotation(cst.builtin("4CQAM"), cst.phase_rotation(math.pi / 2, 0))
        assert kpi.euclidean_min(c)[0] == pytest.approx(2.0, abs=1e-12)

    def test_pscma_style_rotation_keeps_report(self):
        c = cst.builtin("4-LDS")
        r = cst.apply_rotation(c, cst.phase_rotation(0, math.pi / 2))
        a, b = kpi.report(c), kpi.report(r)
        npt.assert_allclose(a.as_tuple()[:6], b.as_tuple()[:6], atol=1e-9)
        assert a.gray == b.gray

    def test_not_unitary(self):
        with pytest.raises(NotUnitary):
            cst.apply_rotation(cst.builtin("T4QAM"), [[1, 1], [0, 1]])
        with pytest.raises(NotUnitary):
            cst.apply_rotation(cst.builtin("T4QAM"), [2, 1])

    @given(st.integers(0, 2**32 - 1), st.sampled_from(cst.BUILTIN_NAMES))
    def test_random_unitary_preserves_distances(self, seed, name):
        c = cst.builtin(name)
        rng = np.random.default_rng(seed)
        q, _ = np.linalg.qr(rng.normal(size=(c.dv, c.dv)) + 1j * rng.normal(size=(c.dv, c.dv)))
        r = cst.apply_rotation(c, q)
        d0 = np.linalg.norm(c.points[:, None] - c.points[None], axis=2)
        d1 = np.linalg.norm(r.points[:, None] - r.points[None], axis=2)
        npt.assert_allclose(d1, d0, atol=1e-9)
        assert abs(cst.average_energy(r) - 1) <= 1e-12

    @given(st.integers(0, 2**32 - 1), st.sampled_from(cst.BUILTIN_NAMES))
    def test_phase_rotation_preserves_product_distances(self, seed, name):
        c = cst.builtin(name)
        ang = np.random.default_rng(seed).uniform(0, 2 * np.pi, c.dv)
        r = cst.apply_rotation(c, cst.phase_rotation(*ang))
        p0 = np.abs(c.points[:, None] - c.points[None]).prod(axis=2)
        p1 = np.abs(r.points[:, None] - r.points[None]).prod(axis=2)
        npt.assert_allclose(p1, p0, atol=1e-9)


class TestFiles:
    @pytest.mark.parametrize("name", cst.BUILTIN_NAMES)
    def test_round_trip(self, name, tmp_path):
        c = cst.builtin(name)
        path = tmp_path / "c.json"
        cst.save(c, path)
        back = cst.load(path)
        npt.assert_allclose(back.points, c.points, atol=1e-15, rtol=0)
        npt.assert_array_equal(back.labels, c.labels)
        assert kpi.report(back) == kpi.report(c)

    def test_rejects_nan(self):
        doc = cst.dumps(cst.builtin("T4QAM")).replace("0.94868329805051377", "NaN", 1)
        with pytest.raises(ParseError):
            cst.loads(doc)

    def test_rejects_garbage(self):
        with pytest.raises(ParseError):
            cst.loads("{not json")
        with pytest.raises(ParseError):
            cst.loads("[1, 2]")

    def test_unnormalized_file_is_normalized(self):
        doc = cst.to_dict(cst.builtin("4CQAM").scaled(5))
        c = cst.from_dict(doc)
        assert abs(cst.average_energy(c) - 1) <= 1e-12

    def test_named_invariant_on_bad_file(self):
        doc = cst.to_dict(cst.builtin("4CQAM"))
        doc["points"][1] = doc["points"][0]
        with pytest.raises(InvariantViolation) as e:
            cst.from_dict(doc)
        assert e.value.invariant == "distinct_points"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            cst.load(tmp_path / "missing.json")

    def test_resolve_data_dir(self, tmp_path, monkeypatch):
        cst.save(cst.builtin("T4QAM").renamed("mine"), tmp_path / "mine.json")
        monkeypatch.setenv(cst.DATA_ENV, str(tmp_path))
        assert cst.resolve("mine.json").name == "mine"
        with pytest.raises(UnknownName):
            cst.resolve("nothing-here")

    def test_writer_precision(self):
        doc = json.loads(cst.dumps(cst.builtin("T4QAM")))
        assert doc["points"][0][0][0] == 3 / math.sqrt(10)
