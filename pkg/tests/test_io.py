import json
import math
import struct
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from radcal.elm import ErrorMatrix
from radcal.errors import (
    GapInCoverageError,
    MalformedPgmError,
    MissingInputError,
    MissingSidecarError,
    NonMonotonicWavelengthsError,
    SchemaViolationError,
)
from radcal.io import (
    SpectralCurve,
    band_average_reflectance,
    decode_pgm,
    encode_pgm,
    error_matrix_from_dict,
    error_matrix_to_dict,
    load_spectrometer_csv,
    read_error_matrix_csv,
    read_raw_image,
    read_sweep_csv,
    sidecar_path,
    write_error_matrix_csv,
    write_error_matrix_json,
    write_json,
    write_raw_image,
    write_spectrometer_csv,
    write_sweep_csv,
)
from radcal.pipeline import emit_plotdata
from radcal.radiometry import CaptureMeta, RadCalCoeffs, RawImage, VignetteModel, get_band, setting
from radcal.sensor import SweepPoint, SweepRecord

GOLDEN = Path(__file__).parent / "golden"


def tiny_image():
    meta = CaptureMeta(get_band("blue"), setting(0.315, 2.0), 120.0, RadCalCoeffs(9.72, 2e-5, 5e-5, 0.0625),
                       3, 2, VignetteModel((0.0, -2e-5, 0.0, 0.0, 0.0, 0.0), 1.5, 1.0), "targets")
    return RawImage.from_dn(np.array([[0, 1, 256], [4096, 65534, 65535]]), meta)


def tiny_matrix():
    band = get_band("green")
    return ErrorMatrix(band, [setting(0.068), setting(0.09)],
                       [setting(0.068), setting(0.09), setting(0.068, 2.0)],
                       [[0.0, 1.5, 12.25], [0.1, 0.0, np.nan]])


def tiny_sweep():
    def pt(t, g_est, w_est, w_clip, g_sig, w_sig):
        return SweepPoint(1.0, t, {"gray_target": g_est, "white_target": w_est},
                          {"gray_target": 0.0, "white_target": w_clip},
                          {"gray_target": g_sig, "white_target": w_sig}, 0.0, 1.25)
    return SweepRecord(get_band("red"), [pt(0.068, 0.23, 0.46, 0.0, 0.01, 0.02),
                                         pt(0.09, 0.2301, 0.4, 0.5, 0.013, 0.025)], 0.02)


class TestPgm:
    def test_writer_matches_golden_bytes(self, tmp_path):
        write_raw_image(tiny_image(), tmp_path / "tiny.pgm")
        assert (tmp_path / "tiny.pgm").read_bytes() == (GOLDEN / "tiny.pgm").read_bytes()
        assert (tmp_path / "tiny.pgm.meta.json").read_bytes() == (GOLDEN / "tiny.pgm.meta.json").read_bytes()

    def test_reader_on_golden(self):
        img = read_raw_image(GOLDEN / "tiny.pgm")
        np.testing.assert_array_equal(img.dn, [[0, 1, 256], [4096, 65534, 65535]])
        assert img.pixels[1, 2] == 1.0
        assert img.meta == tiny_image().meta

    def test_big_endian_sample_order(self):
        data = encode_pgm(np.array([[0x0102]]))
        assert data.endswith(b"\x01\x02")

    def test_comments_in_header(self):
        payload = struct.pack(">2H", 7, 9)
        assert decode_pgm(b"P5\n# made by hand\n2 1\n65535\n" + payload).tolist() == [[7, 9]]

    @pytest.mark.parametrize("data", [
        b"P5\n2 1\n255\n\x00\x00",
        b"P2\n2 1\n65535\n\x00\x00\x00\x00",
        b"P5\n2 1\n65535\n\x00\x00",
        b"P5\n2 1\n",
        b"P5\n2 x\n65535\n\x00\x00\x00\x00",
    ])
    def test_malformed(self, data):
        with pytest.raises(MalformedPgmError):
            decode_pgm(data)

    def test_empty_image(self):
        with pytest.raises(MalformedPgmError):
            encode_pgm(np.zeros((0, 3)))

    def test_missing_sidecar(self, tmp_path):
        (tmp_path / "a.pgm").write_bytes(encode_pgm(np.zeros((2, 2))))
        with pytest.raises(MissingSidecarError):
            read_raw_image(tmp_path / "a.pgm")

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingInputError):
            read_raw_image(tmp_path / "none.pgm")

    @pytest.mark.parametrize("mutate", [
        lambda d: d.pop("exposure_ms"),
        lambda d: d.update(shutter="rolling"),
        lambda d: d["vignette"].pop("k3"),
        lambda d: d.update(band="uv"),
        lambda d: d.update(width=4),
    ])
    def test_sidecar_schema(self, tmp_path, mutate):
        write_raw_image(tiny_image(), tmp_path / "a.pgm")
        side = sidecar_path(tmp_path / "a.pgm")
        doc = json.loads(side.read_text())
        mutate(doc)
        side.write_text(json.dumps(doc))
        with pytest.raises(SchemaViolationError):
            read_raw_image(tmp_path / "a.pgm")

    def test_object_category_defaults_to_mixed(self, tmp_path):
        write_raw_image(tiny_image(), tmp_path / "a.pgm")
        side = sidecar_path(tmp_path / "a.pgm")
        doc = json.loads(side.read_text())
        del doc["object_category"]
        side.write_text(json.dumps(doc))
        assert read_raw_image(tmp_path / "a.pgm").meta.object_category == "mixed"

    @given(arrays(np.uint16, st.tuples(st.integers(1, 12), st.integers(1, 12))))
    def test_roundtrip_is_bit_identical(self, dn):
        assert np.array_equal(decode_pgm(encode_pgm(dn)), dn)

    def test_pixels_requantize_losslessly(self, tmp_path):
        img = tiny_image()
        write_raw_image(img, tmp_path / "a.pgm")
        back = read_raw_image(tmp_path / "a.pgm")
        np.testing.assert_array_equal(back.pixels, img.pixels)


def write_curve(path, w, r):
    path.write_text("wavelength_nm,reflectance\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(w, r)))


class TestSpectrometer:
    W = np.arange(350.0, 2501.0)

    def test_well_formed_file(self, tmp_path):
        write_curve(tmp_path / "c.csv", self.W, np.linspace(0.1, 0.6, self.W.size))
        curve = load_spectrometer_csv(tmp_path / "c.csv")
        assert curve.wavelengths.size == 2151

    def test_flat_curve(self, tmp_path):
        write_curve(tmp_path / "c.csv", self.W, np.full(self.W.size, 0.30))
        curve = load_spectrometer_csv(tmp_path / "c.csv")
        assert np.all(curve.reflectance == 0.30)
        for band in ("blue", "green", "red", "rededge", "nir"):
            assert band_average_reflectance(SpectralCurve.flat(0.28), band) == pytest.approx(0.28, abs=1e-15)

    def test_duplicate_wavelength(self, tmp_path):
        w = self.W.copy()
        w[10] = w[9]
        write_curve(tmp_path / "c.csv", w, np.full(w.size, 0.3))
        with pytest.raises(NonMonotonicWavelengthsError):
            load_spectrometer_csv(tmp_path / "c.csv")

    def test_short_coverage(self, tmp_path):
        w = np.arange(400.0, 2501.0)
        write_curve(tmp_path / "c.csv", w, np.full(w.size, 0.3))
        with pytest.raises(GapInCoverageError):
            load_spectrometer_csv(tmp_path / "c.csv")

    def test_gap_inside_range(self, tmp_path):
        w = np.delete(self.W, [300, 301, 302])
        write_curve(tmp_path / "c.csv", w, np.full(w.size, 0.3))
        with pytest.raises(GapInCoverageError):
            load_spectrometer_csv(tmp_path / "c.csv")

    def test_bad_header(self, tmp_path):
        (tmp_path / "c.csv").write_text("nm,refl\n350,0.1\n")
        with pytest.raises(SchemaViolationError):
            load_spectrometer_csv(tmp_path / "c.csv")

    def test_out_of_range_reflectance(self):
        with pytest.raises(SchemaViolationError):
            SpectralCurve([500.0, 501.0], [0.2, 1.6])

    def test_linear_curve_gives_center_value(self):
        for band in ("blue", "red", "nir"):
            b = get_band(band)
            curve = SpectralCurve(self.W, 1e-4 * self.W)
            assert band_average_reflectance(curve, b) == pytest.approx(1e-4 * b.center_wavelength, rel=1e-12)

    def test_constructed_fixture_for_blue(self):
        # 0.53 on average over 465-485 nm with a symmetric tilt and unrelated values elsewhere
        r = np.where(self.W < 465, 0.1, np.where(self.W > 485, 0.9, 0.53 + 0.004 * (self.W - 475)))
        assert band_average_reflectance(SpectralCurve(self.W, r), "blue") == pytest.approx(0.53, abs=1e-9)

    def test_interval_is_closed(self):
        r = np.zeros(self.W.size)
        r[(self.W == 465) | (self.W == 485)] = 1.0
        assert band_average_reflectance(SpectralCurve(self.W, r), "blue") == pytest.approx(2 / 21, rel=1e-15)

    def test_band_not_covered(self):
        curve = SpectralCurve(np.arange(500.0, 600.0), np.full(100, 0.2))
        with pytest.raises(GapInCoverageError):
            band_average_reflectance(curve, "blue")

    @given(arrays(float, 2151, elements=st.floats(0.0, 1.0)), st.floats(0.0, 0.4))
    def test_monotone(self, r, bump):
        base = SpectralCurve(self.W, r)
        higher = SpectralCurve(self.W, r + bump)
        for band in ("green", "nir"):
            assert band_average_reflectance(higher, band) >= band_average_reflectance(base, band)

    def test_csv_roundtrip(self, tmp_path, rng):
        curve = SpectralCurve(self.W, rng.uniform(0, 1, self.W.size))
        write_spectrometer_csv(curve, tmp_path / "c.csv")
        back = load_spectrometer_csv(tmp_path / "c.csv")
        np.testing.assert_array_equal(back.reflectance, curve.reflectance)
        np.testing.assert_array_equal(back.wavelengths, curve.wavelengths)


class TestReports:
    def test_matrix_csv_golden_and_roundtrip(self, tmp_path):
        write_error_matrix_csv(tiny_matrix(), tmp_path / "m.csv")
        assert (tmp_path / "m.csv").read_bytes() == (GOLDEN / "tiny_matrix.csv").read_bytes()
        back = read_error_matrix_csv(tmp_path / "m.csv", "green")
        assert back.reference_axis == tiny_matrix().reference_axis
        assert back.target_axis == tiny_matrix().target_axis
        np.testing.assert_array_equal(back.cells, tiny_matrix().cells)

    def test_matrix_json_roundtrip(self, tmp_path):
        write_error_matrix_json(tiny_matrix(), tmp_path / "m.json")
        doc = json.loads((tmp_path / "m.json").read_text())
        assert doc["cells"][1][2] is None
        back = error_matrix_from_dict(doc)
        np.testing.assert_array_equal(back.cells, tiny_matrix().cells)
        assert error_matrix_to_dict(back)["band"] == "green"

    def test_sweep_csv_golden_and_roundtrip(self, tmp_path):
        write_sweep_csv(tiny_sweep(), tmp_path / "s.csv")
        assert (tmp_path / "s.csv").read_bytes() == (GOLDEN / "tiny_sweep.csv").read_bytes()
        back = read_sweep_csv(tmp_path / "s.csv", 0.02)
        assert back.points == tiny_sweep().points

    def test_plotdata_golden_and_row_order(self, tmp_path):
        emit_plotdata([tiny_sweep(), tiny_matrix()], tmp_path / "p.csv")
        assert (tmp_path / "p.csv").read_bytes() == (GOLDEN / "tiny_plotdata.csv").read_bytes()

    def test_plotdata_empty_is_header_only(self, tmp_path):
        emit_plotdata([], tmp_path / "p.csv")
        assert (tmp_path / "p.csv").read_text() == "kind,band,gain,exposure_ms,series,value\n"

    def test_json_writer_is_deterministic_and_sorted(self, tmp_path):
        write_json({"b": 1.0, "a": [np.float64(0.1), math.nan]}, tmp_path / "a.json")
        write_json({"a": [0.1, None], "b": 1.0}, tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=8))
    def test_float_text_roundtrip(self, values):
        import tempfile
        with tempfile.TemporaryDirectory() as d:
            m = ErrorMatrix(get_band("red"), [setting(0.1)],
                            [setting(0.1 * (i + 1)) for i in range(len(values))],
                            [[abs(v) for v in values]])
            write_error_matrix_csv(m, Path(d) / "m.csv")
            back = read_error_matrix_csv(Path(d) / "m.csv", "red")
            np.testing.assert_array_equal(back.cells, m.cells)
