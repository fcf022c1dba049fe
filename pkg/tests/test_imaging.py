import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lightattack.imaging import (
    Image,
    Image8,
    MalformedHeader,
    NonDivisibleDimensions,
    TruncatedData,
    UnsupportedMaxval,
    dequantize,
    downsample_box,
    quantize,
    read_ppm,
    write_ppm,
)
from lightattack.prng import uniform_array


def gray(value, h=2, w=2):
    return Image(np.full((h, w, 3), value, dtype=np.float64))


class TestQuantize:
    def test_zero(self):
        assert quantize(gray(0.0)).data.max() == 0

    def test_one(self):
        assert quantize(gray(1.0)).data.min() == 255

    def test_half_rounds_away_from_zero(self):
        # 0.5 * 255 = 127.5 exactly; ties go away from zero
        assert quantize(gray(0.5)).data[0, 0, 0] == 128

    def test_known_boundaries(self):
        # expected bytes computed via exact rational arithmetic:
        # round_half_up(k/510 * 255) = round_half_up(k/2)
        img = Image(np.array([[[1 / 510, 3 / 510, 5 / 510]]]))
        assert list(quantize(img).data[0, 0]) == [1, 2, 3]

    def test_dequantize_endpoints(self):
        img8 = Image8(np.array([[[0, 255, 128]]], dtype=np.uint8))
        assert dequantize(img8).data[0, 0, 0] == 0.0
        assert dequantize(img8).data[0, 0, 1] == 1.0

    def test_round_trip_exhaustive(self):
        all_bytes = np.arange(256, dtype=np.uint8)
        img8 = Image8(np.stack([all_bytes] * 3, axis=-1).reshape(16, 16, 3))
        assert np.array_equal(quantize(dequantize(img8)).data, img8.data)


class TestDownsample:
    def test_constant_image(self):
        out = downsample_box(gray(0.3), 1, 1)
        assert out.data.shape == (1, 1, 3)
        assert np.allclose(out.data, 0.3)

    def test_symmetric_average(self):
        data = np.zeros((2, 2, 3))
        data[0, 0, 0] = 0.0
        data[0, 1, 0] = 0.0
        data[1, 0, 0] = 1.0
        data[1, 1, 0] = 1.0
        out = downsample_box(Image(data), 1, 1)
        assert out.data[0, 0, 0] == 0.5

    def test_matches_naive_double_loop(self):
        data = uniform_array(77, 64 * 64 * 3).reshape(64, 64, 3)
        img = Image(data)
        out = downsample_box(img, 32, 32)
        for i in range(32):
            for j in range(32):
                block = data[2 * i : 2 * i + 2, 2 * j : 2 * j + 2]
                expected = block.reshape(4, 3).mean(axis=0)
                assert np.allclose(out.data[i, j], expected, atol=1e-15)

    def test_preserves_global_mean(self):
        data = uniform_array(123, 64 * 64 * 3).reshape(64, 64, 3)
        out = downsample_box(Image(data), 16, 16)
        for c in range(3):
            assert abs(out.data[..., c].mean() - data[..., c].mean()) <= 1e-12

    def test_rejects_non_divisible(self):
        with pytest.raises(NonDivisibleDimensions):
            downsample_box(gray(0.5, 6, 6), 4, 3)


class TestPpm:
    def test_smallest_white_image(self):
        img8 = Image8(np.full((1, 1, 3), 255, dtype=np.uint8))
        assert write_ppm(img8) == b"P6\n1 1\n255\n\xff\xff\xff"

    def test_32x32_length(self):
        img8 = Image8(np.zeros((32, 32, 3), dtype=np.uint8))
        encoded = write_ppm(img8)
        # header b"P6\n32 32\n255\n" is 13 bytes, payload 32*32*3 = 3072
        assert len(encoded) == len(b"P6\n32 32\n255\n") + 32 * 32 * 3
        assert len(encoded) == 13 + 3072

    def test_parse_smallest_white(self):
        parsed = read_ppm(b"P6\n1 1\n255\n\xff\xff\xff")
        assert parsed.height == parsed.width == 1
        assert parsed.data.min() == 255

    def test_wrong_magic(self):
        with pytest.raises(MalformedHeader):
            read_ppm(b"P5\n1 1\n255\n\xff\xff\xff")

    def test_bad_maxval(self):
        with pytest.raises(UnsupportedMaxval):
            read_ppm(b"P6\n1 1\n65535\n" + bytes(6))

    def test_truncated(self):
        with pytest.raises(TruncatedData):
            read_ppm(b"P6\n2 2\n255\n\xff\xff")

    def test_comment_in_header(self):
        parsed = read_ppm(b"P6\n# a comment\n1 1\n255\n\x01\x02\x03")
        assert list(parsed.data[0, 0]) == [1, 2, 3]

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(1, 8))
    def test_round_trip_random(self, seed, h, w):
        data = (uniform_array(seed, h * w * 3) * 255).astype(np.uint8).reshape(h, w, 3)
        img8 = Image8(data)
        again = read_ppm(write_ppm(img8))
        assert np.array_equal(again.data, img8.data)
        assert write_ppm(again) == write_ppm(img8)


class TestValidation:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            Image(np.full((1, 1, 3), 1.5))

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            Image(np.full((1, 1, 3), np.nan))

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            Image(np.zeros((4, 4)))

    def test_image8_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            Image8(np.full((1, 1, 3), 300, dtype=np.int64))
