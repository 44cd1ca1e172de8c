import io
from fractions import Fraction

import numpy as np
import pytest
from PIL import Image

from matteforge.errors import FormatError, PaletteError, ShapeMismatchError
from matteforge.raster import (
    byte_quantize,
    composite,
    decode_image,
    decode_map,
    encode_image,
    encode_map,
)


def test_composite_alpha_one_is_fg(np_rng):
    fg = np_rng.random((6, 5, 3))
    bg = np_rng.random((6, 5, 3))
    assert np.array_equal(composite(fg, bg, np.ones((6, 5))), fg)


def test_composite_alpha_zero_is_bg(np_rng):
    fg = np_rng.random((6, 5, 3))
    bg = np_rng.random((6, 5, 3))
    assert np.array_equal(composite(fg, bg, np.zeros((6, 5))), bg)


def test_composite_half_blend_pixel():
    fg = np.array([[[0.8, 0.4, 0.2]]])
    bg = np.array([[[0.4, 0.2, 1.0]]])
    out = composite(fg, bg, np.array([[0.5]]))
    assert np.allclose(out[0, 0], [0.6, 0.3, 0.6], atol=1e-15)


def test_composite_shape_mismatch_names_operand():
    fg = np.zeros((4, 4, 3))
    with pytest.raises(ShapeMismatchError) as exc:
        composite(fg, np.zeros((4, 5, 3)), np.zeros((4, 4)))
    assert exc.value.operand == "bg"
    with pytest.raises(ShapeMismatchError) as exc:
        composite(fg, np.zeros((4, 4, 3)), np.zeros((5, 4)))
    assert exc.value.operand == "alpha"


def test_composite_within_one_ulp_exact_rational(np_rng):
    fg = np_rng.random((4, 4, 3))
    bg = np_rng.random((4, 4, 3))
    alpha = np_rng.random((4, 4))
    out = composite(fg, bg, alpha)
    for i in range(4):
        for j in range(4):
            a = Fraction(alpha[i, j])
            for c in range(3):
                exact = a * Fraction(fg[i, j, c]) + (1 - a) * Fraction(bg[i, j, c])
                assert abs(Fraction(out[i, j, c]) - exact) <= Fraction(np.spacing(out[i, j, c]))


def test_composite_swap_complementarity(np_rng):
    fg = np_rng.random((16, 16, 3))
    bg = np_rng.random((16, 16, 3))
    alpha = np_rng.random((16, 16))
    total = composite(fg, bg, alpha) + composite(bg, fg, alpha)
    target = fg + bg
    ulp = np.spacing(np.maximum(np.abs(target), 1.0))
    assert np.all(np.abs(total - target) <= 2 * ulp)
    # swapping operands and complementing alpha describes the same blend
    mirrored = composite(bg, fg, 1.0 - alpha)
    out = composite(fg, bg, alpha)
    assert np.all(np.abs(out - mirrored) <= 2 * np.spacing(np.maximum(np.abs(out), 1.0)))


def test_byte_quantize_rounds_half_up():
    assert byte_quantize(np.array([0.5]))[0] == 128
    assert byte_quantize(np.array([1.0]))[0] == 255
    assert byte_quantize(np.array([0.0]))[0] == 0
    assert byte_quantize(np.array([127.4 / 255.0]))[0] == 127
    assert byte_quantize(np.array([127.5 / 255.0]))[0] == 128


def test_decode_alpha_scales_by_255():
    raw = np.array([[255, 128, 7, 0]], dtype=np.uint8)
    decoded = decode_map(encode_map(raw / 255.0), kind="alpha")
    assert decoded[0, 0] == 1.0
    assert decoded[0, 1] == 128.0 / 255.0
    assert decoded[0, 2] == 7.0 / 255.0
    assert decoded[0, 3] == 0.0


def test_decode_trimap_palette_values():
    tri = np.array([[0.0, 0.5, 1.0]])
    decoded = decode_map(encode_map(tri), kind="trimap")
    assert np.array_equal(decoded, tri)


def test_decode_trimap_reports_first_offending_pixel():
    raw = np.array([[0, 128], [7, 255]], dtype=np.uint8)
    buf = io.BytesIO()
    Image.fromarray(raw, mode="L").save(buf, format="PNG")
    with pytest.raises(PaletteError) as exc:
        decode_map(buf.getvalue(), kind="trimap")
    assert (exc.value.x, exc.value.y, exc.value.value) == (0, 1, 7)


def test_decode_rejects_non_grayscale():
    buf = io.BytesIO()
    Image.new("RGB", (2, 2)).save(buf, format="PNG")
    with pytest.raises(FormatError):
        decode_map(buf.getvalue())


def test_decode_rejects_16_bit():
    buf = io.BytesIO()
    Image.fromarray(np.zeros((2, 2), dtype=np.uint16)).save(buf, format="PNG")
    with pytest.raises(FormatError):
        decode_map(buf.getvalue())


def test_trimap_roundtrip_byte_identical():
    tri = np.array([[0.0, 0.5], [1.0, 0.5]])
    payload = encode_map(tri)
    assert encode_map(decode_map(payload, kind="trimap")) == payload


def test_alpha_roundtrip_on_quantized_values(np_rng):
    alpha = byte_quantize(np_rng.random((8, 8))).astype(np.float64) / 255.0
    assert np.array_equal(decode_map(encode_map(alpha), kind="alpha"), alpha)


def test_image_roundtrip(np_rng):
    img = byte_quantize(np_rng.random((5, 7, 3))).astype(np.float64) / 255.0
    assert np.array_equal(decode_image(encode_image(img)), img)


def test_encode_rejects_out_of_range():
    with pytest.raises(FormatError):
        encode_map(np.array([[1.5]]))
