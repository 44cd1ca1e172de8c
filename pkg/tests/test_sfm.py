import numpy as np
import pytest

from matteforge.errors import FormatError, ShapeMismatchError
from matteforge.oracles import sep_conv_direct
from matteforge.rng import Rng
from matteforge.sfm import (
    FeaturePyramid,
    SepConvWeights,
    ceil_half,
    feature_checksum,
    fpem,
    jpu,
    load_weights,
    make_fpem_weights,
    make_jpu_weights,
    make_pyramid,
    make_sep_conv_weights,
    make_sfm_weights,
    save_weights,
    sep_conv,
    sfm_forward,
    upsample2x,
    zero_biases,
)

GOLDEN_CHECKSUM = "7ee99276bf24e8af341aee90944b28fe042939ef238b319a29f1885cd4eac162"


def rand_feature(rng, c, h, w):
    return np.array([rng.uniform(-1, 1) for _ in range(c * h * w)]).reshape(c, h, w)


# --- separable convolution --------------------------------------------------


def test_identity_weights_pass_through_nonnegative_input():
    fm = np.abs(rand_feature(Rng(1), 3, 7, 5))
    for dilation in (1, 2, 4, 8):
        out = sep_conv(fm, SepConvWeights.identity(3), dilation=dilation, stride=1)
        assert np.array_equal(out, fm)


def test_zero_weights_zero_output():
    weights = SepConvWeights(
        depthwise=np.zeros((2, 3, 3)), pointwise=np.zeros((2, 2)), bias=np.zeros(2)
    )
    out = sep_conv(rand_feature(Rng(2), 2, 6, 6), weights, dilation=2, stride=1)
    assert not out.any()


@pytest.mark.parametrize("dilation", [1, 2, 4, 8])
@pytest.mark.parametrize("stride", [1, 2])
def test_sep_conv_matches_dense_oracle(dilation, stride):
    rng = Rng(100 + dilation * 10 + stride)
    fm = rand_feature(rng, 2, 6, 6)
    weights = make_sep_conv_weights(rng, 2)
    fast = sep_conv(fm, weights, dilation=dilation, stride=stride)
    slow = sep_conv_direct(fm, weights.depthwise, weights.pointwise, weights.bias, dilation, stride)
    assert fast.shape == slow.shape
    assert np.abs(fast - slow).max() < 1e-9


def test_sep_conv_rectangular_pointwise():
    rng = Rng(5)
    fm = rand_feature(rng, 4, 5, 5)
    weights = make_sep_conv_weights(rng, 4, c_out=2)
    out = sep_conv(fm, weights, dilation=1, stride=1)
    assert out.shape == (2, 5, 5)
    slow = sep_conv_direct(fm, weights.depthwise, weights.pointwise, weights.bias, 1, 1)
    assert np.abs(out - slow).max() < 1e-9


def test_sep_conv_output_dims_are_ceil_division():
    fm = rand_feature(Rng(6), 1, 7, 9)
    out = sep_conv(fm, SepConvWeights.identity(1), dilation=1, stride=2)
    assert out.shape == (1, 4, 5)


def test_sep_conv_channel_mismatch():
    with pytest.raises(ShapeMismatchError):
        sep_conv(rand_feature(Rng(7), 3, 4, 4), SepConvWeights.identity(2))


def test_sep_conv_rejects_bad_stride_and_dilation():
    fm = rand_feature(Rng(8), 1, 4, 4)
    with pytest.raises(ValueError):
        sep_conv(fm, SepConvWeights.identity(1), stride=3)
    with pytest.raises(ValueError):
        sep_conv(fm, SepConvWeights.identity(1), dilation=0)


# --- bilinear upsampling ----------------------------------------------------


def test_upsample_constant_stays_constant():
    fm = np.full((2, 3, 3), 0.7)
    out = upsample2x(fm, 6, 6)
    assert np.allclose(out, 0.7, atol=1e-15)


def test_upsample_1x1_broadcasts_value():
    fm = np.array([[[0.3]]])
    out = upsample2x(fm, 5, 4)
    assert out.shape == (1, 5, 4)
    assert np.all(out == 0.3)


def test_upsample_2x2_ramp_hand_derived():
    # align-corners-false bilinear weights for a 2x upsample are
    # (0.75, 0.25) at the edges of each source cell
    fm = np.array([[[0.0, 1.0], [2.0, 3.0]]])
    expected = np.array(
        [
            [0.0, 0.25, 0.75, 1.0],
            [0.5, 0.75, 1.25, 1.5],
            [1.5, 1.75, 2.25, 2.5],
            [2.0, 2.25, 2.75, 3.0],
        ]
    )
    out = upsample2x(fm, 4, 4)
    assert np.allclose(out[0], expected, atol=1e-15)


# --- pyramid plumbing -------------------------------------------------------


def test_pyramid_validates_ceil_halving():
    same_size = tuple(np.zeros((2, 8, 16)) for _ in range(4))
    with pytest.raises(FormatError):
        FeaturePyramid(levels=same_size)
    good = make_pyramid(Rng(9), 2, 16, 16)
    assert [lv.shape for lv in good.levels] == [(2, 16, 16), (2, 8, 8), (2, 4, 4), (2, 2, 2)]
    odd = make_pyramid(Rng(9), 2, 9, 11)
    assert [lv.shape[1:] for lv in odd.levels] == [(9, 11), (5, 6), (3, 3), (2, 2)]
    assert ceil_half(9) == 5 and ceil_half(1) == 1


def test_pyramid_rejects_channel_mismatch():
    levels = (np.zeros((2, 8, 8)), np.zeros((3, 4, 4)), np.zeros((2, 2, 2)), np.zeros((2, 1, 1)))
    with pytest.raises(FormatError):
        FeaturePyramid(levels=levels)


def test_fpem_preserves_shapes():
    for trial in range(20):
        rng = Rng(1000 + trial)
        channels = 1 + rng.randrange(4)
        base_h = 4 + rng.randrange(13)
        base_w = 4 + rng.randrange(13)
        pyr = make_pyramid(rng, channels, base_h, base_w)
        out = fpem(pyr, make_fpem_weights(rng, channels))
        assert [lv.shape for lv in out.levels] == [lv.shape for lv in pyr.levels]


def test_fpem_zero_input_zero_biases_zero_output():
    weights = make_fpem_weights(Rng(11), 2)
    for group in (weights.up, weights.down_pre, weights.down_post):
        for w in group:
            w.bias[:] = 0.0
    pyr = FeaturePyramid(
        levels=(np.zeros((2, 8, 8)), np.zeros((2, 4, 4)), np.zeros((2, 2, 2)), np.zeros((2, 1, 1)))
    )
    out = fpem(pyr, weights)
    assert all(not lv.any() for lv in out.levels)


def test_fpem_identity_passthrough_of_finest_level():
    # identity kernels and zero deeper levels leave the finest level untouched
    finest = np.abs(rand_feature(Rng(12), 2, 8, 8))
    pyr = FeaturePyramid(
        levels=(finest, np.zeros((2, 4, 4)), np.zeros((2, 2, 2)), np.zeros((2, 1, 1)))
    )
    ident = SepConvWeights.identity(2)
    from matteforge.sfm import FpemWeights

    weights = FpemWeights(up=(ident,) * 3, down_pre=(ident,) * 3, down_post=(ident,) * 3)
    out = fpem(pyr, weights)
    assert np.array_equal(out.levels[0], finest)


def test_fpem_deterministic():
    pyr = make_pyramid(Rng(13), 3, 9, 9)
    a = fpem(pyr, make_fpem_weights(Rng(14), 3))
    b = fpem(make_pyramid(Rng(13), 3, 9, 9), make_fpem_weights(Rng(14), 3))
    for la, lb in zip(a.levels, b.levels):
        assert np.array_equal(la, lb)


def test_jpu_shape_contract():
    for trial in range(20):
        rng = Rng(2000 + trial)
        channels = 1 + rng.randrange(4)
        base_h = 4 + rng.randrange(13)
        base_w = 4 + rng.randrange(13)
        pyr = make_pyramid(rng, channels, base_h, base_w)
        out = jpu(pyr, make_jpu_weights(rng, channels))
        assert out.shape == (4 * channels, base_h, base_w)


def test_jpu_zero_pyramid_zero_biases_zero_output():
    weights = make_jpu_weights(Rng(15), 2)
    for matrix, bias in weights.proj:
        bias[:] = 0.0
    for branch in weights.branches:
        branch.bias[:] = 0.0
    pyr = FeaturePyramid(
        levels=(np.zeros((2, 8, 8)), np.zeros((2, 4, 4)), np.zeros((2, 2, 2)), np.zeros((2, 1, 1)))
    )
    assert not jpu(pyr, weights).any()


def test_jpu_branches_match_dense_oracle():
    rng = Rng(16)
    channels = 2
    pyr = make_pyramid(rng, channels, 8, 8)
    weights = make_jpu_weights(rng, channels)
    out = jpu(pyr, weights)
    # rebuild the stacked input the same way jpu does, then check each branch
    from matteforge.sfm import JPU_DILATIONS, pointwise_project

    ups = []
    for i, lv in enumerate(pyr.levels):
        matrix, bias = weights.proj[i]
        f = pointwise_project(lv, matrix, bias)
        for j in range(i, 0, -1):
            target = pyr.levels[j - 1].shape
            f = upsample2x(f, target[1], target[2])
        ups.append(f)
    stacked = np.concatenate(ups, axis=0)
    for b, (branch, dilation) in enumerate(zip(weights.branches, JPU_DILATIONS)):
        expected = sep_conv_direct(
            stacked, branch.depthwise, branch.pointwise, branch.bias, dilation, 1
        )
        got = out[b * channels : (b + 1) * channels]
        assert np.abs(got - expected).max() < 1e-9


# --- end to end -------------------------------------------------------------


def test_sfm_forward_shapes_for_any_stage_count():
    pyr = make_pyramid(Rng(17), 2, 8, 8)
    w1 = make_sfm_weights(99, 2, n_fpem=1)
    w2 = make_sfm_weights(99, 2, n_fpem=2)
    assert sfm_forward(pyr, w1).shape == sfm_forward(pyr, w2).shape == (8, 8, 8)


def test_sfm_forward_zero_input_zero_biases():
    weights = make_sfm_weights(7, 2, n_fpem=2)
    zero_biases(weights)
    pyr = FeaturePyramid(
        levels=(np.zeros((2, 8, 8)), np.zeros((2, 4, 4)), np.zeros((2, 2, 2)), np.zeros((2, 1, 1)))
    )
    assert not sfm_forward(pyr, weights).any()


def test_sfm_forward_rejects_too_many_stages():
    pyr = make_pyramid(Rng(18), 2, 8, 8)
    with pytest.raises(ValueError):
        sfm_forward(pyr, make_sfm_weights(1, 2, n_fpem=1), n_fpem=2)


def test_sfm_golden_checksum_stable():
    pyr = make_pyramid(Rng(2024), 8, 16, 16)
    weights = make_sfm_weights(31337, 8, n_fpem=2)
    out = sfm_forward(pyr, weights)
    assert out.shape == (32, 16, 16)
    assert feature_checksum(out) == GOLDEN_CHECKSUM


def test_weight_serialization_roundtrip(tmp_path):
    weights = make_sfm_weights(42, 4, n_fpem=2)
    path = tmp_path / "weights.bin"
    save_weights(weights, path)
    loaded = load_weights(path)
    pyr = make_pyramid(Rng(19), 4, 8, 8)
    assert np.array_equal(sfm_forward(pyr, weights), sfm_forward(pyr, loaded))
    sidecar = (tmp_path / "weights.bin.json").read_text()
    assert "little" in sidecar and "float64" in sidecar
