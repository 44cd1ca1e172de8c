"""Toy-scale semantic fusion over a four-level feature pyramid.

Forward pass only, with seeded random weights: a cascadable U-shaped
pyramid-enhancement stage (up-scale then down-scale sweeps of separable
convolutions) feeding a joint-upsampling head (parallel dilated
separable convolutions over the concatenated, upsampled levels). The
point is the wiring, verified by shape contracts, identity-kernel
pass-through and dense-convolution oracles, not learned accuracy.

Feature maps are float64 arrays of shape (channels, height, width);
pyramid levels sit at strides 4/8/16/32 with ceil-halved dimensions.
Normalization layers are folded into the pointwise weights and biases
as a seeded per-channel affine, which is what a batch norm reduces to
at inference.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ShapeMismatchError
from .raster import atomic_write_bytes
from .rng import Rng

JPU_DILATIONS = (1, 2, 4, 8)


def as_feature(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 3:
        raise FormatError(f"feature map must be (C, H, W), got shape {arr.shape}")
    return arr


def ceil_half(n: int) -> int:
    return (n + 1) // 2


@dataclass(frozen=True)
class FeaturePyramid:
    """Four feature maps, each spatially ceil-half of the previous one."""

    levels: tuple

    def __post_init__(self):
        if len(self.levels) != 4:
            raise FormatError(f"pyramid needs 4 levels, got {len(self.levels)}")
        channels = self.levels[0].shape[0]
        for i, lv in enumerate(self.levels):
            as_feature(lv)
            if lv.shape[0] != channels:
                raise FormatError("pyramid levels must share a channel count")
            if i > 0:
                prev = self.levels[i - 1]
                want = (ceil_half(prev.shape[1]), ceil_half(prev.shape[2]))
                if lv.shape[1:] != want:
                    raise FormatError(
                        f"level {i} must be ceil-half of level {i - 1}: "
                        f"want {want}, got {lv.shape[1:]}"
                    )

    @property
    def channels(self) -> int:
        return self.levels[0].shape[0]


@dataclass(frozen=True)
class SepConvWeights:
    """Separable convolution: per-channel 3x3 depthwise, then 1x1 pointwise."""

    depthwise: np.ndarray  # (c_in, 3, 3)
    pointwise: np.ndarray  # (c_out, c_in)
    bias: np.ndarray  # (c_out,)

    @property
    def c_in(self) -> int:
        return self.depthwise.shape[0]

    @property
    def c_out(self) -> int:
        return self.pointwise.shape[0]

    @classmethod
    def identity(cls, channels: int) -> "SepConvWeights":
        depthwise = np.zeros((channels, 3, 3))
        depthwise[:, 1, 1] = 1.0
        return cls(depthwise=depthwise, pointwise=np.eye(channels), bias=np.zeros(channels))


@dataclass(frozen=True)
class FpemWeights:
    up: tuple  # 3 SepConvWeights, levels 2 -> 0
    down_pre: tuple  # 3 stride-2 SepConvWeights, producing levels 1 -> 3
    down_post: tuple  # 3 SepConvWeights, levels 1 -> 3


@dataclass(frozen=True)
class JpuWeights:
    proj: tuple  # 4 (matrix (C, C), bias (C,)) pairs
    branches: tuple  # 4 SepConvWeights over 4C channels, each emitting C


@dataclass(frozen=True)
class SfmWeights:
    fpem_stages: tuple
    jpu: JpuWeights

    @property
    def channels(self) -> int:
        return self.fpem_stages[0].up[0].c_in


def _draw(rng: Rng, shape, low: float, high: float) -> np.ndarray:
    flat = np.array([rng.uniform(low, high) for _ in range(int(np.prod(shape)))])
    return flat.reshape(shape)


def make_sep_conv_weights(rng: Rng, c_in: int, c_out: int = None) -> SepConvWeights:
    """Seeded random weights with a per-channel affine folded in."""
    if c_out is None:
        c_out = c_in
    depthwise = _draw(rng, (c_in, 3, 3), -1.0 / 3.0, 1.0 / 3.0)
    bound = 1.0 / np.sqrt(c_in)
    pointwise = _draw(rng, (c_out, c_in), -bound, bound)
    bias = _draw(rng, (c_out,), -0.1, 0.1)
    scale = _draw(rng, (c_out,), 0.5, 1.5)
    shift = _draw(rng, (c_out,), -0.1, 0.1)
    return SepConvWeights(
        depthwise=depthwise,
        pointwise=scale[:, None] * pointwise,
        bias=scale * bias + shift,
    )


def make_fpem_weights(rng: Rng, channels: int) -> FpemWeights:
    up = tuple(make_sep_conv_weights(rng, channels) for _ in range(3))
    down_pre = tuple(make_sep_conv_weights(rng, channels) for _ in range(3))
    down_post = tuple(make_sep_conv_weights(rng, channels) for _ in range(3))
    return FpemWeights(up=up, down_pre=down_pre, down_post=down_post)


def make_jpu_weights(rng: Rng, channels: int) -> JpuWeights:
    bound = 1.0 / np.sqrt(channels)
    proj = tuple(
        (_draw(rng, (channels, channels), -bound, bound), _draw(rng, (channels,), -0.1, 0.1))
        for _ in range(4)
    )
    branches = tuple(
        make_sep_conv_weights(rng, 4 * channels, channels) for _ in range(len(JPU_DILATIONS))
    )
    return JpuWeights(proj=proj, branches=branches)


def make_sfm_weights(seed: int, channels: int, n_fpem: int = 2) -> SfmWeights:
    if n_fpem < 1:
        raise ValueError("n_fpem must be >= 1")
    rng = Rng(seed)
    stages = tuple(make_fpem_weights(rng, channels) for _ in range(n_fpem))
    return SfmWeights(fpem_stages=stages, jpu=make_jpu_weights(rng, channels))


def sep_conv(fm, w: SepConvWeights, dilation: int = 1, stride: int = 1) -> np.ndarray:
    """Dilated depthwise 3x3, pointwise 1x1, bias, ReLU.

    Replicate padding keeps spatial dims at stride 1; stride 2 keeps
    every other output pixel, giving ceil-halved dims.
    """
    fm = as_feature(fm)
    if dilation < 1:
        raise ValueError("dilation must be >= 1")
    if stride not in (1, 2):
        raise ValueError("stride must be 1 or 2")
    if fm.shape[0] != w.c_in:
        raise ShapeMismatchError("weights", (w.c_in,), (fm.shape[0],))
    c, h, wd = fm.shape
    d = dilation
    padded = np.pad(fm, ((0, 0), (d, d), (d, d)), mode="edge")
    acc = np.zeros_like(fm)
    for u in range(3):
        for v in range(3):
            acc += w.depthwise[:, u, v][:, None, None] * padded[
                :, u * d : u * d + h, v * d : v * d + wd
            ]
    out = np.tensordot(w.pointwise, acc, axes=([1], [0]))
    out += w.bias[:, None, None]
    out = np.maximum(out, 0.0)
    if stride == 2:
        out = out[:, ::2, ::2]
    return out


def pointwise_project(fm, matrix, bias) -> np.ndarray:
    """1x1 channel mixing with bias and ReLU."""
    fm = as_feature(fm)
    if fm.shape[0] != matrix.shape[1]:
        raise ShapeMismatchError("projection", (matrix.shape[1],), (fm.shape[0],))
    out = np.tensordot(matrix, fm, axes=([1], [0])) + bias[:, None, None]
    return np.maximum(out, 0.0)


def upsample2x(fm, target_h: int, target_w: int) -> np.ndarray:
    """Bilinear upsampling to roughly double dims, align-corners false.

    Output pixel (i, j) samples source coordinate
    ((i + 0.5) * h_in / h_out - 0.5, (j + 0.5) * w_in / w_out - 0.5),
    clamped to the source grid.
    """
    fm = as_feature(fm)
    c, h, w = fm.shape
    ys = np.clip((np.arange(target_h) + 0.5) * (h / target_h) - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(target_w) + 0.5) * (w / target_w) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[None, :, None]
    fx = (xs - x0)[None, None, :]
    top = fm[:, y0][:, :, x0] * (1 - fx) + fm[:, y0][:, :, x1] * fx
    bottom = fm[:, y1][:, :, x0] * (1 - fx) + fm[:, y1][:, :, x1] * fx
    return top * (1 - fy) + bottom * fy


def fpem(pyr: FeaturePyramid, weights: FpemWeights) -> FeaturePyramid:
    """One U-shaped enhancement sweep; output shapes equal input shapes.

    Up-scale phase walks from the deepest level toward the finest,
    adding each level to the upsampled deeper result and refining with
    a separable conv. The down-scale phase walks back down, merging
    each refined level with a stride-2 downsample of the previous
    output.
    """
    lv = list(pyr.levels)
    up = [None] * 4
    up[3] = lv[3]
    for i in (2, 1, 0):
        lifted = upsample2x(up[i + 1], lv[i].shape[1], lv[i].shape[2])
        up[i] = sep_conv(lv[i] + lifted, weights.up[i], dilation=1, stride=1)
    out = [None] * 4
    out[0] = up[0]
    for i in (1, 2, 3):
        dropped = sep_conv(out[i - 1], weights.down_pre[i - 1], dilation=1, stride=2)
        out[i] = sep_conv(up[i] + dropped, weights.down_post[i - 1], dilation=1, stride=1)
    return FeaturePyramid(levels=tuple(out))


def jpu(pyr: FeaturePyramid, weights: JpuWeights) -> np.ndarray:
    """Joint upsampling head: fuse all levels at the finest resolution.

    Each level is channel-projected, upsampled step by step to the
    finest level's dims and concatenated; four parallel separable
    convolutions with dilations 1/2/4/8 then each emit C channels,
    concatenated to a (4C, H, W) map.
    """
    ups = []
    for i, lv in enumerate(pyr.levels):
        matrix, bias = weights.proj[i]
        f = pointwise_project(lv, matrix, bias)
        for j in range(i, 0, -1):
            target = pyr.levels[j - 1].shape
            f = upsample2x(f, target[1], target[2])
        ups.append(f)
    stacked = np.concatenate(ups, axis=0)
    outs = [
        sep_conv(stacked, bw, dilation=dil, stride=1)
        for bw, dil in zip(weights.branches, JPU_DILATIONS)
    ]
    return np.concatenate(outs, axis=0)


def sfm_forward(pyr: FeaturePyramid, weights: SfmWeights, n_fpem: int = None) -> np.ndarray:
    """Cascade enhancement stages, then joint upsampling."""
    stages = weights.fpem_stages
    if n_fpem is None:
        n_fpem = len(stages)
    if n_fpem < 1:
        raise ValueError("n_fpem must be >= 1")
    if n_fpem > len(stages):
        raise ValueError(f"weights carry {len(stages)} stage(s), asked for {n_fpem}")
    for stage in stages[:n_fpem]:
        pyr = fpem(pyr, stage)
    return jpu(pyr, weights.jpu)


def make_pyramid(rng: Rng, channels: int, base_h: int, base_w: int) -> FeaturePyramid:
    """Seeded random pyramid with values in [0, 1)."""
    levels = []
    h, w = base_h, base_w
    for _ in range(4):
        levels.append(_draw(rng, (channels, h, w), 0.0, 1.0))
        h, w = ceil_half(h), ceil_half(w)
    return FeaturePyramid(levels=tuple(levels))


def feature_checksum(fm) -> str:
    """sha256 of the row-major little-endian float64 payload."""
    arr = np.ascontiguousarray(np.asarray(fm, dtype="<f8"))
    return hashlib.sha256(arr.tobytes()).hexdigest()


def _iter_arrays(weights: SfmWeights):
    for s, stage in enumerate(weights.fpem_stages):
        for group_name, group in (
            ("up", stage.up),
            ("down_pre", stage.down_pre),
            ("down_post", stage.down_post),
        ):
            for k, w in enumerate(group):
                yield f"fpem{s}/{group_name}{k}/depthwise", w.depthwise
                yield f"fpem{s}/{group_name}{k}/pointwise", w.pointwise
                yield f"fpem{s}/{group_name}{k}/bias", w.bias
    for k, (matrix, bias) in enumerate(weights.jpu.proj):
        yield f"jpu/proj{k}/matrix", matrix
        yield f"jpu/proj{k}/bias", bias
    for k, w in enumerate(weights.jpu.branches):
        yield f"jpu/branch{k}/depthwise", w.depthwise
        yield f"jpu/branch{k}/pointwise", w.pointwise
        yield f"jpu/branch{k}/bias", w.bias


def zero_biases(weights: SfmWeights) -> None:
    """Zero every bias in place (handy for zero-propagation checks)."""
    for name, arr in _iter_arrays(weights):
        if name.endswith("/bias"):
            arr[:] = 0.0


def save_weights(weights: SfmWeights, path) -> None:
    """Flat little-endian float64 blob plus a JSON sidecar of shapes."""
    entries = []
    chunks = []
    offset = 0
    for name, arr in _iter_arrays(weights):
        payload = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(payload)
        offset += len(payload)
    atomic_write_bytes(path, b"".join(chunks))
    sidecar = {
        "dtype": "float64",
        "byte_order": "little",
        "n_fpem": len(weights.fpem_stages),
        "channels": weights.channels,
        "entries": entries,
    }
    atomic_write_bytes(f"{path}.json", json.dumps(sidecar, indent=2).encode("utf-8"))


def load_weights(path) -> SfmWeights:
    with open(f"{path}.json", "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    with open(path, "rb") as fh:
        blob = fh.read()
    arrays = {}
    for entry in sidecar["entries"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=start)
        arrays[entry["name"]] = arr.reshape(shape).astype(np.float64)

    def sep(prefix):
        return SepConvWeights(
            depthwise=arrays[f"{prefix}/depthwise"],
            pointwise=arrays[f"{prefix}/pointwise"],
            bias=arrays[f"{prefix}/bias"],
        )

    stages = []
    for s in range(sidecar["n_fpem"]):
        stages.append(
            FpemWeights(
                up=tuple(sep(f"fpem{s}/up{k}") for k in range(3)),
                down_pre=tuple(sep(f"fpem{s}/down_pre{k}") for k in range(3)),
                down_post=tuple(sep(f"fpem{s}/down_post{k}") for k in range(3)),
            )
        )
    jpu_w = JpuWeights(
        proj=tuple(
            (arrays[f"jpu/proj{k}/matrix"], arrays[f"jpu/proj{k}/bias"]) for k in range(4)
        ),
        branches=tuple(sep(f"jpu/branch{k}") for k in range(len(JPU_DILATIONS))),
    )
    return SfmWeights(fpem_stages=tuple(stages), jpu=jpu_w)
