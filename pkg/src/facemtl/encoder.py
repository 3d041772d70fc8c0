"""Multi-scale toy encoder and MLP fusion.

The encoder produces four feature maps at strides 4/8/16/32. It is a
small convolutional stand-in kept behind ``EncoderInterface`` so other
backbones can be plugged in; nothing downstream depends on its quality.
Fusion upsamples every scale to the stride-4 grid, projects each to a
common dimension with its own linear layer, concatenates along
channels, and fuses with one more linear layer into the face-token
sequence F of shape [B, (H/4)*(W/4), D_t].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

from .autodiff import ShapeError, Tensor, ops
from .nn import Linear, ParamRegistry

__all__ = ["EncoderInterface", "ToyEncoder", "MlpFusion", "MultiScaleFeatures",
           "check_image_batch", "ENCODER_STRIDES"]

ENCODER_STRIDES = (4, 8, 16, 32)


class EncoderInterface(Protocol):
    """Anything that maps an image batch to 4 feature maps at strides 4..32."""

    channel_dims: tuple[int, int, int, int]

    def __call__(self, images: Tensor) -> list[Tensor]: ...


@dataclass
class MultiScaleFeatures:
    """The four encoder maps S_1..S_4 plus the fused face-token sequence."""

    scales: list[Tensor]
    fused: Tensor


def check_image_batch(images: Tensor) -> None:
    if images.ndim != 4 or images.shape[1] != 3:
        raise ShapeError(f"expected image batch [B,3,H,W], got {tuple(images.shape)}")
    _, _, h, w = images.shape
    if h % 32 or w % 32:
        raise ShapeError(f"image dims ({h},{w}) must be divisible by 32")


class ToyEncoder:
    """Four conv stages: two stride-2 convs in stage 1, one per later stage.

    3x3 kernels, padding 1, relu after each conv. Channel widths default
    to (16, 32, 64, 128).
    """

    def __init__(self, reg: ParamRegistry, name: str,
                 channels: Sequence[int] = (16, 32, 64, 128), in_channels: int = 3):
        if len(channels) != 4:
            raise ValueError("encoder needs exactly 4 stage widths")
        self.channel_dims = tuple(channels)
        c1, c2, c3, c4 = channels
        self._convs = []
        plan = [(in_channels, c1), (c1, c1), (c1, c2), (c2, c3), (c3, c4)]
        for i, (cin, cout) in enumerate(plan):
            w = reg.declare(f"{name}.conv{i}.weight", (cout, cin, 3, 3), "weight")
            b = reg.declare(f"{name}.conv{i}.bias", (cout, 1, 1), "bias")
            self._convs.append((w, b))

    def __call__(self, images: Tensor) -> list[Tensor]:
        check_image_batch(images)
        x = images
        outputs = []
        for i, (w, b) in enumerate(self._convs):
            x = ops.relu(ops.add(ops.conv2d(x, w, stride=2, padding=1), b))
            if i >= 1:  # stage boundaries after conv 1, 2, 3, 4
                outputs.append(x)
        return outputs


class MlpFusion:
    """Per-scale projection to D_t, channel concat, and a fusing linear layer."""

    def __init__(self, reg: ParamRegistry, name: str,
                 channel_dims: Sequence[int], target_dim: int):
        if len(channel_dims) != 4:
            raise ValueError("fusion expects exactly 4 scales")
        self.channel_dims = tuple(channel_dims)
        self.target_dim = target_dim
        self.projections = [
            Linear(reg, f"{name}.proj{i}", d, target_dim)
            for i, d in enumerate(channel_dims)
        ]
        self.fuse = Linear(reg, f"{name}.fuse", 4 * target_dim, target_dim)

    def __call__(self, scales: Sequence[Tensor]) -> Tensor:
        if len(scales) != 4:
            raise ShapeError(f"fusion expects 4 scales, got {len(scales)}")
        batch = scales[0].shape[0]
        grid_h, grid_w = scales[0].shape[2], scales[0].shape[3]
        projected = []
        for i, (scale, proj) in enumerate(zip(scales, self.projections)):
            if scale.shape[1] != self.channel_dims[i]:
                raise ShapeError(
                    f"scale {i} has {scale.shape[1]} channels, declared {self.channel_dims[i]}"
                )
            up = ops.bilinear_resize(scale, grid_h, grid_w)
            tokens = ops.transpose(
                ops.reshape(up, (batch, self.channel_dims[i], grid_h * grid_w)), (0, 2, 1)
            )
            projected.append(proj(tokens))
        return self.fuse(ops.concat(projected, axis=-1))

    def parameter_count(self) -> int:
        n = 0
        for proj in self.projections:
            n += proj.weight.size + proj.bias.size
        n += self.fuse.weight.size + self.fuse.bias.size
        return n


def fusion_parameter_count(channel_dims: Sequence[int], target_dim: int) -> int:
    """Closed-form parameter count of the fusion block (weights + biases)."""
    n = 0
    for d in channel_dims:
        n += d * target_dim + target_dim
    n += (4 * target_dim) * target_dim + target_dim
    return n
