"""Three-scale single-shot detection network.

The architecture is a doubled Darknet-53-style stack described by an
explicit layer schedule (indices 0..106): a residual backbone whose
256-channel stage ends at layer 36 (stride 8) and 512-channel stage at
layer 61 (stride 16), detection taps at layers 82, 94 and 106 (strides
32 / 16 / 8), and two nearest-neighbor upsampling paths whose features are
concatenated with layers 61 and 36 so that the feature maps reach 26x26 at
layer 91 and 52x52 at layer 103 for a 416 input.  Each detection tap emits
a 1x1 kernel of depth B * (5 + L) — 21 with the two-class defaults — so a
416 input yields 13x13x21, 26x26x21 and 52x52x21 grids, 10647 candidate
boxes in total.

Convolution blocks are convolution + batch norm + leaky ReLU (slope 0.1).
A width multiplier shrinks internal channel counts (minimum 8) for
desk-scale runs without changing head shapes.  Heads are returned raw
(pre-activation); decoding and the loss apply the activations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .anchors import AnchorSet
from .errors import ComicdetError, ConfigError

HEAD_STRIDES = (32, 16, 8)
DETECTION_TAPS = (82, 94, 106)
MIN_CHANNELS = 8
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture description; defaults reproduce the reference shapes."""

    anchors: AnchorSet
    input_size: int = 416
    num_classes: int = 2
    boxes_per_cell: int = 3
    head_mode: str = "sigmoid"
    width_multiplier: float = 1.0

    def __post_init__(self):
        if self.input_size % HEAD_STRIDES[0] != 0 or self.input_size <= 0:
            raise ConfigError(f"input_size must be a positive multiple of {HEAD_STRIDES[0]}, got {self.input_size}")
        if self.head_mode not in ("sigmoid", "softmax"):
            raise ConfigError(f"head_mode must be 'sigmoid' or 'softmax', got {self.head_mode!r}")
        if not (0.0 < self.width_multiplier <= 1.0):
            raise ConfigError(f"width_multiplier must be in (0, 1], got {self.width_multiplier}")
        if self.num_classes < 1:
            raise ConfigError("num_classes must be at least 1")
        if self.boxes_per_cell < 1:
            raise ConfigError("boxes_per_cell must be at least 1")
        if len(self.anchors) != len(HEAD_STRIDES) * self.boxes_per_cell:
            raise ConfigError(
                f"expected {len(HEAD_STRIDES) * self.boxes_per_cell} anchors for "
                f"boxes_per_cell={self.boxes_per_cell}, got {len(self.anchors)}"
            )

    @property
    def head_depth(self) -> int:
        return self.boxes_per_cell * (5 + self.num_classes)

    @property
    def grid_sizes(self) -> tuple[int, int, int]:
        return tuple(self.input_size // s for s in HEAD_STRIDES)

    @property
    def total_boxes(self) -> int:
        return sum(s * s * self.boxes_per_cell for s in self.grid_sizes)

    def to_dict(self) -> dict:
        return {
            "anchors": [list(a) for a in self.anchors.anchors],
            "input_size": self.input_size,
            "num_classes": self.num_classes,
            "boxes_per_cell": self.boxes_per_cell,
            "head_mode": self.head_mode,
            "width_multiplier": self.width_multiplier,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "NetworkConfig":
        return cls(
            anchors=AnchorSet(tuple((float(w), float(h)) for w, h in payload["anchors"])),
            input_size=int(payload["input_size"]),
            num_classes=int(payload["num_classes"]),
            boxes_per_cell=int(payload["boxes_per_cell"]),
            head_mode=str(payload["head_mode"]),
            width_multiplier=float(payload["width_multiplier"]),
        )


@dataclass(frozen=True)
class LayerSpec:
    """One entry of the layer schedule.

    kind: "conv" (conv + BN + leaky ReLU), "conv_linear" (1x1 detection
    kernel with bias, no norm or activation), "shortcut" (residual add),
    "route" (copy one earlier output or concatenate two), "upsample"
    (2x nearest neighbor), "detect" (tap the previous output as a head).
    """

    kind: str
    out_channels: int = 0  # base count, before the width multiplier
    kernel_size: int = 3
    stride: int = 1
    sources: tuple[int, ...] = field(default_factory=tuple)


def build_layer_schedule(head_depth: int = 21) -> tuple[LayerSpec, ...]:
    """The full 0..106 layer schedule with detection taps at 82/94/106."""
    layers: list[LayerSpec] = []

    def conv(c, k=3, s=1):
        layers.append(LayerSpec("conv", out_channels=c, kernel_size=k, stride=s))

    def residual_units(c, n):
        for _ in range(n):
            conv(c // 2, k=1)
            conv(c)
            i = len(layers)
            layers.append(LayerSpec("shortcut", sources=(i - 3,)))

    # Backbone: stage ends land on layers 4, 11, 36, 61, 74.
    conv(32)
    conv(64, s=2)
    residual_units(64, 1)
    conv(128, s=2)
    residual_units(128, 2)
    conv(256, s=2)
    residual_units(256, 8)  # layer 36: stride-8 features
    conv(512, s=2)
    residual_units(512, 8)  # layer 61: stride-16 features
    conv(1024, s=2)
    residual_units(1024, 4)  # layer 74

    # Coarse head (stride 32), tap at 82.
    for c, k in ((512, 1), (1024, 3), (512, 1), (1024, 3), (512, 1), (1024, 3)):
        conv(c, k)
    layers.append(LayerSpec("conv_linear", out_channels=head_depth, kernel_size=1))  # 81
    layers.append(LayerSpec("detect"))  # 82

    # Medium head (stride 16): upsample then merge with layer 61, tap at 94.
    layers.append(LayerSpec("route", sources=(79,)))  # 83
    conv(256, k=1)  # 84
    layers.append(LayerSpec("upsample"))  # 85
    layers.append(LayerSpec("route", sources=(85, 61)))  # 86
    for c, k in ((256, 1), (512, 3), (256, 1), (512, 3), (256, 1), (512, 3)):
        conv(c, k)  # 87..92 (26x26 features from 86 on, so layer 91 is 26x26)
    layers.append(LayerSpec("conv_linear", out_channels=head_depth, kernel_size=1))  # 93
    layers.append(LayerSpec("detect"))  # 94

    # Fine head (stride 8): upsample then merge with layer 36, tap at 106.
    layers.append(LayerSpec("route", sources=(91,)))  # 95
    conv(128, k=1)  # 96
    layers.append(LayerSpec("upsample"))  # 97
    layers.append(LayerSpec("route", sources=(97, 36)))  # 98
    for c, k in ((128, 1), (256, 3), (128, 1), (256, 3), (128, 1), (256, 3)):
        conv(c, k)  # 99..104 (layer 103 is 52x52)
    layers.append(LayerSpec("conv_linear", out_channels=head_depth, kernel_size=1))  # 105
    layers.append(LayerSpec("detect"))  # 106

    schedule = tuple(layers)
    taps = tuple(i for i, sp in enumerate(schedule) if sp.kind == "detect")
    assert taps == DETECTION_TAPS, taps
    return schedule


def scaled_channels(base: int, width_multiplier: float) -> int:
    return max(MIN_CHANNELS, int(round(base * width_multiplier)))


def trace_shapes(schedule, input_size: int, width_multiplier: float = 1.0):
    """Analytic (channels, side) per layer; validates the wiring.

    Raises ConfigError on inconsistent residual or concat shapes, so it
    doubles as a schedule sanity check.
    """
    shapes: list[tuple[int, int]] = []
    prev = (3, input_size)
    for i, sp in enumerate(schedule):
        if sp.kind == "conv":
            ch = scaled_channels(sp.out_channels, width_multiplier)
            side = prev[1] // sp.stride
            cur = (ch, side)
        elif sp.kind == "conv_linear":
            cur = (sp.out_channels, prev[1])
        elif sp.kind == "shortcut":
            src = shapes[sp.sources[0]]
            if src != prev:
                raise ConfigError(f"layer {i}: residual add of mismatched shapes {src} vs {prev}")
            cur = prev
        elif sp.kind == "route":
            srcs = [shapes[s] for s in sp.sources]
            if len({side for _, side in srcs}) != 1:
                raise ConfigError(f"layer {i}: concat of mismatched sides {srcs}")
            cur = (sum(ch for ch, _ in srcs), srcs[0][1])
        elif sp.kind == "upsample":
            cur = (prev[0], prev[1] * 2)
        elif sp.kind == "detect":
            cur = prev
        else:
            raise ConfigError(f"unknown layer kind {sp.kind!r}")
        shapes.append(cur)
        prev = cur
    return shapes


class _ConvBlock(nn.Sequential):
    """Convolution + batch norm + leaky ReLU (slope 0.1)."""

    def __init__(self, in_ch, out_ch, kernel_size, stride):
        super().__init__(
            nn.Conv2d(in_ch, out_ch, kernel_size, stride, padding=(kernel_size - 1) // 2, bias=False),
            nn.BatchNorm2d(out_ch),
            nn.LeakyReLU(0.1, inplace=True),
        )


class ComicDetector(nn.Module):
    """The schedule realized as a torch module.

    ``forward`` takes a normalized batch (N, 3, S, S) and returns the three
    raw head tensors (N, head_depth, S_i, S_i), coarsest scale first.
    """

    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        self.cfg = cfg
        self.schedule = build_layer_schedule(cfg.head_depth)
        shapes = trace_shapes(self.schedule, cfg.input_size, cfg.width_multiplier)

        modules = []
        in_ch = 3
        for i, sp in enumerate(self.schedule):
            if sp.kind == "conv":
                modules.append(_ConvBlock(in_ch, shapes[i][0], sp.kernel_size, sp.stride))
            elif sp.kind == "conv_linear":
                modules.append(nn.Conv2d(in_ch, sp.out_channels, sp.kernel_size, bias=True))
            else:
                modules.append(None)
            in_ch = shapes[i][0]
        self.layers = nn.ModuleList(m if m is not None else nn.Identity() for m in modules)

        # Outputs referenced by later shortcut/route layers must be cached.
        self._cached = set()
        for sp in self.schedule:
            self._cached.update(sp.sources)

    def forward(self, x, zero_route_sources=()):
        """Run the schedule.  ``zero_route_sources`` zeroes the named layer
        outputs where they enter a concatenation (for wiring diagnostics);
        the main backbone flow through those layers is unaffected."""
        zero_route_sources = frozenset(zero_route_sources)
        cache: dict[int, torch.Tensor] = {}
        heads: list[torch.Tensor] = []
        prev = x
        for i, sp in enumerate(self.schedule):
            if sp.kind in ("conv", "conv_linear"):
                cur = self.layers[i](prev)
            elif sp.kind == "shortcut":
                cur = cache[sp.sources[0]] + prev
            elif sp.kind == "route":
                parts = []
                for s in sp.sources:
                    t = cache[s]
                    if s in zero_route_sources:
                        t = torch.zeros_like(t)
                    parts.append(t)
                cur = parts[0] if len(parts) == 1 else torch.cat(parts, dim=1)
            elif sp.kind == "upsample":
                cur = F.interpolate(prev, scale_factor=2, mode="nearest")
            else:  # detect
                heads.append(prev)
                cur = prev
            if i in self._cached:
                cache[i] = cur
            prev = cur
        return tuple(heads)


@dataclass(frozen=True)
class DetectionHeads:
    """Raw (pre-activation) output grids, each (S, S, head_depth)."""

    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray

    def grids(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.p1, self.p2, self.p3)


def build_network(cfg: NetworkConfig, seed: int | None = None) -> ComicDetector:
    """Construct a detector; a seed makes the weight initialization reproducible."""
    if seed is not None:
        torch.manual_seed(seed)
    return ComicDetector(cfg)


def forward(net: ComicDetector, image: np.ndarray) -> DetectionHeads:
    """Single-image inference returning raw head grids.

    ``image`` is (input_size, input_size, 3) float in [0, 1].  Runs in eval
    mode without gradients, so repeated calls are bit-identical.
    """
    size = net.cfg.input_size
    image = np.asarray(image)
    if image.shape != (size, size, 3):
        raise ValueError(f"expected a ({size}, {size}, 3) image, got {image.shape}")
    if image.min() < 0.0 or image.max() > 1.0:
        raise ValueError("image channels must be normalized to [0, 1]")
    x = torch.from_numpy(np.ascontiguousarray(image, dtype=np.float32)).permute(2, 0, 1).unsqueeze(0)
    was_training = net.training
    net.eval()
    with torch.no_grad():
        tensors = net(x)
    if was_training:
        net.train()
    return heads_from_tensors(tensors)


def heads_from_tensors(tensors, index: int = 0) -> DetectionHeads:
    """Convert (N, depth, S, S) head tensors to one sample's numpy grids (S, S, depth)."""
    grids = []
    for t in tensors:
        g = t[index].detach().permute(1, 2, 0).contiguous().cpu().numpy()
        grids.append(g)
    return DetectionHeads(*grids)


def class_probabilities(logits, mode: str):
    """Class scores from raw logits along the last axis.

    softmax: exp(y_j) / sum_i exp(y_i) with a max shift for stability; the
    result sums to 1.  sigmoid: 1 / (1 + exp(-y_j)) independently per
    class, no sum constraint.
    """
    y = np.asarray(logits, dtype=np.float64)
    if mode == "softmax":
        shifted = y - y.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=-1, keepdims=True)
    if mode == "sigmoid":
        out = np.empty_like(y)
        pos = y >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-y[pos]))
        ey = np.exp(y[~pos])
        out[~pos] = ey / (1.0 + ey)
        return out
    raise ConfigError(f"unknown head mode {mode!r}")


def parameter_count(net: ComicDetector) -> int:
    """Number of trainable scalars."""
    return sum(p.numel() for p in net.parameters() if p.requires_grad)


def save_checkpoint(path, net: ComicDetector) -> None:
    """Versioned container of named parameter arrays plus the config."""
    torch.save(
        {
            "version": CHECKPOINT_VERSION,
            "config": net.cfg.to_dict(),
            "state_dict": net.state_dict(),
        },
        path,
    )


def load_checkpoint(path, expected: NetworkConfig | None = None) -> ComicDetector:
    """Rebuild a detector from a checkpoint.

    If ``expected`` is given the stored config must match it exactly.
    """
    blob = torch.load(path, map_location="cpu", weights_only=True)
    if not isinstance(blob, dict) or blob.get("version") != CHECKPOINT_VERSION:
        raise ComicdetError(f"unsupported checkpoint format in {path}")
    cfg = NetworkConfig.from_dict(blob["config"])
    if expected is not None and cfg != expected:
        raise ConfigError("checkpoint config does not match the requested configuration")
    net = ComicDetector(cfg)
    net.load_state_dict(blob["state_dict"])
    return net


def load_pretrained_backbone(net: ComicDetector, path) -> int:
    """Transfer-learning hook: copy parameters with matching name and shape
    from another checkpoint into ``net``.  Returns the number of tensors
    copied; entries that do not line up are skipped silently."""
    blob = torch.load(path, map_location="cpu", weights_only=True)
    state = blob["state_dict"] if isinstance(blob, dict) and "state_dict" in blob else blob
    own = net.state_dict()
    copied = 0
    for name, tensor in state.items():
        if name in own and own[name].shape == tensor.shape:
            own[name] = tensor
            copied += 1
    net.load_state_dict(own)
    return copied
