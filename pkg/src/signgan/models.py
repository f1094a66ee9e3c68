"""Networks: semantic parser (A1), parsing predictor (B), dual-encoder
generator (C), conditional patch discriminator (D), plus the single-encoder
pix2pix generator used as an ablation baseline.

All networks share one conv vocabulary: 4x4 stride-2 convolutions, channel
doubling capped at ``8 * base_channels``, instance norm everywhere except the
first encoder block, the bottleneck and the output layer.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn

from .core import Frame, ModelConfig, argmax_decode, normalize
from .errors import ShapeError

DISCRIMINATOR_STRIDES = 3


def level_channels(config: ModelConfig) -> List[int]:
    """Output channels of each encoder level, shallow to deep."""
    base = config.base_channels
    return [min(base * 2 ** k, base * 8) for k in range(config.depth)]


def _norm(ch: int) -> nn.Module:
    return nn.InstanceNorm2d(ch, affine=True)


def _down(cin: int, cout: int, norm: bool) -> nn.Sequential:
    layers = [nn.Conv2d(cin, cout, 4, 2, 1, bias=not norm)]
    if norm:
        layers.append(_norm(cout))
    layers.append(nn.LeakyReLU(0.2))
    return nn.Sequential(*layers)


def _up(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(nn.ConvTranspose2d(cin, cout, 4, 2, 1, bias=False), _norm(cout), nn.ReLU())


def _check_input(x: torch.Tensor, channels: int, size: int, what: str) -> None:
    if x.dim() != 4 or x.shape[1] != channels or x.shape[2] != size or x.shape[3] != size:
        raise ShapeError(f"{what}: expected (N, {channels}, {size}, {size}), got {tuple(x.shape)}")


class Encoder(nn.Module):
    def __init__(self, in_channels: int, config: ModelConfig):
        super().__init__()
        chs = level_channels(config)
        blocks = []
        for k, cout in enumerate(chs):
            cin = in_channels if k == 0 else chs[k - 1]
            # no norm on the first block or the bottleneck
            blocks.append(_down(cin, cout, norm=0 < k < len(chs) - 1))
        self.blocks = nn.ModuleList(blocks)

    def forward(self, x: torch.Tensor) -> List[torch.Tensor]:
        feats = []
        for block in self.blocks:
            x = block(x)
            feats.append(x)
        return feats


class Decoder(nn.Module):
    """Upsampling path that merges skips from ``n_encoders`` encoders."""

    def __init__(self, config: ModelConfig, out_channels: int, n_encoders: int, out_activation: Optional[nn.Module]):
        super().__init__()
        chs = level_channels(config)
        d = len(chs)
        ups = []
        cin = n_encoders * chs[-1]
        for k in range(d - 1, 0, -1):
            ups.append(_up(cin, chs[k - 1]))
            cin = chs[k - 1] * (1 + n_encoders)
        self.ups = nn.ModuleList(ups)
        self.final = nn.ConvTranspose2d(cin, out_channels, 4, 2, 1)
        self.out_activation = out_activation or nn.Identity()

    def forward(self, *encoder_feats: Sequence[torch.Tensor]) -> torch.Tensor:
        y = torch.cat([f[-1] for f in encoder_feats], dim=1)
        for i, up in enumerate(self.ups):
            level = len(self.ups) - 1 - i
            y = torch.cat([up(y)] + [f[level] for f in encoder_feats], dim=1)
        return self.out_activation(self.final(y))


class UNet(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, config: ModelConfig,
                 out_activation: Optional[nn.Module] = None):
        super().__init__()
        self.config = config
        self.in_channels = in_channels
        self.encoder = Encoder(in_channels, config)
        self.decoder = Decoder(config, out_channels, 1, out_activation)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _check_input(x, self.in_channels, self.config.image_size, type(self).__name__)
        return self.decoder(self.encoder(x))


class SemanticParserNet(UNet):
    """Frame (3 ch) to per-category logits."""

    def __init__(self, config: ModelConfig):
        super().__init__(3, config.num_classes, config)


class ParsingPredictorNet(UNet):
    """One-hot initial parsing + target pose render to target-parsing logits."""

    def __init__(self, config: ModelConfig):
        super().__init__(config.num_classes + config.pose_channels, config.num_classes, config)


class Pix2PixGenerator(UNet):
    """Single-encoder ablation: input frame + target pose render to frame."""

    def __init__(self, config: ModelConfig):
        super().__init__(3 + config.pose_channels, 3, config, nn.Tanh())


class DualEncoderGenerator(nn.Module):
    """Two encoders (layout/pose and appearance) feeding a single decoder.

    ``enc1`` sees the one-hot predicted target parsing and the target pose
    render; ``enc2`` sees the input frame and its one-hot initial parsing. The
    decoder concatenates both bottlenecks and, at every resolution, both
    encoders' skip tensors.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.enc1_channels = config.num_classes + config.pose_channels
        self.enc2_channels = 3 + config.num_classes
        self.encoder1 = Encoder(self.enc1_channels, config)
        self.encoder2 = Encoder(self.enc2_channels, config)
        self.decoder = Decoder(config, 3, 2, nn.Tanh())

    def encode(self, enc1_in: torch.Tensor, enc2_in: torch.Tensor):
        size = self.config.image_size
        _check_input(enc1_in, self.enc1_channels, size, "encoder1")
        _check_input(enc2_in, self.enc2_channels, size, "encoder2")
        if enc1_in.shape[0] != enc2_in.shape[0]:
            raise ShapeError("encoder inputs have different batch sizes")
        return self.encoder1(enc1_in), self.encoder2(enc2_in)

    def decode(self, feats1: Sequence[torch.Tensor], feats2: Sequence[torch.Tensor]) -> torch.Tensor:
        return self.decoder(feats1, feats2)

    def forward(self, enc1_in: torch.Tensor, enc2_in: torch.Tensor) -> torch.Tensor:
        return self.decode(*self.encode(enc1_in, enc2_in))


class PatchDiscriminator(nn.Module):
    """Conditional patch discriminator emitting raw least-squares scores.

    Three stride-2 blocks then two size-preserving 3x3 convs, so the score
    map is ``image_size / 8`` on a side. No output nonlinearity.
    """

    def __init__(self, in_channels: int, config: ModelConfig):
        super().__init__()
        self.config = config
        self.in_channels = in_channels
        base = config.base_channels
        chs = [min(base * 2 ** k, base * 8) for k in range(DISCRIMINATOR_STRIDES + 1)]
        layers = [nn.Conv2d(in_channels, chs[0], 4, 2, 1), nn.LeakyReLU(0.2)]
        for k in range(1, DISCRIMINATOR_STRIDES):
            layers += [nn.Conv2d(chs[k - 1], chs[k], 4, 2, 1, bias=False), _norm(chs[k]), nn.LeakyReLU(0.2)]
        layers += [
            nn.Conv2d(chs[DISCRIMINATOR_STRIDES - 1], chs[DISCRIMINATOR_STRIDES], 3, 1, 1, bias=False),
            _norm(chs[DISCRIMINATOR_STRIDES]),
            nn.LeakyReLU(0.2),
            nn.Conv2d(chs[DISCRIMINATOR_STRIDES], 1, 3, 1, 1),
        ]
        self.net = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _check_input(x, self.in_channels, self.config.image_size, "discriminator")
        return self.net(x)


def discriminator_channels(config: ModelConfig) -> int:
    if config.architecture == "pix2pix":
        return 3 + config.pose_channels + 3
    return 3 + 2 * config.num_classes + config.pose_channels + 3


@dataclass
class Networks:
    """The four networks of one pipeline, built from a single config."""

    config: ModelConfig
    parser: SemanticParserNet
    predictor: ParsingPredictorNet
    generator: nn.Module
    discriminator: PatchDiscriminator

    def named(self) -> List[Tuple[str, nn.Module]]:
        return [("parser", self.parser), ("predictor", self.predictor),
                ("generator", self.generator), ("discriminator", self.discriminator)]

    def eval(self) -> "Networks":
        for _, net in self.named():
            net.eval()
        return self


def build_networks(config: ModelConfig) -> Networks:
    torch.manual_seed(config.seed)
    parser = SemanticParserNet(config)
    predictor = ParsingPredictorNet(config)
    generator = DualEncoderGenerator(config) if config.architecture == "dual" else Pix2PixGenerator(config)
    discriminator = PatchDiscriminator(discriminator_channels(config), config)
    return Networks(config, parser, predictor, generator, discriminator)


def count_parameters(net: nn.Module) -> int:
    return sum(p.numel() for p in net.parameters())


# -- input assembly ----------------------------------------------------------

def generator_inputs(config: ModelConfig, frame: torch.Tensor, initial_onehot: torch.Tensor,
                     predicted_onehot: torch.Tensor, pose: torch.Tensor) -> Tuple[torch.Tensor, ...]:
    """Positional generator arguments for ``config.architecture``."""
    if config.architecture == "pix2pix":
        return (torch.cat([frame, pose], dim=1),)
    return torch.cat([predicted_onehot, pose], dim=1), torch.cat([frame, initial_onehot], dim=1)


def discriminator_condition(config: ModelConfig, frame: torch.Tensor, initial_onehot: torch.Tensor,
                            parsing_onehot: torch.Tensor, pose: torch.Tensor) -> torch.Tensor:
    """Conditioning stack; the candidate frame is appended by the caller."""
    if config.architecture == "pix2pix":
        return torch.cat([frame, pose], dim=1)
    return torch.cat([frame, initial_onehot, parsing_onehot, pose], dim=1)


def logits_to_onehot(logits: torch.Tensor) -> torch.Tensor:
    """Hard one-hot of the per-pixel argmax, detached from the graph."""
    idx = logits.detach().argmax(dim=1)
    return torch.nn.functional.one_hot(idx, logits.shape[1]).permute(0, 3, 1, 2).to(logits.dtype)


def frame_tensor(f) -> torch.Tensor:
    """``1 x 3 x H x W`` normalized tensor of a Frame (either representation)."""
    if isinstance(f, Frame):
        px = f.pixels if f.normalized else normalize(f.pixels)
    else:
        px = np.asarray(f)
        if px.dtype == np.uint8:
            px = normalize(px)
    return torch.from_numpy(np.ascontiguousarray(px, dtype=np.float32)).permute(2, 0, 1).unsqueeze(0)


# -- single-network forward helpers -----------------------------------------

@torch.no_grad()
def parser_forward(net: SemanticParserNet, f) -> torch.Tensor:
    """``C x H x W`` logits for one frame."""
    was_training = net.training
    net.eval()
    try:
        x = frame_tensor(f)
        _check_input(x, 3, net.config.image_size, "parser input")
        return net(x)[0]
    finally:
        net.train(was_training)


def parse_frame(net: SemanticParserNet, f):
    """Run the parser and decode its logits into a ParsingMap."""
    return argmax_decode(parser_forward(net, f).numpy())


def predictor_forward(net: ParsingPredictorNet, initial_onehot: torch.Tensor, pose_render: torch.Tensor) -> torch.Tensor:
    return net(torch.cat([initial_onehot, pose_render], dim=1))


def generator_forward(net: nn.Module, *inputs: torch.Tensor) -> torch.Tensor:
    return net(*inputs)


def discriminator_forward(net: PatchDiscriminator, cond_stack: torch.Tensor) -> torch.Tensor:
    return net(cond_stack)
