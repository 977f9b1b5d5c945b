"""Recurrent joint warm-start: a weight-shared frame encoder feeds an
LSTM whose hidden state is mapped to one latent per frame. Trained with
per-frame MSE through the frozen generator.
"""

import math
import os
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from . import serialization
from .errors import (CheckpointError, DataError, DimensionError,
                     TrainingFailure)
from .images import check_image, to_nchw
from .initializer import (InitTrainConfig, InitializerNet,
                          _sample_masked_batch)
from .inpaint import D_CLAMP_EPS

SEQ_INIT_FORMAT_VERSION = "sequence-initializer-v1"


@dataclass
class SeqInitTrainConfig(InitTrainConfig):
    window_W: int = 3
    h_dim: int = 256
    use_perceptual: bool = False  # MSE only by default
    warm_start_encoder: bool = False

    def __post_init__(self):
        super().__post_init__()
        if self.window_W < 2:
            raise ValueError("window_W must be >= 2")
        if self.h_dim < 1:
            raise ValueError("h_dim must be positive")


class SequenceInitializerNet(nn.Module):
    """Shared CNN descriptor + single unidirectional LSTM + tanh head."""

    def __init__(self, latent_dim=100, resolution=32, base_channels=64, h_dim=256):
        super().__init__()
        self.latent_dim = latent_dim
        self.resolution = resolution
        self.h_dim = h_dim
        self.encoder = InitializerNet(latent_dim, resolution, base_channels)
        self.lstm = nn.LSTMCell(latent_dim, h_dim)
        self.head = nn.Linear(h_dim, latent_dim)

    def encode(self, frames_t):
        """Position-independent per-frame descriptor (pre-LSTM)."""
        return self.encoder(frames_t)

    def forward(self, frames_t, W):
        """frames_t: (B*W, 3, H, W) flattened windows -> (B, W, d) latents."""
        B = frames_t.shape[0] // W
        z_d = self.encode(frames_t).view(B, W, self.latent_dim)
        h = frames_t.new_zeros(B, self.h_dim)
        c = frames_t.new_zeros(B, self.h_dim)
        outs = []
        for k in range(W):
            h, c = self.lstm(z_d[:, k], (h, c))
            outs.append(torch.tanh(self.head(h)))
        return torch.stack(outs, dim=1)


class SequenceInitCheckpoint:
    def __init__(self, net, latent_dim, resolution, base_channels=64,
                 h_dim=256, window_W=3, step=0, loss_history=None):
        self.net = net
        self.latent_dim = latent_dim
        self.resolution = resolution
        self.base_channels = base_channels
        self.h_dim = h_dim
        self.window_W = window_W
        self.step = step
        self.loss_history = loss_history or []
        self.net.eval()

    @property
    def dtype(self):
        return next(self.net.parameters()).dtype

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        index = serialization.write_payload(self.net, os.path.join(directory, "seq_initializer.bin"))
        serialization.write_manifest(directory, {
            "format_version": SEQ_INIT_FORMAT_VERSION,
            "latent_dim": self.latent_dim,
            "resolution": [self.resolution, self.resolution],
            "base_channels": self.base_channels,
            "h_dim": self.h_dim,
            "window_W": self.window_W,
            "step": self.step,
            "loss_history": self.loss_history,
            "seq_initializer_index": index,
        })

    @classmethod
    def load(cls, directory):
        m = serialization.read_manifest(directory)
        if m.get("format_version") != SEQ_INIT_FORMAT_VERSION:
            raise CheckpointError(
                f"{directory}: expected format {SEQ_INIT_FORMAT_VERSION}, got {m.get('format_version')}"
            )
        resolution = int(m["resolution"][0])
        net = SequenceInitializerNet(m["latent_dim"], resolution,
                                     m["base_channels"], m["h_dim"])
        serialization.read_payload(net, os.path.join(directory, "seq_initializer.bin"),
                                   m["seq_initializer_index"])
        return cls(net, m["latent_dim"], resolution, m["base_channels"],
                   h_dim=m["h_dim"], window_W=m["window_W"],
                   step=m["step"], loss_history=m["loss_history"])


def predict_latent_sequence(frames, checkpoint):
    """Jointly predicted warm-start latents for one window of W frames."""
    W = checkpoint.window_W
    if len(frames) != W:
        raise DimensionError(f"expected window of {W} frames, got {len(frames)}")
    res = (checkpoint.resolution, checkpoint.resolution)
    for f in frames:
        check_image(f, res)
    checkpoint.net.eval()
    with torch.no_grad():
        z = checkpoint.net(to_nchw(frames, checkpoint.dtype), W)
    return [z[0, k].cpu().numpy().astype(np.float64) for k in range(W)]


def _training_windows(dataset, rng, batch_size, W, resolution, kinds):
    """Sample windows: real sequence snippets when available, else pseudo
    windows (one still image under W independent masks)."""
    sequences = [items for items in dataset.sequences().values() if len(items) >= W]
    stills = [it for it in dataset.items if it.sequence_id is None]
    clean_windows = []
    for _ in range(batch_size):
        use_seq = sequences and (not stills or rng.uniform() < 0.5)
        if use_seq:
            items = sequences[int(rng.integers(0, len(sequences)))]
            start = int(rng.integers(0, len(items) - W + 1))
            clean_windows.append([dataset.load_image(it) for it in items[start:start + W]])
        else:
            img = dataset.load_image(stills[int(rng.integers(0, len(stills)))])
            clean_windows.append([img] * W)
    clean_flat = [f for win in clean_windows for f in win]
    damaged_flat = _sample_masked_batch(clean_flat, resolution, kinds, rng)
    return clean_flat, damaged_flat


def train_sequence_initializer(sequence_dataset, gan, config=None,
                               warm_start_from=None):
    """Train the recurrent warm-start against a frozen GAN checkpoint."""
    config = config or SeqInitTrainConfig()
    if not sequence_dataset.items:
        raise DataError("empty dataset")
    resolution = sequence_dataset.resolution
    if resolution != gan.resolution:
        raise DimensionError(
            f"dataset resolution {resolution} vs GAN resolution {gan.resolution}"
        )

    torch.manual_seed(config.seed)
    net = SequenceInitializerNet(gan.latent_dim, resolution, gan.base_channels,
                                 config.h_dim)
    if config.warm_start_encoder and warm_start_from is not None:
        net.encoder.load_state_dict(warm_start_from.net.state_dict())
    rng = np.random.default_rng(config.seed)
    opt = torch.optim.Adam(net.parameters(), lr=config.learning_rate, betas=(0.5, 0.999))
    gan.generator.eval()
    gan.discriminator.eval()
    for p in gan.generator.parameters():
        p.requires_grad_(False)
    for p in gan.discriminator.parameters():
        p.requires_grad_(False)

    W = config.window_W
    history = []
    net.train()
    for step in range(config.steps):
        clean_flat, damaged_flat = _training_windows(
            sequence_dataset, rng, config.batch_size, W, resolution, config.mask_kinds)
        clean_t = to_nchw(clean_flat, torch.float32)
        damaged_t = to_nchw(damaged_flat, torch.float32)
        z = net(damaged_t, W).reshape(-1, gan.latent_dim)
        gen = gan.generator(z)
        mse = ((clean_t - gen) ** 2).mean()
        loss = mse
        if config.use_perceptual and config.lambda_ > 0:
            p = gan.discriminator.prob(gen).clamp(D_CLAMP_EPS, 1.0 - D_CLAMP_EPS)
            loss = loss + config.lambda_ * torch.log(1.0 - p).mean()
        if not math.isfinite(float(loss.detach())):
            raise TrainingFailure(f"non-finite sequence-initializer loss at step {step}",
                                  step=step)
        opt.zero_grad()
        loss.backward()
        opt.step()
        history.append((float(loss.detach()), float(mse.detach())))

    for p in gan.generator.parameters():
        p.requires_grad_(True)
    for p in gan.discriminator.parameters():
        p.requires_grad_(True)
    return SequenceInitCheckpoint(net, gan.latent_dim, resolution, gan.base_channels,
                                  h_dim=config.h_dim, window_W=W,
                                  step=config.steps, loss_history=history)
