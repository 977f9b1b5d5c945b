"""Feed-forward warm-start network: damaged image -> latent vector.

The encoder mirrors the discriminator's conv trunk (independent weights)
with a tanh head so outputs live in the latent prior's support. Training
regresses uncorrupted images through the frozen generator with an MSE
term plus an optional realism term weighted by lambda.
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
from .inpaint import D_CLAMP_EPS
from .masking import MASK_KINDS, CorruptionSpec, apply_mask, make_mask

INIT_FORMAT_VERSION = "initializer-v1"

DEFAULT_MASK_KINDS = ("central", "checkerboard", "freehand",
                      "half_left", "half_right", "half_top", "half_bottom")


class InitializerNet(nn.Module):
    """Discriminator-shaped conv trunk with a d-dimensional tanh head."""

    def __init__(self, latent_dim=100, resolution=32, base_channels=64):
        super().__init__()
        from .models import _n_blocks  # shared block-count rule

        self.latent_dim = latent_dim
        self.resolution = resolution
        n = _n_blocks(resolution)
        layers = [nn.Conv2d(3, base_channels, 4, stride=2, padding=1),
                  nn.LeakyReLU(0.2, inplace=True)]
        ch = base_channels
        for _ in range(n - 1):
            layers += [
                nn.Conv2d(ch, ch * 2, 4, stride=2, padding=1),
                nn.BatchNorm2d(ch * 2),
                nn.LeakyReLU(0.2, inplace=True),
            ]
            ch *= 2
        self.features = nn.Sequential(*layers)
        self.head = nn.Linear(ch * 4 * 4, latent_dim)

    def forward(self, x):
        h = self.features(x)
        return torch.tanh(self.head(h.flatten(1)))


@dataclass
class InitTrainConfig:
    lambda_: float = 0.01
    batch_size: int = 64
    steps: int = 3000
    learning_rate: float = 2e-4
    seed: int = 0
    mask_kinds: tuple = DEFAULT_MASK_KINDS

    def __post_init__(self):
        if self.lambda_ < 0:
            raise ValueError("lambda_ must be >= 0")
        if self.batch_size <= 0 or self.steps < 0 or self.learning_rate <= 0:
            raise ValueError("counts and learning rate must be positive")
        for k in self.mask_kinds:
            if k not in MASK_KINDS:
                raise ValueError(f"unknown mask kind {k!r}")


class InitializerCheckpoint:
    def __init__(self, net, latent_dim, resolution, base_channels=64,
                 step=0, loss_history=None):
        self.net = net
        self.latent_dim = latent_dim
        self.resolution = resolution
        self.base_channels = base_channels
        self.step = step
        self.loss_history = loss_history or []
        self.net.eval()

    @property
    def dtype(self):
        return next(self.net.parameters()).dtype

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        index = serialization.write_payload(self.net, os.path.join(directory, "initializer.bin"))
        serialization.write_manifest(directory, {
            "format_version": INIT_FORMAT_VERSION,
            "latent_dim": self.latent_dim,
            "resolution": [self.resolution, self.resolution],
            "base_channels": self.base_channels,
            "step": self.step,
            "loss_history": self.loss_history,
            "initializer_index": index,
        })

    @classmethod
    def load(cls, directory):
        m = serialization.read_manifest(directory)
        if m.get("format_version") != INIT_FORMAT_VERSION:
            raise CheckpointError(
                f"{directory}: expected format {INIT_FORMAT_VERSION}, got {m.get('format_version')}"
            )
        resolution = int(m["resolution"][0])
        net = InitializerNet(m["latent_dim"], resolution, m["base_channels"])
        serialization.read_payload(net, os.path.join(directory, "initializer.bin"),
                                   m["initializer_index"])
        return cls(net, m["latent_dim"], resolution, m["base_channels"],
                   step=m["step"], loss_history=m["loss_history"])


def predict_latent(damaged, checkpoint):
    """Deterministic warm-start latent for one damaged image."""
    res = (checkpoint.resolution, checkpoint.resolution)
    check_image(damaged, res)
    checkpoint.net.eval()
    with torch.no_grad():
        z = checkpoint.net(to_nchw([damaged], checkpoint.dtype))
    return z[0].cpu().numpy().astype(np.float64)


def _sample_masked_batch(images, resolution, kinds, rng):
    """Corrupt a batch with freshly seeded masks of random kinds."""
    damaged = []
    for img in images:
        kind = kinds[int(rng.integers(0, len(kinds)))]
        spec = CorruptionSpec(kind=kind, seed=int(rng.integers(0, 2**31 - 1)))
        damaged.append(apply_mask(img, make_mask(spec, (resolution, resolution))))
    return damaged


def initializer_training_loss(net, gan, clean_t, damaged_t, lambda_):
    """MSE(I_u, G(P(I_d))) + lambda * mean log(1 - D(G(P(I_d))))."""
    z = net(damaged_t)
    gen = gan.generator(z)
    mse = ((clean_t - gen) ** 2).mean()
    loss = mse
    if lambda_ > 0:
        p = gan.discriminator.prob(gen).clamp(D_CLAMP_EPS, 1.0 - D_CLAMP_EPS)
        loss = loss + lambda_ * torch.log(1.0 - p).mean()
    return loss, float(mse.detach())


def train_initializer(dataset, gan, config=None):
    """Train the warm-start network against a frozen GAN checkpoint."""
    config = config or InitTrainConfig()
    if not dataset.items:
        raise DataError("empty dataset")
    resolution = dataset.resolution
    if resolution != gan.resolution:
        raise DimensionError(
            f"dataset resolution {resolution} vs GAN resolution {gan.resolution}"
        )
    images = np.stack([dataset.load_image(it) for it in dataset.items])

    torch.manual_seed(config.seed)
    net = InitializerNet(gan.latent_dim, resolution, gan.base_channels)
    rng = np.random.default_rng(config.seed)
    opt = torch.optim.Adam(net.parameters(), lr=config.learning_rate, betas=(0.5, 0.999))
    gan.generator.eval()
    gan.discriminator.eval()
    for p in gan.generator.parameters():
        p.requires_grad_(False)
    for p in gan.discriminator.parameters():
        p.requires_grad_(False)

    history = []
    net.train()
    for step in range(config.steps):
        idx = rng.integers(0, len(images), size=config.batch_size)
        clean = images[idx]
        damaged = _sample_masked_batch(clean, resolution, config.mask_kinds, rng)
        clean_t = to_nchw(clean, torch.float32)
        damaged_t = to_nchw(damaged, torch.float32)
        loss, mse = initializer_training_loss(net, gan, clean_t, damaged_t, config.lambda_)
        if not math.isfinite(float(loss.detach())):
            raise TrainingFailure(f"non-finite initializer loss at step {step}", step=step)
        opt.zero_grad()
        loss.backward()
        opt.step()
        history.append((float(loss.detach()), mse))

    for p in gan.generator.parameters():
        p.requires_grad_(True)
    for p in gan.discriminator.parameters():
        p.requires_grad_(True)
    return InitializerCheckpoint(net, gan.latent_dim, resolution, gan.base_channels,
                                 step=config.steps, loss_history=history)
