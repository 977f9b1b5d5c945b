"""DCGAN-style generator/discriminator, training loop and checkpoints.

Generator: linear projection to a 4x4 feature map, then stride-2
transposed-conv blocks with batchnorm + ReLU, tanh output.
Discriminator: mirrored stride-2 convs with leaky ReLU, sigmoid head.
"""

import math
import os
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from . import serialization
from .errors import CheckpointError, DataError, DimensionError, TrainingFailure
from .images import check_image, from_nchw, to_nchw

GAN_FORMAT_VERSION = "gan-v1"

SUPPORTED_RESOLUTIONS = (16, 32, 64, 128)


def _n_blocks(resolution):
    if resolution not in SUPPORTED_RESOLUTIONS:
        raise DimensionError(f"unsupported resolution {resolution}")
    return int(math.log2(resolution)) - 2  # 4x4 seed map


class Generator(nn.Module):
    def __init__(self, latent_dim=100, resolution=32, base_channels=64):
        super().__init__()
        self.latent_dim = latent_dim
        self.resolution = resolution
        n = _n_blocks(resolution)
        ch = base_channels * (2 ** (n - 1))
        self.project = nn.Linear(latent_dim, ch * 4 * 4)
        self.seed_channels = ch
        blocks = []
        for i in range(n - 1):
            blocks += [
                nn.ConvTranspose2d(ch, ch // 2, 4, stride=2, padding=1),
                nn.BatchNorm2d(ch // 2),
                nn.ReLU(inplace=True),
            ]
            ch //= 2
        blocks += [nn.ConvTranspose2d(ch, 3, 4, stride=2, padding=1), nn.Tanh()]
        self.blocks = nn.Sequential(nn.BatchNorm2d(self.seed_channels), nn.ReLU(inplace=True), *blocks)

    def forward(self, z):
        x = self.project(z).view(-1, self.seed_channels, 4, 4)
        return self.blocks(x)


class Discriminator(nn.Module):
    def __init__(self, resolution=32, base_channels=64):
        super().__init__()
        self.resolution = resolution
        n = _n_blocks(resolution)
        layers = [nn.Conv2d(3, base_channels, 4, stride=2, padding=1), nn.LeakyReLU(0.2, inplace=True)]
        ch = base_channels
        for i in range(n - 1):
            layers += [
                nn.Conv2d(ch, ch * 2, 4, stride=2, padding=1),
                nn.BatchNorm2d(ch * 2),
                nn.LeakyReLU(0.2, inplace=True),
            ]
            ch *= 2
        self.features = nn.Sequential(*layers)
        self.head = nn.Linear(ch * 4 * 4, 1)

    def forward(self, x):
        """Logit of the real-image probability."""
        h = self.features(x)
        return self.head(h.flatten(1)).squeeze(1)

    def prob(self, x):
        return torch.sigmoid(self.forward(x))


@dataclass
class GanTrainConfig:
    batch_size: int = 64
    steps: int = 3000
    lr_g: float = 3e-4
    lr_d: float = 5e-5
    seed: int = 0
    real_label: float = 0.9  # one-sided label smoothing

    def validate(self):
        if self.batch_size <= 0 or self.steps < 0:
            raise ValueError("batch_size must be positive and steps non-negative")
        if self.lr_g <= 0 or self.lr_d <= 0:
            raise ValueError("learning rates must be positive")


class ModelCheckpoint:
    """Frozen generator + discriminator pair with training metadata."""

    def __init__(self, generator, discriminator, latent_dim, resolution,
                 base_channels=64, step=0, loss_history=None):
        self.generator = generator
        self.discriminator = discriminator
        self.latent_dim = latent_dim
        self.resolution = resolution
        self.base_channels = base_channels
        self.step = step
        self.loss_history = loss_history or []
        self.generator.eval()
        self.discriminator.eval()

    @property
    def dtype(self):
        return next(self.generator.parameters()).dtype

    def to_double(self):
        self.generator.double()
        self.discriminator.double()
        return self

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        g_index = serialization.write_payload(self.generator, os.path.join(directory, "generator.bin"))
        d_index = serialization.write_payload(self.discriminator, os.path.join(directory, "discriminator.bin"))
        serialization.write_manifest(directory, {
            "format_version": GAN_FORMAT_VERSION,
            "latent_dim": self.latent_dim,
            "resolution": list((self.resolution, self.resolution)),
            "base_channels": self.base_channels,
            "step": self.step,
            "loss_history": self.loss_history,
            "generator_index": g_index,
            "discriminator_index": d_index,
        })

    @classmethod
    def load(cls, directory):
        m = serialization.read_manifest(directory)
        if m.get("format_version") != GAN_FORMAT_VERSION:
            raise CheckpointError(
                f"{directory}: expected format {GAN_FORMAT_VERSION}, got {m.get('format_version')}"
            )
        resolution = int(m["resolution"][0])
        g = Generator(m["latent_dim"], resolution, m["base_channels"])
        d = Discriminator(resolution, m["base_channels"])
        serialization.read_payload(g, os.path.join(directory, "generator.bin"), m["generator_index"])
        serialization.read_payload(d, os.path.join(directory, "discriminator.bin"), m["discriminator_index"])
        return cls(g, d, m["latent_dim"], resolution, m["base_channels"],
                   step=m["step"], loss_history=m["loss_history"])


def random_checkpoint(latent_dim=100, resolution=32, base_channels=64, seed=0):
    """Freshly initialized (untrained) generator/discriminator pair."""
    torch.manual_seed(seed)
    g = Generator(latent_dim, resolution, base_channels)
    d = Discriminator(resolution, base_channels)
    return ModelCheckpoint(g, d, latent_dim, resolution, base_channels)


def sample_prior(n, latent_dim, rng):
    """z ~ U[-1,1]^d."""
    return rng.uniform(-1.0, 1.0, size=(n, latent_dim)).astype(np.float64)


def _check_latents(z_batch, latent_dim):
    zs = [np.asarray(z, dtype=np.float64) for z in z_batch]
    for z in zs:
        if z.shape != (latent_dim,):
            raise DimensionError(f"latent has shape {z.shape}, expected ({latent_dim},)")
    return np.stack(zs)


def generate(z_batch, checkpoint):
    """Decode a batch of latents to images in [-1,1]."""
    zs = _check_latents(z_batch, checkpoint.latent_dim)
    checkpoint.generator.eval()
    with torch.no_grad():
        out = checkpoint.generator(torch.as_tensor(zs).to(checkpoint.dtype))
    return from_nchw(out)


def discriminate(images, checkpoint):
    """Real-image probabilities, each strictly in (0,1)."""
    res = (checkpoint.resolution, checkpoint.resolution)
    for im in images:
        check_image(im, res)
    checkpoint.discriminator.eval()
    with torch.no_grad():
        p = checkpoint.discriminator.prob(to_nchw(images, checkpoint.dtype))
    return [float(v) for v in p]


def train_gan(dataset, config=None, base_channels=64, latent_dim=100):
    """Adversarial training on a dataset manifest; returns a checkpoint.

    Alternates single D and G steps; G uses the non-saturating loss.
    Per-step history records (d_loss, g_loss, d_real_mean, d_fake_mean).
    """
    config = config or GanTrainConfig()
    config.validate()
    items = dataset.items
    if not items:
        raise DataError("empty dataset")
    resolution = dataset.resolution
    images = np.stack([dataset.load_image(it) for it in items])
    if images.shape[1] != resolution or images.shape[2] != resolution:
        raise DataError(f"dataset images are {images.shape[1:3]}, expected {resolution}")

    torch.manual_seed(config.seed)
    g = Generator(latent_dim, resolution, base_channels)
    d = Discriminator(resolution, base_channels)
    rng = np.random.default_rng(config.seed)
    opt_g = torch.optim.Adam(g.parameters(), lr=config.lr_g, betas=(0.5, 0.999))
    opt_d = torch.optim.Adam(d.parameters(), lr=config.lr_d, betas=(0.5, 0.999))
    bce = nn.BCEWithLogitsLoss()
    history = []

    g.train()
    d.train()
    for step in range(config.steps):
        idx = rng.integers(0, len(images), size=config.batch_size)
        real = to_nchw(images[idx], torch.float32)
        z = torch.as_tensor(sample_prior(config.batch_size, latent_dim, rng)).float()

        # discriminator step
        fake = g(z).detach()
        logits_real = d(real)
        logits_fake = d(fake)
        d_loss = bce(logits_real, torch.full_like(logits_real, config.real_label)) + \
            bce(logits_fake, torch.zeros_like(logits_fake))
        opt_d.zero_grad()
        d_loss.backward()
        opt_d.step()

        # generator step (non-saturating)
        z = torch.as_tensor(sample_prior(config.batch_size, latent_dim, rng)).float()
        logits_fake = d(g(z))
        g_loss = bce(logits_fake, torch.ones_like(logits_fake))
        opt_g.zero_grad()
        g_loss.backward()
        opt_g.step()

        d_real = float(torch.sigmoid(logits_real.detach()).mean())
        d_fake = float(torch.sigmoid(logits_fake.detach()).mean())
        d_loss_v = float(d_loss.detach())
        g_loss_v = float(g_loss.detach())
        if not (math.isfinite(d_loss_v) and math.isfinite(g_loss_v)):
            raise TrainingFailure(f"non-finite GAN loss at step {step}", step=step)
        history.append((d_loss_v, g_loss_v, d_real, d_fake))

    return ModelCheckpoint(g, d, latent_dim, resolution, base_channels,
                           step=config.steps, loss_history=history)
