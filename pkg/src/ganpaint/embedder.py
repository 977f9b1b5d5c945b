"""Toy identity embedder: a small conv net with a unit-norm 128-D head,
trained by identity classification on the toy dataset's labels.
"""

import math
import os
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from . import serialization
from .errors import CheckpointError, DataError, TrainingFailure
from .evaluation import EmbedderHandle
from .images import check_image, to_nchw

EMBEDDER_FORMAT_VERSION = "embedder-v1"


class ToyEmbedderNet(nn.Module):
    def __init__(self, resolution=32, e_dim=128, n_classes=10, base_channels=32):
        super().__init__()
        from .models import _n_blocks

        self.resolution = resolution
        self.e_dim = e_dim
        self.n_classes = n_classes
        n = _n_blocks(resolution)
        layers = [nn.Conv2d(3, base_channels, 4, stride=2, padding=1), nn.ReLU(inplace=True)]
        ch = base_channels
        for _ in range(n - 1):
            layers += [nn.Conv2d(ch, ch * 2, 4, stride=2, padding=1),
                       nn.BatchNorm2d(ch * 2), nn.ReLU(inplace=True)]
            ch *= 2
        self.features = nn.Sequential(*layers)
        self.embed_head = nn.Linear(ch * 4 * 4, e_dim)
        self.classifier = nn.Linear(e_dim, n_classes)

    def embed(self, x):
        e = self.embed_head(self.features(x).flatten(1))
        return F.normalize(e, dim=1)

    def forward(self, x):
        return self.classifier(self.embed(x))


@dataclass
class EmbedderTrainConfig:
    batch_size: int = 64
    steps: int = 1500
    learning_rate: float = 1e-3
    seed: int = 0
    e_dim: int = 128


class EmbedderCheckpoint:
    def __init__(self, net, resolution, step=0, loss_history=None):
        self.net = net
        self.resolution = resolution
        self.step = step
        self.loss_history = loss_history or []
        self.net.eval()

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        index = serialization.write_payload(self.net, os.path.join(directory, "embedder.bin"))
        serialization.write_manifest(directory, {
            "format_version": EMBEDDER_FORMAT_VERSION,
            "resolution": [self.resolution, self.resolution],
            "e_dim": self.net.e_dim,
            "n_classes": self.net.n_classes,
            "step": self.step,
            "loss_history": self.loss_history,
            "embedder_index": index,
        })

    @classmethod
    def load(cls, directory):
        m = serialization.read_manifest(directory)
        if m.get("format_version") != EMBEDDER_FORMAT_VERSION:
            raise CheckpointError(
                f"{directory}: expected format {EMBEDDER_FORMAT_VERSION}, got {m.get('format_version')}"
            )
        resolution = int(m["resolution"][0])
        net = ToyEmbedderNet(resolution, m["e_dim"], m["n_classes"])
        serialization.read_payload(net, os.path.join(directory, "embedder.bin"),
                                   m["embedder_index"])
        return cls(net, resolution, step=m["step"], loss_history=m["loss_history"])

    def as_handle(self):
        net = self.net
        res = (self.resolution, self.resolution)

        def embed(image):
            check_image(image, res)
            net.eval()
            with torch.no_grad():
                e = net.embed(to_nchw([image], torch.float32))
            return e[0].cpu().numpy().astype(np.float64)

        return EmbedderHandle(embed=embed, e_dim=self.net.e_dim)


def train_embedder(dataset, config=None):
    """Identity-classification training on labeled toy faces."""
    config = config or EmbedderTrainConfig()
    labeled = [it for it in dataset.items if it.identity_label is not None]
    if not labeled:
        raise DataError("dataset has no identity labels")
    images = np.stack([dataset.load_image(it) for it in labeled])
    labels = np.array([it.identity_label for it in labeled])
    n_classes = int(labels.max()) + 1

    torch.manual_seed(config.seed)
    net = ToyEmbedderNet(dataset.resolution, config.e_dim, n_classes)
    rng = np.random.default_rng(config.seed)
    opt = torch.optim.Adam(net.parameters(), lr=config.learning_rate)
    history = []
    net.train()
    for step in range(config.steps):
        idx = rng.integers(0, len(images), size=config.batch_size)
        x = to_nchw(images[idx], torch.float32)
        y = torch.as_tensor(labels[idx])
        logits = net(x)
        loss = F.cross_entropy(logits, y)
        if not math.isfinite(float(loss.detach())):
            raise TrainingFailure(f"non-finite embedder loss at step {step}", step=step)
        opt.zero_grad()
        loss.backward()
        opt.step()
        history.append(float(loss.detach()))
    return EmbedderCheckpoint(net, dataset.resolution, step=config.steps,
                              loss_history=history)
