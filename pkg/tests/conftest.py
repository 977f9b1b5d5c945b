"""Shared fixtures. Trained toy checkpoints are cached under .cache/ at
the repo root so the expensive fixtures build once per machine.
"""

import os

import numpy as np
import pytest
import torch

torch.set_num_threads(max(1, os.cpu_count() or 1))

CACHE_ROOT = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), ".cache")

TOY_RESOLUTION = 32
TOY_IDENTITIES = 20
TOY_COUNT = 1000
TOY_BASE_CHANNELS = 32
GAN_STEPS = 2000
INIT_STEPS = 1200
SEQ_INIT_STEPS = 3000
EMBEDDER_STEPS = 600
FIXTURE_SEED = 0


@pytest.fixture(scope="session")
def toy_manifest():
    from ganpaint.data import DatasetManifest, synthesize_toy_faces

    root = os.path.join(CACHE_ROOT, "toy-data")
    manifest_path = os.path.join(root, "manifest.json")
    if os.path.exists(manifest_path):
        return DatasetManifest.load(manifest_path)
    return synthesize_toy_faces(TOY_COUNT, TOY_RESOLUTION, TOY_IDENTITIES,
                                seed=FIXTURE_SEED, out_dir=root,
                                sequences_per_identity=2)


@pytest.fixture(scope="session")
def toy_split(toy_manifest):
    from ganpaint.data import split_manifest

    return split_manifest(toy_manifest, test_fraction=0.2, seed=FIXTURE_SEED)


@pytest.fixture(scope="session")
def toy_train(toy_split):
    return toy_split[0]


@pytest.fixture(scope="session")
def toy_test(toy_split):
    return toy_split[1]


@pytest.fixture(scope="session")
def gan_ckpt(toy_train):
    from ganpaint.models import GanTrainConfig, ModelCheckpoint, train_gan

    path = os.path.join(CACHE_ROOT, "gan")
    if os.path.isdir(path):
        return ModelCheckpoint.load(path)
    ckpt = train_gan(toy_train,
                     GanTrainConfig(steps=GAN_STEPS, batch_size=32, seed=FIXTURE_SEED),
                     base_channels=TOY_BASE_CHANNELS)
    ckpt.save(path)
    return ckpt


@pytest.fixture(scope="session")
def init_ckpt(toy_train, gan_ckpt):
    from ganpaint.initializer import (InitTrainConfig, InitializerCheckpoint,
                                      train_initializer)

    path = os.path.join(CACHE_ROOT, "init")
    if os.path.isdir(path):
        return InitializerCheckpoint.load(path)
    ckpt = train_initializer(
        toy_train, gan_ckpt,
        InitTrainConfig(steps=INIT_STEPS, batch_size=32, seed=FIXTURE_SEED))
    ckpt.save(path)
    return ckpt


@pytest.fixture(scope="session")
def seq_init_ckpt(toy_train, gan_ckpt, init_ckpt):
    from ganpaint.seq_initializer import (SeqInitTrainConfig,
                                          SequenceInitCheckpoint,
                                          train_sequence_initializer)

    path = os.path.join(CACHE_ROOT, "seq-init")
    if os.path.isdir(path):
        return SequenceInitCheckpoint.load(path)
    ckpt = train_sequence_initializer(
        toy_train, gan_ckpt,
        SeqInitTrainConfig(steps=SEQ_INIT_STEPS, batch_size=16, seed=FIXTURE_SEED,
                           window_W=3, h_dim=256, warm_start_encoder=True),
        warm_start_from=init_ckpt)
    ckpt.save(path)
    return ckpt


@pytest.fixture(scope="session")
def embedder_ckpt(toy_train):
    from ganpaint.embedder import (EmbedderCheckpoint, EmbedderTrainConfig,
                                   train_embedder)

    path = os.path.join(CACHE_ROOT, "embedder")
    if os.path.isdir(path):
        return EmbedderCheckpoint.load(path)
    ckpt = train_embedder(toy_train,
                          EmbedderTrainConfig(steps=EMBEDDER_STEPS, seed=FIXTURE_SEED))
    ckpt.save(path)
    return ckpt


@pytest.fixture(scope="session")
def embedder(embedder_ckpt):
    return embedder_ckpt.as_handle()


@pytest.fixture()
def tiny_ckpt():
    """d=8 float64 stack for finite-difference checks."""
    from ganpaint.models import random_checkpoint

    return random_checkpoint(latent_dim=8, resolution=32, base_channels=8,
                             seed=7).to_double()


def central_difference(f, x, eps=1e-5):
    """Central finite-difference gradient of scalar f at 1-D point x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(len(x)):
        xp = x.copy()
        xm = x.copy()
        xp[i] += eps
        xm[i] -= eps
        g[i] = (f(xp) - f(xm)) / (2 * eps)
    return g
