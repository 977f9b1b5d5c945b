import numpy as np
import pytest
import torch

from ganpaint.data import build_pseudo_sequence
from ganpaint.errors import CheckpointError, DimensionError
from ganpaint.images import to_nchw
from ganpaint.masking import CorruptionSpec
from ganpaint.seq_initializer import (SeqInitTrainConfig,
                                      SequenceInitCheckpoint,
                                      SequenceInitializerNet,
                                      predict_latent_sequence)

from .conftest import TOY_RESOLUTION


def _window(manifest, idx, seed, W=3):
    src = manifest.load_image(manifest.items[idx])
    ps = build_pseudo_sequence(src, W, CorruptionSpec(kind="central"), seed=seed)
    return src, ps


def test_net_shapes_and_range():
    net = SequenceInitializerNet(latent_dim=16, resolution=32,
                                 base_channels=8, h_dim=32)
    net.eval()
    with torch.no_grad():
        z = net(torch.randn(6, 3, 32, 32), W=3)
    assert z.shape == (2, 3, 16)
    assert z.abs().max() <= 1.0


def test_encoder_weight_shared_across_positions():
    """The per-frame descriptor must not depend on frame position."""
    net = SequenceInitializerNet(latent_dim=16, resolution=32,
                                 base_channels=8, h_dim=32)
    net.eval()
    frame = torch.randn(1, 3, 32, 32)
    with torch.no_grad():
        d1 = net.encode(frame)
        d2 = net.encode(torch.cat([frame, torch.randn(1, 3, 32, 32)]))[:1]
    assert torch.allclose(d1, d2)


def test_recurrence_uses_history():
    """Changing the first frame must change later frames' latents."""
    torch.manual_seed(1)
    net = SequenceInitializerNet(latent_dim=16, resolution=32,
                                 base_channels=8, h_dim=32)
    net.eval()
    frames = torch.randn(3, 3, 32, 32)
    alt = frames.clone()
    alt[0] = torch.randn(3, 32, 32)
    with torch.no_grad():
        za = net(frames, W=3)
        zb = net(alt, W=3)
    assert not torch.allclose(za[0, 1], zb[0, 1])
    assert not torch.allclose(za[0, 2], zb[0, 2])


def test_order_sensitivity():
    """Reversing the window should not just reverse the latents."""
    torch.manual_seed(2)
    net = SequenceInitializerNet(latent_dim=16, resolution=32,
                                 base_channels=8, h_dim=32)
    net.eval()
    frames = torch.randn(3, 3, 32, 32)
    with torch.no_grad():
        fwd = net(frames, W=3)
        rev = net(torch.flip(frames, dims=[0]), W=3)
    assert not torch.allclose(fwd[0, 0], rev[0, 2], atol=1e-5)


def test_predict_sequence_contract(seq_init_ckpt, toy_test):
    _, ps = _window(toy_test, 0, seed=4)
    zs = predict_latent_sequence(ps.frames, seq_init_ckpt)
    assert len(zs) == seq_init_ckpt.window_W
    for z in zs:
        assert z.shape == (seq_init_ckpt.latent_dim,)
        assert z.dtype == np.float64
        assert np.all(np.abs(z) <= 1.0)
    zs2 = predict_latent_sequence(ps.frames, seq_init_ckpt)
    for a, b in zip(zs, zs2):
        assert np.array_equal(a, b)


def test_predict_sequence_rejects_wrong_window(seq_init_ckpt, toy_test):
    _, ps = _window(toy_test, 1, seed=5, W=3)
    with pytest.raises(DimensionError):
        predict_latent_sequence(ps.frames[:2], seq_init_ckpt)


def test_training_loss_decreases(seq_init_ckpt):
    hist = np.array(seq_init_ckpt.loss_history)
    assert hist[-50:, 0].mean() < hist[:50, 0].mean()


def test_checkpoint_roundtrip(seq_init_ckpt, tmp_path, toy_test):
    seq_init_ckpt.save(tmp_path / "ck")
    loaded = SequenceInitCheckpoint.load(tmp_path / "ck")
    assert loaded.window_W == seq_init_ckpt.window_W
    assert loaded.h_dim == seq_init_ckpt.h_dim
    _, ps = _window(toy_test, 2, seed=6)
    for a, b in zip(predict_latent_sequence(ps.frames, seq_init_ckpt),
                    predict_latent_sequence(ps.frames, loaded)):
        assert np.array_equal(a, b)


def test_checkpoint_format_guard(seq_init_ckpt, tmp_path):
    seq_init_ckpt.save(tmp_path / "ck")
    import json
    import os
    mpath = tmp_path / "ck" / "manifest.json"
    m = json.loads(mpath.read_text())
    m["format_version"] = "something-else"
    mpath.write_text(json.dumps(m))
    with pytest.raises(CheckpointError):
        SequenceInitCheckpoint.load(tmp_path / "ck")


def test_config_validation():
    with pytest.raises(ValueError):
        SeqInitTrainConfig(window_W=1)
    with pytest.raises(ValueError):
        SeqInitTrainConfig(h_dim=0)
