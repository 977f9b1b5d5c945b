import numpy as np
import pytest

from ganpaint.errors import DimensionError, SpecError
from ganpaint.masking import (CorruptionSpec, Mask, apply_mask, load_mask_png,
                              make_mask, save_mask_png)


def test_half_left_exact():
    m = make_mask(CorruptionSpec(kind="half_left"), (64, 64))
    assert (m.bits[:, :32] == 0).all()
    assert (m.bits[:, 32:] == 1).all()
    assert (m.bits == 0).sum() == 2048


@pytest.mark.parametrize("kind", ["half_left", "half_right", "half_top", "half_bottom"])
def test_half_masks_cover_exactly_half(kind):
    m = make_mask(CorruptionSpec(kind=kind), (64, 64))
    assert (m.bits == 0).sum() == 64 * 64 // 2


def test_half_masks_seed_invariant():
    a = make_mask(CorruptionSpec(kind="half_top", seed=1), (32, 32))
    b = make_mask(CorruptionSpec(kind="half_top", seed=99), (32, 32))
    assert (a.bits == b.bits).all()


def test_central_half_fraction():
    m = make_mask(CorruptionSpec(kind="central", fraction=0.5), (64, 64))
    zeros = (m.bits == 0).sum()
    side = round(np.sqrt(0.5 * 64 * 64))
    assert side == 45
    assert zeros == side * side == 2025
    assert abs(zeros - 2048) <= 0.02 * 4096


def test_central_fraction_draw_in_range():
    fracs = set()
    for seed in range(10):
        m = make_mask(CorruptionSpec(kind="central", seed=seed), (64, 64))
        f = m.corrupted_fraction
        # side rounding keeps the count near the drawn fraction
        assert 0.35 <= f <= 0.75
        fracs.add(f)
    assert len(fracs) > 1  # different seeds draw different fractions


def test_central_fraction_out_of_range_rejected():
    with pytest.raises(SpecError):
        CorruptionSpec(kind="central", fraction=0.2)
    with pytest.raises(SpecError):
        CorruptionSpec(kind="central", fraction=0.9)


def test_checkerboard_block32_at_64():
    m = make_mask(CorruptionSpec(kind="checkerboard", block_sizes=(32,)), (64, 64))
    assert (m.bits == 0).sum() == 2048
    # alternating constant 32x32 blocks; either parity may start
    q = [m.bits[:32, :32], m.bits[:32, 32:], m.bits[32:, :32], m.bits[32:, 32:]]
    vals = [b[0, 0] for b in q]
    for b, v in zip(q, vals):
        assert (b == v).all()
    assert vals[0] == vals[3] != vals[1] == vals[2]


def test_checkerboard_both_phases_occur():
    corners = {int(make_mask(CorruptionSpec(kind="checkerboard", block_sizes=(8,),
                                            seed=s), (32, 32)).bits[0, 0])
               for s in range(20)}
    assert corners == {0, 1}


def test_checkerboard_oversized_block_rejected():
    with pytest.raises(SpecError):
        make_mask(CorruptionSpec(kind="checkerboard", block_sizes=(128,)), (64, 64))


def test_checkerboard_non_alternating_block_rejected():
    with pytest.raises(SpecError):
        make_mask(CorruptionSpec(kind="checkerboard", block_sizes=(32,)), (32, 32))


@pytest.mark.parametrize("seed", range(5))
def test_freehand_fraction_window(seed):
    m = make_mask(CorruptionSpec(kind="freehand", seed=seed), (64, 64))
    assert 0.30 <= m.corrupted_fraction <= 0.50


def test_freehand_strokes_connected():
    from scipy import ndimage

    m = make_mask(CorruptionSpec(kind="freehand", seed=3), (64, 64))
    corrupted = (m.bits == 0).astype(int)
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])  # 4-connectivity
    _, n_components = ndimage.label(corrupted, structure=structure)
    # union of at most n_strokes 4-connected strokes
    assert 1 <= n_components <= 8


def test_make_mask_deterministic():
    spec = CorruptionSpec(kind="freehand", seed=11)
    a = make_mask(spec, (32, 32))
    b = make_mask(spec, (32, 32))
    assert (a.bits == b.bits).all()


def test_resolution_minimum():
    with pytest.raises(SpecError):
        make_mask(CorruptionSpec(kind="half_left"), (8, 8))


def test_mask_invariants_rejected():
    with pytest.raises(SpecError):
        Mask(bits=np.ones((32, 32), dtype=np.uint8), kind="central")
    with pytest.raises(SpecError):
        Mask(bits=np.zeros((32, 32), dtype=np.uint8), kind="central")
    with pytest.raises(SpecError):
        Mask(bits=np.full((32, 32), 2, dtype=np.uint8), kind="central")


def test_apply_mask_identity_like():
    rng = np.random.default_rng(0)
    img = rng.uniform(-1, 1, (32, 32, 3)).astype(np.float32)
    bits = np.ones((32, 32), dtype=np.uint8)
    bits[0, 0] = 0
    m = Mask(bits=bits, kind="freehand")
    out = apply_mask(img, m)
    assert (out[bits == 1] == img[bits == 1]).all()
    assert (out[0, 0] == 0.0).all()


def test_apply_mask_half_left_substitution():
    img = np.ones((64, 64, 3), dtype=np.float32)
    m = make_mask(CorruptionSpec(kind="half_left"), (64, 64))
    out = apply_mask(img, m)
    assert (out[:, :32] == 0.0).all()
    assert (out[:, 32:] == 1.0).all()


def test_apply_mask_shape_mismatch():
    img = np.zeros((32, 32, 3), dtype=np.float32)
    m = make_mask(CorruptionSpec(kind="half_left"), (64, 64))
    with pytest.raises(DimensionError):
        apply_mask(img, m)


@pytest.mark.parametrize("kind,seed", [("central", 0), ("freehand", 1),
                                       ("checkerboard", 2), ("half_bottom", 3)])
def test_context_pixels_untouched(kind, seed):
    rng = np.random.default_rng(seed)
    img = rng.uniform(-1, 1, (64, 64, 3)).astype(np.float32)
    m = make_mask(CorruptionSpec(kind=kind, seed=seed), (64, 64))
    out = apply_mask(img, m)
    mm = m.bits[:, :, None]
    assert (out * mm == img * mm).all()


def test_mask_png_roundtrip(tmp_path):
    m = make_mask(CorruptionSpec(kind="freehand", seed=5), (64, 64))
    p = tmp_path / "mask.png"
    save_mask_png(m, p)
    loaded = load_mask_png(p, kind="freehand")
    assert (loaded.bits == m.bits).all()
