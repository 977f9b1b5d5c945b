"""Corruption masks: central square, checkerboard, freehand strokes, half-frame.

Convention: mask value 1 = uncorrupted (kept) pixel, 0 = corrupted.
"""

from dataclasses import dataclass, field

import numpy as np
from PIL import Image as PILImage

from .errors import DimensionError, SpecError
from .images import check_image

MASK_KINDS = (
    "central",
    "checkerboard",
    "freehand",
    "half_left",
    "half_right",
    "half_top",
    "half_bottom",
)

HALF_KINDS = ("half_left", "half_right", "half_top", "half_bottom")

CENTRAL_FRACTION_RANGE = (0.40, 0.70)
FREEHAND_FRACTION_RANGE = (0.35, 0.45)


@dataclass(frozen=True)
class Mask:
    bits: np.ndarray  # {0,1} uint8, H x W
    kind: str

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise DimensionError(f"mask must be 2-D, got shape {bits.shape}")
        if not np.isin(bits, (0, 1)).all():
            raise SpecError("mask values must be exactly 0 or 1")
        if bits.min() == 1:
            raise SpecError("mask corrupts nothing")
        if bits.max() == 0:
            raise SpecError("mask leaves no context")
        object.__setattr__(self, "bits", bits.astype(np.uint8))

    @property
    def corrupted_fraction(self):
        return float((self.bits == 0).mean())


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str
    fraction: float | None = None  # central: drawn from [0.4, 0.7] when None
    block_sizes: tuple = (8, 16, 32)
    n_strokes_range: tuple = (3, 8)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in MASK_KINDS:
            raise SpecError(f"unknown mask kind {self.kind!r}")
        if self.kind == "central" and self.fraction is not None:
            lo, hi = CENTRAL_FRACTION_RANGE
            if not (lo <= self.fraction <= hi):
                raise SpecError(f"central fraction {self.fraction} outside [{lo}, {hi}]")


def make_mask(spec, resolution):
    """Deterministic mask of the requested kind at (H, W)."""
    H, W = resolution
    if H < 16 or W < 16:
        raise SpecError(f"resolution {resolution} below 16x16 minimum")
    rng = np.random.default_rng(spec.seed)
    if spec.kind in HALF_KINDS:
        bits = _half_mask(spec.kind, H, W)
    elif spec.kind == "central":
        f = spec.fraction
        if f is None:
            f = rng.uniform(*CENTRAL_FRACTION_RANGE)
        bits = _central_mask(f, H, W)
    elif spec.kind == "checkerboard":
        bits = _checkerboard_mask(spec.block_sizes, H, W, rng)
    else:
        bits = _freehand_mask(spec, H, W, rng)
    return Mask(bits=bits, kind=spec.kind)


def _half_mask(kind, H, W):
    bits = np.ones((H, W), dtype=np.uint8)
    if kind == "half_left":
        bits[:, : W // 2] = 0
    elif kind == "half_right":
        bits[:, W - W // 2 :] = 0
    elif kind == "half_top":
        bits[: H // 2, :] = 0
    else:
        bits[H - H // 2 :, :] = 0
    return bits


def _central_mask(fraction, H, W):
    # centered square, side chosen so its area matches the fraction
    side = int(round(np.sqrt(fraction * H * W)))
    side = min(side, H, W)
    if side < 1:
        raise SpecError("central fraction too small for this resolution")
    y0 = (H - side) // 2
    x0 = (W - side) // 2
    bits = np.ones((H, W), dtype=np.uint8)
    bits[y0 : y0 + side, x0 : x0 + side] = 0
    return bits


def _checkerboard_mask(block_sizes, H, W, rng):
    if not block_sizes:
        raise SpecError("checkerboard needs at least one block size")
    # a block must fit the image and alternate at least once in each direction
    sizes = [b for b in block_sizes if 2 * b <= min(H, W)]
    if not sizes:
        raise SpecError(
            f"no checkerboard block in {tuple(block_sizes)} fits {H}x{W} with alternation"
        )
    block = int(sizes[rng.integers(0, len(sizes))])
    phase = int(rng.integers(0, 2))  # either parity may start corrupted
    yy, xx = np.meshgrid(np.arange(H) // block, np.arange(W) // block, indexing="ij")
    bits = ((yy + xx + phase) % 2).astype(np.uint8)
    return bits


def _freehand_mask(spec, H, W, rng):
    lo, hi = FREEHAND_FRACTION_RANGE
    target = spec.fraction
    if target is not None and not (0.30 <= target <= 0.50):
        raise SpecError(f"freehand fraction {target} outside [0.30, 0.50]")
    for _ in range(200):  # resample until the corrupted fraction lands in range
        bits = _draw_strokes(spec, H, W, rng)
        frac = float((bits == 0).mean())
        if target is not None:
            if abs(frac - target) <= 0.05 and 0.30 <= frac <= 0.50:
                return bits
        elif lo <= frac <= hi:
            return bits
    raise SpecError("freehand mask resampling failed to hit the target fraction")


def _draw_strokes(spec, H, W, rng):
    bits = np.ones((H, W), dtype=np.uint8)
    yy, xx = np.mgrid[0:H, 0:W]
    n_strokes = int(rng.integers(spec.n_strokes_range[0], spec.n_strokes_range[1] + 1))
    for _ in range(n_strokes):
        x = rng.uniform(0, W)
        y = rng.uniform(0, H)
        heading = rng.uniform(0, 2 * np.pi)
        width = rng.uniform(H / 16, H / 6)
        n_seg = int(rng.integers(4, 9))
        for _ in range(n_seg):
            heading += rng.uniform(-0.9, 0.9)
            length = rng.uniform(H / 8, H / 3)
            x1 = x + length * np.cos(heading)
            y1 = y + length * np.sin(heading)
            # stamp overlapping disks along the segment; step < radius keeps
            # the stroke 4-connected
            n_pts = max(2, int(np.ceil(length / max(width / 2.0, 1.0))) + 1)
            for t in np.linspace(0.0, 1.0, n_pts):
                cx = x + t * (x1 - x)
                cy = y + t * (y1 - y)
                disk = (xx - cx) ** 2 + (yy - cy) ** 2 <= (width / 2.0) ** 2
                bits[disk] = 0
            x, y = x1, y1
    if bits.min() == 1 or bits.max() == 0:
        bits[0, 0] = 1 - bits[0, 0]
    return bits


def apply_mask(image, mask):
    """Zero out (mid-gray fill) the corrupted pixels of an image."""
    image = check_image(image)
    if image.shape[:2] != mask.bits.shape:
        raise DimensionError(
            f"image {image.shape[:2]} vs mask {mask.bits.shape} shape mismatch"
        )
    return image * mask.bits[:, :, None]


def save_mask_png(mask, path):
    PILImage.fromarray((mask.bits * 255).astype(np.uint8), mode="L").save(path)


def load_mask_png(path, kind="freehand"):
    with PILImage.open(path) as im:
        arr = np.array(im.convert("L"))
    return Mask(bits=(arr >= 128).astype(np.uint8), kind=kind)
