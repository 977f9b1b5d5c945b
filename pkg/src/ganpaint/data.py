"""Dataset ingestion, toy-face synthesis, pseudo sequences, manifests."""

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image as PILImage

from .errors import DataError, SpecError
from .images import from_uint8, load_png, save_png
from .masking import CorruptionSpec, Mask, apply_mask, make_mask

log = logging.getLogger(__name__)

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")


@dataclass(frozen=True)
class DatasetItem:
    item_id: str
    file_path: str
    identity_label: int | None = None
    sequence_id: str | None = None
    frame_index: int | None = None


@dataclass
class DatasetManifest:
    root_path: str
    items: list
    resolution: int
    split: str = "train"

    def __post_init__(self):
        ids = [it.item_id for it in self.items]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate item_ids in manifest")

    def load_image(self, item):
        img = load_png(os.path.join(self.root_path, item.file_path))
        if img.shape[:2] != (self.resolution, self.resolution):
            img = _crop_resize(img, self.resolution)
        return img

    def sequences(self):
        """Group sequence items by sequence_id, ordered by frame_index."""
        groups = {}
        for it in self.items:
            if it.sequence_id is not None:
                groups.setdefault(it.sequence_id, []).append(it)
        for sid in groups:
            groups[sid].sort(key=lambda it: it.frame_index)
        return groups

    def save(self, path):
        payload = {
            "root_path": self.root_path,
            "resolution": self.resolution,
            "split": self.split,
            "items": [
                {
                    "item_id": it.item_id,
                    "file_path": it.file_path,
                    "identity_label": it.identity_label,
                    "sequence_id": it.sequence_id,
                    "frame_index": it.frame_index,
                }
                for it in self.items
            ],
        }
        with open(path, "w") as f:
            json.dump(payload, f, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            payload = json.load(f)
        items = [DatasetItem(**d) for d in payload["items"]]
        return cls(payload["root_path"], items, payload["resolution"], payload["split"])


def _crop_resize(img, resolution):
    """Center-crop to square then resize."""
    h, w = img.shape[:2]
    side = min(h, w)
    y0 = (h - side) // 2
    x0 = (w - side) // 2
    crop = img[y0 : y0 + side, x0 : x0 + side]
    arr = np.clip((crop + 1.0) * 127.5, 0, 255).astype(np.uint8)
    resized = PILImage.fromarray(arr).resize((resolution, resolution), PILImage.BILINEAR)
    return from_uint8(np.array(resized))


def _split_of(item_id, seed, test_fraction):
    h = hashlib.sha256(f"{seed}:{item_id}".encode()).digest()
    return "test" if (int.from_bytes(h[:8], "big") / 2**64) < test_fraction else "train"


def load_dataset(root_path, resolution, split="train", test_fraction=0.2, seed=0):
    """Index image files under root_path into a manifest for one split."""
    root_path = os.fspath(root_path)
    if not os.path.isdir(root_path):
        raise DataError(f"dataset root {root_path} does not exist")
    paths = []
    for dirpath, _, names in os.walk(root_path):
        for name in names:
            if name.lower().endswith(IMAGE_EXTENSIONS):
                paths.append(os.path.relpath(os.path.join(dirpath, name), root_path))
    paths.sort()
    items = []
    for rel in paths:
        item_id = os.path.splitext(rel)[0].replace(os.sep, "/")
        try:
            with PILImage.open(os.path.join(root_path, rel)) as im:
                im.verify()
        except Exception:
            log.warning("skipping undecodable file %s", rel)
            continue
        if _split_of(item_id, seed, test_fraction) == split:
            items.append(DatasetItem(item_id=item_id, file_path=rel))
    if not items:
        raise DataError(f"no usable images for split {split!r} under {root_path}")
    return DatasetManifest(root_path, items, resolution, split)


# ---------------------------------------------------------------------------
# Toy face synthesis.
# Each identity fixes skin/eye/mouth colors and base geometry; each sample
# jitters pose and expression (mouth curvature, eye openness).


def _identity_params(rng):
    return {
        "skin": rng.uniform(0.1, 0.9, size=3) * np.array([1.0, 0.75, 0.6]),
        "bg": rng.uniform(-0.9, -0.2, size=3),
        "face_rx": rng.uniform(0.30, 0.40),
        "face_ry": rng.uniform(0.36, 0.46),
        "eye_dx": rng.uniform(0.12, 0.18),
        "eye_y": rng.uniform(-0.14, -0.08),
        "eye_r": rng.uniform(0.035, 0.06),
        "eye_color": rng.uniform(-1.0, -0.4, size=3),
        "mouth_y": rng.uniform(0.16, 0.24),
        "mouth_w": rng.uniform(0.14, 0.22),
        "mouth_color": np.array([rng.uniform(0.2, 0.8), -0.6, -0.5]),
        "hair_color": rng.uniform(-1.0, 0.0, size=3),
    }


def _render_face(params, expr, resolution):
    """expr: dict with cx, cy (pose jitter), mouth_curve, eye_open."""
    R = resolution
    ys, xs = np.mgrid[0:R, 0:R]
    # normalized coords in [-0.5, 0.5], shifted by pose jitter
    x = (xs + 0.5) / R - 0.5 - expr["cx"]
    y = (ys + 0.5) / R - 0.5 - expr["cy"]
    img = np.tile(params["bg"].astype(np.float32), (R, R, 1)).astype(np.float32)

    face = (x / params["face_rx"]) ** 2 + (y / params["face_ry"]) ** 2 <= 1.0
    img[face] = params["skin"]

    hair = ((x / (params["face_rx"] * 1.1)) ** 2 + ((y + 0.1) / (params["face_ry"] * 1.05)) ** 2 <= 1.0) & (
        y < -params["face_ry"] * 0.45
    )
    img[hair] = params["hair_color"]

    eye_ry = params["eye_r"] * expr["eye_open"]
    for sx in (-1.0, 1.0):
        ex = sx * params["eye_dx"]
        eye = ((x - ex) / params["eye_r"]) ** 2 + ((y - params["eye_y"]) / max(eye_ry, 1e-3)) ** 2 <= 1.0
        img[eye] = params["eye_color"]

    nose = (np.abs(x) <= 0.012) & (y > params["eye_y"] + 0.05) & (y < params["mouth_y"] - 0.06)
    img[nose] = params["skin"] * 0.6

    # mouth: horizontal band bent by a parabola in x
    mx = x / params["mouth_w"]
    inside = np.abs(mx) <= 1.0
    curve = expr["mouth_curve"] * 0.06 * (mx**2 - 0.5)
    mouth = inside & (np.abs(y - params["mouth_y"] - curve) <= 0.02)
    img[mouth] = params["mouth_color"]

    return np.clip(img, -1.0, 1.0).astype(np.float32)


def _sample_expression(rng):
    return {
        "cx": rng.uniform(-0.03, 0.03),
        "cy": rng.uniform(-0.03, 0.03),
        "mouth_curve": rng.uniform(-1.0, 1.0),
        "eye_open": rng.uniform(0.5, 1.0),
    }


def synthesize_toy_faces(count, resolution, identities, seed, out_dir,
                         sequences_per_identity=1, sequence_length=5):
    """Procedurally render a labeled toy face dataset (plus short sequences)."""
    if not (count >= identities >= 1):
        raise ValueError("need count >= identities >= 1")
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    id_params = [_identity_params(rng) for _ in range(identities)]
    items = []
    for i in range(count):
        ident = i % identities
        img = _render_face(id_params[ident], _sample_expression(rng), resolution)
        rel = f"still/{i:06d}.png"
        os.makedirs(os.path.join(out_dir, "still"), exist_ok=True)
        save_png(img, os.path.join(out_dir, rel))
        items.append(DatasetItem(item_id=f"still/{i:06d}", file_path=rel, identity_label=ident))

    # short sequences with smoothly interpolated expressions
    for ident in range(identities):
        for s in range(sequences_per_identity):
            e0 = _sample_expression(rng)
            e1 = _sample_expression(rng)
            sid = f"seq_{ident:03d}_{s:02d}"
            os.makedirs(os.path.join(out_dir, sid), exist_ok=True)
            for k in range(sequence_length):
                t = k / max(sequence_length - 1, 1)
                expr = {key: (1 - t) * e0[key] + t * e1[key] for key in e0}
                img = _render_face(id_params[ident], expr, resolution)
                rel = f"{sid}/{k:06d}.png"
                save_png(img, os.path.join(out_dir, rel))
                items.append(DatasetItem(
                    item_id=f"{sid}/{k:06d}", file_path=rel,
                    identity_label=ident, sequence_id=sid, frame_index=k,
                ))

    manifest = DatasetManifest(out_dir, items, resolution, split="train")
    manifest.save(os.path.join(out_dir, "manifest.json"))
    return manifest


def split_manifest(manifest, test_fraction=0.2, seed=0):
    """Deterministic train/test split of still (non-sequence) items."""
    train_items, test_items = [], []
    for it in manifest.items:
        if it.sequence_id is not None:
            train_items.append(it)
        elif _split_of(it.item_id, seed, test_fraction) == "test":
            test_items.append(it)
        else:
            train_items.append(it)
    return (
        DatasetManifest(manifest.root_path, train_items, manifest.resolution, "train"),
        DatasetManifest(manifest.root_path, test_items, manifest.resolution, "test"),
    )


@dataclass
class PseudoSequence:
    source_item_id: str
    source: np.ndarray
    frames: list  # damaged copies of source
    masks: list
    seed: int


def build_pseudo_sequence(image, W, mask_specs, seed, source_item_id="unknown"):
    """One image replicated W times under independently seeded masks."""
    if W < 2:
        raise SpecError(f"pseudo sequence needs W >= 2, got {W}")
    if isinstance(mask_specs, CorruptionSpec):
        mask_specs = [mask_specs] * W
    if len(mask_specs) != W:
        raise SpecError(f"expected {W} mask specs, got {len(mask_specs)}")
    rng = np.random.default_rng(seed)
    frames, masks = [], []
    for k, spec in enumerate(mask_specs):
        # resample so no two frames share the exact same corruption: a
        # duplicated mask duplicates the frame and degenerates the window
        for _ in range(100):
            sub_seed = int(rng.integers(0, 2**31 - 1))
            spec_k = CorruptionSpec(
                kind=spec.kind, fraction=spec.fraction, block_sizes=spec.block_sizes,
                n_strokes_range=spec.n_strokes_range, seed=sub_seed,
            )
            mask = make_mask(spec_k, image.shape[:2])
            if not any(np.array_equal(mask.bits, m.bits) for m in masks):
                break
        else:
            raise SpecError(
                f"could not draw {W} distinct {spec.kind!r} masks for this window"
            )
        masks.append(mask)
        frames.append(apply_mask(image, mask))
    return PseudoSequence(source_item_id, np.asarray(image), frames, masks, seed)
