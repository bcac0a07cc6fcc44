"""Corpus ingestion and deterministic train/validation/test splitting.

A corpus is a directory with one subdirectory per class, each holding PNG
or JPEG images.  Images are decoded once, converted to luminance plus two
color-difference channels, and normalized to a fixed square size.  All
downstream descriptors consume the resulting :class:`ImagePlane`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

SUPPORTED_EXTENSIONS = (".png", ".jpg", ".jpeg")

TRAIN = "train"
VALIDATION = "validation"
TEST = "test"


class CorpusError(Exception):
    """Raised for unreadable corpora: missing directories, undecodable files,
    or classes with too few samples."""


@dataclass
class ImagePlane:
    """Decoded image: luma plus blue/red color-difference channels, all in [0,1]."""

    width: int
    height: int
    luma: np.ndarray
    chroma_b: np.ndarray
    chroma_r: np.ndarray

    def __post_init__(self):
        for name in ("luma", "chroma_b", "chroma_r"):
            plane = getattr(self, name)
            if plane.shape != (self.height, self.width):
                raise ValueError(f"{name} shape {plane.shape} does not match "
                                 f"{self.height}x{self.width}")


@dataclass
class LabeledSample:
    image: ImagePlane
    class_id: int
    source_path: str


@dataclass
class SplitPlan:
    """Assignment of every sample id to train/validation/test.

    Reproducible: the same seed, counts, and corpus listing always produce
    the same assignment, and the JSON serialization is byte-identical.
    """

    seed: int
    test_per_class: int
    validation_per_class: int
    assignment: dict[str, str] = field(default_factory=dict)

    def ids(self, subset: str) -> list[str]:
        return [sid for sid, part in self.assignment.items() if part == subset]

    def to_json(self) -> str:
        payload = {
            "seed": self.seed,
            "test_per_class": self.test_per_class,
            "validation_per_class": self.validation_per_class,
            "assignment": self.assignment,
        }
        return json.dumps(payload, sort_keys=True, indent=None, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "SplitPlan":
        payload = json.loads(text)
        return cls(
            seed=payload["seed"],
            test_per_class=payload["test_per_class"],
            validation_per_class=payload["validation_per_class"],
            assignment=dict(payload["assignment"]),
        )


def rgb_to_planes(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full-range BT.601 conversion of an (H, W, 3) array in [0,1].

    Returns (luma, chroma_b, chroma_r), each in [0,1]; the color-difference
    channels carry the conventional +0.5 offset.
    """
    r = rgb[..., 0]
    g = rgb[..., 1]
    b = rgb[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = (b - y) / 1.772 + 0.5
    cr = (r - y) / 1.402 + 0.5
    return (np.clip(y, 0.0, 1.0), np.clip(cb, 0.0, 1.0), np.clip(cr, 0.0, 1.0))


def decode_image(path: Path, side: int, resize_mode: str = "crop_resize") -> ImagePlane:
    """Decode one image file to an ImagePlane of side x side pixels.

    resize_mode "crop_resize" center-crops to square before bilinear
    resizing; "stretch" resizes directly, changing aspect ratio.
    """
    try:
        with Image.open(path) as img:
            img = img.convert("RGB")
            if resize_mode == "crop_resize":
                w, h = img.size
                if w != h:
                    short = min(w, h)
                    left = (w - short) // 2
                    top = (h - short) // 2
                    img = img.crop((left, top, left + short, top + short))
            elif resize_mode != "stretch":
                raise ValueError(f"unknown resize_mode {resize_mode!r}")
            if img.size != (side, side):
                img = img.resize((side, side), Image.BILINEAR)
            rgb = np.asarray(img, dtype=np.float64) / 255.0
    except (OSError, ValueError) as exc:
        raise CorpusError(f"cannot decode {path}: {exc}") from exc
    luma, cb, cr = rgb_to_planes(rgb)
    return ImagePlane(width=side, height=side, luma=luma, chroma_b=cb, chroma_r=cr)


def list_corpus(root_dir: Path) -> tuple[list[str], dict[str, list[Path]]]:
    """Return (class names in lexicographic order, files per class in name order)."""
    root = Path(root_dir)
    if not root.is_dir():
        raise CorpusError(f"corpus directory not found: {root}")
    class_names = sorted(p.name for p in root.iterdir() if p.is_dir())
    if not class_names:
        raise CorpusError(f"no class subdirectories under {root}")
    files: dict[str, list[Path]] = {}
    for name in class_names:
        entries = sorted(
            p for p in (root / name).iterdir()
            if p.is_file() and p.suffix.lower() in SUPPORTED_EXTENSIONS
        )
        if not entries:
            raise CorpusError(f"class {name!r} has no decodable images")
        files[name] = entries
    return class_names, files


def load_corpus(
    root_dir: Path | str,
    side: int = 256,
    resize_mode: str = "crop_resize",
    skip_undecodable: bool = False,
) -> tuple[list[LabeledSample], list[str]]:
    """Load every image under root_dir/<class>/ into LabeledSamples.

    Class ids follow lexicographic subdirectory order; samples are ordered
    by class and then filename so the listing is deterministic.  Returns
    (samples, class_names).
    """
    class_names, files = list_corpus(Path(root_dir))
    samples: list[LabeledSample] = []
    for class_id, name in enumerate(class_names):
        for path in files[name]:
            try:
                plane = decode_image(path, side, resize_mode)
            except CorpusError:
                if skip_undecodable:
                    continue
                raise
            samples.append(LabeledSample(
                image=plane,
                class_id=class_id,
                source_path=f"{name}/{path.name}",
            ))
    return samples, class_names


def make_split(
    sample_ids_by_class: dict[int, list[str]],
    seed: int,
    test_per_class: int,
    validation_per_class: int = 0,
) -> SplitPlan:
    """Partition sample ids into train/validation/test, per class.

    Each class is shuffled with a generator seeded by (seed, class_id), the
    first test_per_class ids become test, the next validation_per_class
    become validation, and the remainder train.
    """
    if test_per_class < 1:
        raise ValueError("test_per_class must be >= 1")
    if validation_per_class < 0:
        raise ValueError("validation_per_class must be >= 0")
    plan = SplitPlan(seed=seed, test_per_class=test_per_class,
                     validation_per_class=validation_per_class)
    reserve = test_per_class + validation_per_class
    for class_id in sorted(sample_ids_by_class):
        ids = list(sample_ids_by_class[class_id])
        if len(ids) <= reserve:
            raise CorpusError(
                f"class {class_id} has {len(ids)} samples; needs more than "
                f"{reserve} (test {test_per_class} + validation {validation_per_class})")
        rng = np.random.default_rng(np.random.SeedSequence([seed, class_id]))
        order = rng.permutation(len(ids))
        for rank, idx in enumerate(order):
            if rank < test_per_class:
                part = TEST
            elif rank < reserve:
                part = VALIDATION
            else:
                part = TRAIN
            plan.assignment[ids[idx]] = part
    return plan


def split_samples(samples: list[LabeledSample], seed: int, test_per_class: int,
                  validation_per_class: int = 0) -> SplitPlan:
    """Convenience wrapper building the per-class id listing from samples."""
    by_class: dict[int, list[str]] = {}
    for s in samples:
        by_class.setdefault(s.class_id, []).append(s.source_path)
    return make_split(by_class, seed, test_per_class, validation_per_class)
