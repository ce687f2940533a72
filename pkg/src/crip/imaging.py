"""Image I/O, dataset manifests, preprocessing and perturbation generators.

Images are plain 2-D ``float64`` numpy arrays indexed ``[row, col]``.  They
are never clipped: perturbations may push intensities outside 0-255.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
from PIL import Image

MIN_SIDE = 5
DEFAULT_SIZE = 128
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

BBox = Tuple[int, int, int, int]


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class Sample:
    image_path: str
    subject_id: str
    label: str
    bbox: Optional[BBox] = None


@dataclass
class DatasetManifest:
    samples: list
    classes: list
    subjects: list
    root: Optional[Path] = field(default=None, compare=False)

    def __len__(self):
        return len(self.samples)

    def resolve(self, sample: Sample) -> Path:
        path = Path(sample.image_path)
        if not path.is_absolute() and self.root is not None:
            path = self.root / path
        return path

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], root=None) -> "DatasetManifest":
        classes = list(dict.fromkeys(s.label for s in samples))
        subjects = list(dict.fromkeys(s.subject_id for s in samples))
        return cls(list(samples), classes, subjects, Path(root) if root else None)

    def subset(self, classes: Sequence[str]) -> "DatasetManifest":
        """Restrict to a label subset, e.g. to drop the neutral class."""
        keep = set(classes)
        unknown = keep - set(self.classes)
        if unknown:
            raise ManifestError(f"unknown classes: {sorted(unknown)}")
        out = DatasetManifest.from_samples([s for s in self.samples if s.label in keep], self.root)
        out.classes = [c for c in self.classes if c in keep]
        return out


def load_manifest(path) -> DatasetManifest:
    """Read a ``path,subject,label[,x,y,w,h]`` manifest.

    Relative image paths are resolved against the manifest's directory.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    samples = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ManifestError(f"{path}: no samples")
        header = [h.strip().lower() for h in header]
        if header[:3] != ["path", "subject", "label"]:
            raise ManifestError(f"{path}:1: header must start with path,subject,label")
        has_bbox = header[3:7] == ["x", "y", "w", "h"]
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            row = [c.strip() for c in row]
            if len(row) not in (3, 7) or (len(row) == 7 and not has_bbox):
                raise ManifestError(f"{path}:{lineno}: expected 3 or 7 columns, got {len(row)}")
            if not all(row[:3]):
                raise ManifestError(f"{path}:{lineno}: empty path/subject/label")
            bbox = None
            if len(row) == 7 and any(row[3:]):
                try:
                    bbox = tuple(int(v) for v in row[3:])
                except ValueError:
                    raise ManifestError(f"{path}:{lineno}: bbox values must be integers") from None
                if bbox[2] <= 0 or bbox[3] <= 0:
                    raise ManifestError(f"{path}:{lineno}: bbox {bbox} has non-positive width/height")
                if bbox[0] < 0 or bbox[1] < 0:
                    raise ManifestError(f"{path}:{lineno}: bbox {bbox} has negative origin")
            samples.append(Sample(row[0], row[1], row[2], bbox))
    if not samples:
        raise ManifestError(f"{path}: no samples")
    return DatasetManifest.from_samples(samples, root=path.parent)


def write_manifest(manifest: DatasetManifest, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        with_bbox = any(s.bbox for s in manifest.samples)
        w.writerow(["path", "subject", "label"] + (["x", "y", "w", "h"] if with_bbox else []))
        for s in manifest.samples:
            row = [s.image_path, s.subject_id, s.label]
            if with_bbox:
                row += list(s.bbox) if s.bbox else ["", "", "", ""]
            w.writerow(row)


def as_gray(image) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D grayscale image, got shape {img.shape}")
    return img


def load_image(path) -> np.ndarray:
    """Load PGM/PNG/any Pillow-readable file as float64 gray intensities.

    Color input is reduced with Rec. 601 luma weights, without rounding.
    """
    with Image.open(path) as im:
        im.load()
        if im.mode in ("L", "I", "I;16", "F"):
            arr = np.asarray(im, dtype=np.float64)
        elif im.mode == "LA":
            arr = np.asarray(im.getchannel(0), dtype=np.float64)
        else:
            rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
            arr = rgb @ np.array(LUMA_WEIGHTS)
    return arr


def save_pgm(array, path) -> None:
    """Write an 8-bit binary PGM.  Values are rounded and clipped to 0-255."""
    arr = np.clip(np.rint(np.asarray(array, dtype=np.float64)), 0, 255).astype(np.uint8)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def resize_bilinear(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize with pixel-center alignment and edge clamping.

    Every output is a convex combination of inputs, so constants survive
    and the output range stays inside the input range.
    """
    img = as_gray(image)
    h, w = img.shape
    if (h, w) == (height, width):
        return img.copy()

    def axis(n_in, n_out):
        pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        pos = np.clip(pos, 0, n_in - 1)
        lo = np.floor(pos).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    r0, r1, fr = axis(h, height)
    c0, c1, fc = axis(w, width)
    top = img[r0][:, c0] * (1 - fc) + img[r0][:, c1] * fc
    bot = img[r1][:, c0] * (1 - fc) + img[r1][:, c1] * fc
    out = top * (1 - fr)[:, None] + bot * fr[:, None]
    # convex weights can still overshoot by an ulp
    return np.clip(out, img.min(), img.max())


def preprocess(image, bbox: Optional[BBox] = None, target: int = DEFAULT_SIZE) -> np.ndarray:
    """Crop to ``bbox`` (x, y, w, h) if given, then resize to ``target`` square."""
    img = as_gray(image)
    if target < MIN_SIDE:
        raise ValueError(f"target size must be >= {MIN_SIDE}, got {target}")
    if bbox is not None:
        x, y, w, h = bbox
        H, W = img.shape
        if w <= 0 or h <= 0 or x < 0 or y < 0 or x + w > W or y + h > H:
            raise ValueError(f"bbox {bbox} outside image of size {W}x{H}")
        img = img[y:y + h, x:x + w]
    return resize_bilinear(img, target, target)


def load_sample(manifest: DatasetManifest, sample: Sample, target: int = DEFAULT_SIZE) -> np.ndarray:
    return preprocess(load_image(manifest.resolve(sample)), sample.bbox, target)


def perturb_affine(image, gain: float, offset: float) -> np.ndarray:
    if not gain > 0:
        raise ValueError(f"gain must be > 0, got {gain}")
    return as_gray(image) * gain + offset


def perturb_noise(image, sigma: float, seed: int) -> np.ndarray:
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    img = as_gray(image)
    if sigma == 0:
        return img.copy()
    rng = np.random.default_rng(seed)
    return img + rng.normal(0.0, sigma, size=img.shape)


def perturb_resolution(image, factor: int) -> np.ndarray:
    """Simulate low resolution: downsample by ``factor``, upsample back."""
    if int(factor) != factor or factor < 1:
        raise ValueError(f"factor must be an integer >= 1, got {factor}")
    img = as_gray(image)
    if factor == 1:
        return img.copy()
    h, w = img.shape
    small = resize_bilinear(img, max(1, h // factor), max(1, w // factor))
    return resize_bilinear(small, h, w)


def list_images(directory) -> list:
    exts = {".pgm", ".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}
    return sorted(p for p in Path(directory).iterdir() if p.suffix.lower() in exts)


__all__ = [
    "BBox", "DatasetManifest", "ManifestError", "Sample", "as_gray", "list_images",
    "load_image", "load_manifest", "load_sample", "perturb_affine", "perturb_noise",
    "perturb_resolution", "preprocess", "resize_bilinear", "save_pgm", "write_manifest",
]
