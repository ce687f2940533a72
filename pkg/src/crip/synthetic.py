"""Procedural datasets for smoke tests, demos and acceptance runs."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .imaging import DatasetManifest, Sample, save_pgm, write_manifest

# (cycles per pixel, orientation in degrees) per texture class
TEXTURE_CLASSES = {
    "stripes": (1 / 8.0, 0.0),
    "fine": (1 / 4.0, 90.0),
    "diagonal": (1 / 6.0, 45.0),
}


def grating(size: int, freq: float, theta_deg: float, phase: float, contrast: float = 60.0,
            mean: float = 128.0) -> np.ndarray:
    r, c = np.mgrid[0:size, 0:size].astype(np.float64)
    t = np.deg2rad(theta_deg)
    return mean + contrast * np.sin(2 * np.pi * freq * (c * np.cos(t) + r * np.sin(t)) + phase)


def texture_image(label: str, rng: np.random.Generator, size: int = 64, subject_phase: float = 0.0,
                  subject_tilt: float = 0.0, noise: float = 12.0) -> np.ndarray:
    freq, theta = TEXTURE_CLASSES[label]
    img = grating(size, freq, theta + subject_tilt, subject_phase + rng.uniform(0, 2 * np.pi))
    img = img + rng.normal(0.0, noise, img.shape)
    return np.clip(img, 0, 255)


def make_texture_dataset(out_dir, n_subjects: int = 12, per_class: int = 4, size: int = 64,
                         seed: int = 0) -> DatasetManifest:
    """Write a 3-class texture set as PGM files plus ``manifest.csv``.

    Every subject contributes ``per_class`` images of each class; subjects
    differ by a phase offset, a small orientation tilt and an intensity
    gain/offset.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    samples = []
    for s in range(1, n_subjects + 1):
        subject = f"S{s:03d}"
        phase = rng.uniform(0, 2 * np.pi)
        tilt = rng.uniform(-5, 5)
        gain, offset = rng.uniform(0.7, 1.0), rng.uniform(-20, 20)
        for label in TEXTURE_CLASSES:
            for j in range(per_class):
                img = texture_image(label, rng, size, phase, tilt)
                name = f"{subject}_{label}_{j}.pgm"
                save_pgm(gain * img + offset, out / name)
                samples.append(Sample(name, subject, label))
    manifest = DatasetManifest.from_samples(samples, root=out)
    write_manifest(manifest, out / "manifest.csv")
    return manifest


def gaussian_blobs(n_per_class: int = 200, n_classes: int = 3, dim: int = 2, separation: float = 8.0,
                   sigma: float = 1.0, seed: int = 0):
    """Isotropic blobs with centers ``separation`` apart; returns (X, labels)."""
    rng = np.random.default_rng(seed)
    angles = 2 * np.pi * np.arange(n_classes) / n_classes
    # place centers on a circle whose chord between neighbours equals ``separation``
    radius = separation / (2 * np.sin(np.pi / n_classes)) if n_classes > 1 else 0.0
    X, y = [], []
    for k in range(n_classes):
        center = np.zeros(dim)
        center[0], center[1 % dim] = radius * np.cos(angles[k]), radius * np.sin(angles[k])
        X.append(center + rng.normal(0.0, sigma, (n_per_class, dim)))
        y += [f"c{k}"] * n_per_class
    return np.vstack(X), y
