"""Readers for public benchmark files (never bundled)."""
from __future__ import annotations

import csv

import numpy as np

FER2013_LABELS = ("angry", "disgust", "fear", "happy", "sad", "surprise", "neutral")


def load_fer2013(path, drop_neutral: bool = False):
    """Read ``fer2013.csv`` (columns emotion, pixels, Usage).

    Returns ``{usage: (images, labels)}`` with images shaped (n, 48, 48) float64
    and usage one of ``Training``, ``PublicTest``, ``PrivateTest``.
    """
    parts = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            label = FER2013_LABELS[int(row["emotion"])]
            if drop_neutral and label == "neutral":
                continue
            pixels = np.array(row["pixels"].split(), dtype=np.float64)
            if pixels.size != 48 * 48:
                raise ValueError(f"{path}: row with {pixels.size} pixels")
            imgs, labels = parts.setdefault(row["Usage"], ([], []))
            imgs.append(pixels.reshape(48, 48))
            labels.append(label)
    return {k: (np.stack(v[0]), v[1]) for k, v in parts.items()}
