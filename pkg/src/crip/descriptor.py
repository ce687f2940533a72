"""Cross-centroid ripple pattern (CRIP) and LBP code maps.

Neighborhood layout (both rings clockwise from the top-left diagonal, so
``ring1[eta]`` and ``ring2[2*eta]`` point the same way)::

    r2[0]  r2[1]  r2[2]  r2[3]  r2[4]
    r2[15] r1[0]  r1[1]  r1[2]  r2[5]
    r2[14] r1[7]  c      r1[3]  r2[6]
    r2[13] r1[6]  r1[5]  r1[4]  r2[7]
    r2[12] r2[11] r2[10] r2[9]  r2[8]

Out-of-image reads clamp to the nearest edge pixel.

The per-pixel functions below (``centroid_x``, ``centroid_y``, ``crip_code``)
are the literal reference; they accept scalars or equally-shaped arrays in
every neighborhood slot, so a stack of images can be checked in one pass.
``crip_map`` and ``lbp_map`` run the compiled kernels when available and
the numpy fallback otherwise.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _fallback
from ._fallback import TIE_RTOL
from .imaging import as_gray

try:
    if os.environ.get("CRIP_FORCE_PYTHON") == "1":
        raise ImportError("compiled kernels disabled by CRIP_FORCE_PYTHON")
    from . import _ckernels as _kernels

    BACKEND = "cython"
except ImportError:
    _kernels = _fallback
    BACKEND = "numpy"

MIN_SIDE = 5


@dataclass(frozen=True)
class RingGeometry:
    r1: int = 1
    r2: int = 2
    p: int = 8
    q: int = 16

    def __post_init__(self):
        if not self.r2 > self.r1 >= 1:
            raise ValueError(f"need r2 > r1 >= 1, got r1={self.r1}, r2={self.r2}")
        if self.q != 2 * self.p:
            raise ValueError(f"outer ring must hold twice the inner ring (q=2p), got p={self.p}, q={self.q}")
        if self.p != 8 * self.r1 or self.q != 8 * self.r2:
            raise ValueError("square rings hold 8*r pixels")
        if self.p != 8:
            raise ValueError("only 8-bit codes are supported (r1=1, r2=2)")

    def offsets(self, radius: int) -> list:
        """(drow, dcol) offsets of the square ring, clockwise from top-left."""
        r = radius
        ring = [(-r, dc) for dc in range(-r, r)]
        ring += [(dr, r) for dr in range(-r, r)]
        ring += [(r, dc) for dc in range(r, -r, -1)]
        ring += [(dr, -r) for dr in range(r, -r, -1)]
        return ring


DEFAULT_GEOMETRY = RingGeometry()


@dataclass(frozen=True)
class Neighborhood:
    center: object
    ring1: tuple
    ring2: tuple

    def values(self) -> list:
        return [self.center, *self.ring1, *self.ring2]


def _check_eta(eta: int, p: int = 8) -> None:
    if not 0 <= eta < p:
        raise ValueError(f"direction index must be in [0, {p - 1}], got {eta}")


def parity_k(eta: int) -> int:
    _check_eta(eta)
    return (eta + 1) % 2 + 1


def parity_l(eta: int) -> int:
    _check_eta(eta)
    return eta % 2


def sample_neighborhood(image, row: int, col: int, geom: RingGeometry = DEFAULT_GEOMETRY) -> Neighborhood:
    """Read the center and both rings around ``(row, col)``.

    ``image`` may be a single ``(H, W)`` image or a stack ``(..., H, W)``;
    in the latter case every slot holds an array over the leading axes.
    """
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape[-2:]
    if not (0 <= row < h and 0 <= col < w):
        raise ValueError(f"pixel ({row}, {col}) outside image of size {h}x{w}")

    def read(dr, dc):
        return img[..., min(max(row + dr, 0), h - 1), min(max(col + dc, 0), w - 1)]

    return Neighborhood(
        center=read(0, 0),
        ring1=tuple(read(dr, dc) for dr, dc in geom.offsets(geom.r1)),
        ring2=tuple(read(dr, dc) for dr, dc in geom.offsets(geom.r2)),
    )


def centroid_x(nbh: Neighborhood, eta: int):
    """Weighted mean of the center and the inner-ring subregion facing ``eta``."""
    p = len(nbh.ring1)
    _check_eta(eta, p)
    k, l = parity_k(eta), parity_l(eta)
    r1 = nbh.ring1
    left = sum(r1[i % p] for i in range(eta - l - 2, eta - l))
    right = sum(r1[i % p] for i in range(eta - l + 1, eta - l + 3))
    return ((k - 1) * left + k * (nbh.center + r1[(eta - l) % p]) + right) / (4 * k)


def centroid_y(nbh: Neighborhood, eta: int):
    """Mean of the inter-radial subregion between the two rings facing ``eta``."""
    p, q = len(nbh.ring1), len(nbh.ring2)
    _check_eta(eta, p)
    k, l = parity_k(eta), parity_l(eta)
    inner = sum(nbh.ring1[i % p] for i in range(eta + l - 1, eta - l + 2))
    outer = sum(nbh.ring2[i % q] for i in range(2 * eta - 1, 2 * eta + 2))
    return (inner + outer) / (2 * (2 * k - k // 2))


def sign(t):
    """1 where ``t >= 0`` else 0."""
    if np.ndim(t) == 0:
        return 1 if t >= 0 else 0
    return (np.asarray(t) >= 0).astype(np.uint8)


def tie_tolerance(nbh: Neighborhood):
    """Absolute band within which a centroid difference counts as a tie.

    Scales with the largest magnitude in the neighborhood so that exact ties
    stay ties after an affine intensity change despite float rounding.
    """
    vals = nbh.values()
    m = np.abs(vals[0])
    for v in vals[1:]:
        m = np.maximum(m, np.abs(v))
    return TIE_RTOL * m


def crip_code(nbh: Neighborhood, geom: RingGeometry = DEFAULT_GEOMETRY):
    tol = tie_tolerance(nbh)
    code = 0
    for v in range(geom.p):
        diff = centroid_y(nbh, v) - centroid_x(nbh, v)
        code = code + sign(diff + tol) * (1 << v)
    return code


def lbp_code(nbh: Neighborhood):
    code = 0
    for v, r in enumerate(nbh.ring1):
        code = code + sign(r - nbh.center) * (1 << v)
    return code


def _check_size(img: np.ndarray, minimum: int) -> None:
    h, w = img.shape[-2:]
    if h < minimum or w < minimum:
        raise ValueError(f"image must be at least {minimum}x{minimum}, got {h}x{w}")
    if not np.isfinite(img).all():
        raise ValueError("image contains NaN or infinite values")


def crip_map(image, geom: RingGeometry = DEFAULT_GEOMETRY) -> np.ndarray:
    """CRIP code of every pixel as a ``uint8`` array of the image's shape."""
    img = np.ascontiguousarray(as_gray(image))
    _check_size(img, MIN_SIDE)
    return _kernels.crip_map(img)


def lbp_map(image) -> np.ndarray:
    img = np.ascontiguousarray(as_gray(image))
    _check_size(img, 3)
    return _kernels.lbp_map(img)


def _reference_map(images, code_fn, minimum):
    imgs = np.asarray(images, dtype=np.float64)
    _check_size(imgs, minimum)
    h, w = imgs.shape[-2:]
    out = np.empty(imgs.shape, dtype=np.uint8)
    for row in range(h):
        for col in range(w):
            out[..., row, col] = code_fn(sample_neighborhood(imgs, row, col))
    return out


def crip_map_reference(images) -> np.ndarray:
    """Per-pixel evaluation of the defining formulas; slow, for verification.

    Accepts one image or a stack of images (leading axes are batched).
    """
    return _reference_map(images, crip_code, MIN_SIDE)


def lbp_map_reference(images) -> np.ndarray:
    return _reference_map(images, lbp_code, 3)


DESCRIPTORS = {"crip": crip_map, "lbp": lbp_map}


def code_map(image, descriptor: str = "crip") -> np.ndarray:
    try:
        fn = DESCRIPTORS[descriptor]
    except KeyError:
        raise ValueError(f"unknown descriptor {descriptor!r}; choose from {sorted(DESCRIPTORS)}") from None
    return fn(image)


def hamming_drift(a: np.ndarray, b: np.ndarray) -> float:
    """Fraction of positions whose code differs."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"code map shapes differ: {a.shape} vs {b.shape}")
    return float(np.count_nonzero(a != b)) / a.size
