"""Vectorized numpy kernels, used when the compiled extension is unavailable.

Arithmetic is performed in exactly the same order as the compiled kernels
and the per-pixel reference, so all three agree bit for bit.
"""
import numpy as np

TIE_RTOL = 1e-12

RING1 = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))
RING2 = ((-2, -2), (-2, -1), (-2, 0), (-2, 1), (-2, 2), (-1, 2), (0, 2), (1, 2),
         (2, 2), (2, 1), (2, 0), (2, -1), (2, -2), (1, -2), (0, -2), (-1, -2))


def _shifted(image, pad):
    h, w = image.shape
    padded = np.pad(image, pad, mode="edge")

    def view(dr, dc):
        return padded[pad + dr:pad + dr + h, pad + dc:pad + dc + w]

    return padded, view


def crip_map(image):
    img = np.ascontiguousarray(image, dtype=np.float64)
    padded, view = _shifted(img, 2)
    c = img
    r1 = [view(dr, dc) for dr, dc in RING1]
    r2 = [view(dr, dc) for dr, dc in RING2]

    absmax = np.abs(c)
    for dr in range(-2, 3):
        for dc in range(-2, 3):
            np.maximum(absmax, np.abs(view(dr, dc)), out=absmax)
    tol = TIE_RTOL * absmax

    codes = np.zeros(img.shape, dtype=np.uint8)
    for eta in range(8):
        a, b = r1[(eta - 1) % 8], r1[eta]
        s2 = (r2[(2 * eta - 1) % 16] + r2[2 * eta]) + r2[(2 * eta + 1) % 16]
        if eta % 2 == 0:
            x = ((r1[(eta - 2) % 8] + a) + 2.0 * (c + b)) + (r1[(eta + 1) % 8] + r1[(eta + 2) % 8])
            x = x / 8.0
            y = ((a + b) + r1[(eta + 1) % 8] + s2) / 6.0
        else:
            x = ((c + a) + (b + r1[(eta + 1) % 8])) / 4.0
            y = (b + s2) / 4.0
        bit = ((y - x) + tol) >= 0
        codes |= bit.astype(np.uint8) << eta
    return codes


def lbp_map(image):
    img = np.ascontiguousarray(image, dtype=np.float64)
    _, view = _shifted(img, 1)
    codes = np.zeros(img.shape, dtype=np.uint8)
    for v, (dr, dc) in enumerate(RING1):
        codes |= (view(dr, dc) >= img).astype(np.uint8) << v
    return codes


def block_histograms(codes, block):
    codes = np.asarray(codes)
    h, w = codes.shape
    rows, cols = -(-h // block), -(-w // block)
    block_id = (np.arange(h)[:, None] // block) * cols + (np.arange(w)[None, :] // block)
    flat = block_id.astype(np.int64) * 256 + codes.astype(np.int64)
    counts = np.bincount(flat.ravel(), minlength=rows * cols * 256)
    return counts.reshape(rows * cols, 256)
