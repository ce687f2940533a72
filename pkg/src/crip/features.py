"""Block-histogram feature vectors over code maps."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .descriptor import BACKEND, _kernels

BINS = 256
DEFAULT_BLOCK = 16


@dataclass(frozen=True)
class BlockGrid:
    block_size: int
    map_height: int
    map_width: int

    def __post_init__(self):
        if self.block_size < 1:
            raise ValueError(f"block size must be >= 1, got {self.block_size}")

    @classmethod
    def for_map(cls, codes, block_size: int) -> "BlockGrid":
        h, w = np.shape(codes)
        return cls(block_size, h, w)

    @property
    def rows(self) -> int:
        return math.ceil(self.map_height / self.block_size)

    @property
    def cols(self) -> int:
        return math.ceil(self.map_width / self.block_size)

    @property
    def n_blocks(self) -> int:
        return self.rows * self.cols

    @property
    def dimension(self) -> int:
        return self.n_blocks * BINS


def block_origin(phi: int, grid: BlockGrid) -> tuple:
    """0-based (row, col) of block ``phi`` (1-based, row-major)."""
    if not 1 <= phi <= grid.n_blocks:
        raise ValueError(f"block index must be in [1, {grid.n_blocks}], got {phi}")
    return ((phi - 1) // grid.cols) * grid.block_size, ((phi - 1) % grid.cols) * grid.block_size


def block_histogram(codes, phi: int, grid: BlockGrid) -> np.ndarray:
    r, c = block_origin(phi, grid)
    B = grid.block_size
    block = np.asarray(codes)[r:r + B, c:c + B]
    return np.bincount(block.ravel().astype(np.intp), minlength=BINS)[:BINS].astype(np.int64)


def block_pixel_counts(grid: BlockGrid) -> np.ndarray:
    B = grid.block_size
    heights = np.minimum(B, grid.map_height - np.arange(grid.rows) * B)
    widths = np.minimum(B, grid.map_width - np.arange(grid.cols) * B)
    return np.outer(heights, widths).ravel()


def feature_vector(codes, block_size: int = DEFAULT_BLOCK, normalize: bool = False) -> np.ndarray:
    """Concatenated per-block 256-bin histograms, block 1 first.

    Raw counts by default; with ``normalize`` each block is divided by its
    own pixel count (edge blocks may be smaller).
    """
    if block_size < 1:
        raise ValueError(f"block size must be >= 1, got {block_size}")
    codes = np.ascontiguousarray(codes, dtype=np.uint8)
    counts = _kernels.block_histograms(codes, block_size)
    if not normalize:
        return counts.ravel()
    grid = BlockGrid.for_map(codes, block_size)
    return (counts / block_pixel_counts(grid)[:, None]).ravel()


@dataclass(frozen=True)
class FeatureConfig:
    descriptor: str = "crip"
    size: int = 128
    block_size: int = DEFAULT_BLOCK
    normalize: bool = False

    def grid(self) -> BlockGrid:
        return BlockGrid(self.block_size, self.size, self.size)

    def as_dict(self) -> dict:
        return {"descriptor": self.descriptor, "size": self.size,
                "block_size": self.block_size, "normalize": self.normalize}


def write_feature_matrix(path, ids, matrix, config: FeatureConfig) -> None:
    """One row per sample: id then n*256 values.  First line is metadata."""
    matrix = np.asarray(matrix)
    grid = config.grid()
    if matrix.ndim != 2 or matrix.shape[1] != grid.dimension:
        raise ValueError(f"matrix shape {matrix.shape} does not match dimension {grid.dimension}")
    integral = not config.normalize
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([
            "#crip-features", f"descriptor={config.descriptor}", f"size={config.size}",
            f"block={config.block_size}", f"n_blocks={grid.n_blocks}", f"bins={BINS}",
            f"normalize={int(config.normalize)}",
        ])
        for sid, row in zip(ids, matrix):
            vals = [str(int(v)) for v in row] if integral else [repr(float(v)) for v in row]
            w.writerow([sid, *vals])


def read_feature_matrix(path):
    """Inverse of :func:`write_feature_matrix`; returns (ids, matrix, config)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        meta_row = next(reader)
        if not meta_row or meta_row[0] != "#crip-features":
            raise ValueError(f"{path}: missing feature-matrix header")
        meta = dict(item.split("=", 1) for item in meta_row[1:])
        config = FeatureConfig(meta["descriptor"], int(meta["size"]), int(meta["block"]),
                               bool(int(meta["normalize"])))
        ids, rows = [], []
        for row in reader:
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    n = int(meta["n_blocks"]) * int(meta["bins"])
    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), n)
    return ids, matrix, config


__all__ = [
    "BACKEND", "BINS", "BlockGrid", "FeatureConfig", "block_histogram", "block_origin",
    "block_pixel_counts", "feature_vector", "read_feature_matrix", "write_feature_matrix",
]
