"""Perceptual weighting of image patches from their frequency content.

Each patch gets a sensitivity score: the contrast sensitivity function (CSF)
evaluated at every FFT bin's radial frequency, averaged with the bin
magnitudes as weights (DC excluded by default). Sigmoid of the score gives a
per-patch weight in (0, 1) used by the pooling stage downstream; the weights
are computed from raw pixels and carry no gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fourier import fft2_array
from .tensor import Tensor

__all__ = [
    "PatchGrid",
    "ViewingConfig",
    "HvsWeightMap",
    "csf",
    "patch_sensitivity",
    "hvs_weights",
    "luminance",
    "render_weight_heatmap",
]

_EPS_ENERGY = 1e-12


@dataclass(frozen=True)
class PatchGrid:
    """Spatial layout of patches: rows x cols cells of patch_size pixels."""

    rows: int
    cols: int
    patch_size: int = 16

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid must have positive extent")
        ps = self.patch_size
        if ps < 1 or (ps & (ps - 1)) != 0:
            raise ValueError(f"patch_size {ps} must be a power of two")

    @property
    def n_patches(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class ViewingConfig:
    """Maps FFT bin radii to spatial frequency in cycles per degree."""

    max_frequency_cpd: float = 32.0
    dc_excluded: bool = True

    def __post_init__(self):
        if self.max_frequency_cpd <= 0:
            raise ValueError("max_frequency_cpd must be positive")


@dataclass(frozen=True)
class HvsWeightMap:
    """Per-patch perceptual weights, each strictly inside (0, 1)."""

    weights: np.ndarray
    grid: PatchGrid

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (self.grid.n_patches,):
            raise ValueError(f"expected {self.grid.n_patches} weights, got {w.shape}")
        if not (np.all(w > 0.0) and np.all(w < 1.0)):
            raise ValueError("weights must lie strictly in (0, 1)")
        object.__setattr__(self, "weights", w)


def csf(f):
    """Contrast sensitivity at spatial frequency ``f`` (cycles per degree)."""
    arr = np.asarray(f, dtype=np.float64)
    if np.any(arr < 0):
        raise ValueError("spatial frequency must be non-negative")
    g = 0.114 * arr
    value = 2.6 * (0.0192 + g) * np.exp(-(g**1.1))
    return float(value) if np.isscalar(f) or arr.ndim == 0 else value


def _radial_cpd(size: int, cfg: ViewingConfig) -> np.ndarray:
    """Per-bin frequency map: signed bin indices, Nyquist mapped to max cpd."""
    signed = np.fft._raw_fft if False else None  # noqa: F841  (no numpy.fft use)
    idx = np.arange(size)
    signed = np.where(idx <= size // 2, idx, idx - size).astype(np.float64)
    r = np.sqrt(signed[:, None] ** 2 + signed[None, :] ** 2)
    nyquist = size / 2.0 if size > 1 else 1.0
    return cfg.max_frequency_cpd * r / nyquist


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _sensitivities(patches: np.ndarray, cfg: ViewingConfig) -> np.ndarray:
    """Magnitude-weighted mean CSF per patch; patches is (P, S, S)."""
    size = patches.shape[-1]
    mags = np.abs(fft2_array(patches))
    weights = csf(_radial_cpd(size, cfg))
    if cfg.dc_excluded:
        mags = mags.copy()
        mags[..., 0, 0] = 0.0
    total = mags.sum(axis=(-2, -1))
    weighted = (mags * weights).sum(axis=(-2, -1))
    scores = np.zeros_like(total)
    live = total > _EPS_ENERGY
    scores[live] = weighted[live] / total[live]
    return scores


def patch_sensitivity(patch, cfg: ViewingConfig = ViewingConfig()) -> float:
    """Perceptual sensitivity of one luminance patch in [0, 1] pixel range.

    Constant patches (no non-DC energy) score exactly 0.
    """
    data = patch.data if isinstance(patch, Tensor) else np.asarray(patch, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] != data.shape[1]:
        raise ValueError(f"patch must be square 2-D, got {data.shape}")
    return float(_sensitivities(data[None], cfg)[0])


def hvs_weights(crop, grid: PatchGrid, cfg: ViewingConfig = ViewingConfig()) -> HvsWeightMap:
    """Per-patch weights sigmoid(sensitivity) for a luminance crop.

    The crop must measure exactly (rows * patch_size, cols * patch_size);
    patches are enumerated row-major.
    """
    data = crop.data if isinstance(crop, Tensor) else np.asarray(crop, dtype=np.float64)
    ps = grid.patch_size
    expected = (grid.rows * ps, grid.cols * ps)
    if data.shape != expected:
        raise ValueError(f"crop shape {data.shape} does not match grid {expected}")
    patches = (
        data.reshape(grid.rows, ps, grid.cols, ps)
        .transpose(0, 2, 1, 3)
        .reshape(grid.n_patches, ps, ps)
    )
    return HvsWeightMap(_sigmoid(_sensitivities(patches, cfg)), grid)


def luminance(rgb: np.ndarray) -> np.ndarray:
    """Rec.601 luma of an 8-bit RGB raster, scaled to [0, 1]."""
    arr = np.asarray(rgb, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) raster, got {arr.shape}")
    return (0.299 * arr[..., 0] + 0.587 * arr[..., 1] + 0.114 * arr[..., 2]) / 255.0


def render_weight_heatmap(weight_map: HvsWeightMap) -> np.ndarray:
    """Render weights as an 8-bit grayscale raster, one block per patch.

    Weights are min-max normalized to 0..255; a flat map renders as 128.
    """
    w = weight_map.weights
    lo, hi = w.min(), w.max()
    if hi > lo:
        levels = np.rint(255.0 * (w - lo) / (hi - lo))
    else:
        levels = np.full_like(w, 128.0)
    grid = weight_map.grid
    cells = levels.reshape(grid.rows, grid.cols).astype(np.uint8)
    return np.kron(cells, np.ones((grid.patch_size, grid.patch_size), dtype=np.uint8))
