"""Frequency and time masking on feature matrices.

Masks whole frequency bands across all frames, and whole time spans across
all dimensions. Widths are drawn from Uniform{0..cap} (a mask may be
empty); time-mask widths are additionally capped at ceil(p * frames).
Time warping is deliberately not implemented: it is expensive and brings no
significant gain over the two masking operations.

Mask fill defaults to 0.0, which equals the feature mean after CMVN; for
un-normalized features set ``fill_with_dim_mean`` to mask with each
dimension's own mean instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .features import FeatureMatrix


class SpecAugmentError(ValueError):
    pass


@dataclass(frozen=True)
class SpecAugmentConfig:
    num_freq_masks: int = 1
    max_freq_width: int = 10
    num_time_masks: int = 1
    max_time_width: int = 20
    max_time_fraction: float = 0.05
    mask_value: float = 0.0
    fill_with_dim_mean: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("num_freq_masks", "max_freq_width", "num_time_masks", "max_time_width"):
            if getattr(self, name) < 0:
                raise SpecAugmentError(f"{name} must be >= 0")
        if not (0.0 <= self.max_time_fraction <= 1.0):
            raise SpecAugmentError(
                f"max_time_fraction {self.max_time_fraction} outside [0, 1]"
            )


def draw_mask_bands(
    rng: np.random.Generator, count: int, width_cap: int, extent: int
) -> list[tuple[int, int]]:
    """Draw (start, width) bands: width ~ U{0..cap}, start ~ U{0..extent-width}.

    Exposed so callers can reproduce the exact masked regions from a seed.
    """
    bands = []
    for _ in range(count):
        width = int(rng.integers(0, width_cap + 1))
        start = int(rng.integers(0, extent - width + 1))
        bands.append((start, width))
    return bands


def spec_augment(m: FeatureMatrix, cfg: SpecAugmentConfig) -> FeatureMatrix:
    """Apply the configured masks; unmasked cells are bit-identical.

    Draw order is fixed (all frequency masks, then all time masks; width
    before start within each mask), so a seed fully determines the result.
    """
    frames, dims = m.data.shape
    if frames == 0 or dims == 0:
        raise SpecAugmentError("cannot augment an empty feature matrix")
    if cfg.max_freq_width > dims:
        raise SpecAugmentError(
            f"max_freq_width {cfg.max_freq_width} exceeds feature dims {dims}"
        )
    rng = np.random.default_rng(cfg.seed)
    freq_bands = draw_mask_bands(rng, cfg.num_freq_masks, cfg.max_freq_width, dims)
    time_cap = min(cfg.max_time_width, math.ceil(cfg.max_time_fraction * frames))
    time_bands = draw_mask_bands(rng, cfg.num_time_masks, time_cap, frames)

    if cfg.fill_with_dim_mean:
        fill = m.data.mean(axis=0)
    else:
        fill = np.full(dims, cfg.mask_value)
    out = m.data.copy()
    for start, width in freq_bands:
        out[:, start : start + width] = fill[start : start + width]
    for start, width in time_bands:
        out[start : start + width, :] = fill
    return FeatureMatrix(out, m.frame_shift, m.frame_length, m.kind)
