"""k-NN coverage: share of real points whose k-NN ball holds a synthetic point."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import as_matrix, check_same_encoder
from .errors import DataError
from .neighbors import kth_nearest_distances, nearest_distances


@dataclass(frozen=True)
class CoverageConfig:
    k: int = 5


def coverage_mask(real, synth, cfg: CoverageConfig = CoverageConfig()) -> np.ndarray:
    check_same_encoder(real, synth)
    r, s = as_matrix(real), as_matrix(synth)
    if not 1 <= cfg.k < r.shape[0]:
        raise DataError(f"k={cfg.k} must satisfy 1 <= k < {r.shape[0]} real rows")
    if s.shape[0] == 0:
        raise DataError("synthetic set is empty")
    radii = kth_nearest_distances(r, r, cfg.k, exclude_self=True)
    # ties on the ball boundary count as covered
    return nearest_distances(r, s) <= radii


def coverage(real, synth, cfg: CoverageConfig = CoverageConfig()) -> float:
    mask = coverage_mask(real, synth, cfg)
    return float(mask.sum()) / mask.size
