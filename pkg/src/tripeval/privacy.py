"""Distance-to-closest-record statistics and the train/holdout DCR ratio.

The ratio compares how close training rows sit to the synthetic set against
how close unseen holdout rows sit, at a low percentile of each distance list.
A ratio below one means training rows are unusually close, which is what a
distance-based membership-inference adversary exploits.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import as_matrix, check_same_encoder
from .errors import DataError
from .neighbors import nearest_distances

DEFAULT_ALPHA = 5.0
DEFAULT_SWEEP = (0.5, 1.0, 2.0, 5.0, 10.0, 25.0, 50.0)


@dataclass(frozen=True)
class DcrProfile:
    rs: np.ndarray
    hs: np.ndarray
    rr: np.ndarray
    ss: np.ndarray

    def __post_init__(self):
        for name in ("rs", "hs", "rr", "ss"):
            arr = np.sort(np.asarray(getattr(self, name), dtype=np.float64))
            if arr.size == 0 or not np.all(np.isfinite(arr)) or arr[0] < 0:
                raise DataError(f"DCR list {name} must be non-empty, finite and non-negative")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("rs", "hs", "rr", "ss")}

    @classmethod
    def from_dict(cls, obj) -> "DcrProfile":
        try:
            return cls(*(obj[k] for k in ("rs", "hs", "rr", "ss")))
        except KeyError as exc:
            raise DataError(f"profile missing list {exc}") from None

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DcrProfile":
        path = Path(path)
        if not path.exists():
            raise DataError(f"profile not found: {path}")
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))


@dataclass(frozen=True)
class RdcrResult:
    alpha: float
    d_rs: float
    d_hs: float
    ratio: float
    flag: str | None = None  # "degenerate" (0/0 -> 1) or "infinite" (x/0)


def dcr_profile(train, holdout, synth, *, rr=None) -> DcrProfile:
    """Nearest-neighbour distance lists; ``rr`` may be passed in precomputed."""
    check_same_encoder(train, holdout, synth)
    tr, ho, sy = as_matrix(train), as_matrix(holdout), as_matrix(synth)
    for name, m in (("train", tr), ("holdout", ho), ("synthetic", sy)):
        if m.shape[0] < 2:
            raise DataError(f"{name} set needs at least 2 rows for DCR")
    return DcrProfile(
        rs=nearest_distances(tr, sy),
        hs=nearest_distances(ho, sy),
        rr=nearest_distances(tr, tr, exclude_self=True) if rr is None else rr,
        ss=nearest_distances(sy, sy, exclude_self=True),
    )


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha <= 100.0:
        raise DataError(f"percentile alpha must lie in (0, 100], got {alpha}")
    return alpha


def percentile(sorted_values: Sequence[float], alpha: float) -> float:
    """Linear interpolation between closest ranks at position (alpha/100)(n-1)."""
    alpha = _check_alpha(alpha)
    n = len(sorted_values)
    if n == 0:
        raise DataError("percentile of an empty list")
    pos = alpha / 100.0 * (n - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    a, b = float(sorted_values[lo]), float(sorted_values[hi])
    return a + frac * (b - a)


def rdcr(profile: DcrProfile, alpha: float = DEFAULT_ALPHA) -> RdcrResult:
    d_rs = percentile(profile.rs, alpha)
    d_hs = percentile(profile.hs, alpha)
    if d_hs > 0:
        return RdcrResult(float(alpha), d_rs, d_hs, d_rs / d_hs)
    if d_rs == 0:
        return RdcrResult(float(alpha), d_rs, d_hs, 1.0, "degenerate")
    return RdcrResult(float(alpha), d_rs, d_hs, math.inf, "infinite")


def rdcr_sweep(profile: DcrProfile, alphas: Sequence[float] = DEFAULT_SWEEP) -> list[RdcrResult]:
    if len(alphas) == 0:
        raise DataError("alpha list is empty")
    for a in alphas:
        _check_alpha(a)
    return [rdcr(profile, a) for a in alphas]


def sweep_csv(results: Sequence[RdcrResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "d_rs", "d_hs", "ratio"])
    for r in results:
        w.writerow([repr(r.alpha), repr(r.d_rs), repr(r.d_hs), repr(r.ratio)])
    return buf.getvalue()
