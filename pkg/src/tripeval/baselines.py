"""Reference generators: Gaussian copula, independent marginals, noisy memorizer."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.stats import norm, rankdata

from .dataset import ColumnKind, DataTable, decode, encode, fit_encoder
from .errors import DataError

PSD_FLOOR = 1e-10


class GeneratorKind(str, Enum):
    GAUSSIAN_COPULA = "gaussian_copula"
    INDEPENDENT_MARGINALS = "independent_marginals"
    NOISY_MEMORIZER = "noisy_memorizer"

    @classmethod
    def parse(cls, value) -> "GeneratorKind":
        if isinstance(value, GeneratorKind):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"copula": "gaussian_copula", "independent": "independent_marginals",
                   "memorizer": "noisy_memorizer"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise DataError(f"unknown generator kind {value!r}") from None


@dataclass(frozen=True)
class GeneratorSpec:
    kind: GeneratorKind
    noise_sigma: float = 0.01
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", GeneratorKind.parse(self.kind))
        if self.noise_sigma < 0:
            raise DataError("noise_sigma must be non-negative")


class NumericMarginal:
    """Empirical CDF with linear interpolation between order statistics.

    The i-th sorted value (0-based) sits at probability (i + 0.5) / n; tied
    values share their average rank.
    """

    def __init__(self, values: np.ndarray, integer: bool = False):
        self.sorted = np.sort(np.asarray(values, dtype=np.float64))
        n = len(self.sorted)
        self.probs = (np.arange(n) + 0.5) / n
        self.integer = integer

    def cdf_scores(self, values: np.ndarray) -> np.ndarray:
        return (rankdata(values, method="average") - 0.5) / len(values)

    def inverse(self, u: np.ndarray) -> np.ndarray:
        out = np.interp(u, self.probs, self.sorted)
        return np.round(out) if self.integer else out


class CategoricalMarginal:
    """Cumulative frequency intervals over lexicographically sorted categories."""

    def __init__(self, values):
        cats, counts = np.unique(np.asarray(list(values), dtype=object).astype(str), return_counts=True)
        self.categories = np.array(cats, dtype=object)
        self.freqs = counts / counts.sum()
        self.upper = np.cumsum(self.freqs)
        self.upper[-1] = 1.0
        self.lower = np.concatenate(([0.0], self.upper[:-1]))

    def cdf_scores(self, values, rng: np.random.Generator) -> np.ndarray:
        pos = np.searchsorted(self.categories, np.asarray(values, dtype=object).astype(str))
        lo, hi = self.lower[pos], self.upper[pos]
        return lo + rng.random(len(pos)) * (hi - lo)

    def inverse(self, u: np.ndarray) -> np.ndarray:
        pos = np.minimum(np.searchsorted(self.upper, u, side="right"), len(self.upper) - 1)
        return self.categories[pos]


def _fit_marginals(train: DataTable):
    out = {}
    for c in train.schema.columns:
        col = train.column(c.name)
        if c.kind is ColumnKind.CATEGORICAL:
            out[c.name] = CategoricalMarginal(col)
        else:
            out[c.name] = NumericMarginal(col, integer=c.kind is ColumnKind.INTEGER)
    return out


def nearest_correlation(c: np.ndarray, floor: float = PSD_FLOOR) -> np.ndarray:
    """Symmetrize, clip eigenvalues at ``floor`` and rescale to unit diagonal."""
    c = (c + c.T) / 2.0
    w, v = np.linalg.eigh(c)
    c = (v * np.maximum(w, floor)) @ v.T
    d = np.sqrt(np.diag(c))
    c = c / np.outer(d, d)
    c = (c + c.T) / 2.0
    np.fill_diagonal(c, 1.0)
    return c


class _Generator:
    spec: GeneratorSpec
    schema = None

    def sample(self, n: int, seed: int) -> DataTable:
        if n < 1:
            raise DataError("sample size must be at least 1")
        return self._sample(int(n), np.random.default_rng(seed))


class GaussianCopula(_Generator):
    def __init__(self, train: DataTable, spec: GeneratorSpec):
        if train.n_rows < 1:
            raise DataError("cannot fit a generator on an empty table")
        self.spec = spec
        self.schema = train.schema
        self.marginals = _fit_marginals(train)
        rng = np.random.default_rng(spec.seed)
        z = np.empty((train.n_rows, len(self.schema.columns)))
        for j, c in enumerate(self.schema.columns):
            m = self.marginals[c.name]
            col = train.column(c.name)
            u = m.cdf_scores(col, rng) if c.kind is ColumnKind.CATEGORICAL else m.cdf_scores(col)
            z[:, j] = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
        self.correlation = nearest_correlation(self._corr(z))
        w, v = np.linalg.eigh(self.correlation)
        self._factor = v * np.sqrt(np.maximum(w, 0.0))

    @staticmethod
    def _corr(z: np.ndarray) -> np.ndarray:
        d = z.shape[1]
        zc = z - z.mean(axis=0)
        sd = np.sqrt((zc**2).sum(axis=0))
        live = sd > 0
        c = np.eye(d)
        if live.any():
            zl = zc[:, live] / sd[live]
            c[np.ix_(live, live)] = zl.T @ zl
        # point-mass columns stay uncorrelated
        return c

    def _sample(self, n, rng):
        z = rng.standard_normal((n, len(self.schema.columns))) @ self._factor.T
        u = norm.cdf(z)
        data = {c.name: self.marginals[c.name].inverse(u[:, j])
                for j, c in enumerate(self.schema.columns)}
        return DataTable(self.schema, data)


class IndependentMarginals(_Generator):
    def __init__(self, train: DataTable, spec: GeneratorSpec):
        if train.n_rows < 1:
            raise DataError("cannot fit a generator on an empty table")
        self.spec = spec
        self.schema = train.schema
        self.marginals = _fit_marginals(train)

    def _sample(self, n, rng):
        data = {c.name: self.marginals[c.name].inverse(rng.random(n)) for c in self.schema.columns}
        return DataTable(self.schema, data)


class NoisyMemorizer(_Generator):
    """Resamples training rows and jitters numeric features in encoded space."""

    def __init__(self, train: DataTable, spec: GeneratorSpec):
        if train.n_rows < 1:
            raise DataError("cannot fit a generator on an empty table")
        self.spec = spec
        self.schema = train.schema
        self.train = train
        self.encoder = fit_encoder(train)
        self._encoded = encode(train, self.encoder).data
        self._numeric_cols = [
            self.encoder.column_map[c.name][0] for c in self.encoder.columns if c.kind.numeric
        ]

    def _sample(self, n, rng):
        idx = rng.integers(0, self.train.n_rows, size=n)
        if self.spec.noise_sigma == 0:
            return self.train.take(idx)
        x = self._encoded[idx].copy()
        cols = self._numeric_cols
        x[:, cols] += rng.normal(0.0, self.spec.noise_sigma, size=(n, len(cols)))
        return decode(x, self.encoder, self.schema)


_KINDS = {
    GeneratorKind.GAUSSIAN_COPULA: GaussianCopula,
    GeneratorKind.INDEPENDENT_MARGINALS: IndependentMarginals,
    GeneratorKind.NOISY_MEMORIZER: NoisyMemorizer,
}


def fit_generator(train: DataTable, spec: GeneratorSpec):
    if train.missing_mask().any():
        raise DataError("generators require a preprocessed table without missing cells")
    return _KINDS[spec.kind](train, spec)


def sample(generator, n: int, seed: int) -> DataTable:
    return generator.sample(n, seed)
