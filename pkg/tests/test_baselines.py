import numpy as np
import pytest

from tripeval.baselines import (
    GaussianCopula,
    GeneratorKind,
    GeneratorSpec,
    fit_generator,
    nearest_correlation,
    sample,
)
from tripeval.dataset import ColumnKind, encode, fit_encoder
from tripeval.errors import DataError
from tripeval.ot import wasserstein_1d
from tripeval.privacy import dcr_profile, rdcr

from .conftest import table


def test_kind_aliases():
    assert GeneratorKind.parse("copula") is GeneratorKind.GAUSSIAN_COPULA
    assert GeneratorKind.parse("Noisy-Memorizer") is GeneratorKind.NOISY_MEMORIZER
    with pytest.raises(DataError):
        GeneratorKind.parse("ctgan")


def test_negative_sigma():
    with pytest.raises(DataError):
        GeneratorSpec("memorizer", noise_sigma=-1)


def test_independent_frequency():
    t = table([("c", "categorical")], [("A",)] * 3 + [("B",)])
    out = fit_generator(t, GeneratorSpec("independent")).sample(100_000, 0)
    share = np.mean(out.column("c") == "A")
    assert abs(share - 0.75) <= 0.01


def test_copula_correlated_columns():
    x = np.random.default_rng(0).normal(size=500)
    t = table([("x", "float"), ("y", "float")], [(v, 2 * v + 1) for v in x])
    gen = fit_generator(t, GeneratorSpec("copula"))
    assert gen.correlation[0, 1] >= 0.99


def test_copula_single_column():
    t = table([("x", "float")], [(float(v),) for v in range(10)])
    np.testing.assert_array_equal(GaussianCopula(t, GeneratorSpec("copula")).correlation, [[1.0]])


def test_copula_constant_column():
    t = table([("x", "float"), ("k", "float")], [(float(v), 3.0) for v in range(20)])
    out = fit_generator(t, GeneratorSpec("copula")).sample(50, 0)
    np.testing.assert_array_equal(out.column("k"), 3.0)


def test_nearest_correlation_repairs():
    c = np.array([[1.0, 0.9, -0.9], [0.9, 1.0, 0.9], [-0.9, 0.9, 1.0]])
    fixed = nearest_correlation(c)
    assert np.linalg.eigvalsh(fixed).min() > -1e-12
    np.testing.assert_array_equal(np.diag(fixed), 1.0)


def test_memorizer_exact_rows(trips):
    gen = fit_generator(trips, GeneratorSpec("memorizer", noise_sigma=0.0))
    assert gen.train.n_rows == trips.n_rows
    out = gen.sample(200, 3)
    rows = set(trips.rows())
    assert all(r in rows for r in out.rows())


@pytest.mark.parametrize("kind", list(GeneratorKind))
def test_deterministic_and_valid(trips, kind):
    gen = fit_generator(trips, GeneratorSpec(kind, 0.01, 4))
    a, b = sample(gen, 300, 9), sample(gen, 300, 9)
    assert a.equals(b)
    assert a.schema == trips.schema and a.n_rows == 300
    assert not a.missing_mask().any()
    for c in a.schema.columns:
        if c.kind is ColumnKind.INTEGER:
            v = a.column(c.name)
            np.testing.assert_array_equal(v, np.round(v))


def test_rejects_missing_cells():
    t = table([("x", "float")], [(1.0,), (np.nan,)])
    with pytest.raises(DataError):
        fit_generator(t, GeneratorSpec("independent"))


def test_sample_size_validation(trips):
    with pytest.raises(DataError):
        fit_generator(trips, GeneratorSpec("independent")).sample(0, 0)


def test_copula_marginal_fidelity(trip_split):
    train, holdout = trip_split
    synth = fit_generator(train, GeneratorSpec("copula")).sample(40_000, 0)
    rng = np.random.default_rng(0)
    for c in train.schema.columns:
        if not c.kind.numeric:
            continue
        tr = train.column(c.name)
        ref = wasserstein_1d(tr[:1000], holdout.column(c.name))
        # compare equal-size draws
        got = wasserstein_1d(tr, rng.choice(synth.column(c.name), tr.size, replace=False))
        assert got < 3 * ref, c.name


def _ratio(train, holdout, spec, seed):
    synth = fit_generator(train, spec).sample(holdout.n_rows, seed)
    enc = fit_encoder(train)
    return rdcr(dcr_profile(*(encode(t, enc) for t in (train, holdout, synth))), 5).ratio


def test_memorizer_leakage_signal(trip_split):
    train, holdout = trip_split
    assert _ratio(train, holdout, GeneratorSpec("memorizer", 0.001), 0) < 0.5


def test_independent_neutral(trip_split):
    train, holdout = trip_split
    assert 0.8 <= _ratio(train, holdout, GeneratorSpec("independent"), 0) <= 1.25
