import math

import numpy as np
import pytest

from tripeval.dataset import Column, ColumnKind, DataTable, SplitSpec, TableSchema, split
from tripeval.fixtures import make_trip_table


def naive_distance(x, y):
    """Plain-Python L2 distance, summing left to right."""
    return math.sqrt(sum((a - b) * (a - b) for a, b in zip(x, y)))


def naive_nearest(query, ref, exclude_self=False):
    out = []
    for i, x in enumerate(query):
        best = math.inf
        for j, y in enumerate(ref):
            if exclude_self and i == j:
                continue
            d = naive_distance(x, y)
            if d < best:
                best = d
        out.append(best)
    return np.array(out)


def table(columns, rows, target=None):
    schema = TableSchema(tuple(Column(n, ColumnKind(k)) for n, k in columns), target)
    data = {n: [r[j] for r in rows] for j, (n, _) in enumerate(columns)}
    return DataTable(schema, data)


@pytest.fixture(scope="session")
def trips():
    return make_trip_table(3000, seed=0)


@pytest.fixture(scope="session")
def trip_split(trips):
    return split(trips, SplitSpec(2000, 1000, seed=0))
