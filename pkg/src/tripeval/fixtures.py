"""Synthetic trip tables with a realistic mixed-type layout, for demos and tests."""
from __future__ import annotations

import numpy as np

from .dataset import Column, ColumnKind, DataTable, TableSchema

TRIP_SCHEMA = TableSchema(
    (
        Column("vendor", ColumnKind.CATEGORICAL),
        Column("payment_type", ColumnKind.CATEGORICAL),
        Column("pickup_zone", ColumnKind.CATEGORICAL),
        Column("dropoff_zone", ColumnKind.CATEGORICAL),
        Column("pickup_weekday", ColumnKind.CATEGORICAL),
        Column("passenger_count", ColumnKind.INTEGER),
        Column("pickup_time", ColumnKind.FLOAT),
        Column("trip_distance", ColumnKind.FLOAT),
        Column("fare_amount", ColumnKind.FLOAT),
        Column("tip_amount", ColumnKind.FLOAT),
        Column("total_amount", ColumnKind.FLOAT),
    ),
    target="total_amount",
)


def make_trip_table(n: int, seed: int = 0, n_zones: int = 12) -> DataTable:
    """Draw ``n`` trips with correlated distance, fare, tip and total."""
    rng = np.random.default_rng(seed)
    zones = [f"Z{i:02d}" for i in range(n_zones)]
    popularity = rng.dirichlet(np.full(n_zones, 0.8))
    pu = rng.choice(n_zones, size=n, p=popularity)
    # drop-offs favour nearby zone ids
    do = (pu + rng.integers(-2, 3, size=n)) % n_zones
    distance = np.round(rng.gamma(2.0, 1.5, size=n) + 0.3 * np.abs(pu - do), 2)
    fare = np.round(2.5 + 2.2 * distance + rng.normal(0, 0.8, size=n).clip(-2, 2), 2)
    payment = np.where(rng.random(n) < 0.6, "card", "cash")
    tip = np.where(payment == "card", np.round(fare * rng.uniform(0.1, 0.25, size=n), 2), 0.0)
    data = {
        "vendor": np.where(rng.random(n) < 0.55, "1", "2"),
        "payment_type": payment,
        "pickup_zone": np.array(zones, dtype=object)[pu],
        "dropoff_zone": np.array(zones, dtype=object)[do],
        "pickup_weekday": rng.integers(0, 7, size=n).astype(str),
        "passenger_count": rng.choice([1, 1, 1, 2, 2, 3, 5], size=n).astype(float),
        "pickup_time": np.floor(rng.uniform(0, 86400, size=n)),
        "trip_distance": distance,
        "fare_amount": fare,
        "tip_amount": tip,
        "total_amount": np.round(fare + tip + 0.5, 2),
    }
    return DataTable(TRIP_SCHEMA, data)
