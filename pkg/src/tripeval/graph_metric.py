"""Origin-destination trip graphs and the edge-distribution similarity score."""
from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Mapping

from .dataset import ColumnKind, DataTable
from .errors import DataError

Edge = tuple[str, str]


@dataclass(frozen=True)
class TripGraph:
    """Directed zone graph; ``edge_counts[(i, j)]`` trips from zone i to zone j."""

    zone_ids: tuple[str, ...]
    edge_counts: Mapping[Edge, int]

    def __post_init__(self):
        zones = set(self.zone_ids)
        for (i, j), n in self.edge_counts.items():
            if i not in zones or j not in zones:
                raise DataError(f"edge ({i}, {j}) references an unknown zone")
            if int(n) != n or n < 1:
                raise DataError(f"edge ({i}, {j}) has invalid count {n}")

    @property
    def total_trips(self) -> int:
        return sum(self.edge_counts.values())

    @classmethod
    def from_edges(cls, edges) -> "TripGraph":
        counts = Counter(edges)
        zones = sorted({z for e in counts for z in e})
        return cls(tuple(zones), dict(counts))


@dataclass(frozen=True)
class EdgeDistribution:
    probabilities: Mapping[Edge, float]


def build_graph(
    t: DataTable, pickup_col: str, dropoff_col: str, *, drop_self_loops: bool = False
) -> TripGraph:
    """Count one directed edge per row. Self-loops are kept unless filtered."""
    for name in (pickup_col, dropoff_col):
        if t.schema.kind(name) is not ColumnKind.CATEGORICAL:
            raise DataError(f"zone column {name!r} must be categorical")
    edges = [
        (a, b)
        for a, b in zip(t.column(pickup_col), t.column(dropoff_col))
        if not (drop_self_loops and a == b)
    ]
    if not edges:
        raise DataError("empty graph: no trips to count")
    return TripGraph.from_edges(edges)


def edge_distribution(g: TripGraph) -> EdgeDistribution:
    total = g.total_trips
    if total == 0:
        raise DataError("empty graph: total trip count is zero")
    return EdgeDistribution({e: n / total for e, n in g.edge_counts.items()})


def total_variation(p: Mapping[Edge, float], q: Mapping[Edge, float]) -> float:
    keys = sorted(set(p) | set(q))
    return 0.5 * sum(abs(p.get(e, 0.0) - q.get(e, 0.0)) for e in keys)


def graph_similarity(real: EdgeDistribution, synth: EdgeDistribution) -> float:
    """One minus the total variation distance between edge distributions.

    Pairs missing from one graph count as probability zero there.
    """
    delta = total_variation(real.probabilities, synth.probabilities)
    return min(1.0, max(0.0, 1.0 - delta))


def graph_similarity_exact(real: TripGraph, synth: TripGraph) -> Fraction:
    """Rational-arithmetic version used as a cross-check."""
    nr, ns = real.total_trips, synth.total_trips
    keys = set(real.edge_counts) | set(synth.edge_counts)
    delta = sum(
        abs(Fraction(real.edge_counts.get(e, 0), nr) - Fraction(synth.edge_counts.get(e, 0), ns))
        for e in keys
    ) / 2
    return 1 - delta


def table_similarity(
    a: DataTable, b: DataTable, pickup_col: str, dropoff_col: str, *, drop_self_loops: bool = False
) -> float:
    ga = build_graph(a, pickup_col, dropoff_col, drop_self_loops=drop_self_loops)
    gb = build_graph(b, pickup_col, dropoff_col, drop_self_loops=drop_self_loops)
    return graph_similarity(edge_distribution(ga), edge_distribution(gb))


def export_edge_list(g: TripGraph, path: str | Path) -> None:
    """Write ``src,dst,count,probability`` rows sorted by edge."""
    total = g.total_trips
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["src", "dst", "count", "probability"])
        for (i, j), n in sorted(g.edge_counts.items()):
            w.writerow([i, j, n, repr(n / total)])
