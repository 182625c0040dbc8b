#!/usr/bin/env python
# coding: utf-8
"""
Wildfire reconstruction from encoded detections.

Each point is linked to its K nearest neighbours (great-circle distance on the
raw coordinates), the links are filtered to the spatial and temporal radii,
and the connected components of the resulting graph become wildfires.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, NamedTuple, Sequence, Tuple

import networkx as nx
import numpy as np
import pandas as pd
from sklearn.neighbors import BallTree

from errors import GraphError
from ingest import EncodedPoint

logger = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_000.0
DEFAULT_K = 8
DEFAULT_SPATIAL_RADIUS_M = 375.0
DEFAULT_TEMPORAL_RADIUS_S = 6 * 3600

# Relative slack when re-querying the tree so float noise never hides a tie.
_RADIUS_SLACK = 1e-9


class Neighbor(NamedTuple):
    point_id: int
    distance_m: float
    time_gap_s: float


@dataclass(frozen=True)
class NeighborSet:
    center: int
    neighbors: Tuple[Neighbor, ...]


@dataclass(frozen=True)
class Wildfire:
    """Points of one graph component, ordered by (timestamp, raw_lat, raw_lon, point_id)."""

    points: Tuple[EncodedPoint, ...]

    @property
    def length(self) -> int:
        return len(self.points)

    @property
    def point_ids(self) -> List[int]:
        return [p.point_id for p in self.points]


@dataclass(frozen=True)
class DatasetStats:
    n_fires: int
    mean_len: float
    std_len: float
    min_len: int
    max_len: int

    def rows(self) -> List[Tuple[str, str]]:
        """(statistic, value) rows of the length summary."""
        return [
            ("Number of Wildfires", str(self.n_fires)),
            ("Mean of Wildfire Length", f"{self.mean_len:.6f}"),
            ("Standard Deviation of Wildfire Length", f"{self.std_len:.6f}"),
            ("Shortest Wildfire Length", str(self.min_len)),
            ("Longest Wildfire Length", str(self.max_len)),
        ]


class FireGraph:
    """Undirected point graph; nodes are point ids."""

    def __init__(self, graph: nx.Graph):
        self.graph = graph

    @property
    def nodes(self) -> set:
        return set(self.graph.nodes)

    @property
    def edges(self) -> set:
        return {frozenset(edge) for edge in self.graph.edges}


def haversine_m(a: Tuple[float, float], b: Tuple[float, float]) -> float:
    """Great-circle distance in meters between two (lat, lon) pairs in degrees."""
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def knn(points: Sequence[EncodedPoint], k: int = DEFAULT_K) -> List[NeighborSet]:
    """
    K nearest other points of every point, by great-circle distance.

    Ties are broken by smaller point_id; with fewer than k other points all of
    them are returned. The BallTree only proposes candidates, the final order
    comes from haversine_m so it matches an exhaustive sort exactly.

    Args:
        points: Encoded points (at least two)
        k: Neighbours per point

    Returns:
        One unfiltered NeighborSet per point, in input order
    """
    if len(points) < 2:
        raise GraphError("neighbour search needs at least two points")
    if k < 1:
        raise GraphError("k must be >= 1")

    coords = np.radians(np.array([[p.raw_lat, p.raw_lon] for p in points], dtype=np.float64))
    tree = BallTree(coords, metric="haversine")

    n_query = min(len(points), k + 1)
    distances, _ = tree.query(coords, k=n_query)
    # The farthest of the k+1 hits bounds the k-th other point even if self is not first.
    radii = distances[:, -1] * (1 + _RADIUS_SLACK) + 1e-15
    candidates = tree.query_radius(coords, r=radii)

    sets = []
    for index, point in enumerate(points):
        scored = []
        for other in candidates[index]:
            if other == index:
                continue
            neighbor = points[other]
            scored.append(Neighbor(
                neighbor.point_id,
                haversine_m((point.raw_lat, point.raw_lon), (neighbor.raw_lat, neighbor.raw_lon)),
                float(abs(neighbor.timestamp - point.timestamp)),
            ))
        scored.sort(key=lambda n: (n.distance_m, n.point_id))
        sets.append(NeighborSet(point.point_id, tuple(scored[:k])))
    return sets


def filter_neighbors(
    sets: Iterable[NeighborSet],
    s_r: float = DEFAULT_SPATIAL_RADIUS_M,
    t_r: float = DEFAULT_TEMPORAL_RADIUS_S,
) -> List[NeighborSet]:
    """Keep neighbours within s_r meters and t_r seconds (both bounds closed)."""
    return [
        NeighborSet(s.center, tuple(n for n in s.neighbors if n.distance_m <= s_r and n.time_gap_s <= t_r))
        for s in sets
    ]


def build_graph(sets: Iterable[NeighborSet]) -> FireGraph:
    """An edge joins two points when either one lists the other."""
    graph = nx.Graph()
    for neighbor_set in sets:
        graph.add_node(neighbor_set.center)
        for neighbor in neighbor_set.neighbors:
            if neighbor.point_id != neighbor_set.center:
                graph.add_edge(neighbor_set.center, neighbor.point_id)
    return FireGraph(graph)


def _chronological_key(point: EncodedPoint) -> Tuple[int, float, float, int]:
    return (point.timestamp, point.raw_lat, point.raw_lon, point.point_id)


def extract_components(g: FireGraph, points: Dict[int, EncodedPoint]) -> List[Wildfire]:
    """
    One Wildfire per connected component.

    Args:
        g: Fire graph
        points: point_id -> EncodedPoint for every node

    Returns:
        Wildfires sorted by (first timestamp, smallest point_id)
    """
    fires = []
    for component in nx.connected_components(g.graph):
        try:
            members = [points[pid] for pid in component]
        except KeyError as e:
            raise GraphError(f"graph node {e.args[0]} has no encoded point") from e
        fires.append(Wildfire(tuple(sorted(members, key=_chronological_key))))

    fires.sort(key=lambda f: (f.points[0].timestamp, min(f.point_ids)))
    return fires


def compute_stats(fires: Sequence[Wildfire]) -> DatasetStats:
    """Count, mean, population std, min and max of wildfire lengths."""
    if not fires:
        raise GraphError("cannot summarise an empty wildfire list")
    lengths = np.array([f.length for f in fires], dtype=np.float64)
    return DatasetStats(
        n_fires=len(fires),
        mean_len=float(lengths.mean()),
        std_len=float(lengths.std(ddof=0)),
        min_len=int(lengths.min()),
        max_len=int(lengths.max()),
    )


def build_wildfires(
    points: Sequence[EncodedPoint],
    k: int = DEFAULT_K,
    s_r: float = DEFAULT_SPATIAL_RADIUS_M,
    t_r: float = DEFAULT_TEMPORAL_RADIUS_S,
) -> List[Wildfire]:
    """Full reconstruction: knn -> radius filter -> graph -> components."""
    by_id = {p.point_id: p for p in points}
    if len(by_id) != len(points):
        raise GraphError("point ids are not unique")
    if len(points) == 1:
        return [Wildfire((points[0],))]

    sets = filter_neighbors(knn(points, k), s_r, t_r)
    graph = build_graph(sets)
    fires = extract_components(graph, by_id)
    logger.info("Built %d wildfires from %d points (%d edges)", len(fires), len(points), graph.graph.number_of_edges())
    return fires


def write_wildfires(fires: Sequence[Wildfire], path: str) -> None:
    """One row per fire: fire_id, length, space-separated ordered point_ids."""
    frame = pd.DataFrame({
        "fire_id": list(range(len(fires))),
        "length": [f.length for f in fires],
        "point_ids": [" ".join(str(pid) for pid in f.point_ids) for f in fires],
    })
    frame.to_csv(path, index=False)


def read_wildfires(path: str, points: Dict[int, EncodedPoint]) -> List[Wildfire]:
    """Reload write_wildfires output against the encoded points; a garbled file raises GraphError."""
    try:
        frame = pd.read_csv(path, dtype={"point_ids": str}, keep_default_na=False)
        rows = list(zip(frame["fire_id"], frame["length"].astype(int), frame["point_ids"]))
    except (ValueError, TypeError, KeyError) as e:
        raise GraphError(f"unreadable wildfire file {path}: {e}") from e

    fires = []
    for fire_id, length, ids in rows:
        try:
            members = tuple(points[int(pid)] for pid in str(ids).split())
        except KeyError as e:
            raise GraphError(f"fire {fire_id} references unknown point {e.args[0]}") from e
        except ValueError as e:
            raise GraphError(f"fire {fire_id} has a malformed point id list") from e
        if len(members) != length:
            raise GraphError(f"fire {fire_id} declares length {length} but lists {len(members)} points")
        fires.append(Wildfire(members))
    return fires


def write_stats(stats: DatasetStats, path: str) -> None:
    pd.DataFrame(stats.rows(), columns=["statistic", "value"]).to_csv(path, index=False)
