import itertools

import numpy as np
import pytest

from conftest import EPOCH_2013, make_point
from errors import GraphError
from firegraph import (
    DatasetStats,
    Neighbor,
    NeighborSet,
    build_graph,
    build_wildfires,
    compute_stats,
    extract_components,
    filter_neighbors,
    haversine_m,
    knn,
    read_wildfires,
    write_stats,
    write_wildfires,
)

# ~111.2 m per 0.001 degree of latitude
STEP = 0.001


def _column(n, lat0=-25.0, lon0=28.0, dt=600):
    return [make_point(i, lat0 + i * STEP, lon0, EPOCH_2013 + i * dt) for i in range(n)]


def test_haversine_known_distance():
    assert haversine_m((0.0, 0.0), (0.0, 1.0)) == pytest.approx(111194.93, rel=1e-6)
    assert haversine_m((-25.0, 28.0), (-25.0, 28.0)) == 0.0


def test_knn_returns_k_nearest_sorted_without_self():
    points = _column(12)
    sets = knn(points, k=3)
    assert [s.center for s in sets] == list(range(12))
    middle = sets[5].neighbors
    assert {n.point_id for n in middle[:2]} == {4, 6}
    assert middle[2].point_id in (3, 7)
    assert middle[0].distance_m == pytest.approx(middle[1].distance_m, rel=1e-9)
    assert all(a.distance_m <= b.distance_m for a, b in zip(middle, middle[1:]))
    assert all(n.point_id != 5 for n in middle)
    assert middle[0].time_gap_s == 600


def test_knn_breaks_distance_ties_by_point_id():
    center = make_point(0, 0.0, 0.0)
    ring = [
        make_point(4, 0.001, 0.0),
        make_point(2, -0.001, 0.0),
        make_point(3, 0.0, 0.001),
        make_point(1, 0.0, -0.001),
    ]
    sets = knn([center] + ring, k=2)
    neighbors = sets[0].neighbors
    assert len(neighbors) == 2
    distances = [haversine_m((0.0, 0.0), (p.raw_lat, p.raw_lon)) for p in ring]
    ranked = sorted(zip(distances, [p.point_id for p in ring]))
    assert [n.point_id for n in neighbors] == [pid for _, pid in ranked[:2]]


def test_knn_with_fewer_points_than_k():
    sets = knn(_column(3), k=8)
    assert all(len(s.neighbors) == 2 for s in sets)


def test_knn_needs_two_points():
    with pytest.raises(GraphError):
        knn(_column(1))


def test_filter_bounds_are_closed():
    sets = [NeighborSet(0, (Neighbor(1, 375.0, 21600), Neighbor(2, 375.0001, 0), Neighbor(3, 10.0, 21601)))]
    (kept,) = filter_neighbors(sets, 375.0, 21600)
    assert [n.point_id for n in kept.neighbors] == [1]


def test_build_graph_is_undirected_union():
    sets = [NeighborSet(0, (Neighbor(1, 1.0, 0),)), NeighborSet(1, ()), NeighborSet(2, ())]
    graph = build_graph(sets)
    assert graph.nodes == {0, 1, 2}
    assert graph.edges == {frozenset({0, 1})}


def test_components_are_ordered_chronologically():
    points = [
        make_point(0, -25.0, 28.0, EPOCH_2013 + 100),
        make_point(1, -25.001, 28.0, EPOCH_2013),
        make_point(2, -30.0, 20.0, EPOCH_2013 - 50),
    ]
    fires = build_wildfires(points)
    assert [f.point_ids for f in fires] == [[2], [1, 0]]


def test_extract_components_unknown_node():
    graph = build_graph([NeighborSet(0, (Neighbor(9, 1.0, 0),))])
    with pytest.raises(GraphError):
        extract_components(graph, {0: make_point(0, 0.0, 0.0)})


def test_temporal_gap_splits_a_spatial_chain():
    points = _column(4)
    late = make_point(4, -25.0 + 4 * STEP, 28.0, EPOCH_2013 + 3 * 600 + 21601)
    fires = build_wildfires(points + [late])
    assert sorted(f.length for f in fires) == [1, 4]


def test_single_point_is_one_fire():
    fires = build_wildfires([make_point(0, 0.0, 0.0)])
    assert len(fires) == 1 and fires[0].length == 1


def test_duplicate_ids_rejected():
    with pytest.raises(GraphError):
        build_wildfires([make_point(0, 0.0, 0.0), make_point(0, 0.1, 0.0)])


def _union_find_partition(points, k, s_r, t_r):
    """Brute-force reference: exhaustive KNN, then union-find over kept links."""
    parent = list(range(len(points)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, p in enumerate(points):
        others = sorted(
            (haversine_m((p.raw_lat, p.raw_lon), (q.raw_lat, q.raw_lon)), q.point_id, j)
            for j, q in enumerate(points) if j != i
        )[:k]
        for distance, _, j in others:
            if distance <= s_r and abs(points[j].timestamp - p.timestamp) <= t_r:
                parent[find(i)] = find(j)

    groups = {}
    for i, p in enumerate(points):
        groups.setdefault(find(i), set()).add(p.point_id)
    return sorted(sorted(g) for g in groups.values())


def test_components_match_union_find_oracle():
    for seed in range(50):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 201))
        lats = -25.0 + rng.uniform(0, 0.02, n)
        lons = 28.0 + rng.uniform(0, 0.02, n)
        times = EPOCH_2013 + rng.integers(0, 3 * 86400, n)
        points = [make_point(i, lats[i], lons[i], times[i]) for i in range(n)]
        fires = build_wildfires(points, k=8, s_r=375.0, t_r=21600)
        got = sorted(sorted(f.point_ids) for f in fires)
        assert got == _union_find_partition(points, 8, 375.0, 21600), f"seed {seed}"
        assert sorted(itertools.chain.from_iterable(got)) == list(range(n))


def test_compute_stats_population_std():
    fires = build_wildfires(_column(3) + [make_point(10, -30.0, 20.0)])
    stats = compute_stats(fires)
    assert stats == DatasetStats(2, 2.0, 1.0, 1, 3)
    assert stats.rows()[1] == ("Mean of Wildfire Length", "2.000000")
    with pytest.raises(GraphError):
        compute_stats([])


def test_wildfire_and_stats_files(tmp_path):
    points = _column(3) + [make_point(10, -30.0, 20.0)]
    fires = build_wildfires(points)
    path = str(tmp_path / "wildfires.csv")
    write_wildfires(fires, path)
    reloaded = read_wildfires(path, {p.point_id: p for p in points})
    assert [f.point_ids for f in reloaded] == [f.point_ids for f in fires]

    stats_path = tmp_path / "stats.csv"
    write_stats(compute_stats(fires), str(stats_path))
    lines = stats_path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "statistic,value"
    assert len(lines) == 6


@pytest.mark.parametrize("body", [
    "fire_id,length,point_ids\n0,three,0 1 2\n",
    "fire_id,length,point_ids\n0,3,0 x 2\n",
    "fire_id,size\n0,3\n",
    "fire_id,length,point_ids\n0,3,0 1 2,7,7\n",
])
def test_garbled_wildfire_file_is_a_graph_error(tmp_path, body):
    points = _column(3)
    path = tmp_path / "wildfires.csv"
    path.write_text(body, encoding="utf-8")
    with pytest.raises(GraphError):
        read_wildfires(str(path), {p.point_id: p for p in points})
