import numpy as np
import pytest

from config import Task
from conftest import EPOCH_2013, make_point
from errors import SequenceError
from firegraph import Wildfire
from ingest import FEATURE_DIM
from sequence import (
    BinarySample,
    Direction,
    balance_binary,
    bearing_deg,
    build_samples,
    class_index,
    direction_of,
    label_of,
    make_binary,
    make_multiclass,
    read_samples,
    sample_dimension,
    step_view,
    write_samples,
)

D = 0.001


def _fire(moves, start_id=0, lat=-25.0, lon=28.0):
    """Fire starting at (lat, lon); moves are (dlat, dlon) steps, ten minutes apart."""
    points = [make_point(start_id, lat, lon, EPOCH_2013)]
    for i, (dlat, dlon) in enumerate(moves, start=1):
        lat, lon = lat + dlat, lon + dlon
        points.append(make_point(start_id + i, lat, lon, EPOCH_2013 + 600 * i))
    return Wildfire(tuple(points))


def test_sector_centres_map_to_distinct_codes():
    codes = [direction_of(45.0 * i) for i in range(8)]
    assert codes == [Direction.N, Direction.NE, Direction.E, Direction.SE,
                     Direction.S, Direction.SW, Direction.W, Direction.NW]


def test_sector_boundaries_belong_to_the_clockwise_later_sector():
    assert direction_of(22.5) == Direction.NE
    assert direction_of(22.4999) == Direction.N
    assert direction_of(337.5) == Direction.N
    assert direction_of(337.4999) == Direction.NW
    assert direction_of(360.0) == Direction.N


def test_opposite_bearings_differ_by_four():
    for bearing in range(360):
        a = direction_of(float(bearing))
        b = direction_of(float((bearing + 180) % 360))
        assert (b - a) % 8 == 4


def test_bearing_cardinal_points():
    assert bearing_deg((0.0, 0.0), (1.0, 0.0)) == pytest.approx(0.0)
    assert bearing_deg((0.0, 0.0), (0.0, 1.0)) == pytest.approx(90.0)
    assert bearing_deg((0.0, 0.0), (-1.0, 0.0)) == pytest.approx(180.0)
    assert bearing_deg((0.0, 0.0), (0.0, -1.0)) == pytest.approx(270.0)
    with pytest.raises(SequenceError):
        bearing_deg((1.0, 1.0), (1.0, 1.0))


def test_make_binary_labels_by_length():
    fires = [_fire([(D, 0)] * 2), _fire([(D, 0)], start_id=10), _fire([(D, 0)] * 3, start_id=20), _fire([], start_id=30)]
    samples = make_binary(fires, 3)
    assert [s.label for s in samples] == [1, 0]
    assert all(s.input.shape == (2 * FEATURE_DIM,) for s in samples)
    # label-1 sample keeps C_0, C_1 and drops C_2
    assert samples[0].input[0] == 0.0 and samples[0].input[FEATURE_DIM] == 1.0
    assert samples[1].input[0] == 10.0 and samples[1].input[FEATURE_DIM] == 11.0


def test_make_binary_lw2_uses_single_point_fires_as_negatives():
    samples = make_binary([_fire([]), _fire([(D, 0)], start_id=5)], 2)
    assert sorted(s.label for s in samples) == [0, 1]
    assert all(s.input.shape == (FEATURE_DIM,) for s in samples)


def test_make_multiclass_direction_block_and_label():
    fire = _fire([(D, 0), (0, D), (-D, 0)])
    (sample,) = make_multiclass([fire], 4)
    assert sample.input.shape == (3 * (FEATURE_DIM + 1),)
    assert list(sample.input[3 * FEATURE_DIM:]) == [0.0, float(Direction.N), float(Direction.E)]
    assert sample.label == Direction.S


def test_make_multiclass_lw2_has_zero_direction():
    (sample,) = make_multiclass([_fire([(-D, -D)])], 2)
    assert sample.input[-1] == 0.0
    assert sample.label == Direction.SW


def test_coincident_points_skip_the_fire():
    skipped = []
    samples = make_multiclass([_fire([(0, 0), (D, 0)]), _fire([(D, 0), (D, 0)], start_id=10)], 3, skipped)
    assert len(samples) == 1
    assert len(skipped) == 1 and skipped[0].points[0].point_id == 0


@pytest.mark.parametrize("l_w", range(2, 9))
def test_dimension_laws(l_w):
    fires = [_fire([(D, 0)] * (l_w - 1)), _fire([(D, 0)] * (l_w - 2), start_id=100)]
    binary, _ = build_samples(fires, Task.BINARY, l_w)
    multiclass, _ = build_samples(fires, Task.MULTICLASS, l_w)
    assert {s.input.shape[0] for s in binary} == {80 * (l_w - 1)}
    assert {s.input.shape[0] for s in multiclass} == {81 * (l_w - 1)}
    assert sample_dimension(Task.BINARY, l_w) == 80 * (l_w - 1)
    assert sample_dimension(Task.MULTICLASS, l_w) == 80 * (l_w - 1) + (l_w - 1)


def test_invalid_lw():
    with pytest.raises(SequenceError):
        make_binary([], 1)


def test_step_view_interleaves_direction_per_step():
    (sample,) = make_multiclass([_fire([(D, 0), (0, D), (-D, 0)], start_id=3)], 4)
    view = step_view(np.stack([sample.input]), 4, Task.MULTICLASS)
    assert view.shape == (1, 3, 81)
    assert [view[0, t, 0] for t in range(3)] == [3.0, 4.0, 5.0]
    assert [view[0, t, 80] for t in range(3)] == [0.0, 1.0, 3.0]
    with pytest.raises(SequenceError):
        step_view(np.zeros((1, 10)), 4, Task.MULTICLASS)


def test_class_index_round_trip():
    assert class_index(Task.MULTICLASS, Direction.N) == 0
    assert class_index(Task.MULTICLASS, Direction.NW) == 7
    assert label_of(Task.MULTICLASS, 7) == Direction.NW
    assert class_index(Task.BINARY, 1) == 1


def test_balance_binary_downsamples_majority():
    samples = [BinarySample(np.zeros(80), 1 if i < 3 else 0, 2) for i in range(10)]
    balanced = balance_binary(samples, seed=1)
    assert sorted(s.label for s in balanced) == [0, 0, 0, 1, 1, 1]
    assert balance_binary(samples, seed=1) == balanced
    assert balance_binary(samples[3:], seed=1) == []


def test_dataset_file_and_manifest(tmp_path):
    fires = [_fire([(D, 0), (0, D)]), _fire([(0, -D), (0, -D)], start_id=10)]
    samples, skipped = build_samples(fires, Task.MULTICLASS, 3)
    path = str(tmp_path / "dataset.csv")
    manifest = write_samples(samples, path, Task.MULTICLASS, 3, skipped)
    assert manifest["dimension"] == 162
    assert manifest["class_counts"] == {"3": 1, "7": 1}
    X, y, reloaded = read_samples(path)
    assert reloaded == manifest
    assert X.shape == (2, 162)
    assert list(y) == [3, 7]
    assert np.array_equal(X[0], samples[0].input)


def _written_dataset(tmp_path):
    fires = [_fire([(D, 0), (0, D)]), _fire([(0, -D), (0, -D)], start_id=10)]
    samples, skipped = build_samples(fires, Task.MULTICLASS, 3)
    path = tmp_path / "dataset.csv"
    write_samples(samples, str(path), Task.MULTICLASS, 3, skipped)
    return path


def test_garbled_dataset_is_a_sequence_error(tmp_path):
    path = _written_dataset(tmp_path)
    lines = path.read_text(encoding="utf-8").splitlines()
    lines[1] = lines[1].replace(",", ";", 5)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(SequenceError):
        read_samples(str(path))


def test_corrupt_manifest_is_a_sequence_error(tmp_path):
    path = _written_dataset(tmp_path)
    (tmp_path / "dataset.csv.manifest.json").write_text("{\"dimension\": ", encoding="utf-8")
    with pytest.raises(SequenceError):
        read_samples(str(path))
