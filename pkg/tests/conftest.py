"""
Shared fixtures for the wildfire pipeline tests.
"""
import datetime
import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from ingest import FEATURE_DIM, EncodedPoint  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run multi-minute learning tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: multi-minute learning run, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


EPOCH_2013 = int(datetime.datetime(2013, 1, 1, tzinfo=datetime.timezone.utc).timestamp())


def make_point(point_id, lat, lon, timestamp=EPOCH_2013, fill=None):
    features = np.full(FEATURE_DIM, float(point_id if fill is None else fill))
    features.setflags(write=False)
    return EncodedPoint(point_id, int(timestamp), float(lat), float(lon), features)


@pytest.fixture
def point_factory():
    return make_point


@pytest.fixture
def detection_csv(tmp_path):
    """A small detection file with one malformed row (line 4)."""
    path = tmp_path / "detections.csv"
    path.write_text(
        "latitude,longitude,acq_date,acq_time,frp,elevation\n"
        "-25.0,28.0,2013-01-01,0130,10.5,1200\n"
        "-25.001,28.001,2013-01-01,0300,20.0,\n"
        "-25.002,28.002,2013-01-01,2561,5.0,1000\n"
        "-40.0,28.0,2013-06-01,1200,3.0,10\n",
        encoding="utf-8",
    )
    return str(path)


@pytest.fixture(scope="session")
def synthetic_fires(tmp_path_factory):
    """Wildfires recovered from a small synthetic detection file (lengths 1..4, fixed direction)."""
    from firegraph import build_wildfires
    from ingest import encode_points, fit_normalizer, parse_detections
    from synth import SynthSpec, synth_generate

    path = str(tmp_path_factory.mktemp("synth") / "detections.csv")
    synth_generate(SynthSpec(n_fires=120, length_min=1, length_max=4, p_stay=1.0, seed=7), path)
    raw = parse_detections(path)
    return build_wildfires(encode_points(raw, fit_normalizer(raw)))


@pytest.fixture
def tiny_config():
    from config import RunConfig
    return RunConfig(epochs_lr=2, epochs_rnn=1, folds=2, repeats=2, batch_size=16)
