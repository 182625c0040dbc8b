#!/usr/bin/env python
# coding: utf-8
"""
Supervised samples from ordered wildfires.

Binary: does a fire of l_w-1 observed points continue to burn?
Multiclass: in which of the 8 compass sectors does the next point lie?
"""
import json
import logging
import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from config import Task
from errors import SequenceError
from firegraph import Wildfire
from ingest import FEATURE_DIM

logger = logging.getLogger(__name__)

MIN_LW = 2
SECTOR_WIDTH = 45.0


class Direction(IntEnum):
    """Compass sector codes, clockwise from north; NONE marks a fire's first point."""

    NONE = 0
    N = 1
    NE = 2
    E = 3
    SE = 4
    S = 5
    SW = 6
    W = 7
    NW = 8


@dataclass(frozen=True, eq=False)
class BinarySample:
    input: np.ndarray
    label: int
    l_w: int


@dataclass(frozen=True, eq=False)
class MulticlassSample:
    input: np.ndarray
    label: int
    l_w: int


Sample = Union[BinarySample, MulticlassSample]


def bearing_deg(origin: Tuple[float, float], target: Tuple[float, float]) -> float:
    """Initial great-circle bearing from origin to target, clockwise from true north, in [0, 360)."""
    if origin[0] == target[0] and origin[1] == target[1]:
        raise SequenceError(f"no bearing between coincident points {origin}")
    lat1, lon1 = map(math.radians, origin)
    lat2, lon2 = map(math.radians, target)
    dlon = lon2 - lon1
    x = math.sin(dlon) * math.cos(lat2)
    y = math.cos(lat1) * math.sin(lat2) - math.sin(lat1) * math.cos(lat2) * math.cos(dlon)
    bearing = math.degrees(math.atan2(x, y)) % 360.0
    return 0.0 if bearing >= 360.0 else bearing


def direction_of(bearing: float) -> Direction:
    """Half-open 45 degree sectors; a boundary belongs to the clockwise-later sector."""
    sector = int(((bearing % 360.0) + SECTOR_WIDTH / 2) % 360.0 // SECTOR_WIDTH)
    return Direction(sector + 1)


def step_direction(a, b) -> Direction:
    """Direction from encoded point a to encoded point b."""
    return direction_of(bearing_deg((a.raw_lat, a.raw_lon), (b.raw_lat, b.raw_lon)))


def _check_lw(l_w: int) -> None:
    if l_w < MIN_LW:
        raise SequenceError(f"l_w must be >= {MIN_LW}, got {l_w}")


def _concat_features(points) -> np.ndarray:
    return np.concatenate([p.features for p in points]).astype(np.float64)


def make_binary(fires: Sequence[Wildfire], l_w: int) -> List[BinarySample]:
    """
    Fires of exactly l_w points lose their last point and get label 1; fires of
    exactly l_w-1 points get label 0. Every other length is ignored.
    """
    _check_lw(l_w)
    samples = []
    for fire in fires:
        if fire.length == l_w:
            samples.append(BinarySample(_concat_features(fire.points[:-1]), 1, l_w))
        elif fire.length == l_w - 1:
            samples.append(BinarySample(_concat_features(fire.points), 0, l_w))
    return samples


def make_multiclass(
    fires: Sequence[Wildfire],
    l_w: int,
    skipped: Optional[List[Wildfire]] = None,
) -> List[MulticlassSample]:
    """
    One sample per fire of exactly l_w points.

    The input is the features of C_0..C_{l_w-2} followed by the direction
    block d_0=0, d_1..d_{l_w-2}; the label is the direction from C_{l_w-2} to
    C_{l_w-1}. Fires with a coincident consecutive pair have no bearing and
    are skipped (collected in `skipped` when given).
    """
    _check_lw(l_w)
    samples = []
    n_skipped = 0
    for fire in fires:
        if fire.length != l_w:
            continue
        try:
            directions = [step_direction(a, b) for a, b in zip(fire.points[:-1], fire.points[1:])]
        except SequenceError:
            n_skipped += 1
            if skipped is not None:
                skipped.append(fire)
            continue
        block = np.array([Direction.NONE] + directions[:-1], dtype=np.float64)
        samples.append(MulticlassSample(
            np.concatenate([_concat_features(fire.points[:-1]), block]),
            int(directions[-1]),
            l_w,
        ))
    if n_skipped:
        logger.warning("l_w=%d: skipped %d fires with coincident consecutive points", l_w, n_skipped)
    return samples


def build_samples(fires: Sequence[Wildfire], task: Task, l_w: int) -> Tuple[List[Sample], int]:
    """Dispatch on task; returns (samples, number of skipped fires)."""
    if Task(task) is Task.BINARY:
        return make_binary(fires, l_w), 0
    skipped: List[Wildfire] = []
    return make_multiclass(fires, l_w, skipped), len(skipped)


def sample_dimension(task: Task, l_w: int) -> int:
    steps = l_w - 1
    return FEATURE_DIM * steps if Task(task) is Task.BINARY else (FEATURE_DIM + 1) * steps


def n_classes(task: Task) -> int:
    return 2 if Task(task) is Task.BINARY else 8


def class_index(task: Task, label: int) -> int:
    """Label -> output unit. Direction codes 1..8 map to units 0..7."""
    return label if Task(task) is Task.BINARY else label - 1


def label_of(task: Task, index: int) -> int:
    return index if Task(task) is Task.BINARY else index + 1


def step_view(inputs: np.ndarray, l_w: int, task: Task) -> np.ndarray:
    """
    Reshape flat inputs (n, D) to (n, l_w-1, 80) for binary or (n, l_w-1, 81)
    for multiclass, where step t holds C_t's features followed by d_t.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim == 1:
        inputs = inputs[None, :]
    steps = l_w - 1
    if inputs.shape[1] != sample_dimension(task, l_w):
        raise SequenceError(f"input width {inputs.shape[1]} does not match {task} l_w={l_w}")
    features = inputs[:, :FEATURE_DIM * steps].reshape(len(inputs), steps, FEATURE_DIM)
    if Task(task) is Task.BINARY:
        return features
    directions = inputs[:, FEATURE_DIM * steps:].reshape(len(inputs), steps, 1)
    return np.concatenate([features, directions], axis=2)


def samples_to_arrays(samples: Sequence[Sample]) -> Tuple[np.ndarray, np.ndarray]:
    """Stack samples into (X flat, y labels)."""
    if not samples:
        return np.empty((0, 0)), np.empty(0, dtype=np.int64)
    return np.vstack([s.input for s in samples]), np.array([s.label for s in samples], dtype=np.int64)


def balance_binary(samples: Sequence[BinarySample], seed: int) -> List[BinarySample]:
    """Downsample the majority label to the minority count, keeping sample order."""
    rng = np.random.default_rng(seed)
    by_label = {label: [i for i, s in enumerate(samples) if s.label == label] for label in (0, 1)}
    keep = min(len(v) for v in by_label.values())
    if keep == 0:
        return []
    chosen = set()
    for indices in by_label.values():
        chosen.update(int(i) for i in rng.choice(indices, size=keep, replace=False))
    return [s for i, s in enumerate(samples) if i in chosen]


def class_counts(samples: Sequence[Sample]) -> Dict[str, int]:
    counts: Dict[str, int] = {}
    for s in samples:
        counts[str(s.label)] = counts.get(str(s.label), 0) + 1
    return dict(sorted(counts.items(), key=lambda item: int(item[0])))


def write_samples(samples: Sequence[Sample], path: str, task: Task, l_w: int, skipped_fires: int = 0) -> Dict:
    """
    Write samples as `label, x0..xD` rows and a `<path>.manifest.json` sidecar.

    Returns:
        The manifest dictionary
    """
    dimension = sample_dimension(task, l_w)
    X, y = samples_to_arrays(samples)
    if not len(samples):
        X = np.empty((0, dimension))
    frame = pd.DataFrame(X, columns=[f"x{i}" for i in range(dimension)])
    frame.insert(0, "label", y)
    frame.to_csv(path, index=False)

    manifest = {
        "task": Task(task).value,
        "l_w": l_w,
        "dimension": dimension,
        "n_samples": len(samples),
        "class_counts": class_counts(samples),
        "skipped_fires": skipped_fires,
    }
    with open(path + ".manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return manifest


def read_samples(path: str) -> Tuple[np.ndarray, np.ndarray, Dict]:
    """Reload write_samples output; a garbled dataset or manifest raises SequenceError."""
    try:
        with open(path + ".manifest.json", "r", encoding="utf-8") as f:
            manifest = json.load(f)
        frame = pd.read_csv(path, float_precision="round_trip")
        if frame.isna().to_numpy().any():
            raise ValueError("empty or non-numeric cells")
        y = frame["label"].to_numpy(dtype=np.int64)
        X = frame.drop(columns=["label"]).to_numpy(dtype=np.float64)
        dimension = int(manifest["dimension"])
    except (ValueError, TypeError, KeyError) as e:
        raise SequenceError(f"unreadable dataset {path}: {e}") from e
    if X.shape[1] != dimension:
        raise SequenceError(f"{path}: {X.shape[1]} columns but manifest says {dimension}")
    if not np.isfinite(X).all():
        raise SequenceError(f"{path}: non-numeric sample values")
    return X, y, manifest
