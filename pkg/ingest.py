#!/usr/bin/env python
# coding: utf-8
"""
Detection ingest for the wildfire spread pipeline.
Parses active-fire detection files, filters them to a bounding box and encodes
each detection as an 80-dimensional feature vector.

Feature layout: [hour one-hot (24) | week one-hot (52) | lat, lon, frp, elevation]
"""
import dataclasses
import datetime
import io
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, TextIO, Tuple, Union

import numpy as np
import pandas as pd

from errors import DetectionParseError, WildfireError

logger = logging.getLogger(__name__)

HOURS = 24
WEEKS = 52
CONTINUOUS_FEATURES = ("latitude", "longitude", "frp", "elevation")
FEATURE_DIM = HOURS + WEEKS + len(CONTINUOUS_FEATURES)
HOUR_SLICE = slice(0, HOURS)
WEEK_SLICE = slice(HOURS, HOURS + WEEKS)
CONTINUOUS_SLICE = slice(HOURS + WEEKS, FEATURE_DIM)

DEFAULT_COLUMNS = {
    "latitude": "latitude",
    "longitude": "longitude",
    "acq_date": "acq_date",
    "acq_time": "acq_time",
    "frp": "frp",
    "elevation": "elevation",
}
REQUIRED_COLUMNS = ("latitude", "longitude", "acq_date", "acq_time", "frp")
LINE_COLUMN = "__line__"

assert FEATURE_DIM == 80


@dataclass(frozen=True)
class RawDetection:
    """One satellite fire pixel. acq_time is minutes since midnight."""

    latitude: float
    longitude: float
    acq_date: datetime.date
    acq_time: int
    frp: float
    elevation: Optional[float] = None


@dataclass(frozen=True)
class BoundingBox:
    lat_min: float = -35.0
    lat_max: float = -22.0
    lon_min: float = 16.0
    lon_max: float = 33.0

    def __post_init__(self):
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise WildfireError(f"degenerate bounding box: {self}")

    def contains(self, latitude: float, longitude: float) -> bool:
        return self.lat_min <= latitude <= self.lat_max and self.lon_min <= longitude <= self.lon_max


@dataclass(frozen=True)
class NormalizationStats:
    """Observed min and max of each continuous feature, in CONTINUOUS_FEATURES order."""

    mins: Tuple[float, ...]
    maxs: Tuple[float, ...]

    def as_dict(self) -> Dict[str, Tuple[float, float]]:
        return {name: (lo, hi) for name, lo, hi in zip(CONTINUOUS_FEATURES, self.mins, self.maxs)}


@dataclass(frozen=True, eq=False)
class EncodedPoint:
    """
    A detection ready for graphing and sequencing.

    features is a read-only float64 vector of length 80; raw_lat/raw_lon and
    timestamp (UTC seconds) are kept for distance and ordering.
    """

    point_id: int
    timestamp: int
    raw_lat: float
    raw_lon: float
    features: np.ndarray


def _parse_hhmm(raw: str) -> int:
    value = int(raw)
    hours, minutes = divmod(value, 100)
    if value < 0 or hours >= 24 or minutes >= 60:
        raise ValueError(f"acq_time {raw!r} is not a valid HHMM time")
    return hours * 60 + minutes


def _parse_float(raw: str, name: str) -> float:
    value = float(raw)
    if not math.isfinite(value):
        raise ValueError(f"{name} is not finite: {raw!r}")
    return value


def _parse_row(fields: Dict[str, str]) -> RawDetection:
    latitude = _parse_float(fields["latitude"], "latitude")
    longitude = _parse_float(fields["longitude"], "longitude")
    if not -90.0 <= latitude <= 90.0:
        raise ValueError(f"latitude {latitude} out of range [-90, 90]")
    if not -180.0 <= longitude <= 180.0:
        raise ValueError(f"longitude {longitude} out of range [-180, 180]")

    frp = _parse_float(fields["frp"], "frp")
    if frp < 0:
        raise ValueError(f"frp {frp} is negative")

    acq_date = datetime.date.fromisoformat(fields["acq_date"].strip())
    acq_time = _parse_hhmm(fields["acq_time"])

    raw_elevation = fields.get("elevation", "")
    elevation = _parse_float(raw_elevation, "elevation") if raw_elevation.strip() else None

    return RawDetection(latitude, longitude, acq_date, acq_time, frp, elevation)


def _read_text(source: Union[str, TextIO]) -> str:
    """Whole detection file as text; undecodable bytes raise with their line number."""
    if not isinstance(source, str):
        try:
            return source.read()
        except UnicodeDecodeError as e:
            raise DetectionParseError(f"detection stream is not valid UTF-8 ({e.reason})") from e

    with open(source, "rb") as handle:
        payload = handle.read()
    try:
        return payload.decode("utf-8-sig")
    except UnicodeDecodeError as e:
        line_number = payload.count(b"\n", 0, e.start) + 1
        raise DetectionParseError(f"byte 0x{payload[e.start]:02x} is not valid UTF-8", line_number=line_number) from e


def _number_lines(text: str, delimiter: str) -> str:
    """Prefix every non-blank line with its 1-based line number as an extra first field."""
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise DetectionParseError("detection file has no header row", line_number=1)
    numbered = [f"{LINE_COLUMN}{delimiter}{lines[0]}"]
    for line_number, line in enumerate(lines[1:], start=2):
        numbered.append(f"{line_number}{delimiter}{line}" if line.strip() else "")
    return "\n".join(numbered) + "\n"


def parse_detections(
    source: Union[str, TextIO],
    columns: Optional[Dict[str, str]] = None,
    strict: bool = True,
    delimiter: str = ",",
    errors: Optional[List[DetectionParseError]] = None,
) -> List[RawDetection]:
    """
    Parse a delimiter-separated detection file.

    Rows whose field count differs from the header's are malformed in the same
    way as rows with bad values.

    Args:
        source: Path or open text stream; the first row must be a header
        columns: Logical name -> header name map (defaults to DEFAULT_COLUMNS)
        strict: Abort on the first malformed row when True, skip it otherwise
        delimiter: Field separator
        errors: Optional list that collects the row errors skipped in lenient mode

    Returns:
        One RawDetection per well-formed row, in input order

    Raises:
        DetectionParseError: on undecodable bytes, a missing header or required
            column, or any malformed row in strict mode
    """
    column_map = dict(DEFAULT_COLUMNS)
    if columns:
        column_map.update(columns)

    numbered = _number_lines(_read_text(source), delimiter)
    long_rows: List[Tuple[int, int]] = []

    def _record_long_row(fields: List[str]) -> None:
        long_rows.append((int(fields[0]), len(fields) - 1))

    try:
        frame = pd.read_csv(
            io.StringIO(numbered),
            sep=delimiter,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            engine="python",
            index_col=False,
            on_bad_lines=_record_long_row,
        )
    except pd.errors.ParserError as e:
        raise DetectionParseError(f"unreadable detection file: {e}") from e
    frame.columns = [str(c).strip() for c in frame.columns]
    line_numbers = [int(n) for n in frame.pop(LINE_COLUMN)]
    n_fields = len(frame.columns)

    missing = [name for name in REQUIRED_COLUMNS if column_map[name] not in frame.columns]
    if missing:
        raise DetectionParseError(f"missing required columns: {', '.join(missing)}", line_number=1)

    present = {name: header for name, header in column_map.items() if header in frame.columns}
    if "elevation" not in present:
        logger.info("No elevation column found; elevations left absent")

    # Only absent trailing fields come back as NaN; empty ones stay "".
    short_rows = frame.isna().any(axis=1).tolist()
    found_fields = frame.notna().sum(axis=1).tolist()
    frame = frame.fillna("")

    column_values = {name: frame[header].tolist() for name, header in present.items()}
    failures: List[Tuple[int, DetectionParseError]] = [
        (line_number, DetectionParseError(f"expected {n_fields} fields, found {found}", line_number=line_number))
        for line_number, found in long_rows
    ]
    detections: List[RawDetection] = []
    for row_index, line_number in enumerate(line_numbers):
        if short_rows[row_index]:
            message = f"expected {n_fields} fields, found {found_fields[row_index]}"
            failures.append((line_number, DetectionParseError(message, line_number=line_number)))
            continue
        fields = {name: values[row_index] for name, values in column_values.items()}
        try:
            detections.append(_parse_row(fields))
        except ValueError as e:
            error = DetectionParseError(str(e), line_number=line_number)
            error.__cause__ = e
            failures.append((line_number, error))

    failures.sort(key=lambda failure: failure[0])
    if failures and strict:
        first = failures[0][1]
        raise first from first.__cause__
    for _, error in failures:
        logger.warning("Skipping malformed detection: %s", error)
        if errors is not None:
            errors.append(error)

    logger.info("Parsed %d detections (%d malformed rows skipped)", len(detections), len(failures))
    return detections


def filter_bbox(points: Iterable[RawDetection], box: BoundingBox) -> List[RawDetection]:
    """Keep the detections inside the closed bounding box, order preserved."""
    return [p for p in points if box.contains(p.latitude, p.longitude)]


def encode_hour(acq_time: int) -> np.ndarray:
    """One-hot hour of day from minutes since midnight."""
    if not 0 <= acq_time < 1440:
        raise DetectionParseError(f"acq_time {acq_time} outside [0, 1440)")
    vector = np.zeros(HOURS)
    vector[acq_time // 60] = 1.0
    return vector


def encode_week(acq_date: datetime.date) -> np.ndarray:
    """One-hot week of year; days 358+ (and the leap day 366) fold into week 51."""
    if isinstance(acq_date, str):
        try:
            acq_date = datetime.date.fromisoformat(acq_date)
        except ValueError as e:
            raise DetectionParseError(f"invalid date {acq_date!r}") from e
    if not isinstance(acq_date, datetime.date):
        raise DetectionParseError(f"invalid date {acq_date!r}")
    day_of_year = acq_date.timetuple().tm_yday
    vector = np.zeros(WEEKS)
    vector[min((day_of_year - 1) // 7, WEEKS - 1)] = 1.0
    return vector


def decode_hour(features: np.ndarray) -> int:
    return int(np.argmax(features[HOUR_SLICE]))


def decode_week(features: np.ndarray) -> int:
    return int(np.argmax(features[WEEK_SLICE]))


def _continuous_values(point: RawDetection) -> np.ndarray:
    elevation = 0.0 if point.elevation is None else point.elevation
    return np.array([point.latitude, point.longitude, point.frp, elevation], dtype=np.float64)


def fit_normalizer(points: List[RawDetection]) -> NormalizationStats:
    """
    Fit min-max statistics over the continuous features.

    Absent elevations count as 0.0 m.
    """
    if not points:
        raise WildfireError("cannot fit normalization statistics on an empty list")
    values = np.vstack([_continuous_values(p) for p in points])
    return NormalizationStats(
        mins=tuple(float(v) for v in values.min(axis=0)),
        maxs=tuple(float(v) for v in values.max(axis=0)),
    )


def normalize(values: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    """Min-max scale; a degenerate feature (max == min) maps to 0.0."""
    mins = np.asarray(stats.mins)
    spans = np.asarray(stats.maxs) - mins
    safe = np.where(spans == 0, 1.0, spans)
    return np.where(spans == 0, 0.0, (values - mins) / safe)


def detection_timestamp(point: RawDetection) -> int:
    """Seconds since the epoch, UTC."""
    moment = datetime.datetime.combine(
        point.acq_date,
        datetime.time(point.acq_time // 60, point.acq_time % 60),
        tzinfo=datetime.timezone.utc,
    )
    return int(moment.timestamp())


def assemble_features(point: RawDetection, stats: NormalizationStats, point_id: int) -> EncodedPoint:
    """Encode one detection as its 80-dimensional feature vector."""
    features = np.concatenate([
        encode_hour(point.acq_time),
        encode_week(point.acq_date),
        normalize(_continuous_values(point), stats),
    ])
    if features.shape != (FEATURE_DIM,):
        raise WildfireError(f"encoded dimension {features.shape} != ({FEATURE_DIM},)")
    features.setflags(write=False)
    return EncodedPoint(
        point_id=point_id,
        timestamp=detection_timestamp(point),
        raw_lat=point.latitude,
        raw_lon=point.longitude,
        features=features,
    )


def encode_points(points: List[RawDetection], stats: NormalizationStats) -> List[EncodedPoint]:
    """Encode a list of detections with point ids 0..n-1 in input order."""
    return [assemble_features(p, stats, i) for i, p in enumerate(points)]


def load_elevation_lookup(path: str, decimals: int = 3) -> Dict[Tuple[float, float], float]:
    """
    Read a latitude,longitude,elevation CSV keyed by rounded coordinates.

    Args:
        path: CSV file with a header row
        decimals: Rounding applied to both the lookup keys and later queries

    Returns:
        Mapping (lat, lon) -> elevation in meters
    """
    try:
        frame = pd.read_csv(path)
        for column in ("latitude", "longitude", "elevation"):
            if column not in frame.columns:
                raise DetectionParseError(f"elevation lookup lacks column {column!r}", line_number=1)
        return {
            (round(float(lat), decimals), round(float(lon), decimals)): float(elev)
            for lat, lon, elev in zip(frame["latitude"], frame["longitude"], frame["elevation"])
        }
    except WildfireError:
        raise
    except (ValueError, TypeError) as e:
        raise DetectionParseError(f"unreadable elevation lookup {path}: {e}") from e


def attach_elevation(
    points: List[RawDetection],
    lookup: Optional[Dict[Tuple[float, float], float]] = None,
    decimals: int = 3,
) -> List[RawDetection]:
    """Fill absent elevations from the lookup; whatever stays absent is encoded as 0.0 m."""
    filled = []
    missing = 0
    for point in points:
        if point.elevation is None and lookup:
            key = (round(point.latitude, decimals), round(point.longitude, decimals))
            if key in lookup:
                point = dataclasses.replace(point, elevation=lookup[key])
        if point.elevation is None:
            missing += 1
        filled.append(point)
    if missing:
        logger.warning("%d detections have no elevation; using 0.0 m", missing)
    return filled


def write_encoded_points(points: List[EncodedPoint], path: str) -> None:
    """One row per point: point_id, timestamp, raw_lat, raw_lon, f0..f79."""
    frame = pd.DataFrame(
        np.vstack([p.features for p in points]) if points else np.empty((0, FEATURE_DIM)),
        columns=[f"f{i}" for i in range(FEATURE_DIM)],
    )
    frame.insert(0, "raw_lon", [p.raw_lon for p in points])
    frame.insert(0, "raw_lat", [p.raw_lat for p in points])
    frame.insert(0, "timestamp", [p.timestamp for p in points])
    frame.insert(0, "point_id", [p.point_id for p in points])
    frame.to_csv(path, index=False)


def read_encoded_points(path: str) -> List[EncodedPoint]:
    """Reload write_encoded_points output; a garbled file raises DetectionParseError."""
    try:
        return _read_encoded_frame(pd.read_csv(path, float_precision="round_trip"))
    except WildfireError:
        raise
    except (ValueError, TypeError, KeyError) as e:
        raise DetectionParseError(f"unreadable encoded point file {path}: {e}") from e


def _read_encoded_frame(frame: pd.DataFrame) -> List[EncodedPoint]:
    feature_columns = [f"f{i}" for i in range(FEATURE_DIM)]
    missing = [c for c in ["point_id", "timestamp", "raw_lat", "raw_lon"] + feature_columns if c not in frame.columns]
    if missing:
        raise DetectionParseError(f"encoded point file lacks columns: {', '.join(missing[:5])}", line_number=1)

    matrix = frame[feature_columns].to_numpy(dtype=np.float64)
    bad_rows = np.flatnonzero(~np.isfinite(matrix).all(axis=1))
    if bad_rows.size:
        raise DetectionParseError("non-numeric feature value", line_number=int(bad_rows[0]) + 2)

    points = []
    for row, (pid, ts, lat, lon) in enumerate(zip(frame["point_id"], frame["timestamp"], frame["raw_lat"], frame["raw_lon"])):
        features = matrix[row].copy()
        features.setflags(write=False)
        try:
            points.append(EncodedPoint(int(pid), int(ts), float(lat), float(lon), features))
        except (ValueError, TypeError) as e:
            raise DetectionParseError(f"bad point record: {e}", line_number=row + 2) from e
    return points
