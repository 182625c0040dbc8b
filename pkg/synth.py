"""
Synthetic detection files for exercising the pipeline without real satellite data.

Each fire is a seeded random walk: it starts in its own 0.25 degree grid cell
(so fires are tens of kilometres apart), moves one step per detection towards
the centre bearing of a compass sector, and keeps the previous sector with
probability p_stay.
"""
import datetime
import logging
import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
import pandas as pd

from errors import SynthError
from firegraph import EARTH_RADIUS_M, haversine_m
from ingest import BoundingBox

logger = logging.getLogger(__name__)

GRID_DEG = 0.25
JITTER_DEG = 0.02
COORD_DECIMALS = 7
MAX_REDRAWS = 100


@dataclass(frozen=True)
class SynthSpec:
    n_fires: int = 100
    length_min: int = 1
    length_max: int = 6
    step_min_m: float = 100.0
    step_max_m: float = 300.0
    p_stay: float = 0.5
    cadence_min_s: int = 1800
    cadence_max_s: int = 10800
    box: BoundingBox = field(default_factory=lambda: BoundingBox(-34.0, -23.0, 17.0, 32.0))
    start_date: datetime.date = datetime.date(2013, 1, 1)
    days: int = 365
    frp_min: float = 1.0
    frp_max: float = 100.0
    s_r: float = 375.0
    t_r: float = 21600.0
    seed: int = 0

    def __post_init__(self):
        if self.n_fires < 1:
            raise SynthError("n_fires must be >= 1")
        if not 1 <= self.length_min <= self.length_max:
            raise SynthError("need 1 <= length_min <= length_max")
        if not 0 < self.step_min_m <= self.step_max_m:
            raise SynthError("need 0 < step_min_m <= step_max_m")
        if self.step_max_m > self.s_r:
            raise SynthError(f"step distance {self.step_max_m} m exceeds the spatial radius {self.s_r} m")
        if not 60 <= self.cadence_min_s <= self.cadence_max_s:
            raise SynthError("need 60 <= cadence_min_s <= cadence_max_s")
        if self.cadence_max_s > self.t_r:
            raise SynthError(f"cadence {self.cadence_max_s} s exceeds the temporal radius {self.t_r} s")
        if not 0.0 <= self.p_stay <= 1.0:
            raise SynthError("p_stay must lie in [0, 1]")
        if not 0 < self.frp_min <= self.frp_max:
            raise SynthError("need 0 < frp_min <= frp_max")
        if self.days < 1:
            raise SynthError("days must be >= 1")
        if self.length_max > 9:
            logger.warning("fires longer than 9 points may not be recovered exactly with K=8")


@dataclass
class SynthFire:
    """A generated fire: detections in time order and the direction code of every step."""

    latitudes: List[float]
    longitudes: List[float]
    times: List[datetime.datetime]
    frps: List[float]
    elevations: List[float]
    directions: List[int]

    @property
    def length(self) -> int:
        return len(self.latitudes)

    def coordinates(self) -> List[Tuple[float, float]]:
        return list(zip(self.latitudes, self.longitudes))


def destination(lat: float, lon: float, bearing_deg: float, distance_m: float) -> Tuple[float, float]:
    """Point reached from (lat, lon) along a great circle with the given initial bearing."""
    phi1, lam1 = math.radians(lat), math.radians(lon)
    theta = math.radians(bearing_deg)
    delta = distance_m / EARTH_RADIUS_M
    phi2 = math.asin(math.sin(phi1) * math.cos(delta) + math.cos(phi1) * math.sin(delta) * math.cos(theta))
    lam2 = lam1 + math.atan2(
        math.sin(theta) * math.sin(delta) * math.cos(phi1),
        math.cos(delta) - math.sin(phi1) * math.sin(phi2),
    )
    return math.degrees(phi2), (math.degrees(lam2) + 540.0) % 360.0 - 180.0


def _grid_cells(spec: SynthSpec, rng: np.random.Generator) -> List[Tuple[float, float]]:
    box = spec.box
    margin = JITTER_DEG + 0.05
    lats = np.arange(box.lat_min + margin, box.lat_max - margin, GRID_DEG)
    lons = np.arange(box.lon_min + margin, box.lon_max - margin, GRID_DEG)
    if len(lats) * len(lons) < spec.n_fires:
        raise SynthError(f"box holds only {len(lats) * len(lons)} fire cells, {spec.n_fires} requested")
    chosen = rng.choice(len(lats) * len(lons), size=spec.n_fires, replace=False)
    return [(float(lats[c // len(lons)]), float(lons[c % len(lons)])) for c in chosen]


def _next_direction(previous: int, p_stay: float, rng: np.random.Generator) -> int:
    if previous and rng.random() < p_stay:
        return previous
    others = [code for code in range(1, 9) if code != previous]
    return int(rng.choice(others))


def _step(lat, lon, code, spec, rng) -> Tuple[float, float]:
    for _ in range(MAX_REDRAWS):
        distance = rng.uniform(spec.step_min_m, spec.step_max_m)
        new_lat, new_lon = destination(lat, lon, (code - 1) * 45.0, distance)
        new_lat, new_lon = round(new_lat, COORD_DECIMALS), round(new_lon, COORD_DECIMALS)
        if haversine_m((lat, lon), (new_lat, new_lon)) <= spec.s_r:
            return new_lat, new_lon
    raise SynthError("could not place a step within the spatial radius")


def generate_fires(spec: SynthSpec) -> List[SynthFire]:
    """
    In-memory fire tracks for a spec; deterministic in spec.seed.

    Returns:
        One SynthFire per requested fire, in generation order
    """
    rng = np.random.default_rng(spec.seed)
    start = datetime.datetime.combine(spec.start_date, datetime.time())
    fires = []
    for cell_lat, cell_lon in _grid_cells(spec, rng):
        length = int(rng.integers(spec.length_min, spec.length_max + 1))
        lat = round(cell_lat + rng.uniform(-JITTER_DEG, JITTER_DEG), COORD_DECIMALS)
        lon = round(cell_lon + rng.uniform(-JITTER_DEG, JITTER_DEG), COORD_DECIMALS)
        when = start + datetime.timedelta(minutes=int(rng.integers(0, spec.days * 24 * 60)))

        fire = SynthFire([lat], [lon], [when], [], [], [])
        direction = 0
        for _ in range(length - 1):
            direction = _next_direction(direction, spec.p_stay, rng)
            lat, lon = _step(lat, lon, direction, spec, rng)
            minutes = int(rng.integers(spec.cadence_min_s // 60, spec.cadence_max_s // 60 + 1))
            when = when + datetime.timedelta(minutes=minutes)
            fire.latitudes.append(lat)
            fire.longitudes.append(lon)
            fire.times.append(when)
            fire.directions.append(direction)
        fire.frps.extend(round(float(v), 2) for v in rng.uniform(spec.frp_min, spec.frp_max, size=length))
        fire.elevations.extend(round(float(v), 1) for v in rng.uniform(0.0, 1500.0, size=length))
        fires.append(fire)
    return fires


def fires_to_frame(fires: List[SynthFire]) -> pd.DataFrame:
    """Detection rows (ingest input format) sorted by acquisition time."""
    rows = []
    for fire in fires:
        for lat, lon, when, frp, elevation in zip(fire.latitudes, fire.longitudes, fire.times, fire.frps, fire.elevations):
            rows.append({
                "latitude": f"{lat:.{COORD_DECIMALS}f}",
                "longitude": f"{lon:.{COORD_DECIMALS}f}",
                "acq_date": when.date().isoformat(),
                "acq_time": f"{when.hour:02d}{when.minute:02d}",
                "frp": f"{frp:.2f}",
                "elevation": f"{elevation:.1f}",
                "_when": when,
            })
    frame = pd.DataFrame(rows)
    frame = frame.sort_values(["_when", "latitude", "longitude"], kind="mergesort").drop(columns=["_when"])
    return frame.reset_index(drop=True)


def synth_generate(spec: SynthSpec, path: str) -> List[SynthFire]:
    """Generate fires for spec and write them as a detection CSV; returns the tracks."""
    fires = generate_fires(spec)
    fires_to_frame(fires).to_csv(path, index=False)
    logger.info("Wrote %d synthetic fires (%d detections) to %s", len(fires), sum(f.length for f in fires), path)
    return fires
