"""Report data types and the JSON Lines dataset format.

A report file holds one JSON object per line::

    {"ap_id": "00:11:22:33:44:55", "lat": 1.3, "lon": 103.8, "accuracy_m": 12.0,
     "signal_dbm": -61.0, "link_quality_mbps": 54.0, "ambient_aps": ["aa", "bb"],
     "timestamp": 1419000000.0, "owner": "mine"}

Planar files use ``x``/``y`` (meters) instead of ``lat``/``lon``. A pool is
homogeneous in its coordinate system.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class GeoveilError(Exception):
    """Base class for library errors."""


class UsageError(GeoveilError, ValueError):
    """An operation was called with inputs outside its contract."""


class ReportParseError(GeoveilError):
    """A dataset line could not be decoded."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class ReportSchemaError(ReportParseError):
    """A dataset line decoded but is missing or misuses a field."""


class Crs(enum.Enum):
    PLANAR = "planar"
    GEOGRAPHIC = "geographic"


class DistanceMode(enum.Enum):
    EUCLIDEAN = "euclidean"
    HAVERSINE = "haversine"

    @classmethod
    def for_crs(cls, crs: Crs) -> DistanceMode:
        return cls.EUCLIDEAN if crs is Crs.PLANAR else cls.HAVERSINE

    @property
    def crs(self) -> Crs:
        return Crs.PLANAR if self is DistanceMode.EUCLIDEAN else Crs.GEOGRAPHIC


class Owner(enum.Enum):
    MINE = "mine"
    OTHER = "other"


@dataclass(frozen=True)
class GeoPoint:
    """A location. ``x``/``y`` are meters (planar) or lon/lat degrees (geographic)."""

    x: float
    y: float
    crs: Crs = Crs.PLANAR

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise UsageError(f"non-finite coordinate ({self.x}, {self.y})")
        if self.crs is Crs.GEOGRAPHIC:
            if not -90.0 <= self.y <= 90.0:
                raise UsageError(f"latitude {self.y} outside [-90, 90]")
            if not -180.0 <= self.x <= 180.0:
                raise UsageError(f"longitude {self.x} outside [-180, 180]")

    @classmethod
    def latlon(cls, lat: float, lon: float) -> GeoPoint:
        return cls(float(lon), float(lat), Crs.GEOGRAPHIC)

    @property
    def lat(self) -> float:
        return self.y

    @property
    def lon(self) -> float:
        return self.x


@dataclass(frozen=True)
class Report:
    """One location-tagged WiFi quality observation."""

    ap_id: str
    location: GeoPoint
    accuracy_m: float = 0.0
    signal_dbm: float = 0.0
    link_quality_mbps: float = 0.0
    ambient_aps: frozenset[str] = frozenset()
    timestamp: float = 0.0
    owner: Owner = Owner.OTHER

    def __post_init__(self):
        if not isinstance(self.ambient_aps, frozenset):
            object.__setattr__(self, "ambient_aps", frozenset(self.ambient_aps))
        if self.accuracy_m < 0:
            raise UsageError(f"accuracy_m must be >= 0, got {self.accuracy_m}")
        if self.link_quality_mbps < 0:
            raise UsageError(f"link_quality_mbps must be >= 0, got {self.link_quality_mbps}")

    def moved_to(self, location: GeoPoint) -> Report:
        return replace(self, location=location)

    def owned_by(self, owner: Owner) -> Report:
        return replace(self, owner=owner)


@dataclass(frozen=True)
class ReportPool:
    """The crowdsourced dataset, partitioned into the user's own reports and everyone else's.

    The partition is derived from ``owner`` alone; nothing links "other" reports
    to particular users.
    """

    reports: tuple[Report, ...] = ()
    mine: tuple[int, ...] = field(init=False)
    others: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        reports = tuple(self.reports)
        object.__setattr__(self, "reports", reports)
        crs = {r.location.crs for r in reports}
        if len(crs) > 1:
            raise UsageError("report pool mixes planar and geographic coordinates")
        object.__setattr__(self, "mine", tuple(i for i, r in enumerate(reports) if r.owner is Owner.MINE))
        object.__setattr__(self, "others", tuple(i for i, r in enumerate(reports) if r.owner is Owner.OTHER))

    def __len__(self) -> int:
        return len(self.reports)

    def __iter__(self):
        return iter(self.reports)

    def __getitem__(self, i: int) -> Report:
        return self.reports[i]

    @property
    def crs(self) -> Crs | None:
        return self.reports[0].location.crs if self.reports else None

    @cached_property
    def coords(self) -> np.ndarray:
        """(n, 2) array of ``x``/``y`` for every report, read-only."""
        arr = coords_of(self.reports)
        arr.flags.writeable = False
        return arr


def coords_of(reports: Iterable[Report]) -> np.ndarray:
    pts = [(r.location.x, r.location.y) for r in reports]
    return np.array(pts, dtype=float).reshape(-1, 2)


# ---------------------------------------------------------------------------
# JSON Lines I/O

_REQUIRED = ("ap_id", "timestamp")


def report_to_dict(r: Report) -> dict:
    d: dict = {"ap_id": r.ap_id}
    if r.location.crs is Crs.GEOGRAPHIC:
        d["lat"] = r.location.lat
        d["lon"] = r.location.lon
    else:
        d["x"] = r.location.x
        d["y"] = r.location.y
    d.update(
        accuracy_m=r.accuracy_m,
        signal_dbm=r.signal_dbm,
        link_quality_mbps=r.link_quality_mbps,
        ambient_aps=sorted(r.ambient_aps),
        timestamp=r.timestamp,
        owner=r.owner.value,
    )
    return d


def report_from_dict(d: dict) -> Report:
    """Build a report from a decoded record. Unknown keys are ignored."""
    if not isinstance(d, dict):
        raise ReportSchemaError("record is not a JSON object")
    for key in _REQUIRED:
        if key not in d:
            raise ReportSchemaError(f"missing required field {key!r}")
    has_geo = "lat" in d or "lon" in d
    has_planar = "x" in d or "y" in d
    if has_geo and has_planar:
        raise ReportSchemaError("record has both lat/lon and x/y")
    try:
        if has_geo:
            location = GeoPoint.latlon(float(d["lat"]), float(d["lon"]))
        elif has_planar:
            location = GeoPoint(float(d["x"]), float(d["y"]), Crs.PLANAR)
        else:
            raise ReportSchemaError("missing required field 'location' (lat/lon or x/y)")
        aps = d.get("ambient_aps", [])
        if not isinstance(aps, list) or not all(isinstance(a, str) for a in aps):
            raise ReportSchemaError("ambient_aps must be an array of strings")
        return Report(
            ap_id=str(d["ap_id"]),
            location=location,
            accuracy_m=float(d.get("accuracy_m", 0.0)),
            signal_dbm=float(d.get("signal_dbm", 0.0)),
            link_quality_mbps=float(d.get("link_quality_mbps", 0.0)),
            ambient_aps=frozenset(aps),
            timestamp=float(d["timestamp"]),
            owner=Owner(d.get("owner", "other")),
        )
    except KeyError as e:
        raise ReportSchemaError(f"missing required field {e.args[0]!r}") from None
    except ReportSchemaError:
        raise
    except (TypeError, ValueError) as e:
        raise ReportSchemaError(str(e)) from None


def load_reports(path: str | Path) -> ReportPool:
    """Read a JSON Lines report file, preserving line order. Blank lines are skipped."""
    path = Path(path)
    reports: list[Report] = []
    crs = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ReportParseError(f"malformed JSON ({e.msg})", lineno, str(path)) from None
            try:
                report = report_from_dict(record)
            except ReportSchemaError as e:
                raise ReportSchemaError(str(e), lineno, str(path)) from None
            except UsageError as e:
                raise ReportSchemaError(str(e), lineno, str(path)) from None
            if crs is None:
                crs = report.location.crs
            elif report.location.crs is not crs:
                raise ReportSchemaError("mixed coordinate systems in one file", lineno, str(path))
            reports.append(report)
    return ReportPool(tuple(reports))


def save_reports(pool: ReportPool | Sequence[Report], path: str | Path) -> None:
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8") as fh:
            for r in pool:
                fh.write(json.dumps(report_to_dict(r)) + "\n")
    except OSError as e:
        raise OSError(f"cannot write reports to {path}: {e.strerror or e}") from e


@dataclass(frozen=True)
class MetricsConfig:
    """Normalizing diameter for coverage and the pairwise distance used everywhere."""

    d_max: float = 500.0
    distance_mode: DistanceMode = DistanceMode.EUCLIDEAN

    def __post_init__(self):
        if not (self.d_max > 0 and math.isfinite(self.d_max)):
            raise UsageError(f"d_max must be positive, got {self.d_max}")
