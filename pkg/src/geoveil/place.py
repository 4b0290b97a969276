"""Private-place learning and detection from ambient WiFi fingerprints.

A candidate fingerprint starts from the first scan seen at an unknown place
and shrinks by intersection while later scans keep matching it. Once the
matched span exceeds ``delta_l_seconds`` the candidate becomes a learned
private place. A scan matching any learned place means the user is at a
private place and the crowdsensed report must not leave the device.

Similarity is always normalized by the stored fingerprint's size, in
learning and in detection alike.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator

from .model import ReportParseError, ReportSchemaError, UsageError


class Verdict(enum.Enum):
    IN_PRIVATE_PLACE = "in_private_place"
    NOT_PRIVATE = "not_private"


@dataclass(frozen=True)
class Fingerprint:
    """The set of BSSIDs visible in one scan."""

    bssids: frozenset[str]
    timestamp: float = 0.0

    def __post_init__(self):
        if not isinstance(self.bssids, frozenset):
            object.__setattr__(self, "bssids", frozenset(self.bssids))


@dataclass(frozen=True)
class PlaceConfig:
    delta: float = 0.2
    delta_l_seconds: float = 3600.0

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise UsageError(f"delta must lie in [0, 1], got {self.delta}")
        if not (self.delta_l_seconds > 0 and math.isfinite(self.delta_l_seconds)):
            raise UsageError(f"delta_l_seconds must be positive, got {self.delta_l_seconds}")


@dataclass(frozen=True)
class PlaceProfile:
    """Learned private places plus the single in-progress candidate, if any."""

    places: tuple[frozenset[str], ...] = ()
    candidate: frozenset[str] | None = None
    candidate_start: float | None = None
    last_timestamp: float | None = field(default=None, compare=False)

    def __post_init__(self):
        places = tuple(frozenset(p) for p in self.places)
        if any(not p for p in places):
            raise UsageError("learned places must be non-empty")
        object.__setattr__(self, "places", places)
        if self.candidate is not None:
            if not self.candidate:
                raise UsageError("candidate fingerprint must be non-empty")
            object.__setattr__(self, "candidate", frozenset(self.candidate))
            if self.candidate_start is None:
                raise UsageError("candidate needs a start timestamp")


def similarity(profile_fp: Iterable[str], scan: Iterable[str]) -> float:
    """Fraction of the stored fingerprint's BSSIDs that are visible in ``scan``."""
    profile_fp = frozenset(profile_fp)
    if not profile_fp:
        raise UsageError("similarity is undefined for an empty fingerprint")
    return len(profile_fp & frozenset(scan)) / len(profile_fp)


def is_private(profile: PlaceProfile, scan: Fingerprint, cfg: PlaceConfig) -> bool:
    return any(similarity(p, scan.bssids) >= cfg.delta for p in profile.places)


def observe_scan(profile: PlaceProfile, scan: Fingerprint, cfg: PlaceConfig) -> tuple[PlaceProfile, Verdict]:
    """Advance the learning state machine by one scan and classify it."""
    if not scan.bssids:
        raise UsageError("scans used for place learning must see at least one BSSID")
    if profile.last_timestamp is not None and scan.timestamp < profile.last_timestamp:
        raise UsageError(f"scan at t={scan.timestamp} arrived after t={profile.last_timestamp}")
    profile = replace(profile, last_timestamp=scan.timestamp)

    if is_private(profile, scan, cfg):
        return profile, Verdict.IN_PRIVATE_PLACE

    if profile.candidate is None:
        return _restart(profile, scan), Verdict.NOT_PRIVATE

    if similarity(profile.candidate, scan.bssids) >= cfg.delta:
        narrowed = profile.candidate & scan.bssids
        if not narrowed:
            # reachable only with delta == 0
            return _restart(profile, scan), Verdict.NOT_PRIVATE
        if scan.timestamp - profile.candidate_start > cfg.delta_l_seconds:
            return (
                replace(profile, places=profile.places + (narrowed,), candidate=None, candidate_start=None),
                Verdict.NOT_PRIVATE,
            )
        return replace(profile, candidate=narrowed), Verdict.NOT_PRIVATE

    return _restart(profile, scan), Verdict.NOT_PRIVATE


def _restart(profile: PlaceProfile, scan: Fingerprint) -> PlaceProfile:
    return replace(profile, candidate=scan.bssids, candidate_start=scan.timestamp)


@dataclass(frozen=True)
class ReplaySummary:
    profile: PlaceProfile
    scans: int
    suppressed: int

    @property
    def places_learned(self) -> int:
        return len(self.profile.places)


def replay(scans: Iterable[Fingerprint], cfg: PlaceConfig, profile: PlaceProfile | None = None) -> ReplaySummary:
    profile = profile or PlaceProfile()
    count = suppressed = 0
    for scan in scans:
        profile, verdict = observe_scan(profile, scan, cfg)
        count += 1
        suppressed += verdict is Verdict.IN_PRIVATE_PLACE
    return ReplaySummary(profile, count, suppressed)


# ---------------------------------------------------------------------------
# files


def iter_scans(path: str | Path) -> Iterator[Fingerprint]:
    """Read a JSONL trace of ``{"timestamp": ..., "bssids": [...]}`` records."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ReportParseError(f"malformed JSON ({e.msg})", lineno, str(path)) from None
            if not isinstance(rec, dict) or "timestamp" not in rec or "bssids" not in rec:
                raise ReportSchemaError("scan record needs 'timestamp' and 'bssids'", lineno, str(path))
            bssids = rec["bssids"]
            if not isinstance(bssids, list):
                raise ReportSchemaError("'bssids' must be an array", lineno, str(path))
            yield Fingerprint(frozenset(map(str, bssids)), float(rec["timestamp"]))


def save_scans(scans: Iterable[Fingerprint], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for s in scans:
            fh.write(json.dumps({"timestamp": s.timestamp, "bssids": sorted(s.bssids)}) + "\n")


def save_profile(profile: PlaceProfile, path: str | Path) -> None:
    """Write learned places as ``{"places": [[bssid, ...], ...]}``."""
    data = {"places": [sorted(p) for p in profile.places]}
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def load_profile(path: str | Path) -> PlaceProfile:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ReportParseError(f"malformed profile JSON ({e.msg})", path=str(path)) from None
    places = data.get("places") if isinstance(data, dict) else None
    if not isinstance(places, list) or not all(isinstance(p, list) for p in places):
        raise ReportSchemaError("profile needs 'places': list of BSSID lists", path=str(path))
    try:
        return PlaceProfile(places=tuple(frozenset(map(str, p)) for p in places))
    except UsageError as e:
        raise ReportSchemaError(str(e), path=str(path)) from None
