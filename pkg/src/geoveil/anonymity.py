"""k-anonymity mode: dummy selection, POI obfuscation and the dual-mode dispatcher.

A genuine report is submitted inside a set of ``k`` reports. Dummies are
chosen one at a time from other users' reports, each time taking the one
that minimizes the exposure of the set built so far. If no other-user
report is left, the user's own past report whose location is the rarest
among their own reports is replayed instead.
"""
from __future__ import annotations

import csv
import enum
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .metrics import EARTH_RADIUS_M, ExposureSummary, distances_from, score_candidates, summarize_coords
from .model import (
    Crs,
    DistanceMode,
    GeoPoint,
    MetricsConfig,
    Report,
    ReportPool,
    ReportSchemaError,
    UsageError,
    coords_of,
    report_to_dict,
)
from .place import Fingerprint, PlaceConfig, PlaceProfile, is_private

log = logging.getLogger(__name__)

# Exposure values closer than this are treated as tied; the lowest pool index wins.
TIE_EPS = 1e-12


@dataclass(frozen=True)
class AnonymityConfig:
    k: int = 10
    metrics: MetricsConfig = MetricsConfig()
    quantize_m: float = 10.0

    def __post_init__(self):
        if not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise UsageError(f"k must be an integer >= 1, got {self.k!r}")
        if not (self.quantize_m > 0 and math.isfinite(self.quantize_m)):
            raise UsageError(f"quantize_m must be positive, got {self.quantize_m}")


@dataclass(frozen=True)
class AnonymitySet:
    """The reports submitted together. ``members[real_index]`` is the genuine one.

    ``sources`` records where each member came from: ``("real", None)``,
    ``("others", pool_index)``, ``("mine", pool_index)`` or ``("history", i)``.
    """

    members: tuple[Report, ...]
    real_index: int = 0
    sources: tuple[tuple[str, int | None], ...] = ()
    requested_k: int = 1

    @property
    def degraded(self) -> bool:
        return len(self.members) < self.requested_k

    @property
    def real(self) -> Report:
        return self.members[self.real_index]

    def __len__(self) -> int:
        return len(self.members)


def argmin_first(values: np.ndarray, eps: float = TIE_EPS) -> int:
    """Index of the smallest value; near-ties go to the lowest index."""
    best = float(np.min(values))
    return int(np.flatnonzero(values <= best + eps)[0])


def location_cell(p: GeoPoint, quantize_m: float) -> tuple[int, int]:
    """Grid cell used to decide whether two reports share a location."""
    if p.crs is Crs.PLANAR:
        return math.floor(p.x / quantize_m), math.floor(p.y / quantize_m)
    m_per_deg = math.pi * EARTH_RADIUS_M / 180.0
    north = p.lat * m_per_deg
    east = p.lon * m_per_deg * math.cos(math.radians(p.lat))
    return math.floor(east / quantize_m), math.floor(north / quantize_m)


def build_anonymity_set(
    real: Report,
    pool: ReportPool,
    cfg: AnonymityConfig,
    history: Sequence[Report] = (),
) -> AnonymitySet:
    """Grow ``{real}`` to ``k`` reports by greedy exposure minimization.

    ``history`` holds reports the user already submitted that may be missing
    from the pool snapshot; together with the pool's own reports they make up
    the fallback set used once other users' reports run out.
    """
    mcfg = cfg.metrics
    if pool.crs is not None and pool.crs is not real.location.crs:
        raise UsageError("real report and pool use different coordinate systems")
    if real.location.crs is not mcfg.distance_mode.crs:
        raise UsageError(f"{mcfg.distance_mode.value} distance needs {mcfg.distance_mode.crs.value} reports")

    members = [real]
    sources: list[tuple[str, int | None]] = [("real", None)]
    if cfg.k == 1:
        return AnonymitySet(tuple(members), 0, tuple(sources), 1)

    others = np.asarray(pool.others, dtype=int)
    available = np.ones(len(others), dtype=bool)
    other_xy = pool.coords[others] if len(others) else np.empty((0, 2))

    xy = coords_of([real])
    summary = summarize_coords(xy, mcfg)
    own: list[tuple[str, int, Report]] | None = None
    used_own: set[int] = set()

    while len(members) < cfg.k:
        if available.any():
            idx = np.flatnonzero(available)
            sc = score_candidates(summary, xy, other_xy[idx], mcfg)
            j = argmin_first(sc.exposure)
            pick = int(idx[j])
            available[pick] = False
            pool_index = int(others[pick])
            members.append(pool[pool_index])
            sources.append(("others", pool_index))
            summary = _summary_from_scores(summary, sc, j, mcfg)
            xy = np.vstack([xy, other_xy[pick]])
            continue

        if own is None:
            own = _own_reports(pool, history)
        j = _rarest_own(own, used_own, cfg.quantize_m)
        if j is None:
            break
        used_own.add(j)
        kind, ref, report = own[j]
        members.append(report)
        sources.append((kind, ref))
        loc = np.array([[report.location.x, report.location.y]])
        sc = score_candidates(summary, xy, loc, mcfg)
        summary = _summary_from_scores(summary, sc, 0, mcfg)
        xy = np.vstack([xy, loc])

    aset = AnonymitySet(tuple(members), 0, tuple(sources), cfg.k)
    if aset.degraded:
        log.warning("only %d of k=%d reports available; anonymity set is degraded", len(aset), cfg.k)
    return aset


def _summary_from_scores(prev, sc, j, mcfg):
    return ExposureSummary(
        prev.n + 1,
        float(sc.coverage[j]),
        float(sc.uniformity[j]),
        float(sc.exposure[j]),
        float(sc.sum_dist[j]),
        float(sc.sum_dist_sq[j]),
        GeoPoint(float(sc.centroids[j, 0]), float(sc.centroids[j, 1]), mcfg.distance_mode.crs),
    )


def _own_reports(pool: ReportPool, history: Sequence[Report]) -> list[tuple[str, int, Report]]:
    own: list[tuple[str, int, Report]] = [("mine", i, pool[i]) for i in pool.mine]
    seen = {r for _, _, r in own}
    for i, r in enumerate(history):
        if r not in seen:
            seen.add(r)
            own.append(("history", i, r))
    return own


def _rarest_own(own, used: set[int], quantize_m: float) -> int | None:
    counts = Counter(location_cell(r.location, quantize_m) for _, _, r in own)
    best = None
    best_count = None
    for j, (_, _, r) in enumerate(own):
        if j in used:
            continue
        c = counts[location_cell(r.location, quantize_m)]
        if best_count is None or c < best_count:
            best, best_count = j, c
    return best


# ---------------------------------------------------------------------------
# obfuscation


@dataclass(frozen=True)
class PoiIndex:
    pois: tuple[tuple[str, GeoPoint], ...] = ()

    def __post_init__(self):
        pois = tuple(self.pois)
        object.__setattr__(self, "pois", pois)
        if len({p.crs for _, p in pois}) > 1:
            raise UsageError("POI index mixes planar and geographic coordinates")

    def __len__(self) -> int:
        return len(self.pois)

    def nearest(self, p: GeoPoint) -> int:
        if not self.pois:
            raise UsageError("POI index is empty")
        if self.pois[0][1].crs is not p.crs:
            raise UsageError("POI index and report use different coordinate systems")
        xy = np.array([[q.x, q.y] for _, q in self.pois])
        d = distances_from(np.array([p.x, p.y]), xy, DistanceMode.for_crs(p.crs))
        return int(np.argmin(d))


def load_poi(path: str | Path) -> PoiIndex:
    """Read a POI CSV with header ``name,lat,lon`` or ``name,x,y``."""
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        cols = set(reader.fieldnames or ())
        if {"name", "lat", "lon"} <= cols:
            geo = True
        elif {"name", "x", "y"} <= cols:
            geo = False
        else:
            raise ReportSchemaError("POI CSV header must be name,lat,lon or name,x,y", path=str(path))
        pois = []
        for lineno, row in enumerate(reader, start=2):
            try:
                if geo:
                    loc = GeoPoint.latlon(float(row["lat"]), float(row["lon"]))
                else:
                    loc = GeoPoint(float(row["x"]), float(row["y"]), Crs.PLANAR)
            except (TypeError, ValueError) as e:
                raise ReportSchemaError(str(e), lineno, str(path)) from None
            pois.append((row["name"], loc))
    return PoiIndex(tuple(pois))


def obfuscate(real: Report, poi: PoiIndex, allow_raw: bool = False) -> Report:
    """Snap the report's location to the nearest POI.

    An empty index is an error unless ``allow_raw`` is set, in which case the
    report is returned untouched.
    """
    if len(poi) == 0:
        if allow_raw:
            return real
        raise UsageError("no POIs available to obfuscate the location; pass allow_raw to submit it unmodified")
    return real.moved_to(poi.pois[poi.nearest(real.location)][1])


# ---------------------------------------------------------------------------
# dual-mode dispatch


class Kind(enum.Enum):
    QUERY = "query"
    CROWDSENSED = "report"


class Action(enum.Enum):
    SUPPRESSED = "suppressed"
    SUBMIT = "submit"


@dataclass(frozen=True)
class Decision:
    action: Action
    anonymity_set: AnonymitySet | None = None

    @property
    def submitted(self) -> tuple[Report, ...]:
        return self.anonymity_set.members if self.anonymity_set else ()


def process_outgoing(
    kind: Kind,
    real: Report,
    scan: Fingerprint,
    profile: PlaceProfile,
    pool: ReportPool,
    poi: PoiIndex,
    place_cfg: PlaceConfig,
    anon_cfg: AnonymityConfig,
    allow_raw: bool = False,
    history: Sequence[Report] = (),
) -> Decision:
    """Suppress crowdsensed reports sensed at private places; cloak everything else.

    Queries never enter place detection.
    """
    if kind is Kind.CROWDSENSED and is_private(profile, scan, place_cfg):
        return Decision(Action.SUPPRESSED)
    cloaked = obfuscate(real, poi, allow_raw=allow_raw)
    return Decision(Action.SUBMIT, build_anonymity_set(cloaked, pool, anon_cfg, history=history))


def decision_record(decision: Decision) -> dict:
    if decision.action is Action.SUPPRESSED:
        return {"decision": decision.action.value, "members": [], "real_index": None}
    aset = decision.anonymity_set
    return {
        "decision": decision.action.value,
        "members": [report_to_dict(r) for r in aset.members],
        "real_index": aset.real_index,
    }


def write_transcript(decisions: Iterable[Decision], path: str | Path) -> None:
    """Write one ``{decision, members, real_index}`` JSON object per decision."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for d in decisions:
            fh.write(json.dumps(decision_record(d)) + "\n")
