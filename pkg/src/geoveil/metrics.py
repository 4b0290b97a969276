"""Activity coverage, activity uniformity and privacy exposure of a report set.

Coverage is the diameter of an enclosing disc normalized by ``d_max``. The
disc is approximated from the centroid: ``D = min(d_max, 2 * max_j d(c, l_j))``.
Uniformity is Jain's fairness index over the distances of all unordered
report pairs. Exposure is ``1 - coverage * uniformity``; lower is better.

In geographic mode pair distances are haversine distances and the centroid
is the arithmetic mean of longitude/latitude, which is adequate at city
scale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Crs, DistanceMode, GeoPoint, MetricsConfig, Report, UsageError, coords_of

EARTH_RADIUS_M = 6_371_000.0


@dataclass(frozen=True)
class ExposureSummary:
    n: int
    coverage: float
    uniformity: float
    exposure: float
    sum_dist: float
    sum_dist_sq: float
    centroid: GeoPoint

    @property
    def pair_count(self) -> int:
        return self.n * (self.n - 1) // 2


# ---------------------------------------------------------------------------
# distances


def distance(a: GeoPoint, b: GeoPoint, mode: DistanceMode = DistanceMode.EUCLIDEAN) -> float:
    """Distance in meters between two points of the coordinate system ``mode`` expects."""
    if a.crs is not b.crs:
        raise UsageError(f"cannot measure between {a.crs.value} and {b.crs.value} points")
    if a.crs is not mode.crs:
        raise UsageError(f"{mode.value} distance needs {mode.crs.value} points, got {a.crs.value}")
    if mode is DistanceMode.EUCLIDEAN:
        return math.hypot(a.x - b.x, a.y - b.y)
    return float(_haversine(a.x, a.y, np.array([b.x]), np.array([b.y]))[0])


def _haversine(lon0, lat0, lon, lat):
    phi0 = np.radians(lat0)
    phi = np.radians(lat)
    dphi = phi - phi0
    dlmb = np.radians(lon) - np.radians(lon0)
    h = np.sin(dphi / 2) ** 2 + np.cos(phi0) * np.cos(phi) * np.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def distances_from(p: np.ndarray, xy: np.ndarray, mode: DistanceMode) -> np.ndarray:
    """Distances from one coordinate pair ``p`` to each row of ``xy``."""
    if mode is DistanceMode.EUCLIDEAN:
        return np.hypot(xy[:, 0] - p[0], xy[:, 1] - p[1])
    return _haversine(p[0], p[1], xy[:, 0], xy[:, 1])


def cross_distances(a: np.ndarray, b: np.ndarray, mode: DistanceMode) -> np.ndarray:
    """(len(a), len(b)) matrix of distances between rows of ``a`` and rows of ``b``."""
    if mode is DistanceMode.EUCLIDEAN:
        return np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
    return _haversine(a[:, None, 0], a[:, None, 1], b[None, :, 0], b[None, :, 1])


# ---------------------------------------------------------------------------
# closed forms shared by the batch and incremental paths


def jain_uniformity(sum_dist, sum_dist_sq, n_pairs):
    """Jain's index from pair-distance sums. Defined as 1 when there are no pairs or all are zero."""
    sum_dist = np.asarray(sum_dist, dtype=float)
    sum_dist_sq = np.asarray(sum_dist_sq, dtype=float)
    denom = n_pairs * sum_dist_sq
    ok = denom > 0
    u = np.where(ok, sum_dist**2 / np.where(ok, denom, 1.0), 1.0)
    u = np.minimum(u, 1.0)
    return float(u) if u.ndim == 0 else u


def coverage_from_radius(max_radius, d_max: float):
    return np.minimum(d_max, 2.0 * np.asarray(max_radius, dtype=float)) / d_max


# ---------------------------------------------------------------------------
# batch evaluation


def _check(reports: Sequence[Report], mode: DistanceMode) -> np.ndarray:
    if len(reports) == 0:
        raise UsageError("metrics undefined for empty report set")
    crs = {r.location.crs for r in reports}
    if len(crs) > 1:
        raise UsageError("reports mix planar and geographic coordinates")
    if crs.pop() is not mode.crs:
        raise UsageError(f"{mode.value} distance needs {mode.crs.value} reports")
    return coords_of(reports)


def pair_row_sums(xy: np.ndarray, mode: DistanceMode) -> tuple[np.ndarray, np.ndarray]:
    """For each j, the sum of d(l_i, l_j) and d^2(l_i, l_j) over i < j.

    Cumulative sums of the result give pair sums for every prefix of ``xy``.
    """
    n = len(xy)
    rows = np.zeros(n)
    rows_sq = np.zeros(n)
    for j in range(1, n):
        d = distances_from(xy[j], xy[:j], mode)
        rows[j] = d.sum()
        rows_sq[j] = d @ d
    return rows, rows_sq


def _max_radius(xy: np.ndarray, centroid: np.ndarray, mode: DistanceMode) -> float:
    return float(distances_from(centroid, xy, mode).max())


def coverage(reports: Sequence[Report], cfg: MetricsConfig) -> float:
    xy = _check(reports, cfg.distance_mode)
    c = xy.mean(axis=0)
    return float(coverage_from_radius(_max_radius(xy, c, cfg.distance_mode), cfg.d_max))


def uniformity(reports: Sequence[Report], mode: DistanceMode = DistanceMode.EUCLIDEAN) -> float:
    xy = _check(reports, mode)
    rows, rows_sq = pair_row_sums(xy, mode)
    n = len(xy)
    return jain_uniformity(rows.sum(), rows_sq.sum(), n * (n - 1) // 2)


def exposure(reports: Sequence[Report], cfg: MetricsConfig) -> ExposureSummary:
    """Full recomputation of every metric for ``reports``."""
    xy = _check(reports, cfg.distance_mode)
    return summarize_coords(xy, cfg)


def summarize_coords(xy: np.ndarray, cfg: MetricsConfig) -> ExposureSummary:
    if len(xy) == 0:
        raise UsageError("metrics undefined for empty report set")
    mode = cfg.distance_mode
    n = len(xy)
    rows, rows_sq = pair_row_sums(xy, mode)
    sd, sq = float(rows.sum()), float(rows_sq.sum())
    c = xy.mean(axis=0)
    lam = float(coverage_from_radius(_max_radius(xy, c, mode), cfg.d_max))
    u = jain_uniformity(sd, sq, n * (n - 1) // 2)
    return ExposureSummary(n, lam, u, 1.0 - lam * u, sd, sq, GeoPoint(float(c[0]), float(c[1]), mode.crs))


# ---------------------------------------------------------------------------
# incremental evaluation


@dataclass(frozen=True)
class CandidateScores:
    """Metrics of ``current + [candidate]`` for each candidate, as arrays."""

    coverage: np.ndarray
    uniformity: np.ndarray
    exposure: np.ndarray
    sum_dist: np.ndarray
    sum_dist_sq: np.ndarray
    centroids: np.ndarray


def score_candidates(
    s: ExposureSummary | None, xy: np.ndarray, candidates: np.ndarray, cfg: MetricsConfig
) -> CandidateScores:
    """Evaluate adding each row of ``candidates`` to the set ``xy`` summarized by ``s``.

    Costs O(len(candidates) * len(xy)). ``s`` may be None only when ``xy`` is empty.
    """
    mode = cfg.distance_mode
    n = len(xy)
    m = len(candidates)
    if n == 0:
        zeros = np.zeros(m)
        return CandidateScores(zeros, np.ones(m), np.ones(m), zeros, zeros.copy(), candidates.copy())
    d = cross_distances(candidates, xy, mode)
    sd = s.sum_dist + d.sum(axis=1)
    sq = s.sum_dist_sq + np.einsum("ij,ij->i", d, d)
    total = np.array([s.centroid.x, s.centroid.y]) * n
    cents = (total[None, :] + candidates) / (n + 1)
    radius = cross_distances(cents, xy, mode).max(axis=1)
    if mode is DistanceMode.EUCLIDEAN:
        own = np.hypot(*(candidates - cents).T)
    else:
        own = _haversine(cents[:, 0], cents[:, 1], candidates[:, 0], candidates[:, 1])
    radius = np.maximum(radius, own)
    lam = coverage_from_radius(radius, cfg.d_max)
    u = np.atleast_1d(jain_uniformity(sd, sq, (n + 1) * n // 2))
    return CandidateScores(lam, u, 1.0 - lam * u, sd, sq, cents)


def extend_summary(
    s: ExposureSummary, reports: Sequence[Report], new: Report, cfg: MetricsConfig
) -> ExposureSummary:
    """Summary of ``reports + [new]`` given the summary ``s`` of ``reports``, in O(len(reports))."""
    if s.n != len(reports):
        raise UsageError(f"summary covers {s.n} reports but {len(reports)} were given")
    if new.location.crs is not cfg.distance_mode.crs:
        raise UsageError(f"{cfg.distance_mode.value} distance needs {cfg.distance_mode.crs.value} reports")
    xy = coords_of(reports)
    cand = np.array([[new.location.x, new.location.y]])
    sc = score_candidates(s, xy, cand, cfg)
    return ExposureSummary(
        s.n + 1,
        float(sc.coverage[0]),
        float(sc.uniformity[0]),
        float(sc.exposure[0]),
        float(sc.sum_dist[0]),
        float(sc.sum_dist_sq[0]),
        GeoPoint(float(sc.centroids[0, 0]), float(sc.centroids[0, 1]), cfg.distance_mode.crs),
    )


def singleton_summary(report: Report, cfg: MetricsConfig) -> ExposureSummary:
    return exposure([report], cfg)


class ExposureAccumulator:
    """Running metrics over a growing point set, for scoring long submission histories.

    Adding a block of ``b`` points to ``n`` accumulated ones costs O(b * (n + b)).
    """

    def __init__(self, cfg: MetricsConfig):
        self.cfg = cfg
        self._xy = np.empty((0, 2))
        self._sum_dist = 0.0
        self._sum_dist_sq = 0.0

    def __len__(self) -> int:
        return len(self._xy)

    def add(self, xy: np.ndarray) -> None:
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        if len(xy) == 0:
            return
        mode = self.cfg.distance_mode
        if len(self._xy):
            d = cross_distances(xy, self._xy, mode)
            self._sum_dist += float(d.sum())
            self._sum_dist_sq += float(np.einsum("ij,ij->", d, d))
        rows, rows_sq = pair_row_sums(xy, mode)
        self._sum_dist += float(rows.sum())
        self._sum_dist_sq += float(rows_sq.sum())
        self._xy = np.vstack([self._xy, xy])

    def summary(self) -> ExposureSummary:
        n = len(self._xy)
        if n == 0:
            raise UsageError("metrics undefined for empty report set")
        mode = self.cfg.distance_mode
        c = self._xy.mean(axis=0)
        lam = float(coverage_from_radius(_max_radius(self._xy, c, mode), self.cfg.d_max))
        u = jain_uniformity(self._sum_dist, self._sum_dist_sq, n * (n - 1) // 2)
        return ExposureSummary(
            n, lam, u, 1.0 - lam * u, self._sum_dist, self._sum_dist_sq, GeoPoint(float(c[0]), float(c[1]), mode.crs)
        )
