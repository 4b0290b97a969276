"""Monte-Carlo campaigns: the activity-pattern metric study and the algorithm comparison.

Run ``r`` of a campaign seeded with ``seed`` draws everything from
``numpy.random.default_rng(seed + r)``. Per-run results are summed in run
order, so sequential and process-parallel execution give identical output.
"""
from __future__ import annotations

import csv
import enum
import functools
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .anonymity import AnonymityConfig, build_anonymity_set
from .metrics import ExposureAccumulator, coverage_from_radius, distances_from, jain_uniformity, pair_row_sums
from .model import MetricsConfig, Owner, Report, ReportPool, UsageError, coords_of
from .patterns import RNG_ALGORITHM, PatternSpec, area_uniform_xy, as_reports, generate_xy

SIM_D_MAX = 500.0


class Algorithm(enum.Enum):
    OURS = "ours"
    RANDOM_K = "random"
    NAIVE = "naive"


@dataclass(frozen=True)
class MetricRow:
    pattern: str
    n: int
    coverage: float
    uniformity: float
    exposure: float


@dataclass(frozen=True)
class TraceStep:
    step: int
    n: float
    coverage: float
    uniformity: float
    exposure: float


@dataclass(frozen=True)
class ScenarioTrace:
    """Per-submission metrics of everything one algorithm sent, averaged over runs."""

    algorithm: Algorithm
    pattern: PatternSpec
    seed: int
    runs: int
    steps: tuple[TraceStep, ...]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.steps])

    @property
    def final(self) -> TraceStep:
        return self.steps[-1]


def _map_runs(fn: Callable[[int], np.ndarray], runs: int, workers: int) -> np.ndarray:
    if workers <= 1 or runs <= 1:
        results: Iterable[np.ndarray] = map(fn, range(runs))
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(fn, range(runs)))
    total = None
    for r in results:
        total = r.copy() if total is None else total + r
    return total


# ---------------------------------------------------------------------------
# metric study


def prefix_metrics(xy: np.ndarray, sizes: Sequence[int], cfg: MetricsConfig) -> np.ndarray:
    """(len(sizes), 3) array of coverage, uniformity, exposure for each prefix ``xy[:n]``."""
    mode = cfg.distance_mode
    rows, rows_sq = pair_row_sums(xy[: max(sizes)], mode)
    cum, cum_sq = np.cumsum(rows), np.cumsum(rows_sq)
    csum = np.cumsum(xy, axis=0)
    out = np.empty((len(sizes), 3))
    for i, n in enumerate(sizes):
        c = csum[n - 1] / n
        lam = float(coverage_from_radius(distances_from(c, xy[:n], mode).max(), cfg.d_max))
        u = jain_uniformity(cum[n - 1], cum_sq[n - 1], n * (n - 1) // 2)
        out[i] = lam, u, 1.0 - lam * u
    return out


def _metric_study_run(run: int, patterns, sizes, seed, d_max) -> np.ndarray:
    rng = np.random.default_rng(seed + run)
    cfg = MetricsConfig(d_max)
    out = np.empty((len(patterns), len(sizes), 3))
    for p, spec in enumerate(patterns):
        xy = generate_xy(spec, max(sizes), rng)
        out[p] = prefix_metrics(xy, sizes, cfg)
    return out


def run_metric_study(
    patterns: Sequence[PatternSpec],
    n_max: int = 1200,
    step: int = 100,
    runs: int = 100,
    seed: int = 0,
    d_max: float = SIM_D_MAX,
    workers: int = 1,
) -> list[MetricRow]:
    """Average coverage, uniformity and exposure of growing point sets per pattern.

    Each run draws ``n_max`` points per pattern and scores the prefixes of
    length ``step, 2*step, ..., n_max``; the field diameter of every pattern
    is overridden by ``d_max``.
    """
    if runs < 1 or step < 1 or n_max < step:
        raise UsageError(f"need runs >= 1 and 1 <= step <= n_max, got runs={runs} step={step} n_max={n_max}")
    sizes = list(range(step, n_max + 1, step))
    specs = tuple(_with_dmax(p, d_max) for p in patterns)
    fn = functools.partial(_metric_study_run, patterns=specs, sizes=sizes, seed=seed, d_max=d_max)
    mean = _map_runs(fn, runs, workers) / runs
    return [
        MetricRow(spec.label, n, *map(float, mean[p, i]))
        for p, spec in enumerate(specs)
        for i, n in enumerate(sizes)
    ]


def _with_dmax(spec: PatternSpec, d_max: float) -> PatternSpec:
    return spec if spec.d_max == d_max else replace(spec, d_max=d_max)


# ---------------------------------------------------------------------------
# anonymity study


def random_anonymity_set(real: Report, pool: ReportPool, k: int, rng: np.random.Generator) -> list[Report]:
    """Baseline: ``k - 1`` dummies drawn uniformly without replacement, others' reports first."""
    need = k - 1
    others = list(pool.others)
    if need <= len(others):
        picks = rng.choice(len(others), size=need, replace=False) if need else []
        return [real] + [pool[others[i]] for i in picks]
    mine = list(pool.mine)
    extra = min(need - len(others), len(mine))
    picks = rng.choice(len(mine), size=extra, replace=False) if extra else []
    return [real] + [pool[i] for i in others] + [pool[mine[i]] for i in picks]


def _anonymity_run(run: int, pattern, omega_size, n_real, k, seed, d_max) -> np.ndarray:
    seq = np.random.SeedSequence(seed + run)
    rng = np.random.default_rng(seq)
    random_rng = np.random.default_rng(seq.spawn(1)[0])
    omega = area_uniform_xy(omega_size, d_max, rng)
    real_xy = generate_xy(pattern, n_real, rng)

    pool = ReportPool(tuple(as_reports(omega, Owner.OTHER)))
    reals = as_reports(real_xy, Owner.MINE)
    mcfg = MetricsConfig(d_max)
    acfg = AnonymityConfig(k=k, metrics=mcfg)
    accs = {a: ExposureAccumulator(mcfg) for a in Algorithm}
    out = np.empty((len(Algorithm), n_real, 4))
    for i, real in enumerate(reals):
        sent = {
            Algorithm.OURS: build_anonymity_set(real, pool, acfg).members,
            Algorithm.RANDOM_K: random_anonymity_set(real, pool, k, random_rng),
            Algorithm.NAIVE: (real,),
        }
        for a_i, alg in enumerate(Algorithm):
            acc = accs[alg]
            acc.add(coords_of(sent[alg]))
            s = acc.summary()
            out[a_i, i] = s.n, s.coverage, s.uniformity, s.exposure
    return out


def run_anonymity_study(
    pattern: PatternSpec,
    omega_size: int = 1000,
    n_real: int = 100,
    k: int = 10,
    runs: int = 100,
    seed: int = 0,
    d_max: float = SIM_D_MAX,
    workers: int = 1,
) -> list[ScenarioTrace]:
    """Compare greedy k-anonymity, random dummies and no cloaking for one user.

    Each run redraws the other users' pool (``omega_size`` reports uniform
    over the field) and the user's ``n_real`` activity points. After every
    submission, everything sent so far under the user's account, dummies
    included, is scored.
    """
    if runs < 1 or n_real < 1 or k < 1:
        raise UsageError(f"need runs, n_real, k >= 1, got runs={runs} n_real={n_real} k={k}")
    if omega_size < k - 1:
        raise UsageError(f"omega_size={omega_size} is smaller than k-1={k - 1}")
    pattern = _with_dmax(pattern, d_max)
    fn = functools.partial(
        _anonymity_run, pattern=pattern, omega_size=omega_size, n_real=n_real, k=k, seed=seed, d_max=d_max
    )
    mean = _map_runs(fn, runs, workers) / runs
    traces = []
    for a_i, alg in enumerate(Algorithm):
        steps = tuple(TraceStep(i + 1, *map(float, mean[a_i, i])) for i in range(n_real))
        traces.append(ScenarioTrace(alg, pattern, seed, runs, steps))
    return traces


def relative_improvement(ours: ScenarioTrace, baseline: ScenarioTrace) -> float:
    """Fractional exposure reduction of ``ours`` against ``baseline`` at the last step."""
    b = baseline.final.exposure
    return (b - ours.final.exposure) / b


# ---------------------------------------------------------------------------
# CSV output


def _fmt(v: float) -> str:
    return repr(float(v))


def _csv_text(meta: dict, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    parts = [f"{k}={v}" for k, v in meta.items()] + [f"rng={RNG_ALGORITHM}"]
    buf.write("# " + " ".join(parts) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_trace_csv(traces: Sequence[ScenarioTrace], path: str | Path, meta: dict) -> None:
    rows = (
        [t.pattern.label, t.algorithm.value, s.step, _fmt(s.n), _fmt(s.coverage), _fmt(s.uniformity), _fmt(s.exposure)]
        for t in traces
        for s in t.steps
    )
    header = ("pattern", "algorithm", "step", "n", "coverage", "uniformity", "exposure")
    Path(path).write_text(_csv_text(meta, header, rows), encoding="utf-8")


def write_metric_csv(rows: Sequence[MetricRow], path: str | Path, meta: dict) -> None:
    body = ([r.pattern, r.n, _fmt(r.coverage), _fmt(r.uniformity), _fmt(r.exposure)] for r in rows)
    header = ("pattern", "n", "coverage", "uniformity", "exposure")
    Path(path).write_text(_csv_text(meta, header, body), encoding="utf-8")


def read_csv(path: str | Path) -> tuple[str, list[dict]]:
    """Return the metadata comment line and the data rows of a campaign CSV."""
    text = Path(path).read_text(encoding="utf-8")
    meta, _, rest = text.partition("\n")
    return meta, list(csv.DictReader(io.StringIO(rest)))
