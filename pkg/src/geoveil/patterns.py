"""Synthetic activity points on a circular field, from uniform or beta draws.

Each point comes from one draw ``rho`` in [0, 1] mapped to polar coordinates::

    radius = sqrt(rho) * d_max / 2
    angle  = rho * 2 * pi

The same draw feeds radius and angle, so small-mean beta shapes cluster near
the center and also within a narrow angular sector. ``shared_angle=False``
draws the angle independently (uniform on [0, 2*pi)) instead.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .model import Crs, GeoPoint, Owner, Report, UsageError

RNG_ALGORITHM = "numpy.random.PCG64"


@dataclass(frozen=True)
class PatternSpec:
    kind: str = "uniform"  # "uniform" or "beta"
    alpha: float | None = None
    beta: float | None = None
    d_max: float = 500.0
    seed: int = 0
    shared_angle: bool = True

    def __post_init__(self):
        if self.kind not in ("uniform", "beta"):
            raise UsageError(f"unknown pattern kind {self.kind!r}")
        if self.kind == "beta":
            if self.alpha is None or self.beta is None or not (self.alpha > 0 and self.beta > 0):
                raise UsageError(f"beta pattern needs positive alpha and beta, got {self.alpha}, {self.beta}")
        if not (self.d_max > 0 and math.isfinite(self.d_max)):
            raise UsageError(f"d_max must be positive, got {self.d_max}")

    @classmethod
    def parse(cls, text: str, **kw) -> PatternSpec:
        """Parse ``uniform`` or ``beta:A:B``."""
        t = text.strip().lower()
        if t == "uniform":
            return cls("uniform", **kw)
        m = re.fullmatch(r"beta:([^:]+):([^:]+)", t)
        if not m:
            raise UsageError(f"pattern must be 'uniform' or 'beta:A:B', got {text!r}")
        try:
            a, b = float(m.group(1)), float(m.group(2))
        except ValueError:
            raise UsageError(f"pattern must be 'uniform' or 'beta:A:B', got {text!r}") from None
        return cls("beta", a, b, **kw)

    @property
    def label(self) -> str:
        if self.kind == "uniform":
            return "Uniform"
        return f"BD({_num(self.alpha)},{_num(self.beta)})"


def _num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


# The six activity patterns compared in the metric study.
STUDY_PATTERNS = (
    PatternSpec("uniform"),
    PatternSpec("beta", 5, 2),
    PatternSpec("beta", 2, 30),
    PatternSpec("beta", 30, 5),
    PatternSpec("beta", 30, 30),
    PatternSpec("beta", 5, 30),
)


def sample_rho(spec: PatternSpec, rng: np.random.Generator, size: int | None = None):
    if spec.kind == "uniform":
        return rng.random(size)
    return rng.beta(spec.alpha, spec.beta, size)


def polar_points(rho, d_max: float, angle=None) -> np.ndarray:
    """Map draws to (x, y). ``angle`` defaults to ``rho * 2*pi``."""
    rho = np.asarray(rho, dtype=float)
    theta = rho * 2 * np.pi if angle is None else np.asarray(angle, dtype=float)
    half = d_max / 2
    gamma = np.sqrt(rho) * half
    xy = np.stack([gamma * np.cos(theta), gamma * np.sin(theta)], axis=-1)
    # rounding in cos/sin can land a boundary point one ulp outside the field
    norm = np.hypot(xy[..., 0], xy[..., 1])
    over = norm > half
    if np.any(over):
        xy[over] *= (half / norm[over] * (1 - 2.0**-52))[..., None]
    return xy


def generate_xy(spec: PatternSpec, n: int, rng: np.random.Generator | None = None) -> np.ndarray:
    """(n, 2) planar points centered at the origin. Seeds from ``spec.seed`` when ``rng`` is None."""
    if n < 0:
        raise UsageError(f"n must be >= 0, got {n}")
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    rho = sample_rho(spec, rng, n)
    angle = None if spec.shared_angle else rng.random(n) * 2 * np.pi
    return polar_points(rho, spec.d_max, angle).reshape(n, 2)


def area_uniform_xy(n: int, d_max: float, rng: np.random.Generator) -> np.ndarray:
    """Points uniformly distributed over the disc of diameter ``d_max``."""
    return generate_xy(PatternSpec("uniform", d_max=d_max, shared_angle=False), n, rng)


def generate_points(spec: PatternSpec, n: int) -> list[GeoPoint]:
    return [GeoPoint(float(x), float(y), Crs.PLANAR) for x, y in generate_xy(spec, n)]


def as_reports(xy: np.ndarray, owner: Owner = Owner.MINE, start_time: float = 0.0) -> list[Report]:
    """Wrap simulated locations as placeholder reports; only the location is meaningful."""
    return [
        Report("sim", GeoPoint(float(x), float(y), Crs.PLANAR), timestamp=start_time + i, owner=owner)
        for i, (x, y) in enumerate(xy)
    ]
