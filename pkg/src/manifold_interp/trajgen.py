"""Synthetic trajectories (random Bezier curves), noise, lost-sample masks, and CSV I/O.

Trajectory CSV: UTF-8, header ``t,x,y``, integer ``t`` and decimal ``x``/``y``
in centimetres.  Mask CSV: header ``t``, one lost index per row.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParseError, ValidationError

logger = logging.getLogger(__name__)

ORDER_RANGE = (5, 14)
BOX_CM = (800.0, 1800.0)
DEFAULT_NOISE_CM = 2.0
MIN_SAMPLES = 100

SCATTERED = "scattered"
UNRESTRICTED = "unrestricted"
MASK_POLICIES = (SCATTERED, UNRESTRICTED)


@dataclass(frozen=True)
class BezierSpec:
    order: int
    control_points: np.ndarray
    n_samples: int
    seed: int = 0

    def __post_init__(self):
        cps = np.asarray(self.control_points, dtype=float)
        if self.order < 1 or cps.shape != (self.order + 1, 2):
            raise ValueError(f"order {self.order} needs {self.order + 1} 2-D control points, got shape {cps.shape}")
        if self.n_samples < MIN_SAMPLES:
            raise ValueError(f"n_samples must be >= {MIN_SAMPLES}")
        object.__setattr__(self, "control_points", cps)


@dataclass(frozen=True)
class NoiseSpec:
    sigma_noise: float = DEFAULT_NOISE_CM
    seed: int = 0

    def __post_init__(self):
        if not self.sigma_noise >= 0:
            raise ValueError("sigma_noise must be >= 0")


@dataclass(frozen=True)
class MaskSpec:
    ratio: float
    seed: int = 0
    protect_prefix: int = 6
    policy: str = SCATTERED

    def __post_init__(self):
        if not 0 < self.ratio < 1:
            raise ValueError("ratio must lie in (0, 1)")
        if self.protect_prefix < 0:
            raise ValueError("protect_prefix must be >= 0")
        if self.policy not in MASK_POLICIES:
            raise ValueError(f"policy must be one of {MASK_POLICIES}")


@dataclass(frozen=True)
class Trajectory:
    """Time-indexed 2-D positions; ``xy`` has shape ``(N, 2)``."""

    t: np.ndarray
    xy: np.ndarray
    provenance: str = "generated"

    def __post_init__(self):
        t = np.asarray(self.t)
        xy = np.asarray(self.xy, dtype=float)
        if t.ndim != 1 or xy.shape != (t.size, 2):
            raise ValueError("t must be 1-D and xy of shape (len(t), 2)")
        if t.size and not np.issubdtype(t.dtype, np.integer):
            if not np.all(t == np.round(t)):
                raise ValidationError("t must hold integer sample indices")
        t = t.astype(np.int64)
        if np.any(np.diff(t) <= 0):
            raise ValidationError("t must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "xy", xy)

    def __len__(self):
        return self.t.size

    @property
    def x(self):
        return self.xy[:, 0]

    @property
    def y(self):
        return self.xy[:, 1]


def de_casteljau(control_points, params) -> np.ndarray:
    """Evaluate a Bezier curve at each parameter in ``params`` (0..1)."""
    pts = np.asarray(control_points, dtype=float)
    s = np.asarray(params, dtype=float)[:, None, None]
    work = np.broadcast_to(pts, (s.shape[0],) + pts.shape)
    for _ in range(pts.shape[0] - 1):
        work = (1.0 - s) * work[:, :-1] + s * work[:, 1:]
    return work[:, 0]


def sample_bezier(spec: BezierSpec) -> Trajectory:
    """``n_samples`` points at uniform parameter steps over [0, 1]."""
    params = np.linspace(0.0, 1.0, spec.n_samples)
    return Trajectory(np.arange(spec.n_samples), de_casteljau(spec.control_points, params))


def random_bezier_spec(order_range=ORDER_RANGE, box=BOX_CM, n_samples=2000, seed=0) -> BezierSpec:
    """Random order in ``order_range`` (inclusive), control points uniform in ``box``."""
    lo, hi = order_range
    if not 1 <= lo <= hi:
        raise ValueError(f"invalid order range {order_range}")
    rng = np.random.default_rng(seed)
    order = int(rng.integers(lo, hi + 1))
    cps = rng.uniform((0.0, 0.0), box, size=(order + 1, 2))
    return BezierSpec(order, cps, n_samples, seed)


def add_noise(traj: Trajectory, spec: NoiseSpec) -> Trajectory:
    """Add i.i.d. Gaussian noise with std ``sigma_noise`` to both axes."""
    if spec.sigma_noise == 0:
        return Trajectory(traj.t, traj.xy.copy(), traj.provenance)
    rng = np.random.default_rng(spec.seed)
    return Trajectory(traj.t, traj.xy + rng.normal(0.0, spec.sigma_noise, traj.xy.shape), traj.provenance)


def make_mask(traj, spec: MaskSpec) -> np.ndarray:
    """Sorted time indices to hide, ``floor(ratio * N)`` of them.

    Indices come from ``t[protect_prefix:]``.  The scattered policy draws
    uniformly among subsets with no two adjacent indices; when no such
    subset exists it falls back to the unrestricted policy with a warning.
    """
    t = traj.t if isinstance(traj, Trajectory) else np.asarray(traj)
    count = int(math.floor(spec.ratio * t.size))
    if count < 1:
        raise ValueError(f"ratio {spec.ratio} masks no sample of a {t.size}-sample trajectory")
    eligible = t[spec.protect_prefix :]
    if count > eligible.size:
        raise ValueError(f"cannot mask {count} of {eligible.size} eligible samples")
    rng = np.random.default_rng(spec.seed)
    policy = spec.policy
    if policy == SCATTERED and 2 * count - 1 > eligible.size:
        logger.warning(
            "no scattered mask of %d among %d samples; falling back to unrestricted",
            count,
            eligible.size,
        )
        policy = UNRESTRICTED
    if policy == UNRESTRICTED:
        picked = np.sort(rng.choice(eligible.size, size=count, replace=False))
    else:
        # Non-adjacent m-subsets of L slots <-> m-subsets of L - m + 1 slots.
        base = np.sort(rng.choice(eligible.size - count + 1, size=count, replace=False))
        picked = base + np.arange(count)
    return eligible[picked]


def _fmt(value: float) -> str:
    return repr(float(value))


def write_trajectory_csv(path, traj: Trajectory) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t,x,y\n")
        for ti, (x, y) in zip(traj.t, traj.xy):
            fh.write(f"{int(ti)},{_fmt(x)},{_fmt(y)}\n")


def _rows(path, header):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or [c.strip() for c in first] != header:
            raise ParseError(f"expected header {','.join(header)!r}", line=1)
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            yield reader.line_num, row


def _parse_int(text, line):
    try:
        return int(text.strip())
    except ValueError:
        raise ParseError(f"invalid integer {text!r}", line=line) from None


def _parse_float(text, line):
    try:
        value = float(text.strip())
    except ValueError:
        raise ParseError(f"invalid number {text!r}", line=line) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite number {text!r}", line=line)
    return value


def load_trajectory_csv(path) -> Trajectory:
    """Read a ``t,x,y`` CSV.

    Raises
    ------
    ParseError
        On a bad header, wrong column count, or a non-numeric cell; the
        message names the 1-based line.
    ValidationError
        If ``t`` is not strictly increasing.
    """
    ts, xys = [], []
    for line, row in _rows(path, ["t", "x", "y"]):
        if len(row) != 3:
            raise ParseError(f"expected 3 columns, got {len(row)}", line=line)
        ts.append(_parse_int(row[0], line))
        xys.append((_parse_float(row[1], line), _parse_float(row[2], line)))
    ts = np.asarray(ts, dtype=np.int64)
    bad = np.flatnonzero(np.diff(ts) <= 0)
    if bad.size:
        raise ValidationError(f"t is not strictly increasing at t={ts[bad[0] + 1]}")
    return Trajectory(ts, np.asarray(xys, dtype=float).reshape(-1, 2), provenance="loaded")


def write_mask_csv(path, mask: Sequence[int]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t\n")
        for ti in mask:
            fh.write(f"{int(ti)}\n")


def load_mask_csv(path) -> np.ndarray:
    values = []
    for line, row in _rows(path, ["t"]):
        if len(row) != 1:
            raise ParseError(f"expected 1 column, got {len(row)}", line=line)
        values.append(_parse_int(row[0], line))
    mask = np.asarray(values, dtype=np.int64)
    if np.any(np.diff(mask) <= 0):
        raise ValidationError("mask indices must be strictly increasing")
    return mask
