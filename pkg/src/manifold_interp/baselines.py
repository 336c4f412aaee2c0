"""Classical 1-D interpolators used as accuracy and timing references.

Every method has a batched core working on stacks of knot windows: ``t`` and
``v`` of shape ``(m, n)`` and queries ``q`` of shape ``(m, r)``, returning
``(m, r)``.  The public ``*_interp`` functions run a core on one knot series;
:func:`interpolate_with` adds per-query local windows and the LLI dispatch.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import lli
from .errors import ExtrapolationUnsupported, NonFiniteInput, SingularSystem


class MethodId(enum.Enum):
    LLI = "LLI"
    LINEAR = "Linear"
    SPLINE = "Spline"
    MAKIMA = "Makima"
    PCHIP = "PCHIP"
    RBF = "RBF"
    KRIGING = "Kriging"

    @classmethod
    def parse(cls, name: str) -> "MethodId":
        if isinstance(name, cls):
            return name
        for member in cls:
            if member.value.lower() == str(name).strip().lower():
                return member
        choices = ", ".join(m.value for m in cls)
        raise ValueError(f"unknown method {name!r}; expected one of: {choices}")

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class KnotSeries:
    """Knot times (strictly increasing) and matching values of one axis."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("times and values must be 1-D and of equal length")
        if t.size < 2:
            raise ValueError("at least 2 knots are required")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise NonFiniteInput("knots contain NaN or infinity")
        if np.any(np.diff(t) <= 0):
            raise ValueError("knot times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class InterpConfig:
    """Options shared by all methods.

    ``k`` is the LLI window and the local window of the baselines.
    ``global_solve`` makes RBF and Kriging use every knot in one dense solve.
    ``rbf_shape`` overrides the multiquadric shape (default: mean knot spacing).
    """

    k: int = lli.DEFAULT_K
    sigma: float = lli.DEFAULT_SIGMA
    global_solve: bool = False
    rbf_shape: Optional[float] = None

    @property
    def lli(self) -> lli.LliConfig:
        return lli.LliConfig(self.k, self.sigma)


def _locate(t, q):
    """Segment index ``i`` with ``t[i] <= q <= t[i+1]`` for every query."""
    n = t.shape[1]
    if t.shape[0] == 1:
        i = np.searchsorted(t[0], q, side="right") - 1
    else:
        i = (t[:, None, :] <= q[:, :, None]).sum(axis=-1) - 1
    return np.clip(i, 0, n - 2)


def _take(a, i):
    return np.take_along_axis(a, i, axis=1)


def _hermite(t, v, d, q):
    i = _locate(t, q)
    t0, t1 = _take(t, i), _take(t, i + 1)
    h = t1 - t0
    s = (q - t0) / h
    s2, s3 = s * s, s * s * s
    return (
        (2 * s3 - 3 * s2 + 1) * _take(v, i)
        + (s3 - 2 * s2 + s) * h * _take(d, i)
        + (-2 * s3 + 3 * s2) * _take(v, i + 1)
        + (s3 - s2) * h * _take(d, i + 1)
    )


def linear_core(t, v, q):
    i = _locate(t, q)
    t0, t1 = _take(t, i), _take(t, i + 1)
    w = (q - t0) / (t1 - t0)
    return (1 - w) * _take(v, i) + w * _take(v, i + 1)


def spline_core(t, v, q):
    """Natural cubic spline: second derivative zero at both ends."""
    m, n = t.shape
    if n < 3:
        raise ValueError("cubic spline needs at least 3 knots")
    h = np.diff(t, axis=1)
    slope = np.diff(v, axis=1) / h
    # Tridiagonal system for interior second derivatives M_1..M_{n-2}.
    sub = h[:, :-1]
    diag = 2 * (h[:, :-1] + h[:, 1:])
    sup = h[:, 1:]
    rhs = 6 * (slope[:, 1:] - slope[:, :-1])
    interior = _thomas(sub, diag, sup, rhs)
    M = np.zeros((m, n))
    M[:, 1:-1] = interior

    i = _locate(t, q)
    t0, t1 = _take(t, i), _take(t, i + 1)
    hi = t1 - t0
    m0, m1 = _take(M, i), _take(M, i + 1)
    a, b = t1 - q, q - t0
    return (
        m0 * a**3 / (6 * hi)
        + m1 * b**3 / (6 * hi)
        + (_take(v, i) / hi - m0 * hi / 6) * a
        + (_take(v, i + 1) / hi - m1 * hi / 6) * b
    )


def _thomas(sub, diag, sup, rhs):
    # Batched tridiagonal solve; sub[:, 0] and sup[:, -1] are ignored.
    m, n = diag.shape
    c = np.empty((m, n))
    d = np.empty((m, n))
    c[:, 0] = sup[:, 0] / diag[:, 0]
    d[:, 0] = rhs[:, 0] / diag[:, 0]
    for i in range(1, n):
        denom = diag[:, i] - sub[:, i] * c[:, i - 1]
        c[:, i] = sup[:, i] / denom if i < n - 1 else 0.0
        d[:, i] = (rhs[:, i] - sub[:, i] * d[:, i - 1]) / denom
    x = np.empty((m, n))
    x[:, -1] = d[:, -1]
    for i in range(n - 2, -1, -1):
        x[:, i] = d[:, i] - c[:, i] * x[:, i + 1]
    return x


def pchip_slopes(t, v):
    """Fritsch-Carlson derivatives: weighted harmonic mean, zero at extrema."""
    m, n = t.shape
    h = np.diff(t, axis=1)
    delta = np.diff(v, axis=1) / h
    if n == 2:
        return np.repeat(delta, 2, axis=1)
    d = np.zeros((m, n))
    h0, h1 = h[:, :-1], h[:, 1:]
    d0, d1 = delta[:, :-1], delta[:, 1:]
    w1 = 2 * h1 + h0
    w2 = h1 + 2 * h0
    same = d0 * d1 > 0
    # A tiny slope overflows the denominator; the harmonic mean then tends to 0.
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        harm = (w1 + w2) / (w1 / d0 + w2 / d1)
    d[:, 1:-1] = np.where(same, harm, 0.0)
    d[:, 0] = _pchip_end(h[:, 0], h[:, 1], delta[:, 0], delta[:, 1])
    d[:, -1] = _pchip_end(h[:, -1], h[:, -2], delta[:, -1], delta[:, -2])
    return d


def _pchip_end(h0, h1, del0, del1):
    # One-sided three-point estimate, clipped to stay shape preserving.
    d = ((2 * h0 + h1) * del0 - h0 * del1) / (h0 + h1)
    d = np.where(np.sign(d) != np.sign(del0), 0.0, d)
    clip = (np.sign(del0) != np.sign(del1)) & (np.abs(d) > np.abs(3 * del0))
    return np.where(clip, 3 * del0, d)


def pchip_core(t, v, q):
    return _hermite(t, v, pchip_slopes(t, v), q)


def makima_slopes(t, v):
    """Knot derivatives from the modified Akima weighting.

    Two virtual segment slopes are appended at each end by linear
    extrapolation of the slope sequence.  When both weights vanish the
    derivative is the mean of the two adjacent segment slopes.
    """
    m, n = t.shape
    seg = np.diff(v, axis=1) / np.diff(t, axis=1)
    if n == 2:
        return np.repeat(seg, 2, axis=1)
    ext = np.empty((m, n + 3))
    ext[:, 2:-2] = seg
    ext[:, 1] = 2 * ext[:, 2] - ext[:, 3]
    ext[:, 0] = 2 * ext[:, 1] - ext[:, 2]
    ext[:, -2] = 2 * ext[:, -3] - ext[:, -4]
    ext[:, -1] = 2 * ext[:, -2] - ext[:, -3]
    # For knot i: m_{i-2}..m_{i+1} sit at ext[:, i..i+3].
    mm2, mm1, m0, mp1 = ext[:, :-3], ext[:, 1:-2], ext[:, 2:-1], ext[:, 3:]
    w1 = np.abs(mp1 - m0) + np.abs(mp1 + m0) / 2
    w2 = np.abs(mm1 - mm2) + np.abs(mm1 + mm2) / 2
    total = w1 + w2
    safe = np.where(total > 0, total, 1.0)
    return np.where(total > 0, (w1 * mm1 + w2 * m0) / safe, (mm1 + m0) / 2)


def makima_core(t, v, q):
    return _hermite(t, v, makima_slopes(t, v), q)


def multiquadric(r, shape):
    return np.sqrt(r * r + shape * shape)


def _solve(a, b, what):
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"{what} system is singular") from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem(f"{what} system produced non-finite coefficients")
    return x


def rbf_core(t, v, q, shape=None):
    """Multiquadric collocation ``s(x) = sum_i lam_i phi(|x - t_i|)``."""
    n = t.shape[1]
    if shape is None:
        c = ((t[:, -1] - t[:, 0]) / (n - 1))[:, None, None]
    else:
        c = float(shape)
    phi = multiquadric(t[:, :, None] - t[:, None, :], c)
    lam = _solve(phi, v[:, :, None], "RBF collocation")[:, :, 0]
    return np.einsum("mrn,mn->mr", multiquadric(q[:, :, None] - t[:, None, :], c), lam)


def exponential_variogram(h, sill, rng):
    return sill * (1.0 - np.exp(-np.abs(h) / rng))


def kriging_params(t, v):
    """Variogram range (quarter of the window span) and sill (sample variance)."""
    rng = (t[:, -1] - t[:, 0]) / 4.0
    sill = v.var(axis=1, ddof=1)
    # Kriging weights do not depend on the sill; keep the system non-degenerate.
    sill = np.where(sill > 0, sill, 1.0)
    return rng, sill


def kriging_core(t, v, q):
    """Ordinary kriging over time with an exponential variogram."""
    m, n = t.shape
    if n < 3:
        raise ValueError("kriging needs at least 3 knots")
    rng, sill = kriging_params(t, v)
    rng, sill = rng[:, None, None], sill[:, None, None]
    a = np.ones((m, n + 1, n + 1))
    a[:, :n, :n] = exponential_variogram(t[:, :, None] - t[:, None, :], sill, rng)
    a[:, n, n] = 0.0
    b = np.ones((m, n + 1, q.shape[1]))
    b[:, :n, :] = exponential_variogram(t[:, :, None] - q[:, None, :], sill, rng)
    w = _solve(a, b, "kriging")[:, :n, :]
    return np.einsum("mnr,mn->mr", w, v)


_CORES = {
    MethodId.LINEAR: (linear_core, 2),
    MethodId.SPLINE: (spline_core, 3),
    MethodId.PCHIP: (pchip_core, 2),
    MethodId.MAKIMA: (makima_core, 2),
    MethodId.RBF: (rbf_core, 2),
    MethodId.KRIGING: (kriging_core, 3),
}


def _as_knots(knots):
    return knots if isinstance(knots, KnotSeries) else KnotSeries(*knots)


def _checked_queries(knots, queries):
    q = np.atleast_1d(np.asarray(queries, dtype=float))
    if not np.all(np.isfinite(q)):
        raise NonFiniteInput("queries contain NaN or infinity")
    lo, hi = knots.times[0], knots.times[-1]
    outside = (q < lo) | (q > hi)
    if np.any(outside):
        raise ExtrapolationUnsupported(
            f"{int(outside.sum())} query(ies) outside the knot range [{lo:g}, {hi:g}]"
        )
    return q


def _global(method, knots, queries, **kw):
    knots = _as_knots(knots)
    q = _checked_queries(knots, queries)
    core, min_knots = _CORES[method]
    if knots.times.size < min_knots:
        raise ValueError(f"{method} needs at least {min_knots} knots")
    return core(knots.times[None, :], knots.values[None, :], q[None, :], **kw)[0]


def linear_interp(knots, queries):
    """Piecewise-linear interpolation."""
    return _global(MethodId.LINEAR, knots, queries)


def spline_interp(knots, queries):
    """Natural cubic spline through all knots."""
    return _global(MethodId.SPLINE, knots, queries)


def pchip_interp(knots, queries):
    """Shape-preserving piecewise cubic Hermite interpolation."""
    return _global(MethodId.PCHIP, knots, queries)


def makima_interp(knots, queries):
    """Modified Akima piecewise cubic interpolation."""
    return _global(MethodId.MAKIMA, knots, queries)


def rbf_interp(knots, queries, shape=None):
    """Multiquadric RBF interpolation with a dense collocation solve."""
    return _global(MethodId.RBF, knots, queries, shape=shape)


def kriging_interp(knots, queries):
    """Ordinary kriging with an exponential variogram."""
    return _global(MethodId.KRIGING, knots, queries)


def local_windows(times, queries, k):
    """Indices of ``k`` consecutive knots around each query.

    ``ceil(k/2)`` knots precede the query where possible; windows are shifted
    inward at the ends of the series.
    """
    n = times.size
    k = min(k, n)
    pos = np.searchsorted(times, queries, side="left")
    start = np.clip(pos - (k + 1) // 2, 0, n - k)
    return start[:, None] + np.arange(k)[None, :]


def interpolate_with(method, knots, queries, config: InterpConfig = InterpConfig()) -> np.ndarray:
    """Evaluate ``method`` on one axis at ``queries``.

    LLI handles gaps inside the knot range and past its end; the other
    methods raise :class:`ExtrapolationUnsupported` outside the range.  The
    baselines fit each query on a window of ``config.k`` nearby knots (at
    least as many as the method needs) unless ``config.global_solve`` is set
    for RBF or Kriging.
    """
    method = MethodId.parse(method)
    knots = _as_knots(knots)
    if method is MethodId.LLI:
        return lli.interpolate_series(knots.times, knots.values, queries, config.lli)

    q = _checked_queries(knots, queries)
    kw = {"shape": config.rbf_shape} if method is MethodId.RBF else {}
    core, min_knots = _CORES[method]
    if method is MethodId.LINEAR or (config.global_solve and method in (MethodId.RBF, MethodId.KRIGING)):
        return _global(method, knots, q, **kw)
    if knots.times.size < min_knots:
        raise ValueError(f"{method} needs at least {min_knots} knots")
    if q.size == 0:
        return np.empty(0)
    win = local_windows(knots.times, q, max(config.k, min_knots))
    out = core(knots.times[win], knots.values[win], q[:, None], **kw)[:, 0]
    # Exact knot values regardless of round-off in the local solve.
    pos = np.searchsorted(knots.times, q)
    at_knot = (pos < knots.times.size) & (knots.times[np.minimum(pos, knots.times.size - 1)] == q)
    out[at_knot] = knots.values[pos[at_knot]]
    return out
