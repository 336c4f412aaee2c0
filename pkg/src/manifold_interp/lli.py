"""Local linear interpolation (LLI) of trajectory samples.

A known sample is reconstructed as an affine combination of ``k`` neighbouring
samples; the weights of that reconstruction capture the local geometry of the
trajectory and are then applied to the neighbours of the lost sample.  Each
coordinate axis is handled independently, so everything here works on 1-D
arrays of scalars.

Weights solve::

    min_W ||target - sum_j W_j values_j||^2   subject to   sum_j W_j = 1

With ``X = target - values`` the Gram matrix ``C = X X^T`` has rank one, so it
is regularized as ``C + sigma * trace(C) * I`` before solving ``C u = 1`` and
normalizing ``W = u / sum(u)``.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import InsufficientHistory, NonFiniteInput, SingularSystem

logger = logging.getLogger(__name__)

DEFAULT_K = 5
DEFAULT_SIGMA = 1e-3
MAX_K = 32
# Above this window size the per-point solve cost grows quickly.
SLOW_K = 10


@dataclass(frozen=True)
class LliConfig:
    """Window size ``k`` and regularization strength ``sigma``."""

    k: int = DEFAULT_K
    sigma: float = DEFAULT_SIGMA

    def __post_init__(self):
        if isinstance(self.k, bool) or int(self.k) != self.k:
            raise ValueError(f"k must be an integer, got {self.k!r}")
        if not 2 <= self.k <= MAX_K:
            raise ValueError(f"k must be in [2, {MAX_K}], got {self.k}")
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma!r}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "sigma", float(self.sigma))
        if self.k > SLOW_K:
            _warn_large_k(self.k)


@functools.lru_cache(maxsize=None)
def _warn_large_k(k):
    logger.warning("k=%d exceeds %d; interpolation cost rises steeply", k, SLOW_K)


@dataclass(frozen=True)
class Neighborhood:
    """Known samples on either side of a single lost sample (one axis).

    ``before`` is ordered oldest to newest and ends with the sample right
    before the gap; ``after`` starts with the sample right after it.
    """

    before: np.ndarray
    after: np.ndarray
    gap_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "before", _finite_1d(self.before, "before"))
        object.__setattr__(self, "after", _finite_1d(self.after, "after"))


def _finite_1d(values, name="values"):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains NaN or infinity")
    return arr


def split_counts(k: int) -> tuple[int, int]:
    """Return how many references sit before and after a gap for window ``k``.

    ``k // 2`` follow the gap and the remaining ``k - k // 2`` precede it.
    """
    after = k // 2
    return k - after, after


def solve_weights(values: Sequence[float], target: float, config: LliConfig = LliConfig()) -> np.ndarray:
    """Affine reconstruction weights of ``target`` from ``values``.

    Parameters
    ----------
    values : sequence of float
        The ``k`` reference samples of one axis.
    target : float
        The sample to reconstruct.
    config : LliConfig
        ``len(values)`` must equal ``config.k``.

    Returns
    -------
    ndarray of shape (k,)
        Weights summing to one.  When every difference ``target - values_j``
        is zero the uniform vector ``1/k`` is returned.

    Raises
    ------
    NonFiniteInput
        If any input is NaN or infinite.
    SingularSystem
        If ``sigma`` is zero and the rank-one Gram matrix cannot be factored.
    """
    values = _finite_1d(values)
    if not math.isfinite(target):
        raise NonFiniteInput("target is NaN or infinite")
    if values.size != config.k:
        raise ValueError(f"expected {config.k} values, got {values.size}")

    diffs = float(target) - values
    scale = np.abs(diffs).max()
    if scale == 0.0:
        return np.full(config.k, 1.0 / config.k)
    # Weights are invariant to scaling X; unit scale keeps C clear of under/overflow.
    diffs = diffs / scale
    gram = np.outer(diffs, diffs)
    trace = np.trace(gram)
    gram[np.diag_indices_from(gram)] += config.sigma * trace
    try:
        factor = cho_factor(gram, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise SingularSystem(
            "regularized Gram matrix is not positive definite; use sigma > 0"
        ) from exc
    u = cho_solve(factor, np.ones(config.k), check_finite=False)
    return _normalize(u)


def _normalize(u):
    total = u.sum(axis=-1, keepdims=True)
    if np.any(total == 0) or not np.all(np.isfinite(u)):
        raise SingularSystem("weight normalization failed")
    return u / total


def solve_weights_batch(diffs: np.ndarray, sigma: float) -> np.ndarray:
    """Vectorized :func:`solve_weights` over rows of ``diffs = target - values``.

    ``diffs`` has shape ``(m, k)``; returns weights of the same shape.
    """
    diffs = np.asarray(diffs, dtype=float)
    if diffs.ndim != 2:
        raise ValueError("diffs must have shape (m, k)")
    m, k = diffs.shape
    weights = np.full((m, k), 1.0 / k)
    if m == 0:
        return weights
    if not np.all(np.isfinite(diffs)):
        raise NonFiniteInput("window contains NaN or infinity")
    scale = np.abs(diffs).max(axis=1)
    live = scale > 0
    if not np.any(live):
        return weights
    d = diffs[live] / scale[live, None]
    trace = np.einsum("ij,ij->i", d, d)
    gram = d[:, :, None] * d[:, None, :]
    idx = np.arange(k)
    gram[:, idx, idx] += (sigma * trace)[:, None]
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(
            "regularized Gram matrix is not positive definite; use sigma > 0"
        ) from exc
    weights[live] = _normalize(_cholesky_solve_ones(chol))
    return weights


def _cholesky_solve_ones(chol):
    # Forward then back substitution for L L^T u = 1, vectorized over the stack.
    m, k, _ = chol.shape
    y = np.empty((m, k))
    for i in range(k):
        y[:, i] = (1.0 - np.einsum("mj,mj->m", chol[:, i, :i], y[:, :i])) / chol[:, i, i]
    u = np.empty((m, k))
    for i in range(k - 1, -1, -1):
        u[:, i] = (y[:, i] - np.einsum("mj,mj->m", chol[:, i + 1 :, i], u[:, i + 1 :])) / chol[:, i, i]
    return u


def reconstruct(refs: Sequence[float], weights: Sequence[float]) -> float:
    """Weighted sum ``sum_j weights_j * refs_j``."""
    refs = np.asarray(refs, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if refs.shape != weights.shape or refs.ndim != 1:
        raise ValueError(f"length mismatch: {refs.shape} refs vs {weights.shape} weights")
    return float(refs @ weights)


def extrapolate_next(tail: Sequence[float], config: LliConfig = LliConfig()) -> float:
    """Predict the sample following ``tail`` (the last ``k + 1`` known samples).

    The weights that rebuild ``tail[k]`` from ``tail[:k]`` are applied to
    ``tail[1:]``.
    """
    tail = _finite_1d(tail, "tail")
    k = config.k
    if tail.size < k + 1:
        raise InsufficientHistory(f"need {k + 1} known samples, got {tail.size}")
    tail = tail[-(k + 1) :]
    weights = solve_weights(tail[:k], tail[k], config)
    return reconstruct(tail[1:], weights)


def interpolate_point_2d(history_x, history_y, config: LliConfig = LliConfig()) -> tuple[float, float]:
    """Extrapolate the next 2-D point, each axis on its own."""
    return extrapolate_next(history_x, config), extrapolate_next(history_y, config)


# In-range stencils are expressed as offsets relative to the gap slot in the
# sequence of known samples with the gap re-inserted: -1 is the newest sample
# before the gap, +1 the first one after it.


@dataclass(frozen=True)
class _Stencil:
    target: int
    refs: tuple[int, ...]
    apply: tuple[int, ...]

    @property
    def span(self):
        offsets = self.refs + self.apply + (self.target,)
        return -min(min(offsets), 0), max(max(offsets), 0)


def _inrange_stencils(k: int) -> tuple[_Stencil, _Stencil]:
    """Fit stencils for a gap: one entirely before it, one entirely after it.

    The reference offsets around the fit target equal the offsets of the
    apply references around the gap, so weights move across by a pure shift.
    """
    before, after = split_counts(k)
    apply = tuple(range(-before, 0)) + tuple(range(1, after + 1))
    stencils = []
    for target in (-(after + 1), before + 1):
        refs = tuple(target + o for o in apply)
        assert 0 not in refs and target != 0 and 0 not in apply, "lost sample leaked into the stencil"
        stencils.append(_Stencil(target, refs, apply))
    return stencils[0], stencils[1]


def interpolate_in_range(nbhd: Neighborhood, config: LliConfig = LliConfig()) -> float:
    """Fill a single lost sample that has known samples on both sides.

    Weights are fitted by reconstructing a known sample whose neighbours form
    the same pattern (``k // 2`` after, the rest before) as the lost
    sample's neighbours, then applied to those neighbours.  The fit uses the
    history before the gap, or the samples after it when history is short.

    Raises
    ------
    InsufficientHistory
        If neither side holds a complete fit stencil.
    """
    k = config.k
    n_before, n_after = nbhd.before.size, nbhd.after.size
    for stencil in _inrange_stencils(k):
        need_before, need_after = stencil.span
        if n_before >= need_before and n_after >= need_after:
            break
    else:
        before, after = split_counts(k)
        raise InsufficientHistory(
            f"k={k} needs {k + 1} samples before and {after} after the gap "
            f"(or {before} before and {k + 1} after); got {n_before} and {n_after}"
        )

    def at(offset):
        return nbhd.before[offset] if offset < 0 else nbhd.after[offset - 1]

    refs = [at(o) for o in stencil.refs]
    weights = solve_weights(refs, at(stencil.target), config)
    return reconstruct([at(o) for o in stencil.apply], weights)


def _gather(known, pos, offsets):
    # Map stencil offsets around insertion positions to indices of ``known``.
    offsets = np.asarray(offsets)
    idx = pos[:, None] + np.where(offsets < 0, offsets, offsets - 1)[None, :]
    return known[idx]


def _extrapolate_at(known_v, pos, config):
    k = config.k
    tail = known_v[pos[:, None] + np.arange(-(k + 1), 0)[None, :]]
    weights = solve_weights_batch(tail[:, k : k + 1] - tail[:, :k], config.sigma)
    return np.einsum("ij,ij->i", weights, tail[:, 1:])


def _fill_round(known_v, pos, config):
    """Estimate one gap per insertion position ``pos`` into ``known_v``."""
    k, n = config.k, known_v.size
    out = np.full(pos.size, np.nan)
    todo = np.ones(pos.size, dtype=bool)
    has_history = pos >= k + 1
    interior = pos < n
    for stencil in _inrange_stencils(k):
        need_before, need_after = stencil.span
        sel = todo & interior & (pos >= need_before) & (pos + need_after <= n)
        if np.any(sel):
            p = pos[sel]
            target = _gather(known_v, p, [stencil.target])[:, 0]
            weights = solve_weights_batch(target[:, None] - _gather(known_v, p, stencil.refs), config.sigma)
            out[sel] = np.einsum("ij,ij->i", weights, _gather(known_v, p, stencil.apply))
            todo &= ~sel
    # Extrapolation: trailing gaps, and interior gaps too close to the end.
    sel = todo & has_history
    if np.any(sel):
        out[sel] = _extrapolate_at(known_v, pos[sel], config)
        todo &= ~sel
    if np.any(todo):
        raise InsufficientHistory(
            f"{int(todo.sum())} gap(s) lack the {k + 1} preceding known samples LLI needs"
        )
    return out


def interpolate_series(known_t, known_v, query_t, config: LliConfig = LliConfig()) -> np.ndarray:
    """LLI estimates of one axis at ``query_t`` from known samples.

    Samples are treated as an ordered sequence: ``known_t`` only fixes where
    each query falls among the known samples.  Interior queries use the
    in-range stencil, queries past the last known sample are extrapolated,
    and runs of consecutive lost samples are filled one per round, oldest
    first, each filled value joining the known set for the next round.
    Queries that coincide with a known time return the known value.
    """
    known_t = _finite_1d(known_t, "known_t")
    known_v = _finite_1d(known_v, "known_v")
    query_t = _finite_1d(query_t, "query_t")
    if known_t.size != known_v.size:
        raise ValueError("known_t and known_v differ in length")
    if np.any(np.diff(known_t) <= 0):
        raise ValueError("known_t must be strictly increasing")

    result = np.empty(query_t.size)
    pos = np.searchsorted(known_t, query_t)
    hit = (pos < known_t.size) & (known_t[np.minimum(pos, known_t.size - 1)] == query_t)
    result[hit] = known_v[pos[hit]]

    miss = np.flatnonzero(~hit)
    if miss.size == 0:
        return result
    if np.any(query_t[miss] < known_t[0]):
        raise InsufficientHistory("query precedes the first known sample")

    # Unique pending times, processed in rounds.
    pending_t, inverse = np.unique(query_t[miss], return_inverse=True)
    filled = np.empty(pending_t.size)
    cur_t, cur_v = known_t, known_v
    remaining = np.arange(pending_t.size)
    while remaining.size:
        p = np.searchsorted(cur_t, pending_t[remaining])
        first = np.ones(remaining.size, dtype=bool)
        first[1:] = p[1:] != p[:-1]
        chosen, p = remaining[first], p[first]
        filled[chosen] = _fill_round(cur_v, p, config)
        cur_t = np.insert(cur_t, p, pending_t[chosen])
        cur_v = np.insert(cur_v, p, filled[chosen])
        remaining = remaining[~first]
    result[miss] = filled[inverse]
    return result
