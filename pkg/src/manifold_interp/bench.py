"""Experiment harness: accuracy sweeps, timing, and the k ablation.

Seeding
-------
Every random stream is derived from ``master_seed`` with
:class:`numpy.random.SeedSequence` (a 64-bit hash mix of the entropy and a
spawn key), so a cell's inputs do not depend on execution order:

* curve:  ``spawn_key = (length_index, curve_index)``
* noise:  ``spawn_key = (length_index, curve_index, 1, run)``
* mask:   ``spawn_key = (length_index, curve_index, 2, ratio_index, run)``

Runs re-draw noise and masks over a fixed curve.  Errors are scored on gaps
strictly inside the observed range, the same point set for every method.
"""

from __future__ import annotations

import json
import logging
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import jsonschema
import numpy as np

from . import metrics, trajgen
from .baselines import InterpConfig, KnotSeries, MethodId, interpolate_with
from .errors import InterpolationError, ParseError
from .lli import DEFAULT_K, DEFAULT_SIGMA
from .metrics import ErrorReport

logger = logging.getLogger(__name__)

THREADS_ENV = "MANIFOLD_INTERP_THREADS"
TIMING_HEADER = "method,k,n_points,wall_time_ms"
ALL_METHODS = tuple(m.value for m in MethodId)

SPEC_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "curve_lengths": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 100}},
        "curves_per_length": {"type": "integer", "minimum": 1},
        "loss_ratios": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        },
        "methods": {"type": "array", "minItems": 1, "items": {"enum": list(ALL_METHODS) + [m.lower() for m in ALL_METHODS]}},
        "k": {"type": "integer", "minimum": 2, "maximum": 32},
        "sigma": {"type": "number", "minimum": 0},
        "noise_sigma": {"type": "number", "minimum": 0},
        "master_seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "repetitions": {"type": "integer", "minimum": 1},
        "runs": {"type": "integer", "minimum": 1},
        "order_range": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2},
        "box": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 2, "maxItems": 2},
        "mask_policy": {"enum": list(trajgen.MASK_POLICIES)},
        "protect_prefix": {"type": ["integer", "null"], "minimum": 0},
        "global_solve": {"type": "boolean"},
        "truth": {"enum": ["clean", "observed"]},
        "k_values": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 2, "maximum": 32}},
    },
}


@dataclass(frozen=True)
class ExperimentSpec:
    """Declarative description of a corpus run.

    ``truth="clean"`` scores estimates against the noise-free curve;
    ``"observed"`` against the noisy sample that was hidden.
    """

    curve_lengths: tuple = (1000, 2000, 5000)
    curves_per_length: int = 10
    loss_ratios: tuple = (0.1, 0.2, 0.3, 0.4, 0.5)
    methods: tuple = ALL_METHODS
    k: int = DEFAULT_K
    sigma: float = DEFAULT_SIGMA
    noise_sigma: float = trajgen.DEFAULT_NOISE_CM
    master_seed: int = 0
    repetitions: int = 5
    runs: int = 1
    order_range: tuple = trajgen.ORDER_RANGE
    box: tuple = trajgen.BOX_CM
    mask_policy: str = trajgen.SCATTERED
    protect_prefix: Optional[int] = None
    global_solve: bool = False
    truth: str = "clean"
    k_values: tuple = tuple(range(2, 16))

    def __post_init__(self):
        for name in ("curve_lengths", "loss_ratios", "order_range", "box", "k_values"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "methods", tuple(MethodId.parse(m).value for m in self.methods))
        if not self.methods or not self.curve_lengths or not self.loss_ratios:
            raise ValueError("methods, curve_lengths and loss_ratios must be non-empty")
        if self.repetitions < 1 or self.runs < 1:
            raise ValueError("repetitions and runs must be >= 1")

    @property
    def prefix(self) -> int:
        return self.k + 1 if self.protect_prefix is None else self.protect_prefix

    @property
    def interp_config(self) -> InterpConfig:
        return InterpConfig(k=self.k, sigma=self.sigma, global_solve=self.global_solve)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        try:
            jsonschema.validate(data, SPEC_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ParseError(f"config {where}: {exc.message}") from None
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: invalid JSON ({exc.msg})", line=exc.lineno) from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


@dataclass
class BenchRecord:
    method: str
    n_points: int
    loss_ratio: float
    k: int
    wall_time_ms: float
    error_report: Optional[ErrorReport]
    curve_seed: int = 0
    length_index: int = 0
    curve_index: int = 0
    run_means: tuple = ()
    status: str = "ok"
    message: str = ""
    rep_times_ms: tuple = field(default=(), repr=False)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def std(self) -> Optional[float]:
        if not self.ok or len(self.run_means) < 2:
            return None
        return metrics.std_across_runs(self.run_means)

    @property
    def key(self):
        return (self.length_index, self.curve_index, self.loss_ratio, self.method)


def derive_seed(master_seed: int, *key: int) -> int:
    """64-bit seed for the stream identified by ``key``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class Case:
    """One (curve, ratio, run) instance ready for interpolation."""

    length_index: int
    curve_index: int
    ratio_index: int
    run: int
    curve_seed: int
    clean: trajgen.Trajectory
    observed: trajgen.Trajectory
    mask: np.ndarray


def make_curve(spec: ExperimentSpec, li: int, ci: int):
    seed = derive_seed(spec.master_seed, li, ci)
    bspec = trajgen.random_bezier_spec(spec.order_range, spec.box, spec.curve_lengths[li], seed)
    return seed, trajgen.sample_bezier(bspec)


def make_cases(spec: ExperimentSpec, li: int, ci: int, prefix: Optional[int] = None):
    """All (ratio, run) cases of one curve."""
    prefix = spec.prefix if prefix is None else prefix
    seed, clean = make_curve(spec, li, ci)
    cases = []
    for run in range(spec.runs):
        noise = trajgen.NoiseSpec(spec.noise_sigma, derive_seed(spec.master_seed, li, ci, 1, run))
        observed = trajgen.add_noise(clean, noise)
        for ri, ratio in enumerate(spec.loss_ratios):
            mspec = trajgen.MaskSpec(ratio, derive_seed(spec.master_seed, li, ci, 2, ri, run), prefix, spec.mask_policy)
            cases.append(Case(li, ci, ri, run, seed, clean, observed, trajgen.make_mask(observed, mspec)))
    return cases


def scored_gaps(t: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Masked indices strictly between the first and last observed sample."""
    known = t[~np.isin(t, mask)]
    return mask[(mask > known[0]) & (mask < known[-1])]


def interpolate_gaps(method, observed: trajgen.Trajectory, mask, gaps, config: InterpConfig) -> np.ndarray:
    """Estimate ``gaps`` of ``observed`` with ``mask`` hidden; returns ``(len(gaps), 2)``."""
    keep = ~np.isin(observed.t, mask)
    t = observed.t[keep].astype(float)
    q = np.asarray(gaps, dtype=float)
    return np.column_stack(
        [interpolate_with(method, KnotSeries(t, observed.xy[keep, d]), q, config) for d in (0, 1)]
    )


def _score(case: Case, method: str, config: InterpConfig, truth: str):
    gaps = scored_gaps(case.observed.t, case.mask)
    t0 = time.perf_counter()
    est = interpolate_gaps(method, case.observed, case.mask, gaps, config)
    elapsed = (time.perf_counter() - t0) * 1e3
    ref = case.clean if truth == "clean" else case.observed
    pos = np.searchsorted(ref.t, gaps)
    return metrics.compute_errors(ref.xy[pos], est, gaps), elapsed


def _record(spec, case_group, method, reports, elapsed, failure=None):
    first = case_group[0]
    ratio = spec.loss_ratios[first.ratio_index]
    common = dict(
        method=method,
        n_points=len(first.clean),
        loss_ratio=ratio,
        k=spec.k,
        wall_time_ms=elapsed,
        curve_seed=first.curve_seed,
        length_index=first.length_index,
        curve_index=first.curve_index,
    )
    if failure is not None:
        return BenchRecord(error_report=None, status="failed", message=failure, **common)
    return BenchRecord(
        error_report=ErrorReport.concat(reports),
        run_means=tuple(r.mean_euclidean for r in reports),
        **common,
    )


def _groups(cases):
    # (ratio_index) -> cases over runs, in run order.
    out = {}
    for c in cases:
        out.setdefault(c.ratio_index, []).append(c)
    return [out[ri] for ri in sorted(out)]


def _evaluate(spec: ExperimentSpec, cases, methods, config):
    records = []
    for group in _groups(cases):
        for method in methods:
            reports, elapsed = [], 0.0
            try:
                for case in group:
                    report, dt = _score(case, method, config, spec.truth)
                    reports.append(report)
                    elapsed += dt
            except (InterpolationError, ValueError, np.linalg.LinAlgError) as exc:
                logger.warning("cell failed: %s L%d C%d ratio %s: %s", method, group[0].length_index,
                               group[0].curve_index, spec.loss_ratios[group[0].ratio_index], exc)
                records.append(_record(spec, group, method, None, elapsed, f"{type(exc).__name__}: {exc}"))
                continue
            records.append(_record(spec, group, method, reports, elapsed))
    return records


def thread_count(threads: Optional[int] = None) -> int:
    if threads is None:
        raw = os.environ.get(THREADS_ENV, "1")
        try:
            threads = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, threads)


def _curve_keys(spec):
    return [(li, ci) for li in range(len(spec.curve_lengths)) for ci in range(spec.curves_per_length)]


def run_accuracy_sweep(spec: ExperimentSpec, threads: Optional[int] = None, prefix: Optional[int] = None):
    """Interpolate every (length, curve, ratio, method) cell and score it.

    Records come back ordered by (length, curve, ratio, method) whatever the
    thread count.  A method that raises on a cell yields a failed record.
    """
    config = spec.interp_config
    methods = spec.methods

    def task(key):
        li, ci = key
        return _evaluate(spec, make_cases(spec, li, ci, prefix), methods, config)

    keys = _curve_keys(spec)
    n = thread_count(threads)
    if n == 1:
        chunks = [task(k) for k in keys]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            chunks = list(pool.map(task, keys))
    return [rec for chunk in chunks for rec in chunk]


def run_timing(spec: ExperimentSpec):
    """Median wall time of the interpolation calls per cell, serially.

    Cases are generated first and excluded from timing.  One warm-up pass
    is discarded, then ``spec.repetitions`` timed passes follow.
    """
    config = spec.interp_config
    cases = [c for li, ci in _curve_keys(spec) for c in make_cases(spec, li, ci)]
    groups = _groups_by_cell(cases)
    records = []
    for method in spec.methods:
        timings = [[] for _ in groups]
        reports = [None] * len(groups)
        failure = [None] * len(groups)
        for rep in range(spec.repetitions + 1):
            for gi, group in enumerate(groups):
                if failure[gi]:
                    continue
                total, got = 0.0, []
                try:
                    for case in group:
                        report, dt = _score(case, method, config, spec.truth)
                        got.append(report)
                        total += dt
                except (InterpolationError, ValueError, np.linalg.LinAlgError) as exc:
                    failure[gi] = f"{type(exc).__name__}: {exc}"
                    continue
                if rep > 0:
                    timings[gi].append(total)
                reports[gi] = got
        for gi, group in enumerate(groups):
            if failure[gi]:
                records.append(_record(spec, group, method, None, 0.0, failure[gi]))
                continue
            rec = _record(spec, group, method, reports[gi], statistics.median(timings[gi]))
            rec.rep_times_ms = tuple(timings[gi])
            records.append(rec)
    order = {m: i for i, m in enumerate(spec.methods)}
    records.sort(key=lambda r: (r.length_index, r.curve_index, spec.loss_ratios.index(r.loss_ratio), order[r.method]))
    return records


def _groups_by_cell(cases):
    out = {}
    for c in cases:
        out.setdefault((c.length_index, c.curve_index, c.ratio_index), []).append(c)
    return [out[key] for key in sorted(out)]


def run_k_ablation(spec: ExperimentSpec, k_values: Optional[Sequence[int]] = None, methods=(MethodId.LLI.value,),
                   threads: Optional[int] = None):
    """Accuracy sweep per ``k`` on one shared corpus.

    The protected prefix is ``max(k_values) + 1`` for every ``k`` so that all
    groups see identical curves, noise and masks.
    """
    k_values = tuple(spec.k_values if k_values is None else k_values)
    if any(k < 2 for k in k_values):
        raise ValueError("every k must be >= 2")
    prefix = spec.prefix if spec.protect_prefix is not None else max(k_values) + 1
    records = []
    for k in k_values:
        sub = replace(spec, k=k, methods=tuple(methods))
        records.extend(run_accuracy_sweep(sub, threads=threads, prefix=prefix))
    return records


def metrics_rows(records):
    rows = []
    for r in records:
        if r.ok:
            rep = r.error_report
            rows.append((r.method, r.curve_seed, r.n_points, r.loss_ratio, rep.mean_euclidean, rep.mse, rep.mean_x_error, r.std))
        else:
            rows.append((r.method, r.curve_seed, r.n_points, r.loss_ratio, None, None, None, None))
    return rows


def cdf_curves(records) -> dict:
    """Pooled empirical CDF of every method's errors, in method order of appearance."""
    pooled = {}
    for r in records:
        if r.ok and r.error_report.count:
            pooled.setdefault(r.method, []).append(r.error_report.euclidean)
    return {m: metrics.empirical_cdf(np.concatenate(v)) for m, v in pooled.items()}


def mean_error_by(records, *fields):
    """Mean Euclidean error pooled over all points, grouped by record attributes."""
    sums = {}
    for r in records:
        if not r.ok:
            continue
        key = tuple(getattr(r, f) for f in fields)
        s, n = sums.get(key, (0.0, 0))
        sums[key] = (s + float(r.error_report.euclidean.sum()), n + r.error_report.count)
    return {k: (s / n if n else float("nan")) for k, (s, n) in sums.items()}


def timing_rows(records):
    """``(method, k, n_points, wall_time_ms)`` per method and k.

    ``n_points`` counts interpolated points; the time is the median over
    repetitions of the summed per-cell times.
    """
    groups = {}
    for r in records:
        if r.ok:
            groups.setdefault((r.method, r.k), []).append(r)
    rows = []
    for (method, k), recs in groups.items():
        totals = np.sum([rec.rep_times_ms for rec in recs], axis=0)
        rows.append((method, k, sum(rec.error_report.count for rec in recs), float(np.median(totals))))
    return rows


def write_timing_csv(path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(TIMING_HEADER + "\n")
        for method, k, n_points, ms in rows:
            fh.write(f"{method},{int(k)},{int(n_points)},{ms:.3f}\n")


def summary_table(records, ratios=None) -> str:
    """Mean Euclidean error per method (rows) and loss ratio (columns)."""
    by = mean_error_by(records, "method", "loss_ratio")
    overall = mean_error_by(records, "method")
    failed = {}
    for r in records:
        if not r.ok:
            failed[r.method] = failed.get(r.method, 0) + 1
    methods = list(dict.fromkeys(r.method for r in records))
    ratios = sorted({r.loss_ratio for r in records}) if ratios is None else ratios
    head = f"{'method':<10}" + "".join(f"{'r=' + format(q, 'g'):>10}" for q in ratios) + f"{'all':>10}{'failed':>8}"
    lines = [head, "-" * len(head)]
    for m in methods:
        cells = "".join(f"{by.get((m, q), float('nan')):>10.3f}" for q in ratios)
        lines.append(f"{m:<10}{cells}{overall.get((m,), float('nan')):>10.3f}{failed.get(m, 0):>8d}")
    return "\n".join(lines)
