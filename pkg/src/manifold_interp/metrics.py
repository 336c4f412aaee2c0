"""Interpolation error statistics.

The mean Euclidean error is what the benchmark reports as "average
positioning error"; the MSE is the mean squared Euclidean error.  The
empirical CDF counts errors at or below a threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np

METRICS_HEADER = "method,curve_seed,n_points,loss_ratio,mean_err,mse,mean_x_err,std"
CDF_HEADER = "method,error,probability"
TABLE_LEVELS = (0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass(frozen=True)
class ErrorReport:
    """Per-point errors (cm) with aggregates."""

    index: np.ndarray
    euclidean: np.ndarray
    x_error: np.ndarray
    y_error: np.ndarray

    @property
    def count(self) -> int:
        return int(self.euclidean.size)

    @property
    def per_point(self):
        return list(zip(self.index.tolist(), self.euclidean.tolist(), self.x_error.tolist(), self.y_error.tolist()))

    @property
    def mean_euclidean(self) -> float:
        return float(self.euclidean.mean()) if self.count else math.nan

    @property
    def mse(self) -> float:
        return float(np.mean(self.euclidean**2)) if self.count else math.nan

    @property
    def mean_x_error(self) -> float:
        return float(self.x_error.mean()) if self.count else math.nan

    @staticmethod
    def concat(reports: Iterable["ErrorReport"]) -> "ErrorReport":
        reports = list(reports)
        if not reports:
            empty = np.empty(0)
            return ErrorReport(np.empty(0, dtype=np.int64), empty, empty, empty)
        return ErrorReport(
            np.concatenate([r.index for r in reports]),
            np.concatenate([r.euclidean for r in reports]),
            np.concatenate([r.x_error for r in reports]),
            np.concatenate([r.y_error for r in reports]),
        )


def compute_errors(truth, estimates, index=None) -> ErrorReport:
    """Errors between aligned ``(N, 2)`` arrays of true and estimated points."""
    truth = np.asarray(truth, dtype=float).reshape(-1, 2)
    estimates = np.asarray(estimates, dtype=float).reshape(-1, 2)
    if truth.shape != estimates.shape:
        raise ValueError(f"length mismatch: {len(truth)} true vs {len(estimates)} estimated points")
    diff = estimates - truth
    if index is None:
        index = np.arange(len(truth))
    index = np.asarray(index, dtype=np.int64)
    if index.size != len(truth):
        raise ValueError("index length does not match the points")
    return ErrorReport(index, np.hypot(diff[:, 0], diff[:, 1]), np.abs(diff[:, 0]), np.abs(diff[:, 1]))


@dataclass(frozen=True)
class CdfCurve:
    sorted_errors: np.ndarray
    probabilities: np.ndarray

    def __call__(self, x):
        """Fraction of errors ``<= x``."""
        n = self.sorted_errors.size
        return np.searchsorted(self.sorted_errors, x, side="right") / n


def empirical_cdf(errors) -> CdfCurve:
    errors = np.sort(np.asarray(errors, dtype=float).ravel())
    if errors.size == 0:
        raise ValueError("empirical CDF of an empty error list")
    if not np.all(np.isfinite(errors)):
        raise ValueError("errors must be finite")
    probs = np.searchsorted(errors, errors, side="right") / errors.size
    return CdfCurve(errors, probs)


def cdf_quantile(curve: CdfCurve, q: float) -> float:
    """Smallest recorded error ``x`` with ``CDF(x) >= q``."""
    if not 0 < q <= 1:
        raise ValueError("q must lie in (0, 1]")
    i = int(np.searchsorted(curve.probabilities, q, side="left"))
    return float(curve.sorted_errors[min(i, curve.sorted_errors.size - 1)])


def std_across_runs(per_run_means) -> float:
    """Sample standard deviation (n - 1 denominator)."""
    values = np.asarray(per_run_means, dtype=float).ravel()
    if values.size < 2:
        raise ValueError("std_across_runs needs at least 2 runs")
    return float(values.std(ddof=1))


def fmt(value: Optional[float]) -> str:
    """CSV cell for a float: shortest round-trip repr, empty for missing."""
    if value is None:
        return ""
    return repr(float(value))


def write_metrics_csv(path, rows) -> None:
    """Write rows of ``(method, curve_seed, n_points, loss_ratio, mean_err, mse, mean_x_err, std)``."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(METRICS_HEADER + "\n")
        for method, seed, n_points, ratio, mean_err, mse, mean_x, std in rows:
            fh.write(
                f"{method},{int(seed)},{int(n_points)},{fmt(ratio)},"
                f"{fmt(mean_err)},{fmt(mse)},{fmt(mean_x)},{fmt(std)}\n"
            )


def write_cdf_csv(path, curves: Mapping[str, CdfCurve]) -> None:
    """Long-form CDF: one row per distinct error value of each method."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(CDF_HEADER + "\n")
        for method, curve in curves.items():
            errs, probs = curve.sorted_errors, curve.probabilities
            last = np.ones(errs.size, dtype=bool)
            last[:-1] = errs[1:] != errs[:-1]
            for e, p in zip(errs[last], probs[last]):
                fh.write(f"{method},{fmt(e)},{fmt(p)}\n")


def quantile_table(curves: Mapping[str, CdfCurve], levels=TABLE_LEVELS) -> dict:
    """Error value at each CDF level, per method."""
    return {m: [cdf_quantile(c, q) for q in levels] for m, c in curves.items()}
