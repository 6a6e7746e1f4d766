"""Repetition statistics: population-mean estimate with a Student-t
confidence interval."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Sequence

from scipy import stats as _scipy_stats

from ..errors import BenchError


@dataclass(frozen=True)
class ValidationSummary:
    mean: float
    ci_low: float
    ci_high: float
    confidence: float
    n: int

    @property
    def half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2


def validate(samples: Sequence[float], confidence: float = 0.95) -> ValidationSummary:
    """mean +/- t(alpha/2, n-1) * s / sqrt(n); degenerate only when all
    samples are equal."""
    n = len(samples)
    if n < 2:
        raise BenchError(f"need at least 2 samples to validate, got {n}")
    if not 0 < confidence < 1:
        raise BenchError(f"confidence must be in (0, 1), got {confidence}")
    mean = statistics.fmean(samples)
    s = statistics.stdev(samples)
    t = _scipy_stats.t.ppf((1 + confidence) / 2, n - 1)
    half = t * s / math.sqrt(n)
    return ValidationSummary(mean, mean - half, mean + half, confidence, n)
