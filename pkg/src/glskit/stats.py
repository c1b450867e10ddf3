"""Mean and standard-error summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TooFewValues


@dataclass(frozen=True)
class SummaryStat:
    mean: float
    stderr: float
    n: int

    def band(self, width: float = 3.0) -> tuple[float, float]:
        return self.mean - width * self.stderr, self.mean + width * self.stderr


def summarize(values) -> SummaryStat:
    """Mean and ``std / sqrt(n)`` with the ``n - 1`` sample standard deviation."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size < 2:
        raise TooFewValues(f"need at least 2 values, got {v.size}")
    return SummaryStat(float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)), int(v.size))


def binomial_stderr(rate, n: int):
    """``sqrt(p (1 - p) / n)``; works elementwise on arrays."""
    rate = np.asarray(rate, dtype=np.float64)
    out = np.sqrt(np.clip(rate * (1.0 - rate), 0.0, None) / n)
    return float(out) if out.ndim == 0 else out
