"""
Statistics Service
Wilcoxon signed-rank test for paired scores and binary precision/recall/F.
"""
import logging
from dataclasses import dataclass
from typing import Literal, Sequence, Tuple

import numpy as np
from scipy.stats import norm, rankdata

from ..core.errors import EvaluationError

logger = logging.getLogger(__name__)

EXACT_MAX_N = 12
WilcoxonMethod = Literal["auto", "exact", "approx"]


@dataclass
class WilcoxonResult:
    statistic: float  # sum of ranks of positive differences
    p_value: float
    n: int  # pairs left after dropping zero differences
    method: str


def _exact_p(ranks: np.ndarray, w_plus: float) -> float:
    n = len(ranks)
    signs = (np.arange(2 ** n)[:, None] >> np.arange(n)) & 1
    totals = signs @ ranks
    tol = 1e-9
    lower = np.mean(totals <= w_plus + tol)
    upper = np.mean(totals >= w_plus - tol)
    return float(min(1.0, 2.0 * min(lower, upper)))


def _normal_p(ranks: np.ndarray, abs_diff: np.ndarray, w_plus: float) -> float:
    n = len(ranks)
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(abs_diff, return_counts=True)
    tie_term = float(np.sum(tie_counts ** 3 - tie_counts)) / 48.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term
    if var <= 0:
        return 1.0
    z = max(abs(w_plus - mean) - 0.5, 0.0) / np.sqrt(var)
    return float(min(1.0, 2.0 * norm.sf(z)))


def wilcoxon_test(a: Sequence[float], b: Sequence[float], method: WilcoxonMethod = "auto") -> WilcoxonResult:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise EvaluationError(f"paired samples must have equal lengths ({a.shape} vs {b.shape})")

    diff = a - b
    diff = diff[diff != 0]
    n = len(diff)
    if n == 0:
        return WilcoxonResult(statistic=0.0, p_value=1.0, n=0, method="degenerate")

    abs_diff = np.abs(diff)
    ranks = rankdata(abs_diff)
    w_plus = float(np.sum(ranks[diff > 0]))

    use_exact = method == "exact" or (method == "auto" and n <= EXACT_MAX_N)
    if use_exact:
        if n > 20:
            raise EvaluationError(f"exact Wilcoxon enumeration refused for n={n}")
        return WilcoxonResult(w_plus, _exact_p(ranks, w_plus), n, "exact")
    return WilcoxonResult(w_plus, _normal_p(ranks, abs_diff, w_plus), n, "approx")


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float], method: WilcoxonMethod = "auto") -> float:
    """Two-sided p-value; exact for up to 12 non-zero differences, normal approximation above."""
    return wilcoxon_test(a, b, method).p_value


def prf_weighted(pred: Sequence[int], truth: Sequence[int], average: str = "positive") -> Tuple[float, float, float]:
    """
    (precision, recall, F). F is always the support-weighted mean of the
    per-class F scores; precision and recall are those of class 1, or
    support-weighted too when average="weighted".
    """
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape or len(truth) == 0:
        raise EvaluationError(f"predictions {pred.shape} and truth {truth.shape} must be equal-length and non-empty")
    if average not in ("positive", "weighted"):
        raise EvaluationError(f"unknown average mode {average!r}")

    n = len(truth)
    per_class = {}
    for c in (0, 1):
        tp = int(np.sum((pred == c) & (truth == c)))
        predicted = int(np.sum(pred == c))
        support = int(np.sum(truth == c))
        p = tp / predicted if predicted else 0.0
        r = tp / support if support else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        per_class[c] = (p, r, f, support)

    f_weighted = sum(f * s for _, _, f, s in per_class.values()) / n
    if average == "weighted":
        p_weighted = sum(p * s for p, _, _, s in per_class.values()) / n
        r_weighted = sum(r * s for _, r, _, s in per_class.values()) / n
        return p_weighted, r_weighted, f_weighted
    p1, r1, _, _ = per_class[1]
    return p1, r1, f_weighted
