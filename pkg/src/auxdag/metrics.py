"""Edge-level evaluation of an estimated DAG against the ground truth.

All counts run over ordered node pairs (direction matters); the edit distance
charges a direction flip as a single operation rather than delete + insert.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .similarity import WeightedDag


def _coef_matrix(g) -> np.ndarray:
    if isinstance(g, WeightedDag):
        return g.b
    if hasattr(g, "b_hat"):
        return np.asarray(g.b_hat, dtype=float)
    m = np.asarray(g, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square coefficient matrix, got shape {m.shape}")
    return m


def _support(g) -> np.ndarray:
    m = _coef_matrix(g)
    s = m != 0.0
    np.fill_diagonal(s, False)
    return s


@dataclass(frozen=True)
class MetricsReport:
    tp: int
    fp: int
    fn: int
    tn: int
    tpr: float
    fdr: float
    f1: float
    mcc: float
    shd: int
    hm: float
    re_b: float | None

    def to_record(self) -> dict[str, float]:
        rec = {
            "tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
            "tpr": self.tpr, "fdr": self.fdr, "f1": self.f1, "mcc": self.mcc,
            "shd": self.shd, "hm": self.hm,
        }
        if self.re_b is not None:
            rec["re_b"] = self.re_b
        return rec


def _check_same_p(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ShapeError(f"graph size mismatch: {a.shape} vs {b.shape}")


def edge_confusion(est, truth) -> tuple[int, int, int, int]:
    """(tp, fp, fn, tn) over all ordered pairs (l, j), l != j."""
    a = _support(est)
    t = _support(truth)
    _check_same_p(a, t)
    p = a.shape[0]
    tp = int((a & t).sum())
    fp = int((a & ~t).sum())
    fn = int((~a & t).sum())
    tn = p * (p - 1) - tp - fp - fn
    return tp, fp, fn, tn


def structural_hamming(est, truth) -> tuple[int, float]:
    """Minimal insert/delete/flip count and its ordered-pair-normalized value.

    A present edge pointing the wrong way costs one flip, which replaces the
    delete + insert a naive symmetric difference would charge.
    """
    a = _support(est)
    t = _support(truth)
    _check_same_p(a, t)
    p = a.shape[0]
    mismatch = int((a ^ t).sum())
    # one flip fixes an (est i->j, truth j->i) pair; each qualifying unordered
    # pair is counted exactly once by this mask
    flips = int((a & ~t & t.T & ~a.T).sum())
    raw = mismatch - flips
    return raw, raw / (p * (p - 1))


def compute_report(b_est, truth) -> MetricsReport:
    """Full confusion-based report plus the relative coefficient error.

    re_b is absent (None) when the truth has no edges to compare against.
    """
    tp, fp, fn, tn = edge_confusion(b_est, truth)
    shd, hm = structural_hamming(b_est, truth)

    tpr = tp / (tp + fn) if tp + fn else 0.0
    fdr = fp / (tp + fp) if tp + fp else 0.0
    f1 = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = (tp * tn - fp * fn) / np.sqrt(denom) if denom else 0.0

    b_e = _coef_matrix(b_est)
    b_t = _coef_matrix(truth)
    truth_norm = np.linalg.norm(b_t)
    re_b = float(np.linalg.norm(b_e - b_t) / truth_norm) if truth_norm > 0 else None

    return MetricsReport(
        tp=tp, fp=fp, fn=fn, tn=tn,
        tpr=float(tpr), fdr=float(fdr), f1=float(f1), mcc=float(mcc),
        shd=shd, hm=float(hm), re_b=re_b,
    )
