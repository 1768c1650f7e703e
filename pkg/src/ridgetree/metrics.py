"""Skeleton-vs-truth matching metrics.

Both skeletons are discretized to ~unit-length segments first, then each
side is matched against the other by nearest neighbor within a distance
bound: precision is the matched fraction of predicted points, recall the
matched fraction of truth points, F1 their harmonic mean. Each side's
matched count uses its own nearest-neighbor test, which makes
precision(A, B) == recall(B, A) hold exactly under a shared bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .tree import SkeletonTree

__all__ = [
    "discretize",
    "MatchReport",
    "match_metrics",
    "f1_vs_bound_sweep",
]


def discretize(source, max_segment: float = 1.0) -> np.ndarray:
    """Resample a skeleton into points with segments at most ``max_segment``.

    ``source`` may be a SkeletonTree, a list of them, or a (points, edges)
    pair of arrays. Edges no longer than ``max_segment`` keep their
    endpoints only; longer edges gain ceil(len/max_segment) - 1 evenly
    spaced interior points, preserving total polyline length.
    """
    if max_segment <= 0:
        raise ValueError("max_segment must be positive")
    if isinstance(source, SkeletonTree):
        trees = [source]
    elif isinstance(source, (list, tuple)) and source and isinstance(source[0], SkeletonTree):
        trees = list(source)
    else:
        points, edges = source
        return _discretize_edges(
            np.asarray(points, dtype=np.float64),
            np.asarray(edges, dtype=np.int64),
            max_segment,
        )
    chunks = []
    for tree in trees:
        v = np.flatnonzero(tree.parent >= 0)
        edges = np.stack([tree.parent[v], v], axis=1)
        chunks.append(_discretize_edges(tree.positions, edges, max_segment))
    return np.concatenate(chunks, axis=0)


def _discretize_edges(points, edges, max_segment):
    out = [points]
    for a, b in edges:
        pa, pb = points[a], points[b]
        length = float(np.linalg.norm(pb - pa))
        n = math.ceil(length / max_segment)
        if n > 1:
            t = (np.arange(1, n, dtype=np.float64) / n)[:, None]
            out.append(pa[None, :] + t * (pb - pa)[None, :])
    return np.concatenate(out, axis=0)


@dataclass
class MatchReport:
    """Point-match counts and derived scores at one distance bound.

    tp/fp count predicted points (matched/unmatched against truth);
    matched_truth/fn count truth points (matched/unmatched against the
    prediction). precision = tp / (tp + fp) and recall =
    matched_truth / (matched_truth + fn).
    """

    tp: int
    fp: int
    matched_truth: int
    fn: int
    precision: float
    recall: float
    f1: float
    bound: float

    def format_lines(self) -> list[str]:
        return [
            f"distance bound (µm): {self.bound:g}",
            f"TP {self.tp}  FP {self.fp}  FN {self.fn}",
            f"precision {self.precision:.6f}",
            f"recall    {self.recall:.6f}",
            f"F1        {self.f1:.6f}",
        ]


def _nearest_distances(query: np.ndarray, target: np.ndarray) -> np.ndarray:
    d, _ = cKDTree(target).query(query, k=1, workers=-1)
    return d


def _report_from_distances(d_pred, d_truth, bound) -> MatchReport:
    tp = int((d_pred <= bound).sum())
    fp = len(d_pred) - tp
    matched_truth = int((d_truth <= bound).sum())
    fn = len(d_truth) - matched_truth
    precision = tp / (tp + fp)
    recall = matched_truth / (matched_truth + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return MatchReport(
        tp=tp,
        fp=fp,
        matched_truth=matched_truth,
        fn=fn,
        precision=precision,
        recall=recall,
        f1=f1,
        bound=float(bound),
    )


def match_metrics(predicted: np.ndarray, truth: np.ndarray, bound: float = 4.0) -> MatchReport:
    """Match two discretized point sets at the given distance bound (µm)."""
    predicted = np.asarray(predicted, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if len(truth) == 0:
        raise ValueError("empty truth point set: recall undefined")
    if len(predicted) == 0:
        raise ValueError("empty predicted point set: precision undefined")
    if bound < 0:
        raise ValueError("bound must be >= 0")
    d_pred = _nearest_distances(predicted, truth)
    d_truth = _nearest_distances(truth, predicted)
    return _report_from_distances(d_pred, d_truth, bound)


def f1_vs_bound_sweep(
    predicted: np.ndarray, truth: np.ndarray, bounds
) -> list[MatchReport]:
    """Match reports over ascending distance bounds (F1 is non-decreasing)."""
    bounds = [float(b) for b in bounds]
    if any(b2 < b1 for b1, b2 in zip(bounds, bounds[1:])):
        raise ValueError("bounds must be ascending")
    predicted = np.asarray(predicted, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if len(truth) == 0 or len(predicted) == 0:
        raise ValueError("empty point set")
    d_pred = _nearest_distances(predicted, truth)
    d_truth = _nearest_distances(truth, predicted)
    return [_report_from_distances(d_pred, d_truth, b) for b in bounds]
