"""Distances between (possibly weighted, possibly discrete) distributions."""

from __future__ import annotations

from typing import Optional

import numpy as np

__all__ = ["ks_distance", "tv_distance"]


def _cdf_at(points: np.ndarray, x: np.ndarray, w: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    xs = x[order]
    cw = np.concatenate([[0.0], np.cumsum(w[order])])
    cw /= cw[-1]
    return cw[np.searchsorted(xs, points, side="right")]


def ks_distance(
    x1: np.ndarray,
    x2: np.ndarray,
    w1: Optional[np.ndarray] = None,
    w2: Optional[np.ndarray] = None,
) -> float:
    """Supremum distance between two weighted empirical CDFs.

    Either side may be a discrete pmf (support points plus weights). Both CDFs
    are right-continuous step functions, so evaluating at every support point
    covers every interval between jumps.
    """
    x1 = np.asarray(x1, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    w1 = np.ones_like(x1) if w1 is None else np.asarray(w1, dtype=float).ravel()
    w2 = np.ones_like(x2) if w2 is None else np.asarray(w2, dtype=float).ravel()
    if w1.sum() <= 0 or w2.sum() <= 0:
        raise ValueError("both distributions need positive total weight")
    pts = np.unique(np.concatenate([x1, x2]))
    return float(np.max(np.abs(_cdf_at(pts, x1, w1) - _cdf_at(pts, x2, w2))))


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Total variation between pmfs on a common support (each normalised first)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return 0.5 * float(np.abs(p / p.sum() - q / q.sum()).sum())
