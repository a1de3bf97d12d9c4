"""Financial observables: mood, log-price and windowed returns.

The fundamental price is normalised to 1, so ``p`` is the log-price relative
to it and follows directly from the group fractions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .trajectory import Trajectory

__all__ = ["mood", "populations_from_mood", "log_price", "price_series", "returns", "MarketSeries", "market_series"]


def mood(n_o, n_p):
    """``(n_o - n_p) / (n_o + n_p)``; works elementwise on arrays."""
    n_o = np.asarray(n_o, dtype=float)
    n_p = np.asarray(n_p, dtype=float)
    total = n_o + n_p
    if np.any(total <= 0):
        raise ValueError("mood undefined when there are no chartists (n_o + n_p = 0)")
    xi = np.clip((n_o - n_p) / total, -1.0, 1.0)
    return xi if xi.ndim else float(xi)


def populations_from_mood(n_f, xi):
    """Inverse of :func:`mood` given the fundamentalist share: returns ``(n_o, n_p)``."""
    n_f = np.asarray(n_f, dtype=float)
    xi = np.asarray(xi, dtype=float)
    c = 1.0 - n_f
    n_o = c * (1.0 + xi) / 2.0
    n_p = c - n_o
    if n_o.ndim:
        return n_o, n_p
    return float(n_o), float(n_p)


def log_price(n_f, xi, r0: float = 1.0):
    """``p = r0 (1 - n_f) xi / n_f``."""
    n_f = np.asarray(n_f, dtype=float)
    if np.any(n_f <= 0):
        raise ValueError("log-price undefined at n_f <= 0")
    p = r0 * (1.0 - n_f) * np.asarray(xi, dtype=float) / n_f
    return p if p.ndim else float(p)


def price_series(traj: Trajectory, r0: float = 1.0) -> Trajectory:
    """Log-price trajectory from an ``(n_f, xi)`` trajectory or population counts."""
    cols = traj.columns
    if cols == ("n_f", "xi"):
        p = log_price(traj.values[:, 0], traj.values[:, 1], r0)
    elif cols == ("n_f", "n_p"):
        n_f, n_p = traj.values[:, 0], traj.values[:, 1]
        p = log_price(n_f, mood(1 - n_f - n_p, n_p), r0)
    elif cols == ("X1", "X2", "X3"):
        x = traj.values.astype(float)
        n = x.sum(axis=1)
        p = log_price(x[:, 0] / n, mood(x[:, 2], x[:, 1]), r0)
    else:
        raise ValueError(f"cannot build a price from columns {cols}")
    return traj.with_values(p, ("p",), r0=r0)


def _window_steps(dt: float, window_T: float) -> int:
    k = round(window_T / dt)
    if k < 1 or not math.isclose(k * dt, window_T, rel_tol=1e-9, abs_tol=0.0):
        raise ValueError(f"window T={window_T} is not a positive multiple of sample_dt={dt}")
    return k


def returns(price: Trajectory, window_T: float) -> Trajectory:
    """``r(t) = p(t) - p(t - T)`` on the grid points where both exist."""
    k = _window_steps(price.dt, window_T)
    p = np.asarray(price.values, dtype=float)
    if p.ndim != 1:
        raise ValueError("price must be a scalar series")
    if len(p) <= k:
        raise ValueError("trajectory shorter than the return window")
    return price.with_values(p[k:] - p[:-k], ("r",), skip=k, window_T=window_T)


@dataclass
class MarketSeries:
    price: Trajectory
    returns: Trajectory
    window_T: float

    def __post_init__(self):
        k = _window_steps(self.price.dt, self.window_T)
        if len(self.returns) != len(self.price) - k:
            raise ValueError("returns length must equal price length minus the window offset")

    @property
    def abs_returns(self) -> np.ndarray:
        return np.abs(self.returns.values)

    def to_csv(self, path) -> None:
        """Columns ``t, p, r, abs_r``; ``r`` is empty for the first window."""
        k = len(self.price) - len(self.returns)
        r = np.full(len(self.price), np.nan)
        r[k:] = self.returns.values
        vals = np.column_stack([self.price.values, r, np.abs(r)])
        Trajectory(self.price.t0, self.price.dt, vals, ("p", "r", "abs_r"),
                   {**self.price.meta, "window_T": self.window_T}).to_csv(path)
        Path(path).write_text(Path(path).read_text().replace("nan", ""), newline="\n")


def market_series(traj: Trajectory, window_T: float = 1.0, r0: float = 1.0) -> MarketSeries:
    price = price_series(traj, r0)
    return MarketSeries(price, returns(price, window_T), window_T)
