"""Power spectral densities, log-binned densities and power-law fits.

The PSD is a Welch estimate (Hann window, one-sided, density scaling) so that
``sum(power) * df`` approximates the variance of the series. Exponents are
fitted by least squares in log-log coordinates; a Hill estimator is provided
as an independent cross-check of tail exponents.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import signal, stats

from .trajectory import Occupation, Trajectory

__all__ = [
    "SpectralDensity",
    "EmpiricalPdf",
    "PowerLawFit",
    "FracturedFit",
    "PsdAccumulator",
    "PdfAccumulator",
    "psd",
    "empirical_pdf",
    "pdf_from_occupation",
    "fit_powerlaw",
    "fit_psd",
    "default_psd_range",
    "hill_estimator",
    "fit_fractured",
    "log_edges",
]


# ---------------------------------------------------------------------------
# containers
# ---------------------------------------------------------------------------


@dataclass
class SpectralDensity:
    freqs: np.ndarray
    power: np.ndarray
    meta: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.power = np.asarray(self.power, dtype=float)
        if self.freqs.shape != self.power.shape or self.freqs.ndim != 1:
            raise ValueError("freqs and power must be 1-D of equal length")
        if self.freqs.size and (self.freqs[0] <= 0 or np.any(np.diff(self.freqs) <= 0)):
            raise ValueError("freqs must be positive and strictly ascending")
        if np.any(self.power < 0):
            raise ValueError("power must be non-negative")

    def log_binned(self, bins_per_decade: int = 20) -> "SpectralDensity":
        """Average power in log-spaced frequency bins; bin frequency is the geometric mean."""
        lf = np.log10(self.freqs)
        idx = np.floor((lf - lf[0]) * bins_per_decade + 1e-9).astype(np.int64)
        counts = np.bincount(idx)
        keep = counts > 0
        f = 10 ** (np.bincount(idx, weights=lf)[keep] / counts[keep])
        p = np.bincount(idx, weights=self.power)[keep] / counts[keep]
        return SpectralDensity(f, p, {**self.meta, "log_bins_per_decade": bins_per_decade})

    def restrict(self, fmin: float, fmax: float) -> "SpectralDensity":
        m = (self.freqs >= fmin) & (self.freqs <= fmax)
        return SpectralDensity(self.freqs[m], self.power[m], dict(self.meta))

    def to_csv(self, path) -> None:
        _write_table(path, ("freq", "power"), np.column_stack([self.freqs, self.power]), self.meta)


@dataclass
class EmpiricalPdf:
    """Binned density; ``sum(density * widths) == 1`` over the bins."""

    edges: np.ndarray
    density: np.ndarray
    counts: np.ndarray
    meta: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        self.density = np.asarray(self.density, dtype=float)
        self.counts = np.asarray(self.counts)
        if self.edges.shape[0] != self.density.shape[0] + 1:
            raise ValueError("need len(edges) == len(density) + 1")
        if np.any(self.density < 0):
            raise ValueError("density must be non-negative")

    @property
    def centers(self) -> np.ndarray:
        # geometric centres for log bins, arithmetic otherwise
        e = self.edges
        if e[0] > 0 and self.meta.get("log", True):
            return np.sqrt(e[1:] * e[:-1])
        return (e[1:] + e[:-1]) / 2

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def mass(self) -> float:
        return float(np.sum(self.density * self.widths))

    def quantile(self, q: float) -> float:
        """Quantile of the binned distribution, interpolating within the bin."""
        if not 0 <= q <= 1:
            raise ValueError("q must be in [0, 1]")
        cdf = np.concatenate([[0.0], np.cumsum(self.density * self.widths)])
        cdf /= cdf[-1]
        j = int(np.searchsorted(cdf, q, side="left"))
        j = min(max(j, 1), len(cdf) - 1)
        lo, hi = cdf[j - 1], cdf[j]
        frac = 0.0 if hi == lo else (q - lo) / (hi - lo)
        a, b = self.edges[j - 1], self.edges[j]
        if a > 0 and self.meta.get("log", True):
            return float(a * (b / a) ** frac)
        return float(a + frac * (b - a))

    def to_csv(self, path) -> None:
        _write_table(path, ("x", "density"), np.column_stack([self.centers, self.density]), self.meta)


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    stderr: float
    fit_range: Tuple[float, float]
    r2: float
    n_points: int
    intercept: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FracturedFit:
    """Two-segment fit; ``beta1`` belongs to the high-frequency segment."""

    beta1: float
    beta2: float
    f_break: float
    stderr1: float
    stderr2: float
    residual: float
    single_residual: float
    single_beta: float
    fit_range: Tuple[float, float]

    @property
    def improvement(self) -> float:
        """Fractional reduction of the squared residual relative to one slope."""
        if self.single_residual == 0:
            return 0.0
        return 1.0 - self.residual / self.single_residual

    def to_json(self) -> str:
        keys = ("beta1", "beta2", "f_break", "stderr1", "stderr2")
        return json.dumps({k: getattr(self, k) for k in keys}, sort_keys=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["improvement"] = self.improvement
        return d


def _write_table(path, names: Sequence[str], data: np.ndarray, meta: Dict) -> None:
    lines = [f"# {k}: {json.dumps(v, sort_keys=True)}" for k, v in meta.items()]
    lines.append(",".join(names))
    lines += [",".join(f"{v:.17g}" for v in row) for row in data]
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


# ---------------------------------------------------------------------------
# PSD
# ---------------------------------------------------------------------------


def _series(series: Union[Trajectory, np.ndarray], dt: Optional[float]) -> Tuple[np.ndarray, float]:
    if isinstance(series, Trajectory):
        x = np.asarray(series.values, dtype=float)
        if x.ndim != 1:
            raise ValueError("psd needs a scalar series")
        return x, series.dt
    if dt is None:
        raise ValueError("dt is required for raw arrays")
    return np.asarray(series, dtype=float), float(dt)


def _check_segment(segment_len: int, overlap: float) -> int:
    if segment_len < 8 or segment_len & (segment_len - 1):
        raise ValueError("segment_len must be a power of two >= 8")
    if not 0 <= overlap < 1:
        raise ValueError("overlap must be in [0, 1)")
    return int(round(segment_len * overlap))


def psd(
    series: Union[Trajectory, np.ndarray],
    segment_len: int = 2**14,
    overlap: float = 0.5,
    dt: Optional[float] = None,
) -> SpectralDensity:
    """Welch PSD with Hann windows; the zero frequency is dropped."""
    x, dt = _series(series, dt)
    noverlap = _check_segment(segment_len, overlap)
    if len(x) < 2 * segment_len:
        raise ValueError(f"series of length {len(x)} shorter than 2*segment_len={2 * segment_len}")
    f, p = signal.welch(x, fs=1.0 / dt, window="hann", nperseg=segment_len, noverlap=noverlap,
                        detrend="constant", scaling="density")
    n_seg = (len(x) - segment_len) // (segment_len - noverlap) + 1
    meta = {"segment_len": segment_len, "segments": int(n_seg), "window": "hann", "overlap": overlap, "dt": dt}
    return SpectralDensity(f[1:], p[1:], meta)


class PsdAccumulator:
    """Welch averaging over a stream of chunks.

    Segments straddling chunk boundaries are handled by carrying the unused
    tail forward, so the result equals :func:`psd` on the concatenated series.
    """

    def __init__(self, dt: float, segment_len: int = 2**14, overlap: float = 0.5):
        self.dt = dt
        self.segment_len = segment_len
        self.overlap = overlap
        self._noverlap = _check_segment(segment_len, overlap)
        self._step = segment_len - self._noverlap
        self._buf = np.empty(0)
        self._sum = None
        self.segments = 0

    def add(self, chunk: np.ndarray) -> None:
        x = np.concatenate([self._buf, np.asarray(chunk, dtype=float)])
        if len(x) < self.segment_len:
            self._buf = x
            return
        n_seg = (len(x) - self.segment_len) // self._step + 1
        used = (n_seg - 1) * self._step + self.segment_len
        f, p = signal.welch(x[:used], fs=1.0 / self.dt, window="hann", nperseg=self.segment_len,
                            noverlap=self._noverlap, detrend="constant", scaling="density")
        self.freqs = f
        self._sum = p * n_seg if self._sum is None else self._sum + p * n_seg
        self.segments += n_seg
        self._buf = x[n_seg * self._step:]

    def break_stream(self) -> None:
        """Discard the carried tail so the next chunk starts a fresh segment."""
        self._buf = np.empty(0)

    def result(self) -> SpectralDensity:
        if self._sum is None or self.segments < 2:
            raise ValueError("fewer than two complete segments accumulated")
        meta = {"segment_len": self.segment_len, "segments": self.segments, "window": "hann",
                "overlap": self.overlap, "dt": self.dt}
        return SpectralDensity(self.freqs[1:], self._sum[1:] / self.segments, meta)


def default_psd_range(freqs: np.ndarray) -> Tuple[float, float]:
    """Drop the lowest half decade and the top quarter decade."""
    return float(freqs[0] * 10**0.5), float(freqs[-1] / 10**0.25)


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------


def log_edges(xmin: float, xmax: float, bins_per_decade: int) -> np.ndarray:
    lo = math.floor(math.log10(xmin) * bins_per_decade) / bins_per_decade
    hi = math.ceil(math.log10(xmax) * bins_per_decade) / bins_per_decade
    if hi <= lo:
        hi = lo + 1.0 / bins_per_decade
    n = int(round((hi - lo) * bins_per_decade))
    return np.logspace(lo, hi, n + 1)


def _pdf(edges: np.ndarray, counts: np.ndarray, meta: Dict) -> EmpiricalPdf:
    total = counts.sum()
    if total <= 0:
        raise ValueError("no mass in the histogram")
    return EmpiricalPdf(edges, counts / (total * np.diff(edges)), counts, meta)


def empirical_pdf(
    samples: np.ndarray,
    bins_per_decade: int = 10,
    weights: Optional[np.ndarray] = None,
    min_samples: int = 10_000,
) -> EmpiricalPdf:
    """Log-binned density ``count / (n * width)`` of positive samples."""
    x = np.asarray(samples, dtype=float).ravel()
    if len(x) < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {len(x)}")
    if np.any(~(x > 0)):
        raise ValueError("samples must be positive (take absolute values upstream)")
    edges = log_edges(x.min(), x.max(), bins_per_decade)
    counts, _ = np.histogram(x, bins=edges, weights=weights)
    return _pdf(edges, counts, {"bins_per_decade": bins_per_decade, "n": int(len(x)), "log": True})


def pdf_from_occupation(occ: Occupation) -> EmpiricalPdf:
    """Density from a time-weighted occupation histogram with known edges."""
    if occ.edges is None:
        raise ValueError("occupation has no bin edges")
    log = bool(occ.edges[0] > 0 and np.allclose(np.diff(np.log(occ.edges)), np.log(occ.edges[1] / occ.edges[0])))
    return _pdf(np.asarray(occ.edges), np.asarray(occ.weights, dtype=float), {"time_weighted": True, "log": log})


class PdfAccumulator:
    """Fixed-edge histogram filled chunk by chunk; mergeable across runs."""

    def __init__(self, edges: np.ndarray):
        self.edges = np.asarray(edges, dtype=float)
        self.counts = np.zeros(len(self.edges) - 1)
        self.n = 0
        self.below = 0
        self.above = 0

    def add(self, samples: np.ndarray) -> None:
        x = np.asarray(samples, dtype=float).ravel()
        self.counts += np.histogram(x, bins=self.edges)[0]
        self.n += len(x)
        self.below += int(np.sum(x < self.edges[0]))
        self.above += int(np.sum(x > self.edges[-1]))

    def merge(self, other: "PdfAccumulator") -> "PdfAccumulator":
        if not np.array_equal(self.edges, other.edges):
            raise ValueError("cannot merge histograms with different edges")
        out = PdfAccumulator(self.edges)
        out.counts = self.counts + other.counts
        out.n = self.n + other.n
        out.below = self.below + other.below
        out.above = self.above + other.above
        return out

    def result(self) -> EmpiricalPdf:
        return _pdf(self.edges, self.counts, {"n": self.n, "below": self.below, "above": self.above, "log": True})


# ---------------------------------------------------------------------------
# fits
# ---------------------------------------------------------------------------


def fit_powerlaw(x: np.ndarray, y: np.ndarray, fit_range: Optional[Tuple[float, float]] = None) -> PowerLawFit:
    """Least-squares line through ``(log x, log y)``; exponent is minus the slope.

    Points with ``y <= 0`` are ignored.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if fit_range is None:
        fit_range = (float(x.min()), float(x.max()))
    lo, hi = fit_range
    if not lo < hi:
        raise ValueError(f"degenerate fit range {fit_range}")
    m = (x >= lo) & (x <= hi) & (y > 0) & (x > 0)
    if m.sum() < 5:
        raise ValueError(f"need at least 5 positive points in {fit_range}, got {int(m.sum())}")
    lx, ly = np.log(x[m]), np.log(y[m])
    if np.ptp(lx) == 0:
        raise ValueError("all x values identical")
    res = stats.linregress(lx, ly)
    r2 = float(res.rvalue**2) if np.ptp(ly) > 0 else 1.0
    return PowerLawFit(float(-res.slope), float(res.stderr), (float(lo), float(hi)), r2, int(m.sum()),
                       float(res.intercept))


def fit_psd(spec: SpectralDensity, fit_range: Optional[Tuple[float, float]] = None,
            bins_per_decade: Optional[int] = 20) -> PowerLawFit:
    """Spectral exponent beta; default range drops the extreme frequency ends."""
    rng = fit_range or default_psd_range(spec.freqs)
    s = spec.log_binned(bins_per_decade) if bins_per_decade else spec
    return fit_powerlaw(s.freqs, s.power, rng)


def hill_estimator(samples: np.ndarray, x_min: float) -> Tuple[float, float]:
    """Maximum-likelihood density exponent for ``x >= x_min``: ``(lambda, stderr)``."""
    x = np.asarray(samples, dtype=float)
    tail = x[x >= x_min]
    n = len(tail)
    if n < 2:
        raise ValueError("fewer than two samples above x_min")
    lam = 1.0 + n / np.sum(np.log(tail / x_min))
    return float(lam), float((lam - 1.0) / math.sqrt(n))


def _ssr(lx: np.ndarray, ly: np.ndarray) -> Tuple[float, float, float]:
    res = stats.linregress(lx, ly)
    r = ly - (res.intercept + res.slope * lx)
    return float(r @ r), float(-res.slope), float(res.stderr)


def fit_fractured(
    spec: SpectralDensity,
    search_grid: Optional[np.ndarray] = None,
    fit_range: Optional[Tuple[float, float]] = None,
    min_span_decades: float = 0.5,
) -> FracturedFit:
    """Grid search for the break frequency between two independent log-log fits.

    The low-frequency segment is ``f < f_break`` and gives ``beta2``; the
    high-frequency segment ``f >= f_break`` gives ``beta1``. Each must span at
    least ``min_span_decades``. The chosen break minimises the total squared
    residual; the single-slope residual over the same points is kept for
    model comparison.
    """
    f, p = spec.freqs, spec.power
    if fit_range is not None:
        m = (f >= fit_range[0]) & (f <= fit_range[1])
        f, p = f[m], p[m]
    m = p > 0
    f, p = f[m], p[m]
    if len(f) < 10 or math.log10(f[-1] / f[0]) < 2 * min_span_decades:
        raise ValueError("insufficient frequency span for a two-segment fit")
    if math.log10(f[-1] / f[0]) < 2.0:
        raise ValueError("need at least two decades of frequency coverage")
    lx, ly = np.log(f), np.log(p)
    if search_grid is None:
        search_grid = np.logspace(math.log10(f[0]), math.log10(f[-1]), 200)
    best = None
    for fb in np.asarray(search_grid, dtype=float):
        lo = f < fb
        hi = ~lo
        if lo.sum() < 3 or hi.sum() < 3:
            continue
        if math.log10(f[lo][-1] / f[0]) < min_span_decades or math.log10(f[-1] / f[hi][0]) < min_span_decades:
            continue
        s2, b2, e2 = _ssr(lx[lo], ly[lo])
        s1, b1, e1 = _ssr(lx[hi], ly[hi])
        if best is None or s1 + s2 < best[0]:
            best = (s1 + s2, b1, b2, float(fb), e1, e2)
    if best is None:
        raise ValueError("no admissible break frequency in the search grid")
    single, beta, _ = _ssr(lx, ly)
    total, b1, b2, fb, e1, e2 = best
    return FracturedFit(b1, b2, fb, e1, e2, total, single, beta, (float(f[0]), float(f[-1])))
