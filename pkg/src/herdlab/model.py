"""Parameter bundles, transition rates, feedback kernels and exponent relations.

Everything here is a pure function of its arguments. The rate kernels are
numba-compiled so the jump simulators and the generator-matrix builders call
exactly the same code as the public Python wrappers.

State labelling for the three-state model: index 0 is the fundamentalist
group, 1 the pessimists, 2 the optimists.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, Tuple

import numba
import numpy as np

__all__ = [
    "BoundaryError",
    "TwoStateParams",
    "ThreeStateParams",
    "GeneralThreeStateParams",
    "PopulationState",
    "CHANNELS",
    "tau_two_state",
    "tau_three_state",
    "two_state_rates",
    "three_state_rates",
    "three_state_financial_rates",
    "theoretical_exponents",
    "spectral_exponent",
]

# (source, destination) for each of the six three-state channels; the order is
# shared by every rate array in the package.
CHANNELS: Tuple[Tuple[int, int], ...] = ((0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1))
_CHAN_SRC = np.array([c[0] for c in CHANNELS], dtype=np.int64)
_CHAN_DST = np.array([c[1] for c in CHANNELS], dtype=np.int64)


class BoundaryError(ValueError):
    """Feedback kernel evaluated where it diverges or vanishes."""


@dataclass(frozen=True)
class TwoStateParams:
    """Kirman herding rates with optional state-dependent event rate.

    ``X`` counts agents in state 1 (chartists in the financial reading).
    """

    sigma1: float
    sigma2: float
    h: float
    N: int
    alpha: float = 0.0
    feedback_enabled: bool = False

    def __post_init__(self):
        if self.sigma1 < 0 or self.sigma2 < 0:
            raise ValueError("sigma1 and sigma2 must be non-negative")
        if self.h < 0:
            raise ValueError("h must be non-negative")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        object.__setattr__(self, "N", int(self.N))

    @property
    def eps1(self) -> float:
        return self.sigma1 / self.h

    @property
    def eps2(self) -> float:
        return self.sigma2 / self.h

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class GeneralThreeStateParams:
    """Six-channel herding model: ``sigma[j, i]`` and ``h[i, j]`` for j -> i."""

    sigma: np.ndarray
    h: np.ndarray
    N: int

    def __post_init__(self):
        sigma = np.array(self.sigma, dtype=float)
        h = np.array(self.h, dtype=float)
        if sigma.shape != (3, 3) or h.shape != (3, 3):
            raise ValueError("sigma and h must be 3x3")
        np.fill_diagonal(sigma, 0.0)
        np.fill_diagonal(h, 0.0)
        if np.any(sigma < 0) or np.any(h < 0):
            raise ValueError("rates must be non-negative")
        if not np.allclose(h, h.T):
            raise ValueError("herding matrix must be symmetric")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        sigma.flags.writeable = False
        h.flags.writeable = False
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "N", int(self.N))

    def to_dict(self) -> dict:
        return {"sigma": self.sigma.tolist(), "h": self.h.tolist(), "N": self.N}


@dataclass(frozen=True)
class ThreeStateParams:
    """Fundamentalist / pessimist / optimist model in reduced parameters.

    Individual rates are given relative to the base herding rate ``h1``:
    ``sigma_cf = eps_cf*h1``, ``sigma_fc = eps_fc*h1`` and
    ``sigma_cc = eps_cc*H*h1``. Chartist-chartist herding runs at ``H*h1``.
    ``alpha = 0`` switches the feedback kernel off (tau == 1).
    """

    eps_cf: float
    eps_fc: float
    eps_cc: float
    H: float
    h1: float = 1.0
    alpha: float = 0.0
    r0: float = 1.0
    N: int = 1000

    def __post_init__(self):
        for name in ("eps_cf", "eps_fc", "eps_cc", "h1", "r0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.H < 1:
            raise ValueError("H must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        object.__setattr__(self, "N", int(self.N))

    @property
    def feedback_enabled(self) -> bool:
        return self.alpha > 0

    @property
    def sigma_cf(self) -> float:
        return self.eps_cf * self.h1

    @property
    def sigma_fc(self) -> float:
        return self.eps_fc * self.h1

    @property
    def sigma_cc(self) -> float:
        return self.eps_cc * self.H * self.h1

    def to_general(self) -> GeneralThreeStateParams:
        """Expand the symmetric reduction into the six-channel form."""
        s = np.zeros((3, 3))
        s[0, 1] = s[0, 2] = self.sigma_fc / 2
        s[1, 0] = s[2, 0] = self.sigma_cf
        s[1, 2] = s[2, 1] = self.sigma_cc
        h = np.zeros((3, 3))
        h[0, 1] = h[1, 0] = h[0, 2] = h[2, 0] = self.h1
        h[1, 2] = h[2, 1] = self.H * self.h1
        return GeneralThreeStateParams(sigma=s, h=h, N=self.N)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PopulationState:
    """Integer agent counts. Two-state: ``counts == (X,)``; three-state: ``(X1, X2, X3)``."""

    counts: Tuple[int, ...]
    N: int = field(default=-1)

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if len(counts) not in (1, 3):
            raise ValueError("counts must have length 1 or 3")
        N = self.N
        if len(counts) == 3:
            if N == -1:
                N = sum(counts)
            elif sum(counts) != N:
                raise ValueError(f"counts {counts} do not sum to N={N}")
        elif N == -1:
            raise ValueError("two-state populations need an explicit N")
        if N < 1 or any(c < 0 or c > N for c in counts):
            raise ValueError(f"counts {counts} outside [0, {N}]")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "N", int(N))

    @classmethod
    def two_state(cls, X: int, N: int) -> "PopulationState":
        return cls((X,), N)

    @classmethod
    def three_state(cls, X1: int, X2: int, X3: int) -> "PopulationState":
        return cls((X1, X2, X3))

    @property
    def fractions(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.N


# ---------------------------------------------------------------------------
# numba kernels (shared with the simulators and the oracle)
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _tau_two_state_nb(X, N, alpha):
    return (X / (N - X)) ** (-alpha)


@numba.njit(cache=True)
def _tau_three_state_nb(n_f, xi, alpha):
    if alpha == 0.0:
        return 1.0
    return 1.0 / (1.0 + abs((1.0 - n_f) / n_f * xi) ** alpha)


@numba.njit(cache=True)
def _two_state_rates_nb(X, N, sigma1, sigma2, h, alpha, feedback):
    tau = 1.0
    if feedback and N >= 2:
        Xc = min(max(X, 1), N - 1)
        tau = _tau_two_state_nb(Xc, N, alpha)
    up = (N - X) * (sigma1 + h * X / tau)
    down = X * (sigma2 + h * (N - X)) / tau
    return up, down


@numba.njit(cache=True)
def _general_rates_nb(x0, x1, x2, sigma, h, out):
    x = (x0, x1, x2)
    for c in range(6):
        j = _CHAN_SRC[c]
        i = _CHAN_DST[c]
        out[c] = x[j] * (sigma[j, i] + h[j, i] * x[i])


@numba.njit(cache=True)
def _financial_rates_nb(x0, x1, x2, N, s_fc, s_cf, s_cc, h1, H, alpha, out):
    """Rates for the (f, p, o) model with the mood feedback kernel.

    sigma_fc enters unscaled; every other term carries 1/tau.
    """
    tau = 1.0
    if alpha > 0.0 and x1 + x2 > 0:
        n_f = max(x0, 1) / N
        xi = (x2 - x1) / (x1 + x2)
        tau = _tau_three_state_nb(n_f, xi, alpha)
    out[0] = x0 * (s_fc / 2 + h1 * x1 / tau)
    out[1] = x0 * (s_fc / 2 + h1 * x2 / tau)
    out[2] = x1 * (s_cf + h1 * x0) / tau
    out[3] = x1 * (s_cc + H * h1 * x2) / tau
    out[4] = x2 * (s_cf + h1 * x0) / tau
    out[5] = x2 * (s_cc + H * h1 * x1) / tau


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


def tau_two_state(X: int, N: int, alpha: float) -> float:
    """Event-rate factor ``(X/(N-X))**-alpha`` of the two-state model."""
    if X <= 0 or X >= N:
        raise BoundaryError(f"tau undefined at X={X}, N={N}; clamp X to [1, N-1]")
    return float(_tau_two_state_nb(float(X), float(N), float(alpha)))


def tau_three_state(n_f: float, xi: float, alpha: float) -> float:
    """Mood/price feedback ``[1 + |(1-n_f) xi / n_f|**alpha]**-1``.

    ``alpha == 0`` means no feedback and returns 1.
    """
    if n_f <= 0:
        raise BoundaryError("tau undefined for n_f <= 0")
    if not (n_f <= 1 and -1 <= xi <= 1):
        raise ValueError(f"state (n_f={n_f}, xi={xi}) outside the domain")
    return float(_tau_three_state_nb(float(n_f), float(xi), float(alpha)))


def two_state_rates(X: int, params: TwoStateParams) -> Tuple[float, float]:
    """Total rates of ``X -> X+1`` and ``X -> X-1``."""
    if X < 0 or X > params.N:
        raise ValueError(f"X={X} outside [0, {params.N}]")
    return _two_state_rates_nb(
        float(X), float(params.N), params.sigma1, params.sigma2, params.h,
        params.alpha, params.feedback_enabled,
    )


def _counts(state: PopulationState, N: int) -> Tuple[int, int, int]:
    if len(state.counts) != 3:
        raise ValueError("three-state rates need a three-component state")
    if state.N != N:
        raise ValueError(f"state has N={state.N}, params have N={N}")
    return state.counts  # type: ignore[return-value]


def three_state_rates(state: PopulationState, params: GeneralThreeStateParams) -> Dict[Tuple[int, int], float]:
    """Rates ``X_j (sigma_ji + h_ji X_i)`` keyed by ``(j, i)`` (0-based groups)."""
    x = _counts(state, params.N)
    out = np.empty(6)
    _general_rates_nb(float(x[0]), float(x[1]), float(x[2]), params.sigma, params.h, out)
    return dict(zip(CHANNELS, out.tolist()))


def three_state_financial_rates(state: PopulationState, params: ThreeStateParams) -> Dict[Tuple[int, int], float]:
    """Channel rates of the financial three-state model.

    Fundamentalist -> chartist individual switching is never scaled by the
    feedback kernel; all herding terms and the remaining individual terms are
    divided by ``tau(n_f, xi)`` with ``n_f`` clamped to ``[1/N, 1]``.
    """
    x = _counts(state, params.N)
    out = np.empty(6)
    _financial_rates_nb(
        float(x[0]), float(x[1]), float(x[2]), float(params.N), params.sigma_fc,
        params.sigma_cf, params.sigma_cc, params.h1, params.H, params.alpha, out,
    )
    return dict(zip(CHANNELS, out.tolist()))


def spectral_exponent(eta: float, lam: float) -> float:
    """PSD exponent ``beta = 1 + (lam - 3) / (2 (eta - 1))``."""
    if eta == 1:
        raise ValueError("beta is undefined for eta == 1")
    return 1.0 + (lam - 3.0) / (2.0 * (eta - 1.0))


def theoretical_exponents(alpha: float, eps2: float) -> Tuple[float, float, float]:
    """``(eta, lambda, beta)`` predicted for the two-state y-equation."""
    if eps2 <= 0:
        raise ValueError("eps2 must be positive")
    eta = (3.0 + alpha) / 2.0
    lam = eps2 + alpha + 1.0
    if eta == 1:
        raise ValueError("beta is undefined for alpha == -1 (eta == 1)")
    return eta, lam, spectral_exponent(eta, lam)
