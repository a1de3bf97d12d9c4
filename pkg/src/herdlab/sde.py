"""Drift/diffusion coefficients, diffusion-matrix decomposition and an
adaptive, reflecting Euler-Maruyama integrator.

All equations use Itô calculus and diagonal noise. Time is the scaled time
``t_s`` except for the ``three-state-fp`` variant, whose coefficients carry the
raw rates ``sigma`` and ``h1`` (identical to scaled time when ``h1 == 1``).

Step size
    ``dt = min(max_dt, kappa*s_i/|a_i|, kappa**2*s_i**2/b_i**2)`` over the
    variables ``i``, where ``a`` is the drift, ``b`` the noise amplitude and
    ``s_i`` the distance from ``x_i`` to the nearest endpoint of its
    mathematical domain (0 for ``y``; 0 and 1 for ``n_f``; -1 and 1 for
    ``xi``). Using the domain rather than the numerical cutoff keeps the step
    bounded away from zero at a reflecting wall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple, Union

import numba
import numpy as np

from .model import ThreeStateParams, TwoStateParams, _tau_three_state_nb
from .trajectory import Occupation, Trajectory

__all__ = [
    "YParams",
    "GeneralClassParams",
    "SdeModel",
    "Boundary",
    "OccupationSpec",
    "IntegratorConfig",
    "SdeIntegrator",
    "NonFiniteError",
    "DecompositionError",
    "drift_diffusion_y_full",
    "drift_diffusion_y_asymptotic",
    "drift_diffusion_general",
    "drift_diffusion_fp",
    "drift_diffusion_transformed",
    "financial_d2",
    "diffusion_decompose",
    "integrate_sde",
]

VARIANTS = (
    "two-state-full",
    "two-state-asymptotic",
    "general-class",
    "three-state-fp",
    "three-state-transformed",
)
_Y_FULL, _Y_ASYM, _GENERAL, _FP, _TRANSFORMED = range(5)


class NonFiniteError(RuntimeError):
    """Raised when a coefficient evaluates to NaN or infinity; ``state`` holds the dump."""

    def __init__(self, message: str, state: dict):
        super().__init__(message)
        self.state = state


class DecompositionError(ValueError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


# ---------------------------------------------------------------------------
# parameter bundles and model descriptor
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class YParams:
    """Parameters of the two-state y-equation; ``tau(y) = y**-alpha``."""

    eps1: float
    eps2: float
    alpha: float = 1.0

    def __post_init__(self):
        if self.eps1 < 0 or self.eps2 < 0 or self.alpha < 0:
            raise ValueError("eps1, eps2 and alpha must be non-negative")

    @classmethod
    def from_two_state(cls, p: TwoStateParams) -> "YParams":
        return cls(p.eps1, p.eps2, p.alpha if p.feedback_enabled else 0.0)


@dataclass(frozen=True)
class GeneralClassParams:
    eta: float
    lam: float


def _as_y(params) -> YParams:
    return YParams.from_two_state(params) if isinstance(params, TwoStateParams) else params


@dataclass(frozen=True)
class Boundary:
    lower: float
    upper: float
    reflect: bool = True

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"empty boundary interval [{self.lower}, {self.upper}]")


@dataclass(frozen=True)
class SdeModel:
    variant: str
    params: Union[YParams, GeneralClassParams, ThreeStateParams]

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown SDE variant {self.variant!r}; choose from {VARIANTS}")
        if isinstance(self.params, TwoStateParams):
            object.__setattr__(self, "params", YParams.from_two_state(self.params))
        need = {
            "two-state-full": YParams,
            "two-state-asymptotic": YParams,
            "general-class": GeneralClassParams,
            "three-state-fp": ThreeStateParams,
            "three-state-transformed": ThreeStateParams,
        }[self.variant]
        if not isinstance(self.params, need):
            raise TypeError(f"{self.variant} needs {need.__name__}")

    @property
    def code(self) -> int:
        return VARIANTS.index(self.variant)

    @property
    def dim(self) -> int:
        return 2 if self.variant.startswith("three") else 1

    @property
    def columns(self) -> Tuple[str, ...]:
        return {
            "two-state-full": ("y",),
            "two-state-asymptotic": ("y",),
            "general-class": ("x",),
            "three-state-fp": ("n_f", "n_p"),
            "three-state-transformed": ("n_f", "xi"),
        }[self.variant]

    def packed(self) -> np.ndarray:
        p = self.params
        if isinstance(p, YParams):
            return np.array([p.eps1, p.eps2, p.alpha])
        if isinstance(p, GeneralClassParams):
            return np.array([p.eta, p.lam])
        if self.variant == "three-state-fp":
            return np.array([p.sigma_cf, p.sigma_fc, p.sigma_cc, p.h1, p.H])
        return np.array([p.eps_cf, p.eps_fc, p.eps_cc, p.H, p.alpha])

    def domain(self) -> Tuple[Tuple[float, float], ...]:
        if self.variant in ("two-state-full", "two-state-asymptotic", "general-class"):
            return ((0.0, math.inf),)
        if self.variant == "three-state-fp":
            return ((0.0, 1.0), (0.0, 1.0))
        return ((0.0, 1.0), (-1.0, 1.0))

    def default_boundaries(self) -> Tuple[Boundary, ...]:
        if self.dim == 1:
            return (Boundary(1e-2, 1e3),)
        inv_n = 1.0 / self.params.N
        if self.variant == "three-state-fp":
            return (Boundary(inv_n, 1 - inv_n), Boundary(inv_n, 1 - inv_n))
        return (Boundary(inv_n, 1 - inv_n), Boundary(-1 + 1e-3, 1 - 1e-3))

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return {"variant": self.variant, "params": asdict(self.params)}


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _coef(variant, x, p, a, b):
    if variant == _Y_FULL:
        y = x[0]
        itau = y ** p[2]
        a[0] = (p[0] + y * (2.0 - p[1]) * itau) * (1.0 + y)
        b[0] = math.sqrt(2.0 * y * itau) * (1.0 + y)
    elif variant == _Y_ASYM:
        y = x[0]
        a[0] = (2.0 - p[1]) * y ** (2.0 + p[2])
        b[0] = math.sqrt(2.0 * y ** (3.0 + p[2]))
    elif variant == _GENERAL:
        a[0] = (p[0] - p[1] / 2.0) * x[0] ** (2.0 * p[0] - 1.0)
        b[0] = x[0] ** p[0]
    elif variant == _FP:
        nf = x[0]
        npp = x[1]
        a[0] = (1.0 - nf) * p[0] - nf * p[1]
        a[1] = (1.0 - nf - 2.0 * npp) * p[2]
        b[0] = math.sqrt(2.0 * p[3] * max(nf * (1.0 - nf), 0.0))
        b[1] = math.sqrt(2.0 * p[4] * p[3] * max(npp * (1.0 - nf - npp), 0.0))
    else:
        nf = x[0]
        xi = x[1]
        itau = 1.0 / _tau_three_state_nb(nf, xi, p[4])
        a[0] = (1.0 - nf) * p[0] * itau - nf * p[1]
        a[1] = -2.0 * p[3] * p[2] * xi * itau
        b[0] = math.sqrt(2.0 * max(nf * (1.0 - nf), 0.0) * itau)
        b[1] = math.sqrt(2.0 * p[3] * max(1.0 - xi * xi, 0.0) * itau)


@numba.njit(cache=True)
def _scale(variant, x, s):
    if variant <= _GENERAL:
        s[0] = x[0]
    elif variant == _FP:
        s[0] = min(x[0], 1.0 - x[0])
        s[1] = min(x[1], 1.0 - x[0] - x[1])
    else:
        s[0] = min(x[0], 1.0 - x[0])
        s[1] = 1.0 - abs(x[1])


@numba.njit(cache=True)
def _reflect(v, lo, hi):
    width = hi - lo
    if v < lo or v > hi:
        # fold into [lo, hi] as a mirror image, period 2*width
        u = (v - lo) % (2.0 * width)
        v = lo + (u if u <= width else 2.0 * width - u)
    return v


@numba.njit(cache=True)
def _fold(variant, x, lo, hi, reflect):
    for i in range(x.shape[0]):
        top = hi[i]
        if variant == _FP and i == 1:
            # n_p lives on the moving simplex edge 1 - n_f
            top = min(hi[1], 1.0 - x[0] - lo[1])
        if reflect[i]:
            x[i] = _reflect(x[i], lo[i], top)
        else:
            x[i] = min(max(x[i], lo[i]), top)


@numba.njit(cache=True)
def _em_kernel(
    variant, rng, x, p, lo, hi, reflect, n_samples, sample_dt, max_dt, kappa, t,
    occ, occ_var, occ_mode, occ_lo, occ_hi, occ_t0, dbg, dbg_used,
):
    """Advance ``x`` in place over ``n_samples`` sample intervals.

    Returns (samples, t, steps, status, dbg_used, a, b); status 1 flags a
    non-finite coefficient, with ``x`` left at the offending state.
    """
    d = x.shape[0]
    out = np.empty((n_samples, d))
    a = np.empty(d)
    b = np.empty(d)
    s = np.empty(d)
    k2 = kappa * kappa
    nbins = occ.shape[0]
    if occ_mode == 2:
        o_lo = math.log(occ_lo)
        o_w = (math.log(occ_hi) - o_lo) / nbins
    else:
        o_lo = occ_lo
        o_w = (occ_hi - occ_lo) / nbins
    steps = 0
    t_base = t
    for k in range(n_samples):
        t_next = t_base + (k + 1) * sample_dt
        while t < t_next:
            _coef(variant, x, p, a, b)
            for i in range(d):
                if not (math.isfinite(a[i]) and math.isfinite(b[i])):
                    return out[:k], t, steps, 1, dbg_used, a, b
            _scale(variant, x, s)
            dt = max_dt
            for i in range(d):
                if a[i] != 0.0:
                    dt = min(dt, kappa * s[i] / abs(a[i]))
                if b[i] != 0.0:
                    dt = min(dt, k2 * s[i] * s[i] / (b[i] * b[i]))
            if t + dt > t_next:
                dt = t_next - t
            if dbg_used < dbg.shape[0]:
                r1 = 0.0
                r2 = 0.0
                for i in range(d):
                    r1 = max(r1, abs(a[i]) * dt / (kappa * s[i]))
                    r2 = max(r2, b[i] * b[i] * dt / (k2 * s[i] * s[i]))
                dbg[dbg_used, 0] = t
                dbg[dbg_used, 1] = dt
                dbg[dbg_used, 2] = r1
                dbg[dbg_used, 3] = r2
                dbg_used += 1
            if occ_mode > 0 and t >= occ_t0:
                v = x[occ_var]
                if occ_mode == 2:
                    v = math.log(v)
                j = int(math.floor((v - o_lo) / o_w))
                if 0 <= j < nbins:
                    occ[j] += dt
            sq = math.sqrt(dt)
            for i in range(d):
                x[i] += a[i] * dt + b[i] * sq * rng.standard_normal()
            _fold(variant, x, lo, hi, reflect)
            t += dt
            steps += 1
        # guard against round-off drift of the running clock
        t = t_next
        for i in range(d):
            out[k, i] = x[i]
    return out, t, steps, 0, dbg_used, a, b


# ---------------------------------------------------------------------------
# public coefficient functions
# ---------------------------------------------------------------------------


def _eval(model: SdeModel, x: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    a = np.empty(model.dim)
    b = np.empty(model.dim)
    _coef(model.code, np.asarray(x, dtype=float), model.packed(), a, b)
    return a, b


def drift_diffusion_y_full(y: float, params) -> Tuple[float, float]:
    """Full y-equation: drift ``[eps1 + y(2-eps2)/tau](1+y)``, noise ``sqrt(2y/tau)(1+y)``.

    ``params`` is a :class:`YParams` or a :class:`TwoStateParams` (feedback off
    means ``alpha = 0``).
    """
    if not y > 0:
        raise ValueError("y must be positive")
    a, b = _eval(SdeModel("two-state-full", _as_y(params)), [y])
    return float(a[0]), float(b[0])


def drift_diffusion_y_asymptotic(y: float, params) -> Tuple[float, float]:
    """Large-y limit: drift ``(2-eps2) y**(2+alpha)``, noise ``sqrt(2 y**(3+alpha))``."""
    if not y > 0:
        raise ValueError("y must be positive")
    a, b = _eval(SdeModel("two-state-asymptotic", _as_y(params)), [y])
    return float(a[0]), float(b[0])


def drift_diffusion_general(x: float, eta: float, lam: float) -> Tuple[float, float]:
    """``dx = (eta - lam/2) x**(2 eta - 1) dt + x**eta dW``.

    The large-y two-state equation is this class with ``eta = (3+alpha)/2``,
    ``lam = eps2+alpha+1`` once time is rescaled by 2: its noise carries an
    extra factor ``sqrt(2)``.
    """
    if not x > 0:
        raise ValueError("x must be positive")
    a, b = _eval(SdeModel("general-class", GeneralClassParams(eta, lam)), [x])
    return float(a[0]), float(b[0])


def drift_diffusion_fp(n_f: float, n_p: float, params: ThreeStateParams) -> Tuple[np.ndarray, np.ndarray]:
    """Coupled fundamentalist/pessimist equations in model time.

    Returns the drift vector and the diagonal 2x2 noise matrix.
    """
    if n_f < 0 or n_p < 0 or n_f + n_p > 1:
        raise ValueError(f"(n_f={n_f}, n_p={n_p}) outside the simplex")
    a, b = _eval(SdeModel("three-state-fp", params), [n_f, n_p])
    return a, np.diag(b)


def drift_diffusion_transformed(n_f: float, xi: float, params: ThreeStateParams) -> Tuple[np.ndarray, np.ndarray]:
    """Decoupled ``(n_f, xi)`` equations with the mood feedback kernel, scaled time.

    Returns the drift vector and the diagonal of the noise matrix.
    """
    if not (0 < n_f < 1 and -1 < xi < 1):
        raise ValueError(f"(n_f={n_f}, xi={xi}) must be strictly inside (0,1) x (-1,1)")
    return _eval(SdeModel("three-state-transformed", params), [n_f, xi])


def financial_d2(n_f: float, n_p: float, params: ThreeStateParams) -> np.ndarray:
    """Second-order Fokker-Planck terms of the (n_f, n_p) description, cross term included."""
    h1, H = params.h1, params.H
    d_ff = h1 * (1 - n_f) * n_f
    d_pp = H * h1 * n_p * (1 - n_f - n_p) + h1 * n_f * n_p
    d_fp = -h1 * n_f * n_p
    return np.array([[d_ff, d_fp], [d_fp, d_pp]])


def diffusion_decompose(d2: np.ndarray, symmetric: bool = True, tol: float = 1e-12) -> np.ndarray:
    """Solve ``D2 = S S^T / 2`` for a symmetric 2x2 ``S`` with non-negative diagonal.

    With ``S`` symmetric the system reads ``S @ S = 2 D2``; the answer is the
    principal (positive semidefinite) square root of ``2 D2``.
    """
    d2 = np.asarray(d2, dtype=float)
    if d2.shape != (2, 2):
        raise ValueError("d2 must be 2x2")
    if not symmetric:
        raise NotImplementedError("only the symmetric closure S12 == S21 is supported")
    if not np.allclose(d2, d2.T, rtol=0, atol=1e-15 * max(1.0, np.abs(d2).max())):
        raise DecompositionError("d2 is not symmetric", float(np.abs(d2 - d2.T).max()))
    d2 = (d2 + d2.T) / 2
    w, v = np.linalg.eigh(2 * d2)
    neg = w < 0
    wc = np.where(neg, 0.0, w)
    S = (v * np.sqrt(wc)) @ v.T
    S = (S + S.T) / 2
    resid = float(np.linalg.norm(0.5 * S @ S.T - d2))
    scale = max(1.0, float(np.abs(d2).max()))
    if resid > tol * scale:
        raise DecompositionError("no real symmetric solution (d2 is not positive semidefinite)", resid)
    return S


# ---------------------------------------------------------------------------
# integrator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OccupationSpec:
    """Time-weighted histogram of one variable accumulated at every step."""

    var: int = 0
    lower: float = 1e-2
    upper: float = 1e3
    bins: int = 100
    log: bool = True

    @property
    def edges(self) -> np.ndarray:
        if self.log:
            return np.logspace(math.log10(self.lower), math.log10(self.upper), self.bins + 1)
        return np.linspace(self.lower, self.upper, self.bins + 1)


@dataclass(frozen=True)
class IntegratorConfig:
    """Euler-Maruyama settings.

    ``max_dt`` defaults to ``sample_dt / 100``; ``boundaries`` default to the
    model's own; ``burn_in`` is the fraction of ``t_end`` excluded from the
    occupation histogram.
    """

    kappa: float = 0.05
    sample_dt: float = 1.0
    max_dt: Optional[float] = None
    boundaries: Optional[Tuple[Boundary, ...]] = None
    burn_in: float = 0.1
    occupation: Optional[OccupationSpec] = None
    debug_steps: int = 0

    def __post_init__(self):
        if not 0 < self.kappa <= 0.5:
            raise ValueError("kappa must be in (0, 0.5]")
        if not self.sample_dt > 0:
            raise ValueError("sample_dt must be positive")
        if self.max_dt is not None and not self.max_dt > 0:
            raise ValueError("max_dt must be positive")
        if not 0 <= self.burn_in < 1:
            raise ValueError("burn_in must be in [0, 1)")

    @property
    def effective_max_dt(self) -> float:
        return self.max_dt if self.max_dt is not None else self.sample_dt / 100


class SdeIntegrator:
    """Stateful integrator: owns its RNG, position and clock.

    Call :meth:`run` repeatedly to stream long trajectories in chunks; the
    occupation histogram keeps accumulating across calls.
    """

    def __init__(
        self,
        model: SdeModel,
        x0: Sequence[float],
        config: IntegratorConfig,
        seed: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
        occupation_start: float = 0.0,
    ):
        self.model = model
        self.config = config
        bounds = config.boundaries or model.default_boundaries()
        if len(bounds) != model.dim:
            raise ValueError(f"{model.variant} needs {model.dim} boundaries")
        for (dlo, dhi), bd in zip(model.domain(), bounds):
            if not (dlo < bd.lower and bd.upper < dhi):
                raise ValueError(f"boundary [{bd.lower}, {bd.upper}] not strictly inside domain ({dlo}, {dhi})")
        self.bounds = tuple(bounds)
        self._lo = np.array([b.lower for b in bounds])
        self._hi = np.array([b.upper for b in bounds])
        self._reflect = np.array([b.reflect for b in bounds])
        x = np.array(x0, dtype=float).reshape(-1)
        if x.shape != (model.dim,):
            raise ValueError(f"x0 must have {model.dim} components")
        if np.any(x <= self._lo) or np.any(x >= self._hi) or (
            model.variant == "three-state-fp" and x[0] + x[1] >= 1 - self._lo[1]
        ):
            raise ValueError(f"x0={x.tolist()} not strictly inside the boundaries")
        self.x = x
        if rng is None:
            rng = np.random.default_rng(seed)
        self.rng = rng
        self.t = 0.0
        self.steps = 0
        self._p = model.packed()
        spec = config.occupation
        self.occ_spec = spec
        self._occ = np.zeros(spec.bins if spec else 1)
        self._occ_t0 = occupation_start
        self._dbg = np.zeros((config.debug_steps, 4))
        self._dbg_used = 0

    @property
    def occupation(self) -> Optional[Occupation]:
        if self.occ_spec is None:
            return None
        return Occupation(self._occ.copy(), np.zeros(self._occ.shape, dtype=np.int64), self.occ_spec.edges)

    @property
    def step_log(self) -> np.ndarray:
        """Columns: t, dt, max |a| dt/(kappa s), max b^2 dt/(kappa s)^2."""
        return self._dbg[: self._dbg_used].copy()

    def run(self, n_samples: int) -> np.ndarray:
        """Integrate ``n_samples * sample_dt`` time units; return the samples, shape (n, dim)."""
        cfg = self.config
        spec = self.occ_spec
        occ_mode = 0 if spec is None else (2 if spec.log else 1)
        out, t, steps, status, used, a, b = _em_kernel(
            self.model.code, self.rng, self.x, self._p, self._lo, self._hi, self._reflect,
            int(n_samples), float(cfg.sample_dt), float(cfg.effective_max_dt), float(cfg.kappa),
            float(self.t), self._occ, spec.var if spec else 0, occ_mode,
            spec.lower if spec else 1.0, spec.upper if spec else 2.0, float(self._occ_t0),
            self._dbg, self._dbg_used,
        )
        self.t = t
        self.steps += steps
        self._dbg_used = used
        if status != 0:
            state = {
                "variant": self.model.variant,
                "t": t,
                "x": self.x.tolist(),
                "drift": a.tolist(),
                "diffusion": b.tolist(),
                "params": self.model.to_dict()["params"],
            }
            raise NonFiniteError(f"non-finite coefficient at t={t:.6g}, state {state}", state)
        return out


def integrate_sde(
    model: SdeModel,
    x0: Sequence[float],
    t_end: float,
    config: IntegratorConfig,
    seed: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> Trajectory:
    """Integrate ``model`` from ``x0`` over ``[0, t_end]``.

    The output grid is ``0, sample_dt, ...`` and includes ``x0`` itself.
    Pass either ``seed`` or an existing ``rng`` (to continue a stream).
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    n = int(math.floor(t_end / config.sample_dt + 1e-9))
    integ = SdeIntegrator(model, x0, config, seed=seed, rng=rng, occupation_start=config.burn_in * t_end)
    start = integ.x.copy()
    body = integ.run(n)
    values = np.vstack([start[None, :], body])
    if model.dim == 1:
        values = values[:, 0]
    meta = {
        "model": model.variant,
        "params": model.to_dict()["params"],
        "seed": seed,
        "kappa": config.kappa,
        "max_dt": config.effective_max_dt,
        "boundaries": [[b.lower, b.upper, b.reflect] for b in integ.bounds],
        "steps": integ.steps,
    }
    if config.debug_steps:
        meta["step_log"] = integ.step_log.tolist()
    return Trajectory(0.0, config.sample_dt, values, model.columns, meta, integ.occupation)
