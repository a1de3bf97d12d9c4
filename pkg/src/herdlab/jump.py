"""Event-driven (Gillespie) and fixed-step simulation of the herding jump processes.

Both simulators share the rate kernels of :mod:`herdlab.model`, sample the
piecewise-constant path onto a uniform grid by last-value interpolation, and
accumulate an exact time-weighted occupancy after the burn-in period.
Time is model time ``t`` (rates as given); divide by ``h`` or ``h1`` for the
scaled time of the SDE description.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Optional, Union

import numba
import numpy as np

from .model import (
    GeneralThreeStateParams,
    PopulationState,
    ThreeStateParams,
    TwoStateParams,
    _financial_rates_nb,
    _general_rates_nb,
    _two_state_rates_nb,
)
from .trajectory import EventLog, Occupation, Trajectory

__all__ = ["simulate_jump", "simulate_jump_fixed_dt", "default_initial_state", "params_digest"]

ThreeParams = Union[GeneralThreeStateParams, ThreeStateParams]

STEP_PROB_LIMIT = 0.1


def params_digest(params) -> str:
    blob = json.dumps(params.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def default_initial_state(model: str, params) -> PopulationState:
    """Start near the deterministic fixed point to shorten burn-in."""
    N = params.N
    if model == "two-state":
        s = params.sigma1 + params.sigma2
        X = round(N * params.sigma1 / s) if s > 0 else N // 2
        return PopulationState.two_state(X, N)
    third = N // 3
    return PopulationState.three_state(N - 2 * third, third, third)


def _n_samples(t_end: float, sample_dt: float) -> int:
    return int(math.floor(t_end / sample_dt + 1e-9)) + 1


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _ssa_two(rng, X, N, s1, s2, h, alpha, fb, t_end, sample_dt, n_samples, burn_in, max_events):
    samples = np.empty(n_samples, dtype=np.int64)
    occ = np.zeros(N + 1)
    visits = np.zeros(N + 1, dtype=np.int64)
    ev_t = np.empty(max_events)
    ev_c = np.empty(max_events, dtype=np.int64)
    t = 0.0
    k = 0
    n_ev = 0
    absorbed_at = -1.0
    while True:
        up, down = _two_state_rates_nb(float(X), float(N), s1, s2, h, alpha, fb)
        total = up + down
        if total > 0.0:
            t_next = t + rng.exponential() / total
        else:
            t_next = np.inf
            absorbed_at = t
        while k < n_samples and k * sample_dt < t_next:
            samples[k] = X
            k += 1
        a = max(t, burn_in)
        b = min(t_next, t_end)
        if b > a:
            occ[X] += b - a
            visits[X] += 1
        if t_next >= t_end:
            break
        if rng.random() * total < up:
            X += 1
            c = 0
        else:
            X -= 1
            c = 1
        if n_ev < max_events:
            ev_t[n_ev] = t_next
            ev_c[n_ev] = c
        n_ev += 1
        t = t_next
    return samples, occ, visits, n_ev, absorbed_at, ev_t, ev_c


@numba.njit(cache=True)
def _three_rates(kind, x0, x1, x2, N, sigma, hmat, fin, out):
    if kind == 0:
        _general_rates_nb(x0, x1, x2, sigma, hmat, out)
    else:
        _financial_rates_nb(x0, x1, x2, N, fin[0], fin[1], fin[2], fin[3], fin[4], fin[5], out)


@numba.njit(cache=True)
def _apply(x, c):
    # channel order matches model.CHANNELS
    if c == 0:
        x[0] -= 1
        x[1] += 1
    elif c == 1:
        x[0] -= 1
        x[2] += 1
    elif c == 2:
        x[1] -= 1
        x[0] += 1
    elif c == 3:
        x[1] -= 1
        x[2] += 1
    elif c == 4:
        x[2] -= 1
        x[0] += 1
    else:
        x[2] -= 1
        x[1] += 1


@numba.njit(cache=True)
def _ssa_three(rng, x_init, N, kind, sigma, hmat, fin, t_end, sample_dt, n_samples, burn_in, max_events):
    samples = np.empty((n_samples, 3), dtype=np.int64)
    occ = np.zeros((N + 1, N + 1))
    visits = np.zeros((N + 1, N + 1), dtype=np.int64)
    ev_t = np.empty(max_events)
    ev_c = np.empty(max_events, dtype=np.int64)
    rates = np.empty(6)
    x = x_init.copy()
    t = 0.0
    k = 0
    n_ev = 0
    absorbed_at = -1.0
    while True:
        _three_rates(kind, float(x[0]), float(x[1]), float(x[2]), float(N), sigma, hmat, fin, rates)
        total = rates.sum()
        if total > 0.0:
            t_next = t + rng.exponential() / total
        else:
            t_next = np.inf
            absorbed_at = t
        while k < n_samples and k * sample_dt < t_next:
            samples[k, 0] = x[0]
            samples[k, 1] = x[1]
            samples[k, 2] = x[2]
            k += 1
        a = max(t, burn_in)
        b = min(t_next, t_end)
        if b > a:
            occ[x[0], x[1]] += b - a
            visits[x[0], x[1]] += 1
        if t_next >= t_end:
            break
        u = rng.random() * total
        c = 0
        acc = rates[0]
        while acc <= u and c < 5:
            c += 1
            acc += rates[c]
        _apply(x, c)
        if n_ev < max_events:
            ev_t[n_ev] = t_next
            ev_c[n_ev] = c
        n_ev += 1
        t = t_next
    return samples, occ, visits, n_ev, absorbed_at, ev_t, ev_c


@numba.njit(cache=True)
def _fixed_two(rng, X, N, s1, s2, h, alpha, fb, t_end, step_dt, sample_dt, n_samples, burn_in):
    samples = np.empty(n_samples, dtype=np.int64)
    occ = np.zeros(N + 1)
    visits = np.zeros(N + 1, dtype=np.int64)
    t = 0.0
    k = 0
    halvings = 0
    n_ev = 0
    while t < t_end:
        up, down = _two_state_rates_nb(float(X), float(N), s1, s2, h, alpha, fb)
        while (up + down) * step_dt > 0.1:
            step_dt *= 0.5
            halvings += 1
        t_next = t + step_dt
        while k < n_samples and k * sample_dt < t_next:
            samples[k] = X
            k += 1
        a = max(t, burn_in)
        b = min(t_next, t_end)
        if b > a:
            occ[X] += b - a
            visits[X] += 1
        u = rng.random()
        if u < up * step_dt:
            X += 1
            n_ev += 1
        elif u < (up + down) * step_dt:
            X -= 1
            n_ev += 1
        t = t_next
    while k < n_samples:
        samples[k] = X
        k += 1
    return samples, occ, visits, n_ev, step_dt, halvings


@numba.njit(cache=True)
def _fixed_three(rng, x_init, N, kind, sigma, hmat, fin, t_end, step_dt, sample_dt, n_samples, burn_in):
    samples = np.empty((n_samples, 3), dtype=np.int64)
    occ = np.zeros((N + 1, N + 1))
    visits = np.zeros((N + 1, N + 1), dtype=np.int64)
    rates = np.empty(6)
    x = x_init.copy()
    t = 0.0
    k = 0
    halvings = 0
    n_ev = 0
    while t < t_end:
        _three_rates(kind, float(x[0]), float(x[1]), float(x[2]), float(N), sigma, hmat, fin, rates)
        total = rates.sum()
        while total * step_dt > 0.1:
            step_dt *= 0.5
            halvings += 1
        t_next = t + step_dt
        while k < n_samples and k * sample_dt < t_next:
            samples[k, 0] = x[0]
            samples[k, 1] = x[1]
            samples[k, 2] = x[2]
            k += 1
        a = max(t, burn_in)
        b = min(t_next, t_end)
        if b > a:
            occ[x[0], x[1]] += b - a
            visits[x[0], x[1]] += 1
        u = rng.random()
        acc = 0.0
        for c in range(6):
            acc += rates[c] * step_dt
            if u < acc:
                _apply(x, c)
                n_ev += 1
                break
        t = t_next
    while k < n_samples:
        samples[k, 0] = x[0]
        samples[k, 1] = x[1]
        samples[k, 2] = x[2]
        k += 1
    return samples, occ, visits, n_ev, step_dt, halvings


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


def _three_args(params: ThreeParams):
    if isinstance(params, ThreeStateParams):
        fin = np.array([params.sigma_fc, params.sigma_cf, params.sigma_cc, params.h1, params.H, params.alpha])
        return 1, np.zeros((3, 3)), np.zeros((3, 3)), fin
    return 0, np.ascontiguousarray(params.sigma), np.ascontiguousarray(params.h), np.zeros(6)


def _check(model, params, x0, t_end, sample_dt):
    if t_end <= 0 or sample_dt <= 0:
        raise ValueError("t_end and sample_dt must be positive")
    if model == "two-state":
        if not isinstance(params, TwoStateParams):
            raise TypeError("two-state model needs TwoStateParams")
    elif model == "three-state":
        if not isinstance(params, (GeneralThreeStateParams, ThreeStateParams)):
            raise TypeError("three-state model needs three-state parameters")
    else:
        raise ValueError(f"unknown model {model!r}")
    if x0 is None:
        x0 = default_initial_state(model, params)
    if x0.N != params.N or len(x0.counts) != (1 if model == "two-state" else 3):
        raise ValueError(f"initial state {x0} incompatible with {model} params (N={params.N})")
    return x0


def _meta(model, params, seed, **extra):
    return {
        "model": model,
        "params": params.to_dict(),
        "params_digest": params_digest(params),
        "seed": int(seed),
        **extra,
    }


def simulate_jump(
    model: str,
    params,
    x0: Optional[PopulationState] = None,
    t_end: float = 1000.0,
    sample_dt: float = 1.0,
    seed: int = 0,
    burn_in: float = 0.1,
    record_events: bool = False,
    max_events: int = 1_000_000,
) -> Trajectory:
    """Exact stochastic simulation of the two- or three-state jump process.

    Parameters
    ----------
    model : {"two-state", "three-state"}
    params : TwoStateParams, GeneralThreeStateParams or ThreeStateParams
        ``ThreeStateParams`` selects the financial rates with mood feedback.
    x0 : PopulationState, optional
        Defaults to the near-fixed-point state of :func:`default_initial_state`.
    t_end, sample_dt : float
        Horizon and output grid spacing, model time units.
    seed : int
        Any non-negative integer (64-bit seeds accepted).
    burn_in : float
        Fraction of ``t_end`` excluded from the occupancy statistics.
    record_events : bool
        Attach an :class:`EventLog` with the first ``max_events`` events.

    Returns
    -------
    Trajectory
        Counts on the grid ``0, sample_dt, ...``; ``occupation`` holds the
        exact time-weighted occupancy after burn-in. If the chain hits a state
        with zero total rate, it stays there and ``meta["absorbed_at"]`` records
        the time.
    """
    x0 = _check(model, params, x0, t_end, sample_dt)
    rng = np.random.default_rng(seed)
    n = _n_samples(t_end, sample_dt)
    cap = max_events if record_events else 0
    if model == "two-state":
        out = _ssa_two(
            rng, x0.counts[0], params.N, params.sigma1, params.sigma2, params.h,
            params.alpha, params.feedback_enabled, float(t_end), float(sample_dt), n,
            burn_in * t_end, cap,
        )
        columns = ("X",)
    else:
        kind, sigma, hmat, fin = _three_args(params)
        out = _ssa_three(
            rng, np.array(x0.counts, dtype=np.int64), params.N, kind, sigma, hmat, fin,
            float(t_end), float(sample_dt), n, burn_in * t_end, cap,
        )
        columns = ("X1", "X2", "X3")
    samples, occ, visits, n_ev, absorbed_at, ev_t, ev_c = out
    meta = _meta(
        model, params, seed, simulator="gillespie", n_events=int(n_ev),
        absorbed=bool(absorbed_at >= 0), absorbed_at=float(absorbed_at) if absorbed_at >= 0 else None,
        burn_in=burn_in, t_end=float(t_end),
    )
    traj = Trajectory(0.0, float(sample_dt), samples, columns, meta, Occupation(occ, visits))
    if record_events:
        m = min(n_ev, cap)
        traj.events = EventLog(ev_t[:m].copy(), ev_c[:m].copy())
    return traj


def simulate_jump_fixed_dt(
    model: str,
    params,
    x0: Optional[PopulationState] = None,
    t_end: float = 1000.0,
    step_dt: float = 1e-3,
    sample_dt: float = 1.0,
    seed: int = 0,
    burn_in: float = 0.1,
) -> Trajectory:
    """Bernoulli small-step approximation of the same jump process.

    Each step fires at most one channel, channel ``c`` with probability
    ``rate_c * step_dt``. Whenever ``total_rate * step_dt`` would exceed 0.1
    at the current state, ``step_dt`` is halved (permanently); the number of
    halvings and the final step are stored in ``meta``.
    """
    x0 = _check(model, params, x0, t_end, sample_dt)
    if step_dt <= 0:
        raise ValueError("step_dt must be positive")
    rng = np.random.default_rng(seed)
    n = _n_samples(t_end, sample_dt)
    if model == "two-state":
        out = _fixed_two(
            rng, x0.counts[0], params.N, params.sigma1, params.sigma2, params.h,
            params.alpha, params.feedback_enabled, float(t_end), float(step_dt),
            float(sample_dt), n, burn_in * t_end,
        )
        columns = ("X",)
    else:
        kind, sigma, hmat, fin = _three_args(params)
        out = _fixed_three(
            rng, np.array(x0.counts, dtype=np.int64), params.N, kind, sigma, hmat, fin,
            float(t_end), float(step_dt), float(sample_dt), n, burn_in * t_end,
        )
        columns = ("X1", "X2", "X3")
    samples, occ, visits, n_ev, final_dt, halvings = out
    meta = _meta(
        model, params, seed, simulator="fixed-dt", n_events=int(n_ev),
        step_dt_initial=float(step_dt), step_dt_final=float(final_dt),
        step_halvings=int(halvings), burn_in=burn_in, t_end=float(t_end),
    )
    return Trajectory(0.0, float(sample_dt), samples, columns, meta, Occupation(occ, visits))
