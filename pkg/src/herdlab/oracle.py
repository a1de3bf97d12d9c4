"""Exact small-N stationary and transient distributions of the jump processes.

Three-state states are enumerated lexicographically in ``(X1, X2)``:
``(0,0), (0,1), ..., (0,N), (1,0), ..., (N,0)``; ``X3 = N - X1 - X2``.
Generators are stored sparse (CSR); ``dense()`` is available for small N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import spsolve
from scipy.special import gammaln

from .model import (
    CHANNELS,
    GeneralThreeStateParams,
    ThreeStateParams,
    TwoStateParams,
    _financial_rates_nb,
    _general_rates_nb,
    _two_state_rates_nb,
)

__all__ = [
    "GeneratorMatrix",
    "ReducibleChainError",
    "two_state_generator",
    "three_state_generator",
    "simplex_states",
    "simplex_index",
    "stationary_birth_death",
    "stationary_three_state",
    "stationary_from_generator",
    "master_evolve",
    "xi_marginal",
    "total_variation",
    "pmf_to_csv",
]


class ReducibleChainError(ValueError):
    pass


@dataclass
class GeneratorMatrix:
    """Rate matrix ``Q``: ``Q[a, b]`` is the rate a -> b, rows sum to zero."""

    Q: sparse.csr_matrix
    states: np.ndarray
    kind: str

    def __post_init__(self):
        self.Q = sparse.csr_matrix(self.Q)

    @property
    def n_states(self) -> int:
        return self.Q.shape[0]

    def dense(self) -> np.ndarray:
        return self.Q.toarray()

    def row_sum_error(self) -> float:
        """Largest row sum, relative to that row's total outflow (absolute for empty rows)."""
        sums = np.abs(np.asarray(self.Q.sum(axis=1)).ravel())
        scale = np.maximum(1.0, np.abs(self.Q.diagonal()))
        return float((sums / scale).max())

    def is_irreducible(self) -> bool:
        n, _ = csgraph.connected_components(self.Q, directed=True, connection="strong")
        return n == 1


def _from_offdiag(rows, cols, vals, n, states, kind) -> GeneratorMatrix:
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    vals = np.asarray(vals, dtype=float)
    keep = vals > 0
    off = sparse.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    diag = -np.asarray(off.sum(axis=1)).ravel()
    return GeneratorMatrix(off + sparse.diags(diag), states, kind)


def two_state_generator(params: TwoStateParams) -> GeneratorMatrix:
    N = params.N
    rows, cols, vals = [], [], []
    for X in range(N + 1):
        up, down = _two_state_rates_nb(float(X), float(N), params.sigma1, params.sigma2, params.h,
                                       params.alpha, params.feedback_enabled)
        if X < N:
            rows.append(X); cols.append(X + 1); vals.append(up)
        if X > 0:
            rows.append(X); cols.append(X - 1); vals.append(down)
    return _from_offdiag(rows, cols, vals, N + 1, np.arange(N + 1)[:, None], "two-state")


def simplex_states(N: int) -> np.ndarray:
    """All ``(X1, X2, X3)`` in lexicographic ``(X1, X2)`` order."""
    out = [(a, b, N - a - b) for a in range(N + 1) for b in range(N + 1 - a)]
    return np.array(out, dtype=np.int64)


def simplex_index(X1, X2, N: int):
    X1 = np.asarray(X1)
    return X1 * (N + 1) - X1 * (X1 - 1) // 2 + np.asarray(X2)


def three_state_generator(params: Union[GeneralThreeStateParams, ThreeStateParams]) -> GeneratorMatrix:
    N = params.N
    states = simplex_states(N)
    n = len(states)
    rates = np.empty(6)
    rows, cols, vals = [], [], []
    fin = isinstance(params, ThreeStateParams)
    for a, (x0, x1, x2) in enumerate(states):
        if fin:
            _financial_rates_nb(float(x0), float(x1), float(x2), float(N), params.sigma_fc, params.sigma_cf,
                                params.sigma_cc, params.h1, params.H, params.alpha, rates)
        else:
            _general_rates_nb(float(x0), float(x1), float(x2), params.sigma, params.h, rates)
        for c, (j, i) in enumerate(CHANNELS):
            if rates[c] <= 0:
                continue
            x = [x0, x1, x2]
            x[j] -= 1
            x[i] += 1
            rows.append(a)
            cols.append(int(simplex_index(x[0], x[1], N)))
            vals.append(rates[c])
    return _from_offdiag(rows, cols, vals, n, states, "three-state")


def stationary_birth_death(params: TwoStateParams) -> np.ndarray:
    """Detailed-balance pmf over ``X = 0..N``, accumulated in log space."""
    N = params.N
    logp = np.zeros(N + 1)
    for X in range(N):
        up, _ = _two_state_rates_nb(float(X), float(N), params.sigma1, params.sigma2, params.h,
                                    params.alpha, params.feedback_enabled)
        _, down = _two_state_rates_nb(float(X + 1), float(N), params.sigma1, params.sigma2, params.h,
                                      params.alpha, params.feedback_enabled)
        if up <= 0:
            raise ReducibleChainError(f"zero rate X={X} -> {X + 1} disconnects the chain")
        if down <= 0:
            raise ReducibleChainError(f"zero rate X={X + 1} -> {X} disconnects the chain")
        logp[X + 1] = logp[X] + math.log(up) - math.log(down)
    p = np.exp(logp - logp.max())
    return p / p.sum()


def stationary_from_generator(gen: GeneratorMatrix, tol: float = 1e-10) -> np.ndarray:
    """Solve ``pi Q = 0, sum(pi) = 1`` for an irreducible generator."""
    if not gen.is_irreducible():
        raise ReducibleChainError("chain is reducible; the stationary distribution is not unique")
    n = gen.n_states
    A = gen.Q.T.tolil()
    A[n - 1, :] = np.ones(n)
    b = np.zeros(n)
    b[-1] = 1.0
    pi = spsolve(A.tocsc(), b)
    if pi.min() < -1e-12:
        raise ArithmeticError(f"stationary solve produced negative mass {pi.min():.3e}")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    scale = max(1.0, float(np.abs(gen.Q.diagonal()).max()))
    resid = float(np.abs(gen.Q.T @ pi).max())
    if resid > tol * scale:
        raise ArithmeticError(f"stationary residual {resid:.3e} exceeds tolerance")
    return pi


def stationary_three_state(params: Union[GeneralThreeStateParams, ThreeStateParams]) -> np.ndarray:
    """Stationary pmf over :func:`simplex_states` (N <= 200)."""
    if params.N > 200:
        raise ValueError("N > 200 is outside the oracle's scope")
    return stationary_from_generator(three_state_generator(params))


def _poisson_weights(lam: float, eps: float = 1e-16) -> np.ndarray:
    kmax = int(lam + 10 * math.sqrt(lam) + 30)
    k = np.arange(kmax + 1)
    w = np.exp(k * math.log(lam) - lam - gammaln(k + 1)) if lam > 0 else (k == 0).astype(float)
    tail = np.cumsum(w[::-1])[::-1]
    cut = np.nonzero(tail > eps)[0]
    return w[: cut[-1] + 1] if cut.size else w[:1]


def master_evolve(initial: np.ndarray, t: float, gen: GeneratorMatrix, max_lambda_t: float = 50.0) -> np.ndarray:
    """``initial @ expm(Q t)`` by uniformization, split into sub-intervals with ``Lambda dt <= max_lambda_t``."""
    p = np.asarray(initial, dtype=float).copy()
    if p.shape != (gen.n_states,):
        raise ValueError("initial pmf has the wrong length")
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return p
    lam = float(np.abs(gen.Q.diagonal()).max())
    if lam == 0:
        return p
    lam *= 1.0 + 1e-9
    P = (sparse.identity(gen.n_states, format="csr") + gen.Q / lam).T.tocsr()
    pieces = max(1, math.ceil(lam * t / max_lambda_t))
    w = _poisson_weights(lam * t / pieces)
    for _ in range(pieces):
        term = p
        acc = w[0] * term
        for wk in w[1:]:
            term = P @ term
            acc = acc + wk * term
        p = np.clip(acc, 0.0, None)
        p /= p.sum()
    return p


def xi_marginal(pmf: np.ndarray, N: int) -> Tuple[np.ndarray, np.ndarray]:
    """Distribution of the mood ``(X3 - X2)/(X2 + X3)`` conditioned on ``X2 + X3 > 0``."""
    s = simplex_states(N)
    c = s[:, 1] + s[:, 2]
    m = c > 0
    xi = (s[m, 2] - s[m, 1]) / c[m]
    vals, inv = np.unique(xi, return_inverse=True)
    probs = np.bincount(inv, weights=pmf[m])
    return vals, probs / probs.sum()


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def pmf_to_csv(path, pmf: np.ndarray, N: int, kind: str = "three-state") -> None:
    if kind == "two-state":
        header = "X,probability"
        rows = zip(range(N + 1), pmf)
        body = [f"{x},{pr:.17g}" for x, pr in rows]
    else:
        header = "X1,X2,X3,probability"
        body = [f"{a},{b},{c},{pr:.17g}" for (a, b, c), pr in zip(simplex_states(N), pmf)]
    Path(path).write_text(f"# N: {N}\n# order: lexicographic (X1, X2)\n{header}\n" + "\n".join(body) + "\n",
                          newline="\n")
