import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from herdlab.distances import ks_distance, tv_distance
from herdlab.jump import default_initial_state, simulate_jump, simulate_jump_fixed_dt
from herdlab.model import GeneralThreeStateParams, PopulationState, ThreeStateParams, TwoStateParams
from herdlab.oracle import simplex_states, stationary_birth_death, stationary_three_state
from herdlab.trajectory import EventLog

KIRMAN20 = TwoStateParams(0.2, 0.2, 1.0, 20)


def test_telegraph_occupation_is_half():
    p = TwoStateParams(1.0, 1.0, 0.0, 1)
    tr = simulate_jump("two-state", p, PopulationState.two_state(0, 1), t_end=2e4, sample_dt=1.0, seed=3)
    pmf = tr.occupation.pmf
    # dwell times are exponential with mean 1; about t_end/2 cycles
    stderr = 0.5 / np.sqrt(0.9 * 2e4 / 2)
    assert abs(pmf[1] - 0.5) < 3 * stderr


def test_absorption_is_flagged_and_constant():
    p = TwoStateParams(0.5, 0.0, 0.0, 10)
    tr = simulate_jump("two-state", p, PopulationState.two_state(2, 10), t_end=200.0, sample_dt=0.5, seed=1)
    assert tr.meta["absorbed"]
    k = int(np.ceil(tr.meta["absorbed_at"] / 0.5))
    assert np.all(tr.values[k:] == 10)
    assert tr.meta["n_events"] == 8


def test_kirman_matches_detailed_balance():
    tr = simulate_jump("two-state", KIRMAN20, t_end=1e6, sample_dt=1e6, seed=11)
    assert tv_distance(tr.occupation.weights, stationary_birth_death(KIRMAN20)) < 0.02


def test_tv_shrinks_with_run_length():
    exact = stationary_birth_death(KIRMAN20)
    tvs = []
    for t_end in (2e3, 8e3, 3.2e4, 1.28e5, 5.12e5):
        runs = [simulate_jump("two-state", KIRMAN20, t_end=t_end, sample_dt=t_end, seed=100 + s) for s in range(4)]
        tvs.append(np.mean([tv_distance(r.occupation.weights, exact) for r in runs]))
    assert all(b < a for a, b in zip(tvs, tvs[1:]))


def test_fixed_dt_agrees_with_gillespie():
    a = simulate_jump("two-state", KIRMAN20, t_end=1e5, sample_dt=1e5, seed=5)
    b = simulate_jump_fixed_dt("two-state", KIRMAN20, t_end=1e5, step_dt=4e-4, sample_dt=1e5, seed=6)
    s = np.arange(21)
    assert ks_distance(s, s, a.occupation.weights, b.occupation.weights) < 0.02


def test_fixed_dt_independent_agents_mean():
    p = TwoStateParams(1.0, 1.0, 0.0, 10)
    tr = simulate_jump_fixed_dt("two-state", p, t_end=5e3, step_dt=1e-2, sample_dt=1.0, seed=2)
    assert tr.values[len(tr) // 10:].mean() == pytest.approx(5.0, abs=0.15)


def test_fixed_dt_halving_recorded():
    tr = simulate_jump_fixed_dt("two-state", KIRMAN20, t_end=10.0, step_dt=1.0, sample_dt=1.0, seed=2)
    assert tr.meta["step_halvings"] > 0
    assert tr.meta["step_dt_final"] == 1.0 / 2 ** tr.meta["step_halvings"]


def test_three_state_conservation_and_oracle():
    sigma = np.full((3, 3), 0.4)
    h = np.array([[0, 1.0, 0.5], [1.0, 0, 1.5], [0.5, 1.5, 0]])
    p = GeneralThreeStateParams(sigma, h, 6)
    tr = simulate_jump("three-state", p, t_end=3e4, sample_dt=0.5, seed=9)
    assert np.all(tr.values.sum(axis=1) == 6)
    s = simplex_states(6)
    occ = tr.occupation.weights[s[:, 0], s[:, 1]]
    assert tv_distance(occ, stationary_three_state(p)) < 0.03


def test_financial_three_state_runs_with_feedback():
    p = ThreeStateParams(3.0, 3.0, 3.0, 10.0, alpha=2.0, N=30)
    tr = simulate_jump("three-state", p, t_end=5.0, sample_dt=0.01, seed=4)
    assert np.all(tr.values.sum(axis=1) == 30)
    assert tr.columns == ("X1", "X2", "X3")


def test_reproducible_per_seed():
    a = simulate_jump("two-state", KIRMAN20, t_end=100.0, sample_dt=0.1, seed=2**63 + 5)
    b = simulate_jump("two-state", KIRMAN20, t_end=100.0, sample_dt=0.1, seed=2**63 + 5)
    c = simulate_jump("two-state", KIRMAN20, t_end=100.0, sample_dt=0.1, seed=2**63 + 6)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_event_log_strictly_increasing():
    tr = simulate_jump("two-state", KIRMAN20, t_end=50.0, sample_dt=1.0, seed=1, record_events=True)
    ev = tr.events
    assert isinstance(ev, EventLog)
    assert len(ev.times) == tr.meta["n_events"]
    assert np.all(np.diff(ev.times) > 0)
    # replaying the log reproduces the sampled path
    X = np.cumsum(np.where(ev.channels == 0, 1, -1)) + tr.values[0]
    idx = np.searchsorted(ev.times, tr.times, side="right") - 1
    replay = np.where(idx >= 0, X[np.maximum(idx, 0)], tr.values[0])
    assert np.array_equal(replay, tr.values)


def test_default_initial_state():
    assert default_initial_state("two-state", TwoStateParams(1.0, 3.0, 1.0, 10)).counts == (2,)
    assert default_initial_state("three-state", ThreeStateParams(1, 1, 1, 2, N=11)).counts == (5, 3, 3)


def test_input_validation():
    with pytest.raises(ValueError):
        simulate_jump("two-state", KIRMAN20, t_end=0.0)
    with pytest.raises(ValueError):
        simulate_jump("four-state", KIRMAN20)
    with pytest.raises(TypeError):
        simulate_jump("three-state", KIRMAN20)
    with pytest.raises(ValueError):
        simulate_jump("two-state", KIRMAN20, PopulationState.two_state(3, 10))


@given(st.integers(0, 2**64 - 1), st.integers(1, 12))
def test_three_state_simplex_invariant(seed, N):
    p = ThreeStateParams(1.0, 2.0, 1.0, 5.0, alpha=1.0, N=N)
    tr = simulate_jump("three-state", p, t_end=2.0, sample_dt=0.05, seed=seed)
    assert np.all(tr.values.sum(axis=1) == N)
    assert np.all(tr.values >= 0)
    assert len(tr) == 41
