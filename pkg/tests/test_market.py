import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from herdlab.market import (
    MarketSeries,
    log_price,
    market_series,
    mood,
    populations_from_mood,
    price_series,
    returns,
)
from herdlab.trajectory import Trajectory

fractions = st.floats(0.01, 0.99)
moods = st.floats(-1.0, 1.0)


def test_mood_examples():
    assert mood(0.3, 0.3) == 0.0
    assert mood(0.2, 0.0) == 1.0
    assert mood(0.0, 0.2) == -1.0
    with pytest.raises(ValueError):
        mood(0.0, 0.0)


def test_populations_examples():
    assert populations_from_mood(0.4, 0.0) == pytest.approx((0.3, 0.3))
    assert populations_from_mood(1.0, 0.5) == (0.0, 0.0)


def test_log_price_examples():
    assert log_price(0.3, 0.0) == 0.0
    assert log_price(0.5, 1.0, 1.0) == pytest.approx(1.0)
    assert log_price(0.25, -0.5, 2.0) == pytest.approx(-3.0)
    with pytest.raises(ValueError):
        log_price(0.0, 0.5)


@given(fractions, moods)
def test_mood_round_trip(n_f, xi):
    n_o, n_p = populations_from_mood(n_f, xi)
    assert n_o >= 0 and n_p >= -1e-16
    assert n_f + n_o + n_p == pytest.approx(1.0, abs=1e-15)
    assert mood(n_o, n_p) == pytest.approx(xi, abs=1e-15)


@given(fractions, moods, st.floats(0.1, 10))
def test_log_price_is_linear_in_r0_and_odd_in_mood(n_f, xi, r0):
    assert log_price(n_f, -xi, r0) == pytest.approx(-log_price(n_f, xi, r0))
    assert log_price(n_f, xi, r0) == pytest.approx(r0 * log_price(n_f, xi, 1.0))


def _mood_traj(rng, n=400, dt=0.01):
    n_f = rng.uniform(0.2, 0.8, n)
    xi = rng.uniform(-1, 1, n)
    return Trajectory(0.0, dt, np.column_stack([n_f, xi]), ("n_f", "xi"), {})


def test_price_from_every_representation(rng):
    tr = _mood_traj(rng)
    p = price_series(tr, 1.5).values
    n_f, xi = tr.values.T
    n_o, n_p = populations_from_mood(n_f, xi)
    fp = Trajectory(0.0, 0.01, np.column_stack([n_f, n_p]), ("n_f", "n_p"), {})
    assert np.allclose(price_series(fp, 1.5).values, p, atol=1e-12)
    counts = np.rint(np.column_stack([n_f, n_o, n_p]) * 1000).astype(np.int64)
    counts[:, 0] = 1000 - counts[:, 1] - counts[:, 2]
    pc = price_series(Trajectory(0.0, 0.01, counts, ("X1", "X2", "X3"), {}), 1.5).values
    expect = log_price(counts[:, 0] / 1000, mood(counts[:, 2], counts[:, 1]), 1.5)
    assert np.allclose(pc, expect)
    with pytest.raises(ValueError):
        price_series(Trajectory(0.0, 0.01, rng.random(10), ("y",), {}))


def test_returns_length_and_telescoping(rng):
    ms = market_series(_mood_traj(rng), window_T=0.05)
    k = 5
    p, r = ms.price.values, ms.returns.values
    assert len(r) == len(p) - k
    assert np.allclose(r, p[k:] - p[:-k])
    assert ms.returns.t0 == pytest.approx(0.05)
    # summing one-step returns telescopes to the window return
    r1 = returns(ms.price, 0.01).values
    sums = np.convolve(r1, np.ones(k), mode="valid")
    assert np.allclose(sums, r, atol=1e-12)


@given(st.floats(-5, 5))
def test_returns_translation_invariant(c):
    p = np.sin(np.arange(50) * 0.3)
    a = returns(Trajectory(0.0, 0.1, p, ("p",), {}), 0.3).values
    b = returns(Trajectory(0.0, 0.1, p + c, ("p",), {}), 0.3).values
    assert np.allclose(a, b, atol=1e-12)


def test_window_must_be_grid_multiple():
    tr = Trajectory(0.0, 0.1, np.arange(20.0), ("p",), {})
    for bad in (0.15, 0.0, -0.1):
        with pytest.raises(ValueError):
            returns(tr, bad)
    with pytest.raises(ValueError):
        returns(tr, 3.0)
    with pytest.raises(ValueError):
        MarketSeries(tr, returns(tr, 0.2), 0.3)


def test_market_csv(tmp_path, rng):
    ms = market_series(_mood_traj(rng, n=20), window_T=0.02)
    path = tmp_path / "m.csv"
    ms.to_csv(path)
    text = path.read_text()
    assert "\r" not in text
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    assert lines[0] == "t,p,r,abs_r"
    first = lines[1].split(",")
    assert first[2] == "" and first[3] == ""
    last = [float(v) for v in lines[-1].split(",")]
    assert last[2] == pytest.approx(ms.returns.values[-1])
    assert last[3] == pytest.approx(abs(ms.returns.values[-1]))
